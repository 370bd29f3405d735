use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::problems::{Family, InstanceSpec, Scaling};
use crate::solvers::{Method, SolverConfig};

/// Offset between an instance seed and the seed of its starting point.
pub const X0_SEED_OFFSET: u64 = 1 << 32;

/// What the `wall_ns` trace column records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clock {
    /// Monotonic wall time since the start of the solve loop.
    #[default]
    Wall,
    /// Always zero, which makes trace files reproducible byte for byte.
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    /// `(m, n)` pairs.
    pub sizes: Vec<(usize, usize)>,
    pub num_seeds: usize,
    pub base_seed: u64,
    #[serde(default = "default_p")]
    pub p: f64,
    pub theta: f64,
    /// Fraction of nonzeros in the ground truth. Defaults by family.
    #[serde(default)]
    pub sparsity: Option<f64>,
    #[serde(default)]
    pub scaling: Scaling,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub clock: Clock,
    #[serde(default = "default_parallel")]
    pub parallel: bool,
    /// Also write `A`, `b` and `x*` of every instance in BOPT format.
    #[serde(default)]
    pub save_instances: bool,
    pub solvers: Vec<SolverConfig>,
}

fn default_p() -> f64 {
    1.2
}

fn default_parallel() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config. A relative `output_dir` is resolved against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&fs::read_to_string(path)?)?;
        if cfg.output_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.output_dir = parent.join(&cfg.output_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_seeds == 0 {
            return Err(Error::Config("num_seeds must be at least 1".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::Config(
                "sizes must list at least one (m, n) pair".into(),
            ));
        }
        if self.solvers.is_empty() {
            return Err(Error::Config("solvers must not be empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.solvers {
            s.validate()?;
            if !seen.insert(s.method) {
                return Err(Error::Config(format!("solver {} listed twice", s.method)));
            }
            if s.method == Method::Bpg && self.family != Family::NonnegKl {
                return Err(Error::Config("bpg runs only on nonneg_kl".into()));
            }
        }
        for &(m, n) in &self.sizes {
            self.instance_spec(m, n, self.base_seed).validate()?;
        }
        Ok(())
    }

    pub fn execution(&self) -> Execution {
        if self.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }

    pub fn instance_spec(&self, m: usize, n: usize, seed: u64) -> InstanceSpec {
        let mut spec = InstanceSpec::new(self.family, m, n, self.theta, seed);
        spec.p = self.p;
        spec.scaling = self.scaling;
        if let Some(s) = self.sparsity {
            spec.sparsity = s;
        }
        spec
    }

    /// Instance seed of the `seed_idx`-th run at the `size_idx`-th size.
    pub fn instance_seed(&self, size_idx: usize, seed_idx: usize) -> u64 {
        self.base_seed
            .wrapping_add((size_idx * self.num_seeds + seed_idx) as u64)
    }

    pub fn ensure_output_dir(&self) -> Result<()> {
        fs::create_dir_all(self.output_dir.join("traces"))?;
        let probe = self.output_dir.join(".write-probe");
        fs::write(&probe, b"")?;
        fs::remove_file(probe)?;
        Ok(())
    }
}

/// Starting-point seed for a given instance seed.
pub fn x0_seed(instance_seed: u64) -> u64 {
    instance_seed.wrapping_add(X0_SEED_OFFSET)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
family = "lp_ls"
sizes = [[20, 100]]
num_seeds = 1
base_seed = 7
theta = 0.1
output_dir = "out"

[[solvers]]
method = "abpg_vmaw"
c1 = 0.99
c2 = 0.999
mu = 0.9
eta = 2.0
max_bracket = 200
max_bisect = 60

[[solvers]]
method = "abpg"
delta = 0.9

[[solvers]]
method = "pgl"
shrink = 0.5
kernel = "sq_euclid"
"#;

    #[test]
    fn parses_sample_and_round_trips() {
        let cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(cfg.sizes, vec![(20, 100)]);
        assert_eq!(cfg.p, 1.2);
        assert_eq!(cfg.clock, Clock::Wall);
        assert_eq!(cfg.solvers[2].kernel.unwrap().to_string(), "sq_euclid");
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let zero = SAMPLE.replace("num_seeds = 1", "num_seeds = 0");
        assert!(ExperimentConfig::from_toml_str(&zero).is_err());
        let unknown = SAMPLE.replace("theta = 0.1", "theta = 0.1\nbogus = 1");
        assert!(ExperimentConfig::from_toml_str(&unknown).is_err());
        let order = SAMPLE.replace("c1 = 0.99", "c1 = 0.9999");
        assert!(ExperimentConfig::from_toml_str(&order).is_err());
        let bpg = SAMPLE.replace("method = \"pgl\"", "method = \"bpg\"");
        assert!(ExperimentConfig::from_toml_str(&bpg).is_err());
    }

    #[test]
    fn seeds_follow_fixed_arithmetic() {
        let mut cfg = ExperimentConfig::from_toml_str(SAMPLE).unwrap();
        cfg.num_seeds = 5;
        assert_eq!(cfg.instance_seed(0, 0), 7);
        assert_eq!(cfg.instance_seed(1, 2), 7 + 5 + 2);
        assert_eq!(x0_seed(7), 7 + (1 << 32));
    }
}
