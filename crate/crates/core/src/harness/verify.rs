//! Self-checks on small instances: gradients, the closed-form subproblem,
//! line-search postconditions and per-iteration inequalities.

use std::fmt;

use ndarray::Array1;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::kernels::{catalog, kernel_grad_check, HessDiag, Kernel};
use crate::problems::{build_instance, instance_rng, Family, InstanceSpec, Problem, Regularizer};
use crate::solvers::{solve, Method, SolverConfig};
use crate::subproblem::{approx_prox, subproblem_oracle_check, MappingRequest};

use super::starting_point;

pub const GRADIENT_TOL: f64 = 1e-5;
pub const ORACLE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub module: &'static str,
    pub operation: &'static str,
    pub inputs: String,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        write!(
            f,
            "{mark} {}::{} [{}] {}",
            self.module, self.operation, self.inputs, self.detail
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.failures().count();
        write!(f, "{} checks, {failed} failed", self.checks.len())
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Problem dimension for the instance checks, at most 50.
    pub n: usize,
    /// Random points per gradient check.
    pub points: usize,
    /// Random 1-D requests per regulariser in the subproblem check.
    pub oracle_cases: usize,
    /// Instances per family for the solver checks.
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            n: 40,
            points: 50,
            oracle_cases: 200,
            instances: 3,
            seed: 2024,
        }
    }
}

/// Largest relative error `|fd − g| / (1 + |g|)` between `∇f(x)` and central
/// differences of `f`.
pub fn gradient_error(problem: &Problem, x: &Array1<f64>) -> f64 {
    let grad = problem.f_grad(x);
    let mut probe = x.clone();
    let mut worst = 0.0_f64;
    for i in 0..x.len() {
        let h = 1e-6 * (1.0 + x[i].abs());
        probe[i] = x[i] + h;
        let up = problem.f_value(&probe);
        probe[i] = x[i] - h;
        let down = problem.f_value(&probe);
        probe[i] = x[i];
        let fd = (up - down) / (2.0 * h);
        let err = (fd - grad[i]).abs() / (1.0 + grad[i].abs());
        worst = worst.max(if err.is_nan() { f64::INFINITY } else { err });
    }
    worst
}

/// Random point in the interior of the problem's domain.
pub fn interior_point(rng: &mut ChaCha8Rng, n: usize, orthant: bool) -> Array1<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            if orthant {
                z.abs() + 0.05
            } else {
                z
            }
        })
        .collect()
}

/// Finite-difference check of `∇f` at `points` random interior points.
pub fn check_problem_gradient(
    problem: &Problem,
    label: &str,
    points: usize,
    seed: u64,
) -> CheckResult {
    let mut rng = instance_rng(seed);
    let orthant = problem.kernel().is_orthant();
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for _ in 0..points {
        let x = interior_point(&mut rng, problem.dim(), orthant);
        let err = gradient_error(problem, &x);
        worst = worst.max(err);
        if !(err <= GRADIENT_TOL) {
            failures += 1;
        }
    }
    CheckResult {
        module: "problems",
        operation: "f_grad",
        inputs: format!("{label}, {points} points, seed {seed}"),
        passed: failures == 0,
        detail: format!("max rel err {worst:.3e}, {failures} failures"),
    }
}

fn check_kernel_gradient(kernel: &Kernel, n: usize, points: usize, seed: u64) -> CheckResult {
    let mut rng = instance_rng(seed);
    let mut worst = 0.0_f64;
    let mut failures = 0;
    for _ in 0..points {
        let x = interior_point(&mut rng, n, kernel.is_orthant());
        let err = kernel_grad_check(kernel, &x, 1e-6);
        worst = worst.max(err);
        if !(err <= GRADIENT_TOL) {
            failures += 1;
        }
    }
    CheckResult {
        module: "kernels",
        operation: "gradient",
        inputs: format!("{kernel}, n={n}, {points} points"),
        passed: failures == 0,
        detail: format!("max rel err {worst:.3e}, {failures} failures"),
    }
}

/// A random one-dimensional subproblem for `reg`.
pub fn random_request_data(rng: &mut ChaCha8Rng, reg: Regularizer) -> (f64, f64, f64, f64) {
    let orthant = matches!(reg, Regularizer::L1Nonneg { .. });
    let z: f64 = rng.sample(StandardNormal);
    let x = if orthant { z.abs() + 0.01 } else { z };
    let g: f64 = 2.0 * rng.sample::<f64, _>(StandardNormal);
    let lambda = rng.random_range(0.1..2.0);
    let h = rng.random_range(0.5..5.0);
    (x, g, lambda, h)
}

fn check_subproblem(reg_kind: &str, cases: usize, seed: u64) -> CheckResult {
    let mut rng = instance_rng(seed);
    let mut worst = f64::NEG_INFINITY;
    let mut failures = 0;
    for _ in 0..cases {
        let theta = rng.random_range(0.0..1.0);
        let reg = match reg_kind {
            "zero" => Regularizer::Zero,
            "l1" => Regularizer::L1 { theta },
            _ => Regularizer::L1Nonneg { theta },
        };
        let (x, g, lambda, h) = random_request_data(&mut rng, reg);
        let (x, g) = (Array1::from_elem(1, x), Array1::from_elem(1, g));
        let hess = HessDiag {
            diag: Array1::from_elem(1, h),
            clamped: vec![false],
        };
        let req = MappingRequest {
            x: &x,
            grad: &g,
            lambda,
            hess: &hess,
            reg,
            strict_interior: false,
        };
        let gap = match approx_prox(&req) {
            Ok(y) => subproblem_oracle_check(&req, &y),
            Err(_) => f64::INFINITY,
        };
        worst = worst.max(gap);
        if !(gap <= ORACLE_TOL) {
            failures += 1;
        }
    }
    CheckResult {
        module: "subproblem",
        operation: "approx_prox",
        inputs: format!("g = {reg_kind}, {cases} random 1-D cases"),
        passed: failures == 0,
        detail: format!("max gap over grid oracle {worst:.3e}, {failures} failures"),
    }
}

fn check_solver_run(
    problem: &Problem,
    x0: &Array1<f64>,
    method: Method,
    label: &str,
) -> CheckResult {
    let cfg = SolverConfig::new(method).with_diagnostics(true);
    let inputs = format!("{method} on {label}");
    match solve(problem, x0, &cfg) {
        Ok(out) => {
            // the search is guaranteed to terminate only for smooth problems
            // with g ≡ 0; elsewhere fallbacks are reported, not failed
            let fallbacks_ok = method != Method::AbpgVmaw
                || *problem.regularizer() != Regularizer::Zero
                || out.ls_fallbacks == 0;
            CheckResult {
                module: "solvers",
                operation: "diagnostics",
                inputs,
                passed: out.diagnostics_violations == 0 && fallbacks_ok,
                detail: format!(
                    "{} iterations, {} violations, {} line-search fallbacks{}",
                    out.iterations,
                    out.diagnostics_violations,
                    out.ls_fallbacks,
                    out.violation_log
                        .first()
                        .map(|v| format!(", first: {v}"))
                        .unwrap_or_default()
                ),
            }
        }
        Err(e) => CheckResult {
            module: "solvers",
            operation: "diagnostics",
            inputs,
            passed: false,
            detail: e.to_string(),
        },
    }
}

/// Runs every check on small instances. Each failure names its module,
/// operation and inputs.
pub fn verify_suite(opts: &VerifyOptions) -> VerifyReport {
    let n = opts.n.clamp(2, 50);
    let mut checks = Vec::new();

    for (i, (family, m, theta)) in [(Family::LpLs, n / 2, 0.1), (Family::NonnegKl, 2 * n, 0.05)]
        .into_iter()
        .enumerate()
    {
        let spec = InstanceSpec::new(family, m, n, theta, opts.seed + i as u64);
        match build_instance(&spec) {
            Ok(inst) => {
                let label = format!("{family} {m}x{n}");
                checks.push(check_problem_gradient(
                    &inst.problem,
                    &label,
                    opts.points,
                    opts.seed,
                ));
            }
            Err(e) => checks.push(CheckResult {
                module: "problems",
                operation: "build_instance",
                inputs: format!("{spec:?}"),
                passed: false,
                detail: e.to_string(),
            }),
        }
    }

    for kernel in catalog() {
        checks.push(check_kernel_gradient(&kernel, n, opts.points, opts.seed));
    }

    for (k, reg) in ["zero", "l1", "l1_nonneg"].into_iter().enumerate() {
        checks.push(check_subproblem(
            reg,
            opts.oracle_cases,
            opts.seed + k as u64,
        ));
    }

    for s in 0..opts.instances as u64 {
        let seed = opts.seed + 100 + s;
        for (family, m, theta, methods) in [
            (
                Family::LpLs,
                n / 2,
                0.1,
                &[Method::AbpgVmaw, Method::Abpg][..],
            ),
            (
                Family::NonnegKl,
                2 * n,
                0.05,
                &[Method::AbpgVmaw, Method::Abpg, Method::Bpg][..],
            ),
        ] {
            let spec = InstanceSpec::new(family, m, n, theta, seed);
            let inst = match build_instance(&spec) {
                Ok(inst) => inst,
                Err(e) => {
                    checks.push(CheckResult {
                        module: "problems",
                        operation: "build_instance",
                        inputs: format!("{spec:?}"),
                        passed: false,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let x0 = starting_point(family, n, super::x0_seed(seed));
            for &method in methods {
                let label = format!("{family} {m}x{n} seed {seed}");
                checks.push(check_solver_run(&inst.problem, &x0, method, &label));
            }
        }
    }
    VerifyReport { checks }
}
