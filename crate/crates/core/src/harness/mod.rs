//! Experiment runner: instance generation, solver suites, trace and summary
//! files, plot data and the self-check suite.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! traces/<family>_m<m>_n<n>_seed<seed>_<method>.csv
//! summary.csv     one row per (m, n, algorithm)
//! runs.csv        one row per run, with convergence and diagnostic counts
//! instances/      BOPT matrices, only with save_instances = true
//! plot/           written by emit_plot_data
//! ```

pub mod config;
pub mod plot;
pub mod trace;
pub mod verify;

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

pub use config::{x0_seed, Clock, ExperimentConfig};
pub use plot::{emit_plot_data, PlotMode};
pub use trace::{read_summary, read_trace_file, write_summary, write_trace, SummaryRow};
pub use verify::{verify_suite, VerifyOptions, VerifyReport};

use crate::error::Result;
use crate::par;
use crate::problems::{build_instance, instance_rng, write_matrix, Family, GeneratedInstance};
use crate::solvers::{solve_with_truth, Method, SolveOutcome, TraceRecord};

/// Offset added to every coordinate of a `nonneg_kl` starting point.
pub const KL_X0_OFFSET: f64 = 0.1;

/// Starting point for an instance: iid `N(0, 1)`, or `|N(0, 1)| + 0.1` on
/// the nonnegative orthant.
pub fn starting_point(family: Family, n: usize, seed: u64) -> Array1<f64> {
    let mut rng = instance_rng(seed);
    (0..n)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            match family {
                Family::NonnegKl => z.abs() + KL_X0_OFFSET,
                _ => z,
            }
        })
        .collect()
}

pub fn trace_file_name(family: Family, m: usize, n: usize, seed: u64, method: Method) -> String {
    format!("{family}_m{m}_n{n}_seed{seed}_{}.csv", method.key())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub iterations: usize,
    pub converged: bool,
    pub final_obj: f64,
    pub final_acc: Option<f64>,
    pub time_s: f64,
    pub diagnostics_violations: usize,
    pub violation_log: Vec<String>,
    pub ls_fallbacks: usize,
    pub ls_accepted: usize,
    pub backtrack_flags: usize,
    pub stationarity: f64,
    /// Smallest coordinate over all iterates, `x^0` included.
    pub min_coordinate: f64,
    pub final_record: TraceRecord,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub trace_file: Option<PathBuf>,
    pub result: std::result::Result<RunStats, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub summary: Vec<SummaryRow>,
    pub runs: Vec<RunRecord>,
    pub summary_path: PathBuf,
    pub trace_dir: PathBuf,
}

impl ExperimentReport {
    pub fn row(&self, m: usize, n: usize, method: Method) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.m == m && r.n == n && r.algorithm == method)
    }

    pub fn runs_of(&self, method: Method) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().filter(move |r| r.method == method)
    }
}

fn stats(out: &SolveOutcome, trace: &[TraceRecord]) -> RunStats {
    let last = trace.last().cloned().expect("trace has a starting record");
    RunStats {
        iterations: out.iterations,
        converged: out.converged,
        final_obj: last.obj,
        final_acc: last.acc,
        time_s: last.wall_ns as f64 * 1e-9,
        diagnostics_violations: out.diagnostics_violations,
        violation_log: out.violation_log.clone(),
        ls_fallbacks: out.ls_fallbacks,
        ls_accepted: out.ls_accepted,
        backtrack_flags: out.backtrack_flags,
        stationarity: out.stationarity,
        min_coordinate: out.min_coordinate,
        final_record: last,
    }
}

fn save_instance(dir: &Path, inst: &GeneratedInstance) -> Result<()> {
    fs::create_dir_all(dir)?;
    let s = &inst.spec;
    let stem = format!("{}_m{}_n{}_seed{}", s.family, s.m, s.n, s.seed);
    let row = |v: &Array1<f64>| Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row");
    for (tag, mat) in [
        ("A", inst.a.clone()),
        ("b", row(&inst.b)),
        ("xstar", row(&inst.x_star)),
    ] {
        let f = BufWriter::new(File::create(dir.join(format!("{stem}_{tag}.bopt")))?);
        write_matrix(f, &mat)?;
    }
    Ok(())
}

struct Job {
    m: usize,
    n: usize,
    seed: u64,
}

fn run_job(cfg: &ExperimentConfig, trace_dir: &Path, job: &Job) -> Vec<RunRecord> {
    let record = |method, trace_file, result| RunRecord {
        m: job.m,
        n: job.n,
        seed: job.seed,
        method,
        trace_file,
        result,
    };
    let inst = match build_instance(&cfg.instance_spec(job.m, job.n, job.seed)) {
        Ok(inst) => inst,
        Err(e) => {
            let msg = format!("instance: {e}");
            return cfg
                .solvers
                .iter()
                .map(|s| record(s.method, None, Err(msg.clone())))
                .collect();
        }
    };
    if cfg.save_instances {
        if let Err(e) = save_instance(&cfg.output_dir.join("instances"), &inst) {
            let msg = format!("saving instance: {e}");
            return cfg
                .solvers
                .iter()
                .map(|s| record(s.method, None, Err(msg.clone())))
                .collect();
        }
    }
    let x0 = starting_point(cfg.family, job.n, x0_seed(job.seed));
    cfg.solvers
        .iter()
        .map(|solver| {
            let result = solve_with_truth(&inst.problem, &x0, solver, Some(&inst.x_star));
            let mut out = match result {
                Ok(out) => out,
                Err(e) => return record(solver.method, None, Err(e.to_string())),
            };
            if cfg.clock == Clock::Off {
                out.trace.iter_mut().for_each(|r| r.wall_ns = 0);
            }
            let path = trace_dir.join(trace_file_name(
                cfg.family,
                job.m,
                job.n,
                job.seed,
                solver.method,
            ));
            let written = File::create(&path)
                .map_err(Into::into)
                .and_then(|f| write_trace(BufWriter::new(f), &out.trace));
            match written {
                Ok(()) => record(solver.method, Some(path), Ok(stats(&out, &out.trace))),
                Err(e) => record(solver.method, None, Err(format!("writing trace: {e}"))),
            }
        })
        .collect()
}

fn status_of(runs: &[&RunRecord]) -> String {
    let failed: Vec<&String> = runs
        .iter()
        .filter_map(|r| r.result.as_ref().err())
        .collect();
    match failed.first() {
        None => "ok".into(),
        Some(first) => format!("failed {}/{}: {first}", failed.len(), runs.len()),
    }
}

/// Builds summary rows in config order from per-run final records.
pub fn summarize(cfg: &ExperimentConfig, runs: &[RunRecord]) -> Vec<SummaryRow> {
    let mut rows = Vec::new();
    for &(m, n) in &cfg.sizes {
        for solver in &cfg.solvers {
            let group: Vec<&RunRecord> = runs
                .iter()
                .filter(|r| r.m == m && r.n == n && r.method == solver.method)
                .collect();
            let finals: Vec<[TraceRecord; 1]> = group
                .iter()
                .filter_map(|r| r.result.as_ref().ok())
                .map(|s| [s.final_record.clone()])
                .collect();
            rows.push(SummaryRow::from_traces(
                m,
                n,
                solver.method,
                finals.iter().map(|f| &f[..]),
                status_of(&group),
            ));
        }
    }
    rows
}

/// Recomputes the summary of `cfg` from the trace files on disk.
pub fn summarize_from_traces(cfg: &ExperimentConfig) -> Result<Vec<SummaryRow>> {
    let trace_dir = cfg.output_dir.join("traces");
    let mut rows = Vec::new();
    for (size_idx, &(m, n)) in cfg.sizes.iter().enumerate() {
        for solver in &cfg.solvers {
            let mut traces = Vec::new();
            let mut missing = 0;
            for seed_idx in 0..cfg.num_seeds {
                let seed = cfg.instance_seed(size_idx, seed_idx);
                let path = trace_dir.join(trace_file_name(cfg.family, m, n, seed, solver.method));
                if path.exists() {
                    traces.push(read_trace_file(&path)?);
                } else {
                    missing += 1;
                }
            }
            let status = if missing == 0 {
                "ok".to_string()
            } else {
                format!("failed {missing}/{}", cfg.num_seeds)
            };
            rows.push(SummaryRow::from_traces(
                m,
                n,
                solver.method,
                traces.iter().map(Vec::as_slice),
                status,
            ));
        }
    }
    Ok(rows)
}

fn write_runs(path: &Path, runs: &[RunRecord]) -> Result<()> {
    let mut out = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    out.write_record([
        "m",
        "n",
        "seed",
        "algorithm",
        "iterations",
        "converged",
        "final_obj",
        "final_acc",
        "time_s",
        "violations",
        "ls_fallbacks",
        "backtrack_flags",
        "status",
    ])?;
    for r in runs {
        let mut row = vec![
            r.m.to_string(),
            r.n.to_string(),
            r.seed.to_string(),
            r.method.to_string(),
        ];
        match &r.result {
            Ok(s) => row.extend([
                s.iterations.to_string(),
                s.converged.to_string(),
                trace::fmt_f64(s.final_obj),
                s.final_acc.map(trace::fmt_f64).unwrap_or_default(),
                trace::fmt_f64(s.time_s),
                s.diagnostics_violations.to_string(),
                s.ls_fallbacks.to_string(),
                s.backtrack_flags.to_string(),
                "ok".into(),
            ]),
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 8));
                row.push(e.clone());
            }
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Runs every solver of `cfg` on every generated instance and writes the
/// trace, summary and per-run files. Failed runs are reported in the status
/// columns and do not stop the experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    cfg.ensure_output_dir()?;
    let trace_dir = cfg.output_dir.join("traces");
    let jobs: Vec<Job> = cfg
        .sizes
        .iter()
        .enumerate()
        .flat_map(|(size_idx, &(m, n))| {
            (0..cfg.num_seeds).map(move |seed_idx| Job {
                m,
                n,
                seed: cfg.instance_seed(size_idx, seed_idx),
            })
        })
        .collect();
    let runs: Vec<RunRecord> =
        par::map(cfg.execution(), &jobs, |job| run_job(cfg, &trace_dir, job))
            .into_iter()
            .flatten()
            .collect();
    let summary = summarize(cfg, &runs);
    let summary_path = cfg.output_dir.join("summary.csv");
    write_summary(BufWriter::new(File::create(&summary_path)?), &summary)?;
    write_runs(&cfg.output_dir.join("runs.csv"), &runs)?;
    Ok(ExperimentReport {
        summary,
        runs,
        summary_path,
        trace_dir,
    })
}
