use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::harness::trace::{fmt_f64, read_trace_file};
use crate::solvers::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotMode {
    PerIteration,
    PerTime,
}

impl PlotMode {
    fn tag(self) -> &'static str {
        match self {
            PlotMode::PerIteration => "iter",
            PlotMode::PerTime => "time",
        }
    }
}

impl FromStr for PlotMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iter" | "per_iteration" => Ok(PlotMode::PerIteration),
            "time" | "per_time" => Ok(PlotMode::PerTime),
            _ => Err(Error::Config(format!("unknown plot mode `{s}`"))),
        }
    }
}

/// Trace files under `dir/traces`, or directly in `dir`, in name order.
pub fn trace_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let nested = dir.join("traces");
    let root = if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    };
    let mut files: Vec<PathBuf> = fs::read_dir(&root)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn x_values(trace: &[TraceRecord], mode: PlotMode, name: &str) -> Result<Vec<String>> {
    match mode {
        PlotMode::PerIteration => Ok(trace.iter().map(|r| r.iter.to_string()).collect()),
        PlotMode::PerTime => {
            if trace.windows(2).any(|w| w[1].wall_ns <= w[0].wall_ns) {
                return Err(Error::Format(format!(
                    "{name}: wall_ns is not strictly increasing (traces written with clock = \"off\"?)"
                )));
            }
            Ok(trace
                .iter()
                .map(|r| fmt_f64(r.wall_ns as f64 * 1e-9))
                .collect())
        }
    }
}

fn series(x_label: &str, y_label: &str, xs: &[String], ys: impl Iterator<Item = f64>) -> String {
    let mut out = format!("{x_label}\t{y_label}\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x}\t{}", fmt_f64(y));
    }
    out
}

/// Writes `<stem>.obj.<mode>.tsv` and, when accuracy was recorded,
/// `<stem>.acc.<mode>.tsv` into `dir/plot` for every trace. Values are raw;
/// log scaling is left to the plotter.
pub fn emit_plot_data(dir: &Path, mode: PlotMode) -> Result<Vec<PathBuf>> {
    let files = trace_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format(format!(
            "no trace files under {}",
            dir.display()
        )));
    }
    let out_dir = dir.join("plot");
    fs::create_dir_all(&out_dir)?;
    let x_label = match mode {
        PlotMode::PerIteration => "iter",
        PlotMode::PerTime => "time_s",
    };
    let mut written = Vec::new();
    for file in files {
        let stem = file
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Format(format!("bad file name {}", file.display())))?
            .to_string();
        let trace = read_trace_file(&file)?;
        let xs = x_values(&trace, mode, &stem)?;
        let obj_path = out_dir.join(format!("{stem}.obj.{}.tsv", mode.tag()));
        fs::write(
            &obj_path,
            series(x_label, "obj", &xs, trace.iter().map(|r| r.obj)),
        )?;
        written.push(obj_path);
        if let Some(acc) = trace.iter().map(|r| r.acc).collect::<Option<Vec<f64>>>() {
            let acc_path = out_dir.join(format!("{stem}.acc.{}.tsv", mode.tag()));
            fs::write(&acc_path, series(x_label, "acc", &xs, acc.into_iter()))?;
            written.push(acc_path);
        }
    }
    Ok(written)
}

/// Parses a two-column series file back into `(x, y)` pairs.
pub fn read_series(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .skip(1)
        .map(|line| {
            let (x, y) = line
                .split_once('\t')
                .ok_or_else(|| Error::Format(format!("bad series line `{line}`")))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad number `{s}`")))
            };
            Ok((num(x)?, num(y)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::trace::write_trace;

    fn rec(iter: usize, acc: Option<f64>, wall_ns: u64) -> TraceRecord {
        TraceRecord {
            iter,
            obj: 10.0 / (iter + 1) as f64,
            acc,
            step_t: 1.0,
            lambda_used: 0.5,
            ls_evals: 1,
            dk_norm: 0.1,
            xdiff: 0.1,
            wall_ns,
        }
    }

    fn write(dir: &Path, name: &str, trace: &[TraceRecord]) {
        let f = fs::File::create(dir.join(name)).unwrap();
        write_trace(f, trace).unwrap();
    }

    #[test]
    fn two_series_per_trace_with_accuracy() {
        let dir = tempfile::tempdir().unwrap();
        let trace: Vec<_> = (0..5)
            .map(|k| rec(k, Some(1.0 / (k + 1) as f64), 0))
            .collect();
        write(dir.path(), "run.csv", &trace);
        let files = emit_plot_data(dir.path(), PlotMode::PerIteration).unwrap();
        assert_eq!(files.len(), 2);
        let obj = read_series(&files[0]).unwrap();
        assert_eq!(obj.len(), 5);
        assert_eq!(obj[4], (4.0, 2.0));
    }

    #[test]
    fn missing_accuracy_emits_objective_only() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "run.csv", &[rec(0, None, 0), rec(1, None, 5)]);
        let files = emit_plot_data(dir.path(), PlotMode::PerIteration).unwrap();
        assert_eq!(files.len(), 1);
        assert!(files[0].to_str().unwrap().ends_with("run.obj.iter.tsv"));
    }

    #[test]
    fn time_mode_needs_increasing_clock() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "run.csv", &[rec(0, None, 0), rec(1, None, 0)]);
        assert!(emit_plot_data(dir.path(), PlotMode::PerTime).is_err());

        write(
            dir.path(),
            "run.csv",
            &[rec(0, None, 0), rec(1, None, 7), rec(2, None, 9)],
        );
        let files = emit_plot_data(dir.path(), PlotMode::PerTime).unwrap();
        let xs: Vec<f64> = read_series(&files[0])
            .unwrap()
            .iter()
            .map(|p| p.0)
            .collect();
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
    }
}
