use std::path::PathBuf;
use std::process::ExitCode;

use abpg_core::harness::{
    emit_plot_data, run_experiment, verify_suite, ExperimentConfig, PlotMode, VerifyOptions,
};
use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bench",
    about = "Run solver experiments and export their results"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate instances, run every configured solver and write traces and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run jobs one after another.
        #[arg(long)]
        sequential: bool,
    },
    /// Turn trace files into two-column TSV series.
    Plotdata {
        #[arg(long, value_enum)]
        mode: Mode,
        /// Experiment output directory, or a directory of trace files.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run the self-check suite on small instances.
    Verify {
        #[arg(long, default_value_t = VerifyOptions::default().seed)]
        seed: u64,
        #[arg(long, default_value_t = VerifyOptions::default().n)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Iter,
    Time,
}

impl From<Mode> for PlotMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Iter => PlotMode::PerIteration,
            Mode::Time => PlotMode::PerTime,
        }
    }
}

fn run(config: PathBuf, out: Option<PathBuf>, sequential: bool) -> Result<ExitCode> {
    let mut cfg =
        ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if sequential {
        cfg.parallel = false;
    }
    let report = run_experiment(&cfg)?;
    println!(
        "{:>5} {:>5} {:>10} {:>9} {:>14} {:>12} {:>10}  status",
        "m", "n", "algorithm", "iters", "obj", "acc", "time_s"
    );
    for r in &report.summary {
        println!(
            "{:>5} {:>5} {:>10} {:>9.1} {:>14.6e} {:>12.4e} {:>10.4}  {}",
            r.m,
            r.n,
            r.algorithm.to_string(),
            r.mean_iterations,
            r.mean_obj,
            r.mean_acc.unwrap_or(f64::NAN),
            r.mean_time_s,
            r.status
        );
    }
    println!("summary: {}", report.summary_path.display());
    let failed = report.runs.iter().filter(|r| r.result.is_err()).count();
    if failed > 0 {
        eprintln!("{failed} runs failed; see the status column");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            sequential,
        } => run(config, out, sequential),
        Command::Plotdata { mode, input } => emit_plot_data(&input, mode.into())
            .map(|files| {
                println!(
                    "wrote {} files under {}",
                    files.len(),
                    input.join("plot").display()
                );
                ExitCode::SUCCESS
            })
            .map_err(Into::into),
        Command::Verify { seed, n } => {
            let report = verify_suite(&VerifyOptions {
                seed,
                n,
                ..Default::default()
            });
            println!("{report}");
            Ok(if report.all_passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
