use std::fs;
use std::path::Path;
use std::process::Command;

const CONFIG: &str = r#"
family = "lp_ls"
sizes = [[10, 30]]
num_seeds = 2
base_seed = 3
theta = 0.1
output_dir = "out"

[[solvers]]
method = "abpg_vmaw"

[[solvers]]
method = "pg"
"#;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bench"))
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.toml");
    fs::write(&path, CONFIG).unwrap();
    path
}

#[test]
fn run_then_plotdata_in_both_modes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let status = bench()
        .args(["run", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert!(status.success());

    let out = dir.path().join("out");
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().next().unwrap().ends_with(",status"));
    assert_eq!(fs::read_dir(out.join("traces")).unwrap().count(), 4);

    for mode in ["iter", "time"] {
        let status = bench()
            .args(["plotdata", "--mode", mode, "--in"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "plotdata --mode {mode}");
    }
    let plots: Vec<_> = fs::read_dir(out.join("plot")).unwrap().collect();
    // obj and acc series for 4 traces in 2 modes
    assert_eq!(plots.len(), 16);
}

#[test]
fn out_flag_overrides_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let other = dir.path().join("elsewhere");
    let status = bench()
        .args(["run", "--sequential", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&other)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(other.join("summary.csv").exists());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn verify_passes() {
    let output = bench().args(["verify", "--n", "20"]).output().unwrap();
    let text = String::from_utf8_lossy(&output.stdout);
    assert!(output.status.success(), "{text}");
    assert!(text.contains("PASS subproblem::approx_prox"));
    assert!(!text.contains("FAIL"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let missing = bench()
        .args(["run", "--config"])
        .arg(dir.path().join("absent.toml"))
        .output()
        .unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("absent.toml"));

    let no_traces = bench()
        .args(["plotdata", "--mode", "iter", "--in"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(!no_traces.success());

    let bad_mode = bench()
        .args(["plotdata", "--mode", "sideways", "--in", "."])
        .status()
        .unwrap();
    assert!(!bad_mode.success());
}
