use std::path::Path;
use std::process::{Command, Output};

use jiqlab::output::{read_csv, read_manifest, ConvergenceRow, CurveRow, SummaryRow};
use jiqlab::sweep::HEAVY_TAIL_CAVEAT;

fn jiqlab(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jiqlab"))
        .args(["--out", out.to_str().unwrap()])
        .args(args)
        .env_remove("JIQLAB_OUT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn sweep_args(horizon: &str) -> Vec<&str> {
    vec!["sweep", "--n", "10,100,1000", "--seeds", "1,2,3", "--lambda", "0.4", "--horizon", horizon]
}

#[test]
fn fluid_reports_equilibrium_and_transient() {
    let dir = tempfile::tempdir().unwrap();
    let o = jiqlab(dir.path(), &["fluid", "--lambda", "0.4", "--t", "1"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("equilibrium w=0: 0.400000"), "{text}");
    // 0.4 (1 - e^{-1}) for exponential service from empty.
    assert!(text.contains(&format!("transient t=1 w=0: {:.6}", 0.4 * (1.0 - (-1.0f64).exp()))), "{text}");
    let rows: Vec<CurveRow> = read_csv(&dir.path().join("curves.csv")).unwrap();
    assert!(rows.iter().any(|r| r.kind == "transient"));
    assert!(rows.iter().all(|r| r.stderr.is_none()));
}

#[test]
fn sweep_writes_one_row_per_run_and_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = sweep_args("300");
    assert!(jiqlab(a.path(), &args).status.success());
    let mut two = vec!["--workers", "2"];
    two.extend(&args);
    assert!(jiqlab(b.path(), &two).status.success());

    let strip = |dir: &Path| -> Vec<SummaryRow> {
        let mut rows: Vec<SummaryRow> = read_csv(&dir.join("summary.csv")).unwrap();
        rows.iter_mut().for_each(|r| r.wall_seconds = 0.0);
        rows
    };
    let rows = strip(a.path());
    assert_eq!(rows.len(), 9);
    assert_eq!(rows, strip(b.path()));
    let conv: Vec<ConvergenceRow> = read_csv(&a.path().join("convergence.csv")).unwrap();
    assert_eq!(conv.len(), 9);
    for name in ["curves.csv", "independence.csv"] {
        assert_eq!(std::fs::read(a.path().join(name)).unwrap(), std::fs::read(b.path().join(name)).unwrap(), "{name}");
    }
    let manifest = read_manifest(&a.path().join("manifest.json")).unwrap();
    assert_eq!(manifest.runs.len(), 9);
    assert!(manifest.failures.is_empty());
}

#[test]
fn rerun_appends_without_second_header() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["simulate", "--n", "20", "--horizon", "200"];
    assert!(jiqlab(dir.path(), &args).status.success());
    assert!(jiqlab(dir.path(), &args).status.success());
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.matches("scenario_id").count(), 1);
}

#[test]
fn heavy_tail_runs_carry_a_caveat() {
    let dir = tempfile::tempdir().unwrap();
    let o = jiqlab(dir.path(), &["simulate", "--n", "50", "--horizon", "300", "--dist", "pareto:alpha=1.5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let manifest = read_manifest(&dir.path().join("manifest.json")).unwrap();
    assert!(manifest.runs[0].caveats.iter().any(|c| c == HEAVY_TAIL_CAVEAT));
}

#[test]
fn env_var_overrides_out_flag() {
    let flag = tempfile::tempdir().unwrap();
    let env = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_jiqlab"))
        .args(["--out", flag.path().to_str().unwrap(), "simulate", "--n", "10", "--horizon", "200"])
        .env("JIQLAB_OUT", env.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(env.path().join("summary.csv").exists());
    assert!(!flag.path().join("summary.csv").exists());
}

#[test]
fn invalid_input_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["simulate", "--lambda=-1"],
        vec!["simulate", "--lambda", "1.2"],
        vec!["simulate", "--n", "0"],
        vec!["simulate", "--dist", "pareto:alpha=0.5"],
        vec!["simulate", "--policy", "nope"],
        vec!["fluid", "--lambda", "1"],
    ] {
        let o = jiqlab(dir.path(), &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!dir.path().join("summary.csv").exists());
}

#[test]
fn config_errors_name_every_bad_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n = 0\nlambda = 2.0\nhorizon = 10.0\n").unwrap();
    let o = jiqlab(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("n") && err.contains("lambda"), "{err}");

    std::fs::write(&cfg, "n = 10\nlambda = 0.3\nhorizon = 10.0\nbogus = 1\n").unwrap();
    let o = jiqlab(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));
}

#[test]
fn config_file_reproduces_manifest_run() {
    let dir = tempfile::tempdir().unwrap();
    assert!(jiqlab(dir.path(), &["--seed", "7", "simulate", "--n", "30", "--horizon", "300"]).status.success());
    let manifest = read_manifest(&dir.path().join("manifest.json")).unwrap();
    let cfg = dir.path().join("again.toml");
    std::fs::write(&cfg, &manifest.runs[0].config).unwrap();
    let again = tempfile::tempdir().unwrap();
    assert!(jiqlab(again.path(), &["--config", cfg.to_str().unwrap(), "simulate"]).status.success());
    let strip = |d: &Path| {
        let mut r: Vec<SummaryRow> = read_csv(&d.join("summary.csv")).unwrap();
        r[0].wall_seconds = 0.0;
        r
    };
    assert_eq!(strip(dir.path()), strip(again.path()));
}
