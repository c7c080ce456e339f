use std::fs;
use std::process::{Command, Output};

use pi_engine::autodiff::ParamStore;
use pi_engine_cli::report::Report;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pi-engine"));
    c.env_remove("PI_ENGINE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn report(o: &Output) -> Report {
    serde_json::from_slice(&o.stdout).unwrap()
}

#[test]
fn conv_suite_passes_with_seed() {
    let o = run(&["verify", "--suite", "conv", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r.schema_version, "1.0");
    assert_eq!(r.seed, 7);
    assert!(r.cases.iter().all(|c| c.max_abs_err.unwrap() <= 1e-12 && c.tol == 1e-12));
    assert!(String::from_utf8_lossy(&o.stderr).contains("passed"));
}

#[test]
fn malformed_config_exits_two_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.cfg");
    fs::write(&p, "[run]\nseed = 3\n[conv]\nsize = 8\nwidth = 2\n").unwrap();
    let o = run(&["verify", "--suite", "conv", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 5") && err.contains("width"), "{err}");
    assert!(o.stdout.is_empty());

    fs::write(&p, "[tolerances]\nconv = -1e-3\n").unwrap();
    let o = run(&["verify", "--suite", "conv", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("positive"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["verify", "--suite", "nope"]).status.code(), Some(2));
    assert_eq!(run(&["equivariance", "--suite", "so4"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--jobs", "0"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    let o = bin().args(["verify", "--suite", "conv"]).env("PI_ENGINE_SEED", "x").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failures_exit_one() {
    let o = run(&["verify", "--suite", "gradients", "--tol-scale", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!report(&o).pass());
}

#[test]
fn seed_falls_back_to_environment() {
    let o = bin().args(["verify", "--suite", "mamba-gating"]).env("PI_ENGINE_SEED", "11").output().unwrap();
    assert_eq!(report(&o).seed, 11);
    let o = bin()
        .args(["verify", "--suite", "mamba-gating", "--seed", "4"])
        .env("PI_ENGINE_SEED", "11")
        .output()
        .unwrap();
    assert_eq!(report(&o).seed, 4);
}

#[test]
fn out_flag_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    let o = run(&["equivariance", "--suite", "so2", "--out", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Report = serde_json::from_str(&fs::read_to_string(&p).unwrap()).unwrap();
    assert!(r.cases.iter().any(|c| c.name.contains("negative-control")));
}

#[test]
fn jobs_do_not_change_results() {
    let a = report(&run(&["verify", "--suite", "attention", "--jobs", "1"])).without_timing();
    let b = report(&run(&["verify", "--suite", "attention", "--jobs", "4"])).without_timing();
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn order_prints_orders_and_manifests() {
    let r = report(&run(&["order", "--suite", "tpa"]));
    assert_eq!(r.metrics["tpa/X"], 6.0);
    assert_eq!(r.manifests[0].builder, "tpa");
    let r = report(&run(&["order", "--suite", "attention"]));
    assert_eq!(r.metrics["attention/X"], 3.0);
}

#[test]
fn zero_step_toy_run_has_empty_traces() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("z.cfg");
    fs::write(&p, "[replacement-mamba]\nsteps = 0\nseeds = 1\n").unwrap();
    let o = run(&["train-toy", "--suite", "replacement-mamba", "--config", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert!(!r.traces.is_empty() && r.traces.values().all(|t| t.is_empty()));
    assert!(r.cases.iter().all(|c| !c.name.ends_with("trend")));
}

#[test]
fn toy_checkpoints_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("s.cfg");
    fs::write(&cfg, "[symreg-conv]\nsteps = 5\nn_val = 2\n").unwrap();
    let ck = dir.path().join("ck");
    let args = ["train-toy", "--suite", "symreg-conv", "--seed", "2", "--config", cfg.to_str().unwrap()];
    let o = bin().args(args).args(["--checkpoint-dir", ck.to_str().unwrap()]).output().unwrap();
    assert_ne!(o.status.code(), Some(2));
    let r = report(&o);
    assert_eq!(r.traces["free"].len(), 5);
    let text = fs::read_to_string(ck.join("symreg-conv-regularized.params")).unwrap();
    let store = ParamStore::from_text(&text, 0).unwrap();
    assert!(store.block("kernel").is_ok() && store.block("lambda_v").is_ok());
    let again = report(&run(&args));
    assert_eq!(again.metrics, r.metrics);
}
