//! The four subcommands. Each returns a report; the exit code follows from
//! `Report::pass`, and usage problems come back as [`Usage`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pi_engine::toys::{rank_copy, replacement_mamba, symreg_conv, ToyOutcome};
use pi_engine::C64;

use crate::cases::{run_cases, CaseSpec};
use crate::config::RunConfig;
use crate::report::{trace_points, ManifestEntry, Report};
use crate::suites::{self, algebraic, equivariance, Ctx, VERIFY_SUITES};
use crate::zoo::{Model, Sizes, NAMES};

pub const TOYS: &[&str] = &["symreg-conv", "rankR-copy", "replacement-mamba"];

/// A usage or configuration problem; maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Settings shared by every subcommand after flags, env and config merge.
#[derive(Clone, Debug)]
pub struct Run {
    pub cfg: RunConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl Run {
    fn ctx(&self) -> Ctx<'_> {
        Ctx { cfg: &self.cfg, seed: self.seed }
    }
}

fn timed(command: &str, suite: &str, run: &Run, specs: Vec<CaseSpec>) -> Report {
    let t = Instant::now();
    let cases = run_cases(&specs, run.jobs);
    Report::new(command, suite, run.seed, cases, t.elapsed().as_secs_f64() * 1e3)
}

pub fn verify(run: &Run, suite: &str) -> Result<Report, Usage> {
    let specs = suites::verify_cases(suite, run.ctx()).ok_or_else(|| {
        Usage(format!("unknown suite `{suite}`; expected all, {}", VERIFY_SUITES.join(", ")))
    })?;
    Ok(timed("verify", suite, run, specs))
}

pub fn equivariance(run: &Run, suite: &str) -> Result<Report, Usage> {
    let specs = equivariance::cases(suite, run.ctx())
        .ok_or_else(|| Usage(format!("unknown group `{suite}`; expected {}", equivariance::GROUPS.join(", "))))?;
    Ok(timed("equivariance", suite, run, specs))
}

/// Orders of every slot of one builder (or all of them), with manifests.
pub fn order(run: &Run, suite: &str) -> Result<Report, Usage> {
    let names: Vec<&str> = match suite {
        "all" => NAMES.to_vec(),
        n if NAMES.contains(&n) => NAMES.iter().copied().filter(|m| *m == n).collect(),
        n => return Err(Usage(format!("unknown builder `{n}`; expected all, {}", NAMES.join(", ")))),
    };
    let sizes = Sizes::from_config(&run.cfg);
    let t = Instant::now();
    let mut manifests = Vec::new();
    let mut specs = Vec::new();
    for name in names {
        let model = Model::named(name, sizes, run.seed).map_err(|e| Usage(e.to_string()))?;
        let p = model.init(run.seed, 0.5).to_params::<C64>();
        let (_, manifest) = model.expr(&p).map_err(|e| Usage(e.to_string()))?;
        manifests.push((name, ManifestEntry::from(&manifest)));
        if let Some(&(_, slot, want)) = algebraic::EXPECTED_ORDERS.iter().find(|e| e.0 == name) {
            let seed = run.seed;
            specs.push(CaseSpec::new(format!("order/{name}={want}"), seed, 0.0, move || {
                Ok(algebraic::builder_order(name, slot, seed)?.abs_diff(want) as f64)
            }));
        }
    }
    let cases = run_cases(&specs, run.jobs);
    let mut r = Report::new("order", suite, run.seed, cases, t.elapsed().as_secs_f64() * 1e3);
    for (name, m) in &manifests {
        for (slot, o) in &m.orders {
            r.metrics.insert(format!("{name}/{slot}"), *o as f64);
        }
    }
    r.manifests = manifests.into_iter().map(|(_, m)| m).collect();
    Ok(r)
}

fn toy_seeds(cfg: &RunConfig, section: &str, seed: u64) -> Vec<u64> {
    (0..cfg.u64(section, "seeds", 5)).map(|i| seed + i).collect()
}

fn run_toy(run: &Run, toy: &str) -> Result<(ToyOutcome, usize), Usage> {
    let c = &run.cfg;
    let err = |e: pi_engine::Error| Usage(format!("{toy}: {e}"));
    match toy {
        "symreg-conv" => {
            let d = symreg_conv::SymregConfig::default();
            let cfg = symreg_conv::SymregConfig {
                size: c.int(toy, "size", d.size),
                kernel: c.int(toy, "kernel", d.kernel),
                n_train: c.int(toy, "n_train", d.n_train),
                n_val: c.int(toy, "n_val", d.n_val),
                init_noise: c.float(toy, "init_noise", d.init_noise),
                mu: c.float(toy, "mu", d.mu),
                steps: c.int(toy, "steps", d.steps),
                lr: c.float(toy, "lr", d.lr),
                momentum: c.float(toy, "momentum", d.momentum),
            };
            Ok((symreg_conv::run(&cfg, run.seed).map_err(err)?, cfg.steps))
        }
        "rankR-copy" => {
            let d = rank_copy::RankCopyConfig::default();
            let cfg = rank_copy::RankCopyConfig {
                len: c.int(toy, "len", d.len),
                n_seq: c.int(toy, "n_seq", d.n_seq),
                init_scale: c.float(toy, "init_scale", d.init_scale),
                steps: c.int(toy, "steps", d.steps),
                lr: c.float(toy, "lr", d.lr),
                momentum: c.float(toy, "momentum", d.momentum),
            };
            Ok((rank_copy::run(&cfg, &toy_seeds(c, toy, run.seed)).map_err(err)?, cfg.steps))
        }
        "replacement-mamba" => {
            let d = replacement_mamba::ReplacementConfig::default();
            let cfg = replacement_mamba::ReplacementConfig {
                n: c.int(toy, "n", d.n),
                len: c.int(toy, "len", d.len),
                n_seq: c.int(toy, "n_seq", d.n_seq),
                mark_prob: c.float(toy, "mark_prob", d.mark_prob),
                steps: c.int(toy, "steps", d.steps),
                lr: c.float(toy, "lr", d.lr),
                momentum: c.float(toy, "momentum", d.momentum),
            };
            Ok((replacement_mamba::run(&cfg, &toy_seeds(c, toy, run.seed)).map_err(err)?, cfg.steps))
        }
        other => Err(Usage(format!("unknown toy `{other}`; expected {}", TOYS.join(", ")))),
    }
}

fn write_checkpoints(dir: &Path, toy: &str, out: &ToyOutcome) -> Result<Vec<PathBuf>, Usage> {
    fs::create_dir_all(dir).map_err(|e| Usage(format!("{}: {e}", dir.display())))?;
    let mut written = Vec::new();
    for (key, store) in &out.params {
        let path = dir.join(format!("{toy}-{key}.params"));
        fs::write(&path, store.to_text()).map_err(|e| Usage(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

/// Train a toy. Cases: every trace stays finite, and (unless no steps were
/// taken) the expected trend holds.
pub fn train_toy(run: &Run, toy: &str, checkpoint_dir: Option<&Path>) -> Result<Report, Usage> {
    let t = Instant::now();
    let (out, steps) = run_toy(run, toy)?;
    let wall_ms = t.elapsed().as_secs_f64() * 1e3;
    if let Some(dir) = checkpoint_dir {
        write_checkpoints(dir, toy, &out)?;
    }
    let diverged: Vec<&String> = out
        .traces
        .iter()
        .filter(|(_, tr)| tr.records.iter().any(|r| !r.loss.is_finite()))
        .map(|(k, _)| k)
        .collect();
    let mut specs = vec![CaseSpec::new(format!("{toy}/finite-loss"), run.seed, 0.0, {
        let n = diverged.len() as f64;
        move || Ok(n)
    })];
    if steps > 0 {
        let pass = out.pass;
        specs.push(CaseSpec::new(format!("{toy}/trend"), run.seed, 0.0, move || Ok(if pass { 0.0 } else { 1.0 })));
    }
    let mut r = Report::new("train-toy", toy, run.seed, run_cases(&specs, 1), wall_ms);
    r.metrics = out.metrics.clone();
    r.traces = out.traces.iter().map(|(k, tr)| (k.clone(), trace_points(tr))).collect();
    if !diverged.is_empty() {
        r.cases[0].error = Some(format!("non-finite loss in {}", diverged.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")));
    }
    Ok(r)
}

/// One line per failing case plus a total, for stderr.
pub fn summary_text(r: &Report) -> String {
    let mut s = String::new();
    for c in r.cases.iter().filter(|c| !c.pass) {
        let err = c.max_abs_err.map_or("-".to_string(), |e| format!("{e:.3e}"));
        s.push_str(&format!("FAIL {} err={err} tol={:.1e}", c.name, c.tol));
        if let Some(e) = &c.error {
            s.push_str(&format!(" ({e})"));
        }
        s.push('\n');
    }
    s.push_str(&format!(
        "{} {}: {}/{} passed in {:.0} ms\n",
        r.command, r.suite, r.summary.passed, r.summary.total, r.summary.wall_ms
    ));
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run() -> Run {
        Run { cfg: RunConfig::default(), seed: 7, jobs: 1 }
    }

    #[test]
    fn unknown_names_are_usage_errors() {
        assert!(verify(&run(), "nope").is_err());
        assert!(equivariance(&run(), "so4").is_err());
        assert!(order(&run(), "nope").is_err());
        assert!(train_toy(&run(), "nope", None).is_err());
    }

    #[test]
    fn order_reports_known_values() {
        let r = order(&run(), "conv").unwrap();
        assert!(r.pass());
        assert_eq!(r.metrics["conv/X"], 1.0);
    }

    #[test]
    fn zero_step_toy_has_empty_traces_and_no_trend_case() {
        let mut cfg = RunConfig::default();
        cfg.set("symreg-conv", "steps", "0").unwrap();
        cfg.set("symreg-conv", "n_val", "1").unwrap();
        let r = train_toy(&Run { cfg, seed: 1, jobs: 1 }, "symreg-conv", None).unwrap();
        assert!(r.pass());
        assert_eq!(r.cases.len(), 1);
        assert!(r.traces.values().all(|t| t.is_empty()));
    }
}
