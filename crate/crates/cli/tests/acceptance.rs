//! One PASS/FAIL line per acceptance criterion. Run with
//! `cargo test -p pi-engine-cli --test acceptance -- --nocapture`.

use std::process::Command;
use std::time::Instant;

use pi_engine_cli::commands::{self, Run};
use pi_engine_cli::report::Report;
use pi_engine_cli::RunConfig;

struct Line {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn run(seed: u64) -> Run {
    Run { cfg: RunConfig::default(), seed, jobs: 1 }
}

fn max_err(r: &Report, prefix: &str) -> f64 {
    r.cases
        .iter()
        .filter(|c| c.name.starts_with(prefix))
        .map(|c| c.max_abs_err.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max)
}

fn count(r: &Report, prefix: &str) -> usize {
    r.cases.iter().filter(|c| c.name.starts_with(prefix)).count()
}

fn all_pass(r: &Report, prefix: &str) -> bool {
    count(r, prefix) > 0 && r.cases.iter().filter(|c| c.name.starts_with(prefix)).all(|c| c.pass)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn conv() -> Line {
    let (r, s) = timed(|| commands::verify(&run(7), "conv").unwrap());
    let e = max_err(&r, "conv/zero-pad");
    Line {
        id: "1 conv equivalence",
        pass: count(&r, "conv/zero-pad") >= 30 && e <= 1e-12 && r.pass() && s < 1.0,
        detail: format!("{} cases, max err {e:.2e} <= 1e-12, {s:.2}s < 1s", r.cases.len()),
    }
}

fn attention() -> Line {
    let (r, s) = timed(|| commands::verify(&run(7), "attention").unwrap());
    let e = max_err(&r, "attention/softmax").max(max_err(&r, "attention/multihead"));
    let causal = max_err(&r, "attention/causality");
    Line {
        id: "2 attention equivalence",
        pass: count(&r, "attention/softmax-h1") >= 30 && e <= 1e-10 && causal == 0.0 && r.pass() && s < 2.0,
        detail: format!("max err {e:.2e} <= 1e-10, causality leak {causal:.1e}, {s:.2}s < 2s"),
    }
}

fn dynamics() -> Line {
    let (r, s) = timed(|| commands::verify(&run(7), "dynamics").unwrap());
    let tags = ["dynamics/ssm-euler", "dynamics/ssm-selective-zoh", "dynamics/mamba-euler", "dynamics/mamba-selective-zoh"];
    let e = tags.iter().map(|t| max_err(&r, t)).fold(0.0, f64::max);
    let seeds_ok = tags.iter().all(|t| count(&r, t) >= 20);
    Line {
        id: "3 ssm/mamba equivalence",
        pass: seeds_ok && e <= 1e-9 && r.pass() && s < 2.0,
        detail: format!("max err {e:.2e} <= 1e-9, {s:.2}s < 2s"),
    }
}

fn gating() -> Line {
    let r = commands::verify(&run(7), "mamba-gating").unwrap();
    let e = max_err(&r, "");
    Line { id: "4 mamba gating identity", pass: e <= 1e-10 && r.pass(), detail: format!("max err {e:.2e} <= 1e-10") }
}

fn orders() -> Line {
    let r = commands::verify(&run(7), "orders").unwrap();
    Line {
        id: "5 self-interaction orders",
        pass: r.pass() && count(&r, "orders/") >= 7 && all_pass(&r, "orders/replacement/"),
        detail: format!("{}/{} order and replacement checks", r.summary.passed, r.summary.total),
    }
}

fn repr() -> Line {
    let (r, s) = timed(|| commands::verify(&run(7), "repr").unwrap());
    let parts = ["cg-orthogonality", "wigner-unitarity", "wigner-homomorphism", "compat-so3", "compat-so2"]
        .iter()
        .map(|p| format!("{p} {:.1e}", max_err(&r, &format!("repr/{p}"))))
        .collect::<Vec<_>>()
        .join(", ");
    Line { id: "6 representation stack", pass: r.pass() && s < 5.0, detail: format!("{parts}; {s:.2}s < 5s") }
}

fn equivariance() -> Line {
    let (r, s) = timed(|| commands::equivariance(&run(7), "all").unwrap());
    let neg = r
        .cases
        .iter()
        .filter(|c| c.name.contains("negative-control"))
        .map(|c| c.max_abs_err.unwrap_or(0.0))
        .fold(f64::INFINITY, f64::min);
    let pos = r
        .cases
        .iter()
        .filter(|c| !c.name.contains("negative-control"))
        .map(|c| c.max_abs_err.unwrap_or(f64::INFINITY))
        .fold(0.0, f64::max);
    Line {
        id: "7 equivariance",
        pass: r.pass() && s < 30.0,
        detail: format!("worst defect {pos:.1e}, smallest negative-control defect {neg:.2e} >= 1e-3, {s:.2}s < 30s"),
    }
}

fn gradients() -> Line {
    let (r, s) = timed(|| commands::verify(&run(7), "gradients").unwrap());
    let e = max_err(&r, "gradients/");
    Line {
        id: "8 gradients",
        pass: r.pass() && e <= 1e-5 && s < 30.0,
        detail: format!("{} builders, max rel err {e:.1e} <= 1e-5, {s:.2}s < 30s", r.cases.len()),
    }
}

fn toys() -> Line {
    let (reports, s) = timed(|| {
        commands::TOYS.iter().map(|t| commands::train_toy(&run(0), t, None).unwrap()).collect::<Vec<_>>()
    });
    let m = |i: usize, k: &str| reports[i].metrics.get(k).copied().unwrap_or(f64::NAN);
    let detail = format!(
        "symreg val {:.2e} vs free {:.2e}, L_reg drop {:.1e}; rank-2 wins {}/5; gate-replaced worse {}/5; {s:.1}s < 600s",
        m(0, "regularized_val_loss"),
        m(0, "free_val_loss"),
        m(0, "l_reg_drop"),
        m(1, "wins"),
        m(2, "gate_worse"),
    );
    let verdicts: Vec<&str> = reports.iter().map(|r| if r.pass() { "ok" } else { "trend failed" }).collect();
    Line {
        id: "9 toy trends",
        pass: reports.iter().all(Report::pass) && s < 600.0,
        detail: format!("{detail} [{}]", verdicts.join(", ")),
    }
}

fn untimed(bytes: &[u8]) -> Report {
    serde_json::from_slice::<Report>(bytes).expect("valid report").without_timing()
}

fn determinism() -> Line {
    let go = || {
        Command::new(env!("CARGO_BIN_EXE_pi-engine"))
            .args(["verify", "--suite", "all", "--seed", "7"])
            .output()
            .expect("binary runs")
    };
    let (a, b) = (go(), go());
    let (ra, rb) = (untimed(&a.stdout), untimed(&b.stdout));
    let same = ra.to_json() == rb.to_json();
    Line {
        id: "10 determinism",
        pass: same && a.status.success() && b.status.success(),
        detail: format!("{} cases, reports identical modulo timing: {same}", ra.cases.len()),
    }
}

#[test]
fn acceptance() {
    let checks: [fn() -> Line; 10] =
        [conv, attention, dynamics, gating, orders, repr, equivariance, gradients, toys, determinism];
    let mut failed = Vec::new();
    for f in checks {
        let l = f();
        println!("{} [{}] {}", if l.pass { "PASS" } else { "FAIL" }, l.id, l.detail);
        if !l.pass {
            failed.push(l.id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
