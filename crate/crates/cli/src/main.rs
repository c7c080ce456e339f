use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pi_engine_cli::commands::{self, Run, Usage};
use pi_engine_cli::{Report, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "pi-engine", version, about = "Verify and exercise interaction-algebra layers")]
struct Cli {
    /// Base seed. Falls back to PI_ENGINE_SEED, then `[run] seed`, then 0.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Cases run concurrently.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Multiplier applied to every tolerance.
    #[arg(long = "tol-scale", global = true)]
    tol_scale: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Builders against oracles, orders, representations, gradients.
    Verify {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Equivariance checks: translation, so2, so3 or all.
    Equivariance {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Self-interaction orders and manifests of a builder, or all.
    Order {
        #[arg(long)]
        suite: Option<String>,
    },
    /// Train a toy: symreg-conv, rankR-copy or replacement-mamba.
    TrainToy {
        #[arg(long)]
        suite: String,
        /// Write each trained parameter store here.
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
    },
}

fn usage(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn settings(cli: &Cli) -> Result<Run, Usage> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(|e| Usage(e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(t) = cli.tol_scale {
        cfg.set("run", "tol_scale", &t.to_string()).map_err(|e| Usage(e.to_string()))?;
    }
    let seed = match (cli.seed, std::env::var("PI_ENGINE_SEED")) {
        (Some(s), _) => s,
        (None, Ok(v)) => v.trim().parse().map_err(|_| Usage(format!("PI_ENGINE_SEED `{v}` is not an integer")))?,
        (None, Err(_)) => cfg.u64("run", "seed", 0),
    };
    let default_jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let jobs = cli.jobs.unwrap_or_else(|| cfg.int("run", "jobs", default_jobs));
    if jobs == 0 {
        return Err(Usage("--jobs must be at least 1".into()));
    }
    Ok(Run { cfg, seed, jobs })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = match settings(&cli) {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    let suite = |s: &Option<String>| s.clone().or_else(|| run.cfg.text("run", "suite")).unwrap_or_else(|| "all".into());
    let report: Result<Report, Usage> = match &cli.cmd {
        Cmd::Verify { suite: s } => commands::verify(&run, &suite(s)),
        Cmd::Equivariance { suite: s } => commands::equivariance(&run, &suite(s)),
        Cmd::Order { suite: s } => commands::order(&run, &suite(s)),
        Cmd::TrainToy { suite: s, checkpoint_dir } => commands::train_toy(&run, s, checkpoint_dir.as_deref()),
    };
    let report = match report {
        Ok(r) => r,
        Err(e) => return usage(e),
    };
    eprint!("{}", commands::summary_text(&report));
    let json = report.to_json();
    let out = cli.out.clone().or_else(|| run.cfg.text("run", "out").map(PathBuf::from));
    match out {
        Some(p) => {
            if let Err(e) = std::fs::write(&p, json) {
                return usage(format!("{}: {e}", p.display()));
            }
        }
        None => print!("{json}"),
    }
    if report.pass() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
