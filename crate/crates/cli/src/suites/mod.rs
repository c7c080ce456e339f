//! Verification suites. Each suite expands into independent cases that
//! compare a builder with a raw-array oracle, or check an algebraic fact.

use pi_engine::autodiff::ParamStore;
use pi_engine::{rng, C64};

use crate::cases::CaseSpec;
use crate::config::RunConfig;

pub mod algebraic;
mod equivalence;
pub mod equivariance;
mod gradients;
mod oracles_self;

/// Suites accepted by `verify --suite`, in the order `all` runs them.
pub const VERIFY_SUITES: &[&str] = &[
    "conv",
    "attention",
    "dynamics",
    "mamba-gating",
    "tpa",
    "geometric",
    "multiply",
    "orders",
    "repr",
    "equivariance",
    "gradients",
    "oracles-self",
];

/// Seeds and settings shared by a suite's cases.
#[derive(Clone, Copy)]
pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
}

impl Ctx<'_> {
    /// Seed of case `i` in stream `stream`; stable across `--jobs`.
    pub fn case_seed(&self, stream: u64, i: u64) -> u64 {
        self.seed
            .wrapping_mul(1_000_003)
            .wrapping_add(stream.wrapping_mul(10_007))
            .wrapping_add(i)
    }
}

pub fn verify_cases(suite: &str, ctx: Ctx) -> Option<Vec<CaseSpec>> {
    Some(match suite {
        "all" => VERIFY_SUITES.iter().flat_map(|s| verify_cases(s, ctx).unwrap_or_default()).collect(),
        "conv" => equivalence::conv(ctx),
        "attention" => equivalence::attention(ctx),
        "dynamics" | "ssm" => equivalence::dynamics(ctx),
        "mamba-gating" => equivalence::mamba_gating(ctx),
        "tpa" => equivalence::tpa(ctx),
        "geometric" => equivalence::geometric(ctx),
        "multiply" => equivalence::multiply(ctx),
        "orders" => algebraic::orders(ctx),
        "repr" => algebraic::repr(ctx),
        "equivariance" => equivariance::cases("all", ctx)?,
        "gradients" => gradients::cases(ctx),
        "oracles-self" => oracles_self::cases(ctx),
        _ => return None,
    })
}

pub(crate) fn store(shapes: Vec<(&str, Vec<usize>)>, seed: u64, scale: f64) -> ParamStore {
    let mut s = ParamStore::new(seed);
    let mut r = rng::seeded(seed);
    for (n, shape) in shapes {
        s.insert_random(n, shape, scale, &mut r);
    }
    s
}

pub(crate) fn max_diff_real(a: &[Vec<C64>], b: &[Vec<f64>]) -> f64 {
    let mut m: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        if ra.len() != rb.len() {
            return f64::INFINITY;
        }
        for (x, y) in ra.iter().zip(rb) {
            m = m.max((x - C64::new(*y, 0.0)).norm());
        }
    }
    if a.len() != b.len() {
        f64::INFINITY
    } else {
        m
    }
}

pub(crate) fn max_diff(a: &[Vec<C64>], b: &[Vec<C64>]) -> f64 {
    if a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.len()) {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).norm()))
        .fold(0.0, f64::max)
}
