//! Builder against oracle on random inputs.

use std::sync::Arc;

use pi_engine::algebra::{make_b1, make_b2, TruncationPolicy};
use pi_engine::autodiff::ParamStore;
use pi_engine::interaction::attention::{build_attention, AttentionConfig, AttentionVariant};
use pi_engine::interaction::bind;
use pi_engine::interaction::conv::{build_conv2d, read_image, ConvConfig, ConvConstraint};
use pi_engine::interaction::dynamics::{build_dynamics, Discretization, DynamicsConfig, DynamicsKind};
use pi_engine::interaction::geometric::{
    build_harmonic, build_se3_attention, build_tfn, HarmonicConfig, KernelKind, RadialBasis, Se3Config, TfnConfig,
};
use pi_engine::interaction::tpa::{build_tpa, TpaConfig};
use pi_engine::oracles::{self, AttnWeights, Injection, Mat, Readout, StepRule, TpaFactors};
use pi_engine::repr::{make_so2_algebra, make_so3_algebra};
use pi_engine::structural::NeighbourTable;
use pi_engine::tensor::{embed_image2d, multiply as tensor_multiply, tensor_space, Role, TensorElement};
use pi_engine::{rng, Activation, Result, C64};

use super::{max_diff, max_diff_real, store, Ctx};
use crate::cases::CaseSpec;

fn block_mat(s: &ParamStore, name: &str, lead: &[usize], rows: usize, cols: usize) -> Mat {
    let b = s.block(name).expect("block present");
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let mut idx = lead.to_vec();
                    idx.extend([i, j]);
                    b.at(&idx)
                })
                .collect()
        })
        .collect()
}

fn conv_case(seed: u64, size: usize, k: usize, cyclic: bool) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let x = rng::mat(&mut r, size, size, 1.0);
    let kern = rng::mat(&mut r, k, k, 1.0);
    let mut cfg = ConvConfig::new(size, size, k, k, ConvConstraint::Symmetric);
    if cyclic {
        cfg = cfg.cyclic();
    }
    let mut s = ParamStore::new(seed);
    s.insert("kernel", vec![k, k], kern.iter().flatten().copied().collect())?;
    let b = build_conv2d::<C64>(&cfg, &s.to_params())?;
    let out = read_image(&b.expr.eval(&bind("X", embed_image2d(&x, b.expr.space())?))?)?;
    let want = if cyclic { oracles::xcorr2d_cyclic(&x, &kern) } else { oracles::xcorr2d(&x, &kern) };
    Ok(max_diff_real(&out, &want))
}

pub fn conv(ctx: Ctx) -> Vec<CaseSpec> {
    let c = ctx.cfg;
    let (n, size, k) = (c.int("conv", "cases", 30), c.int("conv", "size", 8), c.int("conv", "kernel", 3));
    let tol = c.tol("conv", 1e-12);
    let mut v = Vec::new();
    for i in 0..n as u64 {
        let s = ctx.case_seed(1, i);
        v.push(CaseSpec::new(format!("conv/zero-pad/{i}"), s, tol, move || conv_case(s, size, k, false)));
    }
    for i in 0..(n as u64 / 3).max(1) {
        let s = ctx.case_seed(2, i);
        v.push(CaseSpec::new(format!("conv/cyclic/{i}"), s, tol, move || conv_case(s, size, k, true)));
    }
    v
}

fn attn_store(cfg: &AttentionConfig, seed: u64) -> ParamStore {
    store(cfg.param_shapes(), seed, 0.7)
}

/// Oracle weights for head `h`, rank `r`.
fn attn_weights(s: &ParamStore, cfg: &AttentionConfig, h: usize, r: usize) -> AttnWeights {
    let dk = cfg.head_dim();
    AttnWeights {
        wq: block_mat(s, "wq", &[h, r], dk, cfg.d),
        wk: block_mat(s, "wk", &[h, r], dk, cfg.d),
        wv: block_mat(s, "wv", &[h, r], dk, cfg.d),
    }
}

fn attention_case(seed: u64, cfg: AttentionConfig) -> Result<f64> {
    let s = attn_store(&cfg, seed);
    let att = build_attention::<C64>(&cfg, &s.to_params())?;
    let mut r = rng::derive(seed, 1);
    let x = rng::mat(&mut r, cfg.n, cfg.d, 1.0);
    let heads: Vec<AttnWeights> = (0..cfg.heads()).map(|h| attn_weights(&s, &cfg, h, 0)).collect();
    let (out, want) = match cfg.variant {
        AttentionVariant::Softmax | AttentionVariant::Multihead { .. } => {
            (att.forward(&x, None)?, oracles::multihead_attention(&x, &heads))
        }
        AttentionVariant::RankR { rank } => {
            let ranks: Vec<AttnWeights> = (0..rank).map(|q| attn_weights(&s, &cfg, 0, q)).collect();
            (att.forward(&x, None)?, oracles::rank_r_attention(&x, &ranks))
        }
        AttentionVariant::CausalUnnormalized(f) => {
            (att.forward(&x, None)?, oracles::attention(&x, &heads[0], |v| f.eval_real(v), true, false))
        }
        AttentionVariant::Cross { m } => {
            let y = rng::mat(&mut r, m, cfg.d, 1.0);
            (att.forward(&x, Some(&y))?, oracles::cross_attention(&x, &y, &heads[0]))
        }
    };
    Ok(max_diff_real(&out, &want))
}

/// Perturb token `p`; outputs before `p` must not move at all.
fn causality_case(seed: u64, cfg: AttentionConfig) -> Result<f64> {
    let s = attn_store(&cfg, seed);
    let att = build_attention::<C64>(&cfg, &s.to_params())?;
    let mut r = rng::derive(seed, 2);
    let x = rng::mat(&mut r, cfg.n, cfg.d, 1.0);
    let p = 1 + (seed as usize % (cfg.n - 1));
    let mut y = x.clone();
    y[p] = rng::vec(&mut r, cfg.d, 3.0);
    let (a, b) = (att.forward(&x, None)?, att.forward(&y, None)?);
    let before = max_diff(&a[..p], &b[..p]);
    let after = max_diff(&a[p..], &b[p..]);
    // A perturbation that changes nothing downstream would make the check vacuous.
    Ok(if after > 0.0 { before } else { f64::INFINITY })
}

pub fn attention(ctx: Ctx) -> Vec<CaseSpec> {
    let c = ctx.cfg;
    let (seeds, n, d) = (c.int("attention", "seeds", 30), c.int("attention", "n", 6), c.int("attention", "d", 4));
    let tol = c.tol("attention", 1e-10);
    let mut v = Vec::new();
    for (h, variant) in [(1, AttentionVariant::Softmax), (2, AttentionVariant::Multihead { heads: 2 })] {
        let cfg = AttentionConfig::new(n, d, variant);
        for i in 0..seeds as u64 {
            let s = ctx.case_seed(10 + h, i);
            v.push(CaseSpec::new(format!("attention/softmax-h{h}/{i}"), s, tol, move || attention_case(s, cfg)));
        }
    }
    let extra = (seeds / 3).max(1) as u64;
    for (tag, variant) in [
        ("rank-2", AttentionVariant::RankR { rank: 2 }),
        ("causal-elu", AttentionVariant::CausalUnnormalized(Activation::Elu)),
        ("cross", AttentionVariant::Cross { m: n + 2 }),
    ] {
        let cfg = AttentionConfig::new(n, d, variant);
        for i in 0..extra {
            let s = ctx.case_seed(20, i) ^ (tag.len() as u64) << 40;
            v.push(CaseSpec::new(format!("attention/{tag}/{i}"), s, tol, move || attention_case(s, cfg)));
        }
    }
    for (h, variant) in [(1, AttentionVariant::Softmax), (2, AttentionVariant::Multihead { heads: 2 })] {
        let cfg = AttentionConfig::new(n, d, variant);
        for i in 0..extra {
            let s = ctx.case_seed(30 + h, i);
            v.push(CaseSpec::new(format!("attention/causality-h{h}/{i}"), s, 0.0, move || causality_case(s, cfg)));
        }
    }
    v
}

fn dynamics_case(seed: u64, cfg: DynamicsConfig, steps: usize) -> Result<f64> {
    let mut s = store(cfg.param_shapes(), seed, 0.8);
    s.block_mut("lambda")?.values.iter_mut().for_each(|v| *v = -0.1 - v.abs());
    let dy = build_dynamics::<C64>(&cfg, &s.to_params())?;
    let xs = rng::mat(&mut rng::derive(seed, 3), steps, cfg.d, 1.0);
    let out = dy.run(&xs)?.outputs;
    let (d, n) = (cfg.d, cfg.n);
    let lambda = block_mat(&s, "lambda", &[], d, n);
    let (inj, ro) = match cfg.kind {
        DynamicsKind::Ssm => (
            Injection::Fixed(block_mat(&s, "b", &[], d, n)),
            Readout::Fixed(block_mat(&s, "c", &[], d, n)),
        ),
        DynamicsKind::Mamba => (
            Injection::Input(block_mat(&s, "wb", &[], n, d)),
            Readout::Input(block_mat(&s, "wc", &[], n, d)),
        ),
    };
    let gate = || (block_mat(&s, "wg", &[], d, d), s.block("bg").map(|b| b.values.clone()).unwrap_or_default());
    let rule = match cfg.disc {
        Discretization::Euler { dt } => StepRule::Euler(dt),
        Discretization::Zoh { dt } => StepRule::Zoh(dt),
        Discretization::SelectiveEuler => {
            let (wg, bg) = gate();
            StepRule::SelectiveEuler { wg, bg }
        }
        Discretization::SelectiveZoh => {
            let (wg, bg) = gate();
            StepRule::SelectiveZoh { wg, bg }
        }
    };
    Ok(max_diff_real(&out, &oracles::recurrence(&xs, &lambda, &inj, &ro, &rule)))
}

pub fn dynamics(ctx: Ctx) -> Vec<CaseSpec> {
    let c = ctx.cfg;
    let (seeds, d, n, steps) = (
        c.int("dynamics", "seeds", 20),
        c.int("dynamics", "d", 3),
        c.int("dynamics", "n", 4),
        c.int("dynamics", "steps", 50),
    );
    let dt = c.float("dynamics", "dt", 0.1);
    let tol = c.tol("dynamics", 1e-9);
    let mut v = Vec::new();
    let main = [
        (DynamicsKind::Ssm, Discretization::Euler { dt }, seeds),
        (DynamicsKind::Ssm, Discretization::SelectiveZoh, seeds),
        (DynamicsKind::Mamba, Discretization::Euler { dt }, seeds),
        (DynamicsKind::Mamba, Discretization::SelectiveZoh, seeds),
        (DynamicsKind::Ssm, Discretization::Zoh { dt }, (seeds / 4).max(1)),
        (DynamicsKind::Mamba, Discretization::SelectiveEuler, (seeds / 4).max(1)),
    ];
    for (j, (kind, disc, count)) in main.into_iter().enumerate() {
        let cfg = DynamicsConfig { d, n, kind, disc };
        let tag = format!("{}-{}", if kind == DynamicsKind::Ssm { "ssm" } else { "mamba" }, disc.name());
        for i in 0..count as u64 {
            let s = ctx.case_seed(40 + j as u64, i);
            v.push(CaseSpec::new(format!("dynamics/{tag}/{i}"), s, tol, move || dynamics_case(s, cfg, steps)));
        }
    }
    v
}

/// The gated injection of a selective Mamba step against
/// `sigmoid(W_g x + b) * (W^B x) x` from the gating oracle.
fn gating_case(seed: u64, d: usize, n: usize) -> Result<f64> {
    let cfg = DynamicsConfig { d, n, kind: DynamicsKind::Mamba, disc: Discretization::SelectiveZoh };
    let s = store(cfg.param_shapes(), seed, 0.9);
    let dy = build_dynamics::<C64>(&cfg, &s.to_params())?;
    let x = rng::vec(&mut rng::derive(seed, 4), d, 1.0);
    let h = dy.read_state(&dy.update.eval(&bind("X", dy.embed(&x)?))?)?;
    let wb = block_mat(&s, "wb", &[], n, d);
    let mut wg = block_mat(&s, "wg", &[], d, d);
    let bg = &s.block("bg")?.values;
    wg.iter_mut().zip(bg).for_each(|(row, b)| row.push(*b));
    let mut xa = x.clone();
    xa.push(1.0);
    let mut err: f64 = 0.0;
    for i in 0..n {
        let bx: f64 = wb[i].iter().zip(&x).map(|(w, v)| w * v).sum();
        let u: Vec<f64> = x.iter().map(|v| bx * v).collect();
        let want = oracles::gating(&u, &xa, &wg, |z| 1.0 / (1.0 + (-z).exp()));
        for a in 0..d {
            err = err.max((h[a][i] - C64::new(want[a], 0.0)).norm());
        }
    }
    Ok(err)
}

pub fn mamba_gating(ctx: Ctx) -> Vec<CaseSpec> {
    let c = ctx.cfg;
    let (seeds, d, n) = (c.int("dynamics", "seeds", 20), c.int("dynamics", "d", 3), c.int("dynamics", "n", 4));
    let tol = c.tol("mamba_gating", 1e-10);
    (0..seeds as u64)
        .map(|i| {
            let s = ctx.case_seed(50, i);
            CaseSpec::new(format!("mamba-gating/{i}"), s, tol, move || gating_case(s, d, n))
        })
        .collect()
}

fn tpa_case(seed: u64, cfg: TpaConfig) -> Result<f64> {
    let s = store(cfg.param_shapes().iter().map(|(n, v)| (n.as_str(), v.clone())).collect(), seed, 0.6);
    let t = build_tpa::<C64>(&cfg, &s.to_params())?;
    let x = rng::mat(&mut rng::derive(seed, 5), cfg.n, cfg.d, 1.0);
    let factors = |p: &str, rank: usize| TpaFactors {
        a: (0..rank).map(|q| block_mat(&s, &format!("a_{p}"), &[q], cfg.heads, cfg.d)).collect(),
        b: (0..rank).map(|q| block_mat(&s, &format!("b_{p}"), &[q], cfg.head_dim, cfg.d)).collect(),
    };
    let want = oracles::tpa(
        &x,
        &factors("q", cfg.rank_q),
        &factors("k", cfg.rank_k),
        &factors("v", cfg.rank_v),
        cfg.heads,
    );
    Ok(max_diff_real(&t.forward(&x)?, &want))
}

pub fn tpa(ctx: Ctx) -> Vec<CaseSpec> {
    let tol = ctx.cfg.tol("tpa", 1e-10);
    let cfgs = [
        TpaConfig { n: 5, d: 4, heads: 2, head_dim: 2, rank_q: 2, rank_k: 1, rank_v: 2 },
        TpaConfig { n: 4, d: 3, heads: 1, head_dim: 3, rank_q: 1, rank_k: 2, rank_v: 1 },
    ];
    let mut v = Vec::new();
    for (j, cfg) in cfgs.into_iter().enumerate() {
        for i in 0..5u64 {
            let s = ctx.case_seed(60 + j as u64, i);
            v.push(CaseSpec::new(format!("tpa/config{j}/{i}"), s, tol, move || tpa_case(s, cfg)));
        }
    }
    v
}

fn cloud(r: &mut rng::Rng64, n: usize, planar: bool) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| {
            let mut p = rng::point(r, 1.0);
            if planar {
                p[2] = 0.0;
            }
            p
        })
        .collect()
}

fn feats(r: &mut rng::Rng64, n: usize, fd: usize) -> Vec<Vec<C64>> {
    (0..n).map(|_| rng::cvec(r, fd, 1.0)).collect()
}

#[derive(Clone, Copy)]
enum Geo {
    Tfn,
    Harmonic,
    Se3 { sparse: bool },
}

fn geometric_case(seed: u64, which: Geo, n: usize, l_max: usize) -> Result<f64> {
    let basis = RadialBasis::default();
    let mut r = rng::derive(seed, 6);
    let kind = KernelKind::Equivariant;
    Ok(match which {
        Geo::Tfn => {
            let cfg = TfnConfig { n_points: n, l_max, radial: basis, kernel: kind };
            let s = store(cfg.param_shapes(), seed, 1.0);
            let (p, f) = (cloud(&mut r, n, false), feats(&mut r, n, (l_max + 1).pow(2)));
            let out = build_tfn::<C64>(&cfg, &s.to_params())?.forward(&p, &f)?;
            max_diff(&out, &oracles::tfn(&p, &f, &s.block("radial")?.matrix(), basis.cutoff))
        }
        Geo::Harmonic => {
            let cfg = HarmonicConfig { n_points: n, n_max: l_max, radial: basis, kernel: kind };
            let s = store(cfg.param_shapes(), seed, 1.0);
            let (p, f) = (cloud(&mut r, n, true), feats(&mut r, n, 2 * l_max + 1));
            let out = build_harmonic::<C64>(&cfg, &s.to_params())?.forward(&p, &f)?;
            max_diff(&out, &oracles::harmonic(&p, &f, &s.block("radial")?.matrix(), basis.cutoff))
        }
        Geo::Se3 { sparse } => {
            let cfg = Se3Config { n_points: n, l_max, radial: basis, kernel: kind };
            let s = store(cfg.param_shapes(), seed, 0.8);
            let (p, f) = (cloud(&mut r, n, false), feats(&mut r, n, (l_max + 1).pow(2)));
            let lists: Vec<Vec<usize>> = (0..n)
                .map(|a| (0..n).filter(|&b| b != a && (!sparse || (a + b) % 2 == 1)).collect())
                .collect();
            let table = Arc::new(NeighbourTable::new(lists.clone())?);
            let out = build_se3_attention::<C64>(&cfg, &s.to_params(), table)?.forward(&p, &f)?;
            let want = oracles::se3_attention(
                &p,
                &f,
                &s.block("radial_k")?.matrix(),
                &s.block("radial_v")?.matrix(),
                &s.block("wq")?.values,
                basis.cutoff,
                &lists,
            );
            max_diff(&out, &want)
        }
    })
}

pub fn geometric(ctx: Ctx) -> Vec<CaseSpec> {
    let tol = ctx.cfg.tol("geometric", 1e-9);
    let mut v = Vec::new();
    let kinds = [
        ("tfn", Geo::Tfn, 2),
        ("harmonic", Geo::Harmonic, 2),
        ("se3-attention", Geo::Se3 { sparse: false }, 2),
        ("se3-attention-sparse", Geo::Se3 { sparse: true }, 1),
    ];
    for (j, (tag, which, l_max)) in kinds.into_iter().enumerate() {
        for i in 0..5u64 {
            let s = ctx.case_seed(70 + j as u64, i);
            v.push(CaseSpec::new(format!("geometric/{tag}/{i}"), s, tol, move || geometric_case(s, which, 4, l_max)));
        }
    }
    v
}

fn multiply_case(seed: u64, variant: usize) -> Result<f64> {
    let factors = match variant {
        0 => vec![
            Arc::new(make_b1(2)?),
            Arc::new(make_b2(2)?),
            Arc::new(make_so3_algebra(1, TruncationPolicy::Drop)),
        ],
        _ => vec![
            Arc::new(make_b2(3)?),
            Arc::new(make_b1(1)?),
            Arc::new(make_so2_algebra(2, TruncationPolicy::Drop)),
        ],
    };
    let space = tensor_space(factors, vec![Role::Positional, Role::Positional, Role::Feature])?;
    let mut r = rng::seeded(seed);
    let x = TensorElement::from_dense(&space, rng::cvec(&mut r, space.size(), 1.0))?;
    let y = TensorElement::from_dense(&space, rng::cvec(&mut r, space.size(), 1.0))?;
    Ok(tensor_multiply(&x, &y)?.max_abs_diff(&oracles::multiply_bruteforce(&x, &y)?))
}

pub fn multiply(ctx: Ctx) -> Vec<CaseSpec> {
    let tol = ctx.cfg.tol("multiply", 1e-13);
    let mut v = Vec::new();
    for variant in 0..2 {
        for i in 0..3u64 {
            let s = ctx.case_seed(80 + variant as u64, i);
            v.push(CaseSpec::new(format!("multiply/three-factor-{variant}/{i}"), s, tol, move || multiply_case(s, variant)));
        }
    }
    v
}
