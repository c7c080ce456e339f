//! Self-interaction orders and the representation stack.

use std::sync::Arc;

use pi_engine::algebra::TruncationPolicy;
use pi_engine::interaction::geometric::{build_harmonic, HarmonicConfig, KernelKind, RadialBasis};
use pi_engine::interaction::{Expr, Node, NodeId};
use pi_engine::repr::{
    check_product_compat, cg, make_so2_algebra, make_so3_algebra, sph_harm_all, wigner_d, GroupElement, Rotation,
};
use pi_engine::tensor::TensorElement;
use pi_engine::{rng, Error, Result, C64};

use super::{store, Ctx};
use crate::cases::CaseSpec;
use crate::zoo::{Model, Sizes, NAMES};

/// Orders fixed by the construction of each builder.
pub const EXPECTED_ORDERS: &[(&str, &str, usize)] = &[
    ("conv", "X", 1),
    ("gating", "X", 1),
    ("quad", "X", 2),
    ("attention", "X", 3),
    ("discrete-mamba", "X", 3),
    ("se3-attention", "S", 3),
    ("tpa", "X", 6),
];

/// Degree of a single node in the output, counting every path to it.
pub fn occurrence_degree(expr: &Expr<C64>, target: NodeId) -> usize {
    let nodes = expr.nodes();
    let mut deg = vec![0usize; nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        deg[i] = match n {
            Node::Slot { .. } => usize::from(i == target),
            Node::Constant { .. } | Node::Kernel { .. } => 0,
            Node::Mult { filter, input, .. } => deg[*filter] + deg[*input],
            Node::Structural { arg, .. } => deg[*arg],
            Node::Sum(ids) => ids.iter().map(|j| deg[*j]).max().unwrap_or(0),
        };
    }
    deg[expr.output()]
}

pub fn builder_order(name: &str, slot: &str, seed: u64) -> Result<usize> {
    let m = Model::named(name, Sizes::default(), seed)?;
    let (expr, _) = m.expr(&m.init(seed, 0.5).to_params())?;
    expr.self_interaction_order(slot)
}

/// Replace each occurrence of each slot in turn; the order must drop by
/// that occurrence's degree. Returns the largest mismatch.
fn replacement_mismatch(name: &str, seed: u64) -> Result<f64> {
    let m = Model::named(name, Sizes::default(), seed)?;
    let (expr, _) = m.expr(&m.init(seed, 0.5).to_params())?;
    let mut worst = 0usize;
    let mut checked = 0;
    for slot in expr.slots() {
        let before = expr.self_interaction_order(&slot)?;
        for occ in expr.occurrences(&slot) {
            let deg = occurrence_degree(&expr, occ);
            let after = expr.replace_slot(occ, "k", TensorElement::zero(expr.space()))?;
            let now = if after.occurrences(&slot).is_empty() { 0 } else { after.self_interaction_order(&slot)? };
            worst = worst.max((before - now).abs_diff(deg));
            checked += 1;
        }
    }
    if checked == 0 {
        return Err(Error::Config(format!("{name} has no slot occurrences")));
    }
    Ok(worst as f64)
}

pub fn orders(ctx: Ctx) -> Vec<CaseSpec> {
    let mut v = Vec::new();
    for &(name, slot, want) in EXPECTED_ORDERS {
        let s = ctx.seed;
        v.push(CaseSpec::new(format!("orders/{name}={want}"), s, 0.0, move || {
            Ok(builder_order(name, slot, s)?.abs_diff(want) as f64)
        }));
    }
    for &name in NAMES {
        let s = ctx.seed;
        v.push(CaseSpec::new(format!("orders/replacement/{name}"), s, 0.0, move || replacement_mismatch(name, s)));
    }
    v
}

fn cg_orthogonality(l_max: i64) -> f64 {
    let mut err: f64 = 0.0;
    for l1 in 0..=l_max {
        for l2 in 0..=l_max {
            let ls: Vec<i64> = ((l1 - l2).abs()..=l1 + l2).collect();
            // Rows: sum over m1, m2 for fixed (l, m), (l', m').
            for &l in &ls {
                for &lp in &ls {
                    for m in -l..=l {
                        for mp in -lp..=lp {
                            let mut s = 0.0;
                            for m1 in -l1..=l1 {
                                for m2 in -l2..=l2 {
                                    s += cg(l1, m1, l2, m2, l, m) * cg(l1, m1, l2, m2, lp, mp);
                                }
                            }
                            let want = if l == lp && m == mp { 1.0 } else { 0.0 };
                            err = err.max((s - want).abs());
                        }
                    }
                }
            }
            // Columns: sum over (l, m) for fixed (m1, m2), (m1', m2').
            for m1 in -l1..=l1 {
                for m2 in -l2..=l2 {
                    for n1 in -l1..=l1 {
                        for n2 in -l2..=l2 {
                            let mut s = 0.0;
                            for &l in &ls {
                                for m in -l..=l {
                                    s += cg(l1, m1, l2, m2, l, m) * cg(l1, n1, l2, n2, l, m);
                                }
                            }
                            let want = if m1 == n1 && m2 == n2 { 1.0 } else { 0.0 };
                            err = err.max((s - want).abs());
                        }
                    }
                }
            }
        }
    }
    err
}

type CMat = Vec<Vec<C64>>;

fn cmul(a: &CMat, b: &CMat) -> CMat {
    let n = b[0].len();
    a.iter()
        .map(|row| (0..n).map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum()).collect())
        .collect()
}

fn cdiff(a: &CMat, b: &CMat) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).norm()))
        .fold(0.0, f64::max)
}

fn adjoint(a: &CMat) -> CMat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j].conj()).collect()).collect()
}

fn eye(n: usize) -> CMat {
    (0..n)
        .map(|i| (0..n).map(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
        .collect()
}

fn wigner_unitarity(seed: u64, pairs: usize, l_max: usize) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut err: f64 = 0.0;
    for _ in 0..pairs {
        let rot = Rotation::random(&mut r);
        for l in 0..=l_max {
            let d = wigner_d(l, &rot, l_max)?;
            err = err.max(cdiff(&cmul(&d, &adjoint(&d)), &eye(2 * l + 1)));
        }
    }
    for l in 0..=l_max {
        err = err.max(cdiff(&wigner_d(l, &Rotation::identity(), l_max)?, &eye(2 * l + 1)));
    }
    Ok(err)
}

fn wigner_homomorphism(seed: u64, pairs: usize, l_max: usize) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut err: f64 = 0.0;
    for _ in 0..pairs {
        let (a, b) = (Rotation::random(&mut r), Rotation::random(&mut r));
        for l in 0..=l_max {
            let lhs = wigner_d(l, &a.compose(&b), l_max)?;
            let rhs = cmul(&wigner_d(l, &a, l_max)?, &wigner_d(l, &b, l_max)?);
            err = err.max(cdiff(&lhs, &rhs));
        }
    }
    Ok(err)
}

/// `sum_m D^l_(m m1)(R) Y^l_m(r) = Y^l_(m1)(R^-1 r)`.
fn kernel_constraint(seed: u64, trials: usize, l_max: usize) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let rot = Rotation::random(&mut r);
        let p = rng::point(&mut r, 1.0);
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let dir = [p[0] / n, p[1] / n, p[2] / n];
        let y = sph_harm_all(l_max, &dir)?;
        let yr = sph_harm_all(l_max, &rot.inverse().apply(&dir))?;
        for l in 0..=l_max {
            let d = wigner_d(l, &rot, l_max)?;
            let off = l * l;
            for m1 in 0..2 * l + 1 {
                let s: C64 = (0..2 * l + 1).map(|m| d[m][m1] * y[off + m]).sum();
                err = err.max((s - yr[off + m1]).norm());
            }
        }
    }
    Ok(err)
}

/// `e^(i n theta) K_n(R_theta^-1 r) = K_n(r)`, read off a two-point
/// harmonic layer whose source feature is the `n = 0` unit.
fn harmonic_kernel(seed: u64, trials: usize) -> Result<f64> {
    let n_max = 2;
    let cfg = HarmonicConfig { n_points: 2, n_max, radial: RadialBasis::default(), kernel: KernelKind::Equivariant };
    let s = store(cfg.param_shapes(), seed, 1.0);
    let layer = build_harmonic::<C64>(&cfg, &s.to_params())?;
    let mut f = vec![vec![C64::new(0.0, 0.0); 2 * n_max + 1]; 2];
    f[1][n_max] = C64::new(1.0, 0.0);
    let mut r = rng::derive(seed, 1);
    let mut err: f64 = 0.0;
    for _ in 0..trials {
        let theta = rng::uniform(&mut r, -3.0, 3.0);
        let rot = Rotation::about_z(theta);
        let mut a = rng::point(&mut r, 1.0);
        a[2] = 0.0;
        let k = layer.forward(&[a, [0.0; 3]], &f)?;
        let kr = layer.forward(&[rot.inverse().apply(&a), [0.0; 3]], &f)?;
        for (i, n) in (-(n_max as i64)..=n_max as i64).enumerate() {
            let lhs = C64::from_polar(1.0, n as f64 * theta) * kr[0][i];
            err = err.max((lhs - k[0][i]).norm());
        }
    }
    Ok(err)
}

pub fn repr(ctx: Ctx) -> Vec<CaseSpec> {
    let c = ctx.cfg;
    let l_max = c.int("repr", "l_max", 3);
    let pairs = c.int("repr", "pairs", 50);
    let s = ctx.seed;
    let so3 = Arc::new(make_so3_algebra(2, TruncationPolicy::Strict));
    let so2 = Arc::new(make_so2_algebra(3, TruncationPolicy::Strict));
    let compat_tol = c.tol("compat", 1e-8);
    vec![
        CaseSpec::new("repr/cg-orthogonality", s, c.tol("cg", 1e-12), move || Ok(cg_orthogonality(l_max as i64))),
        CaseSpec::new("repr/wigner-unitarity", s, c.tol("wigner_unitarity", 1e-10), move || {
            wigner_unitarity(s, pairs, l_max)
        }),
        CaseSpec::new("repr/wigner-homomorphism", s, c.tol("wigner_homomorphism", 1e-9), move || {
            wigner_homomorphism(s, pairs, l_max)
        }),
        CaseSpec::new("repr/compat-so3", s, compat_tol, move || {
            Ok(check_product_compat(&so3, GroupElement::random_so3, pairs, compat_tol, s)?.max_defect)
        }),
        CaseSpec::new("repr/compat-so2", s, compat_tol, move || {
            Ok(check_product_compat(&so2, GroupElement::random_so2, pairs, compat_tol, s)?.max_defect)
        }),
        CaseSpec::new("repr/tfn-kernel-constraint", s, compat_tol, move || kernel_constraint(s, pairs, 2)),
        CaseSpec::new("repr/harmonic-kernel-constraint", s, 1e-10 * c.float("run", "tol_scale", 1.0), move || {
            harmonic_kernel(s, 20)
        }),
    ]
}
