//! Group machinery: SO(2)/SO(3) feature algebras, lifted group actions on
//! tensor elements and numeric symmetry checks.
//!
//! Rotations act on point clouds by the rotate-positions convention: sample
//! positions r_a become R r_a and features at each sample are rotated by the
//! feature representation. On an SO(3) feature factor that representation is
//! `rho(R) = conj(D(R))`, which is what makes `Y(R r) = rho(R) Y(r)` hold with
//! the D convention in [`wigner`].

pub mod cg;
pub mod sph;
pub mod wigner;

use std::sync::Arc;

pub use cg::{cg, CgTable};
pub use sph::{sph_harm, sph_harm_all};
pub use wigner::{wigner_d, wigner_d_euler, wigner_small_d, Rotation};

use crate::algebra::{product, Algebra, AlgebraElement, AlgebraKind, AxiomFlags, TruncationPolicy};
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rng::{self, Rng64};
use crate::scalar::{Field, C64};
use crate::tensor::{Space, TensorElement};

/// Basis index of (l, m) in an SO(3) feature algebra.
pub fn lm_index(l: usize, m: i64) -> usize {
    l * l + (m + l as i64) as usize
}

/// Irreps l = 0..=l_max with `e^l1_m1 e^l2_m2 = sum_l C^{l m}_{l1 m1, l2 m2} e^l_m`.
///
/// Pairs with l1 + l2 > l_max lose components; `policy` decides whether
/// using them is an error or drops the excess.
pub fn make_so3_algebra(l_max: usize, policy: TruncationPolicy) -> Algebra {
    let dim = (l_max + 1) * (l_max + 1);
    let mut entries = Vec::new();
    let mut overflow = vec![false; dim * dim];
    let lm = l_max as i64;
    for l1 in 0..=lm {
        for m1 in -l1..=l1 {
            for l2 in 0..=lm {
                for m2 in -l2..=l2 {
                    let i = lm_index(l1 as usize, m1);
                    let j = lm_index(l2 as usize, m2);
                    overflow[i * dim + j] = l1 + l2 > lm;
                    for l in (l1 - l2).abs()..=(l1 + l2).min(lm) {
                        let m = m1 + m2;
                        let c = cg(l1, m1, l2, m2, l, m);
                        if m.abs() <= l && c != 0.0 {
                            entries.push((i, j, lm_index(l as usize, m), C64::new(c, 0.0)));
                        }
                    }
                }
            }
        }
    }
    let labels = (0..=lm)
        .flat_map(|l| (-l..=l).map(move |m| format!("l{l}m{m}")))
        .collect();
    Algebra::generic(&format!("SO3_{l_max}"), dim, entries, Field::Complex, AxiomFlags::none())
        .and_then(|a| a.with_labels(labels))
        .expect("so3 algebra")
        .with_kind(AlgebraKind::So3 { l_max })
        .with_truncation(policy, overflow)
}

/// Fourier modes n = -n_max..=n_max (index n + n_max) with `e_n e_m = e_(n+m)`.
pub fn make_so2_algebra(n_max: usize, policy: TruncationPolicy) -> Algebra {
    let dim = 2 * n_max + 1;
    let nm = n_max as i64;
    let mut entries = Vec::new();
    let mut overflow = vec![false; dim * dim];
    for n in -nm..=nm {
        for m in -nm..=nm {
            let i = (n + nm) as usize;
            let j = (m + nm) as usize;
            if (n + m).abs() <= nm {
                entries.push((i, j, (n + m + nm) as usize, C64::new(1.0, 0.0)));
            } else {
                overflow[i * dim + j] = true;
            }
        }
    }
    let flags = AxiomFlags {
        associative: false,
        commutative: true,
        unit: Some(n_max),
    };
    let labels = (-nm..=nm).map(|n| format!("n{n}")).collect();
    Algebra::generic(&format!("SO2_{n_max}"), dim, entries, Field::Complex, flags)
        .and_then(|a| a.with_labels(labels))
        .expect("so2 algebra")
        .with_kind(AlgebraKind::So2 { n_max })
        .with_truncation(policy, overflow)
}

#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    Identity,
    /// Cyclic shift of a two-factor grid.
    Translation { a: i64, b: i64 },
    /// Rotation about the z axis.
    So2 { theta: f64 },
    So3(Rotation),
}

impl GroupElement {
    /// `self * other`: apply `other` first.
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        use GroupElement::*;
        Ok(match (self, other) {
            (Identity, g) | (g, Identity) => g.clone(),
            (Translation { a, b }, Translation { a: c, b: d }) => Translation { a: a + c, b: b + d },
            (So2 { theta: s }, So2 { theta: t }) => So2 { theta: s + t },
            (So3(r), So3(q)) => So3(r.compose(q)),
            _ => return Err(Error::LiftInapplicable("composing elements of different groups".into())),
        })
    }

    pub fn random_so3(rng: &mut Rng64) -> Self {
        GroupElement::So3(Rotation::random(rng))
    }

    pub fn random_so2(rng: &mut Rng64) -> Self {
        GroupElement::So2 {
            theta: rng::uniform(rng, -std::f64::consts::PI, std::f64::consts::PI),
        }
    }

    pub fn random_translation(rng: &mut Rng64, h: usize, w: usize) -> Self {
        use rand::Rng;
        GroupElement::Translation {
            a: rng.gen_range(0..h as i64),
            b: rng.gen_range(0..w as i64),
        }
    }
}

/// Feature representation blocks `rho^l(R) = conj(D^l(R))`, l = 0..=l_max.
pub fn so3_rho(l_max: usize, r: &Rotation) -> Vec<Vec<Vec<C64>>> {
    let (a, b, g) = r.euler();
    (0..=l_max)
        .map(|l| {
            wigner_d_euler(l, a, b, g)
                .into_iter()
                .map(|row| row.into_iter().map(|v| v.conj()).collect())
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
enum Action {
    Identity,
    Shift { a: i64, b: i64 },
    Phase { factor: usize, n_max: usize, theta: f64 },
    Wigner { factor: usize, rot: Rotation, blocks: Vec<Vec<Vec<C64>>> },
}

/// A group element realised on one tensor space.
#[derive(Clone, Debug)]
pub struct LiftedTransform {
    space: Space,
    action: Action,
}

fn find_factor(space: &Space, pred: impl Fn(AlgebraKind) -> bool) -> Option<usize> {
    space.factors().iter().position(|a| pred(a.kind()))
}

pub fn lift(g: &GroupElement, space: &Space) -> Result<LiftedTransform> {
    let action = match g {
        GroupElement::Identity => Action::Identity,
        GroupElement::Translation { a, b } => {
            if space.arity() != 2 {
                return Err(Error::LiftInapplicable("translations act on two-factor grids".into()));
            }
            Action::Shift { a: *a, b: *b }
        }
        GroupElement::So2 { theta } => {
            let f = find_factor(space, |k| matches!(k, AlgebraKind::So2 { .. }))
                .ok_or_else(|| Error::LiftInapplicable("space has no SO(2) factor".into()))?;
            let AlgebraKind::So2 { n_max } = space.factor(f).kind() else { unreachable!() };
            Action::Phase { factor: f, n_max, theta: *theta }
        }
        GroupElement::So3(r) => {
            let f = find_factor(space, |k| matches!(k, AlgebraKind::So3 { .. }))
                .ok_or_else(|| Error::LiftInapplicable("space has no SO(3) factor".into()))?;
            let AlgebraKind::So3 { l_max } = space.factor(f).kind() else { unreachable!() };
            Action::Wigner {
                factor: f,
                rot: *r,
                blocks: so3_rho(l_max, r),
            }
        }
    };
    Ok(LiftedTransform {
        space: space.clone(),
        action,
    })
}

fn l_of(i: usize) -> usize {
    (i as f64).sqrt().floor() as usize
}

impl LiftedTransform {
    pub fn apply(&self, x: &TensorElement) -> Result<TensorElement> {
        crate::tensor::same_space(x.space(), &self.space)
            .then_some(())
            .ok_or_else(|| Error::SpaceMismatch(x.space().name().into(), self.space.name().into()))?;
        let space = &self.space;
        let rotate = |r: &Rotation| {
            x.positions()
                .map(|p| Arc::new(p.iter().map(|v| r.apply(v)).collect::<Vec<_>>()))
        };
        match &self.action {
            Action::Identity => Ok(x.clone()),
            Action::Shift { a, b } => {
                let (h, w) = (space.dims()[0] as i64, space.dims()[1] as i64);
                let entries = x
                    .nonzeros()
                    .into_iter()
                    .map(|(f, v)| {
                        let (i, j) = (f as i64 / w, f as i64 % w);
                        (((i + a).rem_euclid(h) * w + (j + b).rem_euclid(w)) as usize, v)
                    })
                    .collect();
                Ok(TensorElement::from_flat(space, entries)?.with_positions(x.positions().cloned()))
            }
            Action::Phase { factor, n_max, theta } => {
                let stride = space.strides()[*factor];
                let d = space.dims()[*factor];
                let entries = x
                    .nonzeros()
                    .into_iter()
                    .map(|(f, v)| {
                        let n = ((f / stride) % d) as f64 - *n_max as f64;
                        (f, v * C64::from_polar(1.0, n * theta))
                    })
                    .collect();
                let pos = rotate(&Rotation::about_z(*theta));
                Ok(TensorElement::from_flat(space, entries)?.with_positions(pos.or_else(|| x.positions().cloned())))
            }
            Action::Wigner { factor, rot, blocks } => {
                let stride = space.strides()[*factor];
                let d = space.dims()[*factor];
                let mut entries = Vec::new();
                for (f, v) in x.nonzeros() {
                    let j = (f / stride) % d;
                    let base = f - j * stride;
                    let l = l_of(j);
                    let mp = j - l * l;
                    for (m, row) in blocks[l].iter().enumerate() {
                        let c = row[mp];
                        if c != C64::new(0.0, 0.0) {
                            entries.push((base + (l * l + m) * stride, v * c));
                        }
                    }
                }
                Ok(TensorElement::from_flat(space, entries)?.with_positions(rotate(rot)))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivarianceReport {
    pub max_defect: f64,
    pub defects: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// `max_trials || op(T_g x) - T_g op(x) ||_inf`, each trial seeded from
/// `(seed, trial)` so results do not depend on scheduling.
pub fn check_equivariance<F, G, I>(
    op: F,
    group: G,
    input: I,
    n_trials: usize,
    tol: f64,
    seed: u64,
) -> Result<EquivarianceReport>
where
    F: Fn(&TensorElement) -> Result<TensorElement> + Sync + Send,
    G: Fn(&mut Rng64) -> GroupElement + Sync + Send,
    I: Fn(&mut Rng64) -> TensorElement + Sync + Send,
{
    let defects = par::map_range(Exec::default(), n_trials, |t| -> Result<f64> {
        let mut r = rng::derive(seed, t as u64);
        let g = group(&mut r);
        let x = input(&mut r);
        let tg = lift(&g, x.space())?;
        let lhs = op(&tg.apply(&x)?)?;
        let y = op(&x)?;
        let rhs = lift(&g, y.space())?.apply(&y)?;
        Ok(lhs.max_abs_diff(&rhs))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let max_defect = defects.iter().copied().fold(0.0, f64::max);
    Ok(EquivarianceReport {
        max_defect,
        pass: max_defect <= tol,
        defects,
        tol,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompatReport {
    pub max_defect: f64,
    pub checked: usize,
    pub skipped: usize,
    pub tol: f64,
    pub pass: bool,
}

fn rho_matrix(alg: &Algebra, g: &GroupElement) -> Result<Vec<Vec<C64>>> {
    let d = alg.dim();
    let mut m = vec![vec![C64::new(0.0, 0.0); d]; d];
    match (alg.kind(), g) {
        (_, GroupElement::Identity) => (0..d).for_each(|i| m[i][i] = C64::new(1.0, 0.0)),
        (AlgebraKind::So2 { n_max }, GroupElement::So2 { theta }) => {
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = C64::from_polar(1.0, (i as f64 - n_max as f64) * theta);
            }
        }
        (AlgebraKind::So3 { l_max }, GroupElement::So3(r)) => {
            for (l, b) in so3_rho(l_max, r).into_iter().enumerate() {
                for (mi, row) in b.into_iter().enumerate() {
                    for (mj, v) in row.into_iter().enumerate() {
                        m[l * l + mi][l * l + mj] = v;
                    }
                }
            }
        }
        _ => return Err(Error::LiftInapplicable("algebra carries no representation of this group".into())),
    }
    Ok(m)
}

/// `(rho e_i)(rho e_j) = rho(e_i e_j)` on random basis pairs and group
/// elements; pairs whose product leaves the truncated range are skipped.
pub fn check_product_compat<G>(alg: &Arc<Algebra>, group: G, n_trials: usize, tol: f64, seed: u64) -> Result<CompatReport>
where
    G: Fn(&mut Rng64) -> GroupElement + Sync + Send,
{
    use rand::Rng;
    let d = alg.dim();
    let results = par::map_range(Exec::default(), n_trials, |t| -> Result<Option<f64>> {
        let mut r = rng::derive(seed, t as u64);
        let g = group(&mut r);
        let (i, j) = (r.gen_range(0..d), r.gen_range(0..d));
        if alg.overflows(i, j) {
            return Ok(None);
        }
        let rho = rho_matrix(alg, &g)?;
        let col = |k: usize| -> Result<AlgebraElement> { AlgebraElement::new(alg, rho.iter().map(|row| row[k]).collect()) };
        let lhs = product(&col(i)?, &col(j)?)?;
        let eij = product(&AlgebraElement::basis(alg, i)?, &AlgebraElement::basis(alg, j)?)?;
        let rhs: Vec<C64> = (0..d)
            .map(|a| (0..d).map(|b| rho[a][b] * eij.coeff()[b]).sum())
            .collect();
        Ok(Some(crate::scalar::max_abs_diff(lhs.coeff(), &rhs)))
    });
    let mut max_defect: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for r in results {
        match r? {
            Some(v) => {
                checked += 1;
                max_defect = max_defect.max(v);
            }
            None => skipped += 1,
        }
    }
    Ok(CompatReport {
        max_defect,
        checked,
        skipped,
        tol,
        pass: max_defect <= tol,
    })
}
