//! Gradients, finite-difference checks, SGD and the shift regularizer.

use std::collections::BTreeMap;

use super::params::{Block, ParamStore, Params};
use super::tape::{self, CVar};
use crate::error::{Error, Result};
use crate::scalar::{Coeff, C64};

/// A scalar loss over named parameters, generic in the scalar so the same
/// code runs plain and taped.
pub trait Objective {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T>;

    /// Loss used at optimizer step `step`; defaults to [`Objective::loss`].
    fn loss_at<T: Coeff>(&self, p: &Params<T>, _step: usize) -> Result<T> {
        self.loss(p)
    }

    /// Extra metrics recorded in the trace.
    fn metrics(&self, _p: &Params<C64>) -> Result<BTreeMap<String, f64>> {
        Ok(BTreeMap::new())
    }
}

fn real_loss(v: C64) -> Result<f64> {
    if v.im.abs() > 1e-12 * v.re.abs().max(1.0) {
        return Err(Error::UnsupportedOp("loss has an imaginary part".into()));
    }
    Ok(v.re)
}

pub fn value<O: Objective>(obj: &O, store: &ParamStore) -> Result<f64> {
    real_loss(obj.loss(&store.to_params::<C64>())?.value())
}

/// Loss and its gradient in the store's flat order.
pub fn grad<O: Objective>(obj: &O, store: &ParamStore) -> Result<(f64, Vec<f64>)> {
    grad_at(obj, store, 0)
}

fn grad_at<O: Objective>(obj: &O, store: &ParamStore, step: usize) -> Result<(f64, Vec<f64>)> {
    tape::reset();
    let (p, leaves) = store.to_taped();
    let out: CVar = obj.loss_at(&p, step)?;
    let l = out.into_real_loss()?;
    let g = tape::gradient(l, &leaves);
    tape::reset();
    Ok((l.val(), g))
}

/// Central difference in flat coordinate `i`.
pub fn finite_difference<O: Objective>(obj: &O, store: &ParamStore, i: usize, h: f64) -> Result<f64> {
    let mut s = store.clone();
    let base = store.flat();
    let mut v = base.clone();
    v[i] = base[i] + h;
    s.set_flat(&v);
    let up = value(obj, &s)?;
    v[i] = base[i] - h;
    s.set_flat(&v);
    let down = value(obj, &s)?;
    Ok((up - down) / (2.0 * h))
}

pub const FD_STEPS: [f64; 3] = [1e-5, 1e-4, 1e-6];
/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub h: f64,
    pub rel_err: f64,
}

/// Compare reverse-mode gradients against central differences at the given
/// flat indices. Each index takes the best step from [`FD_STEPS`].
pub fn grad_check<O: Objective>(obj: &O, store: &ParamStore, indices: &[usize]) -> Result<Vec<GradCheck>> {
    let (_, g) = grad(obj, store)?;
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let mut best: Option<GradCheck> = None;
        for h in FD_STEPS {
            let fd = finite_difference(obj, store, i, h)?;
            let e = rel_err(g[i], fd);
            if best.as_ref().is_none_or(|b| e < b.rel_err) {
                best = Some(GradCheck {
                    index: i,
                    analytic: g[i],
                    numeric: fd,
                    h,
                    rel_err: e,
                });
            }
        }
        out.push(best.expect("at least one step"));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub steps: usize,
    pub sgd: Sgd,
    /// Record metrics every this many steps (and after the last one).
    pub metrics_every: usize,
    /// Clip the gradient to this max-norm when set.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 100,
            sgd: Sgd { lr: 0.1, momentum: 0.0 },
            metrics_every: 0,
            clip: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub loss: f64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
}

impl TrainTrace {
    pub fn final_loss(&self) -> Option<f64> {
        self.records.last().map(|r| r.loss)
    }
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }
}

/// Full-batch SGD with momentum. Record `s` holds the loss before update `s`.
pub fn train<O: Objective>(obj: &O, store: &mut ParamStore, cfg: &TrainConfig) -> Result<TrainTrace> {
    let mut trace = TrainTrace::default();
    let mut vel = vec![0.0; store.len()];
    for step in 0..cfg.steps {
        let (loss, mut g) = grad_at(obj, store, step)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if let Some(c) = cfg.clip {
            let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > c {
                g.iter_mut().for_each(|v| *v *= c / n);
            }
        }
        store.set_grads(&g);
        let mut v = store.flat();
        for ((p, gi), m) in v.iter_mut().zip(&g).zip(vel.iter_mut()) {
            *m = cfg.sgd.momentum * *m + gi;
            *p -= cfg.sgd.lr * *m;
        }
        store.set_flat(&v);
        let last = step + 1 == cfg.steps;
        let metrics = if (cfg.metrics_every > 0 && step % cfg.metrics_every == 0) || last {
            obj.metrics(&store.to_params())?
        } else {
            BTreeMap::new()
        };
        trace.records.push(TraceRecord { step, loss, metrics });
    }
    Ok(trace)
}

/// Sum of `(l[n][k][i+a] - l[n-a][k][i])^2` over every in-range `(k, i, n, a)`
/// for a block of shape `[kh, H, H]` read as `block[k][n][i]`.
pub fn symmetry_regularizer<T: Coeff>(block: &Block<T>) -> Result<T> {
    if block.shape.len() != 3 || block.shape[1] != block.shape[2] {
        return Err(Error::ShapeMismatch(format!(
            "regularizer needs [kh, H, H], got {:?}",
            block.shape
        )));
    }
    let (kh, h) = (block.shape[0], block.shape[1] as i64);
    let mut acc = T::zero();
    for k in 0..kh {
        for n in 0..h {
            for i in 0..h {
                for a in (-h + 1)..h {
                    if a == 0 {
                        continue;
                    }
                    let (ia, na) = (i + a, n - a);
                    if !(0..h).contains(&ia) || !(0..h).contains(&na) {
                        continue;
                    }
                    let d = block.at(&[k, n as usize, ia as usize]) - block.at(&[k, na as usize, i as usize]);
                    if !d.is_structural_zero() {
                        acc = acc + d * d;
                    }
                }
            }
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic;
    impl Objective for Quadratic {
        fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
            let w = p.get("w")?;
            Ok(w.values.iter().fold(T::zero(), |a, v| a + *v * *v))
        }
    }

    #[test]
    fn gradient_of_squared_norm() {
        let mut s = ParamStore::new(0);
        s.insert("w", vec![3], vec![0.5, -1.0, 2.0]).unwrap();
        let (l, g) = grad(&Quadratic, &s).unwrap();
        assert_eq!(l, 5.25);
        assert_eq!(g, vec![1.0, -2.0, 4.0]);
        for c in grad_check(&Quadratic, &s, &[0, 1, 2]).unwrap() {
            assert!(c.rel_err < 1e-8);
        }
    }

    #[test]
    fn sgd_converges_and_is_deterministic() {
        let mut a = ParamStore::new(0);
        a.insert("w", vec![2], vec![1.0, -1.0]).unwrap();
        let mut b = a.clone();
        let cfg = TrainConfig {
            steps: 50,
            sgd: Sgd { lr: 0.1, momentum: 0.5 },
            ..Default::default()
        };
        let ta = train(&Quadratic, &mut a, &cfg).unwrap();
        let tb = train(&Quadratic, &mut b, &cfg).unwrap();
        assert_eq!(ta, tb);
        assert!(ta.final_loss().unwrap() < 1e-6);
        assert_eq!(a.grad("w").unwrap().len(), 2);
    }

    #[test]
    fn divergence_reports_step() {
        struct Blow;
        impl Objective for Blow {
            fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
                let w = p.get("w")?.values[0];
                Ok((w * w).exp())
            }
        }
        let mut s = ParamStore::new(0);
        s.insert("w", vec![1], vec![3.0]).unwrap();
        let cfg = TrainConfig {
            steps: 10,
            sgd: Sgd { lr: 1.0, momentum: 0.0 },
            ..Default::default()
        };
        assert!(matches!(train(&Blow, &mut s, &cfg), Err(Error::Divergence { .. })));
    }

    fn shift_block(kh: usize, h: usize) -> Block<C64> {
        let mut v = vec![C64::new(0.0, 0.0); kh * h * h];
        for k in 0..kh {
            for n in 0..h {
                if n + k < h {
                    v[(k * h + n) * h + n + k] = C64::new(1.0, 0.0);
                }
            }
        }
        Block::new(vec![kh, h, h], v).unwrap()
    }

    #[test]
    fn regularizer_vanishes_on_shift_solution() {
        assert_eq!(symmetry_regularizer(&shift_block(3, 6)).unwrap(), C64::new(0.0, 0.0));
        assert!(symmetry_regularizer(&Block::new(vec![2, 3], vec![C64::new(0.0, 0.0); 6]).unwrap()).is_err());
    }

    #[test]
    fn regularizer_counts_pairs_of_a_perturbed_entry() {
        let (kh, h) = (2usize, 5usize);
        let eps = 1e-3;
        let mut b = shift_block(kh, h);
        let (k0, n0, i0) = (1usize, 2usize, 1usize);
        b.values[(k0 * h + n0) * h + i0] += C64::new(eps, 0.0);
        // Count in-range terms touching the entry by enumeration.
        let hi = h as i64;
        let mut count = 0;
        for n in 0..hi {
            for i in 0..hi {
                for a in -hi + 1..hi {
                    if a == 0 || !(0..hi).contains(&(i + a)) || !(0..hi).contains(&(n - a)) {
                        continue;
                    }
                    let left = (n, i + a) == (n0 as i64, i0 as i64);
                    let right = (n - a, i) == (n0 as i64, i0 as i64);
                    if left != right {
                        count += 1;
                    }
                }
            }
        }
        let r = symmetry_regularizer(&b).unwrap().re;
        assert!((r - count as f64 * eps * eps).abs() < 1e-15, "{r} vs {count}");
    }
}
