//! Tensor-product attention on `B2 (x) B2 (x) A`.
//!
//! `A` is a direct sum of head blocks laid out as
//! `[score, features 0..d_h, rank slots (Q, K, V), b-slots 0..d]`. The input
//! sits at the b-slots of head 0. `W^b` copies it into every head's b-slots
//! and `W^a` maps it into the rank slots, so `W^a(X) W^b(X)` contracts
//! `lambda^q_(n, m) = b[n][q][m]` into per-head queries, keys and values.

use std::sync::Arc;

use super::expr::{ExprBuilder, Manifest, NodeId};
use super::{Bindings, Built};
use crate::algebra::{make_b2, make_direct_sum, Algebra, AxiomFlags};
use crate::autodiff::Params;
use crate::error::{Error, Result};
use crate::scalar::{Activation, Coeff, Field};
use crate::structural::{compose, StructuralOperator};
use crate::tensor::{embed_sequence_at, tensor_space, EmbeddingSpec, Role, Space, TensorElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TpaConfig {
    pub n: usize,
    pub d: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub rank_q: usize,
    pub rank_k: usize,
    pub rank_v: usize,
}

const PARTS: [&str; 3] = ["q", "k", "v"];

impl TpaConfig {
    fn ranks(&self) -> [usize; 3] {
        [self.rank_q, self.rank_k, self.rank_v]
    }

    fn block_dim(&self) -> usize {
        1 + self.head_dim + self.ranks().iter().sum::<usize>() + self.d
    }

    fn feat(&self, q: usize) -> usize {
        1 + q
    }

    fn rank_slot(&self, part: usize, n: usize) -> usize {
        1 + self.head_dim + self.ranks()[..part].iter().sum::<usize>() + n
    }

    fn b_slot(&self, m: usize) -> usize {
        1 + self.head_dim + self.ranks().iter().sum::<usize>() + m
    }

    /// `a_*`: `[rank, heads, d]`; `b_*`: `[rank, d_h, d]`.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut v = Vec::new();
        for (p, r) in PARTS.iter().zip(self.ranks()) {
            v.push((format!("a_{p}"), vec![r, self.heads, self.d]));
            v.push((format!("b_{p}"), vec![r, self.head_dim, self.d]));
        }
        v
    }
}

#[derive(Clone, Debug)]
pub struct Tpa<T: Coeff> {
    pub cfg: TpaConfig,
    pub built: Built<T>,
    /// Slot occurrences feeding `W^a` for Q, K, V.
    pub a_occurrences: Vec<NodeId>,
}

fn head_algebra<T: Coeff>(cfg: &TpaConfig, params: &Params<T>, h: usize) -> Result<Algebra<T>> {
    let dh = cfg.head_dim;
    let temp = T::from_real(1.0 / (dh as f64).sqrt());
    let mut e = Vec::new();
    for q in 0..dh {
        e.push((cfg.feat(q), cfg.feat(q), 0, temp));
        e.push((0, cfg.feat(q), cfg.feat(q), T::one()));
    }
    for (part, p) in PARTS.iter().enumerate() {
        let r = cfg.ranks()[part];
        let b = params.get_shaped(&format!("b_{p}"), &[r, dh, cfg.d])?;
        for n in 0..r {
            for q in 0..dh {
                for m in 0..cfg.d {
                    e.push((cfg.rank_slot(part, n), cfg.b_slot(m), cfg.feat(q), b.at(&[n, q, m])));
                }
            }
        }
    }
    Algebra::generic(&format!("tpa_head{h}"), cfg.block_dim(), e, Field::Real, AxiomFlags::none())
}

pub fn build_tpa<T: Coeff>(cfg: &TpaConfig, params: &Params<T>) -> Result<Tpa<T>> {
    if cfg.n == 0 || cfg.d == 0 || cfg.heads == 0 || cfg.head_dim == 0 || cfg.ranks().contains(&0) {
        return Err(Error::InvalidDimension("tpa sizes must be positive".into()));
    }
    let blocks = (0..cfg.heads)
        .map(|h| head_algebra(cfg, params, h))
        .collect::<Result<Vec<_>>>()?;
    let feat = if blocks.len() == 1 {
        blocks.into_iter().next().expect("one head")
    } else {
        make_direct_sum(&blocks)?
    };
    let fd = feat.dim();
    let b2 = Arc::new(make_b2(cfg.n)?.lift::<T>());
    let space = tensor_space(
        vec![b2.clone(), b2, Arc::new(feat)],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )?;
    let bd = cfg.block_dim();

    let mut wb = vec![vec![T::zero(); fd]; fd];
    for h in 0..cfg.heads {
        for m in 0..cfg.d {
            wb[h * bd + cfg.b_slot(m)][cfg.b_slot(m)] = T::one();
        }
    }
    let wa = |part: usize| -> Result<Vec<Vec<T>>> {
        let r = cfg.ranks()[part];
        let a = params.get_shaped(&format!("a_{}", PARTS[part]), &[r, cfg.heads, cfg.d])?;
        let mut m = vec![vec![T::zero(); fd]; fd];
        for n in 0..r {
            for h in 0..cfg.heads {
                for al in 0..cfg.d {
                    m[h * bd + cfg.rank_slot(part, n)][cfg.b_slot(al)] = a.at(&[n, h, al]);
                }
            }
        }
        Ok(m)
    };

    let mut b = ExprBuilder::new(&space);
    let mut a_occ = Vec::new();
    let mut qkv = Vec::new();
    for part in 0..3 {
        let xa = b.slot("X");
        a_occ.push(xa);
        let fa = b.structural(StructuralOperator::FactorLinear { factor: 2, matrix: wa(part)? }, xa)?;
        let xb = b.slot("X");
        qkv.push(b.mult(
            fa,
            xb,
            StructuralOperator::FactorLinear { factor: 2, matrix: wb.clone() },
            StructuralOperator::Identity,
        )?);
    }
    let scores: Vec<usize> = (0..cfg.heads).map(|h| h * bd).collect();
    let flip = || StructuralOperator::Flip { a: 0, b: 1 };
    let att = b.mult(
        qkv[0],
        qkv[1],
        flip(),
        compose(vec![
            StructuralOperator::ScalarProj { factor: 2, keep: scores.clone() },
            StructuralOperator::Activation {
                func: Activation::Exp,
                support: Some(vec![None, None, Some(scores)]),
            },
            StructuralOperator::Causal { query: 0, key: 1, collapse: false },
            StructuralOperator::Normalize { axis: 1 },
        ]),
    )?;
    let out = b.mult(
        att,
        qkv[2],
        flip(),
        StructuralOperator::Causal { query: 0, key: 1, collapse: true },
    )?;
    let expr = b.finish(out)?;
    let manifest = Manifest::new("tpa", &expr)?.with_params(cfg.param_shapes().into_iter().collect());
    Ok(Tpa {
        cfg: *cfg,
        built: Built::new(manifest, expr),
        a_occurrences: a_occ,
    })
}

impl<T: Coeff> Tpa<T> {
    pub fn space(&self) -> &Space<T> {
        self.built.expr.space()
    }

    pub fn embed(&self, tokens: &[Vec<f64>]) -> Result<TensorElement<T>> {
        if tokens.len() != self.cfg.n || tokens.iter().any(|t| t.len() != self.cfg.d) {
            return Err(Error::ShapeMismatch(format!("tpa expects {}x{} tokens", self.cfg.n, self.cfg.d)));
        }
        embed_sequence_at(tokens, self.space(), &EmbeddingSpec::sequence(self.cfg.b_slot(0)))
    }

    /// `out[k][h d_h + q]`.
    pub fn read(&self, el: &TensorElement<T>) -> Result<Vec<Vec<T>>> {
        let bd = self.cfg.block_dim();
        (0..self.cfg.n)
            .map(|k| {
                (0..self.cfg.heads)
                    .flat_map(|h| (0..self.cfg.head_dim).map(move |q| (h, q)))
                    .map(|(h, q)| el.get(&[k, 0, h * bd + self.cfg.feat(q)]))
                    .collect()
            })
            .collect()
    }

    pub fn forward(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<T>>> {
        self.read(&self.built.expr.eval(&Bindings::from([("X".to_string(), self.embed(x)?)]))?)
    }

    /// Bind every `W^a` input to the constant `c`.
    pub fn with_fixed_a_inputs(&self, c: &TensorElement<T>) -> Result<Self> {
        let mut out = self.clone();
        for (part, &occ) in self.a_occurrences.iter().enumerate() {
            out.built.expr = out.built.expr.replace_slot(occ, &format!("a_input_{}", PARTS[part]), c.clone())?;
        }
        out.built.manifest = Manifest::new("tpa_fixed_a", &out.built.expr)?.with_params(self.built.manifest.params.clone());
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::interaction::attention::{build_attention, AttentionConfig, AttentionVariant};
    use crate::rng;
    use crate::scalar::C64;

    fn store(cfg: &TpaConfig, seed: u64) -> ParamStore {
        let mut s = ParamStore::new(seed);
        let mut r = rng::seeded(seed);
        for (n, shape) in cfg.param_shapes() {
            s.insert_random(&n, shape, 1.0, &mut r);
        }
        s
    }

    #[test]
    fn order_is_six() {
        let cfg = TpaConfig { n: 3, d: 4, heads: 2, head_dim: 2, rank_q: 2, rank_k: 1, rank_v: 1 };
        let t = build_tpa::<C64>(&cfg, &store(&cfg, 1).to_params()).unwrap();
        assert_eq!(t.built.manifest.orders["X"], 6);
        let out = t.forward(&rng::mat(&mut rng::seeded(2), 3, 4, 1.0)).unwrap();
        assert_eq!((out.len(), out[0].len()), (3, 4));
    }

    #[test]
    fn fixed_rank_factors_reduce_to_softmax_attention() {
        let (n, d) = (4, 3);
        let cfg = TpaConfig { n, d, heads: 1, head_dim: d, rank_q: 1, rank_k: 1, rank_v: 1 };
        let mut s = store(&cfg, 5);
        for p in PARTS {
            s.block_mut(&format!("a_{p}")).unwrap().values = vec![1.0, 0.0, 0.0];
        }
        let t = build_tpa::<C64>(&cfg, &s.to_params()).unwrap();
        let c = t.embed(&vec![vec![1.0, 0.0, 0.0]; n]).unwrap();
        let fixed = t.with_fixed_a_inputs(&c).unwrap();
        assert_eq!(fixed.built.manifest.orders["X"], 3);

        let acfg = AttentionConfig::new(n, d, AttentionVariant::Softmax);
        let mut a = ParamStore::new(0);
        for (name, src) in [("wq", "b_q"), ("wk", "b_k"), ("wv", "b_v")] {
            a.insert(name, vec![1, 1, d, d], s.block(src).unwrap().values.clone()).unwrap();
        }
        let att = build_attention::<C64>(&acfg, &a.to_params()).unwrap();
        let x = rng::mat(&mut rng::seeded(6), n, d, 1.0);
        let (u, v) = (fixed.forward(&x).unwrap(), att.forward(&x, None).unwrap());
        for k in 0..n {
            for q in 0..d {
                assert!((u[k][q] - v[k][q]).norm() < 1e-12, "{k} {q}");
            }
        }
    }
}
