//! Attention as the composition `(X X^t) X^t` on `B1 (x) B1 (x) A`.
//!
//! The feature algebra is a direct sum of head blocks. Block `h` holds `R`
//! score slots followed by `d` channels:
//! `lambda^r_(a,b) = <W^Q_(h,r) e_a, W^K_(h,r) e_b> / sqrt(d_k)` and
//! `lambda^(h d_v + t)_(r, e) = W^V_(h,r)[t][e]`. The input is copied into
//! every block and the readout sums the blocks.

use std::sync::Arc;

use super::expr::{ExprBuilder, Manifest};
use super::{Bindings, Built};
use crate::algebra::{make_b1, make_direct_sum, Algebra, AxiomFlags};
use crate::autodiff::Params;
use crate::error::{Error, Result};
use crate::scalar::{Activation, Coeff, Field};
use crate::structural::{compose, StructuralOperator};
use crate::tensor::{embed_sequence_at, tensor_space, EmbeddingSpec, Role, Space, TensorElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AttentionVariant {
    /// `F` on causal scores, no normalisation.
    CausalUnnormalized(Activation),
    /// Causal softmax.
    Softmax,
    /// Causal softmax with `heads` direct-sum blocks of width `d / heads`.
    Multihead { heads: usize },
    /// Causal softmax with `rank` score slots sharing one block.
    RankR { rank: usize },
    /// Queries from `X`, keys and values from `Y` of length `m`; softmax,
    /// no mask.
    Cross { m: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AttentionConfig {
    pub n: usize,
    pub d: usize,
    pub variant: AttentionVariant,
}

impl AttentionConfig {
    pub fn new(n: usize, d: usize, variant: AttentionVariant) -> Self {
        AttentionConfig { n, d, variant }
    }

    pub fn heads(&self) -> usize {
        match self.variant {
            AttentionVariant::Multihead { heads } => heads,
            _ => 1,
        }
    }

    pub fn rank(&self) -> usize {
        match self.variant {
            AttentionVariant::RankR { rank } => rank,
            _ => 1,
        }
    }

    /// Query/key width (and value width per head).
    pub fn head_dim(&self) -> usize {
        self.d / self.heads()
    }

    fn key_len(&self) -> usize {
        match self.variant {
            AttentionVariant::Cross { m } => m,
            _ => self.n,
        }
    }

    fn causal(&self) -> bool {
        !matches!(self.variant, AttentionVariant::Cross { .. })
    }

    fn func(&self) -> Activation {
        match self.variant {
            AttentionVariant::CausalUnnormalized(f) => f,
            _ => Activation::Exp,
        }
    }

    fn normalized(&self) -> bool {
        !matches!(self.variant, AttentionVariant::CausalUnnormalized(_))
    }

    fn block_dim(&self) -> usize {
        self.rank() + self.d
    }

    /// `wq`, `wk`: `[heads, rank, d_k, d]`; `wv`: `[heads, rank, d_v, d]`.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (h, r, dk, d) = (self.heads(), self.rank(), self.head_dim(), self.d);
        vec![
            ("wq", vec![h, r, dk, d]),
            ("wk", vec![h, r, dk, d]),
            ("wv", vec![h, r, dk, d]),
        ]
    }

    fn validate(&self) -> Result<()> {
        let (h, r) = (self.heads(), self.rank());
        if self.n == 0 || self.d == 0 || h == 0 || r == 0 || self.key_len() == 0 {
            return Err(Error::InvalidDimension("attention sizes must be positive".into()));
        }
        if !self.d.is_multiple_of(h) {
            return Err(Error::InvalidDimension(format!("d = {} is not divisible by {h} heads", self.d)));
        }
        Ok(())
    }
}

/// A built attention layer plus its embedding and readout.
#[derive(Clone, Debug)]
pub struct Attention<T: Coeff> {
    pub cfg: AttentionConfig,
    pub built: Built<T>,
}

fn head_algebra<T: Coeff>(cfg: &AttentionConfig, params: &Params<T>, h: usize) -> Result<Algebra<T>> {
    let (r_n, dk, d) = (cfg.rank(), cfg.head_dim(), cfg.d);
    let shape = cfg.param_shapes()[0].1.clone();
    let wq = params.get_shaped("wq", &shape)?;
    let wk = params.get_shaped("wk", &shape)?;
    let wv = params.get_shaped("wv", &shape)?;
    let temp = 1.0 / (dk as f64).sqrt();
    let mut e = Vec::new();
    for r in 0..r_n {
        for a in 0..d {
            for b in 0..d {
                let mut s = T::zero();
                for j in 0..dk {
                    s = s + wq.at(&[h, r, j, a]) * wk.at(&[h, r, j, b]);
                }
                e.push((r_n + a, r_n + b, r, s.scale(temp)));
            }
        }
        for t in 0..dk {
            for a in 0..d {
                e.push((r, r_n + a, r_n + h * dk + t, wv.at(&[h, r, t, a])));
            }
        }
    }
    Algebra::generic(&format!("attn_head{h}"), cfg.block_dim(), e, Field::Real, AxiomFlags::none())
}

pub fn build_attention<T: Coeff>(cfg: &AttentionConfig, params: &Params<T>) -> Result<Attention<T>> {
    cfg.validate()?;
    let heads = (0..cfg.heads())
        .map(|h| head_algebra(cfg, params, h))
        .collect::<Result<Vec<_>>>()?;
    let feat = if heads.len() == 1 {
        heads.into_iter().next().expect("one head")
    } else {
        make_direct_sum(&heads)?
    };
    let b1 = Arc::new(make_b1(cfg.n.max(cfg.key_len()))?.lift::<T>());
    let space = tensor_space(
        vec![b1.clone(), b1, Arc::new(feat)],
        vec![Role::Positional, Role::Positional, Role::Feature],
    )?;

    let scores: Vec<usize> = (0..cfg.heads())
        .flat_map(|h| (0..cfg.rank()).map(move |r| h * cfg.block_dim() + r))
        .collect();
    let mut post = vec![
        StructuralOperator::ScalarProj { factor: 2, keep: scores.clone() },
        StructuralOperator::Activation {
            func: cfg.func(),
            support: Some(vec![
                Some((1..=cfg.n).collect()),
                Some((1..=cfg.key_len()).collect()),
                Some(scores),
            ]),
        },
    ];
    if cfg.causal() {
        post.push(StructuralOperator::Causal { query: 0, key: 1, collapse: false });
    }
    if cfg.normalized() {
        post.push(StructuralOperator::Normalize { axis: 1 });
    }
    let flip = || StructuralOperator::Flip { a: 0, b: 1 };

    let key_slot = if cfg.causal() { "X" } else { "Y" };
    let mut b = ExprBuilder::new(&space);
    let q = b.slot("X");
    let k = b.slot(key_slot);
    let scores = b.mult(q, k, flip(), compose(post))?;
    let v = b.slot(key_slot);
    let out = b.mult(scores, v, flip(), StructuralOperator::Identity)?;
    let expr = b.finish(out)?;

    let name = match cfg.variant {
        AttentionVariant::CausalUnnormalized(_) => "attention_causal",
        AttentionVariant::Softmax => "attention_softmax",
        AttentionVariant::Multihead { .. } => "attention_multihead",
        AttentionVariant::RankR { .. } => "attention_rank_r",
        AttentionVariant::Cross { .. } => "attention_cross",
    };
    let mut manifest = Manifest::new(name, &expr)?
        .with_params(cfg.param_shapes().into_iter().map(|(n, s)| (n.into(), s)).collect());
    if cfg.heads() > 1 {
        manifest = manifest.note("readout sums the head blocks");
    }
    Ok(Attention {
        cfg: *cfg,
        built: Built::new(manifest, expr),
    })
}

impl<T: Coeff> Attention<T> {
    pub fn space(&self) -> &Space<T> {
        self.built.expr.space()
    }

    /// Tokens `x[k][a]` copied into every block.
    pub fn embed(&self, tokens: &[Vec<f64>]) -> Result<TensorElement<T>> {
        if tokens.iter().any(|t| t.len() != self.cfg.d) {
            return Err(Error::ShapeMismatch(format!("tokens must have {} channels", self.cfg.d)));
        }
        let mut acc = TensorElement::zero(self.space());
        for h in 0..self.cfg.heads() {
            let off = h * self.cfg.block_dim() + self.cfg.rank();
            acc = acc.add(&embed_sequence_at(tokens, self.space(), &EmbeddingSpec::sequence(off))?)?;
        }
        Ok(acc)
    }

    /// `out[k][t]` summed over blocks.
    pub fn read(&self, el: &TensorElement<T>) -> Result<Vec<Vec<T>>> {
        let mut out = vec![vec![T::zero(); self.cfg.d]; self.cfg.n];
        for (k, row) in out.iter_mut().enumerate() {
            for h in 0..self.cfg.heads() {
                let off = h * self.cfg.block_dim() + self.cfg.rank();
                for (t, o) in row.iter_mut().enumerate() {
                    let v = el.get(&[k + 1, 0, off + t])?;
                    if !v.is_structural_zero() {
                        *o = *o + v;
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn bindings(&self, x: &[Vec<f64>], y: Option<&[Vec<f64>]>) -> Result<Bindings<T>> {
        let mut b = Bindings::new();
        b.insert("X".into(), self.embed(x)?);
        if let AttentionVariant::Cross { m } = self.cfg.variant {
            let y = y.ok_or_else(|| Error::UnboundSlot("Y".into()))?;
            if y.len() != m {
                return Err(Error::ShapeMismatch(format!("Y has {} rows, expected {m}", y.len())));
            }
            b.insert("Y".into(), self.embed(y)?);
        }
        Ok(b)
    }

    pub fn forward(&self, x: &[Vec<f64>], y: Option<&[Vec<f64>]>) -> Result<Vec<Vec<T>>> {
        if x.len() != self.cfg.n {
            return Err(Error::ShapeMismatch(format!("X has {} rows, expected {}", x.len(), self.cfg.n)));
        }
        self.read(&self.built.expr.eval(&self.bindings(x, y)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::rng;
    use crate::scalar::C64;

    fn store(cfg: &AttentionConfig, seed: u64) -> ParamStore {
        let mut s = ParamStore::new(seed);
        let mut r = rng::seeded(seed);
        for (n, shape) in cfg.param_shapes() {
            s.insert_random(n, shape, 1.0, &mut r);
        }
        s
    }

    #[test]
    fn first_token_attends_only_to_itself() {
        let cfg = AttentionConfig::new(4, 3, AttentionVariant::Softmax);
        let s = store(&cfg, 1);
        let att = build_attention::<C64>(&cfg, &s.to_params()).unwrap();
        let x = rng::mat(&mut rng::seeded(2), 4, 3, 1.0);
        let out = att.forward(&x, None).unwrap();
        let wv = s.block("wv").unwrap();
        for t in 0..3 {
            let want: f64 = (0..3).map(|a| wv.at(&[0, 0, t, a]) * x[0][a]).sum();
            assert!((out[0][t].re - want).abs() < 1e-14);
        }
        assert_eq!(att.built.manifest.orders["X"], 3);
    }

    #[test]
    fn shapes_and_orders() {
        for v in [
            AttentionVariant::CausalUnnormalized(Activation::Elu),
            AttentionVariant::Multihead { heads: 2 },
            AttentionVariant::RankR { rank: 2 },
            AttentionVariant::Cross { m: 3 },
        ] {
            let cfg = AttentionConfig::new(4, 4, v);
            let att = build_attention::<C64>(&cfg, &store(&cfg, 3).to_params()).unwrap();
            let x = rng::mat(&mut rng::seeded(4), 4, 4, 1.0);
            let y = rng::mat(&mut rng::seeded(5), 3, 4, 1.0);
            let out = att.forward(&x, Some(&y)).unwrap();
            assert_eq!(out.len(), 4);
            let o = &att.built.manifest.orders;
            match v {
                AttentionVariant::Cross { .. } => assert_eq!((o["X"], o["Y"]), (1, 2)),
                _ => assert_eq!(o["X"], 3),
            }
        }
        let bad = AttentionConfig::new(4, 3, AttentionVariant::Multihead { heads: 2 });
        assert!(build_attention::<C64>(&bad, &Params::new()).is_err());
    }
}
