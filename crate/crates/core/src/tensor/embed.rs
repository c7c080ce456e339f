//! Placing raw signals into tensor spaces.
//!
//! Positional factors of kind B1 reserve index 0 for the origin f0, so item
//! k (1-based) lands on index k and "origin" means index 0. Factors of kind
//! B2 have no origin basis vector; the origin g0 is the all-ones element, so
//! an origin slot is written by broadcasting over every index.

use std::sync::Arc;

use super::{Space, TensorElement};
use crate::algebra::AlgebraKind;
use crate::error::{Error, Result};
use crate::scalar::{Coeff, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbeddingKind {
    Sequence,
    Image2d,
    Field3d,
    Hidden,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EmbeddingSpec {
    pub kind: EmbeddingKind,
    /// First feature index used by raw channel 0.
    pub feature_offset: usize,
    /// Factor that receives the origin (f0 or g0) for hidden axes.
    pub hidden_factor: Option<usize>,
}

impl EmbeddingSpec {
    pub fn sequence(feature_offset: usize) -> Self {
        EmbeddingSpec {
            kind: EmbeddingKind::Sequence,
            feature_offset,
            hidden_factor: Some(1),
        }
    }

    pub fn hidden(feature_offset: usize) -> Self {
        EmbeddingSpec {
            kind: EmbeddingKind::Hidden,
            feature_offset,
            hidden_factor: Some(0),
        }
    }
}

/// Indices that represent "position item p" and "origin" on a factor.
fn item_index(kind: AlgebraKind, p: usize) -> usize {
    match kind {
        AlgebraKind::B1 => p + 1,
        _ => p,
    }
}

fn origin_indices(kind: AlgebraKind, dim: usize) -> Vec<usize> {
    match kind {
        AlgebraKind::B2 => (0..dim).collect(),
        _ => vec![0],
    }
}

fn positional_capacity(kind: AlgebraKind, dim: usize) -> usize {
    match kind {
        AlgebraKind::B1 => dim - 1,
        _ => dim,
    }
}

fn check_pair_space<T: Coeff>(space: &Space<T>, n: usize, width: usize, offset: usize) -> Result<()> {
    if space.arity() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "expected a 3-factor space, found {}",
            space.arity()
        )));
    }
    for f in 0..2 {
        let a = space.factor(f);
        if positional_capacity(a.kind(), a.dim()) < n {
            return Err(Error::ShapeMismatch(format!(
                "factor {f} holds {} items, data has {n}",
                positional_capacity(a.kind(), a.dim())
            )));
        }
    }
    if offset + width > space.dims()[2] {
        return Err(Error::ShapeMismatch(format!(
            "{width} channels at offset {offset} exceed feature dim {}",
            space.dims()[2]
        )));
    }
    Ok(())
}

fn place_pairs<T: Coeff>(
    space: &Space<T>,
    rows: impl Iterator<Item = (usize, Vec<(usize, C64)>)>,
) -> Result<TensorElement<T>> {
    let k0 = space.factor(0).kind();
    let k1 = space.factor(1);
    let origins = origin_indices(k1.kind(), k1.dim());
    let mut entries = Vec::new();
    for (p, feats) in rows {
        let i = item_index(k0, p);
        for &o in &origins {
            for &(beta, v) in &feats {
                if v != C64::new(0.0, 0.0) {
                    entries.push((space.ravel(&[i, o, beta])?, T::from_c64(v)));
                }
            }
        }
    }
    TensorElement::from_flat(space, entries)
}

/// `X = sum_k,a x_a^(k) f_k (x) f_0 (x) e_a` on a pair of positional factors.
pub fn embed_sequence<T: Coeff>(tokens: &[Vec<f64>], space: &Space<T>) -> Result<TensorElement<T>> {
    embed_sequence_at(tokens, space, &EmbeddingSpec::sequence(0))
}

pub fn embed_sequence_at<T: Coeff>(
    tokens: &[Vec<f64>],
    space: &Space<T>,
    spec: &EmbeddingSpec,
) -> Result<TensorElement<T>> {
    if spec.kind != EmbeddingKind::Sequence || spec.hidden_factor != Some(1) {
        return Err(Error::Config("sequence embedding needs the origin on factor 1".into()));
    }
    let d = tokens.first().map_or(0, Vec::len);
    if tokens.iter().any(|t| t.len() != d) {
        return Err(Error::ShapeMismatch("ragged token matrix".into()));
    }
    check_pair_space(space, tokens.len(), d, spec.feature_offset)?;
    place_pairs(
        space,
        tokens.iter().enumerate().map(|(k, t)| {
            (
                k,
                t.iter()
                    .enumerate()
                    .map(|(a, &v)| (spec.feature_offset + a, C64::new(v, 0.0)))
                    .collect(),
            )
        }),
    )
}

/// `X = sum_ij X_ij e_i (x) e_j` on a two-factor space.
pub fn embed_image2d<T: Coeff>(image: &[Vec<f64>], space: &Space<T>) -> Result<TensorElement<T>> {
    let h = image.len();
    let w = image.first().map_or(0, Vec::len);
    if space.arity() != 2 || space.dims() != [h, w] || image.iter().any(|r| r.len() != w) {
        return Err(Error::ShapeMismatch(format!(
            "{h}x{w} image for space dims {:?}",
            space.dims()
        )));
    }
    let mut entries = Vec::new();
    for (i, row) in image.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v != 0.0 {
                entries.push((i * w + j, T::from_real(v)));
            }
        }
    }
    TensorElement::from_flat(space, entries)
}

/// `S = sum_a sum_b s_b(r_a) f_a (x) f_0 (x) e_b`; positions are attached.
pub fn embed_field3d<T: Coeff>(
    points: &[[f64; 3]],
    features: &[Vec<C64>],
    space: &Space<T>,
) -> Result<TensorElement<T>> {
    if points.len() != features.len() {
        return Err(Error::PositionMismatch(format!(
            "{} positions for {} feature rows",
            points.len(),
            features.len()
        )));
    }
    let fd = space.dims().last().copied().unwrap_or(0);
    if features.iter().any(|f| f.len() != fd) {
        return Err(Error::ShapeMismatch(format!("feature rows must have length {fd}")));
    }
    check_pair_space(space, points.len(), fd, 0)?;
    let el = place_pairs(
        space,
        features
            .iter()
            .enumerate()
            .map(|(a, f)| (a, f.iter().copied().enumerate().collect())),
    )?;
    Ok(el.with_positions(Some(Arc::new(points.to_vec()))))
}

/// `X = sum_a x_a g_0 (x) e_(offset + a)` on a hidden-slot space.
pub fn embed_hidden<T: Coeff>(x: &[f64], space: &Space<T>, spec: &EmbeddingSpec) -> Result<TensorElement<T>> {
    let hf = spec
        .hidden_factor
        .ok_or_else(|| Error::Config("hidden embedding needs a hidden factor".into()))?;
    if spec.kind != EmbeddingKind::Hidden || space.arity() != 2 || hf != 0 {
        return Err(Error::ShapeMismatch("hidden embedding expects slot (x) feature".into()));
    }
    if spec.feature_offset + x.len() > space.dims()[1] {
        return Err(Error::ShapeMismatch(format!(
            "{} channels at offset {} exceed feature dim {}",
            x.len(),
            spec.feature_offset,
            space.dims()[1]
        )));
    }
    let slot = space.factor(0);
    let mut entries = Vec::new();
    for o in origin_indices(slot.kind(), slot.dim()) {
        for (a, &v) in x.iter().enumerate() {
            if v != 0.0 {
                entries.push((space.ravel(&[o, spec.feature_offset + a])?, T::from_real(v)));
            }
        }
    }
    TensorElement::from_flat(space, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_b1, make_b2, Algebra, AxiomFlags};
    use crate::scalar::Field;
    use crate::tensor::{tensor_space, Role};

    fn feature(d: usize) -> Arc<Algebra> {
        Arc::new(Algebra::generic("A", d, vec![], Field::Real, AxiomFlags::none()).unwrap())
    }

    fn seq_space(n: usize, d: usize) -> Space {
        let b1 = Arc::new(make_b1(n).unwrap());
        tensor_space(vec![b1.clone(), b1, feature(d)], vec![Role::Positional, Role::Positional, Role::Feature]).unwrap()
    }

    #[test]
    fn sequence_round_trip() {
        let s = seq_space(1, 2);
        let x = embed_sequence::<C64>(&[vec![1.0, 0.0]], &s).unwrap();
        assert_eq!(x.nonzeros(), vec![(s.ravel(&[1, 0, 0]).unwrap(), C64::new(1.0, 0.0))]);

        let mut rng = crate::rng::seeded(1);
        let tokens = crate::rng::mat(&mut rng, 6, 4, 1.0);
        let s = seq_space(6, 4);
        let x = embed_sequence::<C64>(&tokens, &s).unwrap();
        for (k, t) in tokens.iter().enumerate() {
            for (a, v) in t.iter().enumerate() {
                assert_eq!(x.readout(&[k + 1, 0, a]).unwrap().re, *v);
            }
        }
        assert!(matches!(embed_sequence::<C64>(&tokens, &seq_space(5, 4)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn image_and_hidden() {
        let s = tensor_space(vec![feature(2), feature(2)], vec![Role::Positional, Role::Positional]).unwrap();
        let x = embed_image2d::<C64>(&[vec![1.0, 2.0], vec![3.0, 4.0]], &s).unwrap();
        assert_eq!(x.nnz(), 4);
        assert_eq!(x.get(&[1, 0]).unwrap().re, 3.0);

        let b2 = Arc::new(make_b2(5).unwrap());
        let s = tensor_space(vec![b2, feature(2)], vec![Role::Hidden, Role::Feature]).unwrap();
        let x = embed_hidden::<C64>(&[0.5, -1.0], &s, &EmbeddingSpec::hidden(0)).unwrap();
        assert_eq!(x.nnz(), 10);
    }

    #[test]
    fn field_carries_positions() {
        let b1 = Arc::new(make_b1(1).unwrap());
        let s = tensor_space(vec![b1.clone(), b1, feature(4)], vec![Role::Positional, Role::Positional, Role::Feature])
            .unwrap();
        let f = vec![vec![C64::new(1.0, 0.0), C64::new(0.5, 0.0), C64::new(0.25, 0.0), C64::new(2.0, 0.0)]];
        let x = embed_field3d::<C64>(&[[0.0, 0.0, 1.0]], &f, &s).unwrap();
        assert_eq!(x.nnz(), 4);
        assert_eq!(x.positions().unwrap().len(), 1);
        let r = embed_field3d::<C64>(&[[0.0; 3], [1.0; 3]], &f, &s);
        assert!(matches!(r, Err(Error::PositionMismatch(_))));
    }
}
