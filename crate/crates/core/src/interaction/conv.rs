//! 2D cross-correlation as a product interaction on `A_v (x) A_h`.
//!
//! Each axis algebra has structure constants `lambda^n_(k,i)`: the kernel
//! index `k` times image index `i` lands on output index `n`. The shift
//! solution `lambda^n_(k,i) = delta(i, n + k)` gives
//! `out[n][m] = sum_(k,l) K[k][l] X[n+k][m+l]` with zero padding.

use std::sync::Arc;

use super::expr::{ExprBuilder, Manifest};
use super::Built;
use crate::algebra::{Algebra, AxiomFlags};
use crate::autodiff::{symmetry_regularizer, Params};
use crate::error::{Error, Result};
use crate::scalar::{Coeff, Field};
use crate::structural::StructuralOperator;
use crate::tensor::{tensor_space, Role, TensorElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvConstraint {
    /// Structure constants fixed to the shift solution.
    Symmetric,
    /// Structure constants read from `lambda_v` / `lambda_h`.
    Free,
    /// As `Free`, with the shift regularizer reported in `aux["l_reg"]`.
    Regularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    Zero,
    /// Indices wrap modulo the axis length.
    Cyclic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvConfig {
    pub h: usize,
    pub w: usize,
    pub kh: usize,
    pub kw: usize,
    pub constraint: ConvConstraint,
    pub boundary: Boundary,
}

impl ConvConfig {
    pub fn new(h: usize, w: usize, kh: usize, kw: usize, constraint: ConvConstraint) -> Self {
        ConvConfig {
            h,
            w,
            kh,
            kw,
            constraint,
            boundary: Boundary::Zero,
        }
    }

    pub fn cyclic(mut self) -> Self {
        self.boundary = Boundary::Cyclic;
        self
    }

    /// Parameter blocks the builder reads.
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let mut v = vec![("kernel", vec![self.kh, self.kw])];
        if self.constraint != ConvConstraint::Symmetric {
            v.push(("lambda_v", vec![self.kh, self.h, self.h]));
            v.push(("lambda_h", vec![self.kw, self.w, self.w]));
        }
        v
    }
}

/// Shift-solution block `[k][n][i]` for one axis.
pub fn shift_lambda(k_len: usize, len: usize, boundary: Boundary) -> Vec<f64> {
    let mut v = vec![0.0; k_len * len * len];
    for k in 0..k_len {
        for n in 0..len {
            let i = n + k;
            let i = match boundary {
                Boundary::Zero if i < len => i,
                Boundary::Zero => continue,
                Boundary::Cyclic => i % len,
            };
            v[(k * len + n) * len + i] = 1.0;
        }
    }
    v
}

fn axis_algebra<T: Coeff>(name: &str, k_len: usize, len: usize, lambda: &[T]) -> Result<Algebra<T>> {
    let mut entries = Vec::new();
    for k in 0..k_len {
        for n in 0..len {
            for i in 0..len {
                let v = lambda[(k * len + n) * len + i];
                if !v.is_structural_zero() {
                    entries.push((k, i, n, v));
                }
            }
        }
    }
    Algebra::generic(name, len, entries, Field::Real, AxiomFlags::none())
}

pub fn build_conv2d<T: Coeff>(cfg: &ConvConfig, params: &Params<T>) -> Result<Built<T>> {
    if cfg.kh == 0 || cfg.kw == 0 || cfg.kh > cfg.h || cfg.kw > cfg.w {
        return Err(Error::InvalidDimension(format!(
            "kernel {}x{} for image {}x{}",
            cfg.kh, cfg.kw, cfg.h, cfg.w
        )));
    }
    let (lv, lh): (Vec<T>, Vec<T>) = match cfg.constraint {
        ConvConstraint::Symmetric => (
            shift_lambda(cfg.kh, cfg.h, cfg.boundary).into_iter().map(T::from_real).collect(),
            shift_lambda(cfg.kw, cfg.w, cfg.boundary).into_iter().map(T::from_real).collect(),
        ),
        _ => (
            params.get_shaped("lambda_v", &[cfg.kh, cfg.h, cfg.h])?.values.clone(),
            params.get_shaped("lambda_h", &[cfg.kw, cfg.w, cfg.w])?.values.clone(),
        ),
    };
    let av = axis_algebra("conv_v", cfg.kh, cfg.h, &lv)?;
    let ah = axis_algebra("conv_h", cfg.kw, cfg.w, &lh)?;
    let space = tensor_space(vec![Arc::new(av), Arc::new(ah)], vec![Role::Positional, Role::Positional])?;

    let kb = params.get_shaped("kernel", &[cfg.kh, cfg.kw])?;
    let mut entries = Vec::new();
    for k in 0..cfg.kh {
        for l in 0..cfg.kw {
            entries.push((k * cfg.w + l, kb.at(&[k, l])));
        }
    }
    let kernel = TensorElement::from_flat(&space, entries)?;

    let mut b = ExprBuilder::new(&space);
    let k = b.constant("kernel", kernel, true)?;
    let x = b.slot("X");
    let out = b.mult(k, x, StructuralOperator::Identity, StructuralOperator::Identity)?;
    let expr = b.finish(out)?;

    let mut built = Built::new(
        Manifest::new("conv2d", &expr)?.with_params(cfg.param_shapes().into_iter().map(|(n, s)| (n.into(), s)).collect()),
        expr,
    );
    if cfg.constraint == ConvConstraint::Regularized {
        let r = symmetry_regularizer(params.get("lambda_v")?)? + symmetry_regularizer(params.get("lambda_h")?)?;
        built.aux.insert("l_reg".into(), r);
    }
    Ok(built)
}

/// Output image from an element of the conv space.
pub fn read_image<T: Coeff>(el: &TensorElement<T>) -> Result<Vec<Vec<T>>> {
    let d = el.space().dims().to_vec();
    if d.len() != 2 {
        return Err(Error::ShapeMismatch("conv readout expects two factors".into()));
    }
    (0..d[0]).map(|n| (0..d[1]).map(|m| el.get(&[n, m])).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::ParamStore;
    use crate::interaction::Bindings;
    use crate::rng;
    use crate::scalar::C64;
    use crate::tensor::embed_image2d;

    fn store(cfg: &ConvConfig, seed: u64) -> ParamStore {
        let mut s = ParamStore::new(seed);
        let mut r = rng::seeded(seed);
        for (n, shape) in cfg.param_shapes() {
            s.insert_random(n, shape, 1.0, &mut r);
        }
        s
    }

    fn run(cfg: &ConvConfig, s: &ParamStore, img: &[Vec<f64>]) -> Vec<Vec<C64>> {
        let built = build_conv2d::<C64>(cfg, &s.to_params()).unwrap();
        let x = embed_image2d(img, built.expr.space()).unwrap();
        let out = built.expr.eval(&Bindings::from([("X".to_string(), x)])).unwrap();
        read_image(&out).unwrap()
    }

    #[test]
    fn identity_kernel_reproduces_image() {
        let cfg = ConvConfig::new(4, 5, 2, 2, ConvConstraint::Symmetric);
        let mut s = ParamStore::new(0);
        s.insert("kernel", vec![2, 2], vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let img: Vec<Vec<f64>> = (0..4).map(|i| (0..5).map(|j| (i * 5 + j) as f64).collect()).collect();
        let out = run(&cfg, &s, &img);
        for i in 0..4 {
            for j in 0..5 {
                assert_eq!(out[i][j].re, img[i][j]);
            }
        }
    }

    #[test]
    fn shifted_delta_kernel_shifts_with_zero_padding() {
        let cfg = ConvConfig::new(3, 3, 2, 2, ConvConstraint::Symmetric);
        let mut s = ParamStore::new(0);
        s.insert("kernel", vec![2, 2], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let img = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        let out = run(&cfg, &s, &img);
        assert_eq!(out[0][0].re, 5.0);
        assert_eq!(out[1][1].re, 9.0);
        assert_eq!(out[2][2].re, 0.0);
        assert_eq!(out[0][2].re, 0.0);
    }

    #[test]
    fn cyclic_wraps() {
        let cfg = ConvConfig::new(3, 3, 2, 2, ConvConstraint::Symmetric).cyclic();
        let mut s = ParamStore::new(0);
        s.insert("kernel", vec![2, 2], vec![0.0, 0.0, 0.0, 1.0]).unwrap();
        let img = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0], vec![7.0, 8.0, 9.0]];
        assert_eq!(run(&cfg, &s, &img)[2][2].re, 1.0);
    }

    #[test]
    fn free_with_shift_lambda_matches_symmetric() {
        let sym = ConvConfig::new(5, 4, 3, 2, ConvConstraint::Symmetric);
        let free = ConvConfig { constraint: ConvConstraint::Regularized, ..sym };
        let s = store(&sym, 3);
        let mut f = store(&free, 3);
        f.block_mut("kernel").unwrap().values = s.block("kernel").unwrap().values.clone();
        f.block_mut("lambda_v").unwrap().values = shift_lambda(3, 5, Boundary::Zero);
        f.block_mut("lambda_h").unwrap().values = shift_lambda(2, 4, Boundary::Zero);
        let img: Vec<Vec<f64>> = rng::mat(&mut rng::seeded(9), 5, 4, 1.0);
        assert_eq!(run(&sym, &s, &img), run(&free, &f, &img));
        let built = build_conv2d::<C64>(&free, &f.to_params()).unwrap();
        assert_eq!(built.aux["l_reg"], C64::new(0.0, 0.0));
        assert_eq!(built.manifest.orders["X"], 1);
    }

    #[test]
    fn bad_shapes_are_rejected() {
        let cfg = ConvConfig::new(3, 3, 4, 2, ConvConstraint::Symmetric);
        assert!(build_conv2d::<C64>(&cfg, &Params::new()).is_err());
        let cfg = ConvConfig::new(3, 3, 2, 2, ConvConstraint::Free);
        let mut s = store(&cfg, 0);
        s.insert("lambda_v", vec![2, 3, 2], vec![0.0; 12]).unwrap();
        assert!(matches!(
            build_conv2d::<C64>(&cfg, &s.to_params()),
            Err(Error::ShapeMismatch(_))
        ));
    }
}
