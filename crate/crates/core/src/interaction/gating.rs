//! Gating `X -> F(W(Y)) X` on a hidden-slot algebra.

use std::sync::Arc;

use super::expr::{ExprBuilder, Manifest};
use super::Built;
use crate::algebra::make_b2;
use crate::autodiff::Params;
use crate::error::Result;
use crate::scalar::{Activation, Coeff};
use crate::structural::StructuralOperator;
use crate::tensor::{tensor_space, Role, TensorElement};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GatingConfig {
    pub dim: usize,
    pub func: Activation,
}

impl GatingConfig {
    pub fn param_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        vec![("w", vec![self.dim, self.dim])]
    }
}

/// Slots `X` (gated signal) and `Y` (gate driver); `Y = X` gives
/// self-gating.
pub fn build_gating<T: Coeff>(cfg: &GatingConfig, params: &Params<T>) -> Result<Built<T>> {
    let space = tensor_space(vec![Arc::new(make_b2(cfg.dim)?.lift::<T>())], vec![Role::Hidden])?;
    let w = params.get_shaped("w", &[cfg.dim, cfg.dim])?.matrix();
    let mut b = ExprBuilder::new(&space);
    let y = b.slot("Y");
    let wy = b.structural(StructuralOperator::FactorLinear { factor: 0, matrix: w }, y)?;
    let gate = b.structural(StructuralOperator::activation(cfg.func), wy)?;
    let x = b.slot("X");
    let out = b.mult(gate, x, StructuralOperator::Identity, StructuralOperator::Identity)?;
    let expr = b.finish(out)?;
    let manifest = Manifest::new("gating", &expr)?
        .with_params(cfg.param_shapes().into_iter().map(|(n, s)| (n.into(), s)).collect());
    Ok(Built::new(manifest, expr))
}

/// `W(X) X`: the gate driver is the gated signal itself.
pub fn build_quadratic<T: Coeff>(dim: usize, params: &Params<T>) -> Result<Built<T>> {
    let space = tensor_space(vec![Arc::new(make_b2(dim)?.lift::<T>())], vec![Role::Hidden])?;
    let w = params.get_shaped("w", &[dim, dim])?.matrix();
    let mut b = ExprBuilder::new(&space);
    let x1 = b.slot("X");
    let wx = b.structural(StructuralOperator::FactorLinear { factor: 0, matrix: w }, x1)?;
    let x2 = b.slot("X");
    let out = b.mult(wx, x2, StructuralOperator::Identity, StructuralOperator::Identity)?;
    let expr = b.finish(out)?;
    let manifest = Manifest::new("quadratic", &expr)?.with_params([("w".to_string(), vec![dim, dim])].into_iter().collect());
    Ok(Built::new(manifest, expr))
}

pub fn embed_vector<T: Coeff>(built: &Built<T>, x: &[f64]) -> Result<TensorElement<T>> {
    TensorElement::from_dense(built.expr.space(), x.iter().map(|v| T::from_real(*v)).collect())
}

pub fn read_vector<T: Coeff>(el: &TensorElement<T>) -> Vec<T> {
    el.to_dense()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interaction::Bindings;
    use crate::scalar::{sigmoid, C64};

    #[test]
    fn gating_is_hadamard_with_activated_gate() {
        let cfg = GatingConfig { dim: 3, func: Activation::Sigmoid };
        let mut p = Params::<C64>::new();
        let w = [0.5, -1.0, 0.2, 0.0, 1.5, -0.3, 0.7, 0.1, 0.0];
        p.insert(
            "w",
            crate::autodiff::Block::new(vec![3, 3], w.iter().map(|v| C64::new(*v, 0.0)).collect()).unwrap(),
        );
        let built = build_gating(&cfg, &p).unwrap();
        let (x, y) = ([1.0, -2.0, 0.5], [0.3, 0.0, -1.0]);
        let mut bind = Bindings::new();
        bind.insert("X".into(), embed_vector(&built, &x).unwrap());
        bind.insert("Y".into(), embed_vector(&built, &y).unwrap());
        let out = read_vector(&built.expr.eval(&bind).unwrap());
        for i in 0..3 {
            let wy: f64 = (0..3).map(|j| w[i * 3 + j] * y[j]).sum();
            assert!((out[i].re - sigmoid(wy) * x[i]).abs() < 1e-15);
        }
        assert_eq!(built.manifest.orders["X"], 1);
        assert_eq!(built.manifest.orders["Y"], 1);
    }

    #[test]
    fn quadratic_has_order_two() {
        let mut p = Params::<C64>::new();
        p.insert("w", crate::autodiff::Block::new(vec![2, 2], vec![C64::new(1.0, 0.0); 4]).unwrap());
        let built = build_quadratic(2, &p).unwrap();
        assert_eq!(built.manifest.orders["X"], 2);
        let out = read_vector(&built.expr.eval(&crate::interaction::bind("X", embed_vector(&built, &[1.0, 2.0]).unwrap())).unwrap());
        assert!((out[0].re - 3.0).abs() < 1e-15 && (out[1].re - 6.0).abs() < 1e-15);
    }
}
