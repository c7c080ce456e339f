//! Interaction expressions and the layer builders.

use std::collections::BTreeMap;

use crate::scalar::{Coeff, C64};

pub mod attention;
pub mod conv;
pub mod dynamics;
mod expr;
pub mod gating;
pub mod geometric;
pub mod tpa;

pub use expr::{
    apply_mult, compose_filter, compose_input, Bindings, Expr, ExprBuilder, Filter, KernelFn, Manifest,
    MultiplicationOperator, Node, NodeId,
};

/// A builder's result: the expression, its manifest, and side values such as
/// regularizers.
#[derive(Clone, Debug)]
pub struct Built<T: Coeff = C64> {
    pub expr: Expr<T>,
    pub manifest: Manifest,
    pub aux: BTreeMap<String, T>,
}

impl<T: Coeff> Built<T> {
    pub fn new(manifest: Manifest, expr: Expr<T>) -> Self {
        Built {
            expr,
            manifest,
            aux: BTreeMap::new(),
        }
    }
}

/// Bind a single slot.
pub fn bind<T: Coeff>(name: &str, x: crate::tensor::TensorElement<T>) -> Bindings<T> {
    Bindings::from([(name.to_string(), x)])
}
