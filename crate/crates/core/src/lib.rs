//! Product-interaction engine.
//!
//! Algebras are given by structure constants, signals are embedded in tensor
//! products of algebras, and network layers are compositions of
//! multiplication operators `X -> L1(K * L2(X))`. The same machinery expresses
//! convolution, gating, state-space models, attention variants and
//! rotation-equivariant point-cloud layers; every construction has a naive
//! reference in [`oracles`] and a numeric symmetry check in [`repr`].

pub mod algebra;
pub mod autodiff;
pub mod error;
pub mod interaction;
pub mod oracles;
pub mod par;
pub mod repr;
pub mod rng;
pub mod scalar;
pub mod structural;
pub mod tensor;
pub mod toys;

pub use algebra::{Algebra, AlgebraElement, AlgebraKind, AxiomFlags};
pub use error::{Error, Result};
pub use scalar::{Activation, Coeff, Field, C64};
pub use structural::StructuralOperator;
pub use tensor::{ProductAlgebra, Role, TensorElement};
