//! Coefficient scalars.
//!
//! Everything in the engine is generic over [`Coeff`]. The plain numeric
//! instance is `Complex64`; the autodiff module supplies a taped instance so
//! the same evaluation code yields gradients.

use std::fmt::Debug;
use std::ops::{Add, Mul, Neg, Sub};

pub use num_complex::Complex64 as C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Field {
    Real,
    Complex,
}

impl Field {
    pub fn name(self) -> &'static str {
        match self {
            Field::Real => "real",
            Field::Complex => "complex",
        }
    }
}

/// Pointwise activations. `Elu` uses alpha = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Exp,
    Sigmoid,
    Elu,
    Relu,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Exp => "exp",
            Activation::Sigmoid => "sigmoid",
            Activation::Elu => "elu",
            Activation::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "identity" => Activation::Identity,
            "exp" => Activation::Exp,
            "sigmoid" => Activation::Sigmoid,
            "elu" => Activation::Elu,
            "relu" => Activation::Relu,
            _ => return None,
        })
    }

    /// Whether the map is only defined on the real line.
    pub fn real_only(self) -> bool {
        matches!(self, Activation::Sigmoid | Activation::Elu | Activation::Relu)
    }

    pub fn eval_real(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Exp => x.exp(),
            Activation::Sigmoid => sigmoid(x),
            Activation::Elu => elu(x),
            Activation::Relu => x.max(0.0),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub trait Coeff:
    Copy
    + Send
    + Sync
    + Debug
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
{
    /// Values record onto a thread-local tape and must stay on one thread.
    const TAPED: bool;

    fn from_c64(c: C64) -> Self;
    fn value(&self) -> C64;
    /// True only for zeros that carry no derivative information.
    fn is_structural_zero(&self) -> bool;
    fn conj(self) -> Self;
    fn exp(self) -> Self;
    fn recip(self) -> Self;
    /// Apply a real activation to the real part; the imaginary part is dropped.
    fn activate_real(self, act: Activation) -> Self;
    fn scale(self, s: f64) -> Self;
    /// `|z|^2` as a real value.
    fn norm_sqr(self) -> Self;
    fn real_part(self) -> Self;

    fn zero() -> Self {
        Self::from_c64(C64::new(0.0, 0.0))
    }
    fn one() -> Self {
        Self::from_c64(C64::new(1.0, 0.0))
    }
    fn from_real(r: f64) -> Self {
        Self::from_c64(C64::new(r, 0.0))
    }
}

impl Coeff for C64 {
    const TAPED: bool = false;

    fn from_c64(c: C64) -> Self {
        c
    }
    fn value(&self) -> C64 {
        *self
    }
    fn is_structural_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn conj(self) -> Self {
        C64::conj(&self)
    }
    fn exp(self) -> Self {
        C64::exp(self)
    }
    fn recip(self) -> Self {
        C64::new(1.0, 0.0) / self
    }
    fn activate_real(self, act: Activation) -> Self {
        C64::new(act.eval_real(self.re), 0.0)
    }
    fn scale(self, s: f64) -> Self {
        self * s
    }
    fn norm_sqr(self) -> Self {
        C64::new(C64::norm_sqr(&self), 0.0)
    }
    fn real_part(self) -> Self {
        C64::new(self.re, 0.0)
    }
}

/// Largest absolute coefficient difference, 0 for empty input.
pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activations_match_closed_forms() {
        assert_eq!(Activation::Relu.eval_real(-2.0), 0.0);
        assert_eq!(Activation::Elu.eval_real(3.0), 3.0);
        assert!((Activation::Elu.eval_real(-1.0) - ((-1.0f64).exp() - 1.0)).abs() < 1e-15);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
        assert!((sigmoid(-40.0) - (-40.0f64).exp() / (1.0 + (-40.0f64).exp())).abs() < 1e-30);
    }

    #[test]
    fn activation_names_round_trip() {
        for a in [
            Activation::Identity,
            Activation::Exp,
            Activation::Sigmoid,
            Activation::Elu,
            Activation::Relu,
        ] {
            assert_eq!(Activation::parse(a.name()), Some(a));
        }
    }

    #[test]
    fn complex_recip() {
        let z = C64::new(3.0, 4.0);
        let r = Coeff::recip(z);
        assert!((r * z - C64::new(1.0, 0.0)).norm() < 1e-15);
    }
}
