//! Naive reference implementations on plain arrays.
//!
//! Nothing here touches algebras, tensor elements or structural operators
//! except [`multiply_bruteforce`], which reads the structure tables as dense
//! arrays and loops over every multi-index.

mod attention;
mod conv;
mod dynamics;
mod geometric;
mod multiply;
mod tpa;

pub use attention::{attention, cross_attention, multihead_attention, rank_r_attention, AttnWeights};
pub use conv::{xcorr2d, xcorr2d_cyclic, xcorr2d_kernel_grad, xcorr2d_tapwise};
pub use dynamics::{gating, recurrence, Injection, Readout, StepRule};
pub use geometric::{cg_lowering, gaussian_basis, harmonic, se3_attention, sph_harm_cartesian, tfn, CgLowering};
pub use multiply::{multiply_bruteforce, BRUTEFORCE_LIMIT};
pub use tpa::{tpa, TpaFactors};

pub type Mat = Vec<Vec<f64>>;

pub(crate) fn matvec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}
