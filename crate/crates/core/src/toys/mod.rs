//! Small training tasks that mirror the direction of the design-principle
//! experiments. Sizes, step counts and learning rates are local defaults,
//! chosen so each task runs in seconds on one core.

use std::collections::BTreeMap;

use crate::autodiff::{ParamStore, TrainTrace};
use crate::scalar::Coeff;

pub mod rank_copy;
pub mod replacement_mamba;
pub mod symreg_conv;

/// Traces and summary metrics of one toy run.
#[derive(Clone, Debug, Default)]
pub struct ToyOutcome {
    /// One trace per trained model, keyed by model name.
    pub traces: BTreeMap<String, TrainTrace>,
    pub metrics: BTreeMap<String, f64>,
    /// Final parameters per trained model.
    pub params: BTreeMap<String, ParamStore>,
    /// Whether the trend gate holds.
    pub pass: bool,
}

/// Mean of `|y - t|^2`.
pub(crate) fn mse<T: Coeff>(pairs: impl IntoIterator<Item = (T, f64)>) -> T {
    let mut acc = T::zero();
    let mut n = 0usize;
    for (y, t) in pairs {
        acc = acc + (y - T::from_real(t)).norm_sqr();
        n += 1;
    }
    acc.scale(1.0 / n.max(1) as f64)
}
