//! Reverse-mode differentiation and training.

mod params;
pub mod tape;
mod train;

pub use params::{Block, ParamStore, Params};
pub use tape::{CVar, Var};
pub use train::{
    finite_difference, grad, grad_check, rel_err, symmetry_regularizer, train, value, GradCheck, Objective, Sgd,
    TraceRecord, TrainConfig, TrainTrace, FD_STEPS, REL_FLOOR,
};
