//! Driver for the verification suites, equivariance sweeps, order analysis
//! and toy training of `pi-engine`.

pub mod cases;
pub mod commands;
pub mod config;
pub mod report;
pub mod suites;
pub mod zoo;

pub use commands::{Run, Usage};
pub use config::{ConfigError, RunConfig};
pub use report::Report;
