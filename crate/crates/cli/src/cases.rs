//! Case specifications and the bounded parallel runner.

use std::time::Instant;

use rayon::prelude::*;

use crate::report::{Case, Check};

pub type CaseFn = Box<dyn Fn() -> pi_engine::Result<f64> + Send + Sync>;

pub struct CaseSpec {
    pub name: String,
    pub seed: u64,
    pub tol: f64,
    pub check: Check,
    pub run: CaseFn,
}

impl CaseSpec {
    pub fn new(name: impl Into<String>, seed: u64, tol: f64, run: impl Fn() -> pi_engine::Result<f64> + Send + Sync + 'static) -> Self {
        CaseSpec {
            name: name.into(),
            seed,
            tol,
            check: Check::AtMost,
            run: Box::new(run),
        }
    }

    /// A negative control: the measured defect must reach `floor`.
    pub fn at_least(mut self) -> Self {
        self.check = Check::AtLeast;
        self
    }

    fn execute(&self) -> Case {
        let t = Instant::now();
        let r = (self.run)();
        let wall_ms = t.elapsed().as_secs_f64() * 1e3;
        match r {
            Ok(e) => Case {
                name: self.name.clone(),
                seed: self.seed,
                max_abs_err: Some(e),
                tol: self.tol,
                check: self.check,
                pass: e.is_finite() && self.check.holds(e, self.tol),
                wall_ms,
                error: None,
            },
            Err(err) => Case {
                name: self.name.clone(),
                seed: self.seed,
                max_abs_err: None,
                tol: self.tol,
                check: self.check,
                pass: false,
                wall_ms,
                error: Some(err.to_string()),
            },
        }
    }
}

/// Run every case on a pool of `jobs` threads; results keep input order.
pub fn run_cases(specs: &[CaseSpec], jobs: usize) -> Vec<Case> {
    if jobs <= 1 {
        return specs.iter().map(CaseSpec::execute).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| specs.par_iter().map(CaseSpec::execute).collect()),
        Err(_) => specs.iter().map(CaseSpec::execute).collect(),
    }
}
