//! Reverse-mode gradients against central differences for every builder.

use pi_engine::autodiff::{grad_check, Objective, Params};
use pi_engine::{rng, Coeff, Result};
use rand::seq::index::sample;

use super::Ctx;
use crate::cases::CaseSpec;
use crate::zoo::{Model, Sizes, NAMES};

struct Fit<'a> {
    model: &'a Model,
    targets: Vec<f64>,
}

impl Objective for Fit<'_> {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let out = self.model.outputs(p)?;
        let mut acc = T::zero();
        for (y, t) in out.iter().zip(&self.targets) {
            acc = acc + (*y - T::from_real(*t)).norm_sqr();
        }
        Ok(acc.scale(1.0 / out.len().max(1) as f64))
    }
}

pub fn max_rel_err(name: &str, seed: u64, samples: usize) -> Result<f64> {
    let model = Model::named(name, Sizes::default(), seed)?;
    let store = model.init(seed, 0.5);
    let n_out = model.outputs(&store.to_params::<pi_engine::C64>())?.len();
    let mut r = rng::derive(seed, 7);
    let fit = Fit { model: &model, targets: rng::vec(&mut r, n_out, 1.0) };
    let idx = sample(&mut r, store.len(), samples.min(store.len())).into_vec();
    Ok(grad_check(&fit, &store, &idx)?.iter().map(|g| g.rel_err).fold(0.0, f64::max))
}

pub fn cases(ctx: Ctx) -> Vec<CaseSpec> {
    let samples = ctx.cfg.int("gradients", "samples", 8);
    let tol = ctx.cfg.tol("gradient", 1e-5);
    NAMES
        .iter()
        .enumerate()
        .map(|(i, &name)| {
            let s = ctx.case_seed(40, i as u64);
            CaseSpec::new(format!("gradients/{name}"), s, tol, move || max_rel_err(name, s, samples))
        })
        .collect()
}
