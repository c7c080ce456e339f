//! Conv with learned structure constants: free versus shift-regularized.
//!
//! A teacher kernel produces targets on random images. Both students learn
//! the kernel and both `lambda` blocks from the same noisy start; the
//! regularized one also pays `mu * L_reg`. Few training images leave the
//! free student underdetermined, so held-out loss separates the two.

use std::collections::BTreeMap;

use super::{mse, ToyOutcome};
use crate::autodiff::{train, Objective, ParamStore, Params, Sgd, TrainConfig};
use crate::error::Result;
use crate::interaction::conv::{build_conv2d, Boundary, read_image, shift_lambda, ConvConfig, ConvConstraint};
use crate::interaction::bind;
use crate::oracles::xcorr2d;
use crate::rng;
use crate::scalar::{Coeff, C64};
use crate::tensor::embed_image2d;

#[derive(Clone, Debug, PartialEq)]
pub struct SymregConfig {
    pub size: usize,
    pub kernel: usize,
    pub n_train: usize,
    pub n_val: usize,
    /// Uniform noise added to the shift solution at init.
    pub init_noise: f64,
    pub mu: f64,
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for SymregConfig {
    fn default() -> Self {
        SymregConfig {
            size: 6,
            kernel: 3,
            n_train: 2,
            n_val: 12,
            init_noise: 0.3,
            mu: 0.5,
            steps: 300,
            lr: 0.02,
            momentum: 0.9,
        }
    }
}

type Image = Vec<Vec<f64>>;

struct Fit {
    conv: ConvConfig,
    data: Vec<(Image, Image)>,
    val: Vec<(Image, Image)>,
    mu: f64,
}

fn dataset_loss<T: Coeff>(conv: &ConvConfig, p: &Params<T>, data: &[(Image, Image)]) -> Result<(T, T)> {
    let built = build_conv2d(conv, p)?;
    let mut pairs = Vec::new();
    for (x, y) in data {
        let out = read_image(&built.expr.eval(&bind("X", embed_image2d(x, built.expr.space())?))?)?;
        for (ro, ry) in out.into_iter().zip(y) {
            pairs.extend(ro.into_iter().zip(ry.iter().copied()));
        }
    }
    let reg = built.aux.get("l_reg").copied().unwrap_or_else(T::zero);
    Ok((mse(pairs), reg))
}

impl Objective for Fit {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let (l, reg) = dataset_loss(&self.conv, p, &self.data)?;
        Ok(if self.conv.constraint == ConvConstraint::Regularized { l + reg.scale(self.mu) } else { l })
    }

    fn metrics(&self, p: &Params<C64>) -> Result<BTreeMap<String, f64>> {
        let cfg = ConvConfig { constraint: ConvConstraint::Regularized, ..self.conv };
        let (train, reg) = dataset_loss(&cfg, p, &self.data)?;
        let (val, _) = dataset_loss(&cfg, p, &self.val)?;
        Ok(BTreeMap::from([
            ("train_loss".to_string(), train.re),
            ("val_loss".to_string(), val.re),
            ("l_reg".to_string(), reg.re),
        ]))
    }
}

fn pairs(teacher: &Image, n: usize, size: usize, r: &mut rng::Rng64) -> Vec<(Image, Image)> {
    (0..n)
        .map(|_| {
            let x = rng::mat(r, size, size, 1.0);
            let y = xcorr2d(&x, teacher);
            (x, y)
        })
        .collect()
}

pub fn run(cfg: &SymregConfig, seed: u64) -> Result<ToyOutcome> {
    let mut r = rng::derive(seed, 1);
    let teacher = rng::mat(&mut r, cfg.kernel, cfg.kernel, 1.0);
    let data = pairs(&teacher, cfg.n_train, cfg.size, &mut r);
    let val = pairs(&teacher, cfg.n_val, cfg.size, &mut r);

    let mut init = ParamStore::new(seed);
    let mut ri = rng::derive(seed, 2);
    init.insert_random("kernel", vec![cfg.kernel, cfg.kernel], 0.5, &mut ri);
    for name in ["lambda_v", "lambda_h"] {
        let v = shift_lambda(cfg.kernel, cfg.size, Boundary::Zero)
            .into_iter()
            .map(|s| s + rng::uniform(&mut ri, -cfg.init_noise, cfg.init_noise))
            .collect();
        init.insert(name, vec![cfg.kernel, cfg.size, cfg.size], v)?;
    }

    let tc = TrainConfig {
        steps: cfg.steps,
        sgd: Sgd { lr: cfg.lr, momentum: cfg.momentum },
        metrics_every: (cfg.steps / 10).max(1),
        clip: Some(10.0),
    };
    let mut out = ToyOutcome::default();
    for (tag, constraint) in [("free", ConvConstraint::Free), ("regularized", ConvConstraint::Regularized)] {
        let fit = Fit {
            conv: ConvConfig::new(cfg.size, cfg.size, cfg.kernel, cfg.kernel, constraint),
            data: data.clone(),
            val: val.clone(),
            mu: cfg.mu,
        };
        let first = fit.metrics(&init.to_params())?;
        let mut store = init.clone();
        let trace = train(&fit, &mut store, &tc)?;
        let last = fit.metrics(&store.to_params())?;
        out.metrics.insert(format!("{tag}_val_loss"), last["val_loss"]);
        out.metrics.insert(format!("{tag}_train_loss"), last["train_loss"]);
        out.metrics.insert(format!("{tag}_l_reg_init"), first["l_reg"]);
        out.metrics.insert(format!("{tag}_l_reg_final"), last["l_reg"]);
        out.traces.insert(tag.to_string(), trace);
        out.params.insert(tag.to_string(), store);
    }
    let m = &out.metrics;
    let drop = m["regularized_l_reg_init"] / m["regularized_l_reg_final"].max(f64::MIN_POSITIVE);
    out.pass = m["regularized_val_loss"] < m["free_val_loss"] && drop >= 100.0;
    out.metrics.insert("l_reg_drop".into(), drop);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_steps_leave_an_empty_trace() {
        let cfg = SymregConfig { steps: 0, n_val: 1, ..Default::default() };
        let o = run(&cfg, 1).unwrap();
        assert!(o.traces.values().all(|t| t.records.is_empty()));
    }
}
