//! Two-source copy with rank-R attention.
//!
//! Tokens from a vocabulary of 8 are encoded as 3-bit `+-1` codes. Position
//! `k` must emit the code of token `k` in channels 0..3 and the code of the
//! first token in channels 3..6. Channel 6 is a constant and channel 7 flags
//! position 0. One score slot can route only one source through its value
//! map, so rank 2 has room to solve the task and rank 1 does not.

use std::collections::BTreeMap;

use super::{mse, ToyOutcome};
use crate::autodiff::{train, Objective, ParamStore, Params, Sgd, TrainConfig, TrainTrace};
use crate::error::Result;
use crate::interaction::attention::{build_attention, AttentionConfig, AttentionVariant};
use crate::rng;
use crate::scalar::{Coeff, C64};

use rand::Rng;

pub const VOCAB: usize = 8;
const CODE: usize = 3;
const D: usize = 8;
const BIAS: usize = 6;
const FLAG: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct RankCopyConfig {
    pub len: usize,
    pub n_seq: usize,
    pub init_scale: f64,
    pub steps: usize,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for RankCopyConfig {
    fn default() -> Self {
        RankCopyConfig {
            len: 16,
            n_seq: 4,
            init_scale: 0.5,
            steps: 120,
            lr: 0.3,
            momentum: 0.9,
        }
    }
}

fn code(tok: usize) -> [f64; CODE] {
    std::array::from_fn(|b| if (tok >> b) & 1 == 1 { 1.0 } else { -1.0 })
}

fn decode<T: Coeff>(v: &[T]) -> usize {
    (0..CODE).filter(|&b| v[b].value().re > 0.0).map(|b| 1 << b).sum()
}

#[derive(Clone, Debug)]
struct Sample {
    tokens: Vec<usize>,
    x: Vec<Vec<f64>>,
}

fn sample(len: usize, r: &mut rng::Rng64) -> Sample {
    let tokens: Vec<usize> = (0..len).map(|_| r.gen_range(0..VOCAB)).collect();
    let x = tokens
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let mut v = vec![0.0; D];
            v[..CODE].copy_from_slice(&code(t));
            v[BIAS] = 1.0;
            v[FLAG] = if k == 0 { 1.0 } else { 0.0 };
            v
        })
        .collect();
    Sample { tokens, x }
}

fn targets(s: &Sample, k: usize) -> [usize; 2] {
    [s.tokens[k], s.tokens[0]]
}

struct Copy {
    cfg: AttentionConfig,
    data: Vec<Sample>,
}

impl Copy {
    fn outputs<T: Coeff>(&self, p: &Params<T>) -> Result<Vec<Vec<Vec<T>>>> {
        let att = build_attention(&self.cfg, p)?;
        self.data.iter().map(|s| att.forward(&s.x, None)).collect()
    }
}

impl Objective for Copy {
    fn loss<T: Coeff>(&self, p: &Params<T>) -> Result<T> {
        let outs = self.outputs(p)?;
        let mut pairs = Vec::new();
        for (s, out) in self.data.iter().zip(outs) {
            for (k, row) in out.into_iter().enumerate() {
                let [a, b] = targets(s, k);
                let want = code(a).into_iter().chain(code(b));
                pairs.extend(row.into_iter().take(2 * CODE).zip(want));
            }
        }
        Ok(mse(pairs))
    }

    fn metrics(&self, p: &Params<C64>) -> Result<BTreeMap<String, f64>> {
        let outs = self.outputs(p)?;
        let (mut hit, mut total) = (0usize, 0usize);
        for (s, out) in self.data.iter().zip(outs) {
            for (k, row) in out.iter().enumerate() {
                let [a, b] = targets(s, k);
                hit += (decode(&row[..CODE]) == a) as usize + (decode(&row[CODE..2 * CODE]) == b) as usize;
                total += 2;
            }
        }
        Ok(BTreeMap::from([("accuracy".to_string(), hit as f64 / total as f64)]))
    }
}

/// Final training accuracy of one rank on one seed.
pub fn run_rank(cfg: &RankCopyConfig, rank: usize, seed: u64) -> Result<(f64, TrainTrace, ParamStore)> {
    let mut r = rng::derive(seed, 11);
    let data = (0..cfg.n_seq).map(|_| sample(cfg.len, &mut r)).collect();
    let obj = Copy {
        cfg: AttentionConfig::new(cfg.len, D, AttentionVariant::RankR { rank }),
        data,
    };
    let mut store = ParamStore::new(seed);
    let mut ri = rng::derive(seed, 12 + rank as u64);
    for (name, shape) in obj.cfg.param_shapes() {
        store.insert_random(name, shape, cfg.init_scale, &mut ri);
    }
    let tc = TrainConfig {
        steps: cfg.steps,
        sgd: Sgd { lr: cfg.lr, momentum: cfg.momentum },
        metrics_every: (cfg.steps / 10).max(1),
        clip: Some(5.0),
    };
    let trace = train(&obj, &mut store, &tc)?;
    let acc = obj.metrics(&store.to_params())?["accuracy"];
    Ok((acc, trace, store))
}

/// Rank 1 against rank 2 over `seeds`; passes when rank 2 wins by at least
/// 0.1 accuracy on a majority of seeds.
pub fn run(cfg: &RankCopyConfig, seeds: &[u64]) -> Result<ToyOutcome> {
    let mut out = ToyOutcome::default();
    let mut wins = 0;
    for &s in seeds {
        let (a1, t1, p1) = run_rank(cfg, 1, s)?;
        let (a2, t2, p2) = run_rank(cfg, 2, s)?;
        out.params.insert(format!("seed{s}_rank1"), p1);
        out.params.insert(format!("seed{s}_rank2"), p2);
        out.metrics.insert(format!("seed{s}_rank1_accuracy"), a1);
        out.metrics.insert(format!("seed{s}_rank2_accuracy"), a2);
        out.traces.insert(format!("seed{s}_rank1"), t1);
        out.traces.insert(format!("seed{s}_rank2"), t2);
        if a2 - a1 >= 0.1 {
            wins += 1;
        }
    }
    out.metrics.insert("wins".into(), wins as f64);
    out.pass = 2 * wins > seeds.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_round_trip() {
        for t in 0..VOCAB {
            let c: Vec<C64> = code(t).iter().map(|&v| C64::new(v, 0.0)).collect();
            assert_eq!(decode(&c), t);
        }
    }
}
