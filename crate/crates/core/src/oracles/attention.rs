//! Attention on token matrices `x[k][a]`.

use super::{matvec, Mat};

/// `W^Q`, `W^K` are `d_k x d`; `W^V` is `d_v x d`.
#[derive(Clone, Debug)]
pub struct AttnWeights {
    pub wq: Mat,
    pub wk: Mat,
    pub wv: Mat,
}

/// `out_k = sum_l a_kl W^V x_l` with `a_kl = F(<q_k, k_l> / sqrt(d_k))`,
/// masked to `l <= k` when causal and divided by the row sum when
/// `normalize`.
pub fn attention(x: &Mat, w: &AttnWeights, f: impl Fn(f64) -> f64, causal: bool, normalize: bool) -> Mat {
    cross_general(x, x, w, f, causal, normalize)
}

fn cross_general(x: &Mat, y: &Mat, w: &AttnWeights, f: impl Fn(f64) -> f64, causal: bool, normalize: bool) -> Mat {
    let dk = w.wq.len() as f64;
    let q: Vec<Vec<f64>> = x.iter().map(|t| matvec(&w.wq, t)).collect();
    let k: Vec<Vec<f64>> = y.iter().map(|t| matvec(&w.wk, t)).collect();
    let v: Vec<Vec<f64>> = y.iter().map(|t| matvec(&w.wv, t)).collect();
    let dv = w.wv.len();
    let mut out = vec![vec![0.0; dv]; x.len()];
    for (i, qi) in q.iter().enumerate() {
        let mut a = vec![0.0; y.len()];
        for (j, kj) in k.iter().enumerate() {
            if causal && j > i {
                continue;
            }
            let s: f64 = qi.iter().zip(kj).map(|(p, r)| p * r).sum();
            a[j] = f(s / dk.sqrt());
        }
        if normalize {
            let z: f64 = a.iter().sum();
            if z != 0.0 {
                a.iter_mut().for_each(|v| *v /= z);
            }
        }
        for (j, vj) in v.iter().enumerate() {
            for t in 0..dv {
                out[i][t] += a[j] * vj[t];
            }
        }
    }
    out
}

fn softmax_exp(s: f64) -> f64 {
    s.exp()
}

/// Causal softmax heads concatenated along channels.
pub fn multihead_attention(x: &Mat, heads: &[AttnWeights]) -> Mat {
    let outs: Vec<Mat> = heads.iter().map(|h| attention(x, h, softmax_exp, true, true)).collect();
    (0..x.len())
        .map(|k| outs.iter().flat_map(|o| o[k].iter().copied()).collect())
        .collect()
}

/// Sum of causal softmax attentions, one per rank.
pub fn rank_r_attention(x: &Mat, ranks: &[AttnWeights]) -> Mat {
    let mut out: Option<Mat> = None;
    for r in ranks {
        let o = attention(x, r, softmax_exp, true, true);
        out = Some(match out {
            None => o,
            Some(acc) => acc
                .iter()
                .zip(&o)
                .map(|(a, b)| a.iter().zip(b).map(|(u, v)| u + v).collect())
                .collect(),
        });
    }
    out.unwrap_or_default()
}

/// Queries from `x`, keys and values from `y`, softmax without mask.
pub fn cross_attention(x: &Mat, y: &Mat, w: &AttnWeights) -> Mat {
    cross_general(x, y, w, softmax_exp, false, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_scores_average_values() {
        let w = AttnWeights {
            wq: vec![vec![0.0, 0.0]],
            wk: vec![vec![0.0, 0.0]],
            wv: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 9.0]];
        let out = attention(&x, &w, |s| s.exp(), true, true);
        assert_eq!(out[0], vec![1.0, 2.0]);
        assert_eq!(out[2], vec![3.0, 5.0]);
        let c = cross_attention(&x[..1].to_vec(), &x, &w);
        assert_eq!(c[0], vec![3.0, 5.0]);
    }
}
