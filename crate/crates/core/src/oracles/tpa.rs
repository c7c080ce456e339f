//! Tensor-product attention on token matrices.

use super::{matvec, Mat};

/// Factors of one projection: `a[r][h]` (length `d`) and `b[r][j]` (length `d`).
#[derive(Clone, Debug)]
pub struct TpaFactors {
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
}

/// Per-head projection `p[h][j] = sum_r (a[r][h] . x)(b[r][j] . x)`.
fn project(f: &TpaFactors, x: &[f64], heads: usize) -> Mat {
    let dh = f.b[0].len();
    let mut p = vec![vec![0.0; dh]; heads];
    for (ar, br) in f.a.iter().zip(&f.b) {
        let ax = matvec(ar, x);
        let bx = matvec(br, x);
        for h in 0..heads {
            for j in 0..dh {
                p[h][j] += ax[h] * bx[j];
            }
        }
    }
    p
}

/// Causal softmax attention per head on the factored projections; output
/// `out[k][h d_h + j]`.
pub fn tpa(x: &Mat, q: &TpaFactors, k: &TpaFactors, v: &TpaFactors, heads: usize) -> Mat {
    let dh = q.b[0].len();
    let qs: Vec<Mat> = x.iter().map(|t| project(q, t, heads)).collect();
    let ks: Vec<Mat> = x.iter().map(|t| project(k, t, heads)).collect();
    let vs: Vec<Mat> = x.iter().map(|t| project(v, t, heads)).collect();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = vec![vec![0.0; heads * dh]; x.len()];
    for (i, row) in out.iter_mut().enumerate() {
        for h in 0..heads {
            let w: Vec<f64> = (0..=i)
                .map(|l| (qs[i][h].iter().zip(&ks[l][h]).map(|(a, b)| a * b).sum::<f64>() * scale).exp())
                .collect();
            let z: f64 = w.iter().sum();
            for (l, wl) in w.iter().enumerate() {
                for j in 0..dh {
                    row[h * dh + j] += wl / z * vs[l][h][j];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_token_returns_its_value_projection() {
        let f = |s: f64| TpaFactors {
            a: vec![vec![vec![s, 0.0]]],
            b: vec![vec![vec![1.0, 1.0]]],
        };
        let x = vec![vec![2.0, 1.0], vec![-1.0, 0.5]];
        let out = tpa(&x, &f(1.0), &f(1.0), &f(0.5), 1);
        // v = (0.5 * 2) * (2 + 1) = 3
        assert!((out[0][0] - 3.0).abs() < 1e-15);
    }
}
