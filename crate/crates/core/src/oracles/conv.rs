//! 2D cross-correlation, kernel anchored at its top-left tap.

use super::Mat;

/// `out[n][m] = sum_(i,j) x[i][j] k[i-n][j-m]`, zero outside the image.
pub fn xcorr2d(x: &Mat, k: &Mat) -> Mat {
    let (h, w) = (x.len(), x[0].len());
    let (kh, kw) = (k.len(), k[0].len());
    let mut out = vec![vec![0.0; w]; h];
    for n in 0..h {
        for m in 0..w {
            let mut s = 0.0;
            for i in n..(n + kh).min(h) {
                for j in m..(m + kw).min(w) {
                    s += x[i][j] * k[i - n][j - m];
                }
            }
            out[n][m] = s;
        }
    }
    out
}

/// Same sum accumulated one kernel tap at a time over the shifted image.
pub fn xcorr2d_tapwise(x: &Mat, k: &Mat) -> Mat {
    let (h, w) = (x.len(), x[0].len());
    let mut out = vec![vec![0.0; w]; h];
    for (a, krow) in k.iter().enumerate() {
        for (b, &kv) in krow.iter().enumerate() {
            for n in 0..h.saturating_sub(a) {
                for m in 0..w.saturating_sub(b) {
                    out[n][m] += kv * x[n + a][m + b];
                }
            }
        }
    }
    out
}

/// Indices wrap modulo the image size.
pub fn xcorr2d_cyclic(x: &Mat, k: &Mat) -> Mat {
    let (h, w) = (x.len(), x[0].len());
    let mut out = vec![vec![0.0; w]; h];
    for (n, row) in out.iter_mut().enumerate() {
        for (m, o) in row.iter_mut().enumerate() {
            for (a, krow) in k.iter().enumerate() {
                for (b, &kv) in krow.iter().enumerate() {
                    *o += kv * x[(n + a) % h][(m + b) % w];
                }
            }
        }
    }
    out
}

/// Gradient of `sum g[n][m] out[n][m]` with respect to `k[a][b]`.
pub fn xcorr2d_kernel_grad(x: &Mat, g: &Mat, kh: usize, kw: usize) -> Mat {
    let (h, w) = (x.len(), x[0].len());
    let mut out = vec![vec![0.0; kw]; kh];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, o) in row.iter_mut().enumerate() {
            for n in 0..h {
                for m in 0..w {
                    if n + a < h && m + b < w {
                        *o += g[n][m] * x[n + a][m + b];
                    }
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
    fn small_case_by_hand() {
        let x = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let k = vec![vec![1.0, 10.0], vec![100.0, 1000.0]];
        let out = xcorr2d(&x, &k);
        assert_eq!(out, vec![vec![4321.0, 402.0], vec![43.0, 4.0]]);
        assert_eq!(xcorr2d_tapwise(&x, &k), out);
        assert_eq!(xcorr2d_cyclic(&x, &k)[1][1], 4.0 + 30.0 + 200.0 + 1000.0);
    }
}
