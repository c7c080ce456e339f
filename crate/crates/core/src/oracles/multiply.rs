//! Product of tensor elements by summing over every index triple.

use crate::error::{Error, Result};
use crate::scalar::C64;
use crate::tensor::TensorElement;

/// Largest tensor size accepted.
pub const BRUTEFORCE_LIMIT: usize = 100_000;

/// `(x y)_K = sum_(I,J) x_I y_J prod_f lambda_f^(k_f)_(i_f j_f)` over all
/// multi-indices, using the dense structure tables of each factor.
pub fn multiply_bruteforce(x: &TensorElement, y: &TensorElement) -> Result<TensorElement> {
    let space = x.space();
    if !crate::tensor::same_space(space, y.space()) {
        return Err(Error::SpaceMismatch(space.name().into(), y.space().name().into()));
    }
    let size = space.size();
    if size > BRUTEFORCE_LIMIT {
        return Err(Error::SizeGuard(format!("{size} coefficients exceed {BRUTEFORCE_LIMIT}")));
    }
    let dims = space.dims().to_vec();
    let tables: Vec<Vec<Vec<Vec<C64>>>> = space.factors().iter().map(|a| a.dense_table()).collect();
    let xs = x.to_dense();
    let ys = y.to_dense();
    let unravel = |mut f: usize| -> Vec<usize> {
        let mut idx = vec![0; dims.len()];
        for (slot, d) in idx.iter_mut().zip(&dims).rev() {
            *slot = f % d;
            f /= d;
        }
        idx
    };
    let mut out = vec![C64::new(0.0, 0.0); size];
    for (fi, xv) in xs.iter().enumerate() {
        if *xv == C64::new(0.0, 0.0) {
            continue;
        }
        let i = unravel(fi);
        for (fj, yv) in ys.iter().enumerate() {
            if *yv == C64::new(0.0, 0.0) {
                continue;
            }
            let j = unravel(fj);
            for (fk, o) in out.iter_mut().enumerate() {
                let k = unravel(fk);
                let mut c = xv * yv;
                for f in 0..dims.len() {
                    c *= tables[f][i[f]][j[f]][k[f]];
                    if c == C64::new(0.0, 0.0) {
                        break;
                    }
                }
                *o += c;
            }
        }
    }
    TensorElement::from_dense(space, out)
}
