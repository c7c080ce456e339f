//! Factor-by-factor contraction of two tensor elements.
//!
//! For each pair of nonzeros the per-factor term lists are looked up; an
//! empty list on any factor kills the pair before any arithmetic happens.
//! The surviving lists are expanded as a Cartesian product.
//!
//! Left nonzeros are split into fixed chunks. Each chunk accumulates into
//! its own buffer and the buffers are added in chunk order, so the result
//! does not depend on whether chunks ran on the pool or in sequence.

use super::{check_space, merge_positions, TensorElement};
use crate::algebra::TruncationPolicy;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::scalar::{Coeff, C64};

const CHUNK: usize = 64;
const REAL_OUTPUT_TOL: f64 = 1e-12;

pub fn multiply<T: Coeff>(x: &TensorElement<T>, y: &TensorElement<T>) -> Result<TensorElement<T>> {
    multiply_with(Exec::default(), x, y)
}

pub fn multiply_with<T: Coeff>(
    exec: Exec,
    x: &TensorElement<T>,
    y: &TensorElement<T>,
) -> Result<TensorElement<T>> {
    check_space(&x.space, &y.space)?;
    let positions = merge_positions(x.positions.as_ref(), y.positions.as_ref())?;
    let space = x.space.clone();
    let m = space.arity();
    let xs = x.nonzeros();
    let ys = y.nonzeros();
    if xs.is_empty() || ys.is_empty() {
        return Ok(TensorElement::zero(&space).with_positions(positions));
    }

    let ymi: Vec<usize> = ys
        .iter()
        .flat_map(|&(f, _)| space.unravel(f))
        .collect();
    let strict: Vec<bool> = space
        .factors()
        .iter()
        .map(|a| a.truncation().is_some_and(|t| t.policy == TruncationPolicy::Strict))
        .collect();
    let exec = if T::TAPED { Exec::Sequential } else { exec };

    let chunks: Vec<&[(usize, T)]> = xs.chunks(CHUNK).collect();
    let partials = par::map(exec, &chunks, |chunk| -> Result<Vec<(usize, T)>> {
        let mut buf = vec![T::zero(); space.size()];
        let mut touched = vec![false; space.size()];
        let mut order = Vec::new();
        let mut xi = vec![0usize; m];
        let mut lists: Vec<&[(usize, T)]> = Vec::with_capacity(m);
        let mut cursor = vec![0usize; m];
        for &(xf, xv) in chunk.iter() {
            space.unravel_into(xf, &mut xi);
            'pairs: for (yn, &(_, yv)) in ys.iter().enumerate() {
                let yi = &ymi[yn * m..(yn + 1) * m];
                lists.clear();
                let mut over = None;
                for f in 0..m {
                    let ov = strict[f] && space.factor(f).overflows(xi[f], yi[f]);
                    if ov {
                        over.get_or_insert((xi[f], yi[f]));
                    }
                    let t = space.factor(f).terms(xi[f], yi[f]);
                    if t.is_empty() && !ov {
                        continue 'pairs;
                    }
                    lists.push(t);
                }
                if let Some((i, j)) = over {
                    return Err(Error::TruncationOverflow { i, j });
                }
                let xy = xv * yv;
                cursor.iter_mut().for_each(|c| *c = 0);
                loop {
                    let mut flat = 0;
                    let mut w = xy;
                    for f in 0..m {
                        let (k, l) = lists[f][cursor[f]];
                        flat += k * space.strides()[f];
                        w = w * l;
                    }
                    if !touched[flat] {
                        touched[flat] = true;
                        order.push(flat);
                    }
                    buf[flat] = buf[flat] + w;
                    let mut f = m;
                    let done = loop {
                        if f == 0 {
                            break true;
                        }
                        f -= 1;
                        cursor[f] += 1;
                        if cursor[f] < lists[f].len() {
                            break false;
                        }
                        cursor[f] = 0;
                    };
                    if done {
                        break;
                    }
                }
            }
        }
        order.sort_unstable();
        Ok(order.into_iter().map(|f| (f, buf[f])).collect())
    });

    let mut out = vec![T::zero(); space.size()];
    for p in partials {
        for (f, v) in p? {
            out[f] = out[f] + v;
        }
    }
    if space.is_real() {
        if let Some(v) = out.iter().map(|v| v.value()).find(|v: &C64| v.im.abs() > REAL_OUTPUT_TOL) {
            return Err(Error::RealViolation(v.im));
        }
    }
    Ok(TensorElement::from_dense(&space, out)?.with_positions(positions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_b1, make_b2, Algebra, AxiomFlags};
    use crate::scalar::Field;
    use crate::tensor::{tensor_space, Role};
    use std::sync::Arc;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn b1_pair_combines_positions() {
        let feat = Arc::new(
            Algebra::generic(
                "A2",
                2,
                vec![(0, 1, 1, c(2.0)), (1, 1, 0, c(-1.0))],
                Field::Real,
                AxiomFlags::none(),
            )
            .unwrap(),
        );
        let b1 = Arc::new(make_b1(3).unwrap());
        let s = tensor_space(vec![b1.clone(), b1, feat], vec![Role::Positional, Role::Positional, Role::Feature]).unwrap();
        let x = TensorElement::from_entries(&s, vec![(vec![2, 0, 0], c(1.5))]).unwrap();
        let y = TensorElement::from_entries(&s, vec![(vec![0, 3, 1], c(1.0))]).unwrap();
        let p = multiply(&x, &y).unwrap();
        assert_eq!(p.nonzeros(), vec![(s.ravel(&[2, 3, 1]).unwrap(), c(3.0))]);
        let z = TensorElement::zero(&s);
        assert_eq!(multiply(&x, &z).unwrap().nnz(), 0);
    }

    #[test]
    fn multi_term_lists_expand_fully() {
        let b2 = Arc::new(make_b2(2).unwrap());
        let a = Arc::new(
            Algebra::generic(
                "A",
                2,
                vec![(0, 0, 0, c(1.0)), (0, 0, 1, c(2.0)), (1, 0, 1, c(3.0))],
                Field::Real,
                AxiomFlags::none(),
            )
            .unwrap(),
        );
        let s = tensor_space(vec![b2, a], vec![Role::Hidden, Role::Feature]).unwrap();
        let x = TensorElement::from_dense(&s, vec![c(1.0), c(1.0), c(2.0), c(0.0)]).unwrap();
        let y = TensorElement::from_dense(&s, vec![c(1.0), c(0.0), c(5.0), c(0.0)]).unwrap();
        let p = multiply(&x, &y).unwrap();
        // slot 0: (e0 + e1)(e0) = e0 + 2e1 + 3e1; slot 1: 2e0 * 5e0 = 10e0 + 20e1
        assert_eq!(p.to_dense(), vec![c(1.0), c(5.0), c(10.0), c(20.0)]);
    }

    #[test]
    fn sequential_and_parallel_paths_match_bitwise() {
        let b2 = Arc::new(make_b2(12).unwrap());
        let s = tensor_space(vec![b2.clone(), b2], vec![Role::Positional, Role::Positional]).unwrap();
        let mut rng = crate::rng::seeded(11);
        let xv = crate::rng::vec(&mut rng, 144, 1.0).into_iter().map(c).collect();
        let yv = crate::rng::vec(&mut rng, 144, 1.0).into_iter().map(c).collect();
        let x = TensorElement::from_dense(&s, xv).unwrap();
        let y = TensorElement::from_dense(&s, yv).unwrap();
        let a = multiply_with(Exec::Sequential, &x, &y).unwrap().values();
        let b = multiply_with(Exec::Parallel, &x, &y).unwrap().values();
        for (u, v) in a.iter().zip(&b) {
            assert_eq!(u.re.to_bits(), v.re.to_bits());
            assert_eq!(u.im.to_bits(), v.im.to_bits());
        }
    }
}
