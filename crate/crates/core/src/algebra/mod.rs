//! Finite-dimensional algebras given by structure constants.
//!
//! `e_i e_j = sum_k lambda_ij^k e_k`. Tables are stored per (i, j) pair as a
//! short list of `(k, lambda)` terms: a flat dim*dim array of lists for small
//! algebras, a row-indexed sorted map otherwise.

mod named;
mod text;

pub use named::{b2_g0, make_b1, make_b2, make_direct_sum, make_field};
pub use text::{algebra_from_text, algebra_to_text};

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::scalar::{Coeff, Field, C64};

const DENSE_MAX_DIM: usize = 8;
const AXIOM_TOL: f64 = 1e-12;
const REAL_OUTPUT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AxiomFlags {
    pub associative: bool,
    pub commutative: bool,
    pub unit: Option<usize>,
}

impl AxiomFlags {
    pub fn none() -> Self {
        Self::default()
    }
}

/// Semantic tag used by structural operators that need to know what the
/// "origin" element of a positional factor is.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AlgebraKind {
    Generic,
    /// Index-summing algebra, origin f0 is basis index 0.
    B1,
    /// Index-preserving algebra, origin g0 is the all-ones element.
    B2,
    /// SO(2) charges -n_max..=n_max.
    So2 { n_max: usize },
    /// SO(3) irreps l = 0..=l_max, basis ordered (l, m) with m ascending.
    So3 { l_max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationPolicy {
    /// Products leaving the truncated range are an error.
    Strict,
    /// Products leaving the truncated range are dropped.
    Drop,
}

impl TruncationPolicy {
    pub fn name(self) -> &'static str {
        match self {
            TruncationPolicy::Strict => "strict",
            TruncationPolicy::Drop => "drop",
        }
    }
}

/// Which basis pairs lose components to truncation.
#[derive(Clone, Debug)]
pub struct Truncation {
    pub policy: TruncationPolicy,
    overflow: Vec<bool>,
}

#[derive(Clone, Debug)]
enum Table<T> {
    Dense(Vec<Vec<(usize, T)>>),
    Sparse(Vec<Vec<(usize, Vec<(usize, T)>)>>),
}

#[derive(Clone, Debug)]
pub struct Algebra<T: Coeff = C64> {
    name: String,
    dim: usize,
    labels: Vec<String>,
    field: Field,
    flags: AxiomFlags,
    kind: AlgebraKind,
    table: Table<T>,
    trainable: Vec<(usize, usize, usize)>,
    truncation: Option<Truncation>,
}

impl<T: Coeff> Algebra<T> {
    /// Build from `(i, j, k, lambda)` entries and check the declared axioms.
    pub fn generic(
        name: &str,
        dim: usize,
        entries: Vec<(usize, usize, usize, T)>,
        field: Field,
        flags: AxiomFlags,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("algebra dim must be positive".into()));
        }
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidDimension(format!("bad algebra name `{name}`")));
        }
        let mut by_pair: Vec<Vec<(usize, T)>> = vec![Vec::new(); dim * dim];
        for (i, j, k, v) in entries {
            for idx in [i, j, k] {
                if idx >= dim {
                    return Err(Error::IndexOutOfRange { index: idx, bound: dim });
                }
            }
            if field == Field::Real && v.value().im != 0.0 {
                return Err(Error::RealViolation(v.value().im));
            }
            let list = &mut by_pair[i * dim + j];
            match list.iter_mut().find(|(kk, _)| *kk == k) {
                Some(slot) => slot.1 = slot.1 + v,
                None => list.push((k, v)),
            }
        }
        for list in &mut by_pair {
            list.retain(|(_, v)| !v.is_structural_zero());
            list.sort_by_key(|(k, _)| *k);
        }
        let table = if dim <= DENSE_MAX_DIM {
            Table::Dense(by_pair)
        } else {
            let mut rows = vec![Vec::new(); dim];
            for (p, list) in by_pair.into_iter().enumerate() {
                if !list.is_empty() {
                    rows[p / dim].push((p % dim, list));
                }
            }
            Table::Sparse(rows)
        };
        if let Some(u) = flags.unit {
            if u >= dim {
                return Err(Error::IndexOutOfRange { index: u, bound: dim });
            }
        }
        let alg = Algebra {
            name: name.to_string(),
            dim,
            labels: (0..dim).map(|i| format!("e{i}")).collect(),
            field,
            flags,
            kind: AlgebraKind::Generic,
            table,
            trainable: Vec::new(),
            truncation: None,
        };
        alg.check_axioms()?;
        Ok(alg)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.dim {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for dim {}",
                labels.len(),
                self.dim
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn with_kind(mut self, kind: AlgebraKind) -> Self {
        self.kind = kind;
        self
    }

    /// Mark `(i, j, k)` triples as learnable.
    pub fn with_trainable(mut self, mut triples: Vec<(usize, usize, usize)>) -> Result<Self> {
        for &(i, j, k) in &triples {
            for idx in [i, j, k] {
                if idx >= self.dim {
                    return Err(Error::IndexOutOfRange { index: idx, bound: self.dim });
                }
            }
        }
        triples.sort_unstable();
        triples.dedup();
        self.trainable = triples;
        Ok(self)
    }

    pub(crate) fn with_truncation(mut self, policy: TruncationPolicy, overflow: Vec<bool>) -> Self {
        debug_assert_eq!(overflow.len(), self.dim * self.dim);
        self.truncation = Some(Truncation { policy, overflow });
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn field(&self) -> Field {
        self.field
    }
    pub fn flags(&self) -> AxiomFlags {
        self.flags
    }
    pub fn kind(&self) -> AlgebraKind {
        self.kind
    }
    pub fn trainable(&self) -> &[(usize, usize, usize)] {
        &self.trainable
    }
    pub fn truncation(&self) -> Option<&Truncation> {
        self.truncation.as_ref()
    }

    /// Whether the product of basis `i` and `j` loses components to truncation.
    pub fn overflows(&self, i: usize, j: usize) -> bool {
        self.truncation
            .as_ref()
            .is_some_and(|t| t.overflow[i * self.dim + j])
    }

    /// Terms `(k, lambda_ij^k)` of `e_i e_j`, sorted by k.
    #[inline]
    pub fn terms(&self, i: usize, j: usize) -> &[(usize, T)] {
        match &self.table {
            Table::Dense(v) => &v[i * self.dim + j],
            Table::Sparse(rows) => {
                let row = &rows[i];
                match row.binary_search_by_key(&j, |(jj, _)| *jj) {
                    Ok(p) => &row[p].1,
                    Err(_) => &[],
                }
            }
        }
    }

    /// All nonzero constants in (i, j, k) order.
    pub fn entries(&self) -> Vec<(usize, usize, usize, T)> {
        let mut out = Vec::new();
        for i in 0..self.dim {
            for j in 0..self.dim {
                for &(k, v) in self.terms(i, j) {
                    out.push((i, j, k, v));
                }
            }
        }
        out
    }

    pub fn nnz(&self) -> usize {
        match &self.table {
            Table::Dense(v) => v.iter().map(Vec::len).sum(),
            Table::Sparse(rows) => rows.iter().flatten().map(|(_, l)| l.len()).sum(),
        }
    }

    /// Re-express the constants in another coefficient type.
    pub fn lift<U: Coeff>(&self) -> Algebra<U> {
        let conv = |l: &Vec<(usize, T)>| -> Vec<(usize, U)> {
            l.iter().map(|&(k, v)| (k, U::from_c64(v.value()))).collect()
        };
        let table = match &self.table {
            Table::Dense(v) => Table::Dense(v.iter().map(conv).collect()),
            Table::Sparse(rows) => Table::Sparse(
                rows.iter()
                    .map(|r| r.iter().map(|(j, l)| (*j, conv(l))).collect())
                    .collect(),
            ),
        };
        Algebra {
            name: self.name.clone(),
            dim: self.dim,
            labels: self.labels.clone(),
            field: self.field,
            flags: self.flags,
            kind: self.kind,
            table,
            trainable: self.trainable.clone(),
            truncation: self.truncation.clone(),
        }
    }

    /// Product of two basis vectors as a sparse coefficient map.
    fn basis_product(&self, i: usize, j: usize) -> Sparse {
        let mut out = Sparse::new();
        for &(k, v) in self.terms(i, j) {
            *out.entry(k).or_default() += v.value();
        }
        out
    }

    /// Product of a sparse vector with basis `k` on the right.
    fn vec_times_basis(&self, x: &Sparse, k: usize) -> Sparse {
        let mut out = Sparse::new();
        for (&m, xm) in x {
            for &(n, v) in self.terms(m, k) {
                *out.entry(n).or_default() += xm * v.value();
            }
        }
        out
    }

    /// Product of basis `i` with a sparse vector on the right.
    fn basis_times_vec(&self, i: usize, y: &Sparse) -> Sparse {
        let mut out = Sparse::new();
        for (&p, yp) in y {
            for &(n, v) in self.terms(i, p) {
                *out.entry(n).or_default() += yp * v.value();
            }
        }
        out
    }

    fn check_axioms(&self) -> Result<()> {
        let d = self.dim;
        let close = sparse_close;
        if self.flags.commutative {
            for i in 0..d {
                for j in (i + 1)..d {
                    if !close(&self.basis_product(i, j), &self.basis_product(j, i)) {
                        return Err(Error::AxiomViolation {
                            axiom: "commutative",
                            witness: vec![i, j],
                        });
                    }
                }
            }
        }
        if let Some(u) = self.flags.unit {
            for n in 0..d {
                let e = Sparse::from([(n, C64::new(1.0, 0.0))]);
                if !close(&self.basis_product(u, n), &e) || !close(&self.basis_product(n, u), &e) {
                    return Err(Error::AxiomViolation {
                        axiom: "unital",
                        witness: vec![u, n],
                    });
                }
            }
        }
        if self.flags.associative {
            if let Some(w) = self.first_associativity_failure() {
                return Err(Error::AxiomViolation {
                    axiom: "associative",
                    witness: w.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// First basis triple (lexicographic) with (e_i e_j) e_k != e_i (e_j e_k).
    pub fn first_associativity_failure(&self) -> Option<[usize; 3]> {
        let d = self.dim;
        for i in 0..d {
            for j in 0..d {
                let ij = self.basis_product(i, j);
                for k in 0..d {
                    let left = self.vec_times_basis(&ij, k);
                    let right = self.basis_times_vec(i, &self.basis_product(j, k));
                    if !sparse_close(&left, &right) {
                        return Some([i, j, k]);
                    }
                }
            }
        }
        None
    }

    /// Dense `lambda[i][j][k]` values, for oracles and diagnostics.
    pub fn dense_table(&self) -> Vec<Vec<Vec<C64>>> {
        let d = self.dim;
        let mut t = vec![vec![vec![C64::new(0.0, 0.0); d]; d]; d];
        for (i, j, k, v) in self.entries() {
            t[i][j][k] = v.value();
        }
        t
    }
}

type Sparse = BTreeMap<usize, C64>;

fn sparse_close(a: &Sparse, b: &Sparse) -> bool {
    let zero = C64::new(0.0, 0.0);
    a.iter().all(|(k, x)| (x - b.get(k).unwrap_or(&zero)).norm() <= AXIOM_TOL)
        && b.iter().all(|(k, y)| (y - a.get(k).unwrap_or(&zero)).norm() <= AXIOM_TOL)
}

/// An element of a single algebra with dense coefficients.
#[derive(Clone, Debug)]
pub struct AlgebraElement<T: Coeff = C64> {
    algebra: Arc<Algebra<T>>,
    coeff: Vec<T>,
}

impl<T: Coeff> AlgebraElement<T> {
    pub fn new(algebra: &Arc<Algebra<T>>, coeff: Vec<T>) -> Result<Self> {
        if coeff.len() != algebra.dim() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for dim {}",
                coeff.len(),
                algebra.dim()
            )));
        }
        if algebra.field() == Field::Real {
            if let Some(c) = coeff.iter().find(|c| c.value().im != 0.0) {
                return Err(Error::RealViolation(c.value().im));
            }
        }
        Ok(AlgebraElement {
            algebra: algebra.clone(),
            coeff,
        })
    }

    pub fn zero(algebra: &Arc<Algebra<T>>) -> Self {
        AlgebraElement {
            algebra: algebra.clone(),
            coeff: vec![T::zero(); algebra.dim()],
        }
    }

    pub fn basis(algebra: &Arc<Algebra<T>>, i: usize) -> Result<Self> {
        if i >= algebra.dim() {
            return Err(Error::IndexOutOfRange { index: i, bound: algebra.dim() });
        }
        let mut e = Self::zero(algebra);
        e.coeff[i] = T::one();
        Ok(e)
    }

    pub fn algebra(&self) -> &Arc<Algebra<T>> {
        &self.algebra
    }
    pub fn coeff(&self) -> &[T] {
        &self.coeff
    }
    pub fn values(&self) -> Vec<C64> {
        self.coeff.iter().map(Coeff::value).collect()
    }

    fn same_algebra(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.algebra, &other.algebra)
            || (self.algebra.name == other.algebra.name && self.algebra.dim == other.algebra.dim)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if !self.same_algebra(other) {
            return Err(Error::AlgebraMismatch);
        }
        Ok(AlgebraElement {
            algebra: self.algebra.clone(),
            coeff: self.coeff.iter().zip(&other.coeff).map(|(a, b)| *a + *b).collect(),
        })
    }

    pub fn scale(&self, c: T) -> Self {
        AlgebraElement {
            algebra: self.algebra.clone(),
            coeff: self.coeff.iter().map(|a| c * *a).collect(),
        }
    }
}

/// `(xy)_k = sum_ij x_i y_j lambda_ij^k`.
pub fn product<T: Coeff>(x: &AlgebraElement<T>, y: &AlgebraElement<T>) -> Result<AlgebraElement<T>> {
    if !x.same_algebra(y) {
        return Err(Error::AlgebraMismatch);
    }
    let alg = &x.algebra;
    let mut out = vec![T::zero(); alg.dim()];
    for (i, xi) in x.coeff.iter().enumerate() {
        if xi.is_structural_zero() {
            continue;
        }
        for (j, yj) in y.coeff.iter().enumerate() {
            if yj.is_structural_zero() {
                continue;
            }
            if alg.overflows(i, j) && alg.truncation().unwrap().policy == TruncationPolicy::Strict {
                return Err(Error::TruncationOverflow { i, j });
            }
            let terms = alg.terms(i, j);
            if terms.is_empty() {
                continue;
            }
            let xy = *xi * *yj;
            for &(k, l) in terms {
                out[k] = out[k] + xy * l;
            }
        }
    }
    if alg.field() == Field::Real {
        for c in &mut out {
            let v = c.value();
            if v.im.abs() > REAL_OUTPUT_TOL {
                return Err(Error::RealViolation(v.im));
            }
        }
    }
    Ok(AlgebraElement {
        algebra: alg.clone(),
        coeff: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn base_field_is_unital_and_associative() {
        let flags = AxiomFlags {
            associative: true,
            commutative: true,
            unit: Some(0),
        };
        let a = Algebra::generic("field", 1, vec![(0, 0, 0, c(1.0))], Field::Real, flags).unwrap();
        assert_eq!(a.dim(), 1);
        assert_eq!(a.terms(0, 0), &[(0, c(1.0))]);
    }

    #[test]
    fn out_of_range_index_rejected() {
        let r = Algebra::generic("bad", 2, vec![(0, 2, 0, c(1.0))], Field::Real, AxiomFlags::none());
        assert_eq!(r.unwrap_err(), Error::IndexOutOfRange { index: 2, bound: 2 });
    }

    #[test]
    fn real_algebra_rejects_imaginary_constant() {
        let r = Algebra::generic(
            "bad",
            1,
            vec![(0, 0, 0, C64::new(1.0, 0.5))],
            Field::Real,
            AxiomFlags::none(),
        );
        assert!(matches!(r, Err(Error::RealViolation(_))));
    }

    #[test]
    fn commutativity_violation_reports_witness() {
        let flags = AxiomFlags {
            commutative: true,
            ..AxiomFlags::none()
        };
        let r = Algebra::generic("nc", 3, vec![(1, 2, 0, c(1.0))], Field::Real, flags);
        assert_eq!(
            r.unwrap_err(),
            Error::AxiomViolation {
                axiom: "commutative",
                witness: vec![1, 2]
            }
        );
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = Algebra::generic(
            "dup",
            2,
            vec![(0, 1, 1, c(1.0)), (0, 1, 1, c(2.0)), (1, 1, 0, c(1.0)), (1, 1, 0, c(-1.0))],
            Field::Real,
            AxiomFlags::none(),
        )
        .unwrap();
        assert_eq!(a.terms(0, 1), &[(1, c(3.0))]);
        assert!(a.terms(1, 1).is_empty());
    }

    #[test]
    fn sparse_table_lookup_matches_entries() {
        let entries: Vec<_> = (0..12).map(|i| (i, (i * 5) % 12, (i * 7) % 12, c(i as f64 + 1.0))).collect();
        let a = Algebra::generic("big", 12, entries.clone(), Field::Real, AxiomFlags::none()).unwrap();
        for (i, j, k, v) in entries {
            assert_eq!(a.terms(i, j), &[(k, v)]);
        }
        assert!(a.terms(3, 4).is_empty());
        assert_eq!(a.nnz(), 12);
    }

    #[test]
    fn product_with_zero_is_zero() {
        let a = Arc::new(make_b1(3).unwrap());
        let x = AlgebraElement::new(&a, vec![c(1.0), c(2.0), c(3.0), c(4.0)]).unwrap();
        let z = AlgebraElement::zero(&a);
        let p = product(&x, &z).unwrap();
        assert!(p.coeff().iter().all(|v| *v == c(0.0)));
    }

    #[test]
    fn mismatched_algebras_rejected() {
        let a = Arc::new(make_b1(2).unwrap());
        let b = Arc::new(make_b2(3).unwrap());
        let x = AlgebraElement::basis(&a, 0).unwrap();
        let y = AlgebraElement::basis(&b, 0).unwrap();
        assert_eq!(product(&x, &y).unwrap_err(), Error::AlgebraMismatch);
    }
}
