//! Ordered tensor products of algebras and their elements.

mod embed;
mod multiply;
mod text;

pub use embed::{
    embed_field3d, embed_hidden, embed_image2d, embed_sequence, embed_sequence_at, EmbeddingKind,
    EmbeddingSpec,
};
pub use multiply::{multiply, multiply_with};
pub use text::{element_from_text, element_to_text};

use std::sync::Arc;

use crate::algebra::Algebra;
use crate::error::{Error, Result};
use crate::scalar::{Coeff, Field, C64};

pub const DEFAULT_BUDGET: usize = 100_000_000;

/// Elements with at most this fraction of nonzeros are stored sparse.
const SPARSE_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Positional,
    Hidden,
    Feature,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Positional => "positional",
            Role::Hidden => "hidden",
            Role::Feature => "feature",
        }
    }
}

#[derive(Debug)]
pub struct ProductAlgebra<T: Coeff = C64> {
    name: String,
    factors: Vec<Arc<Algebra<T>>>,
    roles: Vec<Role>,
    dims: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

pub type Space<T = C64> = Arc<ProductAlgebra<T>>;

pub fn tensor_space<T: Coeff>(factors: Vec<Arc<Algebra<T>>>, roles: Vec<Role>) -> Result<Space<T>> {
    tensor_space_with_budget(factors, roles, DEFAULT_BUDGET)
}

pub fn tensor_space_with_budget<T: Coeff>(
    factors: Vec<Arc<Algebra<T>>>,
    roles: Vec<Role>,
    budget: usize,
) -> Result<Space<T>> {
    if factors.is_empty() {
        return Err(Error::InvalidDimension("tensor product of no factors".into()));
    }
    if factors.len() != roles.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} factors but {} roles",
            factors.len(),
            roles.len()
        )));
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.dim()).collect();
    let mut size: usize = 1;
    for &d in &dims {
        size = size.saturating_mul(d);
    }
    if size > budget {
        return Err(Error::BudgetExceeded { requested: size, budget });
    }
    let mut strides = vec![1; dims.len()];
    for f in (0..dims.len().saturating_sub(1)).rev() {
        strides[f] = strides[f + 1] * dims[f + 1];
    }
    let name = factors.iter().map(|f| f.name()).collect::<Vec<_>>().join("*");
    Ok(Arc::new(ProductAlgebra {
        name,
        factors,
        roles,
        dims,
        strides,
        size,
    }))
}

impl<T: Coeff> ProductAlgebra<T> {
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn factors(&self) -> &[Arc<Algebra<T>>] {
        &self.factors
    }
    pub fn factor(&self, f: usize) -> &Arc<Algebra<T>> {
        &self.factors[f]
    }
    pub fn roles(&self) -> &[Role] {
        &self.roles
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    pub fn arity(&self) -> usize {
        self.dims.len()
    }
    pub fn size(&self) -> usize {
        self.size
    }
    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn is_real(&self) -> bool {
        self.factors.iter().all(|f| f.field() == Field::Real)
    }

    pub fn ravel(&self, idx: &[usize]) -> Result<usize> {
        if idx.len() != self.dims.len() {
            return Err(Error::ShapeMismatch(format!(
                "multi-index of arity {} for {} factors",
                idx.len(),
                self.dims.len()
            )));
        }
        let mut flat = 0;
        for ((&i, &d), &s) in idx.iter().zip(&self.dims).zip(&self.strides) {
            if i >= d {
                return Err(Error::IndexOutOfRange { index: i, bound: d });
            }
            flat += i * s;
        }
        Ok(flat)
    }

    pub fn unravel_into(&self, mut flat: usize, out: &mut [usize]) {
        for (o, &s) in out.iter_mut().zip(&self.strides) {
            *o = flat / s;
            flat %= s;
        }
    }

    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.dims.len()];
        self.unravel_into(flat, &mut out);
        out
    }

    /// Same product with constants re-expressed in another coefficient type.
    pub fn lift<U: Coeff>(&self) -> Space<U> {
        Arc::new(ProductAlgebra {
            name: self.name.clone(),
            factors: self.factors.iter().map(|f| Arc::new(f.lift())).collect(),
            roles: self.roles.clone(),
            dims: self.dims.clone(),
            strides: self.strides.clone(),
            size: self.size,
        })
    }
}

pub fn same_space<T: Coeff>(a: &Space<T>, b: &Space<T>) -> bool {
    Arc::ptr_eq(a, b) || (a.name == b.name && a.dims == b.dims)
}

pub(crate) fn check_space<T: Coeff>(a: &Space<T>, b: &Space<T>) -> Result<()> {
    if same_space(a, b) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(a.name.clone(), b.name.clone()))
    }
}

pub type Positions = Arc<Vec<[f64; 3]>>;

#[derive(Clone, Debug)]
enum Store<T> {
    Dense(Vec<T>),
    /// Sorted by flat index, no structural zeros.
    Sparse(Vec<(usize, T)>),
}

#[derive(Clone, Debug)]
pub struct TensorElement<T: Coeff = C64> {
    space: Space<T>,
    store: Store<T>,
    positions: Option<Positions>,
}

impl<T: Coeff> TensorElement<T> {
    pub fn zero(space: &Space<T>) -> Self {
        TensorElement {
            space: space.clone(),
            store: Store::Sparse(Vec::new()),
            positions: None,
        }
    }

    /// Build from a full coefficient array, choosing the storage backend.
    pub fn from_dense(space: &Space<T>, coeff: Vec<T>) -> Result<Self> {
        if coeff.len() != space.size() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for space of size {}",
                coeff.len(),
                space.size()
            )));
        }
        let nnz = coeff.iter().filter(|c| !c.is_structural_zero()).count();
        let store = if (nnz as f64) <= SPARSE_FRACTION * space.size() as f64 {
            Store::Sparse(
                coeff
                    .into_iter()
                    .enumerate()
                    .filter(|(_, c)| !c.is_structural_zero())
                    .collect(),
            )
        } else {
            Store::Dense(coeff)
        };
        Ok(TensorElement {
            space: space.clone(),
            store,
            positions: None,
        })
    }

    /// Build from `(multi-index, value)` pairs; repeated indices are summed.
    pub fn from_entries<I>(space: &Space<T>, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<usize>, T)>,
    {
        let mut flat = Vec::new();
        for (idx, v) in entries {
            flat.push((space.ravel(&idx)?, v));
        }
        Self::from_flat(space, flat)
    }

    /// Build from `(flat index, value)` pairs; repeated indices are summed.
    pub fn from_flat(space: &Space<T>, mut entries: Vec<(usize, T)>) -> Result<Self> {
        if let Some(&(f, _)) = entries.iter().find(|(f, _)| *f >= space.size()) {
            return Err(Error::IndexOutOfRange { index: f, bound: space.size() });
        }
        entries.sort_by_key(|(f, _)| *f);
        let mut merged: Vec<(usize, T)> = Vec::with_capacity(entries.len());
        for (f, v) in entries {
            match merged.last_mut() {
                Some((lf, lv)) if *lf == f => *lv = *lv + v,
                _ => merged.push((f, v)),
            }
        }
        merged.retain(|(_, v)| !v.is_structural_zero());
        if (merged.len() as f64) <= SPARSE_FRACTION * space.size() as f64 {
            Ok(TensorElement {
                space: space.clone(),
                store: Store::Sparse(merged),
                positions: None,
            })
        } else {
            let mut d = vec![T::zero(); space.size()];
            for (f, v) in merged {
                d[f] = v;
            }
            Ok(TensorElement {
                space: space.clone(),
                store: Store::Dense(d),
                positions: None,
            })
        }
    }

    pub fn with_positions(mut self, positions: Option<Positions>) -> Self {
        self.positions = positions;
        self
    }

    pub fn space(&self) -> &Space<T> {
        &self.space
    }
    pub fn positions(&self) -> Option<&Positions> {
        self.positions.as_ref()
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.store, Store::Sparse(_))
    }

    /// Same coefficients held in the dense backend.
    pub fn into_dense_backend(self) -> Self {
        let d = self.to_dense();
        TensorElement {
            store: Store::Dense(d),
            ..self
        }
    }

    /// Same coefficients held in the sparse backend.
    pub fn into_sparse_backend(self) -> Self {
        let s = self.nonzeros();
        TensorElement {
            store: Store::Sparse(s),
            ..self
        }
    }

    /// Non-structural-zero coefficients in flat order.
    pub fn nonzeros(&self) -> Vec<(usize, T)> {
        match &self.store {
            Store::Sparse(s) => s.clone(),
            Store::Dense(d) => d
                .iter()
                .enumerate()
                .filter(|(_, c)| !c.is_structural_zero())
                .map(|(f, c)| (f, *c))
                .collect(),
        }
    }

    pub fn nnz(&self) -> usize {
        match &self.store {
            Store::Sparse(s) => s.len(),
            Store::Dense(d) => d.iter().filter(|c| !c.is_structural_zero()).count(),
        }
    }

    pub fn to_dense(&self) -> Vec<T> {
        match &self.store {
            Store::Dense(d) => d.clone(),
            Store::Sparse(s) => {
                let mut d = vec![T::zero(); self.space.size()];
                for &(f, v) in s {
                    d[f] = v;
                }
                d
            }
        }
    }

    /// Dense coefficient values as plain complex numbers.
    pub fn values(&self) -> Vec<C64> {
        self.to_dense().iter().map(Coeff::value).collect()
    }

    pub fn get_flat(&self, flat: usize) -> T {
        match &self.store {
            Store::Dense(d) => d[flat],
            Store::Sparse(s) => match s.binary_search_by_key(&flat, |(f, _)| *f) {
                Ok(p) => s[p].1,
                Err(_) => T::zero(),
            },
        }
    }

    pub fn get(&self, idx: &[usize]) -> Result<T> {
        Ok(self.get_flat(self.space.ravel(idx)?))
    }

    /// Inner product with a basis vector.
    pub fn readout(&self, probe: &[usize]) -> Result<T> {
        self.get(probe)
    }

    fn merged_positions(&self, other: &Self) -> Result<Option<Positions>> {
        merge_positions(self.positions.as_ref(), other.positions.as_ref())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        let store = match &self.store {
            Store::Dense(d) => Store::Dense(d.iter().map(|c| f(*c)).collect()),
            Store::Sparse(s) => Store::Sparse(
                s.iter()
                    .map(|&(i, c)| (i, f(c)))
                    .filter(|(_, c)| !c.is_structural_zero())
                    .collect(),
            ),
        };
        TensorElement {
            space: self.space.clone(),
            store,
            positions: self.positions.clone(),
        }
    }

    pub fn scale(&self, c: T) -> Self {
        self.map(|v| c * v)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T, union: bool) -> Result<Self> {
        check_space(&self.space, &other.space)?;
        let positions = self.merged_positions(other)?;
        let a = self.nonzeros();
        let b = other.nonzeros();
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let fa = a.get(i).map_or(usize::MAX, |e| e.0);
            let fb = b.get(j).map_or(usize::MAX, |e| e.0);
            if fa == fb {
                out.push((fa, f(a[i].1, b[j].1)));
                i += 1;
                j += 1;
            } else if fa < fb {
                if union {
                    out.push((fa, f(a[i].1, T::zero())));
                }
                i += 1;
            } else {
                if union {
                    out.push((fb, f(T::zero(), b[j].1)));
                }
                j += 1;
            }
        }
        Ok(Self::from_flat(&self.space, out)?.with_positions(positions))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b, true)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b, true)
    }

    /// Coefficient-wise product.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b, false)
    }

    /// Largest absolute coefficient difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        crate::scalar::max_abs_diff(&self.values(), &other.values())
    }

    /// Re-express in a lifted copy of the space.
    pub fn lift<U: Coeff>(&self, space: &Space<U>) -> Result<TensorElement<U>> {
        if space.dims() != self.space.dims() {
            return Err(Error::SpaceMismatch(self.space.name.clone(), space.name().to_string()));
        }
        let nz = self
            .nonzeros()
            .into_iter()
            .map(|(f, v)| (f, U::from_c64(v.value())))
            .collect();
        Ok(TensorElement::from_flat(space, nz)?.with_positions(self.positions.clone()))
    }
}

pub(crate) fn merge_positions(a: Option<&Positions>, b: Option<&Positions>) -> Result<Option<Positions>> {
    match (a, b) {
        (None, None) => Ok(None),
        (Some(p), None) | (None, Some(p)) => Ok(Some(p.clone())),
        (Some(p), Some(q)) => {
            if Arc::ptr_eq(p, q) || p == q {
                Ok(Some(p.clone()))
            } else {
                Err(Error::PositionMismatch("operands carry different sample positions".into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_b1, make_b2, make_field};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn space_shapes() {
        let s = tensor_space(
            vec![Arc::new(make_b1(3).unwrap()), Arc::new(make_b2(2).unwrap())],
            vec![Role::Positional, Role::Feature],
        )
        .unwrap();
        assert_eq!(s.dims(), &[4, 2]);
        assert_eq!(s.size(), 8);
        assert_eq!(s.ravel(&[2, 1]).unwrap(), 5);
        assert_eq!(s.unravel(5), vec![2, 1]);
        assert_eq!(s.ravel(&[4, 0]).unwrap_err(), Error::IndexOutOfRange { index: 4, bound: 4 });
    }

    #[test]
    fn budget_is_enforced() {
        let b = Arc::new(make_b2(100).unwrap());
        let r = tensor_space_with_budget(vec![b.clone(), b.clone(), b], vec![Role::Positional; 3], 10_000);
        assert_eq!(
            r.unwrap_err(),
            Error::BudgetExceeded {
                requested: 1_000_000,
                budget: 10_000
            }
        );
    }

    #[test]
    fn backend_choice_and_access() {
        let s = tensor_space(vec![Arc::new(make_b2(40).unwrap())], vec![Role::Positional]).unwrap();
        let mut d = vec![c(0.0); 40];
        d[3] = c(2.0);
        let x = TensorElement::from_dense(&s, d.clone()).unwrap();
        assert!(x.is_sparse());
        assert_eq!(x.get(&[3]).unwrap(), c(2.0));
        assert_eq!(x.readout(&[4]).unwrap(), c(0.0));
        for v in d.iter_mut().take(10) {
            *v = c(1.0);
        }
        let y = TensorElement::from_dense(&s, d).unwrap();
        assert!(!y.is_sparse());
        assert_eq!(y.nnz(), 10);
        assert_eq!(y.clone().into_sparse_backend().to_dense(), y.to_dense());
    }

    #[test]
    fn repeated_entries_sum() {
        let s = tensor_space(vec![Arc::new(make_field(Field::Real))], vec![Role::Feature]).unwrap();
        let x = TensorElement::from_entries(&s, vec![(vec![0], c(1.0)), (vec![0], c(2.5))]).unwrap();
        assert_eq!(x.get(&[0]).unwrap(), c(3.5));
    }

    #[test]
    fn position_metadata_merging() {
        let p: Positions = Arc::new(vec![[0.0, 0.0, 1.0]]);
        let q: Positions = Arc::new(vec![[1.0, 0.0, 0.0]]);
        assert!(merge_positions(Some(&p), None).unwrap().is_some());
        assert!(merge_positions(Some(&p), Some(&p.clone())).is_ok());
        assert!(matches!(merge_positions(Some(&p), Some(&q)), Err(Error::PositionMismatch(_))));
    }
}
