//! Structural operators: linear maps acting on designated factors, and
//! pointwise activations.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::algebra::AlgebraKind;
use crate::error::{Error, Result};
use crate::scalar::{Activation, Coeff, C64};
use crate::tensor::{Role, Space, TensorElement};

const REAL_TOL: f64 = 1e-12;

/// Neighbour lists N(a) over point indices.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighbourTable {
    lists: Vec<Vec<usize>>,
}

impl NeighbourTable {
    pub fn new(mut lists: Vec<Vec<usize>>) -> Result<Self> {
        let n = lists.len();
        for l in &mut lists {
            if let Some(&b) = l.iter().find(|&&b| b >= n) {
                return Err(Error::IndexOutOfRange { index: b, bound: n });
            }
            l.sort_unstable();
            l.dedup();
        }
        Ok(NeighbourTable { lists })
    }

    /// Points within `radius` of each other, self excluded.
    pub fn by_radius(points: &[[f64; 3]], radius: f64) -> Self {
        let lists = (0..points.len())
            .map(|a| {
                (0..points.len())
                    .filter(|&b| b != a && dist(&points[a], &points[b]) <= radius)
                    .collect()
            })
            .collect();
        NeighbourTable { lists }
    }

    /// The `k` nearest other points; ties broken by index.
    pub fn by_knn(points: &[[f64; 3]], k: usize) -> Self {
        let lists = (0..points.len())
            .map(|a| {
                let mut others: Vec<usize> = (0..points.len()).filter(|&b| b != a).collect();
                others.sort_by(|&b, &c| {
                    dist(&points[a], &points[b])
                        .total_cmp(&dist(&points[a], &points[c]))
                        .then(b.cmp(&c))
                });
                others.truncate(k);
                others.sort_unstable();
                others
            })
            .collect();
        NeighbourTable { lists }
    }

    /// Whitespace adjacency file: each line is `a b1 b2 ...`.
    pub fn from_adjacency_text(text: &str, n_points: usize) -> Result<Self> {
        let mut lists = vec![Vec::new(); n_points];
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(|t| {
                t.parse::<usize>().map_err(|_| Error::Parse {
                    line: n + 1,
                    msg: format!("bad index `{t}`"),
                })
            });
            let a = it.next().unwrap()?;
            if a >= n_points {
                return Err(Error::IndexOutOfRange { index: a, bound: n_points });
            }
            for b in it {
                lists[a].push(b?);
            }
        }
        Self::new(lists)
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }
    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }
    pub fn neighbours(&self, a: usize) -> &[usize] {
        &self.lists[a]
    }
    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.lists.get(a).is_some_and(|l| l.binary_search(&b).is_ok())
    }
}

fn dist(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Clone, Debug)]
pub enum StructuralOperator<T: Coeff = C64> {
    Identity,
    /// Swap the indices of two factors of equal dimension.
    Flip { a: usize, b: usize },
    /// Zero every index of `factor` outside `keep`.
    ScalarProj { factor: usize, keep: Vec<usize> },
    /// Zero entries whose key index exceeds the query index. With `collapse`
    /// the surviving key index is summed into the origin.
    Causal { query: usize, key: usize, collapse: bool },
    /// Keep entries whose key point is a neighbour of the query point.
    Neighbourhood {
        query: usize,
        key: usize,
        table: Arc<NeighbourTable>,
        collapse: bool,
    },
    /// `x'[..i..] = sum_j m[i][j] x[..j..]` on one factor.
    FactorLinear { factor: usize, matrix: Vec<Vec<T>> },
    /// Coefficient-wise product with a fixed element.
    Scale { weights: TensorElement<T> },
    /// Pointwise F on the coefficients inside `support` (every coefficient,
    /// zeros included); coefficients outside it are set to zero. `None`
    /// means the whole factor.
    Activation {
        func: Activation,
        support: Option<Vec<Option<Vec<usize>>>>,
    },
    /// Divide by the sum over `axis`; all-zero fibres stay zero.
    Normalize { axis: usize },
    /// `g0 (x) e_(offset + a) -> g_a (x) e_0` on a slot/feature pair.
    HiddenTranspose {
        slot: usize,
        feature: usize,
        channel_offset: usize,
    },
    /// Left to right.
    Compose(Vec<StructuralOperator<T>>),
}

/// Flatten `ops` into one operator applied left to right.
pub fn compose<T: Coeff>(ops: Vec<StructuralOperator<T>>) -> StructuralOperator<T> {
    let mut flat = Vec::new();
    for op in ops {
        match op {
            StructuralOperator::Compose(inner) => flat.extend(inner),
            StructuralOperator::Identity => {}
            other => flat.push(other),
        }
    }
    match flat.len() {
        0 => StructuralOperator::Identity,
        1 => flat.pop().unwrap(),
        _ => StructuralOperator::Compose(flat),
    }
}

/// Compose and check the chain against `space`.
pub fn compose_checked<T: Coeff>(ops: Vec<StructuralOperator<T>>, space: &Space<T>) -> Result<StructuralOperator<T>> {
    for (n, op) in ops.iter().enumerate() {
        op.validate(space)
            .map_err(|e| Error::ChainMismatch(format!("operator {n} ({}): {e}", op.kind_name())))?;
    }
    Ok(compose(ops))
}

fn check_factor<T: Coeff>(space: &Space<T>, f: usize) -> Result<()> {
    if f >= space.arity() {
        return Err(Error::IndexOutOfRange { index: f, bound: space.arity() });
    }
    Ok(())
}

fn check_role<T: Coeff>(space: &Space<T>, f: usize, expected: Role) -> Result<()> {
    check_factor(space, f)?;
    let found = space.roles()[f];
    if found != expected {
        return Err(Error::FactorRole {
            factor: f,
            expected: expected.name(),
            found: found.name(),
        });
    }
    Ok(())
}

fn check_positional_pair<T: Coeff>(space: &Space<T>, q: usize, k: usize) -> Result<()> {
    for f in [q, k] {
        check_factor(space, f)?;
        if space.roles()[f] == Role::Feature {
            return Err(Error::FactorRole {
                factor: f,
                expected: "positional",
                found: "feature",
            });
        }
    }
    if q == k {
        return Err(Error::DimMismatch("query and key factors coincide".into()));
    }
    Ok(())
}

/// Point index carried by a positional index, `None` for the B1 origin.
fn point_of(kind: AlgebraKind, i: usize) -> Option<usize> {
    match kind {
        AlgebraKind::B1 => i.checked_sub(1),
        _ => Some(i),
    }
}

impl<T: Coeff> StructuralOperator<T> {
    pub fn kind_name(&self) -> &'static str {
        match self {
            StructuralOperator::Identity => "identity",
            StructuralOperator::Flip { .. } => "flip",
            StructuralOperator::ScalarProj { .. } => "scalar_proj",
            StructuralOperator::Causal { .. } => "causal_proj",
            StructuralOperator::Neighbourhood { .. } => "neighbourhood_proj",
            StructuralOperator::FactorLinear { .. } => "factor_linear",
            StructuralOperator::Scale { .. } => "scale",
            StructuralOperator::Activation { .. } => "activation",
            StructuralOperator::Normalize { .. } => "normalize",
            StructuralOperator::HiddenTranspose { .. } => "hidden_transpose",
            StructuralOperator::Compose(_) => "compose",
        }
    }

    pub fn activation(func: Activation) -> Self {
        StructuralOperator::Activation { func, support: None }
    }

    /// Whether the operator is linear in its argument.
    pub fn is_linear(&self) -> bool {
        match self {
            StructuralOperator::Activation { func, .. } => *func == Activation::Identity,
            StructuralOperator::Normalize { .. } => false,
            StructuralOperator::Compose(ops) => ops.iter().all(Self::is_linear),
            _ => true,
        }
    }

    pub fn validate(&self, space: &Space<T>) -> Result<()> {
        match self {
            StructuralOperator::Identity => Ok(()),
            StructuralOperator::Flip { a, b } => {
                check_factor(space, *a)?;
                check_factor(space, *b)?;
                if space.dims()[*a] != space.dims()[*b] {
                    return Err(Error::DimMismatch(format!(
                        "flip of factors with dims {} and {}",
                        space.dims()[*a],
                        space.dims()[*b]
                    )));
                }
                Ok(())
            }
            StructuralOperator::ScalarProj { factor, keep } => {
                check_role(space, *factor, Role::Feature)?;
                match keep.iter().find(|&&k| k >= space.dims()[*factor]) {
                    Some(&k) => Err(Error::IndexOutOfRange { index: k, bound: space.dims()[*factor] }),
                    None => Ok(()),
                }
            }
            StructuralOperator::Causal { query, key, .. } => {
                check_positional_pair(space, *query, *key)?;
                if space.dims()[*query] != space.dims()[*key] {
                    return Err(Error::DimMismatch("causal factors differ in size".into()));
                }
                Ok(())
            }
            StructuralOperator::Neighbourhood { query, key, table, .. } => {
                check_positional_pair(space, *query, *key)?;
                for f in [*query, *key] {
                    let a = space.factor(f);
                    let items = if a.kind() == AlgebraKind::B1 { a.dim() - 1 } else { a.dim() };
                    if items < table.len() {
                        return Err(Error::DimMismatch(format!(
                            "table has {} points, factor {f} holds {items}",
                            table.len()
                        )));
                    }
                }
                Ok(())
            }
            StructuralOperator::FactorLinear { factor, matrix } => {
                check_factor(space, *factor)?;
                let d = space.dims()[*factor];
                if matrix.len() != d || matrix.iter().any(|r| r.len() != d) {
                    return Err(Error::DimMismatch(format!("factor_linear needs a {d}x{d} matrix")));
                }
                Ok(())
            }
            StructuralOperator::Scale { weights } => crate::tensor::same_space(weights.space(), space)
                .then_some(())
                .ok_or_else(|| Error::SpaceMismatch(weights.space().name().into(), space.name().into())),
            StructuralOperator::Activation { support, .. } => {
                if let Some(s) = support {
                    if s.len() != space.arity() {
                        return Err(Error::ShapeMismatch("support arity differs from space".into()));
                    }
                    for (f, set) in s.iter().enumerate() {
                        if let Some(&i) = set.iter().flatten().find(|&&i| i >= space.dims()[f]) {
                            return Err(Error::IndexOutOfRange { index: i, bound: space.dims()[f] });
                        }
                    }
                }
                Ok(())
            }
            StructuralOperator::Normalize { axis } => check_factor(space, *axis),
            StructuralOperator::HiddenTranspose { slot, feature, channel_offset } => {
                check_factor(space, *slot)?;
                check_factor(space, *feature)?;
                if channel_offset + space.dims()[*slot] > space.dims()[*feature] {
                    return Err(Error::DimMismatch("channel block exceeds feature dim".into()));
                }
                Ok(())
            }
            StructuralOperator::Compose(ops) => ops.iter().try_for_each(|o| o.validate(space)),
        }
    }

    pub fn apply(&self, x: &TensorElement<T>) -> Result<TensorElement<T>> {
        let space = x.space().clone();
        self.validate(&space)?;
        let pos = x.positions().cloned();
        let out = match self {
            StructuralOperator::Identity => return Ok(x.clone()),
            StructuralOperator::Flip { a, b } => remap(x, |idx| {
                idx.swap(*a, *b);
                true
            })?,
            StructuralOperator::ScalarProj { factor, keep } => remap(x, |idx| keep.contains(&idx[*factor]))?,
            StructuralOperator::Causal { query, key, collapse } => {
                let kq = space.factor(*query).kind();
                let kk = space.factor(*key).kind();
                let kept = remap(x, |idx| match (point_of(kq, idx[*query]), point_of(kk, idx[*key])) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(k), Some(l)) => l <= k,
                })?;
                if *collapse {
                    collapse_key(&kept, *key)?
                } else {
                    kept
                }
            }
            StructuralOperator::Neighbourhood { query, key, table, collapse } => {
                let kq = space.factor(*query).kind();
                let kk = space.factor(*key).kind();
                let kept = remap(x, |idx| match (point_of(kq, idx[*query]), point_of(kk, idx[*key])) {
                    (_, None) => true,
                    (None, Some(_)) => false,
                    (Some(a), Some(b)) => table.contains(a, b),
                })?;
                if *collapse {
                    collapse_key(&kept, *key)?
                } else {
                    kept
                }
            }
            StructuralOperator::FactorLinear { factor, matrix } => {
                let stride = space.strides()[*factor];
                let d = space.dims()[*factor];
                let mut entries = Vec::new();
                for (flat, v) in x.nonzeros() {
                    let j = (flat / stride) % d;
                    let base = flat - j * stride;
                    for (i, row) in matrix.iter().enumerate() {
                        let m = row[j];
                        if !m.is_structural_zero() {
                            entries.push((base + i * stride, m * v));
                        }
                    }
                }
                TensorElement::from_flat(&space, entries)?
            }
            StructuralOperator::Scale { weights } => x.hadamard(weights)?,
            StructuralOperator::Activation { func, support } => activate(x, *func, support.as_deref())?,
            StructuralOperator::Normalize { axis } => {
                let stride = space.strides()[*axis];
                let d = space.dims()[*axis];
                let nz = x.nonzeros();
                let mut sums: BTreeMap<usize, T> = BTreeMap::new();
                for &(flat, v) in &nz {
                    let base = flat - ((flat / stride) % d) * stride;
                    let e = sums.entry(base).or_insert_with(T::zero);
                    *e = *e + v;
                }
                let inv: BTreeMap<usize, Option<T>> = sums
                    .into_iter()
                    .map(|(b, s)| {
                        let z = s.value();
                        (b, (z.re != 0.0 || z.im != 0.0).then(|| s.recip()))
                    })
                    .collect();
                let entries = nz
                    .into_iter()
                    .filter_map(|(flat, v)| {
                        let base = flat - ((flat / stride) % d) * stride;
                        inv[&base].map(|r| (flat, v * r))
                    })
                    .collect();
                TensorElement::from_flat(&space, entries)?
            }
            StructuralOperator::HiddenTranspose { slot, feature, channel_offset } => remap(x, |idx| {
                let a = idx[*slot];
                if idx[*feature] != channel_offset + a {
                    return false;
                }
                idx[*feature] = 0;
                true
            })?,
            StructuralOperator::Compose(ops) => {
                let mut cur = x.clone();
                for op in ops {
                    cur = op.apply(&cur)?;
                }
                return Ok(cur);
            }
        };
        Ok(out.with_positions(pos))
    }
}

/// Move each nonzero through `f`, which edits the multi-index in place and
/// returns false to drop the entry.
fn remap<T: Coeff>(x: &TensorElement<T>, f: impl Fn(&mut Vec<usize>) -> bool) -> Result<TensorElement<T>> {
    let space = x.space();
    let mut idx = vec![0; space.arity()];
    let mut entries = Vec::new();
    for (flat, v) in x.nonzeros() {
        space.unravel_into(flat, &mut idx);
        if f(&mut idx) {
            entries.push((space.ravel(&idx)?, v));
        }
    }
    TensorElement::from_flat(space, entries)
}

/// Sum the key index into the origin: index 0 for B1, broadcast for B2.
fn collapse_key<T: Coeff>(x: &TensorElement<T>, key: usize) -> Result<TensorElement<T>> {
    let space = x.space();
    let stride = space.strides()[key];
    let d = space.dims()[key];
    let broadcast = space.factor(key).kind() == AlgebraKind::B2;
    let mut sums: BTreeMap<usize, T> = BTreeMap::new();
    for (flat, v) in x.nonzeros() {
        let base = flat - ((flat / stride) % d) * stride;
        let e = sums.entry(base).or_insert_with(T::zero);
        *e = *e + v;
    }
    let mut entries = Vec::new();
    for (base, s) in sums {
        if broadcast {
            entries.extend((0..d).map(|l| (base + l * stride, s)));
        } else {
            entries.push((base, s));
        }
    }
    TensorElement::from_flat(space, entries)
}

fn activate<T: Coeff>(
    x: &TensorElement<T>,
    func: Activation,
    support: Option<&[Option<Vec<usize>>]>,
) -> Result<TensorElement<T>> {
    let space = x.space();
    let apply = |v: T| -> Result<T> {
        Ok(match func {
            Activation::Identity => v,
            Activation::Exp => v.exp(),
            _ => {
                let im = v.value().im;
                if im.abs() > REAL_TOL {
                    return Err(Error::RealViolation(im));
                }
                v.activate_real(func)
            }
        })
    };
    if func == Activation::Identity && support.is_none() {
        return Ok(x.clone());
    }
    let sets: Vec<Vec<usize>> = (0..space.arity())
        .map(|f| match support.and_then(|s| s[f].clone()) {
            Some(set) => set,
            None => (0..space.dims()[f]).collect(),
        })
        .collect();
    if sets.iter().any(Vec::is_empty) {
        return Ok(TensorElement::zero(space));
    }
    let mut out = Vec::new();
    let mut cur = vec![0usize; sets.len()];
    loop {
        let flat: usize = cur
            .iter()
            .enumerate()
            .map(|(f, &c)| sets[f][c] * space.strides()[f])
            .sum();
        out.push((flat, apply(x.get_flat(flat))?));
        let mut f = sets.len();
        let done = loop {
            if f == 0 {
                break true;
            }
            f -= 1;
            cur[f] += 1;
            if cur[f] < sets[f].len() {
                break false;
            }
            cur[f] = 0;
        };
        if done {
            break;
        }
    }
    TensorElement::from_flat(space, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{make_b1, make_b2, Algebra, AxiomFlags};
    use crate::scalar::Field;
    use crate::tensor::tensor_space;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn attn_space(n: usize, d: usize) -> Space {
        let b1 = Arc::new(make_b1(n).unwrap());
        let a = Arc::new(Algebra::generic("A", d, vec![], Field::Real, AxiomFlags::none()).unwrap());
        tensor_space(vec![b1.clone(), b1, a], vec![Role::Positional, Role::Positional, Role::Feature]).unwrap()
    }

    fn random(space: &Space, seed: u64) -> TensorElement {
        let mut rng = crate::rng::seeded(seed);
        let v = crate::rng::vec(&mut rng, space.size(), 1.0);
        TensorElement::from_dense(space, v.into_iter().map(c).collect()).unwrap()
    }

    #[test]
    fn flip_moves_indices() {
        let s = attn_space(5, 2);
        let x = TensorElement::from_entries(&s, vec![(vec![2, 5, 1], c(1.0))]).unwrap();
        let y = StructuralOperator::Flip { a: 0, b: 1 }.apply(&x).unwrap();
        assert_eq!(y.get(&[5, 2, 1]).unwrap(), c(1.0));
        assert_eq!(y.nnz(), 1);
    }

    #[test]
    fn causal_zeroes_future() {
        let s = attn_space(3, 1);
        let x = TensorElement::from_entries(&s, vec![(vec![1, 3, 0], c(1.0)), (vec![3, 1, 0], c(2.0))]).unwrap();
        let y = StructuralOperator::Causal { query: 0, key: 1, collapse: false }.apply(&x).unwrap();
        assert_eq!(y.get(&[1, 3, 0]).unwrap(), c(0.0));
        assert_eq!(y.get(&[3, 1, 0]).unwrap(), c(2.0));
        let z = StructuralOperator::Causal { query: 0, key: 1, collapse: true }.apply(&x).unwrap();
        assert_eq!(z.get(&[3, 0, 0]).unwrap(), c(2.0));
        assert_eq!(z.nnz(), 1);
    }

    #[test]
    fn b2_collapse_broadcasts() {
        let b2 = Arc::new(make_b2(3).unwrap());
        let s = tensor_space(vec![b2.clone(), b2], vec![Role::Positional, Role::Positional]).unwrap();
        let x = TensorElement::from_entries(&s, vec![(vec![2, 0], c(1.0)), (vec![2, 1], c(2.0)), (vec![0, 2], c(5.0))])
            .unwrap();
        let y = StructuralOperator::Causal { query: 0, key: 1, collapse: true }.apply(&x).unwrap();
        for l in 0..3 {
            assert_eq!(y.get(&[2, l]).unwrap(), c(3.0));
            assert_eq!(y.get(&[0, l]).unwrap(), c(0.0));
        }
    }

    #[test]
    fn role_and_dim_violations() {
        let s = attn_space(2, 4);
        let x = TensorElement::zero(&s);
        let r = StructuralOperator::Causal { query: 0, key: 2, collapse: false }.apply(&x);
        assert!(matches!(r, Err(Error::FactorRole { factor: 2, .. })));
        let r = StructuralOperator::Flip { a: 0, b: 2 }.apply(&x);
        assert!(matches!(r, Err(Error::DimMismatch(_))));
        let r = StructuralOperator::ScalarProj { factor: 0, keep: vec![0] }.apply(&x);
        assert!(matches!(r, Err(Error::FactorRole { .. })));
    }

    #[test]
    fn compose_laws() {
        let s = attn_space(3, 3);
        let x = random(&s, 1);
        let ff = compose(vec![StructuralOperator::Flip { a: 0, b: 1 }, StructuralOperator::Flip { a: 0, b: 1 }]);
        assert!(ff.apply(&x).unwrap().max_abs_diff(&x) <= 1e-15);
        let p = StructuralOperator::ScalarProj { factor: 2, keep: vec![0] };
        let pp = compose(vec![p.clone(), p.clone()]);
        assert_eq!(pp.apply(&x).unwrap().values(), p.apply(&x).unwrap().values());

        let mut rng = crate::rng::seeded(9);
        let m1: Vec<Vec<C64>> = crate::rng::mat(&mut rng, 3, 3, 1.0).into_iter().map(|r| r.into_iter().map(c).collect()).collect();
        let m2: Vec<Vec<C64>> = crate::rng::mat(&mut rng, 3, 3, 1.0).into_iter().map(|r| r.into_iter().map(c).collect()).collect();
        let m21: Vec<Vec<C64>> = (0..3)
            .map(|i| (0..3).map(|j| (0..3).map(|k| m2[i][k] * m1[k][j]).sum()).collect())
            .collect();
        let chain = compose(vec![
            StructuralOperator::FactorLinear { factor: 2, matrix: m1 },
            StructuralOperator::FactorLinear { factor: 2, matrix: m2 },
        ]);
        let direct = StructuralOperator::FactorLinear { factor: 2, matrix: m21 };
        for seed in 0..10 {
            let x = random(&s, 100 + seed);
            assert!(chain.apply(&x).unwrap().max_abs_diff(&direct.apply(&x).unwrap()) <= 1e-12);
        }
        let bad = compose_checked(vec![StructuralOperator::Flip { a: 1, b: 2 }], &s);
        assert!(matches!(bad, Err(Error::ChainMismatch(_))));
    }

    #[test]
    fn activations_are_pointwise() {
        let s = attn_space(2, 2);
        let x = random(&s, 4);
        for func in [Activation::Identity, Activation::Exp, Activation::Sigmoid, Activation::Elu, Activation::Relu] {
            let y = StructuralOperator::activation(func).apply(&x).unwrap();
            for (a, b) in x.values().iter().zip(y.values()) {
                assert_eq!(func.eval_real(a.re), b.re);
            }
        }
        let sup = vec![Some(vec![1]), None, Some(vec![0])];
        let y = StructuralOperator::Activation { func: Activation::Exp, support: Some(sup) }
            .apply(&TensorElement::zero(&s))
            .unwrap();
        assert_eq!(y.nnz(), 3);
        assert_eq!(y.get(&[1, 2, 0]).unwrap(), c(1.0));
    }

    #[test]
    fn normalize_rows() {
        let s = attn_space(2, 1);
        let x = TensorElement::from_entries(&s, vec![(vec![1, 1, 0], c(1.0)), (vec![1, 2, 0], c(3.0))]).unwrap();
        let y = StructuralOperator::Normalize { axis: 1 }.apply(&x).unwrap();
        assert_eq!(y.get(&[1, 1, 0]).unwrap(), c(0.25));
        assert_eq!(y.get(&[1, 2, 0]).unwrap(), c(0.75));
    }

    #[test]
    fn neighbourhood_tables() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [3.0, 0.0, 0.0]];
        let t = NeighbourTable::by_radius(&pts, 1.5);
        assert_eq!(t.neighbours(0), &[1]);
        assert!(t.neighbours(2).is_empty());
        let k = NeighbourTable::by_knn(&pts, 1);
        assert_eq!(k.neighbours(2), &[1]);
        let f = NeighbourTable::from_adjacency_text("0 1 2\n2 0\n", 3).unwrap();
        assert!(f.contains(0, 2) && f.contains(2, 0) && !f.contains(1, 0));
        assert!(matches!(NeighbourTable::from_adjacency_text("0 x\n", 3), Err(Error::Parse { line: 1, .. })));
    }
}
