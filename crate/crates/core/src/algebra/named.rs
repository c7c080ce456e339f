use std::sync::Arc;

use super::{Algebra, AlgebraElement, AlgebraKind, AxiomFlags};
use crate::error::{Error, Result};
use crate::scalar::{Coeff, Field, C64};

fn one() -> C64 {
    C64::new(1.0, 0.0)
}

/// The base field as a one-dimensional unital algebra.
pub fn make_field(field: Field) -> Algebra {
    let flags = AxiomFlags {
        associative: true,
        commutative: true,
        unit: Some(0),
    };
    Algebra::generic("F", 1, vec![(0, 0, 0, one())], field, flags).expect("field algebra")
}

/// Index-summing positional algebra with basis f0..fn.
///
/// `fi fj = delta_ij f0` for i, j >= 1, f0 is the unit (so f0 f0 = f0).
pub fn make_b1(n_positions: usize) -> Result<Algebra> {
    if n_positions < 1 {
        return Err(Error::InvalidDimension("B1 needs at least one position".into()));
    }
    let dim = n_positions + 1;
    let mut entries = vec![(0, 0, 0, one())];
    for i in 1..dim {
        entries.push((0, i, i, one()));
        entries.push((i, 0, i, one()));
        entries.push((i, i, 0, one()));
    }
    let flags = AxiomFlags {
        associative: false,
        commutative: true,
        unit: Some(0),
    };
    let labels = (0..dim).map(|i| format!("f{i}")).collect();
    Ok(Algebra::generic(&format!("B1_{n_positions}"), dim, entries, Field::Real, flags)?
        .with_labels(labels)?
        .with_kind(AlgebraKind::B1))
}

/// Index-preserving algebra with basis g1..gn, `ga gb = delta_ab ga`.
///
/// Storage index a holds g_{a+1}.
pub fn make_b2(n_slots: usize) -> Result<Algebra> {
    if n_slots < 1 {
        return Err(Error::InvalidDimension("B2 needs at least one slot".into()));
    }
    let entries = (0..n_slots).map(|a| (a, a, a, one())).collect();
    let flags = AxiomFlags {
        associative: true,
        commutative: true,
        unit: None,
    };
    let labels = (1..=n_slots).map(|a| format!("g{a}")).collect();
    Ok(Algebra::generic(&format!("B2_{n_slots}"), n_slots, entries, Field::Real, flags)?
        .with_labels(labels)?
        .with_kind(AlgebraKind::B2))
}

/// g0 = sum_a ga, the all-ones element of a B2 algebra.
pub fn b2_g0<T: Coeff>(algebra: &Arc<Algebra<T>>) -> AlgebraElement<T> {
    AlgebraElement {
        algebra: algebra.clone(),
        coeff: vec![T::one(); algebra.dim()],
    }
}

/// Block-diagonal direct sum; products across components vanish.
pub fn make_direct_sum<T: Coeff>(components: &[Algebra<T>]) -> Result<Algebra<T>> {
    let first = components
        .first()
        .ok_or_else(|| Error::InvalidDimension("direct sum of no components".into()))?;
    if components.iter().any(|c| c.field() != first.field()) {
        return Err(Error::FieldMismatch);
    }
    let mut entries = Vec::new();
    let mut labels = Vec::new();
    let mut trainable = Vec::new();
    let mut offset = 0;
    for (ci, c) in components.iter().enumerate() {
        for (i, j, k, v) in c.entries() {
            entries.push((i + offset, j + offset, k + offset, v));
        }
        for &(i, j, k) in c.trainable() {
            trainable.push((i + offset, j + offset, k + offset));
        }
        labels.extend(c.labels().iter().map(|l| format!("{ci}.{l}")));
        offset += c.dim();
    }
    let flags = AxiomFlags {
        associative: components.iter().all(|c| c.flags().associative),
        commutative: components.iter().all(|c| c.flags().commutative),
        unit: if components.len() == 1 { first.flags().unit } else { None },
    };
    let name = components.iter().map(|c| c.name()).collect::<Vec<_>>().join("+");
    let name = if components.len() == 1 { format!("sum({name})") } else { name };
    let alg = Algebra::generic(&name, offset, entries, first.field(), flags)?
        .with_labels(labels)?
        .with_trainable(trainable)?;
    Ok(if components.len() == 1 { alg.with_kind(first.kind()) } else { alg })
}

#[cfg(test)]
mod tests {
    use super::super::product;
    use super::*;
    use rand::Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn basis(a: &Arc<Algebra>, i: usize) -> AlgebraElement {
        AlgebraElement::basis(a, i).unwrap()
    }

    #[test]
    fn b1_relations() {
        let b1 = Arc::new(make_b1(3).unwrap());
        assert_eq!(b1.dim(), 4);
        assert_eq!(product(&basis(&b1, 1), &basis(&b1, 1)).unwrap().coeff(), basis(&b1, 0).coeff());
        assert!(product(&basis(&b1, 1), &basis(&b1, 2)).unwrap().coeff().iter().all(|v| *v == c(0.0)));
        assert_eq!(product(&basis(&b1, 0), &basis(&b1, 3)).unwrap().coeff(), basis(&b1, 3).coeff());
        assert_eq!(product(&basis(&b1, 0), &basis(&b1, 0)).unwrap().coeff(), basis(&b1, 0).coeff());
        assert_eq!(make_b1(0).unwrap_err(), Error::InvalidDimension("B1 needs at least one position".into()));
    }

    #[test]
    fn b1_is_not_associative() {
        let b1 = make_b1(2).unwrap();
        assert_eq!(b1.first_associativity_failure(), Some([1, 1, 2]));
        let flags = AxiomFlags {
            associative: true,
            commutative: true,
            unit: Some(0),
        };
        let r = Algebra::generic("b1a", 3, b1.entries(), Field::Real, flags);
        assert_eq!(
            r.unwrap_err(),
            Error::AxiomViolation {
                axiom: "associative",
                witness: vec![1, 1, 2]
            }
        );
    }

    #[test]
    fn b2_relations() {
        let b2 = Arc::new(make_b2(3).unwrap());
        assert_eq!(product(&basis(&b2, 1), &basis(&b2, 1)).unwrap().coeff(), basis(&b2, 1).coeff());
        assert!(product(&basis(&b2, 0), &basis(&b2, 1)).unwrap().coeff().iter().all(|v| *v == c(0.0)));
        let g0 = b2_g0(&b2);
        assert_eq!(product(&g0, &g0).unwrap().coeff(), g0.coeff());
        let x = AlgebraElement::new(&b2, vec![c(2.0), c(3.0), c(0.0)]).unwrap();
        let y = AlgebraElement::new(&b2, vec![c(1.0), c(-1.0), c(0.0)]).unwrap();
        assert_eq!(product(&x, &y).unwrap().coeff(), &[c(2.0), c(-3.0), c(0.0)]);
    }

    #[test]
    fn direct_sum_blocks() {
        let f = make_field(Field::Real);
        let s = Arc::new(make_direct_sum(&[f.clone(), f.clone()]).unwrap());
        assert_eq!(s.dim(), 2);
        assert!(s.terms(0, 1).is_empty());
        assert_eq!(s.terms(1, 1), &[(1, c(1.0))]);

        let one = make_direct_sum(&[make_b1(2).unwrap()]).unwrap();
        assert_eq!(one.entries(), make_b1(2).unwrap().entries());

        let parts = [make_b1(2).unwrap(), make_b2(3).unwrap(), make_b1(1).unwrap()];
        let ds = make_direct_sum(&parts).unwrap();
        let offsets = [0usize, 3, 6, 8];
        let comp = |i: usize| offsets.iter().rposition(|&o| o <= i).unwrap();
        let mut rng = crate::rng::seeded(3);
        for _ in 0..20 {
            let (i, j) = loop {
                let i = rng.gen_range(0..8);
                let j = rng.gen_range(0..8);
                if comp(i) != comp(j) {
                    break (i, j);
                }
            };
            assert!(ds.terms(i, j).is_empty());
        }
        let complex = make_field(Field::Complex);
        assert_eq!(make_direct_sum(&[f, complex]).unwrap_err(), Error::FieldMismatch);
    }
}
