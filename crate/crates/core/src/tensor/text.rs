//! Plain-text element files: `element <space>` then `<i1> .. <im> <re> <im>`
//! per nonzero, numbers with 17 significant digits.

use std::fmt::Write as _;

use super::{Space, TensorElement};
use crate::error::{Error, Result};
use crate::scalar::C64;

pub fn element_to_text(x: &TensorElement) -> String {
    let mut s = format!("element {}\n", x.space().name());
    for (f, v) in x.nonzeros() {
        for i in x.space().unravel(f) {
            write!(s, "{i} ").unwrap();
        }
        writeln!(s, "{:.16e} {:.16e}", v.re, v.im).unwrap();
    }
    s
}

pub fn element_from_text(text: &str, space: &Space) -> Result<TensorElement> {
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hn, header) = lines.next().ok_or_else(|| perr(1, "empty element file".into()))?;
    match header.split_whitespace().collect::<Vec<_>>()[..] {
        ["element", name] if name == space.name() => {}
        ["element", name] => return Err(Error::SpaceMismatch(name.to_string(), space.name().to_string())),
        _ => return Err(perr(hn, "header must be `element <space>`".into())),
    }
    let m = space.arity();
    let mut entries = Vec::new();
    for (n, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != m + 2 {
            return Err(perr(n, format!("expected {} indices and two numbers", m)));
        }
        let idx = t[..m]
            .iter()
            .map(|s| s.parse::<usize>().map_err(|_| perr(n, format!("bad index `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(n, format!("bad number `{s}`")));
        entries.push((idx, C64::new(num(t[m])?, num(t[m + 1])?)));
    }
    TensorElement::from_entries(space, entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::make_b2;
    use crate::tensor::{tensor_space, Role};
    use std::sync::Arc;

    #[test]
    fn round_trip_bits() {
        let b2 = Arc::new(make_b2(3).unwrap());
        let s = tensor_space(vec![b2.clone(), b2], vec![Role::Positional, Role::Hidden]).unwrap();
        let mut rng = crate::rng::seeded(5);
        let vals = crate::rng::vec(&mut rng, 9, 1.0);
        let x = TensorElement::from_dense(&s, vals.iter().map(|v| C64::new(*v, 0.0)).collect()).unwrap();
        let y = element_from_text(&element_to_text(&x), &s).unwrap();
        for (a, b) in x.values().iter().zip(y.values()) {
            assert_eq!(a.re.to_bits(), b.re.to_bits());
        }
        assert!(matches!(element_from_text("element other\n", &s), Err(Error::SpaceMismatch(..))));
    }
}
