//! Plain-text algebra files.
//!
//! ```text
//! algebra <name> dim=<d> field=<real|complex> flags=<list|none>
//! <i> <j> <k> <re> <im>
//! ```
//!
//! `flags` is a comma list drawn from `associative`, `commutative`,
//! `unit:<u>`, `kind:b1`, `kind:b2`. Numbers are written with 17 significant
//! digits so a write/read cycle is bit-exact. Blank lines and lines starting
//! with `#` are ignored.

use std::fmt::Write as _;

use super::{Algebra, AlgebraKind, AxiomFlags};
use crate::error::{Error, Result};
use crate::scalar::{Field, C64};

pub fn algebra_to_text(a: &Algebra) -> String {
    let mut flags = Vec::new();
    let f = a.flags();
    if f.associative {
        flags.push("associative".to_string());
    }
    if f.commutative {
        flags.push("commutative".to_string());
    }
    if let Some(u) = f.unit {
        flags.push(format!("unit:{u}"));
    }
    match a.kind() {
        AlgebraKind::B1 => flags.push("kind:b1".into()),
        AlgebraKind::B2 => flags.push("kind:b2".into()),
        _ => {}
    }
    let flags = if flags.is_empty() { "none".to_string() } else { flags.join(",") };
    let mut s = format!(
        "algebra {} dim={} field={} flags={}\n",
        a.name(),
        a.dim(),
        a.field().name(),
        flags
    );
    for (i, j, k, v) in a.entries() {
        writeln!(s, "{i} {j} {k} {:.16e} {:.16e}", v.re, v.im).unwrap();
    }
    s
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

fn key_value<'a>(tok: &'a str, key: &str, line: usize) -> Result<&'a str> {
    tok.strip_prefix(key)
        .and_then(|r| r.strip_prefix('='))
        .ok_or_else(|| perr(line, format!("expected `{key}=...`, found `{tok}`")))
}

pub fn algebra_from_text(text: &str) -> Result<Algebra> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hn, header) = lines.next().ok_or_else(|| perr(1, "empty algebra file"))?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 5 || toks[0] != "algebra" {
        return Err(perr(hn, "header must be `algebra <name> dim= field= flags=`"));
    }
    let name = toks[1];
    let dim: usize = key_value(toks[2], "dim", hn)?
        .parse()
        .map_err(|_| perr(hn, "dim is not an integer"))?;
    let field = match key_value(toks[3], "field", hn)? {
        "real" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(perr(hn, format!("unknown field `{other}`"))),
    };
    let mut flags = AxiomFlags::none();
    let mut kind = AlgebraKind::Generic;
    let flag_str = key_value(toks[4], "flags", hn)?;
    if flag_str != "none" {
        for f in flag_str.split(',') {
            match f {
                "associative" => flags.associative = true,
                "commutative" => flags.commutative = true,
                "kind:b1" => kind = AlgebraKind::B1,
                "kind:b2" => kind = AlgebraKind::B2,
                _ => {
                    let u = f
                        .strip_prefix("unit:")
                        .and_then(|u| u.parse().ok())
                        .ok_or_else(|| perr(hn, format!("unknown flag `{f}`")))?;
                    flags.unit = Some(u);
                }
            }
        }
    }
    let mut entries = Vec::new();
    for (n, l) in lines {
        let t: Vec<&str> = l.split_whitespace().collect();
        if t.len() != 5 {
            return Err(perr(n, "entry must be `<i> <j> <k> <re> <im>`"));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| perr(n, format!("bad index `{s}`")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(n, format!("bad number `{s}`")));
        entries.push((idx(t[0])?, idx(t[1])?, idx(t[2])?, C64::new(num(t[3])?, num(t[4])?)));
    }
    Ok(Algebra::generic(name, dim, entries, field, flags)?.with_kind(kind))
}

#[cfg(test)]
mod tests {
    use super::super::{make_b1, make_b2};
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let entries = vec![
            (0, 1, 2, C64::new(0.1, -1.0 / 3.0)),
            (2, 2, 0, C64::new(std::f64::consts::PI, 1e-300)),
            (1, 0, 1, C64::new(-0.0, 6.02214076e23)),
        ];
        let a = Algebra::generic("odd", 3, entries, Field::Complex, AxiomFlags::none()).unwrap();
        let back = algebra_from_text(&algebra_to_text(&a)).unwrap();
        assert_eq!(back.name(), "odd");
        for ((i, j, k, v), (i2, j2, k2, v2)) in a.entries().into_iter().zip(back.entries()) {
            assert_eq!((i, j, k), (i2, j2, k2));
            assert_eq!(v.re.to_bits(), v2.re.to_bits());
            assert_eq!(v.im.to_bits(), v2.im.to_bits());
        }
    }

    #[test]
    fn named_algebras_round_trip() {
        for a in [make_b1(3).unwrap(), make_b2(4).unwrap()] {
            let t = algebra_to_text(&a);
            let b = algebra_from_text(&t).unwrap();
            assert_eq!(b.kind(), a.kind());
            assert_eq!(b.flags(), a.flags());
            assert_eq!(algebra_to_text(&b), t);
        }
    }

    #[test]
    fn malformed_files_report_line() {
        let bad = "algebra x dim=2 field=real flags=none\n0 0 0 1.0\n";
        assert!(matches!(algebra_from_text(bad), Err(Error::Parse { line: 2, .. })));
        let bad = "# comment\nalgebra x dim=two field=real flags=none\n";
        assert!(matches!(algebra_from_text(bad), Err(Error::Parse { line: 2, .. })));
        let bad = "algebra x dim=1 field=real flags=shiny\n";
        assert!(matches!(algebra_from_text(bad), Err(Error::Parse { line: 1, .. })));
    }
}
