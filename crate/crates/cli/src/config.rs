//! `key = value` run configuration with one level of `[section]` headers.
//!
//! Grammar, one item per line:
//!
//! ```text
//! line    := blank | comment | header | entry
//! comment := ('#' | ';') any*
//! header  := '[' name ']'
//! entry   := key '=' value
//! ```
//!
//! Entries before the first header belong to `[run]`. Keys not listed in
//! [`SCHEMA`] are rejected, as are tolerances that are not positive.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    /// Strictly positive float.
    Tol,
    Text,
}

/// Every accepted `(section, key, kind)`.
pub const SCHEMA: &[(&str, &str, Kind)] = &[
    ("run", "suite", Kind::Text),
    ("run", "seed", Kind::Int),
    ("run", "jobs", Kind::Int),
    ("run", "tol_scale", Kind::Tol),
    ("run", "out", Kind::Text),
    ("tolerances", "conv", Kind::Tol),
    ("tolerances", "attention", Kind::Tol),
    ("tolerances", "dynamics", Kind::Tol),
    ("tolerances", "mamba_gating", Kind::Tol),
    ("tolerances", "tpa", Kind::Tol),
    ("tolerances", "geometric", Kind::Tol),
    ("tolerances", "multiply", Kind::Tol),
    ("tolerances", "cg", Kind::Tol),
    ("tolerances", "wigner_unitarity", Kind::Tol),
    ("tolerances", "wigner_homomorphism", Kind::Tol),
    ("tolerances", "compat", Kind::Tol),
    ("tolerances", "translation", Kind::Tol),
    ("tolerances", "so2", Kind::Tol),
    ("tolerances", "so3", Kind::Tol),
    ("tolerances", "negative_control", Kind::Tol),
    ("tolerances", "gradient", Kind::Tol),
    ("tolerances", "oracle", Kind::Tol),
    ("conv", "cases", Kind::Int),
    ("conv", "size", Kind::Int),
    ("conv", "kernel", Kind::Int),
    ("attention", "seeds", Kind::Int),
    ("attention", "n", Kind::Int),
    ("attention", "d", Kind::Int),
    ("dynamics", "seeds", Kind::Int),
    ("dynamics", "d", Kind::Int),
    ("dynamics", "n", Kind::Int),
    ("dynamics", "steps", Kind::Int),
    ("dynamics", "dt", Kind::Float),
    ("equivariance", "trials", Kind::Int),
    ("equivariance", "rotations", Kind::Int),
    ("equivariance", "l_max", Kind::Int),
    ("equivariance", "points", Kind::Int),
    ("repr", "l_max", Kind::Int),
    ("repr", "pairs", Kind::Int),
    ("gradients", "samples", Kind::Int),
    ("order", "n", Kind::Int),
    ("order", "d", Kind::Int),
    ("order", "heads", Kind::Int),
    ("order", "rank", Kind::Int),
    ("order", "l_max", Kind::Int),
    ("order", "points", Kind::Int),
    ("symreg-conv", "size", Kind::Int),
    ("symreg-conv", "kernel", Kind::Int),
    ("symreg-conv", "n_train", Kind::Int),
    ("symreg-conv", "n_val", Kind::Int),
    ("symreg-conv", "init_noise", Kind::Float),
    ("symreg-conv", "mu", Kind::Float),
    ("symreg-conv", "steps", Kind::Int),
    ("symreg-conv", "lr", Kind::Float),
    ("symreg-conv", "momentum", Kind::Float),
    ("rankR-copy", "len", Kind::Int),
    ("rankR-copy", "n_seq", Kind::Int),
    ("rankR-copy", "init_scale", Kind::Float),
    ("rankR-copy", "steps", Kind::Int),
    ("rankR-copy", "lr", Kind::Float),
    ("rankR-copy", "momentum", Kind::Float),
    ("rankR-copy", "seeds", Kind::Int),
    ("replacement-mamba", "n", Kind::Int),
    ("replacement-mamba", "len", Kind::Int),
    ("replacement-mamba", "n_seq", Kind::Int),
    ("replacement-mamba", "mark_prob", Kind::Float),
    ("replacement-mamba", "steps", Kind::Int),
    ("replacement-mamba", "lr", Kind::Float),
    ("replacement-mamba", "momentum", Kind::Float),
    ("replacement-mamba", "seeds", Kind::Int),
];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "config line {l}, key `{k}`: {}", self.msg),
            (Some(l), None) => write!(f, "config line {l}: {}", self.msg),
            (None, Some(k)) => write!(f, "config key `{k}`: {}", self.msg),
            (None, None) => write!(f, "config: {}", self.msg),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: usize, key: Option<&str>, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line),
        key: key.map(str::to_string),
        msg: msg.into(),
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<(String, String), String>,
}

fn kind_of(section: &str, key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(s, k, _)| *s == section && *k == key).map(|e| e.2)
}

fn check_value(kind: Kind, v: &str) -> Result<(), String> {
    match kind {
        Kind::Int => v.parse::<u64>().map(|_| ()).map_err(|_| format!("`{v}` is not a non-negative integer")),
        Kind::Float => match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(()),
            _ => Err(format!("`{v}` is not a finite number")),
        },
        Kind::Tol => match v.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(()),
            Ok(_) => Err(format!("tolerance `{v}` must be positive")),
            Err(_) => Err(format!("`{v}` is not a number")),
        },
        Kind::Text => Ok(()),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut section = "run".to_string();
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(n, None, "unterminated section header"))?
                    .trim();
                if name.is_empty() || name.contains(['[', ']', '.']) {
                    return Err(err(n, None, format!("bad section name `{name}`")));
                }
                if !SCHEMA.iter().any(|(s, _, _)| *s == name) {
                    return Err(err(n, None, format!("unknown section `[{name}]`")));
                }
                section = name.to_string();
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(n, None, "expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err(n, None, "empty key"));
            }
            let kind = kind_of(&section, k).ok_or_else(|| err(n, Some(k), format!("unknown key in [{section}]")))?;
            check_value(kind, v).map_err(|m| err(n, Some(k), m))?;
            if cfg.values.insert((section.clone(), k.to_string()), v.to_string()).is_some() {
                return Err(err(n, Some(k), "duplicate key"));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            key: None,
            msg: format!("cannot read {}: {e}", path.display()),
        })?;
        Self::parse(&text)
    }

    /// Set a value as if it had been read from a file.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let kind = kind_of(section, key).ok_or_else(|| ConfigError {
            line: None,
            key: Some(key.into()),
            msg: format!("unknown key in [{section}]"),
        })?;
        check_value(kind, value).map_err(|msg| ConfigError {
            line: None,
            key: Some(key.into()),
            msg,
        })?;
        self.values.insert((section.into(), key.into()), value.into());
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.values.get(&(section.to_string(), key.to_string())).map(String::as_str)
    }

    pub fn int(&self, section: &str, key: &str, default: usize) -> usize {
        self.get(section, key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn u64(&self, section: &str, key: &str, default: u64) -> u64 {
        self.get(section, key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    pub fn float(&self, section: &str, key: &str, default: f64) -> f64 {
        self.get(section, key).and_then(|v| v.parse().ok()).unwrap_or(default)
    }

    /// A named tolerance times `[run] tol_scale`.
    pub fn tol(&self, name: &str, default: f64) -> f64 {
        self.float("tolerances", name, default) * self.float("run", "tol_scale", 1.0)
    }

    pub fn text(&self, section: &str, key: &str) -> Option<String> {
        self.get(section, key).map(str::to_string)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc = include_str!("../../../docs/config.md");
        let start = doc.find("```ini").unwrap() + 6;
        let end = start + doc[start..].find("```").unwrap();
        let c = RunConfig::parse(&doc[start..end]).unwrap();
        assert_eq!(c.tol("conv", 1e-12), 1e-11);
        assert_eq!(c.int("rankR-copy", "seeds", 5), 3);
    }

    #[test]
    fn parses_sections_and_comments() {
        let c = RunConfig::parse("seed = 3\n# note\n[conv]\ncases = 5\n\n[tolerances]\nconv = 1e-11\n").unwrap();
        assert_eq!(c.u64("run", "seed", 0), 3);
        assert_eq!(c.int("conv", "cases", 30), 5);
        assert_eq!(c.tol("conv", 1.0), 1e-11);
        assert_eq!(c.int("attention", "n", 6), 6);
    }

    #[test]
    fn rejects_unknown_key_with_line() {
        let e = RunConfig::parse("[conv]\ncases = 5\nkernal = 3\n").unwrap_err();
        assert_eq!(e.line, Some(3));
        assert_eq!(e.key.as_deref(), Some("kernal"));
        assert!(e.to_string().contains("line 3"));
    }

    #[test]
    fn rejects_bad_values_and_structure() {
        for bad in [
            "[tolerances]\nconv = 0\n",
            "[tolerances]\nso3 = -1e-6\n",
            "[conv]\ncases = many\n",
            "[conv\n",
            "[nowhere]\n",
            "[a.b]\n",
            "just words\n",
            "seed = 1\nseed = 2\n",
        ] {
            assert!(RunConfig::parse(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn tol_scale_multiplies() {
        let c = RunConfig::parse("tol_scale = 10\n").unwrap();
        assert!((c.tol("conv", 1e-12) - 1e-11).abs() < 1e-25);
    }
}
