//! JSON report schema shared by every command.

use std::collections::BTreeMap;

use pi_engine::autodiff::TrainTrace;
use pi_engine::interaction::Manifest;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: &str = "1.0";

/// How `max_abs_err` is compared with `tol`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    /// Pass when `max_abs_err <= tol`.
    AtMost,
    /// Negative control: pass when `max_abs_err >= tol`.
    AtLeast,
}

impl Check {
    pub fn holds(self, err: f64, tol: f64) -> bool {
        match self {
            Check::AtMost => err <= tol,
            Check::AtLeast => err >= tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    pub seed: u64,
    /// `null` when the case errored.
    pub max_abs_err: Option<f64>,
    pub tol: f64,
    pub check: Check,
    pub pass: bool,
    pub wall_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub pass: bool,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub builder: String,
    pub space: String,
    pub dims: Vec<usize>,
    pub orders: BTreeMap<String, usize>,
    pub params: BTreeMap<String, Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl From<&Manifest> for ManifestEntry {
    fn from(m: &Manifest) -> Self {
        ManifestEntry {
            builder: m.builder.clone(),
            space: m.space.clone(),
            dims: m.dims.clone(),
            orders: m.orders.clone(),
            params: m.params.clone(),
            truncation: m.truncation.clone(),
            notes: m.notes.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: usize,
    pub loss: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
}

pub fn trace_points(t: &TrainTrace) -> Vec<TracePoint> {
    t.records
        .iter()
        .map(|r| TracePoint {
            step: r.step,
            loss: r.loss,
            metrics: r.metrics.clone(),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: String,
    pub command: String,
    pub suite: String,
    pub seed: u64,
    pub cases: Vec<Case>,
    pub summary: Summary,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub manifests: Vec<ManifestEntry>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metrics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub traces: BTreeMap<String, Vec<TracePoint>>,
}

impl Report {
    pub fn new(command: &str, suite: &str, seed: u64, cases: Vec<Case>, wall_ms: f64) -> Self {
        let passed = cases.iter().filter(|c| c.pass).count();
        Report {
            schema_version: SCHEMA_VERSION.into(),
            command: command.into(),
            suite: suite.into(),
            seed,
            summary: Summary {
                total: cases.len(),
                passed,
                failed: cases.len() - passed,
                pass: passed == cases.len(),
                wall_ms,
            },
            cases,
            manifests: Vec::new(),
            metrics: BTreeMap::new(),
            traces: BTreeMap::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.summary.pass
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// The report with every timing field zeroed.
    pub fn without_timing(&self) -> Report {
        let mut r = self.clone();
        r.summary.wall_ms = 0.0;
        r.cases.iter_mut().for_each(|c| c.wall_ms = 0.0);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case(pass: bool) -> Case {
        Case {
            name: "c".into(),
            seed: 1,
            max_abs_err: Some(0.0),
            tol: 1e-12,
            check: Check::AtMost,
            pass,
            wall_ms: 3.5,
            error: None,
        }
    }

    #[test]
    fn summary_counts_and_round_trips() {
        let r = Report::new("verify", "conv", 7, vec![case(true), case(false)], 9.0);
        assert_eq!((r.summary.passed, r.summary.failed, r.pass()), (1, 1, false));
        let back: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_json().contains("\"schema_version\": \"1.0\""));
    }

    #[test]
    fn timing_is_stripped() {
        let r = Report::new("verify", "conv", 7, vec![case(true)], 9.0).without_timing();
        assert_eq!((r.summary.wall_ms, r.cases[0].wall_ms), (0.0, 0.0));
    }

    #[test]
    fn negative_controls_pass_above() {
        assert!(Check::AtLeast.holds(1e-2, 1e-3));
        assert!(!Check::AtLeast.holds(1e-9, 1e-3));
    }
}
