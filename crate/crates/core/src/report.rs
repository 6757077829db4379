//! Verification reports: one named check per comparison, serialized as JSON.
//!
//! Reports are reproduction artifacts: they carry the experiment inputs,
//! every estimate next to its target value and tolerance, and the formula
//! the target came from. Serialization is deterministic except for the
//! `generated_unix_ms` stamp, which comparisons must strip.

use serde::{Deserialize, Serialize};
use std::time::{SystemTime, UNIX_EPOCH};

/// How a check compares estimate and target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|estimate/target - 1| <= tolerance`.
    Relative,
    /// `|estimate - target| <= tolerance`.
    Absolute,
    /// `lo <= estimate <= hi`, with `(lo, hi)` in `(target, tolerance)`.
    Interval,
    /// Boolean condition; `estimate` is 1.0 on success.
    Flag,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Closed-form expression or definition of the target value.
    pub formula: String,
    pub estimate: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
    /// Free-form context: standard errors, sample sizes, caveats.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    pub fn relative(name: &str, formula: &str, estimate: f64, target: f64, tol: f64) -> Self {
        let pass = estimate.is_finite() && (estimate / target - 1.0).abs() <= tol;
        Check {
            name: name.into(),
            formula: formula.into(),
            estimate,
            target,
            tolerance: tol,
            comparison: Comparison::Relative,
            pass,
            note: String::new(),
        }
    }

    pub fn absolute(name: &str, formula: &str, estimate: f64, target: f64, tol: f64) -> Self {
        let pass = estimate.is_finite() && (estimate - target).abs() <= tol;
        Check {
            name: name.into(),
            formula: formula.into(),
            estimate,
            target,
            tolerance: tol,
            comparison: Comparison::Absolute,
            pass,
            note: String::new(),
        }
    }

    pub fn interval(name: &str, formula: &str, estimate: f64, lo: f64, hi: f64) -> Self {
        let pass = estimate.is_finite() && lo <= estimate && estimate <= hi;
        Check {
            name: name.into(),
            formula: formula.into(),
            estimate,
            target: lo,
            tolerance: hi,
            comparison: Comparison::Interval,
            pass,
            note: String::new(),
        }
    }

    pub fn flag(name: &str, formula: &str, ok: bool) -> Self {
        Check {
            name: name.into(),
            formula: formula.into(),
            estimate: ok as u8 as f64,
            target: 1.0,
            tolerance: 0.0,
            comparison: Comparison::Flag,
            pass: ok,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub inputs: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub generated_unix_ms: u64,
}

impl Report {
    pub fn new(experiment: &str, inputs: serde_json::Value, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Report {
            experiment: experiment.into(),
            inputs,
            checks,
            pass,
            generated_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }

    /// JSON with the timestamp removed, for byte comparisons.
    pub fn to_json_stable(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serialization");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("generated_unix_ms");
        }
        serde_json::to_string_pretty(&v).expect("report serialization")
    }

    /// One `PASS`/`FAIL` line per check, plus a summary line.
    pub fn summary_lines(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.pass { "PASS" } else { "FAIL" };
            out.push_str(&format!(
                "{status} {exp}/{name}: estimate {est:.6e} target {tgt:.6e} ({cmp:?} tol {tol:.3e}){note}\n",
                exp = self.experiment,
                name = c.name,
                est = c.estimate,
                tgt = c.target,
                cmp = c.comparison,
                tol = c.tolerance,
                note = if c.note.is_empty() { String::new() } else { format!(" [{}]", c.note) },
            ));
        }
        out
    }
}
