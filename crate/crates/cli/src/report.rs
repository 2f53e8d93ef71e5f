//! `report.json` and golden comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorInfo {
    pub kind: String,
    pub message: String,
}

impl From<&lidskii_core::Error> for ErrorInfo {
    fn from(e: &lidskii_core::Error) -> Self {
        Self {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub pass: bool,
    pub metrics: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorInfo>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
}

impl CheckReport {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pass: true,
            metrics: BTreeMap::new(),
            error: None,
            files: Vec::new(),
        }
    }

    pub fn metric(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.metrics.insert(key.to_string(), value.into());
        self
    }

    /// Non-finite values become `null`.
    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        let v = serde_json::Number::from_f64(value).map_or(Value::Null, Value::Number);
        self.metric(key, v)
    }

    pub fn fail_with(&mut self, e: &lidskii_core::Error) -> &mut Self {
        self.pass = false;
        self.error = Some(e.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub pass: bool,
    pub checks: Vec<CheckReport>,
    pub versions: BTreeMap<String, String>,
}

impl Report {
    pub fn new(scenario: &str, checks: Vec<CheckReport>) -> Self {
        let versions = BTreeMap::from([
            ("lidskii-core".to_string(), lidskii_core::VERSION.to_string()),
            ("lidskii-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ]);
        Self {
            scenario: scenario.to_string(),
            pass: checks.iter().all(|c| c.pass),
            checks,
            versions,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// Comparison tolerance: numbers match when
/// `|a - b| ≤ abs + rel·max(|a|, |b|)`; everything else must be equal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-9 }
    }
}

/// Golden file: the expected report with its declared tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Golden {
    pub tolerance: Tolerance,
    pub report: Report,
}

fn values_match(a: &Value, b: &Value, tol: &Tolerance) -> bool {
    match (a, b) {
        (Value::Number(x), Value::Number(y)) => {
            let (x, y) = (x.as_f64().unwrap(), y.as_f64().unwrap());
            (x - y).abs() <= tol.abs + tol.rel * x.abs().max(y.abs())
        }
        (Value::Array(x), Value::Array(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_match(p, q, tol)),
        (Value::Object(x), Value::Object(y)) => {
            x.len() == y.len() && x.iter().all(|(k, v)| y.get(k).is_some_and(|w| values_match(v, w, tol)))
        }
        _ => a == b,
    }
}

/// Human-readable list of differences between `actual` and `golden`.
pub fn compare(actual: &Report, golden: &Report, tol: &Tolerance) -> Vec<String> {
    let mut diffs = Vec::new();
    if actual.pass != golden.pass {
        diffs.push(format!("pass: {} vs golden {}", actual.pass, golden.pass));
    }
    let names = |r: &Report| r.checks.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
    if names(actual) != names(golden) {
        diffs.push(format!("checks: {:?} vs golden {:?}", names(actual), names(golden)));
        return diffs;
    }
    for (a, g) in actual.checks.iter().zip(&golden.checks) {
        if a.pass != g.pass {
            diffs.push(format!("{}.pass: {} vs golden {}", a.name, a.pass, g.pass));
        }
        if a.error.as_ref().map(|e| &e.kind) != g.error.as_ref().map(|e| &e.kind) {
            diffs.push(format!("{}.error: {:?} vs golden {:?}", a.name, a.error, g.error));
        }
        for key in a.metrics.keys().chain(g.metrics.keys()).collect::<std::collections::BTreeSet<_>>() {
            match (a.metrics.get(key), g.metrics.get(key)) {
                (Some(x), Some(y)) if values_match(x, y, tol) => {}
                (x, y) => diffs.push(format!("{}.{key}: {x:?} vs golden {y:?}", a.name)),
            }
        }
    }
    diffs
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(x: f64) -> Report {
        let mut c = CheckReport::new("ode");
        c.num("max", x).metric("flag", true);
        Report::new("s", vec![c])
    }

    #[test]
    fn tolerance_applies_to_numbers_only() {
        let tol = Tolerance::default();
        assert!(compare(&report(1.0), &report(1.0 + 1e-10), &tol).is_empty());
        assert_eq!(compare(&report(1.0), &report(1.1), &tol).len(), 1);
        let mut other = report(1.0);
        other.checks[0].metric("flag", false);
        assert_eq!(compare(&report(1.0), &other, &tol).len(), 1);
        other.checks[0].pass = false;
        other.pass = false;
        assert_eq!(compare(&report(1.0), &other, &tol).len(), 3);
    }

    #[test]
    fn non_finite_becomes_null() {
        let mut c = CheckReport::new("x");
        c.num("v", f64::NAN);
        assert_eq!(c.metrics["v"], Value::Null);
    }
}
