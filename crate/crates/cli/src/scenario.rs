//! Scenario files: fixture, operator function, angles, time grid and the
//! checks to run.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use lidskii_core::contour::default_varsigma;
use lidskii_core::fixtures::FixtureRecipe;
use lidskii_core::jordan::{extract_root_system, DEFAULT_EXTRACT_TOL};
use lidskii_core::matrixcore::{seeded_rng, unit_vector, OperatorJson};
use lidskii_core::{CVector, Complex64, DenseOperator, JordanSystem, LaurentFunction};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Residue,
    Grouping,
    Ode,
    Contraction,
    Initial,
    Tails,
    Stats,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::Residue,
        Check::Grouping,
        Check::Ode,
        Check::Contraction,
        Check::Initial,
        Check::Tails,
        Check::Stats,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Check::Residue => "residue",
            Check::Grouping => "grouping",
            Check::Ode => "ode",
            Check::Contraction => "contraction",
            Check::Initial => "initial",
            Check::Tails => "tails",
            Check::Stats => "stats",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        Check::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| CliError::Parse(format!("unknown check '{s}'")))
    }
}

/// Either a synthesized recipe (root system known exactly) or an explicit
/// matrix (root system extracted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum FixtureSource {
    Recipe(FixtureRecipe),
    Matrix(OperatorJson),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorJson {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub fixture: FixtureSource,
    pub phi: LaurentFunction,
    pub theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varsigma: Option<f64>,
    pub t_grid: Vec<f64>,
    pub checks: BTreeSet<Check>,
    /// Explicit initial vector; takes precedence over `h_seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<VectorJson>,
    #[serde(default)]
    pub h_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Parse(m) => CliError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Parse(m.to_string()));
        if self.t_grid.is_empty() {
            return bad("t_grid must be nonempty");
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return bad("t_grid entries must be positive and finite");
        }
        if self.checks.is_empty() {
            return bad("checks must be nonempty");
        }
        if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
            return bad("theta must lie in (0, pi/2)");
        }
        if let Some(v) = self.varsigma {
            if !(v > 0.0 && self.theta + v < std::f64::consts::FRAC_PI_2) {
                return bad("varsigma must be positive with theta + varsigma < pi/2");
            }
        }
        if let Some(h) = &self.h {
            if h.re.len() != h.im.len() {
                return bad("h.re and h.im differ in length");
            }
        }
        Ok(())
    }

    pub fn varsigma(&self) -> f64 {
        self.varsigma.unwrap_or_else(|| default_varsigma(self.theta, &self.phi))
    }

    /// Sorted, deduplicated time grid.
    pub fn sorted_t_grid(&self) -> Vec<f64> {
        let mut t = self.t_grid.clone();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    pub fn build_fixture(&self) -> Result<(DenseOperator, JordanSystem), CliError> {
        match &self.fixture {
            FixtureSource::Recipe(r) => Ok(r.build()?),
            FixtureSource::Matrix(m) => {
                let b = DenseOperator::from_json(m)?;
                let sys = extract_root_system(&b, DEFAULT_EXTRACT_TOL)?;
                Ok((b, sys))
            }
        }
    }

    pub fn initial_vector(&self, dim: usize) -> Result<CVector, CliError> {
        match &self.h {
            Some(h) => {
                if h.re.len() != dim {
                    return Err(CliError::Parse(format!("h has length {}, fixture dim is {dim}", h.re.len())));
                }
                Ok(CVector::from_iterator(
                    dim,
                    h.re.iter().zip(&h.im).map(|(r, i)| Complex64::new(*r, *i)),
                ))
            }
            None => Ok(unit_vector(&mut seeded_rng(self.h_seed), dim)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIVIAL: &str = r#"{
        "name": "trivial",
        "fixture": {"matrix": {"dim": 1, "re": [1.0], "im": [0.0]}},
        "phi": {"s": 1, "Np": 0, "coeffs": [{"n": 1, "re": 1.0, "im": 0.0}]},
        "theta": 0.3,
        "t_grid": [0.1, 1.0],
        "checks": ["ode"]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let s = Scenario::from_json(TRIVIAL).unwrap();
        assert_eq!(s.checks.iter().copied().collect::<Vec<_>>(), vec![Check::Ode]);
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        let (b, sys) = s.build_fixture().unwrap();
        assert_eq!(b.dim(), 1);
        assert_eq!(sys.dim(), 1);
        assert!((s.initial_vector(1).unwrap().norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        for (from, to) in [
            (r#"["ode"]"#, r#"["ode", "plot"]"#),
            (r#"["ode"]"#, "[]"),
            ("[0.1, 1.0]", "[]"),
            ("[0.1, 1.0]", "[0.0, 1.0]"),
            ("\"theta\": 0.3", "\"theta\": 2.0"),
            ("\"name\"", "\"colour\": 1, \"name\""),
        ] {
            let text = TRIVIAL.replace(from, to);
            assert!(matches!(Scenario::from_json(&text), Err(CliError::Parse(_))), "{to}");
        }
    }
}
