//! JSON scenario files for the `loewner` binary.
//!
//! Unknown fields are rejected. Errors carry the line of the offending input:
//! parse errors use the parser position, validation errors the line where the
//! offending key first appears.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conditions::{CheckSettings, Tolerances};
use crate::dynamics::{DrivingFunction, DEFAULT_HORIZON, DEFAULT_STEP};
use crate::hamiltonian::MaxAtPiRule;
use crate::search::SearchConfig;
use crate::series::{koebe_coefficients, CoefficientVector, FunctionalSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientToken {
    Koebe,
}

/// `"koebe"` or an explicit list `[[re, im], ...]` of `a_1..a_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefficientSource {
    Token(CoefficientToken),
    Explicit(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleSettings {
    #[serde(default)]
    pub lambdas: Vec<f64>,
}

fn default_true() -> bool {
    true
}

/// Raw scenario as written in the file. Every field is optional; each
/// subcommand states what it needs through [`ScenarioConfig::resolve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub n: Option<usize>,
    /// `lambda_2..lambda_n` as `[re, im]` pairs.
    #[serde(default)]
    pub lambda: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub mu: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub a: Option<CoefficientSource>,
    #[serde(default)]
    pub driving: Option<DrivingFunction>,
    #[serde(default)]
    pub horizon: Option<f64>,
    #[serde(default)]
    pub step: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default = "default_true")]
    pub normalize_rotation: bool,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub example: ExampleSettings,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: {}", self.message),
            None => write!(f, "config error: {}", self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// What a subcommand requires from the scenario.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Needs {
    pub order: bool,
    pub lambda: bool,
    pub mu: bool,
    pub a: bool,
}

/// Validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub n: Option<usize>,
    pub lambda: Option<FunctionalSpec>,
    pub mu: Option<FunctionalSpec>,
    pub a: Option<CoefficientVector>,
    pub driving: DrivingFunction,
    pub horizon: f64,
    pub step: f64,
    pub check: CheckSettings,
    pub search: SearchConfig,
    pub example_lambdas: Vec<f64>,
}

fn complex_list(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            line: (e.line() > 0).then_some(e.line()),
            message: e.to_string(),
        })
    }

    /// Validates every field against the type invariants.
    pub fn resolve(&self, text: &str, needs: Needs) -> Result<Scenario, ConfigError> {
        let fail = |key: &str, message: String| ConfigError {
            line: key_line(text, key),
            message,
        };

        let inferred = self
            .n
            .or_else(|| self.lambda.as_ref().map(|l| l.len() + 1))
            .or_else(|| self.mu.as_ref().map(|m| m.len() + 1))
            .or_else(|| match &self.a {
                Some(CoefficientSource::Explicit(v)) => Some(v.len()),
                _ => None,
            });
        let n = match inferred {
            Some(n) if n < 2 => return Err(fail("n", format!("order n must be at least 2, got {n}"))),
            Some(n) => n,
            None if needs.order || needs.lambda || needs.mu || needs.a => {
                return Err(fail("n", "order n is required (directly or through lambda, mu or a)".into()))
            }
            None => 0,
        };

        let functional = |key: &str, value: &Option<Vec<[f64; 2]>>, required: bool| -> Result<Option<FunctionalSpec>, ConfigError> {
            match value {
                None if required => Err(fail(key, format!("field `{key}` is required"))),
                None => Ok(None),
                Some(v) => {
                    if v.len() + 1 != n {
                        return Err(fail(key, format!("`{key}` must list {} coefficients for n = {n}, got {}", n - 1, v.len())));
                    }
                    FunctionalSpec::new(complex_list(v)).map(Some).map_err(|e| fail(key, format!("`{key}`: {e}")))
                }
            }
        };
        let lambda = functional("lambda", &self.lambda, needs.lambda)?;
        let mu = functional("mu", &self.mu, needs.mu)?;

        let a = match &self.a {
            None if needs.a => return Err(fail("a", "field `a` is required".into())),
            None => None,
            Some(CoefficientSource::Token(CoefficientToken::Koebe)) => {
                Some(koebe_coefficients(n).map_err(|e| fail("a", format!("`a`: {e}")))?)
            }
            Some(CoefficientSource::Explicit(v)) => {
                if v.len() != n {
                    return Err(fail("a", format!("`a` must list {n} coefficients a_1..a_n, got {}", v.len())));
                }
                Some(CoefficientVector::new(complex_list(v)).map_err(|e| fail("a", format!("`a`: {e}")))?)
            }
        };

        let driving = self.driving.clone().unwrap_or(DrivingFunction::Constant { value: PI });
        driving.validate().map_err(|e| fail("driving", format!("`driving`: {e}")))?;

        let horizon = self.horizon.unwrap_or(DEFAULT_HORIZON);
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(fail("horizon", format!("horizon must be positive and finite, got {horizon}")));
        }
        let step = self.step.unwrap_or(DEFAULT_STEP);
        if !(step > 0.0 && step <= horizon) {
            return Err(fail("step", format!("step must lie in (0, horizon], got {step}")));
        }

        let t = &self.tolerances;
        for (name, v) in [("residual", t.residual), ("degeneracy", t.degeneracy), ("convergence", t.convergence)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(fail(name, format!("tolerance `{name}` must be positive and finite, got {v}")));
            }
        }
        if self.m_max == Some(0) {
            return Err(fail("m_max", "m_max must be at least 1".into()));
        }
        self.search.validate().map_err(|e| fail("search", format!("`search`: {e}")))?;
        if self.example.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(fail("lambdas", "example lambdas must be finite".into()));
        }

        Ok(Scenario {
            n: inferred,
            lambda,
            mu,
            a,
            driving,
            horizon,
            step,
            check: CheckSettings {
                tolerances: self.tolerances,
                m_max: self.m_max,
                normalize_rotation: self.normalize_rotation,
                rule: MaxAtPiRule::default(),
            },
            search: self.search.clone(),
            example_lambdas: self.example.lambdas.clone(),
        })
    }
}

/// 1-based line of the first occurrence of `"key"` as an object key.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| {
        l.match_indices(&needle)
            .any(|(i, _)| l[i + needle.len()..].trim_start().starts_with(':'))
    })
    .map(|i| i + 1)
}

/// Parses and resolves in one go.
pub fn load(text: &str, needs: Needs) -> Result<Scenario, ConfigError> {
    ScenarioConfig::parse(text)?.resolve(text, needs)
}
