//! The family `L = lambda a_2 + a_4` on `S` and a derivative-free local search
//! over driving functions.
//!
//! Around the Koebe control `u = pi` the search perturbs `u` by a constant
//! on each of `P` equal segments of `[0, T_c]` and maximizes
//! `Re sum conj(lambda_k) a_k(T)` with multi-start Nelder–Mead. The result is
//! a lower bound on the supremum over the perturbation family, so "no
//! improvement found" supports local maximality without proving it.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{DrivingFunction, Integrator};
use crate::error::{domain, Result};
use crate::hamiltonian::{maximize_trig, MaxAtPiRule, TrigPolynomial};
use crate::series::{CoefficientVector, FunctionalSpec};
use crate::simplex::NelderMead;

/// Margin by which the search must beat the Koebe value to count.
pub const IMPROVEMENT_MARGIN: f64 = 1e-6;

fn cubic(l: f64) -> f64 {
    ((25.0 * l + 37.0) * l + 16.0) * l + 3.0
}

fn cubic_slope(l: f64) -> f64 {
    (75.0 * l + 74.0) * l + 16.0
}

/// The real root of `25 l^3 + 37 l^2 + 16 l + 3` in `(-1, 0)`.
pub fn cubic_root_lambda0() -> f64 {
    let (mut lo, mut hi) = (-1.0, 0.0);
    // cubic(-1) = -1 < 0 < 3 = cubic(0)
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if cubic(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut l = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = cubic(l) / cubic_slope(l);
        l -= step;
        if step.abs() <= 1e-12 {
            break;
        }
    }
    l
}

/// `p_lambda(u) = -2 (cos 3u + 4 cos 2u + (9 + lambda) cos u)`.
pub fn example_polynomial(lambda: f64) -> TrigPolynomial {
    TrigPolynomial::new(vec![
        Complex64::new(-2.0 * (9.0 + lambda), 0.0),
        Complex64::new(-8.0, 0.0),
        Complex64::new(-2.0, 0.0),
    ])
    .expect("three coefficients")
}

/// `(lambda, 0, 1)`, i.e. `L = lambda a_2 + a_4`.
pub fn example_functional(lambda: f64) -> Result<FunctionalSpec> {
    FunctionalSpec::new(vec![
        Complex64::new(lambda, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(1.0, 0.0),
    ])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    /// Perturbations vanish beyond this time.
    pub control_horizon: f64,
    pub segments: usize,
    /// Base amplitude of the start patterns.
    pub epsilon0: f64,
    pub max_iterations: usize,
    pub starts: usize,
    /// Radius `rho` of the admissible set `max_k |a_k(T) - a_k^base(T)| <= rho`.
    pub neighborhood: f64,
    pub horizon: f64,
    pub step: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            control_horizon: 4.0,
            segments: 8,
            epsilon0: 0.3,
            max_iterations: 400,
            starts: 16,
            neighborhood: 0.5,
            horizon: 25.0,
            step: 0.01,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain("search horizon must be positive");
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return domain("search step must lie in (0, horizon]");
        }
        if !(self.control_horizon > 0.0 && self.control_horizon <= self.horizon) {
            return domain("control horizon must lie in (0, horizon]");
        }
        if self.segments == 0 {
            return domain("segment count must be at least 1");
        }
        if !(self.epsilon0.is_finite() && self.epsilon0 > 0.0) {
            return domain("epsilon0 must be positive");
        }
        if !(self.neighborhood > 0.0) {
            return domain("neighborhood radius must be positive");
        }
        Ok(())
    }

    /// Start `j` has amplitude `(j / 4 + 1) epsilon0`, sign `+` for even `j`,
    /// and perturbs only the first segment when `j / 2` is even, every
    /// segment otherwise.
    fn start_point(&self, j: usize) -> Vec<f64> {
        let amp = ((j / 4) as f64 + 1.0) * self.epsilon0;
        let signed = if j.is_multiple_of(2) { amp } else { -amp };
        let mut x = vec![0.0; self.segments];
        if (j / 2).is_multiple_of(2) {
            x[0] = signed;
        } else {
            x.fill(signed);
        }
        x
    }
}

/// Best point found by [`search_improvement`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub objective: f64,
    /// Objective of the unperturbed base control.
    pub baseline: f64,
    pub perturbation: Vec<f64>,
    pub driving: DrivingFunction,
    pub evaluations: usize,
}

/// `base + eps_i` on the `i`-th of `P` equal segments of `[0, T_c]`, `base`
/// beyond.
fn perturbed_driving(base: &DrivingFunction, cfg: &SearchConfig, eps: &[f64]) -> Result<DrivingFunction> {
    let width = cfg.control_horizon / cfg.segments as f64;
    let grid: Vec<f64> = (1..=cfg.segments).map(|i| i as f64 * width).collect();
    let mut breaks: Vec<f64> = match base {
        DrivingFunction::Constant { .. } => grid.clone(),
        DrivingFunction::PiecewiseConstant { breakpoints, .. } => {
            let mut all: Vec<f64> = grid.iter().chain(breakpoints).copied().collect();
            all.sort_by(f64::total_cmp);
            all.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * cfg.control_horizon);
            all
        }
        DrivingFunction::PowerSeries { .. } => return domain("search base must be constant or piecewise constant"),
    };
    breaks.retain(|&b| b > 0.0);
    let mut values = Vec::with_capacity(breaks.len() + 1);
    let mut left = 0.0;
    for &b in &breaks {
        let mid = 0.5 * (left + b);
        let seg = ((mid / width) as usize).min(cfg.segments);
        let bump = if mid < cfg.control_horizon { eps[seg] } else { 0.0 };
        values.push(base.value(mid) + bump);
        left = b;
    }
    values.push(base.value(left + 1.0));
    DrivingFunction::piecewise_constant(breaks, values)
}

fn limit(n: usize, driving: &DrivingFunction, cfg: &SearchConfig) -> Result<CoefficientVector> {
    let initial = CoefficientVector::identity(n)?;
    let traj = Integrator::new(cfg.horizon, cfg.step)
        .with_sample_every(usize::MAX)
        .run(driving, &initial, None, None)?;
    Ok(traj.final_coefficients().clone())
}

fn distance(a: &CoefficientVector, b: &CoefficientVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Multi-start Nelder–Mead over segment perturbations of `base`.
///
/// Only perturbations whose limit coefficients stay within
/// `cfg.neighborhood` of the base limit are admissible; the optimizer sees
/// the exact penalty `L - M (dist - rho)^+` with `M` above the Lipschitz
/// constant of `L`. Starts run in parallel; the reduction keeps the largest
/// admissible objective and breaks ties by the lexicographically smallest
/// perturbation, so the result is deterministic.
pub fn search_improvement(lambda: &FunctionalSpec, base: &DrivingFunction, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    base.validate()?;
    let n = lambda.order();
    let zero = vec![0.0; cfg.segments];
    let base_limit = limit(n, &perturbed_driving(base, cfg, &zero)?, cfg)?;
    let baseline = lambda.evaluate(&base_limit)?.re;
    let penalty = 10.0 * (1.0 + lambda.l1_norm());
    let solver = NelderMead {
        max_iterations: cfg.max_iterations,
        value_tol: 1e-13 * (1.0 + baseline.abs()),
        point_tol: 1e-9,
    };

    let runs: Vec<_> = (0..cfg.starts)
        .into_par_iter()
        .map(|j| {
            let mut best: Option<(Vec<f64>, f64)> = None;
            let f = |eps: &[f64]| {
                let a = limit(n, &perturbed_driving(base, cfg, eps)?, cfg)?;
                let value = lambda.evaluate(&a)?.re;
                let excess = distance(&a, &base_limit) - cfg.neighborhood;
                if excess <= 0.0 && best.as_ref().is_none_or(|(_, b)| value > *b) {
                    best = Some((eps.to_vec(), value));
                }
                Ok(value - penalty * excess.max(0.0))
            };
            let run = solver.maximize(f, &cfg.start_point(j), cfg.epsilon0)?;
            Ok((best, run.evaluations))
        })
        .collect::<Result<_>>()?;

    let evaluations = 1 + runs.iter().map(|(_, e)| e).sum::<usize>();
    let (perturbation, value) = runs
        .into_iter()
        .filter_map(|(best, _)| best)
        .chain(std::iter::once((zero, baseline)))
        .max_by(|(xa, va), (xb, vb)| va.total_cmp(vb).then_with(|| lexicographic(xb, xa)))
        .expect("baseline always present");
    Ok(SearchOutcome {
        objective: value,
        baseline,
        driving: perturbed_driving(base, cfg, &perturbation)?,
        perturbation,
        evaluations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PropositionVerdict {
    /// No improvement found under the search budget; this supports, but
    /// does not prove, local maximality of the Koebe function.
    LocalMaxAtKoebe,
    ImprovementFound,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropositionReport {
    pub lambda: f64,
    /// `Re L(k) = 2 lambda + 4`.
    pub koebe_value: f64,
    pub best_objective: f64,
    pub best_perturbation: Vec<f64>,
    pub verdict: PropositionVerdict,
    pub summary: String,
}

/// Searches around `u = pi` for `L = lambda a_2 + a_4`.
pub fn proposition1_verdict(lambda: f64, cfg: &SearchConfig) -> Result<PropositionReport> {
    if !lambda.is_finite() {
        return domain("lambda must be finite");
    }
    let functional = example_functional(lambda)?;
    let outcome = search_improvement(&functional, &DrivingFunction::constant(PI), cfg)?;
    let koebe_value = 2.0 * lambda + 4.0;
    let (verdict, summary) = if outcome.objective > koebe_value + IMPROVEMENT_MARGIN {
        (
            PropositionVerdict::ImprovementFound,
            format!("improvement of {:e} over the Koebe value", outcome.objective - koebe_value),
        )
    } else {
        (
            PropositionVerdict::LocalMaxAtKoebe,
            "no improvement found under the search budget".to_string(),
        )
    };
    Ok(PropositionReport {
        lambda,
        koebe_value,
        best_objective: outcome.objective,
        best_perturbation: outcome.perturbation,
        verdict,
        summary,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub lambda: f64,
    pub argmax: f64,
    pub p_at_pi: f64,
    pub max_p: f64,
    pub verdict: ScanVerdict,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ScanVerdict {
    MaxAtPi,
    MaxOffPi,
}

impl ScanVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::MaxAtPi => "MAX_AT_PI",
            Self::MaxOffPi => "MAX_OFF_PI",
        }
    }
}

/// Maximizes `p_lambda` for every `lambda`, in parallel, preserving input order.
pub fn scan_example(lambdas: &[f64]) -> Result<Vec<ScanRow>> {
    let rule = MaxAtPiRule::default();
    lambdas
        .par_iter()
        .map(|&lambda| {
            if !lambda.is_finite() {
                return domain("lambda must be finite");
            }
            let p = example_polynomial(lambda);
            let max = maximize_trig(&p)?;
            let verdict = if rule.accepts(&p, &max) {
                ScanVerdict::MaxAtPi
            } else {
                ScanVerdict::MaxOffPi
            };
            Ok(ScanRow {
                lambda,
                argmax: max.argmax,
                p_at_pi: p.value(PI),
                max_p: max.value,
                verdict,
            })
        })
        .collect()
}

/// CSV with header `lambda,argmax,p_at_pi,max_p,verdict`.
pub fn scan_csv(rows: &[ScanRow]) -> String {
    use crate::report::fmt_f64;
    let mut out = String::from("lambda,argmax,p_at_pi,max_p,verdict\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(r.lambda),
            fmt_f64(r.argmax),
            fmt_f64(r.p_at_pi),
            fmt_f64(r.max_p),
            r.verdict.as_str()
        ));
    }
    out
}
