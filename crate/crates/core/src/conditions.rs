//! Sufficient and necessary conditions for a common extremal function of two
//! coefficient functionals.
//!
//! Everything here is evaluated at `t = 0`, where `a = a^0` and the adjoint
//! starts from [`lemma1_initial_adjoint`]. For a blend
//! `nu(alpha) = (1 - alpha) lambda + alpha mu` the conditions reduce to the
//! alternating moments
//!
//! ```text
//! D(alpha)   = sum_k (-1)^k (k-1)^2     Re psi_k(alpha)
//! N_m(alpha) = sum_k (-1)^k (k-1)^{m+1} Im psi_k(alpha)
//! ```
//!
//! with `H_uu(0, a^0, psi, pi) = -2 D` and
//! `H_{u t^m}(0, a^0, psi, pi) = 2 (-1)^m N_m`, so that
//! `u^{(m)}(0) = (-1)^m N_m / D`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::AdjointVector;
use crate::error::{Error, Result};
use crate::hamiltonian::{hamiltonian_mixed, hamiltonian_scale, maximize_trig, theorem1_polynomial, MaxAtPiRule};
use crate::series::{
    blend_functionals, check_orders, rotate_functional, rotate_pair, CoefficientVector, FunctionalSpec, RotationAngle,
};

/// Blend parameters at which alpha-dependent quantities are sampled.
pub const ALPHA_SAMPLES: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Initial adjoint `conj(Psi_k(0)) = sum_{j=1}^{n-k+1} conj(lambda_{j+k-1}) j a_j`
/// for `k = 2..n`, where `a` holds the limit coefficients; `conj(Psi_1(0))`
/// is set to zero (it is decoupled from every other quantity).
pub fn lemma1_initial_adjoint(lambda: &FunctionalSpec, a_inf: &CoefficientVector) -> Result<AdjointVector> {
    check_orders(lambda.order(), a_inf.order())?;
    let n = a_inf.order();
    let mut psi = vec![Complex64::new(0.0, 0.0); n];
    for (k, slot) in psi.iter_mut().enumerate().skip(1).map(|(i, p)| (i + 1, p)) {
        *slot = (1..=n - k + 1)
            .map(|j| lambda.get(j + k - 1).conj() * j as f64 * a_inf.get(j))
            .sum();
    }
    AdjointVector::new(psi)
}

/// `sum_{k=2}^n (-1)^k (k-1)^power psi_k`.
fn alternating_moment(psi: &AdjointVector, power: u32) -> Complex64 {
    (2..=psi.order())
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            psi.get(k) * (sign * ((k - 1) as f64).powi(power as i32))
        })
        .sum()
}

/// `sum_{k=2}^n (k-1)^power |psi_k|`, the magnitude scale of the moment.
fn moment_scale(psi: &AdjointVector, power: u32) -> f64 {
    (2..=psi.order()).map(|k| ((k - 1) as f64).powi(power as i32) * psi.get(k).norm()).sum()
}

fn blended_adjoint(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    alpha: f64,
    a_inf: &CoefficientVector,
) -> Result<AdjointVector> {
    lemma1_initial_adjoint(&blend_functionals(lambda, mu, alpha)?, a_inf)
}

/// Residual tolerances. Residuals are compared against `residual` times the
/// l1 norm of the functional(s) involved, which is the same as an absolute
/// tolerance on inputs scaled to `sum |lambda_k| = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: f64,
    /// Relative threshold below which `H_uu` (equivalently `D`) counts as zero.
    pub degeneracy: f64,
    /// Tail bound required for limit coefficients to count as converged.
    pub convergence: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            residual: 1e-9,
            degeneracy: 1e-8,
            convergence: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Th1Report {
    pub passed: bool,
    pub argmax: Option<f64>,
    pub max_value: Option<f64>,
    pub value_at_pi: Option<f64>,
    pub gap: Option<f64>,
    pub reason: Option<String>,
}

/// Checks that the trigonometric polynomial built from `(lambda, a)` attains
/// its global maximum at `u = pi`.
pub fn check_th1(lambda: &FunctionalSpec, a_inf: &CoefficientVector, rule: &MaxAtPiRule) -> Result<Th1Report> {
    let p = theorem1_polynomial(lambda, a_inf)?;
    match maximize_trig(&p) {
        Ok(max) => {
            let passed = rule.accepts(&p, &max);
            let reason = (!passed).then(|| format!("maximum attained at u = {} instead of pi", max.argmax));
            Ok(Th1Report {
                passed,
                argmax: Some(max.argmax),
                max_value: Some(max.value),
                value_at_pi: Some(p.value(PI)),
                gap: Some(max.second_best_gap),
                reason,
            })
        }
        Err(Error::DegeneratePolynomial) => Ok(Th1Report {
            passed: false,
            argmax: None,
            max_value: None,
            value_at_pi: None,
            gap: None,
            reason: Some("trigonometric polynomial vanishes identically".into()),
        }),
        Err(e) => Err(e),
    }
}

/// `D(alpha)` for the blend of `lambda` and `mu`.
pub fn th2_denominator(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    alpha: f64,
    a_inf: &CoefficientVector,
) -> Result<f64> {
    Ok(alternating_moment(&blended_adjoint(lambda, mu, alpha, a_inf)?, 2).re)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Th2Report {
    pub passed: bool,
    /// `D(0)`.
    pub d0: f64,
    /// `D(1)`.
    pub d1: f64,
}

/// `D` is affine in `alpha`, so it stays away from zero on `[0, 1]` iff the
/// endpoint values share a sign. Each endpoint must exceed `tol` times its
/// magnitude scale.
pub fn check_th2(lambda: &FunctionalSpec, mu: &FunctionalSpec, a_inf: &CoefficientVector, tol: f64) -> Result<Th2Report> {
    let psi0 = lemma1_initial_adjoint(lambda, a_inf)?;
    let psi1 = lemma1_initial_adjoint(mu, a_inf)?;
    let d0 = alternating_moment(&psi0, 2).re;
    let d1 = alternating_moment(&psi1, 2).re;
    let clear0 = d0.abs() > tol * moment_scale(&psi0, 2);
    let clear1 = d1.abs() > tol * moment_scale(&psi1, 2);
    Ok(Th2Report {
        passed: clear0 && clear1 && d0.signum() == d1.signum(),
        d0,
        d1,
    })
}

/// `sum (-1)^k (k-1) Im psi_k` for `lambda` minus the same sum for `mu`.
pub fn check_th3(lambda: &FunctionalSpec, mu: &FunctionalSpec, a_inf: &CoefficientVector) -> Result<f64> {
    check_orders(lambda.order(), mu.order())?;
    let l = alternating_moment(&lemma1_initial_adjoint(lambda, a_inf)?, 1).im;
    let m = alternating_moment(&lemma1_initial_adjoint(mu, a_inf)?, 1).im;
    Ok(l - m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Th4Report {
    pub passed: bool,
    /// `[N_m(lambda), N_m(mu)]` for `m = 1..m_max`.
    pub residuals: Vec<[f64; 2]>,
    /// `max_k |Im psi_k(0)|` over both functionals. With `m_max >= n - 1`
    /// the residuals vanish iff this does (Vandermonde system in `k - 1`).
    pub max_im_adjoint: f64,
    /// Whether the residual verdict and the imaginary-part verdict agree.
    pub vandermonde_consistent: bool,
}

/// `N_m` for both functionals, `m = 1..=m_max`.
pub fn check_th4(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    a_inf: &CoefficientVector,
    m_max: usize,
    tol: f64,
) -> Result<Th4Report> {
    check_orders(lambda.order(), mu.order())?;
    let m_max = m_max.max(1);
    let psi_l = lemma1_initial_adjoint(lambda, a_inf)?;
    let psi_m = lemma1_initial_adjoint(mu, a_inf)?;
    let residuals: Vec<[f64; 2]> = (1..=m_max as u32)
        .map(|m| [alternating_moment(&psi_l, m + 1).im, alternating_moment(&psi_m, m + 1).im])
        .collect();
    let (tl, tm) = (tol * lambda.l1_norm(), tol * mu.l1_norm());
    let passed = residuals.iter().all(|[l, m]| l.abs() <= tl && m.abs() <= tm);

    let im_max = |psi: &AdjointVector| (2..=psi.order()).map(|k| psi.get(k).im.abs()).fold(0.0, f64::max);
    let max_im_adjoint = im_max(&psi_l).max(im_max(&psi_m));
    let vandermonde_consistent = if m_max + 1 >= lambda.order() {
        // the residuals are a nonsingular linear image of the imaginary parts
        let im_zero = im_max(&psi_l) <= tl && im_max(&psi_m) <= tm;
        im_zero == passed
    } else {
        true
    };
    Ok(Th4Report {
        passed,
        residuals,
        max_im_adjoint,
        vandermonde_consistent,
    })
}

/// `u^{(m)}(0) = -H_{u t^m}(0, a^0, psi(alpha), pi) / H_uu(0, a^0, psi(alpha), pi)`.
///
/// Only meaningful when `N_p` vanishes for all `p < m`; that premise is the
/// caller's responsibility.
pub fn u_derivative_at_zero(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    alpha: f64,
    a_inf: &CoefficientVector,
    m: u32,
    degeneracy_tol: f64,
) -> Result<f64> {
    let psi = blended_adjoint(lambda, mu, alpha, a_inf)?;
    let a0 = CoefficientVector::identity(a_inf.order())?;
    let huu = hamiltonian_mixed(0.0, &a0, &psi, PI, 2, 0)?;
    let threshold = degeneracy_tol * hamiltonian_scale(0.0, &a0, &psi, 2, 0)?;
    if !(huu.abs() > threshold) {
        return Err(Error::DegenerateDenominator { value: huu.abs(), threshold });
    }
    let hut = hamiltonian_mixed(0.0, &a0, &psi, PI, 1, m)?;
    Ok(-hut / huu)
}

/// Outcome of the search for the constant `c_m` with `N_m(alpha) = c_m D(alpha)`.
#[derive(Clone, Debug, PartialEq)]
pub enum CmOutcome {
    /// Every `N_m`, `m <= m_max`, vanishes for both functionals.
    Satisfied,
    /// `N_m` is proportional to `D` with a nonzero constant.
    Proportional { m: u32, c_m: f64, max_deviation: f64 },
    /// `N_m` does not vanish and is not proportional to `D`; impossible when
    /// both functionals share an extremal function.
    NotProportional { m: u32, c_m_fit: f64, max_deviation: f64 },
}

/// First `m <= m_max` where some `N_m` is nonzero (per `tol`), if any.
fn first_failing_m(report: &Th4Report, lambda: &FunctionalSpec, mu: &FunctionalSpec, tol: f64) -> Option<u32> {
    let (tl, tm) = (tol * lambda.l1_norm(), tol * mu.l1_norm());
    report
        .residuals
        .iter()
        .position(|[l, m]| l.abs() > tl || m.abs() > tm)
        .map(|i| i as u32 + 1)
}

/// Finds the first failing `m` and fits `c_m` by least squares over
/// [`ALPHA_SAMPLES`].
pub fn necessary_cm(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    a_inf: &CoefficientVector,
    m_max: usize,
    tol: f64,
    degeneracy_tol: f64,
) -> Result<CmOutcome> {
    let th4 = check_th4(lambda, mu, a_inf, m_max, tol)?;
    let Some(m) = first_failing_m(&th4, lambda, mu, tol) else {
        return Ok(CmOutcome::Satisfied);
    };
    let mut samples = Vec::with_capacity(ALPHA_SAMPLES.len());
    for &alpha in &ALPHA_SAMPLES {
        let psi = blended_adjoint(lambda, mu, alpha, a_inf)?;
        let d = alternating_moment(&psi, 2).re;
        let threshold = degeneracy_tol * moment_scale(&psi, 2);
        if !(d.abs() > threshold) {
            return Err(Error::DegenerateDenominator {
                value: 2.0 * d.abs(),
                threshold: 2.0 * threshold,
            });
        }
        samples.push((alternating_moment(&psi, m + 1).im, d));
    }
    let num: f64 = samples.iter().map(|(n, d)| n * d).sum();
    let den: f64 = samples.iter().map(|(_, d)| d * d).sum();
    let c = num / den;
    let max_deviation = samples.iter().map(|(n, d)| (n - c * d).abs()).fold(0.0, f64::max);
    let d_max = samples.iter().map(|(_, d)| d.abs()).fold(0.0, f64::max);
    if c.abs() > tol && max_deviation <= tol * c.abs() * d_max {
        Ok(CmOutcome::Proportional { m, c_m: c, max_deviation })
    } else {
        Ok(CmOutcome::NotProportional {
            m,
            c_m_fit: c,
            max_deviation,
        })
    }
}

/// Smallest even `2l` such that `H_{u^q}(0, a^0, psi(alpha), pi)` vanishes for
/// `2 <= q < 2l` and `H_{u^{2l}} < 0`, identical across [`ALPHA_SAMPLES`].
/// Returns 2 in the nondegenerate case and `None` when no such order exists
/// up to `2(n - 1)` or the samples disagree.
pub fn degeneracy_order(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    a_inf: &CoefficientVector,
    tol: f64,
) -> Result<Option<u32>> {
    let n = a_inf.order();
    let a0 = CoefficientVector::identity(n)?;
    let max_q = 2 * (n as u32 - 1);
    let mut order = None;
    for &alpha in &ALPHA_SAMPLES {
        let psi = blended_adjoint(lambda, mu, alpha, a_inf)?;
        let mut found = None;
        for q in 2..=max_q {
            let h = hamiltonian_mixed(0.0, &a0, &psi, PI, q, 0)?;
            let scale = hamiltonian_scale(0.0, &a0, &psi, q, 0)?;
            if h.abs() > tol * scale {
                found = (q % 2 == 0 && h < 0.0).then_some(q);
                break;
            }
        }
        match (found, order) {
            (None, _) => return Ok(None),
            (Some(q), None) => order = Some(q),
            (Some(q), Some(prev)) if q != prev => return Ok(None),
            _ => {}
        }
    }
    Ok(order)
}

/// Rotates `(lambda, a)` so that its trigonometric polynomial peaks at
/// `u = pi`. Returns `beta = 0` when that already holds.
pub fn normalize_rotation(
    lambda: &FunctionalSpec,
    a_inf: &CoefficientVector,
) -> Result<(RotationAngle, FunctionalSpec, CoefficientVector)> {
    let p = theorem1_polynomial(lambda, a_inf)?;
    let max = maximize_trig(&p)?;
    if MaxAtPiRule::default().accepts(&p, &max) {
        return Ok((RotationAngle::new(0.0), lambda.clone(), a_inf.clone()));
    }
    let beta = RotationAngle::new(max.argmax - PI);
    let (nu, rotated) = rotate_pair(lambda, a_inf, beta)?;
    Ok((beta, nu, rotated))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    KoebeImplied,
    NotKoebeCertified,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Th3Report {
    pub passed: bool,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UDerivSample {
    pub m: u32,
    pub alpha: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmEntry {
    pub m: u32,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    /// Rotation applied before checking.
    pub rotation: f64,
    pub th1: Th1Report,
    pub th2: Th2Report,
    pub th3: Th3Report,
    pub th4: Th4Report,
    pub u_derivs: Vec<UDerivSample>,
    pub c_m: Option<CmEntry>,
    pub degeneracy_order: Option<u32>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckSettings {
    pub tolerances: Tolerances,
    /// Defaults to `n - 1`.
    pub m_max: Option<usize>,
    pub normalize_rotation: bool,
    pub rule: MaxAtPiRule,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            m_max: None,
            normalize_rotation: true,
            rule: MaxAtPiRule::default(),
        }
    }
}

/// Rotation normalization followed by every condition check and a verdict.
pub fn check_conditions(
    lambda: &FunctionalSpec,
    mu: &FunctionalSpec,
    a_inf: &CoefficientVector,
    settings: &CheckSettings,
) -> Result<ConditionReport> {
    check_orders(lambda.order(), mu.order())?;
    check_orders(lambda.order(), a_inf.order())?;
    let n = a_inf.order();
    let tol = settings.tolerances.residual;
    let deg_tol = settings.tolerances.degeneracy;
    let m_max = settings.m_max.unwrap_or(n - 1).max(1);
    let mut notes = Vec::new();

    let (beta, lambda, mu, a) = if settings.normalize_rotation {
        match normalize_rotation(lambda, a_inf) {
            Ok((beta, nu, rotated)) => {
                let mu_rot = rotate_functional(mu, beta);
                (beta, nu, mu_rot, rotated)
            }
            Err(Error::DegeneratePolynomial) => {
                notes.push("rotation normalization skipped: degenerate polynomial".into());
                (RotationAngle::new(0.0), lambda.clone(), mu.clone(), a_inf.clone())
            }
            Err(e) => return Err(e),
        }
    } else {
        (RotationAngle::new(0.0), lambda.clone(), mu.clone(), a_inf.clone())
    };

    let th1 = check_th1(&lambda, &a, &settings.rule)?;
    let th2 = check_th2(&lambda, &mu, &a, deg_tol)?;
    let residual = check_th3(&lambda, &mu, &a)?;
    let th3 = Th3Report {
        passed: residual.abs() <= tol * lambda.l1_norm().max(mu.l1_norm()),
        residual,
    };
    let th4 = check_th4(&lambda, &mu, &a, m_max, tol)?;
    let degeneracy = degeneracy_order(&lambda, &mu, &a, deg_tol)?;
    let failing = first_failing_m(&th4, &lambda, &mu, tol);

    let mut u_derivs = Vec::new();
    let mut c_m = None;
    if th2.passed {
        let last = failing.unwrap_or(m_max as u32);
        for m in 1..=last {
            for &alpha in &ALPHA_SAMPLES {
                let value = u_derivative_at_zero(&lambda, &mu, alpha, &a, m, deg_tol)?;
                u_derivs.push(UDerivSample { m, alpha, value });
            }
        }
        if failing.is_some() {
            match necessary_cm(&lambda, &mu, &a, m_max, tol, deg_tol)? {
                CmOutcome::Proportional { m, c_m: value, .. } => c_m = Some(CmEntry { m, value }),
                CmOutcome::NotProportional { m, max_deviation, .. } => notes.push(format!(
                    "N_{m} is not proportional to D (max deviation {max_deviation:e}); the two functionals cannot share this extremal"
                )),
                CmOutcome::Satisfied => {}
            }
        }
    } else {
        notes.push(format!(
            "D(alpha) is not bounded away from zero on [0, 1] (D(0) = {}, D(1) = {}); degeneracy order {}",
            th2.d0,
            th2.d1,
            degeneracy.map_or("undetermined".to_string(), |q| q.to_string())
        ));
    }
    if !th4.vandermonde_consistent {
        notes.push("th4 residuals and imaginary adjoint parts disagree".into());
    }

    let verdict = if th1.passed && th2.passed && th3.passed && th4.passed {
        Verdict::KoebeImplied
    } else if th1.passed && th2.passed && c_m.is_some() {
        Verdict::NotKoebeCertified
    } else {
        Verdict::Inconclusive
    };

    Ok(ConditionReport {
        rotation: beta.radians(),
        th1,
        th2,
        th3,
        th4,
        u_derivs,
        c_m,
        degeneracy_order: degeneracy,
        verdict,
        notes,
    })
}
