//! Pseudo-Hamiltonian of the coefficient problem and trigonometric
//! polynomial maximization.
//!
//! With `X_s = (A^s a)^T psi` the pseudo-Hamiltonian is
//! `H = Re{-2 sum_s e^{-s(t + i u)} X_s}`. Holding `a` and `psi` fixed, every
//! mixed partial derivative follows from the single factor
//! `(-i s)^q (-s)^m` on the `s`-th term.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;

use crate::conditions::lemma1_initial_adjoint;
use crate::dynamics::AdjointVector;
use crate::error::{domain, Error, Result};
use crate::series::{check_orders, shift_into, CoefficientVector, FunctionalSpec};

/// Number of uniform grid points used by [`maximize_trig`].
pub const GRID_POINTS: usize = 8192;

/// `X_s = (A^s a)^T psi` for `s = 1..n-1` (entry `s - 1`).
pub fn shift_products(a: &CoefficientVector, psi: &AdjointVector) -> Result<Vec<Complex64>> {
    check_orders(a.order(), psi.order())?;
    let n = a.order();
    let mut cur = a.as_slice().to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    let mut out = Vec::with_capacity(n - 1);
    for _ in 1..n {
        shift_into(a.as_slice(), &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
        out.push(cur.iter().zip(psi.as_slice()).map(|(x, p)| x * p).sum());
    }
    Ok(out)
}

fn mixed_from_products(t: f64, u: f64, products: &[Complex64], q: u32, m: u32) -> f64 {
    let total: Complex64 = products
        .iter()
        .enumerate()
        .map(|(idx, x)| {
            let s = (idx + 1) as f64;
            let factor = Complex64::new(0.0, -s).powu(q) * (-s).powi(m as i32);
            factor * Complex64::from_polar((-s * t).exp(), -s * u) * x
        })
        .sum();
    -2.0 * total.re
}

/// `d^q/du^q d^m/dt^m H(t, a, psi, u)` with `a` and `psi` held fixed.
/// `q = m = 0` gives `H` itself, `q = 1, m = 0` the maximum-principle
/// expression `H_u`.
pub fn hamiltonian_mixed(
    t: f64,
    a: &CoefficientVector,
    psi: &AdjointVector,
    u_val: f64,
    q: u32,
    m: u32,
) -> Result<f64> {
    let x = shift_products(a, psi)?;
    Ok(mixed_from_products(t, u_val, &x, q, m))
}

/// Magnitude bound `2 sum_s s^{q+m} e^{-st} |X_s|` for the terms of
/// [`hamiltonian_mixed`]; used to scale tolerances.
pub fn hamiltonian_scale(t: f64, a: &CoefficientVector, psi: &AdjointVector, q: u32, m: u32) -> Result<f64> {
    let x = shift_products(a, psi)?;
    Ok(x.iter()
        .enumerate()
        .map(|(idx, x)| {
            let s = (idx + 1) as f64;
            2.0 * s.powi((q + m) as i32) * (-s * t).exp() * x.norm()
        })
        .sum())
}

/// The part of `d/dt H_u` along a trajectory that comes from the motion of
/// `a` and `psi`:
/// `Re sum_{s,j} 4i s (j - s) e^{-(s+j)(t+iu)} X_{s+j}`.
///
/// It vanishes identically for `n <= 3`, and along `u = pi` when `a` and
/// `psi` are real; in general it does not, so the total derivative is
/// `H_ut + H_uu u' + chain_rule_cross_term`.
pub fn chain_rule_cross_term(t: f64, a: &CoefficientVector, psi: &AdjointVector, u_val: f64) -> Result<f64> {
    let x = shift_products(a, psi)?;
    let n = a.order();
    let mut total = Complex64::new(0.0, 0.0);
    for s in 1..n {
        for j in 1..n - s {
            let p = s + j;
            let w = 4.0 * s as f64 * (j as f64 - s as f64);
            let e = Complex64::from_polar((-(p as f64) * t).exp(), -(p as f64) * u_val);
            total += Complex64::new(0.0, w) * e * x[p - 1];
        }
    }
    Ok(total.re)
}

/// `P(u) = Re(sum_{k=2}^n c_k e^{-i(k-1)u})`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPolynomial {
    coeffs: Vec<Complex64>,
}

impl TrigPolynomial {
    /// Coefficients `(c_2, ..., c_n)`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("trigonometric polynomial needs at least c_2");
        }
        Ok(Self { coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() + 1
    }

    /// `c_k` for `2 <= k <= n`.
    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs[k - 2]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `sum_k |c_k|`.
    pub fn scale(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn value(&self, u: f64) -> f64 {
        self.derivative(u, 0)
    }

    /// `P^{(r)}(u)`.
    pub fn derivative(&self, u: f64, r: u32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let freq = (idx + 1) as f64;
                let factor = Complex64::new(0.0, -freq).powu(r);
                (factor * c * Complex64::from_polar(1.0, -freq * u)).re
            })
            .sum()
    }
}

/// Result of [`maximize_trig`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrigMaximum {
    /// Maximizer in `[0, 2 pi)`.
    pub argmax: f64,
    pub value: f64,
    /// `value` minus the best grid value farther than `pi / 64` from
    /// `argmax`; small values flag competing peaks.
    pub second_best_gap: f64,
    /// Best value on the uniform grid.
    pub grid_max: f64,
}

fn circular_distance(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(TAU);
    d.min(TAU - d)
}

/// Global maximum of `P` on `[0, 2 pi)`: best point of a uniform
/// [`GRID_POINTS`] grid (lowest index wins ties), polished by Newton's method
/// on `P'`.
pub fn maximize_trig(p: &TrigPolynomial) -> Result<TrigMaximum> {
    if p.as_slice().iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        return Err(Error::DegeneratePolynomial);
    }
    let spacing = TAU / GRID_POINTS as f64;
    let grid: Vec<f64> = (0..GRID_POINTS).map(|i| p.value(i as f64 * spacing)).collect();
    let (best_idx, grid_max) = grid
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let u0 = best_idx as f64 * spacing;

    let mut u = u0;
    for _ in 0..60 {
        let d1 = p.derivative(u, 1);
        let d2 = p.derivative(u, 2);
        if !(d2 < 0.0) {
            break;
        }
        let step = d1 / d2;
        let candidate = u - step;
        if (candidate - u0).abs() > spacing {
            break;
        }
        u = candidate;
        if step.abs() <= 1e-15 * (1.0 + u.abs()) {
            break;
        }
    }
    if p.value(u) < grid_max {
        u = u0;
    }
    let argmax = u.rem_euclid(TAU);
    let argmax = if argmax >= TAU { 0.0 } else { argmax };
    let value = p.value(argmax);

    let far_best = grid
        .iter()
        .enumerate()
        .filter(|(i, _)| circular_distance(*i as f64 * spacing, argmax) > PI / 64.0)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(TrigMaximum {
        argmax,
        value,
        second_best_gap: value - far_best,
        grid_max,
    })
}

/// Acceptance rule for "P attains its maximum at `u = pi`".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxAtPiRule {
    /// Allowed `|u* - pi|` after refinement.
    pub argmax_tol: f64,
    /// `P(pi)` may fall short of the grid maximum by `tie_tol * sum|c_k|`.
    pub tie_tol: f64,
}

impl Default for MaxAtPiRule {
    fn default() -> Self {
        Self {
            argmax_tol: 1e-6,
            tie_tol: 1e-9,
        }
    }
}

impl MaxAtPiRule {
    pub fn accepts(&self, p: &TrigPolynomial, max: &TrigMaximum) -> bool {
        circular_distance(max.argmax, PI) <= self.argmax_tol && p.value(PI) >= max.grid_max - self.tie_tol * p.scale()
    }
}

/// The polynomial `Re(-sum_k conj(Psi_k(0)) e^{-i(k-1)u})` built from the
/// initial adjoint of `(lambda, a)`; `2 P(u) = H(0, a^0, psi(0), u)`.
pub fn theorem1_polynomial(lambda: &FunctionalSpec, a_inf: &CoefficientVector) -> Result<TrigPolynomial> {
    let psi0 = lemma1_initial_adjoint(lambda, a_inf)?;
    TrigPolynomial::new(psi0.as_slice()[1..].iter().map(|c| -c).collect())
}
