//! Truncated coefficient algebra.
//!
//! A coefficient vector `a = (a_1, ..., a_n)` with `a_1 = 1` stands for the
//! truncated series `g(z) = a_1 z + a_2 z^2 + ... + a_n z^n`. The matrix
//! `A(a)` is the strictly lower triangular Toeplitz matrix with first
//! subdiagonal column `(a_1, ..., a_{n-1})`; applying it to a vector `v` is the
//! truncated series product `g * V`, so `A^s a` holds the coefficients of
//! `g^{s+1}`. Nothing here ever materializes the matrix.
//!
//! All public indices are 1-based (`a_1..a_n`, `lambda_2..lambda_n`).

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{domain, Result};

/// Truncated Taylor coefficients `(a_1, ..., a_n)` of a normalized function,
/// `a_1 = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    coeffs: Vec<Complex64>,
}

impl CoefficientVector {
    /// Builds a coefficient vector from `(a_1, ..., a_n)`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return domain(format!("truncation order must be >= 2, got {}", coeffs.len()));
        }
        if coeffs[0] != Complex64::new(1.0, 0.0) {
            return domain(format!("a_1 must equal 1 exactly, got {}", coeffs[0]));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return domain("coefficients must be finite");
        }
        Ok(Self { coeffs })
    }

    /// The initial state `a^0 = (1, 0, ..., 0)` (the identity map).
    pub fn identity(n: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("truncation order must be >= 2, got {n}"));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        coeffs[0] = Complex64::new(1.0, 0.0);
        Ok(Self { coeffs })
    }

    /// Caller guarantees `coeffs[0] == 1` and `len >= 2`.
    pub(crate) fn from_raw(coeffs: Vec<Complex64>) -> Self {
        debug_assert!(coeffs.len() >= 2 && coeffs[0] == Complex64::new(1.0, 0.0));
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    /// `a_k` for `1 <= k <= n`.
    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs[k - 1]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }
}

/// Coefficients `(lambda_2, ..., lambda_n)` of the functional
/// `L(f) = sum_k conj(lambda_k) a_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSpec {
    coeffs: Vec<Complex64>,
}

impl FunctionalSpec {
    /// Builds a functional from `(lambda_2, ..., lambda_n)`; requires
    /// `lambda_n != 0`.
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        let spec = Self::from_raw(coeffs)?;
        if spec.leading() == Complex64::new(0.0, 0.0) {
            return domain("leading functional coefficient lambda_n must be nonzero");
        }
        Ok(spec)
    }

    /// Like [`FunctionalSpec::new`] but allows `lambda_n = 0`, which blends
    /// of two functionals and the zero functional can produce.
    pub fn from_raw(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return domain("a functional needs at least lambda_2");
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return domain("functional coefficients must be finite");
        }
        Ok(Self { coeffs })
    }

    pub fn zero(n: usize) -> Result<Self> {
        if n < 2 {
            return domain(format!("truncation order must be >= 2, got {n}"));
        }
        Ok(Self {
            coeffs: vec![Complex64::new(0.0, 0.0); n - 1],
        })
    }

    /// The Bieberbach functional `L(f) = a_n`.
    pub fn bieberbach(n: usize) -> Result<Self> {
        let mut spec = Self::zero(n)?;
        spec.coeffs[n - 2] = Complex64::new(1.0, 0.0);
        Ok(spec)
    }

    /// Truncation order `n`.
    pub fn order(&self) -> usize {
        self.coeffs.len() + 1
    }

    /// `lambda_k` for `2 <= k <= n`.
    pub fn get(&self, k: usize) -> Complex64 {
        self.coeffs[k - 2]
    }

    pub fn leading(&self) -> Complex64 {
        *self.coeffs.last().expect("nonempty by construction")
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.coeffs.iter().all(|c| c.im == 0.0)
    }

    /// `sum_k |lambda_k|`.
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `L(a) = sum_{k=2}^n conj(lambda_k) a_k`.
    pub fn evaluate(&self, a: &CoefficientVector) -> Result<Complex64> {
        check_orders(self.order(), a.order())?;
        Ok(self
            .coeffs
            .iter()
            .zip(&a.as_slice()[1..])
            .map(|(l, ak)| l.conj() * ak)
            .sum())
    }
}

/// Rotation angle in `[0, 2*pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAngle(f64);

impl RotationAngle {
    pub fn new(beta: f64) -> Self {
        let mut r = beta.rem_euclid(TAU);
        // rem_euclid can round up to TAU for tiny negative inputs
        if r >= TAU {
            r = 0.0;
        }
        Self(r)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

pub(crate) fn check_orders(lhs: usize, rhs: usize) -> Result<()> {
    if lhs != rhs {
        return domain(format!("truncation order mismatch: {lhs} vs {rhs}"));
    }
    Ok(())
}

/// `out = A(a) v`, i.e. `out_i = sum_{j<i} a_{i-j} v_j`.
#[inline]
pub(crate) fn shift_into(a: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..i {
            acc += a[i - 1 - j] * v[j];
        }
        out[i] = acc;
    }
}

/// `out = A(a)^T v`, i.e. `out_i = sum_{j>i} a_{j-i} v_j`.
#[inline]
pub(crate) fn transposed_shift_into(a: &[Complex64], v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len();
    for i in 0..n {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in i + 1..n {
            acc += a[j - i - 1] * v[j];
        }
        out[i] = acc;
    }
}

fn check_shift_args(a: &CoefficientVector, v: &[Complex64], s: usize) -> Result<()> {
    let n = a.order();
    if v.len() != n {
        return domain(format!("vector length {} does not match order {n}", v.len()));
    }
    if s == 0 || s > n - 1 {
        return domain(format!("shift power must lie in [1, {}], got {s}", n - 1));
    }
    Ok(())
}

/// `A(a)^s v` by `s` successive truncated convolutions. The first `s` entries
/// of the result are zero.
pub fn apply_shift_power(a: &CoefficientVector, v: &[Complex64], s: usize) -> Result<Vec<Complex64>> {
    check_shift_args(a, v, s)?;
    let mut cur = v.to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); v.len()];
    for _ in 0..s {
        shift_into(a.as_slice(), &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// `(A(a)^T)^s v`. The last `s` entries of the result are zero.
pub fn apply_transposed_shift_power(
    a: &CoefficientVector,
    v: &[Complex64],
    s: usize,
) -> Result<Vec<Complex64>> {
    check_shift_args(a, v, s)?;
    let mut cur = v.to_vec();
    let mut next = vec![Complex64::new(0.0, 0.0); v.len()];
    for _ in 0..s {
        transposed_shift_into(a.as_slice(), &cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Coefficients of the Koebe function `z / (1 - z)^2`: `a_k = k`.
pub fn koebe_coefficients(n: usize) -> Result<CoefficientVector> {
    if n < 2 {
        return domain(format!("truncation order must be >= 2, got {n}"));
    }
    Ok(CoefficientVector::from_raw(
        (1..=n).map(|k| Complex64::new(k as f64, 0.0)).collect(),
    ))
}

/// Coefficients of `e^{-i beta} f(e^{i beta} z)`: `a_k -> e^{i(k-1)beta} a_k`.
pub fn rotate_coefficients(a: &CoefficientVector, beta: RotationAngle) -> CoefficientVector {
    let mut coeffs: Vec<Complex64> = a
        .as_slice()
        .iter()
        .enumerate()
        .map(|(idx, c)| c * Complex64::from_polar(1.0, idx as f64 * beta.radians()))
        .collect();
    coeffs[0] = Complex64::new(1.0, 0.0);
    CoefficientVector::from_raw(coeffs)
}

/// The functional matching a rotated function:
/// `lambda_k -> e^{i(k-1)beta} lambda_k`.
pub fn rotate_functional(lambda: &FunctionalSpec, beta: RotationAngle) -> FunctionalSpec {
    FunctionalSpec {
        coeffs: lambda
            .as_slice()
            .iter()
            .enumerate()
            .map(|(idx, c)| c * Complex64::from_polar(1.0, (idx + 1) as f64 * beta.radians()))
            .collect(),
    }
}

/// Rotates a function together with its functional so that `Re L` is
/// unchanged.
pub fn rotate_pair(
    lambda: &FunctionalSpec,
    a: &CoefficientVector,
    beta: RotationAngle,
) -> Result<(FunctionalSpec, CoefficientVector)> {
    check_orders(lambda.order(), a.order())?;
    Ok((rotate_functional(lambda, beta), rotate_coefficients(a, beta)))
}

/// Coefficientwise `(1 - alpha) lambda + alpha mu` for `alpha` in `[0, 1]`.
pub fn blend_functionals(lambda: &FunctionalSpec, mu: &FunctionalSpec, alpha: f64) -> Result<FunctionalSpec> {
    check_orders(lambda.order(), mu.order())?;
    if !(0.0..=1.0).contains(&alpha) {
        return domain(format!("blend parameter must lie in [0, 1], got {alpha}"));
    }
    Ok(FunctionalSpec {
        coeffs: lambda
            .as_slice()
            .iter()
            .zip(mu.as_slice())
            .map(|(l, m)| l * (1.0 - alpha) + m * alpha)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cv(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| c(x)).collect()
    }

    #[test]
    fn shift_power_hand_examples() {
        let a = CoefficientVector::new(cv(&[1.0, 2.0, 3.0])).unwrap();
        let v = cv(&[1.0, 2.0, 3.0]);
        assert_eq!(apply_shift_power(&a, &v, 1).unwrap(), cv(&[0.0, 1.0, 4.0]));
        assert_eq!(apply_shift_power(&a, &v, 2).unwrap(), cv(&[0.0, 0.0, 1.0]));
    }

    #[test]
    fn shift_of_unit_vector_is_unit_vector() {
        let n = 6;
        let a0 = CoefficientVector::identity(n).unwrap();
        for s in 1..n {
            let out = apply_shift_power(&a0, a0.as_slice(), s).unwrap();
            for (i, x) in out.iter().enumerate() {
                let expected = if i == s { 1.0 } else { 0.0 };
                assert_eq!(*x, c(expected));
            }
        }
    }

    #[test]
    fn shift_power_rejects_bad_arguments() {
        let a = koebe_coefficients(4).unwrap();
        let v = cv(&[1.0, 0.0, 0.0, 0.0]);
        assert!(apply_shift_power(&a, &v, 0).is_err());
        assert!(apply_shift_power(&a, &v, 4).is_err());
        assert!(apply_shift_power(&a, &v[..3], 1).is_err());
    }

    #[test]
    fn shift_power_of_a_is_power_of_series() {
        // A^s a are the coefficients of g^{s+1}; for the Koebe function
        // g^2 = z^2 (1-z)^{-4} whose z^k coefficient is C(k+1, 3).
        let a = koebe_coefficients(6).unwrap();
        let sq = apply_shift_power(&a, a.as_slice(), 1).unwrap();
        let binom3 = |m: usize| (m * (m - 1) * (m - 2) / 6) as f64;
        for k in 2..=6 {
            assert_eq!(sq[k - 1], c(binom3(k + 1)));
        }
    }

    #[test]
    fn koebe_closed_form() {
        assert_eq!(koebe_coefficients(4).unwrap().into_vec(), cv(&[1.0, 2.0, 3.0, 4.0]));
        assert_eq!(koebe_coefficients(2).unwrap().into_vec(), cv(&[1.0, 2.0]));
        let k10 = koebe_coefficients(10).unwrap();
        assert!((1..=10).all(|k| k10.get(k) == c(k as f64)));
        assert!(koebe_coefficients(1).is_err());
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(CoefficientVector::new(cv(&[2.0, 1.0])).is_err());
        assert!(CoefficientVector::new(cv(&[1.0])).is_err());
        assert!(FunctionalSpec::new(cv(&[1.0, 0.0])).is_err());
        assert!(FunctionalSpec::from_raw(cv(&[1.0, 0.0])).is_ok());
        assert!(FunctionalSpec::new(vec![]).is_err());
    }

    #[test]
    fn rotation_by_pi_flips_odd_powers() {
        let lambda = FunctionalSpec::new(cv(&[0.0, 0.0, 1.0])).unwrap();
        let a = koebe_coefficients(4).unwrap();
        let (nu, rot) = rotate_pair(&lambda, &a, RotationAngle::new(PI)).unwrap();
        let expected_nu = cv(&[0.0, 0.0, -1.0]);
        let expected_a = cv(&[1.0, -2.0, 3.0, -4.0]);
        for (x, y) in nu.as_slice().iter().zip(&expected_nu) {
            assert!((x - y).norm() < 1e-14);
        }
        for (x, y) in rot.as_slice().iter().zip(&expected_a) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn zero_rotation_is_identity() {
        let lambda = FunctionalSpec::new(vec![Complex64::new(0.3, -1.0), c(2.0)]).unwrap();
        let a = CoefficientVector::new(vec![c(1.0), Complex64::new(0.5, 0.5), c(-1.0)]).unwrap();
        let (nu, rot) = rotate_pair(&lambda, &a, RotationAngle::new(0.0)).unwrap();
        assert_eq!(nu, lambda);
        assert_eq!(rot, a);
    }

    #[test]
    fn rotation_angle_is_reduced() {
        assert!((RotationAngle::new(-PI / 2.0).radians() - 1.5 * PI).abs() < 1e-15);
        assert_eq!(RotationAngle::new(TAU).radians(), 0.0);
        assert_eq!(RotationAngle::new(-1e-300).radians(), 0.0);
    }

    #[test]
    fn blend_endpoints_and_midpoint() {
        let l = FunctionalSpec::new(cv(&[1.0, 4.0])).unwrap();
        let m = FunctionalSpec::new(cv(&[0.0, 2.0])).unwrap();
        assert_eq!(blend_functionals(&l, &m, 0.0).unwrap(), l);
        assert_eq!(blend_functionals(&l, &m, 1.0).unwrap(), m);
        assert_eq!(blend_functionals(&l, &m, 0.5).unwrap().as_slice(), &cv(&[0.5, 3.0])[..]);
        assert!(blend_functionals(&l, &m, 1.5).is_err());
        assert!(blend_functionals(&l, &m, -0.1).is_err());
    }

    fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
        prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), len)
            .prop_map(|v| v.into_iter().map(|(re, im)| Complex64::new(re, im)).collect())
    }

    fn coeffs_and_vector() -> impl Strategy<Value = (CoefficientVector, Vec<Complex64>)> {
        (2usize..9).prop_flat_map(|n| {
            (complex_vec(n - 1), complex_vec(n)).prop_map(|(tail, v)| {
                let mut a = vec![c(1.0)];
                a.extend(tail);
                (CoefficientVector::new(a).unwrap(), v)
            })
        })
    }

    proptest! {
        #[test]
        fn shift_zeroes_leading_entries_and_composes((a, v) in coeffs_and_vector(), s_seed in 0usize..100) {
            let n = a.order();
            let s = 1 + s_seed % (n - 1);
            let out = apply_shift_power(&a, &v, s).unwrap();
            prop_assert!(out[..s].iter().all(|x| *x == c(0.0)));
            if s < n - 1 {
                let lhs = apply_shift_power(&a, &v, s + 1).unwrap();
                let rhs = apply_shift_power(&a, &out, 1).unwrap();
                for (x, y) in lhs.iter().zip(&rhs) {
                    prop_assert!((x - y).norm() <= 1e-12 * (1.0 + x.norm()));
                }
            }
        }

        #[test]
        fn transposed_action_is_adjoint((a, v) in coeffs_and_vector(), w_seed in complex_vec(8), s_seed in 0usize..100) {
            let n = a.order();
            let s = 1 + s_seed % (n - 1);
            let w = &w_seed[..n];
            let av = apply_shift_power(&a, &v, s).unwrap();
            let atw = apply_transposed_shift_power(&a, w, s).unwrap();
            let lhs: Complex64 = av.iter().zip(w).map(|(x, y)| x * y).sum();
            let rhs: Complex64 = v.iter().zip(&atw).map(|(x, y)| x * y).sum();
            prop_assert!((lhs - rhs).norm() <= 1e-9 * (1.0 + lhs.norm()));
        }

        #[test]
        fn rotation_preserves_functional_value((a, lam) in coeffs_and_vector(), beta in -10.0f64..10.0) {
            let n = a.order();
            let lambda = FunctionalSpec::from_raw(lam[1..n].to_vec()).unwrap();
            let before = lambda.evaluate(&a).unwrap();
            let (nu, rot) = rotate_pair(&lambda, &a, RotationAngle::new(beta)).unwrap();
            let after = nu.evaluate(&rot).unwrap();
            let scale: f64 = (2..=n).map(|k| lambda.get(k).norm() * a.get(k).norm()).sum();
            prop_assert!((before - after).norm() <= 1e-12 * scale.max(1e-300));
        }

        #[test]
        fn blend_is_affine(l in complex_vec(4), m in complex_vec(4), alpha in 0.0f64..1.0) {
            let l = FunctionalSpec::from_raw(l).unwrap();
            let m = FunctionalSpec::from_raw(m).unwrap();
            let b = blend_functionals(&l, &m, alpha).unwrap();
            for k in 2..=5 {
                let expected = l.get(k) + (m.get(k) - l.get(k)) * alpha;
                prop_assert!((b.get(k) - expected).norm() <= 1e-14 * (1.0 + expected.norm()));
            }
            // three collinear samples
            let b0 = blend_functionals(&l, &m, 0.0).unwrap();
            let b1 = blend_functionals(&l, &m, 1.0).unwrap();
            for k in 2..=5 {
                let interp = b0.get(k) * (1.0 - alpha) + b1.get(k) * alpha;
                prop_assert!((b.get(k) - interp).norm() <= 1e-14 * (1.0 + interp.norm()));
            }
        }
    }
}
