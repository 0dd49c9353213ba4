#![allow(dead_code)]

use std::f64::consts::TAU;

use loewner::conditions::lemma1_initial_adjoint;
use loewner::dynamics::{AdjointVector, DrivingFunction, Integrator, Trajectory};
use loewner::series::{CoefficientVector, FunctionalSpec};
use loewner::Complex64;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_complex<R: Rng>(rng: &mut R, radius: f64) -> Complex64 {
    Complex64::from_polar(rng.gen_range(0.0..radius), rng.gen_range(0.0..TAU))
}

pub fn random_functional<R: Rng>(rng: &mut R, n: usize) -> FunctionalSpec {
    let mut v: Vec<Complex64> = (2..n).map(|_| random_complex(rng, 1.0)).collect();
    v.push(Complex64::from_polar(rng.gen_range(0.2..1.0), rng.gen_range(0.0..TAU)));
    FunctionalSpec::new(v).unwrap()
}

pub fn random_coefficients<R: Rng>(rng: &mut R, n: usize, radius: f64) -> CoefficientVector {
    let mut v = vec![Complex64::new(1.0, 0.0)];
    v.extend((1..n).map(|_| random_complex(rng, radius)));
    CoefficientVector::new(v).unwrap()
}

/// Coefficients `z^2 .. z^{n+1}` of `(conj(l_n) z^2 + ... + conj(l_2) z^n) f'(z)`
/// by direct polynomial multiplication.
pub fn companion_seed(lambda: &FunctionalSpec, a: &CoefficientVector) -> Vec<Complex64> {
    let n = a.order();
    // poly[d] is the coefficient of z^d
    let mut left = vec![Complex64::new(0.0, 0.0); n + 2];
    for k in 2..=n {
        left[n + 2 - k] = lambda.get(k).conj();
    }
    let deriv: Vec<Complex64> = (1..=n).map(|j| a.get(j) * j as f64).collect();
    let mut product = vec![Complex64::new(0.0, 0.0); 2 * n + 2];
    for (d, l) in left.iter().enumerate() {
        for (e, f) in deriv.iter().enumerate() {
            product[d + e] += l * f;
        }
    }
    product[2..n + 2].to_vec()
}

/// Two-pass run: limit coefficients first, then the adjoint from the
/// initial value built on those limits, plus the companion system.
pub fn adjoint_run(lambda: &FunctionalSpec, driving: &DrivingFunction, horizon: f64, step: f64, every: usize) -> (Trajectory, AdjointVector) {
    let n = lambda.order();
    let integrator = Integrator::new(horizon, step).with_sample_every(every);
    let a0 = CoefficientVector::identity(n).unwrap();
    let first = integrator.run(driving, &a0, None, None).unwrap();
    let limit = first.final_coefficients().clone();
    let psi0 = lemma1_initial_adjoint(lambda, &limit).unwrap();
    let q0 = companion_seed(lambda, &limit);
    let traj = integrator.run(driving, &a0, Some(&psi0), Some(&q0)).unwrap();
    (traj, psi0)
}

/// `d^q/du^q d^m/dt^m H` by nested central differences of `H` itself,
/// with two Richardson extrapolation levels (steps `h`, `h/2`, `h/4`).
pub fn mixed_fd(t: f64, a: &CoefficientVector, psi: &AdjointVector, u: f64, q: u32, m: u32, h: f64) -> f64 {
    use loewner::hamiltonian::hamiltonian_mixed;
    fn stencil(order: u32) -> Vec<(f64, f64)> {
        // coefficients of the central difference (E^{1/2} - E^{-1/2})^order, offsets in units of h
        let mut terms = vec![(0.0, 1.0)];
        for _ in 0..order {
            let mut next = Vec::new();
            for (off, c) in &terms {
                next.push((off + 0.5, *c));
                next.push((off - 0.5, -*c));
            }
            terms = next;
        }
        terms
    }
    let estimate = |h: f64| -> f64 {
        let mut total = 0.0;
        for (du, cu) in stencil(q) {
            for (dt, ct) in stencil(m) {
                total += cu * ct * hamiltonian_mixed(t + dt * h, a, psi, u + du * h, 0, 0).unwrap();
            }
        }
        total / h.powi((q + m) as i32)
    };
    let (e1, e2, e4) = (estimate(h), estimate(h / 2.0), estimate(h / 4.0));
    let (r1, r2) = ((4.0 * e2 - e1) / 3.0, (4.0 * e4 - e2) / 3.0);
    (16.0 * r2 - r1) / 15.0
}

/// Largest `|d/dt H_u - (H_ut + H_uu u' [+ cross term])|` over interior
/// samples with `t <= t_max`, the total derivative taken by central
/// differences of sampled `H_u`.
pub fn chain_rule_residual(traj: &Trajectory, driving: &DrivingFunction, t_max: f64, with_cross: bool) -> f64 {
    use loewner::hamiltonian::{chain_rule_cross_term, hamiltonian_mixed};
    let psis = traj.psi_samples.as_ref().expect("adjoint samples");
    let hu: Vec<f64> = traj
        .times
        .iter()
        .zip(&traj.a_samples)
        .zip(psis)
        .map(|((t, a), p)| hamiltonian_mixed(*t, a, p, driving.value(*t), 1, 0).unwrap())
        .collect();
    let mut worst: f64 = 0.0;
    for i in 1..traj.times.len() - 1 {
        let t = traj.times[i];
        if t > t_max {
            break;
        }
        let dt = traj.times[i + 1] - traj.times[i - 1];
        let total = (hu[i + 1] - hu[i - 1]) / dt;
        let (a, p, u) = (&traj.a_samples[i], &psis[i], driving.value(t));
        let mut predicted = hamiltonian_mixed(t, a, p, u, 1, 1).unwrap() + hamiltonian_mixed(t, a, p, u, 2, 0).unwrap() * driving.rate(t);
        if with_cross {
            predicted += chain_rule_cross_term(t, a, p, u).unwrap();
        }
        worst = worst.max((total - predicted).abs());
    }
    worst
}

/// Inverts the initial-adjoint map: the functional whose adjoint at `a` is
/// `target` (entries `k = 2..n`).
pub fn functional_for_adjoint(target: &[Complex64], a: &CoefficientVector) -> FunctionalSpec {
    let n = a.order();
    let mut conj = vec![Complex64::new(0.0, 0.0); n + 1];
    for k in (2..=n).rev() {
        let tail: Complex64 = (2..=n - k + 1).map(|j| conj[j + k - 1] * j as f64 * a.get(j)).sum();
        conj[k] = target[k - 2] - tail;
    }
    FunctionalSpec::from_raw(conj[2..].iter().map(|c| c.conj()).collect()).unwrap()
}

/// Rows `m = 1..n-1`, columns `k = 2..n`: `(-1)^k (k-1)^{m+1}`.
pub fn moment_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n - 1, n - 1, |row, col| {
        let k = col + 2;
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sign * ((k - 1) as f64).powi(row as i32 + 2)
    })
}

/// Adjoint targets with `N_p = 0` for `p < m` and `N_m = c D`, for both
/// functionals, with `D` of the same sign.
pub fn proportional_pair(rng: &mut ChaCha8Rng, n: usize, m: usize, c: f64, a: &CoefficientVector) -> (FunctionalSpec, FunctionalSpec) {
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let mut build = || {
        let mut target: Vec<Complex64> = (2..=n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        target[n - 2].re = rng.gen_range(0.5..1.5);
        // fix Re psi_2 so that D hits a chosen value
        let d_target = sign * rng.gen_range(0.5..3.0);
        let rest: f64 = (3..=n)
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * ((k - 1) * (k - 1)) as f64 * target[k - 2].re)
            .sum();
        target[0].re = d_target - rest;
        // solve for Im psi_2..psi_{m+1}
        let matrix = DMatrix::from_fn(m, m, |row, col| {
            let k = col + 2;
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            s * ((k - 1) as f64).powi(row as i32 + 2)
        });
        let rhs = DVector::from_fn(m, |row, _| {
            let p = row + 1;
            let fixed: f64 = (m + 2..=n)
                .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } * ((k - 1) as f64).powi(p as i32 + 1) * target[k - 2].im)
                .sum();
            let goal = if p == m { c * d_target } else { 0.0 };
            goal - fixed
        });
        let im = matrix.lu().solve(&rhs).unwrap();
        for (i, v) in im.iter().enumerate() {
            target[i].im = *v;
        }
        functional_for_adjoint(&target, a)
    };
    (build(), build())
}
