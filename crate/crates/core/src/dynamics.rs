//! Coefficient, adjoint and companion systems of the Loewner flow and their
//! joint fixed-step integration.
//!
//! With `z = e^{-(t + i u)}` the three systems read
//!
//! ```text
//! a'    = -2 sum_{s=1}^{n-1} z^s A^s a
//! psi'  =  2 sum_{s=1}^{n-1} z^s (s+1) (A^T)^s psi      (psi = conj(Psi))
//! q'    =  2 sum_{s=1}^{n-1} z^s (s+1) A^s q
//! ```
//!
//! where `A = A(a(t))`. All forcing decays like `e^{-t}`, so the infinite
//! horizon is replaced by a finite `T` plus an explicit tail bound.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::report::fmt_f64;
use crate::series::{check_orders, shift_into, transposed_shift_into, CoefficientVector};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Default integration horizon.
pub const DEFAULT_HORIZON: f64 = 30.0;
/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

/// Real control `u(t)` driving the Loewner equation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DrivingFunction {
    Constant {
        value: f64,
    },
    /// `values[i]` on `[breakpoints[i-1], breakpoints[i])`; the last value is
    /// the tail beyond the final breakpoint.
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        values: Vec<f64>,
    },
    /// `u0 + sum_m coefficients[m-1] t^m` on `[0, horizon]`, held constant at
    /// its `horizon` value afterwards.
    PowerSeries {
        u0: f64,
        coefficients: Vec<f64>,
        horizon: f64,
    },
}

impl DrivingFunction {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let u = Self::PiecewiseConstant { breakpoints, values };
        u.validate()?;
        Ok(u)
    }

    pub fn power_series(u0: f64, coefficients: Vec<f64>, horizon: f64) -> Result<Self> {
        let u = Self::PowerSeries {
            u0,
            coefficients,
            horizon,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { value } => {
                if !value.is_finite() {
                    return domain("constant driving value must be finite");
                }
            }
            Self::PiecewiseConstant { breakpoints, values } => {
                if values.len() != breakpoints.len() + 1 {
                    return domain(format!(
                        "piecewise-constant driving needs {} values for {} breakpoints, got {}",
                        breakpoints.len() + 1,
                        breakpoints.len(),
                        values.len()
                    ));
                }
                if breakpoints.iter().chain(values).any(|x| !x.is_finite()) {
                    return domain("piecewise-constant driving data must be finite");
                }
                if breakpoints.first().is_some_and(|&b| b <= 0.0) {
                    return domain("breakpoints must be positive");
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return domain("breakpoints must be strictly increasing");
                }
            }
            Self::PowerSeries {
                u0,
                coefficients,
                horizon,
            } => {
                if !(horizon.is_finite() && *horizon > 0.0) {
                    return domain("power-series validity horizon must be positive");
                }
                if !u0.is_finite() || coefficients.iter().any(|c| !c.is_finite()) {
                    return domain("power-series coefficients must be finite");
                }
            }
        }
        Ok(())
    }

    /// `u(t)` for `t >= 0`.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::PiecewiseConstant { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&b| b <= t);
                values[idx]
            }
            Self::PowerSeries {
                u0,
                coefficients,
                horizon,
            } => {
                let t = t.min(*horizon);
                coefficients.iter().rev().fold(0.0, |acc, c| (acc + c) * t) + u0
            }
        }
    }

    /// `u'(t)`; zero away from breakpoints of a piecewise-constant control.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Self::Constant { .. } | Self::PiecewiseConstant { .. } => 0.0,
            Self::PowerSeries {
                coefficients,
                horizon,
                ..
            } => {
                if t > *horizon {
                    return 0.0;
                }
                coefficients
                    .iter()
                    .enumerate()
                    .rev()
                    .fold(0.0, |acc, (idx, c)| acc * t + (idx + 1) as f64 * c)
            }
        }
    }

    /// Value used for an RK stage at time `t` inside the step
    /// `[start, start + h]`. Piecewise-constant controls are sampled at the
    /// step midpoint so that a step lying inside one segment sees a single
    /// value at all four stages.
    fn stage_value(&self, start: f64, h: f64, t: f64) -> f64 {
        match self {
            Self::PiecewiseConstant { .. } => self.value(start + 0.5 * h),
            _ => self.value(t),
        }
    }
}

/// Conjugated adjoint coordinates `(conj(Psi_1), ..., conj(Psi_n))`.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjointVector {
    psi_bar: Vec<Complex64>,
}

impl AdjointVector {
    pub fn new(psi_bar: Vec<Complex64>) -> Result<Self> {
        if psi_bar.len() < 2 {
            return domain(format!("adjoint order must be >= 2, got {}", psi_bar.len()));
        }
        Ok(Self { psi_bar })
    }

    pub fn order(&self) -> usize {
        self.psi_bar.len()
    }

    /// `conj(Psi_k)` for `1 <= k <= n`.
    pub fn get(&self, k: usize) -> Complex64 {
        self.psi_bar[k - 1]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.psi_bar
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.psi_bar
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub a_samples: Vec<CoefficientVector>,
    pub psi_samples: Option<Vec<AdjointVector>>,
    pub companion_samples: Option<Vec<Vec<Complex64>>>,
    pub horizon: f64,
    /// Step actually used (`horizon / steps`, never above the requested step).
    pub step: f64,
    pub tail_error_estimate: f64,
}

impl Trajectory {
    pub fn final_coefficients(&self) -> &CoefficientVector {
        self.a_samples.last().expect("trajectory always holds at least one sample")
    }

    pub fn final_adjoint(&self) -> Option<&AdjointVector> {
        self.psi_samples.as_ref().and_then(|p| p.last())
    }

    pub fn order(&self) -> usize {
        self.a_samples[0].order()
    }

    /// Header `t,re_a2,im_a2,...[,re_psi2,im_psi2,...]`, one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.order();
        let mut header = vec!["t".to_string()];
        for k in 2..=n {
            header.push(format!("re_a{k}"));
            header.push(format!("im_a{k}"));
        }
        if self.psi_samples.is_some() {
            for k in 2..=n {
                header.push(format!("re_psi{k}"));
                header.push(format!("im_psi{k}"));
            }
        }
        writeln!(w, "{}", header.join(","))?;
        for (idx, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            let a = &self.a_samples[idx];
            for k in 2..=n {
                row.push(fmt_f64(a.get(k).re));
                row.push(fmt_f64(a.get(k).im));
            }
            if let Some(psi) = &self.psi_samples {
                for k in 2..=n {
                    row.push(fmt_f64(psi[idx].get(k).re));
                    row.push(fmt_f64(psi[idx].get(k).im));
                }
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Limit coefficients `a(T)` with the tail bound on `|a(inf) - a(T)|`.
#[derive(Clone, Debug)]
pub struct LimitCoefficients {
    pub coefficients: CoefficientVector,
    pub tail_error: f64,
    pub converged: bool,
}

pub fn extract_limit_coefficients(traj: &Trajectory, tol: f64) -> LimitCoefficients {
    LimitCoefficients {
        coefficients: traj.final_coefficients().clone(),
        tail_error: traj.tail_error_estimate,
        converged: traj.tail_error_estimate <= tol,
    }
}

/// Scratch buffers for the right-hand sides.
struct Scratch {
    cur: Vec<Complex64>,
    next: Vec<Complex64>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            cur: vec![ZERO; n],
            next: vec![ZERO; n],
        }
    }
}

#[derive(Clone, Copy)]
enum Action {
    Lower,
    Transposed,
}

/// `out = sum_{s=1}^{n-1} weight(s) z^s M^s x` with `M = A` or `A^T`.
fn power_sum_into(
    z: Complex64,
    a: &[Complex64],
    x: &[Complex64],
    action: Action,
    weight: impl Fn(usize) -> f64,
    out: &mut [Complex64],
    scratch: &mut Scratch,
) {
    let n = x.len();
    out.fill(ZERO);
    scratch.cur.copy_from_slice(x);
    let mut zs = Complex64::new(1.0, 0.0);
    for s in 1..n {
        match action {
            Action::Lower => shift_into(a, &scratch.cur, &mut scratch.next),
            Action::Transposed => transposed_shift_into(a, &scratch.cur, &mut scratch.next),
        }
        std::mem::swap(&mut scratch.cur, &mut scratch.next);
        zs *= z;
        let f = zs * weight(s);
        for (o, v) in out.iter_mut().zip(&scratch.cur) {
            *o += f * v;
        }
    }
}

fn damping(t: f64, u: f64) -> Complex64 {
    Complex64::from_polar((-t).exp(), -u)
}

/// Right-hand side of the coefficient system. Entry 1 is exactly zero.
pub fn coefficient_rhs(t: f64, a: &CoefficientVector, u_val: f64) -> Vec<Complex64> {
    let n = a.order();
    let mut out = vec![ZERO; n];
    let mut scratch = Scratch::new(n);
    power_sum_into(damping(t, u_val), a.as_slice(), a.as_slice(), Action::Lower, |_| -2.0, &mut out, &mut scratch);
    out
}

/// Right-hand side of the adjoint system for `conj(Psi)`. Entry `n` is
/// exactly zero.
pub fn adjoint_rhs(t: f64, a: &CoefficientVector, psi: &AdjointVector, u_val: f64) -> Result<Vec<Complex64>> {
    check_orders(a.order(), psi.order())?;
    let n = a.order();
    let mut out = vec![ZERO; n];
    let mut scratch = Scratch::new(n);
    power_sum_into(
        damping(t, u_val),
        a.as_slice(),
        psi.as_slice(),
        Action::Transposed,
        |s| 2.0 * (s + 1) as f64,
        &mut out,
        &mut scratch,
    );
    Ok(out)
}

/// Right-hand side of the companion system (the adjoint system without the
/// transpose). Entry 1 is exactly zero.
pub fn companion_rhs(t: f64, a: &CoefficientVector, q: &[Complex64], u_val: f64) -> Result<Vec<Complex64>> {
    check_orders(a.order(), q.len())?;
    let n = a.order();
    let mut out = vec![ZERO; n];
    let mut scratch = Scratch::new(n);
    power_sum_into(
        damping(t, u_val),
        a.as_slice(),
        q,
        Action::Lower,
        |s| 2.0 * (s + 1) as f64,
        &mut out,
        &mut scratch,
    );
    Ok(out)
}

/// Fixed-step RK4 settings.
#[derive(Clone, Debug, PartialEq)]
pub struct Integrator {
    pub horizon: f64,
    pub step: f64,
    /// Keep every `sample_every`-th step (the final state is always kept).
    pub sample_every: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            step: DEFAULT_STEP,
            sample_every: 1,
        }
    }
}

/// Joint state layout: `[a | psi? | q?]`, each block of length `n`.
struct JointSystem<'a> {
    n: usize,
    driving: &'a DrivingFunction,
    with_psi: bool,
    with_q: bool,
    scratch: Scratch,
}

impl JointSystem<'_> {
    fn blocks(&self) -> usize {
        1 + self.with_psi as usize + self.with_q as usize
    }

    fn derivative(&mut self, t: f64, u: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let n = self.n;
        let z = damping(t, u);
        let (a, rest) = y.split_at(n);
        let (da, drest) = dy.split_at_mut(n);
        power_sum_into(z, a, a, Action::Lower, |_| -2.0, da, &mut self.scratch);
        let mut offset = 0;
        if self.with_psi {
            power_sum_into(
                z,
                a,
                &rest[offset..offset + n],
                Action::Transposed,
                |s| 2.0 * (s + 1) as f64,
                &mut drest[offset..offset + n],
                &mut self.scratch,
            );
            offset += n;
        }
        if self.with_q {
            power_sum_into(
                z,
                a,
                &rest[offset..offset + n],
                Action::Lower,
                |s| 2.0 * (s + 1) as f64,
                &mut drest[offset..offset + n],
                &mut self.scratch,
            );
        }
    }
}

/// Upper bound on the remaining change of a state block beyond `t = horizon`,
/// freezing the slowly varying factors: `sum_s w_s |M^s x|_inf e^{-sT} / s`.
fn tail_bound(
    horizon: f64,
    a: &[Complex64],
    x: &[Complex64],
    action: Action,
    weight: impl Fn(usize) -> f64,
) -> f64 {
    let n = x.len();
    let mut cur = x.to_vec();
    let mut next = vec![ZERO; n];
    let mut total = 0.0;
    for s in 1..n {
        match action {
            Action::Lower => shift_into(a, &cur, &mut next),
            Action::Transposed => transposed_shift_into(a, &cur, &mut next),
        }
        std::mem::swap(&mut cur, &mut next);
        let norm = cur.iter().map(|c| c.norm()).fold(0.0, f64::max);
        total += weight(s) * norm * (-(s as f64) * horizon).exp() / s as f64;
    }
    total
}

impl Integrator {
    pub fn new(horizon: f64, step: f64) -> Self {
        Self {
            horizon,
            step,
            sample_every: 1,
        }
    }

    pub fn with_sample_every(mut self, every: usize) -> Self {
        self.sample_every = every.max(1);
        self
    }

    /// Integrates the coefficient system from `initial`, together with the
    /// adjoint system from `psi0` and the companion system from `q0` when
    /// given.
    pub fn run(
        &self,
        driving: &DrivingFunction,
        initial: &CoefficientVector,
        psi0: Option<&AdjointVector>,
        q0: Option<&[Complex64]>,
    ) -> Result<Trajectory> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return domain(format!("horizon must be positive, got {}", self.horizon));
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return domain(format!("step must lie in (0, horizon], got {}", self.step));
        }
        driving.validate()?;
        let n = initial.order();
        if let Some(psi) = psi0 {
            check_orders(n, psi.order())?;
        }
        if let Some(q) = q0 {
            check_orders(n, q.len())?;
        }

        let steps = ((self.horizon / self.step) - 1e-9).ceil().max(1.0) as usize;
        let h = self.horizon / steps as f64;
        let mut sys = JointSystem {
            n,
            driving,
            with_psi: psi0.is_some(),
            with_q: q0.is_some(),
            scratch: Scratch::new(n),
        };
        let dim = n * sys.blocks();
        let mut y = Vec::with_capacity(dim);
        y.extend_from_slice(initial.as_slice());
        if let Some(psi) = psi0 {
            y.extend_from_slice(psi.as_slice());
        }
        if let Some(q) = q0 {
            y.extend_from_slice(q);
        }

        let mut k1 = vec![ZERO; dim];
        let mut k2 = vec![ZERO; dim];
        let mut k3 = vec![ZERO; dim];
        let mut k4 = vec![ZERO; dim];
        let mut tmp = vec![ZERO; dim];

        let capacity = steps / self.sample_every + 2;
        let mut times = Vec::with_capacity(capacity);
        let mut states: Vec<Vec<Complex64>> = Vec::with_capacity(capacity);
        times.push(0.0);
        states.push(y.clone());

        for step in 0..steps {
            let t = step as f64 * h;
            let u1 = sys.driving.stage_value(t, h, t);
            let u2 = sys.driving.stage_value(t, h, t + 0.5 * h);
            let u4 = sys.driving.stage_value(t, h, t + h);

            sys.derivative(t, u1, &y, &mut k1);
            for i in 0..dim {
                tmp[i] = y[i] + k1[i] * (0.5 * h);
            }
            sys.derivative(t + 0.5 * h, u2, &tmp, &mut k2);
            for i in 0..dim {
                tmp[i] = y[i] + k2[i] * (0.5 * h);
            }
            sys.derivative(t + 0.5 * h, u2, &tmp, &mut k3);
            for i in 0..dim {
                tmp[i] = y[i] + k3[i] * h;
            }
            sys.derivative(t + h, u4, &tmp, &mut k4);
            for i in 0..dim {
                y[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0);
            }

            let t_next = (step + 1) as f64 * h;
            if y.iter().any(|c| !(c.re.is_finite() && c.im.is_finite()) || c.norm() > 1e150) {
                return Err(Error::Blowup { time: t_next });
            }
            if (step + 1) % self.sample_every == 0 || step + 1 == steps {
                times.push(t_next);
                states.push(y.clone());
            }
        }

        let a_final = &y[..n];
        let mut tail = tail_bound(self.horizon, a_final, a_final, Action::Lower, |_| 2.0);
        let mut offset = n;
        if psi0.is_some() {
            let b = tail_bound(
                self.horizon,
                a_final,
                &y[offset..offset + n],
                Action::Transposed,
                |s| 2.0 * (s + 1) as f64,
            );
            tail = tail.max(b);
            offset += n;
        }
        if q0.is_some() {
            let b = tail_bound(
                self.horizon,
                a_final,
                &y[offset..offset + n],
                Action::Lower,
                |s| 2.0 * (s + 1) as f64,
            );
            tail = tail.max(b);
        }

        let a_samples = states
            .iter()
            .map(|s| CoefficientVector::from_raw(s[..n].to_vec()))
            .collect();
        let psi_samples = psi0.map(|_| {
            states
                .iter()
                .map(|s| AdjointVector {
                    psi_bar: s[n..2 * n].to_vec(),
                })
                .collect()
        });
        let q_offset = if psi0.is_some() { 2 * n } else { n };
        let companion_samples = q0.map(|_| states.iter().map(|s| s[q_offset..q_offset + n].to_vec()).collect());

        Ok(Trajectory {
            times,
            a_samples,
            psi_samples,
            companion_samples,
            horizon: self.horizon,
            step: h,
            tail_error_estimate: tail,
        })
    }
}

/// Integrates from the identity map `a^0` over `[0, horizon]` with step `step`.
pub fn integrate(
    driving: &DrivingFunction,
    n: usize,
    horizon: f64,
    step: f64,
    psi0: Option<&AdjointVector>,
    q0: Option<&[Complex64]>,
) -> Result<Trajectory> {
    let initial = CoefficientVector::identity(n)?;
    Integrator::new(horizon, step).run(driving, &initial, psi0, q0)
}
