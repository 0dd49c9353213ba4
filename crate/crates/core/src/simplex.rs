//! Nelder–Mead maximization with best-so-far retention.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub(crate) struct NelderMead {
    pub max_iterations: usize,
    /// Stop once the spread of simplex values falls below this.
    pub value_tol: f64,
    /// ... and the simplex diameter below this.
    pub point_tol: f64,
}

#[derive(Clone, Debug)]
#[cfg_attr(not(test), allow(dead_code))]
pub(crate) struct Maximum {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

struct Tracked<F> {
    f: F,
    best: Option<(Vec<f64>, f64)>,
    evaluations: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Tracked<F> {
    /// Returns the negated objective so the simplex logic minimizes.
    fn eval(&mut self, x: &[f64]) -> Result<f64> {
        let v = (self.f)(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteObjective { perturbation: x.to_vec() });
        }
        self.evaluations += 1;
        if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
            self.best = Some((x.to_vec(), v));
        }
        Ok(-v)
    }
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

impl NelderMead {
    /// Maximizes `f` starting from the simplex `x0, x0 + step e_i`. The
    /// returned point is the best one ever evaluated, so a larger iteration
    /// cap never yields a smaller value.
    pub fn maximize<F>(&self, f: F, x0: &[f64], step: f64) -> Result<Maximum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let d = x0.len();
        let mut tracked = Tracked {
            f,
            best: None,
            evaluations: 0,
        };
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        let v0 = tracked.eval(x0)?;
        simplex.push((x0.to_vec(), v0));
        for i in 0..d {
            let mut x = x0.to_vec();
            x[i] += step;
            let v = tracked.eval(&x)?;
            simplex.push((x, v));
        }

        for _ in 0..self.max_iterations {
            if d == 0 {
                break;
            }
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[d].1 - simplex[0].1;
            let diameter = simplex[1..]
                .iter()
                .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if spread <= self.value_tol && diameter <= self.point_tol {
                break;
            }

            let mut centroid = vec![0.0; d];
            for (x, _) in &simplex[..d] {
                for (c, xi) in centroid.iter_mut().zip(x) {
                    *c += xi / d as f64;
                }
            }
            let worst = simplex[d].clone();
            let reflected = lerp(&centroid, &worst.0, -1.0);
            let fr = tracked.eval(&reflected)?;

            if fr < simplex[0].1 {
                let expanded = lerp(&centroid, &worst.0, -2.0);
                let fe = tracked.eval(&expanded)?;
                simplex[d] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
                continue;
            }
            if fr < simplex[d - 1].1 {
                simplex[d] = (reflected, fr);
                continue;
            }
            let (contracted, fc) = if fr < worst.1 {
                let x = lerp(&centroid, &worst.0, -0.5);
                let v = tracked.eval(&x)?;
                (x, v)
            } else {
                let x = lerp(&centroid, &worst.0, 0.5);
                let v = tracked.eval(&x)?;
                (x, v)
            };
            if fc < fr.min(worst.1) {
                simplex[d] = (contracted, fc);
                continue;
            }
            let anchor = simplex[0].0.clone();
            for vertex in simplex.iter_mut().skip(1) {
                let x = lerp(&anchor, &vertex.0, 0.5);
                let v = tracked.eval(&x)?;
                *vertex = (x, v);
            }
        }

        let (point, value) = tracked.best.expect("at least one evaluation");
        Ok(Maximum {
            point,
            value,
            evaluations: tracked.evaluations,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(max_iterations: usize) -> NelderMead {
        NelderMead {
            max_iterations,
            value_tol: 1e-14,
            point_tol: 1e-10,
        }
    }

    #[test]
    fn finds_concave_maximum() {
        let f = |x: &[f64]| Ok(-(x[0] - 1.0).powi(2) - 10.0 * (x[1] + 0.5).powi(2) + 3.0);
        let m = solver(2000).maximize(f, &[0.0, 0.0], 0.5).unwrap();
        assert!((m.point[0] - 1.0).abs() < 1e-6 && (m.point[1] + 0.5).abs() < 1e-6);
        assert!((m.value - 3.0).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok(-(100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2)));
        let m = solver(5000).maximize(f, &[-1.2, 1.0], 0.5).unwrap();
        assert!((m.point[0] - 1.0).abs() < 1e-4 && (m.point[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn more_iterations_never_worse() {
        let f = |x: &[f64]| Ok((3.0 * x[0]).sin() + (2.0 * x[1]).cos() - 0.1 * x[2] * x[2] + x[0] * x[2]);
        let mut last = f64::NEG_INFINITY;
        for cap in [0, 1, 2, 5, 10, 20, 50, 100, 400] {
            let m = solver(cap).maximize(f, &[0.3, -0.2, 0.1], 0.3).unwrap();
            assert!(m.value >= last);
            last = m.value;
        }
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let f = |x: &[f64]| Ok(if x[0] > 0.5 { f64::NAN } else { x[0] });
        match solver(100).maximize(f, &[0.0], 1.0) {
            Err(Error::NonFiniteObjective { perturbation }) => assert_eq!(perturbation, vec![1.0]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
