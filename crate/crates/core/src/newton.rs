//! Damped Newton-Raphson for smooth concave objectives.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub(crate) trait Concave {
    fn dim(&self) -> usize;
    fn value(&self, theta: &DVector<f64>) -> f64;
    /// Gradient and Hessian (negative semidefinite).
    fn grad_hess(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>);
    /// A more conservative negative-definite curvature used when the exact
    /// Newton direction fails to ascend.
    fn fallback_hessian(&self, _theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonOptions {
    pub what: &'static str,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
    pub divergence_limit: Option<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct NewtonOutcome {
    pub theta: DVector<f64>,
    pub value: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point and after every accepted step.
    pub trace: Vec<f64>,
}

/// Objective values closer than this (relative) are treated as equal.
pub(crate) fn ascent_slack(f: f64) -> f64 {
    1e-12 * (1.0 + f.abs())
}

fn solve_neg(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let neg = -h;
    neg.cholesky().map(|c| c.solve(g))
}

pub(crate) fn maximize<F: Concave>(
    f: &F,
    start: DVector<f64>,
    opts: NewtonOptions,
) -> Result<NewtonOutcome> {
    if start.len() != f.dim() {
        return Err(Error::DimensionMismatch {
            expected: f.dim(),
            found: start.len(),
        });
    }
    let mut theta = start;
    let mut value = f.value(&theta);
    if !value.is_finite() {
        return Err(Error::NonFinite(opts.what));
    }
    let mut trace = vec![value];
    let mut grad_norm = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let (g, h) = f.grad_hess(&theta);
        grad_norm = g.norm();
        if !grad_norm.is_finite() {
            return Err(Error::NonFinite(opts.what));
        }
        if grad_norm <= opts.grad_tol {
            return Ok(NewtonOutcome {
                theta,
                value,
                grad_norm,
                iterations: iter,
                converged: true,
                trace,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let dir = solve_neg(&h, &g).ok_or(Error::SingularInformation(opts.what))?;
        let mut accepted = try_direction(f, &theta, value, &dir, opts.max_halvings);
        if accepted.is_none() {
            if let Some(hf) = f.fallback_hessian(&theta) {
                if let Some(d2) = solve_neg(&hf, &g) {
                    accepted = try_direction(f, &theta, value, &d2, opts.max_halvings);
                }
            }
        }
        let Some((next, next_value)) = accepted else {
            // No ascent possible at working precision.
            break;
        };
        theta = next;
        value = next_value;
        trace.push(value);
        if let Some(limit) = opts.divergence_limit {
            let norm = theta.norm();
            if norm > limit {
                return Err(Error::Divergence {
                    what: opts.what,
                    iteration: iter + 1,
                    theta_norm: norm,
                    limit,
                });
            }
        }
    }
    let iterations = trace.len() - 1;
    Ok(NewtonOutcome {
        theta,
        value,
        grad_norm,
        iterations,
        converged: false,
        trace,
    })
}

fn try_direction<F: Concave>(
    f: &F,
    theta: &DVector<f64>,
    value: f64,
    dir: &DVector<f64>,
    max_halvings: usize,
) -> Option<(DVector<f64>, f64)> {
    let mut step = 1.0;
    for _ in 0..=max_halvings {
        let cand = theta + dir * step;
        let v = f.value(&cand);
        if v.is_finite() && v >= value - ascent_slack(value) && cand != *theta {
            return Some((cand, v));
        }
        step *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quad;
    impl Concave for Quad {
        fn dim(&self) -> usize {
            2
        }
        fn value(&self, t: &DVector<f64>) -> f64 {
            -(t[0] - 1.0).powi(2) - 2.0 * (t[1] + 0.5).powi(2)
        }
        fn grad_hess(&self, t: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
            (
                DVector::from_vec(vec![-2.0 * (t[0] - 1.0), -4.0 * (t[1] + 0.5)]),
                DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -4.0])),
            )
        }
    }

    #[test]
    fn quadratic_in_one_step() {
        let out = maximize(
            &Quad,
            DVector::zeros(Quad.dim()),
            NewtonOptions {
                what: "quad",
                max_iter: 10,
                grad_tol: 1e-12,
                max_halvings: 30,
                divergence_limit: None,
            },
        )
        .unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations, 1);
        assert!((out.theta[0] - 1.0).abs() < 1e-14);
        assert!((out.theta[1] + 0.5).abs() < 1e-14);
    }
}
