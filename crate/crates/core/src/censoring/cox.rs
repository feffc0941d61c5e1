//! Cox proportional hazards model for the censoring time, fitted by maximum
//! partial likelihood (Breslow ties) with a Breslow baseline cumulative
//! hazard. Censorings (`delta == false`) are the events here.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::km::StepCurve;
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::newton::{maximize, Concave, NewtonOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoxOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    pub max_halvings: usize,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-8,
            max_halvings: 30,
        }
    }
}

/// A group of subjects sharing one observed time.
struct TimeGroup {
    time: f64,
    censored: Vec<usize>,
    events: Vec<usize>,
}

/// Partial likelihood of the censoring process on centered covariates.
struct PartialLikelihood {
    x: Vec<Vec<f64>>,
    /// Descending in time.
    groups: Vec<TimeGroup>,
    p: usize,
}

impl PartialLikelihood {
    fn new(data: &SurvivalDataset, means: &[f64]) -> Self {
        let x: Vec<Vec<f64>> = data
            .subjects()
            .iter()
            .map(|s| s.x.iter().zip(means).map(|(v, m)| v - m).collect())
            .collect();
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.sort_by(|&a, &b| data.subjects()[b].y.total_cmp(&data.subjects()[a].y));
        let mut groups: Vec<TimeGroup> = Vec::new();
        for i in order {
            let s = &data.subjects()[i];
            if groups.last().is_none_or(|g| g.time != s.y) {
                groups.push(TimeGroup {
                    time: s.y,
                    censored: Vec::new(),
                    events: Vec::new(),
                });
            }
            let g = groups.last_mut().unwrap();
            if s.delta {
                g.events.push(i);
            } else {
                g.censored.push(i);
            }
        }
        Self {
            x,
            groups,
            p: data.p(),
        }
    }

    fn eta(&self, beta: &[f64]) -> Vec<f64> {
        self.x
            .iter()
            .map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Walks the risk sets from the latest time backwards. For each distinct
    /// censoring time calls `visit(group, s0, s1, s2)` with the risk-set sums
    /// of `exp(eta - shift)`, `x exp(eta - shift)` and `x x' exp(eta - shift)`.
    fn sweep(
        &self,
        beta: &[f64],
        second_order: bool,
        mut visit: impl FnMut(&TimeGroup, f64, &[f64], &[f64], f64),
    ) {
        let eta = self.eta(beta);
        let shift = eta.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let p = self.p;
        let mut s0 = 0.0;
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; if second_order { p * p } else { 0 }];
        let add = |i: usize, s0: &mut f64, s1: &mut [f64], s2: &mut [f64]| {
            let r = (eta[i] - shift).exp();
            *s0 += r;
            let xi = &self.x[i];
            for a in 0..p {
                s1[a] += r * xi[a];
                if second_order {
                    for b in 0..p {
                        s2[a * p + b] += r * xi[a] * xi[b];
                    }
                }
            }
        };
        for g in &self.groups {
            for &i in &g.censored {
                add(i, &mut s0, &mut s1, &mut s2);
            }
            if !g.censored.is_empty() {
                visit(g, s0, &s1, &s2, shift);
            }
            for &i in &g.events {
                add(i, &mut s0, &mut s1, &mut s2);
            }
        }
    }

    fn loglik(&self, beta: &[f64]) -> f64 {
        let eta = self.eta(beta);
        let mut ll = 0.0;
        self.sweep(beta, false, |g, s0, _, _, shift| {
            let d = g.censored.len() as f64;
            ll += g.censored.iter().map(|&i| eta[i]).sum::<f64>() - d * (s0.ln() + shift);
        });
        ll
    }

    fn score(&self, beta: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut u = vec![0.0; p];
        self.sweep(beta, false, |g, s0, s1, _, _| {
            let d = g.censored.len() as f64;
            for a in 0..p {
                u[a] += g.censored.iter().map(|&i| self.x[i][a]).sum::<f64>() - d * s1[a] / s0;
            }
        });
        u
    }

    fn score_hessian(&self, beta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut u = vec![0.0; p];
        let mut h = vec![0.0; p * p];
        self.sweep(beta, true, |g, s0, s1, s2, _| {
            let d = g.censored.len() as f64;
            for a in 0..p {
                u[a] += g.censored.iter().map(|&i| self.x[i][a]).sum::<f64>() - d * s1[a] / s0;
                for b in 0..p {
                    h[a * p + b] -= d * (s2[a * p + b] / s0 - s1[a] * s1[b] / (s0 * s0));
                }
            }
        });
        (u, h)
    }
}

impl Concave for PartialLikelihood {
    fn dim(&self) -> usize {
        self.p
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loglik(theta.as_slice())
    }

    fn grad_hess(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let (u, h) = self.score_hessian(theta.as_slice());
        (
            DVector::from_vec(u),
            DMatrix::from_row_slice(self.p, self.p, &h),
        )
    }
}

/// Fitted Cox censoring model.
#[derive(Debug, Clone, Serialize)]
pub struct CoxCensoring {
    pub beta: Vec<f64>,
    /// Covariate means used for centering during the fit.
    pub means: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    pub iterations: usize,
    /// Breslow cumulative hazard at the centered covariate point.
    centered_cumhaz: StepCurve,
}

impl CoxCensoring {
    pub fn fit(data: &SurvivalDataset, opts: &CoxOptions) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if data.subjects().iter().all(|s| s.delta) {
            return Err(Error::NoCensoringEvents);
        }
        let p = data.p();
        let n = data.len() as f64;
        let means: Vec<f64> = (0..p)
            .map(|j| data.subjects().iter().map(|s| s.x[j]).sum::<f64>() / n)
            .collect();
        let pl = PartialLikelihood::new(data, &means);
        let (beta, loglik, score_norm, iterations) = if p == 0 {
            (Vec::new(), pl.loglik(&[]), 0.0, 0)
        } else {
            let out = maximize(
                &pl,
                DVector::zeros(p),
                NewtonOptions {
                    what: "cox partial likelihood",
                    max_iter: opts.max_iter,
                    grad_tol: opts.grad_tol,
                    max_halvings: opts.max_halvings,
                    divergence_limit: None,
                },
            )?;
            if !out.converged {
                return Err(Error::NonConvergence {
                    what: "cox partial likelihood",
                    iterations: out.iterations,
                    grad_norm: out.grad_norm,
                    theta_norm: out.theta.norm(),
                });
            }
            (out.theta.as_slice().to_vec(), out.value, out.grad_norm, out.iterations)
        };

        let mut jumps: Vec<(f64, f64)> = Vec::new();
        pl.sweep(&beta, false, |g, s0, _, _, shift| {
            let d = g.censored.len() as f64;
            jumps.push((g.time, d / (s0 * shift.exp())));
        });
        jumps.reverse();
        let mut acc = 0.0;
        let (times, cum): (Vec<f64>, Vec<f64>) = jumps
            .into_iter()
            .map(|(t, dh)| {
                acc += dh;
                (t, acc)
            })
            .unzip();
        Ok(Self {
            beta,
            means,
            loglik,
            score_norm,
            iterations,
            centered_cumhaz: StepCurve::new(times, cum),
        })
    }

    fn relative_risk(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.means)
            .zip(&self.beta)
            .map(|((v, m), b)| (v - m) * b)
            .sum::<f64>()
            .exp()
    }

    fn centered_cumhaz_at(&self, t: f64, left: bool) -> f64 {
        // StepCurve::at returns 1 before the first jump; a hazard starts at 0
        let c = &self.centered_cumhaz;
        let k = if left {
            c.times().partition_point(|&s| s < t)
        } else {
            c.times().partition_point(|&s| s <= t)
        };
        if k == 0 {
            0.0
        } else {
            c.values()[k - 1]
        }
    }

    /// Breslow baseline cumulative hazard `Lambda_0(t)` at `x = 0`.
    pub fn baseline_cumhaz(&self, t: f64) -> f64 {
        self.centered_cumhaz_at(t, false) * self.relative_risk(&vec![0.0; self.beta.len()])
    }

    /// Distinct censoring times at which the baseline hazard jumps.
    pub fn jump_times(&self) -> &[f64] {
        self.centered_cumhaz.times()
    }

    pub fn survivor(&self, t: f64, x: &[f64]) -> f64 {
        (-self.relative_risk(x) * self.centered_cumhaz_at(t, false)).exp()
    }

    pub fn survivor_left_limit(&self, t: f64, x: &[f64]) -> f64 {
        (-self.relative_risk(x) * self.centered_cumhaz_at(t, true)).exp()
    }
}

/// Breslow log partial likelihood of the censoring process at `beta`
/// (uncentered covariates).
pub fn cox_partial_loglik(data: &SurvivalDataset, beta: &[f64]) -> f64 {
    PartialLikelihood::new(data, &vec![0.0; data.p()]).loglik(beta)
}

pub fn cox_partial_score(data: &SurvivalDataset, beta: &[f64]) -> Vec<f64> {
    PartialLikelihood::new(data, &vec![0.0; data.p()]).score(beta)
}

/// Row-major `p x p` Hessian of the log partial likelihood.
pub fn cox_partial_hessian(data: &SurvivalDataset, beta: &[f64]) -> Vec<f64> {
    PartialLikelihood::new(data, &vec![0.0; data.p()])
        .score_hessian(beta)
        .1
}
