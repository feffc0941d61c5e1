//! Synthetic cure indicators and the IPCW-weighted Bernoulli likelihood of
//! the logistic cure regression.
//!
//! With `S_C` the censoring survivor function, the synthetic indicator
//! `B* = 1 - delta / S_C(Y- | X)` has the same conditional mean as the
//! unobserved cure indicator `B`. Substituting `B*` for `B` in the logistic
//! log-likelihood gives an objective that is linear in `B*` and concave in
//! the coefficients, so it is maximized by plain Newton-Raphson.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::censoring::CensoringModel;
use crate::data::{Design, SurvivalDataset};
use crate::error::{Error, Result};
use crate::newton::{maximize, Concave, NewtonOptions};

pub const CURE_MAX_ITER: usize = 100;
pub const CURE_GRAD_TOL: f64 = 1e-8;
pub const DIVERGENCE_LIMIT: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticIndicators {
    pub b_star: Vec<f64>,
    /// Subjects whose pre-clamp `S_C(Y-|X)` fell below the low-overlap threshold.
    pub low_overlap_count: usize,
}

impl SyntheticIndicators {
    /// Wraps externally supplied indicators (e.g. true cure status in a
    /// simulation).
    pub fn from_values(b_star: Vec<f64>) -> Self {
        Self {
            b_star,
            low_overlap_count: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.b_star.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_star.is_empty()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self::from_values(rows.iter().map(|&i| self.b_star[i]).collect())
    }
}

pub fn synthetic_indicators(
    data: &SurvivalDataset,
    model: &CensoringModel,
) -> Result<SyntheticIndicators> {
    let mut low = 0;
    let mut b_star = Vec::with_capacity(data.len());
    for s in data.subjects() {
        let sv = model.survivor_left_limit(s.y, &s.x)?;
        if sv.low_overlap {
            low += 1;
        }
        b_star.push(if s.delta { 1.0 - 1.0 / sv.value } else { 1.0 });
    }
    Ok(SyntheticIndicators {
        b_star,
        low_overlap_count: low,
    })
}

pub(crate) fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Logistic likelihood with (possibly non-binary) responses `b`.
pub(crate) struct CureObjective<'a> {
    pub design: &'a Design,
    pub b: &'a [f64],
}

impl CureObjective<'_> {
    pub fn loglik(&self, theta: &[f64]) -> f64 {
        (0..self.design.n())
            .map(|i| {
                let w = self.design.weight(i);
                if w == 0.0 {
                    return 0.0;
                }
                let eta = self.design.linear_predictor(i, theta);
                w * (self.b[i] * eta - softplus(eta))
            })
            .sum()
    }

    /// Score and (lower-triangle filled) Hessian in one pass.
    pub fn score_hessian(&self, theta: &[f64], want_hessian: bool) -> (Vec<f64>, Vec<f64>) {
        let k = self.design.k();
        let mut g = vec![0.0; k];
        let mut h = vec![0.0; if want_hessian { k * k } else { 0 }];
        for i in 0..self.design.n() {
            let w = self.design.weight(i);
            if w == 0.0 {
                continue;
            }
            let row = self.design.row(i);
            let eta: f64 = row.iter().zip(theta).map(|(a, b)| a * b).sum();
            let pi = logistic(eta);
            let r = w * (self.b[i] - pi);
            for a in 0..k {
                g[a] += r * row[a];
            }
            if want_hessian {
                let v = w * pi * (1.0 - pi);
                for a in 0..k {
                    let va = v * row[a];
                    for c in 0..=a {
                        h[a * k + c] -= va * row[c];
                    }
                }
            }
        }
        if want_hessian {
            for a in 0..k {
                for c in 0..a {
                    h[c * k + a] = h[a * k + c];
                }
            }
        }
        (g, h)
    }
}

impl Concave for CureObjective<'_> {
    fn dim(&self) -> usize {
        self.design.k()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.loglik(theta.as_slice())
    }

    fn grad_hess(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.design.k();
        let (g, h) = self.score_hessian(theta.as_slice(), true);
        (DVector::from_vec(g), DMatrix::from_row_slice(k, k, &h))
    }
}

fn check_theta(theta: &[f64], data: &SurvivalDataset, ind: &SyntheticIndicators) -> Result<()> {
    if theta.len() != data.p() + 1 {
        return Err(Error::DimensionMismatch {
            expected: data.p() + 1,
            found: theta.len(),
        });
    }
    if ind.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: ind.len(),
        });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("theta"));
    }
    Ok(())
}

/// `sum_i omega_i [B*_i log pi_i + (1 - B*_i) log(1 - pi_i)]`.
pub fn cure_loglik(theta: &[f64], data: &SurvivalDataset, ind: &SyntheticIndicators) -> Result<f64> {
    check_theta(theta, data, ind)?;
    let design = Design::from_dataset(data);
    Ok(CureObjective {
        design: &design,
        b: &ind.b_star,
    }
    .loglik(theta))
}

pub fn cure_score(
    theta: &[f64],
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
) -> Result<Vec<f64>> {
    check_theta(theta, data, ind)?;
    let design = Design::from_dataset(data);
    Ok(CureObjective {
        design: &design,
        b: &ind.b_star,
    }
    .score_hessian(theta, false)
    .0)
}

/// `-sum_i omega_i pi_i (1 - pi_i) x_i x_i'` with `x_i = (1, covariates)`.
pub fn cure_hessian(
    theta: &[f64],
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
) -> Result<DMatrix<f64>> {
    check_theta(theta, data, ind)?;
    let design = Design::from_dataset(data);
    let k = design.k();
    let h = CureObjective {
        design: &design,
        b: &ind.b_star,
    }
    .score_hessian(theta, true)
    .1;
    Ok(DMatrix::from_row_slice(k, k, &h))
}

#[derive(Debug, Clone)]
pub struct CureFit {
    /// Intercept first.
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
    pub n_iterations: usize,
    pub converged: bool,
    pub indicators: SyntheticIndicators,
    pub censoring: Option<CensoringModel>,
    /// Log-likelihood at the start point and after every Newton step.
    pub loglik_trace: Vec<f64>,
}

pub fn fit_cure(data: &SurvivalDataset, model: &CensoringModel) -> Result<CureFit> {
    data.require_events()?;
    let ind = synthetic_indicators(data, model)?;
    let mut fit = fit_cure_with_indicators(data, ind)?;
    fit.censoring = Some(model.clone());
    Ok(fit)
}

/// Maximizes the likelihood for given indicators.
pub fn fit_cure_with_indicators(data: &SurvivalDataset, ind: SyntheticIndicators) -> Result<CureFit> {
    if ind.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: ind.len(),
        });
    }
    let design = Design::from_dataset(data);
    let out = fit_design(&design, &ind.b_star, None)?;
    Ok(CureFit {
        theta: out.theta.as_slice().to_vec(),
        loglik: out.value,
        score_norm: out.grad_norm,
        n_iterations: out.iterations,
        converged: out.converged,
        indicators: ind,
        censoring: None,
        loglik_trace: out.trace,
    })
}

pub(crate) fn fit_design(
    design: &Design,
    b: &[f64],
    start: Option<&[f64]>,
) -> Result<crate::newton::NewtonOutcome> {
    if design.n() == 0 {
        return Err(Error::EmptyDataset);
    }
    let first = b[0];
    if b.iter().all(|&v| v == first) {
        return Err(Error::DegenerateIndicators(first));
    }
    let k = design.k();
    let obj = CureObjective { design, b };
    // rank check on the weighted Gram matrix (curvature at pi = 1/2)
    let (_, h0) = obj.score_hessian(&vec![0.0; k], true);
    if DMatrix::from_row_slice(k, k, &h0).scale(-1.0).cholesky().is_none() {
        return Err(Error::RankDeficient);
    }
    let start = start.map_or_else(|| DVector::zeros(k), DVector::from_column_slice);
    maximize(
        &obj,
        start,
        NewtonOptions {
            what: "cure likelihood",
            max_iter: CURE_MAX_ITER,
            grad_tol: CURE_GRAD_TOL,
            max_halvings: 30,
            divergence_limit: Some(DIVERGENCE_LIMIT),
        },
    )
    .map_err(|e| match e {
        Error::SingularInformation(_) => Error::RankDeficient,
        other => other,
    })
}
