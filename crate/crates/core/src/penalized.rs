//! Lasso and adaptive-lasso selection for the cure regression.
//!
//! The absolute value in the l1 penalty is replaced by the smooth surrogate
//! `a_eps(x) = sqrt(x^2 + eps^2) - eps`, so the penalized objective
//! `l*(theta) - lambda * sum_j w_j a_eps(theta_j)` stays twice differentiable
//! and is maximized by the same damped Newton iteration as the unpenalized
//! fit. The intercept is never penalized. Because the surrogate never
//! produces exact zeros, a coefficient is reported as zero when its
//! magnitude on the standardized scale is below `zero_threshold`.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::CensoringModel;
use crate::cure::{self, logistic, synthetic_indicators, CureObjective, SyntheticIndicators};
use crate::data::{destandardize_coefficients, standardize, Design, Standardization, SurvivalDataset};
use crate::error::{Error, Result};
use crate::newton::{maximize, Concave, NewtonOptions};
use crate::rng::stream;

pub const PENALIZED_MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    Lasso,
    Alasso,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub kind: PenaltyKind,
    pub gamma: f64,
    pub epsilon: f64,
    pub zero_threshold: f64,
    pub weight_cap: f64,
}

impl PenaltyConfig {
    pub fn new(kind: PenaltyKind) -> Self {
        Self {
            kind,
            gamma: 1.0,
            epsilon: 1e-4,
            zero_threshold: DEFAULT_ZERO_THRESHOLD,
            weight_cap: 1e8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::InvalidConfig(
                "penalty epsilon and gamma must be positive".into(),
            ));
        }
        if !(self.zero_threshold > 0.0) || !(self.weight_cap > 0.0) {
            return Err(Error::InvalidConfig(
                "zero threshold and weight cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Coefficients below this magnitude (standardized scale) count as zero.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-3;

/// `sqrt(x^2 + eps^2) - eps`, evaluated without cancellation near zero.
pub fn smooth_abs(x: f64, epsilon: f64) -> f64 {
    let r = x.hypot(epsilon);
    x * x / (r + epsilon)
}

pub fn smooth_abs_deriv(x: f64, epsilon: f64) -> f64 {
    x / x.hypot(epsilon)
}

pub fn smooth_abs_second(x: f64, epsilon: f64) -> f64 {
    let r = x.hypot(epsilon);
    epsilon * epsilon / (r * r * r)
}

/// Per-coefficient penalty weights for `theta_1..theta_p`.
pub fn adaptive_weights(theta_unpenalized: &[f64], cfg: &PenaltyConfig) -> Vec<f64> {
    let slopes = theta_unpenalized.get(1..).unwrap_or(&[]);
    match cfg.kind {
        PenaltyKind::Lasso => vec![1.0; slopes.len()],
        PenaltyKind::Alasso => slopes
            .iter()
            .map(|t| (1.0 / t.abs().powf(cfg.gamma)).min(cfg.weight_cap))
            .collect(),
    }
}

struct PenalizedObjective<'a> {
    cure: CureObjective<'a>,
    lambda: f64,
    weights: &'a [f64],
    epsilon: f64,
}

impl PenalizedObjective<'_> {
    fn penalty(&self, theta: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&theta[1..])
            .map(|(w, t)| w * smooth_abs(*t, self.epsilon))
            .sum::<f64>()
            * self.lambda
    }

    fn curvature(&self, theta: &DVector<f64>, lqa: bool) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.cure.design.k();
        let (g, h) = self.cure.score_hessian(theta.as_slice(), true);
        let mut g = DVector::from_vec(g);
        let mut h = DMatrix::from_row_slice(k, k, &h);
        for (j, w) in self.weights.iter().enumerate() {
            let t = theta[j + 1];
            let lw = self.lambda * w;
            g[j + 1] -= lw * smooth_abs_deriv(t, self.epsilon);
            h[(j + 1, j + 1)] -= lw
                * if lqa {
                    1.0 / t.hypot(self.epsilon)
                } else {
                    smooth_abs_second(t, self.epsilon)
                };
        }
        (g, h)
    }
}

impl Concave for PenalizedObjective<'_> {
    fn dim(&self) -> usize {
        self.cure.design.k()
    }

    fn value(&self, theta: &DVector<f64>) -> f64 {
        self.cure.loglik(theta.as_slice()) - self.penalty(theta.as_slice())
    }

    fn grad_hess(&self, theta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        self.curvature(theta, false)
    }

    // Local quadratic approximation: a minorizer of the penalized objective,
    // so its step always ascends.
    fn fallback_hessian(&self, theta: &DVector<f64>) -> Option<DMatrix<f64>> {
        Some(self.curvature(theta, true).1)
    }
}

#[derive(Debug, Clone)]
pub struct PenalizedFit {
    pub theta: Vec<f64>,
    /// Penalized objective at `theta`.
    pub objective: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
}

pub(crate) fn fit_penalized_design(
    design: &Design,
    b: &[f64],
    lambda: f64,
    weights: &[f64],
    cfg: &PenaltyConfig,
    start: &[f64],
) -> Result<PenalizedFit> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("lambda must be nonnegative, got {lambda}")));
    }
    if weights.len() + 1 != design.k() {
        return Err(Error::DimensionMismatch {
            expected: design.k() - 1,
            found: weights.len(),
        });
    }
    if start.len() != design.k() {
        return Err(Error::DimensionMismatch {
            expected: design.k(),
            found: start.len(),
        });
    }
    let obj = PenalizedObjective {
        cure: CureObjective { design, b },
        lambda,
        weights,
        epsilon: cfg.epsilon,
    };
    let out = maximize(
        &obj,
        DVector::from_column_slice(start),
        NewtonOptions {
            what: "penalized cure likelihood",
            max_iter: PENALIZED_MAX_ITER,
            grad_tol: cure::CURE_GRAD_TOL,
            max_halvings: 30,
            divergence_limit: Some(cure::DIVERGENCE_LIMIT),
        },
    )?;
    if !out.converged {
        return Err(Error::NonConvergence {
            what: "penalized cure likelihood",
            iterations: out.iterations,
            grad_norm: out.grad_norm,
            theta_norm: out.theta.norm(),
        });
    }
    Ok(PenalizedFit {
        theta: out.theta.as_slice().to_vec(),
        objective: out.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        objective_trace: out.trace,
    })
}

/// Maximizes the smoothed penalized likelihood at a single `lambda`.
/// Covariates are used as given; standardize them first.
pub fn fit_penalized(
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
    lambda: f64,
    weights: &[f64],
    cfg: &PenaltyConfig,
    start: &[f64],
) -> Result<PenalizedFit> {
    cfg.validate()?;
    if ind.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: ind.len(),
        });
    }
    fit_penalized_design(&Design::from_dataset(data), &ind.b_star, lambda, weights, cfg, start)
}

/// A partition of `0..n` into cross-validation folds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Folds(Vec<Vec<usize>>);

impl Folds {
    pub fn new(folds: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut seen = vec![false; n];
        for f in &folds {
            for &i in f {
                if i >= n || seen[i] {
                    return Err(Error::InvalidConfig("folds must partition 0..n".into()));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|s| !s) || folds.iter().any(|f| f.is_empty()) {
            return Err(Error::InvalidConfig("folds must partition 0..n".into()));
        }
        Ok(Self(folds))
    }

    /// Shuffles events and censorings separately and deals them round-robin,
    /// so every fold gets its share of each.
    pub fn stratified(delta: &[bool], k: usize, seed: u64) -> Result<Self> {
        if k < 2 || k > delta.len() {
            return Err(Error::InvalidConfig(format!(
                "need 2 <= folds <= n, got {k} folds for n = {}",
                delta.len()
            )));
        }
        let mut rng = stream(seed, 0);
        let mut events: Vec<usize> = (0..delta.len()).filter(|&i| delta[i]).collect();
        let mut censored: Vec<usize> = (0..delta.len()).filter(|&i| !delta[i]).collect();
        events.shuffle(&mut rng);
        censored.shuffle(&mut rng);
        let mut folds = vec![Vec::new(); k];
        for (pos, i) in events.into_iter().chain(censored).enumerate() {
            folds[pos % k].push(i);
        }
        for f in &mut folds {
            f.sort_unstable();
        }
        Ok(Self(folds))
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn folds(&self) -> &[Vec<usize>] {
        &self.0
    }

    fn n(&self) -> usize {
        self.0.iter().map(Vec::len).sum()
    }

    /// Training rows for fold `j` (every row not in it), ascending.
    pub fn complement(&self, j: usize) -> Vec<usize> {
        let mut in_fold = vec![false; self.n()];
        for &i in &self.0[j] {
            in_fold[i] = true;
        }
        (0..self.n()).filter(|&i| !in_fold[i]).collect()
    }
}

/// Lasso weights, or adaptive weights from the unpenalized fit on `design`.
fn penalty_weights(design: &Design, b: &[f64], cfg: &PenaltyConfig) -> Result<Vec<f64>> {
    match cfg.kind {
        PenaltyKind::Lasso => Ok(vec![1.0; design.k() - 1]),
        PenaltyKind::Alasso => {
            let unpen = cure::fit_design(design, b, None)?;
            if !unpen.converged {
                return Err(Error::NonConvergence {
                    what: "unpenalized fit for adaptive weights",
                    iterations: unpen.iterations,
                    grad_norm: unpen.grad_norm,
                    theta_norm: unpen.theta.norm(),
                });
            }
            Ok(adaptive_weights(unpen.theta.as_slice(), cfg))
        }
    }
}

/// Training and held-out pieces of one fold.
struct FoldProblem {
    /// Penalty weights used on this fold's training part.
    weights: Vec<f64>,
    train: Design,
    train_b: Vec<f64>,
    test: Design,
    test_b: Vec<f64>,
}

impl FoldProblem {
    fn build(design: &Design, b: &[f64], folds: &Folds, j: usize, weights: Vec<f64>) -> Self {
        let train_rows = folds.complement(j);
        let test_rows = &folds.folds()[j];
        Self {
            weights,
            train: design.subset(&train_rows),
            train_b: train_rows.iter().map(|&i| b[i]).collect(),
            test: design.subset(test_rows),
            test_b: test_rows.iter().map(|&i| b[i]).collect(),
        }
    }

    fn held_out_sse(&self, theta: &[f64]) -> f64 {
        (0..self.test.n())
            .map(|i| (self.test_b[i] - logistic(self.test.linear_predictor(i, theta))).powi(2))
            .sum()
    }
}

/// Cross-validation error for given indicators: the mean over folds of the
/// held-out sum of squared residuals `B*_i - pi_i(theta^{-j})`.
pub fn cve_with_indicators(
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
    lambda: f64,
    weights: &[f64],
    cfg: &PenaltyConfig,
    folds: &Folds,
) -> Result<f64> {
    cfg.validate()?;
    if folds.n() != data.len() || ind.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: folds.n().min(ind.len()),
        });
    }
    let design = Design::from_dataset(data);
    let start = intercept_only_start(&design, &ind.b_star)?;
    let sums = (0..folds.k())
        .into_par_iter()
        .map(|j| {
            let fp = FoldProblem::build(&design, &ind.b_star, folds, j, weights.to_vec());
            let fit = fit_penalized_design(&fp.train, &fp.train_b, lambda, &fp.weights, cfg, &start)?;
            Ok(fp.held_out_sse(&fit.theta))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sums.iter().sum::<f64>() / folds.k() as f64)
}

/// Cross-validation error at `lambda` with indicators from `model` computed
/// once on the full data. Adaptive weights are refit on each fold's
/// training part, as in [`lambda_path`].
pub fn cve(
    data: &SurvivalDataset,
    model: &CensoringModel,
    lambda: f64,
    cfg: &PenaltyConfig,
    folds: &Folds,
) -> Result<f64> {
    cfg.validate()?;
    if folds.n() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            found: folds.n(),
        });
    }
    let ind = synthetic_indicators(data, model)?;
    let design = Design::from_dataset(data);
    let sums = (0..folds.k())
        .into_par_iter()
        .map(|j| {
            let rows = folds.complement(j);
            let train_b: Vec<f64> = rows.iter().map(|&i| ind.b_star[i]).collect();
            let w = penalty_weights(&design.subset(&rows), &train_b, cfg)?;
            let fp = FoldProblem::build(&design, &ind.b_star, folds, j, w);
            let start = intercept_only_start(&fp.train, &fp.train_b)?;
            let fit = fit_penalized_design(&fp.train, &fp.train_b, lambda, &fp.weights, cfg, &start)?;
            Ok(fp.held_out_sse(&fit.theta))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(sums.iter().sum::<f64>() / folds.k() as f64)
}

/// `(logit(mean B*), 0, ..., 0)`: the intercept-only maximizer.
fn intercept_only_start(design: &Design, b: &[f64]) -> Result<Vec<f64>> {
    let wsum: f64 = design.weights().iter().sum();
    let pbar = design.weights().iter().zip(b).map(|(w, v)| w * v).sum::<f64>() / wsum;
    if !(pbar > 0.0 && pbar < 1.0) {
        return Err(Error::DegenerateIndicators(pbar));
    }
    let mut start = vec![0.0; design.k()];
    start[0] = (pbar / (1.0 - pbar)).ln();
    Ok(start)
}

/// Smallest lambda at which the all-zero slope point is stationary for the
/// exact (eps -> 0) l1 objective: `max_j |U_j(intercept-only)| / w_j`.
fn lambda_max(design: &Design, b: &[f64], weights: &[f64]) -> Result<f64> {
    let start = intercept_only_start(design, b)?;
    let (score, _) = CureObjective { design, b }.score_hessian(&start, false);
    Ok(score[1..]
        .iter()
        .zip(weights)
        .map(|(u, w)| if *w > 0.0 { u.abs() / w } else { f64::INFINITY })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOptions {
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of the l1 `lambda_max`.
    pub min_ratio: f64,
    pub n_folds: usize,
    pub seed: u64,
    /// Golden-section refinement of the CVE minimizer between grid neighbours.
    pub refine: bool,
    pub fold_weights: FoldWeights,
}

/// Where the adaptive weights used inside cross-validation come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldWeights {
    /// The unpenalized fit on all data, shared by every fold.
    FullData,
    /// An unpenalized fit on each fold's training part.
    PerFold,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            n_lambda: 100,
            min_ratio: 1e-3,
            n_folds: 10,
            seed: 0,
            refine: false,
            fold_weights: FoldWeights::PerFold,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PathPoint {
    pub lambda: f64,
    /// Standardized-scale coefficients, intercept first.
    pub theta: Vec<f64>,
    pub df: usize,
    pub cve: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PenaltyPath {
    pub config: PenaltyConfig,
    pub options: PathOptions,
    /// Strictly decreasing.
    pub points: Vec<PathPoint>,
    pub lambda_max: f64,
    pub weights: Vec<f64>,
    pub standardization: Standardization,
    pub selected_index: usize,
    pub selected_lambda: f64,
    pub selected_cve: f64,
    /// Standardized-scale coefficients at the selected lambda with the
    /// below-threshold slopes set to zero.
    pub selected_theta_std: Vec<f64>,
    /// The same fit on the original covariate scale.
    pub final_theta: Vec<f64>,
    /// Covariate indices (0-based, intercept excluded) kept in the model.
    pub active_set: Vec<usize>,
}

impl PenaltyPath {
    pub fn lambdas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.lambda).collect()
    }
}

pub fn degrees_of_freedom(theta: &[f64], zero_threshold: f64) -> usize {
    theta.iter().filter(|t| t.abs() >= zero_threshold).count()
}

struct PathState<'a> {
    cfg: &'a PenaltyConfig,
    fold_problems: Vec<FoldProblem>,
}

impl PathState<'_> {
    /// Fits all folds at `lambda` from the given starts; returns the CVE and
    /// the fold solutions.
    fn cve_at(&self, lambda: f64, starts: &[Vec<f64>]) -> Result<(f64, Vec<Vec<f64>>)> {
        let fits = self
            .fold_problems
            .par_iter()
            .zip(starts)
            .map(|(fp, start)| {
                let fit =
                    fit_penalized_design(&fp.train, &fp.train_b, lambda, &fp.weights, self.cfg, start)?;
                Ok((fp.held_out_sse(&fit.theta), fit.theta))
            })
            .collect::<Result<Vec<_>>>()?;
        let k = fits.len() as f64;
        let cve = fits.iter().map(|f| f.0).sum::<f64>() / k;
        Ok((cve, fits.into_iter().map(|f| f.1).collect()))
    }
}

/// Builds the regularization path on standardized covariates, selects the
/// CVE-minimizing lambda and maps the selected fit back to the original
/// covariate scale.
pub fn lambda_path(
    data: &SurvivalDataset,
    model: &CensoringModel,
    cfg: &PenaltyConfig,
    opts: &PathOptions,
) -> Result<PenaltyPath> {
    data.require_events()?;
    let ind = synthetic_indicators(data, model)?;
    lambda_path_with_indicators(data, &ind, cfg, opts)
}

pub fn lambda_path_with_indicators(
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
    cfg: &PenaltyConfig,
    opts: &PathOptions,
) -> Result<PenaltyPath> {
    cfg.validate()?;
    if opts.n_lambda < 2 || !(opts.min_ratio > 0.0 && opts.min_ratio < 1.0) {
        return Err(Error::InvalidConfig(
            "path needs n_lambda >= 2 and 0 < min_ratio < 1".into(),
        ));
    }
    let (zdata, standardization) = standardize(data)?;
    let design = Design::from_dataset(&zdata);
    let b = &ind.b_star;

    let weights = penalty_weights(&design, b, cfg)?;

    let lmax = lambda_max(&design, b, &weights)?;
    // With the smoothed penalty a slope sits at eps*r/sqrt(1-r^2), r = |U_j|/(lambda w_j);
    // the top of the grid is where that falls under the zero threshold.
    let t = cfg.zero_threshold;
    let top = lmax * t.hypot(cfg.epsilon) / t;
    let bottom = lmax * opts.min_ratio;
    if !(lmax > 0.0 && lmax.is_finite()) {
        return Err(Error::DegenerateIndicators(lmax));
    }
    let n = opts.n_lambda;
    let lambdas: Vec<f64> = (0..n)
        .map(|i| {
            let f = i as f64 / (n - 1) as f64;
            (top.ln() + f * (bottom.ln() - top.ln())).exp()
        })
        .collect();

    let folds = Folds::stratified(
        &data.subjects().iter().map(|s| s.delta).collect::<Vec<_>>(),
        opts.n_folds,
        opts.seed,
    )?;
    let fold_problems = (0..folds.k())
        .map(|j| {
            let w = match opts.fold_weights {
                FoldWeights::FullData => weights.clone(),
                FoldWeights::PerFold => {
                    let rows = folds.complement(j);
                    let tb: Vec<f64> = rows.iter().map(|&i| b[i]).collect();
                    penalty_weights(&design.subset(&rows), &tb, cfg)?
                }
            };
            Ok(FoldProblem::build(&design, b, &folds, j, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let state = PathState { cfg, fold_problems };

    let start = intercept_only_start(&design, b)?;
    let mut full_start = start.clone();
    let mut fold_starts: Vec<Vec<f64>> = state
        .fold_problems
        .iter()
        .map(|fp| intercept_only_start(&fp.train, &fp.train_b))
        .collect::<Result<_>>()?;
    let mut points = Vec::with_capacity(n);
    let mut fold_history = Vec::with_capacity(n);
    for &lambda in &lambdas {
        let full = fit_penalized_design(&design, b, lambda, &weights, cfg, &full_start)?;
        let (cve, fold_thetas) = state.cve_at(lambda, &fold_starts)?;
        full_start = full.theta.clone();
        fold_starts = fold_thetas;
        fold_history.push(fold_starts.clone());
        points.push(PathPoint {
            lambda,
            df: degrees_of_freedom(&full.theta, t),
            theta: full.theta,
            cve,
        });
    }

    // first minimizer, i.e. the largest lambda among ties
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.cve < points[best].cve {
            best = i;
        }
    }
    let mut selected_lambda = points[best].lambda;
    let mut selected_cve = points[best].cve;
    let mut selected_theta = points[best].theta.clone();

    if opts.refine {
        let lo_idx = (best + 1).min(n - 1);
        let hi_idx = best.saturating_sub(1);
        let starts = &fold_history[best];
        let eval = |log_l: f64| -> Result<f64> { Ok(state.cve_at(log_l.exp(), starts)?.0) };
        let (mut a, mut c) = (points[lo_idx].lambda.ln(), points[hi_idx].lambda.ln());
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = c - phi * (c - a);
        let mut x2 = a + phi * (c - a);
        let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
        for _ in 0..30 {
            if (c - a).abs() < 1e-6 {
                break;
            }
            if f1 <= f2 {
                c = x2;
                x2 = x1;
                f2 = f1;
                x1 = c - phi * (c - a);
                f1 = eval(x1)?;
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + phi * (c - a);
                f2 = eval(x2)?;
            }
        }
        let (xm, fm) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
        if fm < selected_cve {
            selected_lambda = xm.exp();
            selected_cve = fm;
            selected_theta =
                fit_penalized_design(&design, b, selected_lambda, &weights, cfg, &selected_theta)?
                    .theta;
        }
    }

    let mut active_set = Vec::new();
    for (j, v) in selected_theta.iter_mut().enumerate().skip(1) {
        if v.abs() < t {
            *v = 0.0;
        } else {
            active_set.push(j - 1);
        }
    }
    let final_theta = destandardize_coefficients(&selected_theta, &standardization)?;

    Ok(PenaltyPath {
        config: *cfg,
        options: *opts,
        points,
        lambda_max: lmax,
        weights,
        standardization,
        selected_index: best,
        selected_lambda,
        selected_cve,
        selected_theta_std: selected_theta,
        final_theta,
        active_set,
    })
}

/// Penalized fit at a fixed `lambda` on standardized covariates, with
/// below-threshold slopes zeroed and coefficients mapped back to the
/// original scale. Adaptive weights come from the unpenalized fit on the
/// same data. `theta` of the result is on the original scale.
pub fn fit_at_lambda(
    data: &SurvivalDataset,
    ind: &SyntheticIndicators,
    lambda: f64,
    cfg: &PenaltyConfig,
) -> Result<PenalizedFit> {
    cfg.validate()?;
    data.require_events()?;
    let (zdata, s) = standardize(data)?;
    let design = Design::from_dataset(&zdata);
    let b = &ind.b_star;
    let weights = penalty_weights(&design, b, cfg)?;
    let start = intercept_only_start(&design, b)?;
    let mut fit = fit_penalized_design(&design, b, lambda, &weights, cfg, &start)?;
    for v in fit.theta.iter_mut().skip(1) {
        if v.abs() < cfg.zero_threshold {
            *v = 0.0;
        }
    }
    fit.theta = destandardize_coefficients(&fit.theta, &s)?;
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionMetrics {
    /// True zeros estimated as zero.
    pub correct: usize,
    /// True nonzeros estimated as zero.
    pub incorrect: usize,
    /// Nonzero coefficients, intercept included.
    pub df: usize,
}

/// Indices refer to coefficient positions (1..=p; 0 is the intercept).
pub fn selection_metrics(
    theta_hat: &[f64],
    true_zero: &[usize],
    true_nonzero: &[usize],
    zero_threshold: f64,
) -> Result<SelectionMetrics> {
    let p = theta_hat.len().saturating_sub(1);
    for &j in true_zero.iter().chain(true_nonzero) {
        if j == 0 || j > p {
            return Err(Error::InvalidConfig(format!(
                "coefficient index {j} outside 1..={p}"
            )));
        }
    }
    if let Some(&j) = true_zero.iter().find(|j| true_nonzero.contains(j)) {
        return Err(Error::OverlappingSets(j));
    }
    let is_zero = |j: usize| theta_hat[j].abs() < zero_threshold;
    Ok(SelectionMetrics {
        correct: true_zero.iter().filter(|&&j| is_zero(j)).count(),
        incorrect: true_nonzero.iter().filter(|&&j| is_zero(j)).count(),
        df: degrees_of_freedom(theta_hat, zero_threshold),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;

    #[test]
    fn smooth_abs_values() {
        for eps in [1e-6, 1e-4, 0.3] {
            assert_eq!(smooth_abs(0.0, eps), 0.0);
        }
        let expected = (1.0f64 + 1e-8).sqrt() - 1e-4;
        assert!((smooth_abs(1.0, 1e-4) - expected).abs() < 1e-15);
        assert!((smooth_abs(1.0, 1e-4) - 0.999_900_005).abs() < 1e-12);
        for k in 0..100 {
            let x = (k as f64 - 50.0) * 0.137;
            assert_eq!(smooth_abs(x, 1e-4), smooth_abs(-x, 1e-4));
        }
        // derivative by central differences
        for x in [-0.3, 1e-4, 0.002, 2.0] {
            let h = 1e-7;
            let fd = (smooth_abs(x + h, 1e-3) - smooth_abs(x - h, 1e-3)) / (2.0 * h);
            assert!((fd - smooth_abs_deriv(x, 1e-3)).abs() < 1e-6);
            let fd2 = (smooth_abs_deriv(x + h, 1e-3) - smooth_abs_deriv(x - h, 1e-3)) / (2.0 * h);
            assert!((fd2 - smooth_abs_second(x, 1e-3)).abs() / fd2.abs().max(1.0) < 1e-5);
        }
    }

    #[test]
    fn adaptive_weight_rules() {
        let lasso = PenaltyConfig::new(PenaltyKind::Lasso);
        assert_eq!(adaptive_weights(&[0.3, 2.0, 0.5, -4.0], &lasso), vec![1.0; 3]);
        let alasso = PenaltyConfig::new(PenaltyKind::Alasso);
        assert_eq!(adaptive_weights(&[9.0, 2.0, 0.5], &alasso), vec![0.5, 2.0]);
        assert_eq!(adaptive_weights(&[0.0, -0.5], &alasso), vec![2.0]);
        assert_eq!(adaptive_weights(&[0.0, 1e-12], &alasso), vec![1e8]);
        assert_eq!(adaptive_weights(&[0.0, 0.0], &alasso), vec![1e8]);
    }

    #[test]
    fn selection_metric_examples() {
        let theta = [0.3, 0.9, 1.1, 0.0, 0.0, 0.0, 0.05];
        let m = selection_metrics(&theta, &[3, 4, 5, 6], &[1, 2], 1e-6).unwrap();
        assert_eq!((m.correct, m.incorrect, m.df), (3, 0, 4));

        let oracle = [-1.85, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let m = selection_metrics(&oracle, &[3, 4, 5, 6], &[1, 2], 1e-6).unwrap();
        assert_eq!((m.correct, m.incorrect, m.df), (4, 0, 3));

        let m = selection_metrics(&[0.4, 0.0, 0.0, 0.0], &[3], &[1, 2], 1e-6).unwrap();
        assert_eq!(m.incorrect, 2);

        assert!(matches!(
            selection_metrics(&theta, &[1, 3], &[1, 2], 1e-6),
            Err(Error::OverlappingSets(1))
        ));
        assert!(selection_metrics(&theta, &[7], &[1], 1e-6).is_err());
    }

    #[test]
    fn folds_partition_and_stratify() {
        let delta: Vec<bool> = (0..103).map(|i| i % 3 != 0).collect();
        let f = Folds::stratified(&delta, 10, 42).unwrap();
        assert_eq!(f.k(), 10);
        let mut all: Vec<usize> = f.folds().iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        for fold in f.folds() {
            let ev = fold.iter().filter(|&&i| delta[i]).count();
            assert!((6..=8).contains(&ev), "{ev}");
        }
        assert_eq!(f, Folds::stratified(&delta, 10, 42).unwrap());
        assert_ne!(f, Folds::stratified(&delta, 10, 43).unwrap());
        assert!(Folds::new(vec![vec![0, 1], vec![1, 2]], 3).is_err());
    }

    fn four_points(b: [f64; 4]) -> (SurvivalDataset, SyntheticIndicators) {
        (
            SurvivalDataset::from_subjects(
                (0..4).map(|i| Subject::new(1.0 + i as f64, true, vec![])).collect(),
            )
            .unwrap(),
            SyntheticIndicators::from_values(b.to_vec()),
        )
    }

    #[test]
    fn cve_hand_computed() {
        let cfg = PenaltyConfig::new(PenaltyKind::Lasso);
        // mixed folds: each training half has mean 0.5
        let (d, ind) = four_points([0.2, 0.8, 0.2, 0.8]);
        let folds = Folds::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let v = cve_with_indicators(&d, &ind, 0.0, &[], &cfg, &folds).unwrap();
        // each fold: 0.3^2 + 0.3^2 = 0.18; mean over 2 folds
        assert!((v - 0.18).abs() < 1e-8, "{v}");
        // pure folds: training mean is the other level
        let (d, ind) = four_points([0.2, 0.2, 0.8, 0.8]);
        let v = cve_with_indicators(&d, &ind, 0.0, &[], &cfg, &folds).unwrap();
        assert!((v - 0.72).abs() < 1e-8, "{v}");
    }
}
