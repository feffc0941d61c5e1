//! Nonparametric bootstrap for the cure regression coefficients.
//!
//! Each replicate resamples subjects with replacement, refits the censoring
//! model and then the cure model. Replicate `r` draws from its own stream
//! keyed by `(seed, r)`, so the replicate matrix does not depend on thread
//! scheduling.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::censoring::CensorSpec;
use crate::cure::{fit_cure, synthetic_indicators};
use crate::data::SurvivalDataset;
use crate::error::{Error, ErrorKind, Result};
use crate::penalized::{fit_at_lambda, PenaltyConfig};
use crate::rng::stream;

/// Largest tolerated share of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FitKind {
    Unpenalized,
    Penalized { lambda: f64, config: PenaltyConfig },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Resampler {
    WithReplacement,
    /// Every replicate is the original sample; for testing.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapOptions {
    pub n_replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub resampler: Resampler,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            n_replicates: 399,
            level: 0.95,
            seed: 0,
            resampler: Resampler::WithReplacement,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub n_replicates: usize,
    pub level: f64,
    /// Fit on the original data.
    pub estimate: Vec<f64>,
    /// Replicate index of each row of `replicate_thetas`.
    pub replicate_index: Vec<usize>,
    pub replicate_thetas: Vec<Vec<f64>>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub se: Vec<f64>,
    pub p_values: Vec<f64>,
    pub n_failed: usize,
}

/// Coefficients of one fit of `kind`, censoring model included.
pub fn fit_once(data: &SurvivalDataset, censor: &CensorSpec, kind: &FitKind) -> Result<Vec<f64>> {
    let model = censor.fit(data)?;
    match kind {
        FitKind::Unpenalized => {
            let fit = fit_cure(data, &model)?;
            if !fit.converged {
                return Err(Error::NonConvergence {
                    what: "cure likelihood",
                    iterations: fit.n_iterations,
                    grad_norm: fit.score_norm,
                    theta_norm: fit.theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
                });
            }
            Ok(fit.theta)
        }
        FitKind::Penalized { lambda, config } => {
            let ind = synthetic_indicators(data, &model)?;
            Ok(fit_at_lambda(data, &ind, *lambda, config)?.theta)
        }
    }
}

/// Rows drawn for replicate `r`.
pub fn resample_rows(n: usize, seed: u64, r: usize, resampler: Resampler) -> Vec<usize> {
    match resampler {
        Resampler::Identity => (0..n).collect(),
        Resampler::WithReplacement => {
            let mut rng = stream(seed, r as u64);
            (0..n).map(|_| rng.random_range(0..n)).collect()
        }
    }
}

/// Linear-interpolation sample quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// `2 (1 - Phi(|est| / se))`; 1 when the estimate and its spread are both zero.
pub fn z_test_p_value(est: f64, se: f64) -> f64 {
    if se > 0.0 {
        let z = est.abs() / se;
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.sf(z)).clamp(0.0, 1.0)
    } else if est == 0.0 {
        1.0
    } else {
        0.0
    }
}

pub fn bootstrap(
    data: &SurvivalDataset,
    censor: &CensorSpec,
    kind: &FitKind,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if opts.n_replicates == 0 {
        return Err(Error::InvalidConfig("bootstrap needs at least one replicate".into()));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "confidence level must lie in (0, 1), got {}",
            opts.level
        )));
    }
    let estimate = fit_once(data, censor, kind)?;
    let k = estimate.len();

    let outcomes: Vec<Result<Vec<f64>>> = (0..opts.n_replicates)
        .into_par_iter()
        .map(|r| {
            let rows = resample_rows(data.len(), opts.seed, r, opts.resampler);
            fit_once(&data.select(&rows), censor, kind)
        })
        .collect();

    let mut replicate_index = Vec::new();
    let mut replicate_thetas = Vec::new();
    let mut n_failed = 0;
    for (r, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(theta) => {
                replicate_index.push(r);
                replicate_thetas.push(theta);
            }
            Err(e) if e.kind() == ErrorKind::Config => return Err(e),
            Err(_) => n_failed += 1,
        }
    }
    if n_failed as f64 > MAX_FAILURE_RATE * opts.n_replicates as f64 || replicate_thetas.is_empty() {
        return Err(Error::TooManyFailures {
            failed: n_failed,
            total: opts.n_replicates,
        });
    }

    let alpha = 1.0 - opts.level;
    let mut ci_lower = Vec::with_capacity(k);
    let mut ci_upper = Vec::with_capacity(k);
    let mut se = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let mut col: Vec<f64> = replicate_thetas.iter().map(|t| t[j]).collect();
        let s = sample_sd(&col);
        col.sort_by(f64::total_cmp);
        ci_lower.push(quantile(&col, alpha / 2.0));
        ci_upper.push(quantile(&col, 1.0 - alpha / 2.0));
        p_values.push(z_test_p_value(estimate[j], s));
        se.push(s);
    }

    Ok(BootstrapResult {
        n_replicates: opts.n_replicates,
        level: opts.level,
        estimate,
        replicate_index,
        replicate_thetas,
        ci_lower,
        ci_upper,
        se,
        p_values,
        n_failed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;
    use crate::penalized::PenaltyKind;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn dataset(n: usize, seed: u64) -> SurvivalDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        SurvivalDataset::from_subjects(
            (0..n)
                .map(|_| {
                    let x: f64 = StandardNormal.sample(&mut rng);
                    let cured = rng.random::<f64>() < 1.0 / (1.0 + (0.5 - x).exp());
                    let t = if cured { f64::INFINITY } else { Exp::new(1.0).unwrap().sample(&mut rng) };
                    let c: f64 = Exp::new(0.3).unwrap().sample(&mut rng);
                    let c = c.min(4.0);
                    Subject::new(t.min(c), t <= c, vec![x])
                })
                .collect(),
        )
        .unwrap()
    }

    fn opts(n: usize, level: f64, seed: u64) -> BootstrapOptions {
        BootstrapOptions {
            n_replicates: n,
            level,
            seed,
            resampler: Resampler::WithReplacement,
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = dataset(120, 1);
        let a = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(30, 0.95, 9)).unwrap();
        let b = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(30, 0.95, 9)).unwrap();
        assert_eq!(a.replicate_thetas, b.replicate_thetas);
        assert_eq!(a.ci_lower, b.ci_lower);
        assert_eq!(a.p_values, b.p_values);
        let c = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(30, 0.95, 10)).unwrap();
        assert_ne!(a.replicate_thetas, c.replicate_thetas);
    }

    #[test]
    fn replicate_rows_depend_only_on_seed_and_index() {
        let d = dataset(80, 2);
        let full = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(12, 0.9, 5)).unwrap();
        for (row, &r) in full.replicate_thetas.iter().zip(&full.replicate_index) {
            let rows = resample_rows(d.len(), 5, r, Resampler::WithReplacement);
            let alone = fit_once(&d.select(&rows), &CensorSpec::KaplanMeier, &FitKind::Unpenalized).unwrap();
            assert_eq!(row, &alone);
        }
    }

    #[test]
    fn identity_resample_reproduces_estimate() {
        let d = dataset(60, 3);
        let mut o = opts(1, 0.95, 0);
        o.resampler = Resampler::Identity;
        let r = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &o).unwrap();
        assert_eq!(r.replicate_thetas[0], r.estimate);
        assert_eq!(r.n_failed, 0);
    }

    #[test]
    fn interval_properties() {
        let d = dataset(150, 4);
        let r90 = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(60, 0.90, 7)).unwrap();
        let r95 = bootstrap(&d, &CensorSpec::KaplanMeier, &FitKind::Unpenalized, &opts(60, 0.95, 7)).unwrap();
        for j in 0..2 {
            let mut col: Vec<f64> = r95.replicate_thetas.iter().map(|t| t[j]).collect();
            col.sort_by(f64::total_cmp);
            let median = quantile(&col, 0.5);
            assert!(r95.ci_lower[j] <= median && median <= r95.ci_upper[j]);
            assert!(r95.ci_lower[j] <= r90.ci_lower[j]);
            assert!(r95.ci_upper[j] >= r90.ci_upper[j]);
            assert!((0.0..=1.0).contains(&r95.p_values[j]));
            assert!(r95.se[j] > 0.0);
        }
    }

    #[test]
    fn penalized_bootstrap_runs() {
        let d = dataset(150, 5);
        let kind = FitKind::Penalized {
            lambda: 1.0,
            config: PenaltyConfig::new(PenaltyKind::Alasso),
        };
        let r = bootstrap(&d, &CensorSpec::KaplanMeier, &kind, &opts(10, 0.95, 1)).unwrap();
        assert_eq!(r.estimate.len(), 2);
        assert_eq!(r.replicate_thetas.len() + r.n_failed, 10);
    }

    #[test]
    fn p_value_reference_points() {
        assert!((z_test_p_value(1.959_963_984_540_054, 1.0) - 0.05).abs() < 1e-9);
        assert_eq!(z_test_p_value(0.0, 1.0), 1.0);
        assert_eq!(z_test_p_value(0.0, 0.0), 1.0);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
    }
}
