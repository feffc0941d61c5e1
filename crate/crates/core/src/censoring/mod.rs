//! Estimators of the censoring survivor function `S_C(t | x) = Pr(C > t | X = x)`
//! and its left limit `S_C(t- | x) = Pr(C >= t | X = x)`.
//!
//! The censoring "events" are the subjects with `delta == false`. When an
//! event and a censoring share an observed time, the event is ordered first:
//! the subject whose event occurred at `t` is not in the censoring risk set
//! at `t`. With this ordering the censoring Kaplan-Meier curve and the
//! event-time Kaplan-Meier curve factor the at-risk fraction exactly.

mod beran;
mod cox;
mod km;

use std::fmt;
use std::sync::Arc;

pub use beran::{BeranCensoring, BeranConfig, BeranIndex};
pub use cox::{cox_partial_hessian, cox_partial_loglik, cox_partial_score, CoxCensoring, CoxOptions};
pub use km::{KaplanMeier, StepCurve};

use crate::data::SurvivalDataset;
use crate::error::Result;

/// Lower clamp applied to `S_C(t-|x)` before it is used as a divisor.
pub const SURVIVOR_FLOOR: f64 = 1e-10;
/// Pre-clamp values below this are flagged as low overlap.
pub const LOW_OVERLAP_THRESHOLD: f64 = 0.05;

/// A user-supplied left-limit survivor `(t, x) -> S_C(t-|x)`.
#[derive(Clone)]
pub struct KnownSurvivor {
    label: String,
    f: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
}

impl KnownSurvivor {
    pub fn new(label: impl Into<String>, f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// Exponential censoring with rate `exp(beta_0 + x' beta_1..p)`.
    pub fn exponential(beta: Vec<f64>) -> Self {
        Self::new("exponential", move |t, x| {
            let eta = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
            (-eta.exp() * t).exp()
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.f)(t, x)
    }
}

impl fmt::Debug for KnownSurvivor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KnownSurvivor").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensorKind {
    KaplanMeier,
    Cox,
    Beran,
    Known,
}

/// A fitted censoring survivor model.
#[derive(Debug, Clone)]
pub enum CensoringModel {
    KaplanMeier(KaplanMeier),
    Cox(CoxCensoring),
    Beran(BeranCensoring),
    Known(KnownSurvivor),
}

/// `S_C(t-|x)` after clamping, with the pre-clamp value kept for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivorValue {
    pub value: f64,
    pub raw: f64,
    pub low_overlap: bool,
}

impl CensoringModel {
    pub fn kind(&self) -> CensorKind {
        match self {
            Self::KaplanMeier(_) => CensorKind::KaplanMeier,
            Self::Cox(_) => CensorKind::Cox,
            Self::Beran(_) => CensorKind::Beran,
            Self::Known(_) => CensorKind::Known,
        }
    }

    /// Right-continuous `S_C(t|x)`.
    pub fn survivor(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Self::KaplanMeier(km) => km.curve().at(t),
            Self::Cox(c) => c.survivor(t, x),
            Self::Beran(b) => b.survivor(t, x, false)?,
            // continuous by assumption
            Self::Known(k) => k.eval(t, x),
        })
    }

    /// Unclamped `S_C(t-|x)`: product over censoring times strictly before `t`.
    pub fn survivor_left_limit_raw(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Self::KaplanMeier(km) => km.curve().left_limit(t),
            Self::Cox(c) => c.survivor_left_limit(t, x),
            Self::Beran(b) => b.survivor(t, x, true)?,
            Self::Known(k) => k.eval(t, x),
        })
    }

    /// `S_C(t-|x)` clamped below at [`SURVIVOR_FLOOR`].
    pub fn survivor_left_limit(&self, t: f64, x: &[f64]) -> Result<SurvivorValue> {
        let raw = self.survivor_left_limit_raw(t, x)?;
        Ok(SurvivorValue {
            value: raw.max(SURVIVOR_FLOOR),
            raw,
            low_overlap: raw < LOW_OVERLAP_THRESHOLD,
        })
    }
}

/// Which censoring estimator to fit; used wherever the model must be refit
/// on new data (bootstrap replicates, simulation replicates).
#[derive(Debug, Clone)]
pub enum CensorSpec {
    KaplanMeier,
    Cox(CoxOptions),
    Beran(BeranConfig),
    /// Not refit: the same evaluator is returned for every dataset.
    Known(KnownSurvivor),
}

impl CensorSpec {
    pub fn kind(&self) -> CensorKind {
        match self {
            Self::KaplanMeier => CensorKind::KaplanMeier,
            Self::Cox(_) => CensorKind::Cox,
            Self::Beran(_) => CensorKind::Beran,
            Self::Known(_) => CensorKind::Known,
        }
    }

    pub fn fit(&self, data: &SurvivalDataset) -> Result<CensoringModel> {
        match self {
            Self::KaplanMeier => fit_km_censoring(data).map(CensoringModel::KaplanMeier),
            Self::Cox(opts) => CoxCensoring::fit(data, opts).map(CensoringModel::Cox),
            Self::Beran(cfg) => fit_beran_censoring(data, cfg).map(CensoringModel::Beran),
            Self::Known(k) => Ok(CensoringModel::Known(k.clone())),
        }
    }
}

pub fn fit_km_censoring(data: &SurvivalDataset) -> Result<KaplanMeier> {
    KaplanMeier::censoring(data)
}

pub fn fit_cox_censoring(data: &SurvivalDataset) -> Result<CoxCensoring> {
    CoxCensoring::fit(data, &CoxOptions::default())
}

pub fn fit_beran_censoring(data: &SurvivalDataset, cfg: &BeranConfig) -> Result<BeranCensoring> {
    BeranCensoring::fit(data, cfg)
}

/// Sorted distinct observed times.
pub fn distinct_times(data: &SurvivalDataset) -> Vec<f64> {
    let mut t: Vec<f64> = data.subjects().iter().map(|s| s.y).collect();
    t.sort_by(f64::total_cmp);
    t.dedup();
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;
    use rand::{Rng, SeedableRng};

    fn km_data() -> SurvivalDataset {
        SurvivalDataset::from_subjects(
            [1.0, 2.0, 3.0]
                .iter()
                .map(|&y| Subject::new(y, false, vec![]))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn left_limit_clamps_and_flags() {
        let m = CensoringModel::KaplanMeier(fit_km_censoring(&km_data()).unwrap());
        assert_eq!(m.survivor_left_limit(0.5, &[]).unwrap().value, 1.0);
        let at3 = m.survivor_left_limit(3.0, &[]).unwrap();
        assert!((at3.value - 1.0 / 3.0).abs() < 1e-15);
        assert!(!at3.low_overlap);
        let past = m.survivor_left_limit(3.0 + 1e-9, &[]).unwrap();
        assert_eq!(past.raw, 0.0);
        assert_eq!(past.value, SURVIVOR_FLOOR);
        assert!(past.low_overlap);
    }

    #[test]
    fn known_constant_model() {
        let m = CensoringModel::Known(KnownSurvivor::new("const", |_, _| 0.8));
        for (t, x) in [(0.1, vec![0.0]), (5.0, vec![-3.0]), (100.0, vec![2.0])] {
            assert_eq!(m.survivor_left_limit(t, &x).unwrap().value, 0.8);
        }
    }

    fn random_data(n: usize, seed: u64) -> SurvivalDataset {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let subjects = (0..n)
            .map(|_| {
                let x = vec![rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>()];
                let t = -rng.random::<f64>().ln() * (0.5 + x[1]);
                let c = -rng.random::<f64>().ln() * (1.0 + x[0].abs());
                Subject::new(t.min(c) + 1e-9, t <= c, x)
            })
            .collect();
        SurvivalDataset::from_subjects(subjects).unwrap()
    }

    #[test]
    fn all_models_monotone_in_time() {
        let data = random_data(120, 3);
        let models = [
            CensorSpec::KaplanMeier.fit(&data).unwrap(),
            CensorSpec::Cox(CoxOptions::default()).fit(&data).unwrap(),
            CensorSpec::Beran(BeranConfig {
                bandwidth: 0.8,
                index: BeranIndex::Covariate(0),
            })
            .fit(&data)
            .unwrap(),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for m in &models {
            for _ in 0..1000 {
                let t1 = rng.random::<f64>() * 3.0;
                let t2 = t1 + rng.random::<f64>() * 2.0;
                let x = vec![rng.random::<f64>() * 1.6 - 0.8, rng.random::<f64>()];
                let a = m.survivor_left_limit_raw(t1, &x).unwrap();
                let b = m.survivor_left_limit_raw(t2, &x).unwrap();
                assert!(a >= b, "{:?}: S({t1}-)={a} < S({t2}-)={b}", m.kind());
                assert!((0.0..=1.0).contains(&a));
                let r = m.survivor(t1, &x).unwrap();
                assert!(r <= a + 1e-15);
            }
            let tmin = data
                .subjects()
                .iter()
                .map(|s| s.y)
                .fold(f64::INFINITY, f64::min);
            assert_eq!(m.survivor_left_limit_raw(tmin, &[0.0, 0.5]).unwrap(), 1.0);
        }
    }
}
