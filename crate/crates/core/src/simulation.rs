//! Monte Carlo studies of the estimator under a mixture-cure data generator.
//!
//! Covariates are independent standard normals. The cure status is
//! Bernoulli with logistic probability `logistic(x' theta0)`, the latency
//! follows a Weibull truncated to `(0, tau)` with rate `psi = exp(x' beta_T0)`
//! and shape `kappa = psi^-nu`, and censoring is exponential with rate
//! `exp(x' beta_C)`. `tau` and the censoring intercept are calibrated by
//! bisection on Monte Carlo averages with common random numbers.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::CensorSpec;
use crate::data::{Subject, SurvivalDataset};
use crate::error::{Error, ErrorKind, Result};
use crate::inference::{bootstrap, fit_once, BootstrapOptions, FitKind, Resampler};
use crate::penalized::{lambda_path, selection_metrics, PathOptions, PenaltyConfig, SelectionMetrics};
use crate::rng::{stream, StreamRng};

/// Streams reserved for calibration, far from replicate indices.
const TAU_STREAM: u64 = u64::MAX - 1;
const CENSOR_STREAM: u64 = u64::MAX - 2;
/// Salt separating a replicate's fold/bootstrap seeds from its data stream.
const AUX_SALT: u64 = 0x5DEE_CE66_D1CE_4E5B;

pub const TARGET_TAIL: f64 = 0.05;

fn default_mc_size() -> usize {
    1_000_000
}

fn default_replicates() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub nu: f64,
    pub pi_m: f64,
    pub rho: f64,
    pub n: usize,
    /// Extra pure-noise covariates; with 4 the first of them also drives
    /// latency and censoring.
    #[serde(default)]
    pub extra_noise_covariates: usize,
    #[serde(default = "default_replicates")]
    pub n_replicates: usize,
    #[serde(default)]
    pub seed: u64,
    /// Full cure coefficients; derived from `pi_m` when absent.
    #[serde(default)]
    pub theta0: Option<Vec<f64>>,
    #[serde(default)]
    pub beta_t0: Option<Vec<f64>>,
    /// Censoring slopes (intercept excluded).
    #[serde(default)]
    pub beta_c_slopes: Option<Vec<f64>>,
    /// Calibrated when absent.
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub beta_c0: Option<f64>,
    #[serde(default = "default_mc_size")]
    pub mc_size: usize,
}

impl SimScenario {
    pub fn new(nu: f64, pi_m: f64, rho: f64, n: usize) -> Self {
        Self {
            nu,
            pi_m,
            rho,
            n,
            extra_noise_covariates: 0,
            n_replicates: default_replicates(),
            seed: 0,
            theta0: None,
            beta_t0: None,
            beta_c_slopes: None,
            tau: None,
            beta_c0: None,
            mc_size: default_mc_size(),
        }
    }

    /// Number of covariates.
    pub fn p(&self) -> usize {
        2 + self.extra_noise_covariates
    }

    fn slope_profile(&self, first_noise: f64) -> Vec<f64> {
        let mut v = vec![0.0, 1.0];
        v.extend((0..self.extra_noise_covariates).map(|j| if j == 0 { first_noise } else { 0.0 }));
        v
    }

    pub fn theta0(&self) -> Result<Vec<f64>> {
        if let Some(t) = &self.theta0 {
            return Ok(t.clone());
        }
        let intercept = if (self.pi_m - 0.2).abs() < 1e-12 {
            -1.85
        } else if (self.pi_m - 0.4).abs() < 1e-12 {
            -0.55
        } else {
            return Err(Error::InvalidConfig(format!(
                "no default theta0 for pi_m = {}; supply theta0",
                self.pi_m
            )));
        };
        let mut t = vec![intercept, 1.0, 1.0];
        t.extend(std::iter::repeat_n(0.0, self.extra_noise_covariates));
        Ok(t)
    }

    pub fn beta_t0(&self) -> Vec<f64> {
        self.beta_t0.clone().unwrap_or_else(|| {
            let mut b = vec![0.0];
            b.extend(self.slope_profile(1.0));
            b
        })
    }

    pub fn beta_c_slopes(&self) -> Vec<f64> {
        self.beta_c_slopes.clone().unwrap_or_else(|| self.slope_profile(1.0))
    }

    pub fn target_censoring(&self) -> f64 {
        self.pi_m + self.rho
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.nu >= 0.0) || !self.nu.is_finite() {
            return bad(format!("nu must be nonnegative, got {}", self.nu));
        }
        if self.n < 2 {
            return bad(format!("sample size must be at least 2, got {}", self.n));
        }
        if self.mc_size == 0 {
            return bad("mc_size must be positive".into());
        }
        if self.theta0()?.len() != p + 1 || self.beta_t0().len() != p + 1 || self.beta_c_slopes().len() != p {
            return bad(format!("coefficient vectors must match {p} covariates"));
        }
        let target = self.target_censoring();
        if !(target > 0.0 && target < 1.0) {
            return bad(format!("pi_m + rho must lie in (0, 1), got {target}"));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tau must be positive, got {t}"));
            }
        }
        if let Some(b) = self.beta_c0 {
            if !b.is_finite() {
                return bad("beta_c0 must be finite".into());
            }
        }
        Ok(())
    }

    /// Fills in `tau` and the censoring intercept.
    pub fn calibrate(&self) -> Result<CalibratedScenario> {
        self.validate()?;
        let beta_t0 = self.beta_t0();
        let tau = match self.tau {
            Some(t) => t,
            None => calibrate_tau(self.nu, &beta_t0, self.mc_size, self.seed)?,
        };
        let beta_c0 = match self.beta_c0 {
            Some(b) => b,
            None => calibrate_censoring_intercept(self, tau, self.mc_size, self.seed)?,
        };
        Ok(CalibratedScenario {
            scenario: self.clone(),
            theta0: self.theta0()?,
            beta_t0,
            beta_c: std::iter::once(beta_c0).chain(self.beta_c_slopes()).collect(),
            tau,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedScenario {
    pub scenario: SimScenario,
    pub theta0: Vec<f64>,
    pub beta_t0: Vec<f64>,
    /// Intercept first.
    pub beta_c: Vec<f64>,
    pub tau: f64,
}

fn normals(rng: &mut StreamRng, p: usize) -> Vec<f64> {
    (0..p).map(|_| StandardNormal.sample(rng)).collect()
}

fn lin(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
}

fn logistic(eta: f64) -> f64 {
    crate::cure::logistic(eta)
}

/// Inverse survivor function of the truncated Weibull: the `t` in `(0, tau)`
/// with `S(t) = u`.
pub fn truncated_weibull_inverse(u: f64, psi: f64, kappa: f64, tau: f64) -> f64 {
    let a = (-tau.powf(kappa)).exp();
    let inner = u.powf(1.0 / psi) * (1.0 - a) + a;
    (-inner.ln()).max(0.0).powf(1.0 / kappa)
}

/// Monte Carlo `E[exp(-psi tau^kappa)]` over the given `psi` draws.
fn tail_mass(psis: &[f64], nu: f64, tau: f64) -> f64 {
    let lt = tau.ln();
    psis.iter()
        .map(|&psi| {
            let kappa = psi.powf(-nu);
            (-psi * (kappa * lt).exp()).exp()
        })
        .sum::<f64>()
        / psis.len() as f64
}

fn bisect(
    mut lo: f64,
    mut hi: f64,
    f: impl Fn(f64) -> f64,
    tol: f64,
) -> f64 {
    // f increasing in the argument, root between lo and hi
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid);
        if v.abs() < tol || (hi - lo) <= 1e-14 * mid.abs().max(1.0) {
            return mid;
        }
        if v < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `E[exp(-psi tau^kappa)] = 0.05` with `psi = exp(x' beta_T0)` and
/// `kappa = psi^-nu`.
pub fn calibrate_tau(nu: f64, beta_t0: &[f64], mc_size: usize, seed: u64) -> Result<f64> {
    if beta_t0.is_empty() || mc_size == 0 {
        return Err(Error::InvalidConfig("calibration needs beta_T0 and mc_size > 0".into()));
    }
    let mut rng = stream(seed, TAU_STREAM);
    let p = beta_t0.len() - 1;
    let psis: Vec<f64> = (0..mc_size)
        .map(|_| lin(beta_t0, &normals(&mut rng, p)).exp())
        .collect();
    let mut hi = 1.0;
    let mut doublings = 0;
    while tail_mass(&psis, nu, hi) >= TARGET_TAIL {
        hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(Error::BracketNotFound(format!(
                "tail mass stays above {TARGET_TAIL} up to tau = {hi}"
            )));
        }
    }
    let tau = bisect(0.0, hi, |t| TARGET_TAIL - tail_mass(&psis, nu, t), 1e-6);
    Ok(tau)
}

/// Per-draw quantities that do not depend on the censoring intercept.
struct CensorDraws {
    cured: Vec<bool>,
    t0: Vec<f64>,
    /// `E exp(-x' beta_C,slopes)` with `E ~ Exp(1)`, so `C = base * exp(-beta_c0)`.
    base: Vec<f64>,
}

fn censored_share(d: &CensorDraws, beta_c0: f64) -> f64 {
    let scale = (-beta_c0).exp();
    let censored = d
        .cured
        .iter()
        .zip(&d.t0)
        .zip(&d.base)
        .filter(|((&c, &t0), &b)| c || b * scale < t0)
        .count();
    censored as f64 / d.cured.len() as f64
}

/// Fraction of draws with `Delta = 0` at the given censoring intercept,
/// under the calibration stream of `seed`.
pub fn censoring_proportion(
    scenario: &SimScenario,
    tau: f64,
    beta_c0: f64,
    mc_size: usize,
    seed: u64,
) -> Result<f64> {
    Ok(censored_share(&censor_draws(scenario, tau, mc_size, seed, CENSOR_STREAM)?, beta_c0))
}

fn censor_draws(scenario: &SimScenario, tau: f64, mc_size: usize, seed: u64, index: u64) -> Result<CensorDraws> {
    let theta0 = scenario.theta0()?;
    let beta_t0 = scenario.beta_t0();
    let slopes = scenario.beta_c_slopes();
    let p = scenario.p();
    let mut rng = stream(seed, index);
    let mut d = CensorDraws {
        cured: Vec::with_capacity(mc_size),
        t0: Vec::with_capacity(mc_size),
        base: Vec::with_capacity(mc_size),
    };
    for _ in 0..mc_size {
        let s = draw_subject(&mut rng, p, &theta0, &beta_t0, tau, scenario.nu);
        d.cured.push(s.cured);
        d.t0.push(s.t0);
        let xc: f64 = slopes.iter().zip(&s.x).map(|(b, v)| b * v).sum();
        d.base.push(s.e * (-xc).exp());
    }
    Ok(d)
}

/// Solves `Pr(Delta = 0) = pi_m + rho` for the censoring intercept.
pub fn calibrate_censoring_intercept(
    scenario: &SimScenario,
    tau: f64,
    mc_size: usize,
    seed: u64,
) -> Result<f64> {
    let target = scenario.target_censoring();
    let d = censor_draws(scenario, tau, mc_size, seed, CENSOR_STREAM)?;
    let f = |b: f64| censored_share(&d, b) - target;
    let (mut lo, mut hi) = (-1.0, 1.0);
    let mut width = 2.0;
    while f(lo) > 0.0 || f(hi) < 0.0 {
        width *= 2.0;
        if width > 1e3 {
            return Err(Error::BracketNotFound(format!(
                "censoring proportion {target} not reachable (range {:.4} to {:.4})",
                censored_share(&d, lo),
                censored_share(&d, hi)
            )));
        }
        if f(lo) > 0.0 {
            lo -= width;
        }
        if f(hi) < 0.0 {
            hi += width;
        }
    }
    Ok(bisect(lo, hi, f, 1e-4))
}

struct RawSubject {
    x: Vec<f64>,
    cured: bool,
    t0: f64,
    /// Standard exponential draw for the censoring time.
    e: f64,
}

fn draw_subject(
    rng: &mut StreamRng,
    p: usize,
    theta0: &[f64],
    beta_t0: &[f64],
    tau: f64,
    nu: f64,
) -> RawSubject {
    let x = normals(rng, p);
    let cured = rng.random::<f64>() < logistic(lin(theta0, &x));
    let u: f64 = Open01.sample(rng);
    let psi = lin(beta_t0, &x).exp();
    let kappa = psi.powf(-nu);
    let t0 = truncated_weibull_inverse(u, psi, kappa, tau).clamp(f64::MIN_POSITIVE, tau * (1.0 - f64::EPSILON));
    let e: f64 = Exp1.sample(rng);
    RawSubject { x, cured, t0, e }
}

#[derive(Debug, Clone)]
pub struct SimDraw {
    pub data: SurvivalDataset,
    pub true_b: Vec<bool>,
    pub true_theta: Vec<f64>,
}

/// Dataset `r` of the study; depends only on the scenario seed and `r`.
pub fn draw_dataset(cal: &CalibratedScenario, r: usize) -> Result<SimDraw> {
    let sc = &cal.scenario;
    let p = sc.p();
    let mut rng = stream(sc.seed, r as u64);
    let mut subjects = Vec::with_capacity(sc.n);
    let mut true_b = Vec::with_capacity(sc.n);
    for _ in 0..sc.n {
        let s = draw_subject(&mut rng, p, &cal.theta0, &cal.beta_t0, cal.tau, sc.nu);
        let c = s.e / lin(&cal.beta_c, &s.x).exp();
        let (y, delta) = if s.cured { (c, false) } else { (s.t0.min(c), s.t0 <= c) };
        subjects.push(Subject::new(y, delta, s.x));
        true_b.push(s.cured);
    }
    let names = (1..=p).map(|j| format!("x{j}")).collect();
    Ok(SimDraw {
        data: SurvivalDataset::new(subjects, names)?,
        true_b,
        true_theta: cal.theta0.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudyBootstrap {
    pub n_replicates: usize,
    pub level: f64,
}

#[derive(Debug, Clone)]
pub enum StudyFit {
    Unpenalized { bootstrap: Option<StudyBootstrap> },
    /// Path with cross-validated lambda; the fold seed is derived per replicate.
    Selection { config: PenaltyConfig, path: PathOptions },
}

#[derive(Debug, Clone)]
pub struct EstimatorConfig {
    pub censor: CensorSpec,
    pub fit: StudyFit,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReplicateRecord {
    pub index: usize,
    pub theta: Option<Vec<f64>>,
    pub covered: Option<Vec<bool>>,
    pub selection: Option<SelectionMetrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub scenario: SimScenario,
    pub tau: f64,
    pub beta_c: Vec<f64>,
    pub true_theta: Vec<f64>,
    pub n_replicates: usize,
    pub n_failed: usize,
    pub mean_estimate: Vec<f64>,
    pub bias: Vec<f64>,
    pub sd: Vec<f64>,
    /// Percent of replicates whose interval covers the true value.
    pub coverage: Option<Vec<f64>>,
    pub mean_correct: Option<f64>,
    pub mean_incorrect: Option<f64>,
    pub mean_df: Option<f64>,
    #[serde(skip)]
    pub records: Vec<ReplicateRecord>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

fn aux_seed(seed: u64, r: usize) -> u64 {
    stream(seed ^ AUX_SALT, r as u64).random()
}

fn run_replicate(cal: &CalibratedScenario, est: &EstimatorConfig, r: usize) -> Result<ReplicateRecord> {
    let draw = draw_dataset(cal, r)?;
    let mut rec = ReplicateRecord {
        index: r,
        theta: None,
        covered: None,
        selection: None,
        error: None,
    };
    match &est.fit {
        StudyFit::Unpenalized { bootstrap: None } => {
            rec.theta = Some(fit_once(&draw.data, &est.censor, &FitKind::Unpenalized)?);
        }
        StudyFit::Unpenalized { bootstrap: Some(b) } => {
            let res = bootstrap(
                &draw.data,
                &est.censor,
                &FitKind::Unpenalized,
                &BootstrapOptions {
                    n_replicates: b.n_replicates,
                    level: b.level,
                    seed: aux_seed(cal.scenario.seed, r),
                    resampler: Resampler::WithReplacement,
                },
            )?;
            rec.covered = Some(
                (0..res.estimate.len())
                    .map(|j| res.ci_lower[j] <= draw.true_theta[j] && draw.true_theta[j] <= res.ci_upper[j])
                    .collect(),
            );
            rec.theta = Some(res.estimate);
        }
        StudyFit::Selection { config, path } => {
            let model = est.censor.fit(&draw.data)?;
            let opts = PathOptions {
                seed: aux_seed(cal.scenario.seed, r),
                ..*path
            };
            let fit = lambda_path(&draw.data, &model, config, &opts)?;
            let truth = &draw.true_theta;
            let zero: Vec<usize> = (1..truth.len()).filter(|&j| truth[j] == 0.0).collect();
            let nonzero: Vec<usize> = (1..truth.len()).filter(|&j| truth[j] != 0.0).collect();
            rec.selection = Some(selection_metrics(
                &fit.selected_theta_std,
                &zero,
                &nonzero,
                config.zero_threshold,
            )?);
            rec.theta = Some(fit.final_theta);
        }
    }
    Ok(rec)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Runs `scenario.n_replicates` replicates in parallel; results are
/// aggregated in replicate order and are bit-identical for any thread count.
pub fn run_study(cal: &CalibratedScenario, est: &EstimatorConfig) -> Result<SimReport> {
    let started = Instant::now();
    let records = (0..cal.scenario.n_replicates)
        .into_par_iter()
        .map(|r| match run_replicate(cal, est, r) {
            Ok(rec) => Ok(rec),
            Err(e) if e.kind() == ErrorKind::Config => Err(e),
            Err(e) => Ok(ReplicateRecord {
                index: r,
                theta: None,
                covered: None,
                selection: None,
                error: Some(e.to_string()),
            }),
        })
        .collect::<Result<Vec<_>>>()?;

    let ok: Vec<&ReplicateRecord> = records.iter().filter(|r| r.theta.is_some()).collect();
    let k = cal.theta0.len();
    let col = |j: usize| ok.iter().map(move |r| r.theta.as_ref().unwrap()[j]);
    let mean_estimate: Vec<f64> = (0..k).map(|j| mean(col(j))).collect();
    let bias = (0..k).map(|j| mean_estimate[j] - cal.theta0[j]).collect();
    let sd = (0..k)
        .map(|j| {
            if ok.len() < 2 {
                f64::NAN
            } else {
                (col(j).map(|v| (v - mean_estimate[j]).powi(2)).sum::<f64>() / (ok.len() - 1) as f64).sqrt()
            }
        })
        .collect();
    let coverage = matches!(est.fit, StudyFit::Unpenalized { bootstrap: Some(_) }).then(|| {
        (0..k)
            .map(|j| 100.0 * mean(ok.iter().map(|r| r.covered.as_ref().unwrap()[j] as u8 as f64)))
            .collect()
    });
    let selected = matches!(est.fit, StudyFit::Selection { .. });
    let sel = |f: fn(&SelectionMetrics) -> usize| {
        selected.then(|| mean(ok.iter().map(|r| f(r.selection.as_ref().unwrap()) as f64)))
    };

    Ok(SimReport {
        scenario: cal.scenario.clone(),
        tau: cal.tau,
        beta_c: cal.beta_c.clone(),
        true_theta: cal.theta0.clone(),
        n_replicates: records.len(),
        n_failed: records.len() - ok.len(),
        mean_estimate,
        bias,
        sd,
        coverage,
        mean_correct: sel(|m| m.correct),
        mean_incorrect: sel(|m| m.incorrect),
        mean_df: sel(|m| m.df),
        records,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

impl SimReport {
    /// One summary row: scenario, then bias and SD per coefficient, then
    /// coverage and selection metrics when present.
    pub fn csv_row(&self) -> (Vec<String>, Vec<String>) {
        let sc = &self.scenario;
        let mut head: Vec<String> = ["nu", "pi_m", "rho", "n", "tau", "beta_c0", "n_replicates", "n_failed"]
            .map(String::from)
            .to_vec();
        let mut row = vec![
            sc.nu.to_string(),
            sc.pi_m.to_string(),
            sc.rho.to_string(),
            sc.n.to_string(),
            format!("{:.6}", self.tau),
            format!("{:.6}", self.beta_c[0]),
            self.n_replicates.to_string(),
            self.n_failed.to_string(),
        ];
        for j in 0..self.bias.len() {
            head.push(format!("bias_{j}"));
            row.push(format!("{:.6}", self.bias[j]));
            head.push(format!("sd_{j}"));
            row.push(format!("{:.6}", self.sd[j]));
        }
        if let Some(cov) = &self.coverage {
            for (j, c) in cov.iter().enumerate() {
                head.push(format!("coverage_{j}"));
                row.push(format!("{c:.2}"));
            }
        }
        for (name, v) in [
            ("mean_c", self.mean_correct),
            ("mean_ic", self.mean_incorrect),
            ("mean_df", self.mean_df),
        ] {
            if let Some(v) = v {
                head.push(name.into());
                row.push(format!("{v:.4}"));
            }
        }
        (head, row)
    }
}
