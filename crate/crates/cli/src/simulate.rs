use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use curefit::censoring::{BeranConfig, BeranIndex, CoxOptions, KnownSurvivor};
use curefit::penalized::{FoldWeights, PathOptions, PenaltyConfig, PenaltyKind};
use curefit::simulation::{run_study, EstimatorConfig, SimReport, SimScenario, StudyBootstrap, StudyFit};
use curefit::CensorSpec;

use crate::args::Global;
use crate::failure::Failure;
use crate::output;

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimCensor {
    Km,
    Cox,
    Beran,
    /// The data-generating exponential censoring law.
    True,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimPenalty {
    None,
    Lasso,
    Alasso,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SimulateArgs {
    /// TOML or JSON scenario file: one scenario, or a `scenarios` array.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub pi_m: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Extra noise covariates (4 gives the selection design).
    #[arg(long)]
    pub noise: Option<usize>,
    /// Monte Carlo size for calibration.
    #[arg(long)]
    pub mc_size: Option<usize>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta_c0: Option<f64>,
    #[arg(long, value_enum, default_value_t = SimCensor::Cox)]
    pub censor: SimCensor,
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// 1-based covariate the Beran kernel smooths over.
    #[arg(long, default_value_t = 1)]
    pub index: usize,
    #[arg(long, value_enum, default_value_t = SimPenalty::None)]
    pub penalty: SimPenalty,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = curefit::penalized::DEFAULT_ZERO_THRESHOLD)]
    pub zero_threshold: f64,
    #[arg(long, default_value_t = 100)]
    pub n_lambda: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Use full-data adaptive weights inside cross-validation.
    #[arg(long)]
    pub full_data_weights: bool,
    /// Bootstrap replicates per Monte Carlo data set (bare flag: 399).
    #[arg(long, num_args = 0..=1, default_missing_value = "399")]
    pub bootstrap: Option<usize>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Also write per-replicate estimates.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum ScenarioFile {
    Many { scenarios: Vec<SimScenario> },
    One(SimScenario),
}

fn read_scenarios(path: &Path) -> Result<Vec<SimScenario>, Failure> {
    let text = std::fs::read_to_string(path).map_err(Failure::io)?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let parsed: ScenarioFile = if is_json {
        serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
    };
    Ok(match parsed {
        ScenarioFile::Many { scenarios } => scenarios,
        ScenarioFile::One(s) => vec![s],
    })
}

impl SimulateArgs {
    /// Scenarios from the file (if any) with flag overrides applied.
    fn scenarios(&self, seed: Option<u64>) -> Result<Vec<SimScenario>, Failure> {
        let mut list = match &self.config {
            Some(p) => read_scenarios(p)?,
            None => {
                let (Some(nu), Some(pi_m), Some(rho), Some(n)) = (self.nu, self.pi_m, self.rho, self.n) else {
                    return Err(Failure::config(
                        "without --config, --nu, --pi-m, --rho and --n are all required",
                    ));
                };
                vec![SimScenario::new(nu, pi_m, rho, n)]
            }
        };
        if list.is_empty() {
            return Err(Failure::config("no scenarios given"));
        }
        for s in &mut list {
            s.nu = self.nu.unwrap_or(s.nu);
            s.pi_m = self.pi_m.unwrap_or(s.pi_m);
            s.rho = self.rho.unwrap_or(s.rho);
            s.n = self.n.unwrap_or(s.n);
            s.n_replicates = self.replicates.unwrap_or(s.n_replicates);
            s.extra_noise_covariates = self.noise.unwrap_or(s.extra_noise_covariates);
            s.mc_size = self.mc_size.unwrap_or(s.mc_size);
            s.seed = seed.unwrap_or(s.seed);
            if self.tau.is_some() {
                s.tau = self.tau;
            }
            if self.beta_c0.is_some() {
                s.beta_c0 = self.beta_c0;
            }
            s.validate()?;
        }
        Ok(list)
    }

    fn validate(&self) -> Result<(), Failure> {
        if (self.censor == SimCensor::Beran) != self.bandwidth.is_some() {
            return Err(Failure::config(
                "--bandwidth is required with --censor beran and not allowed otherwise",
            ));
        }
        if self.penalty != SimPenalty::None && self.bootstrap.is_some() {
            return Err(Failure::config("--bootstrap applies only to unpenalized studies"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Failure::config(format!("--level must lie in (0, 1), got {}", self.level)));
        }
        Ok(())
    }

    fn estimator(&self, beta_c: &[f64], p: usize) -> Result<EstimatorConfig, Failure> {
        let censor = match self.censor {
            SimCensor::Km => CensorSpec::KaplanMeier,
            SimCensor::Cox => CensorSpec::Cox(CoxOptions::default()),
            SimCensor::Beran => {
                if self.index == 0 || self.index > p {
                    return Err(Failure::config(format!("--index must lie in 1..={p}")));
                }
                CensorSpec::Beran(BeranConfig {
                    bandwidth: self.bandwidth.unwrap_or_default(),
                    index: BeranIndex::Covariate(self.index - 1),
                })
            }
            SimCensor::True => CensorSpec::Known(KnownSurvivor::exponential(beta_c.to_vec())),
        };
        let fit = match self.penalty {
            SimPenalty::None => StudyFit::Unpenalized {
                bootstrap: self.bootstrap.map(|n_replicates| StudyBootstrap {
                    n_replicates,
                    level: self.level,
                }),
            },
            SimPenalty::Lasso | SimPenalty::Alasso => {
                let kind = if self.penalty == SimPenalty::Lasso {
                    PenaltyKind::Lasso
                } else {
                    PenaltyKind::Alasso
                };
                let mut config = PenaltyConfig::new(kind);
                config.epsilon = self.epsilon;
                config.zero_threshold = self.zero_threshold;
                config.validate()?;
                StudyFit::Selection {
                    config,
                    path: PathOptions {
                        n_lambda: self.n_lambda,
                        n_folds: self.folds,
                        fold_weights: if self.full_data_weights {
                            FoldWeights::FullData
                        } else {
                            FoldWeights::PerFold
                        },
                        ..PathOptions::default()
                    },
                }
            }
        };
        Ok(EstimatorConfig { censor, fit })
    }
}

#[derive(Serialize)]
struct Resolved<'a> {
    #[serde(flatten)]
    args: &'a SimulateArgs,
    scenarios: &'a [SimScenario],
}

fn raw_rows(scenario: usize, report: &SimReport, out: &mut String) {
    for rec in &report.records {
        let mut row = vec![scenario.to_string(), rec.index.to_string()];
        let k = report.true_theta.len();
        match &rec.theta {
            Some(t) => row.extend(t.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), k)),
        }
        match &rec.covered {
            Some(c) => row.extend(c.iter().map(|v| u8::from(*v).to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), k)),
        }
        match &rec.selection {
            Some(m) => row.extend([m.correct.to_string(), m.incorrect.to_string(), m.df.to_string()]),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        row.push(rec.error.clone().unwrap_or_default());
        out.push_str(&output::csv_line(&row));
    }
}

pub fn run(global: &Global, args: &SimulateArgs) -> Result<(), Failure> {
    args.validate()?;
    let scenarios = args.scenarios(global.seed)?;
    let prov = output::provenance(
        "simulate",
        scenarios[0].seed,
        global,
        &Resolved {
            args,
            scenarios: &scenarios,
        },
    );

    let mut reports = Vec::with_capacity(scenarios.len());
    for sc in &scenarios {
        let cal = sc.calibrate()?;
        let est = args.estimator(&cal.beta_c, sc.p())?;
        reports.push(run_study(&cal, &est)?);
    }

    let mut csv = output::csv_preamble(&prov);
    let header = reports[0].csv_row().0;
    csv.push_str(&output::csv_line(&header));
    for r in &reports {
        let (h, row) = r.csv_row();
        if h != header {
            return Err(Failure::config("all scenarios in one run must have the same number of covariates"));
        }
        csv.push_str(&output::csv_line(&row));
    }
    output::write(global, "simulate.csv", &csv)?;

    if args.raw {
        let k = reports[0].true_theta.len();
        let mut head = vec!["scenario".to_string(), "replicate".to_string()];
        head.extend((0..k).map(|j| format!("theta_{j}")));
        head.extend((0..k).map(|j| format!("covered_{j}")));
        head.extend(["correct", "incorrect", "df", "error"].map(String::from));
        let mut raw = output::csv_preamble(&prov);
        raw.push_str(&output::csv_line(&head));
        for (i, r) in reports.iter().enumerate() {
            raw_rows(i, r, &mut raw);
        }
        output::write(global, "replicates.csv", &raw)?;
    }
    Ok(())
}
