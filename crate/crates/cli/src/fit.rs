use clap::Args;
use serde::Serialize;
use serde_json::{json, Value};

use curefit::cure::synthetic_indicators;
use curefit::inference::{bootstrap, BootstrapOptions, FitKind, Resampler};
use curefit::penalized::{fit_at_lambda, PenaltyConfig};
use curefit::{fit_cure, Error};

use crate::args::{CensorOpts, DataArgs, Global, PenaltyChoice};
use crate::failure::Failure;
use crate::output;

#[derive(Args, Debug, Clone, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub censor: CensorOpts,
    /// Bootstrap replicates for percentile intervals (bare flag: 399).
    #[arg(long, num_args = 0..=1, default_missing_value = "399")]
    pub bootstrap: Option<usize>,
    /// Confidence level of the bootstrap intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Fit a penalized model at the fixed `--lambda`.
    #[arg(long, value_enum, requires = "lambda")]
    pub penalty: Option<PenaltyChoice>,
    #[arg(long, requires = "penalty")]
    pub lambda: Option<f64>,
    /// Smoothing constant of the absolute-value approximation.
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    /// Slopes below this (standardized scale) are reported as zero.
    #[arg(long, default_value_t = curefit::penalized::DEFAULT_ZERO_THRESHOLD)]
    pub zero_threshold: f64,
    /// Adaptive weight exponent.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
}

impl FitArgs {
    fn kind(&self) -> Result<FitKind, Failure> {
        match (self.penalty, self.lambda) {
            (Some(p), Some(lambda)) => {
                if !(lambda >= 0.0) || !lambda.is_finite() {
                    return Err(Failure::config(format!("--lambda must be a finite nonnegative number, got {lambda}")));
                }
                let mut config = PenaltyConfig::new(p.into());
                config.epsilon = self.epsilon;
                config.zero_threshold = self.zero_threshold;
                config.gamma = self.gamma;
                config.validate()?;
                Ok(FitKind::Penalized { lambda, config })
            }
            _ => Ok(FitKind::Unpenalized),
        }
    }
}

pub fn run(global: &Global, args: &FitArgs) -> Result<(), Failure> {
    args.censor.validate()?;
    if !(args.level > 0.0 && args.level < 1.0) {
        return Err(Failure::config(format!("--level must lie in (0, 1), got {}", args.level)));
    }
    let kind = args.kind()?;
    let data = args.data.load()?;
    let spec = args.censor.spec(data.covariate_names())?;
    let model = spec.fit(&data)?;

    let (theta, convergence, low_overlap) = match &kind {
        FitKind::Unpenalized => {
            let fit = fit_cure(&data, &model)?;
            if !fit.converged {
                return Err(Error::NonConvergence {
                    what: "cure likelihood",
                    iterations: fit.n_iterations,
                    grad_norm: fit.score_norm,
                    theta_norm: fit.theta.iter().map(|t| t * t).sum::<f64>().sqrt(),
                }
                .into());
            }
            let conv = json!({
                "converged": true,
                "iterations": fit.n_iterations,
                "score_norm": fit.score_norm,
                "loglik": fit.loglik,
            });
            (fit.theta, conv, fit.indicators.low_overlap_count)
        }
        FitKind::Penalized { lambda, config } => {
            let ind = synthetic_indicators(&data, &model)?;
            let fit = fit_at_lambda(&data, &ind, *lambda, config)?;
            let conv = json!({
                "converged": true,
                "iterations": fit.iterations,
                "gradient_norm": fit.grad_norm,
                "penalized_objective": fit.objective,
            });
            (fit.theta, conv, ind.low_overlap_count)
        }
    };

    let names: Vec<String> = std::iter::once("(intercept)".to_string())
        .chain(data.covariate_names().iter().cloned())
        .collect();
    let coefficients: Vec<Value> = names
        .iter()
        .zip(&theta)
        .map(|(n, t)| json!({"name": n, "estimate": t}))
        .collect();

    let boot = match args.bootstrap {
        None => Value::Null,
        Some(n_replicates) => {
            let res = bootstrap(
                &data,
                &spec,
                &kind,
                &BootstrapOptions {
                    n_replicates,
                    level: args.level,
                    seed: global.seed(),
                    resampler: Resampler::WithReplacement,
                },
            )?;
            let table: Vec<Value> = (0..names.len())
                .map(|j| {
                    json!({
                        "name": names[j],
                        "est": res.estimate[j],
                        "se": res.se[j],
                        "ci_lower": res.ci_lower[j],
                        "ci_upper": res.ci_upper[j],
                        "p_value": res.p_values[j],
                    })
                })
                .collect();
            json!({
                "n_replicates": res.n_replicates,
                "n_failed": res.n_failed,
                "level": res.level,
                "table": table,
            })
        }
    };

    let doc = json!({
        "provenance": output::provenance("fit", global.seed(), global, args),
        "n": data.len(),
        "n_events": data.n_events(),
        "p": data.p(),
        "censoring": spec.kind(),
        "fit": kind,
        "low_overlap_count": low_overlap,
        "coefficients": coefficients,
        "convergence": convergence,
        "bootstrap": boot,
    });
    output::write_json(global, "fit.json", &doc)
}
