use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use curefit::penalized::{lambda_path, FoldWeights, PathOptions, PenaltyConfig};

use crate::args::{CensorOpts, DataArgs, Global, PenaltyChoice};
use crate::failure::Failure;
use crate::{output, svg};

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FoldWeightChoice {
    PerFold,
    FullData,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub censor: CensorOpts,
    #[arg(long, value_enum, default_value_t = PenaltyChoice::Alasso)]
    pub penalty: PenaltyChoice,
    #[arg(long, default_value_t = 1e-4)]
    pub epsilon: f64,
    #[arg(long, default_value_t = curefit::penalized::DEFAULT_ZERO_THRESHOLD)]
    pub zero_threshold: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Grid size.
    #[arg(long, default_value_t = 100)]
    pub n_lambda: usize,
    /// Smallest grid value as a fraction of lambda_max.
    #[arg(long, default_value_t = 1e-3)]
    pub min_ratio: f64,
    /// Cross-validation folds.
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    /// Golden-section refinement of the selected lambda.
    #[arg(long)]
    pub refine: bool,
    /// Source of the adaptive weights inside cross-validation.
    #[arg(long, value_enum, default_value_t = FoldWeightChoice::PerFold)]
    pub fold_weights: FoldWeightChoice,
}

pub fn run(global: &Global, args: &SelectArgs) -> Result<(), Failure> {
    args.censor.validate()?;
    let mut cfg = PenaltyConfig::new(args.penalty.into());
    cfg.epsilon = args.epsilon;
    cfg.zero_threshold = args.zero_threshold;
    cfg.gamma = args.gamma;
    cfg.validate()?;
    let opts = PathOptions {
        n_lambda: args.n_lambda,
        min_ratio: args.min_ratio,
        n_folds: args.folds,
        seed: global.seed(),
        refine: args.refine,
        fold_weights: match args.fold_weights {
            FoldWeightChoice::PerFold => FoldWeights::PerFold,
            FoldWeightChoice::FullData => FoldWeights::FullData,
        },
    };

    let data = args.data.load()?;
    let spec = args.censor.spec(data.covariate_names())?;
    let model = spec.fit(&data)?;
    let path = lambda_path(&data, &model, &cfg, &opts)?;
    let prov = output::provenance("select", global.seed(), global, args);
    let names = data.covariate_names();

    let mut csv = output::csv_preamble(&prov);
    let mut header = vec!["lambda".to_string()];
    header.extend(names.iter().cloned());
    header.extend(["df".to_string(), "cve".to_string()]);
    csv.push_str(&output::csv_line(&header));
    for pt in &path.points {
        let mut row = vec![pt.lambda.to_string()];
        row.extend(pt.theta[1..].iter().map(|v| v.to_string()));
        row.push(pt.df.to_string());
        row.push(pt.cve.to_string());
        csv.push_str(&output::csv_line(&row));
    }
    output::write(global, "path.csv", &csv)?;

    let coefficients: Vec<_> = std::iter::once("(intercept)")
        .chain(names.iter().map(String::as_str))
        .enumerate()
        .map(|(j, n)| {
            json!({
                "name": n,
                "estimate": path.final_theta[j],
                "standardized": path.selected_theta_std[j],
            })
        })
        .collect();
    let doc = json!({
        "provenance": prov,
        "n": data.len(),
        "p": data.p(),
        "censoring": spec.kind(),
        "penalty": path.config,
        "path_options": path.options,
        "lambda_max": path.lambda_max,
        "n_lambda": path.points.len(),
        "selected_index": path.selected_index,
        "selected_lambda": path.selected_lambda,
        "selected_cve": path.selected_cve,
        "df": path.active_set.len() + 1,
        "active_set": path.active_set.iter().map(|&j| &names[j]).collect::<Vec<_>>(),
        "adaptive_weights": path.weights,
        "standardization": path.standardization,
        "coefficients": coefficients,
    });
    output::write_json(global, "selection.json", &doc)?;

    if global.svg {
        let lambdas = path.lambdas();
        let series: Vec<(String, Vec<f64>)> = names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), path.points.iter().map(|p| p.theta[j + 1]).collect()))
            .collect();
        let cve: Vec<f64> = path.points.iter().map(|p| p.cve).collect();
        output::write(global, "path.svg", &svg::path_plot(&lambdas, &series, &cve, path.selected_lambda))?;
    }
    Ok(())
}
