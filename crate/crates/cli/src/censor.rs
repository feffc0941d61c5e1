use clap::Args;
use serde::Serialize;

use curefit::censoring::distinct_times;

use crate::args::{CensorOpts, DataArgs, Global};
use crate::failure::Failure;
use crate::output;

#[derive(Args, Debug, Clone, Serialize)]
pub struct CensorArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub censor: CensorOpts,
    /// Covariate values to evaluate the curve at (default: sample means).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub at: Vec<f64>,
}

pub fn run(global: &Global, args: &CensorArgs) -> Result<(), Failure> {
    args.censor.validate()?;
    let data = args.data.load()?;
    let spec = args.censor.spec(data.covariate_names())?;
    let model = spec.fit(&data)?;
    let p = data.p();
    let at = if args.at.is_empty() {
        let n = data.len() as f64;
        (0..p)
            .map(|j| data.subjects().iter().map(|s| s.x[j]).sum::<f64>() / n)
            .collect()
    } else if args.at.len() == p {
        args.at.clone()
    } else {
        return Err(Failure::config(format!("--at has {} values for {p} covariates", args.at.len())));
    };

    let mut csv = output::csv_preamble(&output::provenance("censor", global.seed(), global, args));
    let at_desc: Vec<String> = data
        .covariate_names()
        .iter()
        .zip(&at)
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    csv.push_str(&format!("# at: {}\n", at_desc.join(" ")));
    csv.push_str(&output::csv_line(&["time", "survivor", "left_limit"]));
    for t in distinct_times(&data) {
        let s = model.survivor(t, &at)?;
        let l = model.survivor_left_limit_raw(t, &at)?;
        csv.push_str(&output::csv_line(&[t.to_string(), s.to_string(), l.to_string()]));
    }
    output::write(global, "censor.csv", &csv)
}
