use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::Serialize;

use curefit::censoring::{BeranConfig, BeranIndex, CoxOptions};
use curefit::data::{csv_header, load_csv, CsvColumns};
use curefit::penalized::PenaltyKind;
use curefit::{CensorSpec, SurvivalDataset};

use crate::failure::Failure;

/// Options shared by every subcommand. `workers` and `out` are left out of
/// the embedded config so that outputs do not depend on them.
#[derive(Args, Debug, Clone, Serialize)]
pub struct Global {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub workers: Option<usize>,
    /// Master seed for folds, bootstrap and simulation streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    #[serde(skip)]
    pub out: PathBuf,
    /// Also write SVG plots where available.
    #[arg(long, global = true)]
    pub svg: bool,
}

impl Global {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    #[arg(long, default_value = "time")]
    pub time: String,
    #[arg(long, default_value = "status")]
    pub status: String,
    /// Comma-separated covariate columns (default: every other column).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Optional case-weight column.
    #[arg(long)]
    pub weight: Option<String>,
}

impl DataArgs {
    pub fn load(&self) -> Result<SurvivalDataset, Failure> {
        let covariates = if self.covariates.is_empty() {
            csv_header(&self.input)?
                .into_iter()
                .filter(|c| *c != self.time && *c != self.status && Some(c) != self.weight.as_ref())
                .collect()
        } else {
            self.covariates.clone()
        };
        Ok(load_csv(
            &self.input,
            &CsvColumns {
                time: self.time.clone(),
                status: self.status.clone(),
                covariates,
                weight: self.weight.clone(),
            },
        )?)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CensorChoice {
    Km,
    Cox,
    Beran,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct CensorOpts {
    /// Censoring survivor estimator.
    #[arg(long, value_enum, default_value_t = CensorChoice::Km)]
    pub censor: CensorChoice,
    /// Kernel bandwidth; required with `--censor beran` and only then.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Covariate the Beran kernel smooths over (default: the first).
    #[arg(long)]
    pub index: Option<String>,
    /// Linear index coefficients for Beran, one per covariate.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "index")]
    pub index_coefs: Vec<f64>,
}

impl CensorOpts {
    pub fn validate(&self) -> Result<(), Failure> {
        let beran = self.censor == CensorChoice::Beran;
        if beran != self.bandwidth.is_some() {
            return Err(Failure::config(
                "--bandwidth is required with --censor beran and not allowed otherwise",
            ));
        }
        if !beran && (self.index.is_some() || !self.index_coefs.is_empty()) {
            return Err(Failure::config("--index and --index-coefs apply only to --censor beran"));
        }
        Ok(())
    }

    pub fn spec(&self, covariate_names: &[String]) -> Result<CensorSpec, Failure> {
        self.validate()?;
        Ok(match self.censor {
            CensorChoice::Km => CensorSpec::KaplanMeier,
            CensorChoice::Cox => CensorSpec::Cox(CoxOptions::default()),
            CensorChoice::Beran => {
                let index = if !self.index_coefs.is_empty() {
                    if self.index_coefs.len() != covariate_names.len() {
                        return Err(Failure::config(format!(
                            "--index-coefs has {} values for {} covariates",
                            self.index_coefs.len(),
                            covariate_names.len()
                        )));
                    }
                    BeranIndex::Linear(self.index_coefs.clone())
                } else {
                    let j = match &self.index {
                        Some(name) => covariate_names.iter().position(|c| c == name).ok_or_else(|| {
                            Failure::config(format!("--index {name} is not a covariate"))
                        })?,
                        None if covariate_names.is_empty() => {
                            return Err(Failure::config("Beran censoring needs at least one covariate"))
                        }
                        None => 0,
                    };
                    BeranIndex::Covariate(j)
                };
                CensorSpec::Beran(BeranConfig {
                    bandwidth: self.bandwidth.unwrap_or_default(),
                    index,
                })
            }
        })
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyChoice {
    Lasso,
    Alasso,
}

impl From<PenaltyChoice> for PenaltyKind {
    fn from(p: PenaltyChoice) -> Self {
        match p {
            PenaltyChoice::Lasso => PenaltyKind::Lasso,
            PenaltyChoice::Alasso => PenaltyKind::Alasso,
        }
    }
}
