//! Cure-fraction regression under random right censoring.
//!
//! The cure probability `pi(x) = 1 / (1 + exp(-theta' (1, x)))` is estimated
//! by inverse-probability-of-censoring weighting: a censoring survivor model
//! is fitted first, each subject receives a synthetic cure indicator, and the
//! resulting Bernoulli likelihood is maximized (optionally with a smoothed
//! lasso or adaptive-lasso penalty). Inference is by nonparametric bootstrap.
//! The [`simulation`] module generates mixture-cure data with truncated
//! Weibull latency and exponential censoring for Monte Carlo studies.

pub mod censoring;
pub mod cure;
pub mod data;
pub mod error;
pub mod inference;
mod newton;
pub mod penalized;
pub mod rng;
pub mod simulation;

pub use censoring::{CensorKind, CensorSpec, CensoringModel};
pub use cure::{fit_cure, CureFit, SyntheticIndicators};
pub use data::{Standardization, Subject, SurvivalDataset};
pub use error::{Error, ErrorKind, Result};
