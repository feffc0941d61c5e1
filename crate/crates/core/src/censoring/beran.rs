//! Conditional (kernel-weighted) Kaplan-Meier estimator of the censoring
//! survivor function, localized on a scalar index `z = g(x)`.

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// The scalar index the kernel smooths over.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeranIndex {
    /// A single covariate column (0-based, intercept excluded).
    Covariate(usize),
    /// A fixed linear combination of the covariates.
    Linear(Vec<f64>),
}

impl BeranIndex {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        match self {
            Self::Covariate(j) => x.get(*j).copied().ok_or(Error::DimensionMismatch {
                expected: j + 1,
                found: x.len(),
            }),
            Self::Linear(c) => {
                if c.len() != x.len() {
                    return Err(Error::DimensionMismatch {
                        expected: c.len(),
                        found: x.len(),
                    });
                }
                Ok(c.iter().zip(x).map(|(a, b)| a * b).sum())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BeranConfig {
    pub bandwidth: f64,
    pub index: BeranIndex,
}

fn epanechnikov(u: f64) -> f64 {
    if u.abs() < 1.0 {
        0.75 * (1.0 - u * u)
    } else {
        0.0
    }
}

#[derive(Debug, Clone)]
pub struct BeranCensoring {
    config: BeranConfig,
    /// Training sample sorted by observed time.
    y: Vec<f64>,
    delta: Vec<bool>,
    z: Vec<f64>,
}

impl BeranCensoring {
    pub fn fit(data: &SurvivalDataset, cfg: &BeranConfig) -> Result<Self> {
        if !(cfg.bandwidth > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "Beran bandwidth must be positive, got {}",
                cfg.bandwidth
            )));
        }
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rows: Vec<(f64, bool, f64)> = data
            .subjects()
            .iter()
            .map(|s| Ok((s.y, s.delta, cfg.index.eval(&s.x)?)))
            .collect::<Result<_>>()?;
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        Ok(Self {
            config: cfg.clone(),
            y: rows.iter().map(|r| r.0).collect(),
            delta: rows.iter().map(|r| r.1).collect(),
            z: rows.iter().map(|r| r.2).collect(),
        })
    }

    pub fn config(&self) -> &BeranConfig {
        &self.config
    }

    /// Survivor at `t` for covariate `x`; `left` excludes jumps at `t`.
    pub(crate) fn survivor(&self, t: f64, x: &[f64], left: bool) -> Result<f64> {
        let z0 = self.config.index.eval(x)?;
        let b = self.config.bandwidth;
        let w: Vec<f64> = self.z.iter().map(|z| epanechnikov((z - z0) / b)).collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyNeighborhood { index_value: z0 });
        }
        let mut remaining = 1.0;
        let mut surv = 1.0;
        let n = self.y.len();
        let mut i = 0;
        while i < n {
            let s = self.y[i];
            if (left && s >= t) || (!left && s > t) {
                break;
            }
            let (mut ev, mut cens) = (0.0, 0.0);
            while i < n && self.y[i] == s {
                let wi = w[i] / total;
                if self.delta[i] {
                    ev += wi;
                } else {
                    cens += wi;
                }
                i += 1;
            }
            let risk = remaining - ev;
            if cens > 0.0 {
                surv *= if risk > cens { 1.0 - cens / risk } else { 0.0 };
            }
            remaining -= ev + cens;
        }
        Ok(surv.clamp(0.0, 1.0))
    }
}
