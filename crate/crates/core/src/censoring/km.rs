use crate::data::SurvivalDataset;
use crate::error::{Error, Result};

/// Right-continuous step function starting at 1.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct StepCurve {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl StepCurve {
    pub(crate) fn new(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at `t` (jumps at `t` included).
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }

    /// Limit from the left at `t` (jumps at `t` excluded).
    pub fn left_limit(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            1.0
        } else {
            self.values[k - 1]
        }
    }
}

/// Product-limit estimator of the censoring survivor function.
#[derive(Debug, Clone, PartialEq)]
pub struct KaplanMeier {
    curve: StepCurve,
}

impl KaplanMeier {
    pub fn censoring(data: &SurvivalDataset) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut obs: Vec<(f64, bool)> = data.subjects().iter().map(|s| (s.y, s.delta)).collect();
        obs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut at_risk = obs.len();
        let mut surv = 1.0;
        let mut times = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < obs.len() {
            let t = obs[i].0;
            let (mut events, mut censored) = (0usize, 0usize);
            while i < obs.len() && obs[i].0 == t {
                if obs[i].1 {
                    events += 1;
                } else {
                    censored += 1;
                }
                i += 1;
            }
            if censored > 0 {
                // events at t leave the risk set first
                surv *= 1.0 - censored as f64 / (at_risk - events) as f64;
                times.push(t);
                values.push(surv);
            }
            at_risk -= events + censored;
        }
        Ok(Self {
            curve: StepCurve::new(times, values),
        })
    }

    pub fn curve(&self) -> &StepCurve {
        &self.curve
    }
}
