//! Observed right-censored data, covariate standardization and CSV ingestion.
//!
//! Each subject carries the observed time `Y = min(T, C)`, the event
//! indicator, a covariate vector without the intercept and a nonnegative
//! weight (one unless a weight column is supplied).

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    /// Observed time, positive and finite.
    pub y: f64,
    /// `true` when the event was observed, `false` when censored.
    pub delta: bool,
    /// Covariates, intercept excluded.
    pub x: Vec<f64>,
    /// Likelihood weight.
    pub omega: f64,
}

impl Subject {
    pub fn new(y: f64, delta: bool, x: Vec<f64>) -> Self {
        Self {
            y,
            delta,
            x,
            omega: 1.0,
        }
    }

    pub fn with_weight(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |message: &str| {
            Err(Error::InvalidSubject {
                index,
                message: message.to_string(),
            })
        };
        if !(self.y.is_finite() && self.y > 0.0) {
            return bad("observed time must be positive and finite");
        }
        if !(self.omega.is_finite() && self.omega >= 0.0) {
            return bad("weight must be nonnegative and finite");
        }
        if self.x.iter().any(|v| !v.is_finite()) {
            return bad("covariates must be finite");
        }
        Ok(())
    }
}

/// An ordered collection of subjects sharing one covariate dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    subjects: Vec<Subject>,
    covariate_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn new(subjects: Vec<Subject>, covariate_names: Vec<String>) -> Result<Self> {
        let p = covariate_names.len();
        for (i, s) in subjects.iter().enumerate() {
            if s.x.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: s.x.len(),
                });
            }
            s.validate(i)?;
        }
        Ok(Self {
            subjects,
            covariate_names,
        })
    }

    /// Builds a dataset with generated covariate names `x1..xp`.
    pub fn from_subjects(subjects: Vec<Subject>) -> Result<Self> {
        let p = subjects.first().map_or(0, |s| s.x.len());
        let names = (1..=p).map(|j| format!("x{j}")).collect();
        Self::new(subjects, names)
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Number of covariates, intercept excluded.
    pub fn p(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_events(&self) -> usize {
        self.subjects.iter().filter(|s| s.delta).count()
    }

    /// Subset (with repetition allowed) in the given row order.
    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            subjects: rows.iter().map(|&i| self.subjects[i].clone()).collect(),
            covariate_names: self.covariate_names.clone(),
        }
    }

    /// Keeps only the listed covariate columns.
    pub fn with_covariates(&self, columns: &[usize]) -> Result<Self> {
        if let Some(&bad) = columns.iter().find(|&&j| j >= self.p()) {
            return Err(Error::InvalidConfig(format!(
                "covariate index {bad} out of range (p = {})",
                self.p()
            )));
        }
        Ok(Self {
            subjects: self
                .subjects
                .iter()
                .map(|s| Subject {
                    x: columns.iter().map(|&j| s.x[j]).collect(),
                    ..s.clone()
                })
                .collect(),
            covariate_names: columns
                .iter()
                .map(|&j| self.covariate_names[j].clone())
                .collect(),
        })
    }

    pub(crate) fn require_events(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if self.n_events() == 0 {
            return Err(Error::NoEvents);
        }
        Ok(())
    }
}

/// Column selection for [`load_csv`].
#[derive(Debug, Clone)]
pub struct CsvColumns {
    pub time: String,
    pub status: String,
    pub covariates: Vec<String>,
    pub weight: Option<String>,
}

/// Reads a header-first, comma-separated file. Row numbers in errors count
/// data rows from 1 (the header is not counted).
pub fn load_csv(path: impl AsRef<Path>, cols: &CsvColumns) -> Result<SurvivalDataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, cols)
}

/// Column names of a CSV file.
pub fn csv_header(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    Ok(rdr.headers()?.iter().map(String::from).collect())
}

pub fn read_csv<R: std::io::Read>(reader: R, cols: &CsvColumns) -> Result<SurvivalDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let time_idx = find(&cols.time)?;
    let status_idx = find(&cols.status)?;
    let cov_idx = cols
        .covariates
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let weight_idx = cols.weight.as_deref().map(find).transpose()?;

    let mut subjects = Vec::new();
    for (k, record) in rdr.records().enumerate() {
        let row = k + 1;
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::InvalidValue {
                    row,
                    column: column.to_string(),
                    message: format!("not a finite number: `{raw}`"),
                })
        };
        let y = cell(time_idx, &cols.time)?;
        if y <= 0.0 {
            return Err(Error::InvalidValue {
                row,
                column: cols.time.clone(),
                message: format!("time must be positive, got {y}"),
            });
        }
        let status = cell(status_idx, &cols.status)?;
        let delta = if status == 1.0 {
            true
        } else if status == 0.0 {
            false
        } else {
            return Err(Error::InvalidValue {
                row,
                column: cols.status.clone(),
                message: format!("status must be 0 or 1, got {status}"),
            });
        };
        let x = cov_idx
            .iter()
            .zip(&cols.covariates)
            .map(|(&i, name)| cell(i, name))
            .collect::<Result<Vec<_>>>()?;
        let omega = match (weight_idx, &cols.weight) {
            (Some(i), Some(name)) => {
                let w = cell(i, name)?;
                if w < 0.0 {
                    return Err(Error::InvalidValue {
                        row,
                        column: name.clone(),
                        message: format!("weight must be nonnegative, got {w}"),
                    });
                }
                w
            }
            _ => 1.0,
        };
        subjects.push(Subject { y, delta, x, omega });
    }
    SurvivalDataset::new(subjects, cols.covariates.clone())
}

/// Per-covariate centering and scaling (sample sd, denominator n - 1).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    pub fn identity(p: usize) -> Self {
        Self {
            means: vec![0.0; p],
            sds: vec![1.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    pub fn apply_dataset(&self, data: &SurvivalDataset) -> Result<SurvivalDataset> {
        if data.p() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                found: data.p(),
            });
        }
        Ok(SurvivalDataset {
            subjects: data
                .subjects
                .iter()
                .map(|s| Subject {
                    x: self.apply(&s.x),
                    ..s.clone()
                })
                .collect(),
            covariate_names: data.covariate_names.clone(),
        })
    }
}

pub fn standardize(data: &SurvivalDataset) -> Result<(SurvivalDataset, Standardization)> {
    let n = data.len();
    let p = data.p();
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = data.subjects.iter().map(|s| s.x[j]);
        let mean = col.clone().sum::<f64>() / n as f64;
        let ss: f64 = col.map(|v| (v - mean).powi(2)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::ZeroVariance(data.covariate_names[j].clone()));
        }
        means[j] = mean;
        sds[j] = sd;
    }
    let s = Standardization { means, sds };
    Ok((s.apply_dataset(data)?, s))
}

/// Maps coefficients fitted on standardized covariates back to the original
/// scale, so that both give the same linear predictor for every subject.
pub fn destandardize_coefficients(theta_std: &[f64], s: &Standardization) -> Result<Vec<f64>> {
    if theta_std.len() != s.p() + 1 {
        return Err(Error::DimensionMismatch {
            expected: s.p() + 1,
            found: theta_std.len(),
        });
    }
    let mut theta = Vec::with_capacity(theta_std.len());
    let mut intercept = theta_std[0];
    let slopes: Vec<f64> = theta_std[1..]
        .iter()
        .zip(s.means.iter().zip(&s.sds))
        .map(|(t, (m, sd))| {
            intercept -= t * m / sd;
            t / sd
        })
        .collect();
    theta.push(intercept);
    theta.extend(slopes);
    Ok(theta)
}

/// Dense row-major design with a leading intercept column, plus the
/// per-row weights. Built once and reused across Newton iterations.
#[derive(Debug, Clone)]
pub struct Design {
    rows: Vec<f64>,
    n: usize,
    k: usize,
    weights: Vec<f64>,
}

impl Design {
    pub fn from_dataset(data: &SurvivalDataset) -> Self {
        let k = data.p() + 1;
        let mut rows = Vec::with_capacity(data.len() * k);
        for s in data.subjects() {
            rows.push(1.0);
            rows.extend_from_slice(&s.x);
        }
        Self {
            rows,
            n: data.len(),
            k,
            weights: data.subjects().iter().map(|s| s.omega).collect(),
        }
    }

    /// Builds a design directly from covariate rows (intercept added).
    pub fn from_rows(x: &[Vec<f64>], weights: Vec<f64>) -> Result<Self> {
        let k = x.first().map_or(1, |r| r.len() + 1);
        if weights.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: weights.len(),
            });
        }
        let mut rows = Vec::with_capacity(x.len() * k);
        for r in x {
            if r.len() + 1 != k {
                return Err(Error::DimensionMismatch {
                    expected: k - 1,
                    found: r.len(),
                });
            }
            rows.push(1.0);
            rows.extend_from_slice(r);
        }
        Ok(Self {
            rows,
            n: x.len(),
            k,
            weights,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of coefficients including the intercept.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.k..(i + 1) * self.k]
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn scale_weights(&mut self, c: f64) {
        self.weights.iter_mut().for_each(|w| *w *= c);
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let mut rows = Vec::with_capacity(idx.len() * self.k);
        for &i in idx {
            rows.extend_from_slice(self.row(i));
        }
        Self {
            rows,
            n: idx.len(),
            k: self.k,
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
        }
    }

    pub fn linear_predictor(&self, i: usize, theta: &[f64]) -> f64 {
        self.row(i).iter().zip(theta).map(|(a, b)| a * b).sum()
    }
}
