#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use curefit::data::Subject;
use curefit::SurvivalDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub fn curefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curefit"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes `time,status,<covariates>` with full float precision.
pub fn write_dataset(data: &SurvivalDataset, path: &Path) {
    let mut s = String::from("time,status");
    for n in data.covariate_names() {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for sub in data.subjects() {
        s.push_str(&format!("{},{}", sub.y, u8::from(sub.delta)));
        for v in &sub.x {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    std::fs::write(path, s).unwrap();
}

/// Data rows of a CSV output (comment lines and header dropped), split on commas.
pub fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

pub struct Toy {
    pub data: SurvivalDataset,
    pub true_b: Vec<f64>,
    /// Censoring rate coefficients, intercept first.
    pub beta_c: Vec<f64>,
}

/// Logistic cure probability, unit exponential latency, exponential
/// censoring with rate `exp(beta_c0 + 0.5 x_1)`. `grid` > 0 rounds times up.
pub fn toy(n: usize, theta: &[f64], beta_c0: f64, grid: f64, seed: u64) -> Toy {
    let p = theta.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta_c = vec![beta_c0];
    beta_c.extend((0..p).map(|j| if j == 0 { 0.5 } else { 0.0 }));
    let mut subjects = Vec::with_capacity(n);
    let mut true_b = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let cured = rng.random::<f64>() < logistic(lin(theta, &x));
        let t0: f64 = Exp1.sample(&mut rng);
        let e: f64 = Exp1.sample(&mut rng);
        let mut c = e / lin(&beta_c, &x).exp();
        let mut t = if cured { f64::INFINITY } else { t0 };
        if grid > 0.0 {
            c = (c / grid).ceil() * grid;
            t = (t / grid).ceil() * grid;
        }
        subjects.push(Subject::new(t.min(c), t <= c, x));
        true_b.push(if cured { 1.0 } else { 0.0 });
    }
    Toy {
        data: SurvivalDataset::from_subjects(subjects).unwrap(),
        true_b,
        beta_c,
    }
}

pub fn lin(beta: &[f64], x: &[f64]) -> f64 {
    beta[0] + beta[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
}

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Product-limit estimate of the event-time survivor at `t`.
pub fn km_event_survivor(data: &SurvivalDataset, t: f64) -> f64 {
    let mut obs: Vec<(f64, bool)> = data.subjects().iter().map(|s| (s.y, s.delta)).collect();
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = 1.0;
    let mut i = 0;
    while i < obs.len() && obs[i].0 <= t {
        let at_risk = obs.len() - i;
        let time = obs[i].0;
        let mut d = 0;
        while i < obs.len() && obs[i].0 == time {
            d += obs[i].1 as usize;
            i += 1;
        }
        s *= 1.0 - d as f64 / at_risk as f64;
    }
    s
}

/// `sum w (b log pi + (1 - b) log(1 - pi))`.
pub fn bernoulli_loglik(data: &SurvivalDataset, b: &[f64], theta: &[f64]) -> f64 {
    data.subjects()
        .iter()
        .zip(b)
        .map(|(s, &bi)| {
            let pi = logistic(lin(theta, &s.x));
            s.omega * (bi * pi.ln() + (1.0 - bi) * (1.0 - pi).ln())
        })
        .sum()
}

/// Box maximization: coarse grid, then shrinking 5^dim local grids.
pub fn grid_maximize(f: impl Fn(&[f64]) -> f64, dim: usize, lo: f64, hi: f64, coarse: f64) -> Vec<f64> {
    let steps = ((hi - lo) / coarse).round() as usize;
    let mut best = vec![lo; dim];
    let mut best_v = f64::NEG_INFINITY;
    let mut idx = vec![0usize; dim];
    'grid: loop {
        let pt: Vec<f64> = idx.iter().map(|&i| lo + i as f64 * coarse).collect();
        let v = f(&pt);
        if v > best_v {
            best_v = v;
            best = pt;
        }
        for k in 0..=dim {
            if k == dim {
                break 'grid;
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
        }
    }
    let mut h = coarse;
    while h > 1e-7 {
        let h2 = h / 2.0;
        let mut improved = true;
        while improved {
            improved = false;
            let center = best.clone();
            let mut idx = vec![0usize; dim];
            'local: loop {
                let pt: Vec<f64> = (0..dim).map(|j| center[j] + (idx[j] as f64 - 2.0) * h2).collect();
                let v = f(&pt);
                if v > best_v + 1e-15 * best_v.abs() {
                    best_v = v;
                    best = pt;
                    improved = true;
                }
                for k in 0..=dim {
                    if k == dim {
                        break 'local;
                    }
                    idx[k] += 1;
                    if idx[k] < 5 {
                        break;
                    }
                    idx[k] = 0;
                }
            }
        }
        h = h2;
    }
    best
}
