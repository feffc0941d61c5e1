#![allow(dead_code)]

use curefit::data::Subject;
use curefit::SurvivalDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

pub struct Toy {
    pub data: SurvivalDataset,
    pub true_b: Vec<f64>,
    /// Censoring rate coefficients, intercept first.
    pub beta_c: Vec<f64>,
}

/// Cure data with logistic cure probability `logistic(x' theta)`, unit
/// exponential latency and exponential censoring with rate
/// `exp(beta_c0 + x_1)`. `grid` > 0 rounds times up to multiples of it.
pub fn toy(n: usize, theta: &[f64], beta_c0: f64, grid: f64, seed: u64) -> Toy {
    let p = theta.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut beta_c = vec![beta_c0];
    beta_c.extend((0..p).map(|j| if j == 0 { 0.5 } else { 0.0 }));
    let mut subjects = Vec::with_capacity(n);
    let mut true_b = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let eta = theta[0] + theta[1..].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let cured = rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp());
        let t0: f64 = Exp1.sample(&mut rng);
        let rate = (beta_c[0] + beta_c[1..].iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()).exp();
        let e: f64 = Exp1.sample(&mut rng);
        let mut c = e / rate;
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

/// Kaplan-Meier estimate of the event-time survivor at `t`.
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

pub fn logistic(eta: f64) -> f64 {
    1.0 / (1.0 + (-eta).exp())
}

/// Bernoulli-form log-likelihood `sum b log pi + (1 - b) log(1 - pi)`.
pub fn bernoulli_loglik(data: &SurvivalDataset, b: &[f64], theta: &[f64]) -> f64 {
    data.subjects()
        .iter()
        .zip(b)
        .map(|(s, &bi)| {
            let eta = theta[0] + theta[1..].iter().zip(&s.x).map(|(a, v)| a * v).sum::<f64>();
            let pi = logistic(eta);
            s.omega * (bi * pi.ln() + (1.0 - bi) * (1.0 - pi).ln())
        })
        .sum()
}

/// Maximizes `f` over a box: a coarse grid, then shrinking local grids.
pub fn grid_maximize(f: impl Fn(&[f64]) -> f64, dim: usize, lo: f64, hi: f64, coarse: f64) -> Vec<f64> {
    let steps = ((hi - lo) / coarse).round() as usize;
    let mut best = vec![lo; dim];
    let mut best_v = f64::NEG_INFINITY;
    let mut idx = vec![0usize; dim];
    loop {
        let pt: Vec<f64> = idx.iter().map(|&i| lo + i as f64 * coarse).collect();
        let v = f(&pt);
        if v > best_v {
            best_v = v;
            best = pt;
        }
        let mut k = 0;
        loop {
            if k == dim {
                return refine(&f, best, coarse);
            }
            idx[k] += 1;
            if idx[k] <= steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn refine(f: &impl Fn(&[f64]) -> f64, mut best: Vec<f64>, mut h: f64) -> Vec<f64> {
    let dim = best.len();
    let mut best_v = f(&best);
    while h > 1e-7 {
        // 5^dim local grid of spacing h/2 around the incumbent
        let h2 = h / 2.0;
        let mut improved = true;
        while improved {
            improved = false;
            let center = best.clone();
            let mut idx = vec![0usize; dim];
            'outer: loop {
                let pt: Vec<f64> = (0..dim).map(|j| center[j] + (idx[j] as f64 - 2.0) * h2).collect();
                let v = f(&pt);
                if v > best_v + 1e-15 * best_v.abs() {
                    best_v = v;
                    best = pt;
                    improved = true;
                }
                let mut k = 0;
                loop {
                    if k == dim {
                        break 'outer;
                    }
                    idx[k] += 1;
                    if idx[k] < 5 {
                        break;
                    }
                    idx[k] = 0;
                    k += 1;
                }
            }
        }
        h = h2;
    }
    best
}
