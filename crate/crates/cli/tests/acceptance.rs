//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 5 6`.

mod common;

use std::collections::HashMap;
use std::path::Path;
use std::process::ExitCode;

use common::{bernoulli_loglik, csv_rows, curefit, grid_maximize, km_event_survivor, lin, logistic, stderr, toy, write_dataset};
use curefit::censoring::{fit_km_censoring, CensoringModel, KnownSurvivor};
use curefit::cure::{cure_hessian, cure_loglik, cure_score, fit_cure_with_indicators, synthetic_indicators};
use curefit::data::standardize;
use curefit::penalized::{fit_penalized, PenaltyConfig, PenaltyKind};
use curefit::{fit_cure, SyntheticIndicators};
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fmt(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", s.join(", "))
}

/// Runs `simulate` and returns the summary row keyed by column name.
fn simulate(dir: &Path, tag: &str, args: &[&str]) -> Result<HashMap<String, f64>, String> {
    let out = dir.join(tag);
    let mut a = vec!["simulate"];
    a.extend_from_slice(args);
    a.extend(["--out", out.to_str().unwrap()]);
    let o = curefit(&a);
    if !o.status.success() {
        return Err(format!("simulate failed: {}", stderr(&o).trim()));
    }
    let (header, rows) = csv_rows(&out.join("simulate.csv"));
    Ok(header
        .into_iter()
        .zip(&rows[0])
        .map(|(h, v)| (h, v.parse().unwrap_or(f64::NAN)))
        .collect())
}

fn cols(row: &HashMap<String, f64>, prefix: &str) -> Vec<f64> {
    (0..3).map(|j| row[&format!("{prefix}_{j}")]).collect()
}

fn table1(dir: &Path, nu: &str, seed: &str, bias_tol: f64, check_sd: bool) -> Outcome {
    let row = simulate(
        dir,
        &format!("table1_nu{nu}"),
        &["--nu", nu, "--pi-m", "0.4", "--rho", "0.1", "--n", "1000", "--replicates", "500", "--censor", "cox", "--seed", seed],
    )?;
    let bias = cols(&row, "bias");
    let sd = cols(&row, "sd");
    let target = [0.10, 0.12, 0.12];
    let bias_ok = bias.iter().all(|b| b.abs() <= bias_tol);
    let sd_ok = !check_sd || sd.iter().zip(target).all(|(s, t)| (s - t).abs() <= 0.02);
    check(
        bias_ok && sd_ok && row["n_failed"] == 0.0,
        format!("bias {} sd {} failed {}", fmt(&bias), fmt(&sd), row["n_failed"]),
    )
}

fn criterion1(dir: &Path) -> Outcome {
    table1(dir, "0", "1", 0.02, true)
}

fn criterion2(dir: &Path) -> Outcome {
    table1(dir, "2", "2", 0.03, false)
}

fn criterion3(dir: &Path) -> Outcome {
    let row = simulate(
        dir,
        "table2",
        &[
            "--nu", "0", "--pi-m", "0.2", "--rho", "0.1", "--n", "300", "--replicates", "200", "--bootstrap", "199",
            "--level", "0.95", "--censor", "cox", "--seed", "3",
        ],
    )?;
    let cov = cols(&row, "coverage");
    check(
        cov.iter().all(|c| (90.0..=98.0).contains(c)),
        format!("coverage % {}", fmt(&cov)),
    )
}

fn criterion4(dir: &Path) -> Outcome {
    let common = [
        "--nu", "0", "--pi-m", "0.2", "--rho", "0.1", "--n", "1000", "--noise", "4", "--replicates", "200", "--censor",
        "cox", "--seed", "4",
    ];
    let mut alasso_args = common.to_vec();
    alasso_args.extend(["--penalty", "alasso"]);
    let mut lasso_args = common.to_vec();
    lasso_args.extend(["--penalty", "lasso"]);
    let a = simulate(dir, "table5_alasso", &alasso_args)?;
    let l = simulate(dir, "table5_lasso", &lasso_args)?;
    let ok = a["mean_ic"] <= 0.05
        && a["mean_c"] >= 3.4
        && l["mean_c"] < a["mean_c"]
        && a["n_failed"] == 0.0
        && l["n_failed"] == 0.0;
    check(
        ok,
        format!(
            "alasso C {:.3} IC {:.3} DF {:.3}; lasso C {:.3} IC {:.3} DF {:.3}",
            a["mean_c"], a["mean_ic"], a["mean_df"], l["mean_c"], l["mean_ic"], l["mean_df"]
        ),
    )
}

fn criterion5() -> Outcome {
    let t = toy(50, &[0.3, -1.2], -1.0, 0.0, 501);
    let fit = fit_cure_with_indicators(&t.data, SyntheticIndicators::from_values(t.true_b.clone()))
        .map_err(|e| e.to_string())?;
    let oracle = grid_maximize(|th| bernoulli_loglik(&t.data, &t.true_b, th), 2, -4.0, 4.0, 0.01);
    let gap = (0..2).map(|j| (fit.theta[j] - oracle[j]).abs()).fold(0.0, f64::max);

    // The Known model must feed exactly the true S_C(Y-|X) into the indicators.
    let model = CensoringModel::Known(KnownSurvivor::exponential(t.beta_c.clone()));
    let ind = synthetic_indicators(&t.data, &model).map_err(|e| e.to_string())?;
    let plumbing = t
        .data
        .subjects()
        .iter()
        .zip(&ind.b_star)
        .map(|(s, b)| {
            let sc = (-lin(&t.beta_c, &s.x).exp() * s.y).exp();
            let expect = if s.delta { 1.0 - 1.0 / sc } else { 1.0 };
            (b - expect).abs()
        })
        .fold(0.0, f64::max);
    check(
        gap <= 1e-3 && plumbing <= 1e-12 && fit.converged,
        format!("fit {} grid {} max gap {gap:.2e}; known-model indicator error {plumbing:.1e}", fmt(&fit.theta), fmt(&oracle)),
    )
}

fn criterion6() -> Outcome {
    let mut worst: f64 = 0.0;
    for (seed, grid) in [(601, 0.0), (602, 0.1), (603, 0.25), (604, 0.5), (605, 1.0)] {
        let t = toy(250, &[0.1, 0.0], -0.6, grid, seed);
        let data = t.data.with_covariates(&[]).map_err(|e| e.to_string())?;
        let km = CensoringModel::KaplanMeier(fit_km_censoring(&data).map_err(|e| e.to_string())?);
        let fit = fit_cure(&data, &km).map_err(|e| e.to_string())?;
        let last_event = data.subjects().iter().filter(|s| s.delta).map(|s| s.y).fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max((logistic(fit.theta[0]) - km_event_survivor(&data, last_event)).abs());
    }
    check(worst <= 1e-8, format!("max |pi_hat - KM plateau| over 5 datasets {worst:.2e}"))
}

fn criterion7() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(701);
    let (mut worst_g, mut worst_h, mut max_eig) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for seed in 0..5 {
        let t = toy(150, &[0.0, 1.0, -0.5], -0.7, 0.0, 710 + seed);
        let km = CensoringModel::KaplanMeier(fit_km_censoring(&t.data).map_err(|e| e.to_string())?);
        let ind = synthetic_indicators(&t.data, &km).map_err(|e| e.to_string())?;
        let ll = |th: &[f64]| cure_loglik(th, &t.data, &ind).unwrap();
        let score = |th: &[f64]| cure_score(th, &t.data, &ind).unwrap();
        for _ in 0..10 {
            let theta: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
            let g = score(&theta);
            let h = cure_hessian(&theta, &t.data, &ind).unwrap();
            let step = 1e-5;
            for j in 0..3 {
                let mut tp = theta.clone();
                let mut tm = theta.clone();
                tp[j] += step;
                tm[j] -= step;
                let fd = (ll(&tp) - ll(&tm)) / (2.0 * step);
                worst_g = worst_g.max((fd - g[j]).abs() / g[j].abs().max(1.0));
                let (gp, gm) = (score(&tp), score(&tm));
                for a in 0..3 {
                    let fdh = (gp[a] - gm[a]) / (2.0 * step);
                    worst_h = worst_h.max((fdh - h[(a, j)]).abs() / h[(a, j)].abs().max(1.0));
                }
            }
            max_eig = h.symmetric_eigenvalues().iter().copied().fold(max_eig, f64::max);
        }
    }
    check(
        worst_g <= 1e-5 && worst_h <= 1e-5 && max_eig <= 1e-12,
        format!("score rel err {worst_g:.1e}, hessian rel err {worst_h:.1e}, max eigenvalue {max_eig:.3e}"),
    )
}

fn criterion8() -> Outcome {
    let t = toy(300, &[0.3, 1.0, 0.0], -0.8, 0.0, 801);
    let (d, _) = standardize(&t.data).map_err(|e| e.to_string())?;
    let km = CensoringModel::KaplanMeier(fit_km_censoring(&d).map_err(|e| e.to_string())?);
    let ind = synthetic_indicators(&d, &km).map_err(|e| e.to_string())?;
    let unpen = fit_cure_with_indicators(&d, ind.clone()).map_err(|e| e.to_string())?;
    let pbar = ind.b_star.iter().sum::<f64>() / ind.len() as f64;
    let intercept_mle = (pbar / (1.0 - pbar)).ln();
    let (mut zero_gap, mut big_slope, mut big_icpt) = (0.0f64, 0.0f64, 0.0f64);
    for kind in [PenaltyKind::Lasso, PenaltyKind::Alasso] {
        let cfg = PenaltyConfig::new(kind);
        let w: Vec<f64> = match kind {
            PenaltyKind::Lasso => vec![1.0, 1.0],
            PenaltyKind::Alasso => unpen.theta[1..].iter().map(|t| (1.0 / t.abs()).min(1e8)).collect(),
        };
        let f0 = fit_penalized(&d, &ind, 0.0, &w, &cfg, &[0.0; 3]).map_err(|e| e.to_string())?;
        zero_gap = f0.theta.iter().zip(&unpen.theta).map(|(a, b)| (a - b).abs()).fold(zero_gap, f64::max);
        let f1 = fit_penalized(&d, &ind, 1e6, &w, &cfg, &[0.0; 3]).map_err(|e| e.to_string())?;
        big_slope = f1.theta[1..].iter().map(|t| t.abs()).fold(big_slope, f64::max);
        big_icpt = big_icpt.max((f1.theta[0] - intercept_mle).abs());
    }
    check(
        zero_gap <= 1e-6 && big_slope < 1e-6 && big_icpt <= 1e-4,
        format!("lambda=0 gap {zero_gap:.1e}; lambda=1e6 max |slope| {big_slope:.1e}, intercept gap {big_icpt:.1e}"),
    )
}

fn criterion9(dir: &Path) -> Outcome {
    let input = dir.join("det.csv");
    write_dataset(&toy(250, &[0.2, 1.0, -0.5], -0.8, 0.1, 901).data, &input);
    let inp = input.to_str().unwrap();
    let cases: Vec<(Vec<&str>, Vec<&str>)> = vec![
        (vec!["fit", inp, "--censor", "cox", "--bootstrap", "60"], vec!["fit.json"]),
        (
            vec!["fit", inp, "--censor", "beran", "--bandwidth", "0.8", "--penalty", "alasso", "--lambda", "2", "--bootstrap", "30"],
            vec!["fit.json"],
        ),
        (vec!["select", inp, "--censor", "cox", "--n-lambda", "30", "--folds", "5", "--svg"], vec!["path.csv", "selection.json", "path.svg"]),
        (vec!["censor", inp, "--censor", "cox"], vec!["censor.csv"]),
        (
            vec![
                "simulate", "--nu", "1", "--pi-m", "0.2", "--rho", "0.2", "--n", "200", "--replicates", "12", "--mc-size",
                "50000", "--bootstrap", "20", "--raw",
            ],
            vec!["simulate.csv", "replicates.csv"],
        ),
        (
            vec![
                "simulate", "--nu", "0", "--pi-m", "0.2", "--rho", "0.1", "--n", "300", "--noise", "4", "--replicates", "6",
                "--mc-size", "50000", "--penalty", "alasso", "--n-lambda", "30", "--folds", "5",
            ],
            vec!["simulate.csv"],
        ),
    ];
    let mut compared = 0;
    for (i, (args, files)) in cases.iter().enumerate() {
        let mut seen: Option<Vec<Vec<u8>>> = None;
        for (run, workers) in ["1", "4", "4"].iter().enumerate() {
            let out = dir.join(format!("det{i}_{run}"));
            let mut a = args.clone();
            a.extend(["--seed", "9", "--workers", workers, "--out", out.to_str().unwrap()]);
            let o = curefit(&a);
            if !o.status.success() {
                return Err(format!("{}: {}", args[0], stderr(&o).trim()));
            }
            let bytes: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(out.join(f)).unwrap()).collect();
            match &seen {
                None => seen = Some(bytes),
                Some(first) => {
                    for (f, (x, y)) in files.iter().zip(first.iter().zip(&bytes)) {
                        if x != y {
                            return Err(format!("{f} differs between runs with {workers} workers"));
                        }
                        compared += 1;
                    }
                }
            }
        }
    }
    check(true, format!("{compared} output comparisons byte-identical across 1/4 workers and reruns"))
}

fn main() -> ExitCode {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let dir = tempfile::tempdir().expect("temp dir");
    let d = dir.path();
    let criteria: [(usize, &str, Box<dyn Fn() -> Outcome + '_>); 9] = [
        (1, "bias and SD, nu = 0, n = 1000, 500 replicates", Box::new(|| criterion1(d))),
        (2, "bias under non-PH latency, nu = 2", Box::new(|| criterion2(d))),
        (3, "bootstrap 95% CI coverage, n = 300, 200 x 199", Box::new(|| criterion3(d))),
        (4, "selection: alasso IC/C and lasso C below alasso", Box::new(|| criterion4(d))),
        (5, "oracle equivalence with true B", Box::new(criterion5)),
        (6, "KM-IPCW intercept identity", Box::new(criterion6)),
        (7, "score/Hessian finite differences and concavity", Box::new(criterion7)),
        (8, "penalty limits lambda = 0 and 1e6", Box::new(criterion8)),
        (9, "byte-identical outputs across worker counts", Box::new(|| criterion9(d))),
    ];
    let mut failed = 0;
    for (n, name, run) in &criteria {
        if !wanted.is_empty() && !wanted.contains(n) {
            continue;
        }
        let start = std::time::Instant::now();
        let res = run();
        let secs = start.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS criterion {n} ({name}): {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}): {detail} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
