mod args;
mod censor;
mod failure;
mod fit;
mod output;
mod select;
mod simulate;
mod svg;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use args::Global;
use failure::Failure;

/// Logistic cure regression with censoring-weighted synthetic indicators.
#[derive(Parser)]
#[command(name = "curefit", version, about, long_version = concat!(
    env!("CARGO_PKG_VERSION"),
    " (",
    env!("CARGO_PKG_NAME"),
    ", ",
    "profile ",
    env!("CURE_BUILD_PROFILE"),
    ")"
))]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the cure model, optionally with bootstrap intervals.
    Fit(fit::FitArgs),
    /// Penalized path with cross-validated tuning.
    Select(select::SelectArgs),
    /// Estimated censoring survivor curve.
    Censor(censor::CensorArgs),
    /// Monte Carlo study over one or more scenarios.
    Simulate(simulate::SimulateArgs),
}

fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(w) = cli.global.workers {
        if w == 0 {
            return Err(Failure::config("--workers must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Failure::config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.global.out).map_err(Failure::io)?;
    let start = Instant::now();
    let name = match &cli.command {
        Command::Fit(a) => {
            fit::run(&cli.global, a)?;
            "fit"
        }
        Command::Select(a) => {
            select::run(&cli.global, a)?;
            "select"
        }
        Command::Censor(a) => {
            censor::run(&cli.global, a)?;
            "censor"
        }
        Command::Simulate(a) => {
            simulate::run(&cli.global, a)?;
            "simulate"
        }
    };
    output::write_meta(&cli.global, name, start.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = e.print();
            } else {
                let first = e.to_string();
                let first = first.lines().next().unwrap_or("invalid arguments");
                eprintln!("error[config]: {}", first.trim_start_matches("error: "));
            }
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.diagnostic());
            ExitCode::from(f.code)
        }
    }
}
