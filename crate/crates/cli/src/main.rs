//! `fairpath`: fit, predict, audit and simulate fairness-constrained
//! predictors from the command line.

mod args;
mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use config::Settings;
use failure::{Failure, Outcome};

fn run(cli: Cli) -> Outcome {
    let (options, command): (_, fn(&Settings) -> Outcome) = match &cli.command {
        Command::Fit(o) => (o, commands::fit),
        Command::Predict(o) => (o, commands::predict),
        Command::Audit(o) => (o, commands::audit),
        Command::Simulate(o) => (o, commands::simulate),
    };
    let settings = Settings::load(options)?;
    if let Some(jobs) = settings.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Failure::config(format!("cannot start {jobs} workers: {e}")))?;
    }
    command(&settings)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("fairpath: error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
