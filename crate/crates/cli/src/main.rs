mod args;
mod commands;
mod data;
mod report;

use std::process::ExitCode;

use clap::Parser;
use tnbs_core::TnbsError;

use args::{Cli, Command};

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(TnbsError::Numerical(_)) = cause.downcast_ref::<TnbsError>() {
            return EXIT_NUMERICAL;
        }
    }
    EXIT_INPUT
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(c) => commands::fit(c),
        Command::Predict(c) => commands::predict(c),
        Command::Simulate(c) => commands::simulate(c),
        Command::Synth(c) => commands::synth(c),
        Command::Cv(c) => commands::cv(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
