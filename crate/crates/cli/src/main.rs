//! `polar-rewrite` command-line tool.
//!
//! Exit codes: 0 success, 2 invalid input or arguments, 3 runtime failure.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        })
        .parse_env("POLAR_REWRITE_LOG")
        .init();

    let result = match &cli.command {
        Command::Datagen(a) => commands::datagen(a),
        Command::ExtractConstraints(a) => commands::extract(a),
        Command::Train(a) => commands::train(a),
        Command::Rewrite(a) => commands::rewrite(a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::InspectFlags(a) => commands::inspect_flags(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                CliError::Invalid(_) => ExitCode::from(2),
                CliError::Runtime(_) => ExitCode::from(3),
            }
        }
    }
}
