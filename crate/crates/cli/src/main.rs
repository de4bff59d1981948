use std::process::ExitCode;

use clap::Parser;
use sca_cli::{run, Cli, Outcome};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
