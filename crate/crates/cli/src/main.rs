use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    match wlr_cli::run(wlr_cli::Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
