use std::process::ExitCode;

use clap::Parser;
use nvpol::cli::{exit_code, run, Cli, Status};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            for f in &outcome.files {
                println!("{}", f.display());
            }
            if outcome.status == Status::VerificationFailed {
                eprintln!("error: oracle verification failed");
            }
            ExitCode::from(outcome.status.code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
