use std::process::ExitCode;

use clap::Parser;
use forge_cli::{configure_threads, emit, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(&cli)).and_then(|outcome| {
        emit(&cli.global, &outcome.body)?;
        Ok(outcome.code)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("forge: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
