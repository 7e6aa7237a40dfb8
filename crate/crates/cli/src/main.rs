use std::process::ExitCode;

use clap::Parser;
use peu_cli::{emit, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = run(&cli).and_then(|outcome| {
        emit(&outcome, cli.out.as_deref())?;
        Ok(outcome.status.exit_code())
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("peu: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
