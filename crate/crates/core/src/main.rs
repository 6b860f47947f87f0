use std::process::ExitCode;

use clap::Parser;
use obsproj::cli::{execute, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match execute(&cli, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(2)
        }
    }
}
