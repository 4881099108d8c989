use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use senselearn_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            if cli.command.data_args().output.is_none() {
                let _ = std::io::stdout().write_all(text.as_bytes());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("senselearn: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
