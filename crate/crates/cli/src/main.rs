use std::process::ExitCode;

use clap::Parser;
use msrpa_cli::{execute, Cli, EXIT_USAGE};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let (code, text) = execute(&cli);
    print!("{text}");
    ExitCode::from(code)
}
