use std::process::ExitCode;

use clap::Parser;

use srprune::cli::{run, usage_hint, Cli};
use srprune::Error;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Contract(_)) {
                if let Some(hint) = usage_hint(&cli) {
                    eprintln!("{hint}");
                }
            }
            ExitCode::from(1)
        }
    }
}
