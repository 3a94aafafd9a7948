use std::io::Write;
use std::process::ExitCode;

use bci::cli::{run, Cli, CliError};
use clap::{CommandFactory, Parser};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("BCI_LOG", "warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            let _ = std::io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(CliError::Usage(msg)) => Cli::command()
            .error(clap::error::ErrorKind::MissingRequiredArgument, msg)
            .exit(),
        Err(CliError::Stage(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
