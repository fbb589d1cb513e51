use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

mod args;
mod commands;
mod settings;

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: exit code 1.
    Usage(String),
    /// Data or validation failure: exit code 2.
    Core(longtail::Error),
}

impl From<longtail::Error> for CliError {
    fn from(e: longtail::Error) -> Self {
        CliError::Core(e)
    }
}

fn diagnostic(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message.trim() });
    eprintln!("{line}");
}

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            diagnostic("UsageError", &e.render().to_string());
            return ExitCode::from(1);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            diagnostic("UsageError", &m);
            ExitCode::from(1)
        }
        Err(CliError::Core(e)) => {
            diagnostic(e.kind(), &e.to_string());
            ExitCode::from(2)
        }
    }
}
