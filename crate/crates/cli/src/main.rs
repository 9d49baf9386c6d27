//! `usm` command-line tool. Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod args;
mod commands;
mod config;
mod prior;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;

#[derive(Debug)]
pub enum Failure {
    /// Bad flags or unreadable input.
    Usage(String),
    Runtime(String),
}

fn report(f: Failure) -> ExitCode {
    let (msg, code) = match f {
        Failure::Usage(m) => (m, 2),
        Failure::Runtime(m) => (m, 1),
    };
    eprintln!("usm: error: {msg}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let raw: Result<Vec<String>, _> = std::env::args_os().map(|a| a.into_string()).collect();
    let Ok(raw) = raw else {
        return report(Failure::Usage("arguments must be valid UTF-8".into()));
    };
    let args = match config::merge_config(raw) {
        Ok(a) => a,
        Err(f) => return report(f),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report(f),
    }
}
