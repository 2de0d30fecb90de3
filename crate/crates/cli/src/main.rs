mod cli;
mod commands;
mod config;
mod error;

use std::io::Write;
use std::panic;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use crate::cli::Cli;
use crate::error::ExitStatus;

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn print_json(v: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("summary serializes"));
}

fn exit(status: ExitStatus) -> ExitCode {
    ExitCode::from(status.code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => exit(ExitStatus::Ok),
                _ => exit(ExitStatus::Usage),
            };
        }
    };
    init_logging(cli.global.verbose);
    panic::set_hook(Box::new(|info| log::error!("internal error: {info}")));
    match panic::catch_unwind(|| commands::dispatch(cli)) {
        Ok(Ok(summary)) => {
            print_json(&summary);
            exit(ExitStatus::Ok)
        }
        Ok(Err(e)) => {
            if let Some(s) = &e.summary {
                print_json(s);
            }
            eprintln!("error: {}", e.message);
            exit(e.status)
        }
        Err(_) => {
            eprintln!("error: internal failure; rerun with -vv for details");
            exit(ExitStatus::Internal)
        }
    }
}
