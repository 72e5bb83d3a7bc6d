//! `ladroot` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid configuration, 3 numerical failure.

mod args;
mod commands;
mod manifest;

use args::{Cli, Command};
use clap::error::ErrorKind;
use clap::Parser;
use commands::Failure;
use std::process::ExitCode;

fn run(argv: Vec<String>) -> Result<(), Failure> {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            return Err(Failure::usage(
                e.render()
                    .to_string()
                    .trim_end()
                    .trim_start_matches("error: "),
            ))
        }
    };
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Fit(a) => commands::fit(a),
        Command::Exp(a) => commands::exp(a),
        Command::Limit(a) => commands::limit(a),
        Command::Verify(a) => commands::verify(a),
        Command::Replay(a) => {
            let m = manifest::RunManifest::read(&a.manifest)
                .map_err(|e| Failure::usage(format!("{}: {e}", a.manifest.display())))?;
            run(commands::replay_argv(&m, &a.out, a.threads)?)
        }
    }
}

fn main() -> ExitCode {
    match run(std::env::args().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
