//! `pancake`: reproducible experiments over moment-matching designs and the
//! parallel-pancake tester. Every run writes its outputs plus a
//! `<subcommand>.manifest.json` into `--out`.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 usage or
//! configuration error.

mod args;
mod commands;
mod error;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command, Invocation};
use commands::{execute, Outputs};
use error::{CliError, CliResult};
use manifest::RunManifest;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    let (command, seed, threads) = match cli.command {
        Invocation::Run(cmd) => (cmd, cli.seed, cli.threads),
        Invocation::Rerun { manifest } => {
            let m = RunManifest::load(&manifest)?;
            (m.config, m.seed, cli.threads.or(m.threads))
        }
    };
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::usage(format!("cannot size the thread pool: {e}")))?;
    }
    run_command(command, seed, threads, &cli.out)
}

fn run_command(command: Command, seed: u64, threads: Option<usize>, out_dir: &std::path::Path) -> CliResult<()> {
    let started_at = chrono::Utc::now().to_rfc3339();
    let mut out = Outputs::new(out_dir)?;
    let result = execute(&command, seed, &mut out);
    // a failed check still leaves its evidence and manifest behind
    if result.is_ok() || matches!(result, Err(CliError::VerificationFailed(_))) {
        let name = command.name().to_string();
        let manifest = RunManifest {
            subcommand: name.clone(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            threads,
            config: command,
            outputs: out.names().to_vec(),
            started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        out.write_json(&RunManifest::file_name(&name), &manifest)?;
    }
    result
}
