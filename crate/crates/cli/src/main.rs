mod args;
mod commands;
mod error;
mod manifest;
mod plot;

use std::time::Instant;

use clap::Parser;

use args::Cli;
use error::{CliError, CliResult};
use manifest::RunManifest;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| CliError::Validation(format!("--workers: {e}")))?;
    }
    let start = Instant::now();
    let (command, outcome) = commands::run(cli.command, None)?;
    if let Some(path) = &outcome.manifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command,
            seeds: outcome.seeds,
            channel_hash: outcome.spec.as_ref().map(|s| s.hash()),
            channel_spec: outcome
                .spec
                .as_ref()
                .map(|s| serde_json::from_str(&s.to_json()).expect("spec JSON parses")),
            workers: rayon::current_num_threads(),
            duration_secs: start.elapsed().as_secs_f64(),
            outputs: outcome.outputs,
            result: outcome.result,
        }
        .write(path)?;
    }
    Ok(())
}
