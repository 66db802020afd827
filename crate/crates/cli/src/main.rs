//! `muskat` command-line experiments.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use commands::{Command, RunError};
use config::Config;

#[derive(Debug, Parser)]
#[command(name = "muskat", version, about = "Muskat interface experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration; defaults are used for anything missing.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for CSV files, manifest.json and error.json.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Override a config value, e.g. `--set fluids.varpi=1.0`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Seed for randomized initial data; overrides the config `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn write_json(dir: &Path, name: &str, value: &serde_json::Value) {
    let text = serde_json::to_string_pretty(value).expect("json serializes");
    if let Err(e) = std::fs::write(dir.join(name), text + "\n") {
        eprintln!("muskat: cannot write {name}: {e}");
    }
}

fn error_record(dir: &Path, command: Command, err: &RunError) -> ExitCode {
    let code = err.exit_code();
    eprintln!("muskat {}: {err}", command.name());
    write_json(
        dir,
        "error.json",
        &json!({
            "command": command.name(),
            "kind": err.kind(),
            "message": err.to_string(),
            "exit_code": code,
        }),
    );
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    if let Err(e) = std::fs::create_dir_all(&cli.out) {
        eprintln!("muskat: cannot create {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    let config = match Config::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return error_record(&cli.out, cli.command, &e.into()),
    };
    let outcome = match commands::run(cli.command, &config, &cli.out) {
        Ok(o) => o,
        Err(e) => return error_record(&cli.out, cli.command, &e),
    };
    write_json(
        &cli.out,
        "manifest.json",
        &json!({
            "command": cli.command.name(),
            "version": env!("CARGO_PKG_VERSION"),
            "seed": config.seed,
            "config": config,
            "outputs": outcome.outputs,
            "summary": outcome.summary,
            "status": if outcome.failure.is_none() { "ok" } else { "failed" },
            "wall_time_seconds": start.elapsed().as_secs_f64(),
        }),
    );
    match outcome.failure {
        None => ExitCode::SUCCESS,
        Some(e) => error_record(&cli.out, cli.command, &e),
    }
}
