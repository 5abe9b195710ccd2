//! Scenario runner: reads a TOML scenario, builds the perturbed semigroup or
//! example it describes and writes report.csv, diagnostics.json and, with
//! `--refine`, convergence.csv.

mod config;
mod report;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::Value;

use scenarios::Failure;
use semigroup_lab::Error;

#[derive(Parser)]
#[command(name = "semigroup-lab", version, about = "Positive perturbations of positive semigroups")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed for every randomized probe (overrides `seed` in the config).
        #[arg(long)]
        seed: Option<u64>,
        /// Extra grid-refinement levels for the example scenarios.
        #[arg(long, default_value_t = 0)]
        refine: usize,
        #[arg(long)]
        quiet: bool,
    },
}

fn exit_code(f: &Failure) -> u8 {
    match f {
        Failure::Config(_) => 1,
        Failure::Numeric(e) => match e {
            Error::HypothesisFailed(_) => 2,
            Error::InvalidArgument(_)
            | Error::SpaceMismatch(_)
            | Error::BadAlpha(_)
            | Error::EmbeddingMismatch(_)
            | Error::IncompatibleTimeStep { .. } => 1,
            _ => 3,
        },
    }
}

fn main() -> ExitCode {
    let Command::Run { config, out, seed, refine, quiet } = Cli::parse().command;
    let mut cfg = match config::load(&config) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("config error: {msg}");
            return ExitCode::from(1);
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let result = match scenarios::run(&cfg, refine) {
        Ok(r) => r,
        Err(f) => {
            match &f {
                Failure::Config(msg) => eprintln!("config error: {msg}"),
                Failure::Numeric(e) => eprintln!("error: {e}"),
            }
            return ExitCode::from(exit_code(&f));
        }
    };
    match write_outputs(&dir, result) {
        Ok(rows) => {
            if !quiet {
                println!("{} rows written to {}", rows, dir.join("report.csv").display());
            }
            ExitCode::SUCCESS
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn write_outputs(dir: &std::path::Path, mut out: scenarios::Output) -> Result<usize, String> {
    std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let rows = out.report.len();
    report::write(&dir.join("report.csv"), &out.report.to_csv())?;
    report::write(&dir.join("diagnostics.json"), &report::json(&Value::Object(out.diagnostics)))?;
    if let Some(c) = &mut out.convergence {
        report::write(&dir.join("convergence.csv"), &c.to_csv())?;
    }
    Ok(rows)
}
