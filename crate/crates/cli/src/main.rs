//! `atomshap` command-line interface.
//!
//! Every failure exits nonzero with a single JSON object on stderr:
//! `{"error": {"kind": ..., "message": ..., "causes": [...]}}`.

mod commands;
mod config;

use std::process::ExitCode;

use anyhow::Result;
use atomshap::eval::EvalError;
use atomshap::executor::ExecError;
use atomshap::kg::KgError;
use atomshap::query::QueryError;
use atomshap::scorer::ScoreError;
use atomshap::shapley::ShapleyError;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::config::{RunArgs, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "atomshap", version, about = "Explain complex query answers atom by atom")]
struct Cli {
    #[command(flatten)]
    run: RunArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate a dataset directory and print its summary.
    Ingest(commands::IngestArgs),
    /// Shapley values of every atom for one target entity.
    Explain(commands::ExplainArgs),
    /// Necessary and sufficient evaluation tables.
    Evaluate(commands::EvaluateArgs),
    /// Count labelled-hard answers that the observed graph already reaches.
    AuditHardness(commands::AuditArgs),
    /// Mean explanation latency per query shape.
    Bench(commands::BenchArgs),
    /// Generate a synthetic dataset with queries.
    Synth(commands::SynthArgs),
}

fn run(cli: Cli) -> Result<()> {
    let config = RunConfig::resolve(cli.run)?;
    if let Some(n) = config.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Ingest(a) => commands::ingest(&config, a),
        Command::Explain(a) => commands::explain(&config, a),
        Command::Evaluate(a) => commands::evaluate(&config, a),
        Command::AuditHardness(a) => commands::audit_hardness(&config, a),
        Command::Bench(a) => commands::bench(&config, a),
        Command::Synth(a) => commands::synth(&config, a),
    }
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if cause.is::<KgError>() {
            return "dataset";
        }
        if cause.is::<QueryError>() {
            return "query";
        }
        if cause.is::<ScoreError>() {
            return "scorer";
        }
        if cause.is::<ExecError>() {
            return "execution";
        }
        if cause.is::<ShapleyError>() {
            return "shapley";
        }
        if cause.is::<EvalError>() {
            return "evaluation";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "invalid_input"
}

fn report(kind: &str, message: String, causes: Vec<String>) {
    eprintln!(
        "{}",
        json!({ "error": { "kind": kind, "message": message, "causes": causes } })
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.kind().to_string(), vec![e.to_string().trim().to_string()]);
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let causes = err.chain().skip(1).map(|c| c.to_string()).collect();
            report(error_kind(&err), err.to_string(), causes);
            ExitCode::FAILURE
        }
    }
}
