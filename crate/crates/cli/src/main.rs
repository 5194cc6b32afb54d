//! `gcnpipe`: reduction, training, performance-model and simulator runs
//! driven by one configuration file.

mod cmd;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ExperimentConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "gcnpipe", version, about = "GCN training with redundancy reduction, plus accelerator modeling")]
struct Cli {
    /// Experiment config (TOML sections of `key = value`).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set model.hidden=64`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Output directory (`paths.out`).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Seed for the model, the sampler and the generator.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce a graph's aggregation redundancy and report per-round metrics.
    Reduce(ReduceArgs),
    /// Train a GCN on subgraph minibatches.
    Train(TrainArgs),
    /// Evaluate the analytical performance model.
    Model,
    /// Run the pipeline simulator on a workload or a training stats file.
    Simulate(SimulateArgs),
    /// Run every acceptance check.
    Bench,
    /// Write a synthetic dataset or graph.
    Generate,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long)]
    theta: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    budget: Option<f64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Preprocessing threads.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Train on unreduced subgraphs.
    #[arg(long)]
    no_reduce: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Stats CSV written by `train`.
    #[arg(long)]
    stats: Option<String>,
}

impl Cli {
    fn overrides(&self) -> Vec<String> {
        let mut o = self.set.clone();
        if let Some(out) = &self.out {
            o.push(format!("paths.out={}", toml_str(out)));
        }
        if let Some(s) = self.seed {
            o.extend(["model.seed", "sampler.seed", "generate.seed"].map(|k| format!("{k}={s}")));
        }
        match &self.command {
            Command::Reduce(a) => {
                o.extend(a.theta.map(|v| format!("reduce.theta={v}")));
                o.extend(a.rounds.map(|v| format!("reduce.rounds={v}")));
                o.extend(a.budget.map(|v| format!("reduce.budget={v:?}")));
            }
            Command::Train(a) => {
                o.extend(a.workers.map(|v| format!("train.workers={v}")));
                o.extend(a.epochs.map(|v| format!("train.epochs={v}")));
                if a.no_reduce {
                    o.push("reduce.enabled=false".into());
                }
            }
            Command::Simulate(a) => {
                o.extend(a.stats.as_ref().map(|v| format!("paths.stats={}", toml_str(v))));
            }
            _ => {}
        }
        o
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.into()).to_string()
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides())?;
    match cli.command {
        Command::Reduce(_) => cmd::run("reduce", &cfg, cmd::reduce::run),
        Command::Train(_) => cmd::run("train", &cfg, cmd::train::run),
        Command::Model => cmd::run("model", &cfg, cmd::model::run),
        Command::Simulate(_) => cmd::run("simulate", &cfg, cmd::simulate::run),
        Command::Bench => cmd::run("bench", &cfg, cmd::bench::run),
        Command::Generate => cmd::run("generate", &cfg, cmd::generate::run),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
