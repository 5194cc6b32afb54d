use std::io::Write;
use std::path::Path;

use gcnpipe_core::engine::{evaluate, read_features, read_labels, read_split, save_model, write_batch_stats, write_log};
use gcnpipe_core::graph::load_graph;
use gcnpipe_core::synth::random_split;
use gcnpipe_core::{train, Dataset, ModelConfig, ReducedSubgraph, Scalar, TrainConfig};

use super::{write_file, Metadata};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Writes `log.csv`, `stats.csv`, `model.bin` and `metrics.txt`. With
/// `run.deterministic` the timing columns are zeroed there and the measured
/// values go to `timings.csv`.
pub fn run(cfg: &ExperimentConfig, out: &Path, meta: &mut Metadata) -> Result<(), CliError> {
    match cfg.model.precision.as_str() {
        "f32" => run_typed::<f32>(cfg, out, meta),
        "f64" => run_typed::<f64>(cfg, out, meta),
        p => Err(CliError::Config(format!("model.precision must be f32 or f64, got {p:?}"))),
    }
}

fn run_typed<T: Scalar>(cfg: &ExperimentConfig, out: &Path, meta: &mut Metadata) -> Result<(), CliError> {
    cfg.require_files(&["graph", "features", "labels"])?;
    let tc = TrainConfig {
        model: ModelConfig {
            hidden: cfg.model.hidden,
            layers: cfg.model.layers,
            seed: cfg.model.seed,
        },
        sampler: cfg.sampler_config()?,
        reduce: if cfg.reduce.enabled { Some(cfg.reduce_config()?) } else { None },
        optimizer: cfg.optimizer_config()?,
        epochs: cfg.train.epochs,
        workers: cfg.train.workers.max(1),
        eval_every: cfg.train.eval_every,
    };
    let (graph, _) = load_graph(Path::new(&cfg.paths.graph), cfg.graph_format()?)?;
    let n = graph.num_nodes();
    let features = read_features::<T>(Path::new(&cfg.paths.features), n)?;
    let labels = read_labels(Path::new(&cfg.paths.labels), n)?;
    let split = if cfg.paths.split.is_empty() {
        let t = &cfg.train;
        if !(t.train_frac > 0.0 && t.val_frac >= 0.0 && t.train_frac + t.val_frac <= 1.0) {
            return Err(CliError::Config(format!("bad split fractions {} / {}", t.train_frac, t.val_frac)));
        }
        random_split(n, t.train_frac, t.val_frac, t.split_seed)
    } else {
        read_split(Path::new(&cfg.paths.split))?
    };
    let ds = Dataset::new(graph, features, labels, split)?;

    let report = train(&ds, &tc, None)?;

    let timings = !cfg.run.deterministic;
    write_file(&out.join("log.csv"), |w| write_log(&report.log, w, timings))?;
    write_file(&out.join("stats.csv"), |w| write_batch_stats(&report.stats, w, timings))?;
    if cfg.run.deterministic {
        write_file(&out.join("timings.csv"), |w| write_batch_stats(&report.stats, w, true))?;
    }
    save_model(&report.model, &out.join("model.bin"))?;

    let full = ReducedSubgraph::identity(&ds.graph);
    let test_acc = evaluate(&report.model, &full, &ds.features, &ds.labels, &ds.split.test)?;
    let best = report.val_history.iter().map(|&(_, v)| v).fold(f64::NAN, f64::max);
    let last_loss = report.log.last().map_or(f64::NAN, |r| r.loss);
    write_file(&out.join("metrics.txt"), |w| {
        writeln!(w, "steps = {}", report.log.len())?;
        writeln!(w, "final_loss = {last_loss}")?;
        writeln!(w, "final_val = {}", report.final_val().unwrap_or(f64::NAN))?;
        writeln!(w, "best_val = {best}")?;
        writeln!(w, "test = {test_acc}")
    })?;
    let train_ms: f64 = report.log.iter().map(|r| r.ms_train).sum();
    meta.push(("ms_train_total".into(), format!("{train_ms:.3}")));
    println!(
        "{} steps  final loss {last_loss:.4}  val {:.4}  test {test_acc:.4}",
        report.log.len(),
        report.final_val().unwrap_or(f64::NAN)
    );
    Ok(())
}
