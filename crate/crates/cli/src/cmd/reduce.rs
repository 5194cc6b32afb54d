use std::path::Path;

use gcnpipe_core::graph::load_graph;
use gcnpipe_core::redundancy::{save_reduced, write_round_metrics};
use gcnpipe_core::reduce;

use super::{write_file, Metadata};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Writes `rounds.csv` (round 0 is the unreduced baseline) and `reduced.bin`.
pub fn run(cfg: &ExperimentConfig, out: &Path, meta: &mut Metadata) -> Result<(), CliError> {
    cfg.require_files(&["graph"])?;
    let rc = cfg.reduce_config()?;
    let (g, _) = load_graph(Path::new(&cfg.paths.graph), cfg.graph_format()?)?;
    let t0 = std::time::Instant::now();
    let (rs, m) = reduce(&g, &rc)?;
    meta.push(("ms_reduce".into(), format!("{:.3}", t0.elapsed().as_secs_f64() * 1e3)));
    write_file(&out.join("rounds.csv"), |w| write_round_metrics(&m.per_round, w))?;
    save_reduced(&rs, &out.join("reduced.bin"))?;
    println!(
        "rounds {}  gamma_add {:.4}  gamma_read {:.4}  matching_total {} ({:.3} |V|)",
        m.rounds_run,
        m.gamma_add,
        m.gamma_read,
        m.matching_total,
        m.matching_total as f64 / g.num_nodes().max(1) as f64
    );
    Ok(())
}
