use std::io::Write;
use std::path::Path;

use gcnpipe_core::engine::{write_matrix, write_split};
use gcnpipe_core::graph::write_edge_list;
use gcnpipe_core::synth::{block_features, common_neighbor_family, planted_partition, random_split, CommonNeighborParams};
use gcnpipe_core::Matrix;

use super::{write_file, Metadata};
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// `planted`: graph.txt, features.bin, labels.csv, split.txt.
/// `common-neighbor`: graph.txt only.
pub fn run(cfg: &ExperimentConfig, out: &Path, meta: &mut Metadata) -> Result<(), CliError> {
    let g = &cfg.generate;
    let graph = match g.kind.as_str() {
        "planted" => {
            if g.nodes == 0 || g.blocks == 0 || g.blocks > g.nodes {
                return Err(CliError::Config(format!("need 1 <= blocks <= nodes, got {} / {}", g.blocks, g.nodes)));
            }
            for (k, p) in [("p_in", g.p_in), ("p_out", g.p_out)] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(CliError::Config(format!("generate.{k} must be a probability, got {p}")));
                }
            }
            if !(g.sigma >= 0.0 && g.sigma.is_finite()) {
                return Err(CliError::Config(format!("generate.sigma must be finite and non-negative, got {}", g.sigma)));
            }
            let pp = planted_partition(g.nodes, g.blocks, g.p_in, g.p_out, g.seed);
            let x: Matrix<f64> = block_features(&pp.labels, g.blocks, g.extra_dims, g.signal, g.sigma, g.seed.wrapping_add(1));
            write_file(&out.join("features.bin"), |w| write_matrix(&x, w))?;
            write_file(&out.join("labels.csv"), |w| {
                writeln!(w, "label")?;
                pp.labels.iter().try_for_each(|l| writeln!(w, "{l}"))
            })?;
            let split = random_split(g.nodes, cfg.train.train_frac, cfg.train.val_frac, g.seed.wrapping_add(2));
            write_file(&out.join("split.txt"), |w| write_split(&split, w))?;
            pp.graph
        }
        "common-neighbor" => {
            let p = CommonNeighborParams {
                groups: g.groups,
                hubs: g.hubs,
                targets: g.targets,
                noise_degree: g.noise_degree,
            };
            if p.groups * (p.hubs + p.targets) == 0 {
                return Err(CliError::Config("common-neighbor graph would be empty".into()));
            }
            common_neighbor_family(&p, g.seed)
        }
        other => return Err(CliError::Config(format!("unknown generate.kind {other:?} (planted | common-neighbor)"))),
    };
    write_file(&out.join("graph.txt"), |w| write_edge_list(&graph, w))?;
    meta.push(("nodes".into(), graph.num_nodes().to_string()));
    meta.push(("edge_endpoints".into(), graph.num_edge_endpoints().to_string()));
    log::info!("wrote {} nodes to {}", graph.num_nodes(), out.display());
    Ok(())
}
