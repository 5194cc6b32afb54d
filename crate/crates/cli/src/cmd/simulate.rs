use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use gcnpipe_core::engine::read_batch_stats;
use gcnpipe_core::perf::t_batch;
use gcnpipe_core::sim::{compute_utilization, simulate_run, workload_of, PrepCost, Resource, RunOptions, SimOptions, SimSummary};
use gcnpipe_core::{simulate_minibatch, WorkloadProfile};

use super::model::arch_for;
use super::{write_file, Metadata};
use crate::config::ExperimentConfig;
use crate::error::CliError;

fn deviation(sim: f64, model: f64) -> f64 {
    (sim - model).abs() / model
}

/// Writes `phases.csv` for one minibatch and `summary.csv` comparing the
/// simulated cycles with the closed form. With `paths.stats` every row of
/// the stats file is simulated and `batches.csv` is added.
pub fn run(cfg: &ExperimentConfig, out: &Path, meta: &mut Metadata) -> Result<(), CliError> {
    let (_, hw) = cfg.hardware()?;
    let (arch, solved) = arch_for(cfg, &hw)?;
    meta.push(("arch".into(), format!("p_agg {} p_sys {} ({})", arch.p_agg, arch.p_sys, if solved { "solved" } else { "configured" })));
    let opts = SimOptions {
        host_loss_cycles: cfg.sim.host_loss_cycles,
        prep_cycles: cfg.sim.prep_cycles.max(0.0),
    };
    let (f, l) = (cfg.workload.f, cfg.workload.layers);

    let (first, summary, model_cycles, batches): (WorkloadProfile, SimSummary, f64, Option<Vec<_>>) =
        if cfg.paths.stats.is_empty() {
            let w = cfg.workload.profile();
            let r = simulate_minibatch(&w, arch, &hw, &opts)?;
            (w, r.summary, t_batch(&w, arch.p_sys as f64), None)
        } else {
            cfg.require_files(&["stats"])?;
            let file = File::open(&cfg.paths.stats)?;
            let stats = read_batch_stats(BufReader::new(file))?;
            let prep = if cfg.sim.prep_cycles < 0.0 {
                PrepCost::FromStats { workers: cfg.train.workers.max(1) }
            } else {
                PrepCost::Fixed(cfg.sim.prep_cycles)
            };
            let ro = RunOptions {
                f,
                l,
                host_loss_cycles: cfg.sim.host_loss_cycles,
                prep,
            };
            let rep = simulate_run(&stats, arch, &hw, &ro)?;
            let model: Vec<f64> = stats.iter().map(|s| t_batch(&workload_of(s, f, l), arch.p_sys as f64)).collect();
            let rows: Vec<_> = rep.per_batch.iter().zip(&model).map(|(b, &m)| (*b, m)).collect();
            meta.push(("prep_fully_hidden".into(), rep.fully_hidden.to_string()));
            (workload_of(&stats[0], f, l), rep.summary, model.iter().sum(), Some(rows))
        };

    let one = simulate_minibatch(&first, arch, &hw, &opts)?;
    write_file(&out.join("phases.csv"), |w| {
        writeln!(w, "phase,resource,start_cycle,duration")?;
        for p in &one.phases {
            writeln!(w, "{},{},{},{}", p.name, p.resource, p.start, p.end - p.start)?;
        }
        Ok(())
    })?;

    if let Some(rows) = &batches {
        write_file(&out.join("batches.csv"), |w| {
            writeln!(w, "epoch,minibatch,total_cycles,device_cycles,prep_cycles,model_cycles,deviation")?;
            for (b, m) in rows {
                writeln!(w, "{},{},{},{},{},{},{:.6}", b.epoch, b.minibatch, b.total, b.device, b.prep, m, deviation(b.total, *m))?;
            }
            Ok(())
        })?;
    }

    let dev = deviation(summary.total_cycles, model_cycles);
    write_file(&out.join("summary.csv"), |w| {
        writeln!(w, "metric,simulated,model,deviation")?;
        writeln!(w, "total_cycles,{},{model_cycles},{dev:.6}", summary.total_cycles)?;
        writeln!(w, "device_cycles,{},,", summary.device_cycles)?;
        writeln!(w, "prep_cycles,{},,", summary.prep_cycles)?;
        writeln!(w, "stall_cycles,{},,", summary.stall_cycles)?;
        writeln!(w, "overlap_efficiency,{},,", summary.overlap_efficiency)?;
        for r in Resource::ALL {
            writeln!(w, "utilization_{r},{},,", summary.usage_of(r).utilization)?;
        }
        writeln!(w, "dsp_compute_utilization,{},,", compute_utilization(&summary, arch, &hw))
    })?;
    println!(
        "simulated {:.0} cycles, closed form {model_cycles:.0}, deviation {:.2}%",
        summary.total_cycles,
        100.0 * dev
    );
    Ok(())
}
