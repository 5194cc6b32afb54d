use super::{simulate_minibatch, Resource, SimArch, SimError, SimOptions, SimSummary};
use crate::engine::BatchStats;
use crate::perf::{HardwareConfig, WorkloadProfile};

/// Host preprocessing cost per minibatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrepCost {
    Fixed(f64),
    /// Measured sample + reduce time, shared by `workers` threads.
    FromStats { workers: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub f: usize,
    pub l: usize,
    pub host_loss_cycles: f64,
    pub prep: PrepCost,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSim {
    pub epoch: usize,
    pub minibatch: usize,
    pub total: f64,
    pub device: f64,
    pub prep: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub summary: SimSummary,
    /// Preprocessing never exceeded device time.
    pub fully_hidden: bool,
    pub per_batch: Vec<BatchSim>,
}

pub fn workload_of(s: &BatchStats, f: usize, l: usize) -> WorkloadProfile {
    WorkloadProfile {
        v_s: s.nodes,
        d_bar: s.d_bar,
        f,
        l,
        gamma_read: s.gamma_read,
        gamma_add: s.gamma_add,
        matching_total: s.matching_total,
    }
}

/// Simulates every minibatch of a training run and sums the reports.
pub fn simulate_run(
    stats: &[BatchStats],
    arch: impl Into<SimArch>,
    hw: &HardwareConfig,
    opts: &RunOptions,
) -> Result<RunReport, SimError> {
    let arch = arch.into();
    if stats.is_empty() {
        return Err(SimError::Stream("no minibatches".into()));
    }
    let mut busy = [0.0; 5];
    let (mut total, mut device, mut prep, mut hidden, mut stall) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut per_batch = Vec::with_capacity(stats.len());
    for (i, s) in stats.iter().enumerate() {
        let sane = s.nodes > 0
            && s.gamma_read > 0.0
            && s.gamma_read <= 1.0
            && s.gamma_add.is_finite()
            && s.d_bar.is_finite()
            && s.d_bar >= 0.0
            && s.ms_sample >= 0.0
            && s.ms_reduce >= 0.0;
        if !sane {
            return Err(SimError::Stream(format!("row {i}: {s:?}")));
        }
        let prep_cycles = match opts.prep {
            PrepCost::Fixed(c) => c,
            PrepCost::FromStats { workers } => (s.ms_sample + s.ms_reduce) / 1e3 * hw.clock_hz / workers.max(1) as f64,
        };
        let sim_opts = SimOptions {
            host_loss_cycles: opts.host_loss_cycles,
            prep_cycles,
        };
        let r = simulate_minibatch(&workload_of(s, opts.f, opts.l), arch, hw, &sim_opts)?.summary;
        for (b, u) in busy.iter_mut().zip(&r.usage) {
            *b += u.busy;
        }
        total += r.total_cycles;
        device += r.device_cycles;
        prep += r.prep_cycles;
        hidden += r.prep_cycles.min(r.device_cycles);
        stall += r.stall_cycles;
        per_batch.push(BatchSim {
            epoch: s.epoch,
            minibatch: s.minibatch,
            total: r.total_cycles,
            device: r.device_cycles,
            prep: r.prep_cycles,
        });
    }
    Ok(RunReport {
        summary: SimSummary::finish(busy, total, device, prep, hidden, stall),
        fully_hidden: per_batch.iter().all(|b| b.prep <= b.device),
        per_batch,
    })
}

/// DSP utilization while the systolic array computes: each processing
/// element holds two DSPs, and accumulators count while aggregating.
pub fn compute_utilization(s: &SimSummary, arch: impl Into<SimArch>, hw: &HardwareConfig) -> f64 {
    let arch = arch.into();
    let sys = s.usage_of(Resource::Systolic).busy;
    if sys <= 0.0 {
        return 0.0;
    }
    let p2 = (arch.p_sys * arch.p_sys) as f64;
    (2.0 * p2 * sys + arch.p_agg * s.usage_of(Resource::Aggregator).busy) / (hw.r_dsp as f64 * sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::{dsp_utilization, ArchParams};

    fn row(nodes: usize, ms: f64) -> BatchStats {
        BatchStats {
            epoch: 0,
            minibatch: 0,
            nodes,
            edge_endpoints: nodes * 10,
            d_bar: 10.0,
            gamma_add: 0.8,
            gamma_read: 0.8,
            matching_total: nodes / 4,
            ms_sample: ms,
            ms_reduce: ms,
        }
    }

    fn opts(prep: PrepCost) -> RunOptions {
        RunOptions {
            f: 128,
            l: 2,
            host_loss_cycles: 1000.0,
            prep,
        }
    }

    #[test]
    fn constant_stream_is_linear() {
        let hw = HardwareConfig::u200();
        let arch = ArchParams { p_agg: 64, p_sys: 16 };
        let one = simulate_run(&[row(800, 1.0)], arch, &hw, &opts(PrepCost::FromStats { workers: 2 })).unwrap();
        let k = 7;
        let many = simulate_run(&vec![row(800, 1.0); k], arch, &hw, &opts(PrepCost::FromStats { workers: 2 })).unwrap();
        assert!((many.summary.total_cycles - k as f64 * one.summary.total_cycles).abs() < 1e-6);
        assert_eq!(many.per_batch.len(), k);
        for r in Resource::ALL {
            let (a, b) = (many.summary.usage_of(r), one.summary.usage_of(r));
            assert!((a.busy - k as f64 * b.busy).abs() < 1e-6);
            assert!((a.busy + a.idle - many.summary.total_cycles).abs() < 1e-3);
        }
    }

    #[test]
    fn free_preprocessing_is_hidden() {
        let hw = HardwareConfig::u200();
        let r = simulate_run(&[row(500, 3.0), row(900, 1.0)], ArchParams { p_agg: 32, p_sys: 8 }, &hw, &opts(PrepCost::Fixed(0.0))).unwrap();
        assert_eq!(r.summary.overlap_efficiency, 1.0);
        assert!(r.fully_hidden);
    }

    #[test]
    fn slow_preprocessing_is_reported() {
        let hw = HardwareConfig::u200();
        let r = simulate_run(&[row(100, 50.0)], ArchParams { p_agg: 32, p_sys: 8 }, &hw, &opts(PrepCost::FromStats { workers: 1 })).unwrap();
        assert!(!r.fully_hidden);
        assert!(r.summary.overlap_efficiency < 1.0);
    }

    #[test]
    fn malformed_streams() {
        let hw = HardwareConfig::u200();
        let a = ArchParams { p_agg: 32, p_sys: 8 };
        let o = opts(PrepCost::Fixed(0.0));
        assert!(matches!(simulate_run(&[], a, &hw, &o), Err(SimError::Stream(_))));
        let mut bad = row(10, 1.0);
        bad.gamma_read = 1.5;
        assert!(matches!(simulate_run(&[bad], a, &hw, &o), Err(SimError::Stream(_))));
        let mut bad = row(10, 1.0);
        bad.nodes = 0;
        assert!(simulate_run(&[bad], a, &hw, &o).is_err());
    }

    #[test]
    fn utilization_tracks_the_closed_form() {
        let hw = HardwareConfig::u200();
        let arch = ArchParams { p_agg: 128, p_sys: 24 };
        let stats = [row(2736, 0.0)];
        let r = simulate_run(&stats, arch, &hw, &RunOptions { f: 240, ..opts(PrepCost::Fixed(0.0)) }).unwrap();
        let sim = compute_utilization(&r.summary, arch, &hw);
        let (mu_p, _) = dsp_utilization(&hw, 240, 128.0, 24.0);
        assert!((sim - mu_p).abs() / mu_p < 0.1, "{sim} vs {mu_p}");
    }
}
