//! Phase-level event simulation of one minibatch on the accelerator:
//! accumulator array, systolic array, tile-buffer fill stalls, host link,
//! host loss and overlapped preprocessing of the next minibatch.

mod run;

use std::cmp::Ordering;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::perf::{ArchParams, HardwareConfig, WorkloadProfile};

pub use run::{compute_utilization, simulate_run, workload_of, BatchSim, PrepCost, RunOptions, RunReport};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    Invalid(String),
    #[error("malformed stats stream: {0}")]
    Stream(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resource {
    Aggregator,
    Systolic,
    Link,
    Host,
    /// Host threads preparing the next minibatch.
    Prep,
}

impl Resource {
    pub const ALL: [Resource; 5] = [
        Self::Aggregator,
        Self::Systolic,
        Self::Link,
        Self::Host,
        Self::Prep,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Aggregator => "aggregator",
            Self::Systolic => "systolic",
            Self::Link => "link",
            Self::Host => "host",
            Self::Prep => "prep",
        })
    }
}

/// Accumulator width may be fractional here so that balanced real-valued
/// solutions can be simulated directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimArch {
    pub p_agg: f64,
    pub p_sys: usize,
}

impl From<ArchParams> for SimArch {
    fn from(a: ArchParams) -> Self {
        Self {
            p_agg: a.p_agg as f64,
            p_sys: a.p_sys,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Fixed host cost of softmax and loss.
    pub host_loss_cycles: f64,
    /// Preprocessing of the next minibatch, overlapped with this one.
    pub prep_cycles: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            host_loss_cycles: 0.0,
            prep_cycles: 0.0,
        }
    }
}

/// Tile-buffer fills of a self-weight product: one window of `window`
/// cycles at the start of each of `rows` row tiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileFill {
    pub rows: usize,
    pub row_cycles: f64,
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub name: String,
    pub resource: Resource,
    pub deps: Vec<usize>,
    /// Busy cycles, excluding any stall.
    pub work: f64,
    pub fill: Option<TileFill>,
    pub layer: Option<usize>,
}

/// Phases of one minibatch in issue order; each resource runs its phases
/// in this order.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePlan {
    pub phases: Vec<Phase>,
}

/// `⌈n/p⌉·⌈f'/p⌉·(k + p - 1)` for an `n×k` by `k×f'` product.
pub fn product_cycles(n: usize, k: usize, f_out: usize, p: usize) -> f64 {
    (n.div_ceil(p) * f_out.div_ceil(p)) as f64 * (k + p - 1) as f64
}

fn self_fill(n: usize, k: usize, f_out: usize, p: usize) -> TileFill {
    TileFill {
        rows: n.div_ceil(p),
        row_cycles: f_out.div_ceil(p) as f64 * (k + p - 1) as f64,
        window: k as f64,
    }
}

impl PhasePlan {
    pub fn build(w: &WorkloadProfile, arch: SimArch, hw: &HardwareConfig, opts: &SimOptions) -> Result<Self, SimError> {
        if arch.p_sys == 0 || !(arch.p_agg > 0.0 && arch.p_agg.is_finite()) {
            return Err(SimError::Invalid(format!("architecture {arch:?}")));
        }
        if w.f == 0 || !(hw.r_bw > 0.0) {
            return Err(SimError::Invalid("f and r_bw must be positive".into()));
        }
        let costs = [opts.host_loss_cycles, opts.prep_cycles, w.gamma_read, w.d_bar];
        if costs.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(SimError::Invalid("costs and workload terms must be finite and >= 0".into()));
        }
        let (v, f, p) = (w.v_s, w.f, arch.p_sys);
        let half = f.div_ceil(2);
        let transfer = (v * f) as f64 / hw.r_bw;
        let aggregate = |len: f64| w.gamma_read * v as f64 * w.d_bar * len / arch.p_agg;
        let full = aggregate(f as f64);
        let precompute = (2.0 * w.matching_total as f64 * f as f64 / arch.p_agg).min(full);

        let mut phases: Vec<Phase> = Vec::new();
        let mut add = |name: String, resource, deps: Vec<usize>, work: f64, fill, layer| {
            phases.push(Phase {
                name,
                resource,
                deps,
                work,
                fill,
                layer,
            });
            phases.len() - 1
        };
        use Resource::*;
        add("preprocess".into(), Prep, vec![], opts.prep_cycles, None, None);
        let mut input = add("transfer-in".into(), Link, vec![], transfer, None, None);
        for l in 1..=w.l {
            let s = add(
                format!("fwd{l}-self"),
                Systolic,
                vec![input],
                product_cycles(v, f, half, p),
                Some(self_fill(v, f, half, p)),
                Some(l),
            );
            let pre = add(format!("fwd{l}-agg-precompute"), Aggregator, vec![input], precompute, None, Some(l));
            let prop = add(
                format!("fwd{l}-agg-propagate"),
                Aggregator,
                vec![pre],
                full - precompute,
                None,
                Some(l),
            );
            input = add(
                format!("fwd{l}-neigh"),
                Systolic,
                vec![s, prop],
                product_cycles(v, f, half, p),
                None,
                Some(l),
            );
        }
        let mlp = add("mlp".into(), Systolic, vec![input], product_cycles(v, f, f, p), None, None);
        let out = add("transfer-out".into(), Link, vec![mlp], transfer, None, None);
        let loss = add("loss".into(), Host, vec![out], opts.host_loss_cycles, None, None);
        let grad_in = add("transfer-grad".into(), Link, vec![loss], transfer, None, None);
        add("mlp-grad-w".into(), Systolic, vec![grad_in], product_cycles(f, v, f, p), None, None);
        let mut g = add("mlp-grad-x".into(), Systolic, vec![grad_in], product_cycles(v, f, f, p), None, None);
        for l in (1..=w.l).rev() {
            add(
                format!("bwd{l}-self-w"),
                Systolic,
                vec![g],
                product_cycles(f, v, half, p),
                Some(self_fill(f, v, half, p)),
                Some(l),
            );
            let agg_f = add(format!("bwd{l}-agg-recompute"), Aggregator, vec![g], full, None, Some(l));
            add(
                format!("bwd{l}-self-x"),
                Systolic,
                vec![g],
                product_cycles(v, half, f, p),
                Some(self_fill(v, half, f, p)),
                Some(l),
            );
            add(
                format!("bwd{l}-neigh-w"),
                Systolic,
                vec![g, agg_f],
                product_cycles(f, v, half, p),
                None,
                Some(l),
            );
            let agg_h = add(
                format!("bwd{l}-agg-half"),
                Aggregator,
                vec![g],
                aggregate(f as f64 / 2.0),
                None,
                Some(l),
            );
            g = add(
                format!("bwd{l}-neigh-x"),
                Systolic,
                vec![g, agg_h],
                product_cycles(v, half, f, p),
                None,
                Some(l),
            );
        }
        Ok(Self { phases })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTiming {
    pub name: String,
    pub resource: Resource,
    pub layer: Option<usize>,
    pub start: f64,
    pub end: f64,
    pub work: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResourceUsage {
    pub busy: f64,
    pub idle: f64,
    pub utilization: f64,
}

/// Totals shared by single-minibatch and whole-run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub total_cycles: f64,
    /// Completion of the last device-side phase.
    pub device_cycles: f64,
    pub prep_cycles: f64,
    pub usage: [ResourceUsage; 5],
    /// Cycles an aggregation phase spent blocked by tile fills.
    pub stall_cycles: f64,
    /// Fraction of preprocessing hidden under device work.
    pub overlap_efficiency: f64,
}

impl SimSummary {
    pub fn usage_of(&self, r: Resource) -> &ResourceUsage {
        &self.usage[r.index()]
    }

    fn finish(busy: [f64; 5], total: f64, device: f64, prep: f64, hidden: f64, stall: f64) -> Self {
        let usage = busy.map(|b| ResourceUsage {
            busy: b,
            idle: total - b,
            utilization: if total > 0.0 { (b / total).clamp(0.0, 1.0) } else { 0.0 },
        });
        Self {
            total_cycles: total,
            device_cycles: device,
            prep_cycles: prep,
            usage,
            stall_cycles: stall,
            overlap_efficiency: if prep > 0.0 { hidden / prep } else { 1.0 },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub summary: SimSummary,
    pub phases: Vec<PhaseTiming>,
    /// Intervals in which the aggregator made progress.
    pub agg_segments: Vec<(f64, f64)>,
    pub fill_windows: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Copy)]
struct Event {
    t: f64,
    seq: u64,
    phase: usize,
    version: u32,
}

impl PartialEq for Event {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Event {
    // reversed: BinaryHeap pops the earliest
    fn cmp(&self, o: &Self) -> Ordering {
        o.t.total_cmp(&self.t).then(o.seq.cmp(&self.seq))
    }
}

/// Walks `work` cycles of aggregator progress from `start`, skipping fill
/// windows. Returns the end time and, if asked, the progress segments.
fn walk_windows(start: f64, work: f64, windows: &[(f64, f64)], mut segments: Option<&mut Vec<(f64, f64)>>) -> f64 {
    let mut cur = start;
    let mut left = work;
    let first = windows.partition_point(|&(_, b)| b <= start);
    for &(a, b) in &windows[first..] {
        if left <= 0.0 {
            break;
        }
        if a > cur {
            let run = (a - cur).min(left);
            if let Some(s) = segments.as_deref_mut() {
                s.push((cur, cur + run));
            }
            left -= run;
            cur += run;
            if left <= 0.0 {
                break;
            }
        }
        cur = cur.max(b);
    }
    if left > 0.0 {
        if let Some(s) = segments.as_deref_mut() {
            s.push((cur, cur + left));
        }
        cur += left;
    }
    cur
}

// Systolic starts before the aggregator at equal times so that fill
// windows are known before aggregation is timed.
const START_ORDER: [Resource; 5] = [
    Resource::Systolic,
    Resource::Link,
    Resource::Host,
    Resource::Prep,
    Resource::Aggregator,
];

/// Runs the event loop over `plan`.
pub fn simulate_plan(plan: &PhasePlan) -> Result<SimReport, SimError> {
    let n = plan.phases.len();
    for (i, ph) in plan.phases.iter().enumerate() {
        if ph.deps.iter().any(|&d| d >= i) {
            return Err(SimError::Invalid(format!("phase {} depends on a later phase", ph.name)));
        }
        if !(ph.work.is_finite() && ph.work >= 0.0) {
            return Err(SimError::Invalid(format!("phase {} has work {}", ph.name, ph.work)));
        }
    }
    let mut queues: [VecDeque<usize>; 5] = Default::default();
    for (i, ph) in plan.phases.iter().enumerate() {
        queues[ph.resource.index()].push_back(i);
    }
    let mut running: [Option<usize>; 5] = [None; 5];
    let mut start = vec![f64::NAN; n];
    let mut end = vec![f64::NAN; n];
    let mut done = vec![false; n];
    let mut version = vec![0u32; n];
    let mut windows: Vec<(f64, f64)> = Vec::new();
    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut t = 0.0;
    let mut completed = 0;

    loop {
        loop {
            let mut progressed = false;
            for r in START_ORDER {
                let ri = r.index();
                if running[ri].is_some() {
                    continue;
                }
                let Some(&i) = queues[ri].front() else { continue };
                let ph = &plan.phases[i];
                if !ph.deps.iter().all(|&d| done[d]) {
                    continue;
                }
                queues[ri].pop_front();
                running[ri] = Some(i);
                start[i] = t;
                progressed = true;
                let finish = match r {
                    Resource::Aggregator => walk_windows(t, ph.work, &windows, None),
                    _ => t + ph.work,
                };
                if let Some(fill) = ph.fill {
                    for row in 0..fill.rows {
                        let a = t + row as f64 * fill.row_cycles;
                        if fill.window > 0.0 {
                            windows.push((a, a + fill.window));
                        }
                    }
                    // A running aggregation now meets new windows.
                    if let Some(a) = running[Resource::Aggregator.index()] {
                        version[a] += 1;
                        let e = walk_windows(start[a], plan.phases[a].work, &windows, None);
                        heap.push(Event {
                            t: e,
                            seq,
                            phase: a,
                            version: version[a],
                        });
                        seq += 1;
                    }
                }
                heap.push(Event {
                    t: finish,
                    seq,
                    phase: i,
                    version: version[i],
                });
                seq += 1;
            }
            if !progressed {
                break;
            }
        }
        let Some(ev) = heap.pop() else { break };
        if ev.version != version[ev.phase] {
            continue;
        }
        t = ev.t;
        let i = ev.phase;
        end[i] = t;
        done[i] = true;
        completed += 1;
        running[plan.phases[i].resource.index()] = None;
    }
    if completed != n {
        return Err(SimError::Invalid("dependency cycle or ordering deadlock".into()));
    }

    let mut busy = [0.0; 5];
    let mut stall = 0.0;
    let mut device = 0.0f64;
    let mut prep = 0.0f64;
    let mut agg_segments = Vec::new();
    let mut timings = Vec::with_capacity(n);
    for (i, ph) in plan.phases.iter().enumerate() {
        busy[ph.resource.index()] += ph.work;
        if ph.resource == Resource::Aggregator {
            stall += end[i] - start[i] - ph.work;
            walk_windows(start[i], ph.work, &windows, Some(&mut agg_segments));
        }
        if ph.resource == Resource::Prep {
            prep = prep.max(end[i]);
        } else {
            device = device.max(end[i]);
        }
        timings.push(PhaseTiming {
            name: ph.name.clone(),
            resource: ph.resource,
            layer: ph.layer,
            start: start[i],
            end: end[i],
            work: ph.work,
        });
    }
    Ok(SimReport {
        summary: SimSummary::finish(busy, device.max(prep), device, prep, prep.min(device), stall),
        phases: timings,
        agg_segments,
        fill_windows: windows,
    })
}

pub fn simulate_minibatch(
    w: &WorkloadProfile,
    arch: impl Into<SimArch>,
    hw: &HardwareConfig,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    simulate_plan(&PhasePlan::build(w, arch.into(), hw, opts)?)
}
