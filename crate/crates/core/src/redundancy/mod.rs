//! Common-neighbor redundancy reduction.
//!
//! When two sources `u`, `v` appear together in the lists of several targets,
//! the sum `X_u + X_v` can be computed once and reused. Each round builds the
//! pair-count graph, picks a disjoint set of heavy pairs, and rewrites the
//! subgraph so those pairs become single precomputed nodes.

mod aggregation;
mod io;
mod matching;
mod rewrite;

pub use aggregation::{build_aggregation_graph, AggEdge, AggregationGraph};
pub use io::{load_reduced, read_reduced, read_round_metrics, save_reduced, write_reduced, write_round_metrics};
pub use matching::{greedy_matching, Matching};
pub use rewrite::{apply_matching, ReducedSubgraph};

use std::str::FromStr;

use thiserror::Error;

use crate::graph::{Graph, GraphError, NodeId};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error("pair ({u}, {v}) not found in the list of target {target}")]
    PairNotFound { u: NodeId, v: NodeId, target: NodeId },
    #[error("inconsistent reduced subgraph: {0}")]
    Inconsistent(String),
    #[error("invalid reduction config: {0}")]
    Config(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// What to do with the round whose matching would overshoot the budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BudgetPolicy {
    /// Keep the heaviest pairs that still fit, then stop.
    #[default]
    Truncate,
    /// Discard the whole round and stop.
    StopEarly,
}

impl FromStr for BudgetPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "truncate" => Ok(Self::Truncate),
            "stop-early" | "stop" => Ok(Self::StopEarly),
            _ => Err(format!("unknown budget policy {s:?} (truncate | stop-early)")),
        }
    }
}

impl std::fmt::Display for BudgetPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Truncate => "truncate",
            Self::StopEarly => "stop-early",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReduceConfig {
    /// Pairs must be shared by more than `theta` targets.
    pub theta: usize,
    pub max_rounds: usize,
    /// Σ|M| is kept at or below `budget · |V_s|`.
    pub budget: f64,
    /// Targets with more sources than this are not enumerated.
    pub degree_cap: Option<usize>,
    pub policy: BudgetPolicy,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        Self {
            theta: 2,
            max_rounds: 5,
            budget: 2.0,
            degree_cap: Some(100),
            policy: BudgetPolicy::Truncate,
        }
    }
}

impl ReduceConfig {
    pub fn validate(&self) -> Result<(), ReduceError> {
        if self.theta < 1 {
            return Err(ReduceError::Config("theta must be at least 1".into()));
        }
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(ReduceError::Config(format!(
                "budget must be positive, got {}",
                self.budget
            )));
        }
        Ok(())
    }
}

/// Vector additions of a direct aggregation: Σ over non-empty lists of (d_v - 1).
pub fn num_add(g: &Graph) -> usize {
    (0..g.num_nodes() as NodeId)
        .map(|v| g.degree(v).saturating_sub(1))
        .sum()
}

/// Vector reads of a direct aggregation: Σ d_v.
pub fn num_read(g: &Graph) -> usize {
    g.num_edge_endpoints()
}

/// Guaranteed `(read, add)` savings of applying `m`, net of the cost of
/// precomputing each pair (two reads, one add).
pub fn theorem1_bound(m: &Matching) -> (usize, usize) {
    m.pairs.iter().fold((0, 0), |(r, a), e| {
        (r + e.weight().saturating_sub(2), a + e.weight() - 1)
    })
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// State after one round (round 0 is the unreduced subgraph).
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMetrics {
    pub round: usize,
    pub matching_size: usize,
    /// Σ|M| up to and including this round.
    pub matching_total: usize,
    pub num_add: usize,
    pub num_read: usize,
    pub gamma_add: f64,
    pub gamma_read: f64,
    /// Σ|M| / |V_s|.
    pub overhead: f64,
    /// `theorem1_bound` of this round's matching.
    pub bound_read: usize,
    pub bound_add: usize,
    /// Reads and adds saved by this round, net of its precompute cost.
    pub saved_read: i64,
    pub saved_add: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionMetrics {
    pub num_add_before: usize,
    pub num_add_after: usize,
    pub num_read_before: usize,
    pub num_read_after: usize,
    pub gamma_add: f64,
    pub gamma_read: f64,
    pub matching_total: usize,
    /// Rounds that contributed a non-empty matching.
    pub rounds_run: usize,
    /// Round 0 first, then one entry per applied round.
    pub per_round: Vec<RoundMetrics>,
}

impl ReductionMetrics {
    fn baseline(g: &Graph) -> Self {
        let (a, r) = (num_add(g), num_read(g));
        Self {
            num_add_before: a,
            num_add_after: a,
            num_read_before: r,
            num_read_after: r,
            gamma_add: 1.0,
            gamma_read: 1.0,
            matching_total: 0,
            rounds_run: 0,
            per_round: vec![RoundMetrics {
                round: 0,
                matching_size: 0,
                matching_total: 0,
                num_add: a,
                num_read: r,
                gamma_add: 1.0,
                gamma_read: 1.0,
                overhead: 0.0,
                bound_read: 0,
                bound_add: 0,
                saved_read: 0,
                saved_add: 0,
            }],
        }
    }

    fn record(&mut self, g: &Graph, m: &Matching, original_count: usize) {
        let (prev_add, prev_read) = (self.num_add_after, self.num_read_after);
        let (a, r) = (num_add(g), num_read(g));
        self.matching_total += m.len();
        self.rounds_run += 1;
        self.num_add_after = a;
        self.num_read_after = r;
        self.gamma_add = ratio(a + self.matching_total, self.num_add_before);
        self.gamma_read = ratio(r + 2 * self.matching_total, self.num_read_before);
        let (bound_read, bound_add) = theorem1_bound(m);
        self.per_round.push(RoundMetrics {
            round: self.rounds_run,
            matching_size: m.len(),
            matching_total: self.matching_total,
            num_add: a,
            num_read: r,
            gamma_add: self.gamma_add,
            gamma_read: self.gamma_read,
            overhead: ratio(self.matching_total, original_count),
            bound_read,
            bound_add,
            saved_read: prev_read as i64 - (r + 2 * m.len()) as i64,
            saved_add: prev_add as i64 - (a + m.len()) as i64,
        });
    }
}

/// Iterated build → match → rewrite. Stops after `max_rounds`, at the first
/// empty matching, or when the budget is exhausted.
pub fn reduce(
    g: &Graph,
    cfg: &ReduceConfig,
) -> Result<(ReducedSubgraph, ReductionMetrics), ReduceError> {
    cfg.validate()?;
    let original_count = g.num_nodes();
    let limit = (cfg.budget * original_count as f64).floor() as usize;
    let mut metrics = ReductionMetrics::baseline(g);
    let mut current = g.clone().into_directed();
    let mut rounds = Vec::new();
    let mut used = 0usize;

    for _ in 0..cfg.max_rounds {
        let ga = build_aggregation_graph(&current, cfg.degree_cap);
        let mut m = greedy_matching(&ga, cfg.theta);
        let mut last = false;
        if used + m.len() > limit {
            match cfg.policy {
                // Pairs come out heaviest first, so the tail is the lightest.
                BudgetPolicy::Truncate => m.pairs.truncate(limit - used),
                BudgetPolicy::StopEarly => m.pairs.clear(),
            }
            last = true;
        }
        if m.is_empty() {
            break;
        }
        current = apply_matching(&current, &m)?;
        used += m.len();
        metrics.record(&current, &m, original_count);
        log::debug!(
            "round {}: |M| = {}, gamma_read = {:.4}",
            metrics.rounds_run,
            m.len(),
            metrics.gamma_read
        );
        rounds.push(m);
        if last {
            break;
        }
    }
    let rs = ReducedSubgraph::from_parts(current, original_count, rounds, g.degrees())?;
    Ok((rs, metrics))
}
