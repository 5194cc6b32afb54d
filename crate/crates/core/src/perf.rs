//! Closed-form accelerator performance model: algorithm-selection ratios,
//! DSP allocation between the accumulator array and the systolic array,
//! cycle counts, on-chip storage, load-balance threshold and utilization.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PerfError {
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("no feasible architecture: {0}")]
    Infeasible(String),
}

/// Resources of the target device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareConfig {
    /// Accumulators/multipliers implementable.
    pub r_dsp: usize,
    /// Words storable on chip.
    pub r_bram: f64,
    /// Words transferable per accelerator cycle.
    pub r_bw: f64,
    pub clock_hz: f64,
}

impl HardwareConfig {
    /// Alveo U200 over PCIe 3.0 x16 (15.8 GB/s), 4-byte words, 200 MHz.
    pub fn u200() -> Self {
        Self {
            r_dsp: 1280,
            r_bram: 8_166_000.0,
            r_bw: words_per_cycle(15.8e9, 4.0, 200e6),
            clock_hz: 200e6,
        }
    }

    pub fn validate(&self) -> Result<(), PerfError> {
        let ok = self.r_dsp > 0
            && [self.r_bram, self.r_bw, self.clock_hz]
                .iter()
                .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(PerfError::Invalid(format!("hardware values must be positive: {self:?}")))
        }
    }
}

/// `bytes/s ÷ bytes/word ÷ cycles/s`.
pub fn words_per_cycle(bytes_per_sec: f64, word_bytes: f64, clock_hz: f64) -> f64 {
    bytes_per_sec / word_bytes / clock_hz
}

/// Per-minibatch workload, with one feature width `f` for every layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadProfile {
    pub v_s: usize,
    pub d_bar: f64,
    pub f: usize,
    pub l: usize,
    pub gamma_read: f64,
    pub gamma_add: f64,
    pub matching_total: usize,
}

impl WorkloadProfile {
    pub fn validate(&self) -> Result<(), PerfError> {
        if self.f == 0 {
            return Err(PerfError::Invalid("f must be at least 1".into()));
        }
        if !(self.gamma_read > 0.0 && self.gamma_read <= 1.0) {
            return Err(PerfError::Invalid(format!(
                "gamma_read must be in (0, 1], got {}",
                self.gamma_read
            )));
        }
        if !(self.d_bar >= 0.0 && self.d_bar.is_finite()) {
            return Err(PerfError::Invalid(format!("d_bar must be >= 0, got {}", self.d_bar)));
        }
        Ok(())
    }
}

/// Accumulator-array width and systolic-array dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArchParams {
    pub p_agg: usize,
    pub p_sys: usize,
}

impl ArchParams {
    /// DSPs used: `p_agg + 2·p_sys²`.
    pub fn dsp_used(&self) -> usize {
        self.p_agg + 2 * self.p_sys * self.p_sys
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    GraphSage,
    FastGcn,
    Sgcn,
    Asgcn,
    GraphSample,
}

impl SamplingMethod {
    pub const ALL: [SamplingMethod; 5] = [
        Self::GraphSage,
        Self::FastGcn,
        Self::Sgcn,
        Self::Asgcn,
        Self::GraphSample,
    ];

    /// Typical layer expansion factor α of each method.
    pub fn typical_alpha(&self) -> f64 {
        match self {
            Self::GraphSage => 25.0,
            Self::FastGcn | Self::Asgcn | Self::GraphSample => 1.0,
            Self::Sgcn => 2.0,
        }
    }
}

impl fmt::Display for SamplingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GraphSage => "layer-sample-graphsage",
            Self::FastGcn => "layer-sample-fastgcn",
            Self::Sgcn => "layer-sample-sgcn",
            Self::Asgcn => "layer-sample-asgcn",
            Self::GraphSample => "graph-sample",
        })
    }
}

impl FromStr for SamplingMethod {
    type Err = PerfError;
    fn from_str(s: &str) -> Result<Self, PerfError> {
        Self::ALL
            .into_iter()
            .find(|m| m.to_string() == s)
            .ok_or_else(|| PerfError::Invalid(format!("unknown method {s:?}")))
    }
}

/// Ratio of on-chip computation to off-chip communication per minibatch.
///
/// With `B = Σ_{ℓ<L} α^ℓ b0` and `B' = L·b0`: layer samplers that ignore
/// neighbor features give `B / (α^L b0)`, those that read them give
/// `B / (α^L b0 + d̄ B)`, and subgraph sampling gives `B' / b0`.
pub fn comp_comm_ratio(method: SamplingMethod, l: usize, d_bar: f64, alpha: f64, b0: usize) -> Result<f64, PerfError> {
    if b0 == 0 {
        return Err(PerfError::Invalid("b0 must be at least 1".into()));
    }
    let b0 = b0 as f64;
    if method == SamplingMethod::GraphSample {
        return Ok(l as f64 * b0 / b0);
    }
    if !(alpha >= 1.0) {
        return Err(PerfError::Invalid(format!("alpha must be >= 1, got {alpha}")));
    }
    let b: f64 = (0..l).map(|i| alpha.powi(i as i32) * b0).sum();
    let leaves = alpha.powi(l as i32) * b0;
    Ok(match method {
        SamplingMethod::GraphSage | SamplingMethod::FastGcn => b / leaves,
        _ => b / (leaves + d_bar * b),
    })
}

fn aggregation_cycles(w: &WorkloadProfile, p_agg: f64) -> f64 {
    w.gamma_read * w.v_s as f64 * w.d_bar * w.f as f64 / p_agg
}

/// Transform time of one half-width product that is left to the aggregator
/// after the tile-buffer fills.
fn hidden_window(w: &WorkloadProfile, p_sys: f64) -> f64 {
    let f = w.f as f64;
    (1.0 - 2.0 * p_sys / f) * 0.5 * w.v_s as f64 * f * f / (p_sys * p_sys)
}

/// Whether aggregation fits under the self-weight product.
pub fn aggregation_hidden(w: &WorkloadProfile, arch: &ArchParams) -> bool {
    aggregation_cycles(w, arch.p_agg as f64) <= hidden_window(w, arch.p_sys as f64)
}

/// Integer DSP allocation: the largest `p_sys` for which some
/// `p_agg ≤ min(f, r_dsp - 2p_sys²)` hides aggregation under the
/// stall-adjusted transform time, with the smallest such `p_agg`.
pub fn solve_arch_params(hw: &HardwareConfig, w: &WorkloadProfile) -> Result<ArchParams, PerfError> {
    hw.validate()?;
    w.validate()?;
    if hw.r_dsp < 3 {
        return Err(PerfError::Infeasible(format!(
            "r_dsp = {} cannot hold both arrays",
            hw.r_dsp
        )));
    }
    let top = ((hw.r_dsp / 2) as f64).sqrt().floor() as usize;
    for p in (1..=top).rev() {
        let rem = hw.r_dsp - 2 * p * p;
        let limit = rem.min(w.f);
        if limit == 0 {
            continue;
        }
        let window = hidden_window(w, p as f64);
        if window <= 0.0 {
            continue;
        }
        let need = aggregation_cycles(w, 1.0) / window;
        let mut p_agg = need.ceil().max(1.0) as usize;
        // Guard the rounding at the boundary in both directions.
        while p_agg <= limit && aggregation_cycles(w, p_agg as f64) > window {
            p_agg += 1;
        }
        while p_agg > 1 && aggregation_cycles(w, (p_agg - 1) as f64) <= window {
            p_agg -= 1;
        }
        if p_agg <= limit {
            return Ok(ArchParams { p_agg, p_sys: p });
        }
    }
    Err(PerfError::Infeasible(format!(
        "r_dsp = {} cannot hide aggregation for f = {}",
        hw.r_dsp, w.f
    )))
}

/// Real-valued solution of the balance equations
/// `aggregation = stall-adjusted transform` and `p_agg + 2p_sys² = r_dsp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousArch {
    pub p_agg: f64,
    pub p_sys: f64,
}

impl ContinuousArch {
    /// Inside the load-balanced regime (`p_agg ≤ f`).
    pub fn balanced(&self, f: usize) -> bool {
        self.p_agg <= f as f64
    }
}

/// Bisection on `p_sys ∈ (0, f/2)`, where the balance condition gives
/// `p_agg = 2γd̄p²/(f - 2p)`.
pub fn solve_arch_continuous(r_dsp: f64, w: &WorkloadProfile) -> Result<ContinuousArch, PerfError> {
    w.validate()?;
    if !(r_dsp > 0.0) {
        return Err(PerfError::Invalid("r_dsp must be positive".into()));
    }
    let f = w.f as f64;
    let gd = w.gamma_read * w.d_bar;
    let p_agg_of = |p: f64| 2.0 * gd * p * p / (f - 2.0 * p);
    let total = |p: f64| p_agg_of(p) + 2.0 * p * p;
    let (mut lo, mut hi) = (0.0, f / 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > r_dsp {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(ContinuousArch {
        p_agg: p_agg_of(lo),
        p_sys: lo,
    })
}

/// `(3L+3)·|V_s|·f²/p_sys²`.
pub fn t_batch(w: &WorkloadProfile, p_sys: f64) -> f64 {
    let f = w.f as f64;
    (3 * w.l + 3) as f64 * w.v_s as f64 * f * f / (p_sys * p_sys)
}

/// On-chip words: layer buffers, merged-node sums, tile buffer, weights and
/// optimizer state.
pub fn bram_required(w: &WorkloadProfile, p_sys: usize) -> f64 {
    let (f, v) = (w.f as f64, w.v_s as f64);
    let l = w.l as f64;
    (l + 5.0) * f * v + f * w.matching_total as f64 + p_sys as f64 * v + 2.0 * (l + 1.0) * f * f
}

/// Largest `|V_s|` that fits when `Σ|M| = budget·|V_s|`.
pub fn max_subgraph_nodes(hw: &HardwareConfig, f: usize, l: usize, budget: f64, p_sys: usize) -> usize {
    let (f, l) = (f as f64, l as f64);
    let fixed = 2.0 * (l + 1.0) * f * f;
    if hw.r_bram <= fixed {
        return 0;
    }
    let per_node = (l + 5.0) * f + f * budget + p_sys as f64;
    ((hw.r_bram - fixed) / per_node).floor() as usize
}

/// DSP count above which aggregation parallel over features alone can no
/// longer be hidden: `(f/(d̄γ))²·(1 + d̄γ - √(1 + 2γd̄))`.
pub fn load_imbalance_threshold(f: usize, d_bar: f64, gamma_read: f64) -> Result<f64, PerfError> {
    let dg = d_bar * gamma_read;
    if !(dg > 0.0) {
        return Err(PerfError::Invalid("d_bar·gamma_read must be positive".into()));
    }
    let f = f as f64;
    Ok((f / dg).powi(2) * (1.0 + dg - (1.0 + 2.0 * dg).sqrt()))
}

/// `(μ', lower bound on μ)`. `μ'` is the compute-phase utilization,
/// `(2p_sys² + 5/12·p_agg·(1 - 2p_sys/f)) / r_dsp`; the bound folds in the
/// idle time during host transfers.
pub fn dsp_utilization(hw: &HardwareConfig, f: usize, p_agg: f64, p_sys: f64) -> (f64, f64) {
    let r = hw.r_dsp as f64;
    let f = f as f64;
    let mu_p = (2.0 * p_sys * p_sys + 5.0 / 12.0 * p_agg * (1.0 - 2.0 * p_sys / f)) / r;
    let mu = mu_p / (1.0 + mu_p * r / (f * hw.r_bw));
    (mu_p, mu)
}

/// `1 / (1 + d̄/f)`.
pub fn mu_prime_floor(f: usize, d_bar: f64) -> f64 {
    1.0 / (1.0 + d_bar / f as f64)
}

/// `(exact, lower bound)` computation-to-communication ratio: systolic
/// multiply-accumulates per word moved between host and device.
pub fn beta(w: &WorkloadProfile) -> (f64, f64) {
    let f = w.f as f64;
    let ops = (3 * w.l + 3) as f64 * w.v_s as f64 * f * f;
    let words = 3.0 * w.v_s as f64 * f;
    let exact = if words > 0.0 { ops / words } else { f64::INFINITY };
    (exact, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u200_workload() -> WorkloadProfile {
        WorkloadProfile {
            v_s: 2750,
            d_bar: 15.0,
            f: 256,
            l: 2,
            gamma_read: 0.7,
            gamma_add: 0.7,
            matching_total: 1375,
        }
    }

    #[test]
    fn table_values() {
        let r = |m: SamplingMethod| comp_comm_ratio(m, 2, 15.0, m.typical_alpha(), 512).unwrap();
        assert!((r(SamplingMethod::GraphSage) - 26.0 / 625.0).abs() < 1e-15);
        assert_eq!(r(SamplingMethod::FastGcn), 2.0);
        assert!((r(SamplingMethod::Sgcn) - 3.0 / 49.0).abs() < 1e-15);
        assert!((r(SamplingMethod::Asgcn) - 2.0 / 31.0).abs() < 1e-15);
        assert_eq!(r(SamplingMethod::GraphSample), 2.0);
        assert!(comp_comm_ratio(SamplingMethod::Sgcn, 2, 15.0, 0.5, 1).is_err());
        assert!(comp_comm_ratio(SamplingMethod::Sgcn, 2, 15.0, 2.0, 0).is_err());
        for m in SamplingMethod::ALL {
            assert_eq!(m.to_string().parse::<SamplingMethod>().unwrap(), m);
        }
    }

    #[test]
    fn u200_solution() {
        let hw = HardwareConfig::u200();
        let w = u200_workload();
        let a = solve_arch_params(&hw, &w).unwrap();
        assert_eq!(a, ArchParams { p_agg: 59, p_sys: 24 });
        // The deployed pair is feasible too.
        let deployed = ArchParams { p_agg: 128, p_sys: 24 };
        assert!(aggregation_hidden(&w, &deployed));
        assert!(deployed.dsp_used() <= hw.r_dsp && deployed.p_agg <= w.f);
        // p_sys = 25 would need 64 accumulators with only 30 DSPs left.
        assert!(!aggregation_hidden(&w, &ArchParams { p_agg: 30, p_sys: 25 }));
    }

    #[test]
    fn saturation_gives_p_agg_equal_f() {
        let hw = HardwareConfig {
            r_dsp: 1_000_000,
            ..HardwareConfig::u200()
        };
        let w = WorkloadProfile {
            gamma_read: 1.0,
            d_bar: 4.0,
            ..u200_workload()
        };
        assert_eq!(solve_arch_params(&hw, &w).unwrap(), ArchParams { p_agg: 256, p_sys: 64 });
    }

    #[test]
    fn tiny_devices_are_infeasible() {
        let hw = HardwareConfig {
            r_dsp: 2,
            ..HardwareConfig::u200()
        };
        assert!(matches!(
            solve_arch_params(&hw, &u200_workload()),
            Err(PerfError::Infeasible(_))
        ));
    }

    #[test]
    fn cycle_and_storage_formulas() {
        let w = u200_workload();
        assert_eq!(t_batch(&w, 24.0), 2_816_000.0);
        assert_eq!(t_batch(&w, 48.0), 704_000.0);
        let w0 = WorkloadProfile { l: 0, ..w };
        assert_eq!(t_batch(&w0, 24.0), 3.0 * 2750.0 * 65536.0 / 576.0);
        assert_eq!(bram_required(&w, 24), 5_739_216.0);
        let empty = WorkloadProfile {
            v_s: 0,
            matching_total: 0,
            ..w
        };
        assert_eq!(bram_required(&empty, 24), 6.0 * 65536.0);
        let hw = HardwareConfig::u200();
        let n = max_subgraph_nodes(&hw, 256, 2, 0.5, 24);
        let at = |v: usize| bram_required(&WorkloadProfile { v_s: v, matching_total: v / 2, ..w }, 24);
        assert!(at(n) <= hw.r_bram && at(n + 2) > hw.r_bram);
    }

    #[test]
    fn thresholds() {
        let a = load_imbalance_threshold(256, 15.0, 0.7).unwrap();
        let b = load_imbalance_threshold(256, 15.0, 1.0).unwrap();
        assert!((a - 4048.0).abs() <= 1.0, "{a}");
        assert!((b - 3038.0).abs() <= 1.0, "{b}");
        assert!(load_imbalance_threshold(256, 0.0, 0.7).is_err());
    }

    #[test]
    fn utilization_examples() {
        let hw = HardwareConfig::u200();
        let (mu_p, mu) = dsp_utilization(&hw, 256, 128.0, 24.0);
        let expect = (1152.0 + 5.0 / 12.0 * 128.0 * (1.0 - 48.0 / 256.0)) / 1280.0;
        assert!((mu_p - expect).abs() < 1e-15);
        assert!((mu_p - 0.934).abs() < 1e-3);
        assert!(mu < mu_p);
        let (zero_agg, _) = dsp_utilization(&hw, 256, 0.0, 24.0);
        assert_eq!(zero_agg, 1152.0 / 1280.0);
        assert!((mu_prime_floor(256, 15.0) - 0.9446).abs() < 1e-4);
    }

    #[test]
    fn beta_is_at_least_f() {
        let (exact, lb) = beta(&u200_workload());
        assert_eq!(lb, 256.0);
        assert_eq!(exact, 3.0 * 256.0);
    }

    #[test]
    fn continuous_solution_balances() {
        let w = u200_workload();
        let c = solve_arch_continuous(1280.0, &w).unwrap();
        assert!((c.p_agg + 2.0 * c.p_sys * c.p_sys - 1280.0).abs() < 1e-6);
        let lhs = aggregation_cycles(&w, c.p_agg);
        let rhs = hidden_window(&w, c.p_sys);
        assert!((lhs - rhs).abs() / rhs < 1e-9);
    }

    fn brute_force(hw: &HardwareConfig, w: &WorkloadProfile) -> Option<ArchParams> {
        let mut best: Option<ArchParams> = None;
        for p_sys in 1..=hw.r_dsp {
            if 2 * p_sys * p_sys >= hw.r_dsp {
                break;
            }
            for p_agg in 1..=w.f.min(hw.r_dsp - 2 * p_sys * p_sys) {
                let a = ArchParams { p_agg, p_sys };
                if aggregation_hidden(w, &a) {
                    let better = match best {
                        None => true,
                        Some(b) => p_sys > b.p_sys || (p_sys == b.p_sys && p_agg < b.p_agg),
                    };
                    if better {
                        best = Some(a);
                    }
                    break;
                }
            }
        }
        best
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn solver_matches_exhaustive_search(
            r_dsp in 3usize..3000,
            f in prop::sample::select(vec![64usize, 128, 256, 512]),
            d_bar in 1.0f64..20.0,
            gamma in 0.3f64..=1.0,
            v_s in 100usize..5000,
        ) {
            let hw = HardwareConfig { r_dsp, ..HardwareConfig::u200() };
            let w = WorkloadProfile { v_s, d_bar, f, l: 2, gamma_read: gamma, gamma_add: gamma, matching_total: 0 };
            let got = solve_arch_params(&hw, &w).ok();
            prop_assert_eq!(got, brute_force(&hw, &w));
            if let Some(a) = got {
                prop_assert!(a.dsp_used() <= r_dsp);
                prop_assert!(a.p_agg <= f && a.p_agg >= 1);
                prop_assert!(aggregation_hidden(&w, &a));
            }
        }

        #[test]
        fn threshold_grows_with_f(f in 16usize..2048, d_bar in 1.0f64..30.0, gamma in 0.05f64..=1.0) {
            let a = load_imbalance_threshold(f, d_bar, gamma).unwrap();
            let b = load_imbalance_threshold(f + 1, d_bar, gamma).unwrap();
            prop_assert!(b > a);
        }

        #[test]
        fn below_threshold_solver_has_slack(r_dsp in 8usize..4000, gamma in 0.3f64..=1.0) {
            let w = WorkloadProfile { gamma_read: gamma, ..u200_workload() };
            let th = load_imbalance_threshold(w.f, w.d_bar, gamma).unwrap();
            prop_assume!((r_dsp as f64) < th);
            let hw = HardwareConfig { r_dsp, ..HardwareConfig::u200() };
            if let Ok(a) = solve_arch_params(&hw, &w) {
                prop_assert!(a.p_agg <= w.f);
                prop_assert!(aggregation_hidden(&w, &a));
            }
        }
    }
}
