use std::path::Path;

use gcnpipe_core::perf::{
    aggregation_hidden, beta, bram_required, comp_comm_ratio, dsp_utilization, load_imbalance_threshold,
    max_subgraph_nodes, mu_prime_floor, solve_arch_continuous, solve_arch_params, t_batch,
};
use gcnpipe_core::{ArchParams, HardwareConfig, SamplingMethod};

use super::Metadata;
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// `(section, quantity, value)` rows.
#[derive(Default)]
struct Report {
    rows: Vec<(&'static str, String, String)>,
}

impl Report {
    fn add(&mut self, section: &'static str, q: impl Into<String>, v: impl ToString) {
        self.rows.push((section, q.into(), v.to_string()));
    }

    fn text(&self) -> String {
        let mut s = String::new();
        let mut last = "";
        for (sec, q, v) in &self.rows {
            if *sec != last {
                if !s.is_empty() {
                    s.push('\n');
                }
                s.push_str(&format!("[{sec}]\n"));
                last = sec;
            }
            s.push_str(&format!("{q:<32} {v}\n"));
        }
        s
    }

    fn csv(&self) -> String {
        let mut s = String::from("section,quantity,value\n");
        for (sec, q, v) in &self.rows {
            s.push_str(&format!("{sec},{q},{v}\n"));
        }
        s
    }
}

/// Configured `[arch]`, or the solver's choice when either entry is zero.
pub fn arch_for(cfg: &ExperimentConfig, hw: &HardwareConfig) -> Result<(ArchParams, bool), CliError> {
    let a = &cfg.arch;
    if a.p_sys > 0 && a.p_agg > 0 {
        return Ok((ArchParams { p_agg: a.p_agg, p_sys: a.p_sys }, false));
    }
    Ok((solve_arch_params(hw, &cfg.workload.profile())?, true))
}

/// Writes `report.txt` and `report.csv`.
pub fn run(cfg: &ExperimentConfig, out: &Path, _meta: &mut Metadata) -> Result<(), CliError> {
    let (hw_name, hw) = cfg.hardware()?;
    let w = cfg.workload.profile();
    w.validate()?;
    let mut r = Report::default();

    r.add("hardware", "name", &hw_name);
    r.add("hardware", "r_dsp", hw.r_dsp);
    r.add("hardware", "r_bram_words", hw.r_bram);
    r.add("hardware", "r_bw_words_per_cycle", hw.r_bw);
    r.add("hardware", "clock_hz", hw.clock_hz);

    r.add("workload", "nodes", w.v_s);
    r.add("workload", "d_bar", w.d_bar);
    r.add("workload", "f", w.f);
    r.add("workload", "layers", w.l);
    r.add("workload", "gamma_read", w.gamma_read);
    r.add("workload", "gamma_add", w.gamma_add);
    r.add("workload", "matching_total", w.matching_total);

    for m in SamplingMethod::ALL {
        let ratio = comp_comm_ratio(m, w.l, w.d_bar, m.typical_alpha(), cfg.workload.b0)?;
        r.add("comp_comm_ratio", format!("{m} (alpha {})", m.typical_alpha()), format!("{ratio:.4}"));
    }

    let mut gammas = vec![0.7, 1.0];
    if !gammas.contains(&w.gamma_read) {
        gammas.push(w.gamma_read);
    }
    for gamma in gammas {
        let t = load_imbalance_threshold(w.f, w.d_bar, gamma)?;
        r.add("load_imbalance_threshold", format!("gamma_read {gamma}"), format!("{t:.1}"));
    }

    let (arch, solved) = arch_for(cfg, &hw)?;
    r.add("architecture", "source", if solved { "solved" } else { "configured" });
    r.add("architecture", "p_agg", arch.p_agg);
    r.add("architecture", "p_sys", arch.p_sys);
    r.add("architecture", "dsp_used", arch.dsp_used());
    r.add("architecture", "aggregation_hidden", aggregation_hidden(&w, &arch));
    let c = solve_arch_continuous(hw.r_dsp as f64, &w)?;
    r.add("architecture", "continuous_p_agg", format!("{:.3}", c.p_agg));
    r.add("architecture", "continuous_p_sys", format!("{:.3}", c.p_sys));
    r.add("architecture", "continuous_balanced", c.balanced(w.f));

    let tb = t_batch(&w, arch.p_sys as f64);
    r.add("timing", "t_batch_cycles", format!("{tb:.0}"));
    r.add("timing", "t_batch_ms", format!("{:.4}", tb / hw.clock_hz * 1e3));

    let bram = bram_required(&w, arch.p_sys);
    r.add("storage", "bram_required_words", format!("{bram:.0}"));
    r.add("storage", "bram_fits", bram <= hw.r_bram);
    let budget = w.matching_total as f64 / w.v_s as f64;
    r.add("storage", "max_subgraph_nodes", max_subgraph_nodes(&hw, w.f, w.l, budget, arch.p_sys));

    let (mu_p, mu) = dsp_utilization(&hw, w.f, arch.p_agg as f64, arch.p_sys as f64);
    r.add("utilization", "mu_prime", format!("{mu_p:.4}"));
    r.add("utilization", "mu_lower_bound", format!("{mu:.4}"));
    r.add("utilization", "mu_prime_floor", format!("{:.4}", mu_prime_floor(w.f, w.d_bar)));
    let (b_exact, b_bound) = beta(&w);
    r.add("utilization", "beta", format!("{b_exact:.1}"));
    r.add("utilization", "beta_lower_bound", format!("{b_bound:.1}"));

    let text = r.text();
    std::fs::write(out.join("report.txt"), &text)?;
    std::fs::write(out.join("report.csv"), r.csv())?;
    print!("{text}");
    Ok(())
}
