//! Experiment configuration: `key = value` lines under `[section]` headers
//! (TOML), parsed strictly. Every field has a default, so the effective
//! configuration can always be echoed and re-run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use gcnpipe_core::engine::OptimizerKind;
use gcnpipe_core::graph::GraphFormat;
use gcnpipe_core::perf::{HardwareConfig, WorkloadProfile};
use gcnpipe_core::{BudgetPolicy, OptimizerConfig, ReduceConfig, SamplerConfig, SamplerMethod};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub paths: Paths,
    pub model: ModelSection,
    pub sampler: SamplerSection,
    pub reduce: ReduceSection,
    pub optimizer: OptimizerSection,
    pub train: TrainSection,
    pub run: RunSection,
    pub workload: WorkloadSection,
    pub arch: ArchSection,
    pub sim: SimSection,
    pub generate: GenerateSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub graph: String,
    /// `auto` picks binary for `.bin`, edge list otherwise.
    pub graph_format: String,
    pub features: String,
    pub labels: String,
    /// Empty: random split from `[train]` fractions.
    pub split: String,
    /// Empty: the built-in U200 profile.
    pub hardware: String,
    /// Per-minibatch stats CSV written by `train`, for `simulate`.
    pub stats: String,
    pub out: String,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            graph: String::new(),
            graph_format: "auto".into(),
            features: String::new(),
            labels: String::new(),
            split: String::new(),
            hardware: String::new(),
            stats: String::new(),
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: usize,
    pub layers: usize,
    /// `f32` or `f64`.
    pub precision: String,
    pub seed: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            hidden: 256,
            layers: 2,
            precision: "f32".into(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerSection {
    /// `uniform` or `frontier`.
    pub method: String,
    pub target_nodes: usize,
    pub roots: usize,
    pub walk_length: usize,
    pub seed: u64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            method: "frontier".into(),
            target_nodes: 80,
            roots: 30,
            walk_length: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReduceSection {
    pub enabled: bool,
    pub theta: usize,
    pub rounds: usize,
    pub budget: f64,
    pub policy: String,
    /// 0 disables the cap.
    pub degree_cap: usize,
}

impl Default for ReduceSection {
    fn default() -> Self {
        let d = ReduceConfig::default();
        Self {
            enabled: true,
            theta: d.theta,
            rounds: d.max_rounds,
            budget: d.budget,
            policy: d.policy.to_string(),
            degree_cap: d.degree_cap.unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSection {
    pub kind: String,
    pub lr: f64,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            kind: "adam".into(),
            lr: 0.01,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub workers: usize,
    /// Validate every this many epochs; 0 never.
    pub eval_every: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub split_seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            epochs: 30,
            workers: 2,
            eval_every: 1,
            train_frac: 0.6,
            val_frac: 0.2,
            split_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Keep wall-clock timings out of the primary outputs.
    pub deterministic: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { deterministic: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WorkloadSection {
    pub nodes: usize,
    pub d_bar: f64,
    pub f: usize,
    pub layers: usize,
    pub gamma_read: f64,
    pub gamma_add: f64,
    /// Σ|M| as a multiple of the node count.
    pub budget: f64,
    /// Minibatch size used by the sampling-algorithm ratios.
    pub b0: usize,
}

impl Default for WorkloadSection {
    fn default() -> Self {
        Self {
            nodes: 2750,
            d_bar: 15.0,
            f: 256,
            layers: 2,
            gamma_read: 0.7,
            gamma_add: 0.7,
            budget: 0.5,
            b0: 1000,
        }
    }
}

impl WorkloadSection {
    pub fn profile(&self) -> WorkloadProfile {
        WorkloadProfile {
            v_s: self.nodes,
            d_bar: self.d_bar,
            f: self.f,
            l: self.layers,
            gamma_read: self.gamma_read,
            gamma_add: self.gamma_add,
            matching_total: (self.budget * self.nodes as f64).floor() as usize,
        }
    }
}

/// Zero means "solve".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ArchSection {
    pub p_sys: usize,
    pub p_agg: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub host_loss_cycles: f64,
    /// Fixed preprocessing cost; negative uses measured stats timings.
    pub prep_cycles: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            host_loss_cycles: 0.0,
            prep_cycles: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateSection {
    /// `planted` (labeled dataset) or `common-neighbor` (graph only).
    pub kind: String,
    pub nodes: usize,
    pub blocks: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub extra_dims: usize,
    pub signal: f64,
    pub sigma: f64,
    pub groups: usize,
    pub hubs: usize,
    pub targets: usize,
    pub noise_degree: f64,
    pub seed: u64,
}

impl Default for GenerateSection {
    fn default() -> Self {
        Self {
            kind: "planted".into(),
            nodes: 400,
            blocks: 4,
            p_in: 0.1,
            p_out: 0.005,
            extra_dims: 4,
            signal: 1.0,
            sigma: 1.5,
            groups: 20,
            hubs: 8,
            targets: 12,
            noise_degree: 1.0,
            seed: 2024,
        }
    }
}

/// Device profile file: flat `key = value` lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareProfile {
    #[serde(default)]
    pub name: String,
    pub r_dsp: usize,
    pub r_bram_words: f64,
    pub r_bw_words_per_cycle: f64,
    pub clock_hz: f64,
}

impl HardwareProfile {
    pub fn config(&self) -> HardwareConfig {
        HardwareConfig {
            r_dsp: self.r_dsp,
            r_bram: self.r_bram_words,
            r_bw: self.r_bw_words_per_cycle,
            clock_hz: self.clock_hz,
        }
    }
}

fn config_err(msg: impl std::fmt::Display) -> CliError {
    CliError::Config(msg.to_string())
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

impl ExperimentConfig {
    /// File contents (if any) with `section.key=value` overrides applied.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let mut table = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| config_err(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for ov in overrides {
            let (key, raw) = ov
                .split_once('=')
                .ok_or_else(|| config_err(format!("override {ov:?} is not section.key=value")))?;
            let (section, field) = key
                .trim()
                .split_once('.')
                .ok_or_else(|| config_err(format!("override key {key:?} is not section.key")))?;
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            let toml::Value::Table(sec) = entry else {
                return Err(config_err(format!("{section} is not a section")));
            };
            sec.insert(field.to_string(), parse_value(raw.trim()));
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.message()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn out_dir(&self) -> PathBuf {
        PathBuf::from(&self.paths.out)
    }

    pub fn graph_format(&self) -> Result<GraphFormat, CliError> {
        match self.paths.graph_format.as_str() {
            "auto" => Ok(if self.paths.graph.ends_with(".bin") {
                GraphFormat::Binary
            } else {
                GraphFormat::EdgeList
            }),
            other => other.parse().map_err(config_err),
        }
    }

    pub fn reduce_config(&self) -> Result<ReduceConfig, CliError> {
        let r = &self.reduce;
        let cfg = ReduceConfig {
            theta: r.theta,
            max_rounds: r.rounds,
            budget: r.budget,
            degree_cap: (r.degree_cap > 0).then_some(r.degree_cap),
            policy: r.policy.parse::<BudgetPolicy>().map_err(config_err)?,
        };
        cfg.validate().map_err(config_err)?;
        Ok(cfg)
    }

    pub fn sampler_config(&self) -> Result<SamplerConfig, CliError> {
        let s = &self.sampler;
        let method = match s.method.as_str() {
            "uniform" => SamplerMethod::UniformNode,
            "frontier" => SamplerMethod::FrontierRandomWalk {
                roots: s.roots,
                walk_length: s.walk_length,
            },
            other => return Err(config_err(format!("unknown sampler {other:?} (uniform | frontier)"))),
        };
        Ok(SamplerConfig {
            method,
            target_nodes: s.target_nodes,
            seed: s.seed,
        })
    }

    pub fn optimizer_config(&self) -> Result<OptimizerConfig, CliError> {
        let o = &self.optimizer;
        let kind = match o.kind.parse::<OptimizerKind>().map_err(config_err)? {
            OptimizerKind::Vanilla => OptimizerKind::Vanilla,
            OptimizerKind::Momentum { .. } => OptimizerKind::Momentum { mu: o.momentum },
            OptimizerKind::Adam { .. } => OptimizerKind::Adam {
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
            },
        };
        if !(o.lr > 0.0 && o.lr.is_finite()) {
            return Err(config_err(format!("optimizer.lr must be positive, got {}", o.lr)));
        }
        Ok(OptimizerConfig { kind, lr: o.lr })
    }

    pub fn hardware(&self) -> Result<(String, HardwareConfig), CliError> {
        if self.paths.hardware.is_empty() {
            return Ok(("u200".into(), HardwareConfig::u200()));
        }
        let p = Path::new(&self.paths.hardware);
        let text = std::fs::read_to_string(p).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
        let prof: HardwareProfile =
            toml::from_str(&text).map_err(|e| config_err(format!("{}: {}", p.display(), e.message())))?;
        let hw = prof.config();
        hw.validate().map_err(config_err)?;
        let name = if prof.name.is_empty() { p.display().to_string() } else { prof.name };
        Ok((name, hw))
    }

    /// Fails unless every named file exists.
    pub fn require_files(&self, keys: &[&str]) -> Result<(), CliError> {
        for &k in keys {
            let v = match k {
                "graph" => &self.paths.graph,
                "features" => &self.paths.features,
                "labels" => &self.paths.labels,
                "stats" => &self.paths.stats,
                _ => unreachable!("unknown path key {k}"),
            };
            if v.is_empty() {
                return Err(config_err(format!("paths.{k} is required")));
            }
            if !Path::new(v).is_file() {
                return Err(CliError::Data(format!("paths.{k}: {v} does not exist")));
            }
        }
        for (k, v) in [("split", &self.paths.split), ("hardware", &self.paths.hardware)] {
            if !v.is_empty() && !Path::new(v).is_file() {
                return Err(CliError::Data(format!("paths.{k}: {v} does not exist")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let d = ExperimentConfig::default();
        let back: ExperimentConfig = toml::from_str(&d.to_toml()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[model]\nhiden = 4\n").unwrap();
        assert!(matches!(ExperimentConfig::load(Some(&p), &[]), Err(CliError::Config(_))));
        std::fs::write(&p, "[modle]\nhidden = 4\n").unwrap();
        assert!(ExperimentConfig::load(Some(&p), &[]).is_err());
        std::fs::write(&p, "[model]\nhidden = \"four\"\n").unwrap();
        assert!(ExperimentConfig::load(Some(&p), &[]).is_err());
    }

    #[test]
    fn overrides_win_over_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[model]\nhidden = 4\n[reduce]\npolicy = \"truncate\"\n").unwrap();
        let c = ExperimentConfig::load(
            Some(&p),
            &["model.hidden=16".into(), "reduce.policy=stop-early".into(), "paths.out=/tmp/x".into()],
        )
        .unwrap();
        assert_eq!(c.model.hidden, 16);
        assert_eq!(c.reduce.policy, "stop-early");
        assert_eq!(c.paths.out, "/tmp/x");
        assert!(ExperimentConfig::load(None, &["nodots=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["model.hidden".into()]).is_err());
    }

    #[test]
    fn typed_views() {
        let mut c = ExperimentConfig::default();
        assert_eq!(c.reduce_config().unwrap(), ReduceConfig::default());
        c.reduce.degree_cap = 0;
        assert_eq!(c.reduce_config().unwrap().degree_cap, None);
        c.sampler.method = "walk".into();
        assert!(c.sampler_config().is_err());
        c.optimizer.kind = "momentum".into();
        c.optimizer.momentum = 0.5;
        assert_eq!(c.optimizer_config().unwrap().kind, OptimizerKind::Momentum { mu: 0.5 });
        let (name, hw) = c.hardware().unwrap();
        assert_eq!((name.as_str(), hw), ("u200", HardwareConfig::u200()));
    }

    #[test]
    fn workload_budget_sets_matching_total() {
        let w = WorkloadSection::default().profile();
        assert_eq!(w.matching_total, 1375);
    }
}
