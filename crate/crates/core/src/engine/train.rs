use std::time::Instant;

use crate::graph::{induced_subgraph, sample_subgraph, Graph, NodeId, SamplerConfig, Subgraph};
use crate::redundancy::{reduce, ReduceConfig, ReducedSubgraph, ReductionMetrics};

use super::{
    backward, forward, run_pipelined, BatchStats, EngineError, GcnModel, LogRow, Matrix,
    OptimizerConfig, OptimizerState, Scalar, Split,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    /// Width of every hidden layer (even).
    pub hidden: usize,
    /// Number of graph-convolution layers.
    pub layers: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            layers: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    /// `seed` here is the base from which every minibatch seed is derived.
    pub sampler: SamplerConfig,
    /// `None` trains on the unreduced subgraphs.
    pub reduce: Option<ReduceConfig>,
    pub optimizer: OptimizerConfig,
    pub epochs: usize,
    /// Preprocessing workers, and the look-ahead depth of the queue.
    pub workers: usize,
    /// Validate every this many epochs (0 disables).
    pub eval_every: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub graph: Graph,
    pub features: Matrix<T>,
    pub labels: Vec<u32>,
    pub num_classes: usize,
    pub split: Split,
}

impl<T: Scalar> Dataset<T> {
    /// Infers the class count from the labels.
    pub fn new(graph: Graph, features: Matrix<T>, labels: Vec<u32>, split: Split) -> Result<Self, EngineError> {
        let num_classes = labels.iter().max().map_or(0, |&m| m as usize + 1);
        let ds = Self {
            graph,
            features,
            labels,
            num_classes,
            split,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let n = self.graph.num_nodes();
        if self.features.rows() != n || self.labels.len() != n {
            return Err(EngineError::Data(format!(
                "{n} nodes but {} feature rows and {} labels",
                self.features.rows(),
                self.labels.len()
            )));
        }
        if self.labels.iter().any(|&l| l as usize >= self.num_classes) {
            return Err(EngineError::Data("label outside class range".into()));
        }
        self.split.validate(n)
    }
}

/// Passed to the observer after every optimizer step.
pub struct StepEvent<'a, T> {
    pub step: usize,
    pub epoch: usize,
    pub minibatch: usize,
    pub loss: f64,
    pub model: &'a GcnModel<T>,
}

#[derive(Debug, Clone)]
pub struct TrainReport<T> {
    pub model: GcnModel<T>,
    pub log: Vec<LogRow>,
    pub stats: Vec<BatchStats>,
    /// `(epoch, validation accuracy)`.
    pub val_history: Vec<(usize, f64)>,
}

impl<T> TrainReport<T> {
    pub fn final_val(&self) -> Option<f64> {
        self.val_history.last().map(|&(_, v)| v)
    }
}

struct Prepared {
    nodes: Vec<NodeId>,
    rs: ReducedSubgraph,
    metrics: ReductionMetrics,
    ms_sample: f64,
    ms_reduce: f64,
}

fn job_seed(base: u64, job: usize) -> u64 {
    // splitmix64 finalizer over the job index
    let mut z = base.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(job as u64 + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn prepare(train_graph: &Subgraph, cfg: &TrainConfig, job: usize) -> Result<Prepared, EngineError> {
    let t0 = Instant::now();
    let sc = SamplerConfig {
        seed: job_seed(cfg.sampler.seed, job),
        ..cfg.sampler
    };
    let sub = sample_subgraph(&train_graph.local, &sc);
    let ms_sample = t0.elapsed().as_secs_f64() * 1e3;
    let t1 = Instant::now();
    let rc = cfg.reduce.unwrap_or(ReduceConfig {
        max_rounds: 0,
        ..Default::default()
    });
    let (rs, metrics) = reduce(&sub.local, &rc)?;
    let ms_reduce = t1.elapsed().as_secs_f64() * 1e3;
    let nodes = sub
        .parent_ids
        .iter()
        .map(|&p| train_graph.parent_ids[p as usize])
        .collect();
    Ok(Prepared {
        nodes,
        rs,
        metrics,
        ms_sample,
        ms_reduce,
    })
}

/// Fraction of `rows` whose arg-max logit is the true class (equal to
/// micro-averaged F1 for single-label data).
pub fn accuracy<T: Scalar>(logits: &Matrix<T>, labels: &[u32], rows: &[NodeId]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let pred = logits.argmax_rows();
    let hits = rows
        .iter()
        .filter(|&&r| pred[r as usize] == labels[r as usize] as usize)
        .count();
    hits as f64 / rows.len() as f64
}

/// Full-graph inference accuracy over `rows`.
pub fn evaluate<T: Scalar>(
    model: &GcnModel<T>,
    rs: &ReducedSubgraph,
    x: &Matrix<T>,
    labels: &[u32],
    rows: &[NodeId],
) -> Result<f64, EngineError> {
    let (tape, _) = forward(model, rs, x, None)?;
    Ok(accuracy(&tape.logits, labels, rows))
}

/// Subgraph-minibatch training.
///
/// Minibatches are sampled from the subgraph induced by the training nodes;
/// an epoch is `⌈|train| / target_nodes⌉` of them. Every minibatch's sampler
/// seed is derived from the base seed and its global index, so the run does
/// not depend on `workers`. Sampling and reduction of upcoming minibatches
/// run on worker threads while the current one trains.
pub fn train<T: Scalar>(
    ds: &Dataset<T>,
    cfg: &TrainConfig,
    mut observer: Option<&mut dyn FnMut(&StepEvent<'_, T>)>,
) -> Result<TrainReport<T>, EngineError> {
    ds.validate()?;
    let mc = cfg.model;
    if mc.layers == 0 || mc.hidden == 0 || mc.hidden % 2 != 0 {
        return Err(EngineError::Config(format!(
            "need at least one layer and an even hidden width, got {} x {}",
            mc.layers, mc.hidden
        )));
    }
    if ds.num_classes == 0 {
        return Err(EngineError::Data("no classes".into()));
    }
    let train_graph = induced_subgraph(&ds.graph, &ds.split.train)?;
    cfg.sampler
        .validate(train_graph.num_nodes())
        .map_err(EngineError::Config)?;
    if let Some(rc) = &cfg.reduce {
        rc.validate()?;
    }

    let mut dims = vec![ds.features.cols()];
    dims.extend(std::iter::repeat(mc.hidden).take(mc.layers));
    let mut model = GcnModel::<T>::new(&dims, ds.num_classes, mc.seed)?;
    let mut opt = OptimizerState::new(cfg.optimizer, &model);

    let per_epoch = train_graph.num_nodes().div_ceil(cfg.sampler.target_nodes);
    let jobs = per_epoch * cfg.epochs;
    let full = ReducedSubgraph::identity(&ds.graph);
    let mut log = Vec::with_capacity(jobs);
    let mut stats = Vec::with_capacity(jobs);
    let mut val_history = Vec::new();

    run_pipelined(
        jobs,
        cfg.workers,
        |job| prepare(&train_graph, cfg, job),
        |job, prepared| -> Result<(), EngineError> {
            let p = prepared?;
            let (epoch, minibatch) = (job / per_epoch, job % per_epoch);
            let t0 = Instant::now();
            let rows: Vec<usize> = p.nodes.iter().map(|&v| v as usize).collect();
            let x = ds.features.select_rows(&rows);
            let labeled: Vec<(usize, u32)> = p
                .nodes
                .iter()
                .enumerate()
                .map(|(i, &v)| (i, ds.labels[v as usize]))
                .collect();
            let diverged = |e: EngineError| match e {
                EngineError::NonFinite(_) => EngineError::Diverged {
                    epoch,
                    minibatch,
                    loss: f64::NAN,
                },
                e => e,
            };
            let (tape, loss) = forward(&model, &p.rs, &x, Some(&labeled)).map_err(diverged)?;
            let loss = loss.expect("labels were supplied");
            if !loss.loss.is_finite() {
                return Err(EngineError::Diverged {
                    epoch,
                    minibatch,
                    loss: loss.loss,
                });
            }
            let grads = backward(&model, &p.rs, &tape, &loss.grad_wrt_logits).map_err(diverged)?;
            opt.step(&mut model, &grads).map_err(diverged)?;
            if !model.all_finite() {
                return Err(EngineError::Diverged {
                    epoch,
                    minibatch,
                    loss: loss.loss,
                });
            }
            let ms_train = t0.elapsed().as_secs_f64() * 1e3;
            if let Some(obs) = observer.as_mut() {
                obs(&StepEvent {
                    step: job,
                    epoch,
                    minibatch,
                    loss: loss.loss,
                    model: &model,
                });
            }

            let last_of_epoch = minibatch + 1 == per_epoch;
            let val_metric = if last_of_epoch && cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0 {
                let acc = evaluate(&model, &full, &ds.features, &ds.labels, &ds.split.val)?;
                log::info!("epoch {}: loss {:.4}, val acc {:.4}", epoch + 1, loss.loss, acc);
                val_history.push((epoch, acc));
                Some(acc)
            } else {
                None
            };
            let n = p.rs.original_count();
            log.push(LogRow {
                epoch,
                minibatch,
                loss: loss.loss,
                gamma_add: p.metrics.gamma_add,
                gamma_read: p.metrics.gamma_read,
                ms_sample: p.ms_sample,
                ms_reduce: p.ms_reduce,
                ms_train,
                val_metric,
            });
            stats.push(BatchStats {
                epoch,
                minibatch,
                nodes: n,
                edge_endpoints: p.metrics.num_read_before,
                d_bar: if n == 0 { 0.0 } else { p.metrics.num_read_before as f64 / n as f64 },
                gamma_add: p.metrics.gamma_add,
                gamma_read: p.metrics.gamma_read,
                matching_total: p.metrics.matching_total,
                ms_sample: p.ms_sample,
                ms_reduce: p.ms_reduce,
            });
            Ok(())
        },
    )?;

    Ok(TrainReport {
        model,
        log,
        stats,
        val_history,
    })
}
