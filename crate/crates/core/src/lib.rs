//! Subgraph-sampling GCN training with common-neighbor redundancy
//! reduction, plus an analytical and a simulated model of a CPU-FPGA
//! training accelerator.
//!
//! - [`graph`]: CSR graphs, IO and subgraph samplers.
//! - [`redundancy`]: pair-count graph, greedy matching and the rewritten
//!   subgraph that reuses precomputed pair sums.
//! - [`engine`]: forward/backward passes, optimizers and the pipelined
//!   minibatch trainer.
//! - [`perf`]: closed-form cycle, storage and utilization model.
//! - [`sim`]: phase-level event simulator of one minibatch.

pub mod acceptance;
pub mod engine;
pub mod graph;
pub mod oracle;
pub mod perf;
pub mod redundancy;
pub mod sim;
pub mod synth;

pub use engine::{
    train, Dataset, EngineError, GcnModel, Matrix, ModelConfig, OptimizerConfig, OptimizerKind, Scalar, Split,
    TrainConfig, TrainReport,
};
pub use graph::{Graph, GraphError, NodeId, SamplerConfig, SamplerMethod, Subgraph};
pub use perf::{ArchParams, HardwareConfig, PerfError, SamplingMethod, WorkloadProfile};
pub use redundancy::{reduce, BudgetPolicy, ReduceConfig, ReduceError, ReducedSubgraph, ReductionMetrics};
pub use sim::{simulate_minibatch, simulate_run, SimError, SimReport};
