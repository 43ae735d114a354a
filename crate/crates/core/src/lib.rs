//! Multi-objective quality-diversity search.
//!
//! The crate provides Pareto utilities ([`pareto`]), a CVT-tessellated archive
//! of per-cell Pareto fronts ([`archive`]), genetic and policy-gradient
//! variation ([`variation`], [`neuro`]), small benchmark tasks ([`envs`]) and
//! the optimisation loops that tie them together ([`algorithms`]).

pub mod algorithms;
pub mod archive;
pub mod envs;
mod error;
pub mod neuro;
pub mod pareto;
pub mod variation;

pub use algorithms::{run, AlgorithmConfig, AlgorithmId, ArchiveConfig, MetricsRecord, RunOutput};
pub use archive::{ArchiveMetrics, Centroids, MoqdArchive, ReplacementPolicy, SamplingMode, Solution};
pub use envs::{EnvConfig, Task, TaskKind};
pub use error::{Error, Result};
