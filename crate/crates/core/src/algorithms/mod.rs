//! Optimisation loops sharing evaluation, archive and metric machinery.
//!
//! Every loop starts from the same seeded pool of `batch_size` random
//! genotypes, spends exactly `iterations * batch_size` further evaluations and
//! records one [`MetricsRecord`] after initialisation and after each iteration.

mod moqd;
mod nsga2;
mod pga_me;
mod spea2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::archive::{ArchiveMetrics, Centroids, MoqdArchive, ReplacementPolicy, SamplingMode, Solution};
use crate::envs::{EnvConfig, EpisodeResult, Task};
use crate::error::{Error, Result};
use crate::neuro::{pg_mutate, train_networks, MlpSpec, ObjectiveTrainState, ReplayBuffer, RewardSelector, Td3Config};
use crate::variation::{iso_line_dd, VariationConfig};

pub use moqd::{run_mo_pga, run_mome, run_mome_crowding, run_mome_pgx, run_moqd, MoqdVariant};
pub use nsga2::{nsga2_crowding, nsga2_survival, run_nsga2};
pub use pga_me::{run_pga_me, EliteGrid};
pub use spea2::{run_spea2, spea2_environmental_selection, spea2_fitness};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmId {
    MomePgx,
    Mome,
    MomeCrowding,
    MoPga,
    PgaMe,
    Nsga2,
    Spea2,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 7] = [
        AlgorithmId::MomePgx,
        AlgorithmId::Mome,
        AlgorithmId::MomeCrowding,
        AlgorithmId::MoPga,
        AlgorithmId::PgaMe,
        AlgorithmId::Nsga2,
        AlgorithmId::Spea2,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::MomePgx => "mome_pgx",
            AlgorithmId::Mome => "mome",
            AlgorithmId::MomeCrowding => "mome_crowding",
            AlgorithmId::MoPga => "mo_pga",
            AlgorithmId::PgaMe => "pga_me",
            AlgorithmId::Nsga2 => "nsga2",
            AlgorithmId::Spea2 => "spea2",
        }
    }

    /// Whether the algorithm trains critics and so needs an MDP task.
    pub fn uses_policy_gradients(self) -> bool {
        matches!(self, AlgorithmId::MomePgx | AlgorithmId::MoPga | AlgorithmId::PgaMe)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArchiveConfig {
    /// Number of CVT cells `k`.
    pub num_centroids: usize,
    /// Maximum Pareto front length `P` per cell.
    pub max_front_size: usize,
    pub cvt_samples: usize,
    pub cvt_seed: u64,
}

impl Default for ArchiveConfig {
    fn default() -> Self {
        Self {
            num_centroids: 32,
            max_front_size: 10,
            cvt_samples: 50_000,
            cvt_seed: 0,
        }
    }
}

/// Full description of one run: algorithm, budget, operators and task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub algorithm: AlgorithmId,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    /// Objectives that receive policy-gradient offspring (`mo_pga` only;
    /// `mome_pgx` always uses every objective). Defaults to all objectives.
    #[serde(default)]
    pub pg_objectives: Option<Vec<usize>>,
    /// Inject the greedy actor into each PGA-ME batch.
    #[serde(default = "default_true")]
    pub inject_actor: bool,
    /// Write wall-clock seconds into the metrics; off keeps them reproducible.
    #[serde(default)]
    pub record_wall_clock: bool,
    #[serde(default)]
    pub archive: ArchiveConfig,
    #[serde(default)]
    pub variation: VariationConfig,
    #[serde(default)]
    pub td3: Td3Config,
    pub env: EnvConfig,
}

fn default_iterations() -> usize {
    200
}
fn default_batch_size() -> usize {
    32
}
fn default_true() -> bool {
    true
}

impl AlgorithmConfig {
    pub fn new(algorithm: AlgorithmId, env: EnvConfig) -> Self {
        Self {
            algorithm,
            iterations: default_iterations(),
            batch_size: default_batch_size(),
            seed: 0,
            pg_objectives: None,
            inject_actor: true,
            record_wall_clock: false,
            archive: ArchiveConfig::default(),
            variation: VariationConfig::default(),
            td3: Td3Config::default(),
            env,
        }
    }

    /// Checks everything that can be checked without building the task.
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Config("batch_size must be at least 2".into()));
        }
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.archive.num_centroids == 0 {
            return Err(Error::Config("archive.num_centroids must be at least 1".into()));
        }
        if self.archive.max_front_size == 0 {
            return Err(Error::Config("archive.max_front_size must be at least 1".into()));
        }
        self.variation.validate()?;
        self.td3.validate()?;
        if self.pg_objectives.is_some() && self.algorithm != AlgorithmId::MoPga {
            return Err(Error::Config("pg_objectives applies to mo_pga only".into()));
        }
        Ok(())
    }

    pub fn reference_point(&self, task: &Task) -> Result<Vec<f64>> {
        let r = self.env.reference_point.clone().unwrap_or_else(|| task.default_reference());
        if r.len() != task.num_objectives() || r.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "env.reference_point must hold {} finite values",
                task.num_objectives()
            )));
        }
        Ok(r)
    }

    /// Tessellation shared by every MOQD archive of this configuration.
    pub fn centroids(&self, task: &Task) -> Result<Centroids> {
        Centroids::cvt(
            &task.descriptor_bounds(),
            self.archive.num_centroids,
            self.archive.cvt_samples,
            self.archive.cvt_seed,
        )
    }
}

/// One row of a run's metric series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub evals: u64,
    pub moqd_score: f64,
    pub global_hypervolume: f64,
    pub max_sum: Option<f64>,
    pub coverage: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// The MOQD archive, or the passive archive for non-MOQD baselines.
    pub archive: MoqdArchive,
    pub metrics: Vec<MetricsRecord>,
}

/// Dispatches on `cfg.algorithm` after building the task from `cfg.env`.
pub fn run(cfg: &AlgorithmConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let task = Task::from_config(&cfg.env)?;
    run_with_task(cfg, &task)
}

pub fn run_with_task(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    match cfg.algorithm {
        AlgorithmId::MomePgx => run_mome_pgx(cfg, task),
        AlgorithmId::Mome => run_mome(cfg, task),
        AlgorithmId::MomeCrowding => run_mome_crowding(cfg, task),
        AlgorithmId::MoPga => {
            let objectives = cfg
                .pg_objectives
                .clone()
                .unwrap_or_else(|| (0..task.num_objectives()).collect());
            run_mo_pga(cfg, task, &objectives)
        }
        AlgorithmId::PgaMe => run_pga_me(cfg, task),
        AlgorithmId::Nsga2 => run_nsga2(cfg, task),
        AlgorithmId::Spea2 => run_spea2(cfg, task),
    }
}

/// Independent, reproducible seed for a named sub-stream of a run.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_LOOP: u64 = 2;
pub(crate) const STREAM_ARCHIVE: u64 = 3;
pub(crate) const STREAM_TRAIN: u64 = 100;

pub(crate) fn initial_pool(task: &Task, cfg: &AlgorithmConfig) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_INIT));
    (0..cfg.batch_size).map(|_| task.random_genotype(&mut rng)).collect()
}

pub(crate) fn evaluate_all(task: &Task, genotypes: &[Vec<f64>]) -> Result<Vec<EpisodeResult>> {
    genotypes.par_iter().map(|g| task.evaluate(g)).collect()
}

pub(crate) fn slot_seeds<R: Rng>(rng: &mut R, n: usize) -> Vec<u64> {
    (0..n).map(|_| rng.random()).collect()
}

/// Hands out increasing solution ids.
#[derive(Debug, Default)]
pub(crate) struct IdCounter(u64);

impl IdCounter {
    pub fn solutions(&mut self, genotypes: Vec<Vec<f64>>, results: &[EpisodeResult]) -> Result<Vec<Solution>> {
        genotypes
            .into_iter()
            .zip(results)
            .map(|(g, r)| {
                let id = self.0;
                self.0 += 1;
                Solution::new(id, g, r.scores.clone(), r.descriptor.clone())
            })
            .collect()
    }
}

pub(crate) struct MetricsLog {
    start: Instant,
    wall_clock: bool,
    reference: Vec<f64>,
    pub records: Vec<MetricsRecord>,
}

impl MetricsLog {
    pub fn new(cfg: &AlgorithmConfig, reference: Vec<f64>) -> Self {
        Self {
            start: Instant::now(),
            wall_clock: cfg.record_wall_clock,
            reference,
            records: Vec::new(),
        }
    }

    pub fn record(&mut self, evals: u64, archive: &MoqdArchive) -> Result<()> {
        let ArchiveMetrics {
            moqd_score,
            global_hypervolume,
            max_sum,
            coverage,
        } = archive.metrics(&self.reference)?;
        let seconds = if self.wall_clock { self.start.elapsed().as_secs_f64() } else { 0.0 };
        self.records.push(MetricsRecord {
            evals,
            moqd_score,
            global_hypervolume,
            max_sum,
            coverage,
            seconds,
        });
        Ok(())
    }
}

/// Passive archive used to score non-MOQD baselines on equal terms.
pub(crate) fn passive_archive(cfg: &AlgorithmConfig, task: &Task) -> Result<MoqdArchive> {
    MoqdArchive::new(cfg.centroids(task)?, cfg.archive.max_front_size, ReplacementPolicy::Random)
}

pub(crate) fn sample_genotypes<R: Rng>(
    archive: &MoqdArchive,
    n: usize,
    mode: SamplingMode,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    Ok(archive.sample(n, mode, rng)?.into_iter().map(|s| s.genotype.clone()).collect())
}

/// How one offspring slot of a batch is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Ga,
    /// Policy-gradient mutation on the critic of trainer `i`.
    Pg(usize),
    /// Copy of the greedy actor of trainer 0.
    Actor,
}

/// Replay buffer plus one actor-critic trainer per reward selector.
pub(crate) struct PgMachinery {
    spec: MlpSpec,
    buffer: ReplayBuffer,
    trainers: Vec<ObjectiveTrainState>,
    hp: Td3Config,
}

impl PgMachinery {
    pub fn new(cfg: &AlgorithmConfig, task: &Task, selectors: &[RewardSelector]) -> Result<Self> {
        let spec = task
            .policy_spec()
            .ok_or_else(|| {
                Error::Config(format!("{} needs an MDP task, `{}` is not one", cfg.algorithm, task.name()))
            })?
            .clone();
        let buffer = ReplayBuffer::new(cfg.td3.buffer_size, spec.input_dim(), spec.output_dim(), task.num_objectives())?;
        let trainers = selectors
            .iter()
            .enumerate()
            .map(|(i, &sel)| {
                ObjectiveTrainState::new(&spec, &cfg.td3.critic_hidden, sel, derive_seed(cfg.seed, STREAM_TRAIN + i as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            spec,
            buffer,
            trainers,
            hp: cfg.td3.clone(),
        })
    }

    /// Stores the episodes' transitions and runs a training round.
    pub fn observe(&mut self, results: &[EpisodeResult]) -> Result<()> {
        for r in results {
            self.buffer.extend(&r.transitions)?;
        }
        if self.buffer.len() < self.hp.batch_size {
            log::debug!("skipping critic training: {} transitions stored", self.buffer.len());
            return Ok(());
        }
        train_networks(&mut self.trainers, &self.buffer, &self.hp)?;
        Ok(())
    }

    /// `None` when the buffer cannot yet supply a minibatch.
    fn mutate<R: Rng>(&self, trainer: usize, genotype: &[f64], rng: &mut R) -> Result<Option<Vec<f64>>> {
        match pg_mutate(
            genotype,
            &self.spec,
            &self.trainers[trainer],
            &self.buffer,
            self.hp.pg_steps,
            self.hp.policy_lr,
            self.hp.batch_size,
            rng,
        ) {
            Ok(g) => Ok(Some(g)),
            Err(Error::InsufficientData { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn actor_genotype(&self) -> Vec<f64> {
        self.trainers[0].actor.flatten()
    }
}

/// Builds one offspring per slot. Each slot draws from its own seeded stream
/// so results do not depend on thread scheduling. PG slots fall back to
/// Iso+LineDD while the replay buffer is too small.
pub(crate) fn make_offspring(
    plan: &[Slot],
    parents: &[Vec<f64>],
    mates: &[Vec<f64>],
    seeds: &[u64],
    variation: &VariationConfig,
    pg: Option<&PgMachinery>,
) -> Result<Vec<Vec<f64>>> {
    (0..plan.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
            let ga = |rng: &mut ChaCha8Rng| iso_line_dd(&parents[i], &mates[i], variation, rng);
            match (plan[i], pg) {
                (Slot::Pg(t), Some(pg)) => match pg.mutate(t, &parents[i], &mut rng)? {
                    Some(child) => Ok(child),
                    None => ga(&mut rng),
                },
                (Slot::Actor, Some(pg)) => Ok(pg.actor_genotype()),
                _ => ga(&mut rng),
            }
        })
        .collect()
}
