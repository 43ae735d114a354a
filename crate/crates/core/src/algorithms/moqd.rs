use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    derive_seed, evaluate_all, initial_pool, make_offspring, sample_genotypes, slot_seeds, AlgorithmConfig, IdCounter,
    MetricsLog, PgMachinery, RunOutput, Slot, STREAM_LOOP,
};
use crate::archive::{MoqdArchive, ReplacementPolicy, SamplingMode};
use crate::envs::Task;
use crate::error::{Error, Result};
use crate::neuro::RewardSelector;
use crate::variation::split_batch;

/// Knobs distinguishing the members of the MOQD family.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MoqdVariant {
    pub sampling: SamplingMode,
    pub replacement: ReplacementPolicy,
    /// Objectives that get a critic and policy-gradient offspring.
    pub pg_objectives: Vec<usize>,
}

impl MoqdVariant {
    pub fn mome() -> Self {
        Self {
            sampling: SamplingMode::Uniform,
            replacement: ReplacementPolicy::Random,
            pg_objectives: Vec::new(),
        }
    }

    pub fn mome_crowding() -> Self {
        Self {
            sampling: SamplingMode::Crowding,
            replacement: ReplacementPolicy::Crowding,
            pg_objectives: Vec::new(),
        }
    }

    pub fn mome_pgx(objectives: usize) -> Self {
        Self {
            pg_objectives: (0..objectives).collect(),
            ..Self::mome_crowding()
        }
    }

    pub fn mo_pga(objectives: &[usize]) -> Self {
        Self {
            pg_objectives: objectives.to_vec(),
            ..Self::mome()
        }
    }
}

/// Crowding-based selection and replacement with one critic per objective.
pub fn run_mome_pgx(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    run_moqd(cfg, task, &MoqdVariant::mome_pgx(task.num_objectives()))
}

pub fn run_mome(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    run_moqd(cfg, task, &MoqdVariant::mome())
}

pub fn run_mome_crowding(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    run_moqd(cfg, task, &MoqdVariant::mome_crowding())
}

/// Uniform selection and random replacement with critics on `objectives`.
pub fn run_mo_pga(cfg: &AlgorithmConfig, task: &Task, objectives: &[usize]) -> Result<RunOutput> {
    run_moqd(cfg, task, &MoqdVariant::mo_pga(objectives))
}

/// The shared MOQD loop: sample parents from the archive, vary them with
/// Iso+LineDD or policy gradients, evaluate, train critics, insert.
pub fn run_moqd(cfg: &AlgorithmConfig, task: &Task, variant: &MoqdVariant) -> Result<RunOutput> {
    cfg.validate()?;
    let m = task.num_objectives();
    if let Some(&j) = variant.pg_objectives.iter().find(|&&j| j >= m) {
        return Err(Error::Config(format!("policy-gradient objective {j} out of range for {m} objectives")));
    }
    let mut dedup = variant.pg_objectives.clone();
    dedup.sort_unstable();
    dedup.dedup();
    if dedup.len() != variant.pg_objectives.len() {
        return Err(Error::Config("policy-gradient objectives must be distinct".into()));
    }

    let reference = cfg.reference_point(task)?;
    let mut archive = MoqdArchive::new(cfg.centroids(task)?, cfg.archive.max_front_size, variant.replacement)?;
    let mut pg = if variant.pg_objectives.is_empty() {
        None
    } else {
        let selectors: Vec<RewardSelector> = variant.pg_objectives.iter().map(|&j| RewardSelector::Objective(j)).collect();
        Some(PgMachinery::new(cfg, task, &selectors)?)
    };

    let split = split_batch(cfg.batch_size, variant.pg_objectives.len());
    let mut plan = vec![Slot::Ga; split.ga];
    for (t, &n) in split.pg.iter().enumerate() {
        plan.extend(std::iter::repeat_n(Slot::Pg(t), n));
    }
    debug_assert_eq!(plan.len(), cfg.batch_size);

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_LOOP));
    let mut ids = IdCounter::default();
    let mut log = MetricsLog::new(cfg, reference);

    let pool = initial_pool(task, cfg);
    let results = evaluate_all(task, &pool)?;
    if let Some(pg) = pg.as_mut() {
        pg.observe(&results)?;
    }
    for s in ids.solutions(pool, &results)? {
        archive.insert(s, &mut rng)?;
    }
    let mut evals = cfg.batch_size as u64;
    log.record(evals, &archive)?;

    for iteration in 1..=cfg.iterations {
        let parents = sample_genotypes(&archive, cfg.batch_size, variant.sampling, &mut rng)?;
        let mates = sample_genotypes(&archive, cfg.batch_size, variant.sampling, &mut rng)?;
        let seeds = slot_seeds(&mut rng, cfg.batch_size);
        let children = make_offspring(&plan, &parents, &mates, &seeds, &cfg.variation, pg.as_ref())?;
        let results = evaluate_all(task, &children)?;
        if let Some(pg) = pg.as_mut() {
            pg.observe(&results)?;
        }
        let mut added = vec![0usize; split.pg.len() + 1];
        for (slot, s) in plan.iter().zip(ids.solutions(children, &results)?) {
            if archive.insert(s, &mut rng)?.is_added() {
                added[match slot {
                    Slot::Pg(t) => t + 1,
                    _ => 0,
                }] += 1;
            }
        }
        log::debug!("iteration {iteration}: additions by slot group (ga, pg...) {added:?}");
        evals += cfg.batch_size as u64;
        log.record(evals, &archive)?;
        if iteration % 50 == 0 {
            log::info!("{} iteration {iteration}: {} solutions", cfg.algorithm, archive.len());
        }
    }

    Ok(RunOutput {
        archive,
        metrics: log.records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::{AlgorithmId, MetricsRecord};
    use crate::envs::EnvConfig;

    fn bisphere_cfg(algorithm: AlgorithmId) -> AlgorithmConfig {
        let mut cfg = AlgorithmConfig::new(algorithm, EnvConfig::bisphere(4));
        cfg.iterations = 20;
        cfg.batch_size = 16;
        cfg.archive.num_centroids = 8;
        cfg.archive.max_front_size = 5;
        cfg.archive.cvt_samples = 2_000;
        cfg
    }

    #[test]
    fn budget_and_row_count() {
        let cfg = bisphere_cfg(AlgorithmId::Mome);
        let task = Task::from_config(&cfg.env).unwrap();
        let out = run_mome(&cfg, &task).unwrap();
        assert_eq!(out.metrics.len(), 21);
        let evals: Vec<u64> = out.metrics.iter().map(|r| r.evals).collect();
        assert_eq!(evals, (0..=20).map(|i| 16 + 16 * i).collect::<Vec<u64>>());
        assert!(out.metrics.iter().all(|r| r.seconds == 0.0));
    }

    #[test]
    fn runs_are_reproducible() {
        let cfg = bisphere_cfg(AlgorithmId::MomeCrowding);
        let task = Task::from_config(&cfg.env).unwrap();
        let a = run_mome_crowding(&cfg, &task).unwrap();
        let b = run_mome_crowding(&cfg, &task).unwrap();
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.archive.snapshot(), b.archive.snapshot());
    }

    #[test]
    fn moqd_score_never_drops_without_eviction_pressure() {
        let mut cfg = bisphere_cfg(AlgorithmId::Mome);
        cfg.archive.max_front_size = 1000;
        let task = Task::from_config(&cfg.env).unwrap();
        let out = run_mome(&cfg, &task).unwrap();
        let scores: Vec<f64> = out.metrics.iter().map(|r: &MetricsRecord| r.moqd_score).collect();
        assert!(scores.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{scores:?}");
    }

    #[test]
    fn pg_variants_need_an_mdp() {
        let cfg = bisphere_cfg(AlgorithmId::MomePgx);
        let task = Task::from_config(&cfg.env).unwrap();
        assert!(matches!(run_mome_pgx(&cfg, &task), Err(Error::Config(_))));
        assert!(matches!(run_mo_pga(&cfg, &task, &[0]), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_objective_lists() {
        let cfg = bisphere_cfg(AlgorithmId::MoPga);
        let task = Task::from_config(&cfg.env).unwrap();
        assert!(matches!(run_mo_pga(&cfg, &task, &[2]), Err(Error::Config(_))));
        assert!(matches!(run_mo_pga(&cfg, &task, &[0, 0]), Err(Error::Config(_))));
    }

    #[test]
    fn archive_respects_capacity() {
        let cfg = bisphere_cfg(AlgorithmId::MomeCrowding);
        let task = Task::from_config(&cfg.env).unwrap();
        let out = run_mome_crowding(&cfg, &task).unwrap();
        assert!(out.archive.cells().iter().all(|c| c.len() <= 5));
        assert!(out.archive.len() > 8);
    }
}
