use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    derive_seed, evaluate_all, initial_pool, make_offspring, passive_archive, slot_seeds, AlgorithmConfig, IdCounter,
    MetricsLog, PgMachinery, RunOutput, Slot, STREAM_ARCHIVE, STREAM_LOOP,
};
use crate::archive::{Centroids, Solution};
use crate::envs::Task;
use crate::error::{Error, Result};
use crate::neuro::RewardSelector;
use crate::variation::split_batch;

/// MAP-Elites grid keeping the solution with the largest objective sum per cell.
#[derive(Debug, Clone)]
pub struct EliteGrid {
    centroids: Centroids,
    cells: Vec<Option<Solution>>,
}

impl EliteGrid {
    pub fn new(centroids: Centroids) -> Self {
        let cells = vec![None; centroids.len()];
        Self { centroids, cells }
    }

    pub fn centroids(&self) -> &Centroids {
        &self.centroids
    }

    pub fn len(&self) -> usize {
        self.cells.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn solutions(&self) -> impl Iterator<Item = &Solution> {
        self.cells.iter().flatten()
    }

    /// Places `s` in its cell if the cell is empty or `s` has a strictly larger
    /// objective sum. Returns whether it was stored.
    pub fn insert(&mut self, mut s: Solution) -> Result<bool> {
        s.descriptor = self.centroids.clip(&s.descriptor);
        let cell = self.centroids.cell_of(&s.descriptor)?;
        let better = match &self.cells[cell] {
            None => true,
            Some(inc) => fitness(&s) > fitness(inc),
        };
        if better {
            self.cells[cell] = Some(s);
        }
        Ok(better)
    }

    /// Uniform draws with replacement over occupied cells.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<&Solution>> {
        let occupied: Vec<&Solution> = self.solutions().collect();
        if occupied.is_empty() {
            return Err(Error::EmptyArchive);
        }
        Ok((0..n).map(|_| occupied[rng.random_range(0..occupied.len())]).collect())
    }
}

fn fitness(s: &Solution) -> f64 {
    s.scores.iter().sum()
}

/// Single-objective MAP-Elites with policy gradients on the summed reward.
///
/// The grid has `num_centroids * max_front_size` cells so it can hold as many
/// solutions as the MOQD archive. Performance is read off a passive MOQD
/// archive that receives the whole grid after every iteration.
pub fn run_pga_me(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    cfg.validate()?;
    let reference = cfg.reference_point(task)?;
    let cells = cfg.archive.num_centroids * cfg.archive.max_front_size;
    let grid_centroids = Centroids::cvt(
        &task.descriptor_bounds(),
        cells,
        cfg.archive.cvt_samples.max(10 * cells),
        cfg.archive.cvt_seed,
    )?;
    let mut grid = EliteGrid::new(grid_centroids);
    let mut passive = passive_archive(cfg, task)?;
    let mut pg = PgMachinery::new(cfg, task, &[RewardSelector::Sum])?;

    let split = split_batch(cfg.batch_size, 1);
    let mut plan = vec![Slot::Ga; split.ga];
    plan.extend(std::iter::repeat_n(Slot::Pg(0), split.pg[0]));
    if cfg.inject_actor {
        if let Some(last) = plan.last_mut().filter(|s| **s == Slot::Pg(0)) {
            *last = Slot::Actor;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_LOOP));
    let mut passive_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_ARCHIVE));
    let mut ids = IdCounter::default();
    let mut log = MetricsLog::new(cfg, reference);

    let pool = initial_pool(task, cfg);
    let results = evaluate_all(task, &pool)?;
    pg.observe(&results)?;
    for s in ids.solutions(pool, &results)? {
        grid.insert(s)?;
    }
    let population: Vec<Solution> = grid.solutions().cloned().collect();
    passive.passive_insert(&population, &mut passive_rng)?;
    let mut evals = cfg.batch_size as u64;
    log.record(evals, &passive)?;

    for _ in 1..=cfg.iterations {
        let parents: Vec<Vec<f64>> = grid.sample(cfg.batch_size, &mut rng)?.into_iter().map(|s| s.genotype.clone()).collect();
        let mates: Vec<Vec<f64>> = grid.sample(cfg.batch_size, &mut rng)?.into_iter().map(|s| s.genotype.clone()).collect();
        let seeds = slot_seeds(&mut rng, cfg.batch_size);
        let children = make_offspring(&plan, &parents, &mates, &seeds, &cfg.variation, Some(&pg))?;
        let results = evaluate_all(task, &children)?;
        pg.observe(&results)?;
        for s in ids.solutions(children, &results)? {
            grid.insert(s)?;
        }
        let population: Vec<Solution> = grid.solutions().cloned().collect();
        passive.passive_insert(&population, &mut passive_rng)?;
        evals += cfg.batch_size as u64;
        log.record(evals, &passive)?;
    }

    Ok(RunOutput {
        archive: passive,
        metrics: log.records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sol(id: u64, scores: [f64; 2], d: [f64; 2]) -> Solution {
        Solution::new(id, vec![], scores.to_vec(), d.to_vec()).unwrap()
    }

    #[test]
    fn grid_keeps_the_larger_sum() {
        let c = Centroids::new(vec![vec![0.25, 0.5], vec![0.75, 0.5]], vec![(0.0, 1.0), (0.0, 1.0)]).unwrap();
        let mut g = EliteGrid::new(c);
        assert!(g.insert(sol(0, [1.0, 1.0], [0.1, 0.1])).unwrap());
        assert!(!g.insert(sol(1, [2.0, 0.0], [0.2, 0.2])).unwrap());
        assert!(g.insert(sol(2, [0.0, 2.5], [0.2, 0.2])).unwrap());
        assert!(g.insert(sol(3, [-5.0, 0.0], [0.9, 0.9])).unwrap());
        let ids: Vec<u64> = g.solutions().map(|s| s.id).collect();
        assert_eq!(ids, vec![2, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(g.sample(10, &mut rng).unwrap().len(), 10);
        assert!(EliteGrid::new(g.centroids().clone()).sample(1, &mut rng).is_err());
    }
}
