use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::cmp::Ordering;

use super::{
    derive_seed, evaluate_all, initial_pool, make_offspring, passive_archive, slot_seeds, AlgorithmConfig, IdCounter,
    MetricsLog, RunOutput, Slot, STREAM_ARCHIVE, STREAM_LOOP,
};
use crate::archive::Solution;
use crate::envs::Task;
use crate::error::Result;
use crate::pareto::non_dominated_sort;

/// Range-normalised cuboid crowding distance of every point in a front, any
/// number of objectives. Extremes on any objective get `+inf`.
pub fn nsga2_crowding<S: AsRef<[f64]>>(front: &[S]) -> Vec<f64> {
    let n = front.len();
    let mut d = vec![0.0; n];
    if n == 0 {
        return d;
    }
    let m = front[0].as_ref().len();
    let mut order: Vec<usize> = (0..n).collect();
    for j in 0..m {
        let f = |i: usize| front[i].as_ref()[j];
        order.sort_by(|&a, &b| f(a).total_cmp(&f(b)).then(a.cmp(&b)));
        let (lo, hi) = (f(order[0]), f(order[n - 1]));
        d[order[0]] = f64::INFINITY;
        d[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in order.windows(3) {
            d[w[1]] += (f(w[2]) - f(w[0])) / range;
        }
    }
    d
}

/// Rank (front index) and crowding distance of every member.
fn rank_and_crowd(scores: &[&[f64]]) -> Result<(Vec<usize>, Vec<f64>)> {
    let n = scores.len();
    let mut rank = vec![0; n];
    let mut crowd = vec![0.0; n];
    for (r, front) in non_dominated_sort(scores)?.iter().enumerate() {
        let pts: Vec<&[f64]> = front.iter().map(|&i| scores[i]).collect();
        for (&i, c) in front.iter().zip(nsga2_crowding(&pts)) {
            rank[i] = r;
            crowd[i] = c;
        }
    }
    Ok((rank, crowd))
}

/// Keeps `target` members of `union`: whole fronts in rank order, then the
/// most isolated members of the first front that does not fit.
pub fn nsga2_survival(union: Vec<Solution>, target: usize) -> Result<Vec<Solution>> {
    if union.len() <= target {
        return Ok(union);
    }
    let scores: Vec<&[f64]> = union.iter().map(|s| s.scores.as_slice()).collect();
    let mut keep: Vec<usize> = Vec::with_capacity(target);
    for front in non_dominated_sort(&scores)? {
        if keep.len() + front.len() <= target {
            keep.extend(&front);
            continue;
        }
        let pts: Vec<&[f64]> = front.iter().map(|&i| scores[i]).collect();
        let crowd = nsga2_crowding(&pts);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| crowd[b].total_cmp(&crowd[a]).then(front[a].cmp(&front[b])));
        keep.extend(order.iter().take(target - keep.len()).map(|&k| front[k]));
        break;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Solution>> = union.into_iter().map(Some).collect();
    Ok(keep.into_iter().filter_map(|i| slots[i].take()).collect())
}

fn tournament<R: Rng>(rank: &[usize], crowd: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..rank.len());
    let b = rng.random_range(0..rank.len());
    match rank[a].cmp(&rank[b]).then(crowd[b].partial_cmp(&crowd[a]).unwrap_or(Ordering::Equal)) {
        Ordering::Greater => b,
        _ => a,
    }
}

/// NSGA-II whose population grows from `batch_size` to the MOQD archive
/// capacity `num_centroids * max_front_size`.
pub fn run_nsga2(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    cfg.validate()?;
    let reference = cfg.reference_point(task)?;
    let target = cfg.archive.num_centroids * cfg.archive.max_front_size;
    let mut passive = passive_archive(cfg, task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_LOOP));
    let mut passive_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_ARCHIVE));
    let mut ids = IdCounter::default();
    let mut log = MetricsLog::new(cfg, reference);
    let plan = vec![Slot::Ga; cfg.batch_size];

    let pool = initial_pool(task, cfg);
    let results = evaluate_all(task, &pool)?;
    let mut population = nsga2_survival(ids.solutions(pool, &results)?, target)?;
    passive.passive_insert(&population, &mut passive_rng)?;
    let mut evals = cfg.batch_size as u64;
    log.record(evals, &passive)?;

    for _ in 1..=cfg.iterations {
        let scores: Vec<&[f64]> = population.iter().map(|s| s.scores.as_slice()).collect();
        let (rank, crowd) = rank_and_crowd(&scores)?;
        let pick = |rng: &mut ChaCha8Rng| population[tournament(&rank, &crowd, rng)].genotype.clone();
        let parents: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| pick(&mut rng)).collect();
        let mates: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| pick(&mut rng)).collect();
        let seeds = slot_seeds(&mut rng, cfg.batch_size);
        let children = make_offspring(&plan, &parents, &mates, &seeds, &cfg.variation, None)?;
        let results = evaluate_all(task, &children)?;
        population.extend(ids.solutions(children, &results)?);
        population = nsga2_survival(population, target)?;
        passive.passive_insert(&population, &mut passive_rng)?;
        evals += cfg.batch_size as u64;
        log.record(evals, &passive)?;
    }

    Ok(RunOutput {
        archive: passive,
        metrics: log.records,
    })
}
