use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    derive_seed, evaluate_all, initial_pool, make_offspring, passive_archive, slot_seeds, AlgorithmConfig, IdCounter,
    MetricsLog, RunOutput, Slot, STREAM_ARCHIVE, STREAM_LOOP,
};
use crate::archive::Solution;
use crate::envs::Task;
use crate::error::Result;
use crate::pareto::dominates_unchecked;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// SPEA2 fitness: raw fitness (sum of the strengths of every dominator) plus
/// the density `1 / (sigma_k + 2)`, where `sigma_k` is the distance to the
/// `floor(sqrt(n))`-th nearest neighbour. Lower is better; values below one
/// mark non-dominated points.
pub fn spea2_fitness<S: AsRef<[f64]>>(scores: &[S]) -> Vec<f64> {
    let n = scores.len();
    let p = |i: usize| scores[i].as_ref();
    let mut strength = vec![0usize; n];
    for i in 0..n {
        strength[i] = (0..n).filter(|&j| dominates_unchecked(p(i), p(j))).count();
    }
    let k = ((n as f64).sqrt() as usize).max(1);
    (0..n)
        .map(|i| {
            let raw: usize = (0..n).filter(|&j| dominates_unchecked(p(j), p(i))).map(|j| strength[j]).sum();
            let mut dists: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| distance(p(i), p(j))).collect();
            dists.sort_by(f64::total_cmp);
            let sigma = dists.get(k - 1).copied().unwrap_or(0.0);
            raw as f64 + 1.0 / (sigma + 2.0)
        })
        .collect()
}

/// Indices (ascending) of the `target` members kept by environmental
/// selection. All non-dominated points are kept when they fit; the remainder
/// is filled by fitness, or the non-dominated set is truncated by repeatedly
/// removing the point whose sorted neighbour distances are lexicographically
/// smallest.
pub fn spea2_environmental_selection<S: AsRef<[f64]>>(scores: &[S], target: usize) -> Vec<usize> {
    let n = scores.len();
    if n <= target {
        return (0..n).collect();
    }
    let fit = spea2_fitness(scores);
    let mut selected: Vec<usize> = (0..n).filter(|&i| fit[i] < 1.0).collect();
    if selected.len() <= target {
        let mut rest: Vec<usize> = (0..n).filter(|&i| fit[i] >= 1.0).collect();
        rest.sort_by(|&a, &b| fit[a].total_cmp(&fit[b]).then(a.cmp(&b)));
        selected.extend(rest.into_iter().take(target - selected.len()));
        selected.sort_unstable();
        return selected;
    }

    // neighbour lists sorted by distance, kept in sync as points are removed
    let mut neighbours: Vec<Vec<(f64, usize)>> = selected
        .iter()
        .map(|&i| {
            let mut v: Vec<(f64, usize)> = selected
                .iter()
                .filter(|&&j| j != i)
                .map(|&j| (distance(scores[i].as_ref(), scores[j].as_ref()), j))
                .collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            v
        })
        .collect();
    while selected.len() > target {
        let mut worst = 0;
        for c in 1..selected.len() {
            let lex = neighbours[c]
                .iter()
                .zip(&neighbours[worst])
                .map(|(a, b)| a.0.total_cmp(&b.0))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal);
            if lex.is_lt() {
                worst = c;
            }
        }
        let removed = selected.remove(worst);
        neighbours.remove(worst);
        for list in &mut neighbours {
            list.retain(|&(_, j)| j != removed);
        }
    }
    selected
}

fn tournament<R: Rng>(fitness: &[f64], rng: &mut R) -> usize {
    let a = rng.random_range(0..fitness.len());
    let b = rng.random_range(0..fitness.len());
    if fitness[b] < fitness[a] {
        b
    } else {
        a
    }
}

/// SPEA2 whose external archive grows from `batch_size` to
/// `num_centroids * max_front_size`.
pub fn run_spea2(cfg: &AlgorithmConfig, task: &Task) -> Result<RunOutput> {
    cfg.validate()?;
    let reference = cfg.reference_point(task)?;
    let target = cfg.archive.num_centroids * cfg.archive.max_front_size;
    let mut passive = passive_archive(cfg, task)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_LOOP));
    let mut passive_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, STREAM_ARCHIVE));
    let mut ids = IdCounter::default();
    let mut log = MetricsLog::new(cfg, reference);
    let plan = vec![Slot::Ga; cfg.batch_size];

    let select = |union: Vec<Solution>| -> Vec<Solution> {
        let scores: Vec<&[f64]> = union.iter().map(|s| s.scores.as_slice()).collect();
        let keep = spea2_environmental_selection(&scores, target);
        let mut slots: Vec<Option<Solution>> = union.into_iter().map(Some).collect();
        keep.into_iter().filter_map(|i| slots[i].take()).collect()
    };

    let pool = initial_pool(task, cfg);
    let results = evaluate_all(task, &pool)?;
    let mut population = select(ids.solutions(pool, &results)?);
    passive.passive_insert(&population, &mut passive_rng)?;
    let mut evals = cfg.batch_size as u64;
    log.record(evals, &passive)?;

    for _ in 1..=cfg.iterations {
        let fitness = spea2_fitness(&population.iter().map(|s| s.scores.as_slice()).collect::<Vec<_>>());
        let pick = |rng: &mut ChaCha8Rng| population[tournament(&fitness, rng)].genotype.clone();
        let parents: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| pick(&mut rng)).collect();
        let mates: Vec<Vec<f64>> = (0..cfg.batch_size).map(|_| pick(&mut rng)).collect();
        let seeds = slot_seeds(&mut rng, cfg.batch_size);
        let children = make_offspring(&plan, &parents, &mates, &seeds, &cfg.variation, None)?;
        let results = evaluate_all(task, &children)?;
        population.extend(ids.solutions(children, &results)?);
        population = select(population);
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

    #[test]
    fn fitness_by_hand() {
        // c dominates b, b dominates a; d is incomparable with everything
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [-1.0, 5.0]];
        let f = spea2_fitness(&pts);
        // strengths: a 0, b 1, c 2, d 0; k = 2
        let d2 = |i: usize| {
            let mut v: Vec<f64> = (0..4).filter(|&j| j != i).map(|j| distance(&pts[i], &pts[j])).collect();
            v.sort_by(f64::total_cmp);
            1.0 / (v[1] + 2.0)
        };
        assert!((f[0] - (3.0 + d2(0))).abs() < 1e-12);
        assert!((f[1] - (2.0 + d2(1))).abs() < 1e-12);
        assert!((f[2] - d2(2)).abs() < 1e-12);
        assert!((f[3] - d2(3)).abs() < 1e-12);
    }

    #[test]
    fn truncation_removes_the_most_crowded() {
        let pts = [[0.0, 4.0], [1.0, 3.0], [1.05, 2.95], [4.0, 0.0]];
        let kept = spea2_environmental_selection(&pts, 3);
        assert_eq!(kept.len(), 3);
        assert!(kept.contains(&0) && kept.contains(&3));
    }

    #[test]
    fn fills_with_dominated_points_by_fitness() {
        let pts = [[3.0, 3.0], [0.0, 0.0], [2.0, 2.0], [-1.0, -1.0]];
        assert_eq!(spea2_environmental_selection(&pts, 2), vec![0, 2]);
    }

    #[test]
    fn identical_scores_terminate() {
        let pts = vec![[1.0, 1.0]; 30];
        let kept = spea2_environmental_selection(&pts, 7);
        assert_eq!(kept.len(), 7);
        let f = spea2_fitness(&pts);
        assert!(f.iter().all(|&v| v == 0.5));
    }
}
