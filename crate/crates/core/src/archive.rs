//! CVT-tessellated multi-objective archive. Each cell owns a bounded Pareto
//! front; insertion follows the Pareto addition rule with either random or
//! crowding-based replacement once a front is over capacity.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};
use crate::pareto::{self, CrowdingMode};

const LLOYD_MAX_ITERS: usize = 200;
const LLOYD_TOL: f64 = 1e-6;
/// Sample count used by the Monte-Carlo hypervolume fallback when m > 2.
const MC_SAMPLES: usize = 100_000;

/// Centroids of a Voronoi tessellation of the descriptor space.
#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    points: Vec<Vec<f64>>,
    bounds: Vec<(f64, f64)>,
}

impl Centroids {
    pub fn new(points: Vec<Vec<f64>>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("at least one centroid is required".into()));
        }
        validate_bounds(&bounds)?;
        for p in &points {
            check_len(bounds.len(), p.len())?;
            if p.iter().zip(&bounds).any(|(v, (lo, hi))| !(lo <= v && v <= hi)) {
                return Err(Error::Config(format!("centroid {p:?} lies outside the bounds")));
            }
        }
        Ok(Self { points, bounds })
    }

    /// Lloyd's k-means on `n_samples` uniform draws from `bounds`.
    pub fn cvt(bounds: &[(f64, f64)], k: usize, n_samples: usize, seed: u64) -> Result<Self> {
        validate_bounds(bounds)?;
        if k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if k > n_samples {
            return Err(Error::Config(format!(
                "k = {k} exceeds the number of CVT samples ({n_samples})"
            )));
        }
        if n_samples < 10 * k {
            return Err(Error::Config(format!(
                "CVT needs at least 10 samples per centroid ({} for k = {k}), got {n_samples}",
                10 * k
            )));
        }
        let d = bounds.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<Vec<f64>> = (0..n_samples)
            .map(|_| bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect())
            .collect();
        let mut centers: Vec<Vec<f64>> = index::sample(&mut rng, n_samples, k)
            .into_iter()
            .map(|i| samples[i].clone())
            .collect();

        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for _ in 0..LLOYD_MAX_ITERS {
            sums.iter_mut().for_each(|s| s.fill(0.0));
            counts.fill(0);
            for s in &samples {
                let c = nearest(&centers, s);
                counts[c] += 1;
                sums[c].iter_mut().zip(s).for_each(|(acc, v)| *acc += v);
            }
            let mut shift: f64 = 0.0;
            for ((center, sum), &count) in centers.iter_mut().zip(&sums).zip(&counts) {
                if count == 0 {
                    continue;
                }
                let next: Vec<f64> = sum.iter().map(|v| v / count as f64).collect();
                shift = shift.max(squared_distance(center, &next).sqrt());
                *center = next;
            }
            if shift < LLOYD_TOL {
                break;
            }
        }
        Self::new(centers, bounds.to_vec())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn clip(&self, descriptor: &[f64]) -> Vec<f64> {
        descriptor
            .iter()
            .zip(&self.bounds)
            .map(|(v, &(lo, hi))| v.clamp(lo, hi))
            .collect()
    }

    /// Nearest centroid of the clipped descriptor; ties go to the lowest index.
    pub fn cell_of(&self, descriptor: &[f64]) -> Result<usize> {
        check_len(self.dim(), descriptor.len())?;
        if descriptor.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite descriptor {descriptor:?}")));
        }
        Ok(nearest(&self.points, &self.clip(descriptor)))
    }
}

fn validate_bounds(bounds: &[(f64, f64)]) -> Result<()> {
    if bounds.is_empty() {
        return Err(Error::Config("descriptor space needs at least one dimension".into()));
    }
    for (i, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!("descriptor bound {i} is [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centers: &[Vec<f64>], x: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = squared_distance(c, x);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// A stored candidate: genotype, objective scores and behaviour descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub id: u64,
    pub genotype: Vec<f64>,
    pub scores: Vec<f64>,
    pub descriptor: Vec<f64>,
}

impl Solution {
    pub fn new(id: u64, genotype: Vec<f64>, scores: Vec<f64>, descriptor: Vec<f64>) -> Result<Self> {
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("non-finite scores {scores:?}")));
        }
        Ok(Self {
            id,
            genotype,
            scores,
            descriptor,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReplacementPolicy {
    /// Evict a uniformly random member of the over-full front (the new one included).
    Random,
    /// Evict the member with the smallest replacement-mode crowding distance.
    Crowding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    Crowding,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Insertion {
    Discarded,
    Added { cell: usize, evicted: Vec<u64> },
}

impl Insertion {
    pub fn is_added(&self) -> bool {
        matches!(self, Insertion::Added { .. })
    }
}

/// Mutually non-dominated solutions, at most `capacity` of them once an
/// insertion completes. `capacity == None` means unbounded.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundedParetoFront {
    solutions: Vec<Solution>,
    capacity: Option<usize>,
}

impl BoundedParetoFront {
    pub fn new(capacity: Option<usize>) -> Self {
        Self {
            solutions: Vec::new(),
            capacity,
        }
    }

    pub fn solutions(&self) -> &[Solution] {
        &self.solutions
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn scores(&self) -> Vec<&[f64]> {
        self.solutions.iter().map(|s| s.scores.as_slice()).collect()
    }

    /// Returns `None` when the candidate is discarded, otherwise the ids evicted
    /// by dominance and by the capacity rule (possibly the candidate's own id
    /// under random replacement).
    pub fn insert<R: Rng + ?Sized>(
        &mut self,
        candidate: Solution,
        policy: ReplacementPolicy,
        rng: &mut R,
    ) -> Result<Option<Vec<u64>>> {
        for s in &self.solutions {
            check_len(s.scores.len(), candidate.scores.len())?;
            if s.scores == candidate.scores || pareto::dominates_unchecked(&s.scores, &candidate.scores) {
                return Ok(None);
            }
        }
        let mut evicted = Vec::new();
        self.solutions.retain(|s| {
            let beaten = pareto::dominates_unchecked(&candidate.scores, &s.scores);
            if beaten {
                evicted.push(s.id);
            }
            !beaten
        });
        self.solutions.push(candidate);

        if let Some(cap) = self.capacity {
            while self.solutions.len() > cap {
                let victim = match policy {
                    ReplacementPolicy::Random => rng.random_range(0..self.solutions.len()),
                    ReplacementPolicy::Crowding => self.most_crowded()?,
                };
                evicted.push(self.solutions.remove(victim).id);
            }
        }
        Ok(Some(evicted))
    }

    /// Position of the eviction victim under crowding replacement. Among equal
    /// minima the newest solution goes, so incumbents win ties.
    fn most_crowded(&self) -> Result<usize> {
        let dist = pareto::crowding_distances(&self.scores(), CrowdingMode::Replacement)?;
        let mut victim = 0;
        for i in 1..dist.len() {
            let better = dist[i] < dist[victim]
                || (dist[i] == dist[victim] && self.solutions[i].id >= self.solutions[victim].id);
            if better {
                victim = i;
            }
        }
        Ok(victim)
    }

    fn pick<R: Rng + ?Sized>(&self, mode: SamplingMode, rng: &mut R) -> Result<&Solution> {
        let n = self.solutions.len();
        if n == 1 || mode == SamplingMode::Uniform {
            return Ok(&self.solutions[rng.random_range(0..n)]);
        }
        let weights = pareto::crowding_distances(&self.scores(), CrowdingMode::Selection)?;
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Ok(&self.solutions[rng.random_range(0..n)]);
        }
        let mut u = rng.random::<f64>() * total;
        for (s, w) in self.solutions.iter().zip(&weights) {
            if u < *w {
                return Ok(s);
            }
            u -= w;
        }
        Ok(self.solutions.last().expect("non-empty front"))
    }
}

/// The four archive-level quality measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchiveMetrics {
    /// Sum over cells of the hypervolume of each cell's front.
    pub moqd_score: f64,
    /// Hypervolume of the front of all stored solutions.
    pub global_hypervolume: f64,
    /// Largest objective sum over stored solutions; `None` for an empty archive.
    pub max_sum: Option<f64>,
    /// Fraction of non-empty cells.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoqdArchive {
    centroids: Centroids,
    cells: Vec<BoundedParetoFront>,
    capacity: Option<usize>,
    policy: ReplacementPolicy,
    insertions: u64,
}

impl MoqdArchive {
    pub fn new(centroids: Centroids, capacity: usize, policy: ReplacementPolicy) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("Pareto front capacity must be at least 1".into()));
        }
        Ok(Self::with_capacity(centroids, Some(capacity), policy))
    }

    /// Archive whose fronts never overflow. Only useful for reference checks.
    pub fn unbounded(centroids: Centroids, policy: ReplacementPolicy) -> Self {
        Self::with_capacity(centroids, None, policy)
    }

    fn with_capacity(centroids: Centroids, capacity: Option<usize>, policy: ReplacementPolicy) -> Self {
        let cells = vec![BoundedParetoFront::new(capacity); centroids.len()];
        Self {
            centroids,
            cells,
            capacity,
            policy,
            insertions: 0,
        }
    }

    pub fn centroids(&self) -> &Centroids {
        &self.centroids
    }

    pub fn cells(&self) -> &[BoundedParetoFront] {
        &self.cells
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn policy(&self) -> ReplacementPolicy {
        self.policy
    }

    /// Number of insertion attempts so far.
    pub fn insertions(&self) -> u64 {
        self.insertions
    }

    pub fn len(&self) -> usize {
        self.cells.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.iter().all(|c| c.is_empty())
    }

    pub fn solutions(&self) -> impl Iterator<Item = &Solution> {
        self.cells.iter().flat_map(|c| c.solutions.iter())
    }

    pub fn cell_index(&self, descriptor: &[f64]) -> Result<usize> {
        self.centroids.cell_of(descriptor)
    }

    pub fn insert<R: Rng + ?Sized>(&mut self, mut solution: Solution, rng: &mut R) -> Result<Insertion> {
        let cell = self.cell_index(&solution.descriptor)?;
        solution.descriptor = self.centroids.clip(&solution.descriptor);
        self.insertions += 1;
        Ok(match self.cells[cell].insert(solution, self.policy, rng)? {
            None => Insertion::Discarded,
            Some(evicted) => Insertion::Added { cell, evicted },
        })
    }

    /// Feeds a baseline's population in through the ordinary addition rule and
    /// reports how many candidates were added.
    pub fn passive_insert<R: Rng + ?Sized>(&mut self, population: &[Solution], rng: &mut R) -> Result<usize> {
        let mut added = 0;
        for s in population {
            if self.insert(s.clone(), rng)?.is_added() {
                added += 1;
            }
        }
        Ok(added)
    }

    /// Picks `batch` non-empty cells uniformly with replacement and one solution
    /// from each, either uniformly or weighted by selection crowding distance.
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, mode: SamplingMode, rng: &mut R) -> Result<Vec<&Solution>> {
        let occupied: Vec<usize> = (0..self.cells.len()).filter(|&i| !self.cells[i].is_empty()).collect();
        if occupied.is_empty() {
            return Err(Error::EmptyArchive);
        }
        (0..batch)
            .map(|_| {
                let cell = occupied[rng.random_range(0..occupied.len())];
                self.cells[cell].pick(mode, rng)
            })
            .collect()
    }

    pub fn metrics(&self, reference: &[f64]) -> Result<ArchiveMetrics> {
        let occupied = self.cells.iter().filter(|c| !c.is_empty()).count();
        let coverage = occupied as f64 / self.cells.len() as f64;
        let max_sum = self
            .solutions()
            .map(|s| s.scores.iter().sum::<f64>())
            .max_by(f64::total_cmp);

        let mut moqd_score = 0.0;
        for cell in self.cells.iter().filter(|c| !c.is_empty()) {
            moqd_score += self.hypervolume(&cell.scores(), reference)?;
        }
        let all: Vec<&[f64]> = self.solutions().map(|s| s.scores.as_slice()).collect();
        let global: Vec<&[f64]> = pareto::extract_front(&all)?.into_iter().map(|i| all[i]).collect();
        let global_hypervolume = self.hypervolume(&global, reference)?;
        Ok(ArchiveMetrics {
            moqd_score,
            global_hypervolume,
            max_sum,
            coverage,
        })
    }

    fn hypervolume(&self, front: &[&[f64]], reference: &[f64]) -> Result<f64> {
        if front.is_empty() {
            return Ok(0.0);
        }
        if reference.len() == 2 {
            return Ok(pareto::hypervolume_2d(front, reference)?.volume);
        }
        let m = reference.len();
        let mut bound = reference.to_vec();
        for s in self.solutions() {
            check_len(m, s.scores.len())?;
            for (b, v) in bound.iter_mut().zip(&s.scores) {
                *b = b.max(*v);
            }
        }
        if bound.iter().zip(reference).any(|(b, r)| b <= r) {
            return Ok(0.0);
        }
        let kept: Vec<&[f64]> = front
            .iter()
            .copied()
            .filter(|p| pareto::weakly_dominates(p, reference))
            .collect();
        Ok(pareto::hypervolume_mc(&kept, reference, &bound, MC_SAMPLES, 0)?.estimate)
    }

    /// Writes the archive as JSON lines: one header record, then one record
    /// per stored solution.
    pub fn write_snapshot<W: Write>(&self, mut out: W) -> Result<()> {
        let header = Record::Header {
            centroids: self.centroids.points.clone(),
            bounds: self.centroids.bounds.iter().map(|&(lo, hi)| [lo, hi]).collect(),
            capacity: self.capacity,
            policy: self.policy,
        };
        writeln!(out, "{}", to_json(&header)?)?;
        for (cell, front) in self.cells.iter().enumerate() {
            for s in &front.solutions {
                let rec = Record::Sol {
                    cell,
                    desc: s.descriptor.clone(),
                    scores: s.scores.clone(),
                    genotype: s.genotype.clone(),
                };
                writeln!(out, "{}", to_json(&rec)?)?;
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Reads a snapshot. Solution ids are reassigned in file order.
    pub fn read_snapshot<R: BufRead>(input: R) -> Result<Self> {
        let mut archive: Option<Self> = None;
        let mut next_id = 0u64;
        for (i, line) in input.lines().enumerate() {
            let lineno = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            match (rec, archive.as_mut()) {
                (
                    Record::Header {
                        centroids,
                        bounds,
                        capacity,
                        policy,
                    },
                    None,
                ) => {
                    let bounds = bounds.into_iter().map(|[lo, hi]| (lo, hi)).collect();
                    let c = Centroids::new(centroids, bounds).map_err(|e| parse_err(e.to_string()))?;
                    if capacity == Some(0) {
                        return Err(parse_err("P must be at least 1".into()));
                    }
                    archive = Some(Self::with_capacity(c, capacity, policy));
                }
                (Record::Header { .. }, Some(_)) => return Err(parse_err("duplicate header".into())),
                (Record::Sol { .. }, None) => return Err(parse_err("solution before header".into())),
                (
                    Record::Sol {
                        cell,
                        desc,
                        scores,
                        genotype,
                    },
                    Some(a),
                ) => {
                    if cell >= a.cells.len() {
                        return Err(parse_err(format!("cell {cell} out of range")));
                    }
                    if desc.len() != a.centroids.dim() {
                        return Err(parse_err(format!("descriptor has {} entries", desc.len())));
                    }
                    let s = Solution::new(next_id, genotype, scores, desc).map_err(|e| parse_err(e.to_string()))?;
                    next_id += 1;
                    a.cells[cell].solutions.push(s);
                }
            }
        }
        archive.ok_or(Error::Parse {
            line: 0,
            message: "missing header".into(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Record {
    Header {
        centroids: Vec<Vec<f64>>,
        bounds: Vec<[f64; 2]>,
        #[serde(rename = "P")]
        capacity: Option<usize>,
        policy: ReplacementPolicy,
    },
    Sol {
        cell: usize,
        desc: Vec<f64>,
        scores: Vec<f64>,
        genotype: Vec<f64>,
    },
}

fn to_json(rec: &Record) -> Result<String> {
    serde_json::to_string(rec).map_err(|e| Error::Input(e.to_string()))
}
