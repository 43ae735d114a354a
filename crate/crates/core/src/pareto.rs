//! Multi-objective primitives: Pareto dominance, front extraction, hypervolume,
//! crowding distances and non-dominated sorting.
//!
//! Every objective is maximised. Score vectors are passed as plain `&[f64]`
//! slices so callers can hand in solutions, rows of a matrix or literals alike.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};

/// `true` iff `a` is at least as good as `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool> {
    check_len(a.len(), b.len())?;
    Ok(dominates_unchecked(a, b))
}

#[inline]
pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x < y {
            return false;
        }
        if x > y {
            strictly = true;
        }
    }
    strictly
}

/// `true` iff every coordinate of `a` is `>=` the matching coordinate of `b`.
#[inline]
pub(crate) fn weakly_dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

fn uniform_dim<S: AsRef<[f64]>>(points: &[S]) -> Result<Option<usize>> {
    let Some(first) = points.first() else {
        return Ok(None);
    };
    let m = first.as_ref().len();
    for p in points {
        check_len(m, p.as_ref().len())?;
    }
    Ok(Some(m))
}

/// Indices of the points not dominated by any other point, in input order.
///
/// Duplicates of a non-dominated score vector are all kept.
pub fn extract_front<S: AsRef<[f64]>>(points: &[S]) -> Result<Vec<usize>> {
    if uniform_dim(points)?.is_none() {
        return Ok(Vec::new());
    }
    Ok(front_of(points, (0..points.len()).collect()))
}

fn front_of<S: AsRef<[f64]>>(points: &[S], candidates: Vec<usize>) -> Vec<usize> {
    candidates
        .iter()
        .copied()
        .filter(|&i| {
            !candidates
                .iter()
                .any(|&j| j != i && dominates_unchecked(points[j].as_ref(), points[i].as_ref()))
        })
        .collect()
}

/// Peels the input into successive Pareto fronts (fast non-dominated sort).
pub fn non_dominated_sort<S: AsRef<[f64]>>(points: &[S]) -> Result<Vec<Vec<usize>>> {
    if uniform_dim(points)?.is_none() {
        return Ok(Vec::new());
    }
    let n = points.len();
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates_unchecked(a, b) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_unchecked(b, a) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(fronts)
}

/// Result of an exact hypervolume computation.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypervolume {
    pub volume: f64,
    /// Points that do not weakly dominate the reference point. They contribute
    /// nothing to `volume`.
    pub below_reference: Vec<usize>,
}

/// Exact bi-objective hypervolume by a sorted sweep.
///
/// Dominated input points are tolerated (they add no area), so the input need
/// not be a clean front.
pub fn hypervolume_2d<S: AsRef<[f64]>>(front: &[S], reference: &[f64]) -> Result<Hypervolume> {
    if reference.len() != 2 {
        return Err(Error::UnsupportedDimension(reference.len()));
    }
    let mut below_reference = Vec::new();
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(front.len());
    for (i, p) in front.iter().enumerate() {
        let p = p.as_ref();
        if p.len() != 2 {
            return Err(Error::UnsupportedDimension(p.len()));
        }
        if !weakly_dominates(p, reference) {
            below_reference.push(i);
            continue;
        }
        pts.push([p[0], p[1]]);
    }
    if !below_reference.is_empty() {
        log::debug!(
            "{} point(s) below the hypervolume reference contribute zero volume",
            below_reference.len()
        );
    }

    // Descending in the first objective; the second objective only ever
    // climbs along the sweep for points that add area.
    pts.sort_by(|a, b| b[0].total_cmp(&a[0]).then(b[1].total_cmp(&a[1])));
    let mut volume = 0.0;
    let mut height = reference[1];
    for [x, y] in pts {
        if y > height {
            volume += (x - reference[0]) * (y - height);
            height = y;
        }
    }
    Ok(Hypervolume {
        volume,
        below_reference,
    })
}

/// Monte-Carlo hypervolume estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypervolumeEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

/// Estimates the hypervolume over the box `[reference, bound]` by uniform sampling.
///
/// Works for any objective count. Deterministic for a fixed `seed`.
pub fn hypervolume_mc<S: AsRef<[f64]>>(
    front: &[S],
    reference: &[f64],
    bound: &[f64],
    samples: usize,
    seed: u64,
) -> Result<HypervolumeEstimate> {
    let m = reference.len();
    check_len(m, bound.len())?;
    for (axis, (&low, &high)) in reference.iter().zip(bound).enumerate() {
        if high <= low {
            return Err(Error::DegenerateDomain { axis, low, high });
        }
    }
    if samples == 0 {
        return Err(Error::Input("hypervolume_mc needs at least one sample".into()));
    }
    for p in front {
        let p = p.as_ref();
        check_len(m, p.len())?;
        if !weakly_dominates(bound, p) {
            return Err(Error::Input(format!(
                "sampling bound {bound:?} does not cover front point {p:?}"
            )));
        }
    }
    if front.is_empty() {
        return Ok(HypervolumeEstimate {
            estimate: 0.0,
            std_error: 0.0,
        });
    }

    let box_volume: f64 = reference.iter().zip(bound).map(|(l, h)| h - l).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for (k, s) in sample.iter_mut().enumerate() {
            *s = rng.random_range(reference[k]..bound[k]);
        }
        if front.iter().any(|p| weakly_dominates(p.as_ref(), &sample)) {
            hits += 1;
        }
    }
    let n = samples as f64;
    let frac = hits as f64 / n;
    Ok(HypervolumeEstimate {
        estimate: box_volume * frac,
        std_error: box_volume * (frac * (1.0 - frac) / n).sqrt(),
    })
}

/// Which crowding convention to use on the boundary of a front.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrowdingMode {
    /// Boundary points take the distance to their single neighbour; a
    /// singleton front gets weight 1.
    Selection,
    /// Boundary points get `+inf` so they are never evicted.
    Replacement,
}

/// Average Manhattan distance of each point to its neighbours along the first
/// objective, returned in input order. Raw objective units.
pub fn crowding_distances<S: AsRef<[f64]>>(front: &[S], mode: CrowdingMode) -> Result<Vec<f64>> {
    crowding_distances_with(front, mode, false)
}

/// As [`crowding_distances`], optionally dividing each objective by the front's
/// range in that objective.
pub fn crowding_distances_with<S: AsRef<[f64]>>(
    front: &[S],
    mode: CrowdingMode,
    normalize: bool,
) -> Result<Vec<f64>> {
    let n = front.len();
    match uniform_dim(front)? {
        None => return Ok(Vec::new()),
        Some(2) => {}
        Some(m) => return Err(Error::UnsupportedDimension(m)),
    }
    if n == 1 {
        return Ok(vec![match mode {
            CrowdingMode::Selection => 1.0,
            CrowdingMode::Replacement => f64::INFINITY,
        }]);
    }

    let mut scale = [1.0f64; 2];
    if normalize {
        for (k, s) in scale.iter_mut().enumerate() {
            let (lo, hi) = front.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                let v = p.as_ref()[k];
                (lo.min(v), hi.max(v))
            });
            if hi > lo {
                *s = hi - lo;
            }
        }
    }
    let manhattan = |i: usize, j: usize| -> f64 {
        let (a, b) = (front[i].as_ref(), front[j].as_ref());
        (a[0] - b[0]).abs() / scale[0] + (a[1] - b[1]).abs() / scale[1]
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (front[i].as_ref(), front[j].as_ref());
        a[0].total_cmp(&b[0])
            .then(b[1].total_cmp(&a[1]))
            .then(i.cmp(&j))
    });

    let mut out = vec![0.0; n];
    for (pos, &idx) in order.iter().enumerate() {
        out[idx] = if pos == 0 || pos == n - 1 {
            match mode {
                CrowdingMode::Replacement => f64::INFINITY,
                CrowdingMode::Selection => {
                    let neighbour = if pos == 0 { order[1] } else { order[n - 2] };
                    manhattan(idx, neighbour)
                }
            }
        } else {
            0.5 * (manhattan(idx, order[pos - 1]) + manhattan(idx, order[pos + 1]))
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn brute_front(points: &[Vec<f64>]) -> Vec<usize> {
        (0..points.len())
            .filter(|&i| {
                !(0..points.len()).any(|j| {
                    let (a, b) = (&points[j], &points[i]);
                    a.iter().zip(b).all(|(x, y)| x >= y) && a.iter().zip(b).any(|(x, y)| x > y)
                })
            })
            .collect()
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&[2.0, 3.0], &[1.0, 3.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(matches!(
            dominates(&[1.0], &[1.0, 2.0]),
            Err(Error::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn front_examples() {
        let pts = vec![vec![1.0, 3.0], vec![2.0, 2.0], vec![3.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(extract_front(&pts).unwrap(), brute_front(&pts));
        assert_eq!(extract_front(&pts).unwrap(), vec![0, 1, 2]);
        assert_eq!(extract_front(&[vec![5.0, 5.0]]).unwrap(), vec![0]);
        assert_eq!(extract_front(&[[1.0, 1.0], [1.0, 1.0]]).unwrap(), vec![0, 1]);
        assert!(extract_front::<Vec<f64>>(&[]).unwrap().is_empty());
        assert!(extract_front(&[vec![1.0, 1.0], vec![1.0]]).is_err());
    }

    #[test]
    fn sort_examples() {
        let pts = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0], [1.0, 1.0], [0.0, 0.0]];
        assert_eq!(
            non_dominated_sort(&pts).unwrap(),
            vec![vec![0, 1, 2], vec![3], vec![4]]
        );
        let same = [[1.0, 1.0]; 4];
        assert_eq!(non_dominated_sort(&same).unwrap(), vec![vec![0, 1, 2, 3]]);
        let chain = [[3.0, 3.0], [2.0, 2.0], [1.0, 1.0]];
        assert_eq!(
            non_dominated_sort(&chain).unwrap(),
            vec![vec![0], vec![1], vec![2]]
        );
    }

    /// Area of the union of rectangles by sweeping elementary cells of the
    /// coordinate grid.
    fn grid_hypervolume(front: &[[f64; 2]], r: [f64; 2]) -> f64 {
        let mut xs: Vec<f64> = front.iter().map(|p| p[0]).chain([r[0]]).collect();
        let mut ys: Vec<f64> = front.iter().map(|p| p[1]).chain([r[1]]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let mut area = 0.0;
        for wx in xs.windows(2) {
            for wy in ys.windows(2) {
                let (cx, cy) = ((wx[0] + wx[1]) / 2.0, (wy[0] + wy[1]) / 2.0);
                if cx > r[0] && cy > r[1] && front.iter().any(|p| p[0] >= cx && p[1] >= cy) {
                    area += (wx[1] - wx[0]) * (wy[1] - wy[0]);
                }
            }
        }
        area
    }

    #[test]
    fn hypervolume_examples() {
        let front = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]];
        assert_eq!(grid_hypervolume(&front, [0.0, 0.0]), 6.0);
        assert_eq!(hypervolume_2d(&front, &[0.0, 0.0]).unwrap().volume, 6.0);
        assert_eq!(hypervolume_2d(&[[2.0, 3.0]], &[0.0, 0.0]).unwrap().volume, 6.0);
        let empty: [[f64; 2]; 0] = [];
        assert_eq!(hypervolume_2d(&empty, &[0.0, 0.0]).unwrap().volume, 0.0);
    }

    #[test]
    fn hypervolume_flags_points_below_reference() {
        let hv = hypervolume_2d(&[[-1.0, -1.0], [2.0, 3.0], [5.0, -0.5]], &[0.0, 0.0]).unwrap();
        assert_eq!(hv.volume, 6.0);
        assert_eq!(hv.below_reference, vec![0, 2]);
        assert!(matches!(
            hypervolume_2d(&[[1.0, 1.0, 1.0]], &[0.0, 0.0, 0.0]),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    #[test]
    fn monte_carlo_examples() {
        let est = hypervolume_mc(&[[2.0, 3.0]], &[0.0, 0.0], &[4.0, 4.0], 1_000_000, 7).unwrap();
        assert!((est.estimate - 6.0).abs() <= 3.0 * est.std_error, "{est:?}");
        let tri = [[1.0, 3.0], [2.0, 2.0], [3.0, 1.0]];
        let est = hypervolume_mc(&tri, &[0.0, 0.0], &[3.0, 3.0], 1_000_000, 11).unwrap();
        assert!((est.estimate - 6.0).abs() <= 3.0 * est.std_error, "{est:?}");
        let empty: [[f64; 2]; 0] = [];
        let est = hypervolume_mc(&empty, &[0.0, 0.0], &[1.0, 1.0], 10, 0).unwrap();
        assert_eq!(est.estimate, 0.0);
        assert!(matches!(
            hypervolume_mc(&empty, &[0.0, 0.0], &[1.0, 0.0], 10, 0),
            Err(Error::DegenerateDomain { axis: 1, .. })
        ));
        let a = hypervolume_mc(&tri, &[0.0, 0.0], &[3.0, 3.0], 1000, 5).unwrap();
        let b = hypervolume_mc(&tri, &[0.0, 0.0], &[3.0, 3.0], 1000, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn crowding_examples() {
        let front = [[0.0, 4.0], [1.0, 2.0], [3.0, 1.0]];
        assert_eq!(
            crowding_distances(&front, CrowdingMode::Selection).unwrap(),
            vec![3.0, 3.0, 3.0]
        );
        assert_eq!(
            crowding_distances(&front, CrowdingMode::Replacement).unwrap(),
            vec![f64::INFINITY, 3.0, f64::INFINITY]
        );
        assert_eq!(
            crowding_distances(&[[5.0, 5.0]], CrowdingMode::Replacement).unwrap(),
            vec![f64::INFINITY]
        );
        assert_eq!(
            crowding_distances(&[[5.0, 5.0]], CrowdingMode::Selection).unwrap(),
            vec![1.0]
        );
        // input order is preserved
        let shuffled = [[3.0, 1.0], [0.0, 4.0], [1.0, 2.0]];
        assert_eq!(
            crowding_distances(&shuffled, CrowdingMode::Replacement).unwrap(),
            vec![f64::INFINITY, f64::INFINITY, 3.0]
        );
    }

    #[test]
    fn crowding_normalized_divides_by_range() {
        let front = [[0.0, 4.0], [1.0, 2.0], [3.0, 1.0]];
        let d = crowding_distances_with(&front, CrowdingMode::Selection, true).unwrap();
        // ranges are 3 and 3, so everything scales by 1/3
        for v in d {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            crowding_distances(&[[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]], CrowdingMode::Selection),
            Err(Error::UnsupportedDimension(3))
        ));
    }

    fn arb_points(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        // small integer grid so ties and duplicates actually show up
        prop::collection::vec(prop::collection::vec((0i32..8).prop_map(f64::from), 2), 0..max)
    }

    fn arb_front(max: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 1..max).prop_map(|pts| {
            let v: Vec<Vec<f64>> = pts.iter().map(|&(a, b)| vec![a, b]).collect();
            let keep = brute_front(&v);
            keep.into_iter().map(|i| [v[i][0], v[i][1]]).collect()
        })
    }

    proptest! {
        #[test]
        fn dominance_is_antisymmetric_and_irreflexive(
            a in prop::collection::vec(-5.0f64..5.0, 3),
            b in prop::collection::vec(-5.0f64..5.0, 3),
        ) {
            prop_assert!(!dominates(&a, &a).unwrap());
            if dominates(&a, &b).unwrap() {
                prop_assert!(!dominates(&b, &a).unwrap());
            }
        }

        #[test]
        fn front_matches_brute_force(pts in arb_points(64)) {
            prop_assert_eq!(extract_front(&pts).unwrap(), brute_front(&pts));
        }

        #[test]
        fn sort_is_a_layered_partition(pts in arb_points(48)) {
            let fronts = non_dominated_sort(&pts).unwrap();
            let mut all: Vec<usize> = fronts.iter().flatten().copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..pts.len()).collect::<Vec<_>>());
            for (i, fi) in fronts.iter().enumerate() {
                for fj in &fronts[i + 1..] {
                    for &a in fi {
                        for &b in fj {
                            prop_assert!(!dominates(&pts[b], &pts[a]).unwrap());
                        }
                    }
                }
            }
        }

        #[test]
        fn hypervolume_matches_grid_oracle(front in arb_front(20)) {
            let exact = hypervolume_2d(&front, &[0.0, 0.0]).unwrap().volume;
            let grid = grid_hypervolume(&front, [0.0, 0.0]);
            prop_assert!((exact - grid).abs() <= 1e-9 * grid.max(1.0));
        }

        #[test]
        fn hypervolume_is_monotone(front in arb_front(20), extra in (0.0f64..10.0, 0.0f64..10.0)) {
            let before = hypervolume_2d(&front, &[0.0, 0.0]).unwrap().volume;
            let mut grown = front.clone();
            grown.push([extra.0, extra.1]);
            let after = hypervolume_2d(&grown, &[0.0, 0.0]).unwrap().volume;
            prop_assert!(after >= before - 1e-12);
            let shrunk = &front[1..];
            let smaller = hypervolume_2d(shrunk, &[0.0, 0.0]).unwrap().volume;
            prop_assert!(smaller <= before + 1e-12);
        }

        #[test]
        fn hypervolume_is_translation_invariant(front in arb_front(20), dx in -50.0f64..50.0, dy in -50.0f64..50.0) {
            let base = hypervolume_2d(&front, &[0.0, 0.0]).unwrap().volume;
            let moved: Vec<[f64; 2]> = front.iter().map(|p| [p[0] + dx, p[1] + dy]).collect();
            let shifted = hypervolume_2d(&moved, &[dx, dy]).unwrap().volume;
            prop_assert!((base - shifted).abs() <= 1e-9 * base.max(1.0));
        }

        #[test]
        fn replacement_crowding_marks_exactly_the_boundaries(front in arb_front(20)) {
            prop_assume!(front.len() >= 2);
            let d = crowding_distances(&front, CrowdingMode::Replacement).unwrap();
            let lo = front.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = front.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            for (p, dist) in front.iter().zip(&d) {
                prop_assert_eq!(dist.is_infinite(), p[0] == lo || p[0] == hi);
            }
        }
    }

    #[test]
    fn mc_agrees_with_exact_on_random_fronts() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for case in 0..10 {
            let n = rng.random_range(1..=20);
            let raw: Vec<Vec<f64>> = (0..n)
                .map(|_| vec![rng.random_range(0.0..5.0), rng.random_range(0.0..5.0)])
                .collect();
            let front: Vec<&Vec<f64>> = brute_front(&raw).into_iter().map(|i| &raw[i]).collect();
            let exact = hypervolume_2d(&front, &[0.0, 0.0]).unwrap().volume;
            let est = hypervolume_mc(&front, &[0.0, 0.0], &[5.0, 5.0], 100_000, case).unwrap();
            assert!((exact - est.estimate).abs() <= 4.0 * est.std_error, "case {case}");
        }
    }
}
