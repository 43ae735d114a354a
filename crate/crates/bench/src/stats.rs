//! Paired significance testing and order statistics.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{BenchError, Result};

/// Largest number of non-zero differences for which the null distribution is
/// enumerated exactly.
pub const EXACT_LIMIT: usize = 12;
pub const MIN_SAMPLES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wilcoxon {
    /// Sum of the ranks of the positive differences `a - b`.
    pub w_plus: f64,
    /// Non-zero differences used.
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped and tied magnitudes get average ranks. With
/// at most [`EXACT_LIMIT`] non-zero differences the p-value comes from the
/// full null distribution of `W+`; otherwise from the normal approximation
/// with tie and continuity corrections. All-zero differences give `p = 1`.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<Wilcoxon> {
    if a.len() != b.len() {
        return Err(BenchError::Usage(format!(
            "paired samples differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(BenchError::Usage("samples must be finite".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n == 0 {
        return Ok(Wilcoxon {
            w_plus: 0.0,
            n: 0,
            p_value: 1.0,
            exact: true,
        });
    }
    if a.len() < MIN_SAMPLES {
        return Err(BenchError::Usage(format!(
            "the signed-rank test needs at least {MIN_SAMPLES} pairs, got {}",
            a.len()
        )));
    }

    // doubled average ranks keep tied ranks integral
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diffs[i].abs().total_cmp(&diffs[j].abs()));
    let mut rank2 = vec![0u64; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && diffs[order[j + 1]].abs() == diffs[order[i]].abs() {
            j += 1;
        }
        let avg2 = (i + j + 2) as u64; // (i+1 + j+1) / 2, doubled
        for &k in &order[i..=j] {
            rank2[k] = avg2;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    let w2: u64 = (0..n).filter(|&k| diffs[k] > 0.0).map(|k| rank2[k]).sum();
    let w_plus = w2 as f64 / 2.0;

    if n <= EXACT_LIMIT {
        let total = 1u64 << n;
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0..total {
            let s: u64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| rank2[k]).sum();
            le += (s <= w2) as u64;
            ge += (s >= w2) as u64;
        }
        let p = 2.0 * le.min(ge) as f64 / total as f64;
        return Ok(Wilcoxon {
            w_plus,
            n,
            p_value: p.min(1.0),
            exact: true,
        });
    }

    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let normal = Normal::standard();
    let p = 2.0 * (1.0 - normal.cdf(z));
    Ok(Wilcoxon {
        w_plus,
        n,
        p_value: p.min(1.0),
        exact: false,
    })
}

/// Holm step-down adjustment; results are in input order.
pub fn holm_bonferroni(p: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(BenchError::Usage(format!("p-value {bad} lies outside [0, 1]")));
    }
    let m = p.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p[i].total_cmp(&p[j]).then(i.cmp(&j)));
    let mut out = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p[i]).min(1.0));
        out[i] = running;
    }
    Ok(out)
}

/// Linearly interpolated quantile of unsorted data (`q` in `[0, 1]`).
pub fn quantile(data: &[f64], q: f64) -> Option<f64> {
    if data.is_empty() {
        return None;
    }
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(data: &[f64]) -> Option<f64> {
    quantile(data, 0.5)
}
