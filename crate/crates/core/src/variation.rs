//! Genetic variation (Iso+LineDD) and the split of a batch between genetic and
//! policy-gradient offspring.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariationConfig {
    /// Isotropic Gaussian scale.
    #[serde(default = "default_iso_sigma")]
    pub iso_sigma: f64,
    /// Scale of the noise along the parent-to-parent line.
    #[serde(default = "default_line_sigma")]
    pub line_sigma: f64,
    /// Optional per-gene clipping box.
    #[serde(default)]
    pub genotype_bounds: Option<(f64, f64)>,
}

fn default_iso_sigma() -> f64 {
    0.005
}

fn default_line_sigma() -> f64 {
    0.05
}

impl Default for VariationConfig {
    fn default() -> Self {
        Self {
            iso_sigma: default_iso_sigma(),
            line_sigma: default_line_sigma(),
            genotype_bounds: None,
        }
    }
}

impl VariationConfig {
    pub fn validate(&self) -> Result<()> {
        use crate::error::Error;
        if !(self.iso_sigma >= 0.0 && self.line_sigma >= 0.0) {
            return Err(Error::Config("variation sigmas must be non-negative".into()));
        }
        if let Some((lo, hi)) = self.genotype_bounds {
            if !(lo < hi) {
                return Err(Error::Config(format!("genotype bounds [{lo}, {hi}] are empty")));
            }
        }
        Ok(())
    }
}

/// `x + iso_sigma * eps + line_sigma * xi * (y - x)` with `eps` an independent
/// standard normal per gene and `xi` one shared standard normal.
pub fn iso_line_dd<R: Rng + ?Sized>(x: &[f64], y: &[f64], cfg: &VariationConfig, rng: &mut R) -> Result<Vec<f64>> {
    check_len(x.len(), y.len())?;
    let xi: f64 = rng.sample(StandardNormal);
    let child = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| {
            let eps: f64 = rng.sample(StandardNormal);
            let v = a + cfg.iso_sigma * eps + cfg.line_sigma * xi * (b - a);
            match cfg.genotype_bounds {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            }
        })
        .collect();
    Ok(child)
}

/// How a batch is divided between genetic variation and per-objective
/// policy-gradient variation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSplit {
    pub ga: usize,
    pub pg: Vec<usize>,
}

impl BatchSplit {
    pub fn total(&self) -> usize {
        self.ga + self.pg.iter().sum::<usize>()
    }
}

/// Half the batch (rounded up) goes to GA, the rest is shared equally between
/// `objectives` PG emitters, and any leftover returns to GA.
pub fn split_batch(batch: usize, objectives: usize) -> BatchSplit {
    if objectives == 0 {
        return BatchSplit { ga: batch, pg: Vec::new() };
    }
    let half = batch.div_ceil(2);
    let per = (batch - half) / objectives;
    let ga = batch - per * objectives;
    if per == 0 {
        log::warn!("batch of {batch} leaves no policy-gradient offspring for {objectives} objective(s)");
    }
    BatchSplit {
        ga,
        pg: vec![per; objectives],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(iso: f64, line: f64) -> VariationConfig {
        VariationConfig {
            iso_sigma: iso,
            line_sigma: line,
            genotype_bounds: None,
        }
    }

    #[test]
    fn degenerate_operators_return_the_parent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = vec![0.3, -1.2, 4.0];
        let y = vec![1.0, 2.0, 3.0];
        assert_eq!(iso_line_dd(&x, &y, &cfg(0.0, 0.0), &mut rng).unwrap(), x);
        assert_eq!(iso_line_dd(&x, &x, &cfg(0.0, 0.7), &mut rng).unwrap(), x);
        assert!(iso_line_dd(&x, &y[..2], &cfg(0.0, 0.0), &mut rng).is_err());
    }

    #[test]
    fn isotropic_noise_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 100_000;
        let x = [0.5, -0.5];
        let c = cfg(0.005, 0.0);
        let mut sum = [0.0; 2];
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let child = iso_line_dd(&x, &x, &c, &mut rng).unwrap();
            for k in 0..2 {
                let d = child[k] - x[k];
                sum[k] += d;
                sq[k] += d * d;
            }
        }
        for k in 0..2 {
            let mean = sum[k] / n as f64;
            let std = (sq[k] / n as f64 - mean * mean).sqrt();
            assert!(mean.abs() <= 4.0 * 0.005 / (n as f64).sqrt(), "mean {mean}");
            assert!((std / 0.005 - 1.0).abs() < 0.02, "std {std}");
        }
    }

    #[test]
    fn split_examples() {
        assert_eq!(split_batch(256, 2), BatchSplit { ga: 128, pg: vec![64, 64] });
        assert_eq!(split_batch(10, 3), BatchSplit { ga: 7, pg: vec![1, 1, 1] });
        assert_eq!(split_batch(2, 2), BatchSplit { ga: 2, pg: vec![0, 0] });
        assert_eq!(split_batch(9, 0), BatchSplit { ga: 9, pg: vec![] });
    }

    proptest! {
        #[test]
        fn split_sums_to_batch(b in 2usize..2000, m in 1usize..8) {
            let s = split_batch(b, m);
            prop_assert_eq!(s.total(), b);
            prop_assert!(s.pg.iter().all(|&p| p == s.pg[0]));
            prop_assert!(s.ga >= b / 2);
        }

        #[test]
        fn children_have_parent_length_and_respect_bounds(
            x in prop::collection::vec(-3.0f64..3.0, 1..30),
            seed in any::<u64>(),
        ) {
            let y: Vec<f64> = x.iter().map(|v| -v).collect();
            let c = VariationConfig { iso_sigma: 0.5, line_sigma: 2.0, genotype_bounds: Some((-1.0, 1.0)) };
            let a = iso_line_dd(&x, &y, &c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let b = iso_line_dd(&x, &y, &c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(a.len(), x.len());
            prop_assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
            prop_assert_eq!(a, b);
        }
    }
}
