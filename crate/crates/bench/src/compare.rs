//! Seed-paired comparison of groups of runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use moqd_core::MetricsRecord;

use crate::error::{BenchError, Result};
use crate::run::{read_metrics, RunManifest, MANIFEST_FILE, METRICS_FILE};
use crate::stats::{holm_bonferroni, median, quantile, wilcoxon_signed_rank};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MoqdScore,
    GlobalHv,
    MaxSum,
    Coverage,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MoqdScore => "moqd_score",
            Metric::GlobalHv => "global_hv",
            Metric::MaxSum => "max_sum",
            Metric::Coverage => "coverage",
        }
    }

    /// `max_sum` of an empty archive reads as `-inf`.
    pub fn value(self, r: &MetricsRecord) -> f64 {
        match self {
            Metric::MoqdScore => r.moqd_score,
            Metric::GlobalHv => r.global_hypervolume,
            Metric::MaxSum => r.max_sum.unwrap_or(f64::NEG_INFINITY),
            Metric::Coverage => r.coverage,
        }
    }
}

impl FromStr for Metric {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::MoqdScore, Metric::GlobalHv, Metric::MaxSum, Metric::Coverage]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                BenchError::Usage(format!(
                    "unknown metric `{s}` (expected moqd_score, global_hv, max_sum or coverage)"
                ))
            })
    }
}

#[derive(Debug, Clone)]
pub struct RunData {
    pub dir: PathBuf,
    pub seed: u64,
    pub label: String,
    pub records: Vec<MetricsRecord>,
}

impl RunData {
    /// Reads `dir/metrics.csv` and, when present, `dir/manifest.json`.
    /// Without a manifest the seed is taken from a trailing number in the
    /// directory name and the label from the parent directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let records = read_metrics(&dir.join(METRICS_FILE))?;
        if records.is_empty() {
            return Err(BenchError::Schema {
                path: dir.join(METRICS_FILE),
                message: "no metric rows".into(),
            });
        }
        let manifest_path = dir.join(MANIFEST_FILE);
        let (seed, label) = if manifest_path.exists() {
            let m = RunManifest::read(&manifest_path)?;
            (m.seed, m.label)
        } else {
            let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let digits: String = name.chars().rev().take_while(char::is_ascii_digit).collect();
            let seed = digits.chars().rev().collect::<String>().parse().map_err(|_| BenchError::Schema {
                path: dir.to_path_buf(),
                message: "no manifest.json and no seed number in the directory name".into(),
            })?;
            let label = dir
                .parent()
                .and_then(Path::file_name)
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or(name);
            (seed, label)
        };
        Ok(Self {
            dir: dir.to_path_buf(),
            seed,
            label,
            records,
        })
    }
}

/// Replications of one setup.
#[derive(Debug, Clone)]
pub struct Group {
    pub name: String,
    pub runs: Vec<RunData>,
}

impl Group {
    /// A run directory is a group of one; any other directory groups the run
    /// directories directly inside it.
    pub fn load(path: &Path) -> Result<Self> {
        let runs = if path.join(METRICS_FILE).is_file() {
            vec![RunData::load(path)?]
        } else {
            let entries = std::fs::read_dir(path).map_err(|e| BenchError::io(path, e))?;
            let mut dirs: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.join(METRICS_FILE).is_file())
                .collect();
            dirs.sort();
            dirs.iter().map(|d| RunData::load(d)).collect::<Result<Vec<_>>>()?
        };
        if runs.is_empty() {
            return Err(BenchError::Usage(format!("{} holds no run directories", path.display())));
        }
        let mut seeds: Vec<u64> = runs.iter().map(|r| r.seed).collect();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return Err(BenchError::Usage(format!("{} repeats a seed", path.display())));
        }
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .filter(|n| !n.is_empty() && runs.len() > 1)
            .unwrap_or_else(|| runs[0].label.clone());
        Ok(Self { name, runs })
    }

    pub fn seeds(&self) -> Vec<u64> {
        let mut s: Vec<u64> = self.runs.iter().map(|r| r.seed).collect();
        s.sort_unstable();
        s
    }

    fn final_by_seed(&self, metric: Metric) -> BTreeMap<u64, f64> {
        self.runs
            .iter()
            .map(|r| (r.seed, metric.value(r.records.last().expect("non-empty"))))
            .collect()
    }

    /// Median over replications at every evaluation count shared by all runs.
    pub fn median_curve(&self, metric: Metric) -> Vec<(u64, f64)> {
        let first = &self.runs[0].records;
        first
            .iter()
            .enumerate()
            .filter_map(|(i, rec)| {
                let vals: Option<Vec<f64>> = self
                    .runs
                    .iter()
                    .map(|r| r.records.get(i).filter(|x| x.evals == rec.evals).map(|x| metric.value(x)))
                    .collect();
                vals.map(|v| (rec.evals, median(&v).expect("non-empty")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub name: String,
    pub runs: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub final_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub pairs: usize,
    pub wins: usize,
    pub median_difference: f64,
    /// `None` when there are too few pairs for the test.
    pub p_value: Option<f64>,
    pub p_holm: Option<f64>,
    pub efficiency_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub metric: Metric,
    pub summaries: Vec<Summary>,
    pub comparisons: Vec<Comparison>,
}

/// How many times fewer evaluations `a` needs than `b`.
///
/// If `a` ends at least as high as `b`, this is `b`'s total budget divided by
/// the first evaluation count at which `a`'s curve reaches `b`'s final value.
/// Otherwise it is the mirrored quantity inverted, so swapping the arguments
/// inverts the ratio. Equal final values give 1.
pub fn efficiency_ratio(a: &[(u64, f64)], b: &[(u64, f64)]) -> Option<f64> {
    let (&(a_end, a_final), &(b_end, b_final)) = (a.last()?, b.last()?);
    let first_reaching = |curve: &[(u64, f64)], level: f64| curve.iter().find(|p| p.1 >= level).map(|p| p.0);
    if a_final == b_final {
        Some(1.0)
    } else if a_final > b_final {
        first_reaching(a, b_final).map(|e| b_end as f64 / e as f64)
    } else {
        first_reaching(b, a_final).map(|e| e as f64 / a_end as f64)
    }
}

fn summarize(g: &Group, metric: Metric) -> Summary {
    let finals: Vec<f64> = g.final_by_seed(metric).into_values().collect();
    Summary {
        name: g.name.clone(),
        runs: g.runs.len(),
        median: median(&finals).expect("non-empty"),
        q1: quantile(&finals, 0.25).expect("non-empty"),
        q3: quantile(&finals, 0.75).expect("non-empty"),
        final_evals: g.runs[0].records.last().expect("non-empty").evals,
    }
}

fn pair(a: &Group, b: &Group, metric: Metric) -> Result<Comparison> {
    let (fa, fb) = (a.final_by_seed(metric), b.final_by_seed(metric));
    let missing_b: Vec<u64> = fa.keys().filter(|s| !fb.contains_key(s)).copied().collect();
    let missing_a: Vec<u64> = fb.keys().filter(|s| !fa.contains_key(s)).copied().collect();
    if !missing_a.is_empty() || !missing_b.is_empty() {
        return Err(BenchError::Usage(format!(
            "cannot pair `{}` with `{}`: seeds {missing_b:?} missing from `{}`, seeds {missing_a:?} missing from `{}`",
            a.name, b.name, b.name, a.name
        )));
    }
    let xs: Vec<f64> = fa.values().copied().collect();
    let ys: Vec<f64> = fb.values().copied().collect();
    let diffs: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| x - y).collect();
    let p_value = match wilcoxon_signed_rank(&xs, &ys) {
        Ok(w) => Some(w.p_value),
        Err(BenchError::Usage(msg)) => {
            log::warn!("{} vs {}: {msg}", a.name, b.name);
            None
        }
        Err(e) => return Err(e),
    };
    Ok(Comparison {
        a: a.name.clone(),
        b: b.name.clone(),
        pairs: xs.len(),
        wins: diffs.iter().filter(|d| **d > 0.0).count(),
        median_difference: median(&diffs).expect("non-empty"),
        p_value,
        p_holm: None,
        efficiency_ratio: efficiency_ratio(&a.median_curve(metric), &b.median_curve(metric)),
    })
}

/// Summarises every group and compares the first group against each of the
/// others, Holm-adjusting the p-values across those comparisons.
pub fn compare(groups: &[Group], metric: Metric) -> Result<Report> {
    if groups.is_empty() {
        return Err(BenchError::Usage("nothing to compare".into()));
    }
    let summaries = groups.iter().map(|g| summarize(g, metric)).collect();
    let mut comparisons = groups[1..]
        .iter()
        .map(|g| pair(&groups[0], g, metric))
        .collect::<Result<Vec<_>>>()?;
    let tested: Vec<usize> = (0..comparisons.len()).filter(|&i| comparisons[i].p_value.is_some()).collect();
    let raw: Vec<f64> = tested.iter().map(|&i| comparisons[i].p_value.expect("tested")).collect();
    for (&i, adj) in tested.iter().zip(holm_bonferroni(&raw)?) {
        comparisons[i].p_holm = Some(adj);
    }
    Ok(Report {
        metric,
        summaries,
        comparisons,
    })
}

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map(|x| format!("{x:.digits$}")).unwrap_or_else(|| "n/a".into())
}

impl Report {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let w = self.summaries.iter().map(|x| x.name.len()).max().unwrap_or(4).max(5);
        let _ = writeln!(s, "metric: {}", self.metric.name());
        let _ = writeln!(s, "{:<w$}  {:>4}  {:>14}  {:>14}  {:>14}", "group", "runs", "median", "q1", "q3");
        for x in &self.summaries {
            let _ = writeln!(
                s,
                "{:<w$}  {:>4}  {:>14.4}  {:>14.4}  {:>14.4}",
                x.name, x.runs, x.median, x.q1, x.q3
            );
        }
        if !self.comparisons.is_empty() {
            let _ = writeln!(s);
            for c in &self.comparisons {
                let _ = writeln!(
                    s,
                    "{} vs {}: wins {}/{}, median diff {:.4}, p {}, p_holm {}, efficiency ratio {}",
                    c.a,
                    c.b,
                    c.wins,
                    c.pairs,
                    c.median_difference,
                    opt(c.p_value, 4),
                    opt(c.p_holm, 4),
                    opt(c.efficiency_ratio, 3)
                );
            }
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,a,b,runs,median,q1,q3,wins,median_difference,p_value,p_holm,efficiency_ratio\n");
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for x in &self.summaries {
            let _ = writeln!(s, "summary,{},,{},{},{},{},,,,,", x.name, x.runs, x.median, x.q1, x.q3);
        }
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "comparison,{},{},{},,,,{},{},{},{},{}",
                c.a,
                c.b,
                c.pairs,
                c.wins,
                c.median_difference,
                cell(c.p_value),
                cell(c.p_holm),
                cell(c.efficiency_ratio)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(seed: u64, label: &str, values: &[f64]) -> RunData {
        RunData {
            dir: PathBuf::new(),
            seed,
            label: label.into(),
            records: values
                .iter()
                .enumerate()
                .map(|(i, &v)| MetricsRecord {
                    evals: 10 * (i as u64 + 1),
                    moqd_score: v,
                    global_hypervolume: v,
                    max_sum: None,
                    coverage: 1.0,
                    seconds: 0.0,
                })
                .collect(),
        }
    }

    fn group(name: &str, per_seed: &[Vec<f64>]) -> Group {
        Group {
            name: name.into(),
            runs: per_seed.iter().enumerate().map(|(s, v)| run(s as u64, name, v)).collect(),
        }
    }

    #[test]
    fn self_comparison() {
        let g = group("a", &vec![vec![1.0, 2.0, 3.0]; 5]);
        let r = compare(&[g.clone(), g], Metric::MoqdScore).unwrap();
        let c = &r.comparisons[0];
        assert_eq!(c.p_value, Some(1.0));
        assert_eq!(c.efficiency_ratio, Some(1.0));
        assert_eq!(c.median_difference, 0.0);
    }

    #[test]
    fn constant_separation() {
        let a = group("a", &vec![vec![10.0]; 5]);
        let b = group("b", &vec![vec![5.0]; 5]);
        let r = compare(&[a, b], Metric::MoqdScore).unwrap();
        let c = &r.comparisons[0];
        assert_eq!(c.median_difference, 5.0);
        assert_eq!(c.wins, 5);
        // one tie class: W+ = 15 out of 15, p = 2 / 32
        assert_eq!(c.p_value, Some(0.0625));
    }

    #[test]
    fn efficiency_ratio_from_curve_intersection() {
        let a: Vec<(u64, f64)> = (1..=100).map(|e| (e, (e as f64 * 4.0).min(120.0))).collect();
        let b: Vec<(u64, f64)> = (1..=100).map(|e| (e, e as f64)).collect();
        assert_eq!(efficiency_ratio(&a, &b), Some(4.0));
        assert_eq!(efficiency_ratio(&b, &a), Some(0.25));
    }

    #[test]
    fn seed_mismatch_is_reported() {
        let a = group("a", &vec![vec![1.0]; 5]);
        let mut b = group("b", &vec![vec![1.0]; 5]);
        b.runs[4].seed = 9;
        let msg = compare(&[a, b], Metric::MoqdScore).unwrap_err().to_string();
        assert!(msg.contains("[4]") && msg.contains("[9]"), "{msg}");
    }

    #[test]
    fn holm_spans_comparisons() {
        let a = group("a", &vec![vec![10.0]; 5]);
        let b = group("b", &vec![vec![5.0]; 5]);
        let c = group("c", &vec![vec![4.0]; 5]);
        let r = compare(&[a, b, c], Metric::MoqdScore).unwrap();
        assert!(r.comparisons.iter().all(|c| c.p_holm == Some(0.125)));
        assert!(r.to_text().contains("a vs c"));
        assert_eq!(r.to_csv().lines().count(), 1 + 3 + 2);
    }

    #[test]
    fn metric_names() {
        assert_eq!("global_hv".parse::<Metric>().unwrap(), Metric::GlobalHv);
        assert_eq!("hv".parse::<Metric>().unwrap_err().exit_code(), 2);
    }
}
