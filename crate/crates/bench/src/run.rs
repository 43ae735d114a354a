//! Run directories: metrics.csv, archive.jsonl, manifest.json, config.toml.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use moqd_core::{AlgorithmConfig, MetricsRecord, MoqdArchive, ReplacementPolicy, RunOutput, Task};
use serde::{Deserialize, Serialize};

use crate::config::{config_hash, load_config, run_label, to_toml};
use crate::error::{BenchError, Result};

pub const METRICS_FILE: &str = "metrics.csv";
pub const ARCHIVE_FILE: &str = "archive.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.toml";
pub const METRICS_HEADER: [&str; 6] = ["evals", "moqd_score", "global_hv", "max_sum", "coverage", "seconds"];

pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("MOQD_GIT_DESCRIBE"), ")");

/// Version string baked in at build time.
pub fn version() -> String {
    format!("moqd-bench {VERSION}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outputs {
    pub metrics: String,
    pub archive: String,
    pub manifest: String,
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub algorithm: String,
    /// Grouping name; differs from `algorithm` for restricted MO-PGA runs.
    pub label: String,
    pub env: String,
    pub seed: u64,
    pub config_hash: String,
    pub reference_point: Vec<f64>,
    pub iterations: usize,
    pub batch_size: usize,
    pub outputs: Outputs,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| BenchError::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| BenchError::Runtime(format!("{}: {e}", path.display()));
    w.write_record(METRICS_HEADER).map_err(wrap)?;
    for r in records {
        w.write_record([
            r.evals.to_string(),
            fmt_f64(r.moqd_score),
            fmt_f64(r.global_hypervolume),
            r.max_sum.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.coverage),
            fmt_f64(r.seconds),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
}

/// Reads a metrics file, insisting on the exact header and increasing
/// evaluation counts.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    let schema = |message: String| BenchError::Schema {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers().map_err(|e| schema(e.to_string()))?.clone();
    if header.iter().ne(METRICS_HEADER) {
        return Err(schema(format!(
            "expected header `{}`, found `{}`",
            METRICS_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out: Vec<MetricsRecord> = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row.map_err(|e| schema(e.to_string()))?;
        let line = i + 2;
        let num = |k: usize| -> Result<f64> {
            row[k]
                .parse::<f64>()
                .map_err(|_| schema(format!("line {line}: bad `{}` value `{}`", METRICS_HEADER[k], &row[k])))
        };
        let evals: u64 = row[0]
            .parse()
            .map_err(|_| schema(format!("line {line}: bad `evals` value `{}`", &row[0])))?;
        if out.last().is_some_and(|p| p.evals >= evals) {
            return Err(schema(format!("line {line}: evaluation counts must increase")));
        }
        out.push(MetricsRecord {
            evals,
            moqd_score: num(1)?,
            global_hypervolume: num(2)?,
            max_sum: if row[3].is_empty() { None } else { Some(num(3)?) },
            coverage: num(4)?,
            seconds: num(5)?,
        });
    }
    Ok(out)
}

/// Everything `run` produced, with the paths it wrote.
#[derive(Debug)]
pub struct RunArtifacts {
    pub manifest: RunManifest,
    pub dir: PathBuf,
    pub final_metrics: MetricsRecord,
}

/// Runs the configured algorithm with `seed` and writes the four run files
/// into `out` (created if missing).
pub fn run_from_file(config: &Path, seed: u64, out: &Path) -> Result<RunArtifacts> {
    let mut cfg = load_config(config)?;
    cfg.seed = seed;
    run_config(&cfg, out)
}

pub fn run_config(cfg: &AlgorithmConfig, out: &Path) -> Result<RunArtifacts> {
    let task = Task::from_config(&cfg.env)?;
    fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    log::info!("running {} seed {} on {}", cfg.algorithm, cfg.seed, task.name());
    let result = moqd_core::algorithms::run_with_task(cfg, &task)?;
    write_run_dir(cfg, &result, out)
}

/// Writes the four run files for a finished run.
pub fn write_run_dir(cfg: &AlgorithmConfig, result: &RunOutput, out: &Path) -> Result<RunArtifacts> {
    let task = Task::from_config(&cfg.env)?;
    let reference = cfg.reference_point(&task)?;
    fs::create_dir_all(out).map_err(|e| BenchError::io(out, e))?;
    let paths = Outputs {
        metrics: METRICS_FILE.into(),
        archive: ARCHIVE_FILE.into(),
        manifest: MANIFEST_FILE.into(),
        config: CONFIG_FILE.into(),
    };
    write_metrics(&out.join(METRICS_FILE), &result.metrics)?;
    write_archive(&out.join(ARCHIVE_FILE), &result.archive)?;
    let config_path = out.join(CONFIG_FILE);
    fs::write(&config_path, to_toml(cfg)?).map_err(|e| BenchError::io(&config_path, e))?;
    let manifest = RunManifest {
        version: version(),
        algorithm: cfg.algorithm.to_string(),
        label: run_label(cfg),
        env: task.name().to_string(),
        seed: cfg.seed,
        config_hash: config_hash(cfg),
        reference_point: reference,
        iterations: cfg.iterations,
        batch_size: cfg.batch_size,
        outputs: paths,
    };
    let manifest_path = out.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&manifest_path, text + "\n").map_err(|e| BenchError::io(&manifest_path, e))?;
    Ok(RunArtifacts {
        manifest,
        dir: out.to_path_buf(),
        final_metrics: *result.metrics.last().expect("at least one metrics row"),
    })
}

pub fn write_archive(path: &Path, archive: &MoqdArchive) -> Result<()> {
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = BufWriter::new(file);
    archive.write_snapshot(&mut w)?;
    w.flush().map_err(|e| BenchError::io(path, e))
}

pub fn read_archive(path: &Path) -> Result<MoqdArchive> {
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    MoqdArchive::read_snapshot(BufReader::new(file)).map_err(|e| BenchError::Schema {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Writes an empty archive (header line only) for the configured tessellation.
pub fn tessellate(config: &Path, out: &Path) -> Result<usize> {
    let cfg = load_config(config)?;
    let task = Task::from_config(&cfg.env)?;
    let archive = MoqdArchive::new(cfg.centroids(&task)?, cfg.archive.max_front_size, ReplacementPolicy::Random)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    write_archive(out, &archive)?;
    Ok(archive.centroids().len())
}
