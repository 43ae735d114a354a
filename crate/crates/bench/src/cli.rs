//! Command-line front end of the `moqd` binary.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::compare::{compare, Group, Metric, RunData};
use crate::error::{BenchError, Result};
use crate::plot::{archive_svg, curves_svg};
use crate::run::{read_archive, run_from_file, tessellate, RunManifest, VERSION, ARCHIVE_FILE, MANIFEST_FILE};

#[derive(Debug, Parser)]
#[command(name = "moqd", about = "Multi-objective quality-diversity experiments", version = VERSION)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Curves,
    Archive,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm with one seed and write a run directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render convergence curves or an archive heatmap as SVG.
    Plot {
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        out: PathBuf,
        /// Metric drawn by `--kind curves`.
        #[arg(long, default_value = "moqd_score")]
        metric: String,
        /// Reference point for `--kind archive`, as `r1,r2`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        reference: Option<Vec<f64>>,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Compare groups of seed-paired runs on their final metric values.
    Compare {
        #[arg(long)]
        metric: String,
        /// Also write the report as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(required = true, num_args = 1..)]
        dirs: Vec<PathBuf>,
    },
    /// Compute the centroids of a config and write an empty archive.
    Tessellate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            i32::from(e.exit_code())
        }
    }
}

pub fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Run { config, seed, out } => {
            let art = run_from_file(&config, seed, &out)?;
            let m = art.final_metrics;
            println!(
                "{} seed {}: {} evals, moqd_score {:.4}, global_hv {:.4}, coverage {:.3} -> {}",
                art.manifest.label,
                seed,
                m.evals,
                m.moqd_score,
                m.global_hypervolume,
                m.coverage,
                art.dir.display()
            );
        }
        Command::Plot {
            kind,
            out,
            metric,
            reference,
            inputs,
        } => {
            let svg = match kind {
                PlotKind::Curves => curves_svg(&load_runs(&inputs)?, metric.parse()?)?,
                PlotKind::Archive => plot_archive(&inputs, reference)?,
            };
            write_out(&out, svg.as_bytes())?;
        }
        Command::Compare { metric, csv, dirs } => {
            let metric: Metric = metric.parse()?;
            let groups = dirs.iter().map(|d| Group::load(d)).collect::<Result<Vec<_>>>()?;
            let report = compare(&groups, metric)?;
            print!("{}", report.to_text());
            if let Some(path) = csv {
                write_out(&path, report.to_csv().as_bytes())?;
            }
        }
        Command::Tessellate { config, out } => {
            let k = tessellate(&config, &out)?;
            println!("{k} centroids -> {}", out.display());
        }
    }
    Ok(())
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| BenchError::io(path, e))
}

/// Each input is a metrics file, a run directory or a directory of runs.
fn load_runs(inputs: &[PathBuf]) -> Result<Vec<RunData>> {
    let mut runs = Vec::new();
    for p in inputs {
        if p.is_file() {
            let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            runs.push(RunData::load(dir)?);
        } else if p.is_dir() {
            runs.extend(Group::load(p)?.runs);
        } else {
            return Err(BenchError::Usage(format!("{} does not exist", p.display())));
        }
    }
    Ok(runs)
}

fn plot_archive(inputs: &[PathBuf], reference: Option<Vec<f64>>) -> Result<String> {
    let [input] = inputs else {
        return Err(BenchError::Usage("archive plots take exactly one input".into()));
    };
    let (path, dir) = if input.is_dir() {
        (input.join(ARCHIVE_FILE), input.clone())
    } else {
        let dir = input.parent().map(Path::to_path_buf).unwrap_or_default();
        (input.clone(), dir)
    };
    let archive = read_archive(&path)?;
    let manifest_path = dir.join(MANIFEST_FILE);
    let reference = match reference {
        Some(r) => r,
        None if manifest_path.is_file() => RunManifest::read(&manifest_path)?.reference_point,
        None => {
            log::warn!("no manifest next to {}; using the componentwise minimum score as reference", path.display());
            let mut r = vec![f64::INFINITY; 2];
            for s in archive.solutions() {
                for (ri, v) in r.iter_mut().zip(&s.scores) {
                    *ri = ri.min(*v);
                }
            }
            r.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect()
        }
    };
    if reference.len() != 2 {
        return Err(BenchError::Usage(format!("reference point needs 2 values, got {}", reference.len())));
    }
    archive_svg(&archive, &reference, &format!("archive: {}", path.display()))
}
