//! Python bindings: Pareto utilities, the MOQD archive, the PointWalker task
//! and whole runs driven by a TOML config.

use std::path::{Path, PathBuf};

use moqd_bench::config::parse_config;
use moqd_bench::run::write_run_dir;
use moqd_bench::BenchError;
use moqd_core::archive::Insertion;
use moqd_core::envs::PointWalker as CoreWalker;
use moqd_core::pareto::{self, CrowdingMode};
use moqd_core::{Centroids, MetricsRecord, MoqdArchive, ReplacementPolicy, Solution};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn core_err(e: moqd_core::Error) -> PyErr {
    use moqd_core::Error::*;
    match e {
        Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn bench_err(e: BenchError) -> PyErr {
    if e.exit_code() == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

/// True if `a` Pareto-dominates `b` (maximisation).
#[pyfunction]
fn dominates(a: Vec<f64>, b: Vec<f64>) -> PyResult<bool> {
    pareto::dominates(&a, &b).map_err(core_err)
}

/// Indices of the non-dominated points, in input order.
#[pyfunction]
fn extract_front(points: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
    pareto::extract_front(&points).map_err(core_err)
}

#[pyfunction]
fn non_dominated_sort(points: Vec<Vec<f64>>) -> PyResult<Vec<Vec<usize>>> {
    pareto::non_dominated_sort(&points).map_err(core_err)
}

/// Exact bi-objective hypervolume. Returns `(volume, below_reference)`.
#[pyfunction]
fn hypervolume_2d(front: Vec<Vec<f64>>, reference: Vec<f64>) -> PyResult<(f64, Vec<usize>)> {
    let hv = pareto::hypervolume_2d(&front, &reference).map_err(core_err)?;
    Ok((hv.volume, hv.below_reference))
}

/// Monte-Carlo hypervolume. Returns `(estimate, standard_error)`.
#[pyfunction]
#[pyo3(signature = (front, reference, bound, samples = 100_000, seed = 0))]
fn hypervolume_mc(
    front: Vec<Vec<f64>>,
    reference: Vec<f64>,
    bound: Vec<f64>,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let e = pareto::hypervolume_mc(&front, &reference, &bound, samples, seed).map_err(core_err)?;
    Ok((e.estimate, e.std_error))
}

/// Crowding distances; `mode` is `"selection"` or `"replacement"`.
#[pyfunction]
#[pyo3(signature = (front, mode = "selection"))]
fn crowding_distances(front: Vec<Vec<f64>>, mode: &str) -> PyResult<Vec<f64>> {
    let mode = match mode {
        "selection" => CrowdingMode::Selection,
        "replacement" => CrowdingMode::Replacement,
        other => return Err(PyValueError::new_err(format!("unknown crowding mode `{other}`"))),
    };
    pareto::crowding_distances(&front, mode).map_err(core_err)
}

fn metrics_dict<'py>(py: Python<'py>, m: &MetricsRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("evals", m.evals)?;
    d.set_item("moqd_score", m.moqd_score)?;
    d.set_item("global_hv", m.global_hypervolume)?;
    d.set_item("max_sum", m.max_sum)?;
    d.set_item("coverage", m.coverage)?;
    d.set_item("seconds", m.seconds)?;
    Ok(d)
}

/// CVT grid of bounded Pareto fronts.
#[pyclass(module = "moqd")]
struct Archive {
    inner: MoqdArchive,
    rng: ChaCha8Rng,
    next_id: u64,
}

#[pymethods]
impl Archive {
    #[new]
    #[pyo3(signature = (num_centroids, max_front_size, bounds, policy = "crowding", cvt_samples = 50_000, seed = 0))]
    fn new(
        num_centroids: usize,
        max_front_size: usize,
        bounds: Vec<(f64, f64)>,
        policy: &str,
        cvt_samples: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let policy = match policy {
            "crowding" => ReplacementPolicy::Crowding,
            "random" => ReplacementPolicy::Random,
            other => return Err(PyValueError::new_err(format!("unknown replacement policy `{other}`"))),
        };
        let centroids = Centroids::cvt(&bounds, num_centroids, cvt_samples, seed).map_err(core_err)?;
        let inner = MoqdArchive::new(centroids, max_front_size, policy).map_err(core_err)?;
        Ok(Self {
            inner,
            rng: ChaCha8Rng::seed_from_u64(seed),
            next_id: 0,
        })
    }

    /// Loads an `archive.jsonl` snapshot from a file path.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = moqd_bench::run::read_archive(&path).map_err(bench_err)?;
        let next_id = inner.solutions().map(|s| s.id + 1).max().unwrap_or(0);
        Ok(Self {
            inner,
            rng: ChaCha8Rng::seed_from_u64(0),
            next_id,
        })
    }

    /// Inserts one solution; returns True if it was added.
    #[pyo3(signature = (scores, descriptor, genotype = Vec::new()))]
    fn insert(&mut self, scores: Vec<f64>, descriptor: Vec<f64>, genotype: Vec<f64>) -> PyResult<bool> {
        let s = Solution::new(self.next_id, genotype, scores, descriptor).map_err(core_err)?;
        self.next_id += 1;
        let r = self.inner.insert(s, &mut self.rng).map_err(core_err)?;
        Ok(matches!(r, Insertion::Added { .. }))
    }

    /// `moqd_score`, `global_hv`, `max_sum` and `coverage` for a reference point.
    fn metrics<'py>(&self, py: Python<'py>, reference: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let m = self.inner.metrics(&reference).map_err(core_err)?;
        let d = PyDict::new(py);
        d.set_item("moqd_score", m.moqd_score)?;
        d.set_item("global_hv", m.global_hypervolume)?;
        d.set_item("max_sum", m.max_sum)?;
        d.set_item("coverage", m.coverage)?;
        Ok(d)
    }

    fn centroids(&self) -> Vec<Vec<f64>> {
        self.inner.centroids().points().to_vec()
    }

    /// Score vectors of each cell's front (empty lists for empty cells).
    fn fronts(&self) -> Vec<Vec<Vec<f64>>> {
        self.inner
            .cells()
            .iter()
            .map(|c| c.solutions().iter().map(|s| s.scores.clone()).collect())
            .collect()
    }

    /// `(scores, descriptor, genotype)` of every stored solution.
    fn solutions(&self) -> Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        self.inner
            .solutions()
            .map(|s| (s.scores.clone(), s.descriptor.clone(), s.genotype.clone()))
            .collect()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        moqd_bench::run::write_archive(&path, &self.inner).map_err(bench_err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Archive(cells={}, solutions={})",
            self.inner.centroids().len(),
            self.inner.len()
        )
    }
}

/// Two-legged point walker with energy and velocity objectives.
#[pyclass(module = "moqd")]
struct PointWalker {
    inner: CoreWalker,
}

#[pymethods]
impl PointWalker {
    #[new]
    #[pyo3(signature = (episode_length = 60, energy_weight = 1.0, policy_hidden = vec![32, 32]))]
    fn new(episode_length: usize, energy_weight: f64, policy_hidden: Vec<usize>) -> PyResult<Self> {
        let inner = CoreWalker::new(episode_length, energy_weight, &policy_hidden).map_err(core_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn genotype_len(&self) -> usize {
        self.inner.policy_spec().param_count()
    }

    /// A policy drawn with the standard initialisation.
    #[pyo3(signature = (seed = 0))]
    fn random_genotype(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        moqd_core::neuro::Mlp::random(self.inner.policy_spec().clone(), &mut rng).flatten()
    }

    /// Runs one episode. Returns `(scores, descriptor)`.
    fn rollout(&self, genotype: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let r = self.inner.rollout(&genotype).map_err(core_err)?;
        Ok((r.scores, r.descriptor))
    }
}

/// Runs the algorithm described by a TOML config string.
///
/// Returns a dict with `metrics` (one dict per row) and `archive`. With `out`,
/// the run directory files are written there as well.
#[pyfunction]
#[pyo3(signature = (config, seed = 0, out = None))]
fn run<'py>(py: Python<'py>, config: &str, seed: u64, out: Option<PathBuf>) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = parse_config(config, Path::new("<string>")).map_err(bench_err)?;
    cfg.seed = seed;
    let output = py.detach(|| moqd_core::run(&cfg)).map_err(core_err)?;
    if let Some(dir) = &out {
        write_run_dir(&cfg, &output, dir).map_err(bench_err)?;
    }
    let d = PyDict::new(py);
    let rows = output
        .metrics
        .iter()
        .map(|m| metrics_dict(py, m))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("metrics", rows)?;
    let next_id = output.archive.solutions().map(|s| s.id + 1).max().unwrap_or(0);
    let archive = Archive {
        inner: output.archive,
        rng: ChaCha8Rng::seed_from_u64(seed),
        next_id,
    };
    d.set_item("archive", Py::new(py, archive)?)?;
    Ok(d)
}

#[pymodule]
fn moqd(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(dominates, m)?)?;
    m.add_function(wrap_pyfunction!(extract_front, m)?)?;
    m.add_function(wrap_pyfunction!(non_dominated_sort, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume_2d, m)?)?;
    m.add_function(wrap_pyfunction!(hypervolume_mc, m)?)?;
    m.add_function(wrap_pyfunction!(crowding_distances, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_class::<Archive>()?;
    m.add_class::<PointWalker>()?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
