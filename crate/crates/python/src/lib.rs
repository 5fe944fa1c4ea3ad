//! Python bindings: `import fjd_py`.
//!
//! Embedding matrices cross the boundary as lists of rows (any sequence
//! of float sequences, including 2-D numpy arrays).

use std::path::PathBuf;

use fjd::embedders::{self, PcaModel};
use fjd::harness::{self, ExperimentConfig, ExperimentKind};
use fjd::io;
use fjd::joint;
use fjd::synth::dataset::{make_dataset, CondType, Factor};
use fjd::synth::sprite::Shape;
use fjd::{EmbeddingSet, FjdError as CoreError, JointConfig, PairedEmbeddings, SquareMatrix};
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

create_exception!(
    fjd_py,
    FjdError,
    PyValueError,
    "Raised for every error reported by the fjd core."
);

fn err(e: CoreError) -> PyErr {
    FjdError::new_err(e.to_string())
}

fn set(rows: Vec<Vec<f64>>) -> PyResult<EmbeddingSet> {
    EmbeddingSet::from_rows(&rows).map_err(err)
}

type Rows = Vec<Vec<f64>>;

fn rows_of(set: &EmbeddingSet) -> Rows {
    set.iter_rows().map(<[f64]>::to_vec).collect()
}

fn paired(img: Vec<Vec<f64>>, cond: Vec<Vec<f64>>) -> PyResult<PairedEmbeddings> {
    PairedEmbeddings::new(set(img)?, set(cond)?).map_err(err)
}

fn parse<T: std::str::FromStr<Err = CoreError>>(s: &str) -> PyResult<T> {
    s.parse().map_err(err)
}

/// Squared Fréchet distance and its parts.
#[pyclass(frozen, get_all, skip_from_py_object, module = "fjd_py")]
#[derive(Clone, Copy)]
pub struct FrechetResult {
    value: f64,
    mean_term: f64,
    trace_a: f64,
    trace_b: f64,
    trace_term: f64,
    clamped_eigenvalues: usize,
}

impl From<fjd::FrechetResult> for FrechetResult {
    fn from(r: fjd::FrechetResult) -> Self {
        Self {
            value: r.value,
            mean_term: r.mean_term,
            trace_a: r.trace_a,
            trace_b: r.trace_b,
            trace_term: r.trace_term,
            clamped_eigenvalues: r.clamped_eigenvalues,
        }
    }
}

#[pymethods]
impl FrechetResult {
    fn __float__(&self) -> f64 {
        self.value
    }

    fn __repr__(&self) -> String {
        format!(
            "FrechetResult(value={}, mean_term={}, trace_term={}, clamped_eigenvalues={})",
            self.value, self.mean_term, self.trace_term, self.clamped_eigenvalues
        )
    }
}

/// Mean and covariance of a Gaussian.
#[pyclass(frozen, module = "fjd_py")]
pub struct GaussianStats(fjd::GaussianStats);

#[pymethods]
impl GaussianStats {
    #[new]
    fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> PyResult<Self> {
        let cov = SquareMatrix::from_rows(&cov).map_err(err)?;
        fjd::GaussianStats::analytic(mean, cov).map(Self).map_err(err)
    }

    /// Sample mean and unbiased covariance of the rows.
    #[staticmethod]
    fn estimate(rows: Vec<Vec<f64>>) -> PyResult<Self> {
        fjd::estimate_gaussian(&set(rows)?).map(Self).map_err(err)
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean.clone()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        (0..self.0.dim()).map(|i| self.0.cov.row(i).to_vec()).collect()
    }

    #[getter]
    fn count(&self) -> u64 {
        self.0.count
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }
}

#[pyfunction]
fn frechet_distance(a: PyRef<'_, GaussianStats>, b: PyRef<'_, GaussianStats>) -> PyResult<FrechetResult> {
    fjd::frechet_distance(&a.0, &b.0).map(Into::into).map_err(err)
}

/// FID between two sets of image embeddings.
#[pyfunction]
fn compute_fid(reference: Vec<Vec<f64>>, generated: Vec<Vec<f64>>) -> PyResult<FrechetResult> {
    fjd::compute_fid(&set(reference)?, &set(generated)?)
        .map(Into::into)
        .map_err(err)
}

/// FJD between paired sets. `alpha=None` calibrates on the reference.
/// Returns the score and the alpha it was computed with.
#[pyfunction]
#[pyo3(signature = (ref_img, ref_cond, gen_img, gen_cond, alpha=None))]
fn compute_fjd(
    ref_img: Vec<Vec<f64>>,
    ref_cond: Vec<Vec<f64>>,
    gen_img: Vec<Vec<f64>>,
    gen_cond: Vec<Vec<f64>>,
    alpha: Option<f64>,
) -> PyResult<(FrechetResult, f64)> {
    let reference = paired(ref_img, ref_cond)?;
    let generated = paired(gen_img, gen_cond)?;
    let cfg = match alpha {
        Some(a) => JointConfig::fixed(a, "python", "python", "python").map_err(err)?,
        None => JointConfig::auto("python", "python", "python"),
    };
    let score = fjd::compute_fjd(&reference, &generated, &cfg).map_err(err)?;
    Ok((score.frechet.into(), score.metadata.alpha))
}

#[pyfunction]
fn calibrate_alpha(ref_img: Vec<Vec<f64>>, ref_cond: Vec<Vec<f64>>) -> PyResult<f64> {
    fjd::calibrate_alpha(&paired(ref_img, ref_cond)?).map_err(err)
}

/// `[(alpha, fjd), ...]` in input order.
#[pyfunction]
fn sweep_alpha(
    ref_img: Vec<Vec<f64>>,
    ref_cond: Vec<Vec<f64>>,
    gen_img: Vec<Vec<f64>>,
    gen_cond: Vec<Vec<f64>>,
    alphas: Vec<f64>,
) -> PyResult<Vec<(f64, f64)>> {
    joint::sweep_alpha(&paired(ref_img, ref_cond)?, &paired(gen_img, gen_cond)?, &alphas).map_err(err)
}

#[pyfunction]
fn one_hot(label: usize, k: usize) -> PyResult<Vec<f64>> {
    embedders::one_hot(label, k).map_err(err)
}

#[pyfunction]
fn n_hot(labels: Vec<usize>, k: usize) -> PyResult<Vec<f64>> {
    embedders::n_hot(&labels, k).map_err(err)
}

/// Principal-component projection fitted on a set of rows.
#[pyclass(frozen, module = "fjd_py")]
pub struct Pca(PcaModel);

#[pymethods]
impl Pca {
    #[new]
    fn fit(rows: Vec<Vec<f64>>, latent_dim: usize) -> PyResult<Self> {
        embedders::pca_fit(&set(rows)?, latent_dim).map(Self).map_err(err)
    }

    fn encode(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        self.0.encode_set(&set(rows)?).map(|s| rows_of(&s)).map_err(err)
    }

    #[getter]
    fn latent_dim(&self) -> usize {
        self.0.latent_dim
    }

    #[getter]
    fn explained_variance_ratio(&self) -> f64 {
        self.0.explained_variance_ratio
    }
}

#[pyfunction]
fn read_embeddings(path: PathBuf) -> PyResult<Vec<Vec<f64>>> {
    io::read_embeddings(path).map(|s| rows_of(&s)).map_err(err)
}

/// Stored as float32.
#[pyfunction]
fn write_embeddings(path: PathBuf, rows: Vec<Vec<f64>>) -> PyResult<()> {
    io::write_embeddings(&set(rows)?, path).map_err(err)
}

/// Synthetic sprite corpus as `(pixel_rows, conditioning_rows)`.
#[pyfunction]
#[pyo3(signature = (n, cond_type="class", seed=0))]
fn make_sprites(n: usize, cond_type: &str, seed: u64) -> PyResult<(Rows, Rows)> {
    let ds = make_dataset(n, parse::<CondType>(cond_type)?, seed).map_err(err)?;
    let (images, conds) = io::raw_embeddings(&ds).map_err(err)?;
    Ok((rows_of(&images), rows_of(&conds)))
}

fn experiment_config(
    kind: &str,
    cond_type: &str,
    n: usize,
    seed: u64,
    factor: &str,
    sweep: Option<Vec<f64>>,
    shape: Option<&str>,
) -> PyResult<ExperimentConfig> {
    let factor = parse::<Factor>(factor)?;
    let kind = match kind {
        "noise" => ExperimentKind::Noise,
        "consistency" => ExperimentKind::Consistency { attribute: factor },
        "diversity" => ExperimentKind::Diversity { stratify_by: factor },
        "hamming" => ExperimentKind::Hamming,
        "alpha_sweep" => ExperimentKind::AlphaSweep,
        "gaussian" => ExperimentKind::GaussianDemo { exact: false },
        "gaussian_exact" => ExperimentKind::GaussianDemo { exact: true },
        other => return Err(FjdError::new_err(format!("unknown experiment {other:?}"))),
    };
    let mut cfg = ExperimentConfig::new(kind, parse::<CondType>(cond_type)?)
        .with_samples(n)
        .with_seed(seed);
    if let Some(s) = sweep {
        cfg = cfg.with_sweep(s);
    }
    if let Some(s) = shape {
        cfg = cfg.with_shape(parse::<Shape>(s)?);
    }
    Ok(cfg)
}

/// Runs one sweep and returns `{"rows": [...], "alpha": ..., ...}`.
#[pyfunction]
#[pyo3(signature = (kind, cond_type="class", n=harness::DEFAULT_SAMPLES, seed=0, factor="x_pos", sweep=None, shape=None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    kind: &str,
    cond_type: &str,
    n: usize,
    seed: u64,
    factor: &str,
    sweep: Option<Vec<f64>>,
    shape: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = experiment_config(kind, cond_type, n, seed, factor, sweep, shape)?;
    let table = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    let out = PyDict::new(py);
    let rows = table
        .rows
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("sweep_value", r.sweep_value)?;
            d.set_item("fid", r.fid)?;
            d.set_item("fjd", r.fjd)?;
            d.set_item("clamped_count", r.clamped_count)?;
            Ok(d)
        })
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("rows", rows)?;
    let m = &table.metadata;
    out.set_item("alpha", m.alpha)?;
    out.set_item("alpha_6dp", &m.alpha_6dp)?;
    out.set_item("image_embedder_id", &m.image_embedder_id)?;
    out.set_item("cond_embedder_id", &m.cond_embedder_id)?;
    out.set_item("reference_id", &m.reference_id)?;
    out.set_item("seed", m.seed)?;
    Ok(out)
}

/// `(fid, fjd)` between two same-distribution samples of the experiment's
/// reference corpus.
#[pyfunction]
#[pyo3(signature = (kind, cond_type="class", n=harness::DEFAULT_SAMPLES, seed=0, factor="x_pos"))]
fn control_floor(
    py: Python<'_>,
    kind: &str,
    cond_type: &str,
    n: usize,
    seed: u64,
    factor: &str,
) -> PyResult<(f64, f64)> {
    let cfg = experiment_config(kind, cond_type, n, seed, factor, None, None)?;
    let floor = py.detach(|| harness::control_floor(&cfg)).map_err(err)?;
    Ok((floor.fid, floor.fjd))
}

#[pymodule]
fn fjd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("FjdError", m.py().get_type::<FjdError>())?;
    m.add_class::<FrechetResult>()?;
    m.add_class::<GaussianStats>()?;
    m.add_class::<Pca>()?;
    m.add_function(wrap_pyfunction!(frechet_distance, m)?)?;
    m.add_function(wrap_pyfunction!(compute_fid, m)?)?;
    m.add_function(wrap_pyfunction!(compute_fjd, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(one_hot, m)?)?;
    m.add_function(wrap_pyfunction!(n_hot, m)?)?;
    m.add_function(wrap_pyfunction!(read_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(write_embeddings, m)?)?;
    m.add_function(wrap_pyfunction!(make_sprites, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(control_floor, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use pyo3::ffi::c_str;
    use pyo3::types::PyDict;
    use pyo3::wrap_pymodule;

    use super::*;

    fn with_module(code: &std::ffi::CStr) {
        Python::initialize();
        Python::attach(|py| {
            let globals = PyDict::new(py);
            globals.set_item("fjd_py", wrap_pymodule!(fjd_py)(py)).unwrap();
            if let Err(e) = py.run(code, Some(&globals), None) {
                e.print(py);
                panic!("python snippet failed");
            }
        });
    }

    #[test]
    fn closed_form_pair_through_python() {
        with_module(c_str!(
            r#"
import math
a = fjd_py.GaussianStats([0.0, 0.0], [[4.0, 2.0], [2.0, 2.0]])
b = fjd_py.GaussianStats([0.0, 0.0], [[2.1, 2.0], [2.0, 2.0]])
r = fjd_py.frechet_distance(a, b)
expected = 10.1 - 2.0 * math.sqrt(20.4 + 2.0 * math.sqrt(0.8))
assert abs(r.value - expected) < 1e-12, (r, expected)
assert abs(r.value - (r.mean_term + r.trace_a + r.trace_b - 2 * r.trace_term)) < 1e-12
"#
        ));
    }

    #[test]
    fn core_errors_surface_as_fjd_error() {
        with_module(c_str!(
            r#"
try:
    fjd_py.compute_fjd([[0.0], [1.0]], [[0.0]], [[0.0], [1.0]], [[0.0], [1.0]])
except fjd_py.FjdError as e:
    assert isinstance(e, ValueError)
else:
    raise AssertionError("row mismatch accepted")
try:
    fjd_py.run_experiment("nope")
except fjd_py.FjdError as e:
    assert "unknown experiment" in str(e)
else:
    raise AssertionError("unknown experiment accepted")
"#
        ));
    }

    #[test]
    fn auto_alpha_is_reported() {
        with_module(c_str!(
            r#"
img = [[float(i), float(i % 3)] for i in range(20)]
cond = [[0.5 * i] for i in range(20)]
score, alpha = fjd_py.compute_fjd(img, cond, img, cond)
assert score.value < 1e-9
assert abs(alpha - fjd_py.calibrate_alpha(img, cond)) == 0.0
"#
        ));
    }
}
