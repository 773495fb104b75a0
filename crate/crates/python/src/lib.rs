//! Python bindings for `brsim`.

use pyo3::exceptions::{PyIndexError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use brsim::simulator::SimConfig;
use brsim::{Marginal, SamplingMeasure, SiteSet};

fn to_py(e: brsim::Error) -> PyErr {
    match e {
        brsim::Error::Usage(_) | brsim::Error::Empty(_) => PyValueError::new_err(e.to_string()),
        brsim::Error::IndexOutOfRange { .. } => PyIndexError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn site_set(points: Vec<Vec<f64>>) -> PyResult<SiteSet> {
    SiteSet::from_points(points).map_err(to_py)
}

fn marginal(name: &str) -> PyResult<Marginal> {
    match name {
        "gumbel" => Ok(Marginal::Gumbel),
        "frechet" => Ok(Marginal::Frechet),
        "weibull" => Ok(Marginal::Weibull),
        other => Err(PyValueError::new_err(format!(
            "unknown marginal `{other}` (gumbel, frechet or weibull)"
        ))),
    }
}

fn measure(weights: Option<Vec<f64>>) -> PyResult<Option<SamplingMeasure>> {
    weights
        .map(|w| SamplingMeasure::from_weights(&w))
        .transpose()
        .map_err(to_py)
}

/// Fractional variogram `gamma(t) = scale * |t|^alpha / 2`.
#[pyclass(name = "VariogramModel", frozen)]
struct PyVariogramModel {
    inner: brsim::VariogramModel,
}

#[pymethods]
impl PyVariogramModel {
    #[new]
    #[pyo3(signature = (alpha, scale = 1.0, dim = 1))]
    fn new(alpha: f64, scale: f64, dim: usize) -> PyResult<Self> {
        let inner = brsim::VariogramModel::fractional(alpha, scale, dim).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha()
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn gamma(&self, t: Vec<f64>) -> PyResult<f64> {
        self.inner.gamma(&t).map_err(to_py)
    }

    fn cov_w(&self, s: Vec<f64>, t: Vec<f64>) -> PyResult<f64> {
        self.inner.cov_w(&s, &t).map_err(to_py)
    }

    fn mean_z(&self, t: Vec<f64>) -> PyResult<f64> {
        self.inner.mean_z(&t).map_err(to_py)
    }

    fn cov_z(&self, s: Vec<f64>, t: Vec<f64>) -> PyResult<f64> {
        self.inner.cov_z(&s, &t).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "VariogramModel(alpha={}, scale={}, dim={})",
            self.inner.alpha(),
            self.inner.scale(),
            self.inner.dim()
        )
    }
}

#[pyclass(name = "FieldSample", get_all, frozen)]
struct PyFieldSample {
    values: Vec<f64>,
    num_clusters: u64,
    v_trace: Vec<f64>,
    seed: u64,
    termination_gap: f64,
    elapsed_s: f64,
}

impl From<brsim::FieldSample> for PyFieldSample {
    fn from(s: brsim::FieldSample) -> Self {
        Self {
            values: s.values,
            num_clusters: s.num_clusters,
            v_trace: s.v_trace,
            seed: s.seed,
            termination_gap: s.termination_gap,
            elapsed_s: s.elapsed.as_secs_f64(),
        }
    }
}

#[pymethods]
impl PyFieldSample {
    fn __repr__(&self) -> String {
        format!(
            "FieldSample(n={}, num_clusters={}, seed={})",
            self.values.len(),
            self.num_clusters,
            self.seed
        )
    }
}

/// Exact simulator bound to one site set, model and measure.
#[pyclass(name = "Simulator", frozen)]
struct PySimulator {
    inner: brsim::Simulator,
}

#[pymethods]
impl PySimulator {
    #[new]
    #[pyo3(signature = (sites, model, weights = None, workers = 1, cluster_cap = 10_000_000))]
    fn new(
        sites: Vec<Vec<f64>>,
        model: &PyVariogramModel,
        weights: Option<Vec<f64>>,
        workers: usize,
        cluster_cap: u64,
    ) -> PyResult<Self> {
        let sites = site_set(sites)?;
        let config = SimConfig {
            workers,
            cluster_cap,
            ..SimConfig::default()
        };
        let inner = brsim::Simulator::new(&sites, &model.inner, measure(weights)?, config)
            .map_err(to_py)?;
        Ok(Self { inner })
    }

    fn simulate(&self, py: Python<'_>, seed: u64) -> PyResult<PyFieldSample> {
        py.detach(|| self.inner.simulate(seed))
            .map(Into::into)
            .map_err(to_py)
    }

    /// `reps` replications as a list of value rows plus their cluster counts.
    #[pyo3(signature = (seed, reps, marginals = "gumbel"))]
    fn simulate_many(
        &self,
        py: Python<'_>,
        seed: u64,
        reps: usize,
        marginals: &str,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<u64>)> {
        let target = marginal(marginals)?;
        let samples = py
            .detach(|| self.inner.simulate_reps(seed, reps))
            .map_err(to_py)?;
        let counts = samples.iter().map(|s| s.num_clusters).collect();
        let rows = samples
            .iter()
            .map(|s| brsim::transform_marginals(s, target).values)
            .collect();
        Ok((rows, counts))
    }
}

#[pyfunction]
#[pyo3(signature = (sites, model, seed, weights = None, workers = 1))]
fn simulate(
    py: Python<'_>,
    sites: Vec<Vec<f64>>,
    model: &PyVariogramModel,
    seed: u64,
    weights: Option<Vec<f64>>,
    workers: usize,
) -> PyResult<PyFieldSample> {
    let sites = site_set(sites)?;
    let m = measure(weights)?;
    py.detach(|| brsim::simulate(&sites, &model.inner, m, seed, workers))
        .map(Into::into)
        .map_err(to_py)
}

#[pyfunction]
fn simulate_naive(
    py: Python<'_>,
    sites: Vec<Vec<f64>>,
    model: &PyVariogramModel,
    seed: u64,
    truncation: u64,
) -> PyResult<PyFieldSample> {
    let sites = site_set(sites)?;
    py.detach(|| brsim::simulate_naive(&sites, &model.inner, seed, truncation))
        .map(Into::into)
        .map_err(to_py)
}

/// Returns `(value, std_error)`.
#[pyfunction]
#[pyo3(signature = (sites, model, y, reps = 1_000_000, seed = 1))]
fn fdd_cdf_oracle(
    py: Python<'_>,
    sites: Vec<Vec<f64>>,
    model: &PyVariogramModel,
    y: Vec<f64>,
    reps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let sites = site_set(sites)?;
    let est = py
        .detach(|| brsim::fdd_cdf_oracle(&sites, &model.inner, &y, reps, seed))
        .map_err(to_py)?;
    Ok((est.value, est.std_error))
}

#[pyfunction]
fn bivariate_neglog(model: &PyVariogramModel, s: Vec<f64>, y1: f64, y2: f64) -> PyResult<f64> {
    brsim::bivariate_neglog(&model.inner, &s, y1, y2).map_err(to_py)
}

/// Returns `(lhs, rhs, z_score)`.
#[pyfunction]
#[pyo3(signature = (model, grid, anchor, reps = 1_000_000, seed = 1))]
fn change_of_measure_check(
    py: Python<'_>,
    model: &PyVariogramModel,
    grid: Vec<Vec<f64>>,
    anchor: Vec<f64>,
    reps: usize,
    seed: u64,
) -> PyResult<(f64, f64, f64)> {
    let grid = site_set(grid)?;
    let r = py
        .detach(|| brsim::change_of_measure_check(&model.inner, &grid, &anchor, reps, seed))
        .map_err(to_py)?;
    Ok((r.lhs, r.rhs, r.z_score))
}

/// Returns `(value, std_error)`.
#[pyfunction]
#[pyo3(signature = (model, side, mesh, reps = 100_000, seed = 1))]
fn pickands_estimate(
    py: Python<'_>,
    model: &PyVariogramModel,
    side: f64,
    mesh: f64,
    reps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let e = py
        .detach(|| brsim::pickands_estimate(&model.inner, side, mesh, reps, seed))
        .map_err(to_py)?;
    Ok((e.value, e.std_error))
}

/// Returns `(value, std_error)`.
#[pyfunction]
#[pyo3(signature = (model, n, reps = 100_000, seed = 1))]
fn extremal_index_estimate(
    py: Python<'_>,
    model: &PyVariogramModel,
    n: usize,
    reps: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let e = py
        .detach(|| brsim::extremal_index_estimate(&model.inner, n, reps, seed))
        .map_err(to_py)?;
    Ok((e.value, e.std_error))
}

/// KS distance of `samples` from the standard Gumbel law.
#[pyfunction]
fn ks_gumbel(samples: Vec<f64>) -> PyResult<f64> {
    brsim::ks_statistic(&samples, |x| brsim::gumbel_cdf(x, 0.0)).map_err(to_py)
}

#[pyfunction]
fn ks_two_sample(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    brsim::ks_two_sample(&a, &b).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (x, loc = 0.0))]
fn gumbel_cdf(x: f64, loc: f64) -> f64 {
    brsim::gumbel_cdf(x, loc)
}

#[pyfunction]
fn std_normal_cdf(x: f64) -> f64 {
    brsim::std_normal_cdf(x)
}

/// `(q25, median, q75, mean)` of cluster counts.
#[pyfunction]
fn cluster_count_stats(counts: Vec<u64>) -> PyResult<(f64, f64, f64, f64)> {
    let s = brsim::cluster_count_stats(&counts, 20).map_err(to_py)?;
    Ok((s.q25, s.median, s.q75, s.mean))
}

/// Expands a grid expression `a:b:mesh[,...]` into a list of points.
#[pyfunction]
fn grid(expr: &str) -> PyResult<Vec<Vec<f64>>> {
    let s = SiteSet::grid(expr).map_err(to_py)?;
    Ok(s.points().map(|p| p.to_vec()).collect())
}

#[pymodule]
fn brsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", brsim::VERSION)?;
    m.add_class::<PyVariogramModel>()?;
    m.add_class::<PyFieldSample>()?;
    m.add_class::<PySimulator>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_naive, m)?)?;
    m.add_function(wrap_pyfunction!(fdd_cdf_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(bivariate_neglog, m)?)?;
    m.add_function(wrap_pyfunction!(change_of_measure_check, m)?)?;
    m.add_function(wrap_pyfunction!(pickands_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(extremal_index_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(ks_gumbel, m)?)?;
    m.add_function(wrap_pyfunction!(ks_two_sample, m)?)?;
    m.add_function(wrap_pyfunction!(gumbel_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(std_normal_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(cluster_count_stats, m)?)?;
    m.add_function(wrap_pyfunction!(grid, m)?)?;
    Ok(())
}
