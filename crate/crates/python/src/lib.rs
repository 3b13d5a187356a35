use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use freefrac::algebra::{self, FiniteDimAlgebra};
use freefrac::harness::{run_scenario as run_cfg, Scenario, ScenarioConfig};
use freefrac::metricgeom::{self, NestedSamplingOptions, PointCloud};
use freefrac::{rmtformulas, spectral};

fn err(e: freefrac::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cloud(points: Vec<Vec<f64>>) -> PyResult<PointCloud> {
    PointCloud::from_points(&points).map_err(err)
}

/// A compactly supported probability law on the real line.
#[pyclass(frozen, name = "SpectralMeasure")]
struct PySpectralMeasure {
    inner: spectral::SpectralMeasure,
}

#[pymethods]
impl PySpectralMeasure {
    #[staticmethod]
    fn uniform(a: f64, b: f64) -> PyResult<Self> {
        Ok(PySpectralMeasure { inner: spectral::SpectralMeasure::uniform(a, b).map_err(err)? })
    }

    /// From `[(location, mass), ...]`.
    #[staticmethod]
    fn atomic(points: Vec<(f64, f64)>) -> PyResult<Self> {
        Ok(PySpectralMeasure { inner: spectral::SpectralMeasure::atomic(&points).map_err(err)? })
    }

    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }

    fn moment(&self, j: u32) -> f64 {
        self.inner.moment(j)
    }

    fn delta0(&self) -> f64 {
        spectral::delta0_single(&self.inner)
    }

    fn chi(&self) -> f64 {
        rmtformulas::chi_single(&self.inner)
    }

    /// `k` CDF quantiles of the law.
    fn quantiles(&self, k: usize) -> PyResult<Vec<f64>> {
        spectral::quantiles(&self.inner, k).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __repr__(&self) -> String {
        let (a, b) = self.inner.support();
        format!("SpectralMeasure(support=({a}, {b}), atoms={})", self.inner.atoms().len())
    }
}

/// Eigenvalues of the quantile microstate of `measure` at size `k`.
#[pyfunction]
#[pyo3(signature = (measure, k, tau = 0.45))]
fn quantile_eigenvalues(measure: PyRef<'_, PySpectralMeasure>, k: usize, tau: f64) -> PyResult<Vec<f64>> {
    Ok(freefrac::microstates::build_quantile_microstate(&measure.inner, k, tau).map_err(err)?.y_eigenvalues())
}

/// `1 - sum_i alpha_i^2 / n_i^2` for blocks `[(n_i, alpha_i), ...]`.
#[pyfunction]
fn delta0_fd(blocks: Vec<(usize, f64)>) -> PyResult<f64> {
    Ok(algebra::delta0_fd(&FiniteDimAlgebra::from_pairs(&blocks).map_err(err)?))
}

/// Returns `(multiplicities, corner, orbit_dim, trace_error)`.
#[pyfunction]
fn plan_representation(blocks: Vec<(usize, f64)>, k: usize, eps: f64) -> PyResult<(Vec<usize>, usize, usize, f64)> {
    let a = FiniteDimAlgebra::from_pairs(&blocks).map_err(err)?;
    let p = algebra::plan_representation(&a, k, eps).map_err(err)?;
    let dim = p.orbit_dim();
    Ok((p.multiplicities, p.corner, dim, p.trace_error))
}

#[pyfunction]
fn packing_number(points: Vec<Vec<f64>>, eps: f64) -> PyResult<usize> {
    metricgeom::packing_number(&cloud(points)?, eps).map_err(err)
}

#[pyfunction]
fn cover_sum(points: Vec<Vec<f64>>, eps: f64, s: f64) -> PyResult<f64> {
    metricgeom::cover_sum(&cloud(points)?, eps, s).map_err(err)
}

/// Returns `(pooled_slope, per_k_slopes, per_k_small_scale_exponents)`.
#[pyfunction]
fn scaling_exponent(eps_grid: Vec<f64>, k_grid: Vec<usize>, log_counts: Vec<Vec<f64>>) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let est = metricgeom::scaling_exponent(&eps_grid, &k_grid, &log_counts).map_err(err)?;
    let slopes = est.per_k.iter().map(|f| f.slope).collect();
    Ok((est.slope, slopes, est.small_scale_exponents()))
}

/// `k^-2`-normalized packing lower bounds for the orbit of `diag(eigenvalues)`.
#[pyfunction]
#[pyo3(signature = (eigenvalues, eps_grid, walkers = 200, seed = 0))]
fn orbit_packing_profile(eigenvalues: Vec<f64>, eps_grid: Vec<f64>, walkers: usize, seed: u64) -> PyResult<Vec<f64>> {
    let opts = NestedSamplingOptions { walkers, seed, ..Default::default() };
    Ok(metricgeom::orbit_packing_profile(&eigenvalues, &eps_grid, &opts).map_err(err)?.normalized)
}

#[pyfunction]
fn selberg_box_log(p: usize, eps: f64) -> f64 {
    rmtformulas::selberg_box_log(p, eps)
}

#[pyfunction]
fn mehta_constant_log(k: usize) -> f64 {
    rmtformulas::mehta_constant_log(k)
}

#[pyfunction]
fn hausdorff_entropy_constant(n: usize) -> f64 {
    rmtformulas::hausdorff_entropy_constant(n)
}

/// Default config for a scenario, as JSON.
#[pyfunction]
fn default_config(scenario: &str) -> PyResult<String> {
    let s: Scenario = scenario.parse().map_err(err)?;
    Ok(ScenarioConfig::default_for(s).to_json())
}

/// Runs a scenario from a JSON config (or its defaults) and returns the report as JSON.
#[pyfunction]
#[pyo3(signature = (scenario, config = None, seed = None))]
fn run_scenario(py: Python<'_>, scenario: &str, config: Option<&str>, seed: Option<u64>) -> PyResult<String> {
    let s: Scenario = scenario.parse().map_err(err)?;
    let mut cfg = match config {
        Some(text) => ScenarioConfig::from_json(text).map_err(err)?,
        None => ScenarioConfig::default_for(s),
    };
    if cfg.scenario != s {
        return Err(PyValueError::new_err(format!("config is for {}, not {s}", cfg.scenario)));
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let (report, _) = py.detach(|| run_cfg(&cfg)).map_err(err)?;
    Ok(report.to_string())
}

#[pymodule]
fn pyfreefrac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySpectralMeasure>()?;
    m.add_function(wrap_pyfunction!(quantile_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(delta0_fd, m)?)?;
    m.add_function(wrap_pyfunction!(plan_representation, m)?)?;
    m.add_function(wrap_pyfunction!(packing_number, m)?)?;
    m.add_function(wrap_pyfunction!(cover_sum, m)?)?;
    m.add_function(wrap_pyfunction!(scaling_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(orbit_packing_profile, m)?)?;
    m.add_function(wrap_pyfunction!(selberg_box_log, m)?)?;
    m.add_function(wrap_pyfunction!(mehta_constant_log, m)?)?;
    m.add_function(wrap_pyfunction!(hausdorff_entropy_constant, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
