//! Python bindings for the cco toolkit: network layouts, the link-budget
//! simulator, the objective, GP regression, and the optimizers.
//!
//! The module is the compiled cdylib itself; load it directly (see
//! `python/smoke_test.py`) or drop `libcco.so` on the path as `cco.so`.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use cco_core::baselines as core_baselines;
use cco_core::experiment as core_experiment;
use cco_core::gpr as core_gpr;
use cco_core::metrics as core_metrics;
use cco_core::netgen as core_netgen;
use cco_core::optimizer as core_optimizer;
use cco_core::radio as core_radio;
use cco_core::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(io) => PyIOError::new_err(io.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Cell sites and user positions of one scenario.
#[pyclass(frozen)]
struct NetworkLayout {
    inner: core_netgen::NetworkLayout,
}

#[pymethods]
impl NetworkLayout {
    /// Generates a hexagonal macro grid with random small cells and UEs.
    #[staticmethod]
    #[pyo3(signature = (n_macro_sites, isd_m, n_small_cells, n_ues, min_small_macro_distance_m, seed))]
    fn generate(
        n_macro_sites: usize,
        isd_m: f64,
        n_small_cells: usize,
        n_ues: usize,
        min_small_macro_distance_m: f64,
        seed: u64,
    ) -> PyResult<Self> {
        core_netgen::generate_hex_layout(
            n_macro_sites,
            isd_m,
            n_small_cells,
            n_ues,
            min_small_macro_distance_m,
            seed,
        )
        .map(|inner| NetworkLayout { inner })
        .map_err(py_err)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        core_netgen::load_layout(path)
            .map(|inner| NetworkLayout { inner })
            .map_err(py_err)
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        core_netgen::save_layout(&self.inner, path).map_err(py_err)
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.n_cells()
    }

    #[getter]
    fn n_ues(&self) -> usize {
        self.inner.n_ues()
    }

    /// (x, y) positions of all cells.
    #[getter]
    fn cell_positions(&self) -> Vec<(f64, f64)> {
        self.inner.cells.iter().map(|c| (c.x_m, c.y_m)).collect()
    }

    /// (x, y) positions of all UEs.
    #[getter]
    fn ue_positions(&self) -> Vec<(f64, f64)> {
        self.inner.ues.iter().map(|u| (u.x_m, u.y_m)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkLayout(n_cells={}, n_ues={}, seed={})",
            self.inner.n_cells(),
            self.inner.n_ues(),
            self.inner.rng_seed
        )
    }
}

/// Per-UE SINR outcome of one configuration evaluation.
#[pyclass(frozen)]
struct SinrReport {
    inner: core_radio::SinrReport,
}

#[pymethods]
impl SinrReport {
    #[getter]
    fn dl_sinr_db(&self) -> Vec<f64> {
        self.inner.dl_sinr_db.clone()
    }

    #[getter]
    fn ul_sinr_db(&self) -> Vec<f64> {
        self.inner.ul_sinr_db.clone()
    }

    #[getter]
    fn serving_cell(&self) -> Vec<usize> {
        self.inner.serving_cell.clone()
    }

    #[getter]
    fn ul_tx_power_dbm(&self) -> Vec<f64> {
        self.inner.ul_tx_power_dbm.clone()
    }
}

/// Objective weights, outage threshold, and parameter bounds.
#[pyclass(frozen)]
#[derive(Clone)]
struct Objective {
    inner: core_metrics::ObjectiveSpec,
}

#[pymethods]
impl Objective {
    #[new]
    #[pyo3(signature = (alpha=0.5, beta_dl=0.5, beta_ul=0.5, threshold_db=0.0))]
    fn new(alpha: f64, beta_dl: f64, beta_ul: f64, threshold_db: f64) -> PyResult<Self> {
        let inner = core_metrics::ObjectiveSpec {
            alpha,
            beta_dl,
            beta_ul,
            threshold_db,
            bounds: core_radio::ParameterBounds::default(),
        };
        inner.validate().map_err(py_err)?;
        Ok(Objective { inner })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn threshold_db(&self) -> f64 {
        self.inner.threshold_db
    }

    /// Flat lower/upper bound vectors for a given cell count.
    fn bounds_for(&self, n_cells: usize) -> (Vec<f64>, Vec<f64>) {
        let b = self.inner.bounds;
        let mut lo = Vec::with_capacity(3 * n_cells);
        let mut hi = Vec::with_capacity(3 * n_cells);
        for range in [b.downtilt_deg, b.vertical_hpbw_deg, b.horizontal_hpbw_deg] {
            lo.extend(std::iter::repeat(range.0).take(n_cells));
            hi.extend(std::iter::repeat(range.1).take(n_cells));
        }
        (lo, hi)
    }
}

/// Objective components of one evaluation.
#[pyclass(frozen)]
struct ObjectiveValue {
    inner: core_metrics::ObjectiveValue,
}

#[pymethods]
impl ObjectiveValue {
    #[getter]
    fn f_total(&self) -> f64 {
        self.inner.f_total
    }

    #[getter]
    fn r_dl(&self) -> f64 {
        self.inner.r_dl
    }

    #[getter]
    fn r_ul(&self) -> f64 {
        self.inner.r_ul
    }

    #[getter]
    fn zeta_dl(&self) -> f64 {
        self.inner.zeta_dl
    }

    #[getter]
    fn zeta_ul(&self) -> f64 {
        self.inner.zeta_ul
    }

    fn __repr__(&self) -> String {
        format!(
            "ObjectiveValue(f_total={:.6}, r_dl={:.6}, r_ul={:.6}, zeta_dl={:.4}, zeta_ul={:.4})",
            self.inner.f_total,
            self.inner.r_dl,
            self.inner.r_ul,
            self.inner.zeta_dl,
            self.inner.zeta_ul
        )
    }
}

/// The frozen-randomness link-budget simulator.
#[pyclass(frozen)]
struct RadioEnv {
    inner: core_radio::RadioEnv,
}

#[pymethods]
impl RadioEnv {
    #[new]
    #[pyo3(signature = (layout, fading_samples=10))]
    fn new(layout: &NetworkLayout, fading_samples: usize) -> PyResult<Self> {
        core_radio::RadioEnv::with_fading_samples(&layout.inner, fading_samples)
            .map(|inner| RadioEnv { inner })
            .map_err(py_err)
    }

    /// Evaluates a flat `[tilts.., v_hpbws.., h_hpbws..]` configuration.
    fn evaluate(&self, config: Vec<f64>) -> PyResult<SinrReport> {
        let config = core_radio::AntennaConfig::from_flat(&config).map_err(py_err)?;
        self.inner
            .evaluate(&config)
            .map(|inner| SinrReport { inner })
            .map_err(py_err)
    }

    #[getter]
    fn n_cells(&self) -> usize {
        self.inner.layout().n_cells()
    }

    #[getter]
    fn n_ues(&self) -> usize {
        self.inner.layout().n_ues()
    }

    /// True simulator evaluations consumed so far.
    #[getter]
    fn eval_count(&self) -> u64 {
        self.inner.eval_count()
    }
}

/// Flat uniform 3GPP default configuration for `n_cells` cells.
#[pyfunction]
fn default_config(n_cells: usize) -> Vec<f64> {
    core_radio::AntennaConfig::default_for(n_cells).to_flat()
}

/// Objective from per-UE DL and UL SINR vectors.
#[pyfunction]
fn objective(
    dl_sinr_db: Vec<f64>,
    ul_sinr_db: Vec<f64>,
    spec: &Objective,
) -> PyResult<ObjectiveValue> {
    core_metrics::objective_from_sinr(&dl_sinr_db, &ul_sinr_db, &spec.inner)
        .map(|inner| ObjectiveValue { inner })
        .map_err(py_err)
}

/// Expected improvement for maximization.
#[pyfunction]
fn expected_improvement(mean: f64, std: f64, f_best: f64) -> f64 {
    core_baselines::expected_improvement(mean, std, f_best)
}

/// A fitted Gaussian process with a Matern 5/2 ARD kernel.
#[pyclass(frozen)]
struct GpModel {
    inner: core_gpr::GpModel,
}

#[pymethods]
impl GpModel {
    /// Fits hyperparameters by marginal-likelihood ascent.
    #[staticmethod]
    fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> PyResult<Self> {
        if inputs.is_empty() {
            return Err(PyValueError::new_err("empty training set"));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|r| r.len() != dim) {
            return Err(PyValueError::new_err("ragged input rows"));
        }
        let matrix = nalgebra_matrix(&inputs, dim);
        core_gpr::GpModel::fit(matrix, &targets, core_gpr::KernelParams::default_init(dim))
            .map(|inner| GpModel { inner })
            .map_err(py_err)
    }

    /// Posterior means and variances at the query points.
    fn predict(&self, inputs: Vec<Vec<f64>>) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let mut means = Vec::with_capacity(inputs.len());
        let mut variances = Vec::with_capacity(inputs.len());
        for row in &inputs {
            let (m, v) = self.inner.predict_one(row).map_err(py_err)?;
            means.push(m);
            variances.push(v);
        }
        Ok((means, variances))
    }

    #[getter]
    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    #[getter]
    fn n_train(&self) -> usize {
        self.inner.n_train()
    }
}

fn nalgebra_matrix(rows: &[Vec<f64>], dim: usize) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(rows.len(), dim, |r, c| rows[r][c])
}

/// Result of an optimization run.
#[pyclass(frozen)]
struct RunResult {
    best_config: Vec<f64>,
    best_f: f64,
    best_f_trace: Vec<f64>,
    true_f_trace: Vec<f64>,
    true_evaluations: u64,
    dl_sinr_db: Vec<f64>,
    ul_sinr_db: Vec<f64>,
}

#[pymethods]
impl RunResult {
    #[getter]
    fn best_config(&self) -> Vec<f64> {
        self.best_config.clone()
    }

    #[getter]
    fn best_f(&self) -> f64 {
        self.best_f
    }

    /// Best objective after each iteration.
    #[getter]
    fn best_f_trace(&self) -> Vec<f64> {
        self.best_f_trace.clone()
    }

    /// True objective of the candidate evaluated at each iteration.
    #[getter]
    fn true_f_trace(&self) -> Vec<f64> {
        self.true_f_trace.clone()
    }

    #[getter]
    fn true_evaluations(&self) -> u64 {
        self.true_evaluations
    }

    /// Final per-UE SINRs of the best configuration.
    #[getter]
    fn dl_sinr_db(&self) -> Vec<f64> {
        self.dl_sinr_db.clone()
    }

    #[getter]
    fn ul_sinr_db(&self) -> Vec<f64> {
        self.ul_sinr_db.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(best_f={:.6}, true_evaluations={})",
            self.best_f, self.true_evaluations
        )
    }
}

fn from_trace(
    best_config: Vec<f64>,
    best_f: f64,
    trace: &[core_optimizer::IterationRecord],
    true_evaluations: u64,
    report: &core_radio::SinrReport,
) -> RunResult {
    RunResult {
        best_config,
        best_f,
        best_f_trace: trace.iter().map(|r| r.best_f_so_far).collect(),
        true_f_trace: trace.iter().map(|r| r.true_f_u_best).collect(),
        true_evaluations,
        dl_sinr_db: report.dl_sinr_db.clone(),
        ul_sinr_db: report.ul_sinr_db.clone(),
    }
}

/// Surrogate-guided differential evolution (the proposed optimizer).
#[pyfunction]
#[pyo3(signature = (env, spec, population_size, neighborhood_size, n_iterations, seed=0,
                    scale_factor=0.7, crossover_prob=0.8, share_dl_neighborhood=false))]
#[allow(clippy::too_many_arguments)]
fn optimize(
    py: Python<'_>,
    env: &RadioEnv,
    spec: &Objective,
    population_size: usize,
    neighborhood_size: usize,
    n_iterations: usize,
    seed: u64,
    scale_factor: f64,
    crossover_prob: f64,
    share_dl_neighborhood: bool,
) -> PyResult<RunResult> {
    let settings = core_optimizer::OptimizerSettings {
        population_size,
        neighborhood_size,
        n_iterations,
        de: core_optimizer::DeParams {
            scale_factor,
            crossover_prob,
            rng_seed: seed,
        },
        share_dl_neighborhood,
    };
    let spec = spec.inner.clone();
    let result = py
        .allow_threads(|| core_optimizer::run(&env.inner, spec, settings))
        .map_err(py_err)?;
    Ok(from_trace(
        result.best_config.to_flat(),
        result.best_objective.f_total,
        &result.trace,
        result.true_evaluations,
        &result.final_report,
    ))
}

/// Uniform random search baseline.
#[pyfunction]
#[pyo3(signature = (env, spec, budget, seed=0))]
fn random_search(
    py: Python<'_>,
    env: &RadioEnv,
    spec: &Objective,
    budget: usize,
    seed: u64,
) -> PyResult<RunResult> {
    let spec = spec.inner.clone();
    let run = py
        .allow_threads(|| core_baselines::random_search(&env.inner, &spec, budget, seed))
        .map_err(py_err)?;
    Ok(from_trace(
        run.best_config.to_flat(),
        run.best_objective.f_total,
        &run.trace,
        run.true_evaluations,
        &run.final_report,
    ))
}

/// Bayesian optimization baseline with expected improvement.
#[pyfunction]
#[pyo3(signature = (env, spec, n_init, n_iterations, seed=0, restarts=64))]
fn bo_ei(
    py: Python<'_>,
    env: &RadioEnv,
    spec: &Objective,
    n_init: usize,
    n_iterations: usize,
    seed: u64,
    restarts: usize,
) -> PyResult<RunResult> {
    let config = core_baselines::BoConfig {
        n_init,
        n_iterations,
        seed,
        restarts,
    };
    let spec = spec.inner.clone();
    let run = py
        .allow_threads(|| core_baselines::bo_ei(&env.inner, spec, config))
        .map_err(py_err)?;
    Ok(from_trace(
        run.best_config.to_flat(),
        run.best_objective.f_total,
        &run.trace,
        run.true_evaluations,
        &run.final_report,
    ))
}

/// The fixed 3GPP default configuration baseline.
#[pyfunction]
fn default_3gpp(env: &RadioEnv, spec: &Objective) -> PyResult<RunResult> {
    let run = core_baselines::default_3gpp(&env.inner, &spec.inner).map_err(py_err)?;
    Ok(from_trace(
        run.best_config.to_flat(),
        run.best_objective.f_total,
        &run.trace,
        run.true_evaluations,
        &run.final_report,
    ))
}

/// Mean capture rate of the per-UE neighborhoods under random probes.
#[pyfunction]
#[pyo3(signature = (env, neighborhood_size, gamma=0.8, n_probes=50, seed=0))]
fn neighborhood_capture(
    env: &RadioEnv,
    neighborhood_size: usize,
    gamma: f64,
    n_probes: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64)> {
    let default = core_radio::AntennaConfig::default_for(env.inner.layout().n_cells());
    let neighborhood = core_optimizer::build_neighborhoods(&env.inner, &default, neighborhood_size)
        .map_err(py_err)?;
    let report = core_optimizer::validate_neighborhoods(
        &env.inner,
        &neighborhood,
        &core_radio::ParameterBounds::default(),
        gamma,
        n_probes,
        seed,
    )
    .map_err(py_err)?;
    Ok((report.per_ue, report.mean))
}

/// Runs a full experiment config file; returns the rendered summary table.
#[pyfunction]
#[pyo3(signature = (config_path, out=None, workers=None))]
fn run_experiment(
    py: Python<'_>,
    config_path: PathBuf,
    out: Option<PathBuf>,
    workers: Option<usize>,
) -> PyResult<String> {
    let summary = py
        .allow_threads(|| core_experiment::run_experiment(&config_path, out.as_deref(), workers))
        .map_err(py_err)?;
    Ok(summary.render_table())
}

/// Recomputes aggregates for a run directory; returns the summary table.
#[pyfunction]
fn summarize(dir: PathBuf) -> PyResult<String> {
    core_experiment::summarize_dir(&dir)
        .map(|s| s.render_table())
        .map_err(py_err)
}

#[pymodule]
fn cco(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<NetworkLayout>()?;
    m.add_class::<RadioEnv>()?;
    m.add_class::<SinrReport>()?;
    m.add_class::<Objective>()?;
    m.add_class::<ObjectiveValue>()?;
    m.add_class::<GpModel>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(objective, m)?)?;
    m.add_function(wrap_pyfunction!(expected_improvement, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(random_search, m)?)?;
    m.add_function(wrap_pyfunction!(bo_ei, m)?)?;
    m.add_function(wrap_pyfunction!(default_3gpp, m)?)?;
    m.add_function(wrap_pyfunction!(neighborhood_capture, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    Ok(())
}
