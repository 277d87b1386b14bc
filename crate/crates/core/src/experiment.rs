//! Experiment driver: config file parsing, the algorithms-by-seeds run
//! matrix, CSV artifacts, and aggregate tables.
//!
//! Every run writes a self-contained set of files under one output
//! directory; [`summarize_dir`] recomputes all aggregates purely from those
//! files, and [`run_experiment`] itself goes through the same read-back
//! path so the two can never disagree. All floats in CSV output carry 9
//! significant digits. Given one config and seed list, every output byte is
//! reproducible; the only exception is the timing columns of the trace
//! files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bo_ei, default_3gpp, random_search, BoConfig};
use crate::error::{Error, Result};
use crate::metrics::{objective_from_sinr, quantile, ObjectiveSpec};
use crate::netgen::{generate_hex_layout, load_layout, save_layout, NetworkLayout};
use crate::optimizer::{
    build_neighborhoods, run, validate_neighborhoods, CaptureReport, DeParams, IterationRecord,
    OptimizerSettings,
};
use crate::radio::{AntennaConfig, ParameterBounds, RadioEnv, SinrReport};

pub const TRACE_HEADER: &str =
    "iter,predicted_best_F,true_F_u_best,best_F_so_far,zeta_dl,zeta_ul,r_dl,r_ul,surrogate_ms,replaced";
pub const SINR_HEADER: &str = "ue,serving_cell,dl_sinr_db,ul_sinr_db,ul_tx_power_dbm";
pub const SUMMARY_HEADER: &str = "algorithm,n_runs,median_dl_sinr_db,p10_dl_sinr_db,\
     median_ul_sinr_db,p10_ul_sinr_db,final_zeta_dl,final_zeta_ul,final_r_dl,final_r_ul,\
     mean_best_f,mean_iters_to_95pct";
pub const HISTOGRAM_BINS: usize = 20;

/// Formats a float with 9 significant digits, the CSV-wide convention.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.8e}")
}

/// The algorithms the driver can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "proposed")]
    Proposed,
    #[serde(rename = "bo_ei")]
    BoEi,
    #[serde(rename = "random_search")]
    RandomSearch,
    #[serde(rename = "default_3gpp")]
    Default3gpp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::Proposed,
        Algorithm::BoEi,
        Algorithm::RandomSearch,
        Algorithm::Default3gpp,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            Algorithm::Proposed => "proposed",
            Algorithm::BoEi => "bo_ei",
            Algorithm::RandomSearch => "random_search",
            Algorithm::Default3gpp => "default_3gpp",
        }
    }

    /// The fixed default configuration has no iteration trace.
    pub fn has_trace(self) -> bool {
        self != Algorithm::Default3gpp
    }

    /// BO traces carry the extra cumulative_model_ms column.
    pub fn has_cumulative_column(self) -> bool {
        self == Algorithm::BoEi
    }
}

/// Layout source: either generator parameters or a layout file path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub n_macro_sites: usize,
    pub isd_m: f64,
    pub n_small_cells: usize,
    pub n_ues: usize,
    pub min_small_macro_distance_m: f64,
    pub seed: u64,
}

impl Default for LayoutSection {
    fn default() -> Self {
        LayoutSection {
            path: None,
            n_macro_sites: 3,
            isd_m: 500.0,
            n_small_cells: 0,
            n_ues: 20,
            min_small_macro_distance_m: 40.0,
            seed: 1,
        }
    }
}

/// Objective weights; separate from [`ObjectiveSpec`] so every key has a
/// config-file default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObjectiveSection {
    pub alpha: f64,
    pub beta_dl: f64,
    pub beta_ul: f64,
    pub threshold_db: f64,
    pub bounds: ParameterBounds,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        ObjectiveSection {
            alpha: 0.5,
            beta_dl: 0.5,
            beta_ul: 0.5,
            threshold_db: 0.0,
            bounds: ParameterBounds::default(),
        }
    }
}

impl ObjectiveSection {
    pub fn to_spec(&self) -> ObjectiveSpec {
        ObjectiveSpec {
            alpha: self.alpha,
            beta_dl: self.beta_dl,
            beta_ul: self.beta_ul,
            threshold_db: self.threshold_db,
            bounds: self.bounds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DeSection {
    pub scale_factor: f64,
    pub crossover_prob: f64,
}

impl Default for DeSection {
    fn default() -> Self {
        DeSection {
            scale_factor: 0.7,
            crossover_prob: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerSection {
    pub population_size: usize,
    pub neighborhood_size: usize,
    pub n_iterations: usize,
    pub share_dl_neighborhood: bool,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            population_size: 200,
            neighborhood_size: 8,
            n_iterations: 1000,
            share_dl_neighborhood: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoSection {
    /// Initial random evaluations; defaults to the population size so all
    /// algorithms share one budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_init: Option<usize>,
    pub restarts: usize,
}

impl Default for BoSection {
    fn default() -> Self {
        BoSection {
            n_init: None,
            restarts: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationSection {
    pub fading_samples: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection { fading_samples: 10 }
    }
}

/// Settings for the `validate-neighborhoods` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationSection {
    pub gamma: f64,
    pub n_probes: usize,
    pub seed: u64,
}

impl Default for ValidationSection {
    fn default() -> Self {
        ValidationSection {
            gamma: 0.8,
            n_probes: 50,
            seed: 0,
        }
    }
}

/// The full experiment description, one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub layout: LayoutSection,
    pub objective: ObjectiveSection,
    pub de: DeSection,
    pub optimizer: OptimizerSection,
    pub bo: BoSection,
    pub simulation: SimulationSection,
    pub validation: ValidationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithms: Algorithm::ALL.to_vec(),
            seeds: vec![1, 2, 3, 4, 5],
            output_dir: PathBuf::from("runs"),
            layout: LayoutSection::default(),
            objective: ObjectiveSection::default(),
            de: DeSection::default(),
            optimizer: OptimizerSection::default(),
            bo: BoSection::default(),
            simulation: SimulationSection::default(),
            validation: ValidationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: PathBuf::from("<config>"),
            message: e.to_string(),
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Schema {
            field: "config".into(),
            message: e.to_string(),
        })
    }

    /// Builds the layout this config describes, generating or loading it.
    pub fn resolve_layout(&self) -> Result<NetworkLayout> {
        match &self.layout.path {
            Some(path) => load_layout(path),
            None => generate_hex_layout(
                self.layout.n_macro_sites,
                self.layout.isd_m,
                self.layout.n_small_cells,
                self.layout.n_ues,
                self.layout.min_small_macro_distance_m,
                self.layout.seed,
            ),
        }
    }

    pub fn bo_config(&self, seed: u64) -> BoConfig {
        BoConfig {
            n_init: self.bo.n_init.unwrap_or(self.optimizer.population_size),
            n_iterations: self.optimizer.n_iterations,
            seed,
            restarts: self.bo.restarts,
        }
    }

    pub fn de_params(&self, seed: u64) -> DeParams {
        DeParams {
            scale_factor: self.de.scale_factor,
            crossover_prob: self.de.crossover_prob,
            rng_seed: seed,
        }
    }

    pub fn optimizer_settings(&self, seed: u64) -> OptimizerSettings {
        OptimizerSettings {
            population_size: self.optimizer.population_size,
            neighborhood_size: self.optimizer.neighborhood_size,
            n_iterations: self.optimizer.n_iterations,
            de: self.de_params(seed),
            share_dl_neighborhood: self.optimizer.share_dl_neighborhood,
        }
    }

    /// Checks every module precondition this config feeds into, against the
    /// resolved layout, before any run starts.
    pub fn validate(&self, layout: &NetworkLayout) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("no algorithms selected".into()));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if self.algorithms[..i].contains(a) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate algorithm {}",
                    a.slug()
                )));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidParameter("no seeds given".into()));
        }
        for (i, s) in self.seeds.iter().enumerate() {
            if self.seeds[..i].contains(s) {
                return Err(Error::InvalidParameter(format!("duplicate seed {s}")));
            }
        }
        layout.validate()?;
        self.objective.to_spec().validate()?;
        self.de_params(0).validate()?;
        let m = layout.n_cells();
        if self.optimizer.population_size < 4 {
            return Err(Error::InvalidParameter(format!(
                "population_size must be at least 4, got {}",
                self.optimizer.population_size
            )));
        }
        if self.optimizer.neighborhood_size == 0 || self.optimizer.neighborhood_size > m {
            return Err(Error::InvalidParameter(format!(
                "neighborhood_size must lie in 1..={m}, got {}",
                self.optimizer.neighborhood_size
            )));
        }
        let bo = self.bo_config(0);
        if bo.n_init < 2 {
            return Err(Error::InvalidParameter(format!(
                "bo.n_init must be at least 2, got {}",
                bo.n_init
            )));
        }
        if bo.restarts == 0 {
            return Err(Error::InvalidParameter(
                "bo.restarts must be at least 1".into(),
            ));
        }
        if self.simulation.fading_samples == 0 {
            return Err(Error::InvalidParameter(
                "simulation.fading_samples must be at least 1".into(),
            ));
        }
        if !(0.6..=1.0).contains(&self.validation.gamma) {
            return Err(Error::InvalidParameter(format!(
                "validation.gamma must lie in [0.6, 1], got {}",
                self.validation.gamma
            )));
        }
        if self.validation.n_probes == 0 {
            return Err(Error::InvalidParameter(
                "validation.n_probes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn trace_path(dir: &Path, algo: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("trace_{}_seed{}.csv", algo.slug(), seed))
}

pub fn sinr_path(dir: &Path, algo: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("sinr_{}_seed{}.csv", algo.slug(), seed))
}

pub fn best_config_path(dir: &Path, algo: Algorithm, seed: u64) -> PathBuf {
    dir.join(format!("best_config_{}_seed{}.toml", algo.slug(), seed))
}

fn render_trace(records: &[IterationRecord], with_cumulative: bool) -> String {
    let mut out = String::from(TRACE_HEADER);
    if with_cumulative {
        out.push_str(",cumulative_model_ms");
    }
    out.push('\n');
    for r in records {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.iter,
            fmt_float(r.predicted_best_f),
            fmt_float(r.true_f_u_best),
            fmt_float(r.best_f_so_far),
            fmt_float(r.zeta_dl),
            fmt_float(r.zeta_ul),
            fmt_float(r.r_dl),
            fmt_float(r.r_ul),
            fmt_float(r.surrogate_ms),
            r.replaced,
        );
        if with_cumulative {
            let _ = write!(out, ",{}", fmt_float(r.cumulative_model_ms.unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

fn render_sinr(report: &SinrReport) -> String {
    let mut out = String::from(SINR_HEADER);
    out.push('\n');
    for n in 0..report.dl_sinr_db.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            n,
            report.serving_cell[n],
            fmt_float(report.dl_sinr_db[n]),
            fmt_float(report.ul_sinr_db[n]),
            fmt_float(report.ul_tx_power_dbm[n]),
        );
    }
    out
}

/// Artifacts of one (algorithm, seed) run as read back from disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub dl_sinr_db: Vec<f64>,
    pub ul_sinr_db: Vec<f64>,
    pub best_config: AntennaConfig,
    /// Best-objective trajectory; single-entry for the fixed default.
    pub best_f: Vec<f64>,
    /// Final outage and rate components (zeta_dl, zeta_ul, r_dl, r_ul).
    pub components: [f64; 4],
}

fn execute_one(
    env: &RadioEnv,
    config: &ExperimentConfig,
    algo: Algorithm,
    seed: u64,
    dir: &Path,
) -> Result<()> {
    let spec = config.objective.to_spec();
    let budget = config.optimizer.population_size + config.optimizer.n_iterations;
    let (best_config, report, trace) = match algo {
        Algorithm::Proposed => {
            let result = run(env, spec, config.optimizer_settings(seed))?;
            (result.best_config, result.final_report, Some(result.trace))
        }
        Algorithm::BoEi => {
            let result = bo_ei(env, spec, config.bo_config(seed))?;
            (result.best_config, result.final_report, Some(result.trace))
        }
        Algorithm::RandomSearch => {
            let result = random_search(env, &spec, budget, seed)?;
            (result.best_config, result.final_report, Some(result.trace))
        }
        Algorithm::Default3gpp => {
            let result = default_3gpp(env, &spec)?;
            (result.best_config, result.final_report, None)
        }
    };
    if let Some(records) = &trace {
        fs::write(
            trace_path(dir, algo, seed),
            render_trace(records, algo.has_cumulative_column()),
        )?;
    }
    fs::write(sinr_path(dir, algo, seed), render_sinr(&report))?;
    let dump = toml::to_string(&best_config).map_err(|e| Error::Schema {
        field: "best_config".into(),
        message: e.to_string(),
    })?;
    fs::write(best_config_path(dir, algo, seed), dump)?;
    Ok(())
}

/// A config whose layout has been resolved and whose parameters passed
/// validation; separates config errors from runtime errors.
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub layout: NetworkLayout,
    pub out_dir: PathBuf,
}

/// Parses and validates; every error here is a config error.
pub fn prepare(config_path: &Path, out_override: Option<&Path>) -> Result<PreparedExperiment> {
    let config = ExperimentConfig::load(config_path)?;
    let layout = config.resolve_layout()?;
    config.validate(&layout)?;
    let out_dir = out_override
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir.clone());
    Ok(PreparedExperiment {
        config,
        layout,
        out_dir,
    })
}

/// Runs the full algorithms-by-seeds matrix and writes all artifacts and
/// aggregates. Runs execute in parallel up to `workers` threads (0 or None
/// picks the machine default).
pub fn execute(prepared: &PreparedExperiment, workers: Option<usize>) -> Result<Summary> {
    let PreparedExperiment {
        config,
        layout,
        out_dir,
    } = prepared;
    fs::create_dir_all(out_dir)?;
    save_layout(layout, out_dir.join("layout.toml"))?;
    fs::write(out_dir.join("config.toml"), config.to_toml()?)?;

    let tasks: Vec<(Algorithm, u64)> = config
        .algorithms
        .iter()
        .flat_map(|&a| config.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    pool.install(|| {
        tasks
            .par_iter()
            .map(|&(algo, seed)| {
                let env = RadioEnv::with_fading_samples(layout, config.simulation.fading_samples)
                    .map_err(|e| run_failed(algo, seed, &e))?;
                execute_one(&env, config, algo, seed, out_dir)
                    .map_err(|e| run_failed(algo, seed, &e))
            })
            .collect::<Result<Vec<()>>>()
    })?;
    summarize_dir(out_dir)
}

fn run_failed(algo: Algorithm, seed: u64, e: &Error) -> Error {
    Error::RunFailed {
        algorithm: algo.slug().into(),
        seed,
        message: e.to_string(),
    }
}

/// Convenience wrapper: prepare then execute.
pub fn run_experiment(
    config_path: &Path,
    out_override: Option<&Path>,
    workers: Option<usize>,
) -> Result<Summary> {
    let prepared = prepare(config_path, out_override)?;
    execute(&prepared, workers)
}

/// One aggregate row per algorithm, averaged over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub n_runs: usize,
    pub median_dl_sinr_db: f64,
    pub p10_dl_sinr_db: f64,
    pub median_ul_sinr_db: f64,
    pub p10_ul_sinr_db: f64,
    pub final_zeta_dl: f64,
    pub final_zeta_ul: f64,
    pub final_r_dl: f64,
    pub final_r_ul: f64,
    pub mean_best_f: f64,
    pub mean_iters_to_95pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    /// Plain-text table for terminal output.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<14} {:>5} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10}",
            "algorithm",
            "runs",
            "med DL dB",
            "p10 DL dB",
            "med UL dB",
            "p10 UL dB",
            "best F",
            "iters95"
        );
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<14} {:>5} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>10.4} {:>10.1}",
                r.algorithm.slug(),
                r.n_runs,
                r.median_dl_sinr_db,
                r.p10_dl_sinr_db,
                r.median_ul_sinr_db,
                r.p10_ul_sinr_db,
                r.mean_best_f,
                r.mean_iters_to_95pct
            );
        }
        out
    }
}

fn parse_float(path: &Path, token: &str) -> Result<f64> {
    token.parse::<f64>().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: format!("bad float {token:?}: {e}"),
    })
}

fn read_csv_rows(path: &Path, expected_header: &str) -> Result<Vec<Vec<String>>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if !header.starts_with(expected_header) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("unexpected header {header:?}"),
        });
    }
    Ok(lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect())
}

fn read_artifacts(
    dir: &Path,
    spec: &ObjectiveSpec,
    algo: Algorithm,
    seed: u64,
) -> Result<RunArtifacts> {
    let sinr_file = sinr_path(dir, algo, seed);
    let mut dl = Vec::new();
    let mut ul = Vec::new();
    for row in read_csv_rows(&sinr_file, SINR_HEADER)? {
        if row.len() != 5 {
            return Err(Error::Parse {
                path: sinr_file.clone(),
                message: format!("expected 5 columns, got {}", row.len()),
            });
        }
        dl.push(parse_float(&sinr_file, &row[2])?);
        ul.push(parse_float(&sinr_file, &row[3])?);
    }
    let config_file = best_config_path(dir, algo, seed);
    let text = fs::read_to_string(&config_file)?;
    let best_config: AntennaConfig = toml::from_str(&text).map_err(|e| Error::Parse {
        path: config_file,
        message: e.to_string(),
    })?;

    let (best_f, components) = if algo.has_trace() {
        let trace_file = trace_path(dir, algo, seed);
        let rows = read_csv_rows(&trace_file, TRACE_HEADER)?;
        if rows.is_empty() {
            return Err(Error::Parse {
                path: trace_file,
                message: "empty trace".into(),
            });
        }
        let mut best_f = Vec::with_capacity(rows.len());
        for row in &rows {
            best_f.push(parse_float(&trace_file, &row[3])?);
        }
        let last = rows.last().unwrap();
        let components = [
            parse_float(&trace_file, &last[4])?,
            parse_float(&trace_file, &last[5])?,
            parse_float(&trace_file, &last[6])?,
            parse_float(&trace_file, &last[7])?,
        ];
        (best_f, components)
    } else {
        let value = objective_from_sinr(&dl, &ul, spec)?;
        (
            vec![value.f_total],
            [value.zeta_dl, value.zeta_ul, value.r_dl, value.r_ul],
        )
    };
    Ok(RunArtifacts {
        algorithm: algo,
        seed,
        dl_sinr_db: dl,
        ul_sinr_db: ul,
        best_config,
        best_f,
        components,
    })
}

/// First iteration (1-based) at which the best objective reaches 95% of its
/// total improvement over the trace.
pub fn iterations_to_95pct(best_f: &[f64]) -> f64 {
    let first = best_f[0];
    let last = *best_f.last().unwrap();
    let target = first + 0.95 * (last - first);
    best_f
        .iter()
        .position(|&f| f >= target)
        .map_or(best_f.len(), |i| i + 1) as f64
}

/// Uniform-bin histogram over `[lo, hi]`; values at `hi` land in the last
/// bin. Returns (bin_lo, bin_hi, count) triples.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, f64, usize)> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let idx = (((v - lo) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    (0..bins)
        .map(|i| {
            (
                lo + i as f64 * width,
                lo + (i + 1) as f64 * width,
                counts[i],
            )
        })
        .collect()
}

fn render_cdf(values: &[f64]) -> String {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    let mut out = String::from("sinr_db,cdf\n");
    for (i, v) in sorted.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{}",
            fmt_float(*v),
            fmt_float((i + 1) as f64 / n as f64)
        );
    }
    out
}

fn render_histogram(values: &[f64], lo: f64, hi: f64) -> String {
    let mut out = String::from("bin_lo,bin_hi,count\n");
    for (a, b, c) in histogram(values, lo, hi, HISTOGRAM_BINS) {
        let _ = writeln!(out, "{},{},{}", fmt_float(a), fmt_float(b), c);
    }
    out
}

/// Recomputes every aggregate file from the per-run artifacts in `dir` and
/// returns the summary. Missing artifact files produce an error naming all
/// of them.
pub fn summarize_dir(dir: &Path) -> Result<Summary> {
    let config_file = dir.join("config.toml");
    if !config_file.exists() {
        return Err(Error::MissingArtifacts(vec!["config.toml".into()]));
    }
    let config = ExperimentConfig::load(&config_file)?;
    let spec = config.objective.to_spec();

    let mut missing = Vec::new();
    for &algo in &config.algorithms {
        for &seed in &config.seeds {
            let mut required = vec![
                sinr_path(dir, algo, seed),
                best_config_path(dir, algo, seed),
            ];
            if algo.has_trace() {
                required.push(trace_path(dir, algo, seed));
            }
            for path in required {
                if !path.exists() {
                    missing.push(path.file_name().unwrap().to_string_lossy().into_owned());
                }
            }
        }
    }
    if !missing.is_empty() {
        missing.sort();
        return Err(Error::MissingArtifacts(missing));
    }

    let mut rows = Vec::new();
    let mut summary_csv = String::from(SUMMARY_HEADER);
    summary_csv.push('\n');
    for &algo in &config.algorithms {
        let runs: Vec<RunArtifacts> = config
            .seeds
            .iter()
            .map(|&seed| read_artifacts(dir, &spec, algo, seed))
            .collect::<Result<_>>()?;
        let n = runs.len();
        let mean = |f: &dyn Fn(&RunArtifacts) -> f64| -> f64 {
            runs.iter().map(|r| f(r)).sum::<f64>() / n as f64
        };
        let row = SummaryRow {
            algorithm: algo,
            n_runs: n,
            median_dl_sinr_db: mean(&|r| quantile(&r.dl_sinr_db, 0.5).unwrap_or(f64::NAN)),
            p10_dl_sinr_db: mean(&|r| quantile(&r.dl_sinr_db, 0.1).unwrap_or(f64::NAN)),
            median_ul_sinr_db: mean(&|r| quantile(&r.ul_sinr_db, 0.5).unwrap_or(f64::NAN)),
            p10_ul_sinr_db: mean(&|r| quantile(&r.ul_sinr_db, 0.1).unwrap_or(f64::NAN)),
            final_zeta_dl: mean(&|r| r.components[0]),
            final_zeta_ul: mean(&|r| r.components[1]),
            final_r_dl: mean(&|r| r.components[2]),
            final_r_ul: mean(&|r| r.components[3]),
            mean_best_f: mean(&|r| *r.best_f.last().unwrap()),
            mean_iters_to_95pct: mean(&|r| iterations_to_95pct(&r.best_f)),
        };
        let _ = writeln!(
            summary_csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.algorithm.slug(),
            row.n_runs,
            fmt_float(row.median_dl_sinr_db),
            fmt_float(row.p10_dl_sinr_db),
            fmt_float(row.median_ul_sinr_db),
            fmt_float(row.p10_ul_sinr_db),
            fmt_float(row.final_zeta_dl),
            fmt_float(row.final_zeta_ul),
            fmt_float(row.final_r_dl),
            fmt_float(row.final_r_ul),
            fmt_float(row.mean_best_f),
            fmt_float(row.mean_iters_to_95pct),
        );
        rows.push(row);

        let pooled_dl: Vec<f64> = runs.iter().flat_map(|r| r.dl_sinr_db.clone()).collect();
        let pooled_ul: Vec<f64> = runs.iter().flat_map(|r| r.ul_sinr_db.clone()).collect();
        fs::write(
            dir.join(format!("cdf_dl_{}.csv", algo.slug())),
            render_cdf(&pooled_dl),
        )?;
        fs::write(
            dir.join(format!("cdf_ul_{}.csv", algo.slug())),
            render_cdf(&pooled_ul),
        )?;

        let mut params: BTreeMap<&str, (Vec<f64>, (f64, f64))> = BTreeMap::new();
        let m = runs[0].best_config.n_cells();
        let tilts: Vec<f64> = runs
            .iter()
            .flat_map(|r| {
                (0..m)
                    .map(|c| r.best_config.downtilt_deg(c))
                    .collect::<Vec<_>>()
            })
            .collect();
        let vbw: Vec<f64> = runs
            .iter()
            .flat_map(|r| {
                (0..m)
                    .map(|c| r.best_config.vertical_hpbw_deg(c))
                    .collect::<Vec<_>>()
            })
            .collect();
        let hbw: Vec<f64> = runs
            .iter()
            .flat_map(|r| {
                (0..m)
                    .map(|c| r.best_config.horizontal_hpbw_deg(c))
                    .collect::<Vec<_>>()
            })
            .collect();
        params.insert("downtilt_deg", (tilts, spec.bounds.downtilt_deg));
        params.insert("vertical_hpbw_deg", (vbw, spec.bounds.vertical_hpbw_deg));
        params.insert(
            "horizontal_hpbw_deg",
            (hbw, spec.bounds.horizontal_hpbw_deg),
        );
        for (name, (values, (lo, hi))) in params {
            fs::write(
                dir.join(format!("hist_{}_{}.csv", name, algo.slug())),
                render_histogram(&values, lo, hi),
            )?;
        }
    }
    fs::write(dir.join("summary.csv"), summary_csv)?;
    Ok(Summary { rows })
}

/// Builds the neighborhoods a config describes and probes their capture
/// rate; the `validate-neighborhoods` command.
pub fn validate_neighborhoods_for(prepared: &PreparedExperiment) -> Result<CaptureReport> {
    let config = &prepared.config;
    let env = RadioEnv::with_fading_samples(&prepared.layout, config.simulation.fading_samples)?;
    let default = AntennaConfig::default_for(prepared.layout.n_cells());
    let mut neighborhood = build_neighborhoods(&env, &default, config.optimizer.neighborhood_size)?;
    if config.optimizer.share_dl_neighborhood {
        neighborhood.ul = neighborhood.dl.clone();
    }
    validate_neighborhoods(
        &env,
        &neighborhood,
        &config.objective.bounds,
        config.validation.gamma,
        config.validation.n_probes,
        config.validation.seed,
    )
}

/// Least-squares fit of `y = a x^b + c` by scanning the exponent and
/// solving the linear subproblem exactly at each candidate.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 3, "need at least 3 points");
    let residual = |b: f64| -> (f64, f64, f64) {
        // Linear LSQ for (a, c) with basis [x^b, 1].
        let n = xs.len() as f64;
        let mut spp = 0.0;
        let mut sp = 0.0;
        let mut spy = 0.0;
        let mut sy = 0.0;
        for (&x, &y) in xs.iter().zip(ys) {
            let p = x.powf(b);
            spp += p * p;
            sp += p;
            spy += p * y;
            sy += y;
        }
        let det = spp * n - sp * sp;
        let (a, c) = if det.abs() < 1e-30 {
            (0.0, sy / n)
        } else {
            ((spy * n - sp * sy) / det, (spp * sy - sp * spy) / det)
        };
        let rss: f64 = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let e = y - (a * x.powf(b) + c);
                e * e
            })
            .sum();
        (rss, a, c)
    };

    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    let mut b = 0.05;
    while b <= 6.0 {
        let (rss, a, c) = residual(b);
        if rss < best.0 {
            best = (rss, a, b, c);
        }
        b += 0.05;
    }
    // Golden-section refinement around the best grid point.
    let mut lo = (best.2 - 0.05).max(0.01);
    let mut hi = best.2 + 0.05;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let x1 = hi - phi * (hi - lo);
        let x2 = lo + phi * (hi - lo);
        if residual(x1).0 < residual(x2).0 {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let b = 0.5 * (lo + hi);
    let (_, a, c) = residual(b);
    (a, b, c)
}
