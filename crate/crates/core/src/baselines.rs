//! Baseline optimizers: the 3GPP default configuration, uniform random
//! search, and Bayesian optimization with expected improvement on a single
//! global GP.
//!
//! The BO baseline shares the kernel family and hyperparameter
//! initialization with the proposed optimizer but models the objective as
//! one function of all `3M` parameters, refitting on a training set that
//! grows by one row per iteration. Its per-iteration model and acquisition
//! time is tracked cumulatively, simulator time excluded.

use cpu_time::ProcessTime;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gpr::{FitOptions, GpModel, KernelParams};
use crate::metrics::{objective, ObjectiveSpec, ObjectiveValue};
use crate::optimizer::{default_kernel_init, IterationRecord};
use crate::radio::{AntennaConfig, RadioEnv, SinrReport};

const STREAM_BO_INIT: u64 = 4;
const STREAM_BO_SEARCH: u64 = 5;
const STREAM_RANDOM_SEARCH: u64 = 6;

/// Warm refit budget per BO iteration after the first full fit.
const BO_WARM_FIT_STEPS: usize = 15;
/// Local search rounds and random directions per acquisition restart.
const EI_SEARCH_ROUNDS: usize = 6;
const EI_DIRECTIONS_PER_ROUND: usize = 3;

/// Result of a baseline run, mirroring the optimizer's trace shape.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub best_config: AntennaConfig,
    pub best_objective: ObjectiveValue,
    pub trace: Vec<IterationRecord>,
    pub true_evaluations: u64,
    pub final_report: SinrReport,
}

/// Evaluates the uniform 3GPP default configuration (12 deg downtilt,
/// 10 deg vertical and 70 deg horizontal HPBW) once.
pub fn default_3gpp(env: &RadioEnv, spec: &ObjectiveSpec) -> Result<BaselineRun> {
    spec.validate()?;
    let config = AntennaConfig::default_for(env.layout().n_cells());
    let report = env.evaluate(&config)?;
    let value = objective(&report, spec)?;
    let record = IterationRecord {
        iter: 1,
        predicted_best_f: value.f_total,
        true_f_u_best: value.f_total,
        best_f_so_far: value.f_total,
        zeta_dl: value.zeta_dl,
        zeta_ul: value.zeta_ul,
        r_dl: value.r_dl,
        r_ul: value.r_ul,
        surrogate_ms: 0.0,
        replaced: true,
        cumulative_model_ms: None,
    };
    Ok(BaselineRun {
        best_config: config,
        best_objective: value,
        trace: vec![record],
        true_evaluations: 1,
        final_report: report,
    })
}

/// Uniform random search over the box, one true evaluation per iteration.
pub fn random_search(
    env: &RadioEnv,
    spec: &ObjectiveSpec,
    budget: usize,
    seed: u64,
) -> Result<BaselineRun> {
    spec.validate()?;
    if budget == 0 {
        return Err(Error::InvalidParameter(
            "random search budget must be at least 1".into(),
        ));
    }
    let m = env.layout().n_cells();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_RANDOM_SEARCH);

    let mut best: Option<(AntennaConfig, ObjectiveValue, SinrReport)> = None;
    let mut trace = Vec::with_capacity(budget);
    for k in 1..=budget {
        let config = AntennaConfig::from_flat(&spec.bounds.sample_uniform(m, &mut rng))?;
        let report = env.evaluate(&config)?;
        let value = objective(&report, spec)?;
        let improved = best
            .as_ref()
            .map_or(true, |(_, b, _)| value.f_total >= b.f_total);
        if improved {
            best = Some((config, value, report));
        }
        let (_, best_value, _) = best.as_ref().unwrap();
        trace.push(IterationRecord {
            iter: k,
            predicted_best_f: value.f_total,
            true_f_u_best: value.f_total,
            best_f_so_far: best_value.f_total,
            zeta_dl: best_value.zeta_dl,
            zeta_ul: best_value.zeta_ul,
            r_dl: best_value.r_dl,
            r_ul: best_value.r_ul,
            surrogate_ms: 0.0,
            replaced: improved,
            cumulative_model_ms: None,
        });
    }
    let (best_config, best_objective, final_report) = best.unwrap();
    Ok(BaselineRun {
        best_config,
        best_objective,
        trace,
        true_evaluations: budget as u64,
        final_report,
    })
}

/// Expected improvement for maximization: `(mu - f_best) Phi(z) +
/// sigma phi(z)` with `z = (mu - f_best) / sigma`; at `sigma = 0` it
/// degenerates to `max(0, mu - f_best)`.
pub fn expected_improvement(mean: f64, std: f64, f_best: f64) -> f64 {
    let delta = mean - f_best;
    if std <= 0.0 {
        return delta.max(0.0);
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z = delta / std;
    (delta * normal.cdf(z) + std * normal.pdf(z)).max(0.0)
}

/// BO budget split and seeds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoConfig {
    /// Uniform random evaluations before modeling starts; at least 2.
    pub n_init: usize,
    /// Model-guided evaluations after initialization.
    pub n_iterations: usize,
    pub seed: u64,
    /// Acquisition maximization restarts.
    pub restarts: usize,
}

impl Default for BoConfig {
    fn default() -> Self {
        BoConfig {
            n_init: 10,
            n_iterations: 100,
            seed: 0,
            restarts: 64,
        }
    }
}

/// The growing BO training set: one row per true evaluation.
#[derive(Debug, Clone, Default)]
pub struct BoState {
    /// Flat configuration per evaluation.
    pub inputs: Vec<Vec<f64>>,
    /// True objective per evaluation.
    pub values: Vec<f64>,
}

impl BoState {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// The stateful BO loop; [`bo_ei`] wraps it end to end.
pub struct BoOptimizer<'a> {
    env: &'a RadioEnv,
    spec: ObjectiveSpec,
    config: BoConfig,
    state: BoState,
    params: Option<KernelParams>,
    rng_search: ChaCha8Rng,
    best_config: AntennaConfig,
    best_value: ObjectiveValue,
    best_report: SinrReport,
    trace: Vec<IterationRecord>,
    cumulative_model_ms: f64,
    iter: usize,
}

impl<'a> BoOptimizer<'a> {
    /// Truly evaluates `n_init` uniform random configurations.
    pub fn new(env: &'a RadioEnv, spec: ObjectiveSpec, config: BoConfig) -> Result<Self> {
        spec.validate()?;
        if config.n_init < 2 {
            return Err(Error::InvalidParameter(format!(
                "BO needs at least 2 initial evaluations, got {}",
                config.n_init
            )));
        }
        if config.restarts == 0 {
            return Err(Error::InvalidParameter(
                "BO needs at least 1 acquisition restart".into(),
            ));
        }
        let m = env.layout().n_cells();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(STREAM_BO_INIT);
        let mut state = BoState::default();
        let mut best: Option<(AntennaConfig, ObjectiveValue, SinrReport)> = None;
        for _ in 0..config.n_init {
            let flat = spec.bounds.sample_uniform(m, &mut rng);
            let config_k = AntennaConfig::from_flat(&flat)?;
            let report = env.evaluate(&config_k)?;
            let value = objective(&report, &spec)?;
            if best
                .as_ref()
                .map_or(true, |(_, b, _)| value.f_total > b.f_total)
            {
                best = Some((config_k, value, report));
            }
            state.inputs.push(flat);
            state.values.push(value.f_total);
        }
        let (best_config, best_value, best_report) = best.unwrap();
        let mut rng_search = ChaCha8Rng::seed_from_u64(config.seed);
        rng_search.set_stream(STREAM_BO_SEARCH);
        Ok(BoOptimizer {
            env,
            spec,
            config,
            state,
            params: None,
            rng_search,
            best_config,
            best_value,
            best_report,
            trace: Vec::new(),
            cumulative_model_ms: 0.0,
            iter: 0,
        })
    }

    pub fn state(&self) -> &BoState {
        &self.state
    }

    /// Refits the global GP, maximizes EI with multi-start local search,
    /// truly evaluates the winner, and appends it to the training set.
    pub fn step(&mut self) -> Result<IterationRecord> {
        self.iter += 1;
        let started = ProcessTime::now();

        let m = self.env.layout().n_cells();
        let dim = 3 * m;
        let rows = self.state.len();
        let inputs = DMatrix::from_fn(rows, dim, |r, c| self.state.inputs[r][c]);
        let (init, options) = match &self.params {
            Some(p) => (
                p.clone(),
                FitOptions {
                    n_starts: 1,
                    max_steps: BO_WARM_FIT_STEPS,
                    ..FitOptions::default()
                },
            ),
            None => (
                default_kernel_init(&self.spec.bounds, m),
                FitOptions::default(),
            ),
        };
        let model = GpModel::fit_with_options(inputs, &self.state.values, init, &options)?;
        self.params = Some(model.params().clone());

        let f_best = self
            .state
            .values
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let (candidate, predicted_mean) = self.maximize_ei(&model, f_best)?;
        let model_ms = started.elapsed().as_secs_f64() * 1e3;
        self.cumulative_model_ms += model_ms;

        let config = AntennaConfig::from_flat(&candidate)?;
        let report = self.env.evaluate(&config)?;
        let value = objective(&report, &self.spec)?;
        let improved = value.f_total > self.best_value.f_total;
        if improved {
            self.best_config = config;
            self.best_value = value;
            self.best_report = report;
        }
        self.state.inputs.push(candidate);
        self.state.values.push(value.f_total);

        let record = IterationRecord {
            iter: self.iter,
            predicted_best_f: predicted_mean,
            true_f_u_best: value.f_total,
            best_f_so_far: self.best_value.f_total,
            zeta_dl: self.best_value.zeta_dl,
            zeta_ul: self.best_value.zeta_ul,
            r_dl: self.best_value.r_dl,
            r_ul: self.best_value.r_ul,
            surrogate_ms: model_ms,
            replaced: improved,
            cumulative_model_ms: Some(self.cumulative_model_ms),
        };
        self.trace.push(record.clone());
        Ok(record)
    }

    /// Multi-start gradient-free local search over the box: each restart
    /// greedily follows random directions with a shrinking step.
    fn maximize_ei(&mut self, model: &GpModel, f_best: f64) -> Result<(Vec<f64>, f64)> {
        let m = self.env.layout().n_cells();
        let bounds = self.spec.bounds;
        let ei_at = |x: &[f64]| -> Result<(f64, f64)> {
            let (mean, var) = model.predict_one(x)?;
            Ok((expected_improvement(mean, var.sqrt(), f_best), mean))
        };

        let mut best_x: Option<Vec<f64>> = None;
        let mut best_ei = f64::NEG_INFINITY;
        let mut best_mean = f64::NEG_INFINITY;
        for _ in 0..self.config.restarts {
            let mut x = bounds.sample_uniform(m, &mut self.rng_search);
            let (mut ei, mut mean) = ei_at(&x)?;
            let mut step = 0.25;
            for _ in 0..EI_SEARCH_ROUNDS {
                let mut improved = false;
                for _ in 0..EI_DIRECTIONS_PER_ROUND {
                    let mut cand = x.clone();
                    for (j, c) in cand.iter_mut().enumerate() {
                        let (lo, hi) = bounds.range_at(j, m);
                        *c += self.rng_search.random_range(-1.0..1.0) * step * (hi - lo);
                    }
                    bounds.clip_flat(&mut cand);
                    let (cand_ei, cand_mean) = ei_at(&cand)?;
                    if cand_ei > ei {
                        x = cand;
                        ei = cand_ei;
                        mean = cand_mean;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            if ei > best_ei {
                best_ei = ei;
                best_mean = mean;
                best_x = Some(x);
            }
        }
        Ok((best_x.unwrap(), best_mean))
    }

    pub fn finish(self) -> BaselineRun {
        BaselineRun {
            best_config: self.best_config,
            best_objective: self.best_value,
            trace: self.trace,
            true_evaluations: (self.config.n_init + self.iter) as u64,
            final_report: self.best_report,
        }
    }
}

/// Full BO run: `n_init` random evaluations, then `n_iterations` rounds of
/// refit, EI maximization, and one true evaluation each.
pub fn bo_ei(env: &RadioEnv, spec: ObjectiveSpec, config: BoConfig) -> Result<BaselineRun> {
    let mut opt = BoOptimizer::new(env, spec, config)?;
    for _ in 0..config.n_iterations {
        opt.step()?;
    }
    Ok(opt.finish())
}
