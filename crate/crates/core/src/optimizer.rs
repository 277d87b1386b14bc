//! Surrogate-guided differential evolution.
//!
//! Each iteration generates one trial per population member with
//! DE/current-to-best/1 mutation and Bernoulli crossover, predicts every
//! trial's per-UE SINRs with Gaussian process surrogates trained on the
//! antenna parameters of that UE's neighboring cells, evaluates only the
//! trial with the best predicted objective on the true simulator, and
//! replaces the worst population member when the true value is at least as
//! good. The population size stays fixed, so per-iteration surrogate cost
//! is bounded by a constant.

use cpu_time::ProcessTime;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gpr::{FitOptions, GpModel, KernelParams};
use crate::metrics::{objective, objective_from_sinr, ObjectiveSpec, ObjectiveValue};
use crate::radio::{AntennaConfig, ParameterBounds, RadioEnv, SinrReport};

// RNG streams derived from the master seed, one per stochastic operator.
const STREAM_INIT: u64 = 0;
const STREAM_MUTATION: u64 = 1;
const STREAM_CROSSOVER: u64 = 2;
const STREAM_PROBE: u64 = 3;

/// Populations up to this size refit surrogate hyperparameters every
/// iteration; larger ones refit on the [`REFIT_PERIOD`] cadence with warm
/// starts and reuse frozen hyperparameters in between.
const FULL_REFIT_MAX_POP: usize = 50;
const REFIT_PERIOD: usize = 10;
const WARM_FIT_STEPS: usize = 15;

/// Differential evolution parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DeParams {
    /// Mutation scale factor `F` in `(0, 1)`.
    pub scale_factor: f64,
    /// Per-coordinate probability of taking the mutant gene, in `[0, 1]`.
    pub crossover_prob: f64,
    /// Master seed; operator streams are derived from it.
    pub rng_seed: u64,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams {
            scale_factor: 0.7,
            crossover_prob: 0.8,
            rng_seed: 0,
        }
    }
}

impl DeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale_factor.is_finite() && self.scale_factor > 0.0 && self.scale_factor < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "scale_factor must lie in (0, 1), got {}",
                self.scale_factor
            )));
        }
        if !(self.crossover_prob.is_finite() && (0.0..=1.0).contains(&self.crossover_prob)) {
            return Err(Error::InvalidParameter(format!(
                "crossover_prob must lie in [0, 1], got {}",
                self.crossover_prob
            )));
        }
        Ok(())
    }
}

/// The evolving population: flat configuration vectors plus the true SINRs
/// and objective of every member.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    /// `S` flat configuration vectors of length `3M`.
    pub configs: Vec<Vec<f64>>,
    /// True downlink SINR rows, one per member.
    pub dl_sinr: Vec<Vec<f64>>,
    /// True uplink SINR rows, one per member.
    pub ul_sinr: Vec<Vec<f64>>,
    /// True objective per member, recomputable from the stored SINRs.
    pub objective: Vec<f64>,
}

impl Population {
    pub fn size(&self) -> usize {
        self.configs.len()
    }

    /// Index of the member with maximal objective, ties to the lowest index.
    pub fn best_index(&self) -> usize {
        argmax(&self.objective)
    }

    /// Index of the member with minimal objective, ties to the lowest index.
    pub fn worst_index(&self) -> usize {
        argmin(&self.objective)
    }
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// Per-UE lists of the strongest cells under the default configuration,
/// separately for downlink and uplink.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    /// Per UE: cell ids in descending default downlink RSRP order.
    pub dl: Vec<Vec<usize>>,
    /// Per UE: cell ids in descending default uplink received power order.
    pub ul: Vec<Vec<usize>>,
    /// Common list length.
    pub size: usize,
}

/// Ranks cell indices by descending value, ties to the lower id.
fn rank_cells(values: &[f64]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..values.len()).collect();
    ids.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap().then(a.cmp(&b)));
    ids
}

/// Builds per-UE neighborhoods of the `size` strongest cells under
/// `default_config`. Downlink ranks cells by RSRP; uplink ranks them by the
/// power received from the UE under default fractional power control.
pub fn build_neighborhoods(
    env: &RadioEnv,
    default_config: &AntennaConfig,
    size: usize,
) -> Result<Neighborhood> {
    let m = env.layout().n_cells();
    let n_ues = env.layout().n_ues();
    if size == 0 || size > m {
        return Err(Error::InvalidParameter(format!(
            "neighborhood size must lie in 1..={m}, got {size}"
        )));
    }
    let rsrp = env.rsrp_matrix(default_config)?;
    let mut dl = Vec::with_capacity(n_ues);
    let mut ul = Vec::with_capacity(n_ues);
    for n in 0..n_ues {
        let dl_col: Vec<f64> = (0..m).map(|c| rsrp[c][n]).collect();
        let serving = argmax(&dl_col);
        let coupling_loss = env.layout().cells[serving].tx_power_dbm - rsrp[serving][n];
        let pt = crate::radio::ul_tx_power(
            coupling_loss,
            crate::radio::N_RESOURCE_BLOCKS,
            crate::radio::UL_P0_DBM,
            crate::radio::UL_PATHLOSS_COMPENSATION,
            crate::radio::MAX_UL_TX_POWER_DBM,
        );
        // Received UL power at cell c: pt + gain - pl - shadow
        //   = pt + rsrp[c][n] - tx_power[c].
        let ul_col: Vec<f64> = (0..m)
            .map(|c| pt + rsrp[c][n] - env.layout().cells[c].tx_power_dbm)
            .collect();
        dl.push(rank_cells(&dl_col)[..size].to_vec());
        ul.push(rank_cells(&ul_col)[..size].to_vec());
    }
    Ok(Neighborhood { dl, ul, size })
}

/// Per-UE capture statistics from [`validate_neighborhoods`].
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureReport {
    /// Fraction of probes per UE in which all top interferers were inside
    /// the stored downlink neighborhood.
    pub per_ue: Vec<f64>,
    pub mean: f64,
    pub gamma: f64,
    /// Number of strongest interferers checked, `ceil(gamma * size)`.
    pub top_k: usize,
    pub n_probes: usize,
}

/// Probes random configurations and reports, per UE, how often its
/// strongest `ceil(gamma * size)` interfering cells (by RSRP, excluding the
/// serving cell) all lie inside the stored downlink neighborhood.
pub fn validate_neighborhoods(
    env: &RadioEnv,
    neighborhood: &Neighborhood,
    bounds: &ParameterBounds,
    gamma: f64,
    n_probe_configs: usize,
    seed: u64,
) -> Result<CaptureReport> {
    if !(0.6..=1.0).contains(&gamma) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in [0.6, 1], got {gamma}"
        )));
    }
    if n_probe_configs == 0 {
        return Err(Error::InvalidParameter(
            "n_probe_configs must be at least 1".into(),
        ));
    }
    let m = env.layout().n_cells();
    let n_ues = env.layout().n_ues();
    let top_k = (gamma * neighborhood.size as f64).ceil() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_PROBE);

    let mut captured = vec![0usize; n_ues];
    for _ in 0..n_probe_configs {
        let config = AntennaConfig::from_flat(&bounds.sample_uniform(m, &mut rng))?;
        let rsrp = env.rsrp_matrix(&config)?;
        for n in 0..n_ues {
            let col: Vec<f64> = (0..m).map(|c| rsrp[c][n]).collect();
            let ranked = rank_cells(&col);
            let serving = ranked[0];
            let ok = ranked
                .iter()
                .filter(|&&c| c != serving)
                .take(top_k)
                .all(|c| neighborhood.dl[n].contains(c));
            if ok {
                captured[n] += 1;
            }
        }
    }
    let per_ue: Vec<f64> = captured
        .iter()
        .map(|&c| c as f64 / n_probe_configs as f64)
        .collect();
    let mean = per_ue.iter().sum::<f64>() / n_ues as f64;
    Ok(CaptureReport {
        per_ue,
        mean,
        gamma,
        top_k,
        n_probes: n_probe_configs,
    })
}

/// DE/current-to-best/1 mutation of member `i`:
/// `v = x_i + F (x_best - x_i) + F (x_r1 - x_r2)`, clipped into the box.
/// `r1` and `r2` are drawn uniformly without replacement from the indices
/// excluding `i` and the current best.
pub fn mutate(
    pop: &Population,
    i: usize,
    bounds: &ParameterBounds,
    params: &DeParams,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    let s = pop.size();
    if s < 4 {
        return Err(Error::InvalidParameter(format!(
            "mutation needs a population of at least 4, got {s}"
        )));
    }
    let best = pop.best_index();
    let mut draw = |exclude: &[usize]| loop {
        let r = rng.random_range(0..s);
        if !exclude.contains(&r) {
            return r;
        }
    };
    let r1 = draw(&[i, best]);
    let r2 = draw(&[i, best, r1]);

    let x = &pop.configs[i];
    let xb = &pop.configs[best];
    let x1 = &pop.configs[r1];
    let x2 = &pop.configs[r2];
    let f = params.scale_factor;
    let mut v: Vec<f64> = (0..x.len())
        .map(|j| x[j] + f * (xb[j] - x[j]) + f * (x1[j] - x2[j]))
        .collect();
    bounds.clip_flat(&mut v);
    Ok(v)
}

/// Bernoulli crossover: each coordinate takes the mutant gene with
/// probability `crossover_prob`, otherwise the parent gene. No coordinate
/// is forced, so `u = x` is possible.
pub fn crossover(x: &[f64], v: &[f64], params: &DeParams, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert_eq!(x.len(), v.len());
    x.iter()
        .zip(v)
        .map(|(&xj, &vj)| {
            if rng.random_range(0.0..1.0) < params.crossover_prob {
                vj
            } else {
                xj
            }
        })
        .collect()
}

/// Frozen surrogate hyperparameters carried across iterations, one slot per
/// (UE, link direction).
#[derive(Debug, Clone, Default)]
pub struct SurrogateState {
    dl: Vec<Option<KernelParams>>,
    ul: Vec<Option<KernelParams>>,
}

impl SurrogateState {
    pub fn new(n_ues: usize) -> Self {
        SurrogateState {
            dl: vec![None; n_ues],
            ul: vec![None; n_ues],
        }
    }
}

/// Starting hyperparameters for a GP over the parameters of `size` cells,
/// shared by the per-UE surrogates and the BO baseline: one length scale
/// per parameter block, set to half the box width.
pub fn default_kernel_init(bounds: &ParameterBounds, size: usize) -> KernelParams {
    let mut length_scales = Vec::with_capacity(3 * size);
    for (lo, hi) in [
        bounds.downtilt_deg,
        bounds.vertical_hpbw_deg,
        bounds.horizontal_hpbw_deg,
    ] {
        length_scales.extend(std::iter::repeat((hi - lo) / 2.0).take(size));
    }
    KernelParams {
        length_scales,
        signal_variance: 1.0,
        noise_variance: 1e-2,
    }
}

/// Extracts the `3 * cells.len()` surrogate inputs of one flat config:
/// tilts of the listed cells, then their vertical, then horizontal
/// beamwidths.
fn neighborhood_inputs(flat: &[f64], cells: &[usize], m: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(3 * cells.len());
    for block in 0..3 {
        for &c in cells {
            v.push(flat[block * m + c]);
        }
    }
    v
}

fn fit_link_model(
    inputs: DMatrix<f64>,
    targets: &[f64],
    init: &KernelParams,
    stored: &Option<KernelParams>,
    refit: bool,
) -> Result<(GpModel, Option<KernelParams>)> {
    match (stored, refit) {
        (Some(params), false) => {
            let model = GpModel::fit_frozen(inputs, targets, params.clone())?;
            Ok((model, None))
        }
        (Some(params), true) => {
            let options = FitOptions {
                n_starts: 1,
                max_steps: WARM_FIT_STEPS,
                ..FitOptions::default()
            };
            let model = GpModel::fit_with_options(inputs, targets, params.clone(), &options)?;
            let fitted = model.params().clone();
            Ok((model, Some(fitted)))
        }
        (None, _) => {
            let model = GpModel::fit(inputs, targets, init.clone())?;
            let fitted = model.params().clone();
            Ok((model, Some(fitted)))
        }
    }
}

/// Predicted per-UE SINRs for every trial, one column per UE.
#[derive(Debug, Clone)]
pub struct SurrogatePredictions {
    /// `trials.len()` rows of `N` predicted downlink SINRs (dB).
    pub dl: Vec<Vec<f64>>,
    /// `trials.len()` rows of `N` predicted uplink SINRs (dB).
    pub ul: Vec<Vec<f64>>,
}

/// Fits (or reuses) the per-UE link surrogates and predicts the SINRs of
/// every trial. When a fit fails the affected UE falls back to
/// nearest-neighbor prediction in its input space and a diagnostic is
/// logged. Hyperparameters are stored into `state` for reuse; `refit`
/// selects between refitting (warm-started when state exists) and reusing
/// the frozen hyperparameters.
pub fn surrogate_predict(
    trials: &[Vec<f64>],
    pop: &Population,
    neighborhood: &Neighborhood,
    spec: &ObjectiveSpec,
    state: &mut SurrogateState,
    refit: bool,
) -> Result<SurrogatePredictions> {
    if trials.is_empty() {
        return Err(Error::EmptyInput("no trial vectors".into()));
    }
    let s = pop.size();
    if s == 0 {
        return Err(Error::EmptyInput("empty population".into()));
    }
    let n_ues = pop.dl_sinr[0].len();
    let m = pop.configs[0].len() / 3;
    let init = default_kernel_init(&spec.bounds, neighborhood.size);

    // One task per (link, UE); rayon preserves collection order.
    let tasks: Vec<(bool, usize)> = (0..n_ues)
        .map(|n| (true, n))
        .chain((0..n_ues).map(|n| (false, n)))
        .collect();
    let results: Vec<(Vec<f64>, Option<KernelParams>)> = tasks
        .par_iter()
        .map(|&(is_dl, n)| {
            let cells = if is_dl {
                &neighborhood.dl[n]
            } else {
                &neighborhood.ul[n]
            };
            let sinr = if is_dl { &pop.dl_sinr } else { &pop.ul_sinr };
            let stored = if is_dl { &state.dl[n] } else { &state.ul[n] };
            let targets: Vec<f64> = (0..s).map(|i| sinr[i][n]).collect();
            let rows: Vec<Vec<f64>> = pop
                .configs
                .iter()
                .map(|c| neighborhood_inputs(c, cells, m))
                .collect();
            let inputs = DMatrix::from_fn(s, 3 * cells.len(), |r, c| rows[r][c]);
            match fit_link_model(inputs, &targets, &init, stored, refit) {
                Ok((model, new_params)) => {
                    let preds = trials
                        .iter()
                        .map(|t| {
                            let x = neighborhood_inputs(t, cells, m);
                            model.predict_one(&x).map(|(mean, _)| mean)
                        })
                        .collect::<Result<Vec<f64>>>();
                    match preds {
                        Ok(p) => (p, new_params),
                        Err(e) => {
                            log::warn!(
                                "surrogate prediction failed for ue {n} ({}): {e}; \
                                 using nearest neighbor",
                                if is_dl { "dl" } else { "ul" }
                            );
                            (
                                nearest_neighbor_predictions(trials, &rows, &targets, cells, m),
                                None,
                            )
                        }
                    }
                }
                Err(e) => {
                    log::warn!(
                        "surrogate fit failed for ue {n} ({}): {e}; using nearest neighbor",
                        if is_dl { "dl" } else { "ul" }
                    );
                    (
                        nearest_neighbor_predictions(trials, &rows, &targets, cells, m),
                        None,
                    )
                }
            }
        })
        .collect();

    for (task_idx, (_, new_params)) in tasks.iter().zip(&results) {
        let (is_dl, n) = *task_idx;
        if let Some(p) = new_params {
            if is_dl {
                state.dl[n] = Some(p.clone());
            } else {
                state.ul[n] = Some(p.clone());
            }
        }
    }

    let mut dl = vec![vec![0.0; n_ues]; trials.len()];
    let mut ul = vec![vec![0.0; n_ues]; trials.len()];
    for (&(is_dl, n), (preds, _)) in tasks.iter().zip(&results) {
        for (t, &p) in preds.iter().enumerate() {
            if is_dl {
                dl[t][n] = p;
            } else {
                ul[t][n] = p;
            }
        }
    }
    Ok(SurrogatePredictions { dl, ul })
}

fn nearest_neighbor_predictions(
    trials: &[Vec<f64>],
    pop_inputs: &[Vec<f64>],
    targets: &[f64],
    cells: &[usize],
    m: usize,
) -> Vec<f64> {
    trials
        .iter()
        .map(|t| {
            let x = neighborhood_inputs(t, cells, m);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, p) in pop_inputs.iter().enumerate() {
                let d: f64 = p.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            targets[best]
        })
        .collect()
}

/// Predicted objective of every trial under freshly fitted surrogates: the
/// one-shot form of [`surrogate_predict`] plus the objective map.
pub fn surrogate_objective(
    trials: &[Vec<f64>],
    pop: &Population,
    neighborhood: &Neighborhood,
    spec: &ObjectiveSpec,
) -> Result<Vec<f64>> {
    let n_ues = pop.dl_sinr.first().map_or(0, Vec::len);
    let mut state = SurrogateState::new(n_ues);
    let preds = surrogate_predict(trials, pop, neighborhood, spec, &mut state, true)?;
    predicted_objectives(&preds, spec)
}

fn predicted_objectives(preds: &SurrogatePredictions, spec: &ObjectiveSpec) -> Result<Vec<f64>> {
    preds
        .dl
        .iter()
        .zip(&preds.ul)
        .map(|(dl, ul)| Ok(objective_from_sinr(dl, ul, spec)?.f_total))
        .collect()
}

/// Optimizer settings beyond the DE operator parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerSettings {
    /// Population size `S`.
    pub population_size: usize,
    /// Neighborhood size per UE.
    pub neighborhood_size: usize,
    pub n_iterations: usize,
    pub de: DeParams,
    /// Use the downlink neighborhood for the uplink surrogates too.
    pub share_dl_neighborhood: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            population_size: 200,
            neighborhood_size: 8,
            n_iterations: 1000,
            de: DeParams::default(),
            share_dl_neighborhood: false,
        }
    }
}

/// One row of the convergence trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub iter: usize,
    /// Best predicted objective over the trials.
    pub predicted_best_f: f64,
    /// True objective of the selected trial.
    pub true_f_u_best: f64,
    /// Objective of the best population member after the update.
    pub best_f_so_far: f64,
    /// Outage and rate components of the current best member.
    pub zeta_dl: f64,
    pub zeta_ul: f64,
    pub r_dl: f64,
    pub r_ul: f64,
    /// Candidate generation + surrogate fit/predict/select CPU time. CPU
    /// time rather than wall clock so the scaling measurements are
    /// insensitive to machine load.
    pub surrogate_ms: f64,
    pub replaced: bool,
    /// Cumulative model+acquisition CPU time; populated by the BO baseline.
    pub cumulative_model_ms: Option<f64>,
}

/// Final result of an optimization run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub best_config: AntennaConfig,
    pub best_objective: ObjectiveValue,
    pub trace: Vec<IterationRecord>,
    /// Simulator evaluations consumed, initialization included.
    pub true_evaluations: u64,
    /// SINR report of the best configuration.
    pub final_report: SinrReport,
    /// Final population state.
    pub population: Population,
}

/// The stateful optimization loop; [`run`] wraps it end to end.
pub struct SurrogateDe<'a> {
    env: &'a RadioEnv,
    spec: ObjectiveSpec,
    settings: OptimizerSettings,
    neighborhood: Neighborhood,
    pop: Population,
    reports: Vec<SinrReport>,
    state: SurrogateState,
    rng_mutation: ChaCha8Rng,
    rng_crossover: ChaCha8Rng,
    iter: usize,
    true_evaluations: u64,
    trace: Vec<IterationRecord>,
}

impl<'a> SurrogateDe<'a> {
    /// Validates settings, builds neighborhoods, and truly evaluates a
    /// uniform random initial population of size `S`.
    pub fn new(
        env: &'a RadioEnv,
        spec: ObjectiveSpec,
        settings: OptimizerSettings,
    ) -> Result<Self> {
        spec.validate()?;
        settings.de.validate()?;
        let m = env.layout().n_cells();
        let n_ues = env.layout().n_ues();
        if settings.population_size < 4 {
            return Err(Error::InvalidParameter(format!(
                "population_size must be at least 4, got {}",
                settings.population_size
            )));
        }

        let default_config = AntennaConfig::default_for(m);
        let mut neighborhood =
            build_neighborhoods(env, &default_config, settings.neighborhood_size)?;
        if settings.share_dl_neighborhood {
            neighborhood.ul = neighborhood.dl.clone();
        }

        let mut rng = ChaCha8Rng::seed_from_u64(settings.de.rng_seed);
        rng.set_stream(STREAM_INIT);
        let mut configs = Vec::with_capacity(settings.population_size);
        let mut reports = Vec::with_capacity(settings.population_size);
        let mut dl_sinr = Vec::with_capacity(settings.population_size);
        let mut ul_sinr = Vec::with_capacity(settings.population_size);
        let mut objectives = Vec::with_capacity(settings.population_size);
        for _ in 0..settings.population_size {
            let flat = spec.bounds.sample_uniform(m, &mut rng);
            let report = env.evaluate(&AntennaConfig::from_flat(&flat)?)?;
            objectives.push(objective(&report, &spec)?.f_total);
            dl_sinr.push(report.dl_sinr_db.clone());
            ul_sinr.push(report.ul_sinr_db.clone());
            reports.push(report);
            configs.push(flat);
        }

        let mut rng_mutation = ChaCha8Rng::seed_from_u64(settings.de.rng_seed);
        rng_mutation.set_stream(STREAM_MUTATION);
        let mut rng_crossover = ChaCha8Rng::seed_from_u64(settings.de.rng_seed);
        rng_crossover.set_stream(STREAM_CROSSOVER);

        let true_evaluations = settings.population_size as u64;
        Ok(SurrogateDe {
            env,
            spec,
            settings,
            neighborhood,
            pop: Population {
                configs,
                dl_sinr,
                ul_sinr,
                objective: objectives,
            },
            reports,
            state: SurrogateState::new(n_ues),
            rng_mutation,
            rng_crossover,
            iter: 0,
            true_evaluations,
            trace: Vec::new(),
        })
    }

    pub fn population(&self) -> &Population {
        &self.pop
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    /// Runs one iteration: generate trials, predict, evaluate the predicted
    /// best truly, and replace the worst member if it does not improve on
    /// the trial.
    pub fn step(&mut self) -> Result<IterationRecord> {
        self.iter += 1;
        let started = ProcessTime::now();

        let s = self.pop.size();
        let mut trials = Vec::with_capacity(s);
        for i in 0..s {
            let mutant = mutate(
                &self.pop,
                i,
                &self.spec.bounds,
                &self.settings.de,
                &mut self.rng_mutation,
            )?;
            trials.push(crossover(
                &self.pop.configs[i],
                &mutant,
                &self.settings.de,
                &mut self.rng_crossover,
            ));
        }

        let refit = s <= FULL_REFIT_MAX_POP || self.iter % REFIT_PERIOD == 1;
        let preds = surrogate_predict(
            &trials,
            &self.pop,
            &self.neighborhood,
            &self.spec,
            &mut self.state,
            refit,
        )?;
        let predicted = predicted_objectives(&preds, &self.spec)?;
        let u_best = argmax(&predicted);
        let surrogate_ms = started.elapsed().as_secs_f64() * 1e3;

        let report = self
            .env
            .evaluate(&AntennaConfig::from_flat(&trials[u_best])?)?;
        self.true_evaluations += 1;
        let true_value = objective(&report, &self.spec)?;

        let worst = self.pop.worst_index();
        let replaced = true_value.f_total >= self.pop.objective[worst];
        if replaced {
            self.pop.configs[worst] = trials[u_best].clone();
            self.pop.dl_sinr[worst] = report.dl_sinr_db.clone();
            self.pop.ul_sinr[worst] = report.ul_sinr_db.clone();
            self.pop.objective[worst] = true_value.f_total;
            self.reports[worst] = report;
        }

        let best = self.pop.best_index();
        let best_value =
            objective_from_sinr(&self.pop.dl_sinr[best], &self.pop.ul_sinr[best], &self.spec)?;
        debug_assert!(self
            .pop
            .configs
            .iter()
            .all(|c| self.spec.bounds.contains_flat(c)));
        let record = IterationRecord {
            iter: self.iter,
            predicted_best_f: predicted[u_best],
            true_f_u_best: true_value.f_total,
            best_f_so_far: best_value.f_total,
            zeta_dl: best_value.zeta_dl,
            zeta_ul: best_value.zeta_ul,
            r_dl: best_value.r_dl,
            r_ul: best_value.r_ul,
            surrogate_ms,
            replaced,
            cumulative_model_ms: None,
        };
        self.trace.push(record.clone());
        Ok(record)
    }

    /// Consumes the loop state and returns the best member found.
    pub fn finish(self) -> Result<RunResult> {
        let best = self.pop.best_index();
        let best_objective =
            objective_from_sinr(&self.pop.dl_sinr[best], &self.pop.ul_sinr[best], &self.spec)?;
        Ok(RunResult {
            best_config: AntennaConfig::from_flat(&self.pop.configs[best])?,
            best_objective,
            trace: self.trace,
            true_evaluations: self.true_evaluations,
            final_report: self.reports[best].clone(),
            population: self.pop,
        })
    }
}

/// Full optimization run: uniform random initialization of `S` members,
/// then `n_iterations` surrogate-guided steps. Consumes exactly
/// `S + n_iterations` true evaluations.
pub fn run(env: &RadioEnv, spec: ObjectiveSpec, settings: OptimizerSettings) -> Result<RunResult> {
    let mut optimizer = SurrogateDe::new(env, spec, settings)?;
    for _ in 0..optimizer.settings.n_iterations {
        optimizer.step()?;
    }
    optimizer.finish()
}
