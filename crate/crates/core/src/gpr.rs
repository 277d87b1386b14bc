//! Gaussian process regression with a Matern 5/2 ARD kernel.
//!
//! Posteriors are computed through a Cholesky factorization of the noisy
//! kernel matrix, never through an explicit inverse. Hyperparameters are
//! fitted by maximizing the log marginal likelihood with analytic gradients
//! in log-parameter space. [`GpModel::fit`] standardizes the targets
//! internally, so hyperparameters passed to and returned from fitting live
//! in standardized-target space; [`GpModel::from_params`] skips
//! standardization and applies the exact textbook equations.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative jitter ladder applied to the kernel diagonal, scaled by
/// `trace(K)/S`, until the Cholesky factorization succeeds.
const JITTER_LADDER: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];

const LOG_LENGTH_BOUNDS: (f64, f64) = (-6.9077552789821368, 11.512925464970229); // 1e-3 .. 1e5
const LOG_SIGNAL_BOUNDS: (f64, f64) = (-13.815510557964274, 9.2103403719761836); // 1e-6 .. 1e4
const LOG_NOISE_BOUNDS: (f64, f64) = (-18.420680743952367, 6.9077552789821368); // 1e-8 .. 1e3

/// Matern 5/2 ARD hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    /// One positive length scale per input dimension.
    pub length_scales: Vec<f64>,
    /// Signal variance `sigma_f^2`.
    pub signal_variance: f64,
    /// Observation noise variance `sigma_n^2` (non-negative).
    pub noise_variance: f64,
}

impl KernelParams {
    /// Shared length scale across `dim` input dimensions.
    pub fn isotropic(
        dim: usize,
        length_scale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Self {
        KernelParams {
            length_scales: vec![length_scale; dim],
            signal_variance,
            noise_variance,
        }
    }

    /// A neutral starting point for fitting standardized targets.
    pub fn default_init(dim: usize) -> Self {
        KernelParams::isotropic(dim, 1.0, 1.0, 1e-2)
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.length_scales.is_empty() {
            return Err(Error::EmptyInput(
                "kernel needs at least one length scale".into(),
            ));
        }
        if self
            .length_scales
            .iter()
            .any(|&l| !(l.is_finite() && l > 0.0))
        {
            return Err(Error::InvalidParameter(
                "length scales must be finite and positive".into(),
            ));
        }
        if !(self.signal_variance.is_finite() && self.signal_variance > 0.0) {
            return Err(Error::InvalidParameter(
                "signal variance must be finite and positive".into(),
            ));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance >= 0.0) {
            return Err(Error::InvalidParameter(
                "noise variance must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[inline]
fn scaled_sq_dist(a: &[f64], b: &[f64], length_scales: &[f64]) -> f64 {
    let mut r2 = 0.0;
    for d in 0..a.len() {
        let z = (a[d] - b[d]) / length_scales[d];
        r2 += z * z;
    }
    r2
}

#[inline]
fn matern52_from_r2(r2: f64, signal_variance: f64) -> f64 {
    let u = (5.0 * r2).sqrt();
    signal_variance * (1.0 + u + 5.0 * r2 / 3.0) * (-u).exp()
}

/// Matern 5/2 kernel with per-dimension length scales:
/// `sigma_f^2 (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r)` with
/// `r^2 = sum_d ((a_d - b_d) / l_d)^2`.
pub fn matern52_ard(a: &[f64], b: &[f64], params: &KernelParams) -> Result<f64> {
    params.validate()?;
    if a.len() != b.len() || a.len() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            actual: if a.len() != params.dim() {
                a.len()
            } else {
                b.len()
            },
        });
    }
    Ok(matern52_from_r2(
        scaled_sq_dist(a, b, &params.length_scales),
        params.signal_variance,
    ))
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    (0..m.ncols()).map(|d| m[(i, d)]).collect()
}

/// Dense kernel matrix `K(X, X)` without the noise term.
fn kernel_matrix(inputs: &DMatrix<f64>, params: &KernelParams) -> DMatrix<f64> {
    let s = inputs.nrows();
    let rows: Vec<Vec<f64>> = (0..s).map(|i| row(inputs, i)).collect();
    let mut k = DMatrix::zeros(s, s);
    for i in 0..s {
        k[(i, i)] = params.signal_variance;
        for j in 0..i {
            let v = matern52_from_r2(
                scaled_sq_dist(&rows[i], &rows[j], &params.length_scales),
                params.signal_variance,
            );
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky of `K + sigma_n^2 I + jitter I`, escalating the jitter through
/// [`JITTER_LADDER`] (relative to the mean kernel diagonal) until the
/// factorization succeeds.
fn noisy_cholesky(
    kernel: &DMatrix<f64>,
    noise_variance: f64,
) -> Result<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    let s = kernel.nrows();
    let diag_scale = kernel.diagonal().sum() / s as f64;
    for rel in JITTER_LADDER {
        let jitter = rel * diag_scale;
        let mut noisy = kernel.clone();
        for i in 0..s {
            noisy[(i, i)] += noise_variance + jitter;
        }
        if let Some(chol) = Cholesky::new(noisy) {
            return Ok((chol, jitter));
        }
    }
    Err(Error::NotPositiveDefinite)
}

fn check_training_dims(
    inputs: &DMatrix<f64>,
    targets: &[f64],
    params: &KernelParams,
) -> Result<()> {
    params.validate()?;
    if inputs.nrows() == 0 {
        return Err(Error::EmptyInput(
            "GP needs at least one training point".into(),
        ));
    }
    if inputs.ncols() != params.dim() {
        return Err(Error::DimensionMismatch {
            expected: params.dim(),
            actual: inputs.ncols(),
        });
    }
    if targets.len() != inputs.nrows() {
        return Err(Error::DimensionMismatch {
            expected: inputs.nrows(),
            actual: targets.len(),
        });
    }
    Ok(())
}

/// Log marginal likelihood of `targets` under the GP prior, exactly as
/// given: no target standardization.
pub fn log_marginal_likelihood(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    params: &KernelParams,
) -> Result<f64> {
    check_training_dims(inputs, targets.as_slice(), params)?;
    let s = inputs.nrows();
    let (chol, _) = noisy_cholesky(&kernel_matrix(inputs, params), params.noise_variance)?;
    let alpha = chol.solve(targets);
    let log_det_half: f64 = (0..s).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    Ok(-0.5 * targets.dot(&alpha)
        - log_det_half
        - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln())
}

/// Log marginal likelihood and its gradient with respect to the log
/// hyperparameters, ordered `[ln l_1 .. ln l_D, ln sigma_f^2, ln sigma_n^2]`.
pub fn lml_with_gradient(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    params: &KernelParams,
) -> Result<(f64, Vec<f64>)> {
    check_training_dims(inputs, targets.as_slice(), params)?;
    let s = inputs.nrows();
    let d = params.dim();
    let rows: Vec<Vec<f64>> = (0..s).map(|i| row(inputs, i)).collect();

    // One pass builds the kernel and caches exp(-u) (1 + u) per pair, so the
    // gradient loop below reuses the distances and exponentials instead of
    // recomputing them.
    let mut kernel = DMatrix::zeros(s, s);
    let mut decay = DMatrix::zeros(s, s);
    for i in 0..s {
        kernel[(i, i)] = params.signal_variance;
        decay[(i, i)] = 1.0;
        for j in 0..i {
            let r2 = scaled_sq_dist(&rows[i], &rows[j], &params.length_scales);
            let u = (5.0 * r2).sqrt();
            let e = (-u).exp();
            let k = params.signal_variance * (1.0 + u + 5.0 * r2 / 3.0) * e;
            kernel[(i, j)] = k;
            kernel[(j, i)] = k;
            decay[(i, j)] = e * (1.0 + u);
        }
    }

    let (chol, _) = noisy_cholesky(&kernel, params.noise_variance)?;
    let alpha = chol.solve(targets);
    let log_det_half: f64 = (0..s).map(|i| chol.l_dirty()[(i, i)].ln()).sum();
    let lml = -0.5 * targets.dot(&alpha)
        - log_det_half
        - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln();

    // W = alpha alpha^T - K_noisy^{-1}; d lml / d p = 0.5 tr(W dK/dp).
    let kinv = chol.inverse();
    let factor = 5.0 / 3.0 * params.signal_variance;
    let inv_l2: Vec<f64> = params.length_scales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut grad = vec![0.0; d + 2];
    for i in 0..s {
        for j in 0..=i {
            let w = alpha[i] * alpha[j] - kinv[(i, j)];
            // Off-diagonal entries appear twice in the trace.
            let weight = if i == j { 0.5 * w } else { w };
            // dk/d(ln l_d) = (5/3) sigma_f^2 e^{-u} (1 + u) * delta_d^2 / l_d^2
            let base = factor * decay[(i, j)];
            for dim in 0..d {
                let delta = rows[i][dim] - rows[j][dim];
                grad[dim] += weight * base * delta * delta * inv_l2[dim];
            }
            grad[d] += weight * kernel[(i, j)];
        }
    }
    // dK/d(ln sigma_n^2) = sigma_n^2 I.
    grad[d + 1] = 0.5
        * params.noise_variance
        * (0..s)
            .map(|i| alpha[i] * alpha[i] - kinv[(i, i)])
            .sum::<f64>();
    Ok((lml, grad))
}

/// Gradient-ascent options for hyperparameter fitting.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Number of starting points: the caller's init, then heuristic starts.
    pub n_starts: usize,
    /// Adam steps per start.
    pub max_steps: usize,
    pub learning_rate: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 2,
            max_steps: 60,
            learning_rate: 0.08,
        }
    }
}

/// A fitted Gaussian process regressor.
#[derive(Debug, Clone)]
pub struct GpModel {
    inputs: DMatrix<f64>,
    params: KernelParams,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    y_mean: f64,
    y_std: f64,
    jitter: f64,
    lml: f64,
}

impl GpModel {
    /// Builds the posterior at fixed hyperparameters with no target
    /// standardization: the exact textbook equations.
    pub fn from_params(
        inputs: DMatrix<f64>,
        targets: &[f64],
        params: KernelParams,
    ) -> Result<Self> {
        check_training_dims(&inputs, targets, &params)?;
        GpModel::build(inputs, targets, params, 0.0, 1.0)
    }

    /// Standardizes targets and builds the posterior at the given
    /// hyperparameters without refitting them.
    pub fn fit_frozen(inputs: DMatrix<f64>, targets: &[f64], params: KernelParams) -> Result<Self> {
        check_training_dims(&inputs, targets, &params)?;
        let (y_mean, y_std) = standardization(targets);
        GpModel::build(inputs, targets, params, y_mean, y_std)
    }

    /// Standardizes targets and fits hyperparameters by maximizing the log
    /// marginal likelihood with multi-start Adam (default two starts: the
    /// provided init and a data-driven heuristic). The best parameters
    /// visited are kept, so the fitted likelihood is never below the
    /// likelihood at `init`.
    pub fn fit(inputs: DMatrix<f64>, targets: &[f64], init: KernelParams) -> Result<Self> {
        GpModel::fit_with_options(inputs, targets, init, &FitOptions::default())
    }

    pub fn fit_with_options(
        inputs: DMatrix<f64>,
        targets: &[f64],
        init: KernelParams,
        options: &FitOptions,
    ) -> Result<Self> {
        check_training_dims(&inputs, targets, &init)?;
        let (y_mean, y_std) = standardization(targets);
        if inputs.nrows() == 1 {
            return GpModel::build(inputs, targets, init, y_mean, y_std);
        }
        let y_standardized =
            DVector::from_iterator(targets.len(), targets.iter().map(|&y| (y - y_mean) / y_std));

        let mut starts = vec![init.clone()];
        if options.n_starts > 1 {
            starts.push(heuristic_init(&inputs, init.dim()));
        }
        let mut best_lml = f64::NEG_INFINITY;
        let mut best_params = init;
        for start in starts {
            let (lml, params) = adam_ascent(&inputs, &y_standardized, start, options);
            if lml > best_lml {
                best_lml = lml;
                best_params = params;
            }
        }
        if best_lml == f64::NEG_INFINITY {
            return Err(Error::NotPositiveDefinite);
        }
        GpModel::build(inputs, targets, best_params, y_mean, y_std)
    }

    fn build(
        inputs: DMatrix<f64>,
        targets: &[f64],
        params: KernelParams,
        y_mean: f64,
        y_std: f64,
    ) -> Result<Self> {
        let (chol, jitter) =
            noisy_cholesky(&kernel_matrix(&inputs, &params), params.noise_variance)?;
        let s = inputs.nrows();
        let y = DVector::from_iterator(s, targets.iter().map(|&t| (t - y_mean) / y_std));
        let alpha = chol.solve(&y);
        let chol_l = chol.unpack();
        let log_det_half: f64 = (0..s).map(|i| chol_l[(i, i)].ln()).sum();
        let lml = -0.5 * y.dot(&alpha)
            - log_det_half
            - 0.5 * s as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(GpModel {
            inputs,
            params,
            chol_l,
            alpha,
            y_mean,
            y_std,
            jitter,
            lml,
        })
    }

    pub fn n_train(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Log marginal likelihood at the stored hyperparameters, evaluated on
    /// the (internally standardized) targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    /// Diagonal jitter that was added to make the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Posterior mean and variance at one test point.
    pub fn predict_one(&self, x: &[f64]) -> Result<(f64, f64)> {
        if x.len() != self.inputs.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.ncols(),
                actual: x.len(),
            });
        }
        let s = self.n_train();
        let d = self.inputs.ncols();
        let mut kstar = vec![0.0; s];
        for i in 0..s {
            let mut r2 = 0.0;
            for dim in 0..d {
                let z = (x[dim] - self.inputs[(i, dim)]) / self.params.length_scales[dim];
                r2 += z * z;
            }
            kstar[i] = matern52_from_r2(r2, self.params.signal_variance);
        }
        let mean: f64 = kstar
            .iter()
            .zip(self.alpha.iter())
            .map(|(k, a)| k * a)
            .sum();
        // Forward substitution L v = k*, column oriented; var = sigma_f^2 - |v|^2.
        let l = &self.chol_l;
        for j in 0..s {
            kstar[j] /= l[(j, j)];
            let vj = kstar[j];
            for i in (j + 1)..s {
                kstar[i] -= l[(i, j)] * vj;
            }
        }
        let explained: f64 = kstar.iter().map(|v| v * v).sum();
        let var = (self.params.signal_variance - explained).max(0.0);
        Ok((
            self.y_mean + self.y_std * mean,
            var * self.y_std * self.y_std,
        ))
    }

    /// Posterior means and variances at `Q` test points (rows).
    pub fn predict(&self, test_inputs: &DMatrix<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        let q = test_inputs.nrows();
        let mut means = DVector::zeros(q);
        let mut vars = DVector::zeros(q);
        for t in 0..q {
            let x = row(test_inputs, t);
            let (m, v) = self.predict_one(&x)?;
            means[t] = m;
            vars[t] = v;
        }
        Ok((means, vars))
    }
}

/// Population mean and standard deviation, the latter floored to 1 when the
/// targets are (numerically) constant.
fn standardization(targets: &[f64]) -> (f64, f64) {
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let var = targets.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std < 1e-12 { 1.0 } else { std })
}

fn heuristic_init(inputs: &DMatrix<f64>, dim: usize) -> KernelParams {
    let s = inputs.nrows() as f64;
    let length_scales = (0..dim)
        .map(|d| {
            let col = inputs.column(d);
            let mean = col.sum() / s;
            let var = col.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / s;
            var.sqrt().max(1e-3)
        })
        .collect();
    KernelParams {
        length_scales,
        signal_variance: 1.0,
        noise_variance: 1e-4,
    }
}

fn clamp_log_params(theta: &mut [f64], dim: usize) {
    for (i, t) in theta.iter_mut().enumerate() {
        let (lo, hi) = if i < dim {
            LOG_LENGTH_BOUNDS
        } else if i == dim {
            LOG_SIGNAL_BOUNDS
        } else {
            LOG_NOISE_BOUNDS
        };
        *t = t.clamp(lo, hi);
    }
}

fn params_from_log(theta: &[f64], dim: usize) -> KernelParams {
    KernelParams {
        length_scales: theta[..dim].iter().map(|t| t.exp()).collect(),
        signal_variance: theta[dim].exp(),
        noise_variance: theta[dim + 1].exp(),
    }
}

/// Adam ascent on the log marginal likelihood in log-parameter space,
/// returning the best point visited.
fn adam_ascent(
    inputs: &DMatrix<f64>,
    y: &DVector<f64>,
    start: KernelParams,
    options: &FitOptions,
) -> (f64, KernelParams) {
    let dim = start.dim();
    let mut theta: Vec<f64> = start
        .length_scales
        .iter()
        .map(|l| l.ln())
        .chain([
            start.signal_variance.ln(),
            start.noise_variance.max(1e-8).ln(),
        ])
        .collect();
    clamp_log_params(&mut theta, dim);

    let (beta1, beta2, eps) = (0.9, 0.999, 1e-8);
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut best_lml = f64::NEG_INFINITY;
    let mut best = params_from_log(&theta, dim);

    for step in 1..=options.max_steps {
        let params = params_from_log(&theta, dim);
        let (lml, grad) = match lml_with_gradient(inputs, y, &params) {
            Ok(r) => r,
            Err(_) => break,
        };
        if lml > best_lml {
            best_lml = lml;
            best = params;
        }
        for i in 0..theta.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / (1.0 - beta1.powi(step as i32));
            let v_hat = v[i] / (1.0 - beta2.powi(step as i32));
            theta[i] += options.learning_rate * m_hat / (v_hat.sqrt() + eps);
        }
        clamp_log_params(&mut theta, dim);
    }
    let params = params_from_log(&theta, dim);
    if let Ok(lml) = log_marginal_likelihood(inputs, y, &params) {
        if lml > best_lml {
            best_lml = lml;
            best = params;
        }
    }
    (best_lml, best)
}
