//! Coverage and capacity metrics and the scalar objective.
//!
//! Coverage is measured by outage probability (fraction of UEs whose SINR
//! falls strictly below a threshold), capacity by the average log of the
//! per-UE log-rate. The scalar objective blends both across downlink and
//! uplink with the weights `alpha` (link direction) and `beta` (capacity
//! versus coverage).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radio::{ParameterBounds, SinrReport};

/// Linear SINR floor applied before the inner logarithm of the rate metric.
pub const SINR_LINEAR_FLOOR: f64 = 1e-6;

/// Objective weights, outage threshold, and the search box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    /// Uplink weight in `[0, 1]`; 0 optimizes downlink only.
    pub alpha: f64,
    /// Downlink capacity-versus-coverage weight in `[0, 1]`.
    pub beta_dl: f64,
    /// Uplink capacity-versus-coverage weight in `[0, 1]`.
    pub beta_ul: f64,
    /// Outage threshold (dB); a UE is in outage when its SINR is strictly
    /// below this value.
    pub threshold_db: f64,
    /// Box constraints for the antenna parameters.
    pub bounds: ParameterBounds,
}

impl Default for ObjectiveSpec {
    fn default() -> Self {
        ObjectiveSpec {
            alpha: 0.0,
            beta_dl: 0.5,
            beta_ul: 0.5,
            threshold_db: 0.0,
            bounds: ParameterBounds::default(),
        }
    }
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("beta_dl", self.beta_dl),
            ("beta_ul", self.beta_ul),
        ] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        if !self.threshold_db.is_finite() {
            return Err(Error::InvalidParameter(
                "threshold_db must be finite".into(),
            ));
        }
        self.bounds.validate()
    }
}

/// The scalar objective together with its four ingredients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValue {
    pub f_total: f64,
    pub r_dl: f64,
    pub r_ul: f64,
    pub zeta_dl: f64,
    pub zeta_ul: f64,
}

/// Fraction of entries strictly below `threshold_db`. Comparison happens in
/// the dB domain.
pub fn outage_probability(sinr_db: &[f64], threshold_db: f64) -> Result<f64> {
    if sinr_db.is_empty() {
        return Err(Error::EmptyInput("outage over empty SINR vector".into()));
    }
    let below = sinr_db.iter().filter(|&&x| x < threshold_db).count();
    Ok(below as f64 / sinr_db.len() as f64)
}

/// Average over UEs of `ln(ln(1 + sinr))`, with the linear SINR floored at
/// [`SINR_LINEAR_FLOOR`] so the result stays finite.
pub fn avg_sum_log_rate(sinr_db: &[f64]) -> Result<f64> {
    if sinr_db.is_empty() {
        return Err(Error::EmptyInput("rate over empty SINR vector".into()));
    }
    let mut acc = 0.0;
    for &x in sinr_db {
        let linear = 10.0_f64.powf(x / 10.0).max(SINR_LINEAR_FLOOR);
        acc += linear.ln_1p().ln();
    }
    Ok(acc / sinr_db.len() as f64)
}

/// Objective from raw per-UE SINR vectors.
pub fn objective_from_sinr(
    dl_sinr_db: &[f64],
    ul_sinr_db: &[f64],
    spec: &ObjectiveSpec,
) -> Result<ObjectiveValue> {
    let r_dl = avg_sum_log_rate(dl_sinr_db)?;
    let r_ul = avg_sum_log_rate(ul_sinr_db)?;
    let zeta_dl = outage_probability(dl_sinr_db, spec.threshold_db)?;
    let zeta_ul = outage_probability(ul_sinr_db, spec.threshold_db)?;
    let f_dl = spec.beta_dl * r_dl - (1.0 - spec.beta_dl) * zeta_dl;
    let f_ul = spec.beta_ul * r_ul - (1.0 - spec.beta_ul) * zeta_ul;
    Ok(ObjectiveValue {
        f_total: (1.0 - spec.alpha) * f_dl + spec.alpha * f_ul,
        r_dl,
        r_ul,
        zeta_dl,
        zeta_ul,
    })
}

/// Objective of a network evaluation.
pub fn objective(report: &SinrReport, spec: &ObjectiveSpec) -> Result<ObjectiveValue> {
    objective_from_sinr(&report.dl_sinr_db, &report.ul_sinr_db, spec)
}

/// Quantile with linear interpolation between order statistics.
///
/// `q` must lie in `[0, 1]`; `q = 0.5` is the median.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput("quantile of empty vector".into()));
    }
    if !(q.is_finite() && (0.0..=1.0).contains(&q)) {
        return Err(Error::InvalidParameter(format!(
            "quantile level must lie in [0, 1], got {q}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}
