//! Link-budget radio model.
//!
//! A [`RadioEnv`] freezes everything random about a layout (LOS state,
//! shadowing, per-sample fading) at construction time, so that evaluating an
//! [`AntennaConfig`] is a pure deterministic function: antenna gains, RSRP,
//! max-RSRP association, fractional uplink power control, and per-UE
//! downlink/uplink SINR averaged over the frozen fading samples.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgen::{CellClass, CellSite, NetworkLayout, UserEquipment};

/// Carrier frequency (Hz).
pub const CARRIER_FREQ_HZ: f64 = 2.0e9;
/// System bandwidth (Hz).
pub const BANDWIDTH_HZ: f64 = 10.0e6;
/// Number of uplink resource blocks.
pub const N_RESOURCE_BLOCKS: u32 = 50;
/// UE receiver noise figure (dB); total DL noise is -95 dBm over the band.
pub const UE_NOISE_FIGURE_DB: f64 = 9.0;
/// Base station receiver noise figure (dB); total UL noise is -99 dBm.
pub const BS_NOISE_FIGURE_DB: f64 = 5.0;
/// Maximum UE transmit power (dBm).
pub const MAX_UL_TX_POWER_DBM: f64 = 23.0;
/// Open-loop power control target per resource block (dBm).
pub const UL_P0_DBM: f64 = -90.0;
/// Fractional path loss compensation factor.
pub const UL_PATHLOSS_COMPENSATION: f64 = 0.9;
/// Peak gain of a macro sector antenna (dBi).
pub const MACRO_MAX_GAIN_DBI: f64 = 8.0;
/// Peak gain of a small cell antenna (dBi).
pub const SMALL_CELL_MAX_GAIN_DBI: f64 = 5.0;
/// Default number of frozen fading samples per link.
pub const DEFAULT_FADING_SAMPLES: usize = 10;

const MAX_ATTENUATION_DB: f64 = 30.0;
const MIN_EFFECTIVE_HPBW_DEG: f64 = 1.0;
const SHADOWING_STD_LOS_DB: f64 = 4.0;
const SHADOWING_STD_NLOS_DB: f64 = 6.0;
const FADING_STD_DB: f64 = 2.0;

// ChaCha streams carved out of the layout seed space.
const STREAM_SHADOWING: u64 = 16;
const STREAM_FADING: u64 = 17;

fn dbm_to_mw(x: f64) -> f64 {
    10.0_f64.powf(x / 10.0)
}

fn mw_to_dbm(x: f64) -> f64 {
    10.0 * x.log10()
}

fn thermal_noise_dbm(noise_figure_db: f64) -> f64 {
    -174.0 + 10.0 * BANDWIDTH_HZ.log10() + noise_figure_db
}

/// Per-cell antenna parameters: downtilt and the two half-power beamwidths.
///
/// The flat vector form groups parameters by kind,
/// `[tilt_1..tilt_M, vbw_1..vbw_M, hbw_1..hbw_M]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntennaConfig {
    downtilt_deg: Vec<f64>,
    vertical_hpbw_deg: Vec<f64>,
    horizontal_hpbw_deg: Vec<f64>,
}

impl AntennaConfig {
    /// Same parameters for every one of `m` cells.
    pub fn uniform(
        m: usize,
        downtilt_deg: f64,
        vertical_hpbw_deg: f64,
        horizontal_hpbw_deg: f64,
    ) -> Self {
        AntennaConfig {
            downtilt_deg: vec![downtilt_deg; m],
            vertical_hpbw_deg: vec![vertical_hpbw_deg; m],
            horizontal_hpbw_deg: vec![horizontal_hpbw_deg; m],
        }
    }

    /// The industry-default configuration: 12 degree tilt, 10 degree
    /// vertical and 70 degree horizontal beamwidth for all cells.
    pub fn default_for(m: usize) -> Self {
        AntennaConfig::uniform(m, 12.0, 10.0, 70.0)
    }

    /// Rebuilds a configuration from its flat vector form.
    ///
    /// # Errors
    ///
    /// Fails when the length is not a multiple of three or any entry is not
    /// finite.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.is_empty() || flat.len() % 3 != 0 {
            return Err(Error::DimensionMismatch {
                expected: 3 * (flat.len() / 3).max(1),
                actual: flat.len(),
            });
        }
        if flat.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "antenna parameters must be finite".into(),
            ));
        }
        let m = flat.len() / 3;
        Ok(AntennaConfig {
            downtilt_deg: flat[..m].to_vec(),
            vertical_hpbw_deg: flat[m..2 * m].to_vec(),
            horizontal_hpbw_deg: flat[2 * m..].to_vec(),
        })
    }

    /// Flat vector form `[tilts.., vertical beamwidths.., horizontal
    /// beamwidths..]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(3 * self.n_cells());
        flat.extend_from_slice(&self.downtilt_deg);
        flat.extend_from_slice(&self.vertical_hpbw_deg);
        flat.extend_from_slice(&self.horizontal_hpbw_deg);
        flat
    }

    pub fn n_cells(&self) -> usize {
        self.downtilt_deg.len()
    }

    pub fn downtilt_deg(&self, cell: usize) -> f64 {
        self.downtilt_deg[cell]
    }

    pub fn vertical_hpbw_deg(&self, cell: usize) -> f64 {
        self.vertical_hpbw_deg[cell]
    }

    pub fn horizontal_hpbw_deg(&self, cell: usize) -> f64 {
        self.horizontal_hpbw_deg[cell]
    }
}

/// Box constraints on the three antenna parameters, shared by all cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    /// Downtilt range in degrees.
    pub downtilt_deg: (f64, f64),
    /// Vertical half-power beamwidth range in degrees.
    pub vertical_hpbw_deg: (f64, f64),
    /// Horizontal half-power beamwidth range in degrees.
    pub horizontal_hpbw_deg: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        ParameterBounds {
            downtilt_deg: (0.0, 25.0),
            vertical_hpbw_deg: (0.0, 65.0),
            horizontal_hpbw_deg: (5.0, 100.0),
        }
    }
}

impl ParameterBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("downtilt_deg", self.downtilt_deg),
            ("vertical_hpbw_deg", self.vertical_hpbw_deg),
            ("horizontal_hpbw_deg", self.horizontal_hpbw_deg),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidParameter(format!(
                    "bounds.{name}: lower bound must be finite and below upper bound"
                )));
            }
        }
        Ok(())
    }

    /// Bounds of coordinate `j` of a flat vector over `m` cells.
    pub fn range_at(&self, j: usize, m: usize) -> (f64, f64) {
        match j / m {
            0 => self.downtilt_deg,
            1 => self.vertical_hpbw_deg,
            _ => self.horizontal_hpbw_deg,
        }
    }

    /// Clips a flat parameter vector into the box in place.
    pub fn clip_flat(&self, flat: &mut [f64]) {
        let m = flat.len() / 3;
        for (j, x) in flat.iter_mut().enumerate() {
            let (lo, hi) = self.range_at(j, m);
            *x = x.clamp(lo, hi);
        }
    }

    /// True when every coordinate lies inside the box.
    pub fn contains_flat(&self, flat: &[f64]) -> bool {
        let m = flat.len() / 3;
        flat.iter().enumerate().all(|(j, &x)| {
            let (lo, hi) = self.range_at(j, m);
            (lo..=hi).contains(&x)
        })
    }

    /// Uniform sample of a flat vector for `m` cells.
    pub fn sample_uniform(&self, m: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
        (0..3 * m)
            .map(|j| {
                let (lo, hi) = self.range_at(j, m);
                rng.random_range(lo..=hi)
            })
            .collect()
    }
}

fn wrap_deg_180(x: f64) -> f64 {
    (x + 180.0).rem_euclid(360.0) - 180.0
}

/// Antenna gain (dBi) from `cell` toward `ue` under the parabolic pattern.
///
/// Attenuation is `12 (psi_az / hbw)^2 + 12 ((psi_el - tilt) / vbw)^2`
/// capped at 30 dB, subtracted from the class peak gain. Small cells are
/// omnidirectional in azimuth, so their azimuth term is dropped. Beamwidths
/// are clamped to an effective minimum of one degree.
pub fn antenna_gain(config: &AntennaConfig, cell: &CellSite, ue: &UserEquipment) -> f64 {
    let dx = ue.x_m - cell.x_m;
    let dy = ue.y_m - cell.y_m;
    let d2d = dx.hypot(dy);
    let psi_el_deg = (cell.height_m - ue.height_m).atan2(d2d).to_degrees();

    let vbw = config
        .vertical_hpbw_deg(cell.id)
        .max(MIN_EFFECTIVE_HPBW_DEG);
    let el_off = psi_el_deg - config.downtilt_deg(cell.id);
    let mut attenuation = 12.0 * (el_off / vbw) * (el_off / vbw);

    let max_gain = match cell.class {
        CellClass::MacroSector => {
            let hbw = config
                .horizontal_hpbw_deg(cell.id)
                .max(MIN_EFFECTIVE_HPBW_DEG);
            let psi_az_deg = wrap_deg_180(dy.atan2(dx).to_degrees() - cell.azimuth_deg);
            attenuation += 12.0 * (psi_az_deg / hbw) * (psi_az_deg / hbw);
            MACRO_MAX_GAIN_DBI
        }
        CellClass::SmallCell => SMALL_CELL_MAX_GAIN_DBI,
    };
    max_gain - attenuation.min(MAX_ATTENUATION_DB)
}

/// Free-space path loss (dB) at 3D distance `d_m`, floored at one meter.
pub fn free_space_path_loss_db(d_m: f64) -> f64 {
    let d = d_m.max(1.0);
    20.0 * (4.0 * std::f64::consts::PI * d * CARRIER_FREQ_HZ / 299_792_458.0).log10()
}

/// Distance-dependent line-of-sight probability (urban macro style).
pub fn los_probability(d2d_m: f64) -> f64 {
    if d2d_m <= 18.0 {
        1.0
    } else {
        18.0 / d2d_m + (-d2d_m / 63.0).exp() * (1.0 - 18.0 / d2d_m)
    }
}

/// Urban-macro style log-distance path loss (dB), never below free space.
pub fn path_loss_db(d3d_m: f64, h_ue_m: f64, los: bool) -> f64 {
    let d = d3d_m.max(1.0);
    let f_ghz_term = 20.0 * (CARRIER_FREQ_HZ / 1.0e9).log10();
    let pl_los = 28.0 + 22.0 * d.log10() + f_ghz_term;
    let pl = if los {
        pl_los
    } else {
        let pl_nlos = 13.54 + 39.08 * d.log10() + f_ghz_term - 0.6 * (h_ue_m - 1.5);
        pl_los.max(pl_nlos)
    };
    pl.max(free_space_path_loss_db(d))
}

/// Open-loop fractional uplink power control over the full resource grid.
///
/// `pathloss_db` is the serving-link coupling loss (path loss plus shadowing
/// minus serving antenna gain).
pub fn ul_tx_power(pathloss_db: f64, n_rb: u32, p0_dbm: f64, phi: f64, p_max_dbm: f64) -> f64 {
    (10.0 * (n_rb as f64).log10() + p0_dbm + phi * pathloss_db).min(p_max_dbm)
}

/// Frozen large-scale and small-scale channel state for every cell-UE link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    n_cells: usize,
    n_ues: usize,
    n_fading_samples: usize,
    /// Row-major `M x N` path loss (dB).
    pub path_loss_db: Vec<f64>,
    /// Row-major `M x N` shadowing (dB).
    pub shadowing_db: Vec<f64>,
    /// Row-major `M x N` line-of-sight flags.
    pub los: Vec<bool>,
    /// `F x M x N` fading perturbations (dB), sample index slowest.
    pub fading_db: Vec<f64>,
}

impl LinkBudget {
    /// Draws LOS states, shadowing, and fading from the layout seed.
    pub fn generate(layout: &NetworkLayout, n_fading_samples: usize) -> Result<Self> {
        if n_fading_samples == 0 {
            return Err(Error::InvalidParameter(
                "n_fading_samples must be at least 1".into(),
            ));
        }
        let m = layout.n_cells();
        let n = layout.n_ues();
        let mut rng = ChaCha8Rng::seed_from_u64(layout.rng_seed);
        rng.set_stream(STREAM_SHADOWING);

        let mut path_loss = Vec::with_capacity(m * n);
        let mut shadowing = Vec::with_capacity(m * n);
        let mut los_flags = Vec::with_capacity(m * n);
        for cell in &layout.cells {
            for ue in &layout.ues {
                let d2d = (ue.x_m - cell.x_m).hypot(ue.y_m - cell.y_m);
                let d3d = d2d.hypot(cell.height_m - ue.height_m);
                let u: f64 = rng.random_range(0.0..1.0);
                let los = u < los_probability(d2d);
                let std_normal: f64 = StandardNormal.sample(&mut rng);
                let sigma = if los {
                    SHADOWING_STD_LOS_DB
                } else {
                    SHADOWING_STD_NLOS_DB
                };
                path_loss.push(path_loss_db(d3d, ue.height_m, los));
                shadowing.push(sigma * std_normal);
                los_flags.push(los);
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(layout.rng_seed);
        rng.set_stream(STREAM_FADING);
        let fading = (0..n_fading_samples * m * n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                FADING_STD_DB * z
            })
            .collect();

        Ok(LinkBudget {
            n_cells: m,
            n_ues: n,
            n_fading_samples,
            path_loss_db: path_loss,
            shadowing_db: shadowing,
            los: los_flags,
            fading_db: fading,
        })
    }

    /// An all-zero budget with the given dimensions, for controlled
    /// experiments: zero path loss, shadowing, and fading, all links LOS.
    pub fn zeroed(n_cells: usize, n_ues: usize, n_fading_samples: usize) -> Self {
        LinkBudget {
            n_cells,
            n_ues,
            n_fading_samples,
            path_loss_db: vec![0.0; n_cells * n_ues],
            shadowing_db: vec![0.0; n_cells * n_ues],
            los: vec![true; n_cells * n_ues],
            fading_db: vec![0.0; n_fading_samples * n_cells * n_ues],
        }
    }

    pub fn n_fading_samples(&self) -> usize {
        self.n_fading_samples
    }

    #[inline]
    fn idx(&self, cell: usize, ue: usize) -> usize {
        cell * self.n_ues + ue
    }

    #[inline]
    pub fn path_loss(&self, cell: usize, ue: usize) -> f64 {
        self.path_loss_db[self.idx(cell, ue)]
    }

    #[inline]
    pub fn shadowing(&self, cell: usize, ue: usize) -> f64 {
        self.shadowing_db[self.idx(cell, ue)]
    }

    #[inline]
    pub fn fading(&self, sample: usize, cell: usize, ue: usize) -> f64 {
        self.fading_db[(sample * self.n_cells + cell) * self.n_ues + ue]
    }
}

/// Per-UE result of one true network evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    /// Fading-averaged downlink SINR (dB) per UE.
    pub dl_sinr_db: Vec<f64>,
    /// Fading-averaged uplink SINR (dB) per UE.
    pub ul_sinr_db: Vec<f64>,
    /// Serving cell per UE (max downlink RSRP, ties to the lowest id).
    pub serving_cell: Vec<usize>,
    /// Power-controlled uplink transmit power (dBm) per UE.
    pub ul_tx_power_dbm: Vec<f64>,
}

/// A layout plus its frozen link budget; evaluating a configuration is a
/// pure function of this state.
#[derive(Debug)]
pub struct RadioEnv {
    layout: NetworkLayout,
    budget: LinkBudget,
    eval_count: AtomicU64,
}

impl RadioEnv {
    /// Builds the environment with the default number of fading samples.
    pub fn new(layout: &NetworkLayout) -> Result<Self> {
        RadioEnv::with_fading_samples(layout, DEFAULT_FADING_SAMPLES)
    }

    pub fn with_fading_samples(layout: &NetworkLayout, n_fading_samples: usize) -> Result<Self> {
        layout.validate()?;
        let budget = LinkBudget::generate(layout, n_fading_samples)?;
        Ok(RadioEnv {
            layout: layout.clone(),
            budget,
            eval_count: AtomicU64::new(0),
        })
    }

    /// Builds the environment around an explicitly supplied budget, for
    /// controlled experiments and tests.
    pub fn with_budget(layout: &NetworkLayout, budget: LinkBudget) -> Result<Self> {
        layout.validate()?;
        if budget.n_cells != layout.n_cells() || budget.n_ues != layout.n_ues() {
            return Err(Error::DimensionMismatch {
                expected: layout.n_cells() * layout.n_ues(),
                actual: budget.n_cells * budget.n_ues,
            });
        }
        Ok(RadioEnv {
            layout: layout.clone(),
            budget,
            eval_count: AtomicU64::new(0),
        })
    }

    pub fn layout(&self) -> &NetworkLayout {
        &self.layout
    }

    pub fn budget(&self) -> &LinkBudget {
        &self.budget
    }

    /// Number of [`RadioEnv::evaluate`] calls so far.
    pub fn eval_count(&self) -> u64 {
        self.eval_count.load(Ordering::Relaxed)
    }

    fn check_config(&self, config: &AntennaConfig) -> Result<()> {
        if config.n_cells() != self.layout.n_cells() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.n_cells(),
                actual: config.n_cells(),
            });
        }
        Ok(())
    }

    /// Antenna gain matrix (dBi), `M` rows of `N` entries.
    pub fn gain_matrix(&self, config: &AntennaConfig) -> Result<Vec<Vec<f64>>> {
        self.check_config(config)?;
        Ok(self
            .layout
            .cells
            .iter()
            .map(|cell| {
                self.layout
                    .ues
                    .iter()
                    .map(|ue| antenna_gain(config, cell, ue))
                    .collect()
            })
            .collect())
    }

    /// Downlink RSRP matrix (dBm), `M` rows of `N` entries: transmit power
    /// plus antenna gain minus path loss and shadowing. Fading is excluded;
    /// association and power control operate on this fading-free average.
    pub fn rsrp_matrix(&self, config: &AntennaConfig) -> Result<Vec<Vec<f64>>> {
        self.check_config(config)?;
        Ok(self
            .layout
            .cells
            .iter()
            .enumerate()
            .map(|(m, cell)| {
                self.layout
                    .ues
                    .iter()
                    .enumerate()
                    .map(|(n, ue)| {
                        cell.tx_power_dbm + antenna_gain(config, cell, ue)
                            - self.budget.path_loss(m, n)
                            - self.budget.shadowing(m, n)
                    })
                    .collect()
            })
            .collect())
    }

    /// Runs one true network evaluation of `config`.
    ///
    /// Association picks the max-RSRP cell per UE (ties to the lowest cell
    /// id). Uplink transmit power follows fractional power control on the
    /// serving coupling loss. SINRs are averaged over the frozen fading
    /// samples in the linear domain; uplink interference takes one active
    /// UE per other cell per fading sample, rotating round-robin through
    /// that cell's served UEs.
    pub fn evaluate(&self, config: &AntennaConfig) -> Result<SinrReport> {
        let rsrp = self.rsrp_matrix(config)?;
        let m_cells = self.layout.n_cells();
        let n_ues = self.layout.n_ues();
        let n_fad = self.budget.n_fading_samples;

        let mut serving = vec![0usize; n_ues];
        for n in 0..n_ues {
            let mut best = 0usize;
            for m in 1..m_cells {
                if rsrp[m][n] > rsrp[best][n] {
                    best = m;
                }
            }
            serving[n] = best;
        }

        let mut served_by: Vec<Vec<usize>> = vec![Vec::new(); m_cells];
        for (n, &s) in serving.iter().enumerate() {
            served_by[s].push(n);
        }

        let ul_power: Vec<f64> = (0..n_ues)
            .map(|n| {
                let s = serving[n];
                let coupling_loss = self.layout.cells[s].tx_power_dbm - rsrp[s][n];
                ul_tx_power(
                    coupling_loss,
                    N_RESOURCE_BLOCKS,
                    UL_P0_DBM,
                    UL_PATHLOSS_COMPENSATION,
                    MAX_UL_TX_POWER_DBM,
                )
            })
            .collect();

        let noise_dl_mw = dbm_to_mw(thermal_noise_dbm(UE_NOISE_FIGURE_DB));
        let noise_ul_mw = dbm_to_mw(thermal_noise_dbm(BS_NOISE_FIGURE_DB));

        let mut dl_sinr = vec![0.0; n_ues];
        for n in 0..n_ues {
            let s = serving[n];
            let mut acc = 0.0;
            for f in 0..n_fad {
                let signal = dbm_to_mw(rsrp[s][n] + self.budget.fading(f, s, n));
                let mut interference = 0.0;
                for m in 0..m_cells {
                    if m != s {
                        interference += dbm_to_mw(rsrp[m][n] + self.budget.fading(f, m, n));
                    }
                }
                acc += signal / (interference + noise_dl_mw);
            }
            dl_sinr[n] = mw_to_dbm(acc / n_fad as f64);
        }

        // Uplink received power from UE `u` at cell `c`, before fading.
        let ul_rx_dbm = |c: usize, u: usize| {
            ul_power[u] + antenna_gain(config, &self.layout.cells[c], &self.layout.ues[u])
                - self.budget.path_loss(c, u)
                - self.budget.shadowing(c, u)
        };

        let mut ul_sinr = vec![0.0; n_ues];
        for n in 0..n_ues {
            let c = serving[n];
            let rx_dbm = ul_rx_dbm(c, n);
            let mut acc = 0.0;
            for f in 0..n_fad {
                let signal = dbm_to_mw(rx_dbm + self.budget.fading(f, c, n));
                let mut interference = 0.0;
                for m in 0..m_cells {
                    if m == c || served_by[m].is_empty() {
                        continue;
                    }
                    let u = served_by[m][f % served_by[m].len()];
                    interference += dbm_to_mw(ul_rx_dbm(c, u) + self.budget.fading(f, c, u));
                }
                acc += signal / (interference + noise_ul_mw);
            }
            ul_sinr[n] = mw_to_dbm(acc / n_fad as f64);
        }

        self.eval_count.fetch_add(1, Ordering::Relaxed);
        Ok(SinrReport {
            dl_sinr_db: dl_sinr,
            ul_sinr_db: ul_sinr,
            serving_cell: serving,
            ul_tx_power_dbm: ul_power,
        })
    }
}

/// Downlink RSRP matrix for a layout, building the frozen budget in place.
pub fn downlink_rsrp(config: &AntennaConfig, layout: &NetworkLayout) -> Result<Vec<Vec<f64>>> {
    RadioEnv::new(layout)?.rsrp_matrix(config)
}

/// One-shot SINR evaluation for a layout, building the frozen budget in
/// place. Prefer [`RadioEnv`] when evaluating many configurations.
pub fn evaluate_sinr(config: &AntennaConfig, layout: &NetworkLayout) -> Result<SinrReport> {
    RadioEnv::new(layout)?.evaluate(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::generate_hex_layout;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_cell_layout() -> NetworkLayout {
        NetworkLayout {
            rng_seed: 0,
            region: crate::netgen::Region {
                center_x_m: 0.0,
                center_y_m: 0.0,
                radius_m: 500.0,
            },
            cells: vec![
                CellSite {
                    id: 0,
                    x_m: 0.0,
                    y_m: 0.0,
                    height_m: 25.0,
                    azimuth_deg: 0.0,
                    class: CellClass::MacroSector,
                    tx_power_dbm: 43.0,
                },
                CellSite {
                    id: 1,
                    x_m: 200.0,
                    y_m: 150.0,
                    height_m: 10.0,
                    azimuth_deg: 0.0,
                    class: CellClass::SmallCell,
                    tx_power_dbm: 30.0,
                },
            ],
            ues: vec![
                UserEquipment {
                    id: 0,
                    x_m: 100.0,
                    y_m: 50.0,
                    height_m: 1.5,
                },
                UserEquipment {
                    id: 1,
                    x_m: -80.0,
                    y_m: 120.0,
                    height_m: 1.5,
                },
            ],
        }
    }

    /// Hand-computed spreadsheet scenario: round path losses, no shadowing
    /// or fading, one fading sample.
    fn spreadsheet_env() -> RadioEnv {
        let layout = two_cell_layout();
        let mut budget = LinkBudget::zeroed(2, 2, 1);
        budget.path_loss_db = vec![95.0, 105.0, 102.0, 98.0];
        RadioEnv::with_budget(&layout, budget).unwrap()
    }

    fn spreadsheet_config() -> AntennaConfig {
        AntennaConfig {
            downtilt_deg: vec![8.0, 0.0],
            vertical_hpbw_deg: vec![12.0, 30.0],
            horizontal_hpbw_deg: vec![65.0, 60.0],
        }
    }

    #[test]
    fn pattern_attenuation_matches_hand_value() {
        // 10 deg azimuth offset at 70 deg hbw plus 5 deg elevation offset at
        // 10 deg vbw: 12*(10/70)^2 + 12*(5/10)^2.
        let layout = two_cell_layout();
        let mut cell = layout.cells[0].clone();
        cell.height_m = 1.5; // flat geometry, elevation angle zero
        let ue = UserEquipment {
            id: 0,
            x_m: 100.0 * (10.0_f64).to_radians().cos(),
            y_m: 100.0 * (10.0_f64).to_radians().sin(),
            height_m: 1.5,
        };
        let config = AntennaConfig {
            downtilt_deg: vec![-5.0, 0.0],
            vertical_hpbw_deg: vec![10.0, 10.0],
            horizontal_hpbw_deg: vec![70.0, 70.0],
        };
        let gain = antenna_gain(&config, &cell, &ue);
        assert_abs_diff_eq!(8.0 - gain, 3.2448979591836733, epsilon = 1e-9);
    }

    #[test]
    fn spreadsheet_gains() {
        let env = spreadsheet_env();
        let g = env.gain_matrix(&spreadsheet_config()).unwrap();
        assert_abs_diff_eq!(g[0][0], 4.747418345569303, epsilon = 1e-12);
        assert_abs_diff_eq!(g[0][1], -22.0, epsilon = 1e-12); // attenuation cap
        assert_abs_diff_eq!(g[1][0], 4.8422579193327, epsilon = 1e-12);
        assert_abs_diff_eq!(g[1][1], 4.960144801177935, epsilon = 1e-12);
    }

    #[test]
    fn spreadsheet_full_chain() {
        let env = spreadsheet_env();
        let report = env.evaluate(&spreadsheet_config()).unwrap();
        assert_eq!(report.serving_cell, vec![0, 1]);
        assert_abs_diff_eq!(report.ul_tx_power_dbm[0], 8.217023532347824, epsilon = 1e-9);
        assert_abs_diff_eq!(
            report.ul_tx_power_dbm[1],
            10.725569722300051,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(report.dl_sinr_db[0], 19.898028581524493, epsilon = 1e-9);
        assert_abs_diff_eq!(report.dl_sinr_db[1], 20.628188601293658, epsilon = 1e-9);
        assert_abs_diff_eq!(report.ul_sinr_db[0], 16.883847392367223, epsilon = 1e-9);
        assert_abs_diff_eq!(report.ul_sinr_db[1], 6.217862129491852, epsilon = 1e-9);
        assert_eq!(env.eval_count(), 1);
    }

    #[test]
    fn path_loss_frozen_values() {
        // Close-in LOS is floored at free space.
        assert_abs_diff_eq!(
            free_space_path_loss_db(100.0),
            78.468383135163,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            path_loss_db(100.0, 1.5, true),
            78.468383135163,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            path_loss_db(500.0, 1.5, true),
            93.39794000867204,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            path_loss_db(500.0, 1.5, false),
            125.03634768273122,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            path_loss_db(60.0, 1.5, false),
            89.0507507782724,
            epsilon = 1e-9
        );
    }

    #[test]
    fn los_probability_frozen_values() {
        assert_eq!(los_probability(10.0), 1.0);
        assert_eq!(los_probability(18.0), 1.0);
        assert_abs_diff_eq!(los_probability(50.0), 0.6494021903337921, epsilon = 1e-12);
        assert_abs_diff_eq!(los_probability(250.0), 0.08954515361586829, epsilon = 1e-12);
    }

    #[test]
    fn ul_tx_power_example() {
        let p = ul_tx_power(100.0, 50, -90.0, 0.9, 23.0);
        assert_abs_diff_eq!(p, 16.989700043360187, epsilon = 1e-9);
        assert_eq!(ul_tx_power(140.0, 50, -90.0, 0.9, 23.0), 23.0);
    }

    #[test]
    fn evaluate_is_deterministic() {
        let layout = generate_hex_layout(2, 400.0, 2, 12, 10.0, 5).unwrap();
        let env = RadioEnv::new(&layout).unwrap();
        let config = AntennaConfig::default_for(layout.n_cells());
        let a = env.evaluate(&config).unwrap();
        let b = env.evaluate(&config).unwrap();
        assert_eq!(a, b);
        let env2 = RadioEnv::new(&layout).unwrap();
        assert_eq!(a, env2.evaluate(&config).unwrap());
        assert_eq!(env.eval_count(), 2);
    }

    #[test]
    fn config_dimension_mismatch_is_rejected() {
        let layout = two_cell_layout();
        let env = RadioEnv::new(&layout).unwrap();
        let config = AntennaConfig::default_for(5);
        assert!(matches!(
            env.evaluate(&config),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn flat_round_trip() {
        let config = spreadsheet_config();
        let flat = config.to_flat();
        assert_eq!(flat, vec![8.0, 0.0, 12.0, 30.0, 65.0, 60.0]);
        assert_eq!(AntennaConfig::from_flat(&flat).unwrap(), config);
        assert!(AntennaConfig::from_flat(&flat[..4]).is_err());
    }

    #[test]
    fn bounds_clip_and_membership() {
        let bounds = ParameterBounds::default();
        let mut flat = vec![-3.0, 30.0, 70.0, -1.0, 2.0, 120.0];
        assert!(!bounds.contains_flat(&flat));
        bounds.clip_flat(&mut flat);
        assert_eq!(flat, vec![0.0, 25.0, 65.0, 0.0, 5.0, 100.0]);
        assert!(bounds.contains_flat(&flat));
    }

    proptest! {
        #[test]
        fn gain_stays_within_pattern_bounds(
            cx in -300.0..300.0f64,
            cy in -300.0..300.0f64,
            ux in -300.0..300.0f64,
            uy in -300.0..300.0f64,
            az in 0.0..360.0f64,
            tilt in 0.0..25.0f64,
            vbw in 0.0..65.0f64,
            hbw in 5.0..100.0f64,
            small in any::<bool>(),
        ) {
            let cell = CellSite {
                id: 0,
                x_m: cx,
                y_m: cy,
                height_m: if small { 10.0 } else { 25.0 },
                azimuth_deg: az % 360.0,
                class: if small { CellClass::SmallCell } else { CellClass::MacroSector },
                tx_power_dbm: 43.0,
            };
            let ue = UserEquipment { id: 0, x_m: ux, y_m: uy, height_m: 1.5 };
            let config = AntennaConfig {
                downtilt_deg: vec![tilt],
                vertical_hpbw_deg: vec![vbw],
                horizontal_hpbw_deg: vec![hbw],
            };
            let g = antenna_gain(&config, &cell, &ue);
            let max_gain = if small { SMALL_CELL_MAX_GAIN_DBI } else { MACRO_MAX_GAIN_DBI };
            prop_assert!(g <= max_gain + 1e-12);
            prop_assert!(g >= max_gain - 30.0 - 1e-12);
        }

        #[test]
        fn path_loss_never_below_free_space(
            d in 1.0..5000.0f64,
            h_ue in 1.0..10.0f64,
            los in any::<bool>(),
        ) {
            prop_assert!(path_loss_db(d, h_ue, los) >= free_space_path_loss_db(d) - 1e-12);
        }

        #[test]
        fn path_loss_monotone_in_distance(
            d in 1.0..5000.0f64,
            step in 1.0..500.0f64,
            los in any::<bool>(),
        ) {
            prop_assert!(path_loss_db(d + step, 1.5, los) >= path_loss_db(d, 1.5, los));
        }

        #[test]
        fn budget_path_loss_respects_floor(seed in any::<u64>()) {
            let layout = generate_hex_layout(2, 300.0, 2, 8, 10.0, seed).unwrap();
            let env = RadioEnv::new(&layout).unwrap();
            for m in 0..layout.n_cells() {
                for n in 0..layout.n_ues() {
                    let cell = &layout.cells[m];
                    let ue = &layout.ues[n];
                    let d2d = (ue.x_m - cell.x_m).hypot(ue.y_m - cell.y_m);
                    let d3d = d2d.hypot(cell.height_m - ue.height_m);
                    prop_assert!(
                        env.budget().path_loss(m, n) >= free_space_path_loss_db(d3d) - 1e-12
                    );
                }
            }
        }

        #[test]
        fn serving_cell_has_max_rsrp(seed in any::<u64>()) {
            let layout = generate_hex_layout(1, 300.0, 3, 10, 10.0, seed).unwrap();
            let env = RadioEnv::new(&layout).unwrap();
            let config = AntennaConfig::default_for(layout.n_cells());
            let rsrp = env.rsrp_matrix(&config).unwrap();
            let report = env.evaluate(&config).unwrap();
            for n in 0..layout.n_ues() {
                let s = report.serving_cell[n];
                for m in 0..layout.n_cells() {
                    prop_assert!(rsrp[s][n] >= rsrp[m][n]);
                }
                prop_assert!(report.ul_tx_power_dbm[n] <= MAX_UL_TX_POWER_DBM);
            }
        }
    }
}
