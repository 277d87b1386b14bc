//! Reproducible network layout construction.
//!
//! Layouts consist of macro sites on a hexagonal grid (three sectors each),
//! randomly placed small cells, and uniformly placed user equipments, all
//! inside a disk-shaped region. Generation is fully determined by the
//! generator arguments plus a seed, and layouts round-trip through a TOML
//! file format.

use std::fmt;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Macro base station height above ground (meters).
pub const MACRO_HEIGHT_M: f64 = 25.0;
/// Small cell height above ground (meters).
pub const SMALL_CELL_HEIGHT_M: f64 = 10.0;
/// User equipment height above ground (meters).
pub const UE_HEIGHT_M: f64 = 1.5;
/// Macro sector transmit power (dBm).
pub const MACRO_TX_POWER_DBM: f64 = 43.0;
/// Small cell transmit power (dBm).
pub const SMALL_CELL_TX_POWER_DBM: f64 = 30.0;
/// Boresight azimuths of the three sectors at every macro site (degrees).
pub const SECTOR_AZIMUTHS_DEG: [f64; 3] = [0.0, 120.0, 240.0];

const PLACEMENT_ATTEMPTS: usize = 10_000;

// Independent ChaCha streams so small cell placement and UE placement do not
// perturb each other when counts change.
const STREAM_SMALL_CELLS: u64 = 0;
const STREAM_UES: u64 = 1;

/// Cell class, which selects antenna pattern and power defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellClass {
    /// Directional sector of a three-sector macro site.
    #[serde(rename = "macro-sector")]
    MacroSector,
    /// Omnidirectional (in azimuth) low-power cell.
    #[serde(rename = "small-cell")]
    SmallCell,
}

impl fmt::Display for CellClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellClass::MacroSector => write!(f, "macro-sector"),
            CellClass::SmallCell => write!(f, "small-cell"),
        }
    }
}

/// One cell: a macro sector or a small cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSite {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
    /// Boresight azimuth in degrees, in `[0, 360)`.
    pub azimuth_deg: f64,
    pub class: CellClass,
    pub tx_power_dbm: f64,
}

/// One user equipment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserEquipment {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub height_m: f64,
}

/// Disk-shaped deployment region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center_x_m: f64,
    pub center_y_m: f64,
    pub radius_m: f64,
}

/// A complete network layout: cells, user equipments, region, and the seed
/// that froze all randomness derived from it (shadowing, fading).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub rng_seed: u64,
    pub region: Region,
    pub cells: Vec<CellSite>,
    pub ues: Vec<UserEquipment>,
}

impl NetworkLayout {
    /// Number of cells `M`.
    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    /// Number of user equipments `N`.
    pub fn n_ues(&self) -> usize {
        self.ues.len()
    }

    /// Checks the structural invariants documented for the file format.
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::EmptyInput("layout has no cells".into()));
        }
        if self.ues.is_empty() {
            return Err(Error::EmptyInput("layout has no user equipments".into()));
        }
        if !(self.region.radius_m.is_finite() && self.region.radius_m > 0.0) {
            return Err(Error::Schema {
                field: "region.radius_m".into(),
                message: "must be finite and positive".into(),
            });
        }
        for (i, c) in self.cells.iter().enumerate() {
            if c.id != i {
                return Err(Error::Schema {
                    field: format!("cells[{i}].id"),
                    message: format!("ids must be dense and ordered; expected {i}, got {}", c.id),
                });
            }
            if !(c.height_m.is_finite() && c.height_m > 0.0) {
                return Err(Error::Schema {
                    field: format!("cells[{i}].height_m"),
                    message: "must be finite and positive".into(),
                });
            }
            if !(c.azimuth_deg.is_finite() && (0.0..360.0).contains(&c.azimuth_deg)) {
                return Err(Error::Schema {
                    field: format!("cells[{i}].azimuth_deg"),
                    message: "must lie in [0, 360)".into(),
                });
            }
            if !c.tx_power_dbm.is_finite() || !c.x_m.is_finite() || !c.y_m.is_finite() {
                return Err(Error::Schema {
                    field: format!("cells[{i}]"),
                    message: "coordinates and tx power must be finite".into(),
                });
            }
        }
        for (i, u) in self.ues.iter().enumerate() {
            if u.id != i {
                return Err(Error::Schema {
                    field: format!("ues[{i}].id"),
                    message: format!("ids must be dense and ordered; expected {i}, got {}", u.id),
                });
            }
            if !(u.height_m.is_finite() && u.height_m > 0.0) {
                return Err(Error::Schema {
                    field: format!("ues[{i}].height_m"),
                    message: "must be finite and positive".into(),
                });
            }
            if !u.x_m.is_finite() || !u.y_m.is_finite() {
                return Err(Error::Schema {
                    field: format!("ues[{i}]"),
                    message: "coordinates must be finite".into(),
                });
            }
        }
        Ok(())
    }
}

/// Positions of the first `n` sites of a hexagonal grid with the given
/// inter-site distance, enumerated center-out in spiral order.
fn hex_site_positions(n: usize, isd: f64) -> Vec<(f64, f64)> {
    // Axial coordinates (q, r); neighbor steps in ring-walk order.
    const DIRS: [(i64, i64); 6] = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)];
    let to_xy = |q: i64, r: i64| {
        (
            isd * (q as f64 + r as f64 / 2.0),
            isd * (3.0_f64.sqrt() / 2.0) * r as f64,
        )
    };
    let mut out = Vec::with_capacity(n);
    if n == 0 {
        return out;
    }
    out.push(to_xy(0, 0));
    let mut ring = 1i64;
    while out.len() < n {
        // Start at the ring's south-west corner and walk the six edges.
        let (mut q, mut r) = (DIRS[4].0 * ring, DIRS[4].1 * ring);
        for dir in DIRS {
            for _ in 0..ring {
                if out.len() == n {
                    return out;
                }
                out.push(to_xy(q, r));
                q += dir.0;
                r += dir.1;
            }
        }
        ring += 1;
    }
    out
}

/// Number of full hexagonal rings needed to host `n` sites.
fn rings_for(n: usize) -> usize {
    let mut rings = 0usize;
    let mut capacity = 1usize;
    while capacity < n {
        rings += 1;
        capacity += 6 * rings;
    }
    rings
}

fn sample_in_disk(rng: &mut impl Rng, region: &Region) -> (f64, f64) {
    let radius = region.radius_m * rng.random_range(0.0..1.0f64).sqrt();
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    (
        region.center_x_m + radius * angle.cos(),
        region.center_y_m + radius * angle.sin(),
    )
}

/// Generates a hexagonal macro grid with three sectors per site, plus
/// randomly placed small cells and uniformly placed UEs.
///
/// Small cells are drawn by rejection sampling until they clear
/// `min_small_macro_distance_m` from every macro site position; after 10 000
/// failed attempts for a single small cell the generator errors out. The
/// result is fully determined by the arguments.
///
/// # Errors
///
/// Fails when `inter_site_distance_m <= 0`, when the layout would contain no
/// cells or no UEs, or when small cell placement is infeasible.
pub fn generate_hex_layout(
    n_macro_sites: usize,
    inter_site_distance_m: f64,
    n_small_cells: usize,
    n_ues: usize,
    min_small_macro_distance_m: f64,
    seed: u64,
) -> Result<NetworkLayout> {
    if !(inter_site_distance_m.is_finite() && inter_site_distance_m > 0.0) {
        return Err(Error::InvalidParameter(
            "inter_site_distance_m must be finite and positive".into(),
        ));
    }
    if !(min_small_macro_distance_m.is_finite() && min_small_macro_distance_m >= 0.0) {
        return Err(Error::InvalidParameter(
            "min_small_macro_distance_m must be finite and non-negative".into(),
        ));
    }
    if n_macro_sites == 0 && n_small_cells == 0 {
        return Err(Error::EmptyInput("layout would contain no cells".into()));
    }
    if n_ues == 0 {
        return Err(Error::EmptyInput(
            "layout would contain no user equipments".into(),
        ));
    }

    let sites = hex_site_positions(n_macro_sites, inter_site_distance_m);
    let centroid = if sites.is_empty() {
        (0.0, 0.0)
    } else {
        let sx: f64 = sites.iter().map(|p| p.0).sum();
        let sy: f64 = sites.iter().map(|p| p.1).sum();
        (sx / sites.len() as f64, sy / sites.len() as f64)
    };
    let region = Region {
        center_x_m: centroid.0,
        center_y_m: centroid.1,
        radius_m: 1.5 * inter_site_distance_m * rings_for(n_macro_sites).max(1) as f64,
    };

    let mut cells = Vec::with_capacity(3 * n_macro_sites + n_small_cells);
    for &(x, y) in &sites {
        for az in SECTOR_AZIMUTHS_DEG {
            cells.push(CellSite {
                id: cells.len(),
                x_m: x,
                y_m: y,
                height_m: MACRO_HEIGHT_M,
                azimuth_deg: az,
                class: CellClass::MacroSector,
                tx_power_dbm: MACRO_TX_POWER_DBM,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_SMALL_CELLS);
    for k in 0..n_small_cells {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let (x, y) = sample_in_disk(&mut rng, &region);
            let clear = sites
                .iter()
                .all(|&(sx, sy)| (x - sx).hypot(y - sy) >= min_small_macro_distance_m);
            if clear {
                cells.push(CellSite {
                    id: cells.len(),
                    x_m: x,
                    y_m: y,
                    height_m: SMALL_CELL_HEIGHT_M,
                    azimuth_deg: 0.0,
                    class: CellClass::SmallCell,
                    tx_power_dbm: SMALL_CELL_TX_POWER_DBM,
                });
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementInfeasible(format!(
                "small cell {k}: no position clears {min_small_macro_distance_m} m \
                 from all macro sites after {PLACEMENT_ATTEMPTS} attempts"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(STREAM_UES);
    let ues = (0..n_ues)
        .map(|id| {
            let (x, y) = sample_in_disk(&mut rng, &region);
            UserEquipment {
                id,
                x_m: x,
                y_m: y,
                height_m: UE_HEIGHT_M,
            }
        })
        .collect();

    let layout = NetworkLayout {
        rng_seed: seed,
        region,
        cells,
        ues,
    };
    layout.validate()?;
    Ok(layout)
}

/// Loads a layout from its TOML file representation and validates it.
pub fn load_layout(path: impl AsRef<Path>) -> Result<NetworkLayout> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let layout: NetworkLayout = toml::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    layout.validate()?;
    Ok(layout)
}

/// Saves a layout as TOML. Floats round-trip exactly through
/// [`load_layout`].
pub fn save_layout(layout: &NetworkLayout, path: impl AsRef<Path>) -> Result<()> {
    let text = toml::to_string(layout).map_err(|e| Error::Parse {
        path: path.as_ref().to_path_buf(),
        message: e.to_string(),
    })?;
    std::fs::write(path, text)?;
    Ok(())
}
