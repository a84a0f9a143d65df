//! Far-field AP–tile–UE cascade gains, blockage and outage.
//!
//! Every tile scatters with the area/cosine far-field form; the tile holding
//! the specular point of the AP–UE pair reflects at full strength while the
//! others scatter at a fixed off-specular level.

use crate::error::{Error, Result};
use crate::geometry::{AccessPoint, Tile, TileGrid, Wall, WallId};
use crate::math::{Point3, Vec3};
use crate::visibility::TileMask;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const REFERENCE_CARRIER_HZ: f64 = 28e9;
/// Reference mirror-tile gain over the outage threshold. It must exceed
/// the mmWave blockage penalties for blocked links to survive at all.
pub const DEFAULT_MARGIN_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandId {
    Mmw28,
    Mmw73,
    Vl,
}

impl BandId {
    pub const ALL: [BandId; 3] = [BandId::Mmw28, BandId::Mmw73, BandId::Vl];

    pub fn as_str(self) -> &'static str {
        match self {
            BandId::Mmw28 => "mmw28",
            BandId::Mmw73 => "mmw73",
            BandId::Vl => "vl",
        }
    }

    pub fn parse(s: &str) -> Option<BandId> {
        match s.to_ascii_lowercase().as_str() {
            "mmw28" | "28" | "28ghz" => Some(BandId::Mmw28),
            "mmw73" | "73" | "73ghz" => Some(BandId::Mmw73),
            "vl" | "visible" => Some(BandId::Vl),
            _ => None,
        }
    }
}

impl std::fmt::Display for BandId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub id: BandId,
    /// Carrier frequency; `None` for visible light.
    pub carrier_hz: Option<f64>,
    pub outage_threshold: f64,
    /// Attenuation per blocked segment; `None` means the segment is cut.
    pub blockage_penalty_db: Option<f64>,
    /// Target margin of the reference mirror-tile gain over the threshold.
    pub margin_db: f64,
    /// Relative level of tiles that do not hold the specular point.
    pub off_specular_db: f64,
    /// Lambertian order of the light source (visible light only).
    pub lambertian_order: f64,
    /// Linear scale applied to the geometric gain.
    pub calibration: f64,
}

impl Band {
    pub fn new(id: BandId) -> Self {
        let (carrier_hz, outage_threshold, blockage_penalty_db) = match id {
            BandId::Mmw28 => (Some(28e9), 2e-7, Some(30.0)),
            BandId::Mmw73 => (Some(73e9), 2e-8, Some(40.0)),
            BandId::Vl => (None, 2e-9, None),
        };
        let mut band = Self {
            id,
            carrier_hz,
            outage_threshold,
            blockage_penalty_db,
            margin_db: DEFAULT_MARGIN_DB,
            off_specular_db: -13.0,
            lambertian_order: 1.0,
            calibration: 1.0,
        };
        band.calibrate();
        band
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(format!("band {}: {m}", self.id)));
        if !(self.outage_threshold > 0.0 && self.outage_threshold.is_finite()) {
            return bad("outage_threshold must be positive");
        }
        if let Some(p) = self.blockage_penalty_db {
            if !(p >= 0.0 && p.is_finite()) {
                return bad("blockage_penalty_db must be non-negative");
            }
        }
        if !(self.off_specular_db <= 0.0) {
            return bad("off_specular_db must not be positive");
        }
        if !(self.calibration > 0.0 && self.calibration.is_finite()) {
            return bad("calibration must be positive");
        }
        if let Some(f) = self.carrier_hz {
            if !(f > 0.0) {
                return bad("carrier must be positive");
            }
        }
        if !(self.lambertian_order >= 0.0) {
            return bad("lambertian_order must be non-negative");
        }
        Ok(())
    }

    pub fn is_visible_light(&self) -> bool {
        self.id == BandId::Vl
    }

    fn wavelength_factor(&self) -> f64 {
        match self.carrier_hz {
            Some(f) => (REFERENCE_CARRIER_HZ / f).powi(2),
            None => 1.0,
        }
    }

    /// Set `calibration` so that the reference mirror-tile gain sits
    /// `margin_db` above the outage threshold.
    pub fn calibrate(&mut self) {
        self.calibration = 1.0;
        let reference = reference_gain(self);
        self.calibration = self.outage_threshold * db_to_linear(self.margin_db) / reference;
    }

    pub fn blockage_factor(&self) -> f64 {
        match self.blockage_penalty_db {
            Some(p) => db_to_linear(-p),
            None => 0.0,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Receiving handset: position plus an optional boresight. Without a
/// boresight the receiver is isotropic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeReceiver {
    pub position: Point3,
    pub boresight: Option<Vec3>,
}

impl UeReceiver {
    pub fn isotropic(position: Point3) -> Self {
        Self {
            position,
            boresight: None,
        }
    }

    pub fn directional(position: Point3, boresight: Vec3) -> Self {
        Self {
            position,
            boresight: Some(boresight.normalized()),
        }
    }

    /// Cosine response towards `from`, zero beyond 90° off boresight.
    pub fn response(&self, from: Point3) -> f64 {
        match self.boresight {
            None => 1.0,
            Some(b) => b.dot((from - self.position).normalized()).max(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainField {
    pub time: f64,
    pub ap_id: usize,
    pub ue_id: usize,
    pub wall_id: WallId,
    pub gains: Vec<f64>,
    pub alive: Vec<bool>,
}

impl GainField {
    pub fn mean_gain(&self) -> f64 {
        if self.gains.is_empty() {
            0.0
        } else {
            self.gains.iter().sum::<f64>() / self.gains.len() as f64
        }
    }

    pub fn survival(&self) -> f64 {
        if self.alive.is_empty() {
            0.0
        } else {
            self.alive.iter().filter(|&&a| a).count() as f64 / self.alive.len() as f64
        }
    }
}

/// Unscaled, unblocked gain through a tile at `center` with unit inward
/// `normal`, before the specular factor.
fn geometric_gain(
    ap: Point3,
    center: Point3,
    normal: Vec3,
    area: f64,
    ue: &UeReceiver,
    band: &Band,
) -> Result<f64> {
    let to_ap = ap - center;
    let to_ue = ue.position - center;
    let d1 = to_ap.norm();
    let d2 = to_ue.norm();
    if d1 <= 0.0 || d2 <= 0.0 {
        return Err(Error::CoincidentPoints);
    }
    let cos_i = (normal.dot(to_ap) / d1).max(0.0);
    let cos_r = (normal.dot(to_ue) / d2).max(0.0);
    let rx = ue.response(center);
    let g = if band.is_visible_light() {
        // Downward-facing Lambertian source on the ceiling.
        let cos_src = (to_ap.z / d1).max(0.0);
        let m = band.lambertian_order;
        (m + 1.0) / (2.0 * PI) * cos_src.powf(m) / (d1 * d1) * area * cos_i * cos_r / (PI * d2 * d2)
    } else {
        let a = area * cos_i * cos_r / (4.0 * PI * d1 * d2);
        band.wavelength_factor() * a * a
    };
    Ok(g * rx)
}

/// Gain of the reference geometry: AP at the ceiling centre and an
/// isotropic handset 1.2 m high at the centre of a 5 × 5 × 3 m room,
/// reflected by the 0.1 m tile at the specular point on the y = 5 wall.
fn reference_gain(band: &Band) -> f64 {
    let ap = Vec3::new(2.5, 2.5, 3.0);
    let ue = UeReceiver::isotropic(Vec3::new(2.5, 2.5, 1.2));
    let spec = Vec3::new(2.5, 5.0, 2.1);
    geometric_gain(ap, spec, Vec3::new(0.0, -1.0, 0.0), 0.01, &ue, band).unwrap_or(0.0)
        * band.calibration
}

/// Point where the path AP → wall → UE obeys the reflection law, or `None`
/// when either endpoint is not strictly on the room side.
pub fn specular_point(ap: Point3, ue: Point3, wall: &Wall) -> Option<Point3> {
    let da = wall.interior_distance(ap);
    let du = wall.interior_distance(ue);
    if da <= 0.0 || du <= 0.0 {
        return None;
    }
    let t = da / (da + du);
    Some(ap + (wall.mirror(ue) - ap) * t)
}

/// Tile holding the specular point; the flag is false when the point falls
/// outside the wall and the nearest tile is returned instead.
pub fn mirror_tile(ap: Point3, ue: Point3, wall: &Wall, grid: &TileGrid) -> Result<(usize, bool)> {
    let p = specular_point(ap, ue, wall).ok_or(Error::SourceOnWall)?;
    let uv = wall.to_wall_coords(p);
    Ok(match grid.locate(uv) {
        Some(i) => (i, true),
        None => (grid.nearest(uv), false),
    })
}

fn apply_blockage(gain: f64, band: &Band, blocked_in: bool, blocked_out: bool) -> f64 {
    let f = band.blockage_factor();
    let mut g = gain;
    if blocked_in {
        g *= f;
    }
    if blocked_out {
        g *= f;
    }
    g
}

/// Cascade gain through one tile.
pub fn tile_cascade_gain(
    ap: Point3,
    tile: &Tile,
    ue: &UeReceiver,
    band: &Band,
    blocked_in: bool,
    blocked_out: bool,
) -> Result<f64> {
    let g = geometric_gain(ap, tile.center, tile.normal, tile.area(), ue, band)?;
    let specular = {
        let to_plane = |p: Point3| tile.normal.dot(p - tile.center);
        let (da, du) = (to_plane(ap), to_plane(ue.position));
        da > 0.0 && du > 0.0 && {
            let mirrored = ue.position - tile.normal * (2.0 * du);
            tile.footprint_contains(ap + (mirrored - ap) * (da / (da + du)))
        }
    };
    let s = if specular {
        1.0
    } else {
        db_to_linear(band.off_specular_db)
    };
    Ok(apply_blockage(
        band.calibration * g * s,
        band,
        blocked_in,
        blocked_out,
    ))
}

pub fn is_outage(gain: f64, band: &Band) -> bool {
    gain < band.outage_threshold
}

/// Gains of every tile of `grid` for one AP–UE pair.
#[allow(clippy::too_many_arguments)]
pub fn link_gain_map(
    ap: &AccessPoint,
    ue_id: usize,
    ue: &UeReceiver,
    wall: &Wall,
    grid: &TileGrid,
    mask_in: &TileMask,
    mask_out: &TileMask,
    band: &Band,
    time: f64,
) -> Result<GainField> {
    if mask_in.len() != grid.len() || mask_out.len() != grid.len() {
        return Err(Error::InvalidSpec("mask does not match grid".into()));
    }
    let specular = match mirror_tile(ap.position, ue.position, wall, grid) {
        Ok((i, true)) => Some(i),
        _ => None,
    };
    let off = db_to_linear(band.off_specular_db);
    let area = grid.tile_size * grid.tile_size;
    let mut gains = Vec::with_capacity(grid.len());
    for (i, &c) in grid.tile_centers.iter().enumerate() {
        let g = geometric_gain(ap.position, c, grid.tile_normal, area, ue, band)?;
        let s = if specular == Some(i) { 1.0 } else { off };
        gains.push(apply_blockage(
            band.calibration * g * s,
            band,
            mask_in.bits[i],
            mask_out.bits[i],
        ));
    }
    let alive = gains.iter().map(|&g| !is_outage(g, band)).collect();
    Ok(GainField {
        time,
        ap_id: ap.id,
        ue_id,
        wall_id: grid.wall_id,
        gains,
        alive,
    })
}
