//! Room construction: walls S1–S4, furniture, ceiling access points and the
//! RIS tile grid covering every wall.
//!
//! Coordinates: the floor spans `x ∈ [0, length]`, `y ∈ [0, width]`, the
//! ceiling sits at `z = height`. The door wall S2 is the `y = 0` plane, S1 is
//! opposite it, S3 is on the left after entering (`x = 0`) and S4 on the
//! right (`x = length`). Each wall carries a 2-D frame whose `u` axis runs
//! left→right as seen from inside the room and whose `v` axis points up.

use crate::error::{Error, Result};
use crate::math::{Point2, Point3, Rect, Vec2, Vec3};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Standoff between a seat anchor (or the door anchor) and its furniture edge / door plane.
pub const ANCHOR_STANDOFF: f64 = 0.4;
/// Furniture lower than this is treated as a work surface that people sit at.
pub const SEAT_SURFACE_MAX_HEIGHT: f64 = 0.9;
/// Horizontal pitch between seats along a table side.
pub const SEAT_PITCH: f64 = 0.6;
/// Clearance used when testing whether an anchor is walkable.
pub const ANCHOR_CLEARANCE: f64 = 0.15;

const DIVISIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum WallId {
    S1,
    S2,
    S3,
    S4,
}

impl WallId {
    pub const ALL: [WallId; 4] = [WallId::S1, WallId::S2, WallId::S3, WallId::S4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn parse(s: &str) -> Option<WallId> {
        match s.trim().to_ascii_uppercase().as_str() {
            "S1" => Some(WallId::S1),
            "S2" => Some(WallId::S2),
            "S3" => Some(WallId::S3),
            "S4" => Some(WallId::S4),
            _ => None,
        }
    }
}

impl fmt::Display for WallId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayoutId {
    R1,
    R2,
    R3,
    #[serde(rename = "custom")]
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub wall: WallId,
    /// Horizontal span along the wall's `u` axis, metres.
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FurnitureBox {
    #[serde(default)]
    pub name: String,
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl FurnitureBox {
    pub fn min(&self) -> Point3 {
        Vec3::new(self.min[0], self.min[1], self.min[2])
    }

    pub fn max(&self) -> Point3 {
        Vec3::new(self.max[0], self.max[1], self.max[2])
    }

    pub fn footprint(&self) -> Rect {
        Rect {
            min: Vec2::new(self.min[0], self.min[1]),
            max: Vec2::new(self.max[0], self.max[1]),
        }
    }

    pub fn height(&self) -> f64 {
        self.max[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RisTileSpec {
    pub tile_size: f64,
    pub meta_surface_size: f64,
    pub meta_per_tile: u32,
}

impl Default for RisTileSpec {
    fn default() -> Self {
        Self {
            tile_size: 0.1,
            meta_surface_size: 0.01,
            meta_per_tile: 100,
        }
    }
}

impl RisTileSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tile_size > 0.0 && self.meta_surface_size > 0.0 && self.meta_per_tile > 0) {
            return Err(Error::InvalidSpec(
                "tile dimensions must be positive".into(),
            ));
        }
        let covered = self.meta_per_tile as f64 * self.meta_surface_size.powi(2);
        if (covered - self.tile_size.powi(2)).abs() > 1e-9 {
            return Err(Error::InvalidSpec(format!(
                "tile area {} m² != {} meta-surfaces × {} m²",
                self.tile_size.powi(2),
                self.meta_per_tile,
                self.meta_surface_size.powi(2)
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        self.tile_size * self.tile_size
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutSpec {
    pub layout_id: LayoutId,
    /// (length, width, height) in metres.
    pub room_size: [f64; 3],
    pub door: DoorSpec,
    #[serde(default)]
    pub furniture: Vec<FurnitureBox>,
    pub ap_count: u8,
    #[serde(default)]
    pub tiles: RisTileSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub id: WallId,
    pub origin: Point3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    pub width: f64,
    pub height: f64,
}

impl Wall {
    pub fn inward_normal(&self) -> Vec3 {
        -self.normal
    }

    /// Signed distance from the wall plane, positive on the room side.
    pub fn interior_distance(&self, p: Point3) -> f64 {
        self.inward_normal().dot(p - self.origin)
    }

    pub fn to_wall_coords(&self, p: Point3) -> Vec2 {
        let d = p - self.origin;
        Vec2::new(d.dot(self.u_axis), d.dot(self.v_axis))
    }

    pub fn to_world(&self, uv: Vec2) -> Point3 {
        self.origin + self.u_axis * uv.x + self.v_axis * uv.y
    }

    /// Reflect a point through the wall plane.
    pub fn mirror(&self, p: Point3) -> Point3 {
        let d = self.interior_distance(p);
        p - self.inward_normal() * (2.0 * d)
    }
}

/// One RIS tile as seen by the channel model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tile {
    pub index: usize,
    pub row: usize,
    pub col: usize,
    pub center: Point3,
    /// Unit normal pointing into the room.
    pub normal: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub size: f64,
    /// Origin of the wall's (u, v) frame.
    pub wall_origin: Point3,
}

impl Tile {
    pub fn area(&self) -> f64 {
        self.size * self.size
    }

    /// Whether `p` (assumed on the tile plane) falls in the tile footprint,
    /// using half-open intervals so that adjacent tiles never both claim a point.
    pub fn footprint_contains(&self, p: Point3) -> bool {
        let d = p - self.wall_origin;
        let (u, v) = (d.dot(self.u_axis), d.dot(self.v_axis));
        u >= 0.0
            && v >= 0.0
            && (u / self.size).floor() == self.col as f64
            && (v / self.size).floor() == self.row as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileGrid {
    pub wall_id: WallId,
    pub rows: usize,
    pub cols: usize,
    pub tile_size: f64,
    /// Row-major, row 0 at floor level, column 0 at the wall's left edge.
    pub tile_centers: Vec<Point3>,
    /// Unit normal pointing into the room.
    pub tile_normal: Vec3,
    pub u_axis: Vec3,
    pub v_axis: Vec3,
    pub origin: Point3,
}

impl TileGrid {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn tile(&self, index: usize) -> Tile {
        let (row, col) = self.row_col(index);
        Tile {
            index,
            row,
            col,
            center: self.tile_centers[index],
            normal: self.tile_normal,
            u_axis: self.u_axis,
            v_axis: self.v_axis,
            size: self.tile_size,
            wall_origin: self.origin,
        }
    }

    pub fn tiles(&self) -> impl Iterator<Item = Tile> + '_ {
        (0..self.len()).map(move |i| self.tile(i))
    }

    /// Tile containing wall coordinates `uv`, if inside the wall.
    pub fn locate(&self, uv: Vec2) -> Option<usize> {
        if uv.x < 0.0 || uv.y < 0.0 {
            return None;
        }
        let col = (uv.x / self.tile_size).floor() as usize;
        let row = (uv.y / self.tile_size).floor() as usize;
        (row < self.rows && col < self.cols).then(|| self.index(row, col))
    }

    /// Nearest tile to wall coordinates `uv` (clamped into the grid).
    pub fn nearest(&self, uv: Vec2) -> usize {
        let col = (uv.x / self.tile_size)
            .floor()
            .clamp(0.0, (self.cols - 1) as f64) as usize;
        let row = (uv.y / self.tile_size)
            .floor()
            .clamp(0.0, (self.rows - 1) as f64) as usize;
        self.index(row, col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub id: usize,
    pub position: Point3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Door,
    Seat,
    Center,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidentNode {
    pub position: Point2,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub spec: LayoutSpec,
    /// Indexed by `WallId::index()`.
    pub walls: [Wall; 4],
    pub furniture: Vec<FurnitureBox>,
    pub aps: Vec<AccessPoint>,
    /// Indexed by `WallId::index()`.
    pub grids: Vec<TileGrid>,
    pub door_anchor: Point2,
}

impl Layout {
    pub fn length(&self) -> f64 {
        self.spec.room_size[0]
    }

    pub fn width(&self) -> f64 {
        self.spec.room_size[1]
    }

    pub fn height(&self) -> f64 {
        self.spec.room_size[2]
    }

    pub fn wall(&self, id: WallId) -> &Wall {
        &self.walls[id.index()]
    }

    pub fn grid(&self, id: WallId) -> &TileGrid {
        &self.grids[id.index()]
    }

    pub fn floor_rect(&self) -> Rect {
        Rect {
            min: Vec2::ZERO,
            max: Vec2::new(self.length(), self.width()),
        }
    }

    pub fn diagonal(&self) -> f64 {
        self.length().hypot(self.width())
    }

    /// A floor point is free when it keeps `clearance` from every wall and
    /// from every furniture footprint.
    pub fn is_free(&self, p: Point2, clearance: f64) -> bool {
        p.x >= clearance
            && p.y >= clearance
            && p.x <= self.length() - clearance
            && p.y <= self.width() - clearance
            && self
                .furniture
                .iter()
                .all(|f| !f.footprint().inflate(clearance).contains(p))
    }

    /// Project a point into free space: clamp into the room, then push out of
    /// inflated furniture footprints.
    pub fn nearest_free(&self, p: Point2, clearance: f64) -> Point2 {
        let mut q = Vec2::new(
            p.x.clamp(clearance, self.length() - clearance),
            p.y.clamp(clearance, self.width() - clearance),
        );
        for _ in 0..8 {
            let mut moved = false;
            for f in &self.furniture {
                let r = f.footprint().inflate(clearance);
                if r.contains(q) {
                    q = r.push_out(q);
                    q = Vec2::new(
                        q.x.clamp(clearance, self.length() - clearance),
                        q.y.clamp(clearance, self.width() - clearance),
                    );
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        q
    }
}

impl LayoutSpec {
    pub fn validate(&self) -> Result<()> {
        let [l, w, h] = self.room_size;
        if !(l > 0.0 && w > 0.0 && h > 0.0) || !(l.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidSpec(
                "room dimensions must be strictly positive".into(),
            ));
        }
        if self.door.wall != WallId::S2 {
            return Err(Error::InvalidSpec("the door must lie on wall S2".into()));
        }
        if !(self.door.start >= 0.0 && self.door.end > self.door.start && self.door.end <= l) {
            return Err(Error::InvalidSpec(format!(
                "door span [{}, {}] must lie within wall S2 of width {l}",
                self.door.start, self.door.end
            )));
        }
        for f in &self.furniture {
            let inside = (0..3)
                .all(|k| f.min[k] >= 0.0 && f.max[k] <= self.room_size[k] && f.max[k] > f.min[k]);
            if !inside {
                return Err(Error::InvalidSpec(format!(
                    "furniture box '{}' must have positive size and lie inside the room",
                    f.name
                )));
            }
        }
        if !(1..=9).contains(&self.ap_count) {
            return Err(Error::InvalidSpec(format!(
                "ap_count {} not in 1..=9",
                self.ap_count
            )));
        }
        self.tiles.validate()
    }

    pub fn preset(id: LayoutId) -> Option<LayoutSpec> {
        let text = match id {
            LayoutId::R1 => include_str!("../presets/R1.json"),
            LayoutId::R2 => include_str!("../presets/R2.json"),
            LayoutId::R3 => include_str!("../presets/R3.json"),
            LayoutId::Custom => return None,
        };
        Some(serde_json::from_str(text).expect("shipped preset parses"))
    }

    pub fn preset_by_name(name: &str) -> Option<LayoutSpec> {
        match name.trim().to_ascii_uppercase().as_str() {
            "R1" => Self::preset(LayoutId::R1),
            "R2" => Self::preset(LayoutId::R2),
            "R3" => Self::preset(LayoutId::R3),
            _ => None,
        }
    }
}

fn walls_for(l: f64, w: f64, h: f64) -> [Wall; 4] {
    let up = Vec3::new(0.0, 0.0, 1.0);
    [
        Wall {
            id: WallId::S1,
            origin: Vec3::new(0.0, w, 0.0),
            u_axis: Vec3::new(1.0, 0.0, 0.0),
            v_axis: up,
            normal: Vec3::new(0.0, 1.0, 0.0),
            width: l,
            height: h,
        },
        Wall {
            id: WallId::S2,
            origin: Vec3::new(l, 0.0, 0.0),
            u_axis: Vec3::new(-1.0, 0.0, 0.0),
            v_axis: up,
            normal: Vec3::new(0.0, -1.0, 0.0),
            width: l,
            height: h,
        },
        Wall {
            id: WallId::S3,
            origin: Vec3::new(0.0, 0.0, 0.0),
            u_axis: Vec3::new(0.0, 1.0, 0.0),
            v_axis: up,
            normal: Vec3::new(-1.0, 0.0, 0.0),
            width: w,
            height: h,
        },
        Wall {
            id: WallId::S4,
            origin: Vec3::new(l, w, 0.0),
            u_axis: Vec3::new(0.0, -1.0, 0.0),
            v_axis: up,
            normal: Vec3::new(1.0, 0.0, 0.0),
            width: w,
            height: h,
        },
    ]
}

fn tile_count(extent: f64, tile: f64) -> Result<usize> {
    let n = extent / tile;
    let rounded = n.round();
    if rounded < 1.0 || ((n - rounded) * tile).abs() > DIVISIBILITY_TOL {
        return Err(Error::NonDivisibleExtent { extent, tile });
    }
    Ok(rounded as usize)
}

pub fn generate_tile_grid(wall: &Wall, tiles: &RisTileSpec) -> Result<TileGrid> {
    let s = tiles.tile_size;
    let cols = tile_count(wall.width, s)?;
    let rows = tile_count(wall.height, s)?;
    let mut tile_centers = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let uv = Vec2::new((c as f64 + 0.5) * s, (r as f64 + 0.5) * s);
            tile_centers.push(wall.to_world(uv));
        }
    }
    Ok(TileGrid {
        wall_id: wall.id,
        rows,
        cols,
        tile_size: s,
        tile_centers,
        tile_normal: wall.inward_normal(),
        u_axis: wall.u_axis,
        v_axis: wall.v_axis,
        origin: wall.origin,
    })
}

/// Grid shape (rows along y, cols along x) for an even AP placement.
fn ap_grid_shape(n: usize, length: f64, width: f64) -> (usize, usize) {
    let small = (1..=n)
        .filter(|d| n.is_multiple_of(*d) && d * d <= n)
        .max()
        .unwrap_or(1);
    let large = n / small;
    if length >= width {
        (small, large)
    } else {
        (large, small)
    }
}

pub fn ap_positions(n: usize, room: [f64; 3]) -> Vec<AccessPoint> {
    let [l, w, h] = room;
    let (rows, cols) = ap_grid_shape(n, l, w);
    let mut aps = Vec::with_capacity(n);
    for r in 0..rows {
        for c in 0..cols {
            let x = (c as f64 + 0.5) * l / cols as f64;
            let y = (r as f64 + 0.5) * w / rows as f64;
            aps.push(AccessPoint {
                id: aps.len(),
                position: Vec3::new(x, y, h),
            });
        }
    }
    aps
}

pub fn build_layout(spec: &LayoutSpec) -> Result<Layout> {
    spec.validate()?;
    let [l, w, h] = spec.room_size;
    let walls = walls_for(l, w, h);
    let grids = walls
        .iter()
        .map(|wall| generate_tile_grid(wall, &spec.tiles))
        .collect::<Result<Vec<_>>>()?;
    let s2 = &walls[WallId::S2.index()];
    let door_mid = s2.to_world(Vec2::new(0.5 * (spec.door.start + spec.door.end), 0.0));
    let door_anchor = Vec2::new(door_mid.x, ANCHOR_STANDOFF.min(0.5 * w));
    Ok(Layout {
        spec: spec.clone(),
        walls,
        furniture: spec.furniture.clone(),
        aps: ap_positions(spec.ap_count as usize, spec.room_size),
        grids,
        door_anchor,
    })
}

/// Recurrent anchor points: the door anchor first, then one seat per
/// `SEAT_PITCH` along both long sides of every work surface, keeping only
/// walkable seats. A room without any seat falls back to its centre when
/// that is walkable.
pub fn resident_nodes(layout: &Layout) -> Vec<ResidentNode> {
    let mut nodes = vec![ResidentNode {
        position: layout.door_anchor,
        kind: NodeKind::Door,
    }];
    for f in layout
        .furniture
        .iter()
        .filter(|f| f.height() < SEAT_SURFACE_MAX_HEIGHT)
    {
        let r = f.footprint();
        let dx = r.max.x - r.min.x;
        let dy = r.max.y - r.min.y;
        let along_x = dx >= dy;
        let long = if along_x { dx } else { dy };
        let n = ((long / SEAT_PITCH).floor() as usize).max(1);
        for k in 0..n {
            let t = (k as f64 + 0.5) * long / n as f64;
            let seats = if along_x {
                [
                    Vec2::new(r.min.x + t, r.min.y - ANCHOR_STANDOFF),
                    Vec2::new(r.min.x + t, r.max.y + ANCHOR_STANDOFF),
                ]
            } else {
                [
                    Vec2::new(r.min.x - ANCHOR_STANDOFF, r.min.y + t),
                    Vec2::new(r.max.x + ANCHOR_STANDOFF, r.min.y + t),
                ]
            };
            for p in seats {
                if layout.is_free(p, ANCHOR_CLEARANCE) {
                    nodes.push(ResidentNode {
                        position: p,
                        kind: NodeKind::Seat,
                    });
                }
            }
        }
    }
    if nodes.len() == 1 {
        let c = Vec2::new(0.5 * layout.length(), 0.5 * layout.width());
        if layout.is_free(c, ANCHOR_CLEARANCE) {
            nodes.push(ResidentNode {
                position: c,
                kind: NodeKind::Center,
            });
        }
    }
    nodes
}

#[cfg(test)]
mod tests {
    use super::*;

    fn custom(room: [f64; 3], furniture: Vec<FurnitureBox>, aps: u8) -> LayoutSpec {
        LayoutSpec {
            layout_id: LayoutId::Custom,
            room_size: room,
            door: DoorSpec {
                wall: WallId::S2,
                start: 0.0,
                end: room[0].min(0.9),
            },
            furniture,
            ap_count: aps,
            tiles: RisTileSpec::default(),
        }
    }

    #[test]
    fn r1_has_1500_tiles_per_wall() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
        assert_eq!(layout.walls.len(), 4);
        for g in &layout.grids {
            assert_eq!(g.len(), 1500);
            assert_eq!((g.rows, g.cols), (30, 50));
        }
        assert_eq!(layout.aps.len(), 4);
    }

    #[test]
    fn narrow_room_gives_single_column_walls() {
        let layout = build_layout(&custom([0.1, 0.1, 3.0], vec![], 1)).unwrap();
        for g in &layout.grids {
            assert_eq!((g.rows, g.cols), (30, 1));
        }
    }

    #[test]
    fn nine_aps_form_three_by_three_grid() {
        let layout = build_layout(&custom([5.0, 3.0, 3.0], vec![], 9)).unwrap();
        let xs = [5.0 / 6.0, 15.0 / 6.0, 25.0 / 6.0];
        let ys = [3.0 / 6.0, 9.0 / 6.0, 15.0 / 6.0];
        assert_eq!(layout.aps.len(), 9);
        for (i, ap) in layout.aps.iter().enumerate() {
            assert!((ap.position.x - xs[i % 3]).abs() < 1e-12);
            assert!((ap.position.y - ys[i / 3]).abs() < 1e-12);
            assert_eq!(ap.position.z, 3.0);
        }
    }

    #[test]
    fn single_ap_sits_at_ceiling_center() {
        let layout = build_layout(&custom([5.0, 5.0, 3.0], vec![], 1)).unwrap();
        assert_eq!(layout.aps[0].position, Vec3::new(2.5, 2.5, 3.0));
    }

    #[test]
    fn tile_grid_counts() {
        let walls = walls_for(5.0, 1.0, 3.0);
        let g = generate_tile_grid(&walls[0], &RisTileSpec::default()).unwrap();
        assert_eq!(g.len(), 1500);
        let g = generate_tile_grid(&walls[2], &RisTileSpec::default());
        assert_eq!(g.unwrap().len(), 300);
        let square = Wall {
            width: 1.0,
            height: 1.0,
            ..walls[0]
        };
        assert_eq!(
            generate_tile_grid(&square, &RisTileSpec::default())
                .unwrap()
                .len(),
            100
        );
    }

    #[test]
    fn non_divisible_wall_is_rejected() {
        let walls = walls_for(5.0, 5.0, 3.0);
        let spec = RisTileSpec {
            tile_size: 0.3,
            meta_surface_size: 0.03,
            meta_per_tile: 100,
        };
        assert!(matches!(
            generate_tile_grid(&walls[0], &spec),
            Err(Error::NonDivisibleExtent { .. })
        ));
    }

    #[test]
    fn tile_spec_area_must_match_meta_surfaces() {
        let bad = RisTileSpec {
            tile_size: 0.1,
            meta_surface_size: 0.02,
            meta_per_tile: 100,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn tile_lattice_is_uniform_and_covers_wall() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R2).unwrap()).unwrap();
        for (wall, g) in layout.walls.iter().zip(&layout.grids) {
            let area: f64 = g.len() as f64 * g.tile_size * g.tile_size;
            assert!((area - wall.width * wall.height).abs() < 1e-9);
            for (i, c) in g.tile_centers.iter().enumerate() {
                assert!(wall.interior_distance(*c).abs() < 1e-12);
                let uv = wall.to_wall_coords(*c);
                assert_eq!(g.locate(uv), Some(i));
            }
            let mut min_gap = f64::INFINITY;
            for i in 0..g.len() {
                for j in (i + 1)..g.len().min(i + 60) {
                    min_gap = min_gap.min((g.tile_centers[i] - g.tile_centers[j]).norm());
                }
            }
            assert!((min_gap - g.tile_size).abs() < 1e-9);
        }
    }

    #[test]
    fn wall_labels_follow_door_convention() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
        let s2 = layout.wall(WallId::S2);
        let s1 = layout.wall(WallId::S1);
        assert!((s1.normal + s2.normal).norm() < 1e-12, "S1 opposes S2");
        // Entering through S2 means facing +y: S3 lies to the left (-x), S4 to the right.
        assert_eq!(layout.wall(WallId::S3).normal, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(layout.wall(WallId::S4).normal, Vec3::new(1.0, 0.0, 0.0));
        for w in &layout.walls {
            assert!((w.u_axis.cross(w.v_axis) - w.inward_normal()).norm() < 1e-12);
        }
    }

    #[test]
    fn invalid_specs_name_the_violation() {
        let mut s = custom([5.0, 5.0, 3.0], vec![], 4);
        s.room_size[1] = 0.0;
        assert!(build_layout(&s)
            .unwrap_err()
            .to_string()
            .contains("positive"));
        let mut s = custom([5.0, 5.0, 3.0], vec![], 4);
        s.door.end = 6.0;
        assert!(build_layout(&s).unwrap_err().to_string().contains("door"));
        let s = custom(
            [5.0, 5.0, 3.0],
            vec![FurnitureBox {
                name: "x".into(),
                min: [4.0, 4.0, 0.0],
                max: [6.0, 5.0, 1.0],
            }],
            4,
        );
        assert!(build_layout(&s)
            .unwrap_err()
            .to_string()
            .contains("furniture"));
        let s = custom([5.0, 5.0, 3.0], vec![], 10);
        assert!(build_layout(&s)
            .unwrap_err()
            .to_string()
            .contains("ap_count"));
    }

    #[test]
    fn r1_resident_nodes_are_door_plus_six_chairs() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
        let nodes = resident_nodes(&layout);
        assert_eq!(nodes[0].kind, NodeKind::Door);
        let seats: Vec<_> = nodes.iter().filter(|n| n.kind == NodeKind::Seat).collect();
        assert_eq!(seats.len(), 6);
        // Table spans x∈[1.5,3.5], y∈[2,3]; seats sit 0.4 m off each long side.
        for s in &seats {
            assert!((s.position.y - 1.6).abs() < 1e-12 || (s.position.y - 3.4).abs() < 1e-12);
        }
        let xs: Vec<f64> = seats.iter().map(|s| s.position.x).take(2).collect();
        assert!((xs[0] - (1.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_room_falls_back_to_center() {
        let layout = build_layout(&custom([5.0, 5.0, 3.0], vec![], 1)).unwrap();
        let nodes = resident_nodes(&layout);
        assert_eq!(nodes.len(), 2);
        assert_eq!(nodes[1].position, Vec2::new(2.5, 2.5));
    }

    #[test]
    fn filled_room_keeps_only_door_anchor() {
        let fill = FurnitureBox {
            name: "block".into(),
            min: [0.0, 0.5, 0.0],
            max: [5.0, 5.0, 0.8],
        };
        let layout = build_layout(&custom([5.0, 5.0, 3.0], vec![fill], 1)).unwrap();
        let nodes = resident_nodes(&layout);
        assert_eq!(nodes.len(), 1);
        assert_eq!(nodes[0].kind, NodeKind::Door);
    }

    #[test]
    fn resident_nodes_are_walkable_in_all_presets() {
        for id in [LayoutId::R1, LayoutId::R2, LayoutId::R3] {
            let layout = build_layout(&LayoutSpec::preset(id).unwrap()).unwrap();
            for n in resident_nodes(&layout) {
                assert!(layout.is_free(n.position, ANCHOR_CLEARANCE), "{id:?} {n:?}");
            }
        }
    }

    #[test]
    fn build_is_deterministic() {
        let spec = LayoutSpec::preset(LayoutId::R3).unwrap();
        assert_eq!(build_layout(&spec).unwrap(), build_layout(&spec).unwrap());
    }
}
