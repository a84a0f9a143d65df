//! Shadow regions cast by bodies and furniture onto a tiled wall.
//!
//! Every blocker is treated as a convex polyhedron (bodies become 16-gon
//! prisms). Its part lying between the source and the wall is projected
//! centrally onto the wall plane, the hull of the projected vertices is
//! clipped to the wall rectangle, and tile centres strictly inside any hull
//! are marked shadowed.

use crate::error::{Error, Result};
use crate::geometry::{FurnitureBox, TileGrid, Wall, WallId};
use crate::math::{Point2, Point3, Vec2, Vec3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Number of sides of the prism standing in for a body cylinder.
pub const CYLINDER_SIDES: usize = 16;
/// Minimum distance kept between projected points and the source plane.
pub const NEAR_PLANE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Blocker {
    Cylinder {
        center: Point2,
        radius: f64,
        height: f64,
    },
    Box {
        min: Point3,
        max: Point3,
    },
}

impl Blocker {
    pub fn cylinder(center: Point2, radius: f64, height: f64) -> Self {
        Blocker::Cylinder {
            center,
            radius,
            height,
        }
    }

    pub fn from_furniture(f: &FurnitureBox) -> Self {
        Blocker::Box {
            min: f.min(),
            max: f.max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Blocker::Cylinder {
                center,
                radius,
                height,
            } => radius > 0.0 && height > 0.0 && center.x.is_finite() && center.y.is_finite(),
            Blocker::Box { min, max } => {
                max.x > min.x
                    && max.y > min.y
                    && max.z > min.z
                    && min.is_finite()
                    && max.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("degenerate blocker {self:?}")))
        }
    }

    fn prism_ring(center: Point2, radius: f64) -> [Point2; CYLINDER_SIDES] {
        std::array::from_fn(|k| {
            let a = 2.0 * PI * k as f64 / CYLINDER_SIDES as f64;
            center + Vec2::new(a.cos(), a.sin()) * radius
        })
    }

    /// Vertices and edges of the polyhedral model.
    pub fn polyhedron(&self) -> (Vec<Point3>, Vec<(usize, usize)>) {
        match *self {
            Blocker::Cylinder {
                center,
                radius,
                height,
            } => {
                let ring = Self::prism_ring(center, radius);
                let n = CYLINDER_SIDES;
                let mut verts = Vec::with_capacity(2 * n);
                verts.extend(ring.iter().map(|p| p.with_z(0.0)));
                verts.extend(ring.iter().map(|p| p.with_z(height)));
                let mut edges = Vec::with_capacity(3 * n);
                for k in 0..n {
                    let k1 = (k + 1) % n;
                    edges.push((k, k1));
                    edges.push((n + k, n + k1));
                    edges.push((k, n + k));
                }
                (verts, edges)
            }
            Blocker::Box { min, max } => {
                let verts: Vec<Point3> = (0..8)
                    .map(|i| {
                        Vec3::new(
                            if i & 1 == 0 { min.x } else { max.x },
                            if i & 2 == 0 { min.y } else { max.y },
                            if i & 4 == 0 { min.z } else { max.z },
                        )
                    })
                    .collect();
                let mut edges = Vec::with_capacity(12);
                for i in 0..8usize {
                    for bit in [1, 2, 4] {
                        if i & bit == 0 {
                            edges.push((i, i | bit));
                        }
                    }
                }
                (verts, edges)
            }
        }
    }

    /// Bounding half-spaces `n·x <= c` of the polyhedral model.
    pub fn half_spaces(&self) -> Vec<(Vec3, f64)> {
        match *self {
            Blocker::Cylinder {
                center,
                radius,
                height,
            } => {
                let ring = Self::prism_ring(center, radius);
                let mut hs = Vec::with_capacity(CYLINDER_SIDES + 2);
                hs.push((Vec3::new(0.0, 0.0, -1.0), 0.0));
                hs.push((Vec3::new(0.0, 0.0, 1.0), height));
                for k in 0..CYLINDER_SIDES {
                    let a = ring[k];
                    let b = ring[(k + 1) % CYLINDER_SIDES];
                    let e = b - a;
                    let n = Vec2::new(e.y, -e.x).normalized();
                    hs.push((n.with_z(0.0), n.dot(a)));
                }
                hs
            }
            Blocker::Box { min, max } => vec![
                (Vec3::new(-1.0, 0.0, 0.0), -min.x),
                (Vec3::new(1.0, 0.0, 0.0), max.x),
                (Vec3::new(0.0, -1.0, 0.0), -min.y),
                (Vec3::new(0.0, 1.0, 0.0), max.y),
                (Vec3::new(0.0, 0.0, -1.0), -min.z),
                (Vec3::new(0.0, 0.0, 1.0), max.z),
            ],
        }
    }

    /// Centre and radius of a bounding sphere.
    pub fn bounding_sphere(&self) -> (Point3, f64) {
        match *self {
            Blocker::Cylinder {
                center,
                radius,
                height,
            } => (center.with_z(0.5 * height), radius.hypot(0.5 * height)),
            Blocker::Box { min, max } => {
                let c = (min + max) * 0.5;
                (c, (max - c).norm())
            }
        }
    }
}

/// A simple polygon in wall coordinates `(u, v)`, counter-clockwise.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Polygon2 {
    pub vertices: Vec<Point2>,
}

impl Polygon2 {
    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= 0.0
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        0.5 * (0..n)
            .map(|i| self.vertices[i].cross(self.vertices[(i + 1) % n]))
            .sum::<f64>()
    }

    /// Strict interior test for a convex counter-clockwise polygon.
    pub fn contains_strict(&self, p: Point2) -> bool {
        let n = self.vertices.len();
        n >= 3
            && (0..n).all(|i| {
                let a = self.vertices[i];
                let b = self.vertices[(i + 1) % n];
                (b - a).cross(p - a) > 0.0
            })
    }

    pub fn bounds(&self) -> Option<(Point2, Point2)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), p| {
            (
                Vec2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Vec2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        }))
    }
}

/// Per-tile shadow bits for one source and one wall.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileMask {
    pub wall_id: WallId,
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<bool>,
}

impl TileMask {
    pub fn empty(grid: &TileGrid) -> Self {
        Self {
            wall_id: grid.wall_id,
            rows: grid.rows,
            cols: grid.cols,
            bits: vec![false; grid.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.cols + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.bits.len() as f64
        }
    }

    pub fn union_with(&mut self, other: &TileMask) -> Result<()> {
        if other.wall_id != self.wall_id || other.bits.len() != self.bits.len() {
            return Err(Error::InvalidSpec(
                "mask union across different grids".into(),
            ));
        }
        for (a, b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= *b;
        }
        Ok(())
    }

    /// Bitwise OR of several masks of the same grid.
    pub fn union_all<'a>(
        masks: impl IntoIterator<Item = &'a TileMask>,
    ) -> Result<Option<TileMask>> {
        let mut it = masks.into_iter();
        let Some(first) = it.next() else {
            return Ok(None);
        };
        let mut acc = first.clone();
        for m in it {
            acc.union_with(m)?;
        }
        Ok(Some(acc))
    }
}

fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let a = hull[hull.len() - 2];
                let b = hull[hull.len() - 1];
                if (b - a).cross(p - a) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn clip_to_rect(poly: Vec<Point2>, width: f64, height: f64) -> Vec<Point2> {
    // (axis, bound, keep_less)
    let edges = [
        (0, 0.0, false),
        (0, width, true),
        (1, 0.0, false),
        (1, height, true),
    ];
    let mut out = poly;
    for (axis, bound, keep_less) in edges {
        if out.is_empty() {
            break;
        }
        let coord = |p: Point2| if axis == 0 { p.x } else { p.y };
        let inside = |p: Point2| {
            if keep_less {
                coord(p) <= bound
            } else {
                coord(p) >= bound
            }
        };
        let input = std::mem::take(&mut out);
        for i in 0..input.len() {
            let cur = input[i];
            let prev = input[(i + input.len() - 1) % input.len()];
            let cross = |a: Point2, b: Point2| {
                let t = (bound - coord(a)) / (coord(b) - coord(a));
                let mut q = a + (b - a) * t;
                if axis == 0 {
                    q.x = bound;
                } else {
                    q.y = bound;
                }
                q
            };
            match (inside(prev), inside(cur)) {
                (true, true) => out.push(cur),
                (true, false) => out.push(cross(prev, cur)),
                (false, true) => {
                    out.push(cross(prev, cur));
                    out.push(cur);
                }
                (false, false) => {}
            }
        }
    }
    out
}

/// Central projection of the blocker from `source` onto the wall plane, in
/// wall coordinates, clipped to the wall rectangle.
pub fn shadow_polygon(source: Point3, blocker: &Blocker, wall: &Wall) -> Result<Polygon2> {
    let ds = wall.interior_distance(source);
    if ds.abs() < NEAR_PLANE_GUARD || !source.is_finite() {
        return Err(Error::SourceOnWall);
    }
    if ds < 0.0 {
        return Err(Error::InvalidSpec(
            "source outside the room relative to the wall".into(),
        ));
    }
    let limit = ds - NEAR_PLANE_GUARD;
    let (verts, edges) = blocker.polyhedron();
    let dist: Vec<f64> = verts.iter().map(|&p| wall.interior_distance(p)).collect();

    // Clip the polyhedron to the slab between the wall and the source plane.
    let mut kept: Vec<Point3> = verts
        .iter()
        .zip(&dist)
        .filter(|(_, &d)| d <= limit)
        .map(|(p, _)| *p)
        .collect();
    if kept.len() == verts.len() {
        // Entirely in front of the source plane; nothing to cut.
    } else {
        for &(a, b) in &edges {
            let (da, db) = (dist[a] - limit, dist[b] - limit);
            if (da < 0.0 && db > 0.0) || (da > 0.0 && db < 0.0) {
                let t = da / (da - db);
                kept.push(verts[a] + (verts[b] - verts[a]) * t);
            }
        }
    }
    if kept.len() < 3 {
        return Ok(Polygon2::default());
    }

    let projected: Vec<Point2> = kept
        .iter()
        .map(|&p| {
            let dp = wall.interior_distance(p).min(limit);
            let s = ds / (ds - dp);
            wall.to_wall_coords(source + (p - source) * s)
        })
        .collect();
    let hull = convex_hull(projected);
    if hull.len() < 3 {
        return Ok(Polygon2::default());
    }
    let mut clipped = clip_to_rect(hull, wall.width, wall.height);
    // Clipping can repeat corners; zero-length edges would break the strict
    // inside test.
    clipped.dedup_by(|b, a| (*b - *a).norm() < 1e-12);
    while clipped.len() > 1 && (clipped[0] - clipped[clipped.len() - 1]).norm() < 1e-12 {
        clipped.pop();
    }
    Ok(Polygon2 { vertices: clipped })
}

/// Mark tiles whose centre lies strictly inside any blocker's shadow.
pub fn shadowed_tiles(
    source: Point3,
    blockers: &[Blocker],
    wall: &Wall,
    grid: &TileGrid,
) -> Result<TileMask> {
    let mut mask = TileMask::empty(grid);
    let h = 0.5 * grid.tile_size;
    for b in blockers {
        let poly = shadow_polygon(source, b, wall)?;
        if poly.is_empty() {
            continue;
        }
        let Some((lo, hi)) = poly.bounds() else {
            continue;
        };
        let c0 = (((lo.x - h) / grid.tile_size).floor().max(0.0) as usize).min(grid.cols);
        let c1 = (((hi.x - h) / grid.tile_size).ceil().max(0.0) as usize + 1).min(grid.cols);
        let r0 = (((lo.y - h) / grid.tile_size).floor().max(0.0) as usize).min(grid.rows);
        let r1 = (((hi.y - h) / grid.tile_size).ceil().max(0.0) as usize + 1).min(grid.rows);
        for row in r0..r1 {
            for col in c0..c1 {
                let idx = grid.index(row, col);
                if mask.bits[idx] {
                    continue;
                }
                let uv = wall.to_wall_coords(grid.tile_centers[idx]);
                if poly.contains_strict(uv) {
                    mask.bits[idx] = true;
                }
            }
        }
    }
    Ok(mask)
}

/// Whether the open segment `(p, q)` passes through the interior of the
/// blocker's polyhedral model. Grazing contact does not count.
pub fn segment_blocked_by(p: Point3, q: Point3, blocker: &Blocker) -> bool {
    let d = q - p;
    let (c, r) = blocker.bounding_sphere();
    let t = if d.dot(d) > 0.0 {
        ((c - p).dot(d) / d.dot(d)).clamp(0.0, 1.0)
    } else {
        0.0
    };
    if (p + d * t - c).norm() > r {
        return false;
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for (n, k) in blocker.half_spaces() {
        let num = k - n.dot(p);
        let den = n.dot(d);
        if den == 0.0 {
            if num <= 0.0 {
                return false;
            }
        } else if den > 0.0 {
            hi = hi.min(num / den);
        } else {
            lo = lo.max(num / den);
        }
        if lo >= hi {
            return false;
        }
    }
    lo < hi
}

/// Brute-force check of a single segment against every blocker.
pub fn segment_blocked_oracle(p: Point3, q: Point3, blockers: &[Blocker]) -> bool {
    blockers.iter().any(|b| segment_blocked_by(p, q, b))
}

/// Mask built by testing each tile centre individually.
pub fn oracle_mask(source: Point3, blockers: &[Blocker], grid: &TileGrid) -> TileMask {
    let mut mask = TileMask::empty(grid);
    for (bit, &c) in mask.bits.iter_mut().zip(&grid.tile_centers) {
        *bit = segment_blocked_oracle(source, c, blockers);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_layout, Layout, LayoutId, LayoutSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn r1() -> Layout {
        build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap()
    }

    fn unit_box(c: Point3) -> Blocker {
        Blocker::Box {
            min: c - Vec3::new(0.5, 0.5, 0.5),
            max: c + Vec3::new(0.5, 0.5, 0.5),
        }
    }

    #[test]
    fn central_box_covers_piercing_point() {
        let layout = r1();
        let wall = layout.wall(WallId::S1);
        let src = Vec3::new(2.5, 1.5, 3.0);
        let b = unit_box(Vec3::new(2.5, 3.25, 2.0));
        let poly = shadow_polygon(src, &b, wall).unwrap();
        assert!(!poly.is_empty());
        // Ray through the box centre hits y = 5 at z = 3 - 1 * (3.5 / 1.75).
        let pierce = wall.to_wall_coords(Vec3::new(2.5, 5.0, 1.0));
        assert!(poly.contains_strict(pierce));
    }

    #[test]
    fn blocker_behind_source_has_no_shadow() {
        let layout = r1();
        let wall = layout.wall(WallId::S1);
        let src = Vec3::new(2.5, 3.0, 1.5);
        let b = unit_box(Vec3::new(2.5, 1.0, 1.5));
        assert!(shadow_polygon(src, &b, wall).unwrap().is_empty());
    }

    #[test]
    fn source_on_wall_is_rejected() {
        let layout = r1();
        let wall = layout.wall(WallId::S1);
        let b = unit_box(Vec3::new(2.5, 2.5, 1.0));
        assert!(matches!(
            shadow_polygon(Vec3::new(2.5, 5.0, 1.0), &b, wall),
            Err(Error::SourceOnWall)
        ));
    }

    #[test]
    fn near_coplanar_vertices_stay_finite_and_clipped() {
        let layout = r1();
        let wall = layout.wall(WallId::S1);
        let src = Vec3::new(2.5, 2.0, 1.5);
        // Box straddling the source plane.
        let b = Blocker::Box {
            min: Vec3::new(2.4, 1.9, 0.0),
            max: Vec3::new(2.6, 2.1, 2.0),
        };
        let poly = shadow_polygon(src, &b, wall).unwrap();
        assert!(!poly.is_empty());
        for v in &poly.vertices {
            assert!(v.x.is_finite() && v.y.is_finite());
            assert!(v.x >= -1e-9 && v.x <= wall.width + 1e-9);
            assert!(v.y >= -1e-9 && v.y <= wall.height + 1e-9);
        }
    }

    #[test]
    fn no_blockers_gives_clear_mask() {
        let layout = r1();
        let grid = layout.grid(WallId::S3);
        let m =
            shadowed_tiles(Vec3::new(2.5, 2.5, 3.0), &[], layout.wall(WallId::S3), grid).unwrap();
        assert_eq!(m.count(), 0);
        assert_eq!(m.len(), 1500);
    }

    #[test]
    fn small_blocker_shadows_exactly_one_tile() {
        let layout = r1();
        let wall = layout.wall(WallId::S1);
        let grid = layout.grid(WallId::S1);
        let target = grid.tile_centers[grid.index(12, 20)];
        let src = Vec3::new(2.0, 2.0, 1.0);
        let mid = src + (target - src) * 0.5;
        let b = Blocker::Box {
            min: mid - Vec3::new(0.01, 0.01, 0.01),
            max: mid + Vec3::new(0.01, 0.01, 0.01),
        };
        let m = shadowed_tiles(src, &[b], wall, grid).unwrap();
        assert_eq!(m.count(), 1);
        assert!(m.get(12, 20));
    }

    #[test]
    fn oracle_segment_cases() {
        let b = unit_box(Vec3::new(0.0, 0.0, 1.0));
        assert!(segment_blocked_oracle(
            Vec3::new(-2.0, 0.0, 1.0),
            Vec3::new(2.0, 0.0, 1.0),
            &[b]
        ));
        assert!(!segment_blocked_oracle(
            Vec3::new(-5.0, 4.0, 1.0),
            Vec3::new(5.0, 4.0, 1.0),
            &[b]
        ));
        // Along a face: boundary contact only.
        assert!(!segment_blocked_oracle(
            Vec3::new(-2.0, 0.5, 1.0),
            Vec3::new(2.0, 0.5, 1.0),
            &[b]
        ));
        // Tangent to the prism at a vertex of the ring.
        let c = Blocker::cylinder(Vec2::new(0.0, 0.0), 0.3, 1.7);
        assert!(!segment_blocked_oracle(
            Vec3::new(0.3, -1.0, 1.0),
            Vec3::new(0.3, 1.0, 1.0),
            &[c]
        ));
        assert!(segment_blocked_oracle(
            Vec3::new(0.0, -1.0, 1.0),
            Vec3::new(0.0, 1.0, 1.0),
            &[c]
        ));
    }

    fn random_cylinder(rng: &mut ChaCha8Rng) -> Blocker {
        Blocker::cylinder(
            Vec2::new(rng.random_range(0.4..4.6), rng.random_range(0.4..4.6)),
            rng.random_range(0.1..0.4),
            rng.random_range(0.5..2.2),
        )
    }

    #[test]
    fn mask_matches_oracle_on_random_configurations() {
        let layout = r1();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for cfg in 0..100 {
            let src = Vec3::new(
                rng.random_range(0.2..4.8),
                rng.random_range(0.2..4.8),
                rng.random_range(0.5..2.9),
            );
            let blockers: Vec<Blocker> = (0..rng.random_range(1..4))
                .map(|_| random_cylinder(&mut rng))
                .collect();
            for id in WallId::ALL {
                let grid = layout.grid(id);
                let m = shadowed_tiles(src, &blockers, layout.wall(id), grid).unwrap();
                assert_eq!(
                    m,
                    oracle_mask(src, &blockers, grid),
                    "config {cfg} wall {id}"
                );
            }
        }
    }

    #[test]
    fn crowd_and_furniture_match_oracle() {
        let layout = r1();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut blockers: Vec<Blocker> = layout
            .furniture
            .iter()
            .map(Blocker::from_furniture)
            .collect();
        while blockers.len() < layout.furniture.len() + 8 {
            let p = Vec2::new(rng.random_range(0.3..4.7), rng.random_range(0.3..4.7));
            if layout.is_free(p, 0.15) {
                blockers.push(Blocker::cylinder(p, 0.15, 1.7));
            }
        }
        for ap in &layout.aps {
            for id in WallId::ALL {
                let grid = layout.grid(id);
                let m = shadowed_tiles(ap.position, &blockers, layout.wall(id), grid).unwrap();
                assert_eq!(m, oracle_mask(ap.position, &blockers, grid));
            }
        }
    }

    #[test]
    fn adding_a_blocker_never_clears_tiles() {
        let layout = r1();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let wall = layout.wall(WallId::S2);
        let grid = layout.grid(WallId::S2);
        for _ in 0..20 {
            let src = Vec3::new(rng.random_range(0.5..4.5), rng.random_range(1.0..4.5), 3.0);
            let a = vec![random_cylinder(&mut rng)];
            let mut ab = a.clone();
            ab.push(random_cylinder(&mut rng));
            let ma = shadowed_tiles(src, &a, wall, grid).unwrap();
            let mab = shadowed_tiles(src, &ab, wall, grid).unwrap();
            assert!(ma.bits.iter().zip(&mab.bits).all(|(x, y)| !x || *y));
        }
    }

    #[test]
    fn union_requires_matching_grids() {
        let layout = r1();
        let mut a = TileMask::empty(layout.grid(WallId::S1));
        let b = TileMask::empty(layout.grid(WallId::S2));
        assert!(a.union_with(&b).is_err());
    }
}
