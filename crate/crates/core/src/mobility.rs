//! User mobility: a semi-Markov waypoint process mixing returns to resident
//! nodes with bounded Lévy steps, steering-force integration between
//! waypoints, posture-conditioned handset orientation and the
//! entering/wandering/exiting schedule.

use crate::error::{Error, Result};
use crate::geometry::{Layout, NodeKind, ResidentNode};
use crate::math::{Point2, Rect, Vec2, Vec3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForceGains {
    pub seek: f64,
    pub arrival: f64,
    pub ue_avoid: f64,
    pub obstacle_avoid: f64,
}

impl Default for ForceGains {
    fn default() -> Self {
        Self {
            seek: 1.0,
            arrival: 1.0,
            ue_avoid: 2.0,
            obstacle_avoid: 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MobilityParams {
    pub displacement_exponent: f64,
    pub sojourn_exponent: f64,
    /// `[d_min, d_max]` in metres; `None` means `[0.5, room diagonal]`.
    pub displacement_bounds: Option<[f64; 2]>,
    /// `[t_min, t_max]` in seconds.
    pub sojourn_bounds: [f64; 2],
    pub return_probability: f64,
    pub walk_speed: f64,
    pub force_gains: ForceGains,
    pub avoid_radius: f64,
    /// Radius inside which the arrival ramp slows the user down.
    pub slow_radius: f64,
    /// Velocity relaxation time of the seek/arrival forces.
    pub relaxation_time: f64,
    pub arrive_tolerance: f64,
    /// Give up on a waypoint after walking this long without reaching it.
    pub stuck_timeout: f64,
    pub body_radius: f64,
    pub body_height: f64,
    pub ue_height: f64,
    pub ue_offset: f64,
}

impl Default for MobilityParams {
    fn default() -> Self {
        Self {
            displacement_exponent: 0.5,
            sojourn_exponent: 1.0,
            displacement_bounds: None,
            sojourn_bounds: [2.0, 300.0],
            return_probability: 0.3,
            walk_speed: 1.2,
            force_gains: ForceGains::default(),
            avoid_radius: 0.8,
            slow_radius: 1.0,
            relaxation_time: 0.5,
            arrive_tolerance: 0.15,
            stuck_timeout: 30.0,
            body_radius: 0.15,
            body_height: 1.7,
            ue_height: 1.2,
            ue_offset: 0.3,
        }
    }
}

impl MobilityParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(format!("mobility: {m}")));
        if !(self.displacement_exponent > 0.0 && self.sojourn_exponent > 0.0) {
            return bad("exponents must be positive");
        }
        if let Some([lo, hi]) = self.displacement_bounds {
            if !(lo > 0.0 && hi >= lo) {
                return bad("displacement bounds must be positive and ordered");
            }
        }
        let [lo, hi] = self.sojourn_bounds;
        if !(lo > 0.0 && hi >= lo) {
            return bad("sojourn bounds must be positive and ordered");
        }
        if !(0.0..=1.0).contains(&self.return_probability) {
            return bad("return_probability must lie in [0, 1]");
        }
        if !(self.walk_speed > 0.0
            && self.avoid_radius > 0.0
            && self.slow_radius > 0.0
            && self.relaxation_time > 0.0
            && self.body_radius > 0.0
            && self.body_height > 0.0
            && self.ue_height > 0.0)
        {
            return bad("speeds, radii and heights must be positive");
        }
        Ok(())
    }

    pub fn displacement_range(&self, layout: &Layout) -> [f64; 2] {
        self.displacement_bounds
            .unwrap_or([0.5, layout.diagonal().max(0.5)])
    }

    /// Clearance kept from walls and furniture when choosing waypoints.
    pub fn walk_clearance(&self) -> f64 {
        self.body_radius + 0.05
    }
}

/// Polar-angle distribution in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDist {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OrientationParams {
    /// Laplace-distributed polar angle while sitting.
    pub sitting: AngleDist,
    /// Gaussian polar angle while walking.
    pub walking: AngleDist,
    pub azimuth_jitter_deg: f64,
}

impl Default for OrientationParams {
    fn default() -> Self {
        Self {
            sitting: AngleDist {
                mean: 45.11,
                std: 7.84,
            },
            walking: AngleDist {
                mean: 31.79,
                std: 7.61,
            },
            azimuth_jitter_deg: 10.0,
        }
    }
}

impl OrientationParams {
    pub fn validate(&self) -> Result<()> {
        if self.sitting.std < 0.0 || self.walking.std < 0.0 || self.azimuth_jitter_deg < 0.0 {
            return Err(Error::InvalidSpec(
                "orientation: spreads must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Entering,
    Wandering,
    Exiting,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::Entering, Phase::Wandering, Phase::Exiting];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Entering => "entering",
            Phase::Wandering => "wandering",
            Phase::Exiting => "exiting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Sitting,
    Walking,
}

impl Posture {
    pub fn as_str(self) -> &'static str {
        match self {
            Posture::Sitting => "sitting",
            Posture::Walking => "walking",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseSchedule {
    pub enter_end: f64,
    pub wander_end: f64,
}

impl Default for PhaseSchedule {
    fn default() -> Self {
        Self {
            enter_end: 0.15,
            wander_end: 0.70,
        }
    }
}

impl PhaseSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.enter_end && self.enter_end < self.wander_end && self.wander_end < 1.0) {
            return Err(Error::InvalidSpec(
                "schedule: need 0 < enter_end < wander_end < 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn phase_of(progress: f64, schedule: &PhaseSchedule) -> Result<Phase> {
    if !(0.0..=1.0).contains(&progress) {
        return Err(Error::ProgressOutOfRange(progress));
    }
    Ok(if progress < schedule.enter_end {
        Phase::Entering
    } else if progress < schedule.wander_end {
        Phase::Wandering
    } else {
        Phase::Exiting
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyCylinder {
    pub center: Point2,
    pub radius: f64,
    pub height: f64,
}

/// Handset pose relative to its carrier. Angles in degrees; the polar angle
/// is measured from the vertical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UePose {
    pub height: f64,
    pub offset: f64,
    pub polar_deg: f64,
    pub azimuth_deg: f64,
}

impl UePose {
    pub fn boresight(&self) -> Vec3 {
        let (t, p) = (self.polar_deg.to_radians(), self.azimuth_deg.to_radians());
        Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), t.cos())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Presence {
    Pending,
    Active,
    Departed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub position: Point2,
    pub node: Option<NodeKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserState {
    pub id: usize,
    pub position: Point2,
    pub velocity: Vec2,
    pub phase: Phase,
    pub posture: Posture,
    pub waypoint: Waypoint,
    pub sojourn_remaining: f64,
    pub body: BodyCylinder,
    pub ue_pose: UePose,
    pub presence: Presence,
    /// Unit walking direction; kept while standing still.
    pub heading: Vec2,
    /// Azimuth offset of the handset relative to the heading, degrees.
    pub azimuth_offset_deg: f64,
    /// Whether the user is currently dwelling at the waypoint.
    pub dwelling: bool,
    pub travel_time: f64,
    pub exiting: bool,
}

impl UserState {
    pub fn new(id: usize, position: Point2, params: &MobilityParams) -> Self {
        Self {
            id,
            position,
            velocity: Vec2::ZERO,
            phase: Phase::Entering,
            posture: Posture::Walking,
            waypoint: Waypoint {
                position,
                node: None,
            },
            sojourn_remaining: 0.0,
            body: BodyCylinder {
                center: position,
                radius: params.body_radius,
                height: params.body_height,
            },
            ue_pose: UePose {
                height: params.ue_height,
                offset: params.ue_offset,
                polar_deg: 0.0,
                azimuth_deg: 90.0,
            },
            presence: Presence::Pending,
            heading: Vec2::new(0.0, 1.0),
            azimuth_offset_deg: 0.0,
            dwelling: false,
            travel_time: 0.0,
            exiting: false,
        }
    }

    pub fn is_active(&self) -> bool {
        self.presence == Presence::Active
    }

    /// Handset position in room coordinates.
    pub fn ue_position(&self) -> Vec3 {
        (self.position + self.heading * self.ue_pose.offset).with_z(self.ue_pose.height)
    }

    /// Keep the handset azimuth aligned with the walking direction.
    pub fn refresh_azimuth(&mut self) {
        self.ue_pose.azimuth_deg = self.heading.azimuth().to_degrees() + self.azimuth_offset_deg;
    }
}

/// Inverse-CDF draw from a Pareto law with exponent `exponent` truncated to `[lo, hi]`.
pub fn sample_truncated_pareto<R: Rng + ?Sized>(
    rng: &mut R,
    exponent: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    if !(lo > 0.0 && hi >= lo && exponent > 0.0 && hi.is_finite()) {
        return Err(Error::InvalidBounds { lo, hi, exponent });
    }
    if lo == hi {
        return Ok(lo);
    }
    let u: f64 = rng.random();
    Ok(truncated_pareto_quantile(u, exponent, lo, hi))
}

pub fn truncated_pareto_quantile(u: f64, exponent: f64, lo: f64, hi: f64) -> f64 {
    let tail = (lo / hi).powf(exponent);
    let x = lo / (1.0 - u * (1.0 - tail)).powf(1.0 / exponent);
    x.clamp(lo, hi)
}

pub fn truncated_pareto_cdf(x: f64, exponent: f64, lo: f64, hi: f64) -> f64 {
    if x <= lo {
        return 0.0;
    }
    if x >= hi {
        return 1.0;
    }
    (1.0 - (lo / x).powf(exponent)) / (1.0 - (lo / hi).powf(exponent))
}

/// Pick the next waypoint: a resident node (ranked by distance, rank drawn
/// from a truncated Pareto law) with the return probability, otherwise a
/// bounded Lévy step that must land in free space.
pub fn next_waypoint<R: Rng + ?Sized>(
    position: Point2,
    layout: &Layout,
    nodes: &[ResidentNode],
    params: &MobilityParams,
    rng: &mut R,
) -> Waypoint {
    if !nodes.is_empty() && rng.random::<f64>() < params.return_probability {
        return resident_waypoint(position, nodes, params, rng);
    }
    let [lo, hi] = params.displacement_range(layout);
    let clearance = params.walk_clearance();
    let mut candidate = position;
    for _ in 0..64 {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let len = sample_truncated_pareto(rng, params.displacement_exponent, lo, hi).unwrap_or(lo);
        candidate = position + Vec2::new(theta.cos(), theta.sin()) * len;
        if layout.is_free(candidate, clearance) {
            return Waypoint {
                position: candidate,
                node: None,
            };
        }
    }
    Waypoint {
        position: layout.nearest_free(candidate, clearance),
        node: None,
    }
}

/// Resident node drawn by truncated-Pareto rank of distance from `position`
/// (nearest first). Nodes within twice the arrival tolerance are skipped
/// unless nothing else remains.
pub fn resident_waypoint<R: Rng + ?Sized>(
    position: Point2,
    nodes: &[ResidentNode],
    params: &MobilityParams,
    rng: &mut R,
) -> Waypoint {
    let mut ranked: Vec<&ResidentNode> = nodes
        .iter()
        .filter(|n| (n.position - position).norm() > 2.0 * params.arrive_tolerance)
        .collect();
    if ranked.is_empty() {
        ranked = nodes.iter().collect();
    }
    ranked.sort_by(|a, b| {
        (a.position - position)
            .norm()
            .total_cmp(&(b.position - position).norm())
    });
    let n = ranked.len() as f64;
    let rank = sample_truncated_pareto(rng, params.displacement_exponent, 1.0, n + 1.0)
        .map(|x| x.floor() as usize)
        .unwrap_or(1)
        .clamp(1, ranked.len());
    let node = ranked[rank - 1];
    Waypoint {
        position: node.position,
        node: Some(node.kind),
    }
}

/// Intermediate target that detours around the first furniture footprint
/// blocking the straight line to `goal`.
pub fn route_target(layout: &Layout, position: Point2, goal: Point2, clearance: f64) -> Point2 {
    let blocking = layout
        .furniture
        .iter()
        .map(|f| f.footprint().inflate(clearance))
        .filter(|r| r.segment_intersects(position, goal))
        .min_by(|a, b| {
            (a.closest_point(position) - position)
                .norm()
                .total_cmp(&(b.closest_point(position) - position).norm())
        });
    let Some(rect) = blocking else {
        return goal;
    };
    let corners = rect.inflate(0.2).corners();
    corners
        .iter()
        .copied()
        .filter(|c| (*c - position).norm() > 0.05)
        .filter(|c| !rect.segment_intersects(position, *c))
        .filter(|c| layout.is_free(*c, clearance))
        .min_by(|a, b| {
            // Corners with a clear line to the goal come first.
            let key = |c: Point2| {
                let hidden = rect.segment_intersects(c, goal);
                (hidden, (c - position).norm() + (goal - c).norm())
            };
            let (ha, ca) = key(*a);
            let (hb, cb) = key(*b);
            ha.cmp(&hb).then(ca.total_cmp(&cb))
        })
        .unwrap_or(goal)
}

fn nearest_obstacle(layout: &Layout, p: Point2, radius: f64) -> Option<(f64, Vec2)> {
    let room = Rect {
        min: Vec2::new(radius, radius),
        max: Vec2::new(layout.length() - radius, layout.width() - radius),
    };
    let mut best: Option<(f64, Vec2)> = None;
    let mut consider = |dist: f64, dir: Vec2| {
        if best.is_none_or(|(d, _)| dist < d) {
            best = Some((dist, dir));
        }
    };
    // Walls: distance to each side of the shrunk room, pointing inward.
    consider(p.x - room.min.x, Vec2::new(1.0, 0.0));
    consider(room.max.x - p.x, Vec2::new(-1.0, 0.0));
    consider(p.y - room.min.y, Vec2::new(0.0, 1.0));
    consider(room.max.y - p.y, Vec2::new(0.0, -1.0));
    for f in &layout.furniture {
        let r = f.footprint().inflate(radius);
        if r.contains(p) {
            let out = r.push_out(p);
            consider(0.0, (out - p).normalized());
        } else {
            let cp = r.closest_point(p);
            let d = p - cp;
            consider(d.norm(), d.normalized());
        }
    }
    best
}

/// One synchronous steering update. `others` is the previous-step snapshot
/// of every other user; entries with the same id or inactive users are ignored.
pub fn steering_step(
    user: &UserState,
    others: &[UserState],
    layout: &Layout,
    params: &MobilityParams,
    dt: f64,
) -> UserState {
    let mut next = user.clone();
    let g = params.force_gains;
    let tau = params.relaxation_time;
    let a0 = params.walk_speed / tau;
    let pos = user.position;
    let vel = user.velocity;
    let goal = user.waypoint.position;
    let clearance = params.body_radius + 0.05;

    let mut accel = Vec2::ZERO;

    let target = route_target(layout, pos, goal, clearance);
    let to = target - pos;
    let dist = to.norm();
    let dir = to.normalized();
    // Exiting users walk through the door without slowing down.
    if target == goal && dist < params.slow_radius && !user.exiting {
        let desired = dir * (params.walk_speed * dist / params.slow_radius);
        accel = accel + (desired - vel) * (g.arrival / tau);
    } else {
        accel = accel + (dir * params.walk_speed - vel) * (g.seek / tau);
    }

    // Nothing farther away than the waypoint can be in the way.
    let radius = params.avoid_radius.min((goal - pos).norm());
    for o in others.iter().filter(|o| o.id != user.id && o.is_active()) {
        let d = pos - o.position;
        let r = d.norm();
        if r < radius && r > 1e-9 {
            accel = accel + d.normalized() * (g.ue_avoid * a0 * (radius / r - 1.0));
        }
    }

    if let Some((d, n)) = nearest_obstacle(layout, pos, params.body_radius) {
        let speed = vel.norm();
        if d < radius && speed > 1e-9 {
            let approach = (-(vel * (1.0 / speed)).dot(n)).max(0.0);
            let strength = radius / d.max(0.05) - 1.0;
            accel = accel + n * (g.obstacle_avoid * a0 * strength * approach);
        }
    }

    let mut v = (vel + accel * dt).clamp_norm(params.walk_speed);
    let mut p = pos + v * dt;
    if !layout.is_free(p, params.body_radius) {
        p = layout.nearest_free(p, params.body_radius);
        v = ((p - pos) * (1.0 / dt)).clamp_norm(params.walk_speed);
    }
    next.position = p;
    next.velocity = v;
    next.body.center = p;
    if v.norm() > 0.05 {
        next.heading = v.normalized();
    }
    next.refresh_azimuth();
    next
}

fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, mean: f64, scale: f64) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    mean - scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

pub fn laplace_cdf(x: f64, mean: f64, scale: f64) -> f64 {
    if x < mean {
        0.5 * ((x - mean) / scale).exp()
    } else {
        1.0 - 0.5 * (-(x - mean) / scale).exp()
    }
}

/// Draw a handset pose: polar angle from the posture's law, clamped to
/// [0°, 90°]; azimuth aligned with the heading plus Gaussian jitter.
pub fn sample_ue_orientation<R: Rng + ?Sized>(
    posture: Posture,
    params: &OrientationParams,
    heading: Vec2,
    rng: &mut R,
) -> (f64, f64) {
    let polar = match posture {
        Posture::Sitting => {
            let d = params.sitting;
            if d.std > 0.0 {
                sample_laplace(rng, d.mean, d.std / SQRT_2)
            } else {
                d.mean
            }
        }
        Posture::Walking => {
            let d = params.walking;
            let z: f64 = StandardNormal.sample(rng);
            d.mean + d.std * z
        }
    };
    let jitter = if params.azimuth_jitter_deg > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        params.azimuth_jitter_deg * z
    } else {
        0.0
    };
    (
        polar.clamp(0.0, 90.0),
        heading.azimuth().to_degrees() + jitter,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_layout, resident_nodes, DoorSpec, LayoutId, LayoutSpec, WallId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn empty_room(l: f64, w: f64) -> Layout {
        build_layout(&LayoutSpec {
            layout_id: LayoutId::Custom,
            room_size: [l, w, 3.0],
            door: DoorSpec {
                wall: WallId::S2,
                start: 0.5 * l - 0.45,
                end: 0.5 * l + 0.45,
            },
            furniture: vec![],
            ap_count: 1,
            tiles: Default::default(),
        })
        .unwrap()
    }

    /// One-sample KS statistic against an analytic CDF (test oracle).
    fn ks_stat(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter().enumerate().fold(0.0, |d: f64, (i, &x)| {
            let f = cdf(x);
            d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
    }

    /// Critical value at significance 0.01 (asymptotic).
    fn ks_critical(n: usize) -> f64 {
        1.6276 / (n as f64).sqrt()
    }

    #[test]
    fn degenerate_truncation_is_constant() {
        let mut r = rng(1);
        for _ in 0..100 {
            assert_eq!(sample_truncated_pareto(&mut r, 0.5, 2.0, 2.0).unwrap(), 2.0);
        }
    }

    #[test]
    fn truncated_pareto_median_matches_closed_form() {
        // 1 / (1 - 0.5 * (1 - (1/100)^0.5))^2 = 1 / 0.55^2
        let median = truncated_pareto_quantile(0.5, 0.5, 1.0, 100.0);
        assert!((median - 3.305_785_123_966_942).abs() < 1e-12);
        assert!((truncated_pareto_cdf(median, 0.5, 1.0, 100.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn invalid_pareto_bounds_are_rejected() {
        let mut r = rng(1);
        assert!(sample_truncated_pareto(&mut r, 0.5, 0.0, 1.0).is_err());
        assert!(sample_truncated_pareto(&mut r, 0.5, 2.0, 1.0).is_err());
        assert!(sample_truncated_pareto(&mut r, 0.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn sojourn_sampler_passes_ks() {
        let mut r = rng(7);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_truncated_pareto(&mut r, 1.0, 2.0, 300.0).unwrap())
            .collect();
        assert!(xs.iter().all(|&x| (2.0..=300.0).contains(&x)));
        let d = ks_stat(xs, |x| truncated_pareto_cdf(x, 1.0, 2.0, 300.0));
        assert!(d < ks_critical(100_000), "D = {d}");
    }

    #[test]
    fn resident_only_walk_returns_to_single_node() {
        let layout = empty_room(5.0, 5.0);
        let nodes = [ResidentNode {
            position: Vec2::new(1.0, 1.0),
            kind: NodeKind::Seat,
        }];
        let params = MobilityParams {
            return_probability: 1.0,
            ..Default::default()
        };
        let mut r = rng(3);
        for _ in 0..100 {
            let w = next_waypoint(Vec2::new(2.5, 2.5), &layout, &nodes, &params, &mut r);
            assert_eq!(w.position, nodes[0].position);
        }
    }

    #[test]
    fn levy_steps_follow_truncated_pareto() {
        // Large room so that no candidate step is ever rejected.
        let layout = empty_room(1000.0, 1000.0);
        let params = MobilityParams {
            return_probability: 0.0,
            displacement_bounds: Some([0.5, 100.0]),
            ..Default::default()
        };
        let start = Vec2::new(500.0, 500.0);
        let mut r = rng(11);
        let lens: Vec<f64> = (0..100_000)
            .map(|_| (next_waypoint(start, &layout, &[], &params, &mut r).position - start).norm())
            .collect();
        let d = ks_stat(lens, |x| truncated_pareto_cdf(x, 0.5, 0.5, 100.0));
        assert!(d < ks_critical(100_000), "D = {d}");
    }

    #[test]
    fn waypoints_stay_in_free_space_in_r1() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
        let nodes = resident_nodes(&layout);
        let params = MobilityParams::default();
        let mut r = rng(5);
        let mut pos = layout.door_anchor;
        for _ in 0..10_000 {
            let w = next_waypoint(pos, &layout, &nodes, &params, &mut r);
            assert!(
                layout.is_free(w.position, params.body_radius),
                "{:?}",
                w.position
            );
            pos = w.position;
        }
    }

    fn walker(id: usize, pos: Vec2, goal: Vec2) -> UserState {
        let params = MobilityParams::default();
        let mut u = UserState::new(id, pos, &params);
        u.presence = Presence::Active;
        u.waypoint = Waypoint {
            position: goal,
            node: None,
        };
        u
    }

    #[test]
    fn arrival_decays_velocity_at_waypoint() {
        let layout = empty_room(5.0, 5.0);
        let params = MobilityParams::default();
        let mut u = walker(0, Vec2::new(2.5, 2.5), Vec2::new(2.5, 2.5));
        u.velocity = Vec2::new(0.8, 0.0);
        let mut speeds = vec![u.velocity.norm()];
        for _ in 0..100 {
            u = steering_step(&u, &[], &layout, &params, 0.1);
            speeds.push(u.velocity.norm());
        }
        assert!(speeds.last().unwrap() < &1e-3);
        assert!((u.position - Vec2::new(2.5, 2.5)).norm() < 0.2);
    }

    #[test]
    fn head_on_users_deflect_symmetrically() {
        let layout = empty_room(6.0, 4.0);
        let params = MobilityParams::default();
        let c = Vec2::new(3.0, 2.0);
        let mut a = walker(0, Vec2::new(1.0, 2.05), Vec2::new(5.0, 2.05));
        let mut b = walker(1, Vec2::new(5.0, 1.95), Vec2::new(1.0, 1.95));
        let mut max_lateral: f64 = 0.0;
        for _ in 0..60 {
            let snapshot = [a.clone(), b.clone()];
            a = steering_step(&a, &snapshot, &layout, &params, 0.1);
            b = steering_step(&b, &snapshot, &layout, &params, 0.1);
            let mirrored = c * 2.0 - a.position;
            assert!((mirrored - b.position).norm() < 1e-9);
            max_lateral = max_lateral.max(a.position.y - 2.05);
        }
        assert!(
            max_lateral > 0.05,
            "users should sidestep, got {max_lateral}"
        );
    }

    #[test]
    fn users_never_enter_furniture_in_r1() {
        let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
        let nodes = resident_nodes(&layout);
        let params = MobilityParams::default();
        let mut r = rng(9);
        let mut users: Vec<UserState> = (0..4)
            .map(|i| {
                let mut u = walker(
                    i,
                    layout.door_anchor + Vec2::new(0.3 * i as f64 - 0.45, 0.2),
                    layout.door_anchor,
                );
                u.waypoint = next_waypoint(u.position, &layout, &nodes, &params, &mut r);
                u
            })
            .collect();
        for _ in 0..10_000 {
            let snapshot = users.clone();
            for u in users.iter_mut() {
                *u = steering_step(u, &snapshot, &layout, &params, 0.1);
                assert!(u.velocity.norm() <= params.walk_speed + 1e-12);
                for f in &layout.furniture {
                    assert!(!f.footprint().contains(u.position), "inside {}", f.name);
                }
                assert!(layout.floor_rect().inflate(1e-9).contains(u.position));
                if (u.position - u.waypoint.position).norm() < 0.2 || r.random::<f64>() < 0.005 {
                    u.waypoint = next_waypoint(u.position, &layout, &nodes, &params, &mut r);
                }
            }
        }
    }

    #[test]
    fn sitting_polar_mean_matches() {
        let p = OrientationParams::default();
        let mut r = rng(21);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_ue_orientation(Posture::Sitting, &p, Vec2::new(1.0, 0.0), &mut r).0)
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 45.11).abs() < 0.2, "mean {mean}");
        let b = 7.84 / SQRT_2;
        let d = ks_stat(xs, |x| laplace_cdf(x, 45.11, b));
        assert!(d < ks_critical(100_000), "D = {d}");
    }

    #[test]
    fn walking_polar_std_matches() {
        let p = OrientationParams::default();
        let mut r = rng(22);
        let xs: Vec<f64> = (0..100_000)
            .map(|_| sample_ue_orientation(Posture::Walking, &p, Vec2::new(1.0, 0.0), &mut r).0)
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 7.61).abs() < 0.15, "std {std}");
        let normal = statrs::distribution::Normal::new(31.79, 7.61).unwrap();
        use statrs::distribution::ContinuousCDF;
        let d = ks_stat(xs, |x| normal.cdf(x));
        assert!(d < ks_critical(100_000), "D = {d}");
    }

    #[test]
    fn zero_noise_pose_is_exact() {
        let p = OrientationParams {
            sitting: AngleDist {
                mean: 45.11,
                std: 0.0,
            },
            walking: AngleDist {
                mean: 31.79,
                std: 0.0,
            },
            azimuth_jitter_deg: 0.0,
        };
        let mut r = rng(1);
        let heading = Vec2::new(0.0, 1.0);
        assert_eq!(
            sample_ue_orientation(Posture::Sitting, &p, heading, &mut r),
            (45.11, 90.0)
        );
        assert_eq!(
            sample_ue_orientation(Posture::Walking, &p, heading, &mut r),
            (31.79, 90.0)
        );
    }

    #[test]
    fn phase_boundaries() {
        let s = PhaseSchedule::default();
        assert_eq!(phase_of(0.71, &s).unwrap(), Phase::Exiting);
        assert_eq!(phase_of(0.0, &s).unwrap(), Phase::Entering);
        assert_eq!(phase_of(0.5, &s).unwrap(), Phase::Wandering);
        assert!(phase_of(1.2, &s).is_err());
        assert!(phase_of(-0.1, &s).is_err());
    }

    #[test]
    fn invalid_schedule_rejected() {
        assert!(PhaseSchedule {
            enter_end: 0.7,
            wander_end: 0.2
        }
        .validate()
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn pareto_draws_within_bounds(seed in 0u64..1000, a in 0.1f64..3.0, lo in 0.1f64..5.0, span in 0.0f64..100.0) {
            let mut r = rng(seed);
            let x = sample_truncated_pareto(&mut r, a, lo, lo + span).unwrap();
            proptest::prop_assert!(x >= lo && x <= lo + span);
        }

        #[test]
        fn phase_is_monotone(p in 0.0f64..1.0, q in 0.0f64..1.0) {
            let s = PhaseSchedule::default();
            let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
            proptest::prop_assert!(phase_of(lo, &s).unwrap() <= phase_of(hi, &s).unwrap());
        }
    }
}
