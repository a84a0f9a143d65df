//! Run orchestration: users are stepped synchronously, shadow masks and
//! gain fields are evaluated at snapshot steps, and [`summarize_run`]
//! reduces the snapshot stream to per-wall series and phase bundles.

use crate::channel::{link_gain_map, Band, BandId, GainField, UeReceiver};
use crate::error::{Error, Result};
use crate::geometry::resident_nodes;
use crate::geometry::{build_layout, Layout, LayoutSpec, NodeKind, ResidentNode, WallId};
use crate::math::{Point3, Vec2};
use crate::mobility::{
    next_waypoint, phase_of, resident_waypoint, sample_truncated_pareto, sample_ue_orientation,
    steering_step, MobilityParams, OrientationParams, Phase, PhaseSchedule, Posture, Presence,
    UserState, Waypoint,
};
use crate::stats::{windowed_drift_report, DriftConfig, DriftReport};
use crate::visibility::{segment_blocked_oracle, shadowed_tiles, Blocker, TileMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const STREAM_SPAWN: u64 = 1;
const STREAM_AUDIT: u64 = 2;
const STREAM_USER_BASE: u64 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub layout: LayoutSpec,
    pub band: Band,
    pub n_users: usize,
    pub n_aps: usize,
    pub duration_steps: usize,
    pub dt: f64,
    pub mobility: MobilityParams,
    pub orientation: OrientationParams,
    pub schedule: PhaseSchedule,
    pub seed: u64,
    /// Gain fields are evaluated every this many steps (plus phase boundaries).
    pub snapshot_every: usize,
    /// Walls to evaluate, in output order.
    pub walls: Vec<WallId>,
    /// Static handsets without bodies, evaluated alongside the users.
    pub probes: Vec<UeReceiver>,
    /// Evaluate gain fields; masks are always computed.
    pub gains: bool,
    /// Fraction of AP-side mask tiles re-checked against the segment oracle.
    pub audit_fraction: f64,
}

impl ScenarioConfig {
    pub fn new(layout: LayoutSpec, band: BandId, n_users: usize, seed: u64) -> Self {
        let n_aps = layout.ap_count as usize;
        Self {
            layout,
            band: Band::new(band),
            n_users,
            n_aps,
            duration_steps: 2000,
            dt: 0.1,
            mobility: MobilityParams::default(),
            orientation: OrientationParams::default(),
            schedule: PhaseSchedule::default(),
            seed,
            snapshot_every: 5,
            walls: WallId::ALL.to_vec(),
            probes: vec![],
            gains: true,
            audit_fraction: 0.01,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        self.layout.validate()?;
        self.band.validate()?;
        self.mobility.validate()?;
        self.orientation.validate()?;
        self.schedule.validate()?;
        if !(1..=9).contains(&self.n_aps) {
            return bad(format!("n_aps must lie in 1..=9, got {}", self.n_aps));
        }
        if self.duration_steps < 1 {
            return bad("duration_steps must be at least 1".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive".into());
        }
        if self.snapshot_every < 1 {
            return bad("snapshot_every must be at least 1".into());
        }
        if self.walls.is_empty() {
            return bad("at least one wall must be evaluated".into());
        }
        if !(0.0..=1.0).contains(&self.audit_fraction) {
            return bad("audit_fraction must lie in [0, 1]".into());
        }
        let [l, w, h] = self.layout.room_size;
        for p in &self.probes {
            let q = p.position;
            if !(q.x > 0.0 && q.x < l && q.y > 0.0 && q.y < w && q.z > 0.0 && q.z < h) {
                return bad(format!("probe {q:?} is not strictly inside the room"));
            }
        }
        Ok(())
    }

    /// Steps at which the entering, wandering and exiting phases end.
    pub fn boundary_steps(&self) -> [usize; 3] {
        let d = self.duration_steps as f64;
        [
            ((self.schedule.enter_end * d).round() as usize).max(1),
            ((self.schedule.wander_end * d).round() as usize).max(1),
            self.duration_steps,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub user_id: usize,
    pub x: f64,
    pub y: f64,
    pub phase: Phase,
    pub posture: Posture,
    pub polar_deg: f64,
    pub azimuth_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditStats {
    pub checked: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub progress: f64,
    pub phase: Phase,
    /// Regular thinned frame (as opposed to an extra boundary-only snapshot).
    pub regular: bool,
    /// Phase that ends at this step, if any.
    pub ends_phase: Option<Phase>,
    pub users: Vec<UserState>,
    pub spawned: usize,
    pub departed: usize,
    pub walls: Vec<WallId>,
    /// Ids of the evaluated handsets: active users, then probes.
    pub ue_ids: Vec<usize>,
    /// Indexed `[ap][wall]`.
    pub ap_masks: Vec<Vec<TileMask>>,
    /// Indexed `[ue][wall]`.
    pub ue_masks: Vec<Vec<TileMask>>,
    /// Indexed `[ap][ue][wall]`, flattened; empty when gains are disabled.
    pub fields: Vec<GainField>,
    /// Trajectory rows for every step since the previous snapshot.
    pub trajectory: Vec<TrajectoryRow>,
    pub audit: AuditStats,
}

impl Snapshot {
    pub fn field(&self, ap: usize, ue: usize, wall: usize) -> Option<&GainField> {
        let (nu, nw) = (self.ue_ids.len(), self.walls.len());
        self.fields.get((ap * nu + ue) * nw + wall)
    }

    pub fn active_users(&self) -> usize {
        self.users.iter().filter(|u| u.is_active()).count()
    }
}

pub struct Simulation {
    config: ScenarioConfig,
    layout: Layout,
    nodes: Vec<ResidentNode>,
    users: Vec<UserState>,
    user_rngs: Vec<ChaCha8Rng>,
    spawn_steps: Vec<usize>,
    audit_rng: ChaCha8Rng,
    furniture: Vec<Blocker>,
    boundaries: [usize; 3],
    /// Exiting users leave once this close to the door anchor.
    exit_radius: f64,
    step: usize,
    exit_triggered: bool,
    spawned: usize,
    departed: usize,
    pending_rows: Vec<TrajectoryRow>,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn exit_radius(config: &ScenarioConfig) -> f64 {
    let door = &config.layout.door;
    config
        .mobility
        .arrive_tolerance
        .max(0.5 * (door.end - door.start).abs())
}

pub fn run_simulation(config: &ScenarioConfig) -> Result<Simulation> {
    Simulation::new(config.clone())
}

impl Simulation {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let mut spec = config.layout.clone();
        spec.ap_count = config.n_aps as u8;
        let layout = build_layout(&spec)?;
        let nodes = resident_nodes(&layout);
        let mut spawn_rng = stream_rng(config.seed, STREAM_SPAWN);
        let boundaries = config.boundary_steps();
        let enter_steps = boundaries[0].max(1);
        let spawn_steps = (0..config.n_users)
            .map(|_| spawn_rng.random_range(1..=enter_steps))
            .collect();
        let users = (0..config.n_users)
            .map(|i| UserState::new(i, layout.door_anchor, &config.mobility))
            .collect();
        let user_rngs = (0..config.n_users)
            .map(|i| stream_rng(config.seed, STREAM_USER_BASE + i as u64))
            .collect();
        let furniture = layout
            .furniture
            .iter()
            .map(Blocker::from_furniture)
            .collect();
        Ok(Self {
            exit_radius: exit_radius(&config),
            audit_rng: stream_rng(config.seed, STREAM_AUDIT),
            config,
            layout,
            nodes,
            users,
            user_rngs,
            spawn_steps,
            furniture,
            boundaries,
            step: 0,
            exit_triggered: false,
            spawned: 0,
            departed: 0,
            pending_rows: vec![],
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn users(&self) -> &[UserState] {
        &self.users
    }

    fn resample_pose(&mut self, i: usize) {
        let u = &mut self.users[i];
        let (polar, az) = sample_ue_orientation(
            u.posture,
            &self.config.orientation,
            u.heading,
            &mut self.user_rngs[i],
        );
        u.ue_pose.polar_deg = polar;
        u.azimuth_offset_deg = az - u.heading.azimuth().to_degrees();
        u.refresh_azimuth();
    }

    fn renew_waypoint(&mut self, i: usize) {
        let pos = self.users[i].position;
        let w = next_waypoint(
            pos,
            &self.layout,
            &self.nodes,
            &self.config.mobility,
            &mut self.user_rngs[i],
        );
        let u = &mut self.users[i];
        u.waypoint = w;
        u.dwelling = false;
        u.travel_time = 0.0;
        u.posture = Posture::Walking;
        let dir = w.position - pos;
        if dir.norm() > 1e-9 {
            u.heading = dir.normalized();
        }
        self.resample_pose(i);
    }

    fn start_dwelling(&mut self, i: usize) {
        let p = &self.config.mobility;
        let [lo, hi] = p.sojourn_bounds;
        let sojourn = sample_truncated_pareto(&mut self.user_rngs[i], p.sojourn_exponent, lo, hi)
            .unwrap_or(lo);
        let seat = self.users[i].waypoint.node == Some(NodeKind::Seat);
        let facing = seat
            .then(|| self.facing_furniture(self.users[i].position))
            .flatten();
        let u = &mut self.users[i];
        u.dwelling = true;
        u.sojourn_remaining = sojourn;
        u.velocity = Vec2::ZERO;
        if let Some(h) = facing {
            u.heading = h;
        }
        let posture = if seat {
            Posture::Sitting
        } else {
            Posture::Walking
        };
        let changed = posture != u.posture;
        u.posture = posture;
        u.refresh_azimuth();
        if changed {
            self.resample_pose(i);
        }
    }

    /// Direction from a seat towards the closest furniture footprint.
    fn facing_furniture(&self, p: Vec2) -> Option<Vec2> {
        self.layout
            .furniture
            .iter()
            .map(|f| f.footprint().closest_point(p) - p)
            .filter(|d| d.norm() > 1e-9)
            .min_by(|a, b| a.norm().total_cmp(&b.norm()))
            .map(|d| d.normalized())
    }

    fn advance(&mut self, s: usize) -> Phase {
        let d = self.config.duration_steps;
        let dt = self.config.dt;
        let phase = phase_of(s as f64 / d as f64, &self.config.schedule).unwrap_or(Phase::Exiting);
        let door = self.layout.door_anchor;

        if phase == Phase::Exiting && !self.exit_triggered {
            self.exit_triggered = true;
            for i in 0..self.users.len() {
                if !self.users[i].is_active() {
                    continue;
                }
                let u = &mut self.users[i];
                u.waypoint = Waypoint {
                    position: door,
                    node: Some(NodeKind::Door),
                };
                u.exiting = true;
                u.dwelling = false;
                u.travel_time = 0.0;
                u.posture = Posture::Walking;
                let dir = door - u.position;
                if dir.norm() > 1e-9 {
                    u.heading = dir.normalized();
                }
                self.resample_pose(i);
            }
        }

        for i in 0..self.users.len() {
            if self.users[i].presence == Presence::Pending
                && self.spawn_steps[i] == s
                && !self.exit_triggered
            {
                let u = &mut self.users[i];
                u.presence = Presence::Active;
                u.position = door;
                u.body.center = door;
                u.heading = Vec2::new(0.0, 1.0);
                self.spawned += 1;
                self.renew_waypoint(i);
                if !self.nodes.is_empty() {
                    // Newcomers walk in to a resident node before wandering.
                    let w = resident_waypoint(
                        door,
                        &self.nodes,
                        &self.config.mobility,
                        &mut self.user_rngs[i],
                    );
                    let u = &mut self.users[i];
                    u.waypoint = w;
                    if (w.position - door).norm() > 1e-9 {
                        u.heading = (w.position - door).normalized();
                    }
                    u.refresh_azimuth();
                }
            }
        }

        for u in &mut self.users {
            u.phase = phase;
        }
        let previous = self.users.clone();
        let params = self.config.mobility;
        for u in self
            .users
            .iter_mut()
            .filter(|u| u.is_active() && !u.dwelling)
        {
            *u = steering_step(u, &previous, &self.layout, &params, dt);
        }

        let tol = params.arrive_tolerance;
        for i in 0..self.users.len() {
            if !self.users[i].is_active() {
                continue;
            }
            let (exiting, dwelling) = (self.users[i].exiting, self.users[i].dwelling);
            let dist = (self.users[i].waypoint.position - self.users[i].position).norm();
            if exiting {
                if dist < self.exit_radius {
                    self.users[i].presence = Presence::Departed;
                    self.users[i].velocity = Vec2::ZERO;
                    self.departed += 1;
                }
            } else if dwelling {
                self.users[i].sojourn_remaining -= dt;
                if self.users[i].sojourn_remaining <= 0.0 {
                    self.renew_waypoint(i);
                }
            } else {
                self.users[i].travel_time += dt;
                if dist < tol {
                    self.start_dwelling(i);
                } else if self.users[i].travel_time > params.stuck_timeout {
                    self.renew_waypoint(i);
                }
            }
        }

        let time = s as f64 * dt;
        for u in self.users.iter().filter(|u| u.is_active()) {
            self.pending_rows.push(TrajectoryRow {
                time,
                user_id: u.id,
                x: u.position.x,
                y: u.position.y,
                phase,
                posture: u.posture,
                polar_deg: u.ue_pose.polar_deg,
                azimuth_deg: u.ue_pose.azimuth_deg,
            });
        }
        phase
    }

    /// Handset position kept out of walls and furniture footprints.
    fn ue_point(&self, u: &UserState) -> Point3 {
        let ahead = u.position + u.heading * u.ue_pose.offset;
        let xy = if self.layout.is_free(ahead, 0.02) {
            ahead
        } else {
            u.position
        };
        xy.with_z(u.ue_pose.height)
    }

    fn snapshot(&mut self, s: usize, phase: Phase) -> Snapshot {
        let cfg = &self.config;
        let layout = &self.layout;
        let active: Vec<&UserState> = self.users.iter().filter(|u| u.is_active()).collect();
        let mut blockers = self.furniture.clone();
        blockers.extend(
            active
                .iter()
                .map(|u| Blocker::cylinder(u.position, u.body.radius, u.body.height)),
        );

        let mut receivers: Vec<UeReceiver> = active
            .iter()
            .map(|u| UeReceiver::directional(self.ue_point(u), u.ue_pose.boresight()))
            .collect();
        let mut ue_ids: Vec<usize> = active.iter().map(|u| u.id).collect();
        for (k, p) in cfg.probes.iter().enumerate() {
            receivers.push(*p);
            ue_ids.push(cfg.n_users + k);
        }

        let walls = cfg.walls.clone();
        let mask_for = |src: Point3, w: WallId| {
            let grid = layout.grid(w);
            shadowed_tiles(src, &blockers, layout.wall(w), grid)
                .unwrap_or_else(|_| TileMask::empty(grid))
        };
        let ap_masks: Vec<Vec<TileMask>> = layout
            .aps
            .par_iter()
            .map(|ap| walls.iter().map(|&w| mask_for(ap.position, w)).collect())
            .collect();
        let ue_masks: Vec<Vec<TileMask>> = receivers
            .par_iter()
            .map(|r| walls.iter().map(|&w| mask_for(r.position, w)).collect())
            .collect();

        let time = s as f64 * cfg.dt;
        let fields: Vec<GainField> = if cfg.gains {
            let nu = receivers.len();
            let nw = walls.len();
            (0..layout.aps.len() * nu * nw)
                .into_par_iter()
                .map(|k| {
                    let (a, u, w) = (k / (nu * nw), (k / nw) % nu, k % nw);
                    let wall = walls[w];
                    let grid = layout.grid(wall);
                    link_gain_map(
                        &layout.aps[a],
                        ue_ids[u],
                        &receivers[u],
                        layout.wall(wall),
                        grid,
                        &ap_masks[a][w],
                        &ue_masks[u][w],
                        &cfg.band,
                        time,
                    )
                    .unwrap_or_else(|_| GainField {
                        time,
                        ap_id: a,
                        ue_id: ue_ids[u],
                        wall_id: wall,
                        gains: vec![0.0; grid.len()],
                        alive: vec![false; grid.len()],
                    })
                })
                .collect()
        } else {
            vec![]
        };

        let mut audit = AuditStats::default();
        if cfg.audit_fraction > 0.0 {
            for (a, ap) in layout.aps.iter().enumerate() {
                for (w, &wall) in walls.iter().enumerate() {
                    let grid = layout.grid(wall);
                    let n =
                        ((grid.len() as f64 * cfg.audit_fraction).ceil() as usize).min(grid.len());
                    for _ in 0..n {
                        let t = self.audit_rng.random_range(0..grid.len());
                        let oracle =
                            segment_blocked_oracle(ap.position, grid.tile_centers[t], &blockers);
                        audit.checked += 1;
                        if ap_masks[a][w].bits[t] != oracle {
                            audit.mismatches += 1;
                        }
                    }
                }
            }
        }

        let ends_phase = Phase::ALL
            .into_iter()
            .zip(self.boundaries)
            .find(|&(_, b)| b == s)
            .map(|(p, _)| p);
        Snapshot {
            step: s,
            time,
            progress: s as f64 / cfg.duration_steps as f64,
            phase,
            regular: s.is_multiple_of(cfg.snapshot_every),
            ends_phase,
            users: active.into_iter().cloned().collect(),
            spawned: self.spawned,
            departed: self.departed,
            walls,
            ue_ids,
            ap_masks,
            ue_masks,
            fields,
            trajectory: std::mem::take(&mut self.pending_rows),
            audit,
        }
    }
}

impl Iterator for Simulation {
    type Item = Snapshot;

    fn next(&mut self) -> Option<Snapshot> {
        while self.step < self.config.duration_steps {
            self.step += 1;
            let s = self.step;
            let phase = self.advance(s);
            if s.is_multiple_of(self.config.snapshot_every) || self.boundaries.contains(&s) {
                return Some(self.snapshot(s, phase));
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameInfo {
    pub step: usize,
    pub time: f64,
    pub phase: Phase,
    pub active_users: usize,
    pub links: usize,
}

/// Per-wall series over the regular frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallSeries {
    pub wall_id: WallId,
    /// Per frame, per tile gain summed over all active AP–UE links (zero in
    /// an empty room).
    pub gains: Vec<Vec<f64>>,
    /// Per frame, per tile fraction of alive links (zero without links).
    pub alive: Vec<Vec<f64>>,
    /// Per frame mean over tiles of `gains`.
    pub mean_gain: Vec<f64>,
    /// Per frame mean over tiles of `alive`; `None` without links.
    pub survival: Vec<Option<f64>>,
    /// Shadowed fraction of the union of all AP-side masks.
    pub ap_shadow: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryWall {
    pub wall_id: WallId,
    pub gain: Vec<f64>,
    /// Per-tile survival over the phase that just ended.
    pub survival: Vec<f64>,
    pub ap_shadow: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseBoundary {
    pub step: usize,
    pub phase: Phase,
    pub walls: Vec<BoundaryWall>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub band: BandId,
    pub calibration: f64,
    pub rows: usize,
    pub cols: Vec<usize>,
    pub frames: Vec<FrameInfo>,
    pub walls: Vec<WallSeries>,
    pub boundaries: Vec<PhaseBoundary>,
    pub trajectory: Vec<TrajectoryRow>,
    pub audit: AuditStats,
    pub drift: Option<DriftReport>,
}

impl RunSummary {
    pub fn wall(&self, id: WallId) -> Option<&WallSeries> {
        self.walls.iter().find(|w| w.wall_id == id)
    }

    /// Frames with at least one link, each pooling every evaluated wall.
    pub fn pooled_frames(&self) -> Vec<Vec<f64>> {
        (0..self.frames.len())
            .filter(|&f| self.frames[f].links > 0)
            .map(|f| {
                self.walls
                    .iter()
                    .flat_map(|w| w.gains[f].iter().copied())
                    .collect()
            })
            .collect()
    }

    /// Link-bearing frames of one wall.
    pub fn wall_frames(&self, id: WallId) -> Vec<Vec<f64>> {
        let Some(w) = self.wall(id) else {
            return vec![];
        };
        self.frames
            .iter()
            .zip(&w.gains)
            .filter(|(f, _)| f.links > 0)
            .map(|(_, g)| g.clone())
            .collect()
    }

    /// Mean over link-bearing frames of the per-frame survival, all walls.
    pub fn mean_survival(&self) -> Option<f64> {
        let vals: Vec<f64> = self
            .walls
            .iter()
            .flat_map(|w| w.survival.iter().flatten().copied())
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Per-frame mean gains of a wall over the link-bearing frames of one
    /// phase.
    pub fn phase_mean_gains(&self, wall: WallId, phase: Phase) -> Vec<f64> {
        let Some(w) = self.wall(wall) else {
            return vec![];
        };
        self.frames
            .iter()
            .zip(&w.mean_gain)
            .filter(|(f, _)| f.phase == phase && f.links > 0)
            .map(|(_, g)| *g)
            .collect()
    }

    pub fn phase_ap_shadow(&self, wall: WallId, phase: Phase) -> Vec<f64> {
        let Some(w) = self.wall(wall) else {
            return vec![];
        };
        self.frames
            .iter()
            .zip(&w.ap_shadow)
            .filter(|(f, _)| f.phase == phase)
            .map(|(_, s)| *s)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryConfig {
    /// Compute a drift report over the link-bearing frames.
    pub drift: Option<DriftConfig>,
    /// Restrict the drift stream to one wall; all walls are pooled when unset.
    #[serde(default)]
    pub drift_wall: Option<WallId>,
}

struct PhaseAccumulator {
    alive: Vec<Vec<f64>>,
    count: usize,
}

/// Reduce a snapshot stream to per-wall series, phase bundles and drift
/// statistics.
pub fn summarize_run(
    snapshots: impl IntoIterator<Item = Snapshot>,
    config: &ScenarioConfig,
    opts: &SummaryConfig,
) -> Result<RunSummary> {
    let walls = config.walls.clone();
    let mut spec = config.layout.clone();
    spec.ap_count = config.n_aps as u8;
    let layout = build_layout(&spec)?;
    let mut series: Vec<WallSeries> = walls
        .iter()
        .map(|&w| WallSeries {
            wall_id: w,
            gains: vec![],
            alive: vec![],
            mean_gain: vec![],
            survival: vec![],
            ap_shadow: vec![],
        })
        .collect();
    let mut frames = vec![];
    let mut boundaries = vec![];
    let mut trajectory = vec![];
    let mut audit = AuditStats::default();
    let mut acc = PhaseAccumulator {
        alive: walls
            .iter()
            .map(|&w| vec![0.0; layout.grid(w).len()])
            .collect(),
        count: 0,
    };
    let mut seen_any = false;

    for snap in snapshots {
        seen_any = true;
        trajectory.extend(snap.trajectory.iter().cloned());
        audit.checked += snap.audit.checked;
        audit.mismatches += snap.audit.mismatches;
        let n_links = if snap.fields.is_empty() {
            0
        } else {
            config.n_aps.min(layout.aps.len()) * snap.ue_ids.len()
        };

        let mut agg_gain: Vec<Vec<f64>> = vec![];
        let mut agg_alive: Vec<Vec<f64>> = vec![];
        for (w, &wall) in walls.iter().enumerate() {
            let len = layout.grid(wall).len();
            let mut g = vec![0.0; len];
            let mut a = vec![0.0; g.len()];
            if n_links > 0 {
                for ap in 0..layout.aps.len() {
                    for ue in 0..snap.ue_ids.len() {
                        if let Some(f) = snap.field(ap, ue, w) {
                            for t in 0..len {
                                g[t] += f.gains[t];
                                a[t] += f.alive[t] as u8 as f64;
                            }
                        }
                    }
                }
                let inv = 1.0 / n_links as f64;
                a.iter_mut().for_each(|x| *x *= inv);
                for (t, v) in a.iter().enumerate() {
                    acc.alive[w][t] += v;
                }
            }
            agg_gain.push(g);
            agg_alive.push(a);
        }
        if n_links > 0 {
            acc.count += 1;
        }

        let union: Vec<TileMask> = (0..walls.len())
            .map(|w| {
                TileMask::union_all(snap.ap_masks.iter().map(|m| &m[w]))
                    .ok()
                    .flatten()
                    .unwrap_or_else(|| TileMask::empty(layout.grid(walls[w])))
            })
            .collect();

        if snap.regular {
            frames.push(FrameInfo {
                step: snap.step,
                time: snap.time,
                phase: snap.phase,
                active_users: snap.active_users(),
                links: n_links,
            });
            for (w, s) in series.iter_mut().enumerate() {
                let mean = agg_gain[w].iter().sum::<f64>() / agg_gain[w].len() as f64;
                let surv = (n_links > 0)
                    .then(|| agg_alive[w].iter().sum::<f64>() / agg_alive[w].len() as f64);
                s.mean_gain.push(mean);
                s.survival.push(surv);
                s.ap_shadow.push(union[w].fraction());
                s.gains.push(agg_gain[w].clone());
                s.alive.push(agg_alive[w].clone());
            }
        }

        if let Some(phase) = snap.ends_phase {
            let bundle = walls
                .iter()
                .enumerate()
                .map(|(w, &wall)| BoundaryWall {
                    wall_id: wall,
                    gain: agg_gain[w].clone(),
                    survival: if acc.count > 0 {
                        acc.alive[w].iter().map(|v| v / acc.count as f64).collect()
                    } else {
                        vec![0.0; layout.grid(wall).len()]
                    },
                    ap_shadow: union[w].bits.clone(),
                })
                .collect();
            boundaries.push(PhaseBoundary {
                step: snap.step,
                phase,
                walls: bundle,
            });
            acc.alive
                .iter_mut()
                .for_each(|v| v.iter_mut().for_each(|x| *x = 0.0));
            acc.count = 0;
        }
    }
    if !seen_any {
        return Err(Error::EmptyInput);
    }

    let mut summary = RunSummary {
        band: config.band.id,
        calibration: config.band.calibration,
        rows: layout.grid(walls[0]).rows,
        cols: walls.iter().map(|&w| layout.grid(w).cols).collect(),
        frames,
        walls: series,
        boundaries,
        trajectory,
        audit,
        drift: None,
    };
    if let Some(dc) = &opts.drift {
        let stream = match opts.drift_wall {
            Some(w) => summary.wall_frames(w),
            None => summary.pooled_frames(),
        };
        summary.drift = windowed_drift_report(&stream, dc).ok();
    }
    Ok(summary)
}

/// Run a scenario to completion and summarise it.
pub fn simulate_and_summarize(config: &ScenarioConfig, opts: &SummaryConfig) -> Result<RunSummary> {
    let sim = run_simulation(config)?;
    summarize_run(sim, config, opts)
}
