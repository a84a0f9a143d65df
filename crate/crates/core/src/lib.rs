//! Simulation of crowd mobility inside rooms whose walls are fully tiled with
//! reconfigurable intelligent surface (RIS) elements, together with the
//! statistics used to quantify how the resulting channel distributions drift
//! over time.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`] builds rooms, walls, furniture, access points and tile grids.
//! * [`mobility`] generates user trajectories and handset poses.
//! * [`visibility`] computes shadowed tiles by projecting blockers onto walls.
//! * [`channel`] evaluates AP→tile→UE cascade gains and outages.
//! * [`stats`] fits Nakagami models and computes KS/JS/PACF statistics.
//! * [`engine`] orchestrates a run and summarises it.
//! * [`io`] reads scenarios and writes CSV/PGM/JSON outputs.
//! * [`experiments`] holds the reproducible experiment suite.

pub mod channel;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod io;
pub mod math;
pub mod mobility;
pub mod stats;
pub mod visibility;

pub use channel::{Band, BandId, GainField, UeReceiver};
pub use engine::{run_simulation, summarize_run, RunSummary, ScenarioConfig, Simulation, Snapshot};
pub use error::{Error, Result};
pub use geometry::{Layout, LayoutSpec, TileGrid, Wall, WallId};
pub use math::{Point2, Point3, Vec2, Vec3};
pub use mobility::{MobilityParams, OrientationParams, Phase, PhaseSchedule, Posture, UserState};
pub use stats::{DriftReport, NakagamiFit, SurvivalField};
pub use visibility::{Blocker, TileMask};
