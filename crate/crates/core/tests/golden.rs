//! End-to-end run frozen as a golden summary: R1, 4 APs, 8 users, visible
//! light, 2000 steps. Set `RIS_TIDE_BLESS=1` to rewrite the file.

use ris_tide::engine::{simulate_and_summarize, SummaryConfig};
use ris_tide::geometry::LayoutId;
use ris_tide::{BandId, LayoutSpec, Phase, ScenarioConfig, WallId};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Serialize, Deserialize)]
struct PhaseStats {
    phase: Phase,
    wall: WallId,
    frames: usize,
    mean: f64,
    variance: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Golden {
    seed: u64,
    frames: usize,
    trajectory_rows: usize,
    peak_users: usize,
    mean_survival: f64,
    phases: Vec<PhaseStats>,
}

fn variance(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
}

fn run() -> Golden {
    let spec = LayoutSpec::preset(LayoutId::R1).unwrap();
    let config = ScenarioConfig::new(spec, BandId::Vl, 8, 1);
    let s = simulate_and_summarize(&config, &SummaryConfig::default()).unwrap();
    let mut phases = vec![];
    for phase in Phase::ALL {
        for wall in WallId::ALL {
            let g = s.phase_mean_gains(wall, phase);
            phases.push(PhaseStats {
                phase,
                wall,
                frames: g.len(),
                mean: g.iter().sum::<f64>() / g.len() as f64,
                variance: variance(&g),
            });
        }
    }
    Golden {
        seed: config.seed,
        frames: s.frames.len(),
        trajectory_rows: s.trajectory.len(),
        peak_users: s.frames.iter().map(|f| f.active_users).max().unwrap(),
        mean_survival: s.mean_survival().unwrap(),
        phases,
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn visible_light_run_matches_golden_summary() {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/r1_vl_seed1.json");
    let got = run();
    if std::env::var_os("RIS_TIDE_BLESS").is_some() {
        std::fs::write(&path, serde_json::to_string_pretty(&got).unwrap() + "\n").unwrap();
    }
    let want: Golden = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(got.frames, want.frames);
    assert_eq!(got.trajectory_rows, want.trajectory_rows);
    assert_eq!(got.peak_users, want.peak_users);
    assert!(close(got.mean_survival, want.mean_survival));
    for (g, w) in got.phases.iter().zip(&want.phases) {
        assert_eq!((g.phase, g.wall, g.frames), (w.phase, w.wall, w.frames));
        assert!(close(g.mean, w.mean), "{:?} {:?} mean", g.phase, g.wall);
        assert!(
            close(g.variance, w.variance),
            "{:?} {:?} variance",
            g.phase,
            g.wall
        );
    }
}

#[test]
fn visible_light_run_fills_and_empties_the_room() {
    let spec = LayoutSpec::preset(LayoutId::R1).unwrap();
    let config = ScenarioConfig::new(spec, BandId::Vl, 8, 1);
    let s = simulate_and_summarize(&config, &SummaryConfig::default()).unwrap();
    let users = |phase: Phase| -> Vec<usize> {
        s.frames
            .iter()
            .filter(|f| f.phase == phase)
            .map(|f| f.active_users)
            .collect()
    };
    let (e, w, x) = (
        users(Phase::Entering),
        users(Phase::Wandering),
        users(Phase::Exiting),
    );
    assert!(
        e.windows(2).all(|p| p[1] >= p[0]),
        "entering never loses users"
    );
    assert_eq!(*e.last().unwrap(), 8);
    assert!(w.iter().all(|&n| n == 8));
    assert!(
        x.windows(2).all(|p| p[1] <= p[0]),
        "exiting never gains users"
    );
    assert_eq!(*x.last().unwrap(), 0);
}
