use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_tide::channel::link_gain_map;
use ris_tide::engine::{run_simulation, ScenarioConfig};
use ris_tide::experiments::stationary_nakagami_frames;
use ris_tide::geometry::{build_layout, LayoutId};
use ris_tide::stats::{pacf, windowed_drift_report, DriftConfig};
use ris_tide::visibility::{oracle_mask, shadowed_tiles};
use ris_tide::{Band, BandId, Blocker, LayoutSpec, TileMask, UeReceiver, Vec2, Vec3, WallId};

fn crowd(n: usize, seed: u64) -> Vec<Blocker> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Blocker::cylinder(
                Vec2::new(rng.random_range(0.5..4.5), rng.random_range(0.5..4.5)),
                0.15,
                1.7,
            )
        })
        .collect()
}

fn masks(c: &mut Criterion) {
    let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
    let blockers = crowd(8, 1);
    let ap = layout.aps[0].position;
    let (wall, grid) = (layout.wall(WallId::S1), layout.grid(WallId::S1));
    c.bench_function("shadowed_tiles/8 bodies", |b| {
        b.iter(|| shadowed_tiles(ap, &blockers, wall, grid).unwrap())
    });
    c.bench_function("oracle_mask/8 bodies", |b| {
        b.iter(|| oracle_mask(ap, &blockers, grid))
    });
}

fn gains(c: &mut Criterion) {
    let layout = build_layout(&LayoutSpec::preset(LayoutId::R1).unwrap()).unwrap();
    let band = Band::new(BandId::Mmw28);
    let (wall, grid) = (layout.wall(WallId::S4), layout.grid(WallId::S4));
    let clear = TileMask::empty(grid);
    let ue = UeReceiver::directional(Vec3::new(2.5, 2.0, 1.2), Vec3::new(0.4, 0.3, 0.8));
    c.bench_function("link_gain_map/1500 tiles", |b| {
        b.iter(|| {
            link_gain_map(
                &layout.aps[0],
                0,
                &ue,
                wall,
                grid,
                &clear,
                &clear,
                &band,
                0.0,
            )
            .unwrap()
        })
    });
}

fn statistics(c: &mut Criterion) {
    let frames = stationary_nakagami_frames(200, 1500, 1.5, 1e-6, 3);
    let cfg = DriftConfig::default();
    c.bench_function("windowed_drift_report/200x1500", |b| {
        b.iter(|| windowed_drift_report(&frames, &cfg).unwrap())
    });
    let series: Vec<f64> = frames.iter().map(|f| f[0]).collect();
    c.bench_function("pacf/200 lags 10", |b| {
        b.iter(|| pacf(&series, 10).unwrap())
    });
}

fn engine(c: &mut Criterion) {
    let mut config = ScenarioConfig::new(
        LayoutSpec::preset(LayoutId::R1).unwrap(),
        BandId::Mmw28,
        8,
        1,
    );
    config.duration_steps = 50;
    let mut g = c.benchmark_group("engine");
    g.sample_size(10);
    g.bench_function("50 steps, 8 users, 4 APs", |b| {
        b.iter_batched(
            || run_simulation(&config).unwrap(),
            |sim| sim.count(),
            BatchSize::SmallInput,
        )
    });
    g.finish();
}

criterion_group!(benches, masks, gains, statistics, engine);
criterion_main!(benches);
