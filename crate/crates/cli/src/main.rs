//! `ris-tide`: simulate crowd runs, analyse drift, render heatmaps and run
//! the experiment suite.
//!
//! Exit codes: 0 success, 1 I/O error, 2 configuration or input error,
//! 3 failed criterion.

use clap::{Parser, Subcommand, ValueEnum};
use ris_tide::engine::{summarize_run, PhaseBoundary, RunSummary, SummaryConfig};
use ris_tide::experiments::{criterion_by_key, reference_tile, run_suite, SuiteConfig};
use ris_tide::io::{
    load_scenario, read_gains_csv, write_field_pgm, write_jsd_csv, write_json, write_ksd_csv,
    write_pacf_csv, write_trajectory_csv, GainsWriter,
};
use ris_tide::stats::{pacf, windowed_drift_report, BinScale, DriftConfig, DriftReport, TilePacf};
use ris_tide::{run_simulation, BandId, Error, Phase, ScenarioConfig, WallId};
use serde::Serialize;
use serde_json::json;
use std::fs::{self, File, OpenOptions};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const LOCK_NAME: &str = ".ris-tide.lock";

#[derive(Parser, Debug)]
#[command(
    name = "ris-tide",
    version,
    about = "Crowd mobility and drift statistics in RIS-covered rooms"
)]
struct Cli {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Frames between the starts of adjacent statistics windows.
    #[arg(long, global = true)]
    stride: Option<usize>,
    /// Override the scenario band (mmw28, mmw73, vl).
    #[arg(long, global = true)]
    band: Option<String>,
    /// Suppress progress messages on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario and write a run directory under --out.
    Simulate {
        /// Write one gains row per link instead of link-aggregated rows.
        #[arg(long)]
        per_link: bool,
    },
    /// Windowed drift statistics of a run's gains table.
    Analyze {
        run_dir: PathBuf,
        #[arg(long, default_value = "S4")]
        wall: String,
        #[arg(long)]
        window_len: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, value_enum, default_value_t = Scale::Log)]
        bin_scale: Scale,
        /// Tiles whose series get a PACF; defaults to the reference mirror tile.
        #[arg(long = "pacf-tile")]
        pacf_tiles: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        pacf_max_lag: usize,
        #[arg(long, value_enum, default_value_t = Series::Gain)]
        pacf_series: Series,
    },
    /// Heatmaps of the phase-boundary snapshots of a run.
    Render {
        run_dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Field::Gain)]
        field: Field,
        /// Render one wall only.
        #[arg(long)]
        wall: Option<String>,
    },
    /// Run the experiment suite and print one PASS/FAIL line per criterion.
    Reproduce {
        /// Criterion key or number; repeatable.
        #[arg(long)]
        only: Vec<String>,
        /// Use seeds 1..=N.
        #[arg(long, default_value_t = 10)]
        seeds: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Scale {
    Linear,
    Log,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Series {
    Gain,
    Alive,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Field {
    Gain,
    Survival,
    Shadow,
}

impl Field {
    fn as_str(self) -> &'static str {
        match self {
            Field::Gain => "gain",
            Field::Survival => "survival",
            Field::Shadow => "shadow",
        }
    }
}

#[derive(Debug)]
struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
    path: Option<PathBuf>,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            kind: "config",
            message: message.into(),
            path: None,
        }
    }

    fn at(mut self, path: &Path) -> Self {
        self.path = Some(path.to_path_buf());
        self
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::from(e),
            e => Failure::config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self {
            code: 1,
            kind: "io",
            message: e.to_string(),
            path: None,
        }
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::config(format!("json: {e}"))
    }
}

type CmdResult = Result<(), Failure>;

struct Ctx {
    quiet: bool,
}

impl Ctx {
    fn note(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }
}

/// Removes the lock file when dropped.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        let path = dir.join(LOCK_NAME);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Self(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Failure {
                code: 1,
                kind: "io",
                message: "directory is locked by another ris-tide command".into(),
                path: Some(path),
            }),
            Err(e) => Err(Failure::from(e).at(&path)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn parse_wall(s: &str) -> Result<WallId, Failure> {
    WallId::parse(s).ok_or_else(|| Failure::config(format!("unknown wall '{s}'")))
}

fn now_utc() -> chrono::DateTime<chrono::Utc> {
    chrono::Utc::now()
}

fn load_config(cli: &Cli) -> Result<(PathBuf, ScenarioConfig), Failure> {
    let path = cli
        .scenario
        .clone()
        .ok_or_else(|| Failure::config("--scenario is required"))?;
    if !path.is_file() {
        return Err(
            Failure::config(format!("scenario file not found: {}", path.display())).at(&path),
        );
    }
    let mut config = load_scenario(&path).map_err(|e| Failure::from(e).at(&path))?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(b) = &cli.band {
        let id = BandId::parse(b).ok_or_else(|| Failure::config(format!("unknown band '{b}'")))?;
        config.band = ris_tide::Band::new(id);
    }
    Ok((path, config))
}

/// Fresh run directory named by start time and seed.
fn create_run_dir(root: &Path, seed: u64) -> Result<PathBuf, Failure> {
    fs::create_dir_all(root).map_err(|e| Failure::from(e).at(root))?;
    let stem = format!("{}-seed{seed}", now_utc().format("%Y%m%dT%H%M%SZ"));
    for k in 0.. {
        let name = if k == 0 {
            stem.clone()
        } else {
            format!("{stem}-{k}")
        };
        let dir = root.join(name);
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(Failure::from(e).at(&dir)),
        }
    }
    unreachable!()
}

#[derive(Serialize)]
struct PhaseStat {
    phase: Phase,
    wall: WallId,
    frames: usize,
    mean_gain: f64,
    gain_variance: f64,
    mean_ap_shadow: f64,
}

fn phase_stats(s: &RunSummary) -> Vec<PhaseStat> {
    let mut out = vec![];
    for phase in Phase::ALL {
        for w in &s.walls {
            let g = s.phase_mean_gains(w.wall_id, phase);
            let sh = s.phase_ap_shadow(w.wall_id, phase);
            let n = g.len().max(1) as f64;
            let m = g.iter().sum::<f64>() / n;
            let var = if g.len() > 1 {
                g.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (g.len() - 1) as f64
            } else {
                0.0
            };
            out.push(PhaseStat {
                phase,
                wall: w.wall_id,
                frames: g.len(),
                mean_gain: m,
                gain_variance: var,
                mean_ap_shadow: sh.iter().sum::<f64>() / sh.len().max(1) as f64,
            });
        }
    }
    out
}

fn write_masks(dir: &Path, s: &RunSummary) -> CmdResult {
    let masks = dir.join("masks");
    fs::create_dir_all(&masks)?;
    for b in &s.boundaries {
        for (w, bw) in b.walls.iter().enumerate() {
            let v: Vec<f64> = bw.ap_shadow.iter().map(|&x| x as u8 as f64).collect();
            let name = format!("{}_{}.pgm", b.phase.as_str(), bw.wall_id);
            write_field_pgm(&masks.join(name), &v, s.rows, s.cols[w])?;
        }
    }
    Ok(())
}

fn cmd_simulate(cli: &Cli, ctx: &Ctx, per_link: bool) -> CmdResult {
    let (scenario_path, config) = load_config(cli)?;
    let root = cli.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    let dir = create_run_dir(&root, config.seed)?;
    let _lock = DirLock::acquire(&dir)?;
    let started = now_utc();
    ctx.note(&format!(
        "simulating {} steps into {}",
        config.duration_steps,
        dir.display()
    ));

    let opts = SummaryConfig {
        drift: Some(DriftConfig {
            stride: cli.stride.unwrap_or(20),
            ..DriftConfig::default()
        }),
        drift_wall: Some(WallId::S4),
    };
    let sim = run_simulation(&config)?;
    let gains_path = dir.join("gains.csv");
    let mut gains = GainsWriter::new(BufWriter::new(File::create(&gains_path)?))?;
    let summary = if per_link {
        let cols: Vec<usize> = {
            let mut spec = config.layout.clone();
            spec.ap_count = config.n_aps as u8;
            let layout = ris_tide::geometry::build_layout(&spec)?;
            config.walls.iter().map(|&w| layout.grid(w).cols).collect()
        };
        let mut err = None;
        let stream = sim.inspect(|snap| {
            if snap.regular && err.is_none() {
                for f in &snap.fields {
                    let w = config
                        .walls
                        .iter()
                        .position(|&x| x == f.wall_id)
                        .unwrap_or(0);
                    if let Err(e) = gains.write_field(f, cols[w]) {
                        err = Some(e);
                        break;
                    }
                }
            }
        });
        let s = summarize_run(stream, &config, &opts)?;
        if let Some(e) = err {
            return Err(e.into());
        }
        s
    } else {
        let s = summarize_run(sim, &config, &opts)?;
        gains.write_summary(&s)?;
        s
    };
    gains.finish()?;

    write_trajectory_csv(
        BufWriter::new(File::create(dir.join("trajectory.csv"))?),
        &summary.trajectory,
    )?;
    write_masks(&dir, &summary)?;
    write_json(
        &dir.join("snapshots.json"),
        &json!({ "rows": summary.rows, "cols": summary.cols, "boundaries": summary.boundaries }),
    )?;
    write_json(
        &dir.join("report.json"),
        &json!({
            "band": summary.band,
            "drift_wall": "S4",
            "drift": summary.drift,
            "mean_survival": summary.mean_survival(),
            "phases": phase_stats(&summary),
            "audit": summary.audit,
        }),
    )?;
    write_json(
        &dir.join("meta.json"),
        &json!({
            "schema_version": ris_tide::io::SCHEMA_VERSION,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "git_describe": option_env!("RIS_TIDE_GIT_DESCRIBE").unwrap_or("unknown"),
            "scenario_path": scenario_path,
            "seed": config.seed,
            "started_utc": started.to_rfc3339(),
            "finished_utc": now_utc().to_rfc3339(),
            "calibration": config.band.calibration,
            "frames": summary.frames.len(),
            "gains_rows": if per_link { "per-link" } else { "aggregated" },
            "config": config,
        }),
    )?;
    println!("{}", json!({ "run_dir": dir }));
    Ok(())
}

fn run_config(run_dir: &Path) -> Option<ScenarioConfig> {
    let text = fs::read_to_string(run_dir.join("meta.json")).ok()?;
    let v: serde_json::Value = serde_json::from_str(&text).ok()?;
    serde_json::from_value(v.get("config")?.clone()).ok()
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    cli: &Cli,
    ctx: &Ctx,
    run_dir: &Path,
    wall: &str,
    window_len: Option<usize>,
    bins: Option<usize>,
    scale: Scale,
    pacf_tiles: &[usize],
    pacf_max_lag: usize,
    series: Series,
) -> CmdResult {
    let wall = parse_wall(wall)?;
    let gains_path = run_dir.join("gains.csv");
    if !gains_path.is_file() {
        return Err(
            Failure::config(format!("missing input {}", gains_path.display())).at(&gains_path),
        );
    }
    let stride = cli.stride.unwrap_or(20);
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| run_dir.join("analysis").join(format!("stride-{stride}")));
    fs::create_dir_all(&out).map_err(|e| Failure::from(e).at(&out))?;
    let _lock = DirLock::acquire(&out)?;
    ctx.note(&format!("reading {}", gains_path.display()));
    let frames = read_gains_csv(File::open(&gains_path)?, wall)
        .map_err(|e| Failure::from(e).at(&gains_path))?;

    let tiles = if !pacf_tiles.is_empty() {
        pacf_tiles.to_vec()
    } else if let Some(c) = run_config(run_dir) {
        vec![reference_tile(
            &c.layout,
            c.n_aps,
            c.mobility.ue_height,
            wall,
        )?]
    } else {
        vec![(frames.rows / 2) * frames.cols + frames.cols / 2]
    };
    if let Some(&t) = tiles.iter().find(|&&t| t >= frames.rows * frames.cols) {
        return Err(Failure::config(format!(
            "pacf tile {t} outside the {}x{} grid",
            frames.rows, frames.cols
        )));
    }
    let defaults = DriftConfig::default();
    let dc = DriftConfig {
        stride,
        window_len: window_len.unwrap_or(defaults.window_len),
        bins: bins.unwrap_or(defaults.bins),
        bin_scale: match scale {
            Scale::Linear => BinScale::Linear,
            Scale::Log => BinScale::Log,
        },
        pacf_max_lag,
        pacf_tiles: if series == Series::Gain {
            tiles.clone()
        } else {
            vec![]
        },
    };
    let mut report: DriftReport = windowed_drift_report(&frames.gains, &dc)?;
    if series == Series::Alive {
        for &tile in &tiles {
            let s: Vec<f64> = frames.alive.iter().map(|f| f[tile]).collect();
            if let Ok(values) = pacf(&s, pacf_max_lag) {
                report.pacf.push(TilePacf { tile, values });
            }
        }
    }

    write_json(&out.join("report.json"), &report)?;
    write_ksd_csv(BufWriter::new(File::create(out.join("ksd.csv"))?), &report)?;
    write_jsd_csv(BufWriter::new(File::create(out.join("jsd.csv"))?), &report)?;
    write_pacf_csv(BufWriter::new(File::create(out.join("pacf.csv"))?), &report)?;
    println!(
        "{}",
        json!({
            "out": out,
            "wall": wall,
            "frames": frames.gains.len(),
            "windows": report.ksd_series.len(),
            "max_ksd": report.max_ksd(),
            "mean_jsd": report.mean_jsd(),
        })
    );
    Ok(())
}

fn cmd_render(cli: &Cli, ctx: &Ctx, run_dir: &Path, field: Field, wall: Option<&str>) -> CmdResult {
    let wall = wall.map(parse_wall).transpose()?;
    let path = run_dir.join("snapshots.json");
    if !path.is_file() {
        return Err(Failure::config(format!("missing input {}", path.display())).at(&path));
    }
    #[derive(serde::Deserialize)]
    struct Snapshots {
        rows: usize,
        cols: Vec<usize>,
        boundaries: Vec<PhaseBoundary>,
    }
    let snaps: Snapshots = serde_json::from_str(&fs::read_to_string(&path)?)
        .map_err(|e| Failure::from(e).at(&path))?;
    let out = cli.out.clone().unwrap_or_else(|| run_dir.join("render"));
    fs::create_dir_all(&out).map_err(|e| Failure::from(e).at(&out))?;
    let _lock = DirLock::acquire(&out)?;
    let mut files = vec![];
    for b in &snaps.boundaries {
        for (w, bw) in b.walls.iter().enumerate() {
            if wall.is_some_and(|id| id != bw.wall_id) {
                continue;
            }
            let values: Vec<f64> = match field {
                Field::Gain => bw.gain.clone(),
                Field::Survival => bw.survival.clone(),
                Field::Shadow => bw.ap_shadow.iter().map(|&x| x as u8 as f64).collect(),
            };
            let file = out.join(format!(
                "{}_{}_{}.pgm",
                field.as_str(),
                bw.wall_id,
                b.phase.as_str()
            ));
            write_field_pgm(&file, &values, snaps.rows, snaps.cols[w])?;
            files.push(file);
        }
    }
    if files.is_empty() {
        return Err(Failure::config("nothing to render for the selected wall"));
    }
    ctx.note(&format!("wrote {} images", files.len()));
    println!("{}", json!({ "files": files }));
    Ok(())
}

fn cmd_reproduce(cli: &Cli, ctx: &Ctx, only: &[String], seeds: u64) -> CmdResult {
    if seeds == 0 {
        return Err(Failure::config("--seeds must be at least 1"));
    }
    let only: Vec<u8> = only
        .iter()
        .map(|k| {
            criterion_by_key(k)
                .map(|c| c.number)
                .ok_or_else(|| Failure::config(format!("unknown criterion '{k}'")))
        })
        .collect::<Result<_, _>>()?;
    let out = match &cli.out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| Failure::from(e).at(dir))?;
            Some((dir.clone(), DirLock::acquire(dir)?))
        }
        None => None,
    };
    let cfg = SuiteConfig {
        seeds: (1..=seeds).collect(),
        ..SuiteConfig::default()
    };
    ctx.note(&format!(
        "running the experiment suite on seeds 1..={seeds}"
    ));
    let outcomes = run_suite(&cfg, &only, |o| println!("{}", o.line()));
    if let Some((dir, _lock)) = &out {
        write_json(&dir.join("reproduce.json"), &outcomes)?;
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.key.to_string())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            kind: "criterion",
            message: format!("failed criteria: {}", failed.join(", ")),
            path: None,
        })
    }
}

fn configure_threads() -> CmdResult {
    let Ok(v) = std::env::var("RIS_TIDE_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Failure::config(format!(
            "RIS_TIDE_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::config(e.to_string()))
}

fn run(cli: &Cli) -> CmdResult {
    configure_threads()?;
    let ctx = Ctx { quiet: cli.quiet };
    match &cli.command {
        Command::Simulate { per_link } => cmd_simulate(cli, &ctx, *per_link),
        Command::Analyze {
            run_dir,
            wall,
            window_len,
            bins,
            bin_scale,
            pacf_tiles,
            pacf_max_lag,
            pacf_series,
        } => cmd_analyze(
            cli,
            &ctx,
            run_dir,
            wall,
            *window_len,
            *bins,
            *bin_scale,
            pacf_tiles,
            *pacf_max_lag,
            *pacf_series,
        ),
        Command::Render {
            run_dir,
            field,
            wall,
        } => cmd_render(cli, &ctx, run_dir, *field, wall.as_deref()),
        Command::Reproduce { only, seeds } => cmd_reproduce(cli, &ctx, only, *seeds),
    }
}

fn report_failure(f: &Failure) -> ExitCode {
    let mut err = json!({ "code": f.code, "kind": f.kind, "message": f.message });
    if let Some(p) = &f.path {
        err["path"] = json!(p);
    }
    eprintln!("{}", json!({ "error": err }));
    ExitCode::from(f.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report_failure(&Failure::config(e.to_string().trim().to_string()));
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => report_failure(&f),
    }
}
