//! Scenario files and run outputs: CSV tables, PGM heatmaps and JSON.
//!
//! CSV files use a comma separator, `.` decimals, LF line endings and a
//! mandatory header row.

use crate::channel::{Band, BandId, GainField, UeReceiver};
use crate::engine::{RunSummary, ScenarioConfig, TrajectoryRow};
use crate::error::{Error, Result};
use crate::geometry::{LayoutSpec, WallId};
use crate::mobility::{MobilityParams, OrientationParams, PhaseSchedule};
use crate::stats::DriftReport;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const SCHEMA_VERSION: u32 = 1;

/// A preset name or an inline layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LayoutChoice {
    Preset(String),
    Inline(LayoutSpec),
}

/// A band name or a band with selected parameters overridden.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BandChoice {
    Name(String),
    Custom(BandOverrides),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandOverrides {
    pub id: String,
    pub outage_threshold: Option<f64>,
    pub blockage_penalty_db: Option<f64>,
    pub margin_db: Option<f64>,
    pub off_specular_db: Option<f64>,
    pub lambertian_order: Option<f64>,
}

fn default_walls() -> Vec<WallId> {
    WallId::ALL.to_vec()
}

fn default_true() -> bool {
    true
}

/// On-disk scenario, `schema_version` 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub layout: LayoutChoice,
    pub band: BandChoice,
    pub n_users: usize,
    pub n_aps: Option<usize>,
    pub duration_steps: Option<usize>,
    pub dt: Option<f64>,
    #[serde(default)]
    pub mobility: MobilityParams,
    #[serde(default)]
    pub orientation: OrientationParams,
    #[serde(default)]
    pub schedule: PhaseSchedule,
    #[serde(default)]
    pub seed: u64,
    pub snapshot_every: Option<usize>,
    #[serde(default = "default_walls")]
    pub walls: Vec<WallId>,
    #[serde(default)]
    pub probes: Vec<UeReceiver>,
    #[serde(default = "default_true")]
    pub gains: bool,
    pub audit_fraction: Option<f64>,
}

pub fn parse_band(choice: &BandChoice) -> Result<Band> {
    let unknown = |s: &str| Error::InvalidSpec(format!("unknown band '{s}'"));
    match choice {
        BandChoice::Name(s) => Ok(Band::new(BandId::parse(s).ok_or_else(|| unknown(s))?)),
        BandChoice::Custom(o) => {
            let mut band = Band::new(BandId::parse(&o.id).ok_or_else(|| unknown(&o.id))?);
            if let Some(v) = o.outage_threshold {
                band.outage_threshold = v;
            }
            if let Some(v) = o.blockage_penalty_db {
                band.blockage_penalty_db = Some(v);
            }
            if let Some(v) = o.margin_db {
                band.margin_db = v;
            }
            if let Some(v) = o.off_specular_db {
                band.off_specular_db = v;
            }
            if let Some(v) = o.lambertian_order {
                band.lambertian_order = v;
            }
            band.calibrate();
            Ok(band)
        }
    }
}

impl ScenarioFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let layout = match self.layout {
            LayoutChoice::Preset(name) => LayoutSpec::preset_by_name(&name)
                .ok_or_else(|| Error::InvalidSpec(format!("unknown layout preset '{name}'")))?,
            LayoutChoice::Inline(spec) => spec,
        };
        let band = parse_band(&self.band)?;
        let mut c = ScenarioConfig::new(layout, band.id, self.n_users, self.seed);
        c.band = band;
        if let Some(v) = self.n_aps {
            c.n_aps = v;
        }
        if let Some(v) = self.duration_steps {
            c.duration_steps = v;
        }
        if let Some(v) = self.dt {
            c.dt = v;
        }
        c.mobility = self.mobility;
        c.orientation = self.orientation;
        c.schedule = self.schedule;
        if let Some(v) = self.snapshot_every {
            c.snapshot_every = v;
        }
        c.walls = self.walls;
        c.probes = self.probes;
        c.gains = self.gains;
        if let Some(v) = self.audit_fraction {
            c.audit_fraction = v;
        }
        c.validate()?;
        Ok(c)
    }
}

pub fn parse_scenario(text: &str) -> Result<ScenarioConfig> {
    let file: ScenarioFile =
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("scenario: {e}")))?;
    file.into_config()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    parse_scenario(&fs::read_to_string(path)?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        k => Error::InvalidSample(format!("csv: {k:?}")),
    }
}

pub const TRAJECTORY_HEADER: [&str; 8] = [
    "time_s",
    "user_id",
    "x",
    "y",
    "phase",
    "posture",
    "polar_deg",
    "azimuth_deg",
];

pub fn write_trajectory_csv<W: Write>(w: W, rows: &[TrajectoryRow]) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for r in rows {
        out.write_record([
            r.time.to_string(),
            r.user_id.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            r.phase.as_str().to_string(),
            r.posture.as_str().to_string(),
            r.polar_deg.to_string(),
            r.azimuth_deg.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub const GAINS_HEADER: [&str; 8] = [
    "time_s", "ap_id", "ue_id", "wall_id", "tile_row", "tile_col", "gain", "alive",
];

/// Identifier written in the `ap_id`/`ue_id` columns of aggregated rows.
pub const ALL_LINKS: &str = "all";

/// Streams gains rows; one row per tile.
pub struct GainsWriter<W: Write> {
    out: csv::Writer<W>,
}

impl<W: Write> GainsWriter<W> {
    pub fn new(w: W) -> Result<Self> {
        let mut out = csv_writer(w);
        out.write_record(GAINS_HEADER).map_err(csv_err)?;
        Ok(Self { out })
    }

    #[allow(clippy::too_many_arguments)]
    fn row(
        &mut self,
        time: f64,
        ap: &str,
        ue: &str,
        wall: WallId,
        cols: usize,
        t: usize,
        gain: f64,
        alive: &str,
    ) -> Result<()> {
        self.out
            .write_record([
                time.to_string().as_str(),
                ap,
                ue,
                &wall.to_string(),
                &(t / cols).to_string(),
                &(t % cols).to_string(),
                &gain.to_string(),
                alive,
            ])
            .map_err(csv_err)
    }

    /// One link's field; `alive` is 0 or 1.
    pub fn write_field(&mut self, f: &GainField, cols: usize) -> Result<()> {
        let (ap, ue) = (f.ap_id.to_string(), f.ue_id.to_string());
        for (t, (&g, &a)) in f.gains.iter().zip(&f.alive).enumerate() {
            self.row(
                f.time,
                &ap,
                &ue,
                f.wall_id,
                cols,
                t,
                g,
                if a { "1" } else { "0" },
            )?;
        }
        Ok(())
    }

    /// Link-aggregated rows of every link-bearing frame: summed gain and the
    /// alive fraction.
    pub fn write_summary(&mut self, s: &RunSummary) -> Result<()> {
        for (f, frame) in s.frames.iter().enumerate() {
            if frame.links == 0 {
                continue;
            }
            for (w, series) in s.walls.iter().enumerate() {
                for (t, (&g, &a)) in series.gains[f].iter().zip(&series.alive[f]).enumerate() {
                    self.row(
                        frame.time,
                        ALL_LINKS,
                        ALL_LINKS,
                        series.wall_id,
                        s.cols[w],
                        t,
                        g,
                        &a.to_string(),
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

/// Per-tile frames of one wall read back from a gains table. Rows sharing
/// time and tile are summed (gain) and averaged (alive), so per-link and
/// aggregated tables give the same frames.
#[derive(Debug, Clone, PartialEq)]
pub struct WallFrames {
    pub wall_id: WallId,
    pub rows: usize,
    pub cols: usize,
    pub times: Vec<f64>,
    pub gains: Vec<Vec<f64>>,
    pub alive: Vec<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
struct GainRecord {
    time_s: f64,
    #[allow(dead_code)]
    ap_id: String,
    #[allow(dead_code)]
    ue_id: String,
    wall_id: String,
    tile_row: usize,
    tile_col: usize,
    gain: f64,
    alive: f64,
}

pub fn read_gains_csv<R: Read>(r: R, wall: WallId) -> Result<WallFrames> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(GAINS_HEADER.iter().copied()) {
        return Err(Error::InvalidSample(format!(
            "gains header mismatch: {headers:?}"
        )));
    }
    // time key -> tile -> (gain sum, alive sum, count)
    type Tiles = BTreeMap<(usize, usize), (f64, f64, usize)>;
    let mut frames: BTreeMap<u64, Tiles> = BTreeMap::new();
    let (mut rows, mut cols) = (0, 0);
    for rec in rdr.deserialize::<GainRecord>() {
        let rec = rec.map_err(csv_err)?;
        let w = WallId::parse(&rec.wall_id)
            .ok_or_else(|| Error::InvalidSample(format!("unknown wall '{}'", rec.wall_id)))?;
        if w != wall {
            continue;
        }
        if !(rec.time_s.is_finite() && rec.gain.is_finite() && rec.gain >= 0.0) {
            return Err(Error::InvalidSample(format!(
                "bad gains row at t={}",
                rec.time_s
            )));
        }
        rows = rows.max(rec.tile_row + 1);
        cols = cols.max(rec.tile_col + 1);
        let e = frames
            .entry(ordered_bits(rec.time_s))
            .or_default()
            .entry((rec.tile_row, rec.tile_col))
            .or_insert((0.0, 0.0, 0));
        e.0 += rec.gain;
        e.1 += rec.alive;
        e.2 += 1;
    }
    if frames.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = WallFrames {
        wall_id: wall,
        rows,
        cols,
        times: vec![],
        gains: vec![],
        alive: vec![],
    };
    for (time, tiles) in frames {
        if tiles.len() != rows * cols {
            return Err(Error::InvalidSample(format!(
                "frame at t={} has {} of {} tiles",
                f64_from_ordered(time),
                tiles.len(),
                rows * cols
            )));
        }
        out.times.push(f64_from_ordered(time));
        out.gains.push(tiles.values().map(|v| v.0).collect());
        out.alive
            .push(tiles.values().map(|v| v.1 / v.2 as f64).collect());
    }
    Ok(out)
}

// Order-preserving key for finite f64 values.
fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

fn f64_from_ordered(k: u64) -> f64 {
    if k >> 63 == 1 {
        f64::from_bits(k & !(1 << 63))
    } else {
        f64::from_bits(!k)
    }
}

pub fn write_ksd_csv<W: Write>(w: W, r: &DriftReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["window", "start_frame", "ksd", "m", "omega"])
        .map_err(csv_err)?;
    for (i, (k, fit)) in r.ksd_series.iter().zip(&r.fits).enumerate() {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        out.write_record([
            i.to_string(),
            (i * r.window_stride).to_string(),
            opt(*k),
            opt(fit.map(|f| f.m)),
            opt(fit.map(|f| f.omega)),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_jsd_csv<W: Write>(w: W, r: &DriftReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["pair", "window_a", "window_b", "jsd"])
        .map_err(csv_err)?;
    for (i, j) in r.jsd_series.iter().enumerate() {
        out.write_record([
            i.to_string(),
            i.to_string(),
            (i + 1).to_string(),
            j.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_pacf_csv<W: Write>(w: W, r: &DriftReport) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["tile", "lag", "pacf"]).map_err(csv_err)?;
    for p in &r.pacf {
        for (lag, v) in p.values.iter().enumerate() {
            out.write_record([p.tile.to_string(), lag.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// 8-bit grey levels of a tile field, max-normalised: the largest value maps
/// to 255 and an all-zero (or empty) field is black. Image rows run from the
/// top of the wall down, so grid row `rows - 1` comes first.
pub fn normalize_field(values: &[f64], rows: usize, cols: usize) -> Result<Vec<u8>> {
    if values.len() != rows * cols {
        return Err(Error::InvalidSpec(format!(
            "field has {} values, expected {rows}x{cols}",
            values.len()
        )));
    }
    let max = values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(0.0, f64::max);
    let mut px = Vec::with_capacity(values.len());
    for r in (0..rows).rev() {
        for c in 0..cols {
            let v = values[r * cols + c];
            px.push(if max > 0.0 && v.is_finite() && v > 0.0 {
                (v / max * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            });
        }
    }
    Ok(px)
}

/// Binary P5 image.
pub fn write_pgm<W: Write>(mut w: W, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::InvalidSpec(
            "pixel count does not match image size".into(),
        ));
    }
    write!(w, "P5\n{width} {height}\n255\n")?;
    w.write_all(pixels)?;
    Ok(())
}

pub fn write_field_pgm(path: &Path, values: &[f64], rows: usize, cols: usize) -> Result<()> {
    let px = normalize_field(values, rows, cols)?;
    let mut buf = Vec::with_capacity(px.len() + 16);
    write_pgm(&mut buf, cols, rows, &px)?;
    fs::write(path, buf)?;
    Ok(())
}

/// Parses a binary P5 image with maxval 255.
pub fn read_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = || Error::InvalidSample("malformed PGM".into());
    let mut fields = vec![];
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?);
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(bad());
    }
    let width: usize = fields[1].parse().map_err(|_| bad())?;
    let height: usize = fields[2].parse().map_err(|_| bad())?;
    let data = bytes.get(pos + 1..).ok_or_else(bad)?;
    if data.len() != width * height {
        return Err(bad());
    }
    Ok((width, height, data.to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{simulate_and_summarize, SummaryConfig};

    const MINIMAL: &str =
        r#"{ "schema_version": 1, "layout": "R1", "band": "mmw28", "n_users": 3 }"#;

    #[test]
    fn minimal_scenario_takes_defaults() {
        let c = parse_scenario(MINIMAL).unwrap();
        assert_eq!(c.n_aps, 4);
        assert_eq!(c.duration_steps, 2000);
        assert_eq!(c.band.id, BandId::Mmw28);
        assert_eq!(c.walls.len(), 4);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let text = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 2");
        assert!(matches!(parse_scenario(&text), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn unknown_fields_and_names_are_rejected() {
        assert!(parse_scenario(&MINIMAL.replace("n_users", "n_user")).is_err());
        assert!(parse_scenario(&MINIMAL.replace("\"R1\"", "\"R7\"")).is_err());
        assert!(parse_scenario(&MINIMAL.replace("mmw28", "5g")).is_err());
        assert!(parse_scenario(&MINIMAL.replace("3 }", "3, \"n_aps\": 12 }")).is_err());
    }

    #[test]
    fn band_overrides_recalibrate() {
        let text = MINIMAL.replace("\"mmw28\"", r#"{ "id": "mmw73", "margin_db": 20.0 }"#);
        let c = parse_scenario(&text).unwrap();
        let default = Band::new(BandId::Mmw73);
        assert_eq!(c.band.margin_db, 20.0);
        let ratio = default.calibration / c.band.calibration;
        assert!((10.0 * ratio.log10() - (default.margin_db - 20.0)).abs() < 1e-9);
    }

    #[test]
    fn inline_layout_round_trips() {
        let spec = LayoutSpec::preset(crate::geometry::LayoutId::R2).unwrap();
        let text = format!(
            r#"{{ "schema_version": 1, "layout": {}, "band": "vl", "n_users": 0 }}"#,
            serde_json::to_string(&spec).unwrap()
        );
        assert_eq!(parse_scenario(&text).unwrap().layout, spec);
    }

    #[test]
    fn shipped_scenarios_parse() {
        let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
        for name in ["R1.json", "R2.json", "R3.json"] {
            load_scenario(&dir.join(name)).unwrap();
        }
    }

    fn small_summary() -> RunSummary {
        let mut c = parse_scenario(MINIMAL).unwrap();
        c.duration_steps = 60;
        c.walls = vec![WallId::S4, WallId::S1];
        simulate_and_summarize(&c, &SummaryConfig::default()).unwrap()
    }

    #[test]
    fn gains_table_round_trips_summary_frames() {
        let s = small_summary();
        let mut buf = vec![];
        let mut w = GainsWriter::new(&mut buf).unwrap();
        w.write_summary(&s).unwrap();
        w.finish().unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("time_s,ap_id,ue_id,wall_id,tile_row,tile_col,gain,alive\n"));
        assert!(!text.contains('\r'));
        let back = read_gains_csv(&buf[..], WallId::S1).unwrap();
        assert_eq!((back.rows, back.cols), (30, 50));
        assert_eq!(back.gains, s.wall_frames(WallId::S1));
    }

    #[test]
    fn per_link_rows_sum_to_the_aggregate() {
        let mk = |ap, alive: bool, g: f64| GainField {
            time: 0.5,
            ap_id: ap,
            ue_id: 0,
            wall_id: WallId::S3,
            gains: vec![g; 6],
            alive: vec![alive; 6],
        };
        let mut buf = vec![];
        let mut w = GainsWriter::new(&mut buf).unwrap();
        w.write_field(&mk(0, true, 1.5), 3).unwrap();
        w.write_field(&mk(1, false, 0.25), 3).unwrap();
        w.finish().unwrap();
        let back = read_gains_csv(&buf[..], WallId::S3).unwrap();
        assert_eq!((back.rows, back.cols), (2, 3));
        assert_eq!(back.gains, vec![vec![1.75; 6]]);
        assert_eq!(back.alive, vec![vec![0.5; 6]]);
    }

    #[test]
    fn header_only_table_is_empty_input() {
        let text = GAINS_HEADER.join(",") + "\n";
        assert!(matches!(
            read_gains_csv(text.as_bytes(), WallId::S1),
            Err(Error::EmptyInput)
        ));
        assert!(read_gains_csv(&b""[..], WallId::S1).is_err());
    }

    #[test]
    fn normalization_puts_max_at_255_and_top_row_first() {
        let px = normalize_field(&[0.0, 1.0, 2.0, 4.0], 2, 2).unwrap();
        assert_eq!(px, vec![128, 255, 0, 64]);
        assert_eq!(normalize_field(&[0.0; 4], 2, 2).unwrap(), vec![0; 4]);
        assert!(normalize_field(&[1.0; 3], 2, 2).is_err());
    }

    #[test]
    fn pgm_round_trips() {
        let px: Vec<u8> = (0..15).map(|i| i * 17).collect();
        let mut buf = vec![];
        write_pgm(&mut buf, 5, 3, &px).unwrap();
        assert!(buf.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(read_pgm(&buf).unwrap(), (5, 3, px));
        assert!(read_pgm(b"P2\n1 1\n255\n\0").is_err());
    }

    #[test]
    fn trajectory_header_is_fixed() {
        let s = small_summary();
        let mut buf = vec![];
        write_trajectory_csv(&mut buf, &s.trajectory).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRAJECTORY_HEADER.join(","));
        assert_eq!(lines.count(), s.trajectory.len());
    }
}
