//! Run artifacts: CSV series, the per-tick trace, the JSON summary and the
//! voxel text dumps. Every file starts with (or, for JSON, contains) the seed
//! and config hash of the run that produced it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use lavatube_core::geom::{Pose, Vec3};
use lavatube_core::mission::{MissionOutcome, MissionPhase, MissionReport};
use serde::{Deserialize, Serialize};

pub const TRACE: &str = "trace.csv";
pub const SUMMARY: &str = "summary.json";
pub const CONFIG_ECHO: &str = "config.toml";
pub const WORLD: &str = "world.txt";
pub const MAP: &str = "map.txt";

/// Seed and config hash of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub seed: u64,
    pub config_hash: String,
}

impl Stamp {
    pub fn header(&self) -> String {
        format!("# seed={} config_hash={}", self.seed, self.config_hash)
    }

    pub fn parse_header(line: &str) -> Option<Self> {
        let rest = line.strip_prefix("# ")?;
        let mut seed = None;
        let mut hash = None;
        for tok in rest.split_whitespace() {
            match tok.split_once('=') {
                Some(("seed", v)) => seed = v.parse().ok(),
                Some(("config_hash", v)) => hash = Some(v.to_string()),
                _ => {}
            }
        }
        Some(Self {
            seed: seed?,
            config_hash: hash?,
        })
    }
}

/// One control tick as recorded in `trace.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub yaw: f64,
    pub phi: f64,
    pub theta: f64,
    pub thrust: f64,
    pub phi_ref: f64,
    pub theta_ref: f64,
    pub solve_iters: usize,
    pub phase: MissionPhase,
    pub volume: f64,
    /// 1 on ticks where a repositioning goal was chosen.
    pub reposition: u8,
}

impl TraceRow {
    fn position(&self) -> Vec3<f64> {
        Vec3::new(self.x, self.y, self.z)
    }

    fn velocity(&self) -> Vec3<f64> {
        Vec3::new(self.vx, self.vy, self.vz)
    }
}

pub fn trace_rows(report: &MissionReport) -> Vec<TraceRow> {
    let events: std::collections::BTreeSet<usize> = report.repositioning_events.iter().map(|e| e.tick).collect();
    report
        .ticks
        .iter()
        .enumerate()
        .map(|(tick, r)| TraceRow {
            tick,
            t: r.t,
            x: r.position[0],
            y: r.position[1],
            z: r.position[2],
            vx: r.velocity[0],
            vy: r.velocity[1],
            vz: r.velocity[2],
            yaw: r.yaw,
            phi: r.phi,
            theta: r.theta,
            thrust: r.thrust,
            phi_ref: r.phi_ref,
            theta_ref: r.theta_ref,
            solve_iters: r.solve_iters,
            phase: r.phase,
            volume: r.volume,
            reposition: u8::from(events.contains(&tick)),
        })
        .collect()
}

/// Per-tick metric samples derived from a trace.
#[derive(Clone, Debug, PartialEq)]
pub struct Metrics {
    pub t: Vec<f64>,
    pub volume: Vec<f64>,
    pub distance: Vec<f64>,
    pub forward_velocity: Vec<f64>,
    pub acceleration: Vec<f64>,
}

/// Distance from the first position, velocity along the heading and its
/// change per tick.
pub fn metrics(rows: &[TraceRow]) -> Metrics {
    let spawn = rows.first().map_or(Vec3::zero(), TraceRow::position);
    let dt = rows.get(1).map_or(0.0, |r| r.t - rows[0].t);
    let mut m = Metrics {
        t: Vec::with_capacity(rows.len()),
        volume: Vec::with_capacity(rows.len()),
        distance: Vec::with_capacity(rows.len()),
        forward_velocity: Vec::with_capacity(rows.len()),
        acceleration: Vec::with_capacity(rows.len()),
    };
    let mut prev = 0.0;
    for (i, r) in rows.iter().enumerate() {
        let fwd = r.velocity().dot(&Pose::new(r.position(), r.yaw).heading());
        m.t.push(r.t);
        m.volume.push(r.volume);
        m.distance.push(r.position().distance(&spawn));
        m.forward_velocity.push(fwd);
        m.acceleration.push(if i == 0 { 0.0 } else { (fwd - prev) / dt });
        prev = fwd;
    }
    m
}

/// Headline numbers of a run. Fields that need more than the trace are
/// absent when the summary is rebuilt from a trace alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub seed: u64,
    pub config_hash: String,
    pub outcome: Option<MissionOutcome>,
    pub stuck_reason: Option<String>,
    pub duration_s: f64,
    pub ticks: usize,
    pub final_volume_m3: f64,
    /// Fraction of flood-fill-reachable free voxels known at the end.
    pub reachable_coverage: Option<f64>,
    pub distance_travelled_m: f64,
    pub mean_speed: f64,
    pub max_speed: f64,
    pub hover_fraction: f64,
    pub repositioning_count: usize,
    pub homing_t: Option<f64>,
    pub homing_reason: Option<String>,
    pub min_clearance_m: Option<f64>,
    pub collision_ticks: Option<usize>,
}

impl Summary {
    pub fn from_trace(stamp: &Stamp, rows: &[TraceRow]) -> Self {
        let speeds: Vec<f64> = rows.iter().map(|r| r.velocity().norm()).collect();
        let n = rows.len().max(1) as f64;
        let distance = rows
            .windows(2)
            .fold(0.0, |acc, w| acc + w[1].position().distance(&w[0].position()));
        let dt = rows.get(1).map_or(0.0, |r| r.t - rows[0].t);
        Self {
            seed: stamp.seed,
            config_hash: stamp.config_hash.clone(),
            outcome: None,
            stuck_reason: None,
            duration_s: rows.last().map_or(0.0, |r| r.t + dt),
            ticks: rows.len(),
            final_volume_m3: rows.last().map_or(0.0, |r| r.volume),
            reachable_coverage: None,
            distance_travelled_m: distance,
            mean_speed: speeds.iter().sum::<f64>() / n,
            max_speed: speeds.iter().fold(0.0, |a: f64, &b| a.max(b)),
            hover_fraction: speeds.iter().filter(|&&s| s < 0.05).count() as f64 / n,
            repositioning_count: rows.iter().filter(|r| r.reposition != 0).count(),
            homing_t: rows.iter().find(|r| r.phase == MissionPhase::Homing).map(|r| r.t),
            homing_reason: None,
            min_clearance_m: None,
            collision_ticks: None,
        }
    }

    pub fn from_report(stamp: &Stamp, report: &MissionReport) -> Self {
        let mut s = Self::from_trace(stamp, &trace_rows(report));
        s.outcome = Some(report.outcome);
        s.stuck_reason = report.stuck_reason.clone();
        s.reachable_coverage = Some(report.final_coverage);
        s.homing_t = report.homing.as_ref().map(|h| h.t);
        s.homing_reason = report.homing.as_ref().map(|h| h.reason.clone());
        s.min_clearance_m = Some(report.min_clearance).filter(|c| c.is_finite());
        s.collision_ticks = Some(report.collision_ticks);
        s
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

/// Writes a stamped text file produced by `body`.
pub fn write_stamped(
    dir: &Path,
    name: &str,
    stamp: &Stamp,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<()>,
) -> Result<()> {
    let mut w = create(dir, name)?;
    writeln!(w, "{}", stamp.header())?;
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Writes a stamped CSV file with a header row and serialisable records.
pub fn write_csv<R: Serialize>(
    dir: &Path,
    name: &str,
    stamp: &Stamp,
    columns: &[&str],
    rows: impl IntoIterator<Item = R>,
) -> Result<()> {
    write_stamped(dir, name, stamp, |w| {
        let mut c = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        c.write_record(columns)?;
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

pub fn write_trace(dir: &Path, stamp: &Stamp, rows: &[TraceRow]) -> Result<()> {
    write_stamped(dir, TRACE, stamp, |w| {
        let mut c = csv::Writer::from_writer(w);
        for r in rows {
            c.serialize(r)?;
        }
        c.flush()?;
        Ok(())
    })
}

/// Writes the metric series and trajectory CSVs.
pub fn write_metrics(dir: &Path, stamp: &Stamp, rows: &[TraceRow]) -> Result<()> {
    let m = metrics(rows);
    let pairs = |v: &[f64]| m.t.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    write_csv(dir, "volume.csv", stamp, &["t", "volume_m3"], pairs(&m.volume))?;
    write_csv(dir, "distance.csv", stamp, &["t", "distance_m"], pairs(&m.distance))?;
    write_csv(dir, "velocity.csv", stamp, &["t", "forward_velocity_mps"], pairs(&m.forward_velocity))?;
    write_csv(dir, "acceleration.csv", stamp, &["t", "acceleration_mps2"], pairs(&m.acceleration))?;
    write_csv(
        dir,
        "trajectory.csv",
        stamp,
        &["t", "x", "y", "z", "yaw", "phase"],
        rows.iter().map(|r| (r.t, r.x, r.y, r.z, r.yaw, r.phase)),
    )
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<()> {
    let mut w = create(dir, SUMMARY)?;
    serde_json::to_writer_pretty(&mut w, summary)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join(SUMMARY);
    let f = File::open(&path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_reader(BufReader::new(f)).with_context(|| format!("parsing {}", path.display()))
}

/// Reads the stamp line of a text artifact.
pub fn read_stamp(path: &Path) -> Result<Stamp> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut first = String::new();
    BufReader::new(f).read_line(&mut first)?;
    Stamp::parse_header(first.trim_end()).with_context(|| format!("{} has no seed/config_hash header", path.display()))
}

pub fn read_trace(path: &Path) -> Result<(Stamp, Vec<TraceRow>)> {
    let stamp = read_stamp(path)?;
    let f = File::open(path)?;
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(BufReader::new(f));
    let rows = r
        .deserialize()
        .collect::<Result<Vec<TraceRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((stamp, rows))
}

/// Stamped text artifacts in a run directory.
pub fn stamped_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        if matches!(ext, "csv" | "txt" | "toml") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Checks that every artifact in `dir` carries the summary's stamp.
pub fn check_consistent(dir: &Path) -> Result<Summary> {
    let summary = read_summary(dir)?;
    let want = Stamp {
        seed: summary.seed,
        config_hash: summary.config_hash.clone(),
    };
    for path in stamped_files(dir)? {
        let got = read_stamp(&path)?;
        if got != want {
            bail!(
                "{} mixes runs: {} has seed={} config_hash={}, summary has seed={} config_hash={}",
                dir.display(),
                path.display(),
                got.seed,
                got.config_hash,
                want.seed,
                want.config_hash
            );
        }
    }
    Ok(summary)
}

/// Fails unless `dir` exists (or can be created) and accepts new files.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let probe = dir.join(".lavatube-write-test");
    File::create(&probe).with_context(|| format!("output directory {} is not writable", dir.display()))?;
    std::fs::remove_file(&probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stamp_round_trip() {
        let s = Stamp {
            seed: 42,
            config_hash: "00ff00ff00ff00ff".into(),
        };
        assert_eq!(Stamp::parse_header(&s.header()), Some(s));
        assert_eq!(Stamp::parse_header("# lavatube world v1"), None);
    }

    fn row(tick: usize, t: f64, x: f64, vx: f64, yaw: f64) -> TraceRow {
        TraceRow {
            tick,
            t,
            x,
            y: 0.0,
            z: 0.0,
            vx,
            vy: 0.0,
            vz: 0.0,
            yaw,
            phi: 0.0,
            theta: 0.0,
            thrust: 3.71,
            phi_ref: 0.0,
            theta_ref: 0.0,
            solve_iters: 1,
            phase: MissionPhase::Exploring,
            volume: tick as f64,
            reposition: 0,
        }
    }

    #[test]
    fn backward_flight_has_negative_forward_velocity() {
        let rows = [row(0, 0.0, 0.0, 0.0, 0.0), row(1, 0.05, -0.05, -1.0, 0.0), row(2, 0.1, -0.1, -1.0, 0.0)];
        let m = metrics(&rows);
        assert_eq!(m.forward_velocity, vec![0.0, -1.0, -1.0]);
        assert_eq!(m.acceleration, vec![0.0, -20.0, 0.0]);
        assert_eq!(m.distance[2], 0.1);
    }

    #[test]
    fn hovering_trace_has_unit_hover_fraction() {
        let rows: Vec<_> = (0..20).map(|i| row(i, i as f64 * 0.05, 0.0, 0.0, 0.0)).collect();
        let s = Summary::from_trace(&Stamp { seed: 0, config_hash: "x".into() }, &rows);
        assert_eq!(s.hover_fraction, 1.0);
        assert_eq!(s.distance_travelled_m, 0.0);
        assert_eq!(s.duration_s, 1.0);
    }
}
