//! `lavatube`: generate worlds, fly exploration missions and summarise runs.

mod artifacts;
mod config;
mod report;

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use lavatube_core::frontier::{repositioning_cost, ExplorationConfig, Frontier};
use lavatube_core::map::{OccupancyMap, VoxelKey};
use lavatube_core::mission::{run_mission_in, MissionObserver, MissionOutcome, TickView};
use lavatube_core::world::{generate_tube, WorldGeometry};

use artifacts::{Stamp, Summary};
use config::{Overrides, Resolved};

#[derive(Parser, Debug)]
#[command(name = "lavatube", version, about = "Energy-aware lava-tube exploration missions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a procedural lava tube and write it in the voxel text format.
    GenerateWorld {
        #[command(flatten)]
        common: Common,
    },
    /// Fly a mission and export its metrics.
    Run {
        #[command(flatten)]
        common: Common,
        /// Fly in this world file instead of generating one.
        #[arg(long)]
        world: Option<PathBuf>,
        /// Mission time budget in seconds.
        #[arg(long, allow_negative_numbers = true)]
        budget: Option<f64>,
        /// Speed cap in m/s.
        #[arg(long, allow_negative_numbers = true)]
        vmax: Option<f64>,
        /// Also dump frontier sets and planned paths.
        #[arg(long)]
        debug: bool,
    },
    /// Re-emit the metric CSVs and summary from a recorded trace.
    Replay {
        /// `trace.csv` or the run directory holding it.
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print summary tables of run directories side by side.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config with dotted keys; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::GenerateWorld { common } => {
            let r = config::load(common.config.as_deref(), Overrides { seed: common.seed, ..Overrides::default() })?;
            artifacts::ensure_writable(&common.out)?;
            let world = generate_tube(r.config.seed, &r.config.world)?;
            let stamp = stamp(&r);
            write_config_echo(&common.out, &stamp, &r)?;
            artifacts::write_stamped(&common.out, artifacts::WORLD, &stamp, |w| Ok(world.write_text(w)?))?;
            println!("wrote {}", common.out.join(artifacts::WORLD).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            common,
            world,
            budget,
            vmax,
            debug,
        } => run(&common, world.as_deref(), Overrides { seed: common.seed, budget_s: budget, v_max: vmax }, debug),
        Command::Replay { trace, out } => {
            let path = if trace.is_dir() { trace.join(artifacts::TRACE) } else { trace };
            let (stamp, rows) = artifacts::read_trace(&path)?;
            artifacts::ensure_writable(&out)?;
            artifacts::write_metrics(&out, &stamp, &rows)?;
            artifacts::write_summary(&out, &Summary::from_trace(&stamp, &rows))?;
            println!("re-emitted {} ticks into {}", rows.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { dirs } => {
            let refs: Vec<&Path> = dirs.iter().map(PathBuf::as_path).collect();
            print!("{}", report::render(&refs)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn stamp(r: &Resolved) -> Stamp {
    Stamp {
        seed: r.config.seed,
        config_hash: r.hash.clone(),
    }
}

fn write_config_echo(dir: &Path, stamp: &Stamp, r: &Resolved) -> Result<()> {
    artifacts::write_stamped(dir, artifacts::CONFIG_ECHO, stamp, |w| {
        use std::io::Write;
        w.write_all(r.echo.as_bytes())?;
        Ok(())
    })
}

fn run(common: &Common, world_path: Option<&Path>, overrides: Overrides, debug: bool) -> Result<ExitCode> {
    let r = config::load(common.config.as_deref(), overrides)?;
    let out = &common.out;
    // fail on a bad output directory before spending time on the mission
    artifacts::ensure_writable(out)?;
    let world = match world_path {
        Some(p) => {
            let f = File::open(p).with_context(|| format!("opening world {}", p.display()))?;
            WorldGeometry::read_text(BufReader::new(f)).with_context(|| format!("reading world {}", p.display()))?
        }
        None => generate_tube(r.config.seed, &r.config.world)?,
    };
    let stamp = stamp(&r);
    let mut rec = Recorder::new(debug, r.config.exploration.clone());
    let report = run_mission_in(&r.config, &world, &mut rec)?;

    write_config_echo(out, &stamp, &r)?;
    let rows = artifacts::trace_rows(&report);
    artifacts::write_trace(out, &stamp, &rows)?;
    artifacts::write_metrics(out, &stamp, &rows)?;
    artifacts::write_summary(out, &Summary::from_report(&stamp, &report))?;
    artifacts::write_stamped(out, artifacts::WORLD, &stamp, |w| Ok(world.write_text(w)?))?;
    if let Some(map) = &rec.map {
        artifacts::write_stamped(out, artifacts::MAP, &stamp, |w| Ok(map.write_text(w)?))?;
    }
    if debug {
        artifacts::write_csv(
            out,
            "frontiers.csv",
            &stamp,
            &["tick", "set", "x", "y", "z", "alpha", "dist", "dh", "cost"],
            &rec.frontiers,
        )?;
        artifacts::write_csv(out, "paths.csv", &stamp, &["tick", "idx", "x", "y", "z", "voxel_cost"], &rec.paths)?;
    }

    print!("{}", report::render(&[out.as_path()])?);
    if report.outcome == MissionOutcome::Stuck {
        eprintln!("mission stuck: {}", report.stuck_reason.as_deref().unwrap_or("unknown reason"));
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

type FrontierRow = (usize, &'static str, f64, f64, f64, f64, f64, f64, f64);
type PathRow = (usize, usize, f64, f64, f64, f64);

/// Keeps the final map and, in debug mode, the frontier sets at every
/// selection and every newly planned path.
struct Recorder {
    debug: bool,
    exploration: ExplorationConfig,
    map: Option<OccupancyMap>,
    frontiers: Vec<FrontierRow>,
    paths: Vec<PathRow>,
    last_path: Vec<VoxelKey>,
}

impl Recorder {
    fn new(debug: bool, exploration: ExplorationConfig) -> Self {
        Self {
            debug,
            exploration,
            map: None,
            frontiers: Vec::new(),
            paths: Vec::new(),
            last_path: Vec::new(),
        }
    }

    fn push_set(&mut self, tick: usize, set: &'static str, fs: &[Frontier]) {
        for f in fs {
            let cost = repositioning_cost(f, &self.exploration);
            let p = f.position;
            self.frontiers.push((tick, set, p.x, p.y, p.z, f.alpha, f.dist, f.dh, cost));
        }
    }
}

impl MissionObserver for Recorder {
    fn on_tick(&mut self, view: &TickView<'_>) {
        if !self.debug {
            return;
        }
        if let Some(s) = view.selection {
            self.push_set(view.tick, "direct", &s.direct);
            self.push_set(view.tick, "indirect", &s.indirect);
            self.push_set(view.tick, "leftover", &s.leftover);
            if let Some(c) = &s.chosen {
                self.push_set(view.tick, "chosen", std::slice::from_ref(c));
            }
        }
        if let Some(p) = view.path {
            if p.keys != self.last_path {
                self.last_path.clone_from(&p.keys);
                for (i, (w, c)) in p.waypoints.iter().zip(&p.voxel_costs).enumerate() {
                    self.paths.push((view.tick, i, w.x, w.y, w.z, *c));
                }
            }
        }
    }

    fn on_finish(&mut self, map: &OccupancyMap) {
        self.map = Some(map.clone());
    }
}
