use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashSet;

use super::report::{HomingTrigger, MissionOutcome, MissionPhase, MissionReport, RepositionEvent, TickRecord};
use super::MissionConfig;
use crate::apf::{compute_reference, limit_reference, ForceState};
use crate::control::{dynamics_step, ControlInput, McqState, Nmpc};
use crate::error::Result;
use crate::frontier::{forward_direction, Frontier, FrontierSets, FrontierTracker, Selection};
use crate::geom::{Pose, Vec3};
use crate::map::{OccupancyMap, VoxelKey, VoxelState, NEIGHBOR_OFFSETS};
use crate::planner::{DStarLite, PlanOutcome, PlannedPath, RiskGrid, WaypointTracker};
use crate::world::{generate_tube, simulate_lidar, WorldGeometry};

/// Known volume of a map (m³).
pub fn explored_volume(map: &OccupancyMap) -> f64 {
    map.explored_volume()
}

/// Homing starts once the budget is exceeded or nothing is left to explore,
/// and is kept until the mission ends.
pub fn trigger_homing(phase: MissionPhase, t: f64, budget_s: f64, exploration_complete: bool) -> MissionPhase {
    match phase {
        MissionPhase::Homing | MissionPhase::Done => phase,
        _ if t > budget_s || exploration_complete => MissionPhase::Homing,
        p => p,
    }
}

/// Frontier sets at a selection tick.
#[derive(Clone, Debug, Default)]
pub struct SelectionSnapshot {
    pub direct: Vec<Frontier>,
    pub indirect: Vec<Frontier>,
    pub leftover: Vec<Frontier>,
    pub chosen: Option<Frontier>,
    pub repositioning: bool,
}

/// Read-only view handed to observers after every tick.
pub struct TickView<'a> {
    pub tick: usize,
    pub t: f64,
    pub state: &'a McqState<f64>,
    pub yaw: f64,
    pub phase: MissionPhase,
    pub input: &'a ControlInput<f64>,
    pub solve_iters: usize,
    pub reference: Vec3<f64>,
    pub map: &'a OccupancyMap,
    pub world: &'a WorldGeometry,
    /// Present on ticks where a new goal was selected.
    pub selection: Option<&'a SelectionSnapshot>,
    pub path: Option<&'a PlannedPath<f64>>,
    /// True on the tick homing was triggered.
    pub homing_triggered: bool,
}

pub trait MissionObserver {
    fn on_tick(&mut self, _view: &TickView<'_>) {}

    /// Called once with the final map after the last tick.
    fn on_finish(&mut self, _map: &OccupancyMap) {}
}

impl MissionObserver for () {}

/// Generates the world from the configured seed and flies the mission.
pub fn run_mission(cfg: &MissionConfig) -> Result<MissionReport> {
    cfg.validate()?;
    let world = generate_tube(cfg.seed, &cfg.world)?;
    run_mission_in(cfg, &world, &mut ())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum GoalKind {
    Frontier,
    Reposition,
    Home,
}

struct Goal {
    key: VoxelKey,
    kind: GoalKind,
    planner: DStarLite<f64>,
    path: PlannedPath<f64>,
    waypoints: WaypointTracker,
    start: VoxelKey,
    best_dist: f64,
    last_improvement: f64,
}

enum Pick {
    Goal(Goal, Option<RepositionEvent>),
    Complete,
    Hold,
}

struct Sim<'a> {
    cfg: &'a MissionConfig,
    map: OccupancyMap,
    frontiers: FrontierTracker,
    sets: FrontierSets,
    grid: RiskGrid<f64>,
    reachable: Vec<VoxelKey>,
}

impl Sim<'_> {
    fn res(&self) -> f64 {
        self.map.config().resolution
    }

    fn coverage(&self) -> f64 {
        if self.reachable.is_empty() {
            return 1.0;
        }
        let known = self.reachable.iter().filter(|k| self.map.state(**k).is_known()).count();
        known as f64 / self.reachable.len() as f64
    }

    /// Planning start for position `p`: its voxel, or the first neighbouring
    /// voxel that is not Occupied.
    fn start_key(&self, p: Vec3<f64>) -> Option<VoxelKey> {
        let k = self.map.key_of(p);
        if !self.grid.contains(k) {
            return None;
        }
        if self.grid.state(k) != VoxelState::Occupied {
            return Some(k);
        }
        NEIGHBOR_OFFSETS
            .iter()
            .map(|&[a, b, c]| k.offset(a, b, c))
            .find(|n| self.grid.contains(*n) && self.grid.state(*n) != VoxelState::Occupied)
    }

    fn plan(&self, start: VoxelKey, goal: VoxelKey) -> Option<(DStarLite<f64>, PlannedPath<f64>)> {
        let mut d = DStarLite::new(&self.grid, start, goal, self.map.known_bbox(), &self.cfg.planner).ok()?;
        match d.plan(&self.grid) {
            Ok(PlanOutcome::Path(p)) => Some((d, p)),
            Ok(PlanOutcome::Inaccessible) => None,
            Err(e) => {
                log::debug!("planning to {goal:?} failed: {e}");
                None
            }
        }
    }

    fn new_goal(&self, key: VoxelKey, kind: GoalKind, start: VoxelKey, p: Vec3<f64>, t: f64) -> Option<Goal> {
        let (planner, path) = self.plan(start, key)?;
        Some(Goal {
            key,
            kind,
            planner,
            path,
            waypoints: WaypointTracker::new(),
            start,
            best_dist: p.distance(&key.center(self.res())),
            last_improvement: t,
        })
    }

    fn select(
        &mut self,
        pose: &Pose<f64>,
        v_fwd: Vec3<f64>,
        start: VoxelKey,
        t: f64,
        tick: usize,
        snapshot: &mut Option<SelectionSnapshot>,
    ) -> Pick {
        let cfg = &self.cfg.exploration;
        let fr = self
            .frontiers
            .frontiers(self.res(), pose.position, v_fwd, cfg.r_known);
        self.sets.classify(&fr, cfg);
        self.sets.merge_global_frontiers(&self.map, pose, v_fwd, cfg);
        for _ in 0..self.cfg.max_plan_attempts {
            let sel = self.sets.select_candidate(cfg);
            let snap = SelectionSnapshot {
                direct: self.sets.direct.clone(),
                indirect: self.sets.indirect.clone(),
                leftover: self.sets.global_leftover.values().copied().collect(),
                chosen: sel.frontier().copied(),
                repositioning: matches!(sel, Selection::Reposition(_)),
            };
            let (f, kind) = match sel {
                Selection::ExplorationComplete => {
                    *snapshot = Some(snap);
                    return Pick::Complete;
                }
                Selection::Direct(f) => (f, GoalKind::Frontier),
                Selection::Reposition(f) => (f, GoalKind::Reposition),
            };
            match self.new_goal(f.key, kind, start, pose.position, t) {
                Some(goal) => {
                    let event = (kind == GoalKind::Reposition).then(|| RepositionEvent {
                        t,
                        tick,
                        position: pose.position.to_array(),
                        goal: f.key,
                        direct_count: self.sets.direct.len(),
                        candidate_count: snap.indirect.len() + snap.leftover.len(),
                    });
                    *snapshot = Some(snap);
                    return Pick::Goal(goal, event);
                }
                None => self.sets.mark_inaccessible(f.key),
            }
        }
        Pick::Hold
    }
}

fn slew(current: f64, target: f64, max_step: f64) -> f64 {
    let mut d = target - current;
    while d > std::f64::consts::PI {
        d -= std::f64::consts::TAU;
    }
    while d < -std::f64::consts::PI {
        d += std::f64::consts::TAU;
    }
    let y = current + d.clamp(-max_step, max_step);
    (y + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
}

/// Flies a mission in a given world, reporting every tick to `observer`.
pub fn run_mission_in<O: MissionObserver + ?Sized>(
    cfg: &MissionConfig,
    world: &WorldGeometry,
    observer: &mut O,
) -> Result<MissionReport> {
    cfg.validate()?;
    let dt = 1.0 / cfg.loop_hz;
    let map = OccupancyMap::new(cfg.map.clone())?;
    let res = map.config().resolution;
    let (wlo, whi) = world.bounds();
    let glo = map.key_of(wlo).offset(-1, -1, -1);
    let ghi = map.key_of(whi - Vec3::new(1e-9, 1e-9, 1e-9)).offset(1, 1, 1);
    let grid = RiskGrid::from_view(&map, glo, ghi, cfg.risk.clone())?;
    let reachable: Vec<VoxelKey> = {
        let mut keys: Vec<VoxelKey> = world
            .reachable_free()
            .into_iter()
            .map(|c| map.key_of(world.center_of(c)))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys
    };
    let mut sim = Sim {
        cfg,
        map,
        frontiers: FrontierTracker::new(cfg.exploration.n_req),
        sets: FrontierSets::default(),
        grid,
        reachable,
    };

    let spawn = world.spawn();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut nmpc = Nmpc::new(cfg.nmpc.clone())?;
    let mut x = McqState::hover_at(spawn.position);
    let mut yaw = spawn.yaw;
    let mut u = ControlInput::hover(cfg.model.g);
    let mut force = ForceState::new();
    let mut reference = x.p;
    let mut v_fwd = spawn.heading();
    let mut phase = MissionPhase::Exploring;
    let mut goal: Option<Goal> = None;
    let mut exploration_complete = false;

    let mut report = MissionReport {
        seed: cfg.seed,
        outcome: MissionOutcome::Stuck,
        stuck_reason: None,
        dt,
        spawn: spawn.position.to_array(),
        ticks: Vec::new(),
        repositioning_events: Vec::new(),
        homing: None,
        reachable_voxels: sim.reachable.len(),
        final_coverage: 0.0,
        final_volume: 0.0,
        distance_travelled: 0.0,
        min_clearance: f64::INFINITY,
        collision_ticks: 0,
        hover_ticks: 0,
        max_speed: 0.0,
    };
    let mut last_progress = 0.0;
    let mut last_known = 0usize;
    let mut prev_fwd_speed = 0.0;
    let deadline = cfg.budget_s + cfg.homing_timeout_s;
    let substep = dt / cfg.physics_substeps as f64;

    for tick in 0.. {
        let t = tick as f64 * dt;
        let pose = Pose::new(x.p, yaw);

        // sense and map
        let cloud = simulate_lidar(&pose, &cfg.sensor, world, &mut rng, t);
        let changed = sim.map.integrate_scan(&cloud, &pose);
        sim.frontiers.update(&sim.map, &changed);
        let cost_changed = sim.grid.apply_updates(&sim.map, &changed);
        if sim.map.known_count() > last_known {
            last_known = sim.map.known_count();
            last_progress = t;
        }

        // homing trigger
        let mut homing_now = false;
        let next_phase = trigger_homing(phase, t, cfg.budget_s, exploration_complete);
        if next_phase == MissionPhase::Homing && phase != MissionPhase::Homing {
            homing_now = true;
            phase = MissionPhase::Homing;
            goal = None;
            last_progress = t;
            report.homing = Some(HomingTrigger {
                t,
                tick,
                reason: if exploration_complete { "complete" } else { "budget" }.to_string(),
                coverage: sim.coverage(),
            });
        }

        let start = sim.start_key(x.p);
        let mut snapshot = None;

        // goal bookkeeping
        if let Some(g) = goal.as_mut() {
            let d = x.p.distance(&g.key.center(res));
            if d < g.best_dist - 0.2 {
                g.best_dist = d;
                g.last_improvement = t;
                last_progress = t;
            }
        }
        let mut drop_goal = false;
        if let Some(g) = &goal {
            match g.kind {
                GoalKind::Frontier | GoalKind::Reposition => {
                    let reached = x.p.distance(&g.key.center(res)) <= 2.0 * res;
                    let timed_out = t - g.last_improvement > cfg.goal_timeout_s;
                    if reached || timed_out {
                        // visited or unreachable in practice: never pick it again
                        sim.sets.mark_inaccessible(g.key);
                        drop_goal = true;
                    } else if !sim.frontiers.contains(&g.key) {
                        drop_goal = true;
                    }
                }
                GoalKind::Home => {}
            }
        }
        if drop_goal {
            goal = None;
            if phase == MissionPhase::Repositioning {
                phase = MissionPhase::Exploring;
            }
        }

        // replan an existing goal against map changes and vehicle motion
        if let (Some(g), Some(s)) = (goal.as_mut(), start) {
            if s != g.start || !cost_changed.is_empty() {
                let out = match g.planner.replan_on_update(&sim.grid, s, &cost_changed) {
                    Ok(o) => Some(o),
                    Err(_) => None,
                };
                let out = match out {
                    Some(o) => o,
                    None => match sim.plan(s, g.key) {
                        Some((p, path)) => {
                            g.planner = p;
                            PlanOutcome::Path(path)
                        }
                        None => PlanOutcome::Inaccessible,
                    },
                };
                g.start = s;
                match out {
                    PlanOutcome::Path(p) => {
                        if p.keys != g.path.keys {
                            g.path = p;
                            g.waypoints.reset();
                        }
                    }
                    PlanOutcome::Inaccessible => {
                        if g.kind != GoalKind::Home {
                            sim.sets.mark_inaccessible(g.key);
                        }
                        goal = None;
                        if phase == MissionPhase::Repositioning {
                            phase = MissionPhase::Exploring;
                        }
                    }
                }
            }
        }

        // pick a new goal
        match phase {
            MissionPhase::Exploring | MissionPhase::Repositioning if goal.is_none() => {
                if let Some(s) = start {
                    match sim.select(&pose, v_fwd, s, t, tick, &mut snapshot) {
                        Pick::Goal(g, event) => {
                            phase = if g.kind == GoalKind::Reposition {
                                MissionPhase::Repositioning
                            } else {
                                MissionPhase::Exploring
                            };
                            if let Some(e) = event {
                                report.repositioning_events.push(e);
                            }
                            goal = Some(g);
                            last_progress = t;
                        }
                        Pick::Complete => {
                            // switch right away so the return starts this tick
                            exploration_complete = true;
                            phase = MissionPhase::Homing;
                            homing_now = true;
                            report.homing = Some(HomingTrigger {
                                t,
                                tick,
                                reason: "complete".to_string(),
                                coverage: sim.coverage(),
                            });
                        }
                        Pick::Hold => {}
                    }
                }
            }
            _ => {}
        }
        if phase == MissionPhase::Homing {
            if x.p.distance(&spawn.position) <= cfg.home_radius {
                phase = MissionPhase::Done;
                report.outcome = if exploration_complete {
                    MissionOutcome::Complete
                } else {
                    MissionOutcome::BudgetHomed
                };
            } else if goal.is_none() {
                let home = sim.map.key_of(spawn.position);
                match start.and_then(|s| sim.new_goal(home, GoalKind::Home, s, x.p, t)) {
                    Some(g) => goal = Some(g),
                    None => {
                        report.stuck_reason = Some("no known path back to spawn".into());
                        phase = MissionPhase::Done;
                    }
                }
            }
        }
        if phase == MissionPhase::Done {
            let volume = sim.map.explored_volume();
            record_tick(&mut report, cfg, world, tick, t, &x, yaw, phase, volume, &u, 0, prev_fwd_speed);
            observer.on_tick(&TickView {
                tick,
                t,
                state: &x,
                yaw,
                phase,
                input: &u,
                solve_iters: 0,
                reference,
                map: &sim.map,
                world,
                selection: snapshot.as_ref(),
                path: goal.as_ref().map(|g| &g.path),
                homing_triggered: homing_now,
            });
            break;
        }
        if t > deadline {
            report.stuck_reason = Some("homing did not finish in time".into());
            break;
        }
        if t - last_progress > cfg.stuck_timeout_s {
            report.stuck_reason = Some(format!("no progress for {} s", cfg.stuck_timeout_s));
            break;
        }

        // reference: next waypoint through the potential field
        let waypoint = match goal.as_mut() {
            Some(g) => g
                .waypoints
                .next(&g.path.waypoints, x.p, cfg.lookahead)
                .unwrap_or_else(|| match g.kind {
                    GoalKind::Home => spawn.position,
                    _ => g.key.center(res),
                }),
            None => x.p,
        };
        let mut seen = FxHashSet::default();
        let mut near = Vec::new();
        for p in &cloud.points {
            let rel = p.rotate_z(yaw);
            if rel.norm() <= cfg.apf.r_f && seen.insert(sim.map.key_of(x.p + rel)) {
                near.push(rel);
            }
        }
        let target = compute_reference(waypoint, x.p, &near, &mut force, &cfg.apf);
        reference = limit_reference(reference, target, cfg.v_max * dt);

        // control
        let sol = nmpc.solve(&x, &McqState::hover_at(reference), &u, &cfg.model)?;
        u = sol.first();
        let to_wp = waypoint - x.p;
        if to_wp.horizontal_norm() > 0.2 {
            yaw = slew(yaw, to_wp.y.atan2(to_wp.x), cfg.yaw_rate_max * dt);
        }

        // metrics for this tick, then advance the plant
        let volume = sim.map.explored_volume();
        prev_fwd_speed = record_tick(&mut report, cfg, world, tick, t, &x, yaw, phase, volume, &u, sol.iterations, prev_fwd_speed);
        observer.on_tick(&TickView {
            tick,
            t,
            state: &x,
            yaw,
            phase,
            input: &u,
            solve_iters: sol.iterations,
            reference,
            map: &sim.map,
            world,
            selection: snapshot.as_ref(),
            path: goal.as_ref().map(|g| &g.path),
            homing_triggered: homing_now,
        });

        let before = x.p;
        for _ in 0..cfg.physics_substeps {
            x = dynamics_step(&x, &u, &cfg.model, substep);
        }
        report.distance_travelled += x.p.distance(&before);
        v_fwd = forward_direction(before, x.p, v_fwd);
    }

    report.final_coverage = sim.coverage();
    report.final_volume = sim.map.explored_volume();
    observer.on_finish(&sim.map);
    Ok(report)
}

/// Appends the metrics of one tick and returns its forward speed.
#[allow(clippy::too_many_arguments)]
fn record_tick(
    report: &mut MissionReport,
    cfg: &MissionConfig,
    world: &WorldGeometry,
    tick: usize,
    t: f64,
    x: &McqState<f64>,
    yaw: f64,
    phase: MissionPhase,
    volume: f64,
    u: &ControlInput<f64>,
    solve_iters: usize,
    prev_fwd_speed: f64,
) -> f64 {
    let spawn = Vec3::from_array(report.spawn);
    let speed = x.v.norm();
    let fwd_speed = x.v.dot(&Pose::new(x.p, yaw).heading());
    let clearance = world.clearance(x.p, 2.0);
    report.min_clearance = report.min_clearance.min(clearance);
    if clearance <= cfg.risk.vehicle_radius {
        report.collision_ticks += 1;
    }
    if speed < 0.05 {
        report.hover_ticks += 1;
    }
    report.max_speed = report.max_speed.max(speed);
    report.ticks.push(TickRecord {
        t,
        position: x.p.to_array(),
        velocity: x.v.to_array(),
        yaw,
        phase,
        volume,
        base_distance: x.p.distance(&spawn),
        forward_velocity: fwd_speed,
        acceleration: if tick == 0 { 0.0 } else { (fwd_speed - prev_fwd_speed) / report.dt },
        clearance,
        thrust: u.thrust,
        phi: x.phi,
        theta: x.theta,
        phi_ref: u.phi_ref,
        theta_ref: u.theta_ref,
        solve_iters,
    });
    fwd_speed
}
