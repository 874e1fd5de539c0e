use serde::{Deserialize, Serialize};

use crate::map::VoxelKey;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionPhase {
    Exploring,
    Repositioning,
    Homing,
    Done,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionOutcome {
    /// Everything reachable was explored and the vehicle returned home.
    Complete,
    /// The budget ran out and the vehicle returned home.
    BudgetHomed,
    Stuck,
}

impl MissionOutcome {
    pub fn is_success(self) -> bool {
        !matches!(self, MissionOutcome::Stuck)
    }
}

/// One control tick.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub t: f64,
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    pub yaw: f64,
    pub phase: MissionPhase,
    /// Known map volume (m³).
    pub volume: f64,
    /// Straight-line distance from spawn (m).
    pub base_distance: f64,
    /// Velocity projected on the heading; negative when flying backwards.
    pub forward_velocity: f64,
    /// Change of the forward velocity per second.
    pub acceleration: f64,
    /// Distance to the nearest solid voxel centre, infinite if none is near.
    pub clearance: f64,
    pub thrust: f64,
    pub phi: f64,
    pub theta: f64,
    pub phi_ref: f64,
    pub theta_ref: f64,
    pub solve_iters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepositionEvent {
    pub t: f64,
    pub tick: usize,
    pub position: [f64; 3],
    pub goal: VoxelKey,
    /// Size of D when the event fired; always zero.
    pub direct_count: usize,
    /// Candidates in I and the global leftovers.
    pub candidate_count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomingTrigger {
    pub t: f64,
    pub tick: usize,
    /// `budget` or `complete`.
    pub reason: String,
    /// Fraction of reachable free voxels known at the trigger.
    pub coverage: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionReport {
    pub seed: u64,
    pub outcome: MissionOutcome,
    /// Diagnostic for a Stuck outcome.
    pub stuck_reason: Option<String>,
    pub dt: f64,
    pub spawn: [f64; 3],
    pub ticks: Vec<TickRecord>,
    pub repositioning_events: Vec<RepositionEvent>,
    pub homing: Option<HomingTrigger>,
    /// Ground-truth free voxels reachable from spawn.
    pub reachable_voxels: usize,
    /// Fraction of those known when the mission ended.
    pub final_coverage: f64,
    pub final_volume: f64,
    pub distance_travelled: f64,
    pub min_clearance: f64,
    pub collision_ticks: usize,
    pub hover_ticks: usize,
    pub max_speed: f64,
}

impl MissionReport {
    pub fn volume_series(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ticks.iter().map(|r| (r.t, r.volume))
    }

    pub fn base_distance_series(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ticks.iter().map(|r| (r.t, r.base_distance))
    }

    pub fn velocity_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.ticks.iter().map(|r| r.forward_velocity)
    }

    pub fn accel_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.ticks.iter().map(|r| r.acceleration)
    }

    pub fn hover_fraction(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        self.hover_ticks as f64 / self.ticks.len() as f64
    }

    pub fn duration(&self) -> f64 {
        self.ticks.last().map_or(0.0, |r| r.t + self.dt)
    }

    pub fn mean_speed(&self) -> f64 {
        if self.ticks.is_empty() {
            return 0.0;
        }
        let s: f64 = self
            .ticks
            .iter()
            .map(|r| (r.velocity[0].powi(2) + r.velocity[1].powi(2) + r.velocity[2].powi(2)).sqrt())
            .sum();
        s / self.ticks.len() as f64
    }
}
