//! Risk-aware path planning on the occupancy grid.

mod cost;
mod dstar;
mod risk;

pub use cost::{Dist, PathCost};
pub use dstar::{plan, DStarLite, PlanOutcome, PlannerConfig};
pub use risk::{assign_cost, RiskConfig, RiskGrid};

use crate::geom::Vec3;
use crate::map::VoxelKey;

/// Voxel path from the start voxel to the goal voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedPath<C> {
    pub keys: Vec<VoxelKey>,
    pub waypoints: Vec<Vec3<f64>>,
    pub voxel_costs: Vec<C>,
    /// Sum of voxel costs over the whole path, start included.
    pub total_cost: C,
}

impl<C: PathCost> PlannedPath<C> {
    pub fn from_keys(keys: Vec<VoxelKey>, grid: &RiskGrid<C>) -> Self {
        let res = grid.resolution();
        let voxel_costs: Vec<C> = keys.iter().map(|&k| grid.cost(k)).collect();
        let total_cost = voxel_costs.iter().fold(C::zero(), |a, &c| a + c);
        Self {
            waypoints: keys.iter().map(|k| k.center(res)).collect(),
            keys,
            voxel_costs,
            total_cost,
        }
    }

    pub fn goal(&self) -> VoxelKey {
        *self.keys.last().expect("path is never empty")
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

/// Index of the first waypoint at or after `from` that `position` has not
/// reached yet. A waypoint counts as reached within `reach` metres or once
/// the vehicle is at least as close to the following one.
pub fn next_waypoint(waypoints: &[Vec3<f64>], position: Vec3<f64>, from: usize, reach: f64) -> Option<usize> {
    let mut i = from;
    while i < waypoints.len() {
        let d = position.distance(&waypoints[i]);
        let passed = waypoints
            .get(i + 1)
            .is_some_and(|n| position.distance(n) <= d);
        if d <= reach || passed {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Monotone cursor over a path's waypoints.
#[derive(Clone, Debug, Default)]
pub struct WaypointTracker {
    index: usize,
}

impl WaypointTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn reset(&mut self) {
        self.index = 0;
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Next waypoint to steer to, `None` once the goal is reached.
    pub fn next(&mut self, waypoints: &[Vec3<f64>], position: Vec3<f64>, reach: f64) -> Option<Vec3<f64>> {
        match next_waypoint(waypoints, position, self.index, reach) {
            Some(i) => {
                self.index = i;
                Some(waypoints[i])
            }
            None => {
                self.index = waypoints.len();
                None
            }
        }
    }
}
