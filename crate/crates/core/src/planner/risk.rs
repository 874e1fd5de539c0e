//! Per-voxel traversal costs with a proximity risk layer.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::cost::PathCost;
use crate::error::{invalid, Result};
use crate::map::{OccupancyView, UpdatedCells, VoxelKey, VoxelState, NEIGHBOR_OFFSETS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RiskConfig {
    /// Cost of an Occupied voxel; voxels at or above it are not traversable.
    pub c_occupied: f64,
    pub c_unknown: f64,
    /// Risk increment constant: `c_risk / (d + 1)` is added within `r_risk`.
    pub c_risk: f64,
    /// Risk range in voxels.
    pub r_risk: u32,
    /// Vehicle radius (m); obstacles are inflated by `ceil(radius / res)` voxels.
    pub vehicle_radius: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        Self {
            c_occupied: 1e6,
            c_unknown: 2.0,
            c_risk: 4.0,
            r_risk: 3,
            vehicle_radius: 0.3,
        }
    }
}

impl RiskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_unknown >= 1.0) {
            return Err(invalid("c_unknown", "must be >= 1"));
        }
        if !(self.c_risk > 0.0) {
            return Err(invalid("c_risk", "must be positive"));
        }
        if self.r_risk < 1 {
            return Err(invalid("r_risk", "must be >= 1"));
        }
        if !(self.c_occupied > 10.0 * (self.c_unknown + self.c_risk)) {
            return Err(invalid("c_occupied", "must be much larger than c_unknown + c_risk"));
        }
        if !(self.vehicle_radius >= 0.0) {
            return Err(invalid("vehicle_radius", "must be non-negative"));
        }
        Ok(())
    }

    pub fn inflation_voxels(&self, resolution: f64) -> u32 {
        (self.vehicle_radius / resolution - 1e-9).ceil().max(0.0) as u32
    }
}

/// Traversal cost of a voxel given its state and the Chebyshev distance `d`
/// (in voxels) to the nearest Occupied voxel, `None` if none is known nearby.
/// The risk term is added once, to non-occupied voxels only.
pub fn assign_cost<C: PathCost>(state: VoxelState, d: Option<u32>, cfg: &RiskConfig) -> C {
    let base = match state {
        VoxelState::Occupied => return C::from_f64(cfg.c_occupied),
        VoxelState::Unknown => C::from_f64(cfg.c_unknown),
        VoxelState::Free => C::from_int(1),
    };
    match d {
        Some(d) if d < cfg.r_risk => base + C::from_f64(cfg.c_risk).div_int(d as i64 + 1),
        _ => base,
    }
}

const FAR: u8 = u8::MAX;

/// Dense cost grid over a fixed voxel box, mirrored from an occupancy map.
#[derive(Clone, Debug)]
pub struct RiskGrid<C> {
    cfg: RiskConfig,
    resolution: f64,
    lo: VoxelKey,
    dims: [usize; 3],
    inflation: u32,
    blocked_cost: C,
    state: Vec<VoxelState>,
    /// Chebyshev distance to the nearest Occupied voxel, capped at `FAR`.
    dist: Vec<u8>,
    cost: Vec<C>,
}

impl<C: PathCost> RiskGrid<C> {
    /// Builds the grid over the inclusive box `lo..=hi` from a map view.
    pub fn from_view<M: OccupancyView + ?Sized>(
        view: &M,
        lo: VoxelKey,
        hi: VoxelKey,
        cfg: RiskConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if hi.i < lo.i || hi.j < lo.j || hi.k < lo.k {
            return Err(invalid("bounds", "empty grid box"));
        }
        let dims = [
            (hi.i - lo.i + 1) as usize,
            (hi.j - lo.j + 1) as usize,
            (hi.k - lo.k + 1) as usize,
        ];
        let n = dims[0] * dims[1] * dims[2];
        let resolution = view.resolution();
        let mut g = Self {
            inflation: cfg.inflation_voxels(resolution),
            blocked_cost: C::from_f64(cfg.c_occupied),
            cfg,
            resolution,
            lo,
            dims,
            state: vec![VoxelState::Unknown; n],
            dist: vec![FAR; n],
            cost: vec![C::zero(); n],
        };
        for idx in 0..n {
            g.state[idx] = view.state(g.key_at(idx));
        }
        g.rebuild_distances();
        for idx in 0..n {
            g.cost[idx] = g.compute_cost(idx);
        }
        Ok(g)
    }

    pub fn config(&self) -> &RiskConfig {
        &self.cfg
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    /// Inclusive box covered by the grid.
    pub fn bounds(&self) -> (VoxelKey, VoxelKey) {
        let hi = VoxelKey::new(
            self.lo.i + self.dims[0] as i32 - 1,
            self.lo.j + self.dims[1] as i32 - 1,
            self.lo.k + self.dims[2] as i32 - 1,
        );
        (self.lo, hi)
    }

    pub fn index(&self, key: VoxelKey) -> Option<usize> {
        let o = [key.i - self.lo.i, key.j - self.lo.j, key.k - self.lo.k];
        if (0..3).any(|a| o[a] < 0 || o[a] as usize >= self.dims[a]) {
            return None;
        }
        Some((o[2] as usize * self.dims[1] + o[1] as usize) * self.dims[0] + o[0] as usize)
    }

    fn key_at(&self, idx: usize) -> VoxelKey {
        let i = idx % self.dims[0];
        let j = (idx / self.dims[0]) % self.dims[1];
        let k = idx / (self.dims[0] * self.dims[1]);
        VoxelKey::new(self.lo.i + i as i32, self.lo.j + j as i32, self.lo.k + k as i32)
    }

    pub fn contains(&self, key: VoxelKey) -> bool {
        self.index(key).is_some()
    }

    pub fn state(&self, key: VoxelKey) -> VoxelState {
        self.index(key).map_or(VoxelState::Unknown, |i| self.state[i])
    }

    /// Distance in voxels to the nearest Occupied voxel, if within the
    /// tracked range.
    pub fn occupied_distance(&self, key: VoxelKey) -> Option<u32> {
        self.index(key)
            .map(|i| self.dist[i])
            .filter(|&d| d != FAR)
            .map(u32::from)
    }

    /// Cost of entering `key`; voxels outside the grid cost `c_occupied`.
    pub fn cost(&self, key: VoxelKey) -> C {
        self.index(key).map_or(self.blocked_cost, |i| self.cost[i])
    }

    pub fn traversable(&self, key: VoxelKey) -> bool {
        self.index(key)
            .is_some_and(|i| self.cost[i].total_cmp(&self.blocked_cost).is_lt())
    }

    /// Whether `key` carries a risk term.
    pub fn has_risk(&self, key: VoxelKey) -> bool {
        self.index(key).is_some_and(|i| {
            self.state[i] != VoxelState::Occupied && (self.dist[i] as u32) < self.cfg.r_risk
        })
    }

    fn reach(&self) -> u32 {
        self.cfg.r_risk.max(self.inflation + 1)
    }

    fn compute_cost(&self, idx: usize) -> C {
        let d = self.dist[idx];
        let state = self.state[idx];
        if state != VoxelState::Occupied && d != FAR && (d as u32) <= self.inflation {
            return self.blocked_cost;
        }
        assign_cost(state, (d != FAR).then_some(d as u32), &self.cfg)
    }

    /// Bounded multi-source BFS from every Occupied voxel.
    fn rebuild_distances(&mut self) {
        let reach = self.reach();
        self.dist.iter_mut().for_each(|d| *d = FAR);
        let mut queue = VecDeque::new();
        for (idx, s) in self.state.iter().enumerate() {
            if *s == VoxelState::Occupied {
                self.dist[idx] = 0;
                queue.push_back(idx);
            }
        }
        while let Some(idx) = queue.pop_front() {
            let d = self.dist[idx];
            if d as u32 >= reach {
                continue;
            }
            let key = self.key_at(idx);
            for [a, b, c] in NEIGHBOR_OFFSETS {
                if let Some(n) = self.index(key.offset(a, b, c)) {
                    if self.dist[n] == FAR || self.dist[n] > d + 1 {
                        self.dist[n] = d + 1;
                        queue.push_back(n);
                    }
                }
            }
        }
    }

    fn nearest_occupied(&self, key: VoxelKey, reach: i32) -> u8 {
        for r in 0..=reach {
            for a in -r..=r {
                for b in -r..=r {
                    for c in -r..=r {
                        if a.abs() != r && b.abs() != r && c.abs() != r {
                            continue;
                        }
                        if let Some(n) = self.index(key.offset(a, b, c)) {
                            if self.state[n] == VoxelState::Occupied {
                                return r as u8;
                            }
                        }
                    }
                }
            }
        }
        FAR
    }

    /// Mirrors the changed map cells and returns the voxels whose cost changed.
    pub fn apply_updates<M: OccupancyView + ?Sized>(&mut self, view: &M, changed: &UpdatedCells) -> Vec<VoxelKey> {
        let reach = self.reach() as i32;
        let mut recompute: Vec<usize> = Vec::new();
        let mut redistance: Vec<usize> = Vec::new();
        for &key in changed.iter() {
            let Some(idx) = self.index(key) else { continue };
            let new = view.state(key);
            let old = std::mem::replace(&mut self.state[idx], new);
            if old == new {
                continue;
            }
            recompute.push(idx);
            if (old == VoxelState::Occupied) != (new == VoxelState::Occupied) {
                for a in -reach..=reach {
                    for b in -reach..=reach {
                        for c in -reach..=reach {
                            if let Some(n) = self.index(key.offset(a, b, c)) {
                                redistance.push(n);
                            }
                        }
                    }
                }
            }
        }
        redistance.sort_unstable();
        redistance.dedup();
        for &idx in &redistance {
            self.dist[idx] = self.nearest_occupied(self.key_at(idx), reach);
        }
        recompute.extend(redistance);
        recompute.sort_unstable();
        recompute.dedup();
        let mut out = Vec::new();
        for idx in recompute {
            let c = self.compute_cost(idx);
            if c != self.cost[idx] {
                self.cost[idx] = c;
                out.push(self.key_at(idx));
            }
        }
        out
    }
}
