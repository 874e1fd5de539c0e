//! Frontier detection, two-set classification and candidate selection.
//!
//! A frontier is a Free voxel that borders Unknown space, has no Occupied
//! voxel among its 26 neighbours, has at least `n_req` Unknown-or-Free
//! neighbours and lies outside the known-space sphere around the vehicle.
//! Frontiers inside the forward acceptance cone and height band form the
//! directly accessible set D; every other valid frontier goes to the
//! indirectly accessible set I.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{Pose, Vec3};
use crate::map::{neighbors26, OccupancyView, UpdatedCells, VoxelKey, VoxelState};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplorationConfig {
    /// Minimum number of Unknown-or-Free neighbours.
    pub n_req: u32,
    /// Radius of the sphere around the vehicle treated as already known (m).
    pub r_known: f64,
    /// Horizontal acceptance field of view for D (rad).
    pub theta_fov: f64,
    /// Maximum height difference for D (m).
    pub h_r: f64,
    pub w_alpha: f64,
    pub w_h: f64,
    pub w_d: f64,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        Self {
            n_req: 5,
            r_known: 2.0,
            theta_fov: std::f64::consts::FRAC_PI_2,
            h_r: 1.5,
            w_alpha: 1.0,
            w_h: 1.0,
            w_d: 1.0,
        }
    }
}

impl ExplorationConfig {
    pub fn validate(&self, sensor_range: f64) -> Result<()> {
        if !(1..=26).contains(&self.n_req) {
            return Err(invalid("n_req", "must be in [1, 26]"));
        }
        if !(self.r_known >= 0.0 && self.r_known < sensor_range) {
            return Err(invalid("r_known", "must be non-negative and below the sensor range"));
        }
        if !(self.theta_fov > 0.0 && self.theta_fov <= 2.0 * std::f64::consts::PI + 1e-12) {
            return Err(invalid("theta_fov", "must be in (0, 2pi]"));
        }
        if !(self.h_r >= 0.0) {
            return Err(invalid("h_r", "must be non-negative"));
        }
        let w = [self.w_alpha, self.w_h, self.w_d];
        if w.iter().any(|&x| !(x >= 0.0)) || w.iter().all(|&x| x == 0.0) {
            return Err(invalid("w_alpha", "weights must be non-negative and not all zero"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frontier {
    pub key: VoxelKey,
    /// Voxel centre in the world frame.
    pub position: Vec3<f64>,
    /// Angle between the frontier vector and the direction of travel (rad).
    pub alpha: f64,
    pub dist: f64,
    /// Frontier height minus vehicle height (m).
    pub dh: f64,
}

impl Frontier {
    /// Evaluates a frontier voxel relative to the vehicle. A frontier at the
    /// vehicle position gets `alpha = 0`.
    pub fn evaluate(key: VoxelKey, resolution: f64, vehicle: Vec3<f64>, v_fwd: Vec3<f64>) -> Self {
        let position = key.center(resolution);
        let rel = position - vehicle;
        Self {
            key,
            position,
            alpha: frontier_angle(rel, v_fwd).unwrap_or(0.0),
            dist: rel.norm(),
            dh: rel.z,
        }
    }
}

/// Direction of motion from two consecutive positions. Displacements shorter
/// than 1e-6 m keep the previous direction.
pub fn forward_direction<T: Real>(prev: Vec3<T>, now: Vec3<T>, previous_fwd: Vec3<T>) -> Vec3<T> {
    (now - prev).try_normalize(T::lit(1e-6)).unwrap_or(previous_fwd)
}

/// Angle in `[0, pi]` between a frontier vector and the forward direction.
pub fn frontier_angle<T: Real>(p_f: Vec3<T>, v_fwd: Vec3<T>) -> Result<T> {
    let denom = p_f.norm() * v_fwd.norm();
    if !(denom > T::zero()) {
        return Err(Error::ZeroFrontierVector);
    }
    Ok((p_f.dot(&v_fwd) / denom).clamp_to(-T::one(), T::one()).acos())
}

/// Weighted repositioning cost `W_alpha*alpha + W_h*|dH| + W_d*d`.
pub fn weighted_cost<T: Real>(alpha: T, dh: T, dist: T, w_alpha: T, w_h: T, w_d: T) -> T {
    w_alpha * alpha + w_h * dh.abs() + w_d * dist
}

pub fn repositioning_cost(f: &Frontier, cfg: &ExplorationConfig) -> f64 {
    weighted_cost(f.alpha, f.dh, f.dist, cfg.w_alpha, cfg.w_h, cfg.w_d)
}

/// Frontier rules that do not depend on the vehicle position.
pub fn is_frontier_voxel<M: OccupancyView + ?Sized>(map: &M, key: VoxelKey, n_req: u32) -> bool {
    if map.state(key) != VoxelState::Free {
        return false;
    }
    let mut count = 0;
    let mut borders_unknown = false;
    for nb in neighbors26(key) {
        match map.state(nb) {
            VoxelState::Occupied => return false,
            VoxelState::Unknown => {
                borders_unknown = true;
                count += 1;
            }
            VoxelState::Free => count += 1,
        }
    }
    borders_unknown && count >= n_req
}

fn outside_known_sphere(key: VoxelKey, resolution: f64, vehicle: Vec3<f64>, r_known: f64) -> bool {
    key.center(resolution).distance(&vehicle) >= r_known
}

/// Frontier voxels among the cells changed by the last integration.
pub fn detect_frontiers<M: OccupancyView + ?Sized>(
    map: &M,
    cfg: &ExplorationConfig,
    vehicle: Vec3<f64>,
    changed: &UpdatedCells,
) -> Vec<VoxelKey> {
    let res = map.resolution();
    changed
        .iter()
        .copied()
        .filter(|&k| outside_known_sphere(k, res, vehicle, cfg.r_known))
        .filter(|&k| is_frontier_voxel(map, k, cfg.n_req))
        .collect()
}

/// Persistent frontier bookkeeping. Each update re-evaluates the changed
/// cells and their neighbourhoods, so stale frontiers are dropped as well as
/// new ones added.
#[derive(Clone, Debug, Default)]
pub struct FrontierTracker {
    n_req: u32,
    voxels: BTreeSet<VoxelKey>,
}

impl FrontierTracker {
    pub fn new(n_req: u32) -> Self {
        Self {
            n_req,
            voxels: BTreeSet::new(),
        }
    }

    pub fn update<M: OccupancyView + ?Sized>(&mut self, map: &M, changed: &UpdatedCells) {
        let mut touched: Vec<VoxelKey> = Vec::with_capacity(changed.len() * 4);
        for &k in changed.iter() {
            touched.push(k);
            touched.extend(neighbors26(k));
        }
        touched.sort_unstable();
        touched.dedup();
        for k in touched {
            if is_frontier_voxel(map, k, self.n_req) {
                self.voxels.insert(k);
            } else {
                self.voxels.remove(&k);
            }
        }
    }

    pub fn contains(&self, key: &VoxelKey) -> bool {
        self.voxels.contains(key)
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    /// Position-independent frontier voxels in key order.
    pub fn voxels(&self) -> impl Iterator<Item = VoxelKey> + '_ {
        self.voxels.iter().copied()
    }

    /// Current frontier voxels outside the known sphere around `vehicle`.
    pub fn frontier_keys(&self, resolution: f64, vehicle: Vec3<f64>, r_known: f64) -> Vec<VoxelKey> {
        self.voxels
            .iter()
            .copied()
            .filter(|&k| outside_known_sphere(k, resolution, vehicle, r_known))
            .collect()
    }

    /// Current frontiers evaluated against the vehicle position and heading.
    pub fn frontiers(
        &self,
        resolution: f64,
        vehicle: Vec3<f64>,
        v_fwd: Vec3<f64>,
        r_known: f64,
    ) -> Vec<Frontier> {
        self.frontier_keys(resolution, vehicle, r_known)
            .into_iter()
            .map(|k| Frontier::evaluate(k, resolution, vehicle, v_fwd))
            .collect()
    }
}

/// The directly accessible set, the indirectly accessible set and the
/// global bookkeeping that persists between ticks.
#[derive(Clone, Debug, Default)]
pub struct FrontierSets {
    pub direct: Vec<Frontier>,
    pub indirect: Vec<Frontier>,
    pub global_leftover: BTreeMap<VoxelKey, Frontier>,
    pub inaccessible: BTreeSet<VoxelKey>,
}

fn directly_accessible(f: &Frontier, cfg: &ExplorationConfig) -> bool {
    f.alpha <= cfg.theta_fov / 2.0 && f.dh.abs() <= cfg.h_r
}

/// Splits frontiers into (D, I); frontiers listed in `inaccessible` are dropped.
pub fn classify_frontiers(
    frontiers: &[Frontier],
    cfg: &ExplorationConfig,
    inaccessible: &BTreeSet<VoxelKey>,
) -> (Vec<Frontier>, Vec<Frontier>) {
    frontiers
        .iter()
        .filter(|f| !inaccessible.contains(&f.key))
        .partition(|f| directly_accessible(f, cfg))
}

/// Result of candidate selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    /// Minimum-angle frontier from D.
    Direct(Frontier),
    /// Minimum-cost frontier from I or the global leftovers (D was empty).
    Reposition(Frontier),
    ExplorationComplete,
}

impl Selection {
    pub fn frontier(&self) -> Option<&Frontier> {
        match self {
            Selection::Direct(f) | Selection::Reposition(f) => Some(f),
            Selection::ExplorationComplete => None,
        }
    }
}

fn argmin_by(items: impl Iterator<Item = Frontier>, score: impl Fn(&Frontier) -> f64) -> Option<Frontier> {
    items.min_by(|a, b| {
        score(a)
            .total_cmp(&score(b))
            .then(a.dist.total_cmp(&b.dist))
            .then(a.key.cmp(&b.key))
    })
}

impl FrontierSets {
    /// Re-classifies the current frontiers; I-frontiers are also recorded as
    /// global leftovers.
    pub fn classify(&mut self, frontiers: &[Frontier], cfg: &ExplorationConfig) {
        let (d, i) = classify_frontiers(frontiers, cfg, &self.inaccessible);
        for f in &i {
            self.global_leftover.insert(f.key, *f);
        }
        for f in &d {
            self.global_leftover.remove(&f.key);
        }
        self.direct = d;
        self.indirect = i;
    }

    /// Refreshes leftover frontiers against the current pose: ones that are
    /// no longer frontier voxels are dropped, ones now inside the acceptance
    /// cone and height band move into D.
    pub fn merge_global_frontiers<M: OccupancyView + ?Sized>(
        &mut self,
        map: &M,
        pose: &Pose<f64>,
        v_fwd: Vec3<f64>,
        cfg: &ExplorationConfig,
    ) {
        let res = map.resolution();
        let mut merged = Vec::new();
        self.global_leftover.retain(|&k, f| {
            if !is_frontier_voxel(map, k, cfg.n_req) || self.inaccessible.contains(&k) {
                return false;
            }
            *f = Frontier::evaluate(k, res, pose.position, v_fwd);
            if f.dist >= cfg.r_known && directly_accessible(f, cfg) {
                merged.push(*f);
                return false;
            }
            true
        });
        for f in merged {
            if !self.direct.iter().any(|d| d.key == f.key) {
                self.direct.push(f);
            }
        }
        self.indirect.retain(|f| self.global_leftover.contains_key(&f.key));
    }

    pub fn select_candidate(&self, cfg: &ExplorationConfig) -> Selection {
        let usable = |f: &&Frontier| !self.inaccessible.contains(&f.key);
        if let Some(f) = argmin_by(self.direct.iter().filter(usable).copied(), |f| f.alpha) {
            return Selection::Direct(f);
        }
        let pool = self
            .indirect
            .iter()
            .chain(self.global_leftover.values().filter(|f| f.dist >= cfg.r_known))
            .filter(usable)
            .copied();
        match argmin_by(pool, |f| repositioning_cost(f, cfg)) {
            Some(f) => Selection::Reposition(f),
            None => Selection::ExplorationComplete,
        }
    }

    pub fn mark_inaccessible(&mut self, key: VoxelKey) {
        self.direct.retain(|f| f.key != key);
        self.indirect.retain(|f| f.key != key);
        self.global_leftover.remove(&key);
        self.inaccessible.insert(key);
    }

    /// Makes a previously rejected frontier eligible again.
    pub fn clear_inaccessible(&mut self, key: &VoxelKey) -> bool {
        self.inaccessible.remove(key)
    }

    pub fn is_empty(&self) -> bool {
        self.direct.is_empty() && self.indirect.is_empty() && self.global_leftover.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{OccupancyConfig, OccupancyMap};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn frontier(key: (i32, i32, i32), alpha: f64, dist: f64, dh: f64) -> Frontier {
        let key = VoxelKey::new(key.0, key.1, key.2);
        Frontier {
            key,
            position: key.center(0.5),
            alpha,
            dist,
            dh,
        }
    }

    #[test]
    fn forward_direction_cases() {
        let prev_fwd = Vec3::new(0.0, 1.0, 0.0);
        let d = forward_direction(Vec3::zero(), Vec3::new(2.0, 0.0, 0.0), prev_fwd);
        assert_eq!(d, Vec3::unit_x());
        let d = forward_direction(Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0, 1.0, 1.0), prev_fwd);
        assert_eq!(d, prev_fwd);
        let d = forward_direction(Vec3::zero(), Vec3::new(1.0, 1.0, 0.0), prev_fwd);
        let s = 1.0 / 2f64.sqrt();
        assert!((d.x - s).abs() < 1e-15 && (d.y - s).abs() < 1e-15 && d.z == 0.0);
    }

    #[test]
    fn angle_cases() {
        let fwd = Vec3::unit_x();
        assert_eq!(frontier_angle(Vec3::new(3.0, 0.0, 0.0), fwd).unwrap(), 0.0);
        assert!((frontier_angle(Vec3::new(-3.0, 0.0, 0.0), fwd).unwrap() - PI).abs() < 1e-12);
        assert!((frontier_angle(Vec3::new(0.0, 2.0, 0.0), fwd).unwrap() - FRAC_PI_2).abs() < 1e-12);
        assert!(frontier_angle(Vec3::zero(), fwd).is_err());
        // nearly parallel vectors whose cosine rounds above one stay finite
        let a = frontier_angle(Vec3::new(1e8, 1e-8, 0.0), fwd).unwrap();
        assert!(a.is_finite() && a >= 0.0);
    }

    #[test]
    fn angle_generic_f32() {
        let a: f32 = frontier_angle(Vec3::new(0.0f32, 1.0, 0.0), Vec3::unit_x()).unwrap();
        assert!((a - std::f32::consts::FRAC_PI_2).abs() < 1e-6);
    }

    #[test]
    fn cost_hand_evaluation() {
        let cfg = ExplorationConfig::default();
        let f = frontier((0, 0, 0), 0.2, 5.0, 0.0);
        assert!((repositioning_cost(&f, &cfg) - 5.2).abs() < 1e-12);
        let z = frontier((0, 0, 0), 0.0, 0.0, 0.0);
        assert_eq!(repositioning_cost(&z, &cfg), 0.0);
        // |dH| enters with its magnitude
        let below = frontier((0, 0, 0), 0.0, 0.0, -2.0);
        assert_eq!(repositioning_cost(&below, &cfg), 2.0);
    }

    fn free_map_with(occupied: &[VoxelKey], free: &[VoxelKey]) -> OccupancyMap {
        let mut m = OccupancyMap::new(OccupancyConfig::default()).unwrap();
        for &k in free {
            m.observe(k, false);
        }
        for &k in occupied {
            m.observe(k, true);
        }
        m
    }

    #[test]
    fn occupied_neighbour_disqualifies() {
        let k = VoxelKey::new(10, 0, 0);
        let m = free_map_with(&[k.offset(1, 1, 0)], &[k]);
        let cfg = ExplorationConfig::default();
        let changed = UpdatedCells::from_keys(vec![k]);
        assert!(detect_frontiers(&m, &cfg, Vec3::zero(), &changed).is_empty());
        // without the occupied neighbour it qualifies
        let m = free_map_with(&[], &[k]);
        assert_eq!(detect_frontiers(&m, &cfg, Vec3::zero(), &changed), vec![k]);
    }

    #[test]
    fn known_sphere_excludes_nearby_cells() {
        let k = VoxelKey::new(2, 0, 0);
        let m = free_map_with(&[], &[k]);
        let cfg = ExplorationConfig::default();
        let changed = UpdatedCells::from_keys(vec![k]);
        assert!(detect_frontiers(&m, &cfg, Vec3::zero(), &changed).is_empty());
        assert_eq!(detect_frontiers(&m, &cfg, Vec3::new(-5.0, 0.0, 0.0), &changed), vec![k]);
    }

    #[test]
    fn empty_changes_detect_nothing() {
        let m = free_map_with(&[], &[]);
        let cfg = ExplorationConfig::default();
        assert!(detect_frontiers(&m, &cfg, Vec3::zero(), &UpdatedCells::default()).is_empty());
    }

    #[test]
    fn classification_bounds() {
        let cfg = ExplorationConfig::default();
        let none = BTreeSet::new();
        let on_edge = frontier((1, 0, 0), FRAC_PI_4, 4.0, cfg.h_r);
        let too_high = frontier((2, 0, 0), 0.0, 4.0, cfg.h_r + 1e-9);
        let behind = frontier((3, 0, 0), 3.0, 4.0, 0.0);
        let (d, i) = classify_frontiers(&[on_edge, too_high, behind], &cfg, &none);
        assert_eq!(d, vec![on_edge]);
        assert_eq!(i, vec![too_high, behind]);
        let (d, i) = classify_frontiers(&[], &cfg, &none);
        assert!(d.is_empty() && i.is_empty());
    }

    #[test]
    fn selection_prefers_min_alpha_in_d() {
        let cfg = ExplorationConfig::default();
        let mut sets = FrontierSets::default();
        sets.direct = vec![frontier((1, 0, 0), 0.3, 3.0, 0.0), frontier((2, 0, 0), 0.1, 9.0, 0.0)];
        sets.indirect = vec![frontier((3, 0, 0), 2.0, 3.0, 0.0)];
        assert_eq!(sets.select_candidate(&cfg), Selection::Direct(sets.direct[1]));
    }

    #[test]
    fn selection_falls_back_to_cost() {
        let cfg = ExplorationConfig::default();
        let mut sets = FrontierSets::default();
        let a = frontier((1, 0, 0), 0.2, 5.0, 0.0); // cost 5.2
        let b = frontier((2, 0, 0), 2.0, 3.0, -1.0); // cost 6.0
        let c = frontier((3, 0, 0), 1.0, 2.0, 0.0); // cost 3.0
        sets.indirect = vec![a, b, c];
        assert_eq!(sets.select_candidate(&cfg), Selection::Reposition(c));
        assert_eq!(FrontierSets::default().select_candidate(&cfg), Selection::ExplorationComplete);
    }

    #[test]
    fn ties_break_on_distance_then_key() {
        let cfg = ExplorationConfig::default();
        let mut sets = FrontierSets::default();
        sets.direct = vec![
            frontier((5, 0, 0), 0.1, 4.0, 0.0),
            frontier((4, 0, 0), 0.1, 3.0, 0.0),
            frontier((3, 0, 0), 0.1, 3.0, 0.0),
        ];
        assert_eq!(sets.select_candidate(&cfg).frontier().unwrap().key, VoxelKey::new(3, 0, 0));
    }

    #[test]
    fn inaccessible_frontiers_never_selected() {
        let cfg = ExplorationConfig::default();
        let mut sets = FrontierSets::default();
        let a = frontier((1, 0, 0), 0.1, 3.0, 0.0);
        let b = frontier((2, 0, 0), 0.2, 3.0, 0.0);
        let c = frontier((3, 0, 0), 2.5, 3.0, 0.0);
        sets.direct = vec![a, b];
        sets.indirect = vec![c];
        sets.mark_inaccessible(a.key);
        assert_eq!(sets.select_candidate(&cfg), Selection::Direct(b));
        sets.mark_inaccessible(b.key);
        assert_eq!(sets.select_candidate(&cfg), Selection::Reposition(c));
        // absent key: no-op apart from recording it
        let before = sets.direct.len() + sets.indirect.len();
        sets.mark_inaccessible(VoxelKey::new(99, 99, 99));
        assert_eq!(sets.direct.len() + sets.indirect.len(), before);
        // re-classifying does not bring marked keys back
        sets.classify(&[a, b, c], &cfg);
        assert_eq!(sets.select_candidate(&cfg), Selection::Reposition(c));
    }

    #[test]
    fn leftover_ahead_merges_into_d() {
        let cfg = ExplorationConfig::default();
        let k = VoxelKey::new(20, 0, 0);
        let m = free_map_with(&[], &[k]);
        let mut sets = FrontierSets::default();
        let stale = Frontier::evaluate(k, 0.5, Vec3::zero(), Vec3::new(-1.0, 0.0, 0.0));
        sets.classify(&[stale], &cfg);
        assert!(sets.direct.is_empty() && sets.global_leftover.contains_key(&k));
        let pose = Pose::new(Vec3::new(0.25, 0.25, 0.25), 0.0);
        sets.merge_global_frontiers(&m, &pose, Vec3::unit_x(), &cfg);
        assert_eq!(sets.direct.len(), 1);
        assert_eq!(sets.direct[0].key, k);
        assert!(sets.global_leftover.is_empty());
    }

    #[test]
    fn leftover_without_unknown_neighbours_dropped() {
        let cfg = ExplorationConfig::default();
        let k = VoxelKey::new(20, 0, 0);
        let mut free: Vec<_> = neighbors26(k).to_vec();
        free.push(k);
        let m = free_map_with(&[], &free);
        let mut sets = FrontierSets::default();
        sets.global_leftover
            .insert(k, Frontier::evaluate(k, 0.5, Vec3::zero(), Vec3::new(-1.0, 0.0, 0.0)));
        sets.merge_global_frontiers(&m, &Pose::default(), Vec3::new(-1.0, 0.0, 0.0), &cfg);
        assert!(sets.global_leftover.is_empty() && sets.direct.is_empty());
        // identity on empty leftovers
        let mut empty = FrontierSets::default();
        empty.merge_global_frontiers(&m, &Pose::default(), Vec3::unit_x(), &cfg);
        assert!(empty.is_empty());
    }

    #[test]
    fn config_validation() {
        let cfg = ExplorationConfig::default();
        assert!(cfg.validate(15.0).is_ok());
        assert!(cfg.validate(1.0).is_err());
        let bad = ExplorationConfig {
            n_req: 27,
            ..cfg.clone()
        };
        assert!(bad.validate(15.0).is_err());
        let bad = ExplorationConfig {
            w_alpha: 0.0,
            w_h: 0.0,
            w_d: 0.0,
            ..cfg
        };
        assert!(bad.validate(15.0).is_err());
    }
}
