//! Probabilistic occupancy map.
//!
//! Voxels carry log-odds occupancy. Storage is a hash of dense 16³ blocks;
//! callers only see per-voxel state, probability and change sets, the same
//! observable behaviour as an octree at its finest resolution.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{Pose, Vec3, VoxelWalk};
use crate::scalar::Real;
use crate::world::PointCloud;

/// log(p / (1 - p))
pub fn logit<T: Real>(p: T) -> T {
    (p / (T::one() - p)).ln()
}

pub fn inv_logit<T: Real>(l: T) -> T {
    T::one() / (T::one() + (-l).exp())
}

/// Recursive Bayes update of a node's occupancy probability:
///
/// `P(n|z_1:t) = [1 + (1-P(n|z_t))/P(n|z_t) * (1-P(n|z_1:t-1))/P(n|z_1:t-1) * P(n)/(1-P(n))]^-1`
pub fn update_node_probability<T: Real>(prior: T, measurement: T, history: T) -> Result<T> {
    for p in [prior, measurement, history] {
        if !(p > T::zero() && p < T::one()) {
            return Err(Error::ProbabilityOutOfRange(p.to_f64().unwrap_or(f64::NAN)));
        }
    }
    let one = T::one();
    let odds_inv = (one - measurement) / measurement * ((one - history) / history) * (prior / (one - prior));
    Ok(one / (one + odds_inv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupancyConfig {
    pub resolution: f64,
    pub p_hit: f64,
    pub p_miss: f64,
    /// Prior occupancy P_n; also the Free/Occupied threshold.
    pub prior: f64,
    pub clamp_min: f64,
    pub clamp_max: f64,
    /// Longer beams are truncated and only carve free space.
    pub max_integration_range: f64,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self {
            resolution: 0.5,
            p_hit: 0.7,
            p_miss: 0.4,
            prior: 0.5,
            clamp_min: 0.12,
            clamp_max: 0.97,
            max_integration_range: 15.0,
        }
    }
}

impl OccupancyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0) {
            return Err(invalid("resolution", "must be positive"));
        }
        if !(0.0 < self.p_miss && self.p_miss < self.prior && self.prior < self.p_hit && self.p_hit < 1.0) {
            return Err(invalid("p_hit", "need 0 < p_miss < prior < p_hit < 1"));
        }
        if !(0.0 < self.clamp_min && self.clamp_min < self.prior && self.prior < self.clamp_max && self.clamp_max < 1.0) {
            return Err(invalid("clamp_min", "need 0 < clamp_min < prior < clamp_max < 1"));
        }
        if !(self.max_integration_range > 0.0) {
            return Err(invalid("max_integration_range", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelKey {
    pub i: i32,
    pub j: i32,
    pub k: i32,
}

impl VoxelKey {
    pub const fn new(i: i32, j: i32, k: i32) -> Self {
        Self { i, j, k }
    }

    pub fn offset(self, di: i32, dj: i32, dk: i32) -> Self {
        Self::new(self.i + di, self.j + dj, self.k + dk)
    }

    pub fn to_array(self) -> [i32; 3] {
        [self.i, self.j, self.k]
    }

    /// Chebyshev (26-connected step) distance.
    pub fn chebyshev(self, o: Self) -> i32 {
        (self.i - o.i).abs().max((self.j - o.j).abs()).max((self.k - o.k).abs())
    }

    pub fn from_world(p: Vec3<f64>, resolution: f64) -> Self {
        Self::new(
            (p.x / resolution).floor() as i32,
            (p.y / resolution).floor() as i32,
            (p.z / resolution).floor() as i32,
        )
    }

    pub fn center(self, resolution: f64) -> Vec3<f64> {
        Vec3::new(
            (self.i as f64 + 0.5) * resolution,
            (self.j as f64 + 0.5) * resolution,
            (self.k as f64 + 0.5) * resolution,
        )
    }
}

impl From<[i64; 3]> for VoxelKey {
    fn from(c: [i64; 3]) -> Self {
        Self::new(c[0] as i32, c[1] as i32, c[2] as i32)
    }
}

/// Offsets of the 26-neighbourhood in a fixed order.
pub const NEIGHBOR_OFFSETS: [[i32; 3]; 26] = {
    let mut out = [[0; 3]; 26];
    let mut n = 0;
    let mut i = -1;
    while i <= 1 {
        let mut j = -1;
        while j <= 1 {
            let mut k = -1;
            while k <= 1 {
                if !(i == 0 && j == 0 && k == 0) {
                    out[n] = [i, j, k];
                    n += 1;
                }
                k += 1;
            }
            j += 1;
        }
        i += 1;
    }
    out
};

pub fn neighbors26(key: VoxelKey) -> [VoxelKey; 26] {
    NEIGHBOR_OFFSETS.map(|[a, b, c]| key.offset(a, b, c))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VoxelState {
    Free,
    Occupied,
    Unknown,
}

impl VoxelState {
    pub fn is_known(self) -> bool {
        self != VoxelState::Unknown
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VoxelRecord {
    pub log_odds: f64,
    pub state: VoxelState,
}

/// Voxels whose discrete state flipped during one integration.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdatedCells {
    keys: Vec<VoxelKey>,
}

impl UpdatedCells {
    pub fn from_keys(mut keys: Vec<VoxelKey>) -> Self {
        keys.sort_unstable();
        keys.dedup();
        Self { keys }
    }

    pub fn keys(&self) -> &[VoxelKey] {
        &self.keys
    }

    pub fn iter(&self) -> impl Iterator<Item = &VoxelKey> {
        self.keys.iter()
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &VoxelKey) -> bool {
        self.keys.binary_search(key).is_ok()
    }

    pub fn extend(&mut self, other: &UpdatedCells) {
        self.keys.extend_from_slice(&other.keys);
        self.keys.sort_unstable();
        self.keys.dedup();
    }
}

/// Read access to discrete voxel states. Implemented by the live map and by
/// snapshots used for planning.
pub trait OccupancyView {
    fn state(&self, key: VoxelKey) -> VoxelState;
    fn resolution(&self) -> f64;
}

const CHUNK_BITS: i32 = 4;
const CHUNK: i32 = 1 << CHUNK_BITS;
const CHUNK_CELLS: usize = (CHUNK * CHUNK * CHUNK) as usize;

#[derive(Clone, Copy, Debug, Default)]
struct Cell {
    log_odds: f64,
    stamp: u32,
    observed: bool,
}

#[derive(Clone, Debug)]
struct Chunk {
    cells: Box<[Cell]>,
}

impl Chunk {
    fn new() -> Self {
        Self {
            cells: vec![Cell::default(); CHUNK_CELLS].into_boxed_slice(),
        }
    }
}

fn split(key: VoxelKey) -> ([i32; 3], usize) {
    let ck = [key.i >> CHUNK_BITS, key.j >> CHUNK_BITS, key.k >> CHUNK_BITS];
    let m = CHUNK - 1;
    let local = ((key.k & m) * CHUNK * CHUNK + (key.j & m) * CHUNK + (key.i & m)) as usize;
    (ck, local)
}

/// Occupancy map with Bayesian log-odds updates and change tracking.
#[derive(Clone, Debug)]
pub struct OccupancyMap {
    cfg: OccupancyConfig,
    l_prior: f64,
    l_hit: f64,
    l_miss: f64,
    l_min: f64,
    l_max: f64,
    chunk_index: FxHashMap<[i32; 3], usize>,
    chunks: Vec<Chunk>,
    scan_id: u32,
    known: usize,
    bbox: Option<(VoxelKey, VoxelKey)>,
}

impl OccupancyMap {
    pub fn new(cfg: OccupancyConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            l_prior: logit(cfg.prior),
            l_hit: logit(cfg.p_hit),
            l_miss: logit(cfg.p_miss),
            l_min: logit(cfg.clamp_min),
            l_max: logit(cfg.clamp_max),
            cfg,
            chunk_index: FxHashMap::default(),
            chunks: Vec::new(),
            scan_id: 0,
            known: 0,
            bbox: None,
        })
    }

    pub fn config(&self) -> &OccupancyConfig {
        &self.cfg
    }

    pub fn key_of(&self, p: Vec3<f64>) -> VoxelKey {
        VoxelKey::from_world(p, self.cfg.resolution)
    }

    pub fn center_of(&self, key: VoxelKey) -> Vec3<f64> {
        key.center(self.cfg.resolution)
    }

    fn cell(&self, key: VoxelKey) -> Option<&Cell> {
        let (ck, local) = split(key);
        self.chunk_index.get(&ck).map(|&i| &self.chunks[i].cells[local])
    }

    fn chunk_slot(&mut self, ck: [i32; 3]) -> usize {
        if let Some(&i) = self.chunk_index.get(&ck) {
            return i;
        }
        self.chunks.push(Chunk::new());
        let i = self.chunks.len() - 1;
        self.chunk_index.insert(ck, i);
        i
    }

    fn state_of(&self, c: &Cell) -> VoxelState {
        if !c.observed {
            VoxelState::Unknown
        } else if c.log_odds > self.l_prior {
            VoxelState::Occupied
        } else {
            // ties after observation count as Free
            VoxelState::Free
        }
    }

    pub fn state(&self, key: VoxelKey) -> VoxelState {
        self.cell(key)
            .map_or(VoxelState::Unknown, |c| self.state_of(c))
    }

    pub fn record(&self, key: VoxelKey) -> Option<VoxelRecord> {
        self.cell(key).filter(|c| c.observed).map(|c| VoxelRecord {
            log_odds: c.log_odds,
            state: self.state_of(c),
        })
    }

    /// Occupancy probability of an observed voxel.
    pub fn probability(&self, key: VoxelKey) -> Option<f64> {
        self.record(key).map(|r| inv_logit(r.log_odds))
    }

    /// Number of Free or Occupied voxels.
    pub fn known_count(&self) -> usize {
        self.known
    }

    /// Inclusive bounding box of observed voxels.
    pub fn known_bbox(&self) -> Option<(VoxelKey, VoxelKey)> {
        self.bbox
    }

    pub fn explored_volume(&self) -> f64 {
        self.known as f64 * self.cfg.resolution.powi(3)
    }

    /// Applies one hit (`true`) or miss (`false`) to a voxel, returning
    /// whether its discrete state changed.
    pub fn observe(&mut self, key: VoxelKey, hit: bool) -> bool {
        let delta = if hit { self.l_hit } else { self.l_miss } - self.l_prior;
        self.apply(key, delta)
    }

    /// Applies a measurement with an arbitrary hit probability.
    pub fn observe_probability(&mut self, key: VoxelKey, p: f64) -> Result<bool> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(self.apply(key, logit(p) - self.l_prior))
    }

    fn apply(&mut self, key: VoxelKey, delta: f64) -> bool {
        let (ck, local) = split(key);
        let slot = self.chunk_slot(ck);
        self.apply_at(slot, local, key, delta)
    }

    fn apply_at(&mut self, slot: usize, local: usize, key: VoxelKey, delta: f64) -> bool {
        let (l_prior, l_min, l_max) = (self.l_prior, self.l_min, self.l_max);
        let cell = &mut self.chunks[slot].cells[local];
        let before = state_from(cell, l_prior);
        if !cell.observed {
            cell.observed = true;
            cell.log_odds = l_prior;
        }
        cell.log_odds = (cell.log_odds + delta).clamp(l_min, l_max);
        let after = state_from(cell, l_prior);
        if before == VoxelState::Unknown {
            self.known += 1;
            self.bbox = Some(match self.bbox {
                None => (key, key),
                Some((lo, hi)) => (
                    VoxelKey::new(lo.i.min(key.i), lo.j.min(key.j), lo.k.min(key.k)),
                    VoxelKey::new(hi.i.max(key.i), hi.j.max(key.j), hi.k.max(key.k)),
                ),
            });
        }
        before != after
    }

    /// Integrates one point cloud taken at `sensor_pose` (points in the
    /// heading-aligned sensor frame). Every voxel is updated at most once per
    /// scan: beam endpoints get a hit, voxels crossed on the way get a miss,
    /// and a voxel both crossed and hit counts as hit.
    pub fn integrate_scan(&mut self, cloud: &PointCloud, sensor_pose: &Pose<f64>) -> UpdatedCells {
        if cloud.is_empty() {
            return UpdatedCells::default();
        }
        self.scan_id = self.scan_id.wrapping_add(1);
        if self.scan_id >= u32::MAX / 2 {
            for c in &mut self.chunks {
                c.cells.iter_mut().for_each(|cell| cell.stamp = 0);
            }
            self.scan_id = 1;
        }
        let occ_stamp = self.scan_id * 2;
        let free_stamp = occ_stamp + 1;
        let origin = sensor_pose.position;
        let max_range = self.cfg.max_integration_range;
        let res = self.cfg.resolution;
        let miss = self.l_miss - self.l_prior;
        let hit = self.l_hit - self.l_prior;
        let mut changed = Vec::new();

        // endpoints first so crossing rays do not clear them
        let mut occupied = Vec::new();
        for p in &cloud.points {
            let d = p.norm();
            if d > max_range || !d.is_finite() {
                continue;
            }
            let key = self.key_of(origin + p.rotate_z(sensor_pose.yaw));
            let (ck, local) = split(key);
            let slot = self.chunk_slot(ck);
            let cell = &mut self.chunks[slot].cells[local];
            if cell.stamp != occ_stamp {
                cell.stamp = occ_stamp;
                occupied.push((slot, local, key));
            }
        }

        let mut cached: Option<([i32; 3], usize)> = None;
        for p in &cloud.points {
            let d = p.norm();
            if !d.is_finite() {
                continue;
            }
            let world = p.rotate_z(sensor_pose.yaw);
            let (end, include_end) = if d > max_range {
                (origin + world * (max_range / d), true)
            } else {
                (origin + world, false)
            };
            let end_key = self.key_of(end);
            for (c, _) in VoxelWalk::new(origin, end - origin, res, 1.0) {
                let key = VoxelKey::new(c[0] as i32, c[1] as i32, c[2] as i32);
                if key == end_key && !include_end {
                    break;
                }
                let (ck, local) = split(key);
                let slot = match cached {
                    Some((k, s)) if k == ck => s,
                    _ => {
                        let s = self.chunk_slot(ck);
                        cached = Some((ck, s));
                        s
                    }
                };
                let stamp = self.chunks[slot].cells[local].stamp;
                if stamp == occ_stamp || stamp == free_stamp {
                    if key == end_key {
                        break;
                    }
                    continue;
                }
                self.chunks[slot].cells[local].stamp = free_stamp;
                if self.apply_at(slot, local, key, miss) {
                    changed.push(key);
                }
                if key == end_key {
                    break;
                }
            }
        }

        for (slot, local, key) in occupied {
            if self.apply_at(slot, local, key, hit) {
                changed.push(key);
            }
        }
        UpdatedCells::from_keys(changed)
    }

    /// Observed voxels in key order.
    pub fn known_voxels(&self) -> Vec<(VoxelKey, VoxelRecord)> {
        let mut out = Vec::with_capacity(self.known);
        for (ck, &slot) in &self.chunk_index {
            for (local, cell) in self.chunks[slot].cells.iter().enumerate() {
                if !cell.observed {
                    continue;
                }
                let local = local as i32;
                let key = VoxelKey::new(
                    (ck[0] << CHUNK_BITS) + (local % CHUNK),
                    (ck[1] << CHUNK_BITS) + (local / CHUNK) % CHUNK,
                    (ck[2] << CHUNK_BITS) + local / (CHUNK * CHUNK),
                );
                out.push((
                    key,
                    VoxelRecord {
                        log_odds: cell.log_odds,
                        state: self.state_of(cell),
                    },
                ));
            }
        }
        out.sort_unstable_by_key(|(k, _)| *k);
        out
    }

    /// Writes one `i j k state prob` line per observed voxel.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# lavatube map v1 resolution {}", self.cfg.resolution)?;
        for (k, r) in self.known_voxels() {
            let state = match r.state {
                VoxelState::Free => "free",
                VoxelState::Occupied => "occupied",
                VoxelState::Unknown => unreachable!(),
            };
            writeln!(out, "{} {} {} {} {}", k.i, k.j, k.k, state, inv_logit(r.log_odds))?;
        }
        Ok(())
    }

    /// Loads voxels written by [`OccupancyMap::write_text`] into a fresh map.
    pub fn read_text<R: BufRead>(cfg: OccupancyConfig, input: R) -> Result<Self> {
        let mut map = Self::new(cfg)?;
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |reason: String| Error::Parse { line: n + 1, reason };
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 5 {
                return Err(perr(format!("expected `i j k state prob`, got `{line}`")));
            }
            let mut c = [0i32; 3];
            for a in 0..3 {
                c[a] = toks[a].parse().map_err(|e| perr(format!("{}: {e}", toks[a])))?;
            }
            let p: f64 = toks[4].parse().map_err(|e| perr(format!("{}: {e}", toks[4])))?;
            if !(p > 0.0 && p < 1.0) {
                return Err(perr(format!("probability {p} outside (0, 1)")));
            }
            let key = VoxelKey::new(c[0], c[1], c[2]);
            let delta = logit(p) - map.l_prior;
            let (ck, local) = split(key);
            let slot = map.chunk_slot(ck);
            // bypass clamping: restore the stored value verbatim
            map.apply_at(slot, local, key, 0.0);
            map.chunks[slot].cells[local].log_odds = map.l_prior + delta;
            let expect = match toks[3] {
                "free" => VoxelState::Free,
                "occupied" => VoxelState::Occupied,
                s => return Err(perr(format!("unknown state `{s}`"))),
            };
            if map.state(key) != expect {
                return Err(perr(format!("state `{}` inconsistent with probability {p}", toks[3])));
            }
        }
        Ok(map)
    }
}

fn state_from(c: &Cell, l_prior: f64) -> VoxelState {
    if !c.observed {
        VoxelState::Unknown
    } else if c.log_odds > l_prior {
        VoxelState::Occupied
    } else {
        VoxelState::Free
    }
}

impl OccupancyView for OccupancyMap {
    fn state(&self, key: VoxelKey) -> VoxelState {
        OccupancyMap::state(self, key)
    }

    fn resolution(&self) -> f64 {
        self.cfg.resolution
    }
}

/// Brute-force set difference of discrete states between two maps over the
/// union of their observed voxels.
pub fn state_diff(before: &OccupancyMap, after: &OccupancyMap) -> BTreeSet<VoxelKey> {
    let mut keys: BTreeSet<VoxelKey> = before.known_voxels().into_iter().map(|(k, _)| k).collect();
    keys.extend(after.known_voxels().into_iter().map(|(k, _)| k));
    keys.into_iter()
        .filter(|&k| before.state(k) != after.state(k))
        .collect()
}
