//! Reference implementations used as test oracles. They are written for
//! clarity, not speed, and share no code with the library beyond plain types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::cmp::Reverse;

use lavatube_core::map::{OccupancyView, VoxelKey, VoxelState};
use lavatube_core::planner::RiskConfig;
use num_rational::Ratio;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Q = Ratio<i64>;

/// Explicit voxel states inside an inclusive box; everything else is Unknown.
#[derive(Clone, Debug)]
pub struct GridWorld {
    pub resolution: f64,
    pub lo: VoxelKey,
    pub hi: VoxelKey,
    pub cells: BTreeMap<VoxelKey, VoxelState>,
}

impl OccupancyView for GridWorld {
    fn state(&self, key: VoxelKey) -> VoxelState {
        self.cells.get(&key).copied().unwrap_or(VoxelState::Unknown)
    }

    fn resolution(&self) -> f64 {
        self.resolution
    }
}

impl GridWorld {
    pub fn keys(&self) -> Vec<VoxelKey> {
        let mut out = Vec::new();
        for k in self.lo.k..=self.hi.k {
            for j in self.lo.j..=self.hi.j {
                for i in self.lo.i..=self.hi.i {
                    out.push(VoxelKey::new(i, j, k));
                }
            }
        }
        out
    }

    pub fn contains(&self, key: VoxelKey) -> bool {
        key.i >= self.lo.i
            && key.j >= self.lo.j
            && key.k >= self.lo.k
            && key.i <= self.hi.i
            && key.j <= self.hi.j
            && key.k <= self.hi.k
    }
}

pub struct RiskParams {
    pub c_occupied: i64,
    pub c_unknown: i64,
    pub c_risk: i64,
    pub r_risk: i64,
    pub inflation: i64,
}

fn cheb(a: VoxelKey, b: VoxelKey) -> i64 {
    let d = [(a.i - b.i).abs(), (a.j - b.j).abs(), (a.k - b.k).abs()];
    d.into_iter().max().unwrap() as i64
}

/// Voxel costs computed from scratch: every occupied voxel stamps its
/// Chebyshev distance onto the cube around it. `None` marks voxels the
/// vehicle may not enter.
pub fn oracle_costs(w: &GridWorld, p: &RiskParams) -> BTreeMap<VoxelKey, Option<Q>> {
    let reach = p.r_risk.max(p.inflation + 1) as i32;
    let mut nearest: BTreeMap<VoxelKey, i64> = BTreeMap::new();
    for o in w.keys().into_iter().filter(|k| w.state(*k) == VoxelState::Occupied) {
        for a in -reach..=reach {
            for b in -reach..=reach {
                for c in -reach..=reach {
                    let k = VoxelKey::new(o.i + a, o.j + b, o.k + c);
                    let d = cheb(k, o);
                    let e = nearest.entry(k).or_insert(d);
                    *e = (*e).min(d);
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    for key in w.keys() {
        let state = w.state(key);
        let d = nearest.get(&key).copied();
        let cost = match state {
            VoxelState::Occupied => None,
            _ if d.is_some_and(|d| d <= p.inflation) => None,
            s => {
                let base = if s == VoxelState::Free { Q::from_integer(1) } else { Q::from_integer(p.c_unknown) };
                let risk = match d {
                    Some(d) if d < p.r_risk => Q::new(p.c_risk, d + 1),
                    _ => Q::from_integer(0),
                };
                Some(base + risk)
            }
        };
        out.insert(key, cost);
    }
    out
}

/// Plain Dijkstra over 26-connected voxels. The cost of a path is the sum of
/// the costs of all its voxels, start included.
pub fn dijkstra(
    w: &GridWorld,
    costs: &BTreeMap<VoxelKey, Option<Q>>,
    start: VoxelKey,
    goal: VoxelKey,
) -> Option<Q> {
    if w.state(goal) != VoxelState::Free || costs.get(&goal).copied().flatten().is_none() {
        return None;
    }
    let start_cost = match costs.get(&start).copied().flatten() {
        Some(c) => c,
        // a start inside the inflation band is still allowed
        None => Q::from_integer(1_000_000),
    };
    let mut dist: BTreeMap<VoxelKey, Q> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, start_cost);
    heap.push(Reverse((start_cost, start)));
    let mut done = BTreeSet::new();
    while let Some(Reverse((d, u))) = heap.pop() {
        if !done.insert(u) {
            continue;
        }
        if u == goal {
            return Some(d);
        }
        for a in -1..=1 {
            for b in -1..=1 {
                for c in -1..=1 {
                    if a == 0 && b == 0 && c == 0 {
                        continue;
                    }
                    let v = VoxelKey::new(u.i + a, u.j + b, u.k + c);
                    if !w.contains(v) {
                        continue;
                    }
                    let Some(cv) = costs.get(&v).copied().flatten() else { continue };
                    let nd = d + cv;
                    if dist.get(&v).is_none_or(|&old| nd < old) {
                        dist.insert(v, nd);
                        heap.push(Reverse((nd, v)));
                    }
                }
            }
        }
    }
    None
}

/// Closed-form occupancy after a measurement sequence starting from the
/// prior: the posterior odds are the prior odds times each measurement's
/// odds ratio against the prior.
pub fn bayes_product(prior: f64, measurements: &[f64]) -> f64 {
    let odds = |p: f64| p / (1.0 - p);
    let o = measurements
        .iter()
        .fold(odds(prior), |acc, &z| acc * odds(z) / odds(prior));
    o / (1.0 + o)
}

/// Log-odds after the same sequence with the clamp applied after every step.
pub fn clamped_log_odds(prior: f64, measurements: &[f64], lo: f64, hi: f64) -> f64 {
    let l = |p: f64| (p / (1.0 - p)).ln();
    measurements
        .iter()
        .fold(l(prior), |acc, &z| (acc + l(z) - l(prior)).clamp(l(lo), l(hi)))
}

/// Frontier voxels found by testing every voxel of an inclusive box against
/// the rules directly.
pub fn brute_force_frontiers<M: OccupancyView>(
    map: &M,
    lo: VoxelKey,
    hi: VoxelKey,
    n_req: u32,
) -> BTreeSet<VoxelKey> {
    let mut out = BTreeSet::new();
    for i in lo.i..=hi.i {
        for j in lo.j..=hi.j {
            for k in lo.k..=hi.k {
                let key = VoxelKey::new(i, j, k);
                if map.state(key) != VoxelState::Free {
                    continue;
                }
                let mut free = 0;
                let mut unknown = 0;
                let mut occupied = 0;
                for a in -1..=1 {
                    for b in -1..=1 {
                        for c in -1..=1 {
                            if (a, b, c) == (0, 0, 0) {
                                continue;
                            }
                            match map.state(VoxelKey::new(i + a, j + b, k + c)) {
                                VoxelState::Free => free += 1,
                                VoxelState::Unknown => unknown += 1,
                                VoxelState::Occupied => occupied += 1,
                            }
                        }
                    }
                }
                if occupied == 0 && unknown > 0 && free + unknown >= n_req {
                    out.insert(key);
                }
            }
        }
    }
    out
}

/// Free cells 6-connected to `start` in a solid/free predicate over a box.
pub fn flood_fill(
    start: [i64; 3],
    lo: [i64; 3],
    hi: [i64; 3],
    solid: impl Fn([i64; 3]) -> bool,
) -> BTreeSet<[i64; 3]> {
    let inside = |c: [i64; 3]| (0..3).all(|a| c[a] >= lo[a] && c[a] <= hi[a]);
    let mut seen = BTreeSet::new();
    if !inside(start) || solid(start) {
        return seen;
    }
    let mut stack = vec![start];
    seen.insert(start);
    while let Some(c) = stack.pop() {
        for a in 0..3 {
            for d in [-1, 1] {
                let mut n = c;
                n[a] += d;
                if inside(n) && !solid(n) && seen.insert(n) {
                    stack.push(n);
                }
            }
        }
    }
    seen
}

/// Random voxel grid with scattered Occupied and Unknown cells.
pub fn random_world(rng: &mut ChaCha8Rng, max_dim: i32) -> GridWorld {
    let dims = [rng.random_range(4..=max_dim), rng.random_range(4..=max_dim), rng.random_range(2..=max_dim)];
    let lo = VoxelKey::new(rng.random_range(-5..5), rng.random_range(-5..5), rng.random_range(-5..5));
    let hi = VoxelKey::new(lo.i + dims[0] - 1, lo.j + dims[1] - 1, lo.k + dims[2] - 1);
    let p_occ = rng.random_range(0.0..0.08);
    let p_unk = rng.random_range(0.0..0.4);
    let mut w = GridWorld {
        resolution: 0.5,
        lo,
        hi,
        cells: Default::default(),
    };
    for key in w.keys() {
        let r: f64 = rng.random();
        let s = if r < p_occ {
            VoxelState::Occupied
        } else if r < p_occ + p_unk {
            VoxelState::Unknown
        } else {
            VoxelState::Free
        };
        w.cells.insert(key, s);
    }
    w
}

pub fn config(rng: &mut ChaCha8Rng) -> (RiskConfig, RiskParams) {
    let c_unknown = rng.random_range(1..=4);
    let c_risk = rng.random_range(1..=6);
    let r_risk = rng.random_range(1..=4);
    let inflation = rng.random_range(0..=1);
    let cfg = RiskConfig {
        c_occupied: 1e6,
        c_unknown: c_unknown as f64,
        c_risk: c_risk as f64,
        r_risk: r_risk as u32,
        vehicle_radius: inflation as f64 * 0.5,
    };
    let p = RiskParams {
        c_occupied: 1_000_000,
        c_unknown,
        c_risk,
        r_risk,
        inflation,
    };
    (cfg, p)
}

pub fn pick(rng: &mut ChaCha8Rng, w: &GridWorld, want: impl Fn(VoxelState) -> bool) -> Option<VoxelKey> {
    let keys: Vec<_> = w.keys().into_iter().filter(|k| want(w.state(*k))).collect();
    (!keys.is_empty()).then(|| keys[rng.random_range(0..keys.len())])
}
