//! Incremental shortest paths (D* Lite) on the 26-connected risk grid.
//!
//! The search runs backward from the goal so that a moving start only shifts
//! the heuristic offset `km`. Entering voxel `v` costs `C(v)`; the reported
//! path cost also counts the start voxel.

use std::collections::BTreeSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::cost::{Dist, PathCost};
use super::risk::RiskGrid;
use super::PlannedPath;
use crate::error::{invalid, Error, Result};
use crate::map::{VoxelKey, VoxelState, NEIGHBOR_OFFSETS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlannerConfig {
    /// Voxels added around start and goal (and any extra box) to bound the search.
    pub search_margin: i32,
    /// Expansion budget per call; exceeding it reports the goal inaccessible.
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            search_margin: 8,
            max_expansions: 2_000_000,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.search_margin < 0 {
            return Err(invalid("search_margin", "must be non-negative"));
        }
        if self.max_expansions == 0 {
            return Err(invalid("max_expansions", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PlanOutcome<C> {
    Path(PlannedPath<C>),
    Inaccessible,
}

impl<C> PlanOutcome<C> {
    pub fn path(&self) -> Option<&PlannedPath<C>> {
        match self {
            PlanOutcome::Path(p) => Some(p),
            PlanOutcome::Inaccessible => None,
        }
    }

    pub fn into_path(self) -> Option<PlannedPath<C>> {
        match self {
            PlanOutcome::Path(p) => Some(p),
            PlanOutcome::Inaccessible => None,
        }
    }
}

type Key<C> = (Dist<C>, Dist<C>);

#[derive(Clone, Debug)]
pub struct DStarLite<C: PathCost> {
    start: VoxelKey,
    last_start: VoxelKey,
    goal: VoxelKey,
    km: C,
    lo: VoxelKey,
    hi: VoxelKey,
    max_expansions: usize,
    g: FxHashMap<VoxelKey, Dist<C>>,
    rhs: FxHashMap<VoxelKey, Dist<C>>,
    open: BTreeSet<(Dist<C>, Dist<C>, VoxelKey)>,
    queued: FxHashMap<VoxelKey, Key<C>>,
    expansions: usize,
    last: Option<PlanOutcome<C>>,
}

impl<C: PathCost> DStarLite<C> {
    /// Search restricted to the box spanning start, goal and `extra`, grown by
    /// the configured margin and clipped to the grid.
    pub fn new(
        grid: &RiskGrid<C>,
        start: VoxelKey,
        goal: VoxelKey,
        extra: Option<(VoxelKey, VoxelKey)>,
        cfg: &PlannerConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut lo = VoxelKey::new(start.i.min(goal.i), start.j.min(goal.j), start.k.min(goal.k));
        let mut hi = VoxelKey::new(start.i.max(goal.i), start.j.max(goal.j), start.k.max(goal.k));
        if let Some((a, b)) = extra {
            lo = VoxelKey::new(lo.i.min(a.i), lo.j.min(a.j), lo.k.min(a.k));
            hi = VoxelKey::new(hi.i.max(b.i), hi.j.max(b.j), hi.k.max(b.k));
        }
        let m = cfg.search_margin;
        let (glo, ghi) = grid.bounds();
        let lo = VoxelKey::new((lo.i - m).max(glo.i), (lo.j - m).max(glo.j), (lo.k - m).max(glo.k));
        let hi = VoxelKey::new((hi.i + m).min(ghi.i), (hi.j + m).min(ghi.j), (hi.k + m).min(ghi.k));
        let mut s = Self {
            start,
            last_start: start,
            goal,
            km: C::zero(),
            lo,
            hi,
            max_expansions: cfg.max_expansions,
            g: FxHashMap::default(),
            rhs: FxHashMap::default(),
            open: BTreeSet::new(),
            queued: FxHashMap::default(),
            expansions: 0,
            last: None,
        };
        s.rhs.insert(goal, Dist::Finite(C::zero()));
        let k = s.key(goal);
        s.push(goal, k);
        Ok(s)
    }

    pub fn start(&self) -> VoxelKey {
        self.start
    }

    pub fn goal(&self) -> VoxelKey {
        self.goal
    }

    /// Vertex expansions performed by the most recent call.
    pub fn expansions(&self) -> usize {
        self.expansions
    }

    fn in_box(&self, k: VoxelKey) -> bool {
        k.i >= self.lo.i
            && k.j >= self.lo.j
            && k.k >= self.lo.k
            && k.i <= self.hi.i
            && k.j <= self.hi.j
            && k.k <= self.hi.k
    }

    fn neighbors(&self, u: VoxelKey) -> impl Iterator<Item = VoxelKey> + '_ {
        NEIGHBOR_OFFSETS
            .iter()
            .map(move |&[a, b, c]| u.offset(a, b, c))
            .filter(move |v| self.in_box(*v))
    }

    fn g(&self, u: VoxelKey) -> Dist<C> {
        self.g.get(&u).copied().unwrap_or(Dist::Inf)
    }

    fn rhs(&self, u: VoxelKey) -> Dist<C> {
        self.rhs.get(&u).copied().unwrap_or(Dist::Inf)
    }

    fn h(&self, a: VoxelKey, b: VoxelKey) -> C {
        C::from_int(a.chebyshev(b) as i64)
    }

    fn key(&self, u: VoxelKey) -> Key<C> {
        let m = self.g(u).min(self.rhs(u));
        (m.plus(self.h(self.start, u) + self.km), m)
    }

    fn edge(grid: &RiskGrid<C>, v: VoxelKey) -> Option<C> {
        grid.traversable(v).then(|| grid.cost(v))
    }

    fn push(&mut self, u: VoxelKey, k: Key<C>) {
        if let Some(old) = self.queued.insert(u, k) {
            self.open.remove(&(old.0, old.1, u));
        }
        self.open.insert((k.0, k.1, u));
    }

    fn remove(&mut self, u: VoxelKey) {
        if let Some(old) = self.queued.remove(&u) {
            self.open.remove(&(old.0, old.1, u));
        }
    }

    fn best_successor(&self, grid: &RiskGrid<C>, u: VoxelKey) -> (Dist<C>, Option<VoxelKey>) {
        let mut best = Dist::Inf;
        let mut arg = None;
        for v in self.neighbors(u) {
            if let Some(c) = Self::edge(grid, v) {
                let d = self.g(v).plus(c);
                if d < best {
                    best = d;
                    arg = Some(v);
                }
            }
        }
        (best, arg)
    }

    fn set_rhs(&mut self, u: VoxelKey, d: Dist<C>) {
        match d {
            Dist::Inf => {
                self.rhs.remove(&u);
            }
            _ => {
                self.rhs.insert(u, d);
            }
        }
    }

    fn sync_queue(&mut self, u: VoxelKey) {
        if self.g(u) != self.rhs(u) {
            let k = self.key(u);
            self.push(u, k);
        } else {
            self.remove(u);
        }
    }

    fn update_vertex(&mut self, grid: &RiskGrid<C>, u: VoxelKey) {
        if u != self.goal {
            let (best, _) = self.best_successor(grid, u);
            self.set_rhs(u, best);
        }
        self.sync_queue(u);
    }

    fn compute_shortest_path(&mut self, grid: &RiskGrid<C>) -> bool {
        self.expansions = 0;
        let mut nbrs = Vec::with_capacity(26);
        while let Some(&(k1, k2, u)) = self.open.first() {
            let ks = self.key(self.start);
            if (k1, k2) >= ks && self.rhs(self.start) == self.g(self.start) {
                break;
            }
            self.expansions += 1;
            if self.expansions > self.max_expansions {
                return false;
            }
            let k_new = self.key(u);
            let (gu, ru) = (self.g(u), self.rhs(u));
            nbrs.clear();
            nbrs.extend(self.neighbors(u));
            if (k1, k2) < k_new {
                self.push(u, k_new);
            } else if gu > ru {
                self.g.insert(u, ru);
                self.remove(u);
                let Some(cu) = Self::edge(grid, u) else { continue };
                let via = ru.plus(cu);
                for &s in &nbrs {
                    if s != self.goal && via < self.rhs(s) {
                        self.set_rhs(s, via);
                    }
                    self.sync_queue(s);
                }
            } else {
                self.g.remove(&u);
                let via = Self::edge(grid, u).map(|cu| gu.plus(cu));
                for &s in &nbrs {
                    if s != self.goal && via.is_some_and(|v| v == self.rhs(s)) {
                        let (best, _) = self.best_successor(grid, s);
                        self.set_rhs(s, best);
                    }
                    self.sync_queue(s);
                }
                self.update_vertex(grid, u);
            }
        }
        true
    }

    fn extract(&self, grid: &RiskGrid<C>) -> PlanOutcome<C> {
        if !self.g(self.start).is_finite() && self.start != self.goal {
            return PlanOutcome::Inaccessible;
        }
        let limit = self.g.len() + 2;
        let mut keys = vec![self.start];
        let mut cur = self.start;
        while cur != self.goal {
            let (best, arg) = self.best_successor(grid, cur);
            match (best, arg) {
                (Dist::Finite(_), Some(v)) => {
                    keys.push(v);
                    cur = v;
                }
                _ => return PlanOutcome::Inaccessible,
            }
            if keys.len() > limit {
                return PlanOutcome::Inaccessible;
            }
        }
        PlanOutcome::Path(PlannedPath::from_keys(keys, grid))
    }

    fn check_endpoints(&self, grid: &RiskGrid<C>) -> Result<bool> {
        if !grid.contains(self.start) {
            return Err(Error::InvalidParameter {
                name: "start".into(),
                reason: "outside the planning grid".into(),
            });
        }
        if grid.state(self.start) == VoxelState::Occupied {
            return Err(Error::StartOccupied(self.start.to_array()));
        }
        Ok(grid.state(self.goal) == VoxelState::Free && grid.traversable(self.goal))
    }

    /// Initial search.
    pub fn plan(&mut self, grid: &RiskGrid<C>) -> Result<PlanOutcome<C>> {
        let out = if !self.check_endpoints(grid)? || !self.compute_shortest_path(grid) {
            PlanOutcome::Inaccessible
        } else {
            self.extract(grid)
        };
        self.last = Some(out.clone());
        Ok(out)
    }

    /// Repairs the search after the vehicle moved to `start` and the voxels in
    /// `changed` changed cost. With nothing changed the previous result is
    /// returned as is.
    pub fn replan_on_update(
        &mut self,
        grid: &RiskGrid<C>,
        start: VoxelKey,
        changed: &[VoxelKey],
    ) -> Result<PlanOutcome<C>> {
        if changed.is_empty() && start == self.start {
            if let Some(last) = &self.last {
                return Ok(last.clone());
            }
        }
        if start != self.start {
            self.km = self.km + self.h(self.last_start, start);
            self.last_start = start;
            self.start = start;
            if !self.in_box(start) {
                return Err(Error::InvalidParameter {
                    name: "start".into(),
                    reason: "left the search box".into(),
                });
            }
        }
        let mut touched: Vec<VoxelKey> = Vec::new();
        for &v in changed {
            if !self.in_box(v) || !self.g(v).is_finite() {
                continue;
            }
            touched.extend(self.neighbors(v));
        }
        touched.sort_unstable();
        touched.dedup();
        for u in touched {
            self.update_vertex(grid, u);
        }
        self.plan(grid)
    }
}

/// One-shot search from `start` to `goal`.
pub fn plan<C: PathCost>(
    grid: &RiskGrid<C>,
    start: VoxelKey,
    goal: VoxelKey,
    cfg: &PlannerConfig,
) -> Result<PlanOutcome<C>> {
    let (lo, hi) = grid.bounds();
    let mut d = DStarLite::new(grid, start, goal, Some((lo, hi)), cfg)?;
    d.plan(grid)
}
