//! Ground-truth cave geometry and a synthetic multi-ring lidar.
//!
//! The world is a dense boolean voxel grid. Voxel `[i, j, k]` covers
//! `[i*res, (i+1)*res)` on each axis, the same keying the occupancy map uses,
//! so ground truth and map can be compared voxel for voxel.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geom::{Pose, Vec3, VoxelWalk};

/// Parameters of the procedural lava-tube generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TubeParams {
    /// Length of the main tunnel (m).
    pub length: f64,
    pub radius_min: f64,
    pub radius_max: f64,
    /// Side tunnels forking off the main tunnel.
    pub branch_count: u32,
    pub branch_length: f64,
    /// Short blind side passages.
    pub dead_end_count: u32,
    pub dead_end_length: f64,
    /// Amplitude of the wall roughness noise (m).
    pub roughness: f64,
    /// Maximum heading change per metre of centreline (rad/m).
    pub max_curvature: f64,
    /// Maximum vertical excursion of the centreline from the spawn height (m).
    pub vertical_wander: f64,
    /// Voxel edge length (m).
    pub resolution: f64,
}

impl Default for TubeParams {
    fn default() -> Self {
        Self {
            length: 100.0,
            radius_min: 2.0,
            radius_max: 3.0,
            branch_count: 1,
            branch_length: 30.0,
            dead_end_count: 1,
            dead_end_length: 15.0,
            roughness: 0.4,
            max_curvature: 0.06,
            vertical_wander: 2.0,
            resolution: 0.5,
        }
    }
}

impl TubeParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("radius_min", self.radius_min),
            ("radius_max", self.radius_max),
            ("resolution", self.resolution),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if self.radius_max < self.radius_min {
            return Err(invalid("radius_max", "must be >= radius_min"));
        }
        if self.branch_count > 0 && !(self.branch_length > 0.0) {
            return Err(invalid("branch_length", "must be positive"));
        }
        if self.dead_end_count > 0 && !(self.dead_end_length > 0.0) {
            return Err(invalid("dead_end_length", "must be positive"));
        }
        if !(self.roughness >= 0.0) || self.roughness >= self.radius_min {
            return Err(invalid("roughness", "must be in [0, radius_min)"));
        }
        if !(self.max_curvature >= 0.0) || !(self.vertical_wander >= 0.0) {
            return Err(invalid("max_curvature", "curvature and wander must be non-negative"));
        }
        Ok(())
    }
}

/// Immutable ground truth: a dense solid/free voxel grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WorldGeometry {
    resolution: f64,
    /// Voxel index of the grid's minimum corner.
    lo: [i64; 3],
    dims: [usize; 3],
    solid: Vec<bool>,
    spawn: Pose<f64>,
}

impl WorldGeometry {
    /// Builds a world from explicit solid voxels. Everything else inside the
    /// bounds is free.
    pub fn from_solids(
        resolution: f64,
        lo: [i64; 3],
        dims: [usize; 3],
        solids: impl IntoIterator<Item = [i64; 3]>,
        spawn: Pose<f64>,
    ) -> Result<Self> {
        if !(resolution > 0.0) {
            return Err(invalid("resolution", "must be positive"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(invalid("bounds", "grid dimensions must be non-zero"));
        }
        let mut w = Self {
            resolution,
            lo,
            dims,
            solid: vec![false; dims[0] * dims[1] * dims[2]],
            spawn,
        };
        for c in solids {
            let idx = w
                .index(c)
                .ok_or_else(|| invalid("solids", format!("voxel {c:?} outside bounds")))?;
            w.solid[idx] = true;
        }
        if w.is_solid(w.key_of(spawn.position)) {
            return Err(invalid("spawn", "spawn voxel is solid"));
        }
        if w.index(w.key_of(spawn.position)).is_none() {
            return Err(invalid("spawn", "spawn outside bounds"));
        }
        Ok(w)
    }

    /// An all-free world, useful for sensor tests.
    pub fn empty(resolution: f64, lo: [i64; 3], dims: [usize; 3], spawn: Pose<f64>) -> Result<Self> {
        Self::from_solids(resolution, lo, dims, std::iter::empty(), spawn)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn spawn(&self) -> Pose<f64> {
        self.spawn
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn lo(&self) -> [i64; 3] {
        self.lo
    }

    /// Exclusive upper voxel index per axis.
    pub fn hi(&self) -> [i64; 3] {
        [
            self.lo[0] + self.dims[0] as i64,
            self.lo[1] + self.dims[1] as i64,
            self.lo[2] + self.dims[2] as i64,
        ]
    }

    /// Axis-aligned bounds in metres: (min corner, max corner).
    pub fn bounds(&self) -> (Vec3<f64>, Vec3<f64>) {
        let r = self.resolution;
        let hi = self.hi();
        (
            Vec3::new(self.lo[0] as f64 * r, self.lo[1] as f64 * r, self.lo[2] as f64 * r),
            Vec3::new(hi[0] as f64 * r, hi[1] as f64 * r, hi[2] as f64 * r),
        )
    }

    pub fn key_of(&self, p: Vec3<f64>) -> [i64; 3] {
        [
            (p.x / self.resolution).floor() as i64,
            (p.y / self.resolution).floor() as i64,
            (p.z / self.resolution).floor() as i64,
        ]
    }

    pub fn center_of(&self, c: [i64; 3]) -> Vec3<f64> {
        let r = self.resolution;
        Vec3::new(
            (c[0] as f64 + 0.5) * r,
            (c[1] as f64 + 0.5) * r,
            (c[2] as f64 + 0.5) * r,
        )
    }

    pub fn index(&self, c: [i64; 3]) -> Option<usize> {
        let mut idx = 0usize;
        for a in (0..3).rev() {
            let o = c[a] - self.lo[a];
            if o < 0 || o >= self.dims[a] as i64 {
                return None;
            }
            idx = idx * self.dims[a] + o as usize;
        }
        Some(idx)
    }

    fn coord(&self, mut idx: usize) -> [i64; 3] {
        let mut c = [0i64; 3];
        for a in 0..3 {
            c[a] = self.lo[a] + (idx % self.dims[a]) as i64;
            idx /= self.dims[a];
        }
        c
    }

    pub fn in_bounds(&self, c: [i64; 3]) -> bool {
        self.index(c).is_some()
    }

    /// Voxels outside the bounds are free.
    pub fn is_solid(&self, c: [i64; 3]) -> bool {
        self.index(c).is_some_and(|i| self.solid[i])
    }

    pub fn solid_count(&self) -> usize {
        self.solid.iter().filter(|&&s| s).count()
    }

    /// Solid voxels in index order.
    pub fn solids(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        self.solid
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| self.coord(i))
    }

    /// Free voxels 6-connected to the spawn voxel.
    pub fn reachable_free(&self) -> Vec<[i64; 3]> {
        let mut seen = vec![false; self.solid.len()];
        let mut out = Vec::new();
        let start = self.key_of(self.spawn.position);
        let Some(si) = self.index(start) else {
            return out;
        };
        let mut queue = VecDeque::from([si]);
        seen[si] = true;
        while let Some(i) = queue.pop_front() {
            let c = self.coord(i);
            out.push(c);
            for (a, d) in [(0, 1), (0, -1), (1, 1), (1, -1), (2, 1), (2, -1)] {
                let mut n = c;
                n[a] += d;
                if let Some(j) = self.index(n) {
                    if !seen[j] && !self.solid[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        out
    }

    /// Distance from `p` to the nearest solid voxel centre, searching at most
    /// `radius` metres away. Returns `f64::INFINITY` if none is that close.
    pub fn clearance(&self, p: Vec3<f64>, radius: f64) -> f64 {
        let c = self.key_of(p);
        let n = (radius / self.resolution).ceil() as i64 + 1;
        let mut best = f64::INFINITY;
        for i in -n..=n {
            for j in -n..=n {
                for k in -n..=n {
                    let v = [c[0] + i, c[1] + j, c[2] + k];
                    if self.is_solid(v) {
                        best = best.min(self.center_of(v).distance(&p));
                    }
                }
            }
        }
        if best <= radius {
            best
        } else {
            f64::INFINITY
        }
    }

    /// Distance along a unit ray to the first solid voxel boundary, or `None`
    /// if nothing solid lies within `max_range`. A ray starting inside a solid
    /// voxel hits at distance zero.
    pub fn cast_ray(&self, origin: Vec3<f64>, dir: Vec3<f64>, max_range: f64) -> Result<Option<f64>> {
        let n = dir.norm();
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::NonUnitDirection(n));
        }
        Ok(self.cast_unchecked(origin, dir, max_range))
    }

    fn cast_unchecked(&self, origin: Vec3<f64>, dir: Vec3<f64>, max_range: f64) -> Option<f64> {
        // clip to the grid box (slab test), then walk the voxels inside it
        let (lo, hi) = self.bounds();
        let (mut t0, mut t1) = (0.0f64, max_range);
        for a in 0..3 {
            if dir[a] == 0.0 {
                if origin[a] < lo[a] || origin[a] >= hi[a] {
                    return None;
                }
                continue;
            }
            let ta = (lo[a] - origin[a]) / dir[a];
            let tb = (hi[a] - origin[a]) / dir[a];
            t0 = t0.max(ta.min(tb));
            t1 = t1.min(ta.max(tb));
        }
        if t0 > t1 {
            return None;
        }
        let start = origin + dir * t0;
        for (cell, t) in VoxelWalk::new(start, dir, self.resolution, t1 - t0) {
            if let Some(i) = self.index(cell) {
                if self.solid[i] {
                    return Some(t0 + t);
                }
            }
        }
        None
    }

    /// Writes the text world format: a header then one `i j k` line per solid voxel.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        let (lo, hi) = self.bounds();
        let s = self.spawn;
        writeln!(out, "# lavatube world v1")?;
        writeln!(out, "resolution {}", self.resolution)?;
        writeln!(out, "bounds {} {} {} {} {} {}", lo.x, lo.y, lo.z, hi.x, hi.y, hi.z)?;
        writeln!(
            out,
            "spawn {} {} {} {}",
            s.position.x, s.position.y, s.position.z, s.yaw
        )?;
        let mut line = String::new();
        for c in self.solids() {
            line.clear();
            let _ = writeln!(line, "{} {} {}", c[0], c[1], c[2]);
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut resolution = None;
        let mut bounds: Option<[f64; 6]> = None;
        let mut spawn = None;
        let mut solids = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let perr = |reason: String| Error::Parse { line: n + 1, reason };
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap_or_default();
            let nums = |parts: std::str::SplitWhitespace<'_>| -> Result<Vec<f64>> {
                parts
                    .map(|t| t.parse::<f64>().map_err(|e| perr(format!("{t}: {e}"))))
                    .collect()
            };
            match head {
                "resolution" => {
                    let v = nums(parts)?;
                    if v.len() != 1 {
                        return Err(perr("resolution takes one value".into()));
                    }
                    resolution = Some(v[0]);
                }
                "bounds" => {
                    let v = nums(parts)?;
                    if v.len() != 6 {
                        return Err(perr("bounds takes six values".into()));
                    }
                    bounds = Some([v[0], v[1], v[2], v[3], v[4], v[5]]);
                }
                "spawn" => {
                    let v = nums(parts)?;
                    if v.len() != 4 {
                        return Err(perr("spawn takes x y z yaw".into()));
                    }
                    spawn = Some(Pose::new(Vec3::new(v[0], v[1], v[2]), v[3]));
                }
                _ => {
                    let mut c = [0i64; 3];
                    let toks: Vec<&str> = std::iter::once(head).chain(parts).collect();
                    if toks.len() != 3 {
                        return Err(perr(format!("expected `i j k`, got `{line}`")));
                    }
                    for (a, t) in toks.iter().enumerate() {
                        c[a] = t.parse().map_err(|e| perr(format!("{t}: {e}")))?;
                    }
                    solids.push(c);
                }
            }
        }
        let missing = |what: &str| Error::Parse {
            line: 0,
            reason: format!("missing `{what}` header"),
        };
        let res = resolution.ok_or_else(|| missing("resolution"))?;
        let b = bounds.ok_or_else(|| missing("bounds"))?;
        let spawn = spawn.ok_or_else(|| missing("spawn"))?;
        if !(res > 0.0) {
            return Err(invalid("resolution", "must be positive"));
        }
        let lo = [
            (b[0] / res).round() as i64,
            (b[1] / res).round() as i64,
            (b[2] / res).round() as i64,
        ];
        let dims = [
            ((b[3] - b[0]) / res).round().max(0.0) as usize,
            ((b[4] - b[1]) / res).round().max(0.0) as usize,
            ((b[5] - b[2]) / res).round().max(0.0) as usize,
        ];
        Self::from_solids(res, lo, dims, solids, spawn)
    }
}

/// Geometry of a multi-ring spinning lidar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    /// Horizontal field of view (rad).
    pub h_fov: f64,
    /// Vertical field of view (rad).
    pub v_fov: f64,
    pub rings: u32,
    pub rays_per_ring: u32,
    /// Maximum range R (m).
    pub max_range: f64,
    /// Standard deviation of additive range noise (m).
    pub noise_sigma: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            h_fov: 2.0 * std::f64::consts::PI,
            v_fov: 30f64.to_radians(),
            rings: 16,
            rays_per_ring: 360,
            max_range: 15.0,
            noise_sigma: 0.0,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::PI;
        if !(self.v_fov > 0.0 && self.v_fov <= PI) {
            return Err(invalid("v_fov", "must be in (0, pi]"));
        }
        if !(self.h_fov > 0.0 && self.h_fov <= 2.0 * PI + 1e-12) {
            return Err(invalid("h_fov", "must be in (0, 2pi]"));
        }
        if !(self.max_range > 0.0) {
            return Err(invalid("max_range", "must be positive"));
        }
        if self.rings == 0 || self.rays_per_ring == 0 {
            return Err(invalid("rings", "ring and ray counts must be >= 1"));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(invalid("noise_sigma", "must be non-negative"));
        }
        Ok(())
    }

    /// Beam elevations, evenly spread over the vertical field of view.
    pub fn elevations(&self) -> Vec<f64> {
        if self.rings == 1 {
            return vec![0.0];
        }
        let n = self.rings as f64 - 1.0;
        (0..self.rings)
            .map(|i| -self.v_fov / 2.0 + self.v_fov * i as f64 / n)
            .collect()
    }

    /// Beam azimuths relative to the sensor heading.
    pub fn azimuths(&self) -> Vec<f64> {
        use std::f64::consts::PI;
        let n = self.rays_per_ring;
        if self.h_fov >= 2.0 * PI - 1e-12 {
            // full circle: [-pi, pi) without duplicating the seam
            (0..n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect()
        } else if n == 1 {
            vec![0.0]
        } else {
            (0..n)
                .map(|j| -self.h_fov / 2.0 + self.h_fov * j as f64 / (n as f64 - 1.0))
                .collect()
        }
    }
}

/// Points relative to the sensor, expressed in the heading-aligned sensor frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3<f64>>,
    pub stamp: f64,
}

impl PointCloud {
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Returned hits sit this far past the voxel face so they snap into the hit voxel.
const HIT_INSET: f64 = 1e-6;

/// Casts one ray per (ring, azimuth) beam from `pose`. Misses are dropped;
/// hits carry seeded Gaussian range noise truncated at three sigma.
pub fn simulate_lidar<R: Rng + ?Sized>(
    pose: &Pose<f64>,
    spec: &SensorSpec,
    world: &WorldGeometry,
    rng: &mut R,
    stamp: f64,
) -> PointCloud {
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).unwrap());
    let azimuths = spec.azimuths();
    let mut points = Vec::new();
    for elev in spec.elevations() {
        let (se, ce) = elev.sin_cos();
        for &az in &azimuths {
            let (sa, ca) = az.sin_cos();
            let local = Vec3::new(ce * ca, ce * sa, se);
            let dir = local.rotate_z(pose.yaw);
            if let Some(t) = world.cast_unchecked(pose.position, dir, spec.max_range) {
                let mut range = t + HIT_INSET;
                if let Some(n) = &noise {
                    let e: f64 = n.sample(rng);
                    range += e.clamp(-3.0 * spec.noise_sigma, 3.0 * spec.noise_sigma);
                    range = range.max(0.0);
                }
                points.push(local * range);
            }
        }
    }
    PointCloud { points, stamp }
}

/// Procedurally generates a branching lava tube carved out of solid rock.
pub fn generate_tube(seed: u64, params: &TubeParams) -> Result<WorldGeometry> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = 0.5;

    let main = walk_centerline(&mut rng, params, Vec3::zero(), 0.0, params.length, step);
    let mut segments = vec![main.clone()];
    let forks = params.branch_count + params.dead_end_count;
    for f in 0..forks {
        let (len, frac_lo, frac_hi) = if f < params.branch_count {
            (params.branch_length, 0.25, 0.6)
        } else {
            (params.dead_end_length, 0.55, 0.85)
        };
        // spread fork points so side tunnels do not start on top of each other
        let span = frac_hi - frac_lo;
        let slot = rng.random_range(0.0..1.0);
        let frac = frac_lo + span * slot;
        let idx = ((main.len() - 1) as f64 * frac) as usize;
        let (c, _, yaw) = main[idx];
        let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let fork_yaw = yaw + side * rng.random_range(0.9..1.3);
        segments.push(walk_centerline(&mut rng, params, c, fork_yaw, len, step));
    }

    // bounding box of everything that will be carved, plus a rock margin
    let reach = params.radius_max + params.roughness + 2.0 * params.resolution;
    let mut min = Vec3::new(f64::MAX, f64::MAX, f64::MAX);
    let mut max = Vec3::new(f64::MIN, f64::MIN, f64::MIN);
    for seg in &segments {
        for (c, _, _) in seg {
            min = Vec3::new(min.x.min(c.x), min.y.min(c.y), min.z.min(c.z));
            max = Vec3::new(max.x.max(c.x), max.y.max(c.y), max.z.max(c.z));
        }
    }
    let res = params.resolution;
    let offset = Vec3::new(reach, reach, reach) - min;
    let dims = [
        ((max.x - min.x + 2.0 * reach) / res).ceil() as usize + 1,
        ((max.y - min.y + 2.0 * reach) / res).ceil() as usize + 1,
        ((max.z - min.z + 2.0 * reach) / res).ceil() as usize + 1,
    ];
    let spawn_idx = ((2.0 / step) as usize).min(main.len() - 1);
    let spawn = Pose::new(main[spawn_idx].0 + offset, main[spawn_idx].2);
    let mut world = WorldGeometry {
        resolution: res,
        lo: [0, 0, 0],
        dims,
        solid: vec![true; dims[0] * dims[1] * dims[2]],
        spawn,
    };

    let noise = ValueNoise::new(rng.random());
    for seg in &segments {
        for &(c, radius, _) in seg {
            let c = c + offset;
            let r_out = radius + params.roughness;
            let n = (r_out / res).ceil() as i64 + 1;
            let kc = world.key_of(c);
            for i in -n..=n {
                for j in -n..=n {
                    for k in -n..=n {
                        let v = [kc[0] + i, kc[1] + j, kc[2] + k];
                        let Some(idx) = world.index(v) else { continue };
                        if !world.solid[idx] {
                            continue;
                        }
                        let p = world.center_of(v);
                        let wall = radius + params.roughness * noise.sample(p * (1.0 / 2.5));
                        if p.distance(&c) < wall {
                            world.solid[idx] = false;
                        }
                    }
                }
            }
        }
    }

    // refill free pockets not connected to the spawn
    let mut keep = vec![false; world.solid.len()];
    for c in world.reachable_free() {
        keep[world.index(c).unwrap()] = true;
    }
    for (s, k) in world.solid.iter_mut().zip(keep) {
        if !k {
            *s = true;
        }
    }
    Ok(world)
}

/// Centreline samples: (position, local radius, heading).
fn walk_centerline(
    rng: &mut ChaCha8Rng,
    params: &TubeParams,
    start: Vec3<f64>,
    yaw0: f64,
    length: f64,
    step: f64,
) -> Vec<(Vec3<f64>, f64, f64)> {
    let n = (length / step).ceil() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut p = start;
    let mut yaw = yaw0;
    let mut yaw_rate = 0.0f64;
    let mut climb = 0.0f64;
    // radius follows a smooth random profile with ~10 m features
    let knots: Vec<f64> = (0..=(length / 10.0).ceil() as usize + 1)
        .map(|_| rng.random_range(params.radius_min..=params.radius_max))
        .collect();
    for i in 0..n {
        let s = i as f64 * step;
        let u = s / 10.0;
        let k = u.floor() as usize;
        let f = smoothstep(u - k as f64);
        let radius = knots[k] * (1.0 - f) + knots[(k + 1).min(knots.len() - 1)] * f;
        out.push((p, radius, yaw));
        yaw_rate += rng.random_range(-0.01..0.01);
        yaw_rate = yaw_rate.clamp(-params.max_curvature, params.max_curvature);
        yaw += yaw_rate * step;
        climb += rng.random_range(-0.01..0.01);
        climb = climb.clamp(-0.08, 0.08);
        let dz = start.z - p.z;
        if dz.abs() > params.vertical_wander {
            climb = 0.05 * dz.signum();
        }
        p += Vec3::new(yaw.cos() * step, yaw.sin() * step, climb * step);
    }
    out
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Seeded lattice value noise in [-1, 1] with smooth interpolation.
struct ValueNoise {
    seed: u64,
}

impl ValueNoise {
    fn new(seed: u64) -> Self {
        Self { seed }
    }

    fn lattice(&self, i: i64, j: i64, k: i64) -> f64 {
        let mut h = self.seed
            ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ (k as u64).wrapping_mul(0x1656_67B1_9E37_79F9);
        h ^= h >> 33;
        h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
        h ^= h >> 33;
        h = h.wrapping_mul(0xC4CE_B9FE_1A85_EC53);
        h ^= h >> 33;
        (h >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    }

    fn sample(&self, p: Vec3<f64>) -> f64 {
        let (fx, fy, fz) = (p.x.floor(), p.y.floor(), p.z.floor());
        let (i, j, k) = (fx as i64, fy as i64, fz as i64);
        let (tx, ty, tz) = (smoothstep(p.x - fx), smoothstep(p.y - fy), smoothstep(p.z - fz));
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let mut acc = [0.0; 4];
        for (n, (dj, dk)) in [(0, 0), (1, 0), (0, 1), (1, 1)].into_iter().enumerate() {
            acc[n] = lerp(self.lattice(i, j + dj, k + dk), self.lattice(i + 1, j + dj, k + dk), tx);
        }
        lerp(lerp(acc[0], acc[1], ty), lerp(acc[2], acc[3], ty), tz)
    }
}
