//! Small 3-vector type shared by the sensor, avoidance and control code.

use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn dot(&self, o: &Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(&self, o: &Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(&self) -> T {
        self.dot(self)
    }

    pub fn norm(&self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector in the same direction, or `None` for (near) zero vectors.
    pub fn try_normalize(&self, min_norm: T) -> Option<Self> {
        let n = self.norm();
        if n <= min_norm || !n.is_finite() {
            None
        } else {
            Some(*self / n)
        }
    }

    /// Rescales the vector so its norm does not exceed `max_norm`.
    pub fn cap_norm(&self, max_norm: T) -> Self {
        let n = self.norm();
        if n > max_norm && n > T::zero() {
            *self * (max_norm / n)
        } else {
            *self
        }
    }

    pub fn distance(&self, o: &Self) -> T {
        (*self - *o).norm()
    }

    pub fn horizontal_norm(&self) -> T {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    /// Rotates the vector about +z by `yaw` radians.
    pub fn rotate_z(&self, yaw: T) -> Self {
        let (s, c) = yaw.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y, self.z)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> SubAssign for Vec3<T> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self::new(self.x * k, self.y * k, self.z * k)
    }
}

impl<T: Real> Div<T> for Vec3<T> {
    type Output = Self;
    fn div(self, k: T) -> Self {
        Self::new(self.x / k, self.y / k, self.z / k)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Position plus heading (rotation about +z).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Pose<T> {
    pub position: Vec3<T>,
    pub yaw: T,
}

impl<T: Real> Pose<T> {
    pub fn new(position: Vec3<T>, yaw: T) -> Self {
        Self { position, yaw }
    }

    /// Unit vector of the heading in the horizontal plane.
    pub fn heading(&self) -> Vec3<T> {
        Vec3::new(self.yaw.cos(), self.yaw.sin(), T::zero())
    }
}

/// Voxel traversal along a segment (Amanatides & Woo). Yields the integer
/// cells crossed by `origin + t * dir` for `t` in `[0, t_max]`, in order,
/// together with the entry parameter of each cell.
#[derive(Clone, Debug)]
pub struct VoxelWalk {
    cell: [i64; 3],
    step: [i64; 3],
    t_next: [f64; 3],
    t_delta: [f64; 3],
    t_entry: f64,
    t_max: f64,
    done: bool,
}

impl VoxelWalk {
    /// `dir` need not be normalized; `t_max` is expressed in units of `dir`.
    pub fn new(origin: Vec3<f64>, dir: Vec3<f64>, resolution: f64, t_max: f64) -> Self {
        let o = [origin.x / resolution, origin.y / resolution, origin.z / resolution];
        let d = [dir.x / resolution, dir.y / resolution, dir.z / resolution];
        let mut cell = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_next = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            cell[a] = o[a].floor() as i64;
            if d[a] > 0.0 {
                step[a] = 1;
                t_delta[a] = 1.0 / d[a];
                t_next[a] = ((cell[a] + 1) as f64 - o[a]) / d[a];
            } else if d[a] < 0.0 {
                step[a] = -1;
                t_delta[a] = -1.0 / d[a];
                t_next[a] = (cell[a] as f64 - o[a]) / d[a];
            }
        }
        Self {
            cell,
            step,
            t_next,
            t_delta,
            t_entry: 0.0,
            t_max,
            done: false,
        }
    }
}

impl Iterator for VoxelWalk {
    /// (cell, entry parameter)
    type Item = ([i64; 3], f64);

    fn next(&mut self) -> Option<Self::Item> {
        if self.done || self.t_entry > self.t_max {
            return None;
        }
        let out = (self.cell, self.t_entry);
        let mut a = 0;
        if self.t_next[1] < self.t_next[a] {
            a = 1;
        }
        if self.t_next[2] < self.t_next[a] {
            a = 2;
        }
        if !self.t_next[a].is_finite() {
            self.done = true;
        } else {
            self.t_entry = self.t_next[a];
            self.cell[a] += self.step[a];
            self.t_next[a] += self.t_delta[a];
        }
        Some(out)
    }
}
