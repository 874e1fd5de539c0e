use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RotorParams<T> {
    /// Thrust coefficient.
    pub k_t: T,
    /// Drag (yaw moment) coefficient.
    pub k_d: T,
    /// Arm length (m).
    pub d_arm: T,
    /// Rotor inertia (kg·m²).
    pub j: T,
}

impl<T: Real> Default for RotorParams<T> {
    fn default() -> Self {
        Self {
            k_t: T::lit(0.60),
            k_d: T::lit(0.20e-3),
            d_arm: T::lit(0.3),
            j: T::lit(4.240e-4),
        }
    }
}

/// Thrust and body torques.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Wrench<T> {
    pub thrust: T,
    pub tau_phi: T,
    pub tau_theta: T,
    pub tau_psi: T,
}

impl<T: Real> Wrench<T> {
    pub fn to_array(&self) -> [T; 4] {
        [self.thrust, self.tau_phi, self.tau_theta, self.tau_psi]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self {
            thrust: a[0],
            tau_phi: a[1],
            tau_theta: a[2],
            tau_psi: a[3],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Allocation<T> {
    /// Squared rotor speeds (rad²/s²).
    pub omega_sq: [T; 8],
    /// Set when some rotor would have needed a negative squared speed.
    pub saturated: bool,
}

/// Sign pattern of each allocation row; the rows are scaled by `K_T`,
/// `d·K_T`, `d·K_T` and `K_D`. Upper and lower rotors of each coaxial pair
/// spin in opposite directions.
const PATTERN: [[i8; 8]; 4] = [
    [1, 1, 1, 1, 1, 1, 1, 1],
    [0, 0, 1, 1, 0, 0, -1, -1],
    [1, 1, 0, 0, -1, -1, 0, 0],
    [-1, 1, -1, 1, -1, 1, -1, 1],
];

fn row_scales<T: Real>(rp: &RotorParams<T>) -> [T; 4] {
    let dk = rp.d_arm * rp.k_t;
    [rp.k_t, dk, dk, rp.k_d]
}

/// Maps eight squared rotor speeds to the wrench.
pub fn allocation_matrix<T: Real>(rp: &RotorParams<T>) -> [[T; 8]; 4] {
    let s = row_scales(rp);
    std::array::from_fn(|r| std::array::from_fn(|c| s[r] * T::lit(PATTERN[r][c] as f64)))
}

pub fn wrench_from_rotors<T: Real>(omega_sq: &[T; 8], rp: &RotorParams<T>) -> Wrench<T> {
    let a = allocation_matrix(rp);
    let mut w = [T::zero(); 4];
    for (r, row) in a.iter().enumerate() {
        w[r] = row.iter().zip(omega_sq).fold(T::zero(), |s, (x, y)| s + *x * *y);
    }
    Wrench::from_array(w)
}

/// Minimum-norm squared speeds producing `w`, clamped at zero.
///
/// The rows of the allocation matrix are mutually orthogonal, so `A Aᵀ` is
/// diagonal and the right inverse reduces to scaling each row by
/// `1 / (scale · nonzero entries)`.
pub fn allocate_rotors<T: Real>(w: &Wrench<T>, rp: &RotorParams<T>) -> Allocation<T> {
    let s = row_scales(rp);
    let wa = w.to_array();
    let mut omega_sq = [T::zero(); 8];
    for (r, pattern) in PATTERN.iter().enumerate() {
        let nonzero = pattern.iter().filter(|p| **p != 0).count();
        let coef = wa[r] / (s[r] * T::lit(nonzero as f64));
        for (o, p) in omega_sq.iter_mut().zip(pattern) {
            match p {
                1 => *o = *o + coef,
                -1 => *o = *o - coef,
                _ => {}
            }
        }
    }
    let scale = omega_sq.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let tol = scale * T::lit(1e-12);
    let mut saturated = false;
    for o in omega_sq.iter_mut() {
        if *o < T::zero() {
            saturated |= *o < -tol;
            *o = T::zero();
        }
    }
    Allocation { omega_sq, saturated }
}
