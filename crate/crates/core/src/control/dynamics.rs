use serde::{Deserialize, Serialize};

use crate::geom::Vec3;
use crate::scalar::Real;

/// Position, velocity, roll and pitch.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McqState<T> {
    pub p: Vec3<T>,
    pub v: Vec3<T>,
    pub phi: T,
    pub theta: T,
}

impl<T: Real> McqState<T> {
    pub fn hover_at(p: Vec3<T>) -> Self {
        Self {
            p,
            v: Vec3::zero(),
            phi: T::zero(),
            theta: T::zero(),
        }
    }

    pub fn to_array(&self) -> [T; 8] {
        [self.p.x, self.p.y, self.p.z, self.v.x, self.v.y, self.v.z, self.phi, self.theta]
    }

    pub fn from_array(a: [T; 8]) -> Self {
        Self {
            p: Vec3::new(a[0], a[1], a[2]),
            v: Vec3::new(a[3], a[4], a[5]),
            phi: a[6],
            theta: a[7],
        }
    }
}

/// Mass-normalized thrust (m/s²) and attitude references (rad).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ControlInput<T> {
    pub thrust: T,
    pub phi_ref: T,
    pub theta_ref: T,
}

impl<T: Real> ControlInput<T> {
    pub fn new(thrust: T, phi_ref: T, theta_ref: T) -> Self {
        Self {
            thrust,
            phi_ref,
            theta_ref,
        }
    }

    pub fn hover(g: T) -> Self {
        Self::new(g, T::zero(), T::zero())
    }

    pub fn to_array(&self) -> [T; 3] {
        [self.thrust, self.phi_ref, self.theta_ref]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams<T> {
    pub g: T,
    /// Linear drag per axis (1/s).
    pub drag: [T; 3],
    pub k_phi: T,
    pub k_theta: T,
    pub tau_phi: T,
    pub tau_theta: T,
    /// Integration step (s).
    pub dt: T,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self {
            g: T::lit(super::MARS_GRAVITY),
            drag: [T::lit(0.1); 3],
            k_phi: T::one(),
            k_theta: T::one(),
            tau_phi: T::lit(0.2),
            tau_theta: T::lit(0.2),
            dt: T::lit(0.05),
        }
    }
}

impl<T: Real> ModelParams<T> {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::error::invalid;
        if !(self.g > T::zero()) {
            return Err(invalid("g", "must be positive"));
        }
        if !(self.tau_phi > T::zero() && self.tau_theta > T::zero()) {
            return Err(invalid("tau", "time constants must be positive"));
        }
        if !(self.dt > T::zero()) {
            return Err(invalid("dt", "must be positive"));
        }
        if self.drag.iter().any(|a| !(*a >= T::zero())) {
            return Err(invalid("drag", "must be non-negative"));
        }
        Ok(())
    }
}

/// Unit thrust axis for roll `phi` and pitch `theta`: `Rot_y(theta) Rot_x(phi) e_z`.
pub fn thrust_direction<T: Real>(phi: T, theta: T) -> Vec3<T> {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    Vec3::new(cp * st, -sp, cp * ct)
}

/// One forward-Euler step of length `dt`.
pub fn dynamics_step<T: Real>(x: &McqState<T>, u: &ControlInput<T>, m: &ModelParams<T>, dt: T) -> McqState<T> {
    let acc = thrust_direction(x.phi, x.theta) * u.thrust + Vec3::new(T::zero(), T::zero(), -m.g)
        - Vec3::new(m.drag[0] * x.v.x, m.drag[1] * x.v.y, m.drag[2] * x.v.z);
    McqState {
        p: x.p + x.v * dt,
        v: x.v + acc * dt,
        phi: x.phi + dt * (m.k_phi * u.phi_ref - x.phi) / m.tau_phi,
        theta: x.theta + dt * (m.k_theta * u.theta_ref - x.theta) / m.tau_theta,
    }
}
