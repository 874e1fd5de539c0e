//! Vehicle model, NMPC tracking and rotor allocation.
//!
//! Translational dynamics do not depend on yaw, so the model is integrated
//! directly in the world frame with the heading handled separately.

mod allocation;
mod dynamics;
mod nmpc;

pub use allocation::{allocate_rotors, allocation_matrix, wrench_from_rotors, Allocation, RotorParams, Wrench};
pub use dynamics::{dynamics_step, thrust_direction, ControlInput, McqState, ModelParams};
pub use nmpc::{Nmpc, NmpcConfig, NmpcSolution};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Atmospheric constants for the operating site. Recorded with runs; the
/// point-mass model does not use them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvParams {
    /// Air density (kg/m³).
    pub rho: f64,
    /// Static pressure (Pa).
    pub pressure: f64,
    /// Temperature (K).
    pub temperature: f64,
    /// Specific gas constant (m²/s²/K).
    pub r_gas: f64,
    /// Dynamic viscosity (N·s/m²).
    pub mu: f64,
    pub gamma: f64,
    /// Motor torque constant (N·m/A).
    pub torque_constant: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            rho: 0.017,
            pressure: 720.0,
            temperature: 223.0,
            r_gas: 188.90,
            mu: 1.130e-5,
            gamma: 1.289,
            torque_constant: 0.010e-3,
        }
    }
}

/// Mars surface gravity (m/s²).
pub const MARS_GRAVITY: f64 = 3.71;

/// Model, rotor and atmosphere parameters for the Mars coaxial quadrotor.
pub fn mars_presets<T: Real>() -> (ModelParams<T>, RotorParams<T>, EnvParams) {
    (ModelParams::default(), RotorParams::default(), EnvParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mars_table_values() {
        let (m, r, e) = mars_presets::<f64>();
        assert_eq!(m.g, 3.71);
        assert_eq!(r.k_t, 0.60);
        assert_eq!(r.k_d, 0.20e-3);
        assert_eq!(r.j, 4.240e-4);
        assert_eq!(e.rho, 0.017);
        assert_eq!(e.pressure, 720.0);
        assert_eq!(e.temperature, 223.0);
        assert_eq!(e.r_gas, 188.90);
        assert_eq!(e.mu, 1.130e-5);
        assert_eq!(e.gamma, 1.289);
    }

    #[test]
    fn gravity_consistent_with_gas_state() {
        // p = rho R T holds for the tabulated atmosphere to within a few percent
        let e = EnvParams::default();
        let p = e.rho * e.r_gas * e.temperature;
        assert!((p - e.pressure).abs() / e.pressure < 0.05);
    }
}
