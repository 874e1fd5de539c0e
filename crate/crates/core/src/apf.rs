//! Reactive potential field on the instantaneous point cloud.
//!
//! Points are expressed relative to the vehicle. Every point within `r_f`
//! pushes the vehicle away, the next waypoint pulls it in, and the summed
//! force is saturated, rate limited and rescaled to a fixed step.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApfConfig {
    /// Influence radius (m).
    pub r_f: f64,
    /// Repulsive constant.
    pub l: f64,
    /// Cap on the total force magnitude.
    pub f_max: f64,
    /// Cap on the force change per call.
    pub df_max: f64,
    /// Length (m) of the normalized force.
    pub step_gain: f64,
}

impl Default for ApfConfig {
    fn default() -> Self {
        Self {
            r_f: 2.0,
            l: 1.0,
            f_max: 2.0,
            df_max: 0.5,
            step_gain: 1.5,
        }
    }
}

impl ApfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_f > 0.0) {
            return Err(invalid("r_f", "must be positive"));
        }
        if !(self.l > 0.0) {
            return Err(invalid("l", "must be positive"));
        }
        if !(self.f_max > 0.0) {
            return Err(invalid("f_max", "must be positive"));
        }
        if !(self.df_max > 0.0) {
            return Err(invalid("df_max", "must be positive"));
        }
        if !(self.step_gain > 0.0) {
            return Err(invalid("step_gain", "must be positive"));
        }
        Ok(())
    }
}

/// Force carried between calls.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ForceState<T> {
    pub f_prev: Vec3<T>,
}

impl<T: Real> ForceState<T> {
    pub fn new() -> Self {
        Self { f_prev: Vec3::zero() }
    }
}

/// Sum of per-point repulsions. Points at the origin have no direction and
/// are skipped.
pub fn repulsive_force<T: Real>(points: &[Vec3<T>], cfg: &ApfConfig) -> Vec3<T> {
    let r_f = T::lit(cfg.r_f);
    let l = T::lit(cfg.l);
    let mut f = Vec3::zero();
    for rho in points {
        let d = rho.norm();
        if d > r_f || d == T::zero() {
            continue;
        }
        let s = T::one() - d / r_f;
        f -= *rho * (l * s * s / d);
    }
    f
}

pub fn attractive_force<T: Real>(waypoint: Vec3<T>, pose_est: Vec3<T>) -> Vec3<T> {
    waypoint - pose_est
}

/// Position reference `pose_est + F`. `points` are relative to `pose_est`.
/// A vanishing force holds the current position.
pub fn compute_reference<T: Real>(
    waypoint: Vec3<T>,
    pose_est: Vec3<T>,
    points: &[Vec3<T>],
    state: &mut ForceState<T>,
    cfg: &ApfConfig,
) -> Vec3<T> {
    let raw = attractive_force(waypoint, pose_est) + repulsive_force(points, cfg);
    let saturated = raw.cap_norm(T::lit(cfg.f_max));
    let f = state.f_prev + (saturated - state.f_prev).cap_norm(T::lit(cfg.df_max));
    state.f_prev = f;
    match f.try_normalize(T::lit(1e-12)) {
        Some(dir) => pose_est + dir * T::lit(cfg.step_gain),
        None => pose_est,
    }
}

/// Moves the tracked reference at most `max_step` towards `target`. Applied
/// once per tick this caps the reference speed.
pub fn limit_reference<T: Real>(previous: Vec3<T>, target: Vec3<T>, max_step: T) -> Vec3<T> {
    previous + (target - previous).cap_norm(max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
        Vec3::new(x, y, z)
    }

    #[test]
    fn single_point_at_half_radius() {
        let cfg = ApfConfig::default();
        let f = repulsive_force(&[v(cfg.r_f / 2.0, 0.0, 0.0)], &cfg);
        assert_eq!(f, v(-cfg.l / 4.0, 0.0, 0.0));
    }

    #[test]
    fn symmetric_pair_cancels() {
        let cfg = ApfConfig::default();
        let f = repulsive_force(&[v(0.0, 0.7, 0.0), v(0.0, -0.7, 0.0)], &cfg);
        assert_eq!(f, v(0.0, 0.0, 0.0));
    }

    #[test]
    fn far_and_origin_points_ignored() {
        let cfg = ApfConfig::default();
        let f = repulsive_force(&[v(3.0, 0.0, 0.0), v(0.0, 0.0, 0.0), v(0.0, 2.0 + 1e-12, 0.0)], &cfg);
        assert_eq!(f, v(0.0, 0.0, 0.0));
    }

    #[test]
    fn attraction_is_displacement() {
        assert_eq!(attractive_force(v(2.0, 0.0, 0.0), v(0.0, 0.0, 0.0)), v(2.0, 0.0, 0.0));
        assert_eq!(attractive_force(v(1.0, 1.0, 1.0), v(1.0, 1.0, 1.0)), v(0.0, 0.0, 0.0));
    }

    #[test]
    fn free_space_steps_toward_waypoint() {
        let cfg = ApfConfig::default();
        let mut st = ForceState::new();
        // first call is rate limited to df_max but still normalized
        let r = compute_reference(v(5.0, 2.0, 3.0), v(1.0, 2.0, 3.0), &[], &mut st, &cfg);
        assert!((r - v(1.0 + cfg.step_gain, 2.0, 3.0)).norm() < 1e-12);
        assert!((st.f_prev.norm() - cfg.df_max).abs() < 1e-12);
    }

    #[test]
    fn holds_position_at_waypoint() {
        let cfg = ApfConfig::default();
        let mut st = ForceState::new();
        let p = v(1.0, 1.0, 1.0);
        assert_eq!(compute_reference(p, p, &[], &mut st, &cfg), p);
    }

    #[test]
    fn obstacle_on_line_deflects() {
        let cfg = ApfConfig::default();
        let mut st = ForceState::new();
        let r = compute_reference(v(4.0, 0.0, 0.0), v(0.0, 0.0, 0.0), &[v(1.0, 0.2, 0.0)], &mut st, &cfg);
        assert!(r.y < 0.0);
    }

    #[test]
    fn works_in_single_precision() {
        let cfg = ApfConfig::default();
        let f = repulsive_force(&[Vec3::new(1.0f32, 0.0, 0.0)], &cfg);
        assert_eq!(f, Vec3::new(-0.25f32, 0.0, 0.0));
    }

    fn pt() -> impl Strategy<Value = Vec3<f64>> {
        (-4.0..4.0f64, -4.0..4.0f64, -4.0..4.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn single_point_pushes_away(p in pt()) {
            let cfg = ApfConfig::default();
            let f = repulsive_force(&[p], &cfg);
            let d = p.norm();
            if d > 1e-9 && d < cfg.r_f {
                prop_assert!(f.dot(&p) < 0.0);
            }
        }

        #[test]
        fn far_points_never_matter(pts in prop::collection::vec(pt(), 0..30), wp in pt()) {
            let cfg = ApfConfig::default();
            let near: Vec<_> = pts.iter().copied().filter(|p| p.norm() <= cfg.r_f).collect();
            let mut a = ForceState::new();
            let mut b = ForceState::new();
            let o = v(0.0, 0.0, 0.0);
            prop_assert_eq!(
                compute_reference(wp, o, &pts, &mut a, &cfg),
                compute_reference(wp, o, &near, &mut b, &cfg)
            );
        }

        #[test]
        fn rate_limit_and_step(seq in prop::collection::vec((pt(), prop::collection::vec(pt(), 0..10)), 1..20)) {
            let cfg = ApfConfig::default();
            let mut st = ForceState::new();
            let pose = v(0.5, -0.5, 0.0);
            for (wp, pts) in seq {
                let before = st.f_prev;
                let r = compute_reference(wp, pose, &pts, &mut st, &cfg);
                prop_assert!((st.f_prev - before).norm() <= cfg.df_max + 1e-12);
                prop_assert!(st.f_prev.norm() <= cfg.f_max + 1e-12);
                if st.f_prev.norm() > 1e-12 {
                    prop_assert!(((r - pose).norm() - cfg.step_gain).abs() < 1e-12);
                }
            }
        }
    }
}
