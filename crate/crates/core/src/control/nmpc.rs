//! Receding-horizon tracking on the Euler-discretized model.
//!
//! Decision variables are the thrust at each step and the per-step change of
//! the roll and pitch references, so the rate bounds become simple boxes.
//! Absolute attitude bounds are handled by a penalty during the solve and a
//! final clipping pass, which makes the returned sequence exactly feasible.
//! The solver is a projected gradient method with Barzilai-Borwein steps and
//! Armijo backtracking; gradients come from an adjoint sweep.

use serde::{Deserialize, Serialize};

use super::dynamics::{dynamics_step, thrust_direction, ControlInput, McqState, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::geom::Vec3;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmpcConfig<T> {
    pub horizon: usize,
    /// State weights: position, velocity, roll, pitch.
    pub w_x: [T; 8],
    /// Input weights against hover: thrust, roll ref, pitch ref.
    pub w_u: [T; 3],
    /// Input-rate weights.
    pub w_du: [T; 3],
    pub u_min: [T; 3],
    pub u_max: [T; 3],
    /// Largest change of the roll reference between steps (rad).
    pub dphi_max: T,
    pub dtheta_max: T,
    /// Predicted speeds above this are penalized with `w_speed`.
    pub v_max: Option<T>,
    pub w_speed: T,
    /// Penalty on attitude references outside `u_min..u_max`.
    pub w_box: T,
    pub max_iters: usize,
    /// Stationarity tolerance on the projected gradient.
    pub tol: T,
}

impl<T: Real> Default for NmpcConfig<T> {
    fn default() -> Self {
        let g = T::lit(super::MARS_GRAVITY);
        let a = T::lit(0.35);
        Self {
            horizon: 20,
            w_x: [4.0, 4.0, 6.0, 0.3, 0.3, 1.0, 0.5, 0.5].map(T::lit),
            w_u: [1.0, 2.0, 2.0].map(T::lit),
            w_du: [0.5, 10.0, 10.0].map(T::lit),
            u_min: [T::zero(), -a, -a],
            u_max: [g + g, a, a],
            dphi_max: T::lit(0.05),
            dtheta_max: T::lit(0.05),
            v_max: None,
            w_speed: T::lit(50.0),
            w_box: T::lit(1e3),
            max_iters: 100,
            tol: T::lit(1e-6),
        }
    }
}

impl<T: Real> NmpcConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(invalid("horizon", "must be at least 1"));
        }
        let weights = self.w_x.iter().chain(&self.w_u).chain(&self.w_du);
        if weights.chain([&self.w_speed, &self.w_box]).any(|w| !(*w >= T::zero())) {
            return Err(invalid("weights", "must be non-negative"));
        }
        for a in 0..3 {
            if !(self.u_min[a] <= self.u_max[a]) {
                return Err(Error::InfeasibleBounds(format!("u_min[{a}] > u_max[{a}]")));
            }
        }
        if !(self.dphi_max > T::zero() && self.dtheta_max > T::zero()) {
            return Err(invalid("rate bounds", "must be positive"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NmpcSolution<T> {
    pub inputs: Vec<ControlInput<T>>,
    pub cost: T,
    pub iterations: usize,
    /// False when the iteration limit was hit before stationarity.
    pub converged: bool,
}

impl<T: Real> NmpcSolution<T> {
    pub fn first(&self) -> ControlInput<T> {
        self.inputs[0]
    }
}

/// Solver state: configuration plus the warm start from the last solve.
#[derive(Clone, Debug)]
pub struct Nmpc<T> {
    cfg: NmpcConfig<T>,
    warm: Option<Vec<T>>,
}

struct Problem<'a, T> {
    cfg: &'a NmpcConfig<T>,
    m: &'a ModelParams<T>,
    x0: McqState<T>,
    x_ref: [T; 8],
    u_prev: ControlInput<T>,
    u_ref: [T; 3],
}

fn sq<T: Real>(x: T) -> T {
    x * x
}

impl<T: Real> Problem<'_, T> {
    fn n(&self) -> usize {
        self.cfg.horizon
    }

    fn lower(&self, idx: usize) -> T {
        match idx % 3 {
            0 => self.cfg.u_min[0],
            1 => -self.cfg.dphi_max,
            _ => -self.cfg.dtheta_max,
        }
    }

    fn upper(&self, idx: usize) -> T {
        match idx % 3 {
            0 => self.cfg.u_max[0],
            1 => self.cfg.dphi_max,
            _ => self.cfg.dtheta_max,
        }
    }

    fn project(&self, z: &mut [T]) {
        for (i, v) in z.iter_mut().enumerate() {
            *v = v.clamp_to(self.lower(i), self.upper(i));
        }
    }

    fn inputs(&self, z: &[T]) -> Vec<ControlInput<T>> {
        let mut phi = self.u_prev.phi_ref;
        let mut theta = self.u_prev.theta_ref;
        (0..self.n())
            .map(|i| {
                phi = phi + z[3 * i + 1];
                theta = theta + z[3 * i + 2];
                ControlInput::new(z[3 * i], phi, theta)
            })
            .collect()
    }

    fn box_penalty(&self, a: T, axis: usize) -> (T, T) {
        let (lo, hi) = (self.cfg.u_min[axis], self.cfg.u_max[axis]);
        let w = self.cfg.w_box;
        if a > hi {
            (w * sq(a - hi), T::two() * w * (a - hi))
        } else if a < lo {
            (w * sq(a - lo), T::two() * w * (a - lo))
        } else {
            (T::zero(), T::zero())
        }
    }

    /// State stage cost and its gradient.
    fn state_cost(&self, x: &McqState<T>) -> (T, [T; 8]) {
        let xa = x.to_array();
        let mut c = T::zero();
        let mut g = [T::zero(); 8];
        for k in 0..8 {
            let e = xa[k] - self.x_ref[k];
            c = c + self.cfg.w_x[k] * e * e;
            g[k] = T::two() * self.cfg.w_x[k] * e;
        }
        if let Some(vmax) = self.cfg.v_max {
            let s = x.v.norm();
            if s > vmax {
                let over = s - vmax;
                c = c + self.cfg.w_speed * over * over;
                let k = T::two() * self.cfg.w_speed * over / s;
                g[3] = g[3] + k * x.v.x;
                g[4] = g[4] + k * x.v.y;
                g[5] = g[5] + k * x.v.z;
            }
        }
        (c, g)
    }

    fn cost(&self, z: &[T]) -> T {
        self.evaluate(z, false).0
    }

    /// Total cost and, if requested, its gradient with respect to `z`.
    fn evaluate(&self, z: &[T], want_grad: bool) -> (T, Vec<T>) {
        let n = self.n();
        let m = self.m;
        let dt = m.dt;
        let us = self.inputs(z);
        let mut xs = Vec::with_capacity(n + 1);
        xs.push(self.x0);
        for u in &us {
            let next = dynamics_step(xs.last().unwrap(), u, m, dt);
            xs.push(next);
        }

        let mut total = T::zero();
        // gradient of the cost with respect to the absolute inputs
        let mut gu = vec![[T::zero(); 3]; n];
        let mut prev = self.u_prev.to_array();
        for (i, u) in us.iter().enumerate() {
            let ua = u.to_array();
            for a in 0..3 {
                let e = ua[a] - self.u_ref[a];
                let d = ua[a] - prev[a];
                total = total + self.cfg.w_u[a] * e * e + self.cfg.w_du[a] * d * d;
                gu[i][a] = gu[i][a] + T::two() * (self.cfg.w_u[a] * e + self.cfg.w_du[a] * d);
                if i > 0 {
                    gu[i - 1][a] = gu[i - 1][a] - T::two() * self.cfg.w_du[a] * d;
                }
            }
            for axis in 1..3 {
                let (c, g) = self.box_penalty(ua[axis], axis);
                total = total + c;
                gu[i][axis] = gu[i][axis] + g;
            }
            prev = ua;
        }
        let mut lx: Vec<[T; 8]> = Vec::with_capacity(n + 1);
        lx.push([T::zero(); 8]);
        for x in &xs[1..] {
            let (c, g) = self.state_cost(x);
            total = total + c;
            lx.push(g);
        }
        if !want_grad {
            return (total, Vec::new());
        }

        // adjoint sweep
        let mut lam = lx[n];
        for i in (0..n).rev() {
            let x = &xs[i];
            let u = &us[i];
            let (sp, cp) = x.phi.sin_cos();
            let (st, ct) = x.theta.sin_cos();
            let th = u.thrust;
            let lv = Vec3::new(lam[3], lam[4], lam[5]);
            let d_dphi = Vec3::new(-th * sp * st, -th * cp, -th * sp * ct);
            let d_dtheta = Vec3::new(th * cp * ct, T::zero(), -th * cp * st);
            let d_dthrust = thrust_direction(x.phi, x.theta);

            gu[i][0] = gu[i][0] + dt * d_dthrust.dot(&lv);
            gu[i][1] = gu[i][1] + dt * m.k_phi / m.tau_phi * lam[6];
            gu[i][2] = gu[i][2] + dt * m.k_theta / m.tau_theta * lam[7];

            if i == 0 {
                break;
            }
            let mut next = lx[i];
            for k in 0..3 {
                next[k] = next[k] + lam[k];
                next[3 + k] = next[3 + k] + dt * lam[k] + (T::one() - dt * m.drag[k]) * lam[3 + k];
            }
            next[6] = next[6] + dt * d_dphi.dot(&lv) + (T::one() - dt / m.tau_phi) * lam[6];
            next[7] = next[7] + dt * d_dtheta.dot(&lv) + (T::one() - dt / m.tau_theta) * lam[7];
            lam = next;
        }

        // chain through the cumulative sums
        let mut gz = vec![T::zero(); 3 * n];
        let mut acc = [T::zero(); 2];
        for i in (0..n).rev() {
            acc[0] = acc[0] + gu[i][1];
            acc[1] = acc[1] + gu[i][2];
            gz[3 * i] = gu[i][0];
            gz[3 * i + 1] = acc[0];
            gz[3 * i + 2] = acc[1];
        }
        (total, gz)
    }

    fn stationarity(&self, z: &[T], g: &[T]) -> T {
        z.iter().zip(g).enumerate().fold(T::zero(), |m, (i, (zi, gi))| {
            let p = (*zi - *gi).clamp_to(self.lower(i), self.upper(i));
            m.max((p - *zi).abs())
        })
    }
}

/// Moves `target` into `[lo, hi]` and within `rate` of `prev`, such that the
/// computed difference `|result - prev|` also respects `rate` after rounding.
fn bounded_step<T: Real>(prev: T, target: T, rate: T, lo: T, hi: T) -> T {
    let mut v = target.clamp_to((prev - rate).max(lo), (prev + rate).min(hi));
    let shrink = T::one() - T::lit(4.0) * T::epsilon();
    while (v - prev).abs() > rate {
        v = prev + (v - prev) * shrink;
    }
    v
}

impl<T: Real> Nmpc<T> {
    pub fn new(cfg: NmpcConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, warm: None })
    }

    pub fn config(&self) -> &NmpcConfig<T> {
        &self.cfg
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    fn problem<'a>(
        &'a self,
        x0: &McqState<T>,
        x_ref: &McqState<T>,
        u_prev: &ControlInput<T>,
        m: &'a ModelParams<T>,
    ) -> Problem<'a, T> {
        Problem {
            cfg: &self.cfg,
            m,
            x0: *x0,
            x_ref: x_ref.to_array(),
            u_prev: *u_prev,
            u_ref: ControlInput::hover(m.g).to_array(),
        }
    }

    /// Cost and gradient for decision vector `z` (thrust, roll step, pitch
    /// step per horizon step). Exposed for derivative checks.
    pub fn cost_and_gradient(
        &self,
        z: &[T],
        x0: &McqState<T>,
        x_ref: &McqState<T>,
        u_prev: &ControlInput<T>,
        m: &ModelParams<T>,
    ) -> (T, Vec<T>) {
        self.problem(x0, x_ref, u_prev, m).evaluate(z, true)
    }

    pub fn solve(
        &mut self,
        x0: &McqState<T>,
        x_ref: &McqState<T>,
        u_prev: &ControlInput<T>,
        m: &ModelParams<T>,
    ) -> Result<NmpcSolution<T>> {
        let n = self.cfg.horizon;
        for (axis, prev, rate) in [(1, u_prev.phi_ref, self.cfg.dphi_max), (2, u_prev.theta_ref, self.cfg.dtheta_max)] {
            if prev < self.cfg.u_min[axis] - rate || prev > self.cfg.u_max[axis] + rate {
                return Err(Error::InfeasibleBounds(format!(
                    "previous attitude reference {prev} cannot reach the allowed range in one step"
                )));
            }
        }
        let prob = self.problem(x0, x_ref, u_prev, m);
        let mut z = match &self.warm {
            Some(w) if w.len() == 3 * n => {
                let mut z = w[3..].to_vec();
                z.extend_from_slice(&[w[3 * n - 3], T::zero(), T::zero()]);
                z
            }
            _ => (0..n).flat_map(|_| [m.g, T::zero(), T::zero()]).collect(),
        };
        prob.project(&mut z);

        let (mut f, mut g) = prob.evaluate(&z, true);
        let gmax = g.iter().fold(T::zero(), |a, b| a.max(b.abs()));
        let mut step = if gmax > T::zero() { T::one().min(T::one() / gmax) } else { T::one() };
        let mut iterations = 0;
        let mut converged = false;
        let c1 = T::lit(1e-4);
        let mut trial = vec![T::zero(); 3 * n];
        while iterations < self.cfg.max_iters {
            if prob.stationarity(&z, &g) <= self.cfg.tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut accepted = false;
            for _ in 0..40 {
                for i in 0..z.len() {
                    trial[i] = z[i] - step * g[i];
                }
                prob.project(&mut trial);
                let dz2 = trial.iter().zip(&z).fold(T::zero(), |s, (a, b)| s + sq(*a - *b));
                let ft = prob.cost(&trial);
                if ft <= f - c1 / step * dz2 {
                    accepted = true;
                    break;
                }
                step = step * T::half();
            }
            if !accepted {
                break;
            }
            let (fn_, gn) = prob.evaluate(&trial, true);
            let mut ss = T::zero();
            let mut sy = T::zero();
            for i in 0..z.len() {
                let s = trial[i] - z[i];
                ss = ss + s * s;
                sy = sy + s * (gn[i] - g[i]);
            }
            step = if sy > T::zero() {
                (ss / sy).clamp_to(T::lit(1e-10), T::lit(1e10))
            } else {
                step * T::two()
            };
            std::mem::swap(&mut z, &mut trial);
            f = fn_;
            g = gn;
        }
        if !converged {
            log::debug!("nmpc stopped after {iterations} iterations without reaching tolerance");
        }

        // exact feasibility for the absolute attitude bounds
        let mut inputs = prob.inputs(&z);
        let mut prev = *u_prev;
        for u in inputs.iter_mut() {
            u.phi_ref = bounded_step(prev.phi_ref, u.phi_ref, self.cfg.dphi_max, self.cfg.u_min[1], self.cfg.u_max[1]);
            u.theta_ref = bounded_step(
                prev.theta_ref,
                u.theta_ref,
                self.cfg.dtheta_max,
                self.cfg.u_min[2],
                self.cfg.u_max[2],
            );
            prev = *u;
        }
        let mut p = u_prev.to_array();
        for (i, u) in inputs.iter().enumerate() {
            z[3 * i + 1] = u.phi_ref - p[1];
            z[3 * i + 2] = u.theta_ref - p[2];
            p = u.to_array();
        }
        let cost = prob.cost(&z);
        self.warm = Some(z);
        Ok(NmpcSolution {
            inputs,
            cost,
            iterations,
            converged,
        })
    }
}
