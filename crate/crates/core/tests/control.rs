use lavatube_core::control::{
    allocate_rotors, dynamics_step, wrench_from_rotors, ControlInput, McqState, ModelParams, Nmpc, NmpcConfig,
    RotorParams, Wrench,
};
use lavatube_core::geom::Vec3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUBSTEPS: usize = 10;

fn plant(x: &McqState<f64>, u: &ControlInput<f64>, m: &ModelParams<f64>) -> McqState<f64> {
    let h = m.dt / SUBSTEPS as f64;
    (0..SUBSTEPS).fold(*x, |s, _| dynamics_step(&s, u, m, h))
}

/// Settling time of the closed loop, `None` if it never settles.
fn settle_time(mut step: impl FnMut(&McqState<f64>, &ControlInput<f64>) -> ControlInput<f64>, target: Vec3<f64>) -> Option<f64> {
    let m = ModelParams::<f64>::default();
    let mut x = McqState::hover_at(Vec3::zero());
    let mut u = ControlInput::hover(m.g);
    let mut settled_since = None;
    for k in 0..400 {
        u = step(&x, &u);
        x = plant(&x, &u, &m);
        let t = (k + 1) as f64 * m.dt;
        if x.p.distance(&target) < 0.05 {
            settled_since.get_or_insert(t);
        } else {
            settled_since = None;
        }
    }
    settled_since
}

#[test]
fn nmpc_settles_one_metre_step() {
    let m = ModelParams::<f64>::default();
    let cfg = NmpcConfig::default();
    let mut c = Nmpc::new(cfg.clone()).unwrap();
    let target = Vec3::new(1.0, 0.0, 0.0);
    let x_ref = McqState::hover_at(target);
    let mut max_rate: f64 = 0.0;
    let t = settle_time(
        |x, u| {
            let sol = c.solve(x, &x_ref, u, &m).unwrap();
            let mut prev = *u;
            for v in &sol.inputs {
                max_rate = max_rate.max((v.phi_ref - prev.phi_ref).abs()).max((v.theta_ref - prev.theta_ref).abs());
                assert!(v.thrust >= cfg.u_min[0] && v.thrust <= cfg.u_max[0]);
                assert!(v.phi_ref.abs() <= cfg.u_max[1] && v.theta_ref.abs() <= cfg.u_max[2]);
                prev = *v;
            }
            sol.first()
        },
        target,
    );
    assert!(max_rate <= cfg.dphi_max);
    let t = t.expect("step response never settled");
    assert!(t <= 10.0, "settled at {t}");
}

#[test]
fn pd_reference_settles_same_step() {
    // cascaded PD on position with small-angle inversion, as a sanity oracle
    let m = ModelParams::<f64>::default();
    let target = Vec3::new(1.0, 0.0, 0.0);
    let t = settle_time(
        |x, _| {
            let e = target - x.p;
            let a = e * 1.2 - x.v * 1.8;
            let thrust = m.g + a.z;
            ControlInput::new(thrust, (-a.y / m.g).clamp(-0.35, 0.35), (a.x / m.g).clamp(-0.35, 0.35))
        },
        target,
    );
    assert!(t.is_some_and(|t| t <= 10.0));
}

#[test]
fn step_sequence_respects_rate_bounds() {
    let m = ModelParams::<f64>::default();
    let cfg = NmpcConfig::default();
    let mut c = Nmpc::new(cfg.clone()).unwrap();
    let x0 = McqState::hover_at(Vec3::zero());
    let u0 = ControlInput::hover(m.g);
    let sol = c.solve(&x0, &McqState::hover_at(Vec3::new(1.0, 0.0, 0.0)), &u0, &m).unwrap();
    let mut prev = u0;
    for u in &sol.inputs {
        assert!((u.phi_ref - prev.phi_ref).abs() <= cfg.dphi_max);
        assert!((u.theta_ref - prev.theta_ref).abs() <= cfg.dtheta_max);
        prev = *u;
    }
    assert!(sol.first().theta_ref > 0.0);
}

#[test]
fn allocation_round_trip() {
    let rp = RotorParams::<f64>::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    while n < 500 {
        let w = Wrench {
            thrust: rng.random_range(0.5..10.0),
            tau_phi: rng.random_range(-0.2..0.2),
            tau_theta: rng.random_range(-0.2..0.2),
            tau_psi: rng.random_range(-2e-4..2e-4),
        };
        let al = allocate_rotors(&w, &rp);
        if al.saturated {
            continue;
        }
        let back = wrench_from_rotors(&al.omega_sq, &rp);
        for (a, b) in back.to_array().iter().zip(w.to_array()) {
            assert!((a - b).abs() < 1e-9);
        }
        n += 1;
    }
}
