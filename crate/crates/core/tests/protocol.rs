use std::f64::consts::PI;

use levsqueeze::dynamics::{max_step, Particle, StochasticPlan, Tolerances};
use levsqueeze::gaussian_state::ground_state;
use levsqueeze::params::HBAR;
use levsqueeze::protocol::{
    asymptotic_variance, build_bangbang_schedule, finite_cycle_variance, run_protocol, ImpulseEvent, RunMode,
    SqueezeProtocol, DEFAULT_FREE_FALL,
};

const M: f64 = 2.0e-18;
const WZ: f64 = 2.0 * PI * 5.0e4;

fn run_det(proto: &SqueezeProtocol, free_fall: f64) -> levsqueeze::protocol::ProtocolRun {
    let tl = build_bangbang_schedule(proto, free_fall, false).unwrap();
    let part = Particle::new(M, proto.omega_stiff, 0).unwrap();
    run_protocol(&part, proto, &tl, None, RunMode::Deterministic, None, &Tolerances::default()).unwrap()
}

#[test]
fn fifty_cycles_match_closed_form() {
    for (g, ratio) in [(0.05, 0.5), (0.25, 0.2)] {
        let proto = SqueezeProtocol::new([WZ; 3], ratio, 50, [0.0; 3], [g * WZ; 3], [0.0; 3], 0).unwrap();
        let run = run_det(&proto, 0.0);
        let want = finite_cycle_variance(M, WZ, ratio * WZ, g * WZ, 0.0, 50).unwrap();
        let got = run.result.metrics.var_p[2];
        assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn few_cycles_approach_asymptote() {
    for g in [0.01, 0.1, 0.25] {
        for ratio in [0.2, 0.5] {
            let inf = asymptotic_variance(M, WZ, ratio * WZ, g * WZ).unwrap();
            let fc = finite_cycle_variance(M, WZ, ratio * WZ, g * WZ, 0.0, 30).unwrap();
            assert!((fc / inf - 1.0).abs() < 0.01);
        }
    }
}

#[test]
fn impulse_response_is_linear() {
    let proto = SqueezeProtocol::new([3.0 * WZ, 3.0 * WZ, WZ], 0.2, 2, [0.2; 3], [4e-3 * 3.0 * WZ, 4e-3 * 3.0 * WZ, 0.3 * WZ], [1e-5; 3], 3).unwrap();
    let tl = build_bangbang_schedule(&proto, DEFAULT_FREE_FALL, true).unwrap();
    let part = Particle::new(M, proto.omega_stiff, 0).unwrap();
    let sql = (HBAR * M * WZ).sqrt();
    let shift = |mag: f64| {
        let imp = ImpulseEvent::new(mag, [1.0, 1.0, 1.0], tl.mid_free_fall()).unwrap();
        let r = run_protocol(&part, &proto, &tl, Some(&imp), RunMode::Deterministic, None, &Tolerances::default()).unwrap();
        let base = run_protocol(&part, &proto, &tl, None, RunMode::Deterministic, None, &Tolerances::default()).unwrap();
        [0, 1, 2].map(|i| r.result.final_state.axes[i].mean_x - base.result.final_state.axes[i].mean_x)
    };
    let (a, b, c) = (shift(sql), shift(2.5 * sql), shift(3.5 * sql));
    for i in 0..3 {
        assert!(((a[i] + b[i]) - c[i]).abs() <= 1e-9 * c[i].abs(), "axis {i}");
    }
}

#[test]
fn deterministic_runs_ignore_the_seed_and_stochastic_runs_reproduce() {
    let proto = SqueezeProtocol::new([WZ; 3], 0.5, 2, [0.2; 3], [0.1 * WZ; 3], [0.0; 3], 0).unwrap();
    let tl = build_bangbang_schedule(&proto, 2e-5, false).unwrap();
    let part = Particle::new(M, proto.omega_stiff, 0).unwrap();
    let tol = Tolerances::default();
    let a = run_protocol(&part, &proto, &tl, None, RunMode::Deterministic, None, &tol).unwrap();
    let b = run_protocol(&part, &proto, &tl, None, RunMode::Deterministic, None, &tol).unwrap();
    assert_eq!(a, b);
    let dt = max_step(&tl.schedule);
    let s1 = run_protocol(&part, &proto, &tl, None, RunMode::Stochastic { dt, seed: 11 }, None, &tol).unwrap();
    let s2 = run_protocol(&part, &proto, &tl, None, RunMode::Stochastic { dt, seed: 11 }, None, &tol).unwrap();
    let s3 = run_protocol(&part, &proto, &tl, None, RunMode::Stochastic { dt, seed: 12 }, None, &tol).unwrap();
    assert_eq!(s1, s2);
    assert_ne!(s1.record.final_state().axes[0].mean_x, s3.record.final_state().axes[0].mean_x);
    // covariances agree between modes
    for i in 0..3 {
        let (x, y) = (a.result.final_state.axes[i], s1.result.final_state.axes[i]);
        assert!((x.var_p / y.var_p - 1.0).abs() < 1e-8);
    }
}

#[test]
fn ensemble_spread_restores_unconditional_variance() {
    // smaller ensemble than the acceptance run; same oracle
    let g = 0.1 * WZ;
    let mk = |eta: f64| SqueezeProtocol::new([WZ; 3], 0.5, 2, [eta; 3], [g; 3], [0.0; 3], 0).unwrap();
    let cond = mk(0.2);
    let uncond = mk(0.0);
    let tl = build_bangbang_schedule(&cond, 0.0, false).unwrap();
    let tl0 = build_bangbang_schedule(&uncond, 0.0, false).unwrap();
    let part = Particle::new(M, [WZ; 3], 0).unwrap();
    let s0 = ground_state(M, [WZ; 3]).unwrap();
    let dt = max_step(&tl.schedule);
    let plan = StochasticPlan::new(&s0, &tl.schedule, &part, dt).unwrap();
    let plan0 = StochasticPlan::new(&s0, &tl0.schedule, &part, dt).unwrap();
    let k = plan.len() - 1;
    let n = 2000;
    let ens = plan.ensemble_at(1000, n, &[k]).unwrap();
    for i in 0..3 {
        let ps: Vec<f64> = ens.iter().map(|s| s[0].axes[i].mean_p).collect();
        let mean = ps.iter().sum::<f64>() / n as f64;
        let var = ps.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let vc = plan.covariance_at(k).axes[i].var_p;
        let vu = plan0.covariance_at(k).axes[i].var_p;
        let se = var * (2.0 / (n - 1) as f64).sqrt();
        assert!((var + vc - vu).abs() < 3.0 * se, "axis {i}: {} + {} vs {}", var, vc, vu);
    }
}
