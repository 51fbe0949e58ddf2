use std::f64::consts::PI;

use levsqueeze::dynamics::{
    free_expansion, integrate_covariances, integrate_covariances_with, momentum_diffusion, propagate_quarter_analytic,
    AxisDrive, Particle, QuarterKind, ScheduleSegment, Tolerances,
};
use levsqueeze::gaussian_state::{AxisGaussianState, State3D};
use levsqueeze::params::HBAR;
use proptest::prelude::*;

const M: f64 = 2.0e-18;
const W: f64 = 2.0 * PI * 5.0e4;

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale
}

fn thermal_squeezed(n_th: f64, r: f64, phase: f64) -> AxisGaussianState {
    // thermal state squeezed by e^{-r} along an axis rotated by `phase`
    let base = AxisGaussianState::thermal(M, W, n_th).unwrap();
    let x0sq = HBAR / (M * W);
    let p0sq = HBAR * M * W;
    let (vx, vp) = (base.var_x / x0sq * (2.0 * r).exp(), base.var_p / p0sq * (-2.0 * r).exp());
    let (s, c) = phase.sin_cos();
    AxisGaussianState {
        mean_x: 0.0,
        mean_p: 0.0,
        var_x: (c * c * vx + s * s * vp) * x0sq,
        var_p: (s * s * vx + c * c * vp) * p0sq,
        cov_xp: c * s * (vx - vp) * HBAR,
    }
}

fn segment(drive: AxisDrive, duration: f64) -> ScheduleSegment {
    ScheduleSegment {
        duration,
        trap_on: true,
        axes: [drive; 3],
        gravity_on: false,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn analytic_matches_numeric(ratio in 0.01f64..0.99, g in 0.0f64..0.5, n_th in 0.0f64..2.0,
                                r in -1.0f64..1.0, phase in 0.0f64..PI, three in any::<bool>()) {
        let particle = Particle::new(M, [W; 3], 0).unwrap();
        let kind = if three { QuarterKind::ThreeQuarter } else { QuarterKind::Quarter };
        let drive = AxisDrive::unmeasured(ratio * W, g * W);
        let a = thermal_squeezed(n_th, r, phase);
        let exact = propagate_quarter_analytic(&a, &drive, M, W, kind).unwrap();
        let num = integrate_covariances(&State3D { axes: [a; 3] }, &segment(drive, kind.duration(ratio * W)), &particle, f64::INFINITY)
            .unwrap()
            .axes[0];
        let c_scale = (exact.var_x * exact.var_p).sqrt();
        prop_assert!(rel(num.var_x, exact.var_x, exact.var_x) < 1e-8);
        prop_assert!(rel(num.var_p, exact.var_p, exact.var_p) < 1e-8);
        prop_assert!(rel(num.cov_xp, exact.cov_xp, c_scale) < 1e-8);
    }

    #[test]
    fn unitary_evolution_conserves_determinant(ratio in 0.01f64..3.0, n_th in 0.0f64..2.0,
                                                 r in -1.5f64..1.5, phase in 0.0f64..PI, periods in 0.01f64..5.0) {
        let particle = Particle::new(M, [W; 3], 0).unwrap();
        let a = thermal_squeezed(n_th, r, phase);
        let w = ratio * W;
        let out = integrate_covariances(&State3D { axes: [a; 3] }, &segment(AxisDrive::unmeasured(w, 0.0), periods * 2.0 * PI / w), &particle, f64::INFINITY)
            .unwrap()
            .axes[0];
        prop_assert!(rel(out.determinant(), a.determinant(), a.determinant()) < 1e-10);
    }

    #[test]
    fn measured_evolution_stays_physical(ratio in 0.05f64..1.0, g in 0.0f64..0.5, eta in 0.0f64..1.0, periods in 0.1f64..3.0) {
        let particle = Particle::new(M, [W; 3], 0).unwrap();
        let w = ratio * W;
        let drive = AxisDrive { omega: w, gamma: g * W, gamma_meas: g * W, eta };
        let s0 = State3D { axes: [AxisGaussianState::ground(M, W).unwrap(); 3] };
        let out = integrate_covariances(&s0, &segment(drive, periods * 2.0 * PI / w), &particle, f64::INFINITY).unwrap();
        prop_assert!(out.check_physical().is_ok());
        if eta == 1.0 || g == 0.0 {
            prop_assert!((out.axes[0].purity() - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn free_expansion_is_a_semigroup(t1 in 0.0f64..1e-3, t2 in 0.0f64..1e-3, d in 0.0f64..1e-38, n_th in 0.0f64..2.0) {
        let particle = Particle::new(M, [W; 3], 2).unwrap();
        let s0 = State3D { axes: [thermal_squeezed(n_th, 0.3, 0.4); 3] };
        let a = free_expansion(&free_expansion(&s0, t1, [d; 3], &particle, true).unwrap(), t2, [d; 3], &particle, true).unwrap();
        let b = free_expansion(&s0, t1 + t2, [d; 3], &particle, true).unwrap();
        for i in 0..3 {
            let (x, y) = (a.axes[i], b.axes[i]);
            prop_assert!(rel(x.var_x, y.var_x, y.var_x) < 1e-12);
            prop_assert!(rel(x.var_p, y.var_p, y.var_p) < 1e-12);
            prop_assert!(rel(x.cov_xp, y.cov_xp, (y.var_x * y.var_p).sqrt()) < 1e-12);
            prop_assert!(rel(x.mean_x, y.mean_x, y.mean_x.abs().max(1e-30)) < 1e-12);
        }
    }
}

#[test]
fn free_expansion_matches_trap_off_integration() {
    let particle = Particle::new(M, [W; 3], 0).unwrap();
    let gamma_bb = 1.4e-5;
    let d = momentum_diffusion(&particle, 0, gamma_bb);
    let s0 = State3D {
        axes: [thermal_squeezed(0.0, 1.2, 0.0); 3],
    };
    for dt in [1e-6, 1e-4, 1e-3] {
        let closed = free_expansion(&s0, dt, [d; 3], &particle, false).unwrap();
        let seg = ScheduleSegment {
            duration: dt,
            trap_on: false,
            axes: [AxisDrive::unmeasured(0.0, gamma_bb); 3],
            gravity_on: false,
        };
        let num = integrate_covariances(&s0, &seg, &particle, f64::INFINITY).unwrap();
        for i in 0..3 {
            let (a, b) = (closed.axes[i], num.axes[i]);
            assert!(rel(a.var_x, b.var_x, a.var_x) < 1e-10);
            assert!(rel(a.var_p, b.var_p, a.var_p) < 1e-10);
            assert!(rel(a.cov_xp, b.cov_xp, (a.var_x * a.var_p).sqrt()) < 1e-10);
        }
    }
}

#[test]
fn halving_the_step_cap_changes_little() {
    let particle = Particle::new(M, [W; 3], 0).unwrap();
    let drive = AxisDrive {
        omega: 0.4 * W,
        gamma: 0.2 * W,
        gamma_meas: 0.2 * W,
        eta: 0.3,
    };
    let seg = segment(drive, 3.0 * PI / W);
    let s0 = State3D {
        axes: [AxisGaussianState::ground(M, W).unwrap(); 3],
    };
    let run = |cap: f64| {
        let tol = Tolerances {
            dt_max: cap,
            ..Tolerances::default()
        };
        integrate_covariances_with(&s0, &seg, &particle, &tol).unwrap().axes[0]
    };
    let cap = 2.0 * PI / W / 40.0;
    let (a, b) = (run(cap), run(cap / 2.0));
    assert!(rel(a.var_x, b.var_x, b.var_x) < 1e-9);
    assert!(rel(a.var_p, b.var_p, b.var_p) < 1e-9);
    assert!(rel(a.cov_xp, b.cov_xp, (b.var_x * b.var_p).sqrt()) < 1e-9);
}

#[test]
fn long_time_heating_slope() {
    // Period-averaged momentum variance grows at gamma hbar m w / 2, i.e. the
    // occupation grows at gamma/2 for this dissipator normalization.
    let particle = Particle::new(M, [W; 3], 0).unwrap();
    let gamma = 1e-3 * W;
    let s0 = State3D {
        axes: [AxisGaussianState::ground(M, W).unwrap(); 3],
    };
    let period = 2.0 * PI / W;
    let mut s = s0;
    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for k in 0..=100 {
        if k > 0 {
            s = integrate_covariances(&s, &segment(AxisDrive::unmeasured(W, gamma), period), &particle, f64::INFINITY).unwrap();
        }
        ts.push(k as f64 * period);
        vs.push(s.axes[0].var_p);
    }
    let n = ts.len() as f64;
    let (mt, mv) = (ts.iter().sum::<f64>() / n, vs.iter().sum::<f64>() / n);
    let slope = ts.iter().zip(&vs).map(|(t, v)| (t - mt) * (v - mv)).sum::<f64>()
        / ts.iter().map(|t| (t - mt).powi(2)).sum::<f64>();
    let expected = gamma * HBAR * M * W / 2.0;
    assert!((slope / expected - 1.0).abs() < 1e-6, "slope ratio {}", slope / expected);
}
