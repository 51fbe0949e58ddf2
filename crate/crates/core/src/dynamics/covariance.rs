//! Deterministic propagators: numerical integration of the conditional
//! covariance equations, the closed-form odd-quarter-period map, and free
//! expansion.
//!
//! Internally each axis is scaled by x0 = sqrt(hbar/(m omega_ref)) and
//! p0 = hbar/x0, so the ground state of the stiff trap has unit-half
//! variances and C is measured in units of hbar.

use std::f64::consts::{FRAC_PI_2, PI};

use super::integrator::{integrate, Tolerances};
use super::schedule::{AxisDrive, Particle, ScheduleSegment};
use crate::error::{Error, Result};
use crate::gaussian_state::{AxisGaussianState, State3D, PHYSICALITY_RTOL};
use crate::params::HBAR;

/// Scaled (V_xx, V_pp, C) of one axis.
pub(crate) type Cov = [f64; 3];

pub(crate) fn to_scaled(a: &AxisGaussianState, p: &Particle, i: usize) -> (Cov, [f64; 2]) {
    let (x0, p0) = (p.x0(i), p.p0(i));
    (
        [a.var_x / (x0 * x0), a.var_p / (p0 * p0), a.cov_xp / HBAR],
        [a.mean_x / x0, a.mean_p / p0],
    )
}

pub(crate) fn from_scaled(c: &Cov, m: &[f64; 2], p: &Particle, i: usize) -> AxisGaussianState {
    let (x0, p0) = (p.x0(i), p.p0(i));
    AxisGaussianState {
        mean_x: m[0] * x0,
        mean_p: m[1] * p0,
        var_x: c[0] * x0 * x0,
        var_p: c[1] * p0 * p0,
        cov_xp: c[2] * HBAR,
    }
}

fn scaled_physical(v: &Cov) -> bool {
    v[0] > 0.0 && v[1] > 0.0 && v[0] * v[1] - v[2] * v[2] >= 0.25 * (1.0 - PHYSICALITY_RTOL)
}

/// Phases within this relative distance of a multiple of pi/2 are snapped.
pub const QUARTER_SNAP_RTOL: f64 = 1e-12;

/// `sin_cos` that returns exact values at multiples of pi/2. Segment
/// durations of odd quarter periods carry rounding of order 1e-16, which the
/// exponential anti-squeezing of many cycles would otherwise amplify.
fn quarter_snapped_sin_cos(theta: f64) -> (f64, f64) {
    let q = theta / FRAC_PI_2;
    let n = q.round();
    if n != 0.0 && (q - n).abs() <= QUARTER_SNAP_RTOL * n.abs() {
        match (n as i64).rem_euclid(4) {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        }
    } else {
        theta.sin_cos()
    }
}

/// Affine map `(X, P) -> M (X, P) + b` of the scaled means over `h` for
/// frequency `w` and scaled force `a` (dP/dt contribution).
pub(crate) fn mean_flow(w: f64, wr: f64, a: f64, h: f64) -> ([[f64; 2]; 2], [f64; 2]) {
    if w == 0.0 {
        return ([[1.0, wr * h], [0.0, 1.0]], [0.5 * wr * a * h * h, a * h]);
    }
    let (s, c) = quarter_snapped_sin_cos(w * h);
    let m = [[c, wr / w * s], [-w / wr * s, c]];
    let x_eq = a * wr / (w * w);
    // u = X - x_eq rotates; P is unaffected by the shift.
    (m, [x_eq * (1.0 - c), w / wr * s * x_eq])
}

pub(crate) fn apply_flow(f: &([[f64; 2]; 2], [f64; 2]), x: &[f64; 2]) -> [f64; 2] {
    let (m, b) = f;
    [
        m[0][0] * x[0] + m[0][1] * x[1] + b[0],
        m[1][0] * x[0] + m[1][1] * x[1] + b[1],
    ]
}

/// Scaled gravitational force on axis `i`, in units of p0 per second.
pub(crate) fn scaled_force(p: &Particle, seg: &ScheduleSegment, i: usize) -> f64 {
    p.mass * p.accel(seg, i) / p.p0(i)
}

fn sym_transform(r: &[[f64; 2]; 2], v: &Cov) -> Cov {
    // R S R^T for S = [[v0, v2], [v2, v1]]
    let a = [r[0][0] * v[0] + r[0][1] * v[2], r[0][0] * v[2] + r[0][1] * v[1]];
    let b = [r[1][0] * v[0] + r[1][1] * v[2], r[1][0] * v[2] + r[1][1] * v[1]];
    [
        a[0] * r[0][0] + a[1] * r[0][1],
        b[0] * r[1][0] + b[1] * r[1][1],
        a[0] * r[1][0] + a[1] * r[1][1],
    ]
}

fn symplectic_inverse(r: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[r[1][1], -r[0][1]], [-r[1][0], r[0][0]]]
}

/// Propagates the scaled covariance of one axis through a constant drive.
///
/// The equations are integrated in the interaction picture of the harmonic
/// flow `R(t)`: with `S = R S~ R^T`,
/// `S~' = gamma v v^T - 4 eta gamma_meas (S~ u)(S~ u)^T`,
/// where `u = R^T e_x` and `v = R^-1 e_p`. The free rotation is then exact
/// and the adaptive steps only resolve diffusion and measurement, which keeps
/// strongly squeezed components accurate relative to their own size.
pub(crate) fn integrate_axis(
    v: Cov,
    drive: &AxisDrive,
    w: f64,
    wr: f64,
    duration: f64,
    tol: &Tolerances,
) -> std::result::Result<Cov, (f64, Cov, String)> {
    let gamma = drive.gamma;
    let meas = drive.measurement_rate();
    if gamma == 0.0 && meas == 0.0 {
        return Ok(sym_transform(&mean_flow(w, wr, 0.0, duration).0, &v));
    }
    let rhs = |t: f64, y: &Cov| -> Cov {
        let r = mean_flow(w, wr, 0.0, t).0;
        let ri = symplectic_inverse(&r);
        let u = [r[0][0], r[0][1]];
        let vv = [ri[0][1], ri[1][1]];
        let su = [y[0] * u[0] + y[2] * u[1], y[2] * u[0] + y[1] * u[1]];
        let k = 4.0 * meas;
        [
            gamma * vv[0] * vv[0] - k * su[0] * su[0],
            gamma * vv[1] * vv[1] - k * su[1] * su[1],
            gamma * vv[0] * vv[1] - k * su[0] * su[1],
        ]
    };
    // steps must resolve the rotation of the interaction-picture coefficients
    let rate = w.max(gamma).max(meas).max(1.0 / duration.max(1e-300));
    let y = integrate(rhs, v, 0.0, duration, 0.05 / rate, tol, |_, y| {
        if scaled_physical(y) {
            Ok(())
        } else {
            Err(format!("determinant {:e} hbar^2 below 1/4", y[0] * y[1] - y[2] * y[2]))
        }
    })
    .map_err(|f| {
        let r = mean_flow(w, wr, 0.0, f.t).0;
        (f.t, sym_transform(&r, &f.y), f.reason)
    })?;
    let out = sym_transform(&mean_flow(w, wr, 0.0, duration).0, &y);
    if !scaled_physical(&out) {
        return Err((duration, out, "determinant below 1/4 after rotation".into()));
    }
    Ok(out)
}

/// Advances all three axes through one segment. Covariances follow the
/// conditional Riccati flow; means follow the noiseless deterministic part
/// exactly (piecewise-constant drive makes the mean flow affine).
pub fn integrate_covariances(state: &State3D, seg: &ScheduleSegment, particle: &Particle, dt_max: f64) -> Result<State3D> {
    let tol = Tolerances {
        dt_max,
        ..Tolerances::default()
    };
    integrate_covariances_with(state, seg, particle, &tol)
}

pub fn integrate_covariances_with(
    state: &State3D,
    seg: &ScheduleSegment,
    particle: &Particle,
    tol: &Tolerances,
) -> Result<State3D> {
    seg.validate()?;
    state.check_physical()?;
    let mut out = *state;
    for i in 0..3 {
        let (v, m) = to_scaled(&state.axes[i], particle, i);
        let w = seg.effective_omega(i);
        let wr = particle.omega_ref[i];
        let v_new = integrate_axis(v, &seg.axes[i], w, wr, seg.duration, tol).map_err(
            |(t, y, reason)| {
                let mut dump = out;
                dump.axes[i] = from_scaled(&y, &m, particle, i);
                Error::Integrator {
                    t,
                    reason: format!("axis {i}: {reason}"),
                    state: Box::new(dump),
                }
            },
        )?;
        let m_new = apply_flow(&mean_flow(w, wr, scaled_force(particle, seg, i), seg.duration), &m);
        out.axes[i] = from_scaled(&v_new, &m_new, particle, i);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuarterKind {
    Quarter,
    ThreeQuarter,
}

impl QuarterKind {
    pub fn quarters(self) -> u32 {
        match self {
            QuarterKind::Quarter => 1,
            QuarterKind::ThreeQuarter => 3,
        }
    }

    pub fn duration(self, omega: f64) -> f64 {
        self.quarters() as f64 * PI / (2.0 * omega)
    }
}

/// Closed-form evolution of one axis for a quarter (or three-quarter) period
/// of `drive.omega`, without measurement. The diffusion is
/// `D = gamma hbar m omega_ref` and the map is
/// `V_xx -> V_pp/(m w)^2 + n pi D/(4 m^2 w^3)`,
/// `V_pp -> (m w)^2 V_xx + n pi D/(4 w)`,
/// `C -> -C + D/(2 m w^2)`, with n = 1 or 3.
pub fn propagate_quarter_analytic(
    state: &AxisGaussianState,
    drive: &AxisDrive,
    mass: f64,
    omega_ref: f64,
    kind: QuarterKind,
) -> Result<AxisGaussianState> {
    if drive.eta != 0.0 {
        return Err(Error::Contract(
            "closed-form quarter-period map requires eta = 0".into(),
        ));
    }
    crate::error::require_positive("omega", drive.omega)?;
    crate::error::require_positive("mass", mass)?;
    if !(drive.gamma >= 0.0) {
        return Err(crate::error::invalid("gamma", "must be non-negative"));
    }
    let w = drive.omega;
    let mw = mass * w;
    let d = drive.gamma * HBAR * mass * omega_ref;
    let n = kind.quarters() as f64;
    let sign = if kind == QuarterKind::Quarter { 1.0 } else { -1.0 };
    Ok(AxisGaussianState {
        mean_x: sign * state.mean_p / mw,
        mean_p: -sign * mw * state.mean_x,
        var_x: state.var_p / (mw * mw) + n * PI * d / (4.0 * mass * mass * w.powi(3)),
        var_p: mw * mw * state.var_x + n * PI * d / (4.0 * w),
        cov_xp: -state.cov_xp + d / (2.0 * mass * w * w),
    })
}

/// Exact ballistic expansion with momentum diffusion `d_bb[i]`
/// (kg^2 m^2 / s^3). The position variance picks up `D dt^3 / (3 m^2)`
/// from diffusion accumulated during the flight.
pub fn free_expansion(
    state: &State3D,
    dt: f64,
    d_bb: [f64; 3],
    particle: &Particle,
    gravity_on: bool,
) -> Result<State3D> {
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(crate::error::invalid("dt", "must be finite and non-negative"));
    }
    let m = particle.mass;
    let mut out = *state;
    for (i, a) in out.axes.iter_mut().enumerate() {
        let s = state.axes[i];
        let d = d_bb[i];
        let acc = if gravity_on && i == particle.vertical_axis {
            -particle.gravity
        } else {
            0.0
        };
        a.var_x = s.var_x + 2.0 * dt * s.cov_xp / m + dt * dt * s.var_p / (m * m) + d * dt.powi(3) / (3.0 * m * m);
        a.cov_xp = s.cov_xp + dt * s.var_p / m + d * dt * dt / (2.0 * m);
        a.var_p = s.var_p + d * dt;
        a.mean_x = s.mean_x + dt * s.mean_p / m + 0.5 * acc * dt * dt;
        a.mean_p = s.mean_p + m * acc * dt;
    }
    Ok(out)
}
