//! Time evolution of per-axis Gaussian states through piecewise-constant
//! schedules.

mod covariance;
pub mod integrator;
mod schedule;
mod stochastic;

pub use covariance::{
    free_expansion, integrate_covariances, integrate_covariances_with, propagate_quarter_analytic, QuarterKind,
};
pub use integrator::Tolerances;
pub use schedule::{AxisDrive, Particle, Schedule, ScheduleSegment};
pub use stochastic::{max_step, stochastic_trajectory, Kick, StochasticPlan, TrajectoryRecord, MIN_STEPS_PER_PERIOD};

use crate::error::Result;
use crate::gaussian_state::State3D;
use crate::params::HBAR;

/// Momentum diffusion of axis `i` for localization rate `gamma`, kg^2 m^2/s^3.
pub fn momentum_diffusion(particle: &Particle, i: usize, gamma: f64) -> f64 {
    gamma * HBAR * particle.mass * particle.omega_ref[i]
}

/// Propagates through one segment, using the exact free-expansion map for
/// unmeasured trap-off segments and numerical integration otherwise.
pub fn propagate_segment(state: &State3D, seg: &ScheduleSegment, particle: &Particle, tol: &Tolerances) -> Result<State3D> {
    if !seg.trap_on && seg.axes.iter().all(|a| a.measurement_rate() == 0.0) {
        seg.validate()?;
        let d = [0, 1, 2].map(|i| momentum_diffusion(particle, i, seg.axes[i].gamma));
        let out = free_expansion(state, seg.duration, d, particle, seg.gravity_on)?;
        out.check_physical()?;
        return Ok(out);
    }
    integrate_covariances_with(state, seg, particle, tol)
}

/// Propagates through consecutive segments, returning the state after each.
pub fn propagate_segments(
    state: &State3D,
    segments: &[ScheduleSegment],
    particle: &Particle,
    tol: &Tolerances,
) -> Result<Vec<State3D>> {
    let mut out = Vec::with_capacity(segments.len());
    let mut s = *state;
    for seg in segments {
        s = propagate_segment(&s, seg, particle, tol)?;
        out.push(s);
    }
    Ok(out)
}

/// Homogeneous scaled mean-flow matrix over `h` for frequency `w`.
pub fn mean_flow_matrix(w: f64, omega_ref: f64, h: f64) -> [[f64; 2]; 2] {
    covariance::mean_flow(w, omega_ref, 0.0, h).0
}
