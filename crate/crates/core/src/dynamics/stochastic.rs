//! Sampled conditional trajectories under continuous position measurement.
//!
//! The covariances do not depend on the measurement record, so they are
//! computed once per schedule into a [`StochasticPlan`] and shared by all
//! seeds. The conditional means are linear; each step applies the exact
//! noiseless flow for h/2, an innovation kick evaluated with the mid-step
//! covariance, and the flow for another h/2.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::covariance::{from_scaled, integrate_axis, mean_flow, scaled_force, to_scaled, Cov};
use super::integrator::Tolerances;
use super::schedule::{Particle, Schedule};
use crate::error::{Error, Result};
use crate::gaussian_state::State3D;

/// Number of steps per shortest trap period required by the sampler.
pub const MIN_STEPS_PER_PERIOD: f64 = 200.0;

type Flow = ([[f64; 2]; 2], [f64; 2]);

#[derive(Clone, Debug)]
struct PlanStep {
    half_flow: [Flow; 3],
    /// Scaled innovation gains (dX, dP) per unit dW.
    gain: [[f64; 2]; 3],
    h: f64,
}

#[derive(Clone, Debug)]
pub struct StochasticPlan {
    particle: Particle,
    steps: Vec<PlanStep>,
    /// Sample times; `times[0] = 0`.
    times: Vec<f64>,
    /// Scaled covariances at each sample time.
    covs: Vec<[Cov; 3]>,
    initial_means: [[f64; 2]; 3],
}

/// One sampled trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<State3D>,
    pub rng_seed: u64,
    /// Normalized innovations dW/sqrt(dt) per step and axis; one fewer than `times`.
    pub measurement_record: Vec<[f64; 3]>,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> &State3D {
        self.states.last().expect("record holds the initial state")
    }
}

/// A momentum kick `delta_p` (kg m/s per axis) applied at time `t`, which must
/// coincide with a step boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kick {
    pub t: f64,
    pub delta_p: [f64; 3],
}

impl StochasticPlan {
    pub fn new(state: &State3D, schedule: &Schedule, particle: &Particle, dt: f64) -> Result<Self> {
        Self::with_tolerances(state, schedule, particle, dt, &Tolerances::default())
    }

    pub fn with_tolerances(
        state: &State3D,
        schedule: &Schedule,
        particle: &Particle,
        dt: f64,
        tol: &Tolerances,
    ) -> Result<Self> {
        state.check_physical()?;
        let limit = max_step(schedule);
        if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
            return Err(Error::Contract(format!(
                "step {dt:e} s exceeds the shortest period / {MIN_STEPS_PER_PERIOD} = {limit:e} s"
            )));
        }
        let mut covs = Vec::new();
        let mut cur = [[0.0; 3]; 3];
        let mut initial_means = [[0.0; 2]; 3];
        for i in 0..3 {
            let (c, m) = to_scaled(&state.axes[i], particle, i);
            cur[i] = c;
            initial_means[i] = m;
        }
        covs.push(cur);
        let mut times = vec![0.0];
        let mut steps = Vec::new();
        let bounds = schedule.boundaries();
        for (j, seg) in schedule.segments.iter().enumerate() {
            let t = bounds[j];
            if seg.duration == 0.0 {
                continue;
            }
            let n = (seg.duration / dt).ceil().max(1.0) as usize;
            let h = seg.duration / n as f64;
            let mut half_flow = [([[0.0; 2]; 2], [0.0; 2]); 3];
            for (i, f) in half_flow.iter_mut().enumerate() {
                *f = mean_flow(
                    seg.effective_omega(i),
                    particle.omega_ref[i],
                    scaled_force(particle, seg, i),
                    0.5 * h,
                );
            }
            for k in 0..n {
                let mut gain = [[0.0; 2]; 3];
                for i in 0..3 {
                    let w = seg.effective_omega(i);
                    let wr = particle.omega_ref[i];
                    let drive = &seg.axes[i];
                    let t_step = t + k as f64 * h;
                    let fail = |(tf, y, reason): (f64, Cov, String)| Error::Integrator {
                        t: t_step + tf,
                        reason: format!("axis {i}: {reason}"),
                        state: Box::new({
                            let mut s = *state;
                            s.axes[i] = from_scaled(&y, &[0.0; 2], particle, i);
                            s
                        }),
                    };
                    let mid = integrate_axis(cur[i], drive, w, wr, 0.5 * h, tol).map_err(fail)?;
                    let g = 2.0 * drive.measurement_rate().sqrt();
                    gain[i] = [g * mid[0], g * mid[2]];
                    cur[i] = integrate_axis(mid, drive, w, wr, 0.5 * h, tol).map_err(fail)?;
                }
                steps.push(PlanStep { half_flow, gain, h });
                times.push(if k + 1 == n { bounds[j + 1] } else { t + (k + 1) as f64 * h });
                covs.push(cur);
            }
        }
        Ok(StochasticPlan {
            particle: *particle,
            steps,
            times,
            covs,
            initial_means,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State at sample `k` given scaled means.
    fn state_at(&self, k: usize, means: &[[f64; 2]; 3]) -> State3D {
        let mut s = State3D::default();
        for i in 0..3 {
            s.axes[i] = from_scaled(&self.covs[k][i], &means[i], &self.particle, i);
        }
        s
    }

    /// Conditional covariances at sample `k`, with zero means.
    pub fn covariance_at(&self, k: usize) -> State3D {
        self.state_at(k, &[[0.0; 2]; 3])
    }

    /// Runs one trajectory, calling `observe(k, state, innovations)` after
    /// every step `k >= 1` and once with `k = 0` for the initial state.
    pub fn run_with<O>(&self, seed: u64, kick: Option<Kick>, mut observe: O) -> Result<()>
    where
        O: FnMut(usize, &State3D, &[f64; 3]),
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut means = self.initial_means;
        let p0 = [0, 1, 2].map(|i| self.particle.p0(i));
        let mut pending = kick;
        if let Some(kk) = pending {
            if !kk.delta_p.iter().all(|d| d.is_finite()) {
                return Err(crate::error::invalid("kick", "must be finite"));
            }
            let end = *self.times.last().unwrap();
            if !(0.0..=end * (1.0 + 1e-12)).contains(&kk.t) {
                return Err(Error::Contract(format!("kick time {:e} outside the schedule", kk.t)));
            }
        }
        let apply = |means: &mut [[f64; 2]; 3], t: f64, pending: &mut Option<Kick>| {
            if let Some(kk) = *pending {
                if t >= kk.t - 1e-12 * (1.0 + kk.t.abs()) {
                    for i in 0..3 {
                        means[i][1] += kk.delta_p[i] / p0[i];
                    }
                    *pending = None;
                }
            }
        };
        apply(&mut means, 0.0, &mut pending);
        observe(0, &self.state_at(0, &means), &[0.0; 3]);
        for (k, step) in self.steps.iter().enumerate() {
            let sqrt_h = step.h.sqrt();
            let mut xi = [0.0; 3];
            for i in 0..3 {
                xi[i] = StandardNormal.sample(&mut rng);
                let dw = xi[i] * sqrt_h;
                let m = super::covariance::apply_flow(&step.half_flow[i], &means[i]);
                let m = [m[0] + step.gain[i][0] * dw, m[1] + step.gain[i][1] * dw];
                means[i] = super::covariance::apply_flow(&step.half_flow[i], &m);
            }
            apply(&mut means, self.times[k + 1], &mut pending);
            observe(k + 1, &self.state_at(k + 1, &means), &xi);
        }
        Ok(())
    }

    pub fn run(&self, seed: u64, kick: Option<Kick>) -> Result<TrajectoryRecord> {
        let mut rec = TrajectoryRecord {
            times: self.times.clone(),
            states: Vec::with_capacity(self.times.len()),
            rng_seed: seed,
            measurement_record: Vec::with_capacity(self.steps.len()),
        };
        self.run_with(seed, kick, |k, s, xi| {
            rec.states.push(*s);
            if k > 0 {
                rec.measurement_record.push(*xi);
            }
        })?;
        for s in &rec.states {
            s.check_physical()?;
        }
        Ok(rec)
    }

    /// Samples `n` trajectories with seeds `base_seed + j` in parallel and
    /// returns the states at the requested sample indices, ordered by seed.
    pub fn ensemble_at(&self, base_seed: u64, n: usize, samples: &[usize]) -> Result<Vec<Vec<State3D>>> {
        if let Some(&bad) = samples.iter().find(|&&k| k >= self.times.len()) {
            return Err(Error::Contract(format!("sample index {bad} out of range")));
        }
        (0..n)
            .into_par_iter()
            .map(|j| {
                let mut out = vec![State3D::default(); samples.len()];
                self.run_with(base_seed.wrapping_add(j as u64), None, |k, s, _| {
                    for (slot, &want) in samples.iter().enumerate() {
                        if want == k {
                            out[slot] = *s;
                        }
                    }
                })?;
                Ok(out)
            })
            .collect()
    }
}

/// Largest step allowed by the sampler for `schedule`.
pub fn max_step(schedule: &Schedule) -> f64 {
    schedule
        .segments
        .iter()
        .filter(|s| s.trap_on && s.duration > 0.0)
        .flat_map(|s| s.axes.iter().map(|a| a.omega))
        .filter(|&w| w > 0.0)
        .map(|w| 2.0 * PI / w / MIN_STEPS_PER_PERIOD)
        .fold(f64::INFINITY, f64::min)
}

/// Samples one trajectory through `schedule`.
pub fn stochastic_trajectory(
    state: &State3D,
    schedule: &Schedule,
    particle: &Particle,
    dt: f64,
    seed: u64,
) -> Result<TrajectoryRecord> {
    StochasticPlan::new(state, schedule, particle, dt)?.run(seed, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate_covariances, AxisDrive, ScheduleSegment};
    use crate::gaussian_state::ground_state;
    use approx::assert_relative_eq;

    const M: f64 = 2.0e-18;
    const W: f64 = 2.0 * PI * 5.0e4;

    fn setup(eta: f64) -> (State3D, Schedule, Particle) {
        let p = Particle::new(M, [W, W, W / 3.0], 0).unwrap();
        let drive = |w: f64| AxisDrive {
            omega: w,
            gamma: 0.1 * w,
            gamma_meas: 0.1 * w,
            eta,
        };
        let soft = ScheduleSegment {
            duration: PI / W,
            trap_on: true,
            axes: [drive(0.5 * W), drive(0.5 * W), drive(W / 6.0)],
            gravity_on: true,
        };
        let stiff = ScheduleSegment {
            duration: PI / (2.0 * W),
            trap_on: true,
            axes: [drive(W), drive(W), drive(W / 3.0)],
            gravity_on: true,
        };
        let mut s0 = ground_state(M, p.omega_ref).unwrap();
        s0.axes[2].mean_x = 3.0 * p.x0(2);
        (s0, Schedule::new(vec![soft, stiff]).unwrap(), p)
    }

    #[test]
    fn no_measurement_gives_deterministic_means() {
        let (s0, sch, p) = setup(0.0);
        let dt = max_step(&sch);
        let a = stochastic_trajectory(&s0, &sch, &p, dt, 1).unwrap();
        let b = stochastic_trajectory(&s0, &sch, &p, dt, 2).unwrap();
        let mut s = s0;
        for seg in &sch.segments {
            s = integrate_covariances(&s, seg, &p, f64::INFINITY).unwrap();
        }
        let fa = a.final_state();
        assert_eq!(fa, b.final_state());
        for i in 0..3 {
            let scale = p.x0(i);
            assert!((fa.axes[i].mean_x - s.axes[i].mean_x).abs() < 1e-9 * scale);
            assert_relative_eq!(fa.axes[i].var_p, s.axes[i].var_p, max_relative = 1e-9);
        }
    }

    #[test]
    fn conditional_covariance_is_seed_independent_and_runs_reproduce() {
        let (s0, sch, p) = setup(0.2);
        let dt = max_step(&sch);
        let plan = StochasticPlan::new(&s0, &sch, &p, dt).unwrap();
        let a = plan.run(7, None).unwrap();
        let b = plan.run(8, None).unwrap();
        let a2 = plan.run(7, None).unwrap();
        assert_eq!(a, a2);
        assert_ne!(a.final_state().axes[0].mean_x, b.final_state().axes[0].mean_x);
        for (sa, sb) in a.states.iter().zip(&b.states) {
            for i in 0..3 {
                assert_eq!(sa.axes[i].var_p, sb.axes[i].var_p);
                assert_eq!(sa.axes[i].cov_xp, sb.axes[i].cov_xp);
            }
        }
        assert!(a.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(a.measurement_record.len() + 1, a.times.len());
        assert_relative_eq!(*a.times.last().unwrap(), sch.total_duration(), max_relative = 1e-15);
    }

    #[test]
    fn conditioning_reduces_covariance() {
        let (s0, sch, p) = setup(0.5);
        let (_, sch0, _) = setup(0.0);
        let dt = max_step(&sch);
        let c = StochasticPlan::new(&s0, &sch, &p, dt).unwrap();
        let u = StochasticPlan::new(&s0, &sch0, &p, dt).unwrap();
        let k = c.len() - 1;
        for i in 0..3 {
            assert!(c.covariance_at(k).axes[i].var_x < u.covariance_at(k).axes[i].var_x);
        }
    }

    #[test]
    fn step_precondition() {
        let (s0, sch, p) = setup(0.2);
        let dt = max_step(&sch);
        assert!(matches!(
            StochasticPlan::new(&s0, &sch, &p, 1.5 * dt),
            Err(Error::Contract(_))
        ));
        assert!(StochasticPlan::new(&s0, &sch, &p, -1.0).is_err());
    }

    #[test]
    fn kick_shifts_momentum() {
        let (s0, sch, p) = setup(0.0);
        let dt = max_step(&sch);
        let plan = StochasticPlan::new(&s0, &sch, &p, dt).unwrap();
        let dp = [1e-24, 0.0, 0.0];
        let base = plan.run(0, None).unwrap();
        let kicked = plan.run(0, Some(Kick { t: 0.0, delta_p: dp })).unwrap();
        let d0 = kicked.states[0].axes[0].mean_p - base.states[0].axes[0].mean_p;
        assert_relative_eq!(d0, 1e-24, max_relative = 1e-9);
        assert!(plan.run(0, Some(Kick { t: 1.0, delta_p: dp })).is_err());
    }
}
