//! Bang-bang squeezing protocol, analytic predictions and impulse-sensing
//! figures of merit.

use std::f64::consts::PI;

use crate::dynamics::{
    propagate_segments, AxisDrive, Kick, Particle, Schedule, ScheduleSegment, StochasticPlan, Tolerances,
    TrajectoryRecord,
};
use crate::error::{invalid, require_positive, Error, Result};
use crate::gaussian_state::{ground_state, squeeze_metrics, SqueezeMetrics, State3D};
use crate::params::HBAR;

/// Default free-fall duration, s.
pub const DEFAULT_FREE_FALL: f64 = 0.5e-3;
/// Relative agreement required between per-axis segment durations.
pub const HARMONIC_RTOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HarmonicSolution {
    pub satisfiable: bool,
    /// Quarter-period multiplicities are 2k+1.
    pub k: [u32; 3],
    /// (max - min)/max of omega_i/(2k_i+1).
    pub residual: f64,
}

/// Searches odd multipliers `2k_i+1 <= 2 max_k + 1` making `omega_i/(2k_i+1)`
/// equal across axes. Ties in residual go to the smallest sum of k.
pub fn check_harmonic_condition(omega: [f64; 3], max_k: u32, tol: f64) -> Result<HarmonicSolution> {
    for &w in &omega {
        require_positive("omega_soft", w)?;
    }
    let mut best: Option<(f64, u32, [u32; 3])> = None;
    for k0 in 0..=max_k {
        for k1 in 0..=max_k {
            for k2 in 0..=max_k {
                let k = [k0, k1, k2];
                let f = [0, 1, 2].map(|i| omega[i] / (2 * k[i] + 1) as f64);
                let hi = f.iter().cloned().fold(f64::MIN, f64::max);
                let lo = f.iter().cloned().fold(f64::MAX, f64::min);
                let r = (hi - lo) / hi;
                let sum = k0 + k1 + k2;
                let better = match best {
                    None => true,
                    Some((br, bs, _)) => r < br - 1e-12 || ((r - br).abs() <= 1e-12 && sum < bs),
                };
                if better {
                    best = Some((r, sum, k));
                }
            }
        }
    }
    let (residual, _, k) = best.expect("search space is non-empty");
    Ok(HarmonicSolution {
        satisfiable: residual < tol,
        k,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SqueezeProtocol {
    pub omega_stiff: [f64; 3],
    pub omega_soft: [f64; 3],
    pub k_soft: [u32; 3],
    pub k_stiff: [u32; 3],
    pub n_cycles: u32,
    pub eta: [f64; 3],
    /// Measurement-induced (recoil) localization rate in the stiff trap, 1/s.
    /// Scales with the instantaneous trap frequency.
    pub gamma_stiff: [f64; 3],
    /// Localization rate from thermal emission, present at all times, 1/s.
    pub gamma_bb: [f64; 3],
}

impl SqueezeProtocol {
    /// Protocol with `omega_soft = ratio * omega_stiff`, multiplicities from
    /// the harmonic search on both frequency sets.
    pub fn new(
        omega_stiff: [f64; 3],
        ratio: f64,
        n_cycles: u32,
        eta: [f64; 3],
        gamma_stiff: [f64; 3],
        gamma_bb: [f64; 3],
        max_k: u32,
    ) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Domain(format!("frequency ratio must lie in (0, 1), got {ratio}")));
        }
        let omega_soft = omega_stiff.map(|w| ratio * w);
        let soft = check_harmonic_condition(omega_soft, max_k, HARMONIC_RTOL)?;
        let stiff = check_harmonic_condition(omega_stiff, max_k, HARMONIC_RTOL)?;
        if !soft.satisfiable || !stiff.satisfiable {
            return Err(Error::Contract(format!(
                "trap frequencies {omega_stiff:?} admit no common odd quarter periods with max_k = {max_k} \
                 (residual {:.3e})",
                soft.residual.max(stiff.residual)
            )));
        }
        let p = SqueezeProtocol {
            omega_stiff,
            omega_soft,
            k_soft: soft.k,
            k_stiff: stiff.k,
            n_cycles,
            eta,
            gamma_stiff,
            gamma_bb,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for i in 0..3 {
            require_positive("omega_stiff", self.omega_stiff[i])?;
            require_positive("omega_soft", self.omega_soft[i])?;
            if self.omega_soft[i] >= self.omega_stiff[i] {
                return Err(Error::Contract(format!("axis {i}: soft frequency must be below the stiff one")));
            }
            if !(0.0..=1.0).contains(&self.eta[i]) {
                return Err(invalid("eta", "must lie in [0, 1]"));
            }
            if !(self.gamma_stiff[i] >= 0.0 && self.gamma_bb[i] >= 0.0) {
                return Err(invalid("gamma", "must be non-negative"));
            }
        }
        let check = |d: [f64; 3], what: &str| {
            let hi = d.iter().cloned().fold(f64::MIN, f64::max);
            let lo = d.iter().cloned().fold(f64::MAX, f64::min);
            if (hi - lo) / hi > HARMONIC_RTOL {
                Err(Error::Contract(format!("{what} durations differ across axes: {d:?}")))
            } else {
                Ok(())
            }
        };
        check(self.soft_durations(), "soft-segment")?;
        check(self.stiff_durations(), "stiff-segment")?;
        Ok(())
    }

    fn soft_durations(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| (2 * self.k_soft[i] + 1) as f64 * PI / (2.0 * self.omega_soft[i]))
    }

    fn stiff_durations(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| (2 * self.k_stiff[i] + 1) as f64 * PI / (2.0 * self.omega_stiff[i]))
    }

    /// Soft-segment duration t1, s.
    pub fn t1(&self) -> f64 {
        self.soft_durations()[2]
    }

    /// Stiff-segment duration t2, s.
    pub fn t2(&self) -> f64 {
        self.stiff_durations()[2]
    }

    pub fn gamma_soft(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.gamma_stiff[i] * self.omega_soft[i] / self.omega_stiff[i])
    }

    fn drives(&self, omega: [f64; 3], recoil: [f64; 3]) -> [AxisDrive; 3] {
        [0, 1, 2].map(|i| AxisDrive {
            omega: omega[i],
            gamma: recoil[i] + self.gamma_bb[i],
            gamma_meas: recoil[i],
            eta: self.eta[i],
        })
    }

    pub fn soft_segment(&self) -> ScheduleSegment {
        ScheduleSegment {
            duration: self.t1(),
            trap_on: true,
            axes: self.drives(self.omega_soft, self.gamma_soft()),
            gravity_on: false,
        }
    }

    pub fn stiff_segment(&self) -> ScheduleSegment {
        ScheduleSegment {
            duration: self.t2(),
            trap_on: true,
            axes: self.drives(self.omega_stiff, self.gamma_stiff),
            gravity_on: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTimeline {
    pub schedule: Schedule,
    pub t_off: f64,
    pub t_on: f64,
    pub t_end: f64,
    pub t_kick: Option<f64>,
    pub free_fall_duration: f64,
    /// Index of the trap-off segment in `schedule`.
    pub free_fall_segment: usize,
}

impl ProtocolTimeline {
    /// Duration of the squeezing stage, n(t1+t2) - t2.
    pub fn t_squeeze(&self) -> f64 {
        self.t_off
    }

    pub fn rotation_duration(&self) -> f64 {
        self.t_end - self.t_on
    }

    /// Places an impulse at `t`, which must lie within the timeline.
    pub fn with_kick(mut self, t: f64) -> Result<Self> {
        if !(0.0..=self.t_end).contains(&t) {
            return Err(Error::Contract(format!("kick time {t:e} outside [0, {:e}]", self.t_end)));
        }
        self.t_kick = Some(t);
        Ok(self)
    }

    /// Kick time at the middle of the free fall.
    pub fn mid_free_fall(&self) -> f64 {
        0.5 * (self.t_off + self.t_on)
    }
}

/// Stiff placeholder, `n_cycles` x [soft, stiff] without the final stiff
/// segment, free fall (trap off, thermal emission only, no measurement) and a
/// stiff rotation of duration t2. Gravity, when enabled, acts during free fall;
/// trap-on coordinates are taken about the gravitationally sagged equilibrium.
pub fn build_bangbang_schedule(proto: &SqueezeProtocol, free_fall: f64, gravity_on: bool) -> Result<ProtocolTimeline> {
    proto.validate()?;
    if !(free_fall >= 0.0 && free_fall.is_finite()) {
        return Err(invalid("free_fall", "must be finite and non-negative"));
    }
    let stiff = proto.stiff_segment();
    let soft = proto.soft_segment();
    let mut segs = vec![stiff.with_duration(0.0)];
    for c in 0..proto.n_cycles {
        segs.push(soft);
        if c + 1 < proto.n_cycles {
            segs.push(stiff);
        }
    }
    let t_off: f64 = segs.iter().map(|s| s.duration).sum();
    let free_fall_segment = segs.len();
    segs.push(ScheduleSegment {
        duration: free_fall,
        trap_on: false,
        axes: [0, 1, 2].map(|i| AxisDrive::unmeasured(0.0, proto.gamma_bb[i])),
        gravity_on,
    });
    segs.push(stiff);
    let schedule = Schedule::new(segs)?;
    let t_on = t_off + free_fall;
    Ok(ProtocolTimeline {
        t_end: schedule.total_duration(),
        schedule,
        t_off,
        t_on,
        t_kick: None,
        free_fall_duration: free_fall,
        free_fall_segment,
    })
}

/// Asymptotic momentum variance for quarter-period segments,
/// `(hbar m w/2)(pi/2)(G/w)(w^2 + w'^2)/(w^2 - w'^2)`.
pub fn asymptotic_variance(mass: f64, omega: f64, omega_soft: f64, gamma: f64) -> Result<f64> {
    asymptotic_variance_odd(mass, omega, omega_soft, gamma, 0, 0)
}

/// Fixed point of the cycle map with `2k'+1` soft and `2k+1` stiff quarter
/// periods: `P (1 - r^2) = (pi G hbar m/4)((2k'+1) + (2k+1) r^2)`, r = w'/w.
pub fn asymptotic_variance_odd(mass: f64, omega: f64, omega_soft: f64, gamma: f64, k_soft: u32, k_stiff: u32) -> Result<f64> {
    check_domain(mass, omega, omega_soft, gamma)?;
    let r2 = (omega_soft / omega).powi(2);
    let (ns, n) = ((2 * k_soft + 1) as f64, (2 * k_stiff + 1) as f64);
    Ok(PI * gamma * HBAR * mass / 4.0 * (ns + n * r2) / (1.0 - r2))
}

fn check_domain(mass: f64, omega: f64, omega_soft: f64, gamma: f64) -> Result<()> {
    require_positive("mass", mass)?;
    require_positive("omega", omega)?;
    require_positive("omega_soft", omega_soft)?;
    if omega_soft >= omega {
        return Err(Error::Domain(format!("soft frequency {omega_soft:e} must be below {omega:e}")));
    }
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Domain(format!("decoherence rate must be non-negative, got {gamma}")));
    }
    Ok(())
}

/// Momentum variance after `n_p` cycles from a thermal state of occupation
/// `n_t` in the stiff trap:
/// `(hbar m w/2)[e^{-2N rb}(1+2 n_t) + (pi/2)(G/w)(2 sum_{k<N} e^{-2k rb} - 1)]`,
/// rb = ln(w/w').
pub fn finite_cycle_variance(mass: f64, omega: f64, omega_soft: f64, gamma: f64, n_t: f64, n_p: u32) -> Result<f64> {
    check_domain(mass, omega, omega_soft, gamma)?;
    if n_p < 1 {
        return Err(Error::Domain("at least one cycle is required".into()));
    }
    if !(n_t >= 0.0 && n_t.is_finite()) {
        return Err(Error::Domain(format!("thermal occupation must be non-negative, got {n_t}")));
    }
    let rbar = (omega / omega_soft).ln();
    let sum: f64 = (0..n_p).map(|k| (-2.0 * k as f64 * rbar).exp()).sum();
    Ok(HBAR * mass * omega / 2.0
        * ((-2.0 * n_p as f64 * rbar).exp() * (1.0 + 2.0 * n_t) + PI / 2.0 * gamma / omega * (2.0 * sum - 1.0)))
}

/// Same as [`finite_cycle_variance`] for general odd multiplicities, by
/// iterating the cycle map.
pub fn finite_cycle_variance_odd(
    mass: f64,
    omega: f64,
    omega_soft: f64,
    gamma: f64,
    n_t: f64,
    n_p: u32,
    k_soft: u32,
    k_stiff: u32,
) -> Result<f64> {
    check_domain(mass, omega, omega_soft, gamma)?;
    if n_p < 1 {
        return Err(Error::Domain("at least one cycle is required".into()));
    }
    let r2 = (omega_soft / omega).powi(2);
    let a = PI * gamma * HBAR * mass / 4.0;
    let (ns, n) = ((2 * k_soft + 1) as f64, (2 * k_stiff + 1) as f64);
    let mut p = r2 * HBAR * mass * omega / 2.0 * (1.0 + 2.0 * n_t) + a * ns;
    for _ in 1..n_p {
        p = r2 * p + a * (ns + n * r2);
    }
    Ok(p)
}

/// Shot-noise-limited position uncertainty of a readout pulse,
/// `x0 / sqrt(eta G t_meas)`.
pub fn measurement_shot_noise(x0: f64, eta: f64, gamma_pulse: f64, t_meas: f64) -> Result<f64> {
    for (name, v) in [("x0", x0), ("eta", eta), ("gamma_pulse", gamma_pulse), ("t_meas", t_meas)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(x0 / (eta * gamma_pulse * t_meas).sqrt())
}

/// Readout pulse after the rotation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutModel {
    pub eta: f64,
    pub gamma_pulse: f64,
    pub t_meas: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpulseReach {
    pub min_detectable: f64,
    pub db_below_sql: f64,
    pub sql: f64,
}

/// Smallest resolvable impulse for an effective momentum variance `var_p_eff`
/// and position readout noise `dx`, mapped to momentum through the
/// quarter-period rotation: `sqrt(2 (V + (m w dx)^2))`.
pub fn min_detectable_impulse(var_p_eff: f64, mass: f64, omega: f64, dx: f64) -> Result<ImpulseReach> {
    require_positive("var_p", var_p_eff)?;
    require_positive("mass", mass)?;
    require_positive("omega", omega)?;
    if !(dx >= 0.0 && dx.is_finite()) {
        return Err(invalid("dx", "must be non-negative"));
    }
    let sql = (HBAR * mass * omega).sqrt();
    let readout = mass * omega * dx;
    let min = (2.0 * (var_p_eff + readout * readout)).sqrt();
    Ok(ImpulseReach {
        min_detectable: min,
        db_below_sql: 10.0 * (sql * sql / (min * min)).log10(),
        sql,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpulseEvent {
    pub magnitude: f64,
    pub direction: [f64; 3],
    pub t_kick: f64,
}

impl ImpulseEvent {
    pub fn new(magnitude: f64, direction: [f64; 3], t_kick: f64) -> Result<Self> {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(invalid("direction", "must be a non-zero finite vector"));
        }
        if !magnitude.is_finite() {
            return Err(invalid("magnitude", "must be finite"));
        }
        Ok(ImpulseEvent {
            magnitude,
            direction: direction.map(|d| d / norm),
            t_kick,
        })
    }

    pub fn delta_p(&self) -> [f64; 3] {
        self.direction.map(|d| d * self.magnitude)
    }

    fn validate(&self, timeline: &ProtocolTimeline) -> Result<()> {
        let norm = self.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(invalid("direction", format!("must be a unit vector, |n| = {norm}")));
        }
        if !(0.0..=timeline.t_end).contains(&self.t_kick) {
            return Err(Error::Contract(format!("kick time {:e} outside the timeline", self.t_kick)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunMode {
    /// Covariances with the configured measurement, noiseless means.
    Deterministic,
    /// Sampled measurement record with step `dt` (s).
    Stochastic { dt: f64, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct SensingResult {
    /// Squeezing at t_off.
    pub metrics: SqueezeMetrics,
    pub final_state: State3D,
    pub min_detectable_impulse: [f64; 3],
    pub db_below_sql: [f64; 3],
    pub sql_impulse: [f64; 3],
    /// Readout position noise per axis, m (zero without a readout model).
    pub shot_noise: [f64; 3],
    /// Whether the readout noise is below the final position width.
    pub readout_resolves_state: [bool; 3],
    /// Impulse inferred from the final position shift, kg m/s.
    pub recovered_impulse: Option<[f64; 3]>,
    pub duty_estimate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolRun {
    pub record: TrajectoryRecord,
    pub result: SensingResult,
}

/// Linear response d<x>(t_end)/d<p>(t) of each axis to a kick at `t`.
fn position_response(particle: &Particle, timeline: &ProtocolTimeline, t: f64) -> Result<[f64; 3]> {
    let (_, after) = timeline.schedule.split_at(t)?;
    let mut out = [0.0; 3];
    for (i, r) in out.iter_mut().enumerate() {
        let p0 = particle.p0(i);
        let mut m = [0.0, 1.0];
        for seg in &after {
            let f = crate::dynamics::mean_flow_matrix(seg.effective_omega(i), particle.omega_ref[i], seg.duration);
            m = [f[0][0] * m[0] + f[0][1] * m[1], f[1][0] * m[0] + f[1][1] * m[1]];
        }
        *r = m[0] * particle.x0(i) / p0;
    }
    Ok(out)
}

/// Duty fraction: sensing window over a full cycle that includes re-cooling
/// for as long as the squeezing took.
pub fn duty_estimate(timeline: &ProtocolTimeline, t_meas: f64) -> f64 {
    let total = 2.0 * timeline.t_squeeze() + timeline.free_fall_duration + timeline.rotation_duration() + t_meas;
    if total > 0.0 {
        timeline.free_fall_duration / total
    } else {
        0.0
    }
}

/// Runs the protocol from the stiff-trap ground state.
pub fn run_protocol(
    particle: &Particle,
    proto: &SqueezeProtocol,
    timeline: &ProtocolTimeline,
    impulse: Option<&ImpulseEvent>,
    mode: RunMode,
    readout: Option<&ReadoutModel>,
    tol: &Tolerances,
) -> Result<ProtocolRun> {
    proto.validate()?;
    if let Some(imp) = impulse {
        imp.validate(timeline)?;
    }
    let s0 = ground_state(particle.mass, particle.omega_ref)?;
    // Cutting at t_off (and at the kick) makes both available as sample times.
    let mut cuts = vec![timeline.t_off];
    if let Some(imp) = impulse {
        cuts.push(imp.t_kick);
    }
    let segments = cut_segments(&timeline.schedule, &cuts)?;
    let schedule = Schedule::new(segments.clone())?;
    let kick = impulse.map(|imp| Kick {
        t: imp.t_kick,
        delta_p: imp.delta_p(),
    });

    let record = match mode {
        RunMode::Deterministic => deterministic_record(&s0, &schedule, particle, kick, tol)?,
        RunMode::Stochastic { dt, seed } => {
            StochasticPlan::with_tolerances(&s0, &schedule, particle, dt, tol)?.run(seed, kick)?
        }
    };
    let k_off = nearest_index(&record.times, timeline.t_off);
    let metrics = squeeze_metrics(&record.states[k_off], particle.mass, particle.omega_ref)?;
    let final_state = *record.final_state();

    let mut result = SensingResult {
        metrics,
        final_state,
        min_detectable_impulse: [0.0; 3],
        db_below_sql: [0.0; 3],
        sql_impulse: [0.0; 3],
        shot_noise: [0.0; 3],
        readout_resolves_state: [true; 3],
        recovered_impulse: None,
        duty_estimate: duty_estimate(timeline, readout.map_or(0.0, |r| r.t_meas)),
    };
    for i in 0..3 {
        let w = particle.omega_ref[i];
        let a = final_state.axes[i];
        let dx = match readout {
            Some(r) => measurement_shot_noise(particle.x0(i), r.eta, r.gamma_pulse, r.t_meas)?,
            None => 0.0,
        };
        let var_p_eff = (particle.mass * w).powi(2) * a.var_x;
        let reach = min_detectable_impulse(var_p_eff, particle.mass, w, dx)?;
        result.min_detectable_impulse[i] = reach.min_detectable;
        result.db_below_sql[i] = reach.db_below_sql;
        result.sql_impulse[i] = reach.sql;
        result.shot_noise[i] = dx;
        result.readout_resolves_state[i] = dx < a.var_x.sqrt();
    }
    if let Some(imp) = impulse {
        // Reference without the kick, same seed, to isolate the response.
        let reference = match mode {
            RunMode::Deterministic => deterministic_record(&s0, &schedule, particle, None, tol)?,
            RunMode::Stochastic { dt, seed } => {
                StochasticPlan::with_tolerances(&s0, &schedule, particle, dt, tol)?.run(seed, None)?
            }
        };
        let resp = position_response(particle, timeline, imp.t_kick)?;
        let r_end = reference.final_state();
        let mut rec = [0.0; 3];
        for i in 0..3 {
            let shift = final_state.axes[i].mean_x - r_end.axes[i].mean_x;
            rec[i] = if resp[i] != 0.0 { shift / resp[i] } else { 0.0 };
        }
        result.recovered_impulse = Some(rec);
    }
    Ok(ProtocolRun { record, result })
}

fn nearest_index(times: &[f64], t: f64) -> usize {
    times
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn cut_segments(schedule: &Schedule, cuts: &[f64]) -> Result<Vec<ScheduleSegment>> {
    let mut segs = schedule.segments.clone();
    for &t in cuts {
        let s = Schedule { segments: segs };
        let (mut a, b) = s.split_at(t)?;
        a.extend(b);
        segs = a;
    }
    Ok(segs.into_iter().filter(|s| s.duration > 0.0).collect())
}

fn deterministic_record(
    s0: &State3D,
    schedule: &Schedule,
    particle: &Particle,
    kick: Option<Kick>,
    tol: &Tolerances,
) -> Result<TrajectoryRecord> {
    let mut times = vec![0.0];
    let mut states = vec![*s0];
    let mut s = *s0;
    let mut pending = kick;
    let apply = |s: &mut State3D, t: f64, pending: &mut Option<Kick>| {
        if let Some(k) = *pending {
            if t >= k.t - 1e-12 * (1.0 + k.t.abs()) {
                for i in 0..3 {
                    s.axes[i].mean_p += k.delta_p[i];
                }
                *pending = None;
            }
        }
    };
    apply(&mut s, 0.0, &mut pending);
    states[0] = s;
    let bounds = schedule.boundaries();
    for (j, seg) in schedule.segments.iter().enumerate() {
        s = propagate_segments(&s, std::slice::from_ref(seg), particle, tol)?[0];
        apply(&mut s, bounds[j + 1], &mut pending);
        times.push(bounds[j + 1]);
        states.push(s);
    }
    Ok(TrajectoryRecord {
        times,
        states,
        rng_seed: 0,
        measurement_record: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const M: f64 = 2.0e-18;
    const WZ: f64 = 2.0 * PI * 5.0e4;

    fn zp(w: f64) -> f64 {
        HBAR * M * w / 2.0
    }

    #[test]
    fn harmonic_search_examples() {
        let s = check_harmonic_condition([3.0, 3.0, 1.0], 3, 1e-6).unwrap();
        assert!(s.satisfiable);
        assert_eq!(s.k, [1, 1, 0]);
        assert_eq!(s.residual, 0.0);
        let s = check_harmonic_condition([1.0, 1.0, 1.0], 3, 1e-6).unwrap();
        assert_eq!(s.k, [0, 0, 0]);
        let s = check_harmonic_condition([1.0, 2.0, 1.0], 3, 1e-6).unwrap();
        assert!(!s.satisfiable);
        assert_eq!(s.k, [1, 3, 1]);
        assert_relative_eq!(s.residual, 1.0 / 7.0, max_relative = 1e-12);
        assert!(check_harmonic_condition([0.0, 1.0, 1.0], 1, 1e-6).is_err());
    }

    #[test]
    fn asymptotic_examples() {
        let v = asymptotic_variance(M, WZ, 0.5 * WZ, 0.25 * WZ).unwrap();
        assert_relative_eq!(v / zp(WZ), PI / 8.0 * 5.0 / 3.0, max_relative = 1e-12);
        assert!((v / zp(WZ) - 0.654).abs() < 1e-3);
        assert_eq!(asymptotic_variance(M, WZ, 0.5 * WZ, 0.0).unwrap(), 0.0);
        let small = asymptotic_variance(M, WZ, 1e-6 * WZ, 0.1 * WZ).unwrap();
        assert_relative_eq!(small / zp(WZ), PI / 2.0 * 0.1, max_relative = 1e-10);
        assert!(matches!(asymptotic_variance(M, WZ, WZ, 0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn finite_cycle_examples() {
        let v = finite_cycle_variance(M, WZ, 0.5 * WZ, 0.0, 0.0, 1).unwrap();
        assert_relative_eq!(v, zp(WZ) / 4.0, max_relative = 1e-14);
        let g = 0.1 * WZ;
        let v = finite_cycle_variance(M, WZ, 0.3 * WZ, g, 0.0, 1).unwrap();
        assert_relative_eq!(v, zp(WZ) * (0.09 + PI / 2.0 * 0.1), max_relative = 1e-12);
        for n in 1..8 {
            let a = finite_cycle_variance(M, WZ, 0.3 * WZ, g, 0.7, n).unwrap();
            let b = finite_cycle_variance_odd(M, WZ, 0.3 * WZ, g, 0.7, n, 0, 0).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
        let inf = asymptotic_variance(M, WZ, 0.3 * WZ, g).unwrap();
        let mut prev = f64::INFINITY;
        for n in [1, 2, 4, 8] {
            let d = (finite_cycle_variance(M, WZ, 0.3 * WZ, g, 0.0, n).unwrap() - inf).abs();
            assert!(d < prev);
            prev = d;
        }
        let d = (finite_cycle_variance(M, WZ, 0.3 * WZ, g, 0.0, 20).unwrap() - inf).abs();
        assert!(d / inf < 1e-12);
        let odd = finite_cycle_variance_odd(M, WZ, 0.3 * WZ, g, 0.0, 200, 1, 1).unwrap();
        assert_relative_eq!(odd, asymptotic_variance_odd(M, WZ, 0.3 * WZ, g, 1, 1).unwrap(), max_relative = 1e-12);
    }

    fn proto(n: u32, ratio: f64) -> SqueezeProtocol {
        SqueezeProtocol::new([3.0 * WZ, 3.0 * WZ, WZ], ratio, n, [0.0; 3], [0.0; 3], [0.0; 3], 3).unwrap()
    }

    #[test]
    fn squeeze_duration_and_bookkeeping() {
        for n in 0..4 {
            let p = proto(n, 0.2);
            let tl = build_bangbang_schedule(&p, DEFAULT_FREE_FALL, false).unwrap();
            let expected = if n == 0 { 0.0 } else { n as f64 * (p.t1() + p.t2()) - p.t2() };
            assert_relative_eq!(tl.t_squeeze(), expected, max_relative = 1e-14, epsilon = 1e-20);
            assert_eq!(tl.t_end, tl.schedule.total_duration());
            assert_relative_eq!(tl.t_end, expected + DEFAULT_FREE_FALL + PI / (2.0 * WZ), max_relative = 1e-14);
            if n > 0 {
                let nominal = 30e-6 * n as f64;
                assert!((tl.t_squeeze() - nominal).abs() / nominal <= 0.2, "{}", tl.t_squeeze());
            } else {
                assert_eq!(tl.schedule.segments.iter().filter(|s| s.duration > 0.0).count(), 2);
            }
        }
    }

    #[test]
    fn protocol_rejects_incommensurate_axes() {
        let r = SqueezeProtocol::new([2.0 * WZ, 2.0 * WZ, WZ], 0.2, 1, [0.0; 3], [0.0; 3], [0.0; 3], 3);
        assert!(matches!(r, Err(Error::Contract(_))));
        assert!(SqueezeProtocol::new([WZ; 3], 1.2, 1, [0.0; 3], [0.0; 3], [0.0; 3], 3).is_err());
    }

    #[test]
    fn decoherence_free_squeezing_is_geometric() {
        let p = proto(3, 0.4);
        let tl = build_bangbang_schedule(&p, 1e-4, false).unwrap();
        let part = Particle::new(M, p.omega_stiff, 0).unwrap();
        let run = run_protocol(&part, &p, &tl, None, RunMode::Deterministic, None, &Tolerances::default()).unwrap();
        for i in 0..3 {
            let w = p.omega_stiff[i];
            assert_relative_eq!(run.result.metrics.var_p[i], 0.4f64.powi(6) * zp(w), max_relative = 1e-9);
        }
    }

    #[test]
    fn shot_noise_and_sql() {
        let x0 = 1e-11;
        assert_relative_eq!(measurement_shot_noise(x0, 1.0, 1e4, 1.0).unwrap(), x0 / 100.0, max_relative = 1e-14);
        let a = measurement_shot_noise(x0, 0.5, 1e6, 1e-6).unwrap();
        let b = measurement_shot_noise(x0, 0.5, 1e6, 4e-6).unwrap();
        assert_relative_eq!(a / b, 2.0, max_relative = 1e-14);
        assert!(measurement_shot_noise(x0, 0.0, 1.0, 1.0).is_err());

        let r = min_detectable_impulse(zp(WZ), M, WZ, 0.0).unwrap();
        assert_relative_eq!(r.min_detectable, r.sql, max_relative = 1e-14);
        assert!(r.db_below_sql.abs() < 1e-12);
        let r = min_detectable_impulse(zp(WZ) * 10f64.powf(-1.5), M, WZ, 0.0).unwrap();
        assert_relative_eq!(r.min_detectable, r.sql * 10f64.powf(-0.75), max_relative = 1e-12);
        let noisy = min_detectable_impulse(zp(WZ), M, WZ, 1e-12).unwrap();
        assert!(noisy.min_detectable > r.sql);
    }

    #[test]
    fn impulse_direction_is_normalized() {
        let e = ImpulseEvent::new(2.0, [0.0, 3.0, 4.0], 0.0).unwrap();
        assert_relative_eq!(e.delta_p()[2], 1.6, max_relative = 1e-14);
        assert!(ImpulseEvent::new(1.0, [0.0; 3], 0.0).is_err());
    }

    #[test]
    fn impulse_is_recovered_without_decoherence() {
        let p = proto(2, 0.3);
        let tl = build_bangbang_schedule(&p, DEFAULT_FREE_FALL, true).unwrap();
        let part = Particle::new(M, p.omega_stiff, 1).unwrap();
        let sql = (HBAR * M * WZ).sqrt();
        let imp = ImpulseEvent::new(sql, [0.0, 0.6, 0.8], tl.mid_free_fall()).unwrap();
        let run = run_protocol(&part, &p, &tl, Some(&imp), RunMode::Deterministic, None, &Tolerances::default()).unwrap();
        let rec = run.result.recovered_impulse.unwrap();
        for i in 0..3 {
            let want = imp.delta_p()[i];
            assert!((rec[i] - want).abs() <= 1e-6 * sql, "axis {i}: {} vs {want}", rec[i]);
        }
        assert!(run.result.duty_estimate > 0.0 && run.result.duty_estimate < 1.0);
    }
}
