//! Piecewise-constant drive schedules.

use std::io::Write;

use crate::error::{invalid, require_positive, Error, Result};
use crate::params::G_GRAV;

/// Per-axis drive during one segment.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AxisDrive {
    /// Trap frequency, rad/s. Ignored when the trap is off.
    pub omega: f64,
    /// Total position-localization rate, 1/s. Sets the momentum diffusion.
    pub gamma: f64,
    /// Part of `gamma` caused by light that can be detected, 1/s.
    pub gamma_meas: f64,
    /// Detection efficiency of that light.
    pub eta: f64,
}

impl AxisDrive {
    pub fn unmeasured(omega: f64, gamma: f64) -> Self {
        AxisDrive {
            omega,
            gamma,
            gamma_meas: 0.0,
            eta: 0.0,
        }
    }

    /// Measurement strength eta * gamma_meas, 1/s.
    pub fn measurement_rate(&self) -> f64 {
        self.eta * self.gamma_meas
    }

    fn validate(&self, trap_on: bool) -> Result<()> {
        if trap_on && !(self.omega.is_finite() && self.omega >= 0.0) {
            return Err(invalid("omega", format!("must be finite and non-negative, got {}", self.omega)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(invalid("gamma", format!("must be non-negative, got {}", self.gamma)));
        }
        if !(self.gamma_meas.is_finite() && self.gamma_meas >= 0.0) {
            return Err(invalid("gamma_meas", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(invalid("eta", format!("must lie in [0, 1], got {}", self.eta)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSegment {
    pub duration: f64,
    pub trap_on: bool,
    pub axes: [AxisDrive; 3],
    pub gravity_on: bool,
}

impl ScheduleSegment {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(invalid("duration", format!("must be finite and non-negative, got {}", self.duration)));
        }
        for a in &self.axes {
            a.validate(self.trap_on)?;
        }
        Ok(())
    }

    /// Frequency actually acting on axis `i`.
    pub fn effective_omega(&self, i: usize) -> f64 {
        if self.trap_on {
            self.axes[i].omega
        } else {
            0.0
        }
    }

    pub fn with_duration(mut self, duration: f64) -> Self {
        self.duration = duration;
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    pub segments: Vec<ScheduleSegment>,
}

impl Schedule {
    pub fn new(segments: Vec<ScheduleSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(invalid("schedule", "needs at least one segment"));
        }
        for s in &segments {
            s.validate()?;
        }
        let s = Schedule { segments };
        if !s.total_duration().is_finite() {
            return Err(invalid("schedule", "total duration is not finite"));
        }
        Ok(s)
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment start times, with the end time appended.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.segments.len() + 1);
        let mut t = 0.0;
        out.push(t);
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Splits the schedule at `t`, cutting a segment in two when needed.
    /// Either half may be empty.
    pub fn split_at(&self, t: f64) -> Result<(Vec<ScheduleSegment>, Vec<ScheduleSegment>)> {
        let total = self.total_duration();
        if !(0.0..=total).contains(&t) {
            return Err(Error::Contract(format!("split time {t:e} outside [0, {total:e}]")));
        }
        let mut before = Vec::new();
        let mut after = Vec::new();
        let mut start = 0.0;
        for s in &self.segments {
            let end = start + s.duration;
            if end <= t {
                before.push(*s);
            } else if start >= t {
                after.push(*s);
            } else {
                before.push(s.with_duration(t - start));
                after.push(s.with_duration(end - t));
            }
            start = end;
        }
        Ok((before, after))
    }

    /// Serializes one segment per block, mirroring the flat config keys.
    pub fn write_toml<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        for s in &self.segments {
            writeln!(out, "[[segment]]")?;
            writeln!(out, "duration = {:e}", s.duration)?;
            writeln!(out, "trap_on = {}", s.trap_on)?;
            writeln!(out, "gravity_on = {}", s.gravity_on)?;
            writeln!(out, "omega = {:?}", s.axes.map(|a| a.omega))?;
            writeln!(out, "gamma = {:?}", s.axes.map(|a| a.gamma))?;
            writeln!(out, "gamma_meas = {:?}", s.axes.map(|a| a.gamma_meas))?;
            writeln!(out, "eta = {:?}", s.axes.map(|a| a.eta))?;
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Particle and frame information shared by all propagators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub mass: f64,
    /// Stiff-trap frequencies defining x0_i^2 = hbar/(m omega_ref_i), rad/s.
    pub omega_ref: [f64; 3],
    /// Axis along which gravity acts (pointing to negative coordinates).
    pub vertical_axis: usize,
    pub gravity: f64,
}

impl Particle {
    pub fn new(mass: f64, omega_ref: [f64; 3], vertical_axis: usize) -> Result<Self> {
        require_positive("mass", mass)?;
        for &w in &omega_ref {
            require_positive("omega_ref", w)?;
        }
        if vertical_axis > 2 {
            return Err(invalid("vertical_axis", "must be 0, 1 or 2"));
        }
        Ok(Particle {
            mass,
            omega_ref,
            vertical_axis,
            gravity: G_GRAV,
        })
    }

    pub fn x0(&self, i: usize) -> f64 {
        (crate::params::HBAR / (self.mass * self.omega_ref[i])).sqrt()
    }

    pub fn p0(&self, i: usize) -> f64 {
        (crate::params::HBAR * self.mass * self.omega_ref[i]).sqrt()
    }

    /// Gravitational acceleration on axis `i` during `seg`.
    pub fn accel(&self, seg: &ScheduleSegment, i: usize) -> f64 {
        if seg.gravity_on && i == self.vertical_axis {
            -self.gravity
        } else {
            0.0
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(d: f64) -> ScheduleSegment {
        ScheduleSegment {
            duration: d,
            trap_on: true,
            axes: [AxisDrive::unmeasured(1.0, 0.0); 3],
            gravity_on: false,
        }
    }

    #[test]
    fn split_preserves_total() {
        let s = Schedule::new(vec![seg(1.0), seg(2.0), seg(3.0)]).unwrap();
        let (a, b) = s.split_at(2.5).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        let ta: f64 = a.iter().map(|s| s.duration).sum();
        let tb: f64 = b.iter().map(|s| s.duration).sum();
        assert_eq!(ta, 2.5);
        assert_eq!(tb, 3.5);
        assert!(s.split_at(7.0).is_err());
        let (a, b) = s.split_at(0.0).unwrap();
        assert!(a.is_empty() && b.len() == 3);
    }

    #[test]
    fn validation() {
        assert!(Schedule::new(vec![]).is_err());
        assert!(Schedule::new(vec![seg(-1.0)]).is_err());
        let mut s = seg(1.0);
        s.axes[1].eta = 1.5;
        assert!(Schedule::new(vec![s]).is_err());
        let mut off = seg(1.0);
        off.trap_on = false;
        off.axes[0].omega = f64::NAN;
        assert!(Schedule::new(vec![off]).is_ok());
        assert_eq!(off.effective_omega(0), 0.0);
    }

    #[test]
    fn toml_round_trip_is_parseable() {
        let s = Schedule::new(vec![seg(1e-6), seg(2e-6)]).unwrap();
        let mut buf = Vec::new();
        s.write_toml(&mut buf).unwrap();
        let v: toml::Table = String::from_utf8(buf).unwrap().parse().unwrap();
        assert_eq!(v["segment"].as_array().unwrap().len(), 2);
    }
}
