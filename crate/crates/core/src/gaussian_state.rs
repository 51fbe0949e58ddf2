//! Per-axis Gaussian motional states and squeezing metrics.
//!
//! The three axes are stored independently: neither the trapping potential
//! nor the position-measurement dissipators couple them, so no 6x6 covariance
//! matrix is needed.

use std::io::Write;

use crate::error::{require_positive, Error, Result};
use crate::params::HBAR;

/// Relative slack on the uncertainty bound, absorbing integrator roundoff.
pub const PHYSICALITY_RTOL: f64 = 1e-9;

/// Means and second cumulants of one motional axis.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AxisGaussianState {
    /// <x>, m
    pub mean_x: f64,
    /// <p>, kg m/s
    pub mean_p: f64,
    /// V_xx, m^2
    pub var_x: f64,
    /// V_pp, kg^2 m^2 / s^2
    pub var_p: f64,
    /// C_xp = <{x,p}>/2 - <x><p>, kg m^2 / s
    pub cov_xp: f64,
}

impl AxisGaussianState {
    /// Thermal state of a mode of frequency `omega` with mean occupation `n_th`.
    pub fn thermal(mass: f64, omega: f64, n_th: f64) -> Result<Self> {
        require_positive("mass", mass)?;
        require_positive("omega", omega)?;
        if !(n_th >= 0.0 && n_th.is_finite()) {
            return Err(crate::error::invalid("n_th", "occupation must be non-negative"));
        }
        let f = 1.0 + 2.0 * n_th;
        Ok(AxisGaussianState {
            mean_x: 0.0,
            mean_p: 0.0,
            var_x: f * HBAR / (2.0 * mass * omega),
            var_p: f * HBAR * mass * omega / 2.0,
            cov_xp: 0.0,
        })
    }

    pub fn ground(mass: f64, omega: f64) -> Result<Self> {
        Self::thermal(mass, omega, 0.0)
    }

    /// V_xx V_pp - C_xp^2
    pub fn determinant(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }

    /// hbar / (2 sqrt(det)); equals 1 for pure states.
    pub fn purity(&self) -> f64 {
        HBAR / (2.0 * self.determinant().sqrt())
    }

    pub fn is_finite(&self) -> bool {
        self.mean_x.is_finite()
            && self.mean_p.is_finite()
            && self.var_x.is_finite()
            && self.var_p.is_finite()
            && self.cov_xp.is_finite()
    }

    pub fn check_physical(&self, axis: usize) -> Result<()> {
        let bound = HBAR * HBAR / 4.0;
        let det = self.determinant();
        if !self.is_finite() || self.var_x <= 0.0 || self.var_p <= 0.0 || det < bound * (1.0 - PHYSICALITY_RTOL) {
            return Err(Error::Physicality { axis, det, bound });
        }
        Ok(())
    }
}

/// Motional state of the three axes; `axes[2]` is along the laser.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct State3D {
    pub axes: [AxisGaussianState; 3],
}

impl State3D {
    pub fn check_physical(&self) -> Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            a.check_physical(i)?;
        }
        Ok(())
    }

    pub fn means_x(&self) -> [f64; 3] {
        self.axes.map(|a| a.mean_x)
    }

    pub fn means_p(&self) -> [f64; 3] {
        self.axes.map(|a| a.mean_p)
    }

    /// Appends seven-column rows `t,axis,mean_x,mean_p,var_x,var_p,cov_xp`.
    pub fn write_csv_rows<W: Write>(&self, t: f64, out: &mut W) -> std::io::Result<()> {
        for (i, a) in self.axes.iter().enumerate() {
            writeln!(
                out,
                "{:.12e},{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                t,
                ["x", "y", "z"][i],
                a.mean_x,
                a.mean_p,
                a.var_x,
                a.var_p,
                a.cov_xp
            )?;
        }
        Ok(())
    }
}

/// Header line matching [`State3D::write_csv_rows`].
pub const STATE_CSV_HEADER: &str =
    "t_s,axis,mean_x_m,mean_p_kgm_per_s,var_x_m2,var_p_kg2m2_per_s2,cov_xp_kgm2_per_s";

pub fn ground_state(mass: f64, omegas: [f64; 3]) -> Result<State3D> {
    Ok(State3D {
        axes: [
            AxisGaussianState::ground(mass, omegas[0])?,
            AxisGaussianState::ground(mass, omegas[1])?,
            AxisGaussianState::ground(mass, omegas[2])?,
        ],
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeMetrics {
    /// 10 log10 of zero-point over actual momentum variance; positive means squeezed.
    pub squeezing_db: [f64; 3],
    pub var_p: [f64; 3],
    pub purity: [f64; 3],
}

/// Zero-point momentum variance of a mode, hbar m omega / 2.
pub fn zero_point_var_p(mass: f64, omega: f64) -> f64 {
    HBAR * mass * omega / 2.0
}

pub fn squeezing_db(var_p: f64, mass: f64, omega_ref: f64) -> f64 {
    10.0 * (zero_point_var_p(mass, omega_ref) / var_p).log10()
}

/// Squeezing of each axis relative to the zero-point width of the stiff
/// trap frequency `omega_ref[i]`.
pub fn squeeze_metrics(state: &State3D, mass: f64, omega_ref: [f64; 3]) -> Result<SqueezeMetrics> {
    require_positive("mass", mass)?;
    state.check_physical()?;
    let mut m = SqueezeMetrics {
        squeezing_db: [0.0; 3],
        var_p: [0.0; 3],
        purity: [0.0; 3],
    };
    for i in 0..3 {
        require_positive("omega_ref", omega_ref[i])?;
        let a = &state.axes[i];
        m.squeezing_db[i] = squeezing_db(a.var_p, mass, omega_ref[i]);
        m.var_p[i] = a.var_p;
        m.purity[i] = a.purity();
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    const M: f64 = 4.29e-18;
    const W: f64 = 2.0 * PI * 50e3;

    #[test]
    fn ground_state_is_minimum_uncertainty() {
        let s = ground_state(M, [W, 2.0 * W, 0.5 * W]).unwrap();
        for a in &s.axes {
            assert_relative_eq!(a.determinant(), HBAR * HBAR / 4.0, max_relative = 1e-14);
            assert_eq!(a.cov_xp, 0.0);
            assert_relative_eq!(a.purity(), 1.0, max_relative = 1e-14);
        }
        // (1.19e-23)^2 / 2 by hand
        assert_relative_eq!(s.axes[0].var_p, (1.19e-23f64).powi(2) / 2.0, max_relative = 1e-2);
    }

    #[test]
    fn ground_state_is_zero_db() {
        let w = [W, 3.0 * W, W];
        let s = ground_state(M, w).unwrap();
        let m = squeeze_metrics(&s, M, w).unwrap();
        for db in m.squeezing_db {
            assert!(db.abs() < 1e-12);
        }
    }

    #[test]
    fn quarter_factor_is_six_db() {
        let mut s = ground_state(M, [W; 3]).unwrap();
        for a in s.axes.iter_mut() {
            a.var_p *= 0.25;
            a.var_x *= 4.0;
        }
        let m = squeeze_metrics(&s, M, [W; 3]).unwrap();
        assert_relative_eq!(m.squeezing_db[0], 10.0 * 4f64.log10(), max_relative = 1e-12);
        assert_relative_eq!(m.squeezing_db[0], 6.0206, max_relative = 1e-4);
    }

    #[test]
    fn asymptotic_value_in_db() {
        // Gamma/omega = 0.25, omega'/omega = 0.5: (pi/2)(0.25)(1.25/0.75)
        let f = PI / 2.0 * 0.25 * (1.25 / 0.75);
        assert_relative_eq!(f, 0.654, max_relative = 1e-3);
        assert_relative_eq!(squeezing_db(f * zero_point_var_p(M, W), M, W), 1.84, max_relative = 2e-3);
    }

    #[test]
    fn rejects_unphysical_state() {
        let mut s = ground_state(M, [W; 3]).unwrap();
        s.axes[1].var_p *= 0.5;
        assert!(matches!(
            squeeze_metrics(&s, M, [W; 3]),
            Err(Error::Physicality { axis: 1, .. })
        ));
        assert!(ground_state(M, [W, 0.0, W]).is_err());
    }

    #[test]
    fn csv_rows() {
        let s = ground_state(M, [W; 3]).unwrap();
        let mut buf = Vec::new();
        s.write_csv_rows(1e-6, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert_eq!(text.lines().next().unwrap().split(',').count(), STATE_CSV_HEADER.split(',').count());
    }
}
