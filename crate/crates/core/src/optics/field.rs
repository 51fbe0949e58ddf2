use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::Vector3;
use num_complex::Complex64;

use crate::error::{require_positive, Error, Result};
use crate::numerics::gauss_legendre_on;
use crate::params::{ExperimentParams, C_LIGHT, EPS0};

/// Quadrature nodes in the aperture angle at default settings.
pub const DEFAULT_NODES: usize = 96;

/// Relative quadrature error above which a field is rejected.
const CONVERGENCE_RTOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Polarization {
    /// (x + i y)/sqrt(2) at the lens input.
    Circular,
    /// Along x at the lens input; for testing only.
    LinearX,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    pub numerical_aperture: f64,
    pub wavelength: f64,
    /// Power transmitted through the aperture, W.
    pub power: f64,
    /// Input Gaussian waist over aperture radius.
    pub filling_factor: f64,
    pub polarization: Polarization,
    pub nodes: usize,
}

impl BeamConfig {
    pub fn from_params(p: &ExperimentParams) -> Self {
        BeamConfig {
            numerical_aperture: p.numerical_aperture,
            wavelength: p.wavelength,
            power: p.laser_power,
            filling_factor: p.filling_factor,
            polarization: Polarization::Circular,
            nodes: DEFAULT_NODES,
        }
    }

    pub fn with_power(mut self, power: f64) -> Self {
        self.power = power;
        self
    }
}

/// Focal field of an aplanatic lens in the angular-spectrum representation.
///
/// For x-polarized input the field is
/// `A [I00 + I02 cos 2phi, I02 sin 2phi, -2i I01 cos phi]` with
///
/// ```text
/// I0n(rho, z) = int_0^theta_max f(theta) sqrt(cos theta) sin theta g_n(theta)
///               J_n(k rho sin theta) exp(i k z cos theta) dtheta
/// g_0 = 1 + cos, g_1 = sin, g_2 = 1 - cos,
/// f(theta) = exp(-sin^2 theta / (f0^2 sin^2 theta_max)).
/// ```
///
/// `A` is fixed so that the power through the aperture equals
/// `beam.power`. Quadrature nodes are fixed at construction, so sampling is
/// deterministic and thread-safe.
#[derive(Clone, Debug)]
pub struct FocalField {
    beam: BeamConfig,
    k: f64,
    amplitude: f64,
    cos_t: Vec<f64>,
    sin_t: Vec<f64>,
    weight: Vec<f64>,
}

struct Integrals {
    i0: Complex64,
    i1: Complex64,
    i2: Complex64,
}

impl FocalField {
    pub fn new(beam: BeamConfig) -> Result<Self> {
        let field = Self::build(beam)?;
        field.check_convergence()?;
        Ok(field)
    }

    fn build(beam: BeamConfig) -> Result<Self> {
        let na = beam.numerical_aperture;
        if !(na > 0.0 && na < 1.0) {
            return Err(crate::error::invalid("numerical_aperture", format!("must lie in (0,1), got {na}")));
        }
        require_positive("wavelength", beam.wavelength)?;
        require_positive("filling_factor", beam.filling_factor)?;
        if !(beam.power >= 0.0 && beam.power.is_finite()) {
            return Err(crate::error::invalid("power", "must be non-negative"));
        }
        if beam.nodes < 4 {
            return Err(crate::error::invalid("nodes", "need at least 4 quadrature nodes"));
        }
        let k = 2.0 * PI / beam.wavelength;
        let theta_max = na.asin();
        let f0 = beam.filling_factor;
        let (theta, w) = gauss_legendre_on(beam.nodes, 0.0, theta_max);
        let mut cos_t = Vec::with_capacity(beam.nodes);
        let mut sin_t = Vec::with_capacity(beam.nodes);
        let mut weight = Vec::with_capacity(beam.nodes);
        for (&t, &wt) in theta.iter().zip(&w) {
            let (s, c) = t.sin_cos();
            let pupil = (-(s * s) / (f0 * f0 * na * na)).exp();
            cos_t.push(c);
            sin_t.push(s);
            weight.push(wt * pupil * c.sqrt() * s);
        }
        // Aperture power: P = (pi/2) eps0 c E0^2 f^2 J with
        // J = int_0^NA 2s exp(-2 s^2/(f0 NA)^2) ds; focal prefactor |A| = k f E0 / 2.
        let j = 0.5 * f0 * f0 * na * na * (1.0 - (-2.0 / (f0 * f0)).exp());
        let amplitude = (k * k * beam.power / (2.0 * PI * EPS0 * C_LIGHT * j)).sqrt();
        Ok(FocalField {
            beam,
            k,
            amplitude,
            cos_t,
            sin_t,
            weight,
        })
    }

    fn check_convergence(&self) -> Result<()> {
        let fine = Self::build(BeamConfig {
            nodes: 2 * self.beam.nodes,
            ..self.beam
        })?;
        let lam = self.beam.wavelength;
        let probes = [(0.0, 0.0), (0.5 * lam, 0.0), (0.0, 2.0 * lam), (lam, -lam), (0.3 * lam, 0.7 * lam)];
        let scale = self.integrals(0.0, 0.0).i0.norm();
        let mut worst: f64 = 0.0;
        for &(rho, z) in &probes {
            let a = self.integrals(rho, z);
            let b = fine.integrals(rho, z);
            for (x, y) in [(a.i0, b.i0), (a.i1, b.i1), (a.i2, b.i2)] {
                worst = worst.max((x - y).norm() / scale);
            }
        }
        if worst > CONVERGENCE_RTOL {
            return Err(Error::Numerical(format!(
                "focal-field quadrature not converged with {} nodes: relative change {worst:e} on doubling (NA {}, f0 {})",
                self.beam.nodes, self.beam.numerical_aperture, self.beam.filling_factor
            )));
        }
        Ok(())
    }

    pub fn beam(&self) -> &BeamConfig {
        &self.beam
    }

    pub fn wavenumber(&self) -> f64 {
        self.k
    }

    fn integrals(&self, rho: f64, z: f64) -> Integrals {
        let mut out = Integrals {
            i0: Complex64::new(0.0, 0.0),
            i1: Complex64::new(0.0, 0.0),
            i2: Complex64::new(0.0, 0.0),
        };
        for ((&c, &s), &w) in self.cos_t.iter().zip(&self.sin_t).zip(&self.weight) {
            let phase = Complex64::from_polar(w, self.k * z * c);
            let arg = self.k * rho * s;
            let (j0, j1, j2) = if arg == 0.0 {
                (1.0, 0.0, 0.0)
            } else {
                (libm::j0(arg), libm::j1(arg), libm::jn(2, arg))
            };
            out.i0 += phase * ((1.0 + c) * j0);
            out.i1 += phase * (s * j1);
            out.i2 += phase * ((1.0 - c) * j2);
        }
        out
    }

    /// Fields for x- and y-polarized input at the same point.
    fn linear_pair(&self, r: &Vector3<f64>) -> (Vector3<Complex64>, Vector3<Complex64>) {
        let rho = r.x.hypot(r.y);
        let phi = r.y.atan2(r.x);
        let int = self.integrals(rho, r.z);
        let a = self.amplitude;
        let (s1, c1) = phi.sin_cos();
        let (s2, c2) = (2.0 * phi).sin_cos();
        let mi = Complex64::new(0.0, -2.0);
        let ex = Vector3::new(
            (int.i0 + int.i2 * c2) * a,
            int.i2 * (s2 * a),
            mi * int.i1 * (c1 * a),
        );
        let ey = Vector3::new(
            int.i2 * (s2 * a),
            (int.i0 - int.i2 * c2) * a,
            mi * int.i1 * (s1 * a),
        );
        (ex, ey)
    }

    /// Complex electric field amplitude, V/m.
    pub fn field(&self, r: &Vector3<f64>) -> Vector3<Complex64> {
        let (ex, ey) = self.linear_pair(r);
        match self.beam.polarization {
            Polarization::LinearX => ex,
            Polarization::Circular => (ex + ey * Complex64::i()) * Complex64::from(FRAC_1_SQRT_2),
        }
    }

    /// Time-averaged intensity (1/2) eps0 c |E|^2, W/m^2.
    pub fn intensity(&self, r: &Vector3<f64>) -> f64 {
        0.5 * EPS0 * C_LIGHT * self.field(r).norm_squared()
    }

    /// Axial component of the time-averaged Poynting vector, W/m^2.
    pub fn poynting_z(&self, r: &Vector3<f64>) -> f64 {
        let (ex, ey) = self.linear_pair(r);
        // Magnetic field for x input is the y-input electric field over Z0;
        // for y input it is minus the x-input field.
        let z0 = 1.0 / (EPS0 * C_LIGHT);
        let (e, h) = match self.beam.polarization {
            Polarization::LinearX => (ex, ey * Complex64::from(1.0 / z0)),
            Polarization::Circular => {
                let i = Complex64::i();
                (
                    (ex + ey * i) * Complex64::from(FRAC_1_SQRT_2),
                    (ey - ex * i) * Complex64::from(FRAC_1_SQRT_2 / z0),
                )
            }
        };
        0.5 * (e.x * h.y.conj() - e.y * h.x.conj()).re
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beam(na: f64, f0: f64) -> BeamConfig {
        BeamConfig {
            numerical_aperture: na,
            wavelength: 1550e-9,
            power: 1.0,
            filling_factor: f0,
            polarization: Polarization::Circular,
            nodes: DEFAULT_NODES,
        }
    }

    #[test]
    fn circular_intensity_is_rotationally_symmetric() {
        let f = FocalField::new(beam(0.85, 1.0)).unwrap();
        let lam = 1550e-9;
        for &(rho, z) in &[(0.2 * lam, 0.0), (0.45 * lam, 0.3 * lam), (1.1 * lam, -0.5 * lam)] {
            let reference = f.intensity(&Vector3::new(rho, 0.0, z));
            for j in 1..12 {
                let phi = j as f64 * 0.55;
                let i = f.intensity(&Vector3::new(rho * phi.cos(), rho * phi.sin(), z));
                assert_relative_eq!(i, reference, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn linear_polarization_is_not_symmetric() {
        let mut b = beam(0.85, 1.0);
        b.polarization = Polarization::LinearX;
        let f = FocalField::new(b).unwrap();
        let lam = 1550e-9;
        let ix = f.intensity(&Vector3::new(0.3 * lam, 0.0, 0.0));
        let iy = f.intensity(&Vector3::new(0.0, 0.3 * lam, 0.0));
        assert!((ix - iy).abs() / iy > 1e-2);
    }

    #[test]
    fn low_na_matches_paraxial_gaussian() {
        // Gaussian underfilling a wide aperture: beam divergence sin(theta) = na
        let (na, lens) = (0.05, 0.25);
        let f = FocalField::new(beam(lens, na / lens)).unwrap();
        let lam = 1550e-9;
        let w0 = lam / (PI * na);
        let zr = PI * w0 * w0 / lam;
        let peak = 2.0 / (PI * w0 * w0);
        assert_relative_eq!(f.intensity(&Vector3::zeros()), peak, max_relative = 5e-3);
        for &z in &[0.5 * zr, zr, 2.0 * zr] {
            let expected = peak / (1.0 + (z / zr).powi(2));
            assert_relative_eq!(f.intensity(&Vector3::new(0.0, 0.0, z)), expected, max_relative = 1e-2);
        }
        let rho = 0.7 * w0;
        let expected = peak * (-2.0 * rho * rho / (w0 * w0)).exp();
        assert_relative_eq!(f.intensity(&Vector3::new(rho, 0.0, 0.0)), expected, max_relative = 1e-2);
    }

    #[test]
    fn on_axis_intensity_peaks_at_focus() {
        let f = FocalField::new(beam(0.7, 1.0)).unwrap();
        let lam = 1550e-9;
        let i0 = f.intensity(&Vector3::zeros());
        for j in 1..20 {
            let dz = j as f64 * 0.1 * lam;
            assert!(f.intensity(&Vector3::new(0.0, 0.0, dz)) < i0);
            assert!(f.intensity(&Vector3::new(0.0, 0.0, -dz)) < i0);
        }
    }

    #[test]
    fn too_few_nodes_is_a_numerical_error() {
        let mut b = beam(0.9, 3.0);
        b.nodes = 4;
        assert!(matches!(FocalField::new(b), Err(Error::Numerical(_))));
    }

    #[test]
    fn rejects_bad_aperture() {
        assert!(FocalField::new(beam(1.0, 1.0)).is_err());
        assert!(FocalField::new(beam(0.0, 1.0)).is_err());
        assert!(FocalField::new(beam(0.5, 0.0)).is_err());
    }
}
