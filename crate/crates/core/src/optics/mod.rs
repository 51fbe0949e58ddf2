//! Tweezer optics: the focal field of a circularly polarized Gaussian beam
//! behind an aplanatic lens, the dipole force on the sphere, the trap it forms
//! and the photon-recoil heating it causes.

mod field;
mod recoil;
mod trap;

use std::f64::consts::PI;

pub use field::{BeamConfig, FocalField, Polarization, DEFAULT_NODES};
pub use recoil::{
    recoil_heating_rates, recoil_low_na, recoil_rate_ratios, scatter_pattern, ScatterModel,
    ScatterPattern, LOW_NA_COEFFS,
};
pub use trap::{
    find_equilibrium, frequency_ratio, optical_force, optical_force_with_step, solve_na_for_ratio,
    stiffness_matrix, trap_characterization, PowerMode, TrapCharacterization, TrapOptions,
};

use crate::error::Result;
use crate::params::{ExperimentParams, EPS0};

/// Real and imaginary polarizability of the sphere in SI (F m^2); the
/// imaginary part is the radiation-reaction term only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Polarizability {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Polarizability {
    pub fn from_real(alpha1: f64, wavelength: f64) -> Self {
        let k = 2.0 * PI / wavelength;
        Polarizability {
            alpha1,
            alpha2: k.powi(3) * alpha1 * alpha1 / (6.0 * PI * EPS0),
        }
    }

    /// Extinction (= scattering) cross-section k alpha2 / eps0, m^2.
    pub fn cross_section(&self, wavelength: f64) -> f64 {
        2.0 * PI / wavelength * self.alpha2 / EPS0
    }
}

pub fn polarizability(params: &ExperimentParams) -> Result<Polarizability> {
    crate::error::require_positive("sphere_radius", params.sphere_radius)?;
    crate::error::require_positive("wavelength", params.wavelength)?;
    let alpha1 = 3.0 * EPS0 * params.sphere_volume() * params.clausius_mossotti();
    Ok(Polarizability::from_real(alpha1, params.wavelength))
}

/// Recoil rates at the focus of a Gaussian beam of far-field divergence
/// `na`, from the full vectorial field and from the paraxial formula.
///
/// The full field uses a lens of aperture `min(4 na, 0.95)` with filling
/// factor `na / aperture`, so the pupil cut-off does not truncate the beam
/// and both calculations describe the same focus.
pub fn recoil_full_vs_low_na(
    params: &ExperimentParams,
    na: f64,
    power: f64,
    omegas: [f64; 3],
    model: ScatterModel,
) -> Result<([f64; 3], [f64; 3])> {
    crate::error::require_positive("numerical_aperture", na)?;
    let lens = (4.0 * na).min(0.95);
    if na >= lens {
        return Err(crate::error::invalid("numerical_aperture", "too large for the paraxial comparison"));
    }
    let beam = BeamConfig {
        numerical_aperture: lens,
        filling_factor: na / lens,
        power,
        ..BeamConfig::from_params(params)
    };
    let field = FocalField::new(beam)?;
    let i0 = field.intensity(&nalgebra::Vector3::zeros());
    let pol = polarizability(params)?;
    let full = recoil_heating_rates(i0, &pol, params.mass(), omegas, params.wavelength, &scatter_pattern(model))?;
    let low = recoil_low_na(params, na, power, omegas)?;
    Ok((full, low))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn table1_polarizability() {
        let p = ExperimentParams::table1();
        let a = polarizability(&p).unwrap();
        // 3 eps0 (2.1447e-21 m^3)(1.07/4.07) by hand
        assert_relative_eq!(a.alpha1, 1.4977e-32, max_relative = 1e-3);
        assert!(a.alpha2 > 0.0);
    }

    #[test]
    fn vacuum_sphere_has_no_polarizability() {
        let mut p = ExperimentParams::table1();
        p.dielectric_const = Complex64::new(1.0, 0.0);
        let a = polarizability(&p).unwrap();
        assert_eq!(a.alpha1, 0.0);
        assert_eq!(a.alpha2, 0.0);
    }

    #[test]
    fn radius_scaling() {
        let p = ExperimentParams::table1();
        let mut q = p.clone();
        q.sphere_radius *= 2.0;
        let (a, b) = (polarizability(&p).unwrap(), polarizability(&q).unwrap());
        assert_relative_eq!(b.alpha1 / a.alpha1, 8.0, max_relative = 1e-13);
        assert_relative_eq!(b.alpha2 / a.alpha2, 64.0, max_relative = 1e-13);
    }

    #[test]
    fn cross_section_is_rayleigh() {
        let p = ExperimentParams::table1();
        let a = polarizability(&p).unwrap();
        let k = p.wavenumber();
        let rayleigh = k.powi(4) * a.alpha1.powi(2) / (6.0 * PI * EPS0 * EPS0);
        assert_relative_eq!(a.cross_section(p.wavelength), rayleigh, max_relative = 1e-13);
    }
}
