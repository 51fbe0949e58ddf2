use std::f64::consts::PI;

use crate::error::{require_positive, Result};
use crate::numerics::gauss_legendre_on;
use crate::params::{ExperimentParams, C_LIGHT, EPS0, HBAR};

use super::Polarizability;

/// Angular distribution of scattered photons, incident along +z.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ScatterModel {
    /// w = 3 cos^2 theta / 4 pi, a lobe along the beam axis; the default for
    /// the reference rate estimates.
    #[default]
    AxialLobe,
    /// w = 3 (1 + cos^2 theta) / 16 pi, the usual pattern of a dipole driven
    /// by circularly polarized light.
    CircularDipole,
}

impl ScatterModel {
    pub fn density(self, cos_theta: f64) -> f64 {
        let c2 = cos_theta * cos_theta;
        match self {
            ScatterModel::AxialLobe => 3.0 * c2 / (4.0 * PI),
            ScatterModel::CircularDipole => 3.0 * (1.0 + c2) / (16.0 * PI),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "axial" => Some(ScatterModel::AxialLobe),
            "circular" | "circular_dipole" => Some(ScatterModel::CircularDipole),
            _ => None,
        }
    }
}

/// Angle-averaged squared momentum transfer per axis in units of k^2.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterPattern {
    pub model: ScatterModel,
    pub qsq_over_k2: [f64; 3],
    /// Integral of the angular density over the sphere; 1 up to quadrature error.
    pub normalization: f64,
}

/// `<q_i^2>/k^2 = int dOmega (k'_i^2 + k_i^2 - 2 k'_i k_i) w`, with k = z-hat.
pub fn scatter_pattern(model: ScatterModel) -> ScatterPattern {
    let (us, uw) = gauss_legendre_on(32, -1.0, 1.0);
    let n_phi = 64;
    let dphi = 2.0 * PI / n_phi as f64;
    let incident = [0.0, 0.0, 1.0];
    let mut norm = 0.0;
    let mut q = [0.0; 3];
    for (&u, &wu) in us.iter().zip(&uw) {
        let s = (1.0 - u * u).sqrt();
        let dens = model.density(u);
        for j in 0..n_phi {
            let phi = j as f64 * dphi;
            let out = [s * phi.cos(), s * phi.sin(), u];
            let w = wu * dphi * dens;
            norm += w;
            for i in 0..3 {
                let d = out[i] - incident[i];
                q[i] += w * d * d;
            }
        }
    }
    ScatterPattern {
        model,
        qsq_over_k2: q,
        normalization: norm,
    }
}

/// Photon-recoil heating rates (phonons per second) per axis at intensity
/// `intensity`: `Gamma_i = Gamma_scatt (hbar k)^2 <q_i^2>/k^2 / (2 m hbar omega_i)`
/// with `Gamma_scatt = I0 sigma / (hbar omega_L)` and `sigma = k alpha2 / eps0`.
pub fn recoil_heating_rates(
    intensity: f64,
    pol: &Polarizability,
    mass: f64,
    omegas: [f64; 3],
    wavelength: f64,
    pattern: &ScatterPattern,
) -> Result<[f64; 3]> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(crate::error::invalid("intensity", "must be non-negative"));
    }
    require_positive("mass", mass)?;
    require_positive("wavelength", wavelength)?;
    let k = 2.0 * PI / wavelength;
    let omega_l = C_LIGHT * k;
    let scatter_rate = intensity * pol.cross_section(wavelength) / (HBAR * omega_l);
    let mut out = [0.0; 3];
    for i in 0..3 {
        require_positive("omega", omegas[i])?;
        let q2 = (HBAR * k).powi(2) * pattern.qsq_over_k2[i];
        out[i] = scatter_rate * q2 / (2.0 * mass * HBAR * omegas[i]);
    }
    Ok(out)
}

/// The same rates in ratio form, `Gamma_i / omega_i = I0 alpha2 k^2 <q_i^2>/k^2 / (2 eps0 c K_i)`,
/// from the spring constants alone.
pub fn recoil_rate_ratios(
    intensity: f64,
    pol: &Polarizability,
    stiffness: [f64; 3],
    wavelength: f64,
    pattern: &ScatterPattern,
) -> [f64; 3] {
    let k = 2.0 * PI / wavelength;
    let mut out = [0.0; 3];
    for i in 0..3 {
        out[i] = intensity * pol.alpha2 * k * k * pattern.qsq_over_k2[i] / (2.0 * EPS0 * C_LIGHT * stiffness[i]);
    }
    out
}

/// Axis weights of the low-NA recoil formula.
pub const LOW_NA_COEFFS: [f64; 3] = [1.0 / 5.0, 2.0 / 5.0, 7.0 / 5.0];

/// Paraxial-focus recoil rates,
/// `Gamma_i = 3 NA^2 P k^7 V c_i ((eps-1)/(eps+2))^2 / (8 pi^2 rho c omega_i)`.
///
/// The focus is a Gaussian with waist `lambda / (pi NA)`.
pub fn recoil_low_na(params: &ExperimentParams, na: f64, power: f64, omegas: [f64; 3]) -> Result<[f64; 3]> {
    require_positive("numerical_aperture", na)?;
    if !(power >= 0.0) {
        return Err(crate::error::invalid("laser_power", "must be non-negative"));
    }
    if na > 0.3 {
        log::warn!("low-NA recoil formula used at NA = {na}, outside its regime");
    }
    let k = params.wavenumber();
    let cm = params.clausius_mossotti();
    let pref = 3.0 * na * na * power * k.powi(7) * params.sphere_volume() * cm * cm
        / (8.0 * PI * PI * params.density * C_LIGHT);
    let mut out = [0.0; 3];
    for i in 0..3 {
        require_positive("omega", omegas[i])?;
        out[i] = pref * LOW_NA_COEFFS[i] / omegas[i];
    }
    Ok(out)
}
