//! Non-laser decoherence and event rates, and the per-axis decoherence budget.
//!
//! The thermal-radiation formulas are written with `k_B T / (hbar c)` as the
//! inverse thermal wavelength and one factor of `c` to turn an inverse length
//! into a rate.

use std::f64::consts::PI;

use crate::error::{require_positive, Result};
use crate::params::{ExperimentParams, C_LIGHT, HBAR, K_B};

/// Riemann zeta(5).
pub const ZETA5: f64 = 1.036_927_755_143_37;

fn thermal_wavenumber(t: f64) -> f64 {
    K_B * t / (HBAR * C_LIGHT)
}

/// Localization rate from thermal emission for zero-point length `x0`:
/// `(4 pi^4 / 63) V x0^2 c (k_B T/(hbar c))^6 Im[(eps-1)/(eps+2)]`.
pub fn blackbody_decoherence_rate(params: &ExperimentParams, x0: f64) -> Result<f64> {
    require_positive("internal_temperature", params.internal_temperature)?;
    require_positive("x0", x0)?;
    Ok(4.0 * PI.powi(4) / 63.0
        * params.sphere_volume()
        * x0
        * x0
        * C_LIGHT
        * thermal_wavenumber(params.internal_temperature).powi(6)
        * params.bb_absorption)
}

/// Momentum diffusion of thermal emission, hbar^2 Gamma_BB / x0^2, in kg^2 m^2/s^3.
/// Independent of the reference frequency.
pub fn blackbody_momentum_diffusion(params: &ExperimentParams) -> Result<f64> {
    let x0 = 1.0;
    Ok(HBAR * HBAR * blackbody_decoherence_rate(params, x0)? / (x0 * x0))
}

/// Mean thermal photon emission rate,
/// `(72 zeta(5)/pi^2) V c (k_B T/(hbar c))^4 Im[(eps-1)/(eps+2)]`.
pub fn blackbody_emission_rate(params: &ExperimentParams) -> Result<f64> {
    require_positive("internal_temperature", params.internal_temperature)?;
    Ok(72.0 * ZETA5 / (PI * PI)
        * params.sphere_volume()
        * C_LIGHT
        * thermal_wavenumber(params.internal_temperature).powi(4)
        * params.bb_absorption)
}

/// Gas collision rate for hard-sphere scattering off a Maxwell-Boltzmann gas,
/// `P R^2 sqrt(pi / (2 m_gas k_B T))`.
pub fn gas_collision_rate(params: &ExperimentParams) -> Result<f64> {
    require_positive("gas_pressure", params.gas_pressure)?;
    require_positive("gas_temperature", params.gas_temperature)?;
    require_positive("gas_molecule_mass", params.gas_molecule_mass)?;
    require_positive("sphere_radius", params.sphere_radius)?;
    Ok(params.gas_pressure
        * params.sphere_radius.powi(2)
        * (PI / (2.0 * params.gas_molecule_mass * K_B * params.gas_temperature)).sqrt())
}

/// Thermally averaged cross-section times speed, m^3/s.
pub fn gas_sigma_v(params: &ExperimentParams) -> f64 {
    PI * params.sphere_radius.powi(2) / 4.0
        * (8.0 * K_B * params.gas_temperature / (PI * params.gas_molecule_mass)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RateSource {
    Recoil,
    Blackbody,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecoherenceBudget {
    /// Laser recoil, per axis.
    pub gamma_recoil: [f64; 3],
    /// Thermal-emission localization per axis (depends on x0_i).
    pub gamma_bb: [f64; 3],
    pub gamma_bb_emission: f64,
    pub gamma_gas: f64,
    /// Trap-on total, recoil + blackbody.
    pub gamma_total: [f64; 3],
    /// Trap-off total, blackbody only.
    pub gamma_total_trap_off: [f64; 3],
    pub dominant: [RateSource; 3],
}

impl DecoherenceBudget {
    /// Probability of at least one gas collision during `duration`.
    pub fn collision_probability(&self, duration: f64) -> f64 {
        1.0 - (-self.gamma_gas * duration).exp()
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for i in 0..3 {
            s.push_str(&format!(
                "axis {}: recoil {:.3e}/s, blackbody {:.3e}/s -> {:?} dominates; ",
                ["x", "y", "z"][i],
                self.gamma_recoil[i],
                self.gamma_bb[i],
                self.dominant[i]
            ));
        }
        s.push_str(&format!(
            "gas collisions {:.3e}/s, thermal photons {:.3e}/s",
            self.gamma_gas, self.gamma_bb_emission
        ));
        s
    }
}

/// Combines recoil rates with the thermal and gas rates. Gas collisions are
/// rare discrete events and stay out of the continuous totals.
pub fn assemble_budget(recoil: [f64; 3], params: &ExperimentParams, x0: [f64; 3]) -> Result<DecoherenceBudget> {
    for &g in &recoil {
        if !(g >= 0.0 && g.is_finite()) {
            return Err(crate::error::invalid("recoil", "rates must be non-negative"));
        }
    }
    let mut gamma_bb = [0.0; 3];
    for i in 0..3 {
        gamma_bb[i] = blackbody_decoherence_rate(params, x0[i])?;
    }
    let gamma_total = [0, 1, 2].map(|i| recoil[i] + gamma_bb[i]);
    let dominant = [0, 1, 2].map(|i| {
        if recoil[i] >= gamma_bb[i] {
            RateSource::Recoil
        } else {
            RateSource::Blackbody
        }
    });
    let budget = DecoherenceBudget {
        gamma_recoil: recoil,
        gamma_bb,
        gamma_bb_emission: blackbody_emission_rate(params)?,
        gamma_gas: gas_collision_rate(params)?,
        gamma_total,
        gamma_total_trap_off: gamma_bb,
        dominant,
    };
    log::info!("decoherence budget: {}", budget.summary());
    Ok(budget)
}
