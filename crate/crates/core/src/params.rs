//! Physical constants, the experiment configuration and derived length,
//! momentum and impulse scales.
//!
//! Everything is SI. The polarizability and rate formulas elsewhere carry
//! their factors of hbar, c and eps0 explicitly.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, require_positive, Error, Result};

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;
/// Vacuum permittivity, F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Standard gravity, m/s^2.
pub const G_GRAV: f64 = 9.806_65;
/// Mass of molecular hydrogen, kg.
pub const M_H2: f64 = 3.35e-27;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub c: f64,
    pub eps0: f64,
    pub k_b: f64,
    pub g_grav: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        c: C_LIGHT,
        eps0: EPS0,
        k_b: K_B,
        g_grav: G_GRAV,
    };
}

/// Index of a Cartesian axis. `Z` is the laser propagation direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        match s {
            "x" | "X" => Some(Axis::X),
            "y" | "Y" => Some(Axis::Y),
            "z" | "Z" => Some(Axis::Z),
            _ => None,
        }
    }
}

/// The single source of physical inputs: particle, gas, beam and readout.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentParams {
    /// Sphere radius, m.
    pub sphere_radius: f64,
    /// Trapping laser vacuum wavelength, m.
    pub wavelength: f64,
    /// Longitudinal trap angular frequency, rad/s.
    pub omega_z: f64,
    /// Relative permittivity at the laser wavelength. Only the real part
    /// enters the polarizability.
    pub dielectric_const: Complex64,
    /// Mass density, kg/m^3.
    pub density: f64,
    /// Im[(eps_bb - 1)/(eps_bb + 2)] for thermal radiation.
    pub bb_absorption: f64,
    /// Residual gas pressure, Pa.
    pub gas_pressure: f64,
    /// Residual gas temperature, K.
    pub gas_temperature: f64,
    /// Gas molecule mass, kg.
    pub gas_molecule_mass: f64,
    /// Internal temperature of the sphere, K.
    pub internal_temperature: f64,
    pub numerical_aperture: f64,
    /// Laser power transmitted to the focus, W.
    pub laser_power: f64,
    /// Input Gaussian waist relative to the lens aperture radius.
    pub filling_factor: f64,
    /// Measurement efficiency per axis.
    pub eta: [f64; 3],
}

impl Default for ExperimentParams {
    fn default() -> Self {
        Self::table1()
    }
}

impl ExperimentParams {
    /// The reference setup: an 80 nm silica sphere in a 1550 nm
    /// tweezer at 50 kHz, 1e-10 mbar of hydrogen at 300 K.
    pub fn table1() -> Self {
        ExperimentParams {
            sphere_radius: 80e-9,
            wavelength: 1550e-9,
            omega_z: 2.0 * PI * 50e3,
            dielectric_const: Complex64::new(2.07, 1e-10),
            density: 2000.0,
            bb_absorption: 0.1,
            gas_pressure: 1e-8,
            gas_temperature: 300.0,
            gas_molecule_mass: M_H2,
            internal_temperature: 200.0,
            numerical_aperture: 0.85,
            laser_power: 1.0,
            filling_factor: 1.0,
            eta: [0.2; 3],
        }
    }

    pub fn validate(&self) -> Result<()> {
        require_positive("sphere_radius", self.sphere_radius)?;
        require_positive("wavelength", self.wavelength)?;
        require_positive("omega_z", self.omega_z)?;
        require_positive("density", self.density)?;
        require_positive("gas_pressure", self.gas_pressure)?;
        require_positive("gas_temperature", self.gas_temperature)?;
        require_positive("gas_molecule_mass", self.gas_molecule_mass)?;
        require_positive("internal_temperature", self.internal_temperature)?;
        require_positive("laser_power", self.laser_power)?;
        require_positive("filling_factor", self.filling_factor)?;
        if !(self.bb_absorption.is_finite() && self.bb_absorption >= 0.0) {
            return Err(invalid("bb_absorption", "must be non-negative"));
        }
        if !(self.numerical_aperture > 0.0 && self.numerical_aperture < 1.0) {
            return Err(invalid(
                "numerical_aperture",
                format!("must lie in (0, 1), got {}", self.numerical_aperture),
            ));
        }
        if !(self.dielectric_const.re > 1.0) {
            return Err(invalid("dielectric_const", "real part must exceed 1"));
        }
        for &e in &self.eta {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid("eta", format!("efficiency {e} outside [0, 1]")));
            }
        }
        if self.sphere_radius >= self.wavelength / 5.0 {
            log::warn!(
                "sphere radius {:.3e} m is not well below wavelength/5 = {:.3e} m; dipole approximation is marginal",
                self.sphere_radius,
                self.wavelength / 5.0
            );
        }
        Ok(())
    }

    pub fn sphere_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.sphere_radius.powi(3)
    }

    pub fn mass(&self) -> f64 {
        self.sphere_volume() * self.density
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Clausius-Mossotti factor (eps_r - 1)/(eps_r + 2) using Re eps_r.
    pub fn clausius_mossotti(&self) -> f64 {
        let e = self.dielectric_const.re;
        (e - 1.0) / (e + 2.0)
    }

    /// Assigns one flat configuration key. Returns `Ok(false)` when the key
    /// does not belong to the experiment parameters.
    pub fn set_key(&mut self, key: &str, value: &toml::Value) -> Result<bool> {
        let num = || as_f64(key, value);
        match key {
            "sphere_radius" => self.sphere_radius = num()?,
            "wavelength" => self.wavelength = num()?,
            "omega_z" => self.omega_z = num()?,
            "freq_z" => self.omega_z = 2.0 * PI * num()?,
            "dielectric_const" | "dielectric_const_re" => self.dielectric_const.re = num()?,
            "dielectric_const_im" => self.dielectric_const.im = num()?,
            "density" => self.density = num()?,
            "bb_absorption" => self.bb_absorption = num()?,
            "gas_pressure" => self.gas_pressure = num()?,
            "gas_temperature" => self.gas_temperature = num()?,
            "gas_molecule_mass" => self.gas_molecule_mass = num()?,
            "internal_temperature" => self.internal_temperature = num()?,
            "numerical_aperture" => self.numerical_aperture = num()?,
            "laser_power" => self.laser_power = num()?,
            "filling_factor" => self.filling_factor = num()?,
            "eta" => self.eta = as_axis_triple(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }
}

pub(crate) fn as_f64(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("key `{key}` expects a number, got {value}"))),
    }
}

/// A scalar applies to all three axes; an array must have exactly three entries.
pub(crate) fn as_axis_triple(key: &str, value: &toml::Value) -> Result<[f64; 3]> {
    match value {
        toml::Value::Array(items) => {
            if items.len() != 3 {
                return Err(Error::Config(format!(
                    "key `{key}` expects 3 entries, got {}",
                    items.len()
                )));
            }
            let mut out = [0.0; 3];
            for (o, v) in out.iter_mut().zip(items) {
                *o = as_f64(key, v)?;
            }
            Ok(out)
        }
        v => Ok([as_f64(key, v)?; 3]),
    }
}

/// Mass and per-axis zero-point and SQL scales.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivedScales {
    pub mass: f64,
    pub zero_point_length: [f64; 3],
    pub zero_point_momentum: [f64; 3],
    pub sql_impulse: [f64; 3],
}

pub fn derive_scales(params: &ExperimentParams, trap_freqs: [f64; 3]) -> Result<DerivedScales> {
    require_positive("sphere_radius", params.sphere_radius)?;
    require_positive("density", params.density)?;
    for &w in &trap_freqs {
        require_positive("trap_freqs", w)?;
    }
    let mass = params.mass();
    let x0 = trap_freqs.map(|w| (HBAR / (mass * w)).sqrt());
    let p0 = trap_freqs.map(|w| (HBAR * mass * w).sqrt());
    Ok(DerivedScales {
        mass,
        zero_point_length: x0,
        zero_point_momentum: p0,
        sql_impulse: p0,
    })
}
