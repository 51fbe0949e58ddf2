use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;

use crate::error::{require_positive, Error, Result};
use crate::numerics::brent;
use crate::params::ExperimentParams;

use super::field::{BeamConfig, FocalField, DEFAULT_NODES};
use super::recoil::{recoil_heating_rates, scatter_pattern, ScatterModel};
use super::{polarizability, Polarizability};

/// Residual force allowed at the returned equilibrium, relative to the
/// restoring force `k_z lambda` one wavelength off the equilibrium.
const EQUILIBRIUM_FORCE_RTOL: f64 = 1e-9;

/// Time-averaged dipole force with field gradients from central differences
/// of step `wavelength / 2000`.
pub fn optical_force(field: &FocalField, pol: &Polarizability, x: &Vector3<f64>) -> Vector3<f64> {
    optical_force_with_step(field, pol, x, field.beam().wavelength / 2000.0)
}

/// `F_j = (alpha1/2) Re(E* . d_j E) + (alpha2/2) Im(E* . d_j E)`.
///
/// The first term is the gradient force `(alpha1/4) grad |E|^2`; the second
/// is the scattering force, pushing along +z for a forward-propagating beam.
pub fn optical_force_with_step(field: &FocalField, pol: &Polarizability, x: &Vector3<f64>, h: f64) -> Vector3<f64> {
    let e = field.field(x);
    let mut f = Vector3::zeros();
    for j in 0..3 {
        let mut dx = Vector3::zeros();
        dx[j] = h;
        let grad = (field.field(&(x + dx)) - field.field(&(x - dx))) / Complex64::from(2.0 * h);
        let s: Complex64 = e.iter().zip(grad.iter()).map(|(a, b)| a.conj() * b).sum();
        f[j] = 0.5 * pol.alpha1 * s.re + 0.5 * pol.alpha2 * s.im;
    }
    f
}

/// Stable on-axis equilibrium: the zero of F_z where it changes sign from
/// positive to negative, nearest the geometric focus within +-2 wavelengths.
pub fn find_equilibrium(field: &FocalField, pol: &Polarizability) -> Result<Vector3<f64>> {
    let lam = field.beam().wavelength;
    let fz = |z: f64| optical_force(field, pol, &Vector3::new(0.0, 0.0, z)).z;
    let n = 160;
    let zs: Vec<f64> = (0..=n).map(|i| -2.0 * lam + 4.0 * lam * i as f64 / n as f64).collect();
    let vals: Vec<f64> = zs.iter().map(|&z| fz(z)).collect();
    let mut best: Option<(f64, f64)> = None;
    for i in 0..n {
        if vals[i] > 0.0 && vals[i + 1] <= 0.0 {
            let closer = best.is_none_or(|(a, _)| zs[i].abs() < a.abs());
            if closer {
                best = Some((zs[i], zs[i + 1]));
            }
        }
    }
    let (a, b) = best.ok_or_else(|| {
        Error::NoTrap(format!(
            "axial force has no stable zero within +-2 wavelengths (NA {}); scattering force exceeds gradient force",
            field.beam().numerical_aperture
        ))
    })?;
    let z = brent(fz, a, b, 1e-26, 200)?;
    Ok(Vector3::new(0.0, 0.0, z))
}

/// K_ij = -dF_i/dx_j by five-point central differences, symmetrized.
pub fn stiffness_matrix(field: &FocalField, pol: &Polarizability, x: &Vector3<f64>, h: f64) -> Matrix3<f64> {
    let mut k = Matrix3::zeros();
    for j in 0..3 {
        let mut d = Vector3::zeros();
        d[j] = h;
        let fp1 = optical_force(field, pol, &(x + d));
        let fm1 = optical_force(field, pol, &(x - d));
        let fp2 = optical_force(field, pol, &(x + 2.0 * d));
        let fm2 = optical_force(field, pol, &(x - 2.0 * d));
        let deriv = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
        for i in 0..3 {
            k[(i, j)] = -deriv[i];
        }
    }
    0.5 * (k + k.transpose())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PowerMode {
    /// Use `laser_power` as given.
    Fixed,
    /// Rescale the power so the longitudinal frequency equals `omega_z`.
    MatchOmegaZ,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrapOptions {
    pub power_mode: PowerMode,
    pub nodes: usize,
    /// Step for the stiffness differences, in wavelengths.
    pub stiffness_step: f64,
    pub scatter: ScatterModel,
}

impl Default for TrapOptions {
    fn default() -> Self {
        TrapOptions {
            power_mode: PowerMode::MatchOmegaZ,
            nodes: DEFAULT_NODES,
            stiffness_step: 1e-3,
            scatter: ScatterModel::AxialLobe,
        }
    }
}

/// Equilibrium, spring constants, frequencies and recoil rates of a tweezer.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapCharacterization {
    pub numerical_aperture: f64,
    pub laser_power: f64,
    pub x_eq: Vector3<f64>,
    pub stiffness: Matrix3<f64>,
    /// Principal spring constants ordered (perp, perp, z), N/m.
    pub spring_constants: [f64; 3],
    /// Angular frequencies ordered (perp, perp, z), rad/s.
    pub trap_freqs: [f64; 3],
    /// Intensity at the equilibrium, W/m^2.
    pub focal_intensity: f64,
    /// Recoil heating rates (perp, perp, z), 1/s.
    pub recoil_rates: [f64; 3],
    pub mass: f64,
}

impl TrapCharacterization {
    pub fn perp_over_z(&self) -> f64 {
        0.5 * (self.trap_freqs[0] + self.trap_freqs[1]) / self.trap_freqs[2]
    }

    /// Gamma_i / omega_i per axis.
    pub fn recoil_over_freq(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.recoil_rates[i] / self.trap_freqs[i])
    }
}

pub fn trap_characterization(params: &ExperimentParams, opts: &TrapOptions) -> Result<TrapCharacterization> {
    params.validate()?;
    let pol = polarizability(params)?;
    let mass = params.mass();
    let lam = params.wavelength;
    let mut beam = BeamConfig::from_params(params);
    beam.nodes = opts.nodes;
    let field = FocalField::new(beam)?;
    let x_eq = find_equilibrium(&field, &pol)?;
    let stiffness = stiffness_matrix(&field, &pol, &x_eq, opts.stiffness_step * lam);
    let (mut springs, _) = principal_springs(&stiffness)?;

    // Forces scale linearly with power at fixed geometry, so the equilibrium is
    // power independent and the spring constants scale exactly.
    let (power, field, stiffness) = match opts.power_mode {
        PowerMode::Fixed => (params.laser_power, field, stiffness),
        PowerMode::MatchOmegaZ => {
            let scale = params.omega_z * params.omega_z * mass / springs[2];
            springs = springs.map(|k| k * scale);
            let power = params.laser_power * scale;
            (power, FocalField::new(beam.with_power(power))?, stiffness * scale)
        }
    };
    let residual = optical_force(&field, &pol, &x_eq).norm();
    let bound = EQUILIBRIUM_FORCE_RTOL * springs[2] * lam;
    if residual > bound {
        return Err(Error::Numerical(format!(
            "residual force {residual:e} N at equilibrium exceeds {bound:e} N"
        )));
    }
    let trap_freqs = springs.map(|k| (k / mass).sqrt());
    let focal_intensity = field.intensity(&x_eq);
    let pattern = scatter_pattern(opts.scatter);
    let recoil_rates = recoil_heating_rates(focal_intensity, &pol, mass, trap_freqs, lam, &pattern)?;
    Ok(TrapCharacterization {
        numerical_aperture: params.numerical_aperture,
        laser_power: power,
        x_eq,
        stiffness,
        spring_constants: springs,
        trap_freqs,
        focal_intensity,
        recoil_rates,
        mass,
    })
}

/// Eigenvalues of K ordered (perp, perp, z): the z mode is the eigenvector
/// with the largest z component.
fn principal_springs(k: &Matrix3<f64>) -> Result<([f64; 3], Matrix3<f64>)> {
    let eig = SymmetricEigen::new(*k);
    let z_mode = (0..3)
        .max_by(|&a, &b| eig.eigenvectors[(2, a)].abs().total_cmp(&eig.eigenvectors[(2, b)].abs()))
        .unwrap_or(2);
    let mut perp: Vec<usize> = (0..3).filter(|&i| i != z_mode).collect();
    perp.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let order = [perp[0], perp[1], z_mode];
    let springs = order.map(|i| eig.eigenvalues[i]);
    if springs.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::NoTrap(format!(
            "stiffness matrix is not positive definite: eigenvalues {springs:?}"
        )));
    }
    let mut vecs = Matrix3::zeros();
    for (c, &i) in order.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    Ok((springs, vecs))
}

/// omega_perp/omega_z of the trap at numerical aperture `na`.
pub fn frequency_ratio(params: &ExperimentParams, na: f64, opts: &TrapOptions) -> Result<f64> {
    let mut p = params.clone();
    p.numerical_aperture = na;
    let o = TrapOptions {
        power_mode: PowerMode::Fixed,
        ..*opts
    };
    Ok(trap_characterization(&p, &o)?.perp_over_z())
}

/// Numerical aperture in `[lo, hi]` where omega_perp/omega_z equals `target`.
pub fn solve_na_for_ratio(params: &ExperimentParams, target: f64, lo: f64, hi: f64, opts: &TrapOptions) -> Result<f64> {
    require_positive("target", target)?;
    let n = 16;
    let grid: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<Option<f64>> = grid
        .iter()
        .map(|&na| frequency_ratio(params, na, opts).ok().map(|r| r - target))
        .collect();
    for i in 0..n {
        if let (Some(a), Some(b)) = (vals[i], vals[i + 1]) {
            if a.signum() != b.signum() {
                let g = |na: f64| frequency_ratio(params, na, opts).map(|r| r - target).unwrap_or(f64::NAN);
                return brent(g, grid[i], grid[i + 1], 1e-13, 200);
            }
        }
    }
    Err(Error::NoTrap(format!(
        "frequency ratio never crosses {target} for NA in [{lo}, {hi}]"
    )))
}
