//! Run configuration: experiment parameters plus protocol, sweep and output
//! keys. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use levsqueeze::config::{load_file, parse_str, split_params};
use levsqueeze::optics::{PowerMode, ScatterModel};
use levsqueeze::protocol::{ReadoutModel, DEFAULT_FREE_FALL};
use levsqueeze::{Axis, ExperimentParams};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Deterministic,
    Stochastic,
}

impl Mode {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s {
            "deterministic" => Ok(Mode::Deterministic),
            "stochastic" => Ok(Mode::Stochastic),
            _ => Err(CliError::Config(format!(
                "mode must be `deterministic` or `stochastic`, got `{s}`"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Deterministic => "deterministic",
            Mode::Stochastic => "stochastic",
        }
    }
}

/// How the numerical aperture is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NaMode {
    /// Use `numerical_aperture` as given.
    Fixed,
    /// Solve for the NA giving omega_perp/omega_z = target.
    Solve { target: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scale {
    Linear,
    Log,
}

/// Sweep keys as given; command defaults fill the gaps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepKeys {
    pub variable: Option<String>,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub points: Option<usize>,
    pub scale: Option<Scale>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: Scale,
}

impl SweepSpec {
    pub fn validate(&self) -> CliResult<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min < self.max) {
            return Err(CliError::Config(format!(
                "sweep range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        if self.points < 2 {
            return Err(CliError::Config("sweep_points must be at least 2".into()));
        }
        if self.scale == Scale::Log && self.min <= 0.0 {
            return Err(CliError::Config("log sweeps need sweep_min > 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|j| {
                let f = j as f64 / last;
                match self.scale {
                    Scale::Linear => self.min + (self.max - self.min) * f,
                    Scale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * f).exp(),
                }
            })
            .collect()
    }
}

/// Impulse size is either absolute or in units of the longitudinal SQL impulse.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ImpulseSize {
    Absolute(f64),
    SqlUnits(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImpulseSpec {
    pub size: ImpulseSize,
    pub direction: [f64; 3],
    /// Defaults to the middle of the free fall.
    pub time: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ExperimentParams,
    /// omega'/omega; commands pick a default when absent.
    pub ratio: Option<f64>,
    pub n_cycles: u32,
    /// Cycle counts compared in sweeps.
    pub cycles: Vec<u32>,
    pub free_fall: f64,
    pub gravity: bool,
    pub vertical_axis: Axis,
    pub max_k: u32,
    pub na_mode: NaMode,
    pub power_mode: PowerMode,
    pub scatter: ScatterModel,
    pub sweep: SweepKeys,
    pub seed: u64,
    pub mode: Mode,
    /// Stochastic step; defaults to the largest allowed.
    pub dt: Option<f64>,
    pub ensemble: usize,
    pub impulse: Option<ImpulseSpec>,
    pub readout: Option<ReadoutModel>,
    pub out: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            params: ExperimentParams::table1(),
            ratio: None,
            n_cycles: 3,
            cycles: vec![1, 2, 3],
            free_fall: DEFAULT_FREE_FALL,
            gravity: true,
            vertical_axis: Axis::X,
            max_k: 3,
            na_mode: NaMode::Solve { target: 3.0 },
            power_mode: PowerMode::MatchOmegaZ,
            scatter: ScatterModel::AxialLobe,
            sweep: SweepKeys::default(),
            seed: 0,
            mode: Mode::Deterministic,
            dt: None,
            ensemble: 1,
            impulse: None,
            readout: None,
            out: None,
        }
    }
}

fn err(key: &str, what: &str, v: &Value) -> CliError {
    CliError::Config(format!("key `{key}` expects {what}, got {v}"))
}

fn num(key: &str, v: &Value) -> CliResult<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(err(key, "a number", v)),
    }
}

fn uint(key: &str, v: &Value) -> CliResult<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(err(key, "a non-negative integer", v)),
    }
}

fn u32_key(key: &str, v: &Value) -> CliResult<u32> {
    u32::try_from(uint(key, v)?).map_err(|_| err(key, "a 32-bit integer", v))
}

fn string<'a>(key: &str, v: &'a Value) -> CliResult<&'a str> {
    v.as_str().ok_or_else(|| err(key, "a string", v))
}

fn boolean(key: &str, v: &Value) -> CliResult<bool> {
    v.as_bool().ok_or_else(|| err(key, "true or false", v))
}

fn triple(key: &str, v: &Value) -> CliResult<[f64; 3]> {
    match v {
        Value::Array(items) if items.len() == 3 => {
            let mut out = [0.0; 3];
            for (o, x) in out.iter_mut().zip(items) {
                *o = num(key, x)?;
            }
            Ok(out)
        }
        _ => Err(err(key, "an array of 3 numbers", v)),
    }
}

impl RunConfig {
    /// Reads a configuration file; `None` means the bundled `table1` reference preset.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let table = match path {
            Some(p) => load_file(p)?,
            None => parse_str("include = \"table1\"", None)?,
        };
        Self::from_table(&table)
    }

    pub fn from_table(table: &Table) -> CliResult<Self> {
        let (params, rest) = split_params(table)?;
        params.validate()?;
        let mut cfg = RunConfig {
            params,
            ..RunConfig::default()
        };
        let mut target_ratio = 3.0;
        let mut na_mode = "solve".to_string();
        let mut impulse_size = None;
        let mut impulse_direction = [0.0, 0.0, 1.0];
        let mut impulse_time = None;
        let (mut r_eta, mut r_gamma, mut r_t) = (None, None, None);
        for (k, v) in &rest {
            let key = k.as_str();
            match key {
                "ratio" => cfg.ratio = Some(num(key, v)?),
                "n_cycles" => cfg.n_cycles = u32_key(key, v)?,
                "cycles" => {
                    let items = v.as_array().ok_or_else(|| err(key, "an array of integers", v))?;
                    cfg.cycles = items.iter().map(|x| u32_key(key, x)).collect::<CliResult<_>>()?;
                }
                "free_fall" => cfg.free_fall = num(key, v)?,
                "gravity" => cfg.gravity = boolean(key, v)?,
                "vertical_axis" => {
                    let s = string(key, v)?;
                    cfg.vertical_axis = Axis::parse(s).ok_or_else(|| err(key, "x, y or z", v))?;
                }
                "max_k" => cfg.max_k = u32_key(key, v)?,
                "na_mode" => na_mode = string(key, v)?.to_string(),
                "target_ratio" => target_ratio = num(key, v)?,
                "power_mode" => {
                    cfg.power_mode = match string(key, v)? {
                        "fixed" => PowerMode::Fixed,
                        "match_omega_z" => PowerMode::MatchOmegaZ,
                        _ => return Err(err(key, "`fixed` or `match_omega_z`", v)),
                    }
                }
                "scatter" => {
                    cfg.scatter =
                        ScatterModel::parse(string(key, v)?).ok_or_else(|| err(key, "`axial` or `circular`", v))?
                }
                "sweep_variable" => cfg.sweep.variable = Some(string(key, v)?.to_string()),
                "sweep_min" => cfg.sweep.min = Some(num(key, v)?),
                "sweep_max" => cfg.sweep.max = Some(num(key, v)?),
                "sweep_points" => cfg.sweep.points = Some(uint(key, v)? as usize),
                "sweep_scale" => {
                    cfg.sweep.scale = Some(match string(key, v)? {
                        "linear" => Scale::Linear,
                        "log" => Scale::Log,
                        _ => return Err(err(key, "`linear` or `log`", v)),
                    })
                }
                "seed" => cfg.seed = uint(key, v)?,
                "mode" => cfg.mode = Mode::parse(string(key, v)?)?,
                "dt" => cfg.dt = Some(num(key, v)?),
                "ensemble" => cfg.ensemble = uint(key, v)? as usize,
                "impulse" => impulse_size = Some(ImpulseSize::Absolute(num(key, v)?)),
                "impulse_sql" => impulse_size = Some(ImpulseSize::SqlUnits(num(key, v)?)),
                "impulse_direction" => impulse_direction = triple(key, v)?,
                "impulse_time" => impulse_time = Some(num(key, v)?),
                "readout_eta" => r_eta = Some(num(key, v)?),
                "readout_gamma_pulse" => r_gamma = Some(num(key, v)?),
                "readout_t_meas" => r_t = Some(num(key, v)?),
                "out" => cfg.out = Some(PathBuf::from(string(key, v)?)),
                _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
            }
        }
        cfg.na_mode = match na_mode.as_str() {
            "fixed" => NaMode::Fixed,
            "solve" => NaMode::Solve { target: target_ratio },
            other => {
                return Err(CliError::Config(format!(
                    "na_mode must be `fixed` or `solve`, got `{other}`"
                )))
            }
        };
        cfg.impulse = match (impulse_size, rest.contains_key("impulse_direction") || impulse_time.is_some()) {
            (Some(size), _) => Some(ImpulseSpec {
                size,
                direction: impulse_direction,
                time: impulse_time,
            }),
            (None, true) => {
                return Err(CliError::Config(
                    "impulse_direction and impulse_time need `impulse` or `impulse_sql`".into(),
                ))
            }
            (None, false) => None,
        };
        cfg.readout = match (r_eta, r_gamma, r_t) {
            (Some(eta), Some(gamma_pulse), Some(t_meas)) => Some(ReadoutModel { eta, gamma_pulse, t_meas }),
            (None, None, None) => None,
            _ => {
                return Err(CliError::Config(
                    "readout needs all of readout_eta, readout_gamma_pulse and readout_t_meas".into(),
                ))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if let Some(r) = self.ratio {
            if !(r > 0.0 && r < 1.0) {
                return Err(CliError::Config(format!("ratio must lie in (0, 1), got {r}")));
            }
        }
        if self.cycles.is_empty() {
            return Err(CliError::Config("cycles must not be empty".into()));
        }
        if !(self.free_fall >= 0.0 && self.free_fall.is_finite()) {
            return Err(CliError::Config("free_fall must be non-negative".into()));
        }
        if let NaMode::Solve { target } = self.na_mode {
            if !(target > 0.0 && target.is_finite()) {
                return Err(CliError::Config("target_ratio must be positive".into()));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(CliError::Config("dt must be positive".into()));
            }
        }
        if self.ensemble == 0 {
            return Err(CliError::Config("ensemble must be at least 1".into()));
        }
        if self.ensemble > 1 && self.mode != Mode::Stochastic {
            return Err(CliError::Config("an ensemble needs stochastic mode".into()));
        }
        Ok(())
    }

    /// Completes the sweep keys with command defaults.
    pub fn sweep_spec(&self, variable: &str, default: SweepSpec) -> CliResult<SweepSpec> {
        if let Some(v) = &self.sweep.variable {
            if v != variable {
                return Err(CliError::Config(format!(
                    "sweep_variable `{v}` does not match this command, which sweeps `{variable}`"
                )));
            }
        }
        let s = SweepSpec {
            min: self.sweep.min.unwrap_or(default.min),
            max: self.sweep.max.unwrap_or(default.max),
            points: self.sweep.points.unwrap_or(default.points),
            scale: self.sweep.scale.unwrap_or(default.scale),
        };
        s.validate()?;
        Ok(s)
    }
}
