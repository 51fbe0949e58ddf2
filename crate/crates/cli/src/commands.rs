//! Subcommands. Each returns the rendered files; nothing touches the
//! filesystem until the whole command has succeeded.

use std::fmt::Write as _;
use std::path::PathBuf;

use levsqueeze::decoherence::{assemble_budget, DecoherenceBudget, RateSource};
use levsqueeze::dynamics::{max_step, Particle, Tolerances, TrajectoryRecord};
use levsqueeze::gaussian_state::{squeezing_db, STATE_CSV_HEADER};
use levsqueeze::optics::{solve_na_for_ratio, trap_characterization, TrapCharacterization, TrapOptions};
use levsqueeze::params::HBAR;
use levsqueeze::protocol::{
    asymptotic_variance, build_bangbang_schedule, run_protocol, ImpulseEvent, ProtocolRun, ProtocolTimeline,
    RunMode, SqueezeProtocol,
};
use levsqueeze::{Error, ExperimentParams};
use rayon::prelude::*;

use crate::config::{ImpulseSize, Mode, NaMode, RunConfig, Scale, SweepSpec};
use crate::error::{CliError, CliResult};
use crate::output::{header, sibling};

const AXES: [&str; 3] = ["x", "y", "z"];
/// NA bracket searched when solving for a frequency ratio.
const NA_SEARCH: (f64, f64) = (0.6, 0.95);
/// Harmonic matching ratios of omega_perp/omega_z marked in NA sweeps.
const MARKED_RATIOS: [(f64, &str); 2] = [(3.0, "3"), (5.0 / 3.0, "5/3")];

/// Rendered output of a command. `stdout` is printed when no files are named.
#[derive(Debug, Default)]
pub struct Output {
    pub files: Vec<(PathBuf, String)>,
    pub stdout: String,
}

impl Output {
    fn single(out: Option<&PathBuf>, text: String) -> Self {
        match out {
            Some(p) => Output {
                files: vec![(p.clone(), text)],
                stdout: String::new(),
            },
            None => Output {
                files: Vec::new(),
                stdout: text,
            },
        }
    }
}

fn trap_options(cfg: &RunConfig) -> TrapOptions {
    TrapOptions {
        power_mode: cfg.power_mode,
        scatter: cfg.scatter,
        ..TrapOptions::default()
    }
}

/// Parameters with the NA resolved, and the resulting trap.
pub fn characterize(cfg: &RunConfig) -> CliResult<(ExperimentParams, TrapCharacterization)> {
    let opts = trap_options(cfg);
    let mut p = cfg.params.clone();
    if let NaMode::Solve { target } = cfg.na_mode {
        p.numerical_aperture = solve_na_for_ratio(&p, target, NA_SEARCH.0, NA_SEARCH.1, &opts)?;
    }
    let t = trap_characterization(&p, &opts)?;
    Ok((p, t))
}

fn zero_point_lengths(t: &TrapCharacterization) -> [f64; 3] {
    t.trap_freqs.map(|w| (HBAR / (t.mass * w)).sqrt())
}

fn budget_for(p: &ExperimentParams, t: &TrapCharacterization) -> CliResult<DecoherenceBudget> {
    Ok(assemble_budget(t.recoil_rates, p, zero_point_lengths(t))?)
}

fn protocol_for(
    cfg: &RunConfig,
    p: &ExperimentParams,
    t: &TrapCharacterization,
    ratio: f64,
    n_cycles: u32,
) -> CliResult<SqueezeProtocol> {
    let b = budget_for(p, t)?;
    Ok(SqueezeProtocol::new(t.trap_freqs, ratio, n_cycles, p.eta, t.recoil_rates, b.gamma_bb, cfg.max_k)?)
}

pub fn budget(cfg: &RunConfig) -> CliResult<Output> {
    let (p, t) = characterize(cfg)?;
    let b = budget_for(&p, &t)?;
    let mut s = header("budget", "");
    s.push_str("quantity,axis,value,unit\n");
    let mut row = |q: &str, axis: &str, v: String, unit: &str| {
        let _ = writeln!(s, "{q},{axis},{v},{unit}");
    };
    row("numerical_aperture", "", format!("{:.6}", p.numerical_aperture), "");
    row("laser_power", "", format!("{:.6e}", t.laser_power), "W");
    row("mass", "", format!("{:.6e}", t.mass), "kg");
    let gamma_over_omega = [0, 1, 2].map(|i| b.gamma_total[i] / t.trap_freqs[i]);
    let per_axis: [(&str, [f64; 3], &str); 6] = [
        ("trap_frequency", t.trap_freqs, "rad/s"),
        ("gamma_recoil", b.gamma_recoil, "1/s"),
        ("gamma_bb", b.gamma_bb, "1/s"),
        ("gamma_total", b.gamma_total, "1/s"),
        ("gamma_total_trap_off", b.gamma_total_trap_off, "1/s"),
        ("gamma_over_omega", gamma_over_omega, ""),
    ];
    for (q, v, unit) in per_axis {
        for i in 0..3 {
            row(q, AXES[i], format!("{:.6e}", v[i]), unit);
        }
    }
    for i in 0..3 {
        let d = match b.dominant[i] {
            RateSource::Recoil => "recoil",
            RateSource::Blackbody => "blackbody",
        };
        row("dominant", AXES[i], d.into(), "");
    }
    row("gamma_bb_emission", "", format!("{:.6e}", b.gamma_bb_emission), "1/s");
    row("gamma_gas", "", format!("{:.6e}", b.gamma_gas), "1/s");
    row(
        "collision_probability_free_fall",
        "",
        format!("{:.6e}", b.collision_probability(cfg.free_fall)),
        "",
    );
    Ok(Output::single(cfg.out.as_ref(), s))
}

/// Squeezing of an isotropic oscillator at omega_z versus Gamma/omega, one
/// row per grid point and cycle count.
pub fn sweep_decoherence(cfg: &RunConfig) -> CliResult<Output> {
    let spec = cfg.sweep_spec(
        "gamma_over_omega",
        SweepSpec {
            min: 1e-3,
            max: 1.0,
            points: 25,
            scale: Scale::Log,
        },
    )?;
    let ratio = cfg.ratio.unwrap_or(0.5);
    let w = cfg.params.omega_z;
    let m = cfg.params.mass();
    let particle = Particle::new(m, [w; 3], cfg.vertical_axis.index())?;
    let jobs: Vec<(f64, u32)> = spec.grid().into_iter().flat_map(|g| cfg.cycles.iter().map(move |&n| (g, n))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(g, n)| -> CliResult<String> {
            let proto = SqueezeProtocol::new([w; 3], ratio, n, cfg.params.eta, [g * w; 3], [0.0; 3], cfg.max_k)?;
            let tl = build_bangbang_schedule(&proto, 0.0, false)?;
            let run = run_protocol(&particle, &proto, &tl, None, RunMode::Deterministic, None, &Tolerances::default())?;
            let asym = squeezing_db(asymptotic_variance(m, w, ratio * w, g * w)?, m, w);
            Ok(format!("{g:.6e},{n},{:.6},{asym:.6}\n", run.result.metrics.squeezing_db[2]))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut s = header(
        "sweep-decoherence",
        &format!("ratio={ratio}; eta={:?}; omega={w:.6e} rad/s", cfg.params.eta),
    );
    s.push_str("gamma_over_omega,n_cycles,squeezing_db,asymptotic_eta0_db\n");
    rows.iter().for_each(|r| s.push_str(r));
    Ok(Output::single(cfg.out.as_ref(), s))
}

/// Squeezing and absolute momentum width per axis versus omega'/omega at the
/// configured trap.
pub fn sweep_frequency(cfg: &RunConfig) -> CliResult<Output> {
    let spec = cfg.sweep_spec(
        "ratio",
        SweepSpec {
            min: 0.05,
            max: 0.95,
            points: 19,
            scale: Scale::Linear,
        },
    )?;
    if !(spec.min > 0.0 && spec.max < 1.0) {
        return Err(CliError::Config("frequency ratios must lie in (0, 1)".into()));
    }
    let (p, t) = characterize(cfg)?;
    let particle = Particle::new(t.mass, t.trap_freqs, cfg.vertical_axis.index())?;
    let jobs: Vec<(f64, u32)> = spec.grid().into_iter().flat_map(|r| cfg.cycles.iter().map(move |&n| (r, n))).collect();
    let rows = jobs
        .par_iter()
        .map(|&(r, n)| -> CliResult<String> {
            let proto = protocol_for(cfg, &p, &t, r, n)?;
            let tl = build_bangbang_schedule(&proto, 0.0, false)?;
            let run = run_protocol(&particle, &proto, &tl, None, RunMode::Deterministic, None, &Tolerances::default())?;
            let mt = run.result.metrics;
            let db = mt.squeezing_db;
            let wp = mt.var_p.map(f64::sqrt);
            Ok(format!(
                "{r:.6},{n},{:.6},{:.6},{:.6},{:.6e},{:.6e},{:.6e}\n",
                db[0], db[1], db[2], wp[0], wp[1], wp[2]
            ))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut s = header(
        "sweep-frequency",
        &format!(
            "numerical_aperture={:.6}; trap_freqs_rad_per_s=[{:.6e} {:.6e} {:.6e}]",
            p.numerical_aperture, t.trap_freqs[0], t.trap_freqs[1], t.trap_freqs[2]
        ),
    );
    s.push_str("ratio,n_cycles,db_x,db_y,db_z,width_p_x_kgm_per_s,width_p_y_kgm_per_s,width_p_z_kgm_per_s\n");
    rows.iter().for_each(|r| s.push_str(r));
    Ok(Output::single(cfg.out.as_ref(), s))
}

struct NaRow {
    na: f64,
    trap: Option<TrapCharacterization>,
}

/// omega_perp/omega_z versus NA. Points without a stable trap are flagged;
/// crossings of the harmonic matching ratios are marked and refined.
pub fn sweep_na(cfg: &RunConfig) -> CliResult<Output> {
    let spec = cfg.sweep_spec(
        "na",
        SweepSpec {
            min: 0.3,
            max: 0.95,
            points: 66,
            scale: Scale::Linear,
        },
    )?;
    if !(spec.min > 0.0 && spec.max < 1.0) {
        return Err(CliError::Config("NA range must lie within (0, 1)".into()));
    }
    let opts = trap_options(cfg);
    let rows = spec
        .grid()
        .par_iter()
        .map(|&na| -> CliResult<NaRow> {
            let mut p = cfg.params.clone();
            p.numerical_aperture = na;
            match trap_characterization(&p, &opts) {
                Ok(t) => Ok(NaRow { na, trap: Some(t) }),
                Err(Error::NoTrap(msg)) => {
                    log::info!("NA {na}: {msg}");
                    Ok(NaRow { na, trap: None })
                }
                Err(e) => Err(e.into()),
            }
        })
        .collect::<CliResult<Vec<_>>>()?;

    let mut s = header("sweep-na", &format!("power_mode={:?}", cfg.power_mode));
    s.push_str("na,trapped,omega_perp_rad_per_s,omega_z_rad_per_s,perp_over_z,laser_power_w,crossing\n");
    let mut refined = Vec::new();
    for (j, r) in rows.iter().enumerate() {
        let mut marks = Vec::new();
        if j > 0 {
            if let (Some(a), Some(b)) = (&rows[j - 1].trap, &r.trap) {
                for (target, label) in MARKED_RATIOS {
                    if (a.perp_over_z() - target) * (b.perp_over_z() - target) <= 0.0 {
                        marks.push(label);
                        refined.push((label, rows[j - 1].na, r.na, target));
                    }
                }
            }
        }
        match &r.trap {
            Some(t) => {
                let _ = writeln!(
                    s,
                    "{:.6},1,{:.6e},{:.6e},{:.6},{:.6e},{}",
                    r.na,
                    0.5 * (t.trap_freqs[0] + t.trap_freqs[1]),
                    t.trap_freqs[2],
                    t.perp_over_z(),
                    t.laser_power,
                    marks.join(";")
                );
            }
            None => {
                let _ = writeln!(s, "{:.6},0,nan,nan,nan,nan,", r.na);
            }
        }
    }
    let refined = refined
        .par_iter()
        .map(|&(label, lo, hi, target)| -> CliResult<String> {
            let na = solve_na_for_ratio(&cfg.params, target, lo, hi, &opts)?;
            Ok(format!("# crossing perp_over_z={label} at na={na:.6}\n"))
        })
        .collect::<CliResult<Vec<_>>>()?;
    refined.iter().for_each(|r| s.push_str(r));
    Ok(Output::single(cfg.out.as_ref(), s))
}

struct RunSetup {
    params: ExperimentParams,
    trap: TrapCharacterization,
    particle: Particle,
    proto: SqueezeProtocol,
    timeline: ProtocolTimeline,
    impulse: Option<ImpulseEvent>,
    dt: f64,
}

fn run_setup(cfg: &RunConfig) -> CliResult<RunSetup> {
    let (params, trap) = characterize(cfg)?;
    let ratio = cfg.ratio.unwrap_or(0.2);
    let proto = protocol_for(cfg, &params, &trap, ratio, cfg.n_cycles)?;
    let timeline = build_bangbang_schedule(&proto, cfg.free_fall, cfg.gravity)?;
    let particle = Particle::new(trap.mass, trap.trap_freqs, cfg.vertical_axis.index())?;
    let impulse = match cfg.impulse {
        None => None,
        Some(spec) => {
            let magnitude = match spec.size {
                ImpulseSize::Absolute(v) => v,
                ImpulseSize::SqlUnits(n) => n * (HBAR * trap.mass * trap.trap_freqs[2]).sqrt(),
            };
            let norm = spec.direction.iter().map(|d| d * d).sum::<f64>().sqrt();
            if !(norm > 0.0) {
                return Err(CliError::Config("impulse_direction must be non-zero".into()));
            }
            let t = spec.time.unwrap_or_else(|| timeline.mid_free_fall());
            Some(ImpulseEvent::new(magnitude, spec.direction.map(|d| d / norm), t)?)
        }
    };
    let dt = cfg.dt.unwrap_or_else(|| max_step(&timeline.schedule));
    Ok(RunSetup {
        params,
        trap,
        particle,
        proto,
        timeline,
        impulse,
        dt,
    })
}

fn execute_run(cfg: &RunConfig, setup: &RunSetup, seed: u64) -> CliResult<ProtocolRun> {
    let mode = match cfg.mode {
        Mode::Deterministic => RunMode::Deterministic,
        Mode::Stochastic => RunMode::Stochastic { dt: setup.dt, seed },
    };
    Ok(run_protocol(
        &setup.particle,
        &setup.proto,
        &setup.timeline,
        setup.impulse.as_ref(),
        mode,
        cfg.readout.as_ref(),
        &Tolerances::default(),
    )?)
}

fn trajectory_csv(cfg: &RunConfig, record: &TrajectoryRecord, seed: u64) -> String {
    let mut s = header("run-trajectory", &format!("mode={}; seed={seed}", cfg.mode.name()));
    s.push_str(STATE_CSV_HEADER);
    s.push('\n');
    let mut buf = Vec::new();
    for (t, st) in record.times.iter().zip(&record.states) {
        st.write_csv_rows(*t, &mut buf).expect("writing to memory");
    }
    s.push_str(&String::from_utf8(buf).expect("CSV rows are ASCII"));
    s
}

fn summary_csv(cfg: &RunConfig, setup: &RunSetup, run: &ProtocolRun, seed: u64) -> String {
    let r = &run.result;
    let mut s = header("run-summary", &format!("mode={}; seed={seed}", cfg.mode.name()));
    s.push_str("quantity,axis,value,unit\n");
    let mut row = |q: &str, axis: &str, v: String, unit: &str| {
        let _ = writeln!(s, "{q},{axis},{v},{unit}");
    };
    row("numerical_aperture", "", format!("{:.6}", setup.params.numerical_aperture), "");
    row("t_off", "", format!("{:.6e}", setup.timeline.t_off), "s");
    row("t_on", "", format!("{:.6e}", setup.timeline.t_on), "s");
    row("t_end", "", format!("{:.6e}", setup.timeline.t_end), "s");
    for i in 0..3 {
        row("trap_frequency", AXES[i], format!("{:.6e}", setup.trap.trap_freqs[i]), "rad/s");
    }
    let per_axis: [(&str, [f64; 3], &str); 7] = [
        ("squeezing_db_at_t_off", r.metrics.squeezing_db, "dB"),
        ("var_p_at_t_off", r.metrics.var_p, "kg2m2/s2"),
        ("purity_at_t_off", r.metrics.purity, ""),
        ("min_detectable_impulse", r.min_detectable_impulse, "kgm/s"),
        ("db_below_sql", r.db_below_sql, "dB"),
        ("sql_impulse", r.sql_impulse, "kgm/s"),
        ("shot_noise", r.shot_noise, "m"),
    ];
    for (q, v, unit) in per_axis {
        for i in 0..3 {
            row(q, AXES[i], format!("{:.6e}", v[i]), unit);
        }
    }
    for i in 0..3 {
        row("final_mean_x", AXES[i], format!("{:.6e}", r.final_state.axes[i].mean_x + 0.0), "m");
    }
    for i in 0..3 {
        row("readout_resolves_state", AXES[i], r.readout_resolves_state[i].to_string(), "");
    }
    if let (Some(imp), Some(rec)) = (&setup.impulse, r.recovered_impulse) {
        let dp = imp.delta_p();
        for i in 0..3 {
            row("injected_impulse", AXES[i], format!("{:.6e}", dp[i]), "kgm/s");
        }
        for i in 0..3 {
            // + 0.0 turns -0 into 0
            row("recovered_impulse", AXES[i], format!("{:.6e}", rec[i] + 0.0), "kgm/s");
        }
    }
    row("duty_estimate", "", format!("{:.6e}", r.duty_estimate), "");
    s
}

/// Ensemble table: one row per seed and axis, then mean and standard
/// deviation across seeds.
fn aggregate_csv(cfg: &RunConfig, runs: &[(u64, ProtocolRun)]) -> String {
    let mut s = header(
        "run-aggregate",
        &format!("mode={}; seeds={}..{}", cfg.mode.name(), cfg.seed, cfg.seed + runs.len() as u64 - 1),
    );
    s.push_str("seed,axis,final_mean_x_m,final_mean_p_kgm_per_s,final_var_x_m2,recovered_impulse_kgm_per_s\n");
    let fields = |run: &ProtocolRun, i: usize| {
        let a = run.result.final_state.axes[i];
        let rec = run.result.recovered_impulse.map_or(f64::NAN, |r| r[i]);
        [a.mean_x, a.mean_p, a.var_x, rec]
    };
    for (seed, run) in runs {
        for i in 0..3 {
            let f = fields(run, i);
            let _ = writeln!(s, "{seed},{},{:.12e},{:.12e},{:.12e},{:.12e}", AXES[i], f[0], f[1], f[2], f[3]);
        }
    }
    let n = runs.len() as f64;
    for i in 0..3 {
        let all: Vec<[f64; 4]> = runs.iter().map(|(_, r)| fields(r, i)).collect();
        let mean: [f64; 4] = [0, 1, 2, 3].map(|c| all.iter().map(|f| f[c]).sum::<f64>() / n);
        let std: [f64; 4] = [0, 1, 2, 3].map(|c| {
            if runs.len() < 2 {
                return f64::NAN;
            }
            (all.iter().map(|f| (f[c] - mean[c]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        });
        for (label, v) in [("mean", mean), ("std", std)] {
            let _ = writeln!(s, "{label},{},{:.12e},{:.12e},{:.12e},{:.12e}", AXES[i], v[0], v[1], v[2], v[3]);
        }
    }
    s
}

pub fn run(cfg: &RunConfig) -> CliResult<Output> {
    let setup = run_setup(cfg)?;
    if cfg.ensemble > 1 {
        let out = cfg
            .out
            .as_ref()
            .ok_or_else(|| CliError::Config("an ensemble needs an output path (--out)".into()))?;
        let runs = (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|j| {
                let seed = cfg.seed + j;
                execute_run(cfg, &setup, seed).map(|r| (seed, r))
            })
            .collect::<CliResult<Vec<_>>>()?;
        let mut files = Vec::new();
        for (seed, r) in &runs {
            let tag = format!("seed{seed}");
            files.push((sibling(out, &tag), trajectory_csv(cfg, &r.record, *seed)));
            files.push((sibling(out, &format!("{tag}.summary")), summary_csv(cfg, &setup, r, *seed)));
        }
        files.push((sibling(out, "aggregate"), aggregate_csv(cfg, &runs)));
        return Ok(Output {
            files,
            stdout: String::new(),
        });
    }
    let r = execute_run(cfg, &setup, cfg.seed)?;
    let summary = summary_csv(cfg, &setup, &r, cfg.seed);
    Ok(match &cfg.out {
        Some(p) => Output {
            files: vec![
                (p.clone(), trajectory_csv(cfg, &r.record, cfg.seed)),
                (sibling(p, "summary"), summary),
            ],
            stdout: String::new(),
        },
        None => Output {
            files: Vec::new(),
            stdout: summary,
        },
    })
}
