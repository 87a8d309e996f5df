//! The six subcommands. Each returns its files in memory; the binary writes
//! them through [`crate::output::write_outputs`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use qdsaw_core::calibration::{occupancy_at_readout, parse_calibration_table, CalibrationFit, CalibrationPoint};
use qdsaw_core::experiments::{optimize_pulse_duration, phase_averaged_trajectory, Objective};
use qdsaw_core::pulses::{PowerCalibration, PulseEnvelope};
use qdsaw_core::solver::propagate;
use qdsaw_core::spectroscopy::{
    cw_scattering_spectrum, excitation_spectrum, linear_axis, CwSpectrumOptions, FilterSpec, GridDynamics,
};
use qdsaw_core::units::{dbm_to_watts, ghz, ns, to_ghz, to_ns};
use qdsaw_core::{DensityState, SystemParams, Trajectory};

use crate::config::{InitialState, RunConfig, SpectrumKind};
use crate::error::{CliError, CliResult};
use crate::output::{Artifact, Check, Table};
use crate::recipes::{recipes, spectrum_table, trajectory_table};
use crate::registry::{calibration_models, pulse_shapes, square_from};

/// What a command produced, before anything touches the disk.
#[derive(Debug)]
pub struct Outcome {
    pub config_hash: String,
    pub artifacts: Vec<Artifact>,
    pub checks: Vec<Check>,
}

fn envelope(cfg: &RunConfig) -> CliResult<PulseEnvelope> {
    let shape = pulse_shapes().get(&cfg.pulse.shape)?.build(&cfg.pulse)?;
    Ok(shape.build(&cfg.grid.to_grid()?)?)
}

fn initial(cfg: &RunConfig) -> DensityState {
    match cfg.experiment.initial {
        InitialState::Ground => DensityState::ground(),
        InitialState::Excited => DensityState::excited(),
    }
}

fn trajectory(cfg: &RunConfig) -> CliResult<Trajectory> {
    let p = cfg.system.to_params()?;
    let env = envelope(cfg)?;
    let solver = cfg.solver.to_solver()?;
    if cfg.experiment.n_phases > 1 {
        if cfg.experiment.initial != InitialState::Ground {
            return Err(CliError::Config(
                "at `experiment.initial`: phase averaging starts from the ground state".into(),
            ));
        }
        Ok(phase_averaged_trajectory(&p, &env, &solver, cfg.experiment.n_phases)?)
    } else {
        Ok(propagate(&p, &env, &solver, &initial(cfg))?)
    }
}

pub fn simulate(cfg: &RunConfig) -> CliResult<Outcome> {
    let tr = trajectory(cfg)?;
    Ok(Outcome {
        config_hash: cfg.hash(),
        artifacts: vec![trajectory_table(&tr).to_csv("trajectory.csv")?],
        checks: Vec::new(),
    })
}

/// One trajectory per axis value, a summary table and a time × value matrix.
pub fn sweep(cfg: &RunConfig) -> CliResult<Outcome> {
    let sw = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `[sweep]` table".into()))?;
    if sw.values.is_empty() {
        return Err(CliError::Config("at `sweep.values`: needs at least one value".into()));
    }
    let configs: Vec<RunConfig> = sw
        .values
        .iter()
        .map(|v| cfg.with_field(&sw.axis, *v))
        .collect::<CliResult<_>>()?;
    let runs: Vec<Trajectory> = configs.par_iter().map(trajectory).collect::<CliResult<_>>()?;
    let mut artifacts = Vec::new();
    for (i, tr) in runs.iter().enumerate() {
        artifacts.push(trajectory_table(tr).to_csv(format!("sweep_{i:03}.csv"))?);
    }
    let peak: Vec<f64> = runs
        .iter()
        .map(|r| r.occupancy.iter().cloned().fold(0.0, f64::max))
        .collect();
    let last: Vec<f64> = runs.iter().map(|r| *r.occupancy.last().unwrap()).collect();
    artifacts.push(
        Table::new()
            .column(sw.axis.clone(), sw.values.clone())
            .column("peak_occupancy", peak)
            .column("final_occupancy", last)
            .to_csv("sweep_summary.csv")?,
    );
    if runs.iter().all(|r| r.grid == runs[0].grid) {
        let mut m = Table::new().column("time_ns", runs[0].times().into_iter().map(to_ns).collect());
        for (i, r) in runs.iter().enumerate() {
            m = m.column(format!("v{i:03}"), r.occupancy.clone());
        }
        artifacts.push(m.to_csv("sweep_matrix.csv")?);
    }
    Ok(Outcome {
        config_hash: cfg.hash(),
        artifacts,
        checks: Vec::new(),
    })
}

pub fn spectrum(cfg: &RunConfig) -> CliResult<Outcome> {
    let sc = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `[spectrum]` table".into()))?;
    if sc.points < 2 || !(sc.detuning_max_ghz > sc.detuning_min_ghz) {
        return Err(CliError::Config(
            "at `spectrum.points`: need at least two points on an increasing axis".into(),
        ));
    }
    let p = cfg.system.to_params()?;
    let solver = cfg.solver.to_solver()?;
    let axis = linear_axis(ghz(sc.detuning_min_ghz), ghz(sc.detuning_max_ghz), sc.points);
    let rabi = ghz(cfg.pulse.peak_rabi_ghz);
    let need_bw = || {
        sc.filter_bandwidth_ghz
            .map(|b| b * 1e9)
            .ok_or_else(|| CliError::Config("at `spectrum.filter_bandwidth_ghz`: required for this kind".into()))
    };
    let artifact = match sc.kind {
        SpectrumKind::CwScattering => {
            // centred on the pump; the configured range sets span and spacing
            let span = ghz(sc.detuning_max_ghz - sc.detuning_min_ghz);
            let opts = CwSpectrumOptions {
                window: ns(sc.window_ns),
                n_period_samples: sc.n_period_samples,
                half_span: 0.5 * span,
                bin: span / (sc.points - 1) as f64,
                ..CwSpectrumOptions::default()
            };
            spectrum_table(&cw_scattering_spectrum(&p, rabi, &solver, &opts)?).to_csv("spectrum.csv")?
        }
        SpectrumKind::Excitation => {
            spectrum_table(&excitation_spectrum(&p, rabi, &solver, &axis, sc.n_period_samples)?)
                .to_csv("spectrum.csv")?
        }
        SpectrumKind::IntegratedFiltered => {
            let d = dynamics(cfg, &p)?;
            spectrum_table(&d.integrated_filtered_spectrum(need_bw()?, &axis)?).to_csv("spectrum.csv")?
        }
        SpectrumKind::FilteredTime => {
            let center = sc
                .filter_center_ghz
                .ok_or_else(|| CliError::Config("at `spectrum.filter_center_ghz`: required for this kind".into()))?;
            let d = dynamics(cfg, &p)?;
            let s = d.filtered_signal(&FilterSpec::new(ghz(center), need_bw()?)?)?;
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            Table::new()
                .column("time_ns", s.grid.times().into_iter().map(to_ns).collect())
                .column("intensity", s.intensity)
                .to_csv("filtered_signal.csv")?
        }
    };
    Ok(Outcome {
        config_hash: cfg.hash(),
        artifacts: vec![artifact],
        checks: Vec::new(),
    })
}

fn dynamics(cfg: &RunConfig, p: &SystemParams) -> CliResult<GridDynamics> {
    let env = envelope(cfg)?;
    Ok(GridDynamics::prepare(
        p,
        &env,
        &cfg.solver.to_solver()?,
        &env.grid,
        &initial(cfg),
    )?)
}

/// File units per model: `sqrt_power` rows are (dBm, g GHz[, σ GHz]),
/// `bessel_index` rows are (detuning GHz, intensity), `occupancy_scale` rows
/// are (power W, counts).
fn to_library_units(model: &str, rows: Vec<CalibrationPoint>) -> Vec<CalibrationPoint> {
    rows.into_iter()
        .map(|r| match model {
            "sqrt_power" => CalibrationPoint {
                x: r.x,
                value: ghz(r.value),
                sigma: r.sigma.map(ghz),
            },
            "bessel_index" => CalibrationPoint { x: ghz(r.x), ..r },
            _ => r,
        })
        .collect()
}

/// Noisy table from the model itself, in file units.
fn synthetic_rows(cfg: &RunConfig, model: &str, seed: u64) -> CliResult<Vec<CalibrationPoint>> {
    let cal = cfg.calibration.as_ref().expect("checked by caller");
    let syn = cal.synthetic.as_ref().expect("checked by caller");
    if syn.points < 2 || !(syn.noise >= 0.0) || !(syn.max_dbm > syn.min_dbm) {
        return Err(CliError::Config(
            "at `calibration.synthetic`: need ≥ 2 points, noise ≥ 0 and min_dbm < max_dbm".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, syn.noise).map_err(|e| CliError::Config(e.to_string()))?;
    let mut noisy = |v: f64| v * (1.0 + normal.sample(&mut rng));
    let dbms = linear_axis(syn.min_dbm, syn.max_dbm, syn.points);
    let rows = match model {
        "sqrt_power" => dbms
            .iter()
            .map(|d| CalibrationPoint {
                x: *d,
                value: noisy(syn.truth * dbm_to_watts(*d).sqrt()),
                sigma: None,
            })
            .collect(),
        "bessel_index" => {
            let p = SystemParams {
                g: ghz(syn.truth),
                ..cfg.system.to_params()?
            };
            let s = cw_scattering_spectrum(
                &p,
                ghz(cfg.pulse.peak_rabi_ghz),
                &cfg.solver.to_solver()?,
                &CwSpectrumOptions::default(),
            )?;
            s.detuning_axis
                .iter()
                .zip(&s.intensity)
                .map(|(x, v)| CalibrationPoint {
                    x: to_ghz(*x),
                    value: noisy(*v),
                    sigma: None,
                })
                .collect()
        }
        "occupancy_scale" => {
            let cal_ref = PowerCalibration::from_reference(
                cal.reference_power_w
                    .ok_or_else(|| CliError::Config("at `calibration.reference_power_w`: required".into()))?,
                ghz(cal
                    .reference_rabi_ghz
                    .ok_or_else(|| CliError::Config("at `calibration.reference_rabi_ghz`: required".into()))?),
            )?;
            let watts: Vec<f64> = dbms.iter().map(|d| dbm_to_watts(*d)).collect();
            let readout = qdsaw_core::calibration::OccupancyReadout {
                pulse: square_from(&cfg.pulse)?,
                readout: ns(cal.readout_ns),
                bin: ns(cal.bin_ns),
            };
            let occ = occupancy_at_readout(
                &cfg.system.to_params()?,
                &watts,
                &cal_ref,
                &readout,
                &cfg.grid.to_grid()?,
                &cfg.solver.to_solver()?,
            )?;
            watts
                .iter()
                .zip(occ)
                .map(|(w, n)| CalibrationPoint {
                    x: *w,
                    value: noisy(syn.truth * n),
                    sigma: None,
                })
                .collect()
        }
        other => return Err(CliError::Config(format!("no synthetic data generator for `{other}`"))),
    };
    Ok(rows)
}

/// Fitted parameters in file units.
fn report(model: &str, fit: &CalibrationFit) -> serde_json::Value {
    let params: Vec<serde_json::Value> = fit
        .parameters
        .iter()
        .map(|p| {
            let (unit, scale) = match (model, p.name.as_str()) {
                ("sqrt_power", "a") => ("GHz/sqrt(W)", to_ghz(1.0)),
                ("bessel_index", "g") => ("GHz", to_ghz(1.0)),
                _ => ("1", 1.0),
            };
            serde_json::json!({
                "name": p.name,
                "value": p.value * scale,
                "error": p.error * scale,
                "unit": unit,
            })
        })
        .collect();
    serde_json::json!({
        "model": model,
        "parameters": params,
        "residual_norm": fit.residual_norm * if model == "sqrt_power" { to_ghz(1.0) } else { 1.0 },
        "derived": fit.derived,
    })
}

pub fn calibrate(cfg: &RunConfig, seed: u64) -> CliResult<Outcome> {
    let cal = cfg
        .calibration
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `[calibration]` table".into()))?;
    let model = cal.model.as_str();
    let calibrator = calibration_models().get(model)?.build(cfg)?;
    let mut artifacts = Vec::new();
    let rows = match (&cal.data, &cal.synthetic) {
        (Some(path), None) => parse_calibration_table(&std::fs::read_to_string(path)?)?,
        (None, Some(_)) => {
            let rows = synthetic_rows(cfg, model, seed)?;
            artifacts.push(
                Table::new()
                    .column("x", rows.iter().map(|r| r.x).collect())
                    .column("value", rows.iter().map(|r| r.value).collect())
                    .to_csv("calibration_data.csv")?,
            );
            rows
        }
        _ => {
            return Err(CliError::Config(
                "at `calibration`: give exactly one of `data` or `synthetic`".into(),
            ))
        }
    };
    let fit = calibrator.fit_table(&to_library_units(model, rows))?;
    artifacts.push(Artifact::json("fit.json", &report(model, &fit)));
    Ok(Outcome {
        config_hash: cfg.hash(),
        artifacts,
        checks: Vec::new(),
    })
}

pub fn optimize(cfg: &RunConfig) -> CliResult<Outcome> {
    let oc = cfg
        .optimize
        .as_ref()
        .ok_or_else(|| CliError::Config("missing `[optimize]` table".into()))?;
    let family = pulse_shapes()
        .get(&cfg.pulse.shape)?
        .family(&cfg.pulse)?
        .ok_or_else(|| CliError::Config(format!("at `pulse.shape`: `{}` has no free duration", cfg.pulse.shape)))?;
    let readout_delay = ns(oc.readout_delay_ns);
    let objective = match oc.objective.as_str() {
        "min_bare_occupancy" => Objective::MinBareOccupancy { readout_delay },
        "max_enhancement" => Objective::MaxEnhancement {
            readout_delay,
            floor: oc.floor,
        },
        other => {
            return Err(CliError::Config(format!(
                "at `optimize.objective`: unknown objective `{other}`; available: max_enhancement, min_bare_occupancy"
            )))
        }
    };
    let optima = optimize_pulse_duration(
        &cfg.system.to_params()?,
        family.as_ref(),
        &cfg.grid.to_grid()?,
        &cfg.solver.to_solver()?,
        objective,
        (ns(oc.search_min_ns), ns(oc.search_max_ns)),
        oc.n_phases,
    )?;
    Ok(Outcome {
        config_hash: cfg.hash(),
        artifacts: vec![Table::new()
            .column("duration_ns", optima.iter().map(|o| to_ns(o.duration)).collect())
            .column("value", optima.iter().map(|o| o.value).collect())
            .to_csv("optima.csv")?],
        checks: Vec::new(),
    })
}

pub fn reproduce(figure: &str) -> CliResult<Outcome> {
    let recipe = recipes().get(figure)?;
    let out = recipe.run()?;
    let id = format!("reproduce {} {}", recipe.id(), env!("CARGO_PKG_VERSION"));
    Ok(Outcome {
        config_hash: hex::encode(Sha256::digest(id.as_bytes())),
        artifacts: out.artifacts,
        checks: out.checks,
    })
}
