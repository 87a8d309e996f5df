//! One test per acceptance criterion. Each prints a single PASS/FAIL line to
//! stderr (written directly, so the harness does not capture it) and then
//! asserts.

use std::io::Write;
use std::time::{Duration, Instant};

use qdsaw_cli::commands;
use qdsaw_cli::config::RunConfig;
use qdsaw_cli::output::Check;
use qdsaw_cli::recipes::{recipes, RecipeOutput};
use qdsaw_core::calibration::fit_modulation_index;
use qdsaw_core::experiments::phase_averaged_trajectory;
use qdsaw_core::pulses::{square_pulse, EtalonShape, PulseEnvelope, PulseShape, SquareShape};
use qdsaw_core::solver::propagate;
use qdsaw_core::spectroscopy::{cw_scattering_spectrum, CwSpectrumOptions};
use qdsaw_core::units::{dbm_to_watts, ghz, mhz, ns, ps, to_ps};
use qdsaw_core::{DensityState, SolverConfig, SystemParams, TimeGrid};

fn report(id: u32, title: &str, pass: bool, detail: impl AsRef<str>) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    writeln!(err, "acceptance {id:02} {verdict} {title}: {}", detail.as_ref()).unwrap();
}

fn run_recipe(id: &str) -> RecipeOutput {
    recipes().get(id).unwrap().run().unwrap()
}

fn describe(checks: &[&Check]) -> String {
    checks
        .iter()
        .map(|c| format!("{} = {:.6} (target {})", c.name, c.value, c.target))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Constant drive switched on exactly at t = 0 (one sample earlier).
fn constant_drive(rabi: f64, t_end: f64) -> PulseEnvelope {
    let n = (t_end / ps(1.0)).round() as usize + 3;
    let grid = TimeGrid::new(ps(-1.0), ps(1.0), n).unwrap();
    square_pulse(&grid, 0.0, t_end, 0.0, 0.0, rabi).unwrap()
}

#[test]
fn acceptance_01_resonant_rabi_oracle() {
    let started = Instant::now();
    let p = SystemParams {
        delta: 0.0,
        ..SystemParams::default()
    };
    let rabi = ghz(1.0);
    let env = constant_drive(rabi, ns(3.0));
    let tr = propagate(&p, &env, &SolverConfig::default(), &DensityState::ground()).unwrap();
    let err = tr
        .times()
        .iter()
        .zip(&tr.occupancy)
        .filter(|(t, _)| **t >= 0.0 && **t <= ns(3.0))
        .map(|(t, n)| (n - (0.5 * rabi * t).sin().powi(2)).abs())
        .fold(0.0, f64::max);
    let elapsed = started.elapsed();
    let pass = err < 1e-6 && elapsed < Duration::from_secs(1);
    report(
        1,
        "resonant Rabi oracle",
        pass,
        format!(
            "max error {err:.3e} (< 1e-6), runtime {:.3} s (< 1 s)",
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_02_generalized_rabi_oracle() {
    let p = SystemParams {
        delta: ghz(-3.5),
        omega_saw: ghz(3.5),
        ..SystemParams::default()
    };
    let env = constant_drive(ghz(1.0), ns(3.0));
    let tr = propagate(&p, &env, &SolverConfig::default(), &DensityState::ground()).unwrap();
    let peak = tr.occupancy.iter().cloned().fold(0.0, f64::max);
    // refined minima; the period is the mean spacing
    let times = tr.times();
    let y = &tr.occupancy;
    let mut minima = Vec::new();
    for k in 1..y.len() - 1 {
        if times[k] > ps(10.0) && y[k] < y[k - 1] && y[k] <= y[k + 1] {
            let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
            minima.push(times[k] + 0.5 * (y[k - 1] - y[k + 1]) / denom * tr.grid.dt);
        }
    }
    let period = (minima[minima.len() - 1] - minima[0]) / (minima.len() - 1) as f64;
    let pass = (peak - 0.07547).abs() <= 1e-4 && (to_ps(period) - 274.7).abs() <= 0.5;
    report(
        2,
        "generalized Rabi oracle",
        pass,
        format!(
            "peak {peak:.5} (0.07547 ± 1e-4), period {:.2} ps (274.7 ± 0.5)",
            to_ps(period)
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_03_free_decay() {
    let p = SystemParams {
        gamma_qd: mhz(320.0),
        ..SystemParams::default()
    };
    let env = PulseEnvelope::zero(TimeGrid::new(0.0, ps(1.0), 1001).unwrap());
    let tr = propagate(&p, &env, &SolverConfig::default(), &DensityState::excited()).unwrap();
    let n = *tr.occupancy.last().unwrap();
    let pass = (n - 0.1340).abs() <= 1e-4;
    report(
        3,
        "free decay",
        pass,
        format!("occupancy(1 ns) = {n:.6} (0.1340 ± 1e-4)"),
    );
    assert!(pass);
}

#[test]
fn acceptance_04_trace_and_positivity() {
    let base = SystemParams {
        gamma_qd: mhz(320.0),
        gamma_z: mhz(60.0),
        ..SystemParams::default()
    };
    let grid = TimeGrid::default_window();
    let square = SquareShape {
        start: 0.0,
        duration: ns(2.0),
        rise: ps(30.0),
        fall: ps(30.0),
        peak: ghz(1.4),
    };
    let etalon = EtalonShape {
        drive: SquareShape {
            start: ps(20.0),
            duration: ps(130.0),
            rise: ps(15.0),
            fall: ps(15.0),
            peak: ghz(1.0),
        },
        bandwidth: 6e8,
    };
    let shapes: [&dyn PulseShape; 2] = [&square, &etalon];
    let (mut trace_err, mut min_eig) = (0.0f64, f64::INFINITY);
    let mut runs = 0;
    for shape in shapes {
        let env = shape.build(&grid).unwrap();
        for g in [0.0, 0.49, 0.87, 1.23, 1.55] {
            for k in 0..8 {
                let p = SystemParams {
                    g: ghz(g),
                    phi: std::f64::consts::TAU * k as f64 / 8.0,
                    ..base
                };
                let tr = propagate(&p, &env, &SolverConfig::default(), &DensityState::ground()).unwrap();
                trace_err = trace_err.max(tr.max_trace_error());
                min_eig = min_eig.min(tr.min_eigenvalue());
                runs += 1;
            }
            let avg = phase_averaged_trajectory(&SystemParams { g: ghz(g), ..base }, &env, &SolverConfig::default(), 8)
                .unwrap();
            trace_err = trace_err.max(avg.max_trace_error());
            min_eig = min_eig.min(avg.min_eigenvalue());
        }
    }
    let pass = trace_err < 1e-9 && min_eig > -1e-8;
    report(
        4,
        "trace and positivity",
        pass,
        format!("{runs} runs, max |Tr ρ − 1| = {trace_err:.2e} (< 1e-9), min eigenvalue {min_eig:.2e} (> −1e-8)"),
    );
    assert!(pass);
}

fn recipe_criterion(id: u32, title: &str, recipe: &str, names: &[&str]) {
    let out = run_recipe(recipe);
    let checks: Vec<&Check> = names.iter().map(|n| out.check(n).unwrap()).collect();
    let pass = checks.iter().all(|c| c.pass);
    report(id, title, pass, describe(&checks));
    assert!(pass);
}

#[test]
fn acceptance_05_ladder_channels() {
    recipe_criterion(
        5,
        "ladder channels",
        "fig1c",
        &["direct_minima_offset_ps", "sideband_sin2_error"],
    );
}

#[test]
fn acceptance_06_enhancement_peak_without_dephasing() {
    recipe_criterion(
        6,
        "enhancement peak without pure dephasing",
        "figS6",
        &["peak_enhancement", "peak_time_ns"],
    );
}

#[test]
fn acceptance_07_square_pulse_running_mean() {
    recipe_criterion(7, "square-pulse running mean", "fig3d", &["bare_running_mean"]);
}

#[test]
fn acceptance_08_phase_average() {
    recipe_criterion(
        8,
        "phase average",
        "figS1",
        &["peak_time_shift_ps", "phase_8_vs_16_relative"],
    );
}

#[test]
fn acceptance_09_cw_sideband_oracle() {
    recipe_criterion(
        9,
        "continuous-drive sideband oracle",
        "fig2d_sim",
        &["first_sideband_ratio", "sideband_position_offset_GHz"],
    );
}

#[test]
fn acceptance_10_filtered_decay_rates() {
    let started = Instant::now();
    let out = run_recipe("fig4_sim");
    let elapsed = started.elapsed();
    let checks: Vec<&Check> = ["qd_channel_rate_over_gamma", "pump_channel_rate_over_pi_df"]
        .iter()
        .map(|n| out.check(n).unwrap())
        .collect();
    let pass = checks.iter().all(|c| c.pass) && elapsed < Duration::from_secs(20 * 60);
    report(
        10,
        "filtered decay rates",
        pass,
        format!(
            "{}; runtime {:.1} s (< 1200 s)",
            describe(&checks),
            elapsed.as_secs_f64()
        ),
    );
    assert!(pass);
}

const CAL_BASE: &str = r#"
schema_version = 1
[system]
delta_ghz = 0.0
gamma_qd_ghz = 0.32
[pulse]
shape = "square"
peak_rabi_ghz = 1.0
start_ns = 0.0
duration_ns = 0.13
[grid]
t0_ns = -0.005
t_end_ns = 0.155
dt_ns = 0.001
"#;

fn fit_value(outcome: &commands::Outcome, name: &str) -> f64 {
    let fit = outcome.artifacts.iter().find(|a| a.name == "fit.json").unwrap();
    let v: serde_json::Value = serde_json::from_slice(&fit.bytes).unwrap();
    v["parameters"]
        .as_array()
        .unwrap()
        .iter()
        .find(|p| p["name"] == name)
        .unwrap()["value"]
        .as_f64()
        .unwrap()
}

#[test]
fn acceptance_11_calibration_round_trips() {
    // modulation index through a simulated spectrum, resonant weak drive
    let p = SystemParams {
        delta: 0.0,
        g: ghz(1.0),
        gamma_qd: mhz(320.0),
        ..SystemParams::default()
    };
    let spec = cw_scattering_spectrum(&p, mhz(30.0), &SolverConfig::default(), &CwSpectrumOptions::default()).unwrap();
    let chi_true = p.modulation_index();
    let chi_lines = fit_modulation_index(&spec, p.omega_saw)
        .unwrap()
        .parameter("chi")
        .unwrap()
        .value;
    let mut binned = spec.clone();
    binned.coherent_lines.clear();
    let chi_binned = fit_modulation_index(&binned, p.omega_saw)
        .unwrap()
        .parameter("chi")
        .unwrap()
        .value;
    let e_chi = (chi_lines / chi_true - 1.0)
        .abs()
        .max((chi_binned / chi_true - 1.0).abs());

    // square-root law under 5% noise, fixed seed
    let a_true = 1.55 / dbm_to_watts(-35.0).sqrt();
    let cfg = RunConfig::parse(&format!(
        "{CAL_BASE}[calibration]\nmodel = \"sqrt_power\"\n[calibration.synthetic]\npoints = 16\nnoise = 0.05\ntruth = {a_true}\n"
    ))
    .unwrap();
    let a_fit = fit_value(&commands::calibrate(&cfg, 7).unwrap(), "a");
    let e_a = (a_fit / a_true - 1.0).abs();

    // counts scale, noiseless
    let cfg = RunConfig::parse(&format!(
        "{CAL_BASE}[calibration]\nmodel = \"occupancy_scale\"\nreadout_ns = 0.14\nbin_ns = 0.01\nreference_power_w = 1e-6\nreference_rabi_ghz = 3.846\n[calibration.synthetic]\npoints = 12\nnoise = 0.0\ntruth = 2.5e4\nmin_dbm = -45\nmax_dbm = -25\n"
    ))
    .unwrap();
    let eta = fit_value(&commands::calibrate(&cfg, 7).unwrap(), "eta");
    let e_eta = (eta / 2.5e4 - 1.0).abs();

    let pass = e_chi < 0.05 && e_a < 0.05 && e_eta < 1e-3;
    report(
        11,
        "calibration round trips",
        pass,
        format!(
            "chi error {e_chi:.2e} (< 5%, lines {chi_lines:.5}, binned {chi_binned:.5}, true {chi_true:.5}); \
             sqrt-law error {e_a:.2e} (< 5%); counts-scale error {e_eta:.2e} (< 0.1%)"
        ),
    );
    assert!(pass);
}

#[test]
fn acceptance_12_determinism() {
    let reg = recipes();
    let mut differing = Vec::new();
    for id in reg.names() {
        let r = reg.get(id).unwrap();
        let a = r.run().unwrap().artifacts;
        let b = r.run().unwrap().artifacts;
        if a != b {
            differing.push(id);
        }
    }
    let pass = differing.is_empty();
    report(
        12,
        "determinism",
        pass,
        format!(
            "{} recipes run twice, byte-identical except: [{}]",
            reg.names().len(),
            differing.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn every_recipe_within_five_minutes() {
    for id in recipes().names() {
        let started = Instant::now();
        run_recipe(id);
        assert!(started.elapsed() < Duration::from_secs(300), "{id}");
    }
}
