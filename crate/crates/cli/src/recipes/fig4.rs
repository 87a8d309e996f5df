//! Pulsed emission resolved by narrow and broad etalon filters.

use rayon::prelude::*;

use qdsaw_core::pulses::{square_pulse, PulseEnvelope};
use qdsaw_core::spectroscopy::{linear_axis, log_decay_rate, FilterSpec, GridDynamics};
use qdsaw_core::units::{ghz, mhz, ns, ps, to_ns};
use qdsaw_core::{DensityState, SolverConfig, SystemParams, TimeGrid};

use super::{g_label, spectrum_table, with_g, Recipe, RecipeOutput};
use crate::error::CliResult;
use crate::output::{Check, Table};

pub(crate) const DURATIONS_PS: [f64; 2] = [370.0, 500.0];
const RABI_GHZ: f64 = 1.8;
/// Broad filter for the time traces, Hz.
pub(crate) const BROAD_FILTER: f64 = 1e9;
/// Narrow filter for the integrated spectra, Hz.
const NARROW_FILTER: f64 = 25e6;

pub(crate) fn params(g_ghz: f64) -> SystemParams {
    with_g(
        &SystemParams {
            gamma_qd: mhz(320.0),
            gamma_z: mhz(60.0),
            ..SystemParams::default()
        },
        g_ghz,
    )
}

pub(crate) fn grid() -> TimeGrid {
    TimeGrid::new(ns(-0.05), ps(1.0), 3051).expect("static grid")
}

pub(crate) fn pulse(duration_ps: f64) -> CliResult<PulseEnvelope> {
    Ok(square_pulse(
        &grid(),
        0.0,
        ps(duration_ps),
        ps(15.0),
        ps(15.0),
        ghz(RABI_GHZ),
    )?)
}

pub(crate) fn dynamics(duration_ps: f64, g_ghz: f64) -> CliResult<GridDynamics> {
    let env = pulse(duration_ps)?;
    Ok(GridDynamics::prepare(
        &params(g_ghz),
        &env,
        &SolverConfig::default(),
        &grid(),
        &DensityState::ground(),
    )?)
}

/// Fixed fit windows after the drive ends, ns: the pump channel right after
/// the turn-off, the emitter channel once the filter transient is gone.
pub(crate) const PUMP_WINDOW_NS: (f64, f64) = (0.05, 0.5);
pub(crate) const QD_WINDOW_NS: (f64, f64) = (1.0, 2.5);

/// Post-pulse decay rates of the QD- and pump-frequency channels.
pub(crate) fn channel_rates(d: &GridDynamics, drive_end: f64) -> CliResult<(f64, f64, Vec<f64>, Vec<f64>)> {
    let qd = d.filtered_signal(&FilterSpec::new(0.0, BROAD_FILTER)?)?;
    let pump = d.filtered_signal(&FilterSpec::new(d.delta_pump, BROAD_FILTER)?)?;
    let r_qd = log_decay_rate(
        &d.grid,
        &qd.intensity,
        drive_end + ns(QD_WINDOW_NS.0),
        drive_end + ns(QD_WINDOW_NS.1),
    )?;
    let r_pump = log_decay_rate(
        &d.grid,
        &pump.intensity,
        drive_end + ns(PUMP_WINDOW_NS.0),
        drive_end + ns(PUMP_WINDOW_NS.1),
    )?;
    Ok((r_qd, r_pump, qd.intensity, pump.intensity))
}

pub struct Fig4Sim;

impl Recipe for Fig4Sim {
    fn id(&self) -> &'static str {
        "fig4_sim"
    }
    fn description(&self) -> &'static str {
        "filtered spectra and filtered time traces after two square pulses"
    }
    fn run(&self) -> CliResult<RecipeOutput> {
        let cases: Vec<(f64, f64)> = DURATIONS_PS.iter().flat_map(|d| [0.0, 1.0].map(|g| (*d, g))).collect();
        let axis = linear_axis(ghz(-6.0), ghz(6.0), 241);
        let results: Vec<_> = cases
            .par_iter()
            .map(|&(dur, g)| -> CliResult<_> {
                let d = dynamics(dur, g)?;
                let end = pulse(dur)?.meta.drive_end();
                let spec = d.integrated_filtered_spectrum(NARROW_FILTER, &axis)?;
                let rates = channel_rates(&d, end)?;
                Ok((d.occupancy(), spec, rates))
            })
            .collect::<CliResult<_>>()?;
        let mut out = RecipeOutput::default();
        let times: Vec<f64> = grid().times().into_iter().map(to_ns).collect();
        for ((dur, g), (occ, spec, (r_qd, r_pump, qd, pump))) in cases.iter().zip(results) {
            let tag = format!("{dur}ps_{}", g_label(*g));
            out.artifacts
                .push(spectrum_table(&spec).to_csv(format!("fig4c_spectrum_{tag}.csv"))?);
            out.artifacts.push(
                Table::new()
                    .column("time_ns", times.clone())
                    .column("occupancy", occ)
                    .column("qd_channel", qd)
                    .column("pump_channel", pump)
                    .to_csv(format!("fig4d_traces_{tag}.csv"))?,
            );
            if *dur == 500.0 && *g == 1.0 {
                let gamma = params(0.0).gamma_qd;
                let pi_df = std::f64::consts::PI * BROAD_FILTER;
                out.checks.push(Check::new(
                    "qd_channel_rate_over_gamma",
                    r_qd / gamma,
                    "1 within 15%",
                    (r_qd / gamma - 1.0).abs() <= 0.15,
                ));
                out.checks.push(Check::new(
                    "pump_channel_rate_over_pi_df",
                    r_pump / pi_df,
                    "1 within 15%",
                    (r_pump / pi_df - 1.0).abs() <= 0.15,
                ));
            }
        }
        Ok(out)
    }
}
