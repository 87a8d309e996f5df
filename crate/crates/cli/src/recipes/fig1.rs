//! Idealized dynamics: ladder channels and Bloch trajectories, undamped.

use qdsaw_core::experiments::ladder_occupancies;
use qdsaw_core::model::generalized_rabi;
use qdsaw_core::pulses::{square_pulse, PulseEnvelope};
use qdsaw_core::solver::propagate;
use qdsaw_core::units::{ghz, ns, ps, to_ps};
use qdsaw_core::{DensityState, SolverConfig, SystemParams, TimeGrid};

use super::{g_label, trajectory_table, with_g, Recipe, RecipeOutput};
use crate::error::CliResult;
use crate::output::{Check, Table};

const RABI_GHZ: f64 = 1.0;

fn params() -> SystemParams {
    SystemParams {
        delta: ghz(-3.5),
        omega_saw: ghz(3.5),
        ..SystemParams::default()
    }
}

/// Drive on from t = 0 for 1.7 ns; one sample before 0 so the step is exact
/// and one after the end to absorb rounding.
fn drive() -> CliResult<PulseEnvelope> {
    let grid = TimeGrid::new(ps(-1.0), ps(1.0), 1703)?;
    Ok(square_pulse(&grid, 0.0, ns(1.7), 0.0, 0.0, ghz(RABI_GHZ))?)
}

/// Times of local minima, refined by a parabola through the three samples.
pub(crate) fn local_minima(times: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 1..y.len().saturating_sub(1) {
        if y[k] < y[k - 1] && y[k] <= y[k + 1] {
            let denom = y[k - 1] - 2.0 * y[k] + y[k + 1];
            let shift = if denom > 0.0 {
                0.5 * (y[k - 1] - y[k + 1]) / denom
            } else {
                0.0
            };
            out.push(times[k] + shift * (times[k + 1] - times[k]));
        }
    }
    out
}

pub struct Fig1c;

impl Recipe for Fig1c {
    fn id(&self) -> &'static str {
        "fig1c"
    }
    fn description(&self) -> &'static str {
        "direct and phonon-assisted ladder channels, red-detuned drive"
    }
    fn run(&self) -> CliResult<RecipeOutput> {
        let p = params().with_phonons(ghz(1.0) / 1e3, 1e6);
        let env = drive()?;
        let (direct, side) = ladder_occupancies(&p, &env, &SolverConfig::default())?;
        let times = direct.times();

        let period = std::f64::consts::TAU / generalized_rabi(ghz(RABI_GHZ), p.delta);
        let minima: Vec<f64> = local_minima(&times, &direct.occupancy)
            .into_iter()
            .filter(|t| *t > 0.5 * period)
            .collect();
        let min_err = minima
            .iter()
            .map(|t| (t - (t / period).round() * period).abs())
            .fold(0.0, f64::max);

        let gamma = p.g0.unwrap() * ghz(RABI_GHZ) * p.n_phonons.unwrap().sqrt() / p.omega_saw;
        let oracle: Vec<f64> = times.iter().map(|t| (0.5 * gamma * t.max(0.0)).sin().powi(2)).collect();
        // strictly inside the drive window; the edge samples are half-cells
        let side_err = times
            .iter()
            .zip(side.occupancy.iter().zip(&oracle))
            .filter(|(t, _)| **t > 0.5 * side.grid.dt && **t < env.meta.drive_end() - 0.5 * side.grid.dt)
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max);

        let curves = Table::new()
            .column("time_ns", times.iter().map(|t| t * 1e9).collect())
            .column("direct", direct.occupancy.clone())
            .column("sideband", side.occupancy.clone())
            .column("sideband_oracle", oracle);
        let mins = Table::new()
            .column("index", (1..=minima.len()).map(|k| k as f64).collect())
            .column("time_ps", minima.iter().map(|t| to_ps(*t)).collect());
        Ok(RecipeOutput {
            artifacts: vec![
                curves.to_csv("fig1c_channels.csv")?,
                mins.to_csv("fig1c_direct_minima.csv")?,
            ],
            checks: vec![
                Check::new("direct_minima_count", minima.len() as f64, "≥ 5", minima.len() >= 5),
                Check::new(
                    "direct_minima_offset_ps",
                    to_ps(min_err),
                    format!("< 2 from k·{:.1} ps", to_ps(period)),
                    minima.len() >= 5 && min_err < ps(2.0),
                ),
                Check::new("sideband_sin2_error", side_err, "< 1e-6", side_err < 1e-6),
            ],
        })
    }
}

pub struct Fig1d;

impl Recipe for Fig1d {
    fn id(&self) -> &'static str {
        "fig1d"
    }
    fn description(&self) -> &'static str {
        "Bloch-sphere trajectories of the bare emitter with and without modulation"
    }
    fn run(&self) -> CliResult<RecipeOutput> {
        let env = drive()?;
        let mut out = RecipeOutput::default();
        for g in [0.0, 2.0] {
            let tr = propagate(
                &with_g(&params(), g),
                &env,
                &SolverConfig::default(),
                &DensityState::ground(),
            )?;
            out.artifacts
                .push(trajectory_table(&tr).to_csv(format!("fig1d_bloch_{}.csv", g_label(g)))?);
            if g == 0.0 {
                // closed small circles: occupancy bounded by Ω₀²/Ω²
                let bound = ghz(RABI_GHZ).powi(2) / generalized_rabi(ghz(RABI_GHZ), ghz(-3.5)).powi(2);
                let max = tr.occupancy.iter().cloned().fold(0.0, f64::max);
                out.checks.push(Check::new(
                    "bare_peak_occupancy",
                    max,
                    format!("{bound:.5} ± 1e-4"),
                    (max - bound).abs() < 1e-4,
                ));
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minima_refined_between_samples() {
        let ts: Vec<f64> = (0..100).map(|k| k as f64 * 0.1).collect();
        let ys: Vec<f64> = ts.iter().map(|t| (t - 3.333).powi(2)).collect();
        let m = local_minima(&ts, &ys);
        assert_eq!(m.len(), 1);
        assert!((m[0] - 3.333).abs() < 1e-9);
    }
}
