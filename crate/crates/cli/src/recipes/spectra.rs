//! Continuous-drive spectra with and without modulation.

use qdsaw_core::special::bessel_j;
use qdsaw_core::spectroscopy::{cw_scattering_spectrum, excitation_spectrum, linear_axis, CwSpectrumOptions};
use qdsaw_core::units::{ghz, mhz, to_ghz};
use qdsaw_core::{SolverConfig, SystemParams};

use super::{g_label, spectrum_table, with_g, Recipe, RecipeOutput};
use crate::error::{CliError, CliResult};
use crate::output::{Check, Table};

const G_VALUES: [f64; 3] = [0.0, 0.87, 1.55];
/// About a tenth of saturation for γ/2π = 320 MHz.
const WEAK_RABI_MHZ: f64 = 70.0;
/// Drive for the sideband-ratio oracle, deep in the linear regime.
pub(crate) const ORACLE_RABI_MHZ: f64 = 30.0;

fn params() -> SystemParams {
    SystemParams {
        gamma_qd: mhz(320.0),
        ..SystemParams::default()
    }
}

pub struct Fig2dSim;

impl Recipe for Fig2dSim {
    fn id(&self) -> &'static str {
        "fig2d_sim"
    }
    fn description(&self) -> &'static str {
        "excitation and scattering spectra under continuous drive versus g"
    }
    fn run(&self) -> CliResult<RecipeOutput> {
        let cfg = SolverConfig::default();
        let mut out = RecipeOutput::default();
        let axis = linear_axis(ghz(-8.0), ghz(8.0), 321);
        for g in G_VALUES {
            let p = with_g(&params(), g);
            let exc = excitation_spectrum(&p, mhz(WEAK_RABI_MHZ), &cfg, &axis, 32)?;
            out.artifacts
                .push(spectrum_table(&exc).to_csv(format!("fig2d_excitation_{}.csv", g_label(g)))?);
            let sc = cw_scattering_spectrum(&p, mhz(WEAK_RABI_MHZ), &cfg, &CwSpectrumOptions::default())?;
            out.artifacts
                .push(spectrum_table(&sc).to_csv(format!("fig2d_scattering_{}.csv", g_label(g)))?);
        }
        let (checks, lines) = sideband_oracle_checks(1.0)?;
        out.checks = checks;
        out.artifacts.push(lines.to_csv("fig2d_resonant_lines.csv")?);
        Ok(out)
    }
}

/// Resonant weak drive: coherent sideband/carrier ratio against
/// `(J₁/J₀)²(g/ω_SAW)` and peak positions against `k·ω_SAW`.
pub(crate) fn sideband_oracle_checks(g_ghz: f64) -> CliResult<(Vec<Check>, Table)> {
    let p = SystemParams {
        delta: 0.0,
        ..with_g(&params(), g_ghz)
    };
    let opts = CwSpectrumOptions::default();
    let s = cw_scattering_spectrum(&p, mhz(ORACLE_RABI_MHZ), &SolverConfig::default(), &opts)?;
    let weight = |k: i32| {
        s.coherent_lines
            .iter()
            .find(|l| l.order == k)
            .map(|l| l.weight)
            .ok_or_else(|| CliError::Numerical(format!("no coherent line of order {k}")))
    };
    let ratio = 0.5 * (weight(1)? + weight(-1)?) / weight(0)?;
    let chi = p.modulation_index();
    let oracle = (bessel_j(1, chi) / bessel_j(0, chi)).powi(2);
    let rel = (ratio / oracle - 1.0).abs();

    // the largest bin within a quarter period of each expected line
    let mut offset = 0.0f64;
    for k in -2..=2 {
        let x = p.delta + k as f64 * p.omega_saw;
        let best = s
            .detuning_axis
            .iter()
            .zip(&s.intensity)
            .filter(|(d, _)| (**d - x).abs() < 0.25 * p.omega_saw)
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(d, _)| *d)
            .ok_or_else(|| CliError::Numerical("spectrum axis misses a sideband".into()))?;
        offset = offset.max((best - x).abs());
    }
    let lines = Table::new()
        .column("order", s.coherent_lines.iter().map(|l| l.order as f64).collect())
        .column(
            "detuning_GHz",
            s.coherent_lines.iter().map(|l| to_ghz(l.detuning)).collect(),
        )
        .column("weight", s.coherent_lines.iter().map(|l| l.weight).collect());
    Ok((
        vec![
            Check::new(
                "first_sideband_ratio",
                ratio,
                format!("{oracle:.5} within 10%"),
                rel < 0.1,
            ),
            Check::new(
                "sideband_position_offset_GHz",
                to_ghz(offset),
                format!("≤ one bin ({} GHz)", to_ghz(opts.bin)),
                offset <= opts.bin * (1.0 + 1e-9),
            ),
        ],
        lines,
    ))
}
