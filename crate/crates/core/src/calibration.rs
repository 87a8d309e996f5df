//! Calibration fits: modulation index from sideband weights, the √P law for
//! the acoustic coupling, and the counts-to-occupancy scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::bin_average;
use crate::fit::levenberg_marquardt;
use crate::model::SystemParams;
use crate::pulses::{PowerCalibration, PulseFamily, SquareShape, TimeGrid};
use crate::solver::SolverConfig;
use crate::special::bessel_j;
use crate::spectroscopy::SpectrumData;
use crate::textio::parse_columns;
use crate::units::dbm_to_watts;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationModel {
    SqrtPower,
    BesselIndex,
    OccupancyScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParameter {
    pub name: String,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub model: CalibrationModel,
    pub parameters: Vec<FitParameter>,
    pub residual_norm: f64,
    /// Model-derived series, e.g. the occupancy axis implied by a count scale.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<f64>,
}

impl CalibrationFit {
    pub fn parameter(&self, name: &str) -> Option<&FitParameter> {
        self.parameters.iter().find(|p| p.name == name)
    }

    fn param(name: &str, value: f64, error: f64) -> FitParameter {
        FitParameter {
            name: name.to_string(),
            value,
            error: error.max(0.0),
        }
    }
}

/// One row of an imported calibration table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub x: f64,
    pub value: f64,
    pub sigma: Option<f64>,
}

/// Two- or three-column `(x, value[, sigma])` table.
pub fn parse_calibration_table(text: &str) -> Result<Vec<CalibrationPoint>> {
    parse_columns(text, &[2, 3])?
        .into_iter()
        .map(|r| {
            let sigma = r.get(2).copied();
            if sigma.is_some_and(|s| !(s > 0.0)) {
                return Err(Error::Format("sigma column must be > 0".into()));
            }
            Ok(CalibrationPoint {
                x: r[0],
                value: r[1],
                sigma,
            })
        })
        .collect()
}

fn bessel_ratio(k: i32, chi: f64) -> (f64, f64) {
    let j0 = bessel_j(0, chi);
    let jk = bessel_j(k, chi);
    let d0 = -bessel_j(1, chi);
    let dk = 0.5 * (bessel_j(k - 1, chi) - bessel_j(k + 1, chi));
    let q = jk / j0;
    (q * q, 2.0 * q * (dk * j0 - jk * d0) / (j0 * j0))
}

/// Sideband weights `W_k` for `k = −2..=2` relative to the strongest line.
fn sideband_weights(spectrum: &SpectrumData, omega_saw: f64) -> Result<[Option<f64>; 5]> {
    let mut w = [None; 5];
    if !spectrum.coherent_lines.is_empty() {
        let carrier = spectrum
            .coherent_lines
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .unwrap();
        for l in &spectrum.coherent_lines {
            let k = l.order - carrier.order;
            if (-2..=2).contains(&k) {
                w[(k + 2) as usize] = Some(l.weight);
            }
        }
        return Ok(w);
    }
    let axis = &spectrum.detuning_axis;
    let y = spectrum.coherent.as_ref().unwrap_or(&spectrum.intensity);
    if axis.len() != y.len() || axis.len() < 3 {
        return Err(Error::Shape("spectrum axis and intensity differ in length".into()));
    }
    let (ic, _) = y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::InsufficientData("empty spectrum".into()))?;
    let x0 = axis[ic];
    let (lo, hi) = (axis[0].min(axis[axis.len() - 1]), axis[0].max(axis[axis.len() - 1]));
    for k in -2i32..=2 {
        let c = x0 + k as f64 * omega_saw;
        let half = 0.25 * omega_saw;
        if c - half < lo || c + half > hi {
            continue;
        }
        let s: f64 = axis
            .iter()
            .zip(y)
            .filter(|(x, _)| (**x - c).abs() <= half)
            .map(|(_, v)| *v)
            .sum();
        w[(k + 2) as usize] = Some(s);
    }
    Ok(w)
}

/// Fits `χ` to the mean sideband/carrier ratios `J_k(χ)²/J_0(χ)²`, `k = 1, 2`,
/// and reports `g = ω_SAW·χ`.
pub fn fit_modulation_index(spectrum: &SpectrumData, omega_saw: f64) -> Result<CalibrationFit> {
    if !(omega_saw > 0.0) {
        return Err(Error::param("omega_saw", "must be > 0"));
    }
    let w = sideband_weights(spectrum, omega_saw)?;
    let carrier = w[2]
        .filter(|c| *c > 0.0)
        .ok_or_else(|| Error::InsufficientData("no carrier".into()))?;
    let mut obs = Vec::new();
    for k in 1..=2i32 {
        let side: Vec<f64> = [w[(2 - k) as usize], w[(2 + k) as usize]]
            .into_iter()
            .flatten()
            .collect();
        if !side.is_empty() {
            obs.push((k, side.iter().sum::<f64>() / side.len() as f64 / carrier));
        }
    }
    let first = obs.iter().find(|o| o.0 == 1).map(|o| o.1).unwrap_or(0.0);
    if !(first > 1e-10) {
        return Err(Error::InsufficientData("no resolvable first-order sideband".into()));
    }
    let chi0 = 2.0 * first.sqrt();
    let sol = levenberg_marquardt(obs.len(), &[chi0], |p, r, j| {
        for (i, (k, ratio)) in obs.iter().enumerate() {
            let (m, d) = bessel_ratio(*k, p[0]);
            r[i] = m - ratio;
            j[i] = d;
        }
    })?;
    let chi = sol.params[0].abs();
    let err = sol.errors[0];
    Ok(CalibrationFit {
        model: CalibrationModel::BesselIndex,
        parameters: vec![
            CalibrationFit::param("chi", chi, err),
            CalibrationFit::param("g", chi * omega_saw, err * omega_saw),
        ],
        residual_norm: sol.residual_norm,
        derived: Vec::new(),
    })
}

/// `g = a·√P` through `(P [dBm], g [rad/s])` points.
pub fn fit_g_vs_power(points: &[(f64, f64)]) -> Result<CalibrationFit> {
    let pts: Vec<CalibrationPoint> = points
        .iter()
        .map(|&(x, value)| CalibrationPoint { x, value, sigma: None })
        .collect();
    fit_g_vs_power_weighted(&pts)
}

/// As [`fit_g_vs_power`], weighting each point by `1/σ²` when σ is given.
pub fn fit_g_vs_power_weighted(points: &[CalibrationPoint]) -> Result<CalibrationFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} points; need at least 2",
            points.len()
        )));
    }
    if points.iter().any(|p| !p.x.is_finite() || !p.value.is_finite()) {
        return Err(Error::Format("non-finite calibration point".into()));
    }
    // linear in a, so one Gauss–Newton step is the exact solution
    let (mut spp, mut sgp) = (0.0, 0.0);
    for p in points {
        let w = p.sigma.map_or(1.0, |s| 1.0 / (s * s));
        let watts = dbm_to_watts(p.x);
        spp += w * watts;
        sgp += w * p.value * watts.sqrt();
    }
    let a = sgp / spp;
    let mut chi2 = 0.0;
    for p in points {
        let w = p.sigma.map_or(1.0, |s| 1.0 / (s * s));
        chi2 += w * (p.value - a * dbm_to_watts(p.x).sqrt()).powi(2);
    }
    let weighted = points.iter().any(|p| p.sigma.is_some());
    let s2 = if weighted {
        1.0
    } else {
        chi2 / (points.len() - 1) as f64
    };
    Ok(CalibrationFit {
        model: CalibrationModel::SqrtPower,
        parameters: vec![CalibrationFit::param("a", a, (s2 / spp).sqrt())],
        residual_norm: chi2.sqrt(),
        derived: Vec::new(),
    })
}

/// Readout geometry of the counts-to-occupancy calibration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OccupancyReadout {
    pub pulse: SquareShape,
    /// Centre of the detection bin, s.
    pub readout: f64,
    pub bin: f64,
}

impl OccupancyReadout {
    pub fn bin_start(&self) -> f64 {
        self.readout - 0.5 * self.bin
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bin > 0.0) {
            return Err(Error::param("bin", "must be > 0"));
        }
        if self.bin_start() < self.pulse.drive_end(self.pulse.duration) {
            return Err(Error::param(
                "readout",
                "the detection bin must start after the pulse has ended",
            ));
        }
        Ok(())
    }
}

/// Simulated bin-averaged occupancy after the pulse for each power.
pub fn occupancy_at_readout(
    p: &SystemParams,
    powers: &[f64],
    cal: &PowerCalibration,
    readout: &OccupancyReadout,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    readout.validate()?;
    use crate::pulses::power_to_rabi;
    use crate::solver::propagate;
    use rayon::prelude::*;
    if !grid.contains(readout.bin_start()) || !grid.contains(readout.bin_start() + readout.bin) {
        return Err(Error::Range("detection bin outside the grid".into()));
    }
    powers
        .par_iter()
        .map(|&pw| {
            let shape = SquareShape {
                peak: power_to_rabi(pw, cal)?,
                ..readout.pulse
            };
            let env = PulseFamily::build(&shape, grid, shape.duration)?;
            let tr = propagate(p, &env, cfg, &crate::DensityState::ground())?;
            bin_average(&tr, readout.bin_start(), readout.bin)
        })
        .collect()
}

/// Single scale `η` with `counts ≈ η·occupancy(power)`.
pub fn fit_occupancy_scale(
    counts: &[(f64, f64)],
    p: &SystemParams,
    cal: &PowerCalibration,
    readout: &OccupancyReadout,
    grid: &TimeGrid,
    cfg: &SolverConfig,
) -> Result<CalibrationFit> {
    if counts.len() < 2 {
        return Err(Error::InsufficientData("need at least two power points".into()));
    }
    readout.validate()?;
    if counts.iter().map(|c| c.0).any(|p| !p.is_finite() || p < 0.0) {
        return Err(Error::Format("powers must be finite and ≥ 0".into()));
    }
    let values: Vec<f64> = counts.iter().map(|c| c.1).collect();
    let spread =
        values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(spread > 0.0) {
        return Err(Error::Analysis("counts are flat; the scale is not identifiable".into()));
    }
    let occ = occupancy_at_readout(
        p,
        &counts.iter().map(|c| c.0).collect::<Vec<_>>(),
        cal,
        readout,
        grid,
        cfg,
    )?;
    let snn: f64 = occ.iter().map(|n| n * n).sum();
    if !(snn > 0.0) {
        return Err(Error::Analysis("simulated occupancy vanishes at every power".into()));
    }
    let eta = occ.iter().zip(&values).map(|(n, c)| n * c).sum::<f64>() / snn;
    let chi2: f64 = occ.iter().zip(&values).map(|(n, c)| (c - eta * n).powi(2)).sum();
    let s2 = if counts.len() > 1 {
        chi2 / (counts.len() - 1) as f64
    } else {
        0.0
    };
    Ok(CalibrationFit {
        model: CalibrationModel::OccupancyScale,
        parameters: vec![CalibrationFit::param("eta", eta, (s2 / snn).sqrt())],
        residual_norm: chi2.sqrt(),
        derived: values.iter().map(|c| c / eta).collect(),
    })
}

/// A calibration model that can be fitted to an imported table; the CLI keeps
/// these in a registry keyed by [`Calibrator::name`].
pub trait Calibrator: Send + Sync {
    fn name(&self) -> &'static str;
    fn fit_table(&self, rows: &[CalibrationPoint]) -> Result<CalibrationFit>;
}

/// Table rows are `(P [dBm], g [rad/s][, σ])`.
pub struct SqrtPowerCalibrator;

impl Calibrator for SqrtPowerCalibrator {
    fn name(&self) -> &'static str {
        "sqrt_power"
    }

    fn fit_table(&self, rows: &[CalibrationPoint]) -> Result<CalibrationFit> {
        fit_g_vs_power_weighted(rows)
    }
}

/// Table rows are `(detuning [rad/s], intensity)` of a measured spectrum.
pub struct BesselIndexCalibrator {
    pub omega_saw: f64,
}

impl Calibrator for BesselIndexCalibrator {
    fn name(&self) -> &'static str {
        "bessel_index"
    }

    fn fit_table(&self, rows: &[CalibrationPoint]) -> Result<CalibrationFit> {
        let spectrum = SpectrumData {
            detuning_axis: rows.iter().map(|r| r.x).collect(),
            intensity: rows.iter().map(|r| r.value).collect(),
            coherent: None,
            incoherent: None,
            coherent_lines: Vec::new(),
            clipped: 0,
            min_raw: 0.0,
        };
        fit_modulation_index(&spectrum, self.omega_saw)
    }
}

/// Table rows are `(power [W], counts per bin)`.
pub struct OccupancyScaleCalibrator {
    pub params: SystemParams,
    pub power_cal: PowerCalibration,
    pub readout: OccupancyReadout,
    pub grid: TimeGrid,
    pub solver: SolverConfig,
}

impl Calibrator for OccupancyScaleCalibrator {
    fn name(&self) -> &'static str {
        "occupancy_scale"
    }

    fn fit_table(&self, rows: &[CalibrationPoint]) -> Result<CalibrationFit> {
        let counts: Vec<(f64, f64)> = rows.iter().map(|r| (r.x, r.value)).collect();
        fit_occupancy_scale(
            &counts,
            &self.params,
            &self.power_cal,
            &self.readout,
            &self.grid,
            &self.solver,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectroscopy::SpectralLine;
    use crate::units::{ghz, mhz, ps};

    fn bessel_lines(chi: f64, omega: f64, scale: f64) -> SpectrumData {
        let lines = (-3..=3)
            .map(|k| SpectralLine {
                order: k,
                detuning: k as f64 * omega,
                weight: scale * bessel_j(k, chi).powi(2),
            })
            .collect();
        SpectrumData {
            detuning_axis: vec![],
            intensity: vec![],
            coherent: None,
            incoherent: None,
            coherent_lines: lines,
            clipped: 0,
            min_raw: 0.0,
        }
    }

    #[test]
    fn modulation_index_from_exact_bessel_weights() {
        let omega = ghz(3.5881);
        let fit = fit_modulation_index(&bessel_lines(0.2787, omega, 1.0), omega).unwrap();
        let chi = fit.parameter("chi").unwrap().value;
        assert!((chi - 0.2787).abs() < 1e-3);
        assert!((fit.parameter("g").unwrap().value - chi * omega).abs() < 1e-6);
    }

    #[test]
    fn modulation_index_is_scale_invariant() {
        let omega = ghz(3.5881);
        let a = fit_modulation_index(&bessel_lines(0.41, omega, 1.0), omega).unwrap();
        let b = fit_modulation_index(&bessel_lines(0.41, omega, 3.7e5), omega).unwrap();
        let (x, y) = (a.parameter("chi").unwrap().value, b.parameter("chi").unwrap().value);
        assert!((x - y).abs() < 1e-9);
    }

    #[test]
    fn modulation_index_from_binned_spectrum() {
        let omega = ghz(3.5881);
        let chi = 0.35;
        let axis: Vec<f64> = (-400..=400).map(|i| ghz(0.025) * i as f64).collect();
        let width = ghz(0.1);
        let intensity = axis
            .iter()
            .map(|x| {
                (-2..=2)
                    .map(|k| {
                        let d = x - k as f64 * omega;
                        bessel_j(k, chi).powi(2) * (-0.5 * (d / width).powi(2)).exp()
                    })
                    .sum()
            })
            .collect();
        let s = SpectrumData {
            detuning_axis: axis,
            intensity,
            coherent: None,
            incoherent: None,
            coherent_lines: vec![],
            clipped: 0,
            min_raw: 0.0,
        };
        let fit = fit_modulation_index(&s, omega).unwrap();
        assert!((fit.parameter("chi").unwrap().value - chi).abs() < 0.02 * chi);
    }

    #[test]
    fn single_line_has_no_sidebands() {
        let omega = ghz(3.5881);
        assert!(matches!(
            fit_modulation_index(&bessel_lines(0.0, omega, 1.0), omega),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn sqrt_law_exact_points() {
        let a = 2.0e12;
        let pts: Vec<(f64, f64)> = [-41.5, -36.5]
            .iter()
            .map(|d| (*d, a * dbm_to_watts(*d).sqrt()))
            .collect();
        let fit = fit_g_vs_power(&pts).unwrap();
        assert!((fit.parameters[0].value / a - 1.0).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-9 * a);
    }

    #[test]
    fn six_db_doubles_g() {
        let fit = fit_g_vs_power(&[(-40.0, 1.0), (-40.0 + 6.0206, 2.0)]).unwrap();
        let a = fit.parameters[0].value;
        let ratio = (dbm_to_watts(-40.0 + 6.0206) / dbm_to_watts(-40.0)).sqrt();
        assert!((ratio - 2.0).abs() < 1e-4);
        assert!((a * dbm_to_watts(-33.9794).sqrt() / (a * dbm_to_watts(-40.0).sqrt()) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn sqrt_law_equivariance_and_errors() {
        let pts = [(-50.0, 1.1), (-45.0, 1.9), (-40.0, 3.2), (-35.0, 5.5)];
        let a = fit_g_vs_power(&pts).unwrap().parameters[0].value;
        let scaled: Vec<(f64, f64)> = pts.iter().map(|(x, y)| (*x, 7.0 * y)).collect();
        let b = fit_g_vs_power(&scaled).unwrap().parameters[0].value;
        assert!((b - 7.0 * a).abs() <= 1e-12 * b);
        assert!(matches!(fit_g_vs_power(&pts[..1]), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn parses_three_column_tables() {
        let rows = parse_calibration_table("# dBm g sigma\n-40 1.0 0.1\n-35 1.8 0.1\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].sigma, Some(0.1));
        assert!(parse_calibration_table("-40 1.0 0\n").is_err());
        assert!(parse_calibration_table("-40 1.0 2 3\n").is_err());
        let fit = SqrtPowerCalibrator.fit_table(&rows).unwrap();
        assert!(fit.parameters[0].value > 0.0);
    }

    fn s4_setup() -> (SystemParams, PowerCalibration, OccupancyReadout, TimeGrid) {
        let p = SystemParams {
            delta: 0.0,
            gamma_qd: mhz(320.0),
            ..SystemParams::default()
        };
        let pulse = SquareShape {
            start: 0.0,
            duration: ps(130.0),
            rise: 0.0,
            fall: 0.0,
            peak: 0.0,
        };
        // π pulse at 1 µW
        let cal = PowerCalibration::from_reference(1e-6, std::f64::consts::PI / ps(130.0)).unwrap();
        let readout = OccupancyReadout {
            pulse,
            readout: ps(140.0),
            bin: ps(16.0),
        };
        (p, cal, readout, TimeGrid::new(ps(-5.0), ps(1.0), 161).unwrap())
    }

    #[test]
    fn occupancy_scale_round_trip() {
        let (p, cal, readout, grid) = s4_setup();
        let cfg = SolverConfig::default();
        let powers: Vec<f64> = (1..=12).map(|i| 0.5e-6 * i as f64).collect();
        let occ = occupancy_at_readout(&p, &powers, &cal, &readout, &grid, &cfg).unwrap();
        let counts: Vec<(f64, f64)> = powers.iter().zip(&occ).map(|(p, n)| (*p, 3e4 * n)).collect();
        let fit = fit_occupancy_scale(&counts, &p, &cal, &readout, &grid, &cfg).unwrap();
        assert!((fit.parameters[0].value / 3e4 - 1.0).abs() < 1e-3);
        assert_eq!(fit.derived.len(), counts.len());
    }

    #[test]
    fn occupancy_scale_rejects_flat_counts_and_early_readout() {
        let (p, cal, readout, grid) = s4_setup();
        let cfg = SolverConfig::default();
        let zeros = [(1e-6, 0.0), (2e-6, 0.0), (3e-6, 0.0)];
        assert!(fit_occupancy_scale(&zeros, &p, &cal, &readout, &grid, &cfg).is_err());
        let early = OccupancyReadout {
            readout: ps(100.0),
            ..readout
        };
        let counts = [(1e-6, 1.0), (2e-6, 2.0)];
        assert!(matches!(
            fit_occupancy_scale(&counts, &p, &cal, &early, &grid, &cfg),
            Err(Error::Parameter { .. })
        ));
    }
}
