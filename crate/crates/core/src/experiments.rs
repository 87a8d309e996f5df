//! Numerical experiments built from solver runs: mechanical-phase averages,
//! enhancement curves, ladder comparisons, pulse-duration optimization and
//! power sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, linear_lsq};
use crate::linalg::{ComplexMatrix2, DensityState};
use crate::model::{generalized_rabi, ladder_models, SystemParams};
use crate::pulses::{power_to_rabi, PowerCalibration, PulseEnvelope, PulseFamily, SquareShape, TimeGrid};
use crate::solver::{propagate, SolverConfig, Trajectory};

pub const DEFAULT_PHASES: usize = 8;
pub const DEFAULT_FLOOR: f64 = 1e-4;

/// Mean of the trajectories for `φ_k = 2πk/n_phases`, starting from `|g⟩`.
pub fn phase_averaged_trajectory(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    n_phases: usize,
) -> Result<Trajectory> {
    if n_phases == 0 {
        return Err(Error::param("n_phases", "must be ≥ 1"));
    }
    let runs: Vec<Trajectory> = (0..n_phases)
        .into_par_iter()
        .map(|k| {
            let q = SystemParams {
                phi: std::f64::consts::TAU * k as f64 / n_phases as f64,
                ..*p
            };
            propagate(&q, env, cfg, &DensityState::ground())
        })
        .collect::<Result<_>>()?;
    Ok(average_trajectories(&runs, p))
}

/// Elementwise mean of trajectories that share a grid, summed in order.
pub fn average_trajectories(runs: &[Trajectory], p: &SystemParams) -> Trajectory {
    let first = &runs[0];
    let w = 1.0 / runs.len() as f64;
    let states: Vec<ComplexMatrix2> = (0..first.grid.n)
        .map(|i| {
            let mut acc = ComplexMatrix2::zero();
            for r in runs {
                acc = acc + r.states[i];
            }
            acc.scale_re(w)
        })
        .collect();
    let mut avg = Trajectory::from_states(first.grid, states, *p, first.envelope_meta);
    // the per-run mean of ρ_ee is recomputed the same way as the states
    for (i, n) in avg.occupancy.iter_mut().enumerate() {
        *n = runs.iter().map(|r| r.occupancy[i]).sum::<f64>() * w;
    }
    avg
}

/// `c(t) = s_g(t)/s_0(t) − 1`, defined only where `s_0 ≥ floor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnhancementSeries {
    pub grid: TimeGrid,
    /// NaN where the mask is false.
    pub c: Vec<f64>,
    pub valid_mask: Vec<bool>,
    pub floor: f64,
}

impl EnhancementSeries {
    /// `(time, value)` of the largest valid enhancement.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.c
            .iter()
            .zip(&self.valid_mask)
            .enumerate()
            .filter(|(_, (_, ok))| **ok)
            .map(|(k, (c, _))| (self.grid.time(k), *c))
            .fold(None, |best: Option<(f64, f64)>, x| match best {
                Some(b) if b.1 >= x.1 => Some(b),
                _ => Some(x),
            })
    }

    /// Largest valid enhancement within `[t_min, t_max]`.
    pub fn peak_within(&self, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        for k in 0..self.grid.n {
            let t = self.grid.time(k);
            if self.valid_mask[k] && t >= t_min && t <= t_max && best.is_none_or(|b| self.c[k] > b.1) {
                best = Some((t, self.c[k]));
            }
        }
        best
    }
}

pub fn enhancement(traj_g: &Trajectory, traj_0: &Trajectory, floor: f64) -> Result<EnhancementSeries> {
    if !(floor > 0.0) {
        return Err(Error::param("floor", "must be > 0"));
    }
    if traj_g.grid != traj_0.grid {
        return Err(Error::Shape("enhancement needs trajectories on the same grid".into()));
    }
    let (c, valid_mask) = traj_g
        .occupancy
        .iter()
        .zip(&traj_0.occupancy)
        .map(|(g, z)| {
            if *z >= floor {
                (g / z - 1.0, true)
            } else {
                (f64::NAN, false)
            }
        })
        .unzip();
    Ok(EnhancementSeries {
        grid: traj_g.grid,
        c,
        valid_mask,
        floor,
    })
}

/// Direct `(Ω₀(t), Δ)` and phonon-assisted `(Γ(t), 0)` channels as independent
/// two-level problems. `Γ(t)` follows the envelope scaled by `g₀√n/ω_SAW`.
pub fn ladder_occupancies(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
) -> Result<(Trajectory, Trajectory)> {
    let models = ladder_models(p, 1.0)?;
    let bare = SystemParams {
        g: 0.0,
        g0: None,
        n_phonons: None,
        ..*p
    };
    let direct = propagate(&bare, env, cfg, &DensityState::ground())?;
    let mut side_env = env.clone();
    let scale = models.sideband.rabi;
    side_env.values.iter_mut().for_each(|v| *v *= scale);
    side_env.meta.peak_rabi *= scale;
    let side_params = SystemParams { delta: 0.0, ..bare };
    let sideband = propagate(&side_params, &side_env, cfg, &DensityState::ground())?;
    Ok((direct, sideband))
}

/// Mean over each window of `window` consecutive samples; entry `i` averages
/// `values[i..i + window]`.
pub fn running_mean(values: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 || window > values.len() {
        return Err(Error::param("window", "must lie in 1..=len"));
    }
    let mut out = Vec::with_capacity(values.len() - window + 1);
    let mut s: f64 = values[..window].iter().sum();
    out.push(s / window as f64);
    for i in window..values.len() {
        s += values[i] - values[i - window];
        out.push(s / window as f64);
    }
    Ok(out)
}

/// Result of [`sideband_rabi_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandFit {
    /// Effective sideband Rabi rate `w·√A`, rad/s.
    pub gamma_eff: f64,
    /// Oscillation frequency of the slow envelope, rad/s.
    pub frequency: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// RMS residual relative to the amplitude.
    pub relative_residual: f64,
}

/// Measures the phonon-assisted Rabi rate from the full modulated model.
///
/// Runs a resonant-sideband (`Δ = −ω_SAW`) constant drive without damping,
/// averages over the mechanical phase, removes the fast direct-channel
/// oscillation with a running mean over one generalized Rabi period, and fits
/// `c + A·sin²(w·t/2)`. The light shift of the drive detunes the sideband
/// transition, so the slow envelope is a detuned Rabi oscillation and the
/// coupling is `w·√A`.
pub fn sideband_rabi_oracle(p: &SystemParams, rabi0: f64, window: f64) -> Result<SidebandFit> {
    p.validate()?;
    if p.modulation_index() >= 0.5 {
        return Err(Error::param("g", "oracle needs g/ω_SAW < 0.5"));
    }
    if (p.delta + p.omega_saw).abs() > 1e-9 * p.omega_saw {
        return Err(Error::param("delta", "oracle needs Δ = −ω_SAW"));
    }
    if p.gamma_qd != 0.0 || p.gamma_z != 0.0 {
        return Err(Error::param("gamma", "oracle needs an undamped emitter"));
    }
    if !(rabi0 > 0.0) {
        return Err(Error::param("rabi0", "must be > 0"));
    }
    if p.g == 0.0 {
        return Ok(SidebandFit {
            gamma_eff: 0.0,
            frequency: 0.0,
            amplitude: 0.0,
            offset: 0.0,
            relative_residual: 0.0,
        });
    }
    let dt = 1e-12;
    let grid = TimeGrid::spanning(0.0, window, dt)?;
    let mut env = PulseEnvelope::zero(grid);
    env.values[1..].iter_mut().for_each(|v| *v = rabi0);
    env.meta.peak_rabi = rabi0;
    let avg = phase_averaged_trajectory(p, &env, &SolverConfig::default(), DEFAULT_PHASES)?;
    let period = std::f64::consts::TAU / generalized_rabi(rabi0, p.delta);
    let w = ((period / dt).round() as usize).max(1);
    let smooth = running_mean(&avg.occupancy, w)?;
    // sample k of `smooth` is centred on t = (k + (w − 1)/2)·dt
    let stride = 10;
    let ts: Vec<f64> = (0..smooth.len())
        .step_by(stride)
        .map(|k| (k as f64 + 0.5 * (w as f64 - 1.0)) * dt)
        .collect();
    let ys: Vec<f64> = (0..smooth.len()).step_by(stride).map(|k| smooth[k]).collect();

    // coarse scan of w with the linear parameters eliminated
    let w_max = 20.0 * std::f64::consts::TAU / window;
    let w_min = 0.25 * std::f64::consts::TAU / window;
    let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
    for i in 0..=2000 {
        let freq = w_min * (w_max / w_min).powf(i as f64 / 2000.0);
        let rows: Vec<Vec<f64>> = ts.iter().map(|t| vec![1.0, (0.5 * freq * t).sin().powi(2)]).collect();
        let Some(c) = linear_lsq(&rows, &ys) else { continue };
        let ss: f64 = rows
            .iter()
            .zip(&ys)
            .map(|(r, y)| (c[0] + c[1] * r[1] - y).powi(2))
            .sum();
        if ss < best.0 && c[1] > 0.0 {
            best = (ss, freq, c[0], c[1]);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Analysis("no oscillating envelope found".into()));
    }
    let sol = levenberg_marquardt(ts.len(), &[best.2, best.3, best.1], |q, r, j| {
        for (i, (t, y)) in ts.iter().zip(&ys).enumerate() {
            let s = (0.5 * q[2] * t).sin();
            let c = (0.5 * q[2] * t).cos();
            r[i] = q[0] + q[1] * s * s - y;
            j[3 * i] = 1.0;
            j[3 * i + 1] = s * s;
            j[3 * i + 2] = q[1] * s * c * t;
        }
    })?;
    let (offset, amplitude, frequency) = (sol.params[0], sol.params[1], sol.params[2].abs());
    let rms = sol.residual_norm / (ts.len() as f64).sqrt();
    let relative_residual = rms / amplitude.abs();
    if !(amplitude > 0.0) || relative_residual > 0.05 {
        return Err(Error::Analysis(format!(
            "sideband envelope fit residual {relative_residual:.3} of the amplitude"
        )));
    }
    Ok(SidebandFit {
        gamma_eff: frequency * amplitude.sqrt(),
        frequency,
        amplitude,
        offset,
        relative_residual,
    })
}

/// What `optimize_pulse_duration` scores at `drive_end + readout_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Occupancy of the bare (`g = 0`) emitter; smaller is better.
    MinBareOccupancy { readout_delay: f64 },
    /// Phase-averaged enhancement with the bare occupancy clamped below at
    /// `floor`; larger is better.
    MaxEnhancement { readout_delay: f64, floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    pub duration: f64,
    /// Occupancy or enhancement, depending on the objective.
    pub value: f64,
}

const SCAN_STEP: f64 = 5e-12;
const REFINE_TOL: f64 = 0.5e-12;

/// Scans pulse durations at 5 ps, refines every local optimum by golden
/// section to 0.5 ps and returns the optima best first.
pub fn optimize_pulse_duration(
    p: &SystemParams,
    family: &dyn PulseFamily,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    objective: Objective,
    search_range: (f64, f64),
    n_phases: usize,
) -> Result<Vec<Optimum>> {
    let (lo, hi) = search_range;
    if !(hi > lo) || !(lo > 0.0) {
        return Err(Error::param("search_range", "needs 0 < start < end"));
    }
    let delay = match objective {
        Objective::MinBareOccupancy { readout_delay } => readout_delay,
        Objective::MaxEnhancement { readout_delay, floor } => {
            if !(floor > 0.0) {
                return Err(Error::param("floor", "must be > 0"));
            }
            readout_delay
        }
    };
    if !grid.contains(family.drive_end(hi) + delay) {
        return Err(Error::Range(
            "readout of the longest pulse falls outside the grid".into(),
        ));
    }
    // minimized score
    let score = |d: f64| -> Result<f64> {
        let env = family.build(grid, d)?;
        let t_read = family.drive_end(d) + delay;
        let bare = SystemParams {
            g: 0.0,
            g0: None,
            n_phonons: None,
            ..*p
        };
        let n0 = sample_at(&propagate(&bare, &env, cfg, &DensityState::ground())?, t_read);
        match objective {
            Objective::MinBareOccupancy { .. } => Ok(n0),
            Objective::MaxEnhancement { floor, .. } => {
                let ng = sample_at(&phase_averaged_trajectory(p, &env, cfg, n_phases)?, t_read);
                Ok(-(ng / n0.max(floor) - 1.0))
            }
        }
    };
    let n_scan = ((hi - lo) / SCAN_STEP + 1e-9).floor() as usize + 1;
    let ds: Vec<f64> = (0..n_scan).map(|i| lo + i as f64 * SCAN_STEP).collect();
    let fs: Vec<f64> = ds.par_iter().map(|&d| score(d)).collect::<Result<_>>()?;
    let minima: Vec<usize> = (1..n_scan.saturating_sub(1))
        .filter(|&i| fs[i] <= fs[i - 1] && fs[i] < fs[i + 1])
        .collect();
    let mut out: Vec<(f64, f64)> = minima
        .par_iter()
        .map(|&i| golden_section(&score, ds[i - 1], ds[i + 1], REFINE_TOL))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    Ok(out
        .into_iter()
        .map(|(duration, f)| Optimum {
            duration,
            value: match objective {
                Objective::MinBareOccupancy { .. } => f,
                Objective::MaxEnhancement { .. } => -f,
            },
        })
        .collect())
}

fn golden_section(f: &dyn Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while b - a > tol {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 < f2 { (x1, f1) } else { (x2, f2) })
}

/// Occupancy at `t` by linear interpolation between output samples.
pub fn sample_at(tr: &Trajectory, t: f64) -> f64 {
    let x = ((t - tr.grid.t0) / tr.grid.dt).clamp(0.0, (tr.grid.n - 1) as f64);
    let k = (x.floor() as usize).min(tr.grid.n - 2);
    let f = x - k as f64;
    tr.occupancy[k] + f * (tr.occupancy[k + 1] - tr.occupancy[k])
}

/// Mean occupancy over `[t_start, t_start + width]`.
pub fn bin_average(tr: &Trajectory, t_start: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) || !tr.grid.contains(t_start) || !tr.grid.contains(t_start + width) {
        return Err(Error::Range("readout bin outside the trajectory".into()));
    }
    let n = ((width / tr.grid.dt).round() as usize).max(1);
    let h = width / n as f64;
    // trapezoid rule on the interpolated series
    let mut s = 0.5 * (sample_at(tr, t_start) + sample_at(tr, t_start + width));
    for i in 1..n {
        s += sample_at(tr, t_start + i as f64 * h);
    }
    Ok(s * h / width)
}

/// Scalar results of a one-parameter scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub values: Vec<f64>,
    pub summaries: Vec<f64>,
    /// Hash of the configuration that produced the sweep, filled by the caller.
    pub provenance: String,
}

impl SweepResult {
    pub fn new(axis: impl Into<String>, values: Vec<f64>, summaries: Vec<f64>) -> Result<Self> {
        if values.len() != summaries.len() {
            return Err(Error::Shape("one summary per axis value".into()));
        }
        if values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("axis", "values must be strictly increasing"));
        }
        Ok(Self {
            axis: axis.into(),
            values,
            summaries,
            provenance: String::new(),
        })
    }
}

/// Occupancy at `readout_time` after a square pulse, as a function of power.
pub fn rabi_power_sweep(
    p: &SystemParams,
    powers: &[f64],
    cal: &PowerCalibration,
    pulse: &SquareShape,
    grid: &TimeGrid,
    cfg: &SolverConfig,
    readout_time: f64,
) -> Result<SweepResult> {
    if readout_time < pulse.drive_end(pulse.duration) {
        return Err(Error::param("readout_time", "must not precede the end of the pulse"));
    }
    if !grid.contains(readout_time) {
        return Err(Error::Range("readout outside the grid".into()));
    }
    let occ: Vec<f64> = powers
        .par_iter()
        .map(|&pw| {
            let env = PulseFamily::build(
                &SquareShape {
                    peak: power_to_rabi(pw, cal)?,
                    ..*pulse
                },
                grid,
                pulse.duration,
            )?;
            Ok(sample_at(
                &propagate(p, &env, cfg, &DensityState::ground())?,
                readout_time,
            ))
        })
        .collect::<Result<_>>()?;
    SweepResult::new("power_w", powers.to_vec(), occ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::square_pulse;
    use crate::units::{ghz, mhz, ns, ps};

    fn fig3_params(g: f64) -> SystemParams {
        SystemParams {
            g: ghz(g),
            gamma_qd: mhz(320.0),
            gamma_z: mhz(60.0),
            ..SystemParams::default()
        }
    }

    fn square(rabi: f64) -> PulseEnvelope {
        square_pulse(
            &TimeGrid::default_window(),
            ps(20.0),
            ps(2500.0),
            ps(30.0),
            ps(30.0),
            rabi,
        )
        .unwrap()
    }

    #[test]
    fn phase_average_without_modulation_is_a_single_run() {
        let p = fig3_params(0.0);
        let env = square(ghz(1.4));
        let cfg = SolverConfig::default();
        let single = propagate(&p, &env, &cfg, &DensityState::ground()).unwrap();
        let avg = phase_averaged_trajectory(&p, &env, &cfg, 8).unwrap();
        for (a, b) in single.occupancy.iter().zip(&avg.occupancy) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = phase_averaged_trajectory(&fig3_params(1.0), &env, &cfg, 1).unwrap();
        let phi0 = propagate(&fig3_params(1.0), &env, &cfg, &DensityState::ground()).unwrap();
        assert_eq!(one.occupancy, phi0.occupancy);
        assert!(phase_averaged_trajectory(&p, &env, &cfg, 0).is_err());
    }

    #[test]
    fn phase_average_is_the_arithmetic_mean() {
        let p = fig3_params(1.23);
        let env = square(ghz(1.4));
        let cfg = SolverConfig::default();
        let avg = phase_averaged_trajectory(&p, &env, &cfg, 4).unwrap();
        let runs: Vec<Trajectory> = (0..4)
            .map(|k| {
                let q = SystemParams {
                    phi: std::f64::consts::FRAC_PI_2 * k as f64,
                    ..p
                };
                propagate(&q, &env, &cfg, &DensityState::ground()).unwrap()
            })
            .collect();
        for i in (0..avg.grid.n).step_by(17) {
            let mean = runs.iter().map(|r| r.occupancy[i]).sum::<f64>() / 4.0;
            assert!((avg.occupancy[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn enhancement_identities() {
        let p = fig3_params(0.0);
        let env = square(ghz(1.4));
        let tr = propagate(&p, &env, &SolverConfig::default(), &DensityState::ground()).unwrap();
        let e = enhancement(&tr, &tr, DEFAULT_FLOOR).unwrap();
        assert!(e.c.iter().zip(&e.valid_mask).all(|(c, ok)| !ok || *c == 0.0));
        assert!(!e.valid_mask[0]);
        let mut doubled = tr.clone();
        doubled.occupancy.iter_mut().for_each(|n| *n *= 2.0);
        let e = enhancement(&doubled, &tr, DEFAULT_FLOOR).unwrap();
        assert!(e
            .c
            .iter()
            .zip(&e.valid_mask)
            .all(|(c, ok)| !ok || (*c - 1.0).abs() < 1e-12));
        let mut other = tr.clone();
        other.grid.dt *= 2.0;
        assert!(matches!(enhancement(&other, &tr, DEFAULT_FLOOR), Err(Error::Shape(_))));
        assert!(enhancement(&tr, &tr, 0.0).is_err());
    }

    fn fig1_params() -> SystemParams {
        SystemParams {
            delta: ghz(-3.5),
            omega_saw: ghz(3.5),
            ..SystemParams::default()
        }
        .with_phonons(ghz(1.0) / 1e3, 1e6)
    }

    #[test]
    fn ladder_channels_match_fig1_oracles() {
        let p = fig1_params();
        // one sample before t = 0 so the drive can switch on exactly at 0
        let grid = TimeGrid::new(ps(-1.0), ps(1.0), 2002).unwrap();
        let env = square_pulse(&grid, 0.0, ps(1900.0), 0.0, 0.0, ghz(1.0)).unwrap();
        let (direct, side) = ladder_occupancies(&p, &env, &SolverConfig::default()).unwrap();
        let gamma = ghz(1.0) / 3.5;
        assert!((crate::units::to_ghz(gamma) - 0.2857).abs() < 1e-4);
        // first sideband maximum at π/Γ = 1.75 ns
        assert!((std::f64::consts::PI / gamma - ns(1.75)).abs() < 1e-15);
        for k in 2..=1900 {
            let t = side.grid.time(k);
            let d = (side.occupancy[k] - (0.5 * gamma * t).sin().powi(2)).abs();
            assert!(d < 1e-6, "k={k} d={d}");
        }
        assert!((side.occupancy[1751] - 1.0).abs() < 1e-6);
        assert!(direct.occupancy.iter().all(|n| *n < 0.0755));
        let zero = PulseEnvelope::zero(grid);
        let (d0, s0) = ladder_occupancies(&p, &zero, &SolverConfig::default()).unwrap();
        assert!(d0.occupancy.iter().chain(&s0.occupancy).all(|n| *n == 0.0));
        let missing = SystemParams::default();
        assert!(matches!(
            ladder_occupancies(&missing, &env, &SolverConfig::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn running_mean_of_a_period_is_flat() {
        let xs: Vec<f64> = (0..1000)
            .map(|i| (std::f64::consts::TAU * i as f64 / 100.0).sin().powi(2))
            .collect();
        let m = running_mean(&xs, 100).unwrap();
        assert_eq!(m.len(), 901);
        assert!(m.iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(running_mean(&xs, 0).is_err());
    }

    #[test]
    fn duration_optima_are_rabi_periods() {
        let p = SystemParams {
            delta: ghz(-3.5),
            omega_saw: ghz(3.5),
            ..SystemParams::default()
        };
        let family = SquareShape {
            start: ps(10.0),
            duration: ps(100.0),
            rise: 0.0,
            fall: 0.0,
            peak: ghz(1.0),
        };
        let grid = TimeGrid::new(0.0, ps(1.0), 1201).unwrap();
        let obj = Objective::MinBareOccupancy { readout_delay: 0.0 };
        let opt = optimize_pulse_duration(
            &p,
            &family,
            &grid,
            &SolverConfig::default(),
            obj,
            (ps(150.0), ps(900.0)),
            1,
        )
        .unwrap();
        let period = ns(1.0) / 3.640_054_944_640_259;
        let mut found: Vec<f64> = opt.iter().map(|o| o.duration / period).collect();
        found.sort_by(f64::total_cmp);
        assert_eq!(found.len(), 3, "{found:?}");
        for (k, f) in found.iter().enumerate() {
            assert!((f * period - (k + 1) as f64 * period).abs() < ps(1.0), "{f}");
        }
        assert!(opt.iter().all(|o| o.value < 1e-5));
        let empty = optimize_pulse_duration(
            &p,
            &family,
            &grid,
            &SolverConfig::default(),
            obj,
            (ps(300.0), ps(300.0)),
            1,
        );
        assert!(empty.is_err());
    }

    #[test]
    fn power_sweep_basics() {
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
        let grid = TimeGrid::new(ps(-5.0), ps(1.0), 400).unwrap();
        // π pulse at 10 nW
        let cal = PowerCalibration::from_reference(1e-8, std::f64::consts::PI / ps(130.0)).unwrap();
        let powers: Vec<f64> = (0..=40).map(|i| i as f64 * 1e-9).collect();
        let sweep = rabi_power_sweep(&p, &powers, &cal, &pulse, &grid, &SolverConfig::default(), ps(140.0)).unwrap();
        assert_eq!(sweep.summaries[0], 0.0);
        let (imax, nmax) = sweep
            .summaries
            .iter()
            .enumerate()
            .fold((0, 0.0), |b, (i, v)| if *v > b.1 { (i, *v) } else { b });
        assert!((8..=12).contains(&imax), "{imax}");
        assert!(nmax < 1.0 && nmax > 0.8);
        assert!(rabi_power_sweep(&p, &powers, &cal, &pulse, &grid, &SolverConfig::default(), ps(100.0)).is_err());
    }
}
