//! Optical drive envelopes Ω₀(t).
//!
//! Envelopes are real, non-negative and sampled on a uniform [`TimeGrid`];
//! the solver interpolates them linearly. Every envelope is zero at the first
//! grid point, i.e. the drive is switched on after the window opens.
//!
//! Pulse shapes implement [`PulseShape`] so that a configuration can name one
//! and the caller does not need to know which constructor backs it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textio;

/// Uniform time grid `t_k = t0 + k·dt`, `k = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, dt: f64, n: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::param("dt", "time step must be finite and > 0"));
        }
        if n < 2 {
            return Err(Error::param("n", "a grid needs at least two points"));
        }
        Ok(Self { t0, dt, n })
    }

    /// Grid from `t0` to (at least) `t_end` with step `dt`.
    pub fn spanning(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t_end > t0) {
            return Err(Error::param("t_end", "must exceed t0"));
        }
        let steps = ((t_end - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, dt, steps + 1)
    }

    /// 1 ps steps over 0–3 ns.
    pub fn default_window() -> Self {
        Self {
            t0: 0.0,
            dt: 1e-12,
            n: 3001,
        }
    }

    #[inline]
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.time(k)).collect()
    }

    /// Index of the grid point nearest to `t`, if inside the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt;
        if x < -0.5 || x > self.n as f64 - 0.5 {
            return None;
        }
        Some(x.round().max(0.0) as usize)
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t0 - 1e-9 * self.dt && t <= self.end() + 1e-9 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeTag {
    Square,
    Etalon,
    Cw,
    Measured,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseMeta {
    pub shape: ShapeTag,
    /// Maximum of the sampled envelope, rad/s.
    pub peak_rabi: f64,
    /// Start of the drive (first instant with nonzero amplitude), s.
    pub start: f64,
    /// Full width at half maximum of the underlying square drive, s.
    pub duration: f64,
    pub rise: f64,
    pub fall: f64,
    /// Etalon passband FWHM in Hz.
    pub filter_bandwidth: Option<f64>,
}

impl PulseMeta {
    /// Instant at which the (unfiltered) drive has fully switched off.
    pub fn drive_end(&self) -> f64 {
        self.start + 0.5 * self.rise + self.duration + 0.5 * self.fall
    }
}

/// Sampled envelope Ω₀(t) in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseEnvelope {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub meta: PulseMeta,
}

impl PulseEnvelope {
    /// Identically zero drive.
    pub fn zero(grid: TimeGrid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n],
            meta: PulseMeta {
                shape: ShapeTag::Constant,
                peak_rabi: 0.0,
                start: grid.t0,
                duration: 0.0,
                rise: 0.0,
                fall: 0.0,
                filter_bandwidth: None,
            },
        }
    }

    /// Linear interpolation; clamps to the end samples outside the grid.
    #[inline]
    pub fn value_at(&self, t: f64) -> f64 {
        let x = (t - self.grid.t0) / self.grid.dt;
        if x <= 0.0 {
            return self.values[0];
        }
        let last = self.grid.n - 1;
        if x >= last as f64 {
            return self.values[last];
        }
        let k = x.floor() as usize;
        let f = x - k as f64;
        self.values[k] + f * (self.values[k + 1] - self.values[k])
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// `Ω₀(t)²` normalized to 1, for plotting measured-intensity analogues.
    pub fn relative_intensity(&self) -> Vec<f64> {
        let p = self.peak();
        if p == 0.0 {
            return vec![0.0; self.values.len()];
        }
        self.values.iter().map(|v| (v / p).powi(2)).collect()
    }

    fn check_invariants(&self) -> Result<()> {
        if self.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::param("envelope", "values must be finite and ≥ 0"));
        }
        if self.values[0] != 0.0 {
            return Err(Error::Range("envelope must be zero at the grid start".into()));
        }
        Ok(())
    }
}

/// Fraction of the cell `[t − dt/2, t + dt/2]` inside `[c, d]`.
fn cell_fraction(t: f64, dt: f64, c: f64, d: f64) -> f64 {
    let f = ((t + 0.5 * dt).min(d) - (t - 0.5 * dt).max(c)).max(0.0) / dt;
    // snap rounding residue so flat tops are exactly flat
    if f > 1.0 - 1e-9 {
        1.0
    } else if f < 1e-9 {
        0.0
    } else {
        f
    }
}

/// Square pulse with raised-cosine edges.
///
/// The rising edge starts at `start` and reaches half height at
/// `start + rise/2`; the falling edge is placed so that the full width at half
/// maximum equals `duration`. Zero-width edges are sampled as cell averages,
/// which keeps the pulse area a continuous function of `duration`.
pub fn square_pulse(
    grid: &TimeGrid,
    start: f64,
    duration: f64,
    rise: f64,
    fall: f64,
    peak: f64,
) -> Result<PulseEnvelope> {
    if !(rise >= 0.0) || !(fall >= 0.0) {
        return Err(Error::param("rise/fall", "must be ≥ 0"));
    }
    if !(duration > 0.0) {
        return Err(Error::param("duration", "must be > 0"));
    }
    if !(peak >= 0.0) || !peak.is_finite() {
        return Err(Error::param("peak", "must be finite and ≥ 0"));
    }
    if duration < 0.5 * (rise + fall) {
        return Err(Error::param("duration", "shorter than the edges"));
    }
    let fall_start = start + 0.5 * rise + duration - 0.5 * fall;
    let end = fall_start + fall;
    if start < grid.t0 || end > grid.end() {
        return Err(Error::Range(format!(
            "pulse [{start:e}, {end:e}] s does not fit in grid [{:e}, {:e}] s",
            grid.t0,
            grid.end()
        )));
    }
    let dt = grid.dt;
    let values: Vec<f64> = (0..grid.n)
        .map(|k| {
            let t = grid.time(k);
            let up = if rise > 0.0 {
                if t <= start {
                    0.0
                } else if t >= start + rise {
                    1.0
                } else {
                    0.5 * (1.0 - (std::f64::consts::PI * (t - start) / rise).cos())
                }
            } else {
                cell_fraction(t, dt, start, f64::INFINITY)
            };
            let down = if fall > 0.0 {
                if t <= fall_start {
                    1.0
                } else if t >= end {
                    0.0
                } else {
                    0.5 * (1.0 + (std::f64::consts::PI * (t - fall_start) / fall).cos())
                }
            } else {
                cell_fraction(t, dt, f64::NEG_INFINITY, end)
            };
            peak * up.min(down)
        })
        .collect();
    let env = PulseEnvelope {
        grid: *grid,
        values,
        meta: PulseMeta {
            shape: ShapeTag::Square,
            peak_rabi: peak,
            start,
            duration,
            rise,
            fall,
            filter_bandwidth: None,
        },
    };
    env.check_invariants()?;
    if peak > 0.0 && (env.peak() - peak).abs() > 1e-9 * peak {
        return Err(Error::Range("flat top narrower than the grid step".into()));
    }
    Ok(env)
}

/// Continuous drive switched on at `start` with a raised-cosine edge of width `rise`.
pub fn cw_pulse(grid: &TimeGrid, start: f64, rise: f64, peak: f64) -> Result<PulseEnvelope> {
    if start < grid.t0 || start + rise >= grid.end() {
        return Err(Error::Range("cw turn-on outside the grid".into()));
    }
    // A square pulse whose falling edge sits past the grid end.
    let duration = grid.end() - start - 0.5 * rise + grid.dt;
    let mut g = *grid;
    g.n += 2;
    let mut env = square_pulse(&g, start, duration, rise, 0.0, peak)?;
    env.grid = *grid;
    env.values.truncate(grid.n);
    env.meta.shape = ShapeTag::Cw;
    env.meta.duration = f64::INFINITY;
    Ok(env)
}

/// Drive passed through a Fabry–Perot etalon.
///
/// The field amplitude (∝ Ω₀) is convolved with the causal single-pole
/// response `h(t) = Θ(t)·πδf·exp(−πδf·t)` and rescaled to the input peak. The
/// convolution is evaluated exactly for the piecewise-linear input.
pub fn etalon_filtered_pulse(input: &PulseEnvelope, bandwidth_fwhm: f64) -> Result<PulseEnvelope> {
    if !(bandwidth_fwhm > 0.0) {
        return Err(Error::param("bandwidth_fwhm", "must be > 0"));
    }
    let a = std::f64::consts::PI * bandwidth_fwhm;
    let adt = a * input.grid.dt;
    let decay = (-adt).exp();
    let one_minus = -(-adt).exp_m1();
    // weight of the slope term for a linear input segment
    let slope_w = one_minus - one_minus / adt + decay;
    let x = &input.values;
    let mut y = vec![0.0; x.len()];
    for k in 0..x.len() - 1 {
        y[k + 1] = decay * y[k] + x[k] * one_minus + (x[k + 1] - x[k]) * slope_w;
    }
    let ymax = y.iter().cloned().fold(0.0, f64::max);
    let target = input.peak();
    if ymax > 0.0 {
        let s = target / ymax;
        for v in &mut y {
            *v = (*v * s).max(0.0);
        }
    }
    let env = PulseEnvelope {
        grid: input.grid,
        values: y,
        meta: PulseMeta {
            shape: ShapeTag::Etalon,
            peak_rabi: if ymax > 0.0 { target } else { 0.0 },
            filter_bandwidth: Some(bandwidth_fwhm),
            ..input.meta
        },
    };
    env.check_invariants()?;
    Ok(env)
}

/// Converts optical power to resonant Rabi rate, `Ω₀ = c·√P`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCalibration {
    /// rad/s per √W.
    coefficient: f64,
}

impl PowerCalibration {
    pub fn new(coefficient: f64) -> Result<Self> {
        if !(coefficient > 0.0) || !coefficient.is_finite() {
            return Err(Error::param("coefficient", "must be finite and > 0"));
        }
        Ok(Self { coefficient })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// Calibration that maps `power` onto `rabi`.
    pub fn from_reference(power: f64, rabi: f64) -> Result<Self> {
        if !(power > 0.0) {
            return Err(Error::param("power", "reference power must be > 0"));
        }
        Self::new(rabi / power.sqrt())
    }
}

pub fn power_to_rabi(power: f64, cal: &PowerCalibration) -> Result<f64> {
    if !(power >= 0.0) {
        return Err(Error::param("power", "must be ≥ 0"));
    }
    Ok(cal.coefficient * power.sqrt())
}

/// One row of a measured intensity trace, time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub time: f64,
    pub intensity: f64,
}

/// Parses the `(time_ns, relative_intensity)` envelope file format.
pub fn parse_envelope_file(text: &str) -> Result<Vec<EnvelopeSample>> {
    Ok(textio::parse_two_column(text)?
        .into_iter()
        .map(|(t_ns, intensity)| EnvelopeSample {
            time: t_ns * 1e-9,
            intensity,
        })
        .collect())
}

/// Resamples a measured intensity trace onto `grid`.
///
/// Intensity is interpolated linearly, converted to amplitude by a square
/// root and scaled so the maximum amplitude equals `peak`. The envelope is
/// zero outside the sampled span.
pub fn load_envelope(grid: &TimeGrid, samples: &[EnvelopeSample], peak: f64) -> Result<PulseEnvelope> {
    if samples.len() < 2 {
        return Err(Error::Format("an envelope needs at least two samples".into()));
    }
    if samples.windows(2).any(|w| !(w[1].time > w[0].time)) {
        return Err(Error::Format("time column must be strictly increasing".into()));
    }
    if samples
        .iter()
        .any(|s| !(s.intensity >= 0.0) || !s.intensity.is_finite())
    {
        return Err(Error::Format("intensities must be finite and ≥ 0".into()));
    }
    if !(peak >= 0.0) {
        return Err(Error::param("peak", "must be ≥ 0"));
    }
    // absorb rounding in ns → s conversions
    let slack = 1e-6 * grid.dt;
    let first = samples[0].time - slack;
    let last = samples[samples.len() - 1].time + slack;
    let mut j = 0;
    let amplitude: Vec<f64> = grid
        .times()
        .into_iter()
        .map(|t| {
            if t < first || t > last {
                return 0.0;
            }
            while j + 2 < samples.len() && samples[j + 1].time < t {
                j += 1;
            }
            let (a, b) = (samples[j], samples[j + 1]);
            let f = ((t - a.time) / (b.time - a.time)).clamp(0.0, 1.0);
            (a.intensity + f * (b.intensity - a.intensity)).max(0.0).sqrt()
        })
        .collect();
    let amax = amplitude.iter().cloned().fold(0.0, f64::max);
    if amax == 0.0 {
        return Err(Error::Format("envelope has no positive intensity on the grid".into()));
    }
    let values: Vec<f64> = amplitude.iter().map(|a| a / amax * peak).collect();
    let above: Vec<f64> = grid
        .times()
        .into_iter()
        .zip(&values)
        .filter(|(_, v)| **v >= 0.5 * peak)
        .map(|(t, _)| t)
        .collect();
    let duration = match (above.first(), above.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let env = PulseEnvelope {
        grid: *grid,
        values,
        meta: PulseMeta {
            shape: ShapeTag::Measured,
            peak_rabi: peak,
            start: samples[0].time.max(grid.t0),
            duration,
            rise: 0.0,
            fall: 0.0,
            filter_bandwidth: None,
        },
    };
    env.check_invariants()?;
    Ok(env)
}

/// A named, parameterized pulse shape.
pub trait PulseShape: Send + Sync {
    fn name(&self) -> &'static str;
    fn build(&self, grid: &TimeGrid) -> Result<PulseEnvelope>;
}

/// A pulse shape with a tunable duration, for duration scans.
pub trait PulseFamily: Send + Sync {
    fn build(&self, grid: &TimeGrid, duration: f64) -> Result<PulseEnvelope>;
    /// Instant the drive is fully off for a given duration.
    fn drive_end(&self, duration: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareShape {
    pub start: f64,
    pub duration: f64,
    pub rise: f64,
    pub fall: f64,
    pub peak: f64,
}

impl PulseShape for SquareShape {
    fn name(&self) -> &'static str {
        "square"
    }
    fn build(&self, grid: &TimeGrid) -> Result<PulseEnvelope> {
        square_pulse(grid, self.start, self.duration, self.rise, self.fall, self.peak)
    }
}

impl PulseFamily for SquareShape {
    fn build(&self, grid: &TimeGrid, duration: f64) -> Result<PulseEnvelope> {
        square_pulse(grid, self.start, duration, self.rise, self.fall, self.peak)
    }
    fn drive_end(&self, duration: f64) -> f64 {
        self.start + 0.5 * self.rise + duration + 0.5 * self.fall
    }
}

/// Square drive followed by an etalon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtalonShape {
    pub drive: SquareShape,
    /// Passband FWHM in Hz.
    pub bandwidth: f64,
}

impl PulseShape for EtalonShape {
    fn name(&self) -> &'static str {
        "etalon"
    }
    fn build(&self, grid: &TimeGrid) -> Result<PulseEnvelope> {
        etalon_filtered_pulse(&PulseShape::build(&self.drive, grid)?, self.bandwidth)
    }
}

impl PulseFamily for EtalonShape {
    fn build(&self, grid: &TimeGrid, duration: f64) -> Result<PulseEnvelope> {
        etalon_filtered_pulse(&PulseFamily::build(&self.drive, grid, duration)?, self.bandwidth)
    }
    fn drive_end(&self, duration: f64) -> f64 {
        self.drive.drive_end(duration)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwShape {
    pub start: f64,
    pub rise: f64,
    pub peak: f64,
}

impl PulseShape for CwShape {
    fn name(&self) -> &'static str {
        "cw"
    }
    fn build(&self, grid: &TimeGrid) -> Result<PulseEnvelope> {
        cw_pulse(grid, self.start, self.rise, self.peak)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredShape {
    pub samples: Vec<EnvelopeSample>,
    pub peak: f64,
}

impl PulseShape for MeasuredShape {
    fn name(&self) -> &'static str {
        "file"
    }
    fn build(&self, grid: &TimeGrid) -> Result<PulseEnvelope> {
        load_envelope(grid, &self.samples, self.peak)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, ps};
    use proptest::prelude::*;

    fn grid() -> TimeGrid {
        TimeGrid::default_window()
    }

    /// Width between the half-maximum crossings, linearly interpolated.
    fn fwhm(env: &PulseEnvelope) -> f64 {
        let half = 0.5 * env.peak();
        let v = &env.values;
        let k_up = v.iter().position(|x| *x >= half).unwrap();
        let k_dn = v.iter().rposition(|x| *x >= half).unwrap();
        let t_up = env.grid.time(k_up - 1) + env.grid.dt * (half - v[k_up - 1]) / (v[k_up] - v[k_up - 1]);
        let t_dn = env.grid.time(k_dn) + env.grid.dt * (v[k_dn] - half) / (v[k_dn] - v[k_dn + 1]);
        t_dn - t_up
    }

    #[test]
    fn ideal_rectangle() {
        let env = square_pulse(&grid(), ps(100.0), ps(130.0), 0.0, 0.0, ghz(1.0)).unwrap();
        let on: Vec<usize> = (0..env.grid.n).filter(|&k| env.values[k] > 0.0).collect();
        // Edges fall on half-cells: 100 ps and 230 ps samples carry half weight.
        assert_eq!(on.first(), Some(&100));
        assert_eq!(on.last(), Some(&230));
        assert!((env.values[100] - 0.5 * ghz(1.0)).abs() < 1e-3);
        assert!(env.values[101..230].iter().all(|v| (*v - ghz(1.0)).abs() < 1e-3));
        assert!((fwhm(&env) - ps(130.0)).abs() <= env.grid.dt);
        assert_eq!(env.values[0], 0.0);
    }

    #[test]
    fn ramped_square_fwhm() {
        let env = square_pulse(&grid(), ps(50.0), ps(130.0), ps(15.0), ps(15.0), ghz(1.0)).unwrap();
        assert!((fwhm(&env) - ps(130.0)).abs() <= env.grid.dt);
        assert!((env.peak() - ghz(1.0)).abs() < 1e-9 * ghz(1.0));
        assert!((env.meta.drive_end() - ps(195.0)).abs() < 1e-18);
    }

    #[test]
    fn zero_peak_is_zero() {
        let env = square_pulse(&grid(), ps(50.0), ps(130.0), ps(15.0), ps(15.0), 0.0).unwrap();
        assert!(env.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn square_outside_grid_is_a_range_error() {
        let r = square_pulse(&grid(), ps(2900.0), ps(130.0), 0.0, 0.0, 1.0);
        assert!(matches!(r, Err(Error::Range(_))));
        let r = square_pulse(&grid(), ps(-10.0), ps(130.0), 0.0, 0.0, 1.0);
        assert!(matches!(r, Err(Error::Range(_))));
        assert!(square_pulse(&grid(), 0.0, ps(130.0), 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn etalon_decay_time() {
        let rect = square_pulse(&grid(), ps(10.0), ps(130.0), 0.0, 0.0, ghz(1.0)).unwrap();
        let filtered = etalon_filtered_pulse(&rect, 600e6).unwrap();
        assert!((filtered.peak() - ghz(1.0)).abs() < 1e-12 * ghz(1.0));
        // After the drive stops the amplitude decays with 1/e time 1/(π·600 MHz).
        let (k1, k2) = (600, 1600);
        let rate = (filtered.values[k1] / filtered.values[k2]).ln() / (ps(1000.0));
        let tau = 1.0 / rate;
        assert!((tau - 1.0 / (std::f64::consts::PI * 6e8)).abs() < 1e-15);
        assert!((tau * 1e12 - 530.5).abs() < 0.1);
    }

    #[test]
    fn etalon_all_pass_limit() {
        let input = square_pulse(&grid(), ps(100.0), ps(300.0), ps(40.0), ps(40.0), ghz(1.0)).unwrap();
        let out = etalon_filtered_pulse(&input, 1e16).unwrap();
        for (a, b) in input.values.iter().zip(&out.values) {
            assert!((a - b).abs() <= 0.01 * ghz(1.0));
        }
    }

    #[test]
    fn etalon_of_zero_is_zero() {
        let out = etalon_filtered_pulse(&PulseEnvelope::zero(grid()), 6e8).unwrap();
        assert!(out.values.iter().all(|v| *v == 0.0));
        assert!(etalon_filtered_pulse(&PulseEnvelope::zero(grid()), 0.0).is_err());
    }

    #[test]
    fn etalon_is_causal() {
        let input = square_pulse(&grid(), ps(100.0), ps(130.0), 0.0, 0.0, ghz(1.0)).unwrap();
        let mut perturbed = input.clone();
        for v in &mut perturbed.values[1500..1700] {
            *v += ghz(3.0);
        }
        // The peak normalization differs, so compare shapes up to one factor.
        let a = etalon_filtered_pulse(&input, 6e8).unwrap();
        let b = etalon_filtered_pulse(&perturbed, 6e8).unwrap();
        let ratio = b.values[200] / a.values[200];
        for k in 0..1500 {
            assert!((a.values[k] * ratio - b.values[k]).abs() < 1e-9 * ghz(1.0));
        }
        assert!((a.values[1600] * ratio - b.values[1600]).abs() > 1e-3 * ghz(1.0));
    }

    #[test]
    fn cw_is_flat_after_turn_on() {
        let env = cw_pulse(&grid(), ps(20.0), ps(10.0), ghz(1.0)).unwrap();
        assert_eq!(env.values[0], 0.0);
        assert!(env.values[31..].iter().all(|v| (*v - ghz(1.0)).abs() < 1e-6));
    }

    #[test]
    fn power_conversion() {
        let cal = PowerCalibration::new(2.0).unwrap();
        assert_eq!(power_to_rabi(0.0, &cal).unwrap(), 0.0);
        let a = power_to_rabi(1e-9, &cal).unwrap();
        let b = power_to_rabi(4e-9, &cal).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert!(power_to_rabi(-1.0, &cal).is_err());
        assert!(PowerCalibration::new(0.0).is_err());
        let cal = PowerCalibration::from_reference(1e-8, ghz(1.0)).unwrap();
        assert!((power_to_rabi(1e-8, &cal).unwrap() - ghz(1.0)).abs() < 1e-3);
    }

    #[test]
    fn load_rectangle() {
        let samples = parse_envelope_file("# t I\n0.1 1\n0.3 1\n").unwrap();
        let env = load_envelope(&grid(), &samples, ghz(1.0)).unwrap();
        assert_eq!(env.values[99], 0.0);
        assert!(env.values[100..=300].iter().all(|v| (*v - ghz(1.0)).abs() < 1e-6));
        assert_eq!(env.values[301], 0.0);
    }

    #[test]
    fn load_triangle_takes_square_root() {
        let text = "0.1 0\n0.2 1\n0.3 0\n";
        let env = load_envelope(&grid(), &parse_envelope_file(text).unwrap(), ghz(2.0)).unwrap();
        for k in 100..=300 {
            let t_ns = k as f64 * 1e-3;
            let tri = 1.0 - ((t_ns - 0.2) / 0.1).abs();
            let expected = ghz(2.0) * tri.max(0.0).sqrt();
            assert!((env.values[k] - expected).abs() < 1e-6 * ghz(2.0), "k={k}");
        }
        assert!((env.peak() - ghz(2.0)).abs() < 1e-6);
    }

    #[test]
    fn load_rejects_bad_input() {
        assert!(matches!(parse_envelope_file(""), Err(Error::Format(_))));
        let backwards = parse_envelope_file("0.2 1\n0.1 1\n").unwrap();
        assert!(matches!(load_envelope(&grid(), &backwards, 1.0), Err(Error::Format(_))));
        let one = parse_envelope_file("0.2 1\n").unwrap();
        assert!(matches!(load_envelope(&grid(), &one, 1.0), Err(Error::Format(_))));
        let at_start = parse_envelope_file("0.0 1\n0.2 1\n").unwrap();
        assert!(matches!(load_envelope(&grid(), &at_start, 1.0), Err(Error::Range(_))));
    }

    #[test]
    fn grid_helpers() {
        let g = TimeGrid::spanning(0.0, 1e-9, 5e-12).unwrap();
        assert_eq!(g.n, 201);
        assert!((g.end() - 1e-9).abs() < 1e-21);
        assert_eq!(g.index_of(0.5e-9), Some(100));
        assert_eq!(g.index_of(2e-9), None);
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
    }

    proptest! {
        #[test]
        fn square_root_law(p in 0.0..1e-6f64, a in 0.0..10.0f64, c in 1e3..1e12f64) {
            let cal = PowerCalibration::new(c).unwrap();
            let lhs = power_to_rabi(a * a * p, &cal).unwrap();
            let rhs = a * power_to_rabi(p, &cal).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }

        #[test]
        fn envelopes_are_nonnegative_and_finite(
            start in 1.0..500.0f64, dur in 40.0..800.0f64, rise in 0.0..40.0f64,
            fall in 0.0..40.0f64, peak in 0.0..5.0f64, bw in 1e8..1e11f64,
        ) {
            let sq = square_pulse(&grid(), ps(start), ps(dur), ps(rise), ps(fall), ghz(peak)).unwrap();
            let et = etalon_filtered_pulse(&sq, bw).unwrap();
            for env in [&sq, &et] {
                prop_assert!(env.values.iter().all(|v| v.is_finite() && *v >= 0.0));
                prop_assert!((env.peak() - ghz(peak)).abs() <= 1e-9 * ghz(peak).max(1.0));
                prop_assert_eq!(env.values[0], 0.0);
            }
        }
    }
}
