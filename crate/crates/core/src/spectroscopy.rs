//! Spectra and filtered photon signals from two-time correlations.
//!
//! Correlations follow the quantum regression rule
//! `G(t1, t2) = ⟨σ_+(t2)σ_-(t1)⟩ = Tr[σ_+ E(t2, t1)(σ_- ρ(t1))]` for `t2 ≥ t1`,
//! evaluated with the step propagators of [`step_superoperators`].
//!
//! Frequency convention: a rotating-frame component `e^{-iνt}` of `⟨σ_-⟩`
//! belongs to a photon at `Δ_pump + ν` on the detuning axis, so that the bare
//! emitter line sits at 0 and the laser at `Δ_pump`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix2, DensityState, SuperOperator, C64};
use crate::model::SystemParams;
use crate::pulses::{PulseEnvelope, ShapeTag, TimeGrid};
use crate::solver::{step_superoperators, SolverConfig};

const NEG_TOL: f64 = 1e-9;

/// Single-pole Lorentzian detection filter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    /// Passband centre on the detuning axis, rad/s.
    pub center_detuning: f64,
    /// Full width at half maximum δf, Hz.
    pub bandwidth_fwhm: f64,
}

impl FilterSpec {
    pub fn new(center_detuning: f64, bandwidth_fwhm: f64) -> Result<Self> {
        let f = Self {
            center_detuning,
            bandwidth_fwhm,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_fwhm > 0.0) || !self.bandwidth_fwhm.is_finite() {
            return Err(Error::param("bandwidth_fwhm", "must be finite and > 0"));
        }
        if !self.center_detuning.is_finite() {
            return Err(Error::param("center_detuning", "must be finite"));
        }
        Ok(())
    }

    /// Amplitude decay rate πδf of the impulse response.
    pub fn half_width(&self) -> f64 {
        std::f64::consts::PI * self.bandwidth_fwhm
    }
}

/// A delta-like spectral component (elastic scattering into one harmonic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    pub order: i32,
    pub detuning: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumData {
    pub detuning_axis: Vec<f64>,
    pub intensity: Vec<f64>,
    pub coherent: Option<Vec<f64>>,
    pub incoherent: Option<Vec<f64>>,
    /// Elastic lines before binning onto the axis.
    pub coherent_lines: Vec<SpectralLine>,
    /// Number of slightly negative samples set to zero.
    pub clipped: usize,
    /// Most negative raw sample (0 when nothing was clipped).
    pub min_raw: f64,
}

impl SpectrumData {
    fn from_raw(axis: Vec<f64>, raw: Vec<f64>) -> Self {
        let (intensity, clipped, min_raw) = clip(raw);
        Self {
            detuning_axis: axis,
            intensity,
            coherent: None,
            incoherent: None,
            coherent_lines: Vec::new(),
            clipped,
            min_raw,
        }
    }
}

fn clip(raw: Vec<f64>) -> (Vec<f64>, usize, f64) {
    let mut clipped = 0;
    let mut min_raw = 0.0f64;
    let out = raw
        .into_iter()
        .map(|v| {
            if v < 0.0 {
                clipped += 1;
                min_raw = min_raw.min(v);
                0.0
            } else {
                v
            }
        })
        .collect();
    (out, clipped, min_raw)
}

/// Dense `G(t1, t2)` on a square grid, row index `t1`.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationGrid {
    pub grid: TimeGrid,
    pub values: Vec<C64>,
}

impl CorrelationGrid {
    pub fn get(&self, i1: usize, i2: usize) -> C64 {
        self.values[i1 * self.grid.n + i2]
    }
}

fn sigma_minus_times(rho: &ComplexMatrix2) -> ComplexMatrix2 {
    ComplexMatrix2::sigma_minus() * *rho
}

/// `Tr[σ_+ X]`.
fn sigma_plus_trace(x: &ComplexMatrix2) -> C64 {
    x.m[0][1]
}

fn excited_population(x: &ComplexMatrix2) -> f64 {
    x.m[1][1].re
}

/// Step propagators and states on a uniform grid, shared by every
/// correlation-based observable.
#[derive(Debug, Clone)]
pub struct GridDynamics {
    pub grid: TimeGrid,
    pub steps: Vec<SuperOperator>,
    pub states: Vec<ComplexMatrix2>,
    pub gamma_qd: f64,
    pub delta_pump: f64,
}

impl GridDynamics {
    /// Builds the propagators on `grid` and evolves `init` from `grid.t0`.
    pub fn prepare(
        p: &SystemParams,
        env: &PulseEnvelope,
        cfg: &SolverConfig,
        grid: &TimeGrid,
        init: &DensityState,
    ) -> Result<Self> {
        if grid.n < 2 {
            return Err(Error::param("grid", "needs at least two points"));
        }
        let steps = step_superoperators(p, env, cfg, grid)?;
        let mut states = Vec::with_capacity(grid.n);
        states.push(*init.matrix());
        for s in &steps {
            let next = s.apply(states.last().unwrap());
            states.push(next);
        }
        Ok(Self {
            grid: *grid,
            steps,
            states,
            gamma_qd: p.gamma_qd,
            delta_pump: p.delta,
        })
    }

    pub fn occupancy(&self) -> Vec<f64> {
        self.states.iter().map(excited_population).collect()
    }

    /// Full correlation matrix; rows are computed in parallel.
    pub fn correlation(&self) -> CorrelationGrid {
        let n = self.grid.n;
        let rows: Vec<Vec<C64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut row = vec![C64::new(0.0, 0.0); n - i];
                let mut lam = sigma_minus_times(&self.states[i]);
                row[0] = sigma_plus_trace(&lam);
                for (j, r) in row.iter_mut().enumerate().skip(1) {
                    lam = self.steps[i + j - 1].apply(&lam);
                    *r = sigma_plus_trace(&lam);
                }
                row
            })
            .collect();
        let mut values = vec![C64::new(0.0, 0.0); n * n];
        for (i, row) in rows.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                values[i * n + i + j] = *v;
                values[(i + j) * n + i] = v.conj();
            }
            values[i * n + i] = C64::new(values[i * n + i].re, 0.0);
        }
        CorrelationGrid {
            grid: self.grid,
            values,
        }
    }

    /// Walks `Λ_n = k·E_{n-1}Λ_{n-1} + σ_-ρ_n` and returns
    /// `X_n = Tr[σ_+ E_{n-1}Λ_{n-1}] = Σ_{m<n} k^{n-1-m} G(m, n)` (`X_0 = 0`).
    fn weighted_sums(&self, k: C64) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.grid.n);
        let mut lam = sigma_minus_times(&self.states[0]);
        out.push(C64::new(0.0, 0.0));
        for n in 1..self.grid.n {
            let prop = self.steps[n - 1].apply(&lam);
            out.push(sigma_plus_trace(&prop));
            lam = prop.scale(k) + sigma_minus_times(&self.states[n]);
        }
        out
    }

    /// `Σ_{m,n} G(m, n) w^{n-m}` over the whole grid with `|w| ≤ 1`.
    fn toeplitz_sum(&self, w: C64) -> f64 {
        let x = self.weighted_sums(w);
        let occ: f64 = self.states.iter().map(excited_population).sum();
        // Σ_{m≤n} w^{n-m} G(m,n) = Σ_n (w·X_n + occ_n)
        let upper: C64 = x.iter().map(|v| v * w).sum::<C64>() + occ;
        2.0 * upper.re - occ
    }

    /// Photon rate behind `filter` at every grid time.
    pub fn filtered_signal(&self, filter: &FilterSpec) -> Result<FilteredSignal> {
        filter.validate()?;
        let dt = self.grid.dt;
        let nu = filter.center_detuning - self.delta_pump;
        let mut warnings = Vec::new();
        if nu.abs() > std::f64::consts::PI / dt {
            warnings.push(format!(
                "filter centre {:.4e} rad/s lies outside the simulated band ±{:.4e} rad/s",
                filter.center_detuning,
                std::f64::consts::PI / dt
            ));
        }
        let a = filter.half_width();
        let kf = (C64::new(-a, -nu) * dt).exp();
        let c = a * dt;
        let x = self.weighted_sums(kf);
        let mut b = 0.0;
        let mut raw = Vec::with_capacity(self.grid.n);
        for (n, xn) in x.iter().enumerate() {
            let occ = excited_population(&self.states[n]);
            b = kf.norm_sqr() * b + c * c * (2.0 * (kf * xn).re + occ);
            // trapezoidal end-point correction a_n = b_n − (c/2)σ_n
            let f = (kf * xn + occ) * c;
            raw.push(self.gamma_qd * (b - c * f.re + 0.25 * c * c * occ));
        }
        let (intensity, clipped, min_raw) = clip_tol(raw)?;
        Ok(FilteredSignal {
            grid: self.grid,
            intensity,
            filter: *filter,
            clipped,
            min_raw,
            warnings,
        })
    }

    /// Time integral of the filtered rate for a filter of width `bandwidth`
    /// centred at each axis point.
    pub fn integrated_filtered_spectrum(&self, bandwidth: f64, axis: &[f64]) -> Result<SpectrumData> {
        FilterSpec::new(0.0, bandwidth)?;
        let a = std::f64::consts::PI * bandwidth;
        let dt = self.grid.dt;
        let raw: Vec<f64> = axis
            .par_iter()
            .map(|x| {
                let nu = x - self.delta_pump;
                let w = (C64::new(-a, -nu) * dt).exp();
                self.gamma_qd * 0.5 * a * dt * dt * self.toeplitz_sum(w)
            })
            .collect();
        Ok(SpectrumData::from_raw(axis.to_vec(), raw))
    }

    /// Unfiltered emission spectrum `γ ∬ G(t1,t2) e^{-iν(t2−t1)}`. Averaged
    /// over a full Nyquist band of more than `n` equispaced points it returns
    /// `γ·dt·Σ occupancy` exactly.
    pub fn emission_spectrum(&self, axis: &[f64]) -> SpectrumData {
        let dt = self.grid.dt;
        let raw: Vec<f64> = axis
            .par_iter()
            .map(|x| {
                let nu = x - self.delta_pump;
                let w = C64::new(0.0, -nu * dt).exp();
                self.gamma_qd * dt * dt * self.toeplitz_sum(w)
            })
            .collect();
        SpectrumData::from_raw(axis.to_vec(), raw)
    }
}

fn clip_tol(raw: Vec<f64>) -> Result<(Vec<f64>, usize, f64)> {
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (out, clipped, min_raw) = clip(raw);
    if min_raw < -NEG_TOL * scale.max(1.0) {
        return Err(Error::Analysis(format!(
            "filtered intensity went negative ({min_raw:.3e})"
        )));
    }
    Ok((out, clipped, min_raw))
}

/// Photon rate behind a filter, one value per grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilteredSignal {
    pub grid: TimeGrid,
    pub intensity: Vec<f64>,
    pub filter: FilterSpec,
    pub clipped: usize,
    pub min_raw: f64,
    pub warnings: Vec<String>,
}

/// `G(t1, t2)` on `grid`, starting from `init` at `grid.t0`.
pub fn two_time_correlation(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    grid: &TimeGrid,
    init: &DensityState,
) -> Result<CorrelationGrid> {
    Ok(GridDynamics::prepare(p, env, cfg, grid, init)?.correlation())
}

/// Filtered photon rate on the envelope's own grid, starting from `|g⟩`.
pub fn filtered_time_signal(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    filter: &FilterSpec,
) -> Result<FilteredSignal> {
    GridDynamics::prepare(p, env, cfg, &env.grid, &DensityState::ground())?.filtered_signal(filter)
}

/// Filter-integrated photon number versus filter centre, starting from `|g⟩`.
pub fn integrated_filtered_spectrum(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    bandwidth: f64,
    axis: &[f64],
) -> Result<SpectrumData> {
    GridDynamics::prepare(p, env, cfg, &env.grid, &DensityState::ground())?
        .integrated_filtered_spectrum(bandwidth, axis)
}

/// `−d ln I/dt` from a straight-line fit of `ln I` on `[t_from, t_to]`.
pub fn log_decay_rate(grid: &TimeGrid, values: &[f64], t_from: f64, t_to: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = (0..grid.n)
        .map(|k| (grid.time(k), values[k]))
        .filter(|(t, v)| *t >= t_from && *t <= t_to && *v > 0.0)
        .map(|(t, v)| (t, v.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(
            "fewer than three positive samples in the fit window".into(),
        ));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// Settings of the continuous-wave spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CwSpectrumOptions {
    /// Correlation window in τ, s.
    pub window: f64,
    /// Samples per SAW period (sets the τ step).
    pub n_period_samples: usize,
    /// Extra exponential apodization rate applied to the incoherent part;
    /// `None` uses γ/2.
    pub apodization: Option<f64>,
    /// Axis half-span around the pump, rad/s.
    pub half_span: f64,
    /// Axis bin, rad/s.
    pub bin: f64,
    /// Highest harmonic order kept in the coherent line list.
    pub max_order: i32,
}

impl Default for CwSpectrumOptions {
    fn default() -> Self {
        Self {
            window: 20e-9,
            n_period_samples: 32,
            apodization: None,
            half_span: crate::units::ghz(12.0),
            bin: crate::units::ghz(0.05),
            max_order: 4,
        }
    }
}

/// Periodic quasi-steady state under constant drive: one state per sample
/// within a SAW period, plus the per-sample propagators.
#[derive(Debug, Clone)]
pub struct PeriodicSteadyState {
    pub dt: f64,
    pub steps: Vec<SuperOperator>,
    pub states: Vec<ComplexMatrix2>,
    /// Periods evolved before the first sample.
    pub periods: usize,
}

impl PeriodicSteadyState {
    pub fn mean_occupancy(&self) -> f64 {
        self.states.iter().map(excited_population).sum::<f64>() / self.states.len() as f64
    }
}

/// Evolves from `|g⟩` for at least `10/(γ+γ_z)`, then iterates the one-period
/// map until it stops changing.
pub fn periodic_steady_state(
    p: &SystemParams,
    rabi0: f64,
    cfg: &SolverConfig,
    n_period_samples: usize,
) -> Result<PeriodicSteadyState> {
    p.validate()?;
    if n_period_samples < 4 {
        return Err(Error::param("n_period_samples", "must be ≥ 4"));
    }
    if !rabi0.is_finite() || rabi0 < 0.0 {
        return Err(Error::param("rabi0", "must be finite and ≥ 0"));
    }
    let relax = p.gamma_qd + p.gamma_z;
    if !(relax > 0.0) {
        return Err(Error::Convergence(
            "no damping: the driven system has no steady state".into(),
        ));
    }
    let period = p.saw_period();
    let dt = period / n_period_samples as f64;
    let grid = TimeGrid::new(0.0, dt, n_period_samples + 1)?;
    let mut env = PulseEnvelope::zero(grid);
    env.values.iter_mut().for_each(|v| *v = rabi0);
    env.meta.shape = ShapeTag::Constant;
    env.meta.peak_rabi = rabi0;
    let steps = step_superoperators(p, &env, cfg, &grid)?;
    let one_period = steps.iter().fold(SuperOperator::identity(), |acc, s| s.compose(&acc));

    let settle = (10.0 / (relax * period)).ceil() as usize;
    let max_periods = 2_000_000usize;
    if settle > max_periods {
        return Err(Error::Convergence(format!("damping too weak: {settle} periods needed")));
    }
    let mut rho = ComplexMatrix2::ground();
    let mut periods = 0;
    for _ in 0..settle {
        rho = one_period.apply(&rho);
        periods += 1;
    }
    // fixed point of the one-period map
    loop {
        if periods >= max_periods {
            return Err(Error::Convergence(format!(
                "no periodic steady state within {max_periods} periods"
            )));
        }
        let next = one_period.apply(&rho);
        periods += 1;
        let done = next.max_abs_diff(&rho) < 1e-14;
        rho = next;
        if done {
            break;
        }
    }
    let mut states = Vec::with_capacity(n_period_samples);
    states.push(rho);
    for s in steps.iter().take(n_period_samples - 1) {
        let next = s.apply(states.last().unwrap());
        states.push(next);
    }
    Ok(PeriodicSteadyState {
        dt,
        steps,
        states,
        periods,
    })
}

/// Scattering spectrum under continuous drive, split into elastic lines at
/// `Δ_pump + k·ω_SAW` and an incoherent continuum.
pub fn cw_scattering_spectrum(
    p: &SystemParams,
    rabi0: f64,
    cfg: &SolverConfig,
    opts: &CwSpectrumOptions,
) -> Result<SpectrumData> {
    if !(opts.window > 0.0) || !(opts.bin > 0.0) || !(opts.half_span > opts.bin) {
        return Err(Error::param(
            "cw spectrum options",
            "window, bin and span must be positive",
        ));
    }
    let pss = periodic_steady_state(p, rabi0, cfg, opts.n_period_samples)?;
    let m = opts.n_period_samples;
    let dt = pss.dt;

    // elastic part: harmonics of ⟨σ_-⟩ over one period
    let s: Vec<C64> = pss.states.iter().map(|r| r.m[1][0]).collect();
    let mut lines = Vec::new();
    for k in -opts.max_order..=opts.max_order {
        let a: C64 = s
            .iter()
            .enumerate()
            .map(|(j, v)| v * C64::new(0.0, k as f64 * p.omega_saw * j as f64 * dt).exp())
            .sum::<C64>()
            / m as f64;
        lines.push(SpectralLine {
            order: k,
            detuning: p.delta + k as f64 * p.omega_saw,
            weight: p.gamma_qd * a.norm_sqr(),
        });
    }

    // incoherent part: period-averaged G(t1, t1+τ) − ⟨σ_+(t1+τ)⟩⟨σ_-(t1)⟩
    let n_tau = (opts.window / dt).ceil() as usize + 1;
    let g_inc: Vec<C64> = (0..m)
        .into_par_iter()
        .map(|j| {
            let rho = pss.states[j];
            let mut lam = sigma_minus_times(&rho) - rho.scale(s[j]);
            let mut row = Vec::with_capacity(n_tau);
            row.push(sigma_plus_trace(&lam));
            for k in 1..n_tau {
                lam = pss.steps[(j + k - 1) % m].apply(&lam);
                row.push(sigma_plus_trace(&lam));
            }
            row
        })
        .reduce(
            || vec![C64::new(0.0, 0.0); n_tau],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                a
            },
        )
        .into_iter()
        .map(|v| v / m as f64)
        .collect();
    let apod = opts.apodization.unwrap_or(0.5 * p.gamma_qd);

    let n_bins = (2.0 * opts.half_span / opts.bin).round() as usize + 1;
    let axis: Vec<f64> = (0..n_bins)
        .map(|i| p.delta - opts.half_span + i as f64 * opts.bin)
        .collect();
    let incoherent: Vec<f64> = axis
        .par_iter()
        .map(|x| {
            let nu = x - p.delta;
            let mut acc = C64::new(0.0, 0.0);
            for (k, g) in g_inc.iter().enumerate() {
                let tau = k as f64 * dt;
                let w = if k == 0 || k == n_tau - 1 { 0.5 } else { 1.0 };
                acc += g * C64::new(-apod * tau, -nu * tau).exp() * w;
            }
            p.gamma_qd * 2.0 * acc.re * dt
        })
        .collect();
    let (incoherent, clipped, min_raw) = clip(incoherent);

    let mut coherent = vec![0.0; n_bins];
    for l in &lines {
        let idx = ((l.detuning - axis[0]) / opts.bin).round();
        if idx >= 0.0 && (idx as usize) < n_bins {
            coherent[idx as usize] += l.weight / opts.bin * std::f64::consts::TAU;
        }
    }
    let intensity = coherent.iter().zip(&incoherent).map(|(a, b)| a + b).collect();
    Ok(SpectrumData {
        detuning_axis: axis,
        intensity,
        coherent: Some(coherent),
        incoherent: Some(incoherent),
        coherent_lines: lines,
        clipped,
        min_raw,
    })
}

/// Total scattered rate `γ·⟨ρ_ee⟩_period` in the quasi-steady state for each
/// pump detuning.
pub fn excitation_spectrum(
    p: &SystemParams,
    rabi0: f64,
    cfg: &SolverConfig,
    delta_axis: &[f64],
    n_period_samples: usize,
) -> Result<SpectrumData> {
    if delta_axis.iter().any(|d| !d.is_finite()) {
        return Err(Error::param("delta_axis", "must be finite"));
    }
    let raw: Vec<f64> = delta_axis
        .par_iter()
        .map(|d| {
            let q = SystemParams { delta: *d, ..*p };
            if rabi0 == 0.0 {
                q.validate()?;
                return Ok(0.0);
            }
            Ok(p.gamma_qd * periodic_steady_state(&q, rabi0, cfg, n_period_samples)?.mean_occupancy())
        })
        .collect::<Result<_>>()?;
    Ok(SpectrumData::from_raw(delta_axis.to_vec(), raw))
}

/// Uniform axis `[lo, hi]` with `n` points.
pub fn linear_axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}
