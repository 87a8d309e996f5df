//! Lindblad propagation with an adaptive Dormand–Prince 5(4) integrator.
//!
//! The state is the 2×2 operator flattened into 8 reals. Collapse channels are
//! `√γ_QD·σ_-` and `√γ_z·σ_z`; the right-hand side is written out in closed
//! form, which keeps the inner loop free of matrix products. Because the map is
//! linear the same code propagates arbitrary operators (for the regression
//! theorem) and the 4×4 step superoperators.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{bloch_components, BlochVector, ComplexMatrix2, DensityState, SuperOperator, C64};
use crate::model::{hamiltonian_coefficients, SystemParams};
use crate::pulses::{PulseEnvelope, PulseMeta, TimeGrid};

const MIN_STEP: f64 = 1e-20;
const MAX_STEPS_PER_OUTPUT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest internal step, s.
    pub max_step: f64,
    /// Spacing of the returned samples, s.
    pub output_dt: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_step: 10e-12,
            output_dt: 1e-12,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::param("tolerance", "tolerances must be > 0"));
        }
        if !(self.max_step > MIN_STEP) {
            return Err(Error::param("max_step", "must exceed the minimum step"));
        }
        if !(self.output_dt >= MIN_STEP) || !self.output_dt.is_finite() {
            return Err(Error::param("output_dt", "must be finite and ≥ the minimum step"));
        }
        Ok(())
    }
}

/// Samples of one propagation on a uniform output grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub occupancy: Vec<f64>,
    pub bloch: Vec<BlochVector>,
    /// `Tr ρ − 1`.
    pub trace_error: Vec<f64>,
    /// Smallest eigenvalue of ρ.
    pub min_eigenvalue: Vec<f64>,
    pub states: Vec<ComplexMatrix2>,
    pub params_snapshot: SystemParams,
    pub envelope_meta: PulseMeta,
}

impl Trajectory {
    pub(crate) fn from_states(
        grid: TimeGrid,
        states: Vec<ComplexMatrix2>,
        params: SystemParams,
        meta: PulseMeta,
    ) -> Self {
        let occupancy = states.iter().map(|m| m.m[1][1].re).collect();
        let bloch = states.iter().map(bloch_components).collect();
        let trace_error = states.iter().map(|m| m.trace().re - 1.0).collect();
        let min_eigenvalue = states
            .iter()
            .map(|m| {
                // symmetrize first: integration leaves ~1e-16 anti-Hermitian residue
                let h = (*m + m.adjoint()).scale_re(0.5);
                h.hermitian_eigenvalues()[0]
            })
            .collect();
        Self {
            grid,
            occupancy,
            bloch,
            trace_error,
            min_eigenvalue,
            states,
            params_snapshot: params,
            envelope_meta: meta,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    pub fn state(&self, k: usize) -> DensityState {
        DensityState::from_matrix_unchecked(self.states[k])
    }

    pub fn max_trace_error(&self) -> f64 {
        self.trace_error.iter().fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.min_eigenvalue.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// An operator evolved under the Lindblad map from `grid.t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorTrajectory {
    pub grid: TimeGrid,
    pub values: Vec<ComplexMatrix2>,
}

/// Time-dependent Lindblad generator for one parameter set and envelope.
#[derive(Clone, Copy)]
pub struct Generator<'a> {
    pub params: &'a SystemParams,
    pub envelope: &'a PulseEnvelope,
}

impl Generator<'_> {
    /// `dX/dt` for `X` laid out as `[gg, ge, eg, ee]` real/imag pairs.
    #[inline]
    pub fn apply(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let p = self.params;
        let (hz, hx) = hamiltonian_coefficients(p, self.envelope.value_at(t), t);
        let g = p.gamma_qd;
        let coh = 0.5 * g + 2.0 * p.gamma_z;
        let (gg, ge, eg, ee) = (
            C64::new(x[0], x[1]),
            C64::new(x[2], x[3]),
            C64::new(x[4], x[5]),
            C64::new(x[6], x[7]),
        );
        let mi = C64::new(0.0, -1.0);
        let dgg = mi * hx * (eg - ge) + g * ee;
        let dge = mi * (-2.0 * hz * ge + hx * (ee - gg)) - coh * ge;
        let deg = mi * (2.0 * hz * eg + hx * (gg - ee)) - coh * eg;
        let dee = mi * hx * (ge - eg) - g * ee;
        out[0] = dgg.re;
        out[1] = dgg.im;
        out[2] = dge.re;
        out[3] = dge.im;
        out[4] = deg.re;
        out[5] = deg.im;
        out[6] = dee.re;
        out[7] = dee.im;
    }
}

fn flatten(m: &ComplexMatrix2, out: &mut [f64]) {
    let v = [m.m[0][0], m.m[0][1], m.m[1][0], m.m[1][1]];
    for (k, c) in v.iter().enumerate() {
        out[2 * k] = c.re;
        out[2 * k + 1] = c.im;
    }
}

fn unflatten(x: &[f64]) -> ComplexMatrix2 {
    ComplexMatrix2::new([
        [C64::new(x[0], x[1]), C64::new(x[2], x[3])],
        [C64::new(x[4], x[5]), C64::new(x[6], x[7])],
    ])
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `N` reals made of independent 8-real blocks, all driven by the
/// same generator, and calls `emit` at every requested output time.
struct Dopri<'a, const N: usize> {
    gen: Generator<'a>,
    cfg: SolverConfig,
    h: f64,
    k: [[f64; N]; 7],
}

impl<'a, const N: usize> Dopri<'a, N> {
    fn new(gen: Generator<'a>, cfg: SolverConfig) -> Self {
        Self {
            gen,
            cfg,
            h: cfg.max_step.min(cfg.output_dt),
            k: [[0.0; N]; 7],
        }
    }

    #[inline]
    fn eval(&self, t: f64, y: &[f64; N], out: &mut [f64; N]) {
        for b in 0..N / 8 {
            self.gen.apply(t, &y[8 * b..8 * b + 8], &mut out[8 * b..8 * b + 8]);
        }
    }

    /// Advances `y` from `t` to exactly `t_target`.
    fn advance(&mut self, t: &mut f64, y: &mut [f64; N], t_target: f64) -> Result<()> {
        let mut first_same_as_last = false;
        let mut steps = 0;
        let mut ytmp = [0.0; N];
        let mut ynew = [0.0; N];
        while *t < t_target {
            steps += 1;
            if steps > MAX_STEPS_PER_OUTPUT {
                return Err(Error::Integration {
                    time: *t,
                    reason: "too many steps for one output interval".into(),
                });
            }
            let remaining = t_target - *t;
            let mut h = self.h.min(self.cfg.max_step);
            let last = h >= remaining * (1.0 - 1e-12);
            if last {
                h = remaining;
            }
            if !first_same_as_last {
                let mut k0 = [0.0; N];
                self.eval(*t, y, &mut k0);
                self.k[0] = k0;
            }
            let k = &mut self.k;
            let mut stage = |coef: &[(usize, f64)], c: f64, dst: usize, this: &Generator| {
                for i in 0..N {
                    let mut s = y[i];
                    for &(j, a) in coef {
                        s += h * a * k[j][i];
                    }
                    ytmp[i] = s;
                }
                let mut out = [0.0; N];
                for b in 0..N / 8 {
                    this.apply(*t + c * h, &ytmp[8 * b..8 * b + 8], &mut out[8 * b..8 * b + 8]);
                }
                k[dst] = out;
            };
            let gen = self.gen;
            stage(&[(0, A21)], C2, 1, &gen);
            stage(&[(0, A31), (1, A32)], C3, 2, &gen);
            stage(&[(0, A41), (1, A42), (2, A43)], C4, 3, &gen);
            stage(&[(0, A51), (1, A52), (2, A53), (3, A54)], C5, 4, &gen);
            stage(&[(0, A61), (1, A62), (2, A63), (3, A64), (4, A65)], 1.0, 5, &gen);
            for i in 0..N {
                ynew[i] = y[i] + h * (B1 * k[0][i] + B3 * k[2][i] + B4 * k[3][i] + B5 * k[4][i] + B6 * k[5][i]);
            }
            let mut k6 = [0.0; N];
            self.eval(*t + h, &ynew, &mut k6);
            let k = &mut self.k;
            k[6] = k6;
            let mut err = 0.0;
            for i in 0..N {
                let e = h * (E1 * k[0][i] + E3 * k[2][i] + E4 * k[3][i] + E5 * k[4][i] + E6 * k[5][i] + E7 * k[6][i]);
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * y[i].abs().max(ynew[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / N as f64).sqrt();
            if !err.is_finite() {
                return Err(Error::Integration {
                    time: *t,
                    reason: "non-finite error estimate".into(),
                });
            }
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
            };
            if err <= 1.0 {
                *t = if last { t_target } else { *t + h };
                *y = ynew;
                k[0] = k[6];
                first_same_as_last = true;
                // a step shortened to land on the target should not shrink the next one
                if !last || factor > 1.0 {
                    self.h = (h * factor).min(self.cfg.max_step);
                }
            } else {
                first_same_as_last = true;
                self.h = h * factor.min(1.0);
                if self.h < MIN_STEP {
                    return Err(Error::Integration {
                        time: *t,
                        reason: format!("step size fell below {MIN_STEP:e} s"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Output grid from `t_start` to the envelope end with spacing `output_dt`.
fn output_grid(env: &PulseEnvelope, cfg: &SolverConfig, t_start: f64) -> Result<TimeGrid> {
    let end = env.grid.end();
    if !env.grid.contains(t_start) {
        return Err(Error::Range(format!(
            "start time {t_start:e} s outside the envelope grid"
        )));
    }
    let steps = ((end - t_start) / cfg.output_dt + 1e-6).floor() as usize;
    if steps == 0 {
        return Err(Error::Range("output window shorter than one output step".into()));
    }
    TimeGrid::new(t_start, cfg.output_dt, steps + 1)
}

fn evolve(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    init: &ComplexMatrix2,
    grid: &TimeGrid,
) -> Result<Vec<ComplexMatrix2>> {
    let gen = Generator {
        params: p,
        envelope: env,
    };
    let mut dp = Dopri::<8>::new(gen, *cfg);
    let mut y = [0.0; 8];
    flatten(init, &mut y);
    let mut t = grid.t0;
    let mut out = Vec::with_capacity(grid.n);
    out.push(*init);
    for k in 1..grid.n {
        dp.advance(&mut t, &mut y, grid.time(k))?;
        out.push(unflatten(&y));
    }
    Ok(out)
}

/// Solves the master equation from the envelope's first grid point and samples
/// ρ every `cfg.output_dt` up to the envelope's last grid point.
pub fn propagate(p: &SystemParams, env: &PulseEnvelope, cfg: &SolverConfig, init: &DensityState) -> Result<Trajectory> {
    p.validate()?;
    cfg.validate()?;
    let grid = output_grid(env, cfg, env.grid.t0)?;
    let states = evolve(p, env, cfg, init.matrix(), &grid)?;
    Ok(Trajectory::from_states(grid, states, *p, env.meta))
}

/// Evolves an arbitrary operator (e.g. `σ_-ρ`) from `t_start` under the same
/// Lindblad map.
pub fn propagate_conditional(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    init_operator: &ComplexMatrix2,
    t_start: f64,
) -> Result<OperatorTrajectory> {
    p.validate()?;
    cfg.validate()?;
    let grid = output_grid(env, cfg, t_start)?;
    let values = evolve(p, env, cfg, init_operator, &grid)?;
    Ok(OperatorTrajectory { grid, values })
}

/// Propagator `E(t_{k+1}, t_k)` for every interval of `grid`, computed in
/// parallel. Entry `k` maps operators at `grid.time(k)` to `grid.time(k+1)`.
pub fn step_superoperators(
    p: &SystemParams,
    env: &PulseEnvelope,
    cfg: &SolverConfig,
    grid: &TimeGrid,
) -> Result<Vec<SuperOperator>> {
    p.validate()?;
    cfg.validate()?;
    if !env.grid.contains(grid.t0) || !env.grid.contains(grid.end()) {
        return Err(Error::Range("superoperator grid outside the envelope grid".into()));
    }
    let gen = Generator {
        params: p,
        envelope: env,
    };
    (0..grid.n - 1)
        .into_par_iter()
        .map(|k| interval_superoperator(gen, cfg, grid.time(k), grid.time(k + 1)))
        .collect()
}

fn interval_superoperator(gen: Generator, cfg: &SolverConfig, t0: f64, t1: f64) -> Result<SuperOperator> {
    let mut dp = Dopri::<32>::new(gen, *cfg);
    let mut y = [0.0; 32];
    for j in 0..4 {
        flatten(&SuperOperator::basis(j), &mut y[8 * j..8 * j + 8]);
    }
    let mut t = t0;
    dp.advance(&mut t, &mut y, t1)?;
    let cols = [
        unflatten(&y[0..8]),
        unflatten(&y[8..16]),
        unflatten(&y[16..24]),
        unflatten(&y[24..32]),
    ];
    Ok(SuperOperator::from_columns(cols))
}
