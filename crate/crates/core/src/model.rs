//! Physical parameters and Hamiltonians of the modulated two-level emitter.
//!
//! In the frame rotating at the pump frequency, with the mechanical drive and
//! the optical drive both treated classically,
//!
//! ```text
//! H(t)/ħ = ½[−Δ + g·cos(ω_SAW·t + φ)]·σ_z + ½Ω₀(t)·σ_x
//! ```
//!
//! The reduced "ladder" models replace the modulation by two independent
//! two-level problems: the direct channel `(Ω₀, Δ)` and the phonon-assisted
//! channel `(Γ, 0)` with `Γ = g₀Ω₀√n / ω_SAW`.
//!
//! Two conventions are carried over verbatim and flagged here because they
//! look suspicious:
//!
//! * The single-phonon rates are `Γ₋ = g₀Ω₀√(n+1)/ω_SAW` ("removing" a phonon)
//!   and `Γ₊ = g₀Ω₀√n/ω_SAW` ("adding" one). With ordinary ladder operators the
//!   √(n+1) factor belongs to phonon creation.
//! * The first-order Jacobi–Anger coupling of the full model is
//!   `Ω₀·J₁(g/ω_SAW) ≈ Ω₀·g/(2ω_SAW)`, half of `Γ`. See
//!   `experiments::sideband_rabi_oracle` for a direct measurement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix2, C64};

/// All rates and frequencies in rad/s; phase in rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Pump–emitter detuning Δ = ω_pump − ω_QD.
    pub delta: f64,
    pub omega_saw: f64,
    /// Semiclassical optomechanical coupling g = g₀√n.
    pub g: f64,
    /// Mechanical phase φ.
    pub phi: f64,
    /// Radiative decay rate.
    pub gamma_qd: f64,
    /// Pure dephasing rate (collapse operator √γ_z σ_z).
    pub gamma_z: f64,
    /// Single-phonon coupling rate.
    pub g0: Option<f64>,
    /// Mean phonon number.
    pub n_phonons: Option<f64>,
}

impl Default for SystemParams {
    /// Red-detuned operating point: Δ = −ω_SAW = −2π·3.5881 GHz, no modulation,
    /// no damping.
    fn default() -> Self {
        let omega_saw = crate::units::ghz(3.5881);
        Self {
            delta: -omega_saw,
            omega_saw,
            g: 0.0,
            phi: 0.0,
            gamma_qd: 0.0,
            gamma_z: 0.0,
            g0: None,
            n_phonons: None,
        }
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.delta,
            self.omega_saw,
            self.g,
            self.phi,
            self.gamma_qd,
            self.gamma_z,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("system", "non-finite value"));
        }
        if self.omega_saw <= 0.0 {
            return Err(Error::param("omega_saw", "must be > 0"));
        }
        if self.gamma_qd < 0.0 {
            return Err(Error::param("gamma_qd", "must be ≥ 0"));
        }
        if self.gamma_z < 0.0 {
            return Err(Error::param("gamma_z", "must be ≥ 0"));
        }
        if self.g < 0.0 {
            return Err(Error::param("g", "must be ≥ 0"));
        }
        if let Some(g0) = self.g0 {
            if !(g0 >= 0.0) {
                return Err(Error::param("g0", "must be ≥ 0"));
            }
        }
        if let Some(n) = self.n_phonons {
            if !(n >= 0.0) {
                return Err(Error::param("n_phonons", "must be ≥ 0"));
            }
        }
        if let (Some(g0), Some(n)) = (self.g0, self.n_phonons) {
            let implied = g0 * n.sqrt();
            let mismatch = if self.g > 0.0 {
                (self.g - implied).abs() / self.g
            } else {
                implied
            };
            if mismatch >= 1e-9 {
                return Err(Error::param("g", "inconsistent with g0·√n_phonons"));
            }
        }
        Ok(())
    }

    /// Sets `g0` and `n_phonons` and the implied `g = g0·√n`.
    pub fn with_phonons(mut self, g0: f64, n_phonons: f64) -> Self {
        self.g0 = Some(g0);
        self.n_phonons = Some(n_phonons);
        self.g = g0 * n_phonons.sqrt();
        self
    }

    /// Modulation index χ = g/ω_SAW.
    pub fn modulation_index(&self) -> f64 {
        self.g / self.omega_saw
    }

    pub fn saw_period(&self) -> f64 {
        std::f64::consts::TAU / self.omega_saw
    }
}

/// Coefficients `(h_z, h_x)` of `H/ħ = h_z σ_z + h_x σ_x` in the rotating frame.
#[inline]
pub fn hamiltonian_coefficients(p: &SystemParams, rabi: f64, t: f64) -> (f64, f64) {
    let hz = 0.5 * (-p.delta + p.g * (p.omega_saw * t + p.phi).cos());
    (hz, 0.5 * rabi)
}

/// Rotating-frame Hamiltonian (in rad/s) for a real envelope value `rabi_at_t`.
pub fn rotating_frame_hamiltonian(p: &SystemParams, rabi_at_t: f64, t: f64) -> Result<ComplexMatrix2> {
    p.validate()?;
    if !(rabi_at_t >= 0.0) {
        return Err(Error::param("rabi", "envelope must be real and ≥ 0"));
    }
    let (hz, hx) = hamiltonian_coefficients(p, rabi_at_t, t);
    Ok(ComplexMatrix2::sigma_z().scale_re(hz) + ComplexMatrix2::sigma_x().scale_re(hx))
}

/// Lab-frame Hamiltonian `½ω_QD σ_z + ½g cos(ω_SAW t + φ) σ_z + Ω₀ cos(ω_pump t) σ_x`.
///
/// Only used to check the frame transformation; nothing propagates with it.
pub fn lab_frame_hamiltonian(p: &SystemParams, omega_qd: f64, rabi: f64, t: f64) -> ComplexMatrix2 {
    let omega_pump = omega_qd + p.delta;
    let z = 0.5 * omega_qd + 0.5 * p.g * (p.omega_saw * t + p.phi).cos();
    ComplexMatrix2::sigma_z().scale_re(z) + ComplexMatrix2::sigma_x().scale_re(rabi * (omega_pump * t).cos())
}

/// Exact transformation `−iU·dU†/dt + U·H·U†` with `U = exp(iω_pump σ_z t/2)`,
/// before any rotating-wave approximation.
pub fn transform_to_pump_frame(h_lab: &ComplexMatrix2, omega_pump: f64, t: f64) -> ComplexMatrix2 {
    // σ_z = diag(−1, 1) ⇒ U = diag(e^{−iωt/2}, e^{iωt/2})
    let u = ComplexMatrix2::new([
        [C64::from_polar(1.0, -0.5 * omega_pump * t), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::from_polar(1.0, 0.5 * omega_pump * t)],
    ]);
    // −iU dU†/dt = −(ω/2)σ_z
    u * *h_lab * u.adjoint() - ComplexMatrix2::sigma_z().scale_re(0.5 * omega_pump)
}

/// Ω = √(Ω₀² + Δ²).
pub fn generalized_rabi(rabi0: f64, delta: f64) -> f64 {
    rabi0.hypot(delta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LadderChannel {
    Direct,
    Sideband,
}

/// An effective two-level problem of the phonon ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderParams {
    pub rabi: f64,
    pub detuning: f64,
    pub label: LadderChannel,
}

impl LadderParams {
    pub fn validate(&self) -> Result<()> {
        if self.label == LadderChannel::Sideband && self.detuning != 0.0 {
            return Err(Error::param("detuning", "sideband channel is resonant"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LadderModels {
    pub direct: LadderParams,
    pub sideband: LadderParams,
    /// `g₀Ω₀√(n+1)/ω_SAW`
    pub gamma_minus: f64,
    /// `g₀Ω₀√n/ω_SAW`
    pub gamma_plus: f64,
}

/// Direct `(Ω₀, Δ)` and phonon-assisted `(Γ, 0)` ladder channels.
pub fn ladder_models(p: &SystemParams, rabi0: f64) -> Result<LadderModels> {
    p.validate()?;
    let (g0, n) = match (p.g0, p.n_phonons) {
        (Some(g0), Some(n)) => (g0, n),
        _ => return Err(Error::Config("ladder models need both g0 and n_phonons".into())),
    };
    if !(rabi0 >= 0.0) {
        return Err(Error::param("rabi0", "must be ≥ 0"));
    }
    let gamma_plus = g0 * rabi0 * n.sqrt() / p.omega_saw;
    let gamma_minus = g0 * rabi0 * (n + 1.0).sqrt() / p.omega_saw;
    Ok(LadderModels {
        direct: LadderParams {
            rabi: rabi0,
            detuning: p.delta,
            label: LadderChannel::Direct,
        },
        sideband: LadderParams {
            rabi: gamma_plus,
            detuning: 0.0,
            label: LadderChannel::Sideband,
        },
        gamma_minus,
        gamma_plus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ghz, to_ghz};
    use proptest::prelude::*;

    fn fig1_params() -> SystemParams {
        let omega_saw = ghz(3.5);
        // g0·√n = 2π·1 GHz with n = 1e9.
        SystemParams {
            delta: -omega_saw,
            omega_saw,
            ..SystemParams::default()
        }
        .with_phonons(ghz(1.0) / 1e9f64.sqrt(), 1e9)
    }

    #[test]
    fn resonant_hamiltonian_is_pure_sigma_x() {
        let p = SystemParams {
            delta: 0.0,
            ..SystemParams::default()
        };
        let h = rotating_frame_hamiltonian(&p, ghz(1.0), 0.3e-9).unwrap();
        let expected = ComplexMatrix2::sigma_x().scale_re(ghz(0.5));
        assert!(h.max_abs_diff(&expected) < 1e-6);
    }

    #[test]
    fn detuned_hamiltonian_is_pure_sigma_z() {
        let p = SystemParams {
            delta: ghz(-3.5),
            ..SystemParams::default()
        };
        let h = rotating_frame_hamiltonian(&p, 0.0, 1e-9).unwrap();
        let expected = ComplexMatrix2::sigma_z().scale_re(ghz(1.75));
        assert!(h.max_abs_diff(&expected) < 1e-6);
    }

    #[test]
    fn modulation_vanishes_at_quarter_period() {
        let p = SystemParams {
            delta: ghz(-3.5),
            g: ghz(2.0),
            ..SystemParams::default()
        };
        let t = 0.25 * p.saw_period();
        let (hz, hx) = hamiltonian_coefficients(&p, 0.0, t);
        assert!((hz - ghz(1.75)).abs() < 1e-5 * ghz(1.0));
        assert_eq!(hx, 0.0);
    }

    #[test]
    fn negative_envelope_is_rejected() {
        assert!(rotating_frame_hamiltonian(&SystemParams::default(), -1.0, 0.0).is_err());
    }

    #[test]
    fn rotating_wave_limit_of_lab_frame() {
        let p = SystemParams {
            delta: ghz(-3.5),
            g: ghz(1.3),
            phi: 0.4,
            ..SystemParams::default()
        };
        let omega_qd = ghz(313_000.0);
        let rabi = ghz(1.0);
        let t = 0.123e-9;
        let exact = transform_to_pump_frame(&lab_frame_hamiltonian(&p, omega_qd, rabi, t), omega_qd + p.delta, t);
        let rwa = rotating_frame_hamiltonian(&p, rabi, t).unwrap();
        // Diagonal agrees exactly; the off-diagonal differs by the counter-rotating
        // term (Ω₀/2)e^{∓2iω_pump t}.
        assert!((exact.m[0][0] - rwa.m[0][0]).norm() < 1e-6 * omega_qd * 1e-9);
        assert!((exact.m[1][1] - rwa.m[1][1]).norm() < 1e-6 * omega_qd * 1e-9);
        let counter = exact.m[0][1] - rwa.m[0][1];
        assert!((counter.norm() - 0.5 * rabi).abs() < 1e-6 * rabi);
    }

    #[test]
    fn generalized_rabi_examples() {
        assert!((generalized_rabi(ghz(1.0), 0.0) - ghz(1.0)).abs() < 1e-6);
        assert!((generalized_rabi(0.0, ghz(3.5)) - ghz(3.5)).abs() < 1e-6);
        let omega = to_ghz(generalized_rabi(ghz(1.0), ghz(-3.5)));
        assert!((omega - 13.25f64.sqrt()).abs() < 1e-12);
        assert!((omega - 3.6401).abs() < 1e-4);
    }

    #[test]
    fn ladder_rates_for_fig1_parameters() {
        let m = ladder_models(&fig1_params(), ghz(1.0)).unwrap();
        assert!((to_ghz(m.sideband.rabi) - 1.0 / 3.5).abs() < 1e-12);
        assert!((to_ghz(m.sideband.rabi) - 0.2857).abs() < 1e-4);
        assert_eq!(m.direct.rabi, ghz(1.0));
        assert_eq!(m.direct.detuning, ghz(-3.5));
        assert_eq!(m.sideband.detuning, 0.0);
        assert!(m.gamma_minus > m.gamma_plus);
    }

    #[test]
    fn ladder_vacuum_and_uncoupled_limits() {
        let omega_saw = ghz(3.5);
        let base = SystemParams {
            delta: -omega_saw,
            omega_saw,
            ..SystemParams::default()
        };
        let g0 = ghz(0.01);
        let m = ladder_models(&base.with_phonons(g0, 0.0), ghz(1.0)).unwrap();
        assert_eq!(m.gamma_plus, 0.0);
        assert!((m.gamma_minus - g0 * ghz(1.0) / omega_saw).abs() < 1e-9);
        let m = ladder_models(&base.with_phonons(0.0, 1e9), ghz(1.0)).unwrap();
        assert_eq!(m.gamma_plus, 0.0);
        assert_eq!(m.gamma_minus, 0.0);
        assert_eq!(m.direct.rabi, ghz(1.0));
    }

    #[test]
    fn ladder_requires_phonon_parameters() {
        let r = ladder_models(&SystemParams::default(), ghz(1.0));
        assert!(matches!(r, Err(Error::Config(_))));
    }

    #[test]
    fn inconsistent_g_is_rejected() {
        let mut p = SystemParams::default().with_phonons(ghz(1e-5), 1e10);
        assert!(p.validate().is_ok());
        p.g *= 1.001;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn hamiltonian_is_saw_periodic(
            delta in -10.0..10.0f64, g in 0.0..3.0f64, phi in 0.0..std::f64::consts::TAU,
            rabi in 0.0..3.0f64, t in 0.0..3.0f64,
        ) {
            let p = SystemParams { delta: ghz(delta), g: ghz(g), phi, ..SystemParams::default() };
            let h1 = rotating_frame_hamiltonian(&p, ghz(rabi), t * 1e-9).unwrap();
            let h2 = rotating_frame_hamiltonian(&p, ghz(rabi), t * 1e-9 + p.saw_period()).unwrap();
            // Relative 1e-12 of the largest entry (the cos argument loses ulps).
            prop_assert!(h1.max_abs_diff(&h2) <= 1e-12 * ghz(20.0));
        }

        #[test]
        fn generalized_rabi_bounds(rabi in 0.0..1e11f64, delta in -1e11..1e11f64) {
            let omega = generalized_rabi(rabi, delta);
            let larger = rabi.max(delta.abs());
            let smaller = rabi.min(delta.abs());
            prop_assert!(omega >= larger);
            // Strict unless the smaller argument is below float resolution.
            if smaller > 1e-7 * larger {
                prop_assert!(omega > larger);
            }
            prop_assert_eq!(generalized_rabi(rabi, 0.0), rabi);
            prop_assert_eq!(generalized_rabi(0.0, delta), delta.abs());
        }

        #[test]
        fn sideband_rate_is_bilinear(rabi in 0.01..3.0f64, g in 0.01..3.0f64, k in 0.1..10.0f64) {
            let omega_saw = ghz(3.5881);
            let n: f64 = 1e9;
            let p = |g: f64| SystemParams { delta: -omega_saw, omega_saw, ..SystemParams::default() }
                .with_phonons(ghz(g) / n.sqrt(), n);
            let base = ladder_models(&p(g), ghz(rabi)).unwrap().sideband.rabi;
            let scaled_rabi = ladder_models(&p(g), ghz(k * rabi)).unwrap().sideband.rabi;
            let scaled_g = ladder_models(&p(k * g), ghz(rabi)).unwrap().sideband.rabi;
            prop_assert!((scaled_rabi / base - k).abs() < 1e-9);
            prop_assert!((scaled_g / base - k).abs() < 1e-9);
        }
    }
}
