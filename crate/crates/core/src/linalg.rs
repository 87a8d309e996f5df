//! Dense 2×2 complex kernels for the two-level emitter.
//!
//! Basis ordering is `(|g⟩, |e⟩)`: index 0 is the ground state, index 1 the
//! excited state. The Pauli set is right-handed with
//! `σ_z = |e⟩⟨e| − |g⟩⟨g|`, so the ground state sits at the south pole of the
//! Bloch sphere and `σ_- = |g⟩⟨e|` lowers the emitter.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Row-major 2×2 complex matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix2 {
    pub m: [[C64; 2]; 2],
}

impl ComplexMatrix2 {
    pub const fn new(m: [[C64; 2]; 2]) -> Self {
        Self { m }
    }

    pub const fn zero() -> Self {
        Self::new([[ZERO, ZERO], [ZERO, ZERO]])
    }

    pub const fn identity() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ONE]])
    }

    pub const fn sigma_x() -> Self {
        Self::new([[ZERO, ONE], [ONE, ZERO]])
    }

    /// `σ_y = i|g⟩⟨e| − i|e⟩⟨g|`, fixed by `[σ_x, σ_y] = 2iσ_z`.
    pub const fn sigma_y() -> Self {
        Self::new([[ZERO, I], [C64::new(0.0, -1.0), ZERO]])
    }

    pub const fn sigma_z() -> Self {
        Self::new([[C64::new(-1.0, 0.0), ZERO], [ZERO, ONE]])
    }

    /// Lowering operator `|g⟩⟨e| = (σ_x − iσ_y)/2`.
    pub const fn sigma_minus() -> Self {
        Self::new([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// Raising operator `|e⟩⟨g|`.
    pub const fn sigma_plus() -> Self {
        Self::new([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// `|g⟩⟨g|`
    pub const fn ground() -> Self {
        Self::new([[ONE, ZERO], [ZERO, ZERO]])
    }

    /// `|e⟩⟨e|`
    pub const fn excited() -> Self {
        Self::new([[ZERO, ZERO], [ZERO, ONE]])
    }

    pub fn from_real_parts(re: [[f64; 2]; 2]) -> Self {
        Self::new([
            [C64::new(re[0][0], 0.0), C64::new(re[0][1], 0.0)],
            [C64::new(re[1][0], 0.0), C64::new(re[1][1], 0.0)],
        ])
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.m;
        Self::new([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn scale(&self, s: C64) -> Self {
        let m = &self.m;
        Self::new([[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]])
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    /// `Tr(self · op)`, i.e. the expectation value of `op` when `self` is a state.
    pub fn expect(&self, op: &Self) -> C64 {
        (*self * *op).trace()
    }

    /// Largest elementwise absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut d: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                d = d.max((self.m[r][c] - other.m[r][c]).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs_diff(&Self::zero())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let b = 0.5 * (self.m[0][1] + self.m[1][0].conj());
        let mean = 0.5 * (a + d);
        let radius = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - radius, mean + radius]
    }

    /// Row-major flattening `[X_gg, X_ge, X_eg, X_ee]`.
    pub fn to_vec4(&self) -> [C64; 4] {
        [self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]]
    }

    pub fn from_vec4(v: [C64; 4]) -> Self {
        Self::new([[v[0], v[1]], [v[2], v[3]]])
    }

    /// Eight real components (re, im interleaved) in row-major order.
    pub fn to_reals(&self) -> [f64; 8] {
        let v = self.to_vec4();
        [v[0].re, v[0].im, v[1].re, v[1].im, v[2].re, v[2].im, v[3].re, v[3].im]
    }

    pub fn from_reals(r: &[f64; 8]) -> Self {
        Self::from_vec4([
            C64::new(r[0], r[1]),
            C64::new(r[2], r[3]),
            C64::new(r[4], r[5]),
            C64::new(r[6], r[7]),
        ])
    }
}

impl Add for ComplexMatrix2 {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (a, b) = (&self.m, &o.m);
        Self::new([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for ComplexMatrix2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Neg for ComplexMatrix2 {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl Mul for ComplexMatrix2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let (a, b) = (&self.m, &o.m);
        Self::new([
            [
                a[0][0] * b[0][0] + a[0][1] * b[1][0],
                a[0][0] * b[0][1] + a[0][1] * b[1][1],
            ],
            [
                a[1][0] * b[0][0] + a[1][1] * b[1][0],
                a[1][0] * b[0][1] + a[1][1] * b[1][1],
            ],
        ])
    }
}

/// A validated two-level density matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityState {
    matrix: ComplexMatrix2,
}

impl DensityState {
    pub const TRACE_TOL: f64 = 1e-9;
    pub const HERMITIAN_TOL: f64 = 1e-12;
    pub const POSITIVITY_TOL: f64 = 1e-9;

    /// Validates unit trace, Hermiticity and positivity.
    pub fn new(matrix: ComplexMatrix2) -> Result<Self> {
        let tr = matrix.trace();
        if (tr - ONE).norm() > Self::TRACE_TOL {
            return Err(Error::param("rho", format!("trace {tr} is not 1")));
        }
        if !matrix.is_hermitian(Self::HERMITIAN_TOL) {
            return Err(Error::param("rho", "matrix is not Hermitian"));
        }
        if matrix.hermitian_eigenvalues()[0] < -Self::POSITIVITY_TOL {
            return Err(Error::param("rho", "matrix has a negative eigenvalue"));
        }
        Ok(Self { matrix })
    }

    /// Wraps a matrix produced by trusted numerics (propagation, averaging).
    pub(crate) fn from_matrix_unchecked(matrix: ComplexMatrix2) -> Self {
        Self { matrix }
    }

    pub fn ground() -> Self {
        Self {
            matrix: ComplexMatrix2::ground(),
        }
    }

    pub fn excited() -> Self {
        Self {
            matrix: ComplexMatrix2::excited(),
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: ComplexMatrix2::identity().scale_re(0.5),
        }
    }

    /// Pure state `cos(θ/2)|g⟩ + e^{−iφ} sin(θ/2)|e⟩`, whose Bloch vector is
    /// `(sin θ cos φ, sin θ sin φ, −cos θ)`.
    pub fn pure(theta: f64, phi: f64) -> Self {
        let cg = C64::new((0.5 * theta).cos(), 0.0);
        let ce = C64::from_polar((0.5 * theta).sin(), -phi);
        let m = ComplexMatrix2::new([[cg * cg.conj(), cg * ce.conj()], [ce * cg.conj(), ce * ce.conj()]]);
        Self { matrix: m }
    }

    pub fn from_bloch(b: BlochVector) -> Result<Self> {
        let m = ComplexMatrix2::identity()
            + ComplexMatrix2::sigma_x().scale_re(b.sx)
            + ComplexMatrix2::sigma_y().scale_re(b.sy)
            + ComplexMatrix2::sigma_z().scale_re(b.sz);
        Self::new(m.scale_re(0.5))
    }

    pub fn matrix(&self) -> &ComplexMatrix2 {
        &self.matrix
    }

    /// Convex combination `a·self + (1−a)·other`.
    pub fn mix(&self, other: &Self, a: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&a) {
            return Err(Error::param("a", "mixing weight must lie in [0, 1]"));
        }
        Ok(Self {
            matrix: self.matrix.scale_re(a) + other.matrix.scale_re(1.0 - a),
        })
    }
}

/// `(⟨σ_x⟩, ⟨σ_y⟩, ⟨σ_z⟩)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
}

impl BlochVector {
    pub fn norm(&self) -> f64 {
        (self.sx * self.sx + self.sy * self.sy + self.sz * self.sz).sqrt()
    }
}

const BLOCH_TRACE_TOL: f64 = 1e-6;

fn bloch_of(m: &ComplexMatrix2) -> BlochVector {
    let rho_ge = m.m[0][1];
    let rho_eg = m.m[1][0];
    BlochVector {
        sx: (rho_ge + rho_eg).re,
        sy: (C64::new(0.0, -1.0) * (rho_ge - rho_eg)).re,
        sz: (m.m[1][1] - m.m[0][0]).re,
    }
}

/// Bloch vector of a state; rejects states whose trace drifted from 1.
pub fn bloch_vector(rho: &DensityState) -> Result<BlochVector> {
    let tr = rho.matrix.trace();
    if (tr - ONE).norm() > BLOCH_TRACE_TOL {
        return Err(Error::param("rho", format!("trace {tr} is not 1")));
    }
    Ok(bloch_of(&rho.matrix))
}

/// Excited-state population `ρ_ee`.
pub fn occupancy(rho: &DensityState) -> f64 {
    rho.matrix.m[1][1].re
}

/// Bloch components of an arbitrary (possibly unnormalized) Hermitian matrix.
pub(crate) fn bloch_components(m: &ComplexMatrix2) -> BlochVector {
    bloch_of(m)
}

/// One Lindblad channel `C = √rate · op`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseChannel {
    /// Rate in rad/s.
    pub rate: f64,
    pub op: ComplexMatrix2,
}

/// `dρ/dt = −i[H, ρ] + ½ Σ (2CρC† − ρC†C − C†Cρ)` with `C = √γ σ`.
///
/// Works for any operator `rho` (the map is linear), which the regression
/// solver relies on.
pub fn lindblad_rhs(h: &ComplexMatrix2, channels: &[CollapseChannel], rho: &ComplexMatrix2) -> Result<ComplexMatrix2> {
    let mut out = h.commutator(rho).scale(C64::new(0.0, -1.0));
    for ch in channels {
        if !(ch.rate >= 0.0) || !ch.rate.is_finite() {
            return Err(Error::param("rate", format!("collapse rate {} < 0", ch.rate)));
        }
        let c = ch.op.scale_re(ch.rate.sqrt());
        let cd = c.adjoint();
        let cdc = cd * c;
        let term = (c * *rho * cd).scale_re(2.0) - *rho * cdc - cdc * *rho;
        out = out + term.scale_re(0.5);
    }
    Ok(out)
}

/// Dense 4×4 complex matrix acting on row-major flattened 2×2 operators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperOperator {
    pub m: [[C64; 4]; 4],
}

impl SuperOperator {
    pub fn identity() -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = ONE;
        }
        Self { m }
    }

    /// Builds the matrix column by column from the images of the basis operators.
    pub fn from_columns(cols: [ComplexMatrix2; 4]) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (j, col) in cols.iter().enumerate() {
            let v = col.to_vec4();
            for i in 0..4 {
                m[i][j] = v[i];
            }
        }
        Self { m }
    }

    /// The operator `E_j` whose flattening is the j-th unit vector.
    pub fn basis(j: usize) -> ComplexMatrix2 {
        let mut v = [ZERO; 4];
        v[j] = ONE;
        ComplexMatrix2::from_vec4(v)
    }

    pub fn apply(&self, x: &ComplexMatrix2) -> ComplexMatrix2 {
        let v = x.to_vec4();
        let mut out = [ZERO; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.m[i][0] * v[0] + self.m[i][1] * v[1] + self.m[i][2] * v[2] + self.m[i][3] * v[3];
        }
        ComplexMatrix2::from_vec4(out)
    }

    /// `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = [[ZERO; 4]; 4];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..4).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self { m }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn decay(gamma: f64) -> CollapseChannel {
        CollapseChannel {
            rate: gamma,
            op: ComplexMatrix2::sigma_minus(),
        }
    }

    #[test]
    fn pauli_algebra_is_right_handed() {
        let (x, y, z) = (
            ComplexMatrix2::sigma_x(),
            ComplexMatrix2::sigma_y(),
            ComplexMatrix2::sigma_z(),
        );
        assert!(x.commutator(&y).max_abs_diff(&z.scale(C64::new(0.0, 2.0))) < 1e-15);
        assert!(y.commutator(&z).max_abs_diff(&x.scale(C64::new(0.0, 2.0))) < 1e-15);
        let lowering = (x - y.scale(I)).scale_re(0.5);
        assert_eq!(lowering, ComplexMatrix2::sigma_minus());
        assert_eq!(ComplexMatrix2::sigma_minus().adjoint(), ComplexMatrix2::sigma_plus());
    }

    #[test]
    fn bloch_vector_of_reference_states() {
        let b = bloch_vector(&DensityState::ground()).unwrap();
        assert_eq!((b.sx, b.sy, b.sz), (0.0, 0.0, -1.0));
        let b = bloch_vector(&DensityState::maximally_mixed()).unwrap();
        assert_eq!((b.sx, b.sy, b.sz), (0.0, 0.0, 0.0));
        let plus = DensityState::pure(std::f64::consts::FRAC_PI_2, 0.0);
        let b = bloch_vector(&plus).unwrap();
        assert!((b.sx - 1.0).abs() < 1e-15 && b.sy.abs() < 1e-15 && b.sz.abs() < 1e-15);
        let plus_i = DensityState::pure(std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2);
        let b = bloch_vector(&plus_i).unwrap();
        assert!((b.sy - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bloch_vector_rejects_unnormalized() {
        let bad = DensityState::from_matrix_unchecked(ComplexMatrix2::ground().scale_re(1.01));
        assert!(bloch_vector(&bad).is_err());
        assert!(DensityState::new(ComplexMatrix2::ground().scale_re(1.01)).is_err());
    }

    #[test]
    fn density_state_validation() {
        assert!(DensityState::new(ComplexMatrix2::sigma_minus()).is_err());
        let negative = ComplexMatrix2::from_real_parts([[1.2, 0.0], [0.0, -0.2]]);
        assert!(DensityState::new(negative).is_err());
    }

    #[test]
    fn occupancy_of_reference_states() {
        assert_eq!(occupancy(&DensityState::excited()), 1.0);
        assert_eq!(occupancy(&DensityState::ground()), 0.0);
        assert_eq!(occupancy(&DensityState::maximally_mixed()), 0.5);
    }

    #[test]
    fn pure_decay_rhs() {
        let gamma = 2.0e9;
        let d = lindblad_rhs(
            &ComplexMatrix2::zero(),
            &[decay(gamma)],
            DensityState::excited().matrix(),
        )
        .unwrap();
        assert!((d.m[1][1].re + gamma).abs() < 1e-3);
        assert!((d.m[0][0].re - gamma).abs() < 1e-3);
    }

    #[test]
    fn rabi_rhs_sign_convention() {
        // −i[(Ω/2)σx, |g⟩⟨g|] has ρ_ge component +iΩ/2 and leaves ρ_ee unchanged.
        let omega = 3.0;
        let h = ComplexMatrix2::sigma_x().scale_re(omega / 2.0);
        let d = lindblad_rhs(&h, &[], DensityState::ground().matrix()).unwrap();
        assert_eq!(d.m[1][1], ZERO);
        assert!((d.m[0][1] - C64::new(0.0, omega / 2.0)).norm() < 1e-15);
        assert!((d.m[1][0] - C64::new(0.0, -omega / 2.0)).norm() < 1e-15);
    }

    #[test]
    fn negative_rate_is_rejected() {
        let r = lindblad_rhs(&ComplexMatrix2::zero(), &[decay(-1.0)], DensityState::ground().matrix());
        assert!(matches!(r, Err(Error::Parameter { .. })));
    }

    #[test]
    fn superoperator_from_columns_applies_linearly() {
        let s = SuperOperator::from_columns([
            SuperOperator::basis(0),
            SuperOperator::basis(1).scale_re(2.0),
            SuperOperator::basis(2).scale_re(3.0),
            SuperOperator::basis(3).scale_re(4.0),
        ]);
        let x = ComplexMatrix2::from_real_parts([[1.0, 1.0], [1.0, 1.0]]);
        assert_eq!(s.apply(&x), ComplexMatrix2::from_real_parts([[1.0, 2.0], [3.0, 4.0]]));
        let twice = s.compose(&s);
        assert_eq!(
            twice.apply(&x),
            ComplexMatrix2::from_real_parts([[1.0, 4.0], [9.0, 16.0]])
        );
        assert_eq!(SuperOperator::identity().apply(&x), x);
    }

    fn arb_state() -> impl Strategy<Value = DensityState> {
        (0.0..1.0f64, 0.0..std::f64::consts::PI, 0.0..std::f64::consts::TAU).prop_map(|(r, theta, phi)| {
            let b = BlochVector {
                sx: r * theta.sin() * phi.cos(),
                sy: r * theta.sin() * phi.sin(),
                sz: r * theta.cos(),
            };
            DensityState::from_bloch(b).unwrap()
        })
    }

    proptest! {
        #[test]
        fn rhs_is_hermitian_and_traceless(
            rho in arb_state(),
            hz in -1e10..1e10f64,
            hx in 0.0..1e10f64,
            gamma in 0.0..5e9f64,
            gamma_z in 0.0..5e9f64,
        ) {
            let h = ComplexMatrix2::sigma_z().scale_re(hz) + ComplexMatrix2::sigma_x().scale_re(hx);
            let ch = [decay(gamma), CollapseChannel { rate: gamma_z, op: ComplexMatrix2::sigma_z() }];
            let d = lindblad_rhs(&h, &ch, rho.matrix()).unwrap();
            let scale = 1.0 + hz.abs() + hx + gamma + gamma_z;
            prop_assert!(d.trace().norm() <= 1e-12 * scale);
            prop_assert!(d.is_hermitian(1e-12 * scale));
        }

        #[test]
        fn occupancy_complements_ground(rho in arb_state()) {
            let ground = rho.matrix().expect(&ComplexMatrix2::ground()).re;
            prop_assert!((occupancy(&rho) + ground - 1.0).abs() < 1e-12);
        }

        #[test]
        fn bloch_vector_is_linear(a in 0.0..1.0f64, r1 in arb_state(), r2 in arb_state()) {
            let mixed = r1.mix(&r2, a).unwrap();
            let b = bloch_vector(&mixed).unwrap();
            let b1 = bloch_vector(&r1).unwrap();
            let b2 = bloch_vector(&r2).unwrap();
            prop_assert!((b.sx - (a * b1.sx + (1.0 - a) * b2.sx)).abs() < 1e-12);
            prop_assert!((b.sy - (a * b1.sy + (1.0 - a) * b2.sy)).abs() < 1e-12);
            prop_assert!((b.sz - (a * b1.sz + (1.0 - a) * b2.sz)).abs() < 1e-12);
            prop_assert!(b.norm() <= 1.0 + 1e-9);
        }
    }
}
