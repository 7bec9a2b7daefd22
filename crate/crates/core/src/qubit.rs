//! Single-qubit states, two-outcome observables and the Born rule.
//!
//! States and detector settings are both carried as real 3-vectors in the
//! Pauli basis:
//!
//! ```text
//! ρ = (1 + s·σ) / 2        Stokes vector s, |s| ≤ 1
//! E = (1 + w·σ) / 2        observable vector w, |w| ≤ 1
//! ¬E = (1 − w·σ) / 2
//! ```
//!
//! so that the expectation of `Σ = E − ¬E = w·σ` in state ρ is the plain dot
//! product `s·w`. Basis convention: `|H⟩ = (1, 0)ᵀ`, `|V⟩ = (0, 1)ᵀ`, hence
//! horizontal light has `s = (0, 0, 1)`.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat3, Vec3};

/// Tolerance for identities that hold exactly in real arithmetic.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance applied when validating user-supplied vectors and operators.
pub const INPUT_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// 2×2 complex matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMatrix2(pub [[Complex64; 2]; 2]);

/// σ₁, σ₂, σ₃.
pub const PAULI: [ComplexMatrix2; 3] = [
    ComplexMatrix2([[ZERO, ONE], [ONE, ZERO]]),
    ComplexMatrix2([[ZERO, Complex64::new(0.0, -1.0)], [I, ZERO]]),
    ComplexMatrix2([[ONE, ZERO], [ZERO, Complex64::new(-1.0, 0.0)]]),
];

impl ComplexMatrix2 {
    pub const IDENTITY: ComplexMatrix2 = ComplexMatrix2([[ONE, ZERO], [ZERO, ONE]]);
    pub const ZERO: ComplexMatrix2 = ComplexMatrix2([[ZERO, ZERO], [ZERO, ZERO]]);

    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        ComplexMatrix2([[a, b], [c, d]])
    }

    pub fn real(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(a.into(), b.into(), c.into(), d.into())
    }

    pub fn diag(a: f64, d: f64) -> Self {
        Self::real(a, 0.0, 0.0, d)
    }

    /// `(c₀·1 + v·σ)`.
    pub fn from_pauli(c0: f64, v: &Vec3) -> Self {
        let m = Complex64::new(v[0], -v[1]);
        ComplexMatrix2([
            [Complex64::new(c0 + v[2], 0.0), m],
            [m.conj(), Complex64::new(c0 - v[2], 0.0)],
        ])
    }

    /// Real parts of `Tr(A σ_k)` for k = 1, 2, 3.
    pub fn pauli_components(&self) -> Vec3 {
        [
            (self * &PAULI[0]).trace().re,
            (self * &PAULI[1]).trace().re,
            (self * &PAULI[2]).trace().re,
        ]
    }

    pub fn adjoint(&self) -> Self {
        let m = &self.0;
        ComplexMatrix2([[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]])
    }

    pub fn trace(&self) -> Complex64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> Complex64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn scale(&self, k: Complex64) -> Self {
        let m = &self.0;
        ComplexMatrix2([[m[0][0] * k, m[0][1] * k], [m[1][0] * k, m[1][1] * k]])
    }

    /// Frobenius norm `√Tr(A†A)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let d = *self - *other;
        d.0.iter().flatten().fold(0.0, |acc: f64, z| acc.max(z.norm()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_abs_diff(&self.adjoint()) <= tol
    }

    /// Eigenvalues (ascending) of the Hermitian part of the matrix.
    pub fn hermitian_eigenvalues(&self) -> (f64, f64) {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = (self.0[0][1] + self.0[1][0].conj()) * 0.5;
        let mid = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        (mid - half_gap, mid + half_gap)
    }

    /// `U A U†`.
    pub fn conjugate_by(&self, u: &ComplexMatrix2) -> Self {
        u * &(self * &u.adjoint())
    }
}

impl Mul for &ComplexMatrix2 {
    type Output = ComplexMatrix2;
    fn mul(self, rhs: &ComplexMatrix2) -> ComplexMatrix2 {
        let (a, b) = (&self.0, &rhs.0);
        ComplexMatrix2([
            [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
            [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
        ])
    }
}

impl Mul for ComplexMatrix2 {
    type Output = ComplexMatrix2;
    fn mul(self, rhs: ComplexMatrix2) -> ComplexMatrix2 {
        &self * &rhs
    }
}

impl Add for ComplexMatrix2 {
    type Output = ComplexMatrix2;
    fn add(self, rhs: ComplexMatrix2) -> ComplexMatrix2 {
        let (a, b) = (&self.0, &rhs.0);
        ComplexMatrix2([[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]])
    }
}

impl Sub for ComplexMatrix2 {
    type Output = ComplexMatrix2;
    fn sub(self, rhs: ComplexMatrix2) -> ComplexMatrix2 {
        let (a, b) = (&self.0, &rhs.0);
        ComplexMatrix2([[a[0][0] - b[0][0], a[0][1] - b[0][1]], [a[1][0] - b[1][0], a[1][1] - b[1][1]]])
    }
}

/// Validated qubit density operator: Hermitian, unit trace, PSD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ComplexMatrix2", into = "ComplexMatrix2")]
pub struct DensityMatrix(ComplexMatrix2);

impl DensityMatrix {
    pub fn new(m: ComplexMatrix2) -> Result<Self> {
        Self::with_tolerance(m, EXACT_TOL)
    }

    pub fn with_tolerance(m: ComplexMatrix2, tol: f64) -> Result<Self> {
        if !m.is_hermitian(tol) {
            return Err(Error::InvalidDensity("not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > tol || tr.im.abs() > tol {
            return Err(Error::InvalidDensity(format!("trace {tr} is not 1")));
        }
        let (lo, _) = m.hermitian_eigenvalues();
        if lo < -tol {
            return Err(Error::InvalidDensity(format!("negative eigenvalue {lo}")));
        }
        Ok(DensityMatrix(m))
    }

    /// |H⟩⟨H|
    pub fn horizontal() -> Self {
        DensityMatrix(ComplexMatrix2::diag(1.0, 0.0))
    }

    /// |V⟩⟨V|
    pub fn vertical() -> Self {
        DensityMatrix(ComplexMatrix2::diag(0.0, 1.0))
    }

    pub fn maximally_mixed() -> Self {
        DensityMatrix(ComplexMatrix2::diag(0.5, 0.5))
    }

    pub fn matrix(&self) -> &ComplexMatrix2 {
        &self.0
    }

    /// `Tr(ρ²)`
    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    /// `U ρ U†` for unitary `U`; the result is not re-validated.
    pub fn evolve(&self, u: &ComplexMatrix2) -> Self {
        DensityMatrix(self.0.conjugate_by(u))
    }
}

impl TryFrom<ComplexMatrix2> for DensityMatrix {
    type Error = Error;
    fn try_from(m: ComplexMatrix2) -> Result<Self> {
        Self::with_tolerance(m, INPUT_TOL)
    }
}

impl From<DensityMatrix> for ComplexMatrix2 {
    fn from(d: DensityMatrix) -> Self {
        d.0
    }
}

/// Checks `|v| ≤ 1 + tol`; vectors just outside the unit ball are pulled back onto it.
fn ball_vector(v: Vec3, tol: f64) -> std::result::Result<Vec3, f64> {
    let n = linalg::norm(&v);
    if !n.is_finite() || n > 1.0 + tol {
        Err(n)
    } else if n > 1.0 {
        Ok(linalg::scale(&v, 1.0 / n))
    } else {
        Ok(v)
    }
}

/// Normalized Stokes parameters `(s₁, s₂, s₃)` of a state inside the Poincaré ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct StokesVector(Vec3);

impl StokesVector {
    pub fn new(s: Vec3) -> Result<Self> {
        Self::with_tolerance(s, INPUT_TOL)
    }

    pub fn with_tolerance(s: Vec3, tol: f64) -> Result<Self> {
        ball_vector(s, tol).map(StokesVector).map_err(|norm| Error::NonPhysicalState { norm })
    }

    pub fn as_array(&self) -> &Vec3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }
}

impl AsRef<Vec3> for StokesVector {
    fn as_ref(&self) -> &Vec3 {
        &self.0
    }
}

impl TryFrom<Vec3> for StokesVector {
    type Error = Error;
    fn try_from(v: Vec3) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StokesVector> for Vec3 {
    fn from(s: StokesVector) -> Vec3 {
        s.0
    }
}

/// Observable vector `w` of an unbiased two-outcome measurement; `|w|` is the
/// detector's discrimination power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec3", into = "Vec3")]
pub struct ObservableVector(Vec3);

impl ObservableVector {
    pub fn new(w: Vec3) -> Result<Self> {
        Self::with_tolerance(w, INPUT_TOL)
    }

    pub fn with_tolerance(w: Vec3, tol: f64) -> Result<Self> {
        ball_vector(w, tol).map(ObservableVector).map_err(|norm| Error::NonPositivePovm { norm })
    }

    pub fn as_array(&self) -> &Vec3 {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        linalg::norm(&self.0)
    }

    /// `Σ = w·σ`
    pub fn operator(&self) -> ComplexMatrix2 {
        ComplexMatrix2::from_pauli(0.0, &self.0)
    }
}

impl AsRef<Vec3> for ObservableVector {
    fn as_ref(&self) -> &Vec3 {
        &self.0
    }
}

impl TryFrom<Vec3> for ObservableVector {
    type Error = Error;
    fn try_from(v: Vec3) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ObservableVector> for Vec3 {
    fn from(w: ObservableVector) -> Vec3 {
        w.0
    }
}

/// Two-outcome POVM `{E, ¬E}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PovmPair {
    pub e: ComplexMatrix2,
    pub not_e: ComplexMatrix2,
}

impl PovmPair {
    pub fn new(e: ComplexMatrix2, not_e: ComplexMatrix2) -> Result<Self> {
        if (e + not_e).max_abs_diff(&ComplexMatrix2::IDENTITY) > EXACT_TOL {
            return Err(Error::InvalidPovm("elements do not sum to the identity".into()));
        }
        for m in [&e, &not_e] {
            if !m.is_hermitian(EXACT_TOL) || m.hermitian_eigenvalues().0 < -EXACT_TOL {
                return Err(Error::InvalidPovm("element is not positive semidefinite".into()));
            }
        }
        Ok(PovmPair { e, not_e })
    }
}

/// `ρ = (1 + s·σ) / 2`
pub fn density_from_stokes(s: &StokesVector) -> DensityMatrix {
    DensityMatrix(ComplexMatrix2::from_pauli(1.0, &s.0).scale(0.5.into()))
}

/// `s_k = Tr(ρ σ_k)`
pub fn stokes_from_density(rho: &DensityMatrix) -> StokesVector {
    // a valid density matrix always lands in the ball up to rounding
    StokesVector(ball_vector(rho.0.pauli_components(), INPUT_TOL).unwrap_or_else(|_| rho.0.pauli_components()))
}

pub fn povm_from_observable(w: &ObservableVector) -> PovmPair {
    let neg = linalg::scale(&w.0, -1.0);
    PovmPair {
        e: ComplexMatrix2::from_pauli(1.0, &w.0).scale(0.5.into()),
        not_e: ComplexMatrix2::from_pauli(1.0, &neg).scale(0.5.into()),
    }
}

/// Recovers `w` from `Σ = E − ¬E = w·σ`. Only unbiased pairs (`Tr E = 1`) are supported.
pub fn observable_from_povm(pair: &PovmPair) -> Result<ObservableVector> {
    let tr = pair.e.trace().re;
    if (tr - 1.0).abs() > INPUT_TOL {
        return Err(Error::UnsupportedPovm { trace: tr });
    }
    let sigma = pair.e - pair.not_e;
    ObservableVector::new(linalg::scale(&sigma.pauli_components(), 0.5))
}

/// `⟨Σ⟩ = Tr(ρ Σ) = s·w`
pub fn expectation(s: &StokesVector, w: &ObservableVector) -> f64 {
    linalg::dot(&s.0, &w.0)
}

/// Born rule `p = Tr(ρ Π)` for a single POVM element.
pub fn born_probability(rho: &DensityMatrix, element: &ComplexMatrix2) -> Result<f64> {
    if !element.is_hermitian(INPUT_TOL) {
        return Err(Error::InvalidOperator("measurement element is not Hermitian".into()));
    }
    let (lo, hi) = element.hermitian_eigenvalues();
    if lo < -INPUT_TOL {
        return Err(Error::InvalidElement { eigenvalue: lo });
    }
    if hi > 1.0 + INPUT_TOL {
        return Err(Error::InvalidElement { eigenvalue: hi });
    }
    Ok((rho.0 * *element).trace().re.clamp(0.0, 1.0))
}

/// Closed form of `(Tr √(√a b √a))²` valid for 2×2 PSD operators of unit trace.
fn qubit_fidelity(a: &ComplexMatrix2, b: &ComplexMatrix2) -> f64 {
    let overlap = (a * b).trace().re;
    let dets = a.det().re.max(0.0) * b.det().re.max(0.0);
    (overlap + 2.0 * dets.sqrt()).clamp(0.0, 1.0)
}

/// Uhlmann fidelity between two qubit states.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    qubit_fidelity(&a.0, &b.0)
}

/// Fidelity between two PSD operators after normalizing each to unit trace.
///
/// Used to compare POVM elements, which are not trace-one in general.
pub fn operator_fidelity(a: &ComplexMatrix2, b: &ComplexMatrix2) -> Result<f64> {
    let normalize = |m: &ComplexMatrix2| -> Result<ComplexMatrix2> {
        if !m.is_hermitian(INPUT_TOL) {
            return Err(Error::InvalidOperator("not Hermitian".into()));
        }
        let tr = m.trace().re;
        let (lo, _) = m.hermitian_eigenvalues();
        if lo < -INPUT_TOL || tr <= 0.0 {
            return Err(Error::InvalidOperator(format!("not positive semidefinite (eigenvalue {lo})")));
        }
        Ok(m.scale((1.0 / tr).into()))
    };
    Ok(qubit_fidelity(&normalize(a)?, &normalize(b)?))
}

/// `‖rec − th‖₂ / ‖th‖₂` in the Frobenius norm.
pub fn relative_error(rec: &ComplexMatrix2, th: &ComplexMatrix2) -> Result<f64> {
    let denom = th.frobenius_norm();
    if denom <= EXACT_TOL {
        return Err(Error::DivisionDegenerate);
    }
    Ok((*rec - *th).frobenius_norm() / denom)
}

/// Invertible 3×3 blame-gauge matrix acting as `P → P G⁻¹`, `W → G W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeTransform {
    g: Mat3,
    g_inv: Mat3,
}

impl GaugeTransform {
    pub fn new(g: Mat3) -> Result<Self> {
        let det = g.det();
        if !(det.abs() > EXACT_TOL) {
            return Err(Error::SingularGauge { det });
        }
        let adj = g.adjugate();
        let g_inv = Mat3::from_fn(|r, c| adj[(r, c)] / det);
        Ok(GaugeTransform { g, g_inv })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.g
    }

    pub fn inverse(&self) -> &Mat3 {
        &self.g_inv
    }
}

/// Applies a gauge transform to state rows and observable columns.
///
/// The outputs are raw 3-vectors: a gauge can move them out of the unit ball.
pub fn apply_gauge<P: AsRef<Vec3>, W: AsRef<Vec3>>(
    p_rows: &[P],
    w_cols: &[W],
    g: &GaugeTransform,
) -> (Vec<Vec3>, Vec<Vec3>) {
    let rows = p_rows.iter().map(|p| Mat3::vec_mul(p.as_ref(), &g.g_inv)).collect();
    let cols = w_cols.iter().map(|w| g.g.mul_vec(w.as_ref())).collect();
    (rows, cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sv(v: Vec3) -> StokesVector {
        StokesVector::new(v).unwrap()
    }
    fn ov(v: Vec3) -> ObservableVector {
        ObservableVector::new(v).unwrap()
    }
    fn close(a: &ComplexMatrix2, b: &ComplexMatrix2, tol: f64) -> bool {
        a.max_abs_diff(b) <= tol
    }

    #[test]
    fn pauli_matrices_are_orthonormal() {
        for (m, a) in PAULI.iter().enumerate() {
            for (n, b) in PAULI.iter().enumerate() {
                let tr = (a * b).trace();
                let want = if m == n { 2.0 } else { 0.0 };
                assert!((tr - Complex64::new(want, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn density_from_stokes_examples() {
        let h = density_from_stokes(&sv([0.0, 0.0, 1.0]));
        assert!(close(h.matrix(), &ComplexMatrix2::diag(1.0, 0.0), 1e-15));
        let mixed = density_from_stokes(&sv([0.0, 0.0, 0.0]));
        assert!(close(mixed.matrix(), &ComplexMatrix2::diag(0.5, 0.5), 1e-15));
        let rho_m = density_from_stokes(&sv([0.0, 0.0, 0.5]));
        assert!(close(rho_m.matrix(), &ComplexMatrix2::diag(0.75, 0.25), 1e-15));
    }

    #[test]
    fn stokes_from_density_examples() {
        let s = stokes_from_density(&DensityMatrix::horizontal());
        assert_eq!(*s.as_array(), [0.0, 0.0, 1.0]);
        let diag = DensityMatrix::new(ComplexMatrix2::real(0.5, 0.5, 0.5, 0.5)).unwrap();
        assert_eq!(*stokes_from_density(&diag).as_array(), [1.0, 0.0, 0.0]);
        let rho_m = DensityMatrix::new(ComplexMatrix2::diag(0.75, 0.25)).unwrap();
        assert_eq!(*stokes_from_density(&rho_m).as_array(), [0.0, 0.0, 0.5]);
    }

    #[test]
    fn out_of_ball_vectors_are_rejected() {
        assert!(matches!(StokesVector::new([0.0, 0.0, 1.1]), Err(Error::NonPhysicalState { .. })));
        assert!(matches!(ObservableVector::new([0.8, 0.8, 0.0]), Err(Error::NonPositivePovm { .. })));
        // within input tolerance is accepted and pulled onto the sphere
        let s = StokesVector::new([0.0, 0.0, 1.0 + 5e-10]).unwrap();
        assert!(s.norm() <= 1.0);
    }

    #[test]
    fn density_matrix_validation() {
        assert!(DensityMatrix::new(ComplexMatrix2::diag(1.2, -0.2)).is_err());
        assert!(DensityMatrix::new(ComplexMatrix2::diag(0.6, 0.6)).is_err());
        assert!(DensityMatrix::new(ComplexMatrix2::real(0.5, 0.5, 0.0, 0.5)).is_err());
    }

    #[test]
    fn povm_from_observable_examples() {
        let p = povm_from_observable(&ov([0.0, 0.0, 1.0]));
        assert!(close(&p.e, &ComplexMatrix2::diag(1.0, 0.0), 1e-15));
        assert!(close(&p.not_e, &ComplexMatrix2::diag(0.0, 1.0), 1e-15));
        let p = povm_from_observable(&ov([0.0, 0.0, 0.0]));
        assert!(close(&p.e, &ComplexMatrix2::diag(0.5, 0.5), 1e-15));
        assert!(close(&p.not_e, &ComplexMatrix2::diag(0.5, 0.5), 1e-15));
        let p = povm_from_observable(&ov([0.0, 0.0, 0.5]));
        assert!(close(&p.e, &ComplexMatrix2::diag(0.75, 0.25), 1e-15));
    }

    #[test]
    fn observable_from_povm_examples() {
        let hv = PovmPair::new(ComplexMatrix2::diag(1.0, 0.0), ComplexMatrix2::diag(0.0, 1.0)).unwrap();
        assert_eq!(*observable_from_povm(&hv).unwrap().as_array(), [0.0, 0.0, 1.0]);
        let half = ComplexMatrix2::diag(0.5, 0.5);
        let blind = PovmPair::new(half, half).unwrap();
        assert_eq!(*observable_from_povm(&blind).unwrap().as_array(), [0.0, 0.0, 0.0]);
        let weak = PovmPair::new(ComplexMatrix2::diag(0.75, 0.25), ComplexMatrix2::diag(0.25, 0.75)).unwrap();
        assert_eq!(*observable_from_povm(&weak).unwrap().as_array(), [0.0, 0.0, 0.5]);
    }

    #[test]
    fn biased_povm_is_unsupported() {
        let biased = PovmPair::new(ComplexMatrix2::diag(0.8, 0.6), ComplexMatrix2::diag(0.2, 0.4)).unwrap();
        assert!(matches!(observable_from_povm(&biased), Err(Error::UnsupportedPovm { .. })));
    }

    #[test]
    fn povm_pair_must_sum_to_identity() {
        assert!(PovmPair::new(ComplexMatrix2::diag(1.0, 0.0), ComplexMatrix2::diag(0.0, 0.9)).is_err());
        assert!(PovmPair::new(ComplexMatrix2::diag(1.2, 0.0), ComplexMatrix2::diag(-0.2, 1.0)).is_err());
    }

    #[test]
    fn expectation_examples() {
        assert_eq!(expectation(&sv([0.0, 0.0, 1.0]), &ov([0.0, 0.0, 1.0])), 1.0);
        assert_eq!(expectation(&sv([0.0, 0.0, 1.0]), &ov([1.0, 0.0, 0.0])), 0.0);
        let s = sv([0.0, 0.0, 0.5]);
        let w = ov([0.0, 0.0, 1.0]);
        assert_eq!(expectation(&s, &w), 0.5);
        let full = (*density_from_stokes(&s).matrix() * w.operator()).trace();
        assert!((full.re - 0.5).abs() < 1e-15 && full.im.abs() < 1e-15);
    }

    #[test]
    fn born_probability_examples() {
        let h = DensityMatrix::horizontal();
        let ph = ComplexMatrix2::diag(1.0, 0.0);
        assert_eq!(born_probability(&h, &ph).unwrap(), 1.0);
        let mixed = DensityMatrix::maximally_mixed();
        let diag_proj = ComplexMatrix2::real(0.5, 0.5, 0.5, 0.5);
        assert!((born_probability(&mixed, &diag_proj).unwrap() - 0.5).abs() < 1e-15);
        let rho_m = DensityMatrix::new(ComplexMatrix2::diag(0.75, 0.25)).unwrap();
        assert_eq!(born_probability(&rho_m, &ph).unwrap(), 0.75);
    }

    #[test]
    fn born_probability_rejects_bad_elements() {
        let h = DensityMatrix::horizontal();
        assert!(matches!(
            born_probability(&h, &ComplexMatrix2::diag(1.5, 0.0)),
            Err(Error::InvalidElement { .. })
        ));
        assert!(matches!(
            born_probability(&h, &ComplexMatrix2::diag(-0.5, 0.5)),
            Err(Error::InvalidElement { .. })
        ));
    }

    // Fidelity oracle evaluated from eigendecompositions: F = (Tr √(√a b √a))².
    fn hermitian_sqrt(m: &ComplexMatrix2) -> ComplexMatrix2 {
        let (l0, l1) = m.hermitian_eigenvalues();
        if (l1 - l0).abs() < 1e-14 {
            return ComplexMatrix2::IDENTITY.scale(l0.max(0.0).sqrt().into());
        }
        // spectral projectors of a 2×2 Hermitian matrix
        let p1 = (*m - ComplexMatrix2::IDENTITY.scale(l0.into())).scale((1.0 / (l1 - l0)).into());
        let p0 = ComplexMatrix2::IDENTITY - p1;
        p0.scale(l0.max(0.0).sqrt().into()) + p1.scale(l1.max(0.0).sqrt().into())
    }

    fn fidelity_oracle(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
        let ra = hermitian_sqrt(a.matrix());
        let inner = &ra * &(b.matrix() * &ra);
        hermitian_sqrt(&inner).trace().re.powi(2)
    }

    #[test]
    fn fidelity_examples() {
        let h = DensityMatrix::horizontal();
        let v = DensityMatrix::vertical();
        let rho_m = DensityMatrix::new(ComplexMatrix2::diag(0.75, 0.25)).unwrap();
        assert!((fidelity(&rho_m, &rho_m) - 1.0).abs() < 1e-12);
        assert!(fidelity(&h, &v).abs() < 1e-15);
        assert!((fidelity(&h, &rho_m) - 0.75).abs() < 1e-15);
        assert!((fidelity_oracle(&h, &rho_m) - 0.75).abs() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        let th = ComplexMatrix2::real(0.7, 0.1, 0.1, 0.3);
        assert_eq!(relative_error(&th, &th).unwrap(), 0.0);
        assert!((relative_error(&th.scale(2.0.into()), &th).unwrap() - 1.0).abs() < 1e-15);
        let re = relative_error(&ComplexMatrix2::diag(1.0, 0.0), &ComplexMatrix2::diag(0.0, 1.0)).unwrap();
        assert!((re - 2f64.sqrt()).abs() < 1e-15);
        assert!(matches!(relative_error(&th, &ComplexMatrix2::ZERO), Err(Error::DivisionDegenerate)));
    }

    #[test]
    fn operator_fidelity_normalizes_trace() {
        let e = ComplexMatrix2::diag(0.75, 0.25);
        let f = operator_fidelity(&e.scale(2.0.into()), &e).unwrap();
        assert!((f - 1.0).abs() < 1e-12);
        assert!(matches!(
            operator_fidelity(&ComplexMatrix2::diag(1.0, -0.5), &e),
            Err(Error::InvalidOperator(_))
        ));
    }

    #[test]
    fn gauge_examples() {
        let p = [sv([0.0, 0.0, 1.0]), sv([0.3, -0.2, 0.1])];
        let w = [ov([0.0, 0.0, 1.0]), ov([0.5, 0.5, 0.0])];
        let id = GaugeTransform::new(Mat3::IDENTITY).unwrap();
        let (rows, cols) = apply_gauge(&p, &w, &id);
        assert_eq!(rows[1], *p[1].as_array());
        assert_eq!(cols[1], *w[1].as_array());

        let (c, s) = (0.4f64.cos(), 0.4f64.sin());
        let rot = GaugeTransform::new(Mat3([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])).unwrap();
        let (rows, cols) = apply_gauge(&p[..1], &w[..1], &rot);
        assert!((linalg::dot(&rows[0], &cols[0]) - 1.0).abs() < 1e-15);

        let singular = Mat3([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 0.0, 0.0]]);
        assert!(matches!(GaugeTransform::new(singular), Err(Error::SingularGauge { .. })));
    }

    fn ball_vec() -> impl Strategy<Value = Vec3> {
        (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, 0.0f64..=1.0).prop_map(|(x, y, z, r)| {
            let n = (x * x + y * y + z * z).sqrt().max(1e-9);
            [x / n * r, y / n * r, z / n * r]
        })
    }

    fn density() -> impl Strategy<Value = DensityMatrix> {
        ball_vec().prop_map(|v| density_from_stokes(&sv(v)))
    }

    fn invertible() -> impl Strategy<Value = Mat3> {
        proptest::array::uniform9(-2.0f64..2.0)
            .prop_map(|a| Mat3([[a[0], a[1], a[2]], [a[3], a[4], a[5]], [a[6], a[7], a[8]]]))
            .prop_filter("well conditioned", |m| m.relative_det().abs() > 1e-3)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn stokes_round_trip(v in ball_vec()) {
            let s = sv(v);
            let rho = density_from_stokes(&s);
            prop_assert!(DensityMatrix::new(*rho.matrix()).is_ok());
            let back = stokes_from_density(&rho);
            for k in 0..3 {
                prop_assert!((back.as_array()[k] - v[k]).abs() < 1e-12);
            }
            prop_assert!(close(density_from_stokes(&back).matrix(), rho.matrix(), 1e-12));
        }

        #[test]
        fn povm_round_trip(v in ball_vec()) {
            let pair = povm_from_observable(&ov(v));
            prop_assert!(close(&(pair.e + pair.not_e), &ComplexMatrix2::IDENTITY, 1e-12));
            prop_assert!(PovmPair::new(pair.e, pair.not_e).is_ok());
            let back = observable_from_povm(&pair).unwrap();
            for k in 0..3 {
                prop_assert!((back.as_array()[k] - v[k]).abs() < 1e-12);
            }
        }

        #[test]
        fn born_rule_consistency(s in ball_vec(), w in ball_vec()) {
            let (s, w) = (sv(s), ov(w));
            let rho = density_from_stokes(&s);
            let pair = povm_from_observable(&w);
            let pe = born_probability(&rho, &pair.e).unwrap();
            let pn = born_probability(&rho, &pair.not_e).unwrap();
            prop_assert!((pe + pn - 1.0).abs() < 1e-12);
            prop_assert!((expectation(&s, &w) - (pe - pn)).abs() < 1e-12);
            let full = (*rho.matrix() * w.operator()).trace().re;
            prop_assert!((expectation(&s, &w) - full).abs() < 1e-12);
        }

        #[test]
        fn gauge_preserves_expectations(p in ball_vec(), w in ball_vec(), g in invertible()) {
            let g = GaugeTransform::new(g).unwrap();
            let (rows, cols) = apply_gauge(&[sv(p)], &[ov(w)], &g);
            prop_assert!((linalg::dot(&rows[0], &cols[0]) - linalg::dot(&p, &w)).abs() < 1e-10);
        }

        #[test]
        fn fidelity_bounds_and_oracle(a in density(), b in density()) {
            let f = fidelity(&a, &b);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((fidelity(&a, &a) - 1.0).abs() < 1e-9);
            prop_assert!((f - fidelity(&b, &a)).abs() < 1e-12);
            prop_assert!((f - fidelity_oracle(&a, &b)).abs() < 1e-7);
        }
    }
}
