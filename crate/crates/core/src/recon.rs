//! Linear-inversion tomography on correlation-free expectation matrices.
//!
//! `S = P W` with the rows of `P` the Stokes vectors of the preparations and
//! the columns of `W` the observable vectors of the settings. Knowing one side
//! on three linearly independent entries fixes the other side; the loop
//! bootstrap chains these inversions around the four corners of a 6×6 matrix.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Leg, Result};
use crate::linalg::{dot, norm, scale, Mat3, Vec3, SINGULAR_CUTOFF};
use crate::qubit::{
    density_from_stokes, fidelity, operator_fidelity, povm_from_observable, relative_error, ObservableVector,
    StokesVector,
};
use crate::spam::{ExpectationMatrix, MatrixShape};

/// Clips a vector to the unit ball. Returns the clipped vector and whether it was scaled.
fn renormalize(v: Vec3) -> (Vec3, bool) {
    let n = norm(&v);
    if n > 1.0 {
        (scale(&v, 1.0 / n), true)
    } else {
        (v, false)
    }
}

/// Reconstructed preparations; row `a` is the Stokes vector of preparation `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepMatrix {
    pub rows: Vec<StokesVector>,
    /// Inverted rows before clipping to the unit ball.
    pub raw: Vec<Vec3>,
    pub renormalized: Vec<bool>,
}

impl PrepMatrix {
    pub fn from_raw(raw: Vec<Vec3>) -> Self {
        let (rows, renormalized) = raw
            .iter()
            .map(|v| {
                let (u, flag) = renormalize(*v);
                (StokesVector::new(u).expect("clipped to the unit ball"), flag)
            })
            .unzip();
        PrepMatrix { rows, raw, renormalized }
    }

    pub fn from_states(states: &[StokesVector]) -> Self {
        PrepMatrix::from_raw(states.iter().map(|s| *s.as_array()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn leading_block(&self) -> Result<Mat3> {
        if self.raw.len() < 3 {
            return Err(Error::Shape {
                expected: "at least 3 preparations".into(),
                got: format!("{}", self.raw.len()),
            });
        }
        Ok(Mat3::from_rows([self.raw[0], self.raw[1], self.raw[2]]))
    }
}

/// Reconstructed measurements; column `i` is the observable vector of setting `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasMatrix {
    pub cols: Vec<ObservableVector>,
    /// Inverted columns before clipping to the unit ball.
    pub raw: Vec<Vec3>,
    pub renormalized: Vec<bool>,
}

impl MeasMatrix {
    pub fn from_raw(raw: Vec<Vec3>) -> Self {
        let (cols, renormalized) = raw
            .iter()
            .map(|v| {
                let (u, flag) = renormalize(*v);
                (ObservableVector::new(u).expect("clipped to the unit ball"), flag)
            })
            .unzip();
        MeasMatrix { cols, raw, renormalized }
    }

    pub fn from_observables(obs: &[ObservableVector]) -> Self {
        MeasMatrix::from_raw(obs.iter().map(|w| *w.as_array()).collect())
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    fn leading_block(&self) -> Result<Mat3> {
        if self.raw.len() < 3 {
            return Err(Error::Shape {
                expected: "at least 3 settings".into(),
                got: format!("{}", self.raw.len()),
            });
        }
        Ok(Mat3::from_cols([self.raw[0], self.raw[1], self.raw[2]]))
    }
}

/// State tomography: `p_a = S_a[1..3] W₁₋₃⁻¹` for every row of `s`.
pub fn qst_invert(s: &ExpectationMatrix, w: &MeasMatrix) -> Result<PrepMatrix> {
    let w_inv = w.leading_block()?.try_inverse(SINGULAR_CUTOFF).ok_or(Error::SingularMeasurement)?;
    let raw = (0..s.dim())
        .map(|a| Mat3::vec_mul(&[s.get(a, 0), s.get(a, 1), s.get(a, 2)], &w_inv))
        .collect();
    Ok(PrepMatrix::from_raw(raw))
}

/// Detector tomography: `w_i = P₁₋₃⁻¹ S[1..3]^i` for every column of `s`.
pub fn qdt_invert(s: &ExpectationMatrix, p: &PrepMatrix) -> Result<MeasMatrix> {
    let p_inv = p.leading_block()?.try_inverse(SINGULAR_CUTOFF).ok_or(Error::SingularPreparation)?;
    let raw = (0..s.dim())
        .map(|i| p_inv.mul_vec(&[s.get(0, i), s.get(1, i), s.get(2, i)]))
        .collect();
    Ok(MeasMatrix::from_raw(raw))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSolution {
    /// Preparations 1–6.
    pub states: PrepMatrix,
    /// Settings 1–6; settings 1–3 are the known inputs.
    pub observables: MeasMatrix,
    /// `max |C − P₄₋₆ W₁₋₃|` using raw (unclipped) vectors.
    pub consistency_residual: f64,
}

/// Goes around the corners of a 6×6 matrix starting from known settings 1–3:
/// states 1–3 from `A`, settings 4–6 from `B`, states 4–6 from `D`, then checks `C`.
///
/// Clipping to the unit ball happens only on the final outputs.
pub fn loop_bootstrap(s: &ExpectationMatrix, known: &MeasMatrix) -> Result<LoopSolution> {
    if s.shape() != MatrixShape::Full6 {
        return Err(Error::Shape {
            expected: MatrixShape::Full6.to_string(),
            got: s.shape().to_string(),
        });
    }
    let w13 = known.leading_block()?;
    let invert = |m: Mat3, leg| m.try_inverse(SINGULAR_CUTOFF).ok_or(Error::SingularLeg(leg));
    let p13 = s.block(0, 0) * invert(w13, Leg::KnownSettings)?;
    let w46 = invert(p13, Leg::States1To3)? * s.block(0, 3);
    let p46 = s.block(3, 3) * invert(w46, Leg::Settings4To6)?;

    let c_pred = p46 * w13;
    let consistency_residual = (s.block(3, 0) - c_pred).max_abs();

    let states = (0..3).map(|a| p13.row(a)).chain((0..3).map(|a| p46.row(a))).collect();
    let observables = (0..3).map(|i| w13.col(i)).chain((0..3).map(|i| w46.col(i))).collect();
    Ok(LoopSolution {
        states: PrepMatrix::from_raw(states),
        observables: MeasMatrix::from_raw(observables),
        consistency_residual,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionScore {
    pub state_fidelities: Vec<f64>,
    /// Fidelity of each `E` element after trace normalization.
    pub povm_fidelities: Vec<f64>,
    /// Frobenius relative error of each `E` element.
    pub povm_relative_errors: Vec<f64>,
    pub state_renormalized: Vec<bool>,
    pub povm_renormalized: Vec<bool>,
}

impl ReconstructionScore {
    pub fn min_fidelity(&self) -> f64 {
        self.state_fidelities
            .iter()
            .chain(&self.povm_fidelities)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_relative_error(&self) -> f64 {
        self.povm_relative_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn same_len(what: &str, a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::Shape {
            expected: format!("{b} reference {what}"),
            got: format!("{a} reconstructed {what}"),
        })
    }
}

/// Compares reconstructed operators with their theoretical references.
pub fn score_reconstruction(
    rec_states: &PrepMatrix,
    true_states: &[StokesVector],
    rec_povms: &MeasMatrix,
    true_povms: &[ObservableVector],
) -> Result<ReconstructionScore> {
    same_len("states", rec_states.len(), true_states.len())?;
    same_len("POVMs", rec_povms.len(), true_povms.len())?;
    let state_fidelities = rec_states
        .rows
        .iter()
        .zip(true_states)
        .map(|(r, t)| fidelity(&density_from_stokes(r), &density_from_stokes(t)))
        .collect();
    let mut povm_fidelities = Vec::with_capacity(true_povms.len());
    let mut povm_relative_errors = Vec::with_capacity(true_povms.len());
    for (r, t) in rec_povms.cols.iter().zip(true_povms) {
        let (er, et) = (povm_from_observable(r).e, povm_from_observable(t).e);
        povm_fidelities.push(operator_fidelity(&er, &et)?);
        povm_relative_errors.push(relative_error(&er, &et)?);
    }
    Ok(ReconstructionScore {
        state_fidelities,
        povm_fidelities,
        povm_relative_errors,
        state_renormalized: rec_states.renormalized.clone(),
        povm_renormalized: rec_povms.renormalized.clone(),
    })
}

/// `S_a^i = p_a · w_i` for the given rows and columns.
pub fn reproduce(p: &[Vec3], w: &[Vec3]) -> Vec<f64> {
    p.iter().flat_map(|pa| w.iter().map(move |wi| dot(pa, wi))).collect()
}
