//! Correlated SPAM-error detection with the partial determinant.
//!
//! A 6×6 expectation matrix is split into 3×3 corners
//!
//! ```text
//! S = | A  B |        Δ(S) = A⁻¹ B D⁻¹ C
//!     | C  D |
//! ```
//!
//! and `Δ(S) = 1` holds exactly whenever `S = P W` for some 6×3 `P` and 3×6
//! `W`, i.e. when preparations and measurements are uncorrelated. Deviations
//! of `Δ − 1` from zero, measured in units of their repetition-to-repetition
//! spread, flag correlated errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Corner, Error, Result};
use crate::linalg::{Mat3, SINGULAR_CUTOFF};
use crate::optics::Scheme;

/// Slack allowed beyond `[-1, 1]` for measured expectation values.
pub const RANGE_EPS: f64 = 1e-9;
/// Default significance threshold, in standard deviations.
pub const DEFAULT_THRESHOLD: f64 = 3.0;
/// Below this sample spread a statistic is treated as noiseless.
const DEGENERATE_STD: f64 = 1e-12;
/// With a noiseless statistic, means below this are treated as exact zeros.
const DEGENERATE_MEAN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixShape {
    /// 6×6: 2n preparations × 2n settings.
    Full6,
    /// 4×4: n+1 preparations × n+1 settings.
    Compact4,
}

impl MatrixShape {
    pub fn dim(&self) -> usize {
        match self {
            MatrixShape::Full6 => 6,
            MatrixShape::Compact4 => 4,
        }
    }
}

impl fmt::Display for MatrixShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.dim();
        write!(f, "{n}x{n}")
    }
}

/// Square matrix of expectation values `S_a^i`: rows are preparations,
/// columns are measurement settings. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct ExpectationMatrix {
    shape: MatrixShape,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    shape: MatrixShape,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixRepr> for ExpectationMatrix {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        let n = r.shape.dim();
        if r.rows.len() != n || r.rows.iter().any(|row| row.len() != n) {
            return Err(Error::Shape {
                expected: r.shape.to_string(),
                got: format!("{} ragged rows", r.rows.len()),
            });
        }
        ExpectationMatrix::new(r.shape, r.rows.into_iter().flatten().collect())
    }
}

impl From<ExpectationMatrix> for MatrixRepr {
    fn from(m: ExpectationMatrix) -> Self {
        MatrixRepr {
            shape: m.shape,
            rows: m.rows().map(<[f64]>::to_vec).collect(),
        }
    }
}

impl ExpectationMatrix {
    /// Row-major values; every entry must lie in `[-1 - ε, 1 + ε]`.
    pub fn new(shape: MatrixShape, values: Vec<f64>) -> Result<Self> {
        let n = shape.dim();
        if values.len() != n * n {
            return Err(Error::Shape {
                expected: format!("{} values", n * n),
                got: format!("{} values", values.len()),
            });
        }
        if let Some(k) = values.iter().position(|v| !(v.abs() <= 1.0 + RANGE_EPS)) {
            return Err(Error::Range {
                block: 0,
                row: k / n + 1,
                col: k % n + 1,
                value: values[k],
            });
        }
        Ok(ExpectationMatrix { shape, values })
    }

    /// Skips the range check; for synthetic matrices such as perturbation studies.
    pub fn new_unchecked(shape: MatrixShape, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), shape.dim() * shape.dim(), "value count must match shape");
        ExpectationMatrix { shape, values }
    }

    /// Builds a matrix from `S_a^i = f(a, i)`.
    pub fn from_fn(shape: MatrixShape, f: impl Fn(usize, usize) -> f64) -> Self {
        let n = shape.dim();
        let values = (0..n * n).map(|k| f(k / n, k % n)).collect();
        ExpectationMatrix { shape, values }
    }

    pub fn shape(&self) -> MatrixShape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.dim() + col]
    }

    /// Returns a copy with `delta` added to one entry (no range check).
    pub fn perturbed(&self, row: usize, col: usize, delta: f64) -> Self {
        let mut out = self.clone();
        let n = self.dim();
        out.values[row * n + col] += delta;
        out
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let n = self.dim();
        &self.values[r * n..(r + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// 3×3 block with top-left corner at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize) -> Mat3 {
        Mat3::from_fn(|r, c| self.get(r0 + r, c0 + c))
    }

    /// The 6×6 view used for analysis: embeds compact matrices, clones full ones.
    pub fn to_full(&self) -> Self {
        match self.shape {
            MatrixShape::Full6 => self.clone(),
            MatrixShape::Compact4 => embed_n_plus_1(self).expect("shape checked"),
        }
    }
}

/// Source index (0-based) of each row/column of the embedded 6×6 matrix.
const EMBED_INDEX: [usize; 6] = [0, 1, 2, 3, 1, 2];

/// Expands `(n+1)²` measurements into a `2n × 2n` matrix: rows/cols 1–4 are
/// copied, rows/cols 5 and 6 duplicate rows/cols 2 and 3.
pub fn embed_n_plus_1(compact: &ExpectationMatrix) -> Result<ExpectationMatrix> {
    if compact.shape != MatrixShape::Compact4 {
        return Err(Error::Shape {
            expected: MatrixShape::Compact4.to_string(),
            got: compact.shape.to_string(),
        });
    }
    Ok(ExpectationMatrix::from_fn(MatrixShape::Full6, |r, c| {
        compact.get(EMBED_INDEX[r], EMBED_INDEX[c])
    }))
}

/// Recovers the 4×4 measurements from an embedded matrix (drops rows/cols 5, 6).
pub fn extract_compact(full: &ExpectationMatrix) -> Result<ExpectationMatrix> {
    if full.shape != MatrixShape::Full6 {
        return Err(Error::Shape {
            expected: MatrixShape::Full6.to_string(),
            got: full.shape.to_string(),
        });
    }
    Ok(ExpectationMatrix::from_fn(MatrixShape::Compact4, |r, c| full.get(r, c)))
}

/// `Δ(S) = A⁻¹ B D⁻¹ C`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialDeterminant {
    pub delta: Mat3,
}

impl PartialDeterminant {
    /// `Δ − 1`
    pub fn deviation(&self) -> Mat3 {
        self.delta - Mat3::IDENTITY
    }
}

fn invert_corner(m: &Mat3, corner: Corner) -> Result<Mat3> {
    m.try_inverse(SINGULAR_CUTOFF).ok_or(Error::SingularCorner {
        corner,
        rel_det: m.relative_det(),
    })
}

pub fn partial_determinant(s: &ExpectationMatrix) -> Result<PartialDeterminant> {
    if s.shape != MatrixShape::Full6 {
        return Err(Error::Shape {
            expected: MatrixShape::Full6.to_string(),
            got: s.shape.to_string(),
        });
    }
    let a_inv = invert_corner(&s.block(0, 0), Corner::A)?;
    let d_inv = invert_corner(&s.block(3, 3), Corner::D)?;
    let delta = a_inv * s.block(0, 3) * d_inv * s.block(3, 0);
    Ok(PartialDeterminant { delta })
}

/// Element-wise statistics of `Δ(S) − 1` across repeated measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaStats {
    pub mean: Mat3,
    /// Sample standard deviation (N − 1 denominator).
    pub std: Mat3,
    /// `|mean| / std`; `+∞` when a nonzero mean has no spread.
    #[serde(with = "sentinel_grid")]
    pub significance: Mat3,
    pub repetitions: usize,
}

fn significance(mean: f64, std: f64) -> f64 {
    if std > DEGENERATE_STD {
        mean.abs() / std
    } else if mean.abs() <= DEGENERATE_MEAN {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Mean, spread and significance of `Δ − 1` over full 6×6 samples.
///
/// Compact samples are embedded first. Summation order is fixed so results are
/// bit-reproducible.
pub fn delta_statistics(samples: &[ExpectationMatrix]) -> Result<DeltaStats> {
    if samples.len() < 2 {
        return Err(Error::InsufficientSamples(samples.len()));
    }
    let deviations = samples
        .iter()
        .enumerate()
        .map(|(index, s)| {
            partial_determinant(&s.to_full())
                .map(|pd| pd.deviation())
                .map_err(|e| Error::Sample {
                    index,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = deviations.len() as f64;
    let mut mean = Mat3::ZERO;
    for d in &deviations {
        mean = mean + *d;
    }
    let mean = Mat3::from_fn(|r, c| mean[(r, c)] / n);
    let mut var = Mat3::ZERO;
    for d in &deviations {
        var = var + Mat3::from_fn(|r, c| (d[(r, c)] - mean[(r, c)]).powi(2));
    }
    let std = Mat3::from_fn(|r, c| (var[(r, c)] / (n - 1.0)).sqrt());
    let significance = Mat3::from_fn(|r, c| significance(mean[(r, c)], std[(r, c)]));
    Ok(DeltaStats {
        mean,
        std,
        significance,
        repetitions: deviations.len(),
    })
}

/// An element of `Δ − 1` (1-based row and column) above the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlaggedElement {
    pub row: usize,
    pub col: usize,
    #[serde(with = "sentinel")]
    pub significance: f64,
}

/// A (preparation, setting) pair, both 1-based, that may carry a correlated error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub prep: usize,
    pub setting: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Localization {
    /// `localize` has not been run.
    Pending,
    /// Nothing was flagged.
    NoError,
    /// Candidate pairs are listed; each flagged row/column maps to several
    /// preparations/settings that the partial determinant cannot tell apart.
    Candidates,
    /// An error is present but its location cannot be recovered.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub detected: bool,
    pub threshold: f64,
    pub flagged_elements: Vec<FlaggedElement>,
    pub candidate_locations: Vec<Candidate>,
    pub localization: Localization,
    pub note: String,
    pub scheme: Option<Scheme>,
}

impl DetectionReport {
    pub fn flagged_set(&self) -> Vec<(usize, usize)> {
        self.flagged_elements.iter().map(|f| (f.row, f.col)).collect()
    }
}

/// Flags every element of `Δ − 1` whose significance exceeds `threshold`.
pub fn detect(stats: &DeltaStats, threshold: f64) -> DetectionReport {
    assert!(threshold > 0.0, "detection threshold must be positive");
    let mut flagged = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let z = stats.significance[(r, c)];
            if z > threshold {
                flagged.push(FlaggedElement {
                    row: r + 1,
                    col: c + 1,
                    significance: z,
                });
            }
        }
    }
    DetectionReport {
        detected: !flagged.is_empty(),
        threshold,
        flagged_elements: flagged,
        candidate_locations: Vec::new(),
        localization: Localization::Pending,
        note: String::new(),
        scheme: None,
    }
}

/// Preparations (or settings) that feed row (or column) `k` of `Δ`, 1-based.
fn sources(scheme: Scheme, k: usize) -> Vec<usize> {
    match scheme {
        Scheme::TwoN => vec![k, k + 3],
        // rows/cols 5 and 6 of the embedded matrix are copies of 2 and 3
        Scheme::NPlusOne => {
            let twin = EMBED_INDEX[k + 2] + 1;
            if twin == k {
                vec![k]
            } else {
                vec![k, twin]
            }
        }
    }
}

fn candidates_from(scheme: Scheme, elements: &[&FlaggedElement]) -> Vec<Candidate> {
    let mut rows: Vec<usize> = elements.iter().map(|f| f.row).collect();
    let mut cols: Vec<usize> = elements.iter().map(|f| f.col).collect();
    rows.sort_unstable();
    rows.dedup();
    cols.sort_unstable();
    cols.dedup();
    let mut out = Vec::new();
    for &r in &rows {
        for &c in &cols {
            for prep in sources(scheme, r) {
                for setting in sources(scheme, c) {
                    out.push(Candidate { prep, setting });
                }
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Maps the flagged pattern of `Δ − 1` back to candidate (preparation, setting) pairs.
pub fn localize(mut report: DetectionReport, scheme: Scheme) -> DetectionReport {
    report.scheme = Some(scheme);
    report.candidate_locations.clear();
    if !report.detected {
        report.localization = Localization::NoError;
        report.note = "no correlated error detected".into();
        return report;
    }
    match scheme {
        Scheme::TwoN => {
            let all: Vec<_> = report.flagged_elements.iter().collect();
            report.candidate_locations = candidates_from(scheme, &all);
            report.localization = Localization::Candidates;
            report.note = "flagged rows x flagged columns; row/column k of the partial determinant \
                           covers preparations/settings k and k+3"
                .into();
        }
        Scheme::NPlusOne => {
            let off_axis: Vec<_> = report
                .flagged_elements
                .iter()
                .filter(|f| f.row != 1 && f.col != 1)
                .collect();
            if off_axis.is_empty() {
                report.localization = Localization::Indeterminate;
                report.note = "error present, location indeterminate: flags confined to row 1 and column 1".into();
            } else {
                report.candidate_locations = candidates_from(scheme, &off_axis);
                report.localization = Localization::Candidates;
                report.note = "candidates from flags outside row 1 and column 1; row 1 / column 1 flags \
                               are expected duplication artifacts of the n+1 embedding"
                    .into();
            }
        }
    }
    report
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`.
mod sentinel {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Word(String),
    }

    pub(super) fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Word("nan".into())
        } else if v > 0.0 {
            Repr::Word("inf".into())
        } else {
            Repr::Word("-inf".into())
        }
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Word(w) => match w.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("invalid number `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod sentinel_grid {
    use super::sentinel::{from_repr, to_repr, Repr};
    use crate::linalg::Mat3;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Mat3, s: S) -> Result<S::Ok, S::Error> {
        let grid: Vec<Vec<Repr>> = m.0.iter().map(|row| row.iter().map(|v| to_repr(*v)).collect()).collect();
        grid.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Mat3, D::Error> {
        let grid: [[Repr; 3]; 3] = Deserialize::deserialize(d)?;
        let mut m = Mat3::ZERO;
        for (r, row) in grid.into_iter().enumerate() {
            for (c, v) in row.into_iter().enumerate() {
                m[(r, c)] = from_repr(v)?;
            }
        }
        Ok(m)
    }
}
