//! Fixed-size real 3-vectors and 3×3 matrices.
//!
//! Everything here is closed form: determinants and inverses go through the
//! adjugate, which is exact enough for the 3×3 blocks this crate works with.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use serde::{Deserialize, Serialize};

pub type Vec3 = [f64; 3];

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn scale(a: &Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

/// Relative cutoff below which a 3×3 block is treated as singular.
pub const SINGULAR_CUTOFF: f64 = 1e-10;

/// Row-major 3×3 real matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const ZERO: Mat3 = Mat3([[0.0; 3]; 3]);
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_rows(rows: [Vec3; 3]) -> Self {
        Mat3(rows)
    }

    pub fn from_cols(cols: [Vec3; 3]) -> Self {
        Mat3(cols).transpose()
    }

    pub fn from_fn(f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Mat3::ZERO;
        for r in 0..3 {
            for c in 0..3 {
                m.0[r][c] = f(r, c);
            }
        }
        m
    }

    pub fn row(&self, r: usize) -> Vec3 {
        self.0[r]
    }

    pub fn col(&self, c: usize) -> Vec3 {
        [self.0[0][c], self.0[1][c], self.0[2][c]]
    }

    pub fn transpose(&self) -> Mat3 {
        Mat3::from_fn(|r, c| self.0[c][r])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn adjugate(&self) -> Mat3 {
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
        // adj = transpose of the cofactor matrix
        Mat3([
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ])
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()))
    }

    /// Determinant measured against the matrix scale, `det / (‖M‖_F / √3)³`.
    ///
    /// Equals 1 for the identity and any rotation; zero for a zero matrix.
    pub fn relative_det(&self) -> f64 {
        let s = self.frobenius() / 3f64.sqrt();
        if s == 0.0 {
            return 0.0;
        }
        self.det() / (s * s * s)
    }

    /// Inverse, or `None` when `|relative_det| <= cutoff`.
    pub fn try_inverse(&self, cutoff: f64) -> Option<Mat3> {
        if !(self.relative_det().abs() > cutoff) {
            return None;
        }
        let inv_det = 1.0 / self.det();
        let adj = self.adjugate();
        Some(Mat3::from_fn(|r, c| adj.0[r][c] * inv_det))
    }

    pub fn inverse(&self) -> Option<Mat3> {
        self.try_inverse(SINGULAR_CUTOFF)
    }

    /// `M v` with `v` a column vector.
    pub fn mul_vec(&self, v: &Vec3) -> Vec3 {
        [dot(&self.0[0], v), dot(&self.0[1], v), dot(&self.0[2], v)]
    }

    /// `v M` with `v` a row vector.
    pub fn vec_mul(v: &Vec3, m: &Mat3) -> Vec3 {
        [dot(v, &m.col(0)), dot(v, &m.col(1)), dot(v, &m.col(2))]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Mat3 {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.0[r][c]
    }
}

impl IndexMut<(usize, usize)> for Mat3 {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.0[r][c]
    }
}

impl Mul for Mat3 {
    type Output = Mat3;
    fn mul(self, rhs: Mat3) -> Mat3 {
        Mat3::from_fn(|r, c| (0..3).map(|k| self.0[r][k] * rhs.0[k][c]).sum())
    }
}

impl Add for Mat3 {
    type Output = Mat3;
    fn add(self, rhs: Mat3) -> Mat3 {
        Mat3::from_fn(|r, c| self.0[r][c] + rhs.0[r][c])
    }
}

impl Sub for Mat3 {
    type Output = Mat3;
    fn sub(self, rhs: Mat3) -> Mat3 {
        Mat3::from_fn(|r, c| self.0[r][c] - rhs.0[r][c])
    }
}
