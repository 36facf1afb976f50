//! Symmetric positive-definite band matrices with an in-place Cholesky
//! factorization.
//!
//! Lattice node numbering keeps the passive stiffness block inside a narrow
//! band (half-bandwidth ≈ 3·(nx+1) for a radius-1 grid), so an LLᵀ band
//! factorization costs O(n·bw²) instead of O(n³) and is re-run once per
//! synthesis iteration. With `bandwidth = n − 1` the code degenerates to a
//! plain dense Cholesky, which the tests exploit.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::Result;

/// Symmetric band matrix, lower storage.
///
/// Entry `A[j + d, j]` for `d ∈ 0..=bandwidth` lives at `data[d * n + j]`;
/// everything below the band is structurally zero.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    bandwidth: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bw = if n == 0 { 0 } else { bandwidth.min(n - 1) };
        Self {
            n,
            bandwidth: bw,
            data: vec![0.0; (bw + 1) * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Accumulate into `A[i, j]` (lower triangle, `i ≥ j`, `i − j ≤ bw`).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i >= j, "lower-triangle storage requires i >= j");
        debug_assert!(i - j <= self.bandwidth, "entry outside the band");
        self.data[(i - j) * self.n + j] += value;
    }

    #[inline]
    fn at(&self, d: usize, j: usize) -> f64 {
        self.data[d * self.n + j]
    }

    /// Dense copy (tests and small-system paths).
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for d in 0..=self.bandwidth.min(self.n - 1 - j) {
                m[(j + d, j)] = self.at(d, j);
                m[(j, j + d)] = self.at(d, j);
            }
        }
        m
    }

    /// In-place LLᵀ factorization. Fails with
    /// [`Error::NotPositiveDefinite`] when a pivot is not strictly positive.
    pub fn cholesky(mut self) -> Result<BandCholesky> {
        let (n, bw) = (self.n, self.bandwidth);
        for j in 0..n {
            let pivot = self.data[j];
            if !(pivot.is_finite() && pivot > 0.0) {
                return Err(Error::NotPositiveDefinite("band Cholesky pivot"));
            }
            let ljj = pivot.sqrt();
            self.data[j] = ljj;
            let w = bw.min(n - 1 - j);
            for d in 1..=w {
                self.data[d * n + j] /= ljj;
            }
            // Right-looking rank-1 update of the trailing columns in the band.
            for c in 1..=w {
                let ljc = self.data[c * n + j]; // L[j+c, j]
                if ljc == 0.0 {
                    continue;
                }
                let col = j + c;
                for d2 in 0..=(w - c) {
                    self.data[d2 * n + col] -= ljc * self.data[(c + d2) * n + j];
                }
            }
        }
        Ok(BandCholesky { matrix: self })
    }
}

/// Factorized band matrix `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BandCholesky {
    matrix: BandMatrix,
}

impl BandCholesky {
    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, bw) = (self.matrix.n, self.matrix.bandwidth);
        debug_assert_eq!(b.len(), n);
        let l = &self.matrix.data;
        // Forward substitution L y = b (column-oriented).
        for j in 0..n {
            let yj = b[j] / l[j];
            b[j] = yj;
            let w = bw.min(n - 1 - j);
            for d in 1..=w {
                b[j + d] -= l[d * n + j] * yj;
            }
        }
        // Backward substitution Lᵀ x = y.
        for j in (0..n).rev() {
            let w = bw.min(n - 1 - j);
            let mut acc = b[j];
            for d in 1..=w {
                acc -= l[d * n + j] * b[j + d];
            }
            b[j] = acc / l[j];
        }
    }

    /// Solve `A x = b`, returning a fresh vector.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = b.clone();
        self.solve_in_place(out.as_mut_slice());
        out
    }

    /// Solve `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = b.clone();
        for mut col in out.column_iter_mut() {
            let slice: &mut [f64] = col.as_mut_slice();
            self.solve_in_place(slice);
        }
        out
    }
}
