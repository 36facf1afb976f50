//! Dense symmetric eigen-analysis of the condensed stiffness matrix.
//!
//! The condensed matrix is small (q ≲ 100), so a full dense symmetric
//! eigensolve is used. Eigenvalues are returned ascending with unit-norm
//! eigenvectors; each eigenvector is sign-fixed so its largest-magnitude
//! entry is positive, making mode signs deterministic across runs.
//!
//! The first `m` eigenvalues are the primary (kinematic) stiffnesses, the
//! `(m+1)`-th is the secondary stiffness, and their ratio
//! `S = λ_{m+1} / λ_m` is the selectivity of the mechanism.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Relative symmetry tolerance for eigensolver inputs.
const SYMMETRY_TOL: f64 = 1e-8;

/// Spectrum of a condensed stiffness matrix.
#[derive(Debug, Clone)]
pub struct ModalResult {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Unit-norm eigenvectors as columns, ordered like `eigenvalues`.
    pub modes: DMatrix<f64>,
    /// Number of kinematic (primary) modes.
    pub m: usize,
}

impl ModalResult {
    /// Matrix dimension q.
    pub fn q(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The first `m` (kinematic) mode columns.
    pub fn kinematic(&self) -> DMatrix<f64> {
        self.modes.columns(0, self.m).into_owned()
    }

    /// The remaining (parasitic) mode columns.
    pub fn parasitic(&self) -> DMatrix<f64> {
        self.modes.columns(self.m, self.q() - self.m).into_owned()
    }
}

/// Stiffness summary of a spectrum: primary stiffnesses, secondary
/// stiffness, and selectivity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StiffnessSummary {
    /// Primary stiffnesses `λ₁ … λ_m`.
    pub primary: Vec<f64>,
    /// Secondary stiffness `λ_{m+1}`.
    pub secondary: f64,
    /// Selectivity `S = λ_{m+1} / λ_m`.
    pub selectivity: f64,
}

/// Flip each column so its largest-magnitude entry is positive (first
/// occurrence wins on exact magnitude ties).
pub fn fix_signs(modes: &mut DMatrix<f64>) {
    for mut col in modes.column_iter_mut() {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > best_abs {
                best_abs = v.abs();
                best = i;
            }
        }
        if col[best] < 0.0 {
            col.neg_mut();
        }
    }
}

/// Eigen-decomposition of a symmetric matrix with ascending eigenvalues,
/// unit-norm sign-fixed eigenvectors, and `m` kinematic modes.
pub fn eigen(kbar: &DMatrix<f64>, m: usize) -> Result<ModalResult> {
    let q = kbar.nrows();
    if q == 0 || kbar.ncols() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: kbar.ncols(),
            context: "eigen input must be square",
        });
    }
    if m >= q {
        return Err(Error::InvalidConfig(format!(
            "m = {m} kinematic modes require q > m (got q = {q})"
        )));
    }
    let scale = kbar.norm().max(f64::MIN_POSITIVE);
    let max_asym = (kbar - kbar.transpose()).amax();
    if max_asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric { max_asym });
    }
    // Symmetrize to remove round-off asymmetry before decomposing.
    let sym = 0.5 * (kbar + kbar.transpose());
    let decomp = SymmetricEigen::new(sym);

    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&a, &b| {
        decomp.eigenvalues[a]
            .partial_cmp(&decomp.eigenvalues[b])
            .expect("eigenvalues must not be NaN")
    });
    let eigenvalues: Vec<f64> = order.iter().map(|&i| decomp.eigenvalues[i]).collect();
    let mut modes = DMatrix::zeros(q, q);
    for (c, &i) in order.iter().enumerate() {
        modes.set_column(c, &decomp.eigenvectors.column(i));
    }
    fix_signs(&mut modes);
    Ok(ModalResult {
        eigenvalues,
        modes,
        m,
    })
}

/// Primary/secondary stiffnesses and selectivity for `m` kinematic modes.
pub fn summarize(modal: &ModalResult, m: usize) -> Result<StiffnessSummary> {
    let q = modal.q();
    if m == 0 || m >= q {
        return Err(Error::InvalidConfig(format!(
            "summary requires 0 < m < q (m = {m}, q = {q})"
        )));
    }
    let primary = modal.eigenvalues[..m].to_vec();
    let secondary = modal.eigenvalues[m];
    let lambda_m = modal.eigenvalues[m - 1];
    if lambda_m <= 0.0 {
        return Err(Error::Numerical(format!(
            "selectivity undefined: λ_{m} = {lambda_m} is not positive"
        )));
    }
    Ok(StiffnessSummary {
        primary,
        secondary,
        selectivity: secondary / lambda_m,
    })
}

/// Coordinates of a displacement in an orthonormal mode basis plus the
/// out-of-basis residual norm: `u = modes·α + r`, `α = modesᵀ u`.
pub fn modal_coordinates(u: &DVector<f64>, modes: &DMatrix<f64>) -> Result<(DVector<f64>, f64)> {
    if modes.nrows() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: modes.nrows(),
            got: u.len(),
            context: "displacement vs mode basis",
        });
    }
    crate::modes::check_orthonormal(modes, 1e-8)?;
    let alpha = modes.transpose() * u;
    let residual = (u - modes * &alpha).norm();
    Ok((alpha, residual))
}
