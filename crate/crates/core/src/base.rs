//! Constrained eigenproblem for the undesired-mode base.
//!
//! Given the condensed stiffness `K̄` and the desired modes `Φ̄`, the
//! undesired base `Ψ̄ = [ψ̄₁ … ψ̄_{q−m}]` consists of stationary points of
//! the Rayleigh quotient `ψ̄ᵀK̄ψ̄` subject to
//!
//! * `Φ̄ᵀ K̄ ψ̄ = 0` (K̄-orthogonality to every desired mode),
//! * `ψ̄ᵢᵀ K̄ ψ̄ⱼ = 0` for `j < i` (K̄-orthogonality to earlier base vectors),
//! * `ψ̄ᵀψ̄ = 1`.
//!
//! Instead of solving one deflated minimization per vector, the whole base
//! comes from a single reduced eigenproblem: with `Z` an orthonormal basis
//! of the null space of `(K̄Φ̄)ᵀ`, every feasible vector is `ψ̄ = Z y` and
//! the stationary points are the eigenvectors of `Zᵀ K̄ Z`. Eigenvector
//! I-orthogonality in `y` gives both the unit norm and the mutual
//! K̄-orthogonality of the `ψ̄`; the Rayleigh quotients are the reduced
//! eigenvalues, ascending. The recursive one-at-a-time formulation is kept
//! in the tests as an oracle.

use nalgebra::{DMatrix, DVector};

use crate::error::Error;
use crate::modes::{check_orthonormal, DesiredModeSet};
use crate::reduction::CondensedSystem;
use crate::spectra::fix_signs;
use crate::Result;

/// Undesired-mode base on the condensed (active-DoF) system.
#[derive(Debug, Clone)]
pub struct CondensedBase {
    /// Base vectors `ψ̄₁ … ψ̄_{q−m}` as columns, Rayleigh quotients ascending.
    pub vectors: DMatrix<f64>,
    /// Rayleigh quotients `ψ̄ᵢᵀK̄ψ̄ᵢ`, ascending.
    pub quotients: Vec<f64>,
}

/// Desired and undesired modes together with their full-system expansions.
#[derive(Debug, Clone)]
pub struct OrthonormalBase {
    /// Desired modes `Φ̄` (q×m).
    pub desired: DMatrix<f64>,
    /// Undesired modes `Ψ̄` (q×(q−m)), Rayleigh quotients ascending.
    pub undesired: DMatrix<f64>,
    /// Rayleigh quotients of the undesired modes.
    pub quotients: Vec<f64>,
    /// Desired modes expanded to the full free system (p×m).
    pub expanded_desired: DMatrix<f64>,
    /// Undesired modes expanded to the full free system (p×(q−m)).
    pub expanded_undesired: DMatrix<f64>,
}

/// Solve the constrained eigenproblem on the condensed system.
pub fn solve_constrained_base(
    kbar: &DMatrix<f64>,
    modes: &DesiredModeSet,
) -> Result<CondensedBase> {
    let q = kbar.nrows();
    let m = modes.m();
    if modes.q() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: modes.q(),
            context: "desired modes vs condensed matrix",
        });
    }
    if m >= q {
        return Err(Error::InvalidConfig(format!(
            "need q > m for a non-empty undesired base (q = {q}, m = {m})"
        )));
    }
    check_orthonormal(&modes.columns, 1e-8)?;
    let scale = kbar.norm().max(f64::MIN_POSITIVE);
    let asym = (kbar - kbar.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::NotSymmetric { max_asym: asym });
    }

    // Null space of Nᵀ with N = K̄Φ̄, via a full QR of N: the last q−m
    // columns of Q span null(Nᵀ). The R diagonal provides the rank check
    // (N has full column rank whenever K̄ is nonsingular).
    let n_mat = kbar * &modes.columns;
    let n_norm = n_mat.norm();
    let qr = n_mat.clone().qr();
    let r_diag = qr.r();
    for i in 0..m {
        if r_diag[(i, i)].abs() <= 1e-12 * n_norm {
            return Err(Error::RankDeficient(format!(
                "K̄Φ̄ column {i} is dependent (|R_{i}{i}| below 1e-12 · ‖K̄Φ̄‖)"
            )));
        }
    }
    // Full Q by applying the stored reflectors to the identity.
    let mut q_t = DMatrix::<f64>::identity(q, q);
    qr.q_tr_mul(&mut q_t);
    let z = q_t.transpose().columns(m, q - m).into_owned();

    // Reduced symmetric eigenproblem Zᵀ K̄ Z (full spectrum, ascending).
    let reduced = z.transpose() * kbar * &z;
    let modal = crate::spectra::eigen(&reduced, 0)?;
    let mut vectors = &z * &modal.modes;
    fix_signs(&mut vectors);
    Ok(CondensedBase {
        vectors,
        quotients: modal.eigenvalues,
    })
}

/// Expand the desired and undesired modes through the condensed system's
/// static recovery.
pub fn expand_base(
    modes: &DesiredModeSet,
    base: &CondensedBase,
    sys: &CondensedSystem,
) -> Result<OrthonormalBase> {
    let expanded_desired = sys.expand_columns(&modes.columns)?;
    let expanded_undesired = sys.expand_columns(&base.vectors)?;
    Ok(OrthonormalBase {
        desired: modes.columns.clone(),
        undesired: base.vectors.clone(),
        quotients: base.quotients.clone(),
        expanded_desired,
        expanded_undesired,
    })
}

/// Full-rank column vector of unit norm: helper for tests and callers that
/// need a single expanded mode.
pub fn column(matrix: &DMatrix<f64>, j: usize) -> DVector<f64> {
    DVector::from_column_slice(matrix.column(j).as_slice())
}
