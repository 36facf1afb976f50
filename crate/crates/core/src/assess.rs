//! Design assessment: least-squares recombination of the kinematic
//! eigenmodes, the extended cosine similarity, and load-case simulation.
//!
//! A synthesized design is good when the span of the first `m` eigenmodes
//! `X̄_d` of its condensed stiffness matrix matches the span of the desired
//! modes `Φ̄`. Because both bases are orthonormal, the best least-squares
//! reconstruction of `φ̄ᵢ` from the eigenmodes has coefficients
//! `αᵢⱼ = χ̄ⱼᵀφ̄ᵢ`, and the subspace alignment is summarized by the
//! extended cosine similarity `δ_e = √β₁`, where `β₁` is the smallest
//! eigenvalue of `Φ̄ᵀX̄_d X̄_dᵀΦ̄`. `δ_e` is 1 exactly when the subspaces
//! coincide, 0 when some desired direction is orthogonal to the achieved
//! span, and reduces to the ordinary |cosine| for one-dimensional modes.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::Error;
use crate::modes::check_orthonormal;
use crate::reduction::CondensedSystem;
use crate::spectra::{modal_coordinates, ModalResult};
use crate::Result;

/// Orthonormality tolerance for metric inputs.
const ORTHO_TOL: f64 = 1e-8;

/// Least-squares reconstruction of desired modes from kinematic eigenmodes
/// plus the subspace-similarity spectrum.
#[derive(Debug, Clone)]
pub struct SimilarityReport {
    /// Reconstruction coefficients; row `i` holds `αᵢⱼ = χ̄ⱼᵀφ̄ᵢ`.
    pub coefficients: DMatrix<f64>,
    /// Reconstructions `φ̄′ᵢ = Σⱼ αᵢⱼ χ̄ⱼ` as columns (q×m).
    pub approximations: DMatrix<f64>,
    /// Per-mode residuals `‖φ̄ᵢ − φ̄′ᵢ‖₂`.
    pub residuals: Vec<f64>,
    /// Extended cosine similarity `δ_e = √β₁ ∈ [0, 1]`.
    pub delta_e: f64,
    /// Eigenvalues `β` of `Φ̄ᵀX̄_d X̄_dᵀΦ̄`, ascending.
    pub betas: Vec<f64>,
    /// Corresponding eigenvectors `b` as columns.
    pub basis: DMatrix<f64>,
}

fn check_mode_sets(phibar: &DMatrix<f64>, kinematic: &DMatrix<f64>) -> Result<()> {
    if phibar.nrows() != kinematic.nrows() {
        return Err(Error::DimensionMismatch {
            expected: phibar.nrows(),
            got: kinematic.nrows(),
            context: "mode sets must share the active-DoF space",
        });
    }
    if phibar.ncols() == 0 || phibar.ncols() > kinematic.ncols() {
        return Err(Error::InvalidDofSelection(format!(
            "{} desired modes cannot be fitted with {} eigenmodes",
            phibar.ncols(),
            kinematic.ncols()
        )));
    }
    check_orthonormal(phibar, ORTHO_TOL)?;
    check_orthonormal(kinematic, ORTHO_TOL)?;
    Ok(())
}

/// Similarity spectrum of two orthonormal mode sets: eigenpairs of
/// `Φ̄ᵀX̄_d X̄_dᵀΦ̄`, ascending.
fn similarity_spectrum(
    phibar: &DMatrix<f64>,
    kinematic: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let c = kinematic.transpose() * phibar;
    let gram = c.transpose() * &c;
    let modal = crate::spectra::eigen(&gram, 0)?;
    Ok((modal.eigenvalues, modal.modes))
}

/// Extended cosine similarity `δ_e` between the desired modes and the
/// kinematic eigenmodes (both orthonormal column sets on the same DoFs).
pub fn extended_cosine(phibar: &DMatrix<f64>, kinematic: &DMatrix<f64>) -> Result<f64> {
    check_mode_sets(phibar, kinematic)?;
    let (betas, _) = similarity_spectrum(phibar, kinematic)?;
    Ok(betas[0].clamp(0.0, 1.0).sqrt())
}

/// Least-squares fit of each desired mode by the kinematic eigenmodes,
/// with the full similarity report.
pub fn least_squares_fit(
    phibar: &DMatrix<f64>,
    kinematic: &DMatrix<f64>,
) -> Result<SimilarityReport> {
    check_mode_sets(phibar, kinematic)?;
    // With orthonormal χ̄ the normal equations collapse to α = Φ̄ᵀX̄_d.
    let coefficients = phibar.transpose() * kinematic;
    let approximations = kinematic * coefficients.transpose();
    let residuals: Vec<f64> = (0..phibar.ncols())
        .map(|i| (phibar.column(i) - approximations.column(i)).norm())
        .collect();
    let (betas, basis) = similarity_spectrum(phibar, kinematic)?;
    Ok(SimilarityReport {
        coefficients,
        approximations,
        residuals,
        delta_e: betas[0].clamp(0.0, 1.0).sqrt(),
        betas,
        basis,
    })
}

/// Static response of a condensed system to one active-DoF force vector.
#[derive(Debug, Clone)]
pub struct LoadCase {
    /// Applied forces on the active DoFs.
    pub forces: Vec<f64>,
    /// Active-DoF displacements solving `K̄ u = f`.
    pub displacement: Vec<f64>,
    /// Displacement expanded to the full free system (for rendering).
    pub expanded: Vec<f64>,
    /// Modal coordinates of `u` in the eigenmode basis.
    pub coordinates: Vec<f64>,
    /// Norm of the parasitic (non-kinematic) part of `u`.
    pub parasitic_residual: f64,
    /// `‖kinematic part‖ / ‖u‖` (1 for a pure desired-mode response).
    pub kinematic_fraction: f64,
}

/// Solve `K̄ u = f`, expand the response, and split it into kinematic and
/// parasitic modal content.
pub fn simulate(
    kbar: &DMatrix<f64>,
    sys: &CondensedSystem,
    modal: &ModalResult,
    forces: &DVector<f64>,
) -> Result<LoadCase> {
    let q = kbar.nrows();
    if forces.len() != q || modal.q() != q || sys.partition.n_active() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: forces.len(),
            context: "load vector vs condensed system",
        });
    }
    let chol =
        Cholesky::new(kbar.clone()).ok_or(Error::NotPositiveDefinite("condensed stiffness"))?;
    let u = chol.solve(forces);
    let residual = (kbar * &u - forces).norm();
    if residual > 1e-9 * forces.norm().max(1.0) {
        return Err(Error::Numerical(format!(
            "load-case solve residual {residual:.3e} exceeds tolerance"
        )));
    }
    let (coords, _) = modal_coordinates(&u, &modal.modes)?;
    let kinematic_norm = coords.rows(0, modal.m).norm();
    let parasitic_residual = coords.rows(modal.m, q - modal.m).norm();
    let total = u.norm();
    let expanded = sys.expand(&u)?;
    Ok(LoadCase {
        forces: forces.iter().copied().collect(),
        displacement: u.iter().copied().collect(),
        expanded: expanded.iter().copied().collect(),
        coordinates: coords.iter().copied().collect(),
        parasitic_residual,
        kinematic_fraction: if total > 0.0 {
            kinematic_norm / total
        } else {
            1.0
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthonormal(q: usize, m: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw = DMatrix::from_fn(q, m, |_, _| rng.random_range(-1.0..1.0));
        crate::modes::orthonormalize(raw).unwrap()
    }

    #[test]
    fn identical_subspaces_have_unit_similarity() {
        let v = random_orthonormal(6, 2, 7);
        assert_relative_eq!(extended_cosine(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_vectors_have_zero_similarity() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let e2 = DMatrix::from_column_slice(3, 1, &[0.0, 1.0, 0.0]);
        assert_relative_eq!(extended_cosine(&e1, &e2).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn one_dimensional_case_is_plain_cosine() {
        let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let angle: f64 = 0.4;
        let b = DMatrix::from_column_slice(2, 1, &[angle.cos(), angle.sin()]);
        let d = extended_cosine(&a, &b).unwrap();
        assert_relative_eq!(d, angle.cos(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_of_either_basis_leaves_similarity_unchanged() {
        let phibar = random_orthonormal(8, 3, 11);
        let kin = random_orthonormal(8, 3, 13);
        let d0 = extended_cosine(&phibar, &kin).unwrap();
        // Rotate the achieved basis by an arbitrary orthogonal Q.
        let q = random_orthonormal(3, 3, 17);
        let rotated = &kin * &q;
        let d1 = extended_cosine(&phibar, &rotated).unwrap();
        assert_relative_eq!(d0, d1, epsilon = 1e-10);
        // Symmetry of the metric.
        let d2 = extended_cosine(&kin, &phibar).unwrap();
        assert_relative_eq!(d0, d2, epsilon = 1e-10);
    }

    #[test]
    fn similarity_stays_in_unit_interval() {
        for seed in 0..20 {
            let phibar = random_orthonormal(7, 2, 100 + seed);
            let kin = random_orthonormal(7, 3, 200 + seed);
            let d = extended_cosine(&phibar, &kin).unwrap();
            assert!((0.0..=1.0).contains(&d), "δ_e = {d} out of range");
        }
    }

    #[test]
    fn fit_of_a_basis_vector_is_exact() {
        let kin = random_orthonormal(6, 3, 23);
        let phibar = kin.columns(0, 1).into_owned();
        let report = least_squares_fit(&phibar, &kin).unwrap();
        assert_relative_eq!(report.coefficients[(0, 0)], 1.0, epsilon = 1e-12);
        assert!(report.coefficients[(0, 1)].abs() < 1e-12);
        assert!(report.residuals[0] < 1e-12);
        assert_relative_eq!(report.delta_e, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coefficients_match_normal_equations() {
        let kin = random_orthonormal(9, 4, 31);
        let phibar = random_orthonormal(9, 2, 37);
        let report = least_squares_fit(&phibar, &kin).unwrap();
        // Oracle: solve (X̄ᵀX̄) αᵢ = X̄ᵀφ̄ᵢ without using orthonormality.
        let gram = kin.transpose() * &kin;
        let lu = gram.full_piv_lu();
        for i in 0..2 {
            let rhs = kin.transpose() * phibar.column(i);
            let alpha = lu.solve(&rhs).unwrap();
            for j in 0..4 {
                assert_relative_eq!(report.coefficients[(i, j)], alpha[j], epsilon = 1e-10);
            }
            // Residual orthogonality: X̄ᵀ(φ̄ᵢ − φ̄′ᵢ) = 0.
            let resid = phibar.column(i) - report.approximations.column(i);
            assert!((kin.transpose() * resid).amax() < 1e-10);
        }
    }

    /// Published single-mode reconstruction: fitting the first desired
    /// mode with the printed converged eigenmodes reproduces the printed
    /// blend and its entries.
    #[test]
    fn published_reconstruction_of_first_desired_mode() {
        // Printed eigenmode table, orthonormalized to working precision
        // (the print precision itself is only 3–4 decimals).
        let printed = crate::spectra::published::pointer_mode_matrix();
        let kin4 = crate::modes::orthonormalize(printed).unwrap();
        let kin = kin4.columns(0, 2).into_owned();
        let s = 1.0 / 2.0f64.sqrt();
        let phibar = DMatrix::from_column_slice(4, 2, &[s, 0.0, s, 0.0, 0.0, -s, 0.0, s]);
        let report = least_squares_fit(&phibar, &kin).unwrap();
        // Printed blend: φ̄′₁ = 0.80 χ̄₁ − 0.60 χ̄₂ (signs depend on the
        // eigenvector sign convention, so compare magnitudes).
        assert_relative_eq!(report.coefficients[(0, 0)].abs(), 0.80, epsilon = 5e-3);
        assert_relative_eq!(report.coefficients[(0, 1)].abs(), 0.60, epsilon = 5e-3);
        let published = [0.7076, 0.0001, 0.7066, 0.0001];
        for (k, &want) in published.iter().enumerate() {
            assert!(
                (report.approximations[(k, 0)].abs() - want).abs() < 5e-4,
                "entry {k}: got {}, want {want}",
                report.approximations[(k, 0)]
            );
        }
    }

    #[test]
    fn non_orthonormal_inputs_are_rejected() {
        let bad = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 0.0]);
        let good = random_orthonormal(3, 2, 41);
        assert!(extended_cosine(&bad, &good).is_err());
        assert!(extended_cosine(&good, &bad).is_err());
        assert!(least_squares_fit(&bad, &good).is_err());
    }

    #[test]
    fn simulate_eigenvector_excitation_is_purely_kinematic() {
        // Two-spring chain condensed to the tip DoF is too small to split
        // modes, so build a 3×3 grid and excite the softest mode.
        use crate::model::{build_grid, GroundStructure, SectionProperties};
        use crate::reduction::{condense, partition, DofPartition};
        use std::collections::BTreeSet;

        let section = SectionProperties::new(20.0, 3000.0, 500.0 / 3.0).unwrap();
        let (grid, elements) = build_grid(10.0, 10.0, 5.0, 1).unwrap();
        let supports: BTreeSet<usize> = (0..3).flat_map(|n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
        let gs = GroundStructure::new(grid, elements, section, supports).unwrap();
        let x = vec![0.35; gs.n_elements()];
        let k = gs.assemble_dense(&x).unwrap();
        // Active: x and y of the top-middle node (node 7), free DoF order.
        let a0 = gs.free_dof(3 * 7).unwrap();
        let a1 = gs.free_dof(3 * 7 + 1).unwrap();
        let part = DofPartition::new(vec![a0, a1], gs.n_free()).unwrap();
        let blocks = partition(&k, &part).unwrap();
        let sys = condense(&blocks).unwrap();
        let modal = crate::spectra::eigen(&sys.kbar, 1).unwrap();

        // Force along K̄χ̄₁ responds along χ̄₁ alone.
        let chi1 = modal.modes.column(0).into_owned();
        let f = &sys.kbar * &chi1;
        let case = simulate(&sys.kbar, &sys, &modal, &f).unwrap();
        assert!(case.parasitic_residual < 1e-9);
        assert_relative_eq!(case.kinematic_fraction, 1.0, epsilon = 1e-9);
        assert_relative_eq!(case.displacement[0], chi1[0], epsilon = 1e-9);

        // Zero force gives zero response.
        let zero = simulate(&sys.kbar, &sys, &modal, &DVector::zeros(2)).unwrap();
        assert!(zero.displacement.iter().all(|&v| v == 0.0));

        // A random force decomposes consistently with a direct solve.
        let f = DVector::from_column_slice(&[0.3, -0.8]);
        let case = simulate(&sys.kbar, &sys, &modal, &f).unwrap();
        let direct = Cholesky::new(sys.kbar.clone()).unwrap().solve(&f);
        for i in 0..2 {
            assert_relative_eq!(case.displacement[i], direct[i], epsilon = 1e-10);
        }
        let u = DVector::from_column_slice(&case.displacement);
        let norm_sq: f64 = case.coordinates.iter().map(|c| c * c).sum();
        assert_relative_eq!(norm_sq.sqrt(), u.norm(), epsilon = 1e-10);
    }
}
