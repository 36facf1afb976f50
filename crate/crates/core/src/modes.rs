//! Desired deformation modes on the active DoFs.
//!
//! A mechanism's pseudo-mobility is specified as `m` orthonormal vectors on
//! the active DoFs. Raw shape vectors from a generator (or given verbatim in
//! the problem file) are orthonormalized by modified Gram–Schmidt in input
//! order, so the first column stays parallel to the first input.
//!
//! Generators assume the active-DoF layout produced by the problem loader:
//! node-major, `[n₁x, n₁y, n₂x, n₂y, …]`.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::Result;

/// Orthonormalized desired-mode set `Φ̄` (q×m columns).
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredModeSet {
    pub columns: DMatrix<f64>,
}

impl DesiredModeSet {
    /// Orthonormalize raw mode columns (in order) into a mode set.
    pub fn from_raw(raw: DMatrix<f64>) -> Result<Self> {
        Ok(Self {
            columns: orthonormalize(raw)?,
        })
    }

    pub fn q(&self) -> usize {
        self.columns.nrows()
    }

    pub fn m(&self) -> usize {
        self.columns.ncols()
    }
}

/// Modified Gram–Schmidt with one re-orthogonalization pass.
///
/// Column order is preserved; a column whose norm collapses below
/// `1e-10 ×` its input norm is linearly dependent on its predecessors and
/// rejected as rank-deficient.
pub fn orthonormalize(raw: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (q, m) = (raw.nrows(), raw.ncols());
    if m == 0 || q == 0 {
        return Err(Error::InvalidConfig("empty mode matrix".into()));
    }
    if m > q {
        return Err(Error::RankDeficient(format!(
            "{m} modes cannot be independent on {q} DoFs"
        )));
    }
    let mut out = raw.clone();
    for j in 0..m {
        let input_norm = raw.column(j).norm();
        if input_norm == 0.0 {
            return Err(Error::RankDeficient(format!("mode column {j} is zero")));
        }
        // Two projection passes curb cancellation for nearly dependent sets.
        for _ in 0..2 {
            for i in 0..j {
                let proj = out.column(i).dot(&out.column(j));
                let prev = out.column(i).into_owned();
                let mut col = out.column_mut(j);
                col.axpy(-proj, &prev, 1.0);
            }
        }
        let norm = out.column(j).norm();
        if norm < 1e-10 * input_norm {
            return Err(Error::RankDeficient(format!(
                "mode column {j} is linearly dependent on earlier columns"
            )));
        }
        out.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(out)
}

/// Verify that the columns of `v` are orthonormal within `tol` (max
/// deviation of `VᵀV` from identity).
pub fn check_orthonormal(v: &DMatrix<f64>, tol: f64) -> Result<()> {
    let gram = v.transpose() * v;
    let dev = (&gram - DMatrix::identity(v.ncols(), v.ncols())).amax();
    if dev > tol {
        return Err(Error::NotOrthonormal { max_dev: dev });
    }
    Ok(())
}

/// Rigid rotation + straight translation of two guided points.
///
/// Active layout `[p₁x, p₁y, p₂x, p₂y]`. Mode 1 moves both points equally
/// along x (straight translation `[1/√2, 0, 1/√2, 0]`); mode 2 moves them
/// oppositely along y (rotation about the midpoint `[0, −1/√2, 0, 1/√2]`).
pub fn generate_rotation_translation() -> DesiredModeSet {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let raw = DMatrix::from_column_slice(4, 2, &[s, 0.0, s, 0.0, 0.0, -s, 0.0, s]);
    DesiredModeSet::from_raw(raw).expect("constant modes are orthonormal")
}

/// Pure x- and y-translation of a rigid platform bounded by `n_nodes`
/// active nodes (layout `[n₁x, n₁y, …]`, q = 2·n_nodes).
pub fn generate_platform_translation(n_nodes: usize) -> Result<DesiredModeSet> {
    if n_nodes == 0 {
        return Err(Error::InvalidConfig("platform needs at least one node".into()));
    }
    let q = 2 * n_nodes;
    let a = 1.0 / (n_nodes as f64).sqrt();
    let mut raw = DMatrix::zeros(q, 2);
    for n in 0..n_nodes {
        raw[(2 * n, 0)] = a; // uniform x translation
        raw[(2 * n + 1, 1)] = a; // uniform y translation
    }
    DesiredModeSet::from_raw(raw)
}

/// Shape-adaptive contour modes over an ordered free contour.
///
/// `stations` are the contour node positions mapped to the normalized
/// parameter t ∈ [0, 1] (arclength along the contour). Raw shapes:
///
/// * parabola — transverse `t (1 − t)` (vanishes at the contour ends),
/// * sine — transverse `sin(2π · periods · t)` (one full period by default),
/// * translation — uniform tangential displacement.
///
/// Orthonormalized in the order (parabola, sine, translation): transverse
/// shapes occupy the y components and the tangential shape the x
/// components of the node-major layout.
pub fn generate_contour_modes(stations: &[f64], sine_periods: f64) -> Result<DesiredModeSet> {
    let n = stations.len();
    if n < 4 {
        return Err(Error::InvalidConfig(format!(
            "contour modes need at least 4 contour nodes, got {n}"
        )));
    }
    if !(sine_periods.is_finite() && sine_periods > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "sine period count must be positive, got {sine_periods}"
        )));
    }
    let (lo, hi) = stations
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        });
    if !(hi > lo) {
        return Err(Error::InvalidConfig("contour nodes are coincident".into()));
    }
    let q = 2 * n;
    let mut raw = DMatrix::zeros(q, 3);
    for (i, &s) in stations.iter().enumerate() {
        let t = (s - lo) / (hi - lo);
        raw[(2 * i + 1, 0)] = t * (1.0 - t); // parabola, transverse
        raw[(2 * i + 1, 1)] = (2.0 * std::f64::consts::PI * sine_periods * t).sin();
        raw[(2 * i, 2)] = 1.0; // uniform tangential translation
    }
    DesiredModeSet::from_raw(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rotation_translation_matches_reference_vectors() {
        let set = generate_rotation_translation();
        let s = 1.0 / 2.0_f64.sqrt();
        let expect = [[s, 0.0, s, 0.0], [0.0, -s, 0.0, s]];
        for (j, e) in expect.iter().enumerate() {
            for (i, v) in e.iter().enumerate() {
                assert_relative_eq!(set.columns[(i, j)], *v, epsilon = 1e-15);
            }
        }
        // Rounded display values used in the documentation.
        assert!((set.columns[(0, 0)] - 0.707).abs() < 1e-3);
        check_orthonormal(&set.columns, 1e-12).unwrap();
    }

    #[test]
    fn gram_schmidt_keeps_first_column_direction() {
        let raw = DMatrix::from_column_slice(3, 2, &[2.0, 0.0, 0.0, 3.0, 4.0, 0.0]);
        let out = orthonormalize(raw).unwrap();
        assert_relative_eq!(out[(0, 0)], 1.0, max_relative = 1e-14);
        assert_relative_eq!(out[(1, 1)], 1.0, max_relative = 1e-14);
        check_orthonormal(&out, 1e-12).unwrap();
    }

    #[test]
    fn orthonormalize_is_idempotent_on_orthonormal_input() {
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let out = orthonormalize(raw.clone()).unwrap();
        assert!((out - raw).amax() < 1e-15);
    }

    #[test]
    fn dependent_columns_are_rejected() {
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 1.0, 0.0, 2.0, 2.0, 0.0]);
        assert!(matches!(
            orthonormalize(raw),
            Err(Error::RankDeficient(_))
        ));
        let wide = DMatrix::from_element(2, 3, 1.0);
        assert!(orthonormalize(wide).is_err());
    }

    #[test]
    fn platform_translation_is_uniform_and_orthonormal() {
        let set = generate_platform_translation(32).unwrap();
        assert_eq!((set.q(), set.m()), (64, 2));
        check_orthonormal(&set.columns, 1e-12).unwrap();
        let a = 1.0 / 32.0_f64.sqrt();
        for n in 0..32 {
            assert_relative_eq!(set.columns[(2 * n, 0)], a, max_relative = 1e-14);
            assert_relative_eq!(set.columns[(2 * n + 1, 0)], 0.0, epsilon = 1e-15);
            assert_relative_eq!(set.columns[(2 * n + 1, 1)], a, max_relative = 1e-14);
        }
    }

    #[test]
    fn contour_modes_are_orthonormal_with_expected_structure() {
        let stations: Vec<f64> = (0..21).map(|i| i as f64 * 10.0).collect();
        let set = generate_contour_modes(&stations, 1.0).unwrap();
        assert_eq!((set.q(), set.m()), (42, 3));
        check_orthonormal(&set.columns, 1e-12).unwrap();

        // Parabola and sine vanish at the contour ends.
        for j in [0usize, 1] {
            assert!(set.columns[(1, j)].abs() < 1e-12, "start of mode {j}");
            assert!(set.columns[(41, j)].abs() < 1e-12, "end of mode {j}");
        }
        // Translation ⟂ sine by component parity: the tangential mode lives
        // on x entries, the transverse shapes on y entries, so the raw inner
        // product is exactly zero and Gram–Schmidt leaves both unchanged.
        let sine = set.columns.column(1);
        let trans = set.columns.column(2);
        assert!(sine.dot(&trans).abs() < 1e-14);
        // One full sine period is antisymmetric about mid-contour, so it is
        // also orthogonal to the symmetric parabola before normalization.
        let para = set.columns.column(0);
        assert!(para.dot(&sine).abs() < 1e-12);
        // Uniform tangential translation: all x entries equal.
        let a = 1.0 / 21.0_f64.sqrt();
        for i in 0..21 {
            assert_relative_eq!(trans[2 * i], a, max_relative = 1e-12);
        }
    }

    #[test]
    fn contour_mode_validation() {
        assert!(generate_contour_modes(&[0.0, 1.0], 1.0).is_err());
        let st: Vec<f64> = (0..8).map(|i| i as f64).collect();
        assert!(generate_contour_modes(&st, 0.0).is_err());
        assert!(generate_contour_modes(&[1.0; 8], 1.0).is_err());
        assert!(generate_contour_modes(&st, 1.0).is_ok());
    }

    #[test]
    fn explicit_modes_are_orthonormalized_on_load() {
        let raw = DMatrix::from_column_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let set = DesiredModeSet::from_raw(raw).unwrap();
        check_orthonormal(&set.columns, 1e-12).unwrap();
        // First column parallel to first input.
        let s = 1.0 / 2.0_f64.sqrt();
        assert_relative_eq!(set.columns[(0, 0)], s, max_relative = 1e-14);
        assert_relative_eq!(set.columns[(2, 0)], s, max_relative = 1e-14);
    }
}
