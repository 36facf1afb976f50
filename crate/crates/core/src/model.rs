//! Ground structure of planar frame elements.
//!
//! A regular node lattice is connected by all candidate beams within a
//! connectivity radius (Chebyshev metric in lattice units, so radius 1
//! already includes the cell diagonals). Candidates that would lie exactly
//! on top of a chain of shorter candidates (offset with gcd > 1, e.g. a
//! two-pitch horizontal beam passing through the intermediate node) are
//! excluded, since the shorter chain spans the same line.
//!
//! Each element is a planar Euler–Bernoulli frame beam with six degrees of
//! freedom `[u₁, w₁, θ₁, u₂, w₂, θ₂]` (global x-translation, global
//! y-translation, rotation at each end node). The parameterized stiffness is
//! the linear combination `K(x) = Σᵢ xᵢ Kᵢ` of the constant element matrices
//! `Kᵢ`, so assembly is exact in the design variables.

use nalgebra::{DMatrix, DVector, SMatrix};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::Error;
use crate::Result;

/// Beam cross-section and material constants (mm/N units: mm², N/mm², mm⁴).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    /// Cross-section area A.
    pub area: f64,
    /// Elastic modulus E.
    pub elastic_modulus: f64,
    /// Second moment of area I.
    pub second_moment: f64,
}

impl SectionProperties {
    pub fn new(area: f64, elastic_modulus: f64, second_moment: f64) -> Result<Self> {
        for (name, v) in [
            ("area", area),
            ("elastic_modulus", elastic_modulus),
            ("second_moment", second_moment),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSection(format!("{name} = {v}")));
            }
        }
        Ok(Self {
            area,
            elastic_modulus,
            second_moment,
        })
    }
}

/// Regular planar node lattice. Node `(i, j)` has index `j * nx + i` and
/// position `(i · pitch, j · pitch)`; DoFs of node `k` are `3k, 3k+1, 3k+2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGrid {
    /// Number of node columns (x direction).
    pub nx: usize,
    /// Number of node rows (y direction).
    pub ny: usize,
    /// Lattice pitch in mm.
    pub pitch: f64,
}

impl NodeGrid {
    pub fn from_counts(nx: usize, ny: usize, pitch: f64) -> Result<Self> {
        if nx == 0 || ny == 0 || nx * ny < 2 {
            return Err(Error::EmptyGrid(format!("{nx}x{ny} nodes")));
        }
        if !(pitch.is_finite() && pitch > 0.0) {
            return Err(Error::EmptyGrid(format!("pitch = {pitch}")));
        }
        Ok(Self { nx, ny, pitch })
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    /// Total structural DoF count (three per node).
    pub fn n_dofs(&self) -> usize {
        3 * self.n_nodes()
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    /// Position of node `k` in mm.
    pub fn position(&self, k: usize) -> [f64; 2] {
        let i = k % self.nx;
        let j = k / self.nx;
        [i as f64 * self.pitch, j as f64 * self.pitch]
    }

    /// Index of the node closest to `(x, y)`, or an error if no node lies
    /// within a tenth of a pitch.
    pub fn node_at(&self, x: f64, y: f64) -> Result<usize> {
        let i = (x / self.pitch).round();
        let j = (y / self.pitch).round();
        let ok = i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny;
        if !ok {
            return Err(Error::InvalidDofSelection(format!(
                "point ({x}, {y}) lies outside the grid"
            )));
        }
        let (iu, ju) = (i as usize, j as usize);
        let p = self.position(self.node_index(iu, ju));
        if (p[0] - x).hypot(p[1] - y) > 0.1 * self.pitch {
            return Err(Error::InvalidDofSelection(format!(
                "point ({x}, {y}) does not coincide with a grid node"
            )));
        }
        Ok(self.node_index(iu, ju))
    }
}

/// One candidate beam connecting two grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamElement {
    /// First end node index.
    pub a: usize,
    /// Second end node index.
    pub b: usize,
    /// Element length in mm.
    pub length: f64,
    /// Direction cosine (x component of the unit axis vector).
    pub cos: f64,
    /// Direction sine (y component of the unit axis vector).
    pub sin: f64,
}

impl BeamElement {
    pub fn new(a: usize, b: usize, pa: [f64; 2], pb: [f64; 2]) -> Result<Self> {
        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
        let length = dx.hypot(dy);
        if a == b || length <= 0.0 {
            return Err(Error::ZeroLengthElement(a, b));
        }
        Ok(Self {
            a,
            b,
            length,
            cos: dx / length,
            sin: dy / length,
        })
    }

    /// Global structural DoF indices in element order
    /// `[u₁, w₁, θ₁, u₂, w₂, θ₂]`.
    pub fn dofs(&self) -> [usize; 6] {
        [
            3 * self.a,
            3 * self.a + 1,
            3 * self.a + 2,
            3 * self.b,
            3 * self.b + 1,
            3 * self.b + 2,
        ]
    }
}

/// Element stiffness matrix in the global frame.
///
/// Local Euler–Bernoulli frame stiffness (axial + bending, no shear
/// deformation) rotated by the element direction: `K = Tᵀ k_local T` with
/// `T` the block-diagonal rotation of both end-node translations. The
/// result is symmetrized to remove rotation round-off, has exact rank 3
/// (six DoFs minus three rigid-body modes) and is positive semi-definite.
pub fn element_stiffness(elem: &BeamElement, section: &SectionProperties) -> SMatrix<f64, 6, 6> {
    let l = elem.length;
    let ea_l = section.elastic_modulus * section.area / l;
    let ei = section.elastic_modulus * section.second_moment;
    let b1 = 12.0 * ei / (l * l * l);
    let b2 = 6.0 * ei / (l * l);
    let b3 = 4.0 * ei / l;
    let b4 = 2.0 * ei / l;

    // DOF order: u1, w1, θ1, u2, w2, θ2 (local axes: u along the beam).
    #[rustfmt::skip]
    let k_local = SMatrix::<f64, 6, 6>::from_row_slice(&[
         ea_l,  0.0,  0.0, -ea_l,  0.0,  0.0,
          0.0,   b1,   b2,   0.0,  -b1,   b2,
          0.0,   b2,   b3,   0.0,  -b2,   b4,
        -ea_l,  0.0,  0.0,  ea_l,  0.0,  0.0,
          0.0,  -b1,  -b2,   0.0,   b1,  -b2,
          0.0,   b2,   b4,   0.0,  -b2,   b3,
    ]);

    let (c, s) = (elem.cos, elem.sin);
    // Global→local rotation for one node's (u, w, θ).
    #[rustfmt::skip]
    let r = SMatrix::<f64, 3, 3>::from_row_slice(&[
          c,   s, 0.0,
         -s,   c, 0.0,
        0.0, 0.0, 1.0,
    ]);
    let mut t = SMatrix::<f64, 6, 6>::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    t.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);

    let k = t.transpose() * k_local * t;
    // Enforce exact symmetry (rotation products leave ~1e-16 asymmetry).
    0.5 * (k + k.transpose())
}

/// Ground structure: grid, candidate elements, their constant stiffness
/// matrices, and the support (fixed-DoF) set.
#[derive(Debug, Clone)]
pub struct GroundStructure {
    pub grid: NodeGrid,
    pub section: SectionProperties,
    pub elements: Vec<BeamElement>,
    /// Constant global-frame stiffness matrix of each candidate element.
    pub element_stiffnesses: Vec<SMatrix<f64, 6, 6>>,
    /// Fixed structural DoF indices (eliminated from the free system).
    pub supports: BTreeSet<usize>,
    /// Map structural DoF index → free-system index (None when supported).
    free_index: Vec<Option<usize>>,
    n_free: usize,
}

impl GroundStructure {
    pub fn new(
        grid: NodeGrid,
        elements: Vec<BeamElement>,
        section: SectionProperties,
        supports: BTreeSet<usize>,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::NoElements {
                radius: 0,
                nx: grid.nx,
                ny: grid.ny,
            });
        }
        let n_dofs = grid.n_dofs();
        if let Some(&bad) = supports.iter().find(|&&d| d >= n_dofs) {
            return Err(Error::InvalidDofSelection(format!(
                "support DoF {bad} exceeds structural DoF count {n_dofs}"
            )));
        }
        let mut free_index = vec![None; n_dofs];
        let mut next = 0usize;
        for d in 0..n_dofs {
            if !supports.contains(&d) {
                free_index[d] = Some(next);
                next += 1;
            }
        }
        let element_stiffnesses = elements
            .iter()
            .map(|e| element_stiffness(e, &section))
            .collect();
        Ok(Self {
            grid,
            section,
            elements,
            element_stiffnesses,
            supports,
            free_index,
            n_free: next,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    /// Total structural DoF count (including supported DoFs).
    pub fn n_dofs(&self) -> usize {
        self.grid.n_dofs()
    }

    /// Free DoF count after support elimination.
    pub fn n_free(&self) -> usize {
        self.n_free
    }

    /// Free-system index of a structural DoF, `None` if supported.
    pub fn free_dof(&self, structural: usize) -> Option<usize> {
        self.free_index[structural]
    }

    /// Free-system indices of one element's six DoFs.
    pub fn element_free_dofs(&self, e: usize) -> [Option<usize>; 6] {
        self.elements[e].dofs().map(|d| self.free_index[d])
    }

    /// Assemble the free-DoF stiffness matrix `K(x) = Σ xᵢ Kᵢ` densely.
    ///
    /// Supported DoFs are eliminated by row/column removal. Intended for
    /// tests and small systems; the synthesis driver uses the partitioned
    /// banded assembly in [`crate::reduction`].
    pub fn assemble_dense(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.check_design(x)?;
        let n = self.n_free;
        let mut k = DMatrix::<f64>::zeros(n, n);
        for (e, ke) in self.element_stiffnesses.iter().enumerate() {
            let map = self.element_free_dofs(e);
            let xe = x[e];
            for (r, &fr) in map.iter().enumerate() {
                let Some(fr) = fr else { continue };
                for (c, &fc) in map.iter().enumerate() {
                    let Some(fc) = fc else { continue };
                    k[(fr, fc)] += xe * ke[(r, c)];
                }
            }
        }
        Ok(k)
    }

    /// Quadratic form `vᵀ Kᵢ w` of one element against two free-DoF vectors
    /// (supported DoFs contribute zero displacement).
    pub fn quadratic_form(&self, e: usize, v: &DVector<f64>, w: &DVector<f64>) -> f64 {
        let ke = &self.element_stiffnesses[e];
        let map = self.element_free_dofs(e);
        let get = |vec: &DVector<f64>, slot: Option<usize>| slot.map_or(0.0, |f| vec[f]);
        let ve = map.map(|s| get(v, s));
        let we = map.map(|s| get(w, s));
        let mut acc = 0.0;
        for r in 0..6 {
            let mut row = 0.0;
            for c in 0..6 {
                row += ke[(r, c)] * we[c];
            }
            acc += ve[r] * row;
        }
        acc
    }

    fn check_design(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_elements() {
            return Err(Error::DimensionMismatch {
                expected: self.n_elements(),
                got: x.len(),
                context: "design vector",
            });
        }
        Ok(())
    }
}

/// Build a rectangular ground structure.
///
/// `width` and `height` are the design-space extents in mm (rounded to whole
/// pitches; a zero height yields a single node row). `radius` is the
/// connectivity radius in lattice units under the Chebyshev metric: radius 1
/// connects axis-aligned neighbors and cell diagonals. Candidates whose
/// lattice offset has gcd > 1 pass through intermediate nodes and are
/// excluded in favor of the shorter collinear chain.
pub fn build_grid(width: f64, height: f64, pitch: f64, radius: usize) -> Result<(NodeGrid, Vec<BeamElement>)> {
    if !(pitch.is_finite() && pitch > 0.0) || !width.is_finite() || !height.is_finite() {
        return Err(Error::EmptyGrid(format!(
            "width={width}, height={height}, pitch={pitch}"
        )));
    }
    if width < 0.0 || height < 0.0 {
        return Err(Error::EmptyGrid(format!(
            "negative extent {width}x{height}"
        )));
    }
    let nx = (width / pitch).round() as usize + 1;
    let ny = (height / pitch).round() as usize + 1;
    let grid = NodeGrid::from_counts(nx, ny, pitch)?;
    let elements = connect(&grid, radius)?;
    Ok((grid, elements))
}

/// Enumerate candidate elements for `grid` within the given connectivity
/// radius. Each unordered node pair appears exactly once (`a < b`).
pub fn connect(grid: &NodeGrid, radius: usize) -> Result<Vec<BeamElement>> {
    if radius == 0 {
        return Err(Error::NoElements {
            radius,
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    let r = radius as isize;
    // Canonical offsets: enumerate each unordered pair once by requiring the
    // offset to point "up" or, within a row, to the right.
    let mut offsets = Vec::new();
    for dj in 0..=r {
        for di in -r..=r {
            if dj == 0 && di <= 0 {
                continue;
            }
            if gcd(di.unsigned_abs(), dj.unsigned_abs()) > 1 {
                continue; // collinear with a chain of shorter candidates
            }
            offsets.push((di, dj));
        }
    }
    let mut elements = Vec::new();
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            let a = grid.node_index(i as usize, j as usize);
            for &(di, dj) in &offsets {
                let (ii, jj) = (i + di, j + dj);
                if ii < 0 || jj < 0 || ii >= grid.nx as isize || jj >= grid.ny as isize {
                    continue;
                }
                let b = grid.node_index(ii as usize, jj as usize);
                elements.push(BeamElement::new(
                    a,
                    b,
                    grid.position(a),
                    grid.position(b),
                )?);
            }
        }
    }
    if elements.is_empty() {
        return Err(Error::NoElements {
            radius,
            nx: grid.nx,
            ny: grid.ny,
        });
    }
    Ok(elements)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Indices of the nodes on a named grid edge, ordered by ascending
/// coordinate (left→right for horizontal edges, bottom→top for vertical).
pub fn edge_nodes(grid: &NodeGrid, edge: &str) -> Result<Vec<usize>> {
    let nodes: Vec<usize> = match edge {
        "bottom" => (0..grid.nx).map(|i| grid.node_index(i, 0)).collect(),
        "top" => (0..grid.nx).map(|i| grid.node_index(i, grid.ny - 1)).collect(),
        "left" => (0..grid.ny).map(|j| grid.node_index(0, j)).collect(),
        "right" => (0..grid.ny).map(|j| grid.node_index(grid.nx - 1, j)).collect(),
        other => {
            return Err(Error::InvalidDofSelection(format!(
                "unknown edge name '{other}' (expected bottom/top/left/right)"
            )))
        }
    };
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;

    fn section() -> SectionProperties {
        // Reference values used by the example problems.
        SectionProperties::new(20.0, 210_000.0, 6.66).unwrap()
    }

    fn clamp_nodes(_grid: &NodeGrid, nodes: &[usize]) -> BTreeSet<usize> {
        nodes
            .iter()
            .flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2])
            .collect()
    }

    #[test]
    fn two_by_two_grid_radius_one_has_six_elements() {
        // 4 edges + 2 cell diagonals.
        let (grid, elements) = build_grid(1.0, 1.0, 1.0, 1).unwrap();
        assert_eq!((grid.nx, grid.ny), (2, 2));
        assert_eq!(elements.len(), 6);
    }

    #[test]
    fn three_collinear_nodes_yield_two_beams_only() {
        // No node-spanning long beam: the 2-pitch candidate is collinear
        // with the two unit beams and must be excluded.
        let (grid, elements) = build_grid(2.0, 0.0, 1.0, 1).unwrap();
        assert_eq!((grid.nx, grid.ny), (3, 1));
        assert_eq!(elements.len(), 2);
        // Radius 2 must not add it back either (gcd exclusion).
        let elements2 = connect(&grid, 2).unwrap();
        assert_eq!(elements2.len(), 2);
    }

    #[test]
    fn radius_two_adds_knight_moves_but_no_overlaps() {
        let (grid, r1) = build_grid(4.0, 4.0, 1.0, 1).unwrap();
        let r2 = connect(&grid, 2).unwrap();
        // Radius 2 adds (±1,2)/(±2,1) offsets only; (2,0),(0,2),(2,2) are
        // collinear with shorter chains.
        let per_offset = |elements: &[BeamElement], di: isize, dj: isize| {
            elements
                .iter()
                .filter(|e| {
                    let (ia, ja) = ((e.a % 5) as isize, (e.a / 5) as isize);
                    let (ib, jb) = ((e.b % 5) as isize, (e.b / 5) as isize);
                    (ib - ia == di && jb - ja == dj) || (ia - ib == di && ja - jb == dj)
                })
                .count()
        };
        assert_eq!(per_offset(&r2, 2, 0), 0);
        assert_eq!(per_offset(&r2, 2, 2), 0);
        assert!(per_offset(&r2, 1, 2) > 0);
        assert!(r2.len() > r1.len());
    }

    #[test]
    fn example_geometry_counts_match_reference_models() {
        // The three bundled example problems: element and structural DoF
        // counts of the published ground structures.
        let (g1, e1) = build_grid(60.0, 80.0, 5.0, 1).unwrap();
        assert_eq!((e1.len(), g1.n_dofs()), (796, 663));

        let (g2, e2) = build_grid(200.0, 200.0, 5.0, 1).unwrap();
        assert_eq!((e2.len(), g2.n_dofs()), (6480, 5043));

        let (g3, e3) = build_grid(200.0, 150.0, 5.0, 1).unwrap();
        assert_eq!((e3.len(), g3.n_dofs()), (4870, 3813));
    }

    #[test]
    fn axial_stiffness_entry_is_ea_over_l() {
        let elem = BeamElement::new(0, 1, [0.0, 0.0], [5.0, 0.0]).unwrap();
        let k = element_stiffness(&elem, &section());
        let ea_l = 210_000.0 * 20.0 / 5.0;
        assert_relative_eq!(k[(0, 0)], ea_l, max_relative = 1e-14);
        assert_relative_eq!(k[(0, 3)], -ea_l, max_relative = 1e-14);
        // Bending block entries.
        let ei = 210_000.0 * 6.66;
        assert_relative_eq!(k[(1, 1)], 12.0 * ei / 125.0, max_relative = 1e-14);
        assert_relative_eq!(k[(1, 2)], 6.0 * ei / 25.0, max_relative = 1e-14);
        assert_relative_eq!(k[(2, 2)], 4.0 * ei / 5.0, max_relative = 1e-14);
        assert_relative_eq!(k[(2, 5)], 2.0 * ei / 5.0, max_relative = 1e-14);
    }

    #[test]
    fn ninety_degree_rotation_swaps_axial_and_bending_blocks() {
        let s = section();
        let horizontal = BeamElement::new(0, 1, [0.0, 0.0], [5.0, 0.0]).unwrap();
        let vertical = BeamElement::new(0, 1, [0.0, 0.0], [0.0, 5.0]).unwrap();
        let kh = element_stiffness(&horizontal, &s);
        let kv = element_stiffness(&vertical, &s);
        // Axial direction is now global y; transverse bending is global x.
        assert_relative_eq!(kv[(1, 1)], kh[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(kv[(0, 0)], kh[(1, 1)], max_relative = 1e-12);
        // Moment-translation coupling flips sign with the axis swap.
        assert_relative_eq!(kv[(0, 2)], -kh[(1, 2)], max_relative = 1e-12);
    }

    #[test]
    fn element_matrix_is_symmetric_psd_rank_three() {
        let elem = BeamElement::new(0, 1, [0.0, 0.0], [3.0, 4.0]).unwrap();
        let k = element_stiffness(&elem, &section());
        assert_eq!(k, k.transpose());
        let eig = nalgebra::SymmetricEigen::new(k);
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let scale = vals[5];
        // Three rigid-body modes, three strain modes.
        for v in &vals[..3] {
            assert!(v.abs() <= 1e-9 * scale, "rigid mode eigenvalue {v}");
        }
        for v in &vals[3..] {
            assert!(*v > 1e-9 * scale);
        }
    }

    #[test]
    fn cantilever_tip_deflection_matches_closed_form() {
        // Single element clamped at node 0, transverse tip load P:
        // w = P L³ / (3 E I), θ = P L² / (2 E I).
        let s = section();
        let grid = NodeGrid::from_counts(2, 1, 7.5).unwrap();
        let elements = connect(&grid, 1).unwrap();
        let supports = clamp_nodes(&grid, &[0]);
        let gs = GroundStructure::new(grid, elements, s, supports).unwrap();
        let k = gs.assemble_dense(&[1.0]).unwrap();
        let p = 2.5;
        let f = DVector::from_vec(vec![0.0, p, 0.0]);
        let u = k.lu().solve(&f).unwrap();
        let (l, ei) = (7.5, s.elastic_modulus * s.second_moment);
        assert_relative_eq!(u[1], p * l * l * l / (3.0 * ei), max_relative = 1e-9);
        assert_relative_eq!(u[2], p * l * l / (2.0 * ei), max_relative = 1e-9);
        assert_relative_eq!(u[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn assembly_is_linear_in_the_design_vector() {
        let (grid, elements) = build_grid(2.0, 2.0, 1.0, 1).unwrap();
        let supports = clamp_nodes(&grid, &[0, 1, 2]);
        let gs = GroundStructure::new(grid, elements, section(), supports).unwrap();
        let r = gs.n_elements();
        let xa: Vec<f64> = (0..r).map(|i| 0.1 + 0.8 * (i as f64) / r as f64).collect();
        let xb: Vec<f64> = (0..r).map(|i| 1.0 - 0.9 * (i as f64) / r as f64).collect();
        let (alpha, beta) = (0.37, 1.91);
        let combo: Vec<f64> = xa
            .iter()
            .zip(&xb)
            .map(|(a, b)| alpha * a + beta * b)
            .collect();
        let lhs = gs.assemble_dense(&combo).unwrap();
        let rhs = gs.assemble_dense(&xa).unwrap() * alpha + gs.assemble_dense(&xb).unwrap() * beta;
        let denom = lhs.norm().max(1.0);
        assert!((lhs - rhs).norm() / denom < 1e-12);
    }

    #[test]
    fn quadratic_form_matches_dense_assembly() {
        let (grid, elements) = build_grid(2.0, 1.0, 1.0, 1).unwrap();
        let supports = clamp_nodes(&grid, &[0]);
        let gs = GroundStructure::new(grid, elements, section(), supports).unwrap();
        let n = gs.n_free();
        let r = gs.n_elements();
        let x: Vec<f64> = (0..r).map(|i| 0.05 + (i as f64) * 0.11).collect();
        let v = DVector::from_fn(n, |i, _| (i as f64 * 0.7).sin());
        let w = DVector::from_fn(n, |i, _| (i as f64 * 1.3).cos());
        let k = gs.assemble_dense(&x).unwrap();
        let direct = (v.transpose() * &k * &w)[(0, 0)];
        let summed: f64 = (0..r).map(|e| x[e] * gs.quadratic_form(e, &v, &w)).sum();
        assert_relative_eq!(direct, summed, max_relative = 1e-12);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(build_grid(-1.0, 1.0, 1.0, 1).is_err());
        assert!(build_grid(1.0, 1.0, 0.0, 1).is_err());
        assert!(build_grid(0.0, 0.0, 1.0, 1).is_err(), "single node");
        let grid = NodeGrid::from_counts(3, 3, 1.0).unwrap();
        assert!(connect(&grid, 0).is_err());
        assert!(SectionProperties::new(0.0, 1.0, 1.0).is_err());
        assert!(BeamElement::new(0, 0, [0.0, 0.0], [0.0, 0.0]).is_err());
    }
}
