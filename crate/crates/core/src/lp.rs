//! Construction and solution of the stiffness-update linear program.
//!
//! The stiffness matrix is exactly linear in the element scales,
//! `K(x) = Σ xₑ Kₑ`, so quadratic forms of frozen mode vectors give exact
//! LP rows. Each global iteration maximizes the softest undesired Rayleigh
//! quotient `ψ₁ᵀK(x)ψ₁` subject to
//!
//! * desired-mode stiffness caps `φⱼᵀK(x)φⱼ ≤ μ`,
//! * pairwise stiffness-orthogonality of the desired modes, relaxed to a
//!   narrow band `|φᵢᵀK(x)φⱼ| ≤ ε` so the row system stays feasible in
//!   floating point,
//! * order guards `ψ₁ᵀK(x)ψ₁ ≤ ψₖᵀK(x)ψₖ` that keep the maximized quotient
//!   from overtaking the rest of the retained spectrum,
//! * a volume budget `Σ xₑ ≤ V`,
//! * per-element move limits around the current design.
//!
//! All quadratic forms are evaluated with the modes expanded to the full
//! free system, since condensation is exact only at the linearization
//! point; the expanded forms keep every row exact for any `x`.

use std::fmt::Write as _;

use nalgebra::DVector;

use crate::base::OrthonormalBase;
use crate::error::Error;
use crate::model::GroundStructure;
use crate::simplex::{self, SimplexInput, SimplexRow, SimplexStatus};
pub use crate::simplex::RowKind;
use crate::Result;

/// Broad classification of a constraint row, used by the synthesis driver
/// to decide how to react to infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowClass {
    StiffnessCap,
    /// Driver-appended lower bound that pulls a capped mode up toward the cap.
    CapFloor,
    Orthogonality,
    OrderGuard,
    Volume,
    Other,
}

/// One labelled constraint row.
#[derive(Debug, Clone)]
pub struct ConstraintRow {
    pub label: String,
    pub class: RowClass,
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub kind: RowKind,
}

/// A fully assembled stiffness-update LP (maximize `objective · x`).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub rows: Vec<ConstraintRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Per-element box `[max(xˡ, xₑ−ν), min(xᵘ, xₑ+ν)]` for one update step.
#[derive(Debug, Clone)]
pub struct MoveLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl MoveLimits {
    /// Move limits of radius `nu` around `x`, clipped to `[xl, xu]`.
    ///
    /// `x` entries outside the global box are clamped first, so the
    /// returned intervals are always non-empty.
    pub fn around(x: &[f64], nu: f64, xl: f64, xu: f64) -> MoveLimits {
        debug_assert!(nu >= 0.0 && xl <= xu);
        let mut lower = Vec::with_capacity(x.len());
        let mut upper = Vec::with_capacity(x.len());
        for &xe in x {
            let xe = xe.clamp(xl, xu);
            lower.push((xe - nu).max(xl));
            upper.push((xe + nu).min(xu));
        }
        MoveLimits { lower, upper }
    }
}

/// Outcome of one LP solve.
#[derive(Debug, Clone)]
pub enum LpOutcome {
    /// Feasible optimum.
    Optimal { x: Vec<f64>, objective: f64 },
    /// No feasible point; `x` is the phase-1 violation minimizer and
    /// `violations` holds the per-row constraint violations at `x`.
    Infeasible {
        x: Vec<f64>,
        objective: f64,
        total_violation: f64,
        violations: Vec<f64>,
    },
    Unbounded,
}

impl LpOutcome {
    /// The returned point, if any.
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            LpOutcome::Optimal { x, .. } | LpOutcome::Infeasible { x, .. } => Some(x),
            LpOutcome::Unbounded => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, LpOutcome::Optimal { .. })
    }
}

/// Build the stiffness-update LP for the current expanded mode base.
///
/// `n_guard` counts the retained undesired vectors including `ψ₁` itself,
/// so `n_guard − 1` order-guard rows are emitted (clamped to the number of
/// available undesired vectors). `eq_band` is the orthogonality relaxation
/// half-width ε; zero emits hard equality rows.
pub fn build_lp(
    gs: &GroundStructure,
    base: &OrthonormalBase,
    mu: f64,
    volume: f64,
    n_guard: usize,
    eq_band: f64,
    limits: &MoveLimits,
) -> Result<LinearProgram> {
    let r = gs.n_elements();
    let p = gs.n_free();
    let m = base.desired.ncols();
    let n_undesired = base.undesired.ncols();
    if base.expanded_desired.nrows() != p || base.expanded_undesired.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: base.expanded_desired.nrows(),
            context: "expanded mode length",
        });
    }
    if limits.lower.len() != r || limits.upper.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: limits.lower.len().min(limits.upper.len()),
            context: "move-limit length",
        });
    }
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidConfig(format!("stiffness cap must be positive, got {mu}")));
    }
    if !(volume > 0.0 && volume.is_finite()) {
        return Err(Error::InvalidConfig(format!("volume budget must be positive, got {volume}")));
    }
    if !(eq_band >= 0.0 && eq_band.is_finite()) {
        return Err(Error::InvalidConfig(format!("orthogonality band must be ≥ 0, got {eq_band}")));
    }
    for e in 0..r {
        if limits.lower[e] > limits.upper[e] {
            return Err(Error::InvalidConfig(format!("empty move limits for element {e}")));
        }
    }

    if m == 0 || n_undesired == 0 {
        return Err(Error::InvalidConfig(
            "mode base must hold at least one desired and one undesired mode".into(),
        ));
    }
    let n_guard_eff = n_guard.clamp(1, n_undesired);
    let phis: Vec<DVector<f64>> = (0..m)
        .map(|j| base.expanded_desired.column(j).into_owned())
        .collect();
    let psis: Vec<DVector<f64>> = (0..n_guard_eff)
        .map(|k| base.expanded_undesired.column(k).into_owned())
        .collect();

    let mut objective = vec![0.0; r];
    let mut cap_rows = vec![vec![0.0; r]; m];
    let mut cross_rows = vec![vec![0.0; r]; m * (m - 1) / 2];
    let mut guard_rows = vec![vec![0.0; r]; n_guard_eff - 1];
    for e in 0..r {
        objective[e] = gs.quadratic_form(e, &psis[0], &psis[0]);
        for j in 0..m {
            cap_rows[j][e] = gs.quadratic_form(e, &phis[j], &phis[j]);
        }
        let mut pair = 0;
        for i in 0..m {
            for j in (i + 1)..m {
                cross_rows[pair][e] = gs.quadratic_form(e, &phis[i], &phis[j]);
                pair += 1;
            }
        }
        for k in 1..n_guard_eff {
            guard_rows[k - 1][e] = objective[e] - gs.quadratic_form(e, &psis[k], &psis[k]);
        }
    }

    let mut rows = Vec::new();
    for (j, coeffs) in cap_rows.into_iter().enumerate() {
        rows.push(ConstraintRow {
            label: format!("cap_mode{}", j + 1),
            class: RowClass::StiffnessCap,
            coeffs,
            rhs: mu,
            kind: RowKind::Le,
        });
    }
    let mut pair = 0;
    for i in 0..m {
        for j in (i + 1)..m {
            let coeffs = std::mem::take(&mut cross_rows[pair]);
            pair += 1;
            if eq_band > 0.0 {
                rows.push(ConstraintRow {
                    label: format!("orth_{}_{}_hi", i + 1, j + 1),
                    class: RowClass::Orthogonality,
                    coeffs: coeffs.clone(),
                    rhs: eq_band,
                    kind: RowKind::Le,
                });
                rows.push(ConstraintRow {
                    label: format!("orth_{}_{}_lo", i + 1, j + 1),
                    class: RowClass::Orthogonality,
                    coeffs: coeffs.iter().map(|c| -c).collect(),
                    rhs: eq_band,
                    kind: RowKind::Le,
                });
            } else {
                rows.push(ConstraintRow {
                    label: format!("orth_{}_{}", i + 1, j + 1),
                    class: RowClass::Orthogonality,
                    coeffs,
                    rhs: 0.0,
                    kind: RowKind::Eq,
                });
            }
        }
    }
    for (k, coeffs) in guard_rows.into_iter().enumerate() {
        rows.push(ConstraintRow {
            label: format!("guard_{}", k + 2),
            class: RowClass::OrderGuard,
            coeffs,
            rhs: 0.0,
            kind: RowKind::Le,
        });
    }
    rows.push(ConstraintRow {
        label: "volume".into(),
        class: RowClass::Volume,
        coeffs: vec![1.0; r],
        rhs: volume,
        kind: RowKind::Le,
    });

    Ok(LinearProgram {
        objective,
        rows,
        lower: limits.lower.clone(),
        upper: limits.upper.clone(),
    })
}

impl LinearProgram {
    fn to_simplex(&self) -> SimplexInput {
        SimplexInput {
            objective: self.objective.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| SimplexRow {
                    coeffs: row.coeffs.clone(),
                    rhs: row.rhs,
                    kind: row.kind,
                })
                .collect(),
            lower: self.lower.clone(),
            upper: self.upper.clone(),
        }
    }

    /// Violation of each row at `x` (zero when satisfied).
    pub fn violations(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let act: f64 = row.coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                match row.kind {
                    RowKind::Le => (act - row.rhs).max(0.0),
                    RowKind::Eq => (act - row.rhs).abs(),
                }
            })
            .collect()
    }

    /// Serialize in CPLEX LP text format, for external-solver cross checks
    /// and debugging.
    pub fn to_lp_format(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "\\ {name}");
        out.push_str("Maximize\n obj:");
        let mut terms = 0;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {} {:.17e} x{j}", if c < 0.0 { "-" } else { "+" }, c.abs());
                terms += 1;
                if terms % 6 == 0 {
                    out.push_str("\n     ");
                }
            }
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.label);
            let mut terms = 0;
            for (j, &c) in row.coeffs.iter().enumerate() {
                if c != 0.0 {
                    let _ =
                        write!(out, " {} {:.17e} x{j}", if c < 0.0 { "-" } else { "+" }, c.abs());
                    terms += 1;
                    if terms % 6 == 0 {
                        out.push_str("\n     ");
                    }
                }
            }
            let op = match row.kind {
                RowKind::Le => "<=",
                RowKind::Eq => "=",
            };
            let _ = writeln!(out, " {op} {:.17e}", row.rhs);
        }
        out.push_str("Bounds\n");
        for j in 0..self.objective.len() {
            let _ = writeln!(out, " {:.17e} <= x{j} <= {:.17e}", self.lower[j], self.upper[j]);
        }
        out.push_str("End\n");
        out
    }
}

/// Solve a stiffness-update LP.
///
/// An `Optimal` point is re-verified against the original (unequilibrated)
/// rows; a verification failure is reported as a numerical error rather
/// than silently returned.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    let result = simplex::solve(&lp.to_simplex())?;
    match result.status {
        SimplexStatus::Unbounded => Ok(LpOutcome::Unbounded),
        SimplexStatus::Optimal => {
            let violations = lp.violations(&result.x);
            for (row, &v) in lp.rows.iter().zip(&violations) {
                let scale = row
                    .coeffs
                    .iter()
                    .fold(row.rhs.abs(), |acc, c| acc.max(c.abs()))
                    .max(1.0);
                if v > 1e-8 * scale {
                    return Err(Error::Numerical(format!(
                        "LP solution violates row `{}` by {v:.3e}",
                        row.label
                    )));
                }
            }
            Ok(LpOutcome::Optimal {
                x: result.x,
                objective: result.objective,
            })
        }
        SimplexStatus::Infeasible => {
            let violations = lp.violations(&result.x);
            let total_violation = violations.iter().sum();
            Ok(LpOutcome::Infeasible {
                x: result.x,
                objective: result.objective,
                total_violation,
                violations,
            })
        }
    }
}

/// Exhaustive vertex-enumeration oracle for cross-checking the simplex on
/// tiny problems (at most three variables): every choice of `n` active
/// hyperplanes is solved and the best feasible vertex returned, or `None`
/// when no vertex is feasible.
pub fn enumerate_best_vertex(lp: &LinearProgram) -> Result<Option<(Vec<f64>, f64)>> {
    use nalgebra::DMatrix;

    let n = lp.objective.len();
    if n == 0 || n > 3 {
        return Err(Error::InvalidConfig(
            "vertex enumeration supports 1–3 variables".into(),
        ));
    }
    // Hyperplane list: constraint boundaries plus both bound faces.
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        planes.push((row.coeffs.clone(), row.rhs));
    }
    for j in 0..n {
        let mut a = vec![0.0; n];
        a[j] = 1.0;
        planes.push((a.clone(), lp.lower[j]));
        planes.push((a, lp.upper[j]));
    }

    let feasible = |x: &[f64]| -> bool {
        for row in &lp.rows {
            let act: f64 = row.coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
            let scale = row
                .coeffs
                .iter()
                .fold(row.rhs.abs(), |acc, c| acc.max(c.abs()))
                .max(1.0);
            let ok = match row.kind {
                RowKind::Le => act <= row.rhs + 1e-9 * scale,
                RowKind::Eq => (act - row.rhs).abs() <= 1e-9 * scale,
            };
            if !ok {
                return false;
            }
        }
        (0..n).all(|j| x[j] >= lp.lower[j] - 1e-9 && x[j] <= lp.upper[j] + 1e-9)
    };

    fn recurse(
        planes: &[(Vec<f64>, f64)],
        start: usize,
        depth: usize,
        n: usize,
        pick: &mut Vec<usize>,
        lp: &LinearProgram,
        feasible: &dyn Fn(&[f64]) -> bool,
        best: &mut Option<(Vec<f64>, f64)>,
    ) {
        if depth == n {
            let mut a = DMatrix::<f64>::zeros(n, n);
            let mut b = DVector::<f64>::zeros(n);
            for (r, &pi) in pick.iter().enumerate() {
                for c in 0..n {
                    a[(r, c)] = planes[pi].0[c];
                }
                b[r] = planes[pi].1;
            }
            let lu = a.full_piv_lu();
            if !lu.is_invertible() {
                return;
            }
            let Some(x) = lu.solve(&b) else { return };
            let xs: Vec<f64> = x.iter().copied().collect();
            if feasible(&xs) {
                let obj: f64 = xs.iter().zip(&lp.objective).map(|(x, c)| x * c).sum();
                if best.as_ref().map_or(true, |(_, cur)| obj > *cur) {
                    *best = Some((xs, obj));
                }
            }
            return;
        }
        for i in start..planes.len() {
            pick[depth] = i;
            recurse(planes, i + 1, depth + 1, n, pick, lp, feasible, best);
        }
    }

    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut pick = vec![0usize; n];
    recurse(&planes, 0, 0, n, &mut pick, lp, &feasible, &mut best);
    Ok(best)
}
