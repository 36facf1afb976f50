//! Bounded-variable two-phase primal simplex.
//!
//! The stiffness-update LPs have a handful of rows (caps, orthogonality
//! bands, mode-swap guards, volume) but thousands of box-bounded columns
//! (one per candidate element), so a revised simplex with a small explicit
//! basis inverse and dense column pricing is the right shape. Details:
//!
//! * all structural variables have finite bounds; rows are `≤` or `=` with
//!   one slack each (equality slacks are fixed at zero);
//! * phase 1 minimizes the sum of artificial variables added to the rows
//!   violated by the all-at-lower-bound start. When that minimum is
//!   positive the problem is infeasible and the terminal point — the
//!   L1-violation minimizer over the box that keeps initially-satisfied
//!   rows satisfied — is returned so callers can take a best-effort step;
//! * Dantzig pricing with an automatic switch to Bland's rule after a run
//!   of consecutive degenerate basis pivots guarantees termination; the
//!   first non-degenerate pivot (strict progress) switches back, because
//!   Bland's first-eligible-column rule is ruinously slow across thousands
//!   of columns when it is not actually needed to break a cycle;
//! * rows are equilibrated to unit max-coefficient before solving; the
//!   basis inverse is refreshed from scratch at a fixed pivot cadence.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::Result;

/// Row sense of a constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Eq,
}

/// One dense constraint row `coeffs · x (≤ | =) rhs`.
#[derive(Debug, Clone)]
pub struct SimplexRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
    pub kind: RowKind,
}

/// A box-bounded LP: maximize `objective · x` subject to `rows` and
/// `lower ≤ x ≤ upper` (both bounds finite).
#[derive(Debug, Clone)]
pub struct SimplexInput {
    pub objective: Vec<f64>,
    pub rows: Vec<SimplexRow>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Termination status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimplexStatus {
    Optimal,
    /// No feasible point; `x` holds the phase-1 violation minimizer.
    Infeasible,
    Unbounded,
}

/// Solver output; `x` covers the structural variables only.
#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub status: SimplexStatus,
    pub x: Vec<f64>,
    /// `objective · x` in the original (maximize) orientation.
    pub objective: f64,
}

/// Feasibility/optimality tolerance on equilibrated data.
const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost tolerance on equilibrated data.
const COST_TOL: f64 = 1e-9;
/// Entries below this never pivot.
const PIVOT_TOL: f64 = 1e-10;
/// Basis-inverse refresh cadence (pivots).
const REFRESH_EVERY: usize = 64;
/// Consecutive degenerate basis pivots before switching to Bland's rule.
const STALL_LIMIT: usize = 80;
/// Ratio-test steps at or below this are degenerate: the pivot swaps the
/// basis without moving the point.
const DEGEN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Basic,
    AtLower,
    AtUpper,
}

struct Worker {
    m: usize,
    /// Dense columns, column-major with stride `m` (structural, slacks,
    /// then artificials).
    cols: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    /// Variable occupying each basis row.
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    rhs: Vec<f64>,
}

impl Worker {
    fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.m..(j + 1) * self.m]
    }

    fn n_vars(&self) -> usize {
        self.cols.len() / self.m.max(1)
    }

    /// Rebuild `binv` and the basic values from scratch.
    fn refresh(&mut self) -> Result<()> {
        let m = self.m;
        let mut b = DMatrix::<f64>::zeros(m, m);
        for (pos, &j) in self.basis.iter().enumerate() {
            for i in 0..m {
                b[(i, pos)] = self.col(j)[i];
            }
        }
        self.binv = b
            .lu()
            .try_inverse()
            .ok_or(Error::LpFailure("singular simplex basis".into()))?;
        // x_B = B⁻¹ (b − N x_N).
        let mut r = self.rhs.clone();
        for j in 0..self.n_vars() {
            if self.state[j] != VarState::Basic && self.x[j] != 0.0 {
                let xj = self.x[j];
                for (i, a) in self.col(j).iter().enumerate() {
                    r[i] -= a * xj;
                }
            }
        }
        for pos in 0..m {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[(pos, i)] * r[i];
            }
            self.x[self.basis[pos]] = v;
        }
        Ok(())
    }

    /// y = B⁻ᵀ c_B.
    fn btran(&self, c: &[f64], y: &mut [f64]) {
        let m = self.m;
        for yi in y.iter_mut() {
            *yi = 0.0;
        }
        for pos in 0..m {
            let cb = c[self.basis[pos]];
            if cb != 0.0 {
                for i in 0..m {
                    y[i] += cb * self.binv[(pos, i)];
                }
            }
        }
    }

    /// w = B⁻¹ A_j.
    fn ftran(&self, j: usize, w: &mut [f64]) {
        let m = self.m;
        let a = self.col(j);
        for (pos, wp) in w.iter_mut().enumerate() {
            let mut v = 0.0;
            for i in 0..m {
                v += self.binv[(pos, i)] * a[i];
            }
            *wp = v;
        }
    }

    /// Minimize `c · x` from the current basis. Returns false on
    /// unboundedness (only possible through infinite slack bounds).
    fn optimize(&mut self, c: &[f64]) -> Result<bool> {
        let m = self.m;
        let mut y = vec![0.0; m];
        let mut w = vec![0.0; m];
        let mut bland = false;
        let mut stall = 0usize;
        let mut pivots_since_refresh = 0usize;
        let iter_cap = 400 + 60 * (self.n_vars() + m);
        let mut n_flips = 0usize;
        let mut n_basis = 0usize;
        let mut n_degen = 0usize;
        let mut bland_at: Option<usize> = None;

        for it in 0..iter_cap {
            self.btran(c, &mut y);

            // Pricing: most negative improvement (Dantzig) or first
            // eligible index (Bland).
            let mut enter: Option<(usize, f64, f64)> = None; // (j, |d|, σ)
            for j in 0..self.n_vars() {
                let st = self.state[j];
                if st == VarState::Basic || self.upper[j] - self.lower[j] <= 0.0 {
                    continue;
                }
                let mut d = c[j];
                for (i, a) in self.col(j).iter().enumerate() {
                    d -= y[i] * a;
                }
                let (eligible, sigma) = match st {
                    VarState::AtLower => (d < -COST_TOL, 1.0),
                    VarState::AtUpper => (d > COST_TOL, -1.0),
                    VarState::Basic => unreachable!(),
                };
                if eligible {
                    if bland {
                        enter = Some((j, d.abs(), sigma));
                        break;
                    }
                    if enter.map_or(true, |(_, best, _)| d.abs() > best) {
                        enter = Some((j, d.abs(), sigma));
                    }
                }
            }
            let Some((j, _, sigma)) = enter else {
                return Ok(true); // optimal
            };

            self.ftran(j, &mut w);

            // Ratio test: entering range plus each basic bound.
            let own_range = self.upper[j] - self.lower[j];
            let mut t = own_range;
            let mut leave: Option<usize> = None; // basis position
            for pos in 0..m {
                let rate = -sigma * w[pos]; // d(x_basic)/d(t)
                if rate.abs() <= PIVOT_TOL {
                    continue;
                }
                let v = self.x[self.basis[pos]];
                let limit = if rate < 0.0 {
                    (v - self.lower[self.basis[pos]]) / -rate
                } else {
                    let ub = self.upper[self.basis[pos]];
                    if ub.is_infinite() {
                        continue;
                    }
                    (ub - v) / rate
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => limit < t - 1e-14,
                    Some(cur) => {
                        limit < t - 1e-14
                            || (limit <= t + 1e-14
                                && if bland {
                                    self.basis[pos] < self.basis[cur]
                                } else {
                                    w[pos].abs() > w[cur].abs()
                                })
                    }
                };
                if limit < t - 1e-14 || better {
                    t = limit.min(t);
                    leave = Some(pos);
                }
            }

            if t.is_infinite() {
                return Ok(false); // unbounded direction
            }

            let degenerate = leave.is_some() && t <= DEGEN_TOL;
            match leave {
                None => {
                    // Bound flip: the entering variable crosses its box.
                    n_flips += 1;
                    for pos in 0..m {
                        self.x[self.basis[pos]] -= sigma * t * w[pos];
                    }
                    if sigma > 0.0 {
                        self.x[j] = self.upper[j];
                        self.state[j] = VarState::AtUpper;
                    } else {
                        self.x[j] = self.lower[j];
                        self.state[j] = VarState::AtLower;
                    }
                }
                Some(pos) => {
                    n_basis += 1;
                    if degenerate {
                        n_degen += 1;
                    }
                    for p in 0..m {
                        self.x[self.basis[p]] -= sigma * t * w[p];
                    }
                    let leaving = self.basis[pos];
                    // Pin the leaving variable exactly on the bound it hit.
                    let rate = -sigma * w[pos];
                    if rate < 0.0 {
                        self.x[leaving] = self.lower[leaving];
                        self.state[leaving] = VarState::AtLower;
                    } else {
                        self.x[leaving] = self.upper[leaving];
                        self.state[leaving] = VarState::AtUpper;
                    }
                    self.x[j] = if sigma > 0.0 {
                        self.lower[j] + t
                    } else {
                        self.upper[j] - t
                    };
                    self.state[j] = VarState::Basic;
                    self.basis[pos] = j;

                    // Product-form update of B⁻¹.
                    let piv = w[pos];
                    if piv.abs() <= PIVOT_TOL {
                        self.refresh()?;
                    } else {
                        for i in 0..m {
                            self.binv[(pos, i)] /= piv;
                        }
                        for p in 0..m {
                            if p != pos && w[p].abs() > 0.0 {
                                let f = w[p];
                                for i in 0..m {
                                    let upd = f * self.binv[(pos, i)];
                                    self.binv[(p, i)] -= upd;
                                }
                            }
                        }
                        pivots_since_refresh += 1;
                        if pivots_since_refresh >= REFRESH_EVERY {
                            self.refresh()?;
                            pivots_since_refresh = 0;
                        }
                    }
                }
            }

            // Degeneracy watchdog. Cycling needs an unbroken run of
            // degenerate pivots at one vertex, so only those count toward
            // the switch; any pivot that moves the point (a bound flip
            // always does — eligibility requires |d| > COST_TOL and a
            // positive box width) strictly improves the objective, proves
            // the vertex was escaped, and restores Dantzig pricing. Sticky
            // Bland is a treadmill on wide programs: it enters the first
            // barely-eligible column of thousands instead of the best one.
            if degenerate {
                stall += 1;
                if stall > STALL_LIMIT {
                    if bland_at.is_none() {
                        bland_at = Some(it);
                    }
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
        }
        log::debug!(
            "simplex budget exhausted: m = {m}, n = {n}, {cap} pivots = {nf} flips + {nb} basis ({nd} degenerate), bland since {b:?}",
            n = self.n_vars(),
            cap = iter_cap,
            nf = n_flips,
            nb = n_basis,
            nd = n_degen,
            b = bland_at,
        );
        Err(Error::LpFailure("simplex iteration limit reached".into()))
    }
}

/// Solve a box-bounded LP (maximize). See module docs for semantics of the
/// `Infeasible` result.
pub fn solve(input: &SimplexInput) -> Result<SimplexResult> {
    let n = input.objective.len();
    let m = input.rows.len();
    if n == 0 {
        return Err(Error::InvalidConfig("LP has no variables".into()));
    }
    if input.lower.len() != n || input.upper.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: input.lower.len().min(input.upper.len()),
            context: "LP bounds",
        });
    }
    for j in 0..n {
        let (l, u) = (input.lower[j], input.upper[j]);
        if !(l.is_finite() && u.is_finite() && l <= u) {
            return Err(Error::InvalidConfig(format!(
                "variable {j} has invalid bounds [{l}, {u}]"
            )));
        }
    }
    for (i, row) in input.rows.iter().enumerate() {
        if row.coeffs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: row.coeffs.len(),
                context: "LP row width",
            });
        }
        if !row.rhs.is_finite() || row.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("row {i} has non-finite data")));
        }
    }

    // Row equilibration to unit max-coefficient.
    let scales: Vec<f64> = input
        .rows
        .iter()
        .map(|r| {
            let s = r.coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();

    // Columns: structural, then one slack per row.
    let mut cols = vec![0.0; (n + m) * m];
    for j in 0..n {
        for (i, row) in input.rows.iter().enumerate() {
            cols[j * m + i] = row.coeffs[j] / scales[i];
        }
    }
    for i in 0..m {
        cols[(n + i) * m + i] = 1.0;
    }
    let rhs: Vec<f64> = input
        .rows
        .iter()
        .zip(&scales)
        .map(|(r, s)| r.rhs / s)
        .collect();

    let mut lower = input.lower.clone();
    let mut upper = input.upper.clone();
    for row in &input.rows {
        lower.push(0.0);
        upper.push(match row.kind {
            RowKind::Le => f64::INFINITY,
            RowKind::Eq => 0.0,
        });
    }

    let mut x = vec![0.0; n + m];
    let mut state = vec![VarState::AtLower; n + m];
    for j in 0..n {
        x[j] = lower[j];
    }

    // Initial basis: slack per row; violated rows get an artificial.
    let mut basis = Vec::with_capacity(m);
    let mut artificials = Vec::new();
    for i in 0..m {
        let mut v = rhs[i];
        for j in 0..n {
            v -= cols[j * m + i] * x[j];
        }
        let fits = v >= -FEAS_TOL && v <= upper[n + i] + FEAS_TOL;
        if fits {
            x[n + i] = v.max(0.0).min(upper[n + i]);
            state[n + i] = VarState::Basic;
            basis.push(n + i);
        } else {
            // Slack stays at zero; artificial absorbs the violation.
            artificials.push((i, v.signum()));
            basis.push(usize::MAX); // patched below
        }
    }
    let n_art = artificials.len();
    let total = n + m + n_art;
    cols.resize(total * m, 0.0);
    lower.resize(total, 0.0);
    upper.resize(total, f64::INFINITY);
    x.resize(total, 0.0);
    state.resize(total, VarState::AtLower);
    for (k, &(i, sig)) in artificials.iter().enumerate() {
        let j = n + m + k;
        cols[j * m + i] = sig;
        let mut v = rhs[i];
        for jj in 0..n {
            v -= cols[jj * m + i] * x[jj];
        }
        x[j] = v * sig; // = |violation|
        state[j] = VarState::Basic;
        basis[i] = j;
    }

    let mut worker = Worker {
        m,
        cols,
        lower,
        upper,
        x,
        state,
        basis,
        binv: DMatrix::identity(m, m),
        rhs,
    };
    if m > 0 {
        worker.refresh()?;
    }

    let extract = |w: &Worker| -> Vec<f64> {
        (0..n)
            .map(|j| w.x[j].clamp(input.lower[j], input.upper[j]))
            .collect()
    };
    let objective_of = |xs: &[f64]| -> f64 {
        xs.iter()
            .zip(&input.objective)
            .map(|(x, c)| x * c)
            .sum::<f64>()
    };

    // Phase 1.
    if n_art > 0 {
        let mut c1 = vec![0.0; total];
        for k in 0..n_art {
            c1[n + m + k] = 1.0;
        }
        let bounded = worker.optimize(&c1)?;
        debug_assert!(bounded, "phase 1 is bounded below by zero");
        let infeas: f64 = (0..n_art).map(|k| worker.x[n + m + k]).sum();
        if infeas > FEAS_TOL * (1.0 + worker.rhs.iter().map(|b| b.abs()).sum::<f64>()) {
            let x = extract(&worker);
            let objective = objective_of(&x);
            return Ok(SimplexResult {
                status: SimplexStatus::Infeasible,
                x,
                objective,
            });
        }
        // Feasible: pin artificials at zero for phase 2.
        for k in 0..n_art {
            let j = n + m + k;
            worker.upper[j] = 0.0;
            worker.x[j] = worker.x[j].max(0.0).min(0.0);
        }
    }

    // Phase 2: minimize the negated (scaled) objective.
    let cscale = input
        .objective
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs()))
        .max(1e-300);
    let mut c2 = vec![0.0; worker.n_vars()];
    for j in 0..n {
        c2[j] = -input.objective[j] / cscale;
    }
    let bounded = worker.optimize(&c2)?;
    let x = extract(&worker);
    let objective = objective_of(&x);
    Ok(SimplexResult {
        status: if bounded {
            SimplexStatus::Optimal
        } else {
            SimplexStatus::Unbounded
        },
        x,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn le(coeffs: &[f64], rhs: f64) -> SimplexRow {
        SimplexRow {
            coeffs: coeffs.to_vec(),
            rhs,
            kind: RowKind::Le,
        }
    }

    fn eq(coeffs: &[f64], rhs: f64) -> SimplexRow {
        SimplexRow {
            coeffs: coeffs.to_vec(),
            rhs,
            kind: RowKind::Eq,
        }
    }

    #[test]
    fn textbook_two_variable_example() {
        // max 3x + 2y, x + y ≤ 4, x ≤ 2.5, y ≤ 3, 0 ≤ x, y ≤ 10.
        let input = SimplexInput {
            objective: vec![3.0, 2.0],
            rows: vec![le(&[1.0, 1.0], 4.0), le(&[1.0, 0.0], 2.5), le(&[0.0, 1.0], 3.0)],
            lower: vec![0.0, 0.0],
            upper: vec![10.0, 10.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_relative_eq!(r.x[0], 2.5, epsilon = 1e-9);
        assert_relative_eq!(r.x[1], 1.5, epsilon = 1e-9);
        assert_relative_eq!(r.objective, 10.5, epsilon = 1e-9);
    }

    #[test]
    fn equality_row_is_enforced_exactly() {
        // max x + y, x − y = 0.5, x + y ≤ 2.
        let input = SimplexInput {
            objective: vec![1.0, 1.0],
            rows: vec![eq(&[1.0, -1.0], 0.5), le(&[1.0, 1.0], 2.0)],
            lower: vec![0.0, 0.0],
            upper: vec![2.0, 2.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_relative_eq!(r.x[0] - r.x[1], 0.5, epsilon = 1e-9);
        assert_relative_eq!(r.objective, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn bound_flips_reach_the_box_corner() {
        // No binding rows: optimum at the upper corner.
        let input = SimplexInput {
            objective: vec![1.0, 2.0, 3.0],
            rows: vec![le(&[1.0, 1.0, 1.0], 100.0)],
            lower: vec![0.0, -1.0, 0.5],
            upper: vec![1.0, 2.0, 1.5],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_eq!(r.x, vec![1.0, 2.0, 1.5]);
    }

    #[test]
    fn infeasible_problem_returns_violation_minimizer() {
        // x ≤ −1 with x ∈ [0, 1]: closest point is x = 0.
        let input = SimplexInput {
            objective: vec![1.0],
            rows: vec![le(&[1.0], -1.0)],
            lower: vec![0.0],
            upper: vec![1.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Infeasible);
        assert_relative_eq!(r.x[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn phase_one_preserves_satisfied_rows_while_reducing_violation() {
        // Row 1 (violated at start): x + y ≥ 1.5 written as −x − y ≤ −1.5.
        // Row 2 (satisfied at start): x ≤ 0.75. Phase 1 must end feasible.
        let input = SimplexInput {
            objective: vec![0.0, -1.0],
            rows: vec![le(&[-1.0, -1.0], -1.5), le(&[1.0, 0.0], 0.75)],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert!(r.x[0] + r.x[1] >= 1.5 - 1e-9);
        assert!(r.x[0] <= 0.75 + 1e-9);
        // min y subject to the above: y = 1.5 − 0.75 = 0.75.
        assert_relative_eq!(r.x[1], 0.75, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_redundant_rows_terminate() {
        let input = SimplexInput {
            objective: vec![1.0, 1.0],
            rows: vec![
                le(&[1.0, 1.0], 1.0),
                le(&[2.0, 2.0], 2.0),
                le(&[1.0, 1.0], 1.0),
                le(&[0.5, 0.5], 0.5),
            ],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_relative_eq!(r.x[0] + r.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn fixed_variables_never_enter() {
        let input = SimplexInput {
            objective: vec![10.0, 1.0],
            rows: vec![le(&[1.0, 1.0], 5.0)],
            lower: vec![0.25, 0.0],
            upper: vec![0.25, 1.0], // x₀ fixed
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_relative_eq!(r.x[0], 0.25, epsilon = 1e-12);
        assert_relative_eq!(r.x[1], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn badly_scaled_rows_are_equilibrated() {
        // Same geometry as the textbook example, rows scaled by 1e6/1e-6.
        let input = SimplexInput {
            objective: vec![3.0, 2.0],
            rows: vec![
                le(&[1e6, 1e6], 4e6),
                le(&[1e-6, 0.0], 2.5e-6),
                le(&[0.0, 1e6], 3e6),
            ],
            lower: vec![0.0, 0.0],
            upper: vec![10.0, 10.0],
        };
        let r = solve(&input).unwrap();
        assert_eq!(r.status, SimplexStatus::Optimal);
        assert_relative_eq!(r.x[0], 2.5, epsilon = 1e-8);
        assert_relative_eq!(r.x[1], 1.5, epsilon = 1e-8);
    }

    #[test]
    fn input_validation() {
        let bad_bounds = SimplexInput {
            objective: vec![1.0],
            rows: vec![],
            lower: vec![1.0],
            upper: vec![0.0],
        };
        assert!(solve(&bad_bounds).is_err());
        let bad_width = SimplexInput {
            objective: vec![1.0, 2.0],
            rows: vec![le(&[1.0], 1.0)],
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
        };
        assert!(solve(&bad_width).is_err());
    }
}
