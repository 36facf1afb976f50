//! The global synthesis iteration and the multi-start search.
//!
//! Each iteration alternates the two sub-problems: the constrained
//! eigenproblem freezes the mode base at the current design, and the
//! linear program updates the design within move limits. The loop runs
//! until the design stops moving, the selectivity plateaus, the iteration
//! budget is exhausted, or the run stalls on persistent infeasibility.
//!
//! Random starts usually violate the stiffness caps by orders of
//! magnitude. Because the assembled stiffness is homogeneous of degree one
//! in the design variables, a single global rescale of the start vector
//! brings every cap below μ exactly, so the caps hold at every accepted
//! step from the first iteration on. The orthogonality equalities cannot
//! be restored by scaling; their band is instead widened per iteration to
//! the largest cross term reachable inside the move-limit box and shrunk
//! geometrically from there (never below ε), so each LP stays feasible
//! while the equalities are tightened to the target band.
//!
//! The caps alone are one-sided: once the guard objective dominates, the
//! update can trade primary-mode stiffness away and let the capped
//! quotients sag below μ. Each update therefore also carries one *floor*
//! per capped mode — `φⱼᵀK̄φⱼ ≥ μ − ε꜀` — driven by the same reach-based
//! continuation, so a converged design holds every primary quotient inside
//! a narrow band under the cap. Iterations are reported feasible only
//! against the *strict* bands (caps, floors, orthogonality, guards,
//! volume); convergence tests count only those. A run stalls when even a
//! thousandfold band widening leaves the LP infeasible, or when the strict
//! violation stops improving.

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assess::extended_cosine;
use crate::base::{expand_base, solve_constrained_base};
use crate::error::Error;
use crate::lp::{
    build_lp, solve_lp, ConstraintRow, LinearProgram, LpOutcome, MoveLimits, RowClass, RowKind,
};
use crate::model::GroundStructure;
use crate::modes::DesiredModeSet;
use crate::reduction::{condense_banded, Assembler, DofPartition};
use crate::spectra::{eigen, summarize, StiffnessSummary};
use crate::Result;

/// Move-limit width over iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MoveLimitSchedule {
    /// ν(s) = ν for all s (the reference setting).
    Constant,
    /// ν(s) = max(floor, ν·decayˢ): wide early exploration, then a tight
    /// limit once the topology settles.
    Geometric { decay: f64, floor: f64 },
}

/// All scalar knobs of one synthesis run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisConfig {
    /// Primary-stiffness cap μ (stiffness units).
    pub mu: f64,
    /// Volume budget V (dimensionless sum of the design variables).
    pub volume: f64,
    /// Move-limit radius ν.
    pub nu: f64,
    pub schedule: MoveLimitSchedule,
    /// Global design bounds, 0 < xˡ ≤ x ≤ xᵘ.
    pub x_lower: f64,
    pub x_upper: f64,
    /// Stabilizing undesired modes in the order guards (0 = all q−m).
    pub n_guard: usize,
    pub max_iters: usize,
    /// Step-norm convergence: ‖Δx‖∞ < `step_tol` on `step_patience`
    /// consecutive feasible iterations.
    pub step_tol: f64,
    pub step_patience: usize,
    /// Plateau convergence: relative selectivity change below
    /// `selectivity_tol` across `selectivity_patience` feasible iterations.
    pub selectivity_tol: f64,
    pub selectivity_patience: usize,
    /// Orthogonality band ε = `eq_band_factor`·μ.
    pub eq_band_factor: f64,
    /// Cap-floor band ε = `cap_band_factor`·μ: how far below the cap the
    /// primary quotients may sit at convergence. Keeps the capped modes
    /// pulled up against μ instead of letting them drift while the guard
    /// objective grows.
    pub cap_band_factor: f64,
    /// Consecutive non-improving infeasible steps before a stall.
    pub stall_patience: usize,
    /// Random starts per μ value.
    pub n_starts: usize,
    pub rng_seed: u64,
    /// Similarity gate used when ranking multi-start results.
    pub similarity_threshold: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            mu: 0.0,
            volume: 0.0,
            nu: 0.001,
            schedule: MoveLimitSchedule::Constant,
            x_lower: 1e-8,
            x_upper: 1.0,
            n_guard: 0,
            max_iters: 2000,
            step_tol: 1e-6,
            step_patience: 5,
            selectivity_tol: 1e-3,
            selectivity_patience: 20,
            eq_band_factor: 1e-6,
            cap_band_factor: 2e-3,
            stall_patience: 30,
            n_starts: 1,
            rng_seed: 0,
            similarity_threshold: 0.99,
        }
    }
}

impl SynthesisConfig {
    /// A config with the two problem-scale parameters set and reference
    /// defaults everywhere else.
    pub fn new(mu: f64, volume: f64) -> Self {
        Self {
            mu,
            volume,
            ..Self::default()
        }
    }

    /// Validate against a problem of `r` elements.
    pub fn validate(&self, r: usize) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return fail(format!("stiffness cap mu = {}", self.mu));
        }
        if !(self.volume > 0.0 && self.volume <= r as f64 * self.x_upper) {
            return fail(format!(
                "volume {} outside (0, r·xᵘ] = (0, {}]",
                self.volume,
                r as f64 * self.x_upper
            ));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return fail(format!("move limit nu = {}", self.nu));
        }
        if let MoveLimitSchedule::Geometric { decay, floor } = self.schedule {
            if !(decay > 0.0 && decay <= 1.0 && floor > 0.0) {
                return fail(format!("geometric schedule decay={decay}, floor={floor}"));
            }
        }
        if !(self.x_lower > 0.0 && self.x_lower < self.x_upper && self.x_upper.is_finite()) {
            return fail(format!("bounds [{}, {}]", self.x_lower, self.x_upper));
        }
        if self.max_iters == 0 || self.step_patience == 0 || self.selectivity_patience == 0 {
            return fail("iteration and patience counts must be ≥ 1".into());
        }
        if !(self.step_tol > 0.0 && self.selectivity_tol > 0.0 && self.eq_band_factor >= 0.0) {
            return fail("tolerances must be positive".into());
        }
        if !(self.cap_band_factor > 0.0 && self.cap_band_factor < 0.5) {
            return fail(format!("cap band factor {} outside (0, 0.5)", self.cap_band_factor));
        }
        if self.stall_patience == 0 || self.n_starts == 0 {
            return fail("stall patience and start count must be ≥ 1".into());
        }
        if !(0.0..=1.0).contains(&self.similarity_threshold) {
            return fail(format!("similarity threshold {}", self.similarity_threshold));
        }
        Ok(())
    }

    fn nu_at(&self, iteration: usize) -> f64 {
        match self.schedule {
            MoveLimitSchedule::Constant => self.nu,
            MoveLimitSchedule::Geometric { decay, floor } => {
                (self.nu * decay.powi(iteration as i32)).max(floor)
            }
        }
    }

    pub fn guards(&self, q: usize, m: usize) -> usize {
        if self.n_guard == 0 {
            q - m
        } else {
            self.n_guard.min(q - m)
        }
    }
}

/// Terminal state of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    StalledInfeasible,
}

/// One line of the iteration history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// λ₁ … λ_{m+1} of the design at the start of the step.
    pub eigenvalues: Vec<f64>,
    /// S = λ_{m+1}/λ_m at the start of the step.
    pub selectivity: f64,
    /// Rayleigh quotient θ₁ of the softest undesired base vector.
    pub softest_quotient: f64,
    /// Whether the LP step was feasible-optimal.
    pub feasible: bool,
    /// ‖Δx‖∞ of the accepted step.
    pub step_norm: f64,
    /// Total constraint violation at the accepted point (0 when feasible).
    pub violation: f64,
    /// Orthogonality-band escalations used within this iteration.
    pub escalations: u8,
}

/// Everything a finished run reports.
#[derive(Debug, Clone)]
pub struct SynthesisResult {
    /// Final design variables.
    pub x: Vec<f64>,
    pub status: RunStatus,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    /// Final condensed spectrum (all q eigenvalues, ascending).
    pub eigenvalues: Vec<f64>,
    /// Final condensed eigenvectors as columns.
    pub modes: DMatrix<f64>,
    pub summary: StiffnessSummary,
    /// Extended cosine similarity of the kinematic modes to the targets.
    pub similarity: f64,
    /// Whether the last accepted step was feasible.
    pub final_feasible: bool,
    pub mu: f64,
    pub mu_index: usize,
    pub start_index: usize,
}

/// Margin applied when rescaling a start vector into the caps. Rescaling
/// well below the caps leaves headroom for the balancing moves that cancel
/// cross-stiffness terms; a start pinned against the caps can otherwise
/// satisfy a tightening orthogonality band only by removing material.
const CAP_RESCALE_MARGIN: f64 = 0.5;
/// Fraction of the reachable cross-term reduction demanded per iteration
/// while an orthogonality band is still wider than the strict ε.
const BAND_CUT: f64 = 0.5;

/// Tolerance below which a strict-band violation counts as feasible.
fn feasibility_tolerance(mu: f64) -> f64 {
    1e-9 * mu.max(1.0)
}

/// Diagonal of `Φ̄ᵀK̄Φ̄`: the primary-stiffness cap activities.
fn cap_forms(kbar: &DMatrix<f64>, modes: &DesiredModeSet) -> Vec<f64> {
    (0..modes.m())
        .map(|j| {
            let col = modes.columns.column(j);
            (col.transpose() * kbar * col)[(0, 0)]
        })
        .collect()
}

/// Append one floor row per primary-stiffness cap: `−φⱼᵀK̄φⱼ ≤ −(μ − band)`.
/// The caps alone leave the primary quotients free to sag while the guard
/// objective grows; the floors make μ a two-sided target, so a feasible
/// converged design holds every capped mode within `band` of μ.
fn append_cap_floors(lp: &mut LinearProgram, mu: f64, band: f64) {
    let floors: Vec<ConstraintRow> = lp
        .rows
        .iter()
        .filter(|row| row.class == RowClass::StiffnessCap)
        .map(|row| ConstraintRow {
            label: format!("{}_floor", row.label),
            class: RowClass::CapFloor,
            coeffs: row.coeffs.iter().map(|c| -c).collect(),
            rhs: band - mu,
            kind: RowKind::Le,
        })
        .collect();
    lp.rows.extend(floors);
}

/// Widen each continuation band to what is reachable inside the move-limit
/// box, demanding a `BAND_CUT` fraction of that reach per iteration; rows
/// already inside their strict band keep it. Orthogonality rows bound a
/// cross term `c₀` from both sides; cap-floor rows bound a primary
/// quotient from below only. Expects `lp` to carry the strict bands on
/// entry (a fresh clone of the reporting LP).
fn relax_bands(lp: &mut LinearProgram, x: &[f64]) {
    let mut i = 0;
    while i < lp.rows.len() {
        match lp.rows[i].class {
            // A zero band emits exact equality rows; those cannot be relaxed.
            RowClass::Orthogonality if lp.rows[i].kind != RowKind::Eq => {
                // Banded rows come in (hi, lo) pairs sharing negated
                // coefficients.
                debug_assert!(i + 1 < lp.rows.len());
                debug_assert_eq!(lp.rows[i + 1].class, RowClass::Orthogonality);
                let eps = lp.rows[i].rhs;
                let c0: f64 = lp.rows[i].coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                // Reachable reduction of |c₀|: move every variable to the
                // box face that counteracts the sign of c₀.
                let mut reach = 0.0;
                for (e, &g) in lp.rows[i].coeffs.iter().enumerate() {
                    let toward = if c0 > 0.0 { -g } else { g };
                    reach += if toward < 0.0 {
                        -toward * (x[e] - lp.lower[e])
                    } else {
                        toward * (lp.upper[e] - x[e])
                    };
                }
                let band = (c0.abs() - BAND_CUT * reach).max(eps);
                lp.rows[i].rhs = band;
                lp.rows[i + 1].rhs = band;
                i += 2;
            }
            RowClass::CapFloor => {
                // One-sided cut expressed directly on the row: with activity
                // a₀ = −φᵀK̄φ and D the largest reduction of a₀ the box
                // allows, the relaxed rhs is max(strict, a₀ − BAND_CUT·D).
                let a0: f64 = lp.rows[i].coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                let mut reach = 0.0;
                for (e, &g) in lp.rows[i].coeffs.iter().enumerate() {
                    reach += if g > 0.0 {
                        g * (x[e] - lp.lower[e])
                    } else {
                        -g * (lp.upper[e] - x[e])
                    };
                }
                let strict = lp.rows[i].rhs;
                lp.rows[i].rhs = (a0 - BAND_CUT * reach).max(strict);
                i += 1;
            }
            _ => i += 1,
        }
    }
}

/// Multiply every continuation band by `factor` (the escalation ladder),
/// with a floor that makes the current design satisfy the row: a band at
/// least `|c₀|` (cross terms) or at least the current deficit `μ − φᵀK̄φ`
/// (cap floors) is satisfied by the current point, and the current point
/// satisfies every other row, so one escalation always restores LP
/// feasibility. The reachable-reduction estimate behind a tightened band
/// ignores competing rows (caps and order guards can block the moves that
/// would cut a cross term), which is exactly the case the ladder exists for.
fn escalate_bands(lp: &mut LinearProgram, x: &[f64], factor: f64, mu: f64) {
    let mut i = 0;
    while i < lp.rows.len() {
        match lp.rows[i].class {
            RowClass::Orthogonality if lp.rows[i].kind != RowKind::Eq => {
                let c0: f64 = lp.rows[i].coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                let band = (lp.rows[i].rhs * factor).max(c0.abs() * (1.0 + 1e-12));
                lp.rows[i].rhs = band;
                lp.rows[i + 1].rhs = band;
                i += 2;
            }
            RowClass::CapFloor => {
                let a0: f64 = lp.rows[i].coeffs.iter().zip(x).map(|(a, x)| a * x).sum();
                let deficit = mu + a0;
                let band = ((mu + lp.rows[i].rhs) * factor).max(deficit * (1.0 + 1e-12));
                lp.rows[i].rhs = band - mu;
                i += 1;
            }
            _ => i += 1,
        }
    }
}

/// Run the alternating synthesis iteration from one start vector.
pub fn iterate(
    gs: &GroundStructure,
    partition: &DofPartition,
    modes: &DesiredModeSet,
    config: &SynthesisConfig,
    x0: &[f64],
) -> Result<SynthesisResult> {
    let r = gs.n_elements();
    let q = partition.n_active();
    let m = modes.m();
    config.validate(r)?;
    if modes.q() != q {
        return Err(Error::DimensionMismatch {
            expected: q,
            got: modes.q(),
            context: "desired modes vs active DoFs",
        });
    }
    if x0.len() != r {
        return Err(Error::DimensionMismatch {
            expected: r,
            got: x0.len(),
            context: "start vector",
        });
    }
    let assembler = Assembler::new(gs, partition)?;
    let n_guard = config.guards(q, m);
    let strict_band = config.eq_band_factor * config.mu;
    let cap_band = config.cap_band_factor * config.mu;
    let feas_tol = feasibility_tolerance(config.mu);

    let mut x: Vec<f64> = x0
        .iter()
        .map(|&v| v.clamp(config.x_lower, config.x_upper))
        .collect();

    // The stiffness is homogeneous of degree one in x, so one global
    // rescale brings every primary-stiffness cap under μ exactly.
    {
        let sys = condense_banded(assembler.assemble(gs, &x)?)?;
        let worst = cap_forms(&sys.kbar, modes)
            .into_iter()
            .fold(0.0f64, f64::max);
        if worst > CAP_RESCALE_MARGIN * config.mu {
            let s = CAP_RESCALE_MARGIN * config.mu / worst;
            debug!("start caps at {worst:.4e} > μ = {:.4e}: rescaling by {s:.4e}", config.mu);
            for v in &mut x {
                *v = (*v * s).clamp(config.x_lower, config.x_upper);
            }
        }
    }

    let mut history: Vec<IterationRecord> = Vec::new();
    let mut status = RunStatus::MaxIters;
    let mut quiet_steps = 0usize; // consecutive feasible small steps
    let mut feasible_selectivity: Vec<f64> = Vec::new();
    let mut infeasible_run = 0usize;
    let mut zero_step_run = 0usize; // consecutive infeasible no-move steps
    let mut best_violation = f64::INFINITY;

    'outer: for it in 0..config.max_iters {
        let sys = condense_banded(assembler.assemble(gs, &x)?)?;
        let modal = eigen(&sys.kbar, m)?;
        let summary = summarize(&modal, m)?;
        let cbase = solve_constrained_base(&sys.kbar, modes)?;
        let softest = cbase.quotients[0];
        let obase = expand_base(modes, &cbase, &sys)?;
        let limits = MoveLimits::around(&x, config.nu_at(it), config.x_lower, config.x_upper);

        // Strict LP for feasibility reporting; the solved LP carries the
        // continuation bands (strict once the cross terms are inside ε and
        // the capped quotients are within ε꜀ of μ).
        let mut strict = build_lp(
            gs,
            &obase,
            config.mu,
            config.volume,
            n_guard,
            strict_band,
            &limits,
        )?;
        append_cap_floors(&mut strict, config.mu, cap_band);
        let strict = strict;
        let mut lp = strict.clone();
        relax_bands(&mut lp, &x);

        // Escalation ladder: widen the bands tenfold up to three times,
        // then drop the floor rows for this step, before declaring the run
        // stuck. A solution the solver rejected in its own verification
        // pass (degenerate basis) is handled the same way: escalation
        // perturbs the geometry, and persistent failure becomes an honest
        // stall instead of aborting the whole run.
        let mut escalations = 0u8;
        let xn = loop {
            let outcome = match solve_lp(&lp) {
                Ok(outcome) => outcome,
                // A degenerate basis can make the solver reject its own
                // point or exhaust its pivot budget. Either way the step is
                // unusable, not the run: escalation perturbs the program,
                // and a persistent failure ends as an honest stall below.
                Err(Error::Numerical(msg)) | Err(Error::LpFailure(msg)) => {
                    debug!("iter {it}: unusable LP step: {msg}");
                    LpOutcome::Infeasible {
                        x: x.clone(),
                        objective: 0.0,
                        total_violation: f64::INFINITY,
                        violations: Vec::new(),
                    }
                }
                Err(e) => return Err(e),
            };
            match outcome {
                LpOutcome::Unbounded => {
                    return Err(Error::Numerical("stiffness-update LP unbounded".into()))
                }
                LpOutcome::Optimal { x: xn, .. } => break xn,
                LpOutcome::Infeasible { .. } => {
                    if escalations < 3 {
                        escalate_bands(&mut lp, &x, 10.0, config.mu);
                        escalations += 1;
                        continue;
                    }
                    // Last resort: solve this step without the floor rows.
                    // The floors sit nearly parallel to the caps, and on
                    // large grids that degeneracy can exhaust the solver's
                    // pivot budget no matter how wide the bands are. A
                    // cap-only step keeps the run alive; it cannot fake
                    // progress because feasibility is still measured
                    // against the strict program *with* the floors.
                    if lp.rows.iter().any(|r| r.class == RowClass::CapFloor) {
                        lp.rows.retain(|r| r.class != RowClass::CapFloor);
                        escalations += 1;
                        continue;
                    }
                    let violation: f64 = strict.violations(&x).iter().sum();
                    history.push(IterationRecord {
                        iteration: it,
                        eigenvalues: modal.eigenvalues[..=m].to_vec(),
                        selectivity: summary.selectivity,
                        softest_quotient: softest,
                        feasible: false,
                        step_norm: 0.0,
                        violation,
                        escalations,
                    });
                    status = RunStatus::StalledInfeasible;
                    break 'outer;
                }
            }
        };

        let step_norm = step_inf_norm(&x, &xn);
        let violation: f64 = strict.violations(&xn).iter().sum();
        let feasible = violation <= feas_tol;
        x = xn;

        debug!(
            "iter {it}: λ = {:?}, S = {:.4e}, θ₁ = {:.4e}, {} step {:.3e}, strict violation {:.3e}",
            &modal.eigenvalues[..=m],
            summary.selectivity,
            softest,
            if feasible { "feasible" } else { "tightening" },
            step_norm,
            violation
        );
        history.push(IterationRecord {
            iteration: it,
            eigenvalues: modal.eigenvalues[..=m].to_vec(),
            selectivity: summary.selectivity,
            softest_quotient: softest,
            feasible,
            step_norm,
            violation,
            escalations,
        });

        if feasible {
            infeasible_run = 0;
            zero_step_run = 0;
            best_violation = f64::INFINITY;
            feasible_selectivity.push(summary.selectivity);
            if step_norm < config.step_tol {
                quiet_steps += 1;
            } else {
                quiet_steps = 0;
            }
            if quiet_steps >= config.step_patience {
                status = RunStatus::Converged;
                break;
            }
            let n = feasible_selectivity.len();
            if n > config.selectivity_patience {
                let prev = feasible_selectivity[n - 1 - config.selectivity_patience];
                let cur = feasible_selectivity[n - 1];
                if (cur - prev).abs() <= config.selectivity_tol * prev.abs().max(f64::MIN_POSITIVE)
                {
                    status = RunStatus::Converged;
                    break;
                }
            }
        } else {
            quiet_steps = 0;
            // A strict-band violator whose LP returns the current point is
            // stuck: the next iteration rebuilds the same program.
            if step_norm < config.step_tol {
                zero_step_run += 1;
                if zero_step_run >= 3 {
                    status = RunStatus::StalledInfeasible;
                    break;
                }
            } else {
                zero_step_run = 0;
            }
            // Progress means the violation shrinks measurably.
            if violation < best_violation * (1.0 - 1e-3) {
                best_violation = violation;
                infeasible_run = 0;
            } else {
                infeasible_run += 1;
                if infeasible_run >= config.stall_patience {
                    status = RunStatus::StalledInfeasible;
                    break;
                }
            }
        }
    }

    // Evaluate the final design.
    let sys = condense_banded(assembler.assemble(gs, &x)?)?;
    let modal = eigen(&sys.kbar, m)?;
    let summary = summarize(&modal, m)?;
    let similarity = extended_cosine(&modes.columns, &modal.kinematic())?;
    let final_feasible = history.last().map_or(false, |rec| rec.feasible);
    Ok(SynthesisResult {
        x,
        status,
        iterations: history.len(),
        history,
        eigenvalues: modal.eigenvalues.clone(),
        modes: modal.modes,
        summary,
        similarity,
        final_feasible,
        mu: config.mu,
        mu_index: 0,
        start_index: 0,
    })
}

fn step_inf_norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Deterministic per-run start vector: the stream is derived from the
/// master seed and the run coordinates, so results do not depend on
/// scheduling.
fn random_start(seed: u64, mu_index: usize, start_index: usize, r: usize, xl: f64, xu: f64) -> Vec<f64> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&(mu_index as u64).to_le_bytes());
    bytes[16..24].copy_from_slice(&(start_index as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(bytes);
    (0..r).map(|_| rng.random_range(xl..xu)).collect()
}

/// Rank finished runs: reliable (feasible, similarity above the gate)
/// first, then by selectivity; ties resolve on similarity and finally on
/// the run coordinates so the order is total and reproducible.
fn rank(results: &mut [SynthesisResult], threshold: f64) {
    results.sort_by(|a, b| {
        (b.final_feasible, b.similarity >= threshold)
            .cmp(&(a.final_feasible, a.similarity >= threshold))
            .then(b.summary.selectivity.total_cmp(&a.summary.selectivity))
            .then(b.similarity.total_cmp(&a.similarity))
            .then(a.mu_index.cmp(&b.mu_index))
            .then(a.start_index.cmp(&b.start_index))
    });
}

/// Run `n_starts` independent random starts for every μ in `mu_list` and
/// return all successful runs, best first.
///
/// Runs execute in parallel; failed runs are logged and skipped unless
/// every run fails, in which case the first error is returned.
pub fn multi_start(
    gs: &GroundStructure,
    partition: &DofPartition,
    modes: &DesiredModeSet,
    config: &SynthesisConfig,
    mu_list: &[f64],
) -> Result<Vec<SynthesisResult>> {
    if mu_list.is_empty() {
        return Err(Error::InvalidConfig("empty cap sweep".into()));
    }
    for &mu in mu_list {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("cap sweep value {mu}")));
        }
    }
    // Surface config errors before spawning work.
    let mut probe = config.clone();
    probe.mu = mu_list[0];
    probe.validate(gs.n_elements())?;

    let jobs: Vec<(usize, usize)> = (0..mu_list.len())
        .flat_map(|mi| (0..config.n_starts).map(move |si| (mi, si)))
        .collect();
    let outcomes: Vec<Result<SynthesisResult>> = jobs
        .par_iter()
        .map(|&(mu_index, start_index)| {
            let mut cfg = config.clone();
            cfg.mu = mu_list[mu_index];
            let x0 = random_start(
                cfg.rng_seed,
                mu_index,
                start_index,
                gs.n_elements(),
                cfg.x_lower,
                cfg.x_upper,
            );
            iterate(gs, partition, modes, &cfg, &x0).map(|mut run| {
                run.mu_index = mu_index;
                run.start_index = start_index;
                info!(
                    "run μ[{mu_index}]={:.4e} start {start_index}: {:?} after {} iters, S = {:.4e}, δ_e = {:.6}",
                    cfg.mu, run.status, run.iterations, run.summary.selectivity, run.similarity
                );
                run
            })
        })
        .collect();

    let mut ok = Vec::new();
    let mut first_err: Option<Error> = None;
    for (job, outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            Ok(run) => ok.push(run),
            Err(e) => {
                warn!("run μ[{}] start {} failed: {e}", job.0, job.1);
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.unwrap_or(Error::InvalidConfig("no runs executed".into())));
    }
    rank(&mut ok, config.similarity_threshold);
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, GroundStructure, SectionProperties};
    use approx::assert_relative_eq;
    use std::collections::BTreeSet;

    fn beam_problem() -> (GroundStructure, DofPartition, DesiredModeSet) {
        let section = SectionProperties::new(20.0, 3000.0, 500.0 / 3.0).unwrap();
        let (grid, elements) = build_grid(5.0, 0.0, 5.0, 1).unwrap();
        let supports: BTreeSet<usize> = [0, 1, 2].into_iter().collect();
        let gs = GroundStructure::new(grid, elements, section, supports).unwrap();
        let partition = DofPartition::new(vec![0, 1], gs.n_free()).unwrap();
        let modes =
            DesiredModeSet::from_raw(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        (gs, partition, modes)
    }

    /// 3×3 lattice clamped along the bottom, one active node on top.
    fn lattice_problem() -> (GroundStructure, DofPartition, DesiredModeSet) {
        let section = SectionProperties::new(20.0, 3000.0, 500.0 / 3.0).unwrap();
        let (grid, elements) = build_grid(10.0, 10.0, 5.0, 1).unwrap();
        let supports: BTreeSet<usize> =
            (0..3).flat_map(|n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
        let gs = GroundStructure::new(grid, elements, section, supports).unwrap();
        let top_mid = 7; // node (1, 2)
        let a0 = gs.free_dof(3 * top_mid).unwrap();
        let a1 = gs.free_dof(3 * top_mid + 1).unwrap();
        let partition = DofPartition::new(vec![a0, a1], gs.n_free()).unwrap();
        let modes =
            DesiredModeSet::from_raw(DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        (gs, partition, modes)
    }

    fn condensed_primary(gs: &GroundStructure, partition: &DofPartition, x: &[f64]) -> f64 {
        let sys =
            condense_banded(Assembler::new(gs, partition).unwrap().assemble(gs, x).unwrap())
                .unwrap();
        eigen(&sys.kbar, 1).unwrap().eigenvalues[0]
    }

    #[test]
    fn toy_problem_converges_to_binding_cap_in_three_iterations() {
        let (gs, partition, modes) = beam_problem();
        // Cap that binds at x = 0.5: the single-element primary stiffness
        // is linear in x.
        let lambda_full = condensed_primary(&gs, &partition, &[1.0]);
        let mut config = SynthesisConfig::new(0.5 * lambda_full, 1.0);
        config.nu = 1.0; // full-box moves: the LP jumps straight to the cap
        config.step_tol = 1e-9;
        config.step_patience = 1;
        let result = iterate(&gs, &partition, &modes, &config, &[0.9]).unwrap();
        assert_eq!(result.status, RunStatus::Converged);
        assert!(result.iterations <= 3, "took {} iterations", result.iterations);
        assert_relative_eq!(result.x[0], 0.5, epsilon = 1e-9);
        assert_relative_eq!(result.summary.primary[0], 0.5 * lambda_full, max_relative = 1e-9);
        assert_relative_eq!(result.similarity, 1.0, epsilon = 1e-9);
    }

    #[test]
    fn feasible_run_respects_caps_volume_and_move_limits() {
        let (gs, partition, modes) = lattice_problem();
        let x0 = vec![0.4; gs.n_elements()];
        // A cap above the start's primary stiffness: the cap itself never
        // binds on the way up, and the floor pulls the primary quotient up
        // to μ before the run may converge.
        let lam0 = condensed_primary(&gs, &partition, &x0);
        let mut config = SynthesisConfig::new(1.5 * lam0, 0.6 * gs.n_elements() as f64);
        config.nu = 0.05;
        config.max_iters = 400;
        let result = iterate(&gs, &partition, &modes, &config, &x0).unwrap();

        assert_eq!(result.status, RunStatus::Converged);
        assert!(result.final_feasible);
        assert!(result.history.last().unwrap().feasible);
        // The cap holds throughout: the primary eigenvalue never exceeds μ.
        assert!(result
            .history
            .iter()
            .all(|rec| rec.eigenvalues[0] <= config.mu * (1.0 + 1e-6)));
        // Move limits hold at every step.
        assert!(result.history.iter().all(|rec| rec.step_norm <= 0.05 + 1e-12));
        // Final design: the primary quotient sits inside the band under μ,
        // and the volume budget holds.
        // The 1e-3 slack covers the one-step-stale linearization of the
        // condensed form (the floor row is exact for the expansion frozen at
        // the previous design; with ν = 0.05 the recovery shift is visible).
        let forms = cap_forms(&condensed_kbar(&gs, &partition, &result.x), &modes);
        assert!(forms[0] <= config.mu * (1.0 + 1e-6), "cap violated: {forms:?}");
        assert!(
            forms[0] >= config.mu * (1.0 - config.cap_band_factor - 1e-3),
            "floor not binding: {forms:?} vs μ = {}",
            config.mu
        );
        let total: f64 = result.x.iter().sum();
        assert!(total <= config.volume * (1.0 + 1e-9));
        // The desired mode is the softest direction.
        assert!(result.similarity > 0.99, "δ_e = {}", result.similarity);
        assert!(result.summary.selectivity > 1.0);
    }

    #[test]
    fn cap_violating_start_is_rescaled_into_feasibility() {
        let (gs, partition, modes) = lattice_problem();
        let x0 = vec![0.9; gs.n_elements()];
        let lam0 = condensed_primary(&gs, &partition, &x0);
        // A cap far below the start: stiffness is homogeneous in x, so the
        // initial rescale brings the design inside the cap in one stroke and
        // every accepted step is feasible from the first iteration.
        let mut config = SynthesisConfig::new(lam0 / 50.0, 0.9 * gs.n_elements() as f64);
        config.nu = 0.02;
        config.max_iters = 600;
        let result = iterate(&gs, &partition, &modes, &config, &x0).unwrap();

        assert!(
            result.history.iter().all(|rec| rec.feasible),
            "rescaled run should never leave the feasible set"
        );
        assert_eq!(result.status, RunStatus::Converged);
        assert!(result.final_feasible);
        assert!(result.summary.primary[0] <= config.mu * (1.0 + 1e-6));
        let total: f64 = result.x.iter().sum();
        assert!(total <= config.volume * (1.0 + 1e-9));
    }

    /// 5×3 lattice clamped along the bottom, two active corner nodes on top,
    /// desired modes = the two corner x translations. The modes share one
    /// stiffness scale (mirror-image corners), so both cap floors target
    /// the same μ, while the lattice couples the corners strongly enough
    /// that the cross stiffness term starts far outside the band.
    fn two_mode_problem() -> (GroundStructure, DofPartition, DesiredModeSet) {
        let section = SectionProperties::new(20.0, 3000.0, 500.0 / 3.0).unwrap();
        let (grid, elements) = build_grid(20.0, 10.0, 5.0, 1).unwrap();
        let supports: BTreeSet<usize> =
            (0..5).flat_map(|n| [3 * n, 3 * n + 1, 3 * n + 2]).collect();
        let gs = GroundStructure::new(grid, elements, section, supports).unwrap();
        let (left, right) = (10, 14); // top corners
        let active: Vec<usize> = [left, right]
            .into_iter()
            .flat_map(|n| [gs.free_dof(3 * n).unwrap(), gs.free_dof(3 * n + 1).unwrap()])
            .collect();
        let partition = DofPartition::new(active, gs.n_free()).unwrap();
        let raw = DMatrix::from_column_slice(
            4,
            2,
            &[1.0, 0.0, 0.0, 0.0, /* | */ 0.0, 0.0, 1.0, 0.0],
        );
        let modes = DesiredModeSet::from_raw(raw).unwrap();
        (gs, partition, modes)
    }

    fn condensed_kbar(
        gs: &GroundStructure,
        partition: &DofPartition,
        x: &[f64],
    ) -> DMatrix<f64> {
        condense_banded(Assembler::new(gs, partition).unwrap().assemble(gs, x).unwrap())
            .unwrap()
            .kbar
    }

    #[test]
    fn cross_coupled_start_is_resolved_by_band_continuation() {
        let (gs, partition, modes) = two_mode_problem();
        // A deterministic low-discrepancy ramp breaks the lattice symmetry,
        // so the desired modes start with a cross stiffness term far above
        // the orthogonality band.
        let x0: Vec<f64> = (0..gs.n_elements())
            .map(|e| 0.1 + 0.8 * ((e as f64 * 0.618_034) % 1.0))
            .collect();
        let forms = cap_forms(&condensed_kbar(&gs, &partition, &x0), &modes);
        let mu = 1.5 * forms.iter().fold(0.0_f64, |a, &b| a.max(b));
        let mut config = SynthesisConfig::new(mu, 0.6 * gs.n_elements() as f64);
        // Wide early moves to expose the continuation, then a decaying move
        // limit: the LP rows are exact only at the linearization point, so
        // the strict band is meaningful at convergence only if the final
        // steps are small.
        config.nu = 0.2;
        config.schedule = MoveLimitSchedule::Geometric { decay: 0.9, floor: 1e-4 };
        config.max_iters = 400;
        let result = iterate(&gs, &partition, &modes, &config, &x0).unwrap();

        // The cross term cannot be cancelled in one move-limited step, so the
        // run starts outside the strict band and tightens its way in.
        let first = result.history.first().unwrap();
        assert!(!first.feasible, "start should violate the strict band");
        assert!(first.violation > 0.0);
        // The escalation floor at |c₀| restores feasibility in one strike.
        assert!(result.history.iter().all(|rec| rec.escalations <= 1));
        assert!(result.history.iter().any(|rec| rec.feasible));
        assert_eq!(result.status, RunStatus::Converged);
        assert!(result.final_feasible);

        // Big-picture progress: the strict violation shrinks by orders of
        // magnitude over the infeasible prefix (band tightening alternates
        // with mode rotation, so per-step monotonicity is not guaranteed).
        let prefix: Vec<f64> = result
            .history
            .iter()
            .take_while(|rec| !rec.feasible)
            .map(|rec| rec.violation)
            .collect();
        assert!(!prefix.is_empty());
        assert!(
            *prefix.last().unwrap() < 0.5 * prefix[0],
            "violation did not shrink: {:.3e} -> {:.3e}",
            prefix[0],
            prefix.last().unwrap()
        );

        // Converged design honours the caps, holds both primary quotients
        // up near μ, and cancels the cross coupling. The re-condensed cross
        // term differs from the final LP row by the recovery shift of the
        // last step (the condensed form has visible curvature where the
        // interior is nearly void), so it is checked against the stiffness
        // scale and the starting coupling, not against the LP band.
        let kbar = condensed_kbar(&gs, &partition, &result.x);
        let forms = cap_forms(&kbar, &modes);
        assert!(forms.iter().all(|&f| f <= mu * (1.0 + 1e-6)), "caps violated: {forms:?}");
        assert!(
            forms.iter().all(|&f| f >= mu * (1.0 - config.cap_band_factor - 1e-3)),
            "floors not binding: {forms:?} vs μ = {mu}"
        );
        let phi = &modes.columns;
        let cross = (phi.column(0).transpose() * &kbar * phi.column(1))[(0, 0)];
        let cross0 = (phi.column(0).transpose()
            * &condensed_kbar(&gs, &partition, &x0)
            * phi.column(1))[(0, 0)];
        assert!(
            cross.abs() <= 1e-4 * mu && cross.abs() <= 1e-2 * cross0.abs(),
            "cross term {cross:.3e} not cancelled (start {cross0:.3e}, μ = {mu:.3e})"
        );
    }

    #[test]
    fn multi_start_is_deterministic_and_ranked() {
        let (gs, partition, modes) = lattice_problem();
        let lam = condensed_primary(&gs, &partition, &[0.5; 20]);
        let mut config = SynthesisConfig::new(lam, 0.6 * gs.n_elements() as f64);
        config.nu = 0.05;
        config.max_iters = 120;
        config.n_starts = 3;
        config.rng_seed = 42;
        let mus = [0.8 * lam, 1.2 * lam];

        let a = multi_start(&gs, &partition, &modes, &config, &mus).unwrap();
        let b = multi_start(&gs, &partition, &modes, &config, &mus).unwrap();
        assert_eq!(a.len(), 6);
        assert_eq!(a.len(), b.len());
        for (ra, rb) in a.iter().zip(&b) {
            assert_eq!(ra.x, rb.x, "histories must be bit-identical");
            let ha = serde_json::to_string(&ra.history).unwrap();
            let hb = serde_json::to_string(&rb.history).unwrap();
            assert_eq!(ha, hb);
        }
        // Ranking: reliable runs first, selectivity descending within the
        // reliable group.
        let reliable: Vec<_> = a
            .iter()
            .map(|r| r.final_feasible && r.similarity >= config.similarity_threshold)
            .collect();
        let first_unreliable = reliable.iter().position(|&v| !v).unwrap_or(a.len());
        assert!(reliable[..first_unreliable].iter().all(|&v| v));
        assert!(reliable[first_unreliable..].iter().all(|&v| !v));
        for pair in a[..first_unreliable].windows(2) {
            assert!(
                pair[0].summary.selectivity >= pair[1].summary.selectivity - 1e-12,
                "ranking not sorted by selectivity"
            );
        }
        // A fresh seed changes the start vectors.
        let mut reseeded = config.clone();
        reseeded.rng_seed = 43;
        let c = multi_start(&gs, &partition, &modes, &reseeded, &mus).unwrap();
        assert!(a.iter().zip(&c).any(|(ra, rc)| ra.x != rc.x));
    }

    #[test]
    fn config_validation_rejects_bad_parameters() {
        let (gs, partition, modes) = beam_problem();
        let bad = SynthesisConfig::new(-1.0, 1.0);
        assert!(iterate(&gs, &partition, &modes, &bad, &[0.5]).is_err());
        let mut bad = SynthesisConfig::new(1.0, 0.0);
        assert!(bad.validate(1).is_err());
        bad.volume = 100.0; // exceeds r·xᵘ = 1
        assert!(bad.validate(1).is_err());
        let mut bad = SynthesisConfig::new(1.0, 1.0);
        bad.x_lower = 0.0; // must stay strictly positive
        assert!(bad.validate(1).is_err());
        let mut bad = SynthesisConfig::new(1.0, 1.0);
        bad.schedule = MoveLimitSchedule::Geometric {
            decay: 1.5,
            floor: 1e-4,
        };
        assert!(bad.validate(1).is_err());
        let mut bad = SynthesisConfig::new(1.0, 1.0);
        bad.cap_band_factor = 0.0; // the floor band must leave room under μ
        assert!(bad.validate(1).is_err());
        bad.cap_band_factor = 0.5;
        assert!(bad.validate(1).is_err());
    }

    #[test]
    fn geometric_schedule_shrinks_to_its_floor() {
        let mut config = SynthesisConfig::new(1.0, 1.0);
        config.nu = 0.1;
        config.schedule = MoveLimitSchedule::Geometric {
            decay: 0.5,
            floor: 0.01,
        };
        assert_relative_eq!(config.nu_at(0), 0.1);
        assert_relative_eq!(config.nu_at(1), 0.05);
        assert_relative_eq!(config.nu_at(10), 0.01);
    }
}
