//! Result bundle: a self-contained JSON artifact holding the problem, all
//! ranked runs with their full iteration histories, and the assessment of
//! the best design.
//!
//! Bundles embed the problem verbatim, so every stored metric can be
//! recomputed from `x` alone — that is what `analyze_bundle` does, and the
//! recomputation must agree with the stored values to tight tolerance.
//! Nothing time- or host-dependent is stored: the same problem and seed
//! produce byte-identical bundles.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assess::{least_squares_fit, simulate, LoadCase};
use crate::driver::{IterationRecord, RunStatus, SynthesisResult};
use crate::error::Error;
use crate::problem::{BuiltProblem, ProblemSpec};
use crate::reduction::{condense_banded, Assembler, CondensedSystem};
use crate::spectra::{eigen, summarize, ModalResult, StiffnessSummary};
use crate::Result;

/// Version of the bundle schema this build reads and writes.
pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Reproducibility trail of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the canonical problem JSON.
    pub config_sha256: String,
    /// Master seed of the multi-start search.
    pub seed: u64,
    pub tool_version: String,
}

/// One finished run (everything serializable from a synthesis result).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub mu: f64,
    pub mu_index: usize,
    pub start_index: usize,
    pub status: RunStatus,
    pub iterations: usize,
    pub final_feasible: bool,
    /// Final primary stiffnesses λ₁…λ_m.
    pub primary: Vec<f64>,
    /// Final secondary stiffness λ_{m+1}.
    pub secondary: f64,
    pub selectivity: f64,
    pub similarity: f64,
    /// Full final condensed spectrum (q values, ascending).
    pub eigenvalues: Vec<f64>,
    /// Final design variables.
    pub x: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl From<&SynthesisResult> for RunRecord {
    fn from(run: &SynthesisResult) -> Self {
        Self {
            mu: run.mu,
            mu_index: run.mu_index,
            start_index: run.start_index,
            status: run.status,
            iterations: run.iterations,
            final_feasible: run.final_feasible,
            primary: run.summary.primary.clone(),
            secondary: run.summary.secondary,
            selectivity: run.summary.selectivity,
            similarity: run.similarity,
            eigenvalues: run.eigenvalues.clone(),
            x: run.x.clone(),
            history: run.history.clone(),
        }
    }
}

/// Least-squares similarity assessment of one design (plain-array form of
/// [`crate::assess::SimilarityReport`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTable {
    pub delta_e: f64,
    /// Row i: coefficients αᵢⱼ of desired mode i in the kinematic modes.
    pub coefficients: Vec<Vec<f64>>,
    /// Column per desired mode: its best approximation φ̄′ᵢ (q entries).
    pub approximations: Vec<Vec<f64>>,
    /// ‖φ̄ᵢ − φ̄′ᵢ‖ per desired mode.
    pub residuals: Vec<f64>,
    /// Eigenvalues of the similarity Gram matrix, ascending.
    pub betas: Vec<f64>,
}

/// One simulated load case on the best design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadCaseRecord {
    pub name: String,
    /// Forces on the active DoFs.
    pub forces: Vec<f64>,
    /// Resulting active displacements.
    pub displacement: Vec<f64>,
    /// Modal coordinates of the displacement (q values).
    pub coordinates: Vec<f64>,
    /// Norm fraction outside the kinematic subspace.
    pub parasitic_residual: f64,
    /// Norm fraction inside the kinematic subspace.
    pub kinematic_fraction: f64,
}

/// The bundle file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub provenance: Provenance,
    /// The problem, embedded verbatim.
    pub problem: ProblemSpec,
    /// All successful runs, best first.
    pub runs: Vec<RunRecord>,
    /// Index of the best run in `runs`.
    pub best: usize,
    /// Similarity assessment of the best design.
    pub similarity: SimilarityTable,
    /// Simulated problem load cases on the best design.
    pub load_cases: Vec<LoadCaseRecord>,
}

/// Full evaluation of one design against a built problem.
pub struct Evaluation {
    pub system: CondensedSystem,
    pub modal: ModalResult,
    pub summary: StiffnessSummary,
    pub similarity: SimilarityTable,
    pub load_cases: Vec<(String, LoadCase)>,
}

/// Assemble, condense, decompose, assess, and simulate one design.
pub fn evaluate_design(built: &BuiltProblem, x: &[f64]) -> Result<Evaluation> {
    let m = built.modes.m();
    let assembler = Assembler::new(&built.ground, &built.partition)?;
    let system = condense_banded(assembler.assemble(&built.ground, x)?)?;
    let modal = eigen(&system.kbar, m)?;
    let summary = summarize(&modal, m)?;
    let report = least_squares_fit(&built.modes.columns, &modal.kinematic())?;
    let similarity = SimilarityTable {
        delta_e: report.delta_e,
        coefficients: matrix_rows(&report.coefficients),
        approximations: matrix_columns(&report.approximations),
        residuals: report.residuals.clone(),
        betas: report.betas.clone(),
    };
    let mut load_cases = Vec::new();
    for (name, f) in &built.load_cases {
        let case = simulate(&system.kbar, &system, &modal, f)?;
        load_cases.push((name.clone(), case));
    }
    Ok(Evaluation {
        system,
        modal,
        summary,
        similarity,
        load_cases,
    })
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn matrix_columns(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().copied().collect())
        .collect()
}

/// SHA-256 hex digest of the canonical problem JSON.
pub fn problem_digest(spec: &ProblemSpec) -> Result<String> {
    let canonical = spec.to_json()?;
    let digest = Sha256::digest(canonical.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// Build the bundle from ranked synthesis results (best first, as returned
/// by the multi-start search).
pub fn assemble_bundle(
    spec: &ProblemSpec,
    built: &BuiltProblem,
    runs: &[SynthesisResult],
) -> Result<ResultBundle> {
    if runs.is_empty() {
        return Err(Error::InvalidConfig("no runs to bundle".into()));
    }
    let records: Vec<RunRecord> = runs.iter().map(RunRecord::from).collect();
    let evaluation = evaluate_design(built, &records[0].x)?;
    let load_cases = evaluation
        .load_cases
        .iter()
        .map(|(name, case)| LoadCaseRecord {
            name: name.clone(),
            forces: case.forces.clone(),
            displacement: case.displacement.clone(),
            coordinates: case.coordinates.clone(),
            parasitic_residual: case.parasitic_residual,
            kinematic_fraction: case.kinematic_fraction,
        })
        .collect();
    Ok(ResultBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        provenance: Provenance {
            config_sha256: problem_digest(spec)?,
            seed: built.config.rng_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        problem: spec.clone(),
        runs: records,
        best: 0,
        similarity: evaluation.similarity,
        load_cases,
    })
}

impl ResultBundle {
    /// Pretty JSON with a trailing newline; byte-stable for fixed content.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let bundle: ResultBundle = serde_json::from_str(text).map_err(|e| Error::Schema {
            file: origin.to_string(),
            message: e.to_string(),
        })?;
        if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
            return Err(Error::Schema {
                file: origin.to_string(),
                message: format!(
                    "bundle schema_version {} unsupported (this build reads {})",
                    bundle.schema_version, BUNDLE_SCHEMA_VERSION
                ),
            });
        }
        if bundle.runs.is_empty() || bundle.best >= bundle.runs.len() {
            return Err(Error::Schema {
                file: origin.to_string(),
                message: format!(
                    "bundle has {} runs but best index {}",
                    bundle.runs.len(),
                    bundle.best
                ),
            });
        }
        Ok(bundle)
    }

    pub fn best_run(&self) -> &RunRecord {
        &self.runs[self.best]
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text, &path.display().to_string())
    }
}

/// Stored-vs-recomputed deviations for the best run of a bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleAnalysis {
    pub eigenvalues: Vec<f64>,
    pub selectivity: f64,
    pub similarity: f64,
    /// Max relative deviation of the stored spectrum.
    pub eigenvalue_dev: f64,
    pub selectivity_dev: f64,
    pub similarity_dev: f64,
    /// Max relative deviation across stored load-case displacements.
    pub load_case_dev: f64,
}

impl BundleAnalysis {
    /// All deviations within `tol` (relative).
    pub fn within(&self, tol: f64) -> bool {
        self.eigenvalue_dev <= tol
            && self.selectivity_dev <= tol
            && self.similarity_dev <= tol
            && self.load_case_dev <= tol
    }
}

fn rel_dev(stored: f64, recomputed: f64) -> f64 {
    (stored - recomputed).abs() / recomputed.abs().max(1.0)
}

/// Re-run spectra, assessment, and load cases on the best design and
/// compare with the stored values.
pub fn analyze_bundle(bundle: &ResultBundle) -> Result<BundleAnalysis> {
    let built = bundle.problem.build()?;
    let best = bundle.best_run();
    let evaluation = evaluate_design(&built, &best.x)?;

    let mut eig_dev = 0.0f64;
    if best.eigenvalues.len() != evaluation.modal.eigenvalues.len() {
        return Err(Error::Schema {
            file: "bundle".into(),
            message: "stored spectrum length does not match the problem".into(),
        });
    }
    for (s, r) in best.eigenvalues.iter().zip(&evaluation.modal.eigenvalues) {
        eig_dev = eig_dev.max(rel_dev(*s, *r));
    }
    let selectivity_dev = rel_dev(best.selectivity, evaluation.summary.selectivity);
    let similarity_dev = rel_dev(best.similarity, evaluation.similarity.delta_e);

    let mut load_dev = 0.0f64;
    if bundle.load_cases.len() != evaluation.load_cases.len() {
        return Err(Error::Schema {
            file: "bundle".into(),
            message: "stored load-case count does not match the problem".into(),
        });
    }
    for (stored, (_, recomputed)) in bundle.load_cases.iter().zip(&evaluation.load_cases) {
        let scale = recomputed
            .displacement
            .iter()
            .fold(1e-300f64, |acc, v| acc.max(v.abs()));
        for (s, r) in stored.displacement.iter().zip(recomputed.displacement.iter()) {
            load_dev = load_dev.max((s - r).abs() / scale);
        }
        load_dev = load_dev.max(rel_dev(
            stored.parasitic_residual,
            recomputed.parasitic_residual,
        ));
    }

    Ok(BundleAnalysis {
        eigenvalues: evaluation.modal.eigenvalues.clone(),
        selectivity: evaluation.summary.selectivity,
        similarity: evaluation.similarity.delta_e,
        eigenvalue_dev: eig_dev,
        selectivity_dev,
        similarity_dev,
        load_case_dev: load_dev,
    })
}

/// CSV escape: quote when a field contains separators or quotes.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Long-form eigenvalue table: one row per (run, eigenvalue index).
pub fn eigenvalues_csv(bundle: &ResultBundle) -> String {
    let mut out = String::from("run,mu,start,status,k,lambda\n");
    for (r, run) in bundle.runs.iter().enumerate() {
        let status = format!("{:?}", run.status);
        for (k, lambda) in run.eigenvalues.iter().enumerate() {
            out.push_str(&format!(
                "{r},{},{},{},{},{:.17e}\n",
                run.mu,
                run.start_index,
                csv_field(&status),
                k + 1,
                lambda
            ));
        }
    }
    out
}

/// Iteration history of one run, one row per iteration.
pub fn history_csv(run: &RunRecord) -> String {
    let m1 = run.history.first().map_or(0, |rec| rec.eigenvalues.len());
    let mut out = String::from("iteration");
    for k in 1..=m1 {
        out.push_str(&format!(",lambda_{k}"));
    }
    out.push_str(",selectivity,softest_quotient,feasible,step_norm,violation,escalations\n");
    for rec in &run.history {
        out.push_str(&format!("{}", rec.iteration));
        for v in &rec.eigenvalues {
            out.push_str(&format!(",{v:.17e}"));
        }
        out.push_str(&format!(
            ",{:.17e},{:.17e},{},{:.17e},{:.17e},{}\n",
            rec.selectivity,
            rec.softest_quotient,
            rec.feasible,
            rec.step_norm,
            rec.violation,
            rec.escalations
        ));
    }
    out
}

/// Similarity coefficients of the best design, one row per (i, j).
pub fn similarity_csv(bundle: &ResultBundle) -> String {
    let mut out = String::from("desired_mode,kinematic_mode,alpha\n");
    for (i, row) in bundle.similarity.coefficients.iter().enumerate() {
        for (j, alpha) in row.iter().enumerate() {
            out.push_str(&format!("{},{},{alpha:.17e}\n", i + 1, j + 1));
        }
    }
    out.push_str(&format!("delta_e,,{:.17e}\n", bundle.similarity.delta_e));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::iterate;

    fn tiny_problem_json() -> &'static str {
        r#"{
            "schema_version": 1,
            "name": "tiny",
            "grid": { "width": 10.0, "height": 10.0, "pitch": 5.0 },
            "section": { "area": 20.0, "elastic_modulus": 3000.0, "second_moment": 166.7 },
            "supports": [ { "edge": "bottom" } ],
            "active": [ { "point": [5.0, 10.0] } ],
            "modes": { "explicit": [[1.0, 0.0]] },
            "synthesis": {
                "volume": 12.0, "mu": 50.0, "nu": 0.05,
                "max_iters": 200, "seed": 7
            },
            "load_cases": [
                { "name": "push", "forces": [ { "point": [5.0, 10.0], "fx": 1.0 } ] }
            ]
        }"#
    }

    fn synthesized_bundle() -> ResultBundle {
        let spec = ProblemSpec::from_json(tiny_problem_json(), "test").unwrap();
        let built = spec.build().unwrap();
        let x0: Vec<f64> = vec![0.4; built.ground.n_elements()];
        let run = iterate(
            &built.ground,
            &built.partition,
            &built.modes,
            &built.config,
            &x0,
        )
        .unwrap();
        assemble_bundle(&spec, &built, &[run]).unwrap()
    }

    #[test]
    fn bundle_round_trips_and_analysis_reproduces_metrics() {
        let bundle = synthesized_bundle();
        let text = bundle.to_json().unwrap();
        let reparsed = ResultBundle::from_json(&text, "round-trip").unwrap();
        assert_eq!(bundle, reparsed);

        let analysis = analyze_bundle(&reparsed).unwrap();
        assert!(
            analysis.within(1e-9),
            "stored metrics drifted: {analysis:?}"
        );
    }

    #[test]
    fn digest_is_stable_and_content_sensitive() {
        let spec = ProblemSpec::from_json(tiny_problem_json(), "test").unwrap();
        let d1 = problem_digest(&spec).unwrap();
        let d2 = problem_digest(&spec).unwrap();
        assert_eq!(d1, d2);
        assert_eq!(d1.len(), 64);
        let other = ProblemSpec::from_json(
            &tiny_problem_json().replace("\"mu\": 50.0", "\"mu\": 51.0"),
            "test",
        )
        .unwrap();
        assert_ne!(d1, problem_digest(&other).unwrap());
    }

    #[test]
    fn tampered_design_is_caught_by_analysis() {
        let mut bundle = synthesized_bundle();
        bundle.runs[0].selectivity *= 1.5;
        let analysis = analyze_bundle(&bundle).unwrap();
        assert!(!analysis.within(1e-9));
        assert!(analysis.selectivity_dev > 0.1);
    }

    #[test]
    fn csv_tables_have_expected_shape() {
        let bundle = synthesized_bundle();
        let eig = eigenvalues_csv(&bundle);
        let q = bundle.best_run().eigenvalues.len();
        assert_eq!(eig.lines().count(), 1 + q);
        assert!(eig.starts_with("run,mu,start,status,k,lambda"));

        let hist = history_csv(bundle.best_run());
        assert_eq!(hist.lines().count(), 1 + bundle.best_run().iterations);
        assert!(hist.contains("selectivity"));

        let sim = similarity_csv(&bundle);
        assert!(sim.lines().count() >= 2);
        assert!(sim.contains("delta_e"));
    }

    #[test]
    fn bundle_schema_violations_are_rejected() {
        let bundle = synthesized_bundle();
        let text = bundle.to_json().unwrap();
        let bad = text.replacen("\"schema_version\": 1", "\"schema_version\": 9", 1);
        assert!(ResultBundle::from_json(&bad, "test").is_err());
        assert!(ResultBundle::from_json("{}", "test").is_err());
    }

    #[test]
    fn identical_runs_serialize_identically() {
        let a = synthesized_bundle().to_json().unwrap();
        let b = synthesized_bundle().to_json().unwrap();
        assert_eq!(a, b, "bundles must be byte-identical");
    }
}
