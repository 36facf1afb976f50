//! Shared fixture for the pipeline benchmarks: the two-point guide problem
//! on its published 796-element ground structure.

use selcomp::problem::{BuiltProblem, ProblemSpec};

/// Problem JSON matching `problems/example1.json` (single μ, no sweep).
pub const REFERENCE_PROBLEM: &str = r#"{
    "schema_version": 1,
    "name": "bench reference",
    "grid": { "width": 60.0, "height": 80.0, "pitch": 5.0 },
    "section": { "area": 20.0, "elastic_modulus": 210000.0, "second_moment": 6.66 },
    "supports": [ { "edge": "bottom" } ],
    "active": [
        { "point": [0.0, 80.0] },
        { "point": [60.0, 80.0] }
    ],
    "modes": { "generator": "rotation_translation" },
    "synthesis": { "volume": 636.8, "mu": 3000.0, "seed": 11 }
}"#;

/// Build the reference problem.
pub fn reference_problem() -> BuiltProblem {
    ProblemSpec::from_json(REFERENCE_PROBLEM, "bench")
        .expect("fixture parses")
        .build()
        .expect("fixture builds")
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixture_builds_with_published_counts() {
        let built = super::reference_problem();
        assert_eq!(built.ground.n_elements(), 796);
        assert_eq!(built.partition.n_active(), 4);
    }
}
