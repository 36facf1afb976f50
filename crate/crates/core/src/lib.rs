//! Synthesis of planar compliant mechanisms with selective compliance.
//!
//! The toolkit distributes beam-element stiffness over a ground structure so
//! that the first `m` eigenmodes of the statically condensed stiffness matrix
//! span a set of desired deformation modes while every other deformation is
//! made as stiff as possible. The pipeline is:
//!
//! 1. [`model`] — ground structure of planar frame elements, `K(x) = Σ xᵢ Kᵢ`;
//! 2. [`reduction`] — static condensation onto the active (interface) DoFs;
//! 3. [`spectra`] — dense symmetric eigen-analysis of the condensed matrix;
//! 4. [`modes`] — desired-mode construction and orthonormalization;
//! 5. [`base`] — constrained eigenproblem for the undesired-mode base;
//! 6. [`lp`] — linear-programming stiffness update under move limits;
//! 7. [`driver`] — the global iteration and the multi-start search;
//! 8. [`assess`] — similarity metrics and load-case simulation;
//! 9. [`problem`] / [`bundle`] / [`render`] — file formats and SVG export.

pub mod assess;
pub mod banded;
pub mod base;
pub mod bundle;
pub mod driver;
pub mod error;
pub mod lp;
pub mod model;
pub mod modes;
pub mod problem;
pub mod reduction;
pub mod render;
pub mod simplex;
pub mod spectra;

pub use assess::{extended_cosine, least_squares_fit, simulate, LoadCase, SimilarityReport};
pub use base::{expand_base, solve_constrained_base, CondensedBase, OrthonormalBase};
pub use bundle::{ResultBundle, RunRecord};
pub use driver::{iterate, multi_start, IterationRecord, SynthesisConfig, SynthesisResult};
pub use error::Error;
pub use lp::{build_lp, solve_lp, LinearProgram, LpOutcome, MoveLimits};
pub use model::{build_grid, BeamElement, GroundStructure, NodeGrid, SectionProperties};
pub use modes::DesiredModeSet;
pub use problem::ProblemSpec;
pub use reduction::{condense, expand, partition, Blocks, CondensedSystem, DofPartition};
pub use spectra::{eigen, modal_coordinates, summarize, ModalResult, StiffnessSummary};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
