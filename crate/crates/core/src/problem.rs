//! Problem-file schema: one JSON document describes a complete synthesis
//! problem — ground structure, supports, active DoFs, desired modes,
//! synthesis parameters, and optional load cases.
//!
//! The file is the single source of truth for ordering: active DoFs appear
//! in selector order (node-major `[n₁x, n₁y, …]` within each selector), and
//! mode generators consume exactly that layout. Parsing is strict where it
//! matters (unknown fields in scalar sections are rejected) and every
//! semantic failure names the offending field.

use std::collections::BTreeSet;
use std::path::Path;

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::driver::{MoveLimitSchedule, SynthesisConfig};
use crate::error::Error;
use crate::model::{
    build_grid, edge_nodes, GroundStructure, NodeGrid, SectionProperties,
};
use crate::modes::{
    check_orthonormal, generate_contour_modes, generate_platform_translation,
    generate_rotation_translation, DesiredModeSet,
};
use crate::reduction::DofPartition;
use crate::Result;

/// Version of the problem-file schema this build reads and writes.
pub const SCHEMA_VERSION: u32 = 1;

/// One translational/rotational component of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Component {
    X,
    Y,
    Theta,
}

impl Component {
    fn offset(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
            Component::Theta => 2,
        }
    }
}

fn xy() -> Vec<Component> {
    vec![Component::X, Component::Y]
}

/// Rectangular design-space lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Extent along x in mm.
    pub width: f64,
    /// Extent along y in mm (0 = a single node row).
    pub height: f64,
    /// Lattice pitch in mm.
    pub pitch: f64,
    /// Connectivity radius in lattice units (Chebyshev metric).
    #[serde(default = "default_radius")]
    pub radius: usize,
}

fn default_radius() -> usize {
    1
}

/// Fully clamps nodes (edge/point selectors) or fixes explicit DoFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SupportSpec {
    /// Clamp all three DoFs of every node on a grid edge
    /// (`bottom`/`top`/`left`/`right`).
    Edge { edge: String },
    /// Clamp all three DoFs of the node at a position in mm.
    Node { at: [f64; 2] },
    /// Fix explicit structural DoF indices (3k, 3k+1, 3k+2 for node k).
    Dofs { dofs: Vec<usize> },
}

/// Selects active DoFs; list order defines the active layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActiveSpec {
    /// Components of the node at a position in mm.
    Point {
        point: [f64; 2],
        #[serde(default = "xy")]
        components: Vec<Component>,
    },
    /// Components of every node on a grid edge, in edge order.
    Edge {
        edge: String,
        #[serde(default = "xy")]
        components: Vec<Component>,
    },
    /// Components of the nodes on a rectangle boundary, walked
    /// counter-clockwise from the lower-left corner.
    Ring {
        ring: [f64; 4],
        #[serde(default = "xy")]
        components: Vec<Component>,
    },
}

/// Desired modes: a named generator or explicit raw vectors
/// (orthonormalized on load).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModeSpec {
    Generator {
        generator: GeneratorKind,
        /// Full sine periods over the contour (contour generator only).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sine_periods: Option<f64>,
    },
    Explicit { explicit: Vec<Vec<f64>> },
}

/// Built-in desired-mode generators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Straight translation + rotation of two guided points (m = 2).
    RotationTranslation,
    /// Uniform x/y translation of a platform boundary (m = 2).
    PlatformTranslation,
    /// Parabola, sine, and tangential translation of a contour (m = 3).
    ContourModes,
}

/// Inclusive cap sweep `lo..hi` with `count` evenly spaced values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuSweep {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl MuSweep {
    pub fn values(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.count - 1) as f64;
        (0..self.count).map(|k| self.lo + step * k as f64).collect()
    }
}

/// Synthesis parameters; omitted fields take the reference defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthesisSpec {
    /// Volume budget V (required).
    pub volume: Option<f64>,
    /// Single primary-stiffness cap μ.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    /// Cap sweep (alternative to `mu`).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu_sweep: Option<MuSweep>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schedule: Option<MoveLimitSchedule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_lower: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x_upper: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_guard: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step_patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selectivity_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selectivity_patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq_band_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap_band_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stall_patience: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub similarity_threshold: Option<f64>,
}

/// One concentrated load at a node (components on active DoFs only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointForce {
    /// Node position in mm.
    pub point: [f64; 2],
    #[serde(default)]
    pub fx: f64,
    #[serde(default)]
    pub fy: f64,
    #[serde(default)]
    pub moment: f64,
}

/// A named static load case on the active DoFs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadCaseSpec {
    pub name: String,
    pub forces: Vec<PointForce>,
}

/// The parsed problem file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub schema_version: u32,
    pub name: String,
    pub grid: GridSpec,
    pub section: SectionProperties,
    pub supports: Vec<SupportSpec>,
    pub active: Vec<ActiveSpec>,
    pub modes: ModeSpec,
    pub synthesis: SynthesisSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub load_cases: Vec<LoadCaseSpec>,
}

/// Everything `ProblemSpec::build` produces: the model objects the
/// synthesis and assessment APIs consume.
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub ground: GroundStructure,
    pub partition: DofPartition,
    pub modes: DesiredModeSet,
    pub config: SynthesisConfig,
    /// Cap values to sweep (a single μ yields one entry).
    pub mu_values: Vec<f64>,
    /// Active layout: (node index, component) per active DoF, in order.
    pub layout: Vec<(usize, Component)>,
    /// Named force vectors on the active DoFs.
    pub load_cases: Vec<(String, DVector<f64>)>,
}

fn schema(origin: &str, message: String) -> Error {
    Error::Schema {
        file: origin.to_string(),
        message,
    }
}

/// Read and validate a problem file.
pub fn parse_problem(path: &Path) -> Result<ProblemSpec> {
    let text = std::fs::read_to_string(path)?;
    ProblemSpec::from_json(&text, &path.display().to_string())
}

impl ProblemSpec {
    /// Parse from JSON text; `origin` names the source in diagnostics.
    /// Structural and semantic validation both run here, so a returned
    /// spec is buildable except for numeric corner cases caught later.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let spec: ProblemSpec = serde_json::from_str(text)
            .map_err(|e| schema(origin, e.to_string()))?;
        spec.validate(origin)?;
        Ok(spec)
    }

    /// Pretty JSON with a trailing newline; `parse` of the output
    /// reproduces `self` exactly.
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Field-level semantic validation.
    fn validate(&self, origin: &str) -> Result<()> {
        let fail = |msg: String| Err(schema(origin, msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} unsupported (this build reads {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.name.is_empty() {
            return fail("name: must be non-empty".into());
        }
        let g = &self.grid;
        if !(g.pitch > 0.0 && g.pitch.is_finite() && g.width >= 0.0 && g.height >= 0.0) {
            return fail(format!(
                "grid: width {}, height {}, pitch {} invalid",
                g.width, g.height, g.pitch
            ));
        }
        if g.radius == 0 {
            return fail("grid.radius: must be ≥ 1".into());
        }
        SectionProperties::new(
            self.section.area,
            self.section.elastic_modulus,
            self.section.second_moment,
        )
        .map_err(|e| schema(origin, format!("section: {e}")))?;
        if self.supports.is_empty() {
            return fail("supports: at least one support is required".into());
        }
        if self.active.is_empty() {
            return fail("active: at least one active selector is required".into());
        }
        let s = &self.synthesis;
        match s.volume {
            None => return fail("synthesis.volume: required field is missing".into()),
            Some(v) if !(v > 0.0 && v.is_finite()) => {
                return fail(format!("synthesis.volume: {v} must be positive"))
            }
            _ => {}
        }
        match (&s.mu, &s.mu_sweep) {
            (None, None) => {
                return fail("synthesis.mu: required (give mu or mu_sweep)".into())
            }
            (Some(_), Some(_)) => {
                return fail("synthesis.mu: give either mu or mu_sweep, not both".into())
            }
            (Some(mu), None) if !(*mu > 0.0 && mu.is_finite()) => {
                return fail(format!("synthesis.mu: {mu} must be positive"))
            }
            (None, Some(sweep)) => {
                if !(sweep.lo > 0.0 && sweep.hi >= sweep.lo && sweep.count >= 1) {
                    return fail(format!(
                        "synthesis.mu_sweep: lo {} / hi {} / count {} invalid",
                        sweep.lo, sweep.hi, sweep.count
                    ));
                }
            }
            _ => {}
        }
        if let ModeSpec::Explicit { explicit } = &self.modes {
            if explicit.is_empty() || explicit[0].is_empty() {
                return fail("modes.explicit: needs at least one non-empty vector".into());
            }
            if explicit.iter().any(|v| v.len() != explicit[0].len()) {
                return fail("modes.explicit: vectors differ in length".into());
            }
        }
        for (i, case) in self.load_cases.iter().enumerate() {
            if case.name.is_empty() {
                return fail(format!("load_cases[{i}].name: must be non-empty"));
            }
            if case.forces.is_empty() {
                return fail(format!("load_cases[{i}].forces: must be non-empty"));
            }
        }
        Ok(())
    }

    /// The cap values this problem sweeps.
    pub fn mu_values(&self) -> Vec<f64> {
        match (&self.synthesis.mu, &self.synthesis.mu_sweep) {
            (Some(mu), _) => vec![*mu],
            (None, Some(sweep)) => sweep.values(),
            (None, None) => Vec::new(),
        }
    }

    /// Synthesis configuration with file overrides applied over the
    /// reference defaults (μ is filled with the first sweep value).
    pub fn config(&self) -> SynthesisConfig {
        let s = &self.synthesis;
        let mut c = SynthesisConfig::default();
        c.mu = self.mu_values().first().copied().unwrap_or(0.0);
        c.volume = s.volume.unwrap_or(0.0);
        if let Some(v) = s.nu {
            c.nu = v;
        }
        if let Some(v) = s.schedule {
            c.schedule = v;
        }
        if let Some(v) = s.x_lower {
            c.x_lower = v;
        }
        if let Some(v) = s.x_upper {
            c.x_upper = v;
        }
        if let Some(v) = s.n_guard {
            c.n_guard = v;
        }
        if let Some(v) = s.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = s.step_tol {
            c.step_tol = v;
        }
        if let Some(v) = s.step_patience {
            c.step_patience = v;
        }
        if let Some(v) = s.selectivity_tol {
            c.selectivity_tol = v;
        }
        if let Some(v) = s.selectivity_patience {
            c.selectivity_patience = v;
        }
        if let Some(v) = s.eq_band_factor {
            c.eq_band_factor = v;
        }
        if let Some(v) = s.cap_band_factor {
            c.cap_band_factor = v;
        }
        if let Some(v) = s.stall_patience {
            c.stall_patience = v;
        }
        if let Some(v) = s.starts {
            c.n_starts = v;
        }
        if let Some(v) = s.seed {
            c.rng_seed = v;
        }
        if let Some(v) = s.similarity_threshold {
            c.similarity_threshold = v;
        }
        c
    }

    /// Construct all model objects. `origin` names the spec in errors.
    pub fn build_from(&self, origin: &str) -> Result<BuiltProblem> {
        self.validate(origin)?;
        let (grid, elements) =
            build_grid(self.grid.width, self.grid.height, self.grid.pitch, self.grid.radius)?;

        // Supports: union of all selectors, as structural DoF indices.
        let mut supports: BTreeSet<usize> = BTreeSet::new();
        for (i, sel) in self.supports.iter().enumerate() {
            let label = format!("supports[{i}]");
            match sel {
                SupportSpec::Edge { edge } => {
                    let nodes = edge_nodes(&grid, edge)
                        .map_err(|e| schema(origin, format!("{label}: {e}")))?;
                    supports.extend(nodes.iter().flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2]));
                }
                SupportSpec::Node { at } => {
                    let n = grid
                        .node_at(at[0], at[1])
                        .map_err(|e| schema(origin, format!("{label}: {e}")))?;
                    supports.extend([3 * n, 3 * n + 1, 3 * n + 2]);
                }
                SupportSpec::Dofs { dofs } => {
                    for &d in dofs {
                        if d >= grid.n_dofs() {
                            return Err(schema(
                                origin,
                                format!("{label}: DoF {d} exceeds {}", grid.n_dofs()),
                            ));
                        }
                        supports.insert(d);
                    }
                }
            }
        }

        // Active layout: (node, component) in selector order.
        let mut layout: Vec<(usize, Component)> = Vec::new();
        for (i, sel) in self.active.iter().enumerate() {
            let label = format!("active[{i}]");
            let (nodes, components) = match sel {
                ActiveSpec::Point { point, components } => {
                    let n = grid
                        .node_at(point[0], point[1])
                        .map_err(|e| schema(origin, format!("{label}: {e}")))?;
                    (vec![n], components)
                }
                ActiveSpec::Edge { edge, components } => {
                    let nodes = edge_nodes(&grid, edge)
                        .map_err(|e| schema(origin, format!("{label}: {e}")))?;
                    (nodes, components)
                }
                ActiveSpec::Ring { ring, components } => {
                    let nodes = ring_nodes(&grid, *ring)
                        .map_err(|e| schema(origin, format!("{label}: {e}")))?;
                    (nodes, components)
                }
            };
            if components.is_empty() {
                return Err(schema(origin, format!("{label}.components: empty")));
            }
            for node in nodes {
                for &c in components {
                    layout.push((node, c));
                }
            }
        }

        let section = self.section;
        let ground = GroundStructure::new(grid, elements, section, supports)?;

        let mut active = Vec::with_capacity(layout.len());
        for (k, &(node, comp)) in layout.iter().enumerate() {
            let structural = 3 * node + comp.offset();
            match ground.free_dof(structural) {
                Some(f) => active.push(f),
                None => {
                    return Err(schema(
                        origin,
                        format!(
                            "active[{k}]: DoF {structural} (node {node}, {comp:?}) is supported"
                        ),
                    ))
                }
            }
        }
        let partition = DofPartition::new(active, ground.n_free())?;

        let modes = self.build_modes(origin, &ground.grid, &layout)?;
        if modes.q() != partition.n_active() {
            return Err(schema(
                origin,
                format!(
                    "modes: {} rows but {} active DoFs",
                    modes.q(),
                    partition.n_active()
                ),
            ));
        }

        let config = self.config();
        config.validate(ground.n_elements())?;

        let mut built = BuiltProblem {
            ground,
            partition,
            modes,
            config,
            mu_values: self.mu_values(),
            layout,
            load_cases: Vec::new(),
        };
        for case in &self.load_cases {
            let f = built
                .force_vector(case)
                .map_err(|e| schema(origin, e.to_string()))?;
            built.load_cases.push((case.name.clone(), f));
        }
        Ok(built)
    }

    /// Construct all model objects (diagnostics name the problem itself).
    pub fn build(&self) -> Result<BuiltProblem> {
        self.build_from(&self.name.clone())
    }

    fn build_modes(
        &self,
        origin: &str,
        grid: &NodeGrid,
        layout: &[(usize, Component)],
    ) -> Result<DesiredModeSet> {
        match &self.modes {
            ModeSpec::Explicit { explicit } => {
                let q = explicit[0].len();
                let m = explicit.len();
                let mut raw = DMatrix::zeros(q, m);
                for (j, col) in explicit.iter().enumerate() {
                    for (i, &v) in col.iter().enumerate() {
                        raw[(i, j)] = v;
                    }
                }
                if check_orthonormal(&raw, 1e-8).is_err() {
                    warn!("explicit modes are not orthonormal; orthonormalizing in file order");
                }
                DesiredModeSet::from_raw(raw)
            }
            ModeSpec::Generator {
                generator,
                sine_periods,
            } => {
                let nodes = xy_node_sequence(origin, layout)?;
                match generator {
                    GeneratorKind::RotationTranslation => {
                        if nodes.len() != 2 {
                            return Err(schema(
                                origin,
                                format!(
                                    "modes.generator: rotation_translation needs exactly 2 \
                                     active nodes with x,y components, got {}",
                                    nodes.len()
                                ),
                            ));
                        }
                        Ok(generate_rotation_translation())
                    }
                    GeneratorKind::PlatformTranslation => {
                        generate_platform_translation(nodes.len())
                    }
                    GeneratorKind::ContourModes => {
                        // Stations = cumulative arclength along the ordered
                        // active nodes.
                        let mut stations = Vec::with_capacity(nodes.len());
                        let mut s = 0.0;
                        let mut prev: Option<[f64; 2]> = None;
                        for &n in &nodes {
                            let p = grid.position(n);
                            if let Some(q) = prev {
                                s += (p[0] - q[0]).hypot(p[1] - q[1]);
                            }
                            stations.push(s);
                            prev = Some(p);
                        }
                        generate_contour_modes(&stations, sine_periods.unwrap_or(1.0))
                    }
                }
            }
        }
    }
}

impl BuiltProblem {
    /// Force vector on the active DoFs for one load case.
    pub fn force_vector(&self, case: &LoadCaseSpec) -> Result<DVector<f64>> {
        let mut f = DVector::zeros(self.layout.len());
        for (j, force) in case.forces.iter().enumerate() {
            let label = format!("load case '{}' force [{j}]", case.name);
            let node = self
                .ground
                .grid
                .node_at(force.point[0], force.point[1])
                .map_err(|e| Error::InvalidDofSelection(format!("{label}: {e}")))?;
            for (value, comp) in [
                (force.fx, Component::X),
                (force.fy, Component::Y),
                (force.moment, Component::Theta),
            ] {
                if value == 0.0 {
                    continue;
                }
                match self.layout.iter().position(|&(n, c)| n == node && c == comp) {
                    Some(idx) => f[idx] += value,
                    None => {
                        return Err(Error::InvalidDofSelection(format!(
                            "{label}: node {node} {comp:?} is not an active DoF"
                        )))
                    }
                }
            }
        }
        Ok(f)
    }
}

/// Require the strict node-major x,y layout generators assume and return
/// the node sequence.
fn xy_node_sequence(origin: &str, layout: &[(usize, Component)]) -> Result<Vec<usize>> {
    if layout.len() % 2 != 0 {
        return Err(schema(
            origin,
            "modes.generator: active layout must be x,y pairs".into(),
        ));
    }
    let mut nodes = Vec::with_capacity(layout.len() / 2);
    for pair in layout.chunks(2) {
        let ok = pair[0].0 == pair[1].0
            && pair[0].1 == Component::X
            && pair[1].1 == Component::Y;
        if !ok {
            return Err(schema(
                origin,
                format!(
                    "modes.generator: active layout must be node-major x,y pairs, \
                     found ({}, {:?}), ({}, {:?})",
                    pair[0].0, pair[0].1, pair[1].0, pair[1].1
                ),
            ));
        }
        nodes.push(pair[0].0);
    }
    Ok(nodes)
}

/// Nodes on the boundary of the rectangle `[x0, y0, x1, y1]` (mm), walked
/// counter-clockwise from the lower-left corner.
fn ring_nodes(grid: &NodeGrid, rect: [f64; 4]) -> Result<Vec<usize>> {
    let [x0, y0, x1, y1] = rect;
    let lower = grid.node_at(x0, y0)?;
    let upper = grid.node_at(x1, y1)?;
    let (i0, j0) = (lower % grid.nx, lower / grid.nx);
    let (i1, j1) = (upper % grid.nx, upper / grid.nx);
    if i1 <= i0 || j1 <= j0 {
        return Err(Error::InvalidDofSelection(format!(
            "ring [{x0}, {y0}, {x1}, {y1}] is degenerate"
        )));
    }
    let mut nodes = Vec::new();
    for i in i0..=i1 {
        nodes.push(grid.node_index(i, j0)); // bottom, left→right
    }
    for j in (j0 + 1)..=j1 {
        nodes.push(grid.node_index(i1, j)); // right, bottom→top
    }
    for i in (i0..i1).rev() {
        nodes.push(grid.node_index(i, j1)); // top, right→left
    }
    for j in ((j0 + 1)..j1).rev() {
        nodes.push(grid.node_index(i0, j)); // left, top→bottom
    }
    Ok(nodes)
}
