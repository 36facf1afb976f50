//! SVG export of ground-structure topologies.
//!
//! Beams are drawn with stroke width proportional to their design variable;
//! elements below a display threshold are omitted from the drawing only —
//! they stay in every computation. An optional displacement overlay draws
//! the deformed topology, auto-scaled so the largest node motion is a fixed
//! fraction of the design-space diagonal. Output contains nothing
//! host- or time-dependent, so renders are reproducible byte for byte.

use nalgebra::DVector;
use std::fmt::Write as _;

use crate::error::Error;
use crate::model::GroundStructure;
use crate::Result;

/// Visual parameters of the SVG export.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Stroke width of a full element (xᵢ = xᵘ) in mm; 0 = auto
    /// (35% of the lattice pitch).
    pub stroke_max: f64,
    /// Elements with xᵢ below this fraction of xᵘ are not drawn.
    pub display_threshold: f64,
    /// Upper design bound xᵘ used for both scalings.
    pub x_upper: f64,
    /// Peak overlay displacement as a fraction of the design-space
    /// diagonal.
    pub overlay_fraction: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            stroke_max: 0.0,
            display_threshold: 0.01,
            x_upper: 1.0,
            overlay_fraction: 0.1,
        }
    }
}

/// A displacement field to draw as a deformed topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Overlay {
    /// Displacements on the free DoFs (supported DoFs move zero).
    pub displacement: DVector<f64>,
    /// Legend text (e.g. `mode 1, λ = 3000`).
    pub label: String,
}

/// Node translation (x, y) from a free-DoF field; supported components
/// are zero.
fn node_motion(gs: &GroundStructure, u: &DVector<f64>, node: usize) -> [f64; 2] {
    let pick = |structural: usize| gs.free_dof(structural).map_or(0.0, |f| u[f]);
    [pick(3 * node), pick(3 * node + 1)]
}

/// Render the topology (and an optional deformed overlay) as an SVG
/// document.
pub fn render_topology(
    gs: &GroundStructure,
    x: &[f64],
    active_nodes: &[usize],
    overlay: Option<&Overlay>,
    options: &RenderOptions,
) -> Result<String> {
    if x.len() != gs.n_elements() {
        return Err(Error::DimensionMismatch {
            expected: gs.n_elements(),
            got: x.len(),
            context: "design vector for rendering",
        });
    }
    if !(options.x_upper > 0.0 && options.display_threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!(
            "render options: x_upper {}, display threshold {}",
            options.x_upper, options.display_threshold
        )));
    }
    if let Some(ov) = overlay {
        if ov.displacement.len() != gs.n_free() {
            return Err(Error::DimensionMismatch {
                expected: gs.n_free(),
                got: ov.displacement.len(),
                context: "overlay displacement field",
            });
        }
    }

    let grid = &gs.grid;
    let (w, h) = (
        (grid.nx - 1) as f64 * grid.pitch,
        (grid.ny - 1) as f64 * grid.pitch,
    );
    let margin = grid.pitch.max(0.05 * w.max(h));
    let stroke_max = if options.stroke_max > 0.0 {
        options.stroke_max
    } else {
        0.35 * grid.pitch
    };
    let cutoff = options.display_threshold * options.x_upper;

    // Overlay amplitude: the largest node motion maps to a fixed fraction
    // of the design-space diagonal.
    let overlay_scale = overlay.map(|ov| {
        let mut peak = 0.0f64;
        for node in 0..grid.n_nodes() {
            let [ux, uy] = node_motion(gs, &ov.displacement, node);
            peak = peak.max(ux.hypot(uy));
        }
        if peak > 0.0 {
            options.overlay_fraction * w.hypot(h).max(grid.pitch) / peak
        } else {
            0.0
        }
    });

    let view_w = w + 2.0 * margin;
    let view_h = h + 2.0 * margin;
    let px_per_mm = (900.0 / view_w.max(view_h)).min(16.0);
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        view_w * px_per_mm,
        view_h * px_per_mm,
        -margin,
        -margin,
        view_w,
        view_h
    );
    if let Some(ov) = overlay {
        let _ = writeln!(svg, "<title>{}</title>", xml_escape(&ov.label));
    }
    let _ = writeln!(svg, r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="#ffffff"/>"##,
        -margin, -margin, view_w, view_h);
    // Grid y points up; SVG y points down.
    let _ = writeln!(svg, r#"<g transform="translate(0,{h:.3}) scale(1,-1)">"#);

    // Base topology.
    let _ = writeln!(
        svg,
        r##"<g stroke="#334155" stroke-linecap="round" fill="none">"##
    );
    for (e, elem) in gs.elements.iter().enumerate() {
        if x[e] < cutoff {
            continue;
        }
        let pa = grid.position(elem.a);
        let pb = grid.position(elem.b);
        let width = stroke_max * (x[e] / options.x_upper).min(1.0);
        let _ = writeln!(
            svg,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke-width="{:.4}"/>"#,
            pa[0], pa[1], pb[0], pb[1], width
        );
    }
    let _ = writeln!(svg, "</g>");

    // Deformed overlay over the same visible elements.
    if let (Some(ov), Some(scale)) = (overlay, overlay_scale) {
        let _ = writeln!(
            svg,
            r##"<g class="overlay" stroke="#dc2626" stroke-opacity="0.75" stroke-linecap="round" fill="none">"##
        );
        for (e, elem) in gs.elements.iter().enumerate() {
            if x[e] < cutoff {
                continue;
            }
            let pa = grid.position(elem.a);
            let pb = grid.position(elem.b);
            let da = node_motion(gs, &ov.displacement, elem.a);
            let db = node_motion(gs, &ov.displacement, elem.b);
            let width = 0.5 * stroke_max * (x[e] / options.x_upper).min(1.0);
            let _ = writeln!(
                svg,
                r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke-width="{:.4}"/>"#,
                pa[0] + scale * da[0],
                pa[1] + scale * da[1],
                pb[0] + scale * db[0],
                pb[1] + scale * db[1],
                width
            );
        }
        let _ = writeln!(svg, "</g>");
    }

    // Support markers: squares at nodes with any fixed DoF.
    let s = 0.22 * grid.pitch;
    let _ = writeln!(svg, r##"<g fill="#64748b">"##);
    for node in 0..grid.n_nodes() {
        let fixed = (0..3).any(|c| gs.supports.contains(&(3 * node + c)));
        if !fixed {
            continue;
        }
        let p = grid.position(node);
        let _ = writeln!(
            svg,
            r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/>"#,
            p[0] - s,
            p[1] - s,
            2.0 * s,
            2.0 * s
        );
    }
    let _ = writeln!(svg, "</g>");

    // Active markers: circles at the active nodes.
    let _ = writeln!(svg, r##"<g fill="none" stroke="#0ea5e9" stroke-width="{:.3}">"##, 0.1 * grid.pitch);
    let mut seen = std::collections::BTreeSet::new();
    for &node in active_nodes {
        if node >= grid.n_nodes() || !seen.insert(node) {
            continue;
        }
        let p = grid.position(node);
        let _ = writeln!(
            svg,
            r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}"/>"#,
            p[0],
            p[1],
            0.3 * grid.pitch
        );
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, "</g>");
    let _ = writeln!(svg, "</svg>");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
