//! Numeric facts about a solved model, taken only from solver and
//! post-processing outputs.

use emsim_core::geometry::{boundary, centroid, skin_depth, ConductorLayout, Point2};
use emsim_core::layoutlang::LayoutPattern;
use emsim_core::solver::{magnetic_energy, FEProblem, Simulation};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkinRegime {
    /// Zero frequency: uniform current density.
    Dc,
    /// Skin depth larger than the radius.
    NearUniform,
    /// Skin depth at most the radius.
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductorFact {
    pub index: usize,
    pub group: String,
    pub center: [f64; 2],
    /// Recovered current phasor `[re, im]`, A.
    pub current: [f64; 2],
    pub voltage: [f64; 2],
    pub loss_w_per_m: f64,
}

/// The output of one Print statement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFact {
    /// Written files, relative to the session directory.
    pub files: Vec<String>,
    pub processing: String,
    pub quantity: String,
    pub regions: Vec<String>,
    pub target_region: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactSheet {
    pub conductor_count: usize,
    pub layout_pattern: LayoutPattern,
    pub layout_descriptor: String,
    pub radius_m: f64,
    pub boundary_center: [f64; 2],
    pub boundary_radius_m: f64,
    pub frequency_hz: f64,
    pub current_amplitude_a: f64,
    pub conductivity_s_per_m: f64,
    /// `None` at DC.
    pub skin_depth_m: Option<f64>,
    pub skin_regime: SkinRegime,
    pub proximity_effect: bool,
    pub conductors: Vec<ConductorFact>,
    pub total_loss_w_per_m: f64,
    pub magnetic_energy_j_per_m: f64,
    pub triangle_count: usize,
    pub node_count: usize,
    pub artifacts: Vec<ArtifactFact>,
}

/// Compact decimal rendering: at most `digits` decimals, trailing zeros cut.
pub(crate) fn fmt_dec(x: f64, digits: usize) -> String {
    let s = format!("{x:.digits$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn axis_note(centers: &[Point2]) -> Option<&'static str> {
    let tol = 1e-12;
    if centers.len() < 2 {
        None
    } else if centers.iter().all(|p| p.y.abs() <= tol) {
        Some("along the x-axis")
    } else if centers.iter().all(|p| p.x.abs() <= tol) {
        Some("along the y-axis")
    } else {
        None
    }
}

/// Prose label for a layout, derived from the script's structure and refined
/// with measured geometry.
pub fn describe_layout(pattern: LayoutPattern, layout: &ConductorLayout) -> String {
    let pts = &layout.centers;
    let Ok(c) = centroid(pts) else { return pattern.describe().to_string() };
    match pattern {
        LayoutPattern::Single if pts.len() == 1 => {
            format!("single conductor at ({}, {}) m", fmt_dec(pts[0].x, 4), fmt_dec(pts[0].y, 4))
        }
        LayoutPattern::Circular => {
            let r = pts.iter().map(|p| p.dist(c)).sum::<f64>() / pts.len() as f64;
            format!("circular arrangement on a circle of radius {} mm", fmt_dec(r * 1e3, 2))
        }
        LayoutPattern::Grid => {
            let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
            for p in pts {
                x0 = x0.min(p.x);
                x1 = x1.max(p.x);
                y0 = y0.min(p.y);
                y1 = y1.max(p.y);
            }
            format!("grid arrangement spanning {} mm x {} mm", fmt_dec((x1 - x0) * 1e3, 2), fmt_dec((y1 - y0) * 1e3, 2))
        }
        _ => match axis_note(pts) {
            Some(note) => format!("{} {note}", pattern.describe()),
            None => pattern.describe().to_string(),
        },
    }
}

pub fn build_fact_sheet(
    layout: &ConductorLayout,
    pattern: LayoutPattern,
    problem: &FEProblem,
    sim: &Simulation,
    artifacts: Vec<ArtifactFact>,
) -> FactSheet {
    let b = boundary(layout).expect("solved layouts are non-empty");
    let f = problem.excitation.frequency_hz;
    let delta = if f > 0.0 { skin_depth(&problem.material, &problem.excitation).ok() } else { None };
    let skin_regime = match delta {
        None => SkinRegime::Dc,
        Some(d) if d > layout.radius_m => SkinRegime::NearUniform,
        Some(_) => SkinRegime::Surface,
    };
    let conductors: Vec<ConductorFact> = sim
        .conductors
        .iter()
        .map(|r| ConductorFact {
            index: r.index,
            group: r.group.clone(),
            center: [layout.centers[r.index].x, layout.centers[r.index].y],
            current: [r.current.re, r.current.im],
            voltage: [r.voltage.re, r.voltage.im],
            loss_w_per_m: r.loss_w_per_m,
        })
        .collect();
    FactSheet {
        conductor_count: layout.len(),
        layout_pattern: pattern,
        layout_descriptor: describe_layout(pattern, layout),
        radius_m: layout.radius_m,
        boundary_center: [b.center.x, b.center.y],
        boundary_radius_m: b.radius_m,
        frequency_hz: f,
        current_amplitude_a: problem.excitation.current_amplitude_a,
        conductivity_s_per_m: problem.material.conductivity_s_per_m,
        skin_depth_m: delta,
        skin_regime,
        proximity_effect: layout.len() > 1 && f > 0.0,
        total_loss_w_per_m: conductors.iter().map(|c| c.loss_w_per_m).sum(),
        conductors,
        magnetic_energy_j_per_m: magnetic_energy(&sim.fields, problem),
        triangle_count: problem.mesh.triangles.len(),
        node_count: problem.mesh.nodes.len(),
        artifacts,
    }
}
