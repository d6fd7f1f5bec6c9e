//! The ten-layer syntax/semantics verdict and the stage-outcome classifier.

use std::fmt;

use emsim_core::layoutlang::{LayoutRuntimeError, LayoutSyntaxError, Pos};
use emsim_core::postdsl::{Diagnostic, DslLayer, DslSyntaxError, Severity};
use serde::{Deserialize, Serialize};

use super::intent::IntentCheck;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    LayoutSyntax,
    LayoutSemantics,
    GeometrySyntax,
    GeometrySemantics,
    DslSyntax,
    DslSemantics,
    PhysicsSyntax,
    PhysicsSemantics,
    SummarySyntax,
    SummarySemantics,
}

impl Layer {
    pub const ALL: [Layer; 10] = [
        Layer::LayoutSyntax,
        Layer::LayoutSemantics,
        Layer::GeometrySyntax,
        Layer::GeometrySemantics,
        Layer::DslSyntax,
        Layer::DslSemantics,
        Layer::PhysicsSyntax,
        Layer::PhysicsSemantics,
        Layer::SummarySyntax,
        Layer::SummarySemantics,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Layer::LayoutSyntax => "layout_syntax",
            Layer::LayoutSemantics => "layout_semantics",
            Layer::GeometrySyntax => "geometry_syntax",
            Layer::GeometrySemantics => "geometry_semantics",
            Layer::DslSyntax => "dsl_syntax",
            Layer::DslSemantics => "dsl_semantics",
            Layer::PhysicsSyntax => "physics_syntax",
            Layer::PhysicsSemantics => "physics_semantics",
            Layer::SummarySyntax => "summary_syntax",
            Layer::SummarySemantics => "summary_semantics",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Layer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<DslLayer> for Layer {
    fn from(l: DslLayer) -> Self {
        match l {
            DslLayer::DslSyntax => Layer::DslSyntax,
            DslLayer::DslSemantics => Layer::DslSemantics,
            DslLayer::PhysicsSyntax => Layer::PhysicsSyntax,
            DslLayer::PhysicsSemantics => Layer::PhysicsSemantics,
        }
    }
}

/// One diagnostic attached to a failed layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub code: String,
    pub message: String,
    pub severity: Severity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pos: Option<Pos>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hint: Option<String>,
}

impl Finding {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), severity: Severity::Error, pos: None, hint: None }
    }

    pub fn at(mut self, pos: Pos) -> Self {
        self.pos = Some(pos);
        self
    }

    pub fn with_hint(mut self, hint: impl Into<String>) -> Self {
        self.hint = Some(hint.into());
        self
    }
}

impl From<&Diagnostic> for Finding {
    fn from(d: &Diagnostic) -> Self {
        Self { code: d.code.clone(), message: d.message.clone(), severity: d.severity, pos: Some(d.pos), hint: d.hint.clone() }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.pos {
            write!(f, "{p}: ")?;
        }
        write!(f, "[{}] {}", self.code, self.message)?;
        if let Some(h) = &self.hint {
            write!(f, " (hint: {h})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LayerStatus {
    Ok,
    Failed { diagnostics: Vec<Finding> },
    Skipped,
    NeedsHuman { notes: Vec<String> },
}

impl LayerStatus {
    pub fn label(&self) -> &'static str {
        match self {
            LayerStatus::Ok => "ok",
            LayerStatus::Failed { .. } => "failed",
            LayerStatus::Skipped => "skipped",
            LayerStatus::NeedsHuman { .. } => "needs_human",
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, LayerStatus::Failed { .. })
    }

    /// `ok` or `needs_human`.
    pub fn is_acceptable(&self) -> bool {
        matches!(self, LayerStatus::Ok | LayerStatus::NeedsHuman { .. })
    }

    pub fn findings(&self) -> &[Finding] {
        match self {
            LayerStatus::Failed { diagnostics } => diagnostics,
            _ => &[],
        }
    }

    pub fn notes(&self) -> &[String] {
        match self {
            LayerStatus::NeedsHuman { notes } => notes,
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerVerdict {
    pub layer: Layer,
    #[serde(flatten)]
    pub status: LayerStatus,
}

/// All ten layers in their fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValidationVerdict {
    pub layers: Vec<LayerVerdict>,
}

impl ValidationVerdict {
    pub fn all_skipped() -> Self {
        VerdictBuilder::default().build()
    }

    pub fn status(&self, layer: Layer) -> &LayerStatus {
        &self.layers[layer.index()].status
    }

    pub fn first_failure(&self) -> Option<Layer> {
        self.layers.iter().find(|l| l.status.is_failed()).map(|l| l.layer)
    }

    /// No layer failed.
    pub fn passed(&self) -> bool {
        self.first_failure().is_none()
    }

    /// Every layer up to and including `last` is ok or needs_human.
    pub fn acceptable_through(&self, last: Layer) -> bool {
        self.layers.iter().take(last.index() + 1).all(|l| l.status.is_acceptable())
    }

    /// The ordering invariant: nothing but `skipped` after a failure.
    pub fn is_well_formed(&self) -> bool {
        let order_ok = self.layers.len() == Layer::ALL.len()
            && self.layers.iter().zip(Layer::ALL).all(|(l, expected)| l.layer == expected);
        let after = self.first_failure().map_or(Layer::ALL.len(), |l| l.index() + 1);
        order_ok && self.layers[after.min(self.layers.len())..].iter().all(|l| l.status == LayerStatus::Skipped)
    }
}

/// Collects layer statuses; anything set after a failure is forced to
/// `skipped`, and unset layers default to `skipped`.
#[derive(Debug, Clone, Default)]
pub struct VerdictBuilder {
    statuses: [Option<LayerStatus>; 10],
}

impl VerdictBuilder {
    pub fn set(&mut self, layer: Layer, status: LayerStatus) -> &mut Self {
        self.statuses[layer.index()] = Some(status);
        self
    }

    pub fn build(&self) -> ValidationVerdict {
        let mut failed = false;
        let layers = Layer::ALL
            .iter()
            .map(|&layer| {
                let status = match (&self.statuses[layer.index()], failed) {
                    (_, true) | (None, _) => LayerStatus::Skipped,
                    (Some(s), false) => s.clone(),
                };
                failed |= status.is_failed();
                LayerVerdict { layer, status }
            })
            .collect();
        ValidationVerdict { layers }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayoutOutcome {
    Syntax(LayoutSyntaxError),
    Runtime(LayoutRuntimeError),
    Points(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryOutcome {
    /// The layout is not a valid geometry (empty, non-finite, bad radius).
    Invalid(String),
    Overlap(Vec<(usize, usize)>),
    MeshFailed(String),
    SolveFailed(String),
    Solved(IntentCheck),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PostOutcome {
    /// A post-processing mode was requested but the answer had no DSL part.
    Missing,
    Syntax(DslSyntaxError),
    Checked { diagnostics: Vec<Diagnostic>, eval_error: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SummaryOutcome {
    pub syntax: Vec<Finding>,
    /// Mechanical contradictions; empty means the match still needs a human.
    pub semantics: Vec<Finding>,
}

/// What each stage produced. `None` means the stage did not run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageOutcomes {
    pub layout: Option<LayoutOutcome>,
    pub geometry: Option<GeometryOutcome>,
    pub post: Option<PostOutcome>,
    pub summary: Option<SummaryOutcome>,
}

fn failed(diagnostics: Vec<Finding>) -> LayerStatus {
    LayerStatus::Failed { diagnostics }
}

fn ok_or_failed(diagnostics: Vec<Finding>) -> LayerStatus {
    if diagnostics.is_empty() {
        LayerStatus::Ok
    } else {
        failed(diagnostics)
    }
}

/// Maps stage outcomes onto the verdict ladder.
pub fn classify(outcomes: &StageOutcomes) -> ValidationVerdict {
    let mut v = VerdictBuilder::default();
    match &outcomes.layout {
        None => {}
        Some(LayoutOutcome::Syntax(e)) => {
            v.set(Layer::LayoutSyntax, failed(vec![Finding::error("layout-syntax", &e.message).at(e.pos)]));
        }
        Some(LayoutOutcome::Runtime(e)) => {
            v.set(Layer::LayoutSyntax, LayerStatus::Ok);
            v.set(Layer::LayoutSemantics, failed(vec![Finding::error("layout-runtime", e.kind.to_string()).at(e.pos)]));
        }
        Some(LayoutOutcome::Points(_)) => {
            v.set(Layer::LayoutSyntax, LayerStatus::Ok).set(Layer::LayoutSemantics, LayerStatus::Ok);
        }
    }
    match &outcomes.geometry {
        None => {}
        Some(GeometryOutcome::Invalid(m)) => {
            v.set(Layer::GeometrySyntax, failed(vec![Finding::error("invalid-geometry", m)]));
        }
        Some(g) => {
            v.set(Layer::GeometrySyntax, LayerStatus::Ok);
            let status = match g {
                GeometryOutcome::Overlap(pairs) => failed(
                    pairs
                        .iter()
                        .map(|(i, j)| Finding::error("overlap", format!("conductors {} and {} overlap", i + 1, j + 1)))
                        .collect(),
                ),
                GeometryOutcome::MeshFailed(m) => failed(vec![Finding::error("mesh-failed", m)]),
                GeometryOutcome::SolveFailed(m) => failed(vec![Finding::error("solve-failed", m)]),
                GeometryOutcome::Solved(IntentCheck::Verified) => LayerStatus::Ok,
                GeometryOutcome::Solved(IntentCheck::Unverifiable(notes)) => {
                    LayerStatus::NeedsHuman { notes: notes.clone() }
                }
                GeometryOutcome::Solved(IntentCheck::Mismatch(findings)) => failed(findings.clone()),
                GeometryOutcome::Invalid(_) => unreachable!(),
            };
            v.set(Layer::GeometrySemantics, status);
        }
    }
    match &outcomes.post {
        None => {}
        Some(PostOutcome::Missing) => {
            v.set(
                Layer::DslSyntax,
                failed(vec![Finding::error("missing-dsl", "the answer contains no PostProcessing or PostOperation block")]),
            );
        }
        Some(PostOutcome::Syntax(e)) => {
            v.set(Layer::DslSyntax, failed(vec![Finding::from(&Diagnostic::from(e))]));
        }
        Some(PostOutcome::Checked { diagnostics, eval_error }) => {
            let pick = |layer: DslLayer| -> Vec<Finding> {
                diagnostics.iter().filter(|d| d.layer == layer).map(Finding::from).collect()
            };
            let mut sem: Vec<Finding> =
                pick(DslLayer::DslSemantics).into_iter().filter(|f| f.severity == Severity::Error).collect();
            if let Some(e) = eval_error {
                sem.push(Finding::error("evaluation", e));
            }
            v.set(Layer::DslSyntax, LayerStatus::Ok)
                .set(Layer::DslSemantics, ok_or_failed(sem))
                .set(Layer::PhysicsSyntax, ok_or_failed(pick(DslLayer::PhysicsSyntax)))
                .set(Layer::PhysicsSemantics, ok_or_failed(pick(DslLayer::PhysicsSemantics)));
        }
    }
    if let Some(s) = &outcomes.summary {
        v.set(Layer::SummarySyntax, ok_or_failed(s.syntax.clone()));
        let sem = if !s.semantics.is_empty() {
            failed(s.semantics.clone())
        } else {
            LayerStatus::NeedsHuman {
                notes: vec!["whether the summary matches the model is left to the reader; compare it with the fact sheet".into()],
            }
        };
        v.set(Layer::SummarySemantics, sem);
    }
    v.build()
}
