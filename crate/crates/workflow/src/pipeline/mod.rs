//! Prompt to layout to mesh to solution to post-processing to summary, with
//! every stage recorded on the verdict ladder.

pub mod facts;
pub mod fields;
pub mod intent;
pub mod session;
pub mod verdict;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use emsim_core::exec::Exec;
use emsim_core::export::{atomic_write, write_json, write_post_artifacts, write_vtk, CellField, CellValues};
use emsim_core::geometry::{boundary, check_overlap, ConductorLayout, Point2};
use emsim_core::layoutlang::{evaluate_layout, parse_layout, LayoutPattern};
use emsim_core::mesher::{generate_mesh, TriMesh};
use emsim_core::postdsl::{evaluate_post_with, parse_post, physics_lint, validate_post, Formulation, PostEvaluation};
use emsim_core::solver::{simulate, ConductorReport, FEProblem, Simulation, SolveOptions, SolveResult};
use emsim_core::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{RunMode, WorkflowConfig};
use crate::genai::{
    build_prompt, check_summary_semantics, check_summary_syntax, provider_from_config, split_stage_output, summarize,
    Completer, CompletionRecord, PromptStore, ProviderError, TemplateId,
};
pub use facts::{build_fact_sheet, describe_layout, ArtifactFact, ConductorFact, FactSheet, SkinRegime};
pub use fields::{build_field_file, list_fields, load_field, FieldError, FieldFile, FieldPayload, FIELDS_FILE};
pub use intent::{check_intent, IntentCheck};
pub use session::{is_valid_session_id, Message, Session, SessionError, SessionStore};
pub use verdict::{
    classify, Finding, GeometryOutcome, Layer, LayerStatus, LayerVerdict, LayoutOutcome, PostOutcome, StageOutcomes,
    SummaryOutcome, ValidationVerdict, VerdictBuilder,
};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

pub const LAYOUT_FILE: &str = "layout.json";
pub const MESH_FILE: &str = "mesh.json";
pub const SOLUTION_FILE: &str = "solution.json";
pub const SOLUTION_VTK: &str = "Results/solution.vtk";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RunError {
    BlankPrompt,
    Provider { error: ProviderError },
    Storage { message: String },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::BlankPrompt => f.write_str("the prompt is blank"),
            RunError::Provider { error } => write!(f, "{error}"),
            RunError::Storage { message } => write!(f, "storage error: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the session directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantity: Option<String>,
}

/// Result of one run. Contains no ids, paths outside the session or clock
/// readings from the stub, so stub runs are byte-reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowReport {
    pub schema_version: u32,
    pub prompt: String,
    pub mode: RunMode,
    pub verdict: ValidationVerdict,
    /// No layer failed and no run error occurred.
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RunError>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facts: Option<FactSheet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    pub completions: Vec<CompletionRecord>,
    pub manifest: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct MeshDoc<'a> {
    groups: &'a BTreeMap<String, u32>,
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    triangle_tags: Vec<u32>,
    boundary_edges: Vec<[usize; 2]>,
    boundary_tags: Vec<u32>,
}

impl<'a> MeshDoc<'a> {
    fn new(mesh: &'a TriMesh) -> Self {
        Self {
            groups: &mesh.groups,
            nodes: mesh.nodes.iter().map(|p| [p.x, p.y]).collect(),
            triangles: mesh.triangles.iter().map(|t| t.nodes).collect(),
            triangle_tags: mesh.triangles.iter().map(|t| t.tag).collect(),
            boundary_edges: mesh.boundary_edges.iter().map(|e| e.nodes).collect(),
            boundary_tags: mesh.boundary_edges.iter().map(|e| e.tag).collect(),
        }
    }
}

#[derive(Serialize)]
struct SolutionDoc<'a> {
    frequency_hz: f64,
    conductivity_s_per_m: f64,
    currents: &'a [Complex64],
    total_loss_w_per_m: f64,
    conductors: &'a [ConductorReport],
    #[serde(flatten)]
    result: &'a SolveResult,
}

/// Writes `mesh.json`, `solution.json` and the solution VTK for a solve.
pub fn write_solution_artifacts(dir: &Path, problem: &FEProblem, sim: &Simulation) -> Result<(), String> {
    let e = |e: emsim_core::export::ExportError| e.to_string();
    write_json(&dir.join(MESH_FILE), &MeshDoc::new(&problem.mesh)).map_err(e)?;
    write_json(
        &dir.join(SOLUTION_FILE),
        &SolutionDoc {
            frequency_hz: problem.excitation.frequency_hz,
            conductivity_s_per_m: problem.material.conductivity_s_per_m,
            currents: &problem.currents,
            total_loss_w_per_m: sim.total_loss_w_per_m,
            conductors: &sim.conductors,
            result: &sim.result,
        },
    )
    .map_err(e)?;
    let b: Vec<[Complex64; 3]> = sim.fields.b.iter().map(|v| [v[0], v[1], Complex64::new(0.0, 0.0)]).collect();
    let cells = [
        CellField::new("Jz", CellValues::Complex(sim.fields.j_z.clone())),
        CellField::new("Ez", CellValues::Complex(sim.fields.e_z.clone())),
        CellField::new("B", CellValues::ComplexVector(b)),
        CellField::new("B_abs", CellValues::Real((0..sim.fields.b.len()).map(|t| sim.fields.b_abs(t)).collect())),
    ];
    write_vtk(&dir.join(SOLUTION_VTK), &problem.mesh, "emsim solution", &cells).map_err(e)
}

fn rel_string(rel: &Path) -> String {
    rel.components()
        .filter_map(|c| match c {
            Component::Normal(s) => Some(s.to_string_lossy().into_owned()),
            _ => None,
        })
        .collect::<Vec<_>>()
        .join("/")
}

/// Size and digest of each listed artifact that exists, sorted by path.
pub fn build_manifest(
    dir: &Path,
    files: &BTreeSet<String>,
    quantities: &BTreeMap<String, String>,
) -> std::io::Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for path in files {
        let bytes = match fs::read(dir.join(path)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => continue,
            Err(e) => return Err(e),
        };
        let sha256 = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        out.push(ManifestEntry { quantity: quantities.get(path).cloned(), path: path.clone(), bytes: bytes.len() as u64, sha256 });
    }
    Ok(out)
}

/// Deletes the files listed in the previous report's manifest, the report
/// itself, and directories left empty. Nothing else is touched.
fn clear_previous_run(dir: &Path) {
    let report = dir.join(session::REPORT_FILE);
    let Ok(text) = fs::read_to_string(&report) else { return };
    if let Ok(old) = serde_json::from_str::<WorkflowReport>(&text) {
        let mut parents = BTreeSet::new();
        for m in &old.manifest {
            if let Ok(p) = emsim_core::export::confined_join(dir, &m.path) {
                let _ = fs::remove_file(&p);
                let mut cur = p.parent().map(Path::to_path_buf);
                while let Some(c) = cur {
                    if c == dir || !c.starts_with(dir) {
                        break;
                    }
                    parents.insert(c.clone());
                    cur = c.parent().map(Path::to_path_buf);
                }
            }
        }
        // deepest first
        for p in parents.iter().rev() {
            let _ = fs::remove_dir(p);
        }
    }
    let _ = fs::remove_file(report);
}

fn format_mm(x: f64) -> String {
    facts::fmt_dec(x * 1e3, 3)
}

/// Runs workflows against one provider.
pub struct Workflow {
    provider: Arc<dyn Completer>,
    store: PromptStore,
    exec: Exec,
}

struct RunState {
    outcomes: StageOutcomes,
    completions: Vec<CompletionRecord>,
    storage: Option<String>,
    written: BTreeSet<String>,
    quantities: BTreeMap<String, String>,
}

impl RunState {
    fn store(&mut self, r: Result<(), String>) {
        if let Err(e) = r {
            self.storage.get_or_insert(e);
        }
    }

    /// Records a write of `files`, or the first storage error.
    fn wrote(&mut self, r: Result<(), String>, files: &[&str]) {
        if r.is_ok() {
            self.written.extend(files.iter().map(|f| f.to_string()));
        }
        self.store(r);
    }
}

struct Solved {
    layout: ConductorLayout,
    pattern: LayoutPattern,
    problem: FEProblem,
    sim: Simulation,
}

impl Workflow {
    pub fn new(provider: Arc<dyn Completer>) -> Self {
        Self { provider, store: PromptStore::builtin(), exec: Exec::available() }
    }

    pub fn from_config(config: &WorkflowConfig) -> Self {
        Self::new(provider_from_config(&config.provider))
    }

    pub fn with_store(mut self, store: PromptStore) -> Self {
        self.store = store;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn provider(&self) -> &dyn Completer {
        self.provider.as_ref()
    }

    /// Executes one run in `session`, writes its artifacts and `report.json`,
    /// and returns the report. Failures become verdict entries.
    pub fn run(&self, session: &mut Session, prompt: &str, mode: RunMode) -> WorkflowReport {
        let dir = session.dir.clone();
        clear_previous_run(&dir);
        let mut st = RunState {
            outcomes: StageOutcomes::default(),
            completions: Vec::new(),
            storage: None,
            written: BTreeSet::new(),
            quantities: BTreeMap::new(),
        };
        st.store(session.append_message(prompt, mode).map(|_| ()).map_err(|e| e.to_string()));

        let mut error = None;
        let mut facts = None;
        let mut summary = None;
        if prompt.trim().is_empty() {
            error = Some(RunError::BlankPrompt);
        } else {
            match self.stage_one(session, prompt, mode) {
                Err(e) => error = Some(e),
                Ok(record) => {
                    let solved = self.solve_stage(session, prompt, &record, &mut st);
                    if let Some(s) = &solved {
                        let artifacts = self.post_stage(session, mode, &record, s, &mut st);
                        let fs = build_fact_sheet(&s.layout, s.pattern, &s.problem, &s.sim, artifacts.0);
                        let ff = build_field_file(&s.problem, &s.sim, artifacts.1.as_ref());
                        st.wrote(write_json(&dir.join(FIELDS_FILE), &ff).map_err(|e| e.to_string()), &[FIELDS_FILE]);
                        if mode == RunMode::WithPostAndSummary
                            && classify(&st.outcomes).acceptable_through(Layer::PhysicsSemantics)
                        {
                            match summarize(self.provider.as_ref(), &self.store, prompt, &fs, &record) {
                                Ok(rec) => {
                                    let text = rec.cleaned_response.clone();
                                    st.outcomes.summary = Some(SummaryOutcome {
                                        syntax: check_summary_syntax(&text),
                                        semantics: check_summary_semantics(&text, &fs),
                                    });
                                    st.completions.push(rec);
                                    summary = Some(text);
                                }
                                Err(e) => error = Some(RunError::Provider { error: e }),
                            }
                        }
                        facts = Some(fs);
                    }
                    st.completions.insert(0, record);
                }
            }
        }

        if error.is_none() {
            error = st.storage.take().map(|message| RunError::Storage { message });
        }
        let verdict = classify(&st.outcomes);
        let manifest = build_manifest(&dir, &st.written, &st.quantities).unwrap_or_default();
        let mut report = WorkflowReport {
            schema_version: REPORT_SCHEMA_VERSION,
            prompt: prompt.to_string(),
            mode,
            passed: verdict.passed() && error.is_none(),
            verdict,
            error,
            facts,
            summary,
            completions: st.completions,
            manifest,
        };
        let write = serde_json::to_vec_pretty(&report)
            .map_err(std::io::Error::other)
            .and_then(|mut b| {
                b.push(b'\n');
                atomic_write(&session.report_path(), &b)
            })
            .and_then(|_| {
                report.completions.iter().try_for_each(|c| session::append_jsonl(&dir.join(session::COMPLETIONS_FILE), c))
            });
        if let Err(e) = write {
            if report.error.is_none() {
                report.error = Some(RunError::Storage { message: e.to_string() });
                report.passed = false;
            }
        }
        report
    }

    fn stage_one(&self, session: &Session, prompt: &str, mode: RunMode) -> Result<CompletionRecord, RunError> {
        let template = match (mode.has_post(), session.config.dsl_examples) {
            (false, _) => TemplateId::LayoutGen,
            (true, true) => TemplateId::DslWithExamples,
            (true, false) => TemplateId::DslWithoutExamples,
        };
        let r = session.config.model.radius_m;
        let mut ctx = BTreeMap::new();
        ctx.insert("radius_mm".to_string(), format_mm(r));
        ctx.insert("min_spacing_mm".to_string(), format_mm(2.0 * r));
        let p = build_prompt(&self.store, template, prompt, &ctx)
            .map_err(|e| RunError::Provider { error: ProviderError::ProviderUnavailable { message: e.to_string() } })?;
        self.provider.complete(&p).map_err(|error| RunError::Provider { error })
    }

    fn solve_stage(
        &self,
        session: &Session,
        prompt: &str,
        record: &CompletionRecord,
        st: &mut RunState,
    ) -> Option<Solved> {
        let (layout_src, _) = split_stage_output(&record.cleaned_response);
        let script = match parse_layout(&layout_src) {
            Ok(s) => s,
            Err(e) => {
                st.outcomes.layout = Some(LayoutOutcome::Syntax(e));
                return None;
            }
        };
        let points: Vec<Point2> = match evaluate_layout(&script, session.config.step_budget) {
            Ok(p) => p,
            Err(e) => {
                st.outcomes.layout = Some(LayoutOutcome::Runtime(e));
                return None;
            }
        };
        st.outcomes.layout = Some(LayoutOutcome::Points(points.len()));
        let m = &session.config.model;
        let layout = ConductorLayout::new(points, m.radius_m, m.boundary_margin_m);
        let geo = &mut st.outcomes.geometry;
        if let Err(e) = layout.validate() {
            *geo = Some(GeometryOutcome::Invalid(e.to_string()));
            return None;
        }
        let pairs = check_overlap(&layout);
        if !pairs.is_empty() {
            *geo = Some(GeometryOutcome::Overlap(pairs));
            return None;
        }
        let dir = &session.dir;
        let layout_written = write_json(&dir.join(LAYOUT_FILE), &layout).map_err(|e| e.to_string());
        let b = boundary(&layout).expect("validated layout");
        let sizes = session.config.mesh.apply(&layout, &b);
        let mesh = match generate_mesh(&layout, &b, &sizes) {
            Ok(mesh) => mesh,
            Err(e) => {
                *geo = Some(GeometryOutcome::MeshFailed(e.to_string()));
                st.wrote(layout_written, &[LAYOUT_FILE]);
                return None;
            }
        };
        let solved = m
            .material()
            .and_then(|mat| Ok((mat, m.excitation()?)))
            .map_err(|e| e.to_string())
            .and_then(|(mat, exc)| FEProblem::new(mesh, mat, exc).map_err(|e| e.to_string()))
            .and_then(|problem| {
                let opts = SolveOptions { exec: self.exec, ..SolveOptions::default() };
                simulate(&problem, &opts).map(|sim| (problem, sim)).map_err(|e| e.to_string())
            });
        let (problem, sim) = match solved {
            Ok(v) => v,
            Err(e) => {
                *geo = Some(GeometryOutcome::SolveFailed(e));
                st.wrote(layout_written, &[LAYOUT_FILE]);
                return None;
            }
        };
        *geo = Some(GeometryOutcome::Solved(check_intent(prompt, &layout.centers)));
        st.wrote(layout_written, &[LAYOUT_FILE]);
        st.wrote(write_solution_artifacts(dir, &problem, &sim), &[MESH_FILE, SOLUTION_FILE, SOLUTION_VTK]);
        if matches!(st.outcomes.geometry, Some(GeometryOutcome::Solved(IntentCheck::Mismatch(_)))) {
            return None;
        }
        Some(Solved { pattern: script.pattern(), layout, problem, sim })
    }

    /// Returns the post artifacts for the fact sheet and the evaluation, if any.
    fn post_stage(
        &self,
        session: &Session,
        mode: RunMode,
        record: &CompletionRecord,
        s: &Solved,
        st: &mut RunState,
    ) -> (Vec<ArtifactFact>, Option<PostEvaluation>) {
        if !mode.has_post() {
            return (Vec::new(), None);
        }
        let (_, post_src) = split_stage_output(&record.cleaned_response);
        let Some(src) = post_src else {
            st.outcomes.post = Some(PostOutcome::Missing);
            return (Vec::new(), None);
        };
        let program = match parse_post(&src) {
            Ok(p) => p,
            Err(e) => {
                st.outcomes.post = Some(PostOutcome::Syntax(e));
                return (Vec::new(), None);
            }
        };
        let groups: BTreeSet<String> = s.problem.mesh.groups.keys().cloned().collect();
        let mut diagnostics = validate_post(&program, &groups, &Formulation::mag_dyn_a());
        let validated = diagnostics.is_empty();
        diagnostics.extend(physics_lint(&program));
        let mut eval_error = None;
        let mut evaluation = None;
        let mut artifacts = Vec::new();
        if validated {
            match evaluate_post_with(self.exec, &program, &s.sim.result, &s.problem) {
                Err(e) => eval_error = Some(e.to_string()),
                Ok(ev) => {
                    if diagnostics.is_empty() {
                        match write_post_artifacts(&program, &ev, &s.problem.mesh, &session.dir) {
                            Ok(paths) => {
                                artifacts = post_artifact_facts(&program, &ev, &paths, &session.dir);
                                for a in &artifacts {
                                    for f in &a.files {
                                        st.written.insert(f.clone());
                                        st.quantities.insert(f.clone(), a.quantity.clone());
                                    }
                                }
                            }
                            Err(e) => st.store(Err(e.to_string())),
                        }
                    }
                    evaluation = Some(ev);
                }
            }
        }
        st.outcomes.post = Some(PostOutcome::Checked { diagnostics, eval_error });
        (artifacts, evaluation)
    }
}

fn post_artifact_facts(
    program: &emsim_core::postdsl::PostProgram,
    ev: &PostEvaluation,
    written: &[PathBuf],
    dir: &Path,
) -> Vec<ArtifactFact> {
    // write_post_artifacts emits a .vtk and a .json per Print, in program order
    let prints = program.post_operations.iter().flat_map(|po| po.prints.iter().map(move |pr| (po, pr)));
    let mut out = Vec::new();
    for ((po, pr), pair) in prints.zip(written.chunks(2)) {
        out.push(ArtifactFact {
            files: pair.iter().map(|p| rel_string(p.strip_prefix(dir).unwrap_or(p))).collect(),
            processing: po.processing_ref.clone(),
            quantity: pr.quantity.clone(),
            regions: ev.get(&po.processing_ref, &pr.quantity).map(|q| q.regions.clone()).unwrap_or_default(),
            target_region: pr.on_elements_of.clone().unwrap_or_else(|| "Omega".into()),
        });
    }
    out
}

/// Runs with the provider named in the session's configuration.
pub fn run_workflow(session: &mut Session, user_prompt: &str, mode: RunMode) -> WorkflowReport {
    Workflow::from_config(&session.config).run(session, user_prompt, mode)
}
