use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{self, BufRead, Write};
use std::path::Path;

use emsim_core::exec::Exec;
use emsim_core::export::write_json;
use emsim_core::geometry::{boundary, check_overlap, ConductorLayout, Point2};
use emsim_core::mesher::{conductor_group_name, generate_mesh, INSULATOR_GROUP, OUTER_BOUNDARY_GROUP};
use emsim_core::postdsl::{parse_post, physics_lint, validate_post, Diagnostic, DslLayer, Formulation, Severity};
use emsim_core::solver::{magnetic_energy, simulate, FEProblem, SolveOptions};
use emsim_workflow::genai::{ProviderKind, ProviderConfig};
use emsim_workflow::pipeline::{
    build_field_file, write_solution_artifacts, RunError, Session, WorkflowReport, FIELDS_FILE, LAYOUT_FILE, MESH_FILE,
    SOLUTION_FILE, SOLUTION_VTK,
};
use emsim_workflow::{RunMode, Workflow, WorkflowConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{CheckArgs, Cli, Command, ProviderArgs, ProviderChoice, RunArgs, ServeArgs, SolveArgs};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

/// A failure with its exit code.
struct Failure(u8, String);

type Outcome = Result<u8, Failure>;

pub fn dispatch(cli: Cli) -> u8 {
    let json = cli.json;
    let result = load_config(cli.config.as_deref()).and_then(|config| match cli.command {
        Command::Run(a) => run(&cli.out, json, config, cli.config.is_some(), a),
        Command::Solve(a) => solve(&cli.out, json, config, a),
        Command::Check(a) => check(json, a),
        Command::Repl(p) => repl(&cli.out, config, cli.config.is_some(), p),
        Command::Serve(a) => serve(&cli.out, config, cli.config.is_some(), a),
    });
    match result {
        Ok(code) => code,
        Err(Failure(code, message)) => {
            if json {
                println!("{}", json!({ "schema_version": 1, "error": { "exit_code": code, "message": message } }));
            }
            eprintln!("emsim: {message}");
            code
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<WorkflowConfig, Failure> {
    match path {
        None => Ok(WorkflowConfig::default()),
        Some(p) => WorkflowConfig::load(p).map_err(|e| Failure(EXIT_USAGE, e.to_string())),
    }
}

/// Applies provider flags. Without an explicit choice (flag or config file)
/// the HTTP provider is used only when both its key and endpoint are set.
fn resolve_provider(mut config: WorkflowConfig, from_file: bool, p: &ProviderArgs) -> Result<WorkflowConfig, Failure> {
    let pc: &mut ProviderConfig = &mut config.provider;
    if p.endpoint.is_some() {
        pc.endpoint = p.endpoint.clone();
    }
    if p.model.is_some() {
        pc.model = p.model.clone();
    }
    pc.kind = match p.provider {
        Some(ProviderChoice::Stub) => ProviderKind::Stub,
        Some(ProviderChoice::Http) => ProviderKind::Http,
        None if from_file => pc.kind,
        None => {
            let keyed = std::env::var(&pc.api_key_env).is_ok_and(|k| !k.is_empty());
            if keyed && pc.endpoint.is_some() {
                ProviderKind::Http
            } else {
                ProviderKind::Stub
            }
        }
    };
    if p.no_dsl_examples {
        config.dsl_examples = false;
    }
    config.validate().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    Ok(config)
}

fn exit_code(report: &WorkflowReport) -> u8 {
    match &report.error {
        Some(RunError::BlankPrompt) => EXIT_USAGE,
        Some(RunError::Provider { .. }) => EXIT_PROVIDER,
        Some(RunError::Storage { .. }) => EXIT_INTERNAL,
        None if report.passed => EXIT_OK,
        None => EXIT_VALIDATION,
    }
}

fn render_report(report: &WorkflowReport, report_path: &Path) -> String {
    let mut s = String::new();
    for l in &report.verdict.layers {
        let _ = writeln!(s, "  {:<20} {}", l.layer.as_str(), l.status.label());
        for d in l.status.findings() {
            let at = d.pos.map(|p| format!(" at {p}")).unwrap_or_default();
            let _ = writeln!(s, "      {}{at}: {}", d.code, d.message);
            if let Some(h) = &d.hint {
                let _ = writeln!(s, "      hint: {h}");
            }
        }
        for n in l.status.notes() {
            let _ = writeln!(s, "      note: {n}");
        }
    }
    if let Some(e) = &report.error {
        let _ = writeln!(s, "error: {e}");
    }
    if let Some(f) = &report.facts {
        let _ = writeln!(
            s,
            "{} conductor(s), {} triangles, total loss {:.6e} W/m, magnetic energy {:.6e} J/m",
            f.conductor_count, f.triangle_count, f.total_loss_w_per_m, f.magnetic_energy_j_per_m
        );
    }
    if let Some(t) = &report.summary {
        let _ = writeln!(s, "\n{t}\n");
    }
    let _ = writeln!(s, "{} ({})", if report.passed { "passed" } else { "failed" }, report_path.display());
    s
}

fn run(out: &Path, json: bool, config: WorkflowConfig, from_file: bool, a: RunArgs) -> Outcome {
    if a.prompt.trim().is_empty() {
        return Err(Failure(EXIT_USAGE, "--prompt must not be blank".into()));
    }
    let config = resolve_provider(config, from_file, &a.provider)?;
    let mut session = Session::in_dir(out, config).map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
    let report = Workflow::from_config(&session.config).run(&mut session, &a.prompt, a.provider.mode);
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        print!("{}", render_report(&report, &session.report_path()));
    }
    if let Some(e) = &report.error {
        eprintln!("emsim: {e}");
    }
    Ok(exit_code(&report))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum CenterSpec {
    Pair([f64; 2]),
    Point(Point2),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    centers: Vec<CenterSpec>,
    radius_m: Option<f64>,
    boundary_margin_m: Option<f64>,
}

fn read_layout(path: &Path, config: &WorkflowConfig) -> Result<ConductorLayout, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let f: LayoutFile =
        serde_json::from_str(&text).map_err(|e| Failure(EXIT_VALIDATION, format!("invalid layout {}: {e}", path.display())))?;
    let centers = f
        .centers
        .into_iter()
        .map(|c| match c {
            CenterSpec::Pair([x, y]) => Point2::new(x, y),
            CenterSpec::Point(p) => p,
        })
        .collect();
    let layout = ConductorLayout::new(
        centers,
        f.radius_m.unwrap_or(config.model.radius_m),
        f.boundary_margin_m.unwrap_or(config.model.boundary_margin_m),
    );
    layout.validate().map_err(|e| Failure(EXIT_VALIDATION, e.to_string()))?;
    let pairs = check_overlap(&layout);
    if !pairs.is_empty() {
        let list: Vec<String> = pairs.iter().map(|(i, j)| format!("({i}, {j})")).collect();
        return Err(Failure(EXIT_VALIDATION, format!("overlapping conductors: {}", list.join(", "))));
    }
    Ok(layout)
}

#[derive(Serialize)]
struct ConductorRow {
    index: usize,
    group: String,
    current: [f64; 2],
    voltage: [f64; 2],
    loss_w_per_m: f64,
}

fn solve(out: &Path, json: bool, mut config: WorkflowConfig, a: SolveArgs) -> Outcome {
    if let Some(f) = a.freq {
        config.model.frequency_hz = f;
    }
    if let Some(i) = a.current {
        config.model.current_a = i;
    }
    config.validate().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    let layout = read_layout(&a.layout, &config)?;
    let b = boundary(&layout).map_err(|e| Failure(EXIT_VALIDATION, e.to_string()))?;
    let mesh = generate_mesh(&layout, &b, &config.mesh.apply(&layout, &b)).map_err(|e| Failure(EXIT_VALIDATION, e.to_string()))?;
    let m = &config.model;
    let material = m.material().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    let excitation = m.excitation().map_err(|e| Failure(EXIT_USAGE, e.to_string()))?;
    let problem = FEProblem::new(mesh, material, excitation).map_err(|e| Failure(EXIT_VALIDATION, e.to_string()))?;
    let sim = simulate(&problem, &SolveOptions { exec: Exec::available(), ..SolveOptions::default() })
        .map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;

    let store = |e: String| Failure(EXIT_INTERNAL, e);
    std::fs::create_dir_all(out).map_err(|e| store(e.to_string()))?;
    write_json(&out.join(LAYOUT_FILE), &layout).map_err(|e| store(e.to_string()))?;
    write_solution_artifacts(out, &problem, &sim).map_err(store)?;
    write_json(&out.join(FIELDS_FILE), &build_field_file(&problem, &sim, None)).map_err(|e| store(e.to_string()))?;

    let rows: Vec<ConductorRow> = sim
        .conductors
        .iter()
        .map(|c| ConductorRow {
            index: c.index,
            group: c.group.clone(),
            current: [c.current.re, c.current.im],
            voltage: [c.voltage.re, c.voltage.im],
            loss_w_per_m: c.loss_w_per_m,
        })
        .collect();
    let energy = magnetic_energy(&sim.fields, &problem);
    if json {
        let doc = json!({
            "schema_version": 1,
            "frequency_hz": problem.excitation.frequency_hz,
            "triangle_count": problem.mesh.triangles.len(),
            "conductors": rows,
            "total_loss_w_per_m": sim.total_loss_w_per_m,
            "magnetic_energy_j_per_m": energy,
            "files": [LAYOUT_FILE, MESH_FILE, SOLUTION_FILE, SOLUTION_VTK, FIELDS_FILE],
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        println!(
            "{} conductor(s), f = {} Hz, {} triangles",
            rows.len(),
            problem.excitation.frequency_hz,
            problem.mesh.triangles.len()
        );
        println!("{:>5}  {:<12} {:>12} {:>12} {:>13} {:>13} {:>12}", "#", "group", "Re I [A]", "Im I [A]", "Re u [V/m]", "Im u [V/m]", "loss [W/m]");
        for r in &rows {
            println!(
                "{:>5}  {:<12} {:>12.5e} {:>12.5e} {:>13.5e} {:>13.5e} {:>12.5e}",
                r.index, r.group, r.current[0], r.current[1], r.voltage[0], r.voltage[1], r.loss_w_per_m
            );
        }
        println!("total loss {:.6e} W/m, magnetic energy {:.6e} J/m", sim.total_loss_w_per_m, energy);
        println!("artifacts in {}", out.display());
    }
    Ok(EXIT_OK)
}

fn region_names(n: usize) -> BTreeSet<String> {
    let mut g: BTreeSet<String> = (0..n).map(conductor_group_name).collect();
    g.insert(INSULATOR_GROUP.to_string());
    g.insert(OUTER_BOUNDARY_GROUP.to_string());
    g
}

/// Findings that fail the layered checks: every error, and any physics
/// finding.
fn is_failing(d: &Diagnostic) -> bool {
    d.severity == Severity::Error || d.layer == DslLayer::PhysicsSemantics
}

fn check(json: bool, a: CheckArgs) -> Outcome {
    let src = std::fs::read_to_string(&a.dsl).map_err(|e| Failure(EXIT_USAGE, format!("cannot read {}: {e}", a.dsl.display())))?;
    let n = match (a.layout, a.conductors) {
        (Some(p), _) => read_layout(&p, &WorkflowConfig::default())?.len(),
        (None, Some(n)) => n,
        (None, None) => unreachable!("clap requires one of --layout and --conductors"),
    };
    let diagnostics: Vec<Diagnostic> = match parse_post(&src) {
        Err(e) => vec![Diagnostic::from(&e)],
        Ok(prog) => {
            let mut d = validate_post(&prog, &region_names(n), &Formulation::mag_dyn_a());
            if !d.iter().any(|d| d.severity == Severity::Error) {
                d.extend(physics_lint(&prog));
            }
            d
        }
    };
    let failed = diagnostics.iter().any(is_failing);
    if json {
        let doc = json!({ "schema_version": 1, "passed": !failed, "diagnostics": diagnostics });
        println!("{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        for d in &diagnostics {
            println!("{d}");
        }
        println!("{}: {} diagnostic(s)", if failed { "failed" } else { "ok" }, diagnostics.len());
    }
    Ok(if failed { EXIT_VALIDATION } else { EXIT_OK })
}

fn repl(out: &Path, config: WorkflowConfig, from_file: bool, p: ProviderArgs) -> Outcome {
    let config = resolve_provider(config, from_file, &p)?;
    let mut session = Session::in_dir(out, config).map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
    let workflow = Workflow::from_config(&session.config);
    let mut mode = p.mode;
    let stdin = io::stdin();
    let mut stdout = io::stdout();
    println!("emsim repl: type a prompt, ':mode <layout_only|with_post|with_post_and_summary>' or ':quit'");
    loop {
        print!("> ");
        let _ = stdout.flush();
        let mut line = String::new();
        match stdin.lock().read_line(&mut line) {
            Ok(0) => break,
            Ok(_) => {}
            Err(e) => return Err(Failure(EXIT_INTERNAL, e.to_string())),
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line == ":quit" || line == ":q" {
            break;
        }
        if let Some(m) = line.strip_prefix(":mode") {
            match m.trim().parse::<RunMode>() {
                Ok(m) => {
                    mode = m;
                    println!("mode: {mode}");
                }
                Err(e) => println!("{e}"),
            }
            continue;
        }
        let report = workflow.run(&mut session, line, mode);
        print!("{}", render_report(&report, &session.report_path()));
    }
    Ok(EXIT_OK)
}

fn serve(out: &Path, config: WorkflowConfig, from_file: bool, a: ServeArgs) -> Outcome {
    let config = resolve_provider(config, from_file, &a.provider)?;
    let addr = std::net::SocketAddr::new(a.host, a.port);
    let root = out.join("sessions");
    let rt = tokio::runtime::Runtime::new().map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
    eprintln!("emsim: serving http://{addr}/api (sessions in {})", root.display());
    rt.block_on(emsim_server::serve(addr, emsim_server::AppState::new(root, config)))
        .map_err(|e| Failure(EXIT_INTERNAL, e.to_string()))?;
    Ok(EXIT_OK)
}
