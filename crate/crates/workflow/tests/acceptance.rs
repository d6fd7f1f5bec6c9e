//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;
#[path = "../../core/tests/common/bessel.rs"]
mod bessel;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use bessel::{dc_resistance, wire_impedance};
use common::{fixture, natural_mode, run_fixture, session};
use emsim_core::geometry::{boundary, check_overlap, ConductorLayout, ExcitationSpec, MaterialSpec, Point2, MU0, SIGMA_CU};
use emsim_core::layoutlang::{evaluate_layout, parse_layout, DEFAULT_STEP_BUDGET};
use emsim_core::mesher::{generate_mesh, MeshSizeSpec, TriMesh};
use emsim_core::postdsl::{evaluate_post, parse_post, physics_lint, validate_post, DslLayer, Formulation};
use emsim_core::solver::{conductor_report, simulate, FEProblem, Simulation, SolveOptions};
use emsim_core::Complex64;
use emsim_workflow::genai::{split_stage_output, PromptStore, StubProvider, TemplateId, build_prompt, Completer};
use emsim_workflow::pipeline::{Layer, LayerStatus};
use emsim_workflow::Workflow;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R: f64 = 5e-3;
const OHMIC: &str = include_str!("../../core/tests/fixtures/post/ohmic_loss_selected.pro");
const ENERGY: &str = include_str!("../../core/tests/fixtures/post/magnetic_energy_diagonal.pro");
const H_FIELD: &str = include_str!("../../core/tests/fixtures/post/h_field.pro");
const ENERGY_HALF: &str = include_str!("../../core/tests/fixtures/post/energy_factor_half.pro");

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn mesh(centers: &[Point2], refine: f64) -> TriMesh {
    let layout = ConductorLayout::with_defaults(centers.to_vec());
    let b = boundary(&layout).unwrap();
    let mut s = MeshSizeSpec::defaults_for(&layout, &b);
    s.h_conductor_m /= refine;
    s.h_far_m /= refine;
    generate_mesh(&layout, &b, &s).unwrap()
}

fn solve(p: &FEProblem) -> Simulation {
    simulate(p, &SolveOptions::default()).unwrap()
}

fn single(refine: f64, freq: f64) -> FEProblem {
    let m = mesh(&[Point2::new(0.0, 0.0)], refine);
    FEProblem::new(m, MaterialSpec::default(), ExcitationSpec::new(1.0, freq).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn skin_oracle() -> Check {
    let start = Instant::now();
    let p = single(1.0, 50.0);
    let sim = solve(&p);
    let secs = start.elapsed().as_secs_f64();
    let tris = p.mesh.triangles.len();
    let r_fe = 2.0 * sim.conductors[0].loss_w_per_m;
    let r_exact = wire_impedance(R, SIGMA_CU, MU0, 50.0).re;
    let err = rel(r_fe, r_exact);
    ensure!(tris <= 20_000, "{tris} triangles");
    ensure!(secs <= 10.0, "took {secs:.2} s");
    ensure!(err < 0.01, "R_fe {r_fe:.6e} vs {r_exact:.6e} ({:.3}%)", err * 100.0);
    Ok(format!("R_ac {r_fe:.6e} ohm/m vs {r_exact:.6e}, error {:.3}%, {tris} triangles, {secs:.2} s", err * 100.0))
}

fn random_problem(rng: &mut ChaCha8Rng) -> FEProblem {
    let n = rng.random_range(1..=8usize);
    let mut centers: Vec<Point2> = Vec::new();
    while centers.len() < n {
        let p = Point2::new(rng.random_range(-0.04..0.04), rng.random_range(-0.04..0.04));
        if centers.iter().all(|c| c.dist(p) > 2.0 * R + 5e-4) {
            centers.push(p);
        }
    }
    let currents = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let freq = [0.0, 50.0, rng.random_range(1.0..2000.0)][rng.random_range(0..3)];
    FEProblem::with_currents(mesh(&centers, 1.0), MaterialSpec::default(), ExcitationSpec::new(1.0, freq).unwrap(), currents)
        .unwrap()
}

fn constraint_exactness() -> Check {
    let mut worst = 0.0f64;
    for seed in 0..25u64 {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed));
        let sim = solve(&p);
        for c in &sim.conductors {
            let e = (c.current - c.imposed_current).norm() / c.imposed_current.norm();
            worst = worst.max(e);
            ensure!(e <= 1e-8, "seed {seed} conductor {}: relative error {e:.2e}", c.index + 1);
        }
    }
    Ok(format!("25 seeds, worst relative current error {worst:.2e}"))
}

fn power_balance() -> Check {
    let mut worst = 0.0f64;
    let mut cases: Vec<FEProblem> = (100..106u64).map(|s| random_problem(&mut ChaCha8Rng::seed_from_u64(s))).collect();
    cases.push(single(1.0, 50.0));
    cases.push(single(1.0, 0.0));
    for (k, p) in cases.iter().enumerate() {
        let sim = solve(p);
        let loss: f64 = sim.conductors.iter().map(|c| c.loss_w_per_m).sum();
        // terminal power from the recovered currents, S = -1/2 sum u* I
        let terminal = -0.5 * sim.conductors.iter().map(|c| c.voltage.conj() * c.current).sum::<Complex64>().re;
        let e = rel(terminal, loss);
        worst = worst.max(e);
        ensure!(e <= 1e-6, "case {k}: loss {loss:.9e} vs terminal power {terminal:.9e}");
    }
    Ok(format!("{} cases, worst relative mismatch {worst:.2e}", cases.len()))
}

fn dsl_cross_check() -> Check {
    let centers = [Point2::new(-0.012, 0.0), Point2::new(0.012, 0.0), Point2::new(0.0, 0.015)];
    let p = FEProblem::new(mesh(&centers, 1.0), MaterialSpec::default(), ExcitationSpec::new(1.0, 400.0).unwrap()).unwrap();
    let sim = solve(&p);
    let mut src = String::from("PostProcessing { { Name P; NameOfFormulation MagDyn_a; PostQuantity {\n");
    for i in 1..=3 {
        src += &format!(
            "{{ Name p{i}; Value {{ Local {{ [ sigma[]/2 * Norm[ -Dt[{{a}}] - {{grad_phi}} ]^2 ]; In Region[{{Omega_c_{i}}}]; Jacobian Vol; }} }} }}\n"
        );
    }
    src += "{ Name w; Value { Local { [ 0.25 * nu[] * Norm[{d a}]^2 ]; In Region[{Omega}]; Jacobian Vol; } } }\n} } }";
    let prog = parse_post(&src).map_err(|e| e.to_string())?;
    let groups: BTreeSet<String> = p.mesh.groups.keys().cloned().collect();
    ensure!(validate_post(&prog, &groups, &Formulation::mag_dyn_a()).is_empty(), "program does not validate");
    let ev = evaluate_post(&prog, &sim.result, &p).map_err(|e| e.to_string())?;
    let report = conductor_report(&sim.result, &p);
    let mut worst_p = 0.0f64;
    for (i, rep) in report.iter().enumerate() {
        let vals = ev.get("P", &format!("p{}", i + 1)).unwrap().data.scalars().unwrap();
        let integral: f64 = vals.iter().enumerate().map(|(t, v)| v.re * p.mesh.signed_area(t)).sum();
        let e = rel(integral, rep.loss_w_per_m);
        worst_p = worst_p.max(e);
        ensure!(e <= 1e-10, "conductor {}: {integral:.12e} vs {:.12e}", i + 1, rep.loss_w_per_m);
    }
    let w = ev.get("P", "w").unwrap().data.scalars().unwrap();
    let nu = p.material.reluctivity;
    let (mut dsl, mut direct) = (0.0, 0.0);
    for t in 0..p.mesh.triangles.len() {
        let area = p.mesh.signed_area(t);
        dsl += w[t].re * area;
        let b2: f64 = sim.fields.b[t].iter().map(|c| c.norm_sqr()).sum();
        direct += nu / 4.0 * b2 * area;
    }
    let e_w = rel(dsl, direct);
    ensure!(e_w <= 1e-12, "w_m {dsl:.15e} vs {direct:.15e}");
    Ok(format!("loss density worst {worst_p:.2e}, energy {e_w:.2e}"))
}

fn dc_limit() -> Check {
    let p = single(1.0, 0.0);
    let sim = solve(&p);
    let owner = p.triangle_conductors();
    let jz: Vec<f64> = owner.iter().zip(&sim.fields.j_z).filter(|(o, _)| o.is_some()).map(|(_, j)| j.norm()).collect();
    let (lo, hi) = jz.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (hi - lo) / hi;
    ensure!(spread <= 1e-10, "J_z spread {spread:.2e}");
    let expected = 0.5 * dc_resistance(R, SIGMA_CU);
    let e = rel(sim.conductors[0].loss_w_per_m, expected);
    ensure!(e < 5e-3, "loss {:.6e} vs {expected:.6e}", sim.conductors[0].loss_w_per_m);
    Ok(format!("spread {spread:.2e}, loss error {:.3}%", e * 100.0))
}

fn convergence() -> Check {
    let exact = wire_impedance(R, SIGMA_CU, MU0, 50.0).re;
    let mut errors = Vec::new();
    for k in [1.0, 2.0, 4.0, 8.0] {
        let p = single(k, 50.0);
        errors.push(rel(2.0 * solve(&p).conductors[0].loss_w_per_m, exact));
    }
    ensure!(errors.windows(2).all(|w| w[1] < w[0]), "errors {errors:?}");
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.3e}")).collect();
    Ok(format!("relative R_ac errors {}", shown.join(" > ")))
}

fn bracket_offsets(src: &str) -> Vec<usize> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut in_str) = (0, false);
    while i < b.len() {
        match b[i] {
            b'"' => in_str = !in_str,
            b'/' if !in_str && b.get(i + 1) == Some(&b'/') => {
                while i < b.len() && b[i] != b'\n' {
                    i += 1;
                }
                continue;
            }
            b'{' | b'}' | b'[' | b']' | b'(' | b')' if !in_str => out.push(i),
            _ => {}
        }
        i += 1;
    }
    out
}

fn parser_corpus() -> Check {
    let f = Formulation::mag_dyn_a();
    let groups = |n: usize| -> BTreeSet<String> {
        let mut g: BTreeSet<String> = (1..=n).map(|i| format!("Omega_c_{i}")).collect();
        g.extend(["Omega".to_string(), "Omega_i".into(), "Omega_c".into(), "Gamma_out".into()]);
        g
    };
    for (name, src) in [("ohmic", OHMIC), ("energy", ENERGY), ("h_field", H_FIELD)] {
        let p = parse_post(src).map_err(|e| format!("{name}: {e}"))?;
        let d = validate_post(&p, &groups(10), &f);
        ensure!(d.is_empty(), "{name}: {d:?}");
        let l = physics_lint(&p);
        ensure!(l.is_empty(), "{name}: {l:?}");
    }
    let mut mutations = 0;
    for src in [OHMIC, ENERGY, H_FIELD] {
        for k in bracket_offsets(src) {
            let ch = src.as_bytes()[k] as char;
            for m in [format!("{}{}", &src[..k], &src[k + 1..]), format!("{}{ch}{}", &src[..k], &src[k..])] {
                mutations += 1;
                match parse_post(&m) {
                    Ok(_) => return Err(format!("mutation at byte {k} parsed")),
                    Err(e) => ensure!(e.pos.line >= 1 && e.pos.col >= 1, "unlocated error {e:?}"),
                }
            }
        }
    }
    let d = physics_lint(&parse_post(ENERGY_HALF).map_err(|e| e.to_string())?);
    ensure!(
        d.len() == 1 && d[0].layer == DslLayer::PhysicsSemantics && d[0].message.contains("0.25"),
        "factor mutation gave {d:?}"
    );
    Ok(format!("3 listings clean, {mutations} brace mutations rejected, factor 0.5 flagged"))
}

fn layout_corpus() -> Check {
    let stub = StubProvider::builtin();
    let store = PromptStore::builtin();
    let mut ctx = std::collections::BTreeMap::new();
    ctx.insert("radius_mm".to_string(), "5".to_string());
    ctx.insert("min_spacing_mm".to_string(), "10".to_string());
    let ring = |n: usize, r: f64| -> Vec<Point2> {
        (0..n).map(|i| Point2::new(r * (2.0 * PI * i as f64 / n as f64).cos(), r * (2.0 * PI * i as f64 / n as f64).sin())).collect()
    };
    let hex: Vec<Point2> = (0..10)
        .flat_map(|i| (0..10).map(move |j| Point2::new(i as f64 * 0.02, j as f64 * 0.02 + if i % 2 == 1 { 0.01 } else { 0.0 })))
        .collect();
    let cases = [("circle_12", ring(12, 0.03)), ("hex_grid_100", hex), ("circle_10_summary", ring(10, 0.02))];
    let mut notes = Vec::new();
    for (name, expected) in cases {
        let f = fixture(name);
        let template = f.templates[0];
        let prompt = build_prompt(&store, template, &f.input, &ctx).map_err(|e| e.to_string())?;
        let rec = stub.complete(&prompt).map_err(|e| e.to_string())?;
        let layout_src = if template == TemplateId::LayoutGen { rec.cleaned_response } else { split_stage_output(&rec.cleaned_response).0 };
        let script = parse_layout(&layout_src).map_err(|e| format!("{name}: {e}"))?;
        let pts = evaluate_layout(&script, DEFAULT_STEP_BUDGET).map_err(|e| format!("{name}: {e}"))?;
        ensure!(pts.len() == expected.len(), "{name}: {} points, expected {}", pts.len(), expected.len());
        let dev = pts.iter().zip(&expected).map(|(a, b)| a.dist(*b)).fold(0.0, f64::max);
        ensure!(dev <= 1e-12, "{name}: coordinate deviation {dev:.2e}");
        let ov = check_overlap(&ConductorLayout::with_defaults(pts.clone()));
        ensure!(ov.is_empty(), "{name}: overlapping pairs {ov:?}");
        notes.push(format!("{name} {} pts", pts.len()));
    }
    Ok(notes.join(", "))
}

fn classifier_table() -> Check {
    let cells = [
        ("unclosed_loop", Some(Layer::LayoutSyntax)),
        ("zero_gap", Some(Layer::LayoutSemantics)),
        ("empty_layout", Some(Layer::GeometrySyntax)),
        ("overlap_3", Some(Layer::GeometrySemantics)),
        ("three_loss_first_unbalanced", Some(Layer::DslSyntax)),
        ("three_flux_density", Some(Layer::DslSemantics)),
        ("three_potential_plus_curl", Some(Layer::PhysicsSyntax)),
        ("three_energy_half", Some(Layer::PhysicsSemantics)),
        ("three_loss_first", None),
        ("circle_10_summary", None),
    ];
    for (name, failed) in cells {
        let (_t, _s, r) = run_fixture(name);
        ensure!(r.verdict.is_well_formed(), "{name}: malformed verdict");
        ensure!(r.verdict.first_failure() == failed, "{name}: first failure {:?}, expected {failed:?}", r.verdict.first_failure());
        if let Some(layer) = failed {
            for l in Layer::ALL {
                let st = r.verdict.status(l);
                let ok = if l < layer { st.is_acceptable() } else if l > layer { st == &LayerStatus::Skipped } else { st.is_failed() };
                ensure!(ok, "{name}: layer {l} is {}", st.label());
            }
        }
        ensure!(r.passed == failed.is_none(), "{name}: passed = {}", r.passed);
    }
    for name in ["square_5", "letter_a_15"] {
        let (_t, _s, r) = run_fixture(name);
        ensure!(
            matches!(r.verdict.status(Layer::GeometrySemantics), LayerStatus::NeedsHuman { .. }),
            "{name}: geometry_semantics is {}",
            r.verdict.status(Layer::GeometrySemantics).label()
        );
    }
    Ok(format!("{} cells plus 2 needs_human prompts", cells.len()))
}

fn determinism() -> Check {
    let f = fixture("circle_10_summary");
    let (mode, examples) = natural_mode(&f);
    let mut runs = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().unwrap();
        let mut s = session(tmp.path(), examples);
        let report = Workflow::from_config(&s.config).run(&mut s, &f.input, mode);
        let bytes = std::fs::read(s.report_path()).map_err(|e| e.to_string())?;
        let files: Vec<(String, Vec<u8>)> =
            report.manifest.iter().map(|m| (m.path.clone(), std::fs::read(s.dir.join(&m.path)).unwrap())).collect();
        runs.push((bytes, report.manifest, files));
    }
    ensure!(runs[0].0 == runs[1].0, "report.json differs");
    ensure!(runs[0].1 == runs[1].1, "manifests differ");
    ensure!(runs[0].2 == runs[1].2, "artifact bytes differ");
    Ok(format!("report.json {} bytes, {} manifest entries identical", runs[0].0.len(), runs[0].1.len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 10] = [
        ("skin-effect oracle", skin_oracle),
        ("constraint exactness", constraint_exactness),
        ("power balance", power_balance),
        ("loss and energy density cross-check", dsl_cross_check),
        ("dc limit", dc_limit),
        ("convergence", convergence),
        ("parser corpus", parser_corpus),
        ("layout corpus", layout_corpus),
        ("classifier table", classifier_table),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
