use std::collections::BTreeSet;
use std::f64::consts::PI;

use emsim_core::exec::Exec;
use emsim_core::geometry::{boundary, ConductorLayout, ExcitationSpec, MaterialSpec, Point2, SIGMA_CU};
use emsim_core::mesher::{generate_mesh, MeshSizeSpec, TriMesh};
use emsim_core::postdsl::{
    evaluate_post, evaluate_post_with, parse_post, physics_lint, pretty_print, validate_post, BinOp, Diagnostic, DslLayer,
    ElementData, EvalError, Expr, FieldRef, Formulation, PostOperation, PostProcessing, PostProgram, PostQuantity,
    PrintSpec, Severity, Span, ValueWrapper,
};
use emsim_core::solver::{assemble, conductor_report, derive_fields, solve, FEProblem, SolveMethod, SolveResult};
use emsim_core::Complex64;
use proptest::prelude::*;

const OHMIC: &str = include_str!("fixtures/post/ohmic_loss_selected.pro");
const ENERGY: &str = include_str!("fixtures/post/magnetic_energy_diagonal.pro");
const ENERGY_HALF: &str = include_str!("fixtures/post/energy_factor_half.pro");
const LOSS_ONE: &str = include_str!("fixtures/post/loss_factor_one.pro");
const LOSS_NO_GRAD: &str = include_str!("fixtures/post/loss_incomplete_e.pro");
const H_FIELD: &str = include_str!("fixtures/post/h_field.pro");
const UNITS_BAD: &str = include_str!("fixtures/post/units_mismatch.pro");

fn groups(n: usize) -> BTreeSet<String> {
    let mut g: BTreeSet<String> = (1..=n).map(|i| format!("Omega_c_{i}")).collect();
    g.insert("Omega_i".into());
    g.insert("Gamma_out".into());
    g
}

fn mesh(centers: &[(f64, f64)]) -> TriMesh {
    let layout = ConductorLayout::with_defaults(centers.iter().map(|&(x, y)| Point2::new(x, y)).collect());
    let b = boundary(&layout).unwrap();
    generate_mesh(&layout, &b, &MeshSizeSpec::defaults_for(&layout, &b)).unwrap()
}

fn solved(centers: &[(f64, f64)], freq: f64) -> (FEProblem, SolveResult) {
    let p = FEProblem::new(mesh(centers), MaterialSpec::default(), ExcitationSpec::new(1.0, freq).unwrap()).unwrap();
    let r = solve(&assemble(&p).unwrap()).unwrap();
    (p, r)
}

fn errors(d: &[Diagnostic]) -> Vec<&Diagnostic> {
    d.iter().filter(|d| d.severity == Severity::Error).collect()
}

fn quantity_program(name: &str, expr: &str, regions: &str) -> String {
    format!(
        "PostProcessing {{ {{ Name P; NameOfFormulation MagDyn_a; PostQuantity {{ {{ Name {name}; Value {{ Local {{ [ {expr} ]; In Region[{{{regions}}}]; Jacobian Vol; }} }} }} }} }} }}"
    )
}

#[test]
fn ohmic_loss_listing_parses() {
    let p = parse_post(OHMIC).unwrap();
    assert_eq!(p.post_processings.len(), 1);
    let pp = &p.post_processings[0];
    assert_eq!((pp.name.as_str(), pp.formulation_ref.as_str()), ("MagDyn_b", "MagDyn_a"));
    assert_eq!(pp.quantities.len(), 1);
    let q = &pp.quantities[0];
    assert_eq!(q.name, "OhmicLossDensity_conductor_4");
    assert_eq!(q.regions, vec!["Omega_c_4"]);
    assert_eq!(q.wrapper, ValueWrapper::Local);
    assert_eq!(q.jacobian, "Vol");
    let po = &p.post_operations[0];
    assert_eq!(po.processing_ref, "MagDyn_b");
    assert_eq!(po.prints.len(), 1);
    let pr = &po.prints[0];
    assert_eq!(pr.quantity, "OhmicLossDensity_conductor_4");
    assert_eq!(pr.on_elements_of.as_deref(), Some("Omega"));
    assert_eq!(pr.file.as_deref(), Some("Results/p_V_conductor_selected.pos"));
    assert_eq!(pr.label.as_deref(), Some("p_V_c_4(xyz) [W/m^3] "));
    assert_eq!(pr.format.as_deref(), Some("Gmsh"));
}

#[test]
fn energy_listing_parses() {
    let p = parse_post(ENERGY).unwrap();
    let q = &p.post_processings[0].quantities[0];
    assert_eq!(q.name, "MagneticEnergyDensity_Diagonal");
    assert_eq!(q.regions, vec!["Omega_c_1", "Omega_c_5", "Omega_c_9"]);
    assert_eq!(p.post_operations[0].prints[0].file.as_deref(), Some("Results/magnetic_energy_density_diagonal.pos"));
}

#[test]
fn appendix_listings_validate_and_lint_clean() {
    let seven = mesh(&(0..7).map(|i| (0.015 * i as f64, 0.0)).collect::<Vec<_>>());
    let g7: BTreeSet<String> = seven.groups.keys().cloned().collect();
    let f = Formulation::mag_dyn_a();
    let p = parse_post(OHMIC).unwrap();
    assert_eq!(validate_post(&p, &g7, &f), vec![]);
    assert_eq!(physics_lint(&p), vec![]);
    let e = parse_post(ENERGY).unwrap();
    assert_eq!(validate_post(&e, &groups(10), &f), vec![]);
    assert_eq!(physics_lint(&e), vec![]);
    let h = parse_post(H_FIELD).unwrap();
    assert_eq!(validate_post(&h, &groups(3), &f), vec![]);
    assert_eq!(physics_lint(&h), vec![]);
}

/// Byte offsets of bracket characters outside strings and comments.
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

#[test]
fn every_single_brace_mutation_is_a_located_syntax_error() {
    for src in [OHMIC, ENERGY, H_FIELD] {
        let offsets = bracket_offsets(src);
        assert!(offsets.len() > 20);
        for &k in &offsets {
            let ch = src.as_bytes()[k] as char;
            let deleted = format!("{}{}", &src[..k], &src[k + 1..]);
            let doubled = format!("{}{ch}{}", &src[..k], &src[k..]);
            for mutated in [deleted, doubled] {
                let err = parse_post(&mutated).expect_err("mutation must not parse");
                assert!(err.pos.line >= 1 && err.pos.col >= 1);
                assert!(err.hint.as_deref().unwrap_or("").contains("bracket"), "{err:?}");
            }
        }
    }
}

#[test]
fn deleted_brace_names_the_unbalanced_construct() {
    let src = OHMIC.replacen("Operation {", "Operation ", 1);
    let err = parse_post(&src).unwrap_err();
    assert!(err.message.contains("superfluous '}'"), "{err}");
    assert_eq!(err.hint.as_deref(), Some("bracket balance: 11 '{' vs 12 '}' curly brackets"));

    let unclosed = OHMIC.replacen("Region[{Omega_c_4}]", "Region[{Omega_c_4]", 1);
    let err = parse_post(&unclosed).unwrap_err();
    assert!(err.message.contains("the list inside 'Region[ ]' opened at 4:"), "{err}");

    let unclosed_block = OHMIC.replacen("Jacobian Vol ; } } }", "Jacobian Vol ; } }", 1);
    let err = parse_post(&unclosed_block).unwrap_err();
    assert!(err.message.contains("never closed") || err.message.contains("does not match"), "{err}");
}

#[test]
fn grammar_errors_are_located() {
    let src = "PostProcessing {\n  { Name P; NameOfFormulation MagDyn_a;\n    PostQuantity { { Name q; Value { Local { [ 1 + ]; In Omega; } } } } } }";
    let err = parse_post(src).unwrap_err();
    assert_eq!((err.pos.line, err.pos.col), (3, 52));
    assert!(err.message.contains("expected an expression"));
    let err = parse_post("PostOperation { { Name O; NameOfPostProcessing P; Operation { Print[ q, OnLine x ]; } } }")
        .unwrap_err();
    assert!(err.message.contains("unsupported Print option 'OnLine'"));
}

#[test]
fn scalar_plus_vector_is_a_kind_error() {
    let p = parse_post(&quantity_program("q", "{v} + {a}", "Omega")).unwrap();
    let d = validate_post(&p, &groups(1), &Formulation::mag_dyn_a());
    let kind: Vec<_> = d.iter().filter(|d| d.code == "kind").collect();
    assert_eq!(kind.len(), 1);
    assert_eq!(kind[0].message, "scalar plus vector");
    assert_eq!(kind[0].layer, DslLayer::PhysicsSyntax);
    // {v} is also reported as not being a primary variable
    assert!(d.iter().any(|d| d.code == "non-primary-field" && d.layer == DslLayer::DslSemantics));
}

#[test]
fn kind_rules() {
    let f = Formulation::mag_dyn_a();
    let check = |expr: &str| -> Vec<String> {
        let p = parse_post(&quantity_program("q", expr, "Omega")).unwrap();
        validate_post(&p, &groups(1), &f).into_iter().filter(|d| d.code == "kind").map(|d| d.message).collect()
    };
    assert!(check("Norm[{d a}] * 2 + nu[]").is_empty());
    assert!(check("nu[] * {d a}").is_empty());
    assert!(check("{d a} / 2").is_empty());
    assert_eq!(check("{a} * {d a}"), vec!["product of two vectors"]);
    assert_eq!(check("{a} - 1"), vec!["vector minus scalar"]);
    assert_eq!(check("{a}^2"), vec!["vector raised to a power"]);
    assert_eq!(check("1 / {a}"), vec!["division by a vector"]);
}

#[test]
fn semantic_failures() {
    let f = Formulation::mag_dyn_a();
    let codes = |src: String, n: usize| -> Vec<String> {
        validate_post(&parse_post(&src).unwrap(), &groups(n), &f).into_iter().map(|d| d.code).collect()
    };
    let c = codes(ENERGY.to_string(), 5);
    assert_eq!(c, vec!["unknown-region"]);
    let d = validate_post(&parse_post(ENERGY).unwrap(), &groups(5), &f);
    assert!(d[0].message.contains("Omega_c_9"));
    assert_eq!(d[0].layer, DslLayer::DslSemantics);

    assert_eq!(codes(quantity_program("q", "Dt[Norm[{a}]]", "Omega"), 1), vec!["dt-argument"]);
    assert_eq!(codes(quantity_program("q", "sigma[] * 2", "Omega"), 1), vec!["material-scope"]);
    assert!(codes(quantity_program("q", "sigma[] * 2", "Omega_c"), 1).is_empty());
    assert_eq!(codes(quantity_program("q", "Foo[{a}]", "Omega"), 1), vec!["unknown-function"]);
    assert_eq!(codes(quantity_program("q", "eps[]", "Omega"), 1), vec!["unknown-function"]);
    assert_eq!(codes(quantity_program("q", "Norm[{a}]", "Gamma_out"), 1), vec!["boundary-region"]);
    assert_eq!(codes(OHMIC.replace("MagDyn_a", "MagSta_a"), 4), vec!["unknown-formulation"]);
    assert_eq!(codes(OHMIC.replace("Jacobian Vol", "Jacobian Sur"), 4), vec!["jacobian"]);
    assert_eq!(codes(OHMIC.replace("Results/p_V", "../p_V"), 4), vec!["unsafe-path"]);
    assert_eq!(codes(OHMIC.replace("\"Results/", "\"/tmp/"), 4), vec!["unsafe-path"]);
    assert_eq!(codes(OHMIC.replace("Format Gmsh", "Format Table"), 4), vec!["unsupported-format"]);
    assert_eq!(codes(OHMIC.replace("NameOfPostProcessing MagDyn_b", "NameOfPostProcessing X"), 4), vec![
        "unresolved-reference"
    ]);
    assert_eq!(codes(OHMIC.replace("Print[ OhmicLossDensity_conductor_4", "Print[ Q"), 4), vec!["undeclared-quantity"]);
}

fn lint_codes(src: &str) -> Vec<Diagnostic> {
    physics_lint(&parse_post(src).unwrap())
}

#[test]
fn energy_factor_rule() {
    assert!(lint_codes(ENERGY).is_empty());
    let d = lint_codes(ENERGY_HALF);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].code, "energy-factor");
    assert_eq!(d[0].layer, DslLayer::PhysicsSemantics);
    assert!(d[0].message.contains("factor 0.5 vs. 0.25"), "{}", d[0].message);
    // equivalent spellings of the right factor stay clean
    for ok in ["nu[] * Norm[{d a}]^2 / 4", "0.25 * SquNorm[{d a}] / mu[]", "1/4 * nu[] * Norm[-{d a}]^2"] {
        assert!(lint_codes(&quantity_program("w", ok, "Omega")).is_empty(), "{ok}");
    }
}

#[test]
fn loss_factor_rule() {
    assert!(lint_codes(OHMIC).is_empty());
    let d = lint_codes(LOSS_ONE);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].code, "loss-factor");
    assert!(d[0].message.contains("factor 1 vs. 0.5"), "{}", d[0].message);
}

#[test]
fn electric_field_form_rule() {
    let d = lint_codes(LOSS_NO_GRAD);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].code, "e-form");
    assert!(d[0].message.contains("incomplete electric field expression"));
    let cases = [
        ("0.5 * sigma[] * Norm[Dt[{a}] + {grad_phi}]^2", None),
        ("sigma[] / 2 * Norm[-{a} - {grad_phi}]^2", Some("instead of Dt")),
        ("sigma[] / 2 * Norm[-Dt[{a}] + {grad_phi}]^2", Some("inconsistent signs")),
        ("sigma[] / 2 * Norm[-{grad_phi}]^2", Some("Dt[{a}] is missing")),
        ("sigma[] / 2 * Norm[-2 * Dt[{a}] - {grad_phi}]^2", Some("scaled")),
    ];
    for (expr, expected) in cases {
        let d: Vec<_> = lint_codes(&quantity_program("p", expr, "Omega_c")).into_iter().filter(|d| d.code == "e-form").collect();
        match expected {
            None => assert!(d.is_empty(), "{expr}: {d:?}"),
            Some(s) => assert!(d.len() == 1 && d[0].message.contains(s), "{expr}: {d:?}"),
        }
    }
}

#[test]
fn units_rule() {
    assert!(lint_codes(H_FIELD).is_empty());
    let d = lint_codes(UNITS_BAD);
    assert_eq!(d.len(), 1);
    assert_eq!(d[0].code, "units");
    assert!(d[0].message.contains("A/m and T"), "{}", d[0].message);
    // E + H: valid kinds, meaningless physics
    let d = lint_codes(&quantity_program("q", "-Dt[{a}] - {grad_phi} + nu[] * {d a}", "Omega_c"));
    assert!(d.iter().any(|d| d.code == "units" && d.message.contains("V/m and A/m")), "{d:?}");
}

#[test]
fn appendix_listings_round_trip() {
    for src in [OHMIC, ENERGY, H_FIELD, ENERGY_HALF] {
        let p = parse_post(src).unwrap();
        let printed = pretty_print(&p);
        assert_eq!(parse_post(&printed).unwrap(), p, "{printed}");
        assert_eq!(pretty_print(&parse_post(&printed).unwrap()), printed);
    }
}

#[test]
fn loss_density_integrates_to_the_conductor_losses() {
    let (p, r) = solved(&[(-0.012, 0.0), (0.012, 0.0), (0.0, 0.015)], 400.0);
    let mut src = String::from("PostProcessing { { Name P; NameOfFormulation MagDyn_a; PostQuantity {\n");
    for i in 1..=3 {
        src += &format!(
            "{{ Name p{i}; Value {{ Local {{ [ sigma[]/2 * Norm[ (- Dt[{{a}}] - {{grad_phi}}) ]^2 ]; In Region[{{Omega_c_{i}}}]; Jacobian Vol; }} }} }}\n"
        );
    }
    src += "} } }";
    let prog = parse_post(&src).unwrap();
    let groups: BTreeSet<String> = p.mesh.groups.keys().cloned().collect();
    assert!(validate_post(&prog, &groups, &Formulation::mag_dyn_a()).is_empty());
    let ev = evaluate_post(&prog, &r, &p).unwrap();
    let report = conductor_report(&r, &p);
    for (i, rep) in report.iter().enumerate() {
        let vals = ev.get("P", &format!("p{}", i + 1)).unwrap().data.scalars().unwrap();
        let integral: f64 = vals.iter().enumerate().map(|(t, v)| v.re * p.mesh.signed_area(t)).sum();
        assert!((integral - rep.loss_w_per_m).abs() <= 1e-10 * rep.loss_w_per_m, "{integral} vs {}", rep.loss_w_per_m);
        assert!(vals.iter().all(|v| v.im == 0.0 && v.re >= 0.0));
    }
}

#[test]
fn energy_density_resums_to_the_field_energy() {
    let (p, r) = solved(&[(-0.012, 0.0), (0.012, 0.0)], 50.0);
    let prog = parse_post(&quantity_program("w", "0.25 * nu[] * Norm[{d a}]^2", "Omega")).unwrap();
    let ev = evaluate_post(&prog, &r, &p).unwrap();
    let w = ev.get("P", "w").unwrap().data.scalars().unwrap();
    let fields = derive_fields(&r, &p);
    let nu = p.material.reluctivity;
    let mut dsl = 0.0;
    let mut direct = 0.0;
    for t in 0..p.mesh.triangles.len() {
        let area = p.mesh.signed_area(t);
        dsl += w[t].re * area;
        let b2: f64 = fields.b[t].iter().map(|c| c.norm_sqr()).sum();
        direct += nu / 4.0 * b2 * area;
    }
    assert!((dsl - direct).abs() <= 1e-12 * direct, "{dsl} vs {direct}");
}

#[test]
fn dc_loss_density_is_uniform() {
    let (p, r) = solved(&[(0.0, 0.0)], 0.0);
    let prog = parse_post(&OHMIC.replace("Omega_c_4", "Omega_c_1")).unwrap();
    let ev = evaluate_post(&prog, &r, &p).unwrap();
    let vals = ev.quantities[0].data.scalars().unwrap();
    let inside: Vec<f64> = (0..vals.len()).filter(|&t| p.mesh.triangles[t].tag == 1).map(|t| vals[t].re).collect();
    let (lo, hi) = inside.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!((hi - lo) / hi < 1e-9);
    // σ/2 (I / (σ π r²))²
    let r_c: f64 = 5e-3;
    let expected = 0.5 * SIGMA_CU * (1.0 / (SIGMA_CU * PI * r_c * r_c)).powi(2);
    assert!((expected - 1.3951).abs() < 1e-3);
    assert!((hi - expected).abs() / expected < 0.01, "{hi} vs {expected}");
    // zero outside the quantity's region
    assert!((0..vals.len()).filter(|&t| p.mesh.triangles[t].tag != 1).all(|t| vals[t] == Complex64::new(0.0, 0.0)));
}

#[test]
fn zero_solution_gives_zero_quantities() {
    let (p, r) = solved(&[(0.0, 0.0)], 50.0);
    let zero = SolveResult {
        a_z: vec![Complex64::new(0.0, 0.0); r.a_z.len()],
        u: vec![Complex64::new(0.0, 0.0)],
        residual_norm: 0.0,
        dof_count: 0,
        method: SolveMethod::Direct,
        iterations: 0,
    };
    for src in [OHMIC.replace("Omega_c_4", "Omega_c_1"), H_FIELD.to_string()] {
        let ev = evaluate_post(&parse_post(&src).unwrap(), &zero, &p).unwrap();
        match &ev.quantities[0].data {
            ElementData::Scalar(v) => assert!(v.iter().all(|c| c.norm() == 0.0)),
            ElementData::Vector(v) => assert!(v.iter().flatten().all(|c| c.norm() == 0.0)),
        }
    }
}

#[test]
fn vector_quantity_matches_element_field_strength() {
    let (p, r) = solved(&[(0.0, 0.0), (0.02, 0.0)], 50.0);
    let ev = evaluate_post(&parse_post(H_FIELD).unwrap(), &r, &p).unwrap();
    let ElementData::Vector(h) = &ev.quantities[0].data else { panic!("vector expected") };
    let f = derive_fields(&r, &p);
    for (t, v) in h.iter().enumerate() {
        let scale = f.h[t][0].norm() + f.h[t][1].norm() + 1e-30;
        assert!((v[0] - f.h[t][0]).norm() <= 1e-12 * scale);
        assert!((v[1] - f.h[t][1]).norm() <= 1e-12 * scale);
        assert_eq!(v[2], Complex64::new(0.0, 0.0));
    }
}

#[test]
fn sigma_in_the_insulator_is_an_eval_error() {
    let (p, r) = solved(&[(0.0, 0.0)], 50.0);
    let prog = parse_post(&quantity_program("q", "sigma[] * Norm[{a}]", "Omega")).unwrap();
    match evaluate_post(&prog, &r, &p) {
        Err(EvalError::MissingMaterial { material, region, .. }) => {
            assert_eq!(material, "sigma");
            assert_eq!(region, "Omega_i");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn evaluation_is_identical_sequential_and_parallel() {
    let (p, r) = solved(&[(0.0, 0.0), (0.02, 0.0)], 50.0);
    let prog = parse_post(&format!("{}\n{}", H_FIELD, OHMIC.replace("Omega_c_4", "Omega_c_2"))).unwrap();
    let a = evaluate_post_with(Exec::Sequential, &prog, &r, &p).unwrap();
    let b = evaluate_post_with(Exec::Parallel, &prog, &r, &p).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.quantities.len(), 2);
}

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,8}"
}

fn text() -> impl Strategy<Value = String> {
    "[A-Za-z0-9 _./()^\\[\\]]{0,12}"
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    let s = Span::default();
    let leaf = prop_oneof![
        (0.0f64..1e3).prop_map(move |v| Expr::Num(v, s)),
        prop::sample::select(vec![0.25, 0.5, 2.0, 1e-7, 3.0e8]).prop_map(move |v| Expr::Num(v, s)),
        (any::<bool>(), prop::sample::select(vec!["a", "grad_phi", "v", "d"]))
            .prop_map(move |(d, n)| Expr::Field(FieldRef { derivative: d, name: n.into() }, s)),
        prop::sample::select(vec!["sigma", "nu", "mu"]).prop_map(move |n| Expr::Coef(n.into(), s)),
    ];
    leaf.prop_recursive(5, 40, 3, move |inner| {
        prop_oneof![
            inner.clone().prop_map(move |e| Expr::Neg(Box::new(e), s)),
            (prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]), inner.clone(), inner.clone())
                .prop_map(move |(op, l, r)| Expr::Bin(op, Box::new(l), Box::new(r), s)),
            (prop::sample::select(vec!["Dt", "Norm", "SquNorm", "Re"]), prop::collection::vec(inner, 1..3))
                .prop_map(move |(n, a)| Expr::Call(n.into(), a, s)),
        ]
    })
}

fn program_strategy() -> impl Strategy<Value = PostProgram> {
    let s = Span::default();
    let quantity = (ident(), any::<bool>(), expr_strategy(), prop::collection::vec(ident(), 1..4), ident()).prop_map(
        move |(name, local, expr, regions, jacobian)| PostQuantity {
            name,
            wrapper: if local { ValueWrapper::Local } else { ValueWrapper::Term },
            expr,
            regions,
            jacobian,
            span: s,
        },
    );
    let pp = (ident(), ident(), prop::collection::vec(quantity, 0..3))
        .prop_map(move |(name, formulation_ref, quantities)| PostProcessing { name, formulation_ref, quantities, span: s });
    let print = (ident(), prop::option::of(ident()), prop::option::of(text()), prop::option::of(text()), prop::option::of(ident()))
        .prop_map(move |(quantity, on_elements_of, file, label, format)| PrintSpec {
            quantity,
            on_elements_of,
            file,
            label,
            format,
            span: s,
        });
    let po = (ident(), ident(), prop::collection::vec(print, 0..3))
        .prop_map(move |(name, processing_ref, prints)| PostOperation { name, processing_ref, prints, span: s });
    (prop::collection::vec(pp, 0..3), prop::collection::vec(po, 0..3))
        .prop_map(|(post_processings, post_operations)| PostProgram { post_processings, post_operations })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_inverts_pretty_print(prog in program_strategy()) {
        let printed = pretty_print(&prog);
        let back = parse_post(&printed).map_err(|e| TestCaseError::fail(format!("{e}\n{printed}")))?;
        prop_assert_eq!(back, prog);
    }

    #[test]
    fn adding_mesh_groups_never_adds_errors(
        n in 1usize..12,
        extra in 1usize..6,
        regions in prop::collection::vec(prop::sample::select(vec![
            "Omega", "Omega_c", "Omega_i", "Omega_c_1", "Omega_c_3", "Omega_c_7", "Omega_c_12", "Omega_c_15", "Gamma_out", "Air",
        ]), 1..4),
        expr in prop::sample::select(vec![
            "0.25 * nu[] * Norm[{d a}]^2", "sigma[]/2 * Norm[-Dt[{a}] - {grad_phi}]^2", "{v} + {a}", "nu[] * {d a}",
        ]),
    ) {
        let prog = parse_post(&quantity_program("q", expr, &regions.join(", "))).unwrap();
        let f = Formulation::mag_dyn_a();
        let key = |d: &Diagnostic| (d.code.clone(), d.message.clone());
        let small: Vec<_> = errors(&validate_post(&prog, &groups(n), &f)).into_iter().map(key).collect();
        let mut bigger = groups(n + extra);
        bigger.insert("Air".into());
        for d in errors(&validate_post(&prog, &bigger, &f)) {
            prop_assert!(small.contains(&key(d)), "new error {:?}", d);
        }
    }
}
