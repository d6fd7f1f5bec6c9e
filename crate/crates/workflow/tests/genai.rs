use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use emsim_core::layoutlang::{evaluate_layout, parse_layout, DEFAULT_STEP_BUDGET, LayoutPattern};
use emsim_workflow::genai::*;
use emsim_workflow::pipeline::{ArtifactFact, ConductorFact, FactSheet, SkinRegime};
use proptest::prelude::*;
use serde_json::{json, Value};

fn ctx() -> BTreeMap<String, String> {
    let mut c = BTreeMap::new();
    c.insert("radius_mm".into(), "5".into());
    c.insert("min_spacing_mm".into(), "10".into());
    c
}

#[test]
fn user_input_lands_verbatim() {
    let store = PromptStore::builtin();
    let input = "Run an initial mqs simulation using only one conductor";
    let text = render_prompt(store.get(TemplateId::LayoutGen), input, &ctx()).unwrap();
    assert!(text.contains(&format!("\n{input}")));
    assert!(!text.contains("{user_input}"));
    assert!(!text.contains("{{") && !text.contains("}}"));
}

#[test]
fn doubled_braces_collapse() {
    let t = PromptTemplate::new(TemplateId::DslWithExamples, 1, "PostProcessing {{ ... }}\n{user_input}", vec![]).unwrap();
    assert_eq!(render_prompt(&t, "x", &BTreeMap::new()).unwrap(), "PostProcessing { ... }\nx");
    let dsl = render_prompt(PromptStore::builtin().get(TemplateId::DslWithExamples), "x", &ctx()).unwrap();
    assert!(dsl.contains("{a}") && dsl.contains("PostProcessing {"));
}

#[test]
fn blank_input_and_missing_placeholders() {
    let store = PromptStore::builtin();
    assert_eq!(render_prompt(store.get(TemplateId::LayoutGen), " \n\t", &ctx()), Err(TemplateError::BlankInput));
    assert_eq!(
        render_prompt(store.get(TemplateId::LayoutGen), "hi", &BTreeMap::new()),
        Err(TemplateError::MissingPlaceholder("radius_mm".into()))
    );
    let mut c = ctx();
    c.insert("stage_output".into(), "s".into());
    c.insert("facts".into(), "f".into());
    for id in TemplateId::ALL {
        render_prompt(store.get(id), "hi", &c).unwrap();
    }
}

/// `render(u) = prefix + u + suffix` for fixed strings, which makes the map
/// injective whatever `u` contains.
fn split_around(t: &PromptTemplate) -> (String, String) {
    let marker = "\u{1}MARK\u{1}";
    let mut c = ctx();
    c.insert("stage_output".into(), "s".into());
    c.insert("facts".into(), "f".into());
    let r = render_prompt(t, marker, &c).unwrap();
    let (a, b) = r.split_once(marker).unwrap();
    assert!(!b.contains(marker));
    (a.to_string(), b.to_string())
}

proptest! {
    #[test]
    fn rendering_is_prefix_input_suffix(u in "[ -~\n{}]{1,80}", v in "[ -~\n{}]{1,80}") {
        prop_assume!(!u.trim().is_empty() && !v.trim().is_empty());
        let store = PromptStore::builtin();
        let mut c = ctx();
        c.insert("stage_output".into(), "s".into());
        c.insert("facts".into(), "f".into());
        for id in TemplateId::ALL {
            let t = store.get(id);
            let (pre, post) = split_around(t);
            let ru = render_prompt(t, &u, &c).unwrap();
            prop_assert_eq!(&ru, &format!("{pre}{u}{post}"));
            let rv = render_prompt(t, &v, &c).unwrap();
            prop_assert_eq!(ru == rv, u == v);
        }
    }

    #[test]
    fn cleaning_is_idempotent(lines in prop::collection::vec(
        prop_oneof![Just("```".to_string()), Just("```python".to_string()), Just("  ~~~".to_string()),
                    Just(String::new()), Just("   ".to_string()), "[ -~]{0,20}"], 0..12)) {
        let raw = lines.join("\n");
        let once = clean_output(&raw);
        prop_assert_eq!(clean_output(&once), once.clone());
        prop_assert!(!once.lines().any(|l| l.trim_start().starts_with("```")));
    }
}

#[test]
fn cleaning_examples() {
    assert_eq!(clean_output("```\nemit point(0,0)\n```"), "emit point(0,0)");
    assert_eq!(clean_output("```layout\nemit point(0,0)\n```\n"), "emit point(0,0)");
    let t = "let a = 1\nemit point(a, 0)";
    assert_eq!(clean_output(t).as_bytes(), t.as_bytes());
}

#[test]
fn stub_answers_by_fingerprint() {
    let stub = StubProvider::builtin();
    let f = builtin_fixtures().into_iter().find(|f| f.name == "circle_12").unwrap();
    let p = build_prompt(&PromptStore::builtin(), TemplateId::LayoutGen, &f.input, &ctx()).unwrap();
    let rec = stub.complete(&p).unwrap();
    assert_eq!(rec.fingerprint, fingerprint(TemplateId::LayoutGen, &f.input));
    assert_eq!(rec.provider, ProviderKind::Stub);
    assert!(rec.raw_response.starts_with("```"));
    assert_eq!(rec.cleaned_response, clean_output(&rec.raw_response));
    assert_eq!(rec.latency_ms, None);
    let pts = evaluate_layout(&parse_layout(&rec.cleaned_response).unwrap(), DEFAULT_STEP_BUDGET).unwrap();
    assert_eq!(pts.len(), 12);

    // the same input under another template is a different request
    let p = build_prompt(&PromptStore::builtin(), TemplateId::DslWithExamples, &f.input, &ctx()).unwrap();
    assert!(matches!(stub.complete(&p), Err(ProviderError::ProviderUnavailable { .. })));
    // surrounding whitespace is not part of the fingerprint
    assert_eq!(fingerprint(TemplateId::LayoutGen, &format!("  {}\n", f.input)), rec.fingerprint);
}

#[test]
fn fixtures_parse_and_reject_garbage() {
    assert_eq!(builtin_fixtures().len(), 20);
    assert!(StubFixture::parse("x", "template: layout_gen\ninput: a\nresponse").is_err());
    assert!(StubFixture::parse("x", "template: nope\ninput: a\n---\nb").is_err());
    assert!(StubFixture::parse("x", "input: a\n---\nb").is_err());
    let f = StubFixture::parse("x", "template: summary, layout_gen\ninput:  a b \n---\nline\n---\n").unwrap();
    assert_eq!(f.templates, vec![TemplateId::Summary, TemplateId::LayoutGen]);
    assert_eq!(f.input, "a b");
    assert_eq!(f.response, "line\n---\n");
}

struct Scripted {
    replies: Mutex<Vec<Result<Value, TransportError>>>,
    calls: AtomicUsize,
    last_body: Mutex<Option<Value>>,
}

impl Scripted {
    fn new(mut replies: Vec<Result<Value, TransportError>>) -> Arc<Self> {
        replies.reverse();
        Arc::new(Self { replies: Mutex::new(replies), calls: AtomicUsize::new(0), last_body: Mutex::new(None) })
    }
}

impl Transport for Scripted {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, _t: Duration) -> Result<Value, TransportError> {
        assert_eq!(url, "http://llm.invalid/v1/chat/completions");
        assert_eq!(bearer, "k-123");
        self.calls.fetch_add(1, Ordering::SeqCst);
        *self.last_body.lock().unwrap() = Some(body.clone());
        self.replies.lock().unwrap().pop().expect("unexpected extra call")
    }
}

fn http_config(var: &str) -> ProviderConfig {
    ProviderConfig {
        kind: ProviderKind::Http,
        endpoint: Some("http://llm.invalid/v1/chat/completions".into()),
        model: Some("m".into()),
        api_key_env: var.into(),
        timeout_s: 1.0,
        max_retries: 2,
    }
}

fn ok_reply(text: &str) -> Result<Value, TransportError> {
    Ok(json!({ "choices": [ { "message": { "role": "assistant", "content": text } } ] }))
}

fn prompt() -> Prompt {
    build_prompt(&PromptStore::builtin(), TemplateId::LayoutGen, "one conductor", &ctx()).unwrap()
}

#[test]
fn transport_errors_are_retried() {
    std::env::set_var("EMSIM_TEST_KEY_RETRY", "k-123");
    let t = Scripted::new(vec![
        Err(TransportError::Connect("refused".into())),
        Err(TransportError::Status { code: 503, body: String::new() }),
        ok_reply("```\nemit point(0, 0)\n```"),
    ]);
    let p = HttpProvider::new(http_config("EMSIM_TEST_KEY_RETRY"), t.clone());
    let rec = p.complete(&prompt()).unwrap();
    assert_eq!(rec.attempts, 3);
    assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    assert_eq!(rec.cleaned_response, "emit point(0, 0)");
    assert_eq!(rec.provider, ProviderKind::Http);
    assert!(rec.latency_ms.is_some() && rec.timestamp_ms.is_some());

    let body = t.last_body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "m");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][0]["content"], prompt().text);
    assert_eq!(body["messages"][1], json!({ "role": "user", "content": "one conductor" }));
}

#[test]
fn retries_are_bounded() {
    std::env::set_var("EMSIM_TEST_KEY_TIMEOUT", "k-123");
    let t = Scripted::new(vec![Err(TransportError::Timeout), Err(TransportError::Timeout), Err(TransportError::Timeout)]);
    let p = HttpProvider::new(http_config("EMSIM_TEST_KEY_TIMEOUT"), t.clone());
    assert_eq!(p.complete(&prompt()), Err(ProviderError::Timeout { attempts: 3 }));

    std::env::set_var("EMSIM_TEST_KEY_401", "k-123");
    let t = Scripted::new(vec![Err(TransportError::Status { code: 401, body: "no".into() })]);
    let p = HttpProvider::new(http_config("EMSIM_TEST_KEY_401"), t.clone());
    assert!(matches!(p.complete(&prompt()), Err(ProviderError::ProviderUnavailable { .. })));
    assert_eq!(t.calls.load(Ordering::SeqCst), 1);

    std::env::set_var("EMSIM_TEST_KEY_SHAPE", "k-123");
    let t = Scripted::new(vec![Ok(json!({ "unexpected": true }))]);
    let p = HttpProvider::new(http_config("EMSIM_TEST_KEY_SHAPE"), t);
    assert!(matches!(p.complete(&prompt()), Err(ProviderError::ProviderUnavailable { .. })));
}

#[test]
fn missing_key_fails_before_any_request() {
    let t = Scripted::new(vec![]);
    let p = HttpProvider::new(http_config("EMSIM_TEST_KEY_THAT_IS_NEVER_SET"), t.clone());
    assert_eq!(
        p.complete(&prompt()),
        Err(ProviderError::AuthMissing { var: "EMSIM_TEST_KEY_THAT_IS_NEVER_SET".into() })
    );
    assert_eq!(t.calls.load(Ordering::SeqCst), 0);
    // the real transport is never reached either
    let cfg = http_config("EMSIM_TEST_KEY_THAT_IS_NEVER_SET");
    assert!(matches!(complete(&cfg, &prompt()), Err(ProviderError::AuthMissing { .. })));
}

#[cfg(target_os = "linux")]
fn open_sockets() -> usize {
    std::fs::read_dir("/proc/self/fd")
        .unwrap()
        .filter_map(|e| std::fs::read_link(e.ok()?.path()).ok())
        .filter(|l| l.to_string_lossy().starts_with("socket:"))
        .count()
}

#[cfg(target_os = "linux")]
#[test]
fn stub_workflow_opens_no_sockets() {
    let before = open_sockets();
    let tmp = tempfile::tempdir().unwrap();
    let mut s = emsim_workflow::pipeline::SessionStore::new(tmp.path()).create(Default::default()).unwrap();
    let f = builtin_fixtures().into_iter().find(|f| f.name == "circle_10_summary").unwrap();
    let r = emsim_workflow::run_workflow(&mut s, &f.input, emsim_workflow::RunMode::WithPostAndSummary);
    assert!(r.passed);
    assert_eq!(open_sockets(), before);
}

fn facts(n: usize, f_hz: f64, pattern: LayoutPattern, descriptor: &str) -> FactSheet {
    let delta = (f_hz > 0.0).then(|| (2.0 / (2.0 * std::f64::consts::PI * f_hz * 4e-7 * std::f64::consts::PI * 58.1e6)).sqrt());
    FactSheet {
        conductor_count: n,
        layout_pattern: pattern,
        layout_descriptor: descriptor.into(),
        radius_m: 5e-3,
        boundary_center: [0.0, 0.0],
        boundary_radius_m: 0.05,
        frequency_hz: f_hz,
        current_amplitude_a: 1.0,
        conductivity_s_per_m: 58.1e6,
        skin_depth_m: delta,
        skin_regime: match delta {
            None => SkinRegime::Dc,
            Some(d) if d > 5e-3 => SkinRegime::NearUniform,
            Some(_) => SkinRegime::Surface,
        },
        proximity_effect: n > 1 && f_hz > 0.0,
        conductors: (0..n)
            .map(|i| ConductorFact {
                index: i,
                group: format!("Omega_c_{}", i + 1),
                center: [0.02 * i as f64, 0.0],
                current: [1.0, 0.0],
                voltage: [0.0, 0.0],
                loss_w_per_m: 1.1e-4,
            })
            .collect(),
        total_loss_w_per_m: 1.1e-4 * n as f64,
        magnetic_energy_j_per_m: 1e-7,
        triangle_count: 100,
        node_count: 60,
        artifacts: vec![ArtifactFact {
            files: vec!["Results/p.vtk".into(), "Results/p.json".into()],
            processing: "MagDyn_b".into(),
            quantity: "p".into(),
            regions: vec!["Omega_c_1".into()],
            target_region: "Omega".into(),
        }],
    }
}

#[test]
fn stub_summary_follows_the_facts() {
    let ten = render_stub_summary(&facts(10, 50.0, LayoutPattern::Circular, "circular arrangement on a circle of radius 20 mm"));
    assert!(ten.contains("10 conductors") && ten.contains("circle"));
    assert!(ten.contains("skin effect") && ten.contains("proximity effect"));
    assert!(ten.contains("near-uniform current distribution"));
    assert!(check_summary_syntax(&ten).is_empty(), "{ten}");

    let one = render_stub_summary(&facts(1, 50.0, LayoutPattern::Single, "single conductor"));
    assert!(one.contains("single conductor"));
    assert!(!one.contains("proximity"));
    assert!(check_summary_syntax(&one).is_empty(), "{one}");

    let hf = render_stub_summary(&facts(2, 5000.0, LayoutPattern::Linear, "linear arrangement"));
    assert!(hf.contains("near the conductor surface") && !hf.contains("near-uniform"));

    let dc = render_stub_summary(&facts(3, 0.0, LayoutPattern::Linear, "linear arrangement"));
    assert!(dc.contains("direct current") && !dc.contains("proximity"));
    for s in [&ten, &one, &hf, &dc] {
        assert!(check_summary_syntax(s).is_empty(), "{s}");
    }
}

#[test]
fn summary_checks_flag_problems() {
    let f = facts(3, 50.0, LayoutPattern::Linear, "linear arrangement");
    assert!(check_summary_semantics("There are 3 conductors; conductor 3 is hottest.", &f).is_empty());
    assert_eq!(check_summary_semantics("There are four conductors.", &f)[0].code, "conductor-count");
    assert_eq!(check_summary_semantics("Conductor 7 dominates.", &f)[0].code, "conductor-index");
    let codes = |t: &str| check_summary_syntax(t).into_iter().map(|f| f.code).collect::<Vec<_>>();
    assert_eq!(codes(""), ["empty-summary"]);
    assert_eq!(codes("It has (three conductors."), ["unbalanced-brackets"]);
    assert_eq!(codes("The the loss is small."), ["repeated-word"]);
    assert_eq!(codes("Loss is {total_loss}."), ["template-placeholder"]);
    assert_eq!(codes("No terminator"), ["no-terminal-punctuation"]);
    assert!(codes("```\nText.\n```").contains(&"markdown-fence".to_string()));
}
