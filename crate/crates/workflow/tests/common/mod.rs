#![allow(dead_code)]

use emsim_workflow::genai::{builtin_fixtures, StubFixture, TemplateId};
use emsim_workflow::pipeline::{Session, SessionStore};
use emsim_workflow::{RunMode, Workflow, WorkflowConfig, WorkflowReport};

pub fn fixture(name: &str) -> StubFixture {
    builtin_fixtures().into_iter().find(|f| f.name == name).unwrap_or_else(|| panic!("no fixture {name}"))
}

/// The mode a fixture was written for.
pub fn natural_mode(f: &StubFixture) -> (RunMode, bool) {
    if f.templates.contains(&TemplateId::LayoutGen) {
        (RunMode::LayoutOnly, true)
    } else if f.name.ends_with("_summary") {
        (RunMode::WithPostAndSummary, true)
    } else {
        (RunMode::WithPost, f.templates.contains(&TemplateId::DslWithExamples))
    }
}

pub fn session(root: &std::path::Path, dsl_examples: bool) -> Session {
    let config = WorkflowConfig { dsl_examples, ..WorkflowConfig::default() };
    SessionStore::new(root).create(config).unwrap()
}

pub fn run_fixture(name: &str) -> (tempfile::TempDir, Session, WorkflowReport) {
    let f = fixture(name);
    let (mode, examples) = natural_mode(&f);
    let tmp = tempfile::tempdir().unwrap();
    let mut s = session(tmp.path(), examples);
    let report = Workflow::from_config(&s.config).run(&mut s, &f.input, mode);
    (tmp, s, report)
}
