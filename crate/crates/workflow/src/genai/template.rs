//! Prompt templates with `{name}` placeholders and `{{` / `}}` escapes.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    LayoutGen,
    DslWithExamples,
    DslWithoutExamples,
    Summary,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] =
        [TemplateId::LayoutGen, TemplateId::DslWithExamples, TemplateId::DslWithoutExamples, TemplateId::Summary];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::LayoutGen => "layout_gen",
            TemplateId::DslWithExamples => "dsl_with_examples",
            TemplateId::DslWithoutExamples => "dsl_without_examples",
            TemplateId::Summary => "summary",
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("no value for placeholder '{{{0}}}'")]
    MissingPlaceholder(String),
    #[error("user input is blank")]
    BlankInput,
    #[error("template {template}: stray '{ch}' at byte {offset}; literal braces must be doubled")]
    StrayBrace { template: String, ch: char, offset: usize },
    #[error("template {template}: placeholder '{{{name}}}' appears {count} times, expected once")]
    PlaceholderCount { template: String, name: String, count: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// Splits `body` into literal text (escapes collapsed) and placeholders.
fn segments(template: &str, body: &str) -> Result<Vec<Segment>, TemplateError> {
    let bytes = body.as_bytes();
    let mut out = Vec::new();
    let mut text = String::new();
    let mut i = 0;
    let stray = |ch, offset| TemplateError::StrayBrace { template: template.to_string(), ch, offset };
    while i < bytes.len() {
        match bytes[i] {
            b'{' if bytes.get(i + 1) == Some(&b'{') => {
                text.push('{');
                i += 2;
            }
            b'}' if bytes.get(i + 1) == Some(&b'}') => {
                text.push('}');
                i += 2;
            }
            b'{' => {
                let len = bytes[i + 1..].iter().take_while(|b| b.is_ascii_lowercase() || **b == b'_').count();
                if len == 0 || bytes.get(i + 1 + len) != Some(&b'}') {
                    return Err(stray('{', i));
                }
                if !text.is_empty() {
                    out.push(Segment::Text(std::mem::take(&mut text)));
                }
                out.push(Segment::Slot(body[i + 1..i + 1 + len].to_string()));
                i += len + 2;
            }
            b'}' => return Err(stray('}', i)),
            _ => {
                // copy the whole UTF-8 character
                let ch = body[i..].chars().next().expect("in bounds");
                text.push(ch);
                i += ch.len_utf8();
            }
        }
    }
    if !text.is_empty() {
        out.push(Segment::Text(text));
    }
    Ok(out)
}

/// A system prompt body plus its ordered example blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: TemplateId,
    pub version: u32,
    pub body: String,
    pub examples: Vec<String>,
    parsed: Vec<Segment>,
    rendered_examples: String,
}

impl PromptTemplate {
    /// Checks the escape discipline and that `{user_input}` occurs exactly
    /// once. Examples may not contain placeholders.
    pub fn new(id: TemplateId, version: u32, body: &str, examples: Vec<String>) -> Result<Self, TemplateError> {
        let parsed = segments(id.as_str(), body)?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in &parsed {
            if let Segment::Slot(n) = s {
                *counts.entry(n).or_default() += 1;
            }
        }
        let bad = match counts.get("user_input") {
            Some(1) => counts.iter().find(|(_, &c)| c != 1).map(|(n, &c)| (n.to_string(), c)),
            other => Some(("user_input".to_string(), other.copied().unwrap_or(0))),
        };
        if let Some((name, count)) = bad {
            return Err(TemplateError::PlaceholderCount { template: id.to_string(), name, count });
        }
        let mut blocks = Vec::with_capacity(examples.len());
        for (k, e) in examples.iter().enumerate() {
            let label = format!("{id} example {}", k + 1);
            let mut text = String::new();
            for s in segments(&label, e)? {
                match s {
                    Segment::Text(t) => text.push_str(&t),
                    Segment::Slot(name) => {
                        return Err(TemplateError::PlaceholderCount { template: label, name, count: 1 });
                    }
                }
            }
            blocks.push(text.trim_end().to_string());
        }
        Ok(Self { id, version, body: body.to_string(), examples, parsed, rendered_examples: blocks.join("\n\n") })
    }

    pub fn placeholders(&self) -> Vec<&str> {
        self.parsed
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Text(_) => None,
            })
            .collect()
    }
}

/// Substitutes `user_input`, the example blocks (`{examples}`) and any other
/// placeholder from `context`. Substituted text is inserted verbatim.
pub fn render_prompt(
    template: &PromptTemplate,
    user_input: &str,
    context: &BTreeMap<String, String>,
) -> Result<String, TemplateError> {
    if user_input.trim().is_empty() {
        return Err(TemplateError::BlankInput);
    }
    let mut out = String::with_capacity(template.body.len() + user_input.len() + template.rendered_examples.len());
    for s in &template.parsed {
        match s {
            Segment::Text(t) => out.push_str(t),
            Segment::Slot(n) if n == "user_input" => out.push_str(user_input),
            Segment::Slot(n) if n == "examples" && !context.contains_key(n) => out.push_str(&template.rendered_examples),
            Segment::Slot(n) => {
                out.push_str(context.get(n).ok_or_else(|| TemplateError::MissingPlaceholder(n.clone()))?);
            }
        }
    }
    Ok(out)
}

const LAYOUT_GEN: &str = include_str!("../../assets/prompts/layout_gen.txt");
const DSL_WITH: &str = include_str!("../../assets/prompts/dsl_with_examples.txt");
const DSL_WITHOUT: &str = include_str!("../../assets/prompts/dsl_without_examples.txt");
const SUMMARY: &str = include_str!("../../assets/prompts/summary.txt");

const EX_LAYOUT_MINIMAL: &str = include_str!("../../assets/prompts/examples/layout_minimal.txt");
const EX_LAYOUT_SINGLE: &str = include_str!("../../assets/prompts/examples/layout_single.txt");
const EX_LAYOUT_RING: &str = include_str!("../../assets/prompts/examples/layout_ring.txt");
const EX_DSL_LOSS: &str = include_str!("../../assets/prompts/examples/dsl_loss_first_of_three.txt");
const EX_DSL_H: &str = include_str!("../../assets/prompts/examples/dsl_h_field.txt");
const EX_SUMMARY: &str = include_str!("../../assets/prompts/examples/summary_three.txt");

/// The versioned templates shipped with the crate.
#[derive(Debug, Clone)]
pub struct PromptStore {
    templates: BTreeMap<TemplateId, PromptTemplate>,
}

impl PromptStore {
    pub fn builtin() -> Self {
        let own = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let entries = [
            (TemplateId::LayoutGen, LAYOUT_GEN, own(&[EX_LAYOUT_MINIMAL, EX_LAYOUT_SINGLE, EX_LAYOUT_RING])),
            (TemplateId::DslWithExamples, DSL_WITH, own(&[EX_DSL_LOSS, EX_DSL_H, EX_LAYOUT_RING])),
            (TemplateId::DslWithoutExamples, DSL_WITHOUT, own(&[EX_DSL_H])),
            (TemplateId::Summary, SUMMARY, own(&[EX_SUMMARY])),
        ];
        let templates = entries
            .into_iter()
            .map(|(id, body, ex)| (id, PromptTemplate::new(id, 1, body, ex).expect("bundled template is well formed")))
            .collect();
        Self { templates }
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id, template);
    }
}

impl Default for PromptStore {
    fn default() -> Self {
        Self::builtin()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escapes_and_slots() {
        let t = PromptTemplate::new(TemplateId::LayoutGen, 1, "A {{x}} {user_input} }}", vec![]).unwrap();
        assert_eq!(render_prompt(&t, "hi", &BTreeMap::new()).unwrap(), "A {x} hi }");
    }

    #[test]
    fn stray_braces_are_rejected() {
        let e = PromptTemplate::new(TemplateId::LayoutGen, 1, "{user_input} { x", vec![]).unwrap_err();
        assert!(matches!(e, TemplateError::StrayBrace { ch: '{', offset: 13, .. }));
        let e = PromptTemplate::new(TemplateId::LayoutGen, 1, "{user_input} }", vec![]).unwrap_err();
        assert!(matches!(e, TemplateError::StrayBrace { ch: '}', .. }));
    }

    #[test]
    fn user_input_must_appear_once() {
        let e = PromptTemplate::new(TemplateId::Summary, 1, "no slot", vec![]).unwrap_err();
        assert!(matches!(e, TemplateError::PlaceholderCount { count: 0, .. }));
        let e = PromptTemplate::new(TemplateId::Summary, 1, "{user_input}{user_input}", vec![]).unwrap_err();
        assert!(matches!(e, TemplateError::PlaceholderCount { count: 2, .. }));
    }

    #[test]
    fn builtin_store_loads() {
        let s = PromptStore::builtin();
        for id in TemplateId::ALL {
            assert!(s.get(id).placeholders().contains(&"user_input"));
        }
    }
}
