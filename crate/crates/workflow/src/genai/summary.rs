//! Second-stage summary: rendering, offline template and spell-level checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::provider::{fingerprint, Completer, CompletionRecord, Prompt, ProviderError, ProviderKind};
use super::template::{render_prompt, PromptStore, TemplateId};
use crate::pipeline::facts::{fmt_dec, FactSheet, SkinRegime};
use crate::pipeline::verdict::Finding;

fn sci(x: f64) -> String {
    format!("{x:.4e}")
}

/// Deterministic summary built only from the fact sheet.
pub fn render_stub_summary(facts: &FactSheet) -> String {
    let n = facts.conductor_count;
    let r_mm = fmt_dec(facts.radius_m * 1e3, 3);
    let mut s = String::new();
    if n == 1 {
        let c = facts.conductors.first().map(|c| c.center).unwrap_or([0.0, 0.0]);
        let _ = write!(
            s,
            "The model contains a single conductor of radius {r_mm} mm centered at ({}, {}) m.",
            fmt_dec(c[0], 4),
            fmt_dec(c[1], 4)
        );
    } else {
        let _ = write!(s, "The model contains {n} conductors of radius {r_mm} mm (layout: {}).", facts.layout_descriptor);
        if n <= 12 {
            let list: Vec<String> = facts
                .conductors
                .iter()
                .map(|c| format!("({}, {})", fmt_dec(c.center[0], 4), fmt_dec(c.center[1], 4)))
                .collect();
            let _ = write!(s, " Their centers in meters are {}.", list.join(", "));
        }
    }
    let i = fmt_dec(facts.current_amplitude_a, 4);
    let each = if n == 1 { "It carries" } else { "Each conductor carries" };
    match facts.skin_regime {
        SkinRegime::Dc => {
            let _ = write!(
                s,
                " {each} a direct current of {i} A, so there is no skin effect and the current density is uniform over each cross-section."
            );
        }
        regime => {
            let d = fmt_dec(facts.skin_depth_m.unwrap_or(0.0) * 1e3, 2);
            let _ = write!(s, " {each} a current of amplitude {i} A at {} Hz.", fmt_dec(facts.frequency_hz, 3));
            if regime == SkinRegime::NearUniform {
                let _ = write!(
                    s,
                    " The skin depth of {d} mm exceeds the radius, so the skin effect is weak and the conductors show a near-uniform current distribution."
                );
            } else {
                let _ = write!(
                    s,
                    " The skin depth of {d} mm does not exceed the radius, so the skin effect concentrates the current near the conductor surface."
                );
            }
        }
    }
    if facts.proximity_effect {
        let _ = write!(
            s,
            " Neighboring conductors also induce eddy currents in one another, and this proximity effect shifts the current density away from a symmetric profile."
        );
    }
    let _ = write!(s, " The total ohmic loss is {} W/m", sci(facts.total_loss_w_per_m));
    if n > 1 && n <= 12 {
        let per: Vec<String> =
            facts.conductors.iter().map(|c| format!("conductor {}: {} W/m", c.index + 1, sci(c.loss_w_per_m))).collect();
        let _ = write!(s, " ({})", per.join("; "));
    } else if n > 12 {
        let (lo, hi) = facts.conductors.iter().fold((f64::MAX, f64::MIN), |(a, b), c| {
            (a.min(c.loss_w_per_m), b.max(c.loss_w_per_m))
        });
        let _ = write!(s, ", with per-conductor values between {} and {} W/m", sci(lo), sci(hi));
    }
    s.push('.');
    let _ = write!(s, " The stored magnetic energy is {} J/m.", sci(facts.magnetic_energy_j_per_m));
    for a in &facts.artifacts {
        let _ = write!(s, " The quantity {} was evaluated on {} and written to {}.", a.quantity, a.regions.join(", "), a.files.join(" and "));
    }
    s
}

/// Runs the summary stage. The stub answers with [`render_stub_summary`];
/// other providers receive the rendered summary prompt.
pub fn summarize(
    provider: &dyn Completer,
    store: &PromptStore,
    user_input: &str,
    facts: &FactSheet,
    first_stage: &CompletionRecord,
) -> Result<CompletionRecord, ProviderError> {
    let facts_json = serde_json::to_string_pretty(facts).expect("fact sheet serializes");
    let mut ctx = BTreeMap::new();
    ctx.insert("stage_output".to_string(), first_stage.cleaned_response.clone());
    ctx.insert("facts".to_string(), facts_json);
    let text = render_prompt(store.get(TemplateId::Summary), user_input, &ctx)
        .map_err(|e| ProviderError::ProviderUnavailable { message: e.to_string() })?;
    let prompt = Prompt { template: TemplateId::Summary, user_input: user_input.trim().to_string(), text };
    if provider.kind() == ProviderKind::Stub {
        let body = render_stub_summary(facts);
        return Ok(CompletionRecord {
            template: TemplateId::Summary,
            fingerprint: fingerprint(TemplateId::Summary, user_input),
            prompt: prompt.text,
            raw_response: body.clone(),
            cleaned_response: body,
            provider: ProviderKind::Stub,
            model: None,
            attempts: 1,
            latency_ms: None,
            timestamp_ms: None,
        });
    }
    provider.complete(&prompt)
}

/// Spell-level checks on summary text.
pub fn check_summary_syntax(text: &str) -> Vec<Finding> {
    let mut out = Vec::new();
    let t = text.trim();
    if t.is_empty() {
        out.push(Finding::error("empty-summary", "the summary is empty"));
        return out;
    }
    if t.lines().any(|l| l.trim_start().starts_with("```") || l.trim_start().starts_with("~~~")) {
        out.push(Finding::error("markdown-fence", "the summary contains a markdown code fence"));
    }
    let bytes = t.as_bytes();
    for (i, _) in t.match_indices('{') {
        let len = bytes[i + 1..].iter().take_while(|b| b.is_ascii_lowercase() || **b == b'_').count();
        if len > 0 && bytes.get(i + 1 + len) == Some(&b'}') {
            out.push(Finding::error("template-placeholder", format!("unfilled placeholder {}", &t[i..i + len + 2])));
        }
    }
    for (open, close) in [('(', ')'), ('[', ']')] {
        let mut depth = 0i64;
        let mut bad = false;
        for ch in t.chars() {
            if ch == open {
                depth += 1;
            } else if ch == close {
                depth -= 1;
                bad |= depth < 0;
            }
        }
        if bad || depth != 0 {
            out.push(Finding::error("unbalanced-brackets", format!("unbalanced '{open}{close}' in the summary")));
        }
    }
    if !t.ends_with(['.', '!', '?']) {
        out.push(Finding::error("no-terminal-punctuation", "the summary does not end with a sentence terminator"));
    }
    let words: Vec<String> = t
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .collect();
    for w in words.windows(2) {
        if !w[0].is_empty() && w[0].chars().all(char::is_alphabetic) && w[0] == w[1] {
            out.push(Finding::error("repeated-word", format!("repeated word '{}'", w[0])));
        }
    }
    out
}

fn number_word(w: &str) -> Option<usize> {
    const WORDS: [&str; 21] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve",
        "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty",
    ];
    w.parse().ok().or_else(|| WORDS.iter().position(|x| *x == w))
}

/// Contradictions between the summary and the fact sheet that can be found
/// mechanically: conductor counts and conductor indices.
pub fn check_summary_semantics(text: &str, facts: &FactSheet) -> Vec<Finding> {
    let n = facts.conductor_count;
    let words: Vec<String> = text
        .split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .collect();
    let mut out = Vec::new();
    for (k, w) in words.iter().enumerate() {
        let next = words.get(k + 1).map(String::as_str);
        if next == Some("conductors") {
            if let Some(c) = number_word(w) {
                if c != n {
                    out.push(Finding::error(
                        "conductor-count",
                        format!("the summary mentions {c} conductors but the model has {n}"),
                    ));
                }
            }
        }
        if w == "conductor" {
            if let Some(i) = next.and_then(|x| x.parse::<usize>().ok()) {
                if i == 0 || i > n {
                    out.push(Finding::error(
                        "conductor-index",
                        format!("the summary refers to conductor {i} but the model has {n} conductor(s)"),
                    ));
                }
            }
        }
    }
    out
}
