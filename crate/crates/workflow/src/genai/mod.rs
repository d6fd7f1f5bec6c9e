//! LLM gateway: prompt templates, completion providers, output cleaning and
//! the second-stage summary.

mod provider;
mod summary;
mod template;

pub use provider::{
    build_prompt, builtin_fixtures, complete, fingerprint, provider_from_config, Completer, CompletionRecord,
    FixtureError, HttpProvider, Prompt, ProviderConfig, ProviderError, ProviderKind, StubFixture, StubProvider,
    Transport, TransportError, UreqTransport, DEFAULT_API_KEY_ENV,
};
pub use summary::{check_summary_semantics, check_summary_syntax, render_stub_summary, summarize};
pub use template::{render_prompt, PromptStore, PromptTemplate, TemplateError, TemplateId};

fn is_fence(line: &str) -> bool {
    let t = line.trim_start();
    t.starts_with("```") || t.starts_with("~~~")
}

/// Removes markdown fence lines (with any language tag) and leading or
/// trailing whitespace-only lines. Everything else is kept verbatim.
pub fn clean_output(raw: &str) -> String {
    let lines: Vec<&str> = raw.split('\n').filter(|l| !is_fence(l)).collect();
    let blank = |l: &&str| l.trim().is_empty();
    let start = lines.iter().position(|l| !blank(l)).unwrap_or(lines.len());
    let end = lines.iter().rposition(|l| !blank(l)).map_or(start, |i| i + 1);
    lines[start..end].join("\n")
}

/// Splits a combined stage-one answer into the layout script and the
/// post-processing program, at the first line opening a `PostProcessing` or
/// `PostOperation` block.
pub fn split_stage_output(text: &str) -> (String, Option<String>) {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim_start();
        if t.starts_with("PostProcessing") || t.starts_with("PostOperation") {
            let layout = text[..offset].trim_end().to_string();
            return (layout, Some(text[offset..].to_string()));
        }
        offset += line.len();
    }
    (text.to_string(), None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fences_and_edges() {
        assert_eq!(clean_output("```\nemit point(0,0)\n```"), "emit point(0,0)");
        assert_eq!(clean_output("```text\n\nlet a = 1\n  \nemit point(a,0)\n```\n\n"), "let a = 1\n  \nemit point(a,0)");
        assert_eq!(clean_output("~~~ rust\nx\n~~~"), "x");
        let plain = "let r = 0.03\nemit point(r, 0)";
        assert_eq!(clean_output(plain), plain);
        assert_eq!(clean_output(""), "");
        assert_eq!(clean_output("\n \n"), "");
    }

    #[test]
    fn split_at_post_block() {
        let (l, p) = split_stage_output("emit point(0,0)\n\nPostProcessing {\n}\n");
        assert_eq!(l, "emit point(0,0)");
        assert_eq!(p.unwrap(), "PostProcessing {\n}\n");
        let (l, p) = split_stage_output("emit point(0,0)");
        assert_eq!((l.as_str(), p), ("emit point(0,0)", None));
        let (l, p) = split_stage_output("  PostOperation { }");
        assert_eq!((l.as_str(), p.as_deref()), ("", Some("  PostOperation { }")));
    }
}
