//! Completion providers: a deterministic offline stub and a chat-completion
//! HTTP client.

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::clean_output;
use super::template::{PromptStore, TemplateId};

pub const DEFAULT_API_KEY_ENV: &str = "EMSIM_LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Http,
    #[default]
    Stub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Chat-completion endpoint, e.g. `https://host/v1/chat/completions`.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: String,
    pub timeout_s: f64,
    pub max_retries: u32,
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            kind: ProviderKind::Stub,
            endpoint: None,
            model: None,
            api_key_env: DEFAULT_API_KEY_ENV.into(),
            timeout_s: 60.0,
            max_retries: 2,
        }
    }
}

/// A rendered prompt together with the user text it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub template: TemplateId,
    pub user_input: String,
    pub text: String,
}

impl Prompt {
    pub fn fingerprint(&self) -> String {
        fingerprint(self.template, &self.user_input)
    }
}

/// Hex SHA-256 over the template id and the trimmed user input.
pub fn fingerprint(template: TemplateId, user_input: &str) -> String {
    let mut h = Sha256::new();
    h.update(template.as_str().as_bytes());
    h.update(b"\n");
    h.update(user_input.trim().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub template: TemplateId,
    pub fingerprint: String,
    pub prompt: String,
    pub raw_response: String,
    pub cleaned_response: String,
    pub provider: ProviderKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    /// Total attempts, including the successful one.
    pub attempts: u32,
    /// Wall time; absent for the stub, whose answers are instantaneous.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub latency_ms: Option<u64>,
    /// Milliseconds since the Unix epoch; absent for the stub.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("provider unavailable: {message}")]
    ProviderUnavailable { message: String },
    #[error("provider timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("API key environment variable {var} is not set")]
    AuthMissing { var: String },
}

pub trait Completer: Send + Sync {
    fn kind(&self) -> ProviderKind;
    fn complete(&self, prompt: &Prompt) -> Result<CompletionRecord, ProviderError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("timed out")]
    Timeout,
    #[error("connection failed: {0}")]
    Connect(String),
    #[error("HTTP status {code}: {body}")]
    Status { code: u16, body: String },
    #[error("malformed response: {0}")]
    Decode(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Connect(_) => true,
            TransportError::Status { code, .. } => *code == 429 || *code >= 500,
            TransportError::Decode(_) => false,
        }
    }
}

/// Posts a JSON body with a bearer token and returns the JSON reply.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<Value, TransportError>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct UreqTransport;

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: &str, body: &Value, timeout: Duration) -> Result<Value, TransportError> {
        let agent: ureq::Agent =
            ureq::Agent::config_builder().timeout_global(Some(timeout)).http_status_as_error(false).build().into();
        let mut resp = agent
            .post(url)
            .header("Authorization", &format!("Bearer {bearer}"))
            .send_json(body)
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => TransportError::Timeout,
                other => TransportError::Connect(other.to_string()),
            })?;
        let code = resp.status().as_u16();
        if !(200..300).contains(&code) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(TransportError::Status { code, body: body.chars().take(500).collect() });
        }
        resp.body_mut().read_json::<Value>().map_err(|e| TransportError::Decode(e.to_string()))
    }
}

/// Chat-completion client: one system message carrying the rendered prompt
/// and one user message carrying the raw request.
pub struct HttpProvider {
    config: ProviderConfig,
    transport: Arc<dyn Transport>,
}

impl HttpProvider {
    pub fn new(config: ProviderConfig, transport: Arc<dyn Transport>) -> Self {
        Self { config, transport }
    }

    fn api_key(&self) -> Result<String, ProviderError> {
        match std::env::var(&self.config.api_key_env) {
            Ok(k) if !k.trim().is_empty() => Ok(k),
            _ => Err(ProviderError::AuthMissing { var: self.config.api_key_env.clone() }),
        }
    }
}

fn response_text(v: &Value) -> Option<String> {
    v.pointer("/choices/0/message/content").and_then(Value::as_str).map(str::to_string)
}

impl Completer for HttpProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Http
    }

    fn complete(&self, prompt: &Prompt) -> Result<CompletionRecord, ProviderError> {
        let key = self.api_key()?;
        let endpoint = self.config.endpoint.as_deref().ok_or_else(|| ProviderError::ProviderUnavailable {
            message: "no endpoint configured".into(),
        })?;
        let mut body = json!({
            "messages": [
                { "role": "system", "content": prompt.text },
                { "role": "user", "content": prompt.user_input },
            ]
        });
        if let Some(m) = &self.config.model {
            body["model"] = json!(m);
        }
        let timeout = Duration::from_secs_f64(self.config.timeout_s.max(0.001));
        let start = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.transport.post_json(endpoint, &key, &body, timeout) {
                Ok(v) => {
                    let raw = response_text(&v).ok_or_else(|| ProviderError::ProviderUnavailable {
                        message: "response has no choices[0].message.content".into(),
                    })?;
                    let now = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).ok();
                    return Ok(CompletionRecord {
                        template: prompt.template,
                        fingerprint: prompt.fingerprint(),
                        prompt: prompt.text.clone(),
                        cleaned_response: clean_output(&raw),
                        raw_response: raw,
                        provider: ProviderKind::Http,
                        model: self.config.model.clone(),
                        attempts,
                        latency_ms: Some(start.elapsed().as_millis() as u64),
                        timestamp_ms: now,
                    });
                }
                Err(e) if e.retryable() && attempts <= self.config.max_retries => continue,
                Err(TransportError::Timeout) => return Err(ProviderError::Timeout { attempts }),
                Err(e) => return Err(ProviderError::ProviderUnavailable { message: e.to_string() }),
            }
        }
    }
}

/// A canned answer for one (template, user input) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubFixture {
    pub name: String,
    pub templates: Vec<TemplateId>,
    pub input: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("stub fixture {name}: {message}")]
pub struct FixtureError {
    pub name: String,
    pub message: String,
}

impl StubFixture {
    /// Parses `template: a, b` / `input: ...` header lines, a `---`
    /// separator, and the verbatim response.
    pub fn parse(name: &str, text: &str) -> Result<Self, FixtureError> {
        let err = |m: &str| FixtureError { name: name.into(), message: m.into() };
        let (head, response) = text.split_once("\n---\n").ok_or_else(|| err("missing '---' separator"))?;
        let (mut templates, mut input) = (Vec::new(), None);
        for line in head.lines() {
            match line.split_once(':') {
                Some(("template", v)) => {
                    for t in v.split(',') {
                        let id = serde_json::from_value(Value::String(t.trim().into()))
                            .map_err(|_| err(&format!("unknown template '{}'", t.trim())))?;
                        templates.push(id);
                    }
                }
                Some(("input", v)) => input = Some(v.trim().to_string()),
                _ => return Err(err(&format!("unexpected header line '{line}'"))),
            }
        }
        if templates.is_empty() {
            return Err(err("no template"));
        }
        let input = input.ok_or_else(|| err("no input"))?;
        Ok(Self { name: name.into(), templates, input, response: response.to_string() })
    }
}

macro_rules! fixtures {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../assets/stub/", $name, ".txt")))),*]
    };
}

const BUILTIN_FIXTURES: &[(&str, &str)] = fixtures![
    "single_conductor",
    "minimal_points",
    "circle_12",
    "y_axis_10",
    "hex_grid_100",
    "sine_curve_12",
    "square_5",
    "letter_a_15",
    "overlap_3",
    "unclosed_loop",
    "zero_gap",
    "empty_layout",
    "parabola_7_loss",
    "rectangle_9_energy",
    "circle_10_summary",
    "three_loss_first",
    "three_loss_first_unbalanced",
    "three_flux_density",
    "three_potential_plus_curl",
    "three_energy_half",
];

pub fn builtin_fixtures() -> Vec<StubFixture> {
    BUILTIN_FIXTURES.iter().map(|(n, t)| StubFixture::parse(n, t).expect("bundled fixture is well formed")).collect()
}

/// Offline provider answering from fixtures keyed by prompt fingerprint.
#[derive(Debug, Clone, Default)]
pub struct StubProvider {
    responses: HashMap<String, String>,
}

impl StubProvider {
    pub fn builtin() -> Self {
        Self::from_fixtures(builtin_fixtures())
    }

    pub fn from_fixtures(fixtures: impl IntoIterator<Item = StubFixture>) -> Self {
        let mut responses = HashMap::new();
        for f in fixtures {
            for t in &f.templates {
                responses.insert(fingerprint(*t, &f.input), f.response.clone());
            }
        }
        Self { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Completer for StubProvider {
    fn kind(&self) -> ProviderKind {
        ProviderKind::Stub
    }

    fn complete(&self, prompt: &Prompt) -> Result<CompletionRecord, ProviderError> {
        let fp = prompt.fingerprint();
        let raw = self.responses.get(&fp).ok_or_else(|| ProviderError::ProviderUnavailable {
            message: format!("the stub has no answer for this {} request (fingerprint {})", prompt.template, &fp[..16]),
        })?;
        Ok(CompletionRecord {
            template: prompt.template,
            fingerprint: fp,
            prompt: prompt.text.clone(),
            raw_response: raw.clone(),
            cleaned_response: clean_output(raw),
            provider: ProviderKind::Stub,
            model: None,
            attempts: 1,
            latency_ms: None,
            timestamp_ms: None,
        })
    }
}

/// Builds the provider selected by `config`.
pub fn provider_from_config(config: &ProviderConfig) -> Arc<dyn Completer> {
    match config.kind {
        ProviderKind::Stub => Arc::new(StubProvider::builtin()),
        ProviderKind::Http => Arc::new(HttpProvider::new(config.clone(), Arc::new(UreqTransport))),
    }
}

/// Renders nothing; sends `prompt` through the provider named by `config`.
pub fn complete(config: &ProviderConfig, prompt: &Prompt) -> Result<CompletionRecord, ProviderError> {
    provider_from_config(config).complete(prompt)
}

/// Renders `template` for `user_input` with the given context.
pub fn build_prompt(
    store: &PromptStore,
    template: TemplateId,
    user_input: &str,
    context: &std::collections::BTreeMap<String, String>,
) -> Result<Prompt, super::TemplateError> {
    let text = super::render_prompt(store.get(template), user_input, context)?;
    Ok(Prompt { template, user_input: user_input.trim().to_string(), text })
}
