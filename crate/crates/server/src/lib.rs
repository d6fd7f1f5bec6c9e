//! HTTP/JSON service over the session store.
//!
//! Runs execute on the blocking pool, one at a time per session. Clients poll
//! the report endpoint, which answers 204 while a run is in progress. All
//! state except the set of running sessions lives on disk, so a restarted
//! server serves completed sessions unchanged.

use std::collections::HashMap;
use std::io;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use emsim_workflow::pipeline::{list_fields, load_field, FieldError, Message, Session, SessionError, SessionStore, WorkflowReport};
use emsim_workflow::{RunMode, Workflow, WorkflowConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::CorsLayer;

pub const SCHEMA_VERSION: u32 = 1;

/// Builds the workflow used for a session's run.
pub type WorkflowFactory = Arc<dyn Fn(&WorkflowConfig) -> Workflow + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Idle,
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ApiSession {
    pub schema_version: u32,
    pub id: String,
    pub created_at_ms: u64,
    pub status: SessionStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    /// URL of the latest report, when one exists.
    pub report: Option<String>,
    pub messages: Vec<Message>,
}

pub struct AppState {
    store: SessionStore,
    config: WorkflowConfig,
    workflow: WorkflowFactory,
    /// Session id to run id, for sessions with a run in progress.
    running: Mutex<HashMap<String, String>>,
}

impl AppState {
    pub fn new(root: impl Into<PathBuf>, config: WorkflowConfig) -> Self {
        Self {
            store: SessionStore::new(root),
            config,
            workflow: Arc::new(Workflow::from_config),
            running: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_workflow(mut self, factory: WorkflowFactory) -> Self {
        self.workflow = factory;
        self
    }

    fn run_id(&self, id: &str) -> Option<String> {
        self.running.lock().unwrap().get(id).cloned()
    }
}

/// Removes the running entry when the run ends, even by panic.
struct RunGuard {
    state: Arc<AppState>,
    id: String,
}

impl Drop for RunGuard {
    fn drop(&mut self) {
        self.state.running.lock().unwrap().remove(&self.id);
    }
}

fn error(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    let body = json!({ "schema_version": SCHEMA_VERSION, "error": { "code": code, "message": message.into() } });
    (status, Json(body)).into_response()
}

fn session_error(e: SessionError) -> Response {
    match e {
        SessionError::NotFound(id) => error(StatusCode::NOT_FOUND, "session_not_found", format!("no session '{id}'")),
        SessionError::Io(e) => error(StatusCode::INSUFFICIENT_STORAGE, "storage", e.to_string()),
        e @ SessionError::Corrupt { .. } => error(StatusCode::INTERNAL_SERVER_ERROR, "session_corrupt", e.to_string()),
    }
}


fn read_report(session: &Session) -> io::Result<Option<Vec<u8>>> {
    match std::fs::read(session.report_path()) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

fn describe(state: &AppState, session: &Session) -> ApiSession {
    let run_id = state.run_id(&session.id);
    let report = if run_id.is_some() { None } else { read_report(session).ok().flatten() };
    let status = match (&run_id, &report) {
        (Some(_), _) => SessionStatus::Running,
        (None, None) => SessionStatus::Idle,
        (None, Some(bytes)) => match serde_json::from_slice::<WorkflowReport>(bytes) {
            Ok(r) if r.passed => SessionStatus::Done,
            _ => SessionStatus::Failed,
        },
    };
    ApiSession {
        schema_version: SCHEMA_VERSION,
        id: session.id.clone(),
        created_at_ms: session.created_at_ms,
        status,
        run_id,
        report: report.map(|_| format!("/api/sessions/{}/report", session.id)),
        messages: session.history().to_vec(),
    }
}

async fn create_session(State(state): State<Arc<AppState>>) -> Response {
    match state.store.create(state.config.clone()) {
        Ok(s) => (StatusCode::CREATED, Json(describe(&state, &s))).into_response(),
        Err(e) => error(StatusCode::INSUFFICIENT_STORAGE, "storage", e.to_string()),
    }
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Response {
    match state.store.list() {
        Ok(ids) => Json(json!({ "schema_version": SCHEMA_VERSION, "sessions": ids })).into_response(),
        Err(e) => session_error(e),
    }
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match state.store.open(&id) {
        Ok(s) => Json(describe(&state, &s)).into_response(),
        Err(e) => session_error(e),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageRequest {
    text: String,
    #[serde(default)]
    mode: RunMode,
}

async fn post_message(State(state): State<Arc<AppState>>, Path(id): Path<String>, body: Bytes) -> Response {
    let mut session = match state.store.open(&id) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    let req: MessageRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, "invalid_body", e.to_string()),
    };
    if req.text.trim().is_empty() {
        return error(StatusCode::UNPROCESSABLE_ENTITY, "blank_text", "the prompt text is blank");
    }
    let run_id = uuid::Uuid::new_v4().hyphenated().to_string();
    {
        let mut running = state.running.lock().unwrap();
        if running.contains_key(&id) {
            return error(StatusCode::CONFLICT, "session_busy", format!("session '{id}' already has a run in progress"));
        }
        running.insert(id.clone(), run_id.clone());
    }
    let guard = RunGuard { state: state.clone(), id: id.clone() };
    let workflow = (state.workflow)(&session.config);
    tokio::task::spawn_blocking(move || {
        let _guard = guard;
        workflow.run(&mut session, &req.text, req.mode);
    });
    let body = json!({ "schema_version": SCHEMA_VERSION, "session_id": id, "run_id": run_id });
    (StatusCode::ACCEPTED, Json(body)).into_response()
}

async fn get_report(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let session = match state.store.open(&id) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    if state.run_id(&id).is_some() {
        return StatusCode::NO_CONTENT.into_response();
    }
    match read_report(&session) {
        Ok(Some(bytes)) => ([(header::CONTENT_TYPE, "application/json")], bytes).into_response(),
        Ok(None) => error(StatusCode::NOT_FOUND, "no_report", "this session has no completed run"),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, "storage", e.to_string()),
    }
}

fn field_error(e: FieldError) -> Response {
    match e {
        FieldError::NoData => error(StatusCode::NOT_FOUND, "no_fields", e.to_string()),
        FieldError::UnknownField(_) => error(StatusCode::NOT_FOUND, "unknown_field", e.to_string()),
        FieldError::Corrupt(_) => error(StatusCode::INTERNAL_SERVER_ERROR, "fields_corrupt", e.to_string()),
    }
}

async fn get_fields(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    let session = match state.store.open(&id) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    if state.run_id(&id).is_some() {
        return StatusCode::NO_CONTENT.into_response();
    }
    match list_fields(&session.dir) {
        Ok(names) => Json(json!({ "schema_version": SCHEMA_VERSION, "fields": names })).into_response(),
        Err(e) => field_error(e),
    }
}

async fn get_field(State(state): State<Arc<AppState>>, Path((id, name)): Path<(String, String)>) -> Response {
    let session = match state.store.open(&id) {
        Ok(s) => s,
        Err(e) => return session_error(e),
    };
    if state.run_id(&id).is_some() {
        return StatusCode::NO_CONTENT.into_response();
    }
    match load_field(&session.dir, &name) {
        Ok(p) => Json(p).into_response(),
        Err(e) => field_error(e),
    }
}

async fn not_found() -> Response {
    error(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/messages", post(post_message))
        .route("/api/sessions/{id}/report", get(get_report))
        .route("/api/sessions/{id}/fields", get(get_fields))
        .route("/api/sessions/{id}/fields/{name}", get(get_field))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(Arc::new(state))).await
}

