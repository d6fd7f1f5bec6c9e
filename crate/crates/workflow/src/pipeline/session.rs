//! On-disk sessions: one directory per session holding its configuration,
//! message history and the artifacts of the latest run.

use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{RunMode, WorkflowConfig};
use emsim_core::export::atomic_write;

pub const SESSION_FILE: &str = "session.json";
pub const MESSAGES_FILE: &str = "messages.jsonl";
pub const COMPLETIONS_FILE: &str = "completions.jsonl";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("session '{0}' not found")]
    NotFound(String),
    #[error("session storage error: {0}")]
    Io(#[from] io::Error),
    #[error("session '{id}' is corrupt: {message}")]
    Corrupt { id: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub seq: usize,
    pub text: String,
    pub mode: RunMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SessionFile {
    schema_version: u32,
    id: String,
    /// Unix milliseconds.
    #[serde(default)]
    created_at_ms: u64,
    config: WorkflowConfig,
}

fn now_ms() -> u64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn write_session_file(dir: &Path, file: &SessionFile) -> io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(file).map_err(io::Error::other)?;
    bytes.push(b'\n');
    atomic_write(&dir.join(SESSION_FILE), &bytes)
}

fn read_history(dir: &Path, corrupt: impl Fn(String) -> SessionError) -> Result<Vec<Message>, SessionError> {
    let mut history = Vec::new();
    match fs::File::open(dir.join(MESSAGES_FILE)) {
        Ok(f) => {
            for line in io::BufReader::new(f).lines() {
                let line = line?;
                if !line.trim().is_empty() {
                    history.push(serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?);
                }
            }
        }
        Err(e) if e.kind() == io::ErrorKind::NotFound => {}
        Err(e) => return Err(e.into()),
    }
    Ok(history)
}

#[derive(Debug, Clone)]
pub struct Session {
    pub id: String,
    pub dir: PathBuf,
    pub config: WorkflowConfig,
    pub created_at_ms: u64,
    history: Vec<Message>,
}

impl Session {
    /// Uses `dir` itself as the session directory, resuming the session
    /// already there (history kept, configuration replaced) or starting one.
    pub fn in_dir(dir: impl Into<PathBuf>, config: WorkflowConfig) -> Result<Session, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let existing = match fs::read_to_string(dir.join(SESSION_FILE)) {
            Ok(t) => serde_json::from_str::<SessionFile>(&t).ok(),
            Err(e) if e.kind() == io::ErrorKind::NotFound => None,
            Err(e) => return Err(e.into()),
        };
        let (id, created_at_ms, history) = match existing {
            Some(f) => {
                let id = f.id.clone();
                let history = read_history(&dir, |message| SessionError::Corrupt { id: id.clone(), message })?;
                (f.id, f.created_at_ms, history)
            }
            None => (uuid::Uuid::new_v4().hyphenated().to_string(), now_ms(), Vec::new()),
        };
        write_session_file(&dir, &SessionFile { schema_version: 1, id: id.clone(), created_at_ms, config: config.clone() })?;
        Ok(Session { id, dir, config, created_at_ms, history })
    }

    /// Messages in the order they were received.
    pub fn history(&self) -> &[Message] {
        &self.history
    }

    /// Appends to the in-memory history and to `messages.jsonl`.
    pub fn append_message(&mut self, text: &str, mode: RunMode) -> io::Result<&Message> {
        let m = Message { seq: self.history.len(), text: text.to_string(), mode };
        append_jsonl(&self.dir.join(MESSAGES_FILE), &m)?;
        self.history.push(m);
        Ok(self.history.last().expect("just pushed"))
    }

    pub fn report_path(&self) -> PathBuf {
        self.dir.join(REPORT_FILE)
    }
}

pub(crate) fn append_jsonl<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut line = serde_json::to_string(value).map_err(io::Error::other)?;
    line.push('\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(line.as_bytes())
}

/// Session ids are hyphenated lowercase UUIDs; nothing else is looked up.
pub fn is_valid_session_id(id: &str) -> bool {
    id.len() == 36 && uuid::Uuid::try_parse(id).is_ok_and(|u| u.hyphenated().to_string() == id)
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn create(&self, config: WorkflowConfig) -> Result<Session, SessionError> {
        fs::create_dir_all(&self.root)?;
        let id = uuid::Uuid::new_v4().hyphenated().to_string();
        self.create_with_id(&id, config)
    }

    /// Creates a session under a caller-chosen id (used for reproducible runs).
    pub fn create_with_id(&self, id: &str, config: WorkflowConfig) -> Result<Session, SessionError> {
        let dir = self.root.join(id);
        fs::create_dir_all(&dir)?;
        let created_at_ms = now_ms();
        write_session_file(&dir, &SessionFile { schema_version: 1, id: id.to_string(), created_at_ms, config: config.clone() })?;
        Ok(Session { id: id.to_string(), dir, config, created_at_ms, history: Vec::new() })
    }

    pub fn open(&self, id: &str) -> Result<Session, SessionError> {
        if !is_valid_session_id(id) {
            return Err(SessionError::NotFound(id.to_string()));
        }
        let dir = self.root.join(id);
        let text = match fs::read_to_string(dir.join(SESSION_FILE)) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(SessionError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |message: String| SessionError::Corrupt { id: id.to_string(), message };
        let file: SessionFile = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        let history = read_history(&dir, corrupt)?;
        Ok(Session { id: file.id, dir, config: file.config, created_at_ms: file.created_at_ms, history })
    }

    /// Ids of all sessions on disk, sorted.
    pub fn list(&self) -> Result<Vec<String>, SessionError> {
        let mut ids = Vec::new();
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(ids),
            Err(e) => return Err(e.into()),
        };
        for e in entries {
            let e = e?;
            let name = e.file_name().to_string_lossy().into_owned();
            if is_valid_session_id(&name) && e.path().join(SESSION_FILE).is_file() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }
}
