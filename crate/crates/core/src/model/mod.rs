//! Shared domain types and the JSONL record schemas consumed by every stage.
//!
//! Input arrives as line-delimited JSON, one record per line. Records that fail
//! to parse are routed to a reject stream by the caller; parsing never panics.

mod conversation;
mod notebook;
mod qa;
mod sentinel;

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use conversation::{
    Action, BaseFile, Conversation, DiffKind, Event, FileDiff, HeadCommit, Hunk, PrComment,
    PrReview, PullRequest, ReviewComment, ReviewState, StatusEvent, StatusKind, TimelineItem,
};
pub use notebook::{Cell, CellKind, KaggleMeta, Notebook, ParsedNotebook, SchemaBlock};
pub use qa::{Answer, IrPair, ScoredQa};
pub use sentinel::{sentinel, Sentinel, UnknownRole};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("malformed record: {0}")]
    Malformed(String),
    #[error("record is not valid UTF-8 (byte offset {0})")]
    InvalidUtf8(usize),
}

impl RecordError {
    pub fn reason(&self) -> &'static str {
        match self {
            RecordError::Malformed(_) => "malformed_record",
            RecordError::InvalidUtf8(_) => "invalid_utf8",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LicenseState {
    Permissive,
    NonPermissive,
    NoLicense,
    #[default]
    Undetermined,
}

/// Hex-encoded SHA-256 of the given bytes.
pub fn content_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content id of a structured record, computed over its canonical JSON encoding.
pub fn record_content_id<T: Serialize>(record: &T) -> String {
    let bytes = serde_json::to_vec(record).expect("records serialize to JSON");
    content_id(&bytes)
}

/// One file of a repository snapshot with its provenance and license state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFile {
    pub repo_name: String,
    pub path: String,
    pub content: String,
    pub size_bytes: u64,
    pub language: Option<String>,
    pub extension: String,
    pub license_state: LicenseState,
    pub detected_spdx: Vec<String>,
    pub repo_license_spdx: Option<String>,
    pub stars: u64,
    pub forks: u64,
    pub latest_commit_ts: i64,
    /// Generated-code verdict supplied by an upstream classifier, if any.
    #[serde(default)]
    pub is_generated: bool,
    pub content_id: String,
}

#[derive(Deserialize)]
struct RawSourceRecord {
    repo_name: String,
    path: String,
    content: String,
    #[serde(default)]
    language: Option<String>,
    #[serde(default)]
    extension: Option<String>,
    #[serde(default)]
    license_state: Option<LicenseState>,
    #[serde(default)]
    detected_spdx: Vec<String>,
    #[serde(default)]
    repo_license_spdx: Option<String>,
    #[serde(default)]
    stars: u64,
    #[serde(default)]
    forks: u64,
    #[serde(default)]
    latest_commit_ts: i64,
    #[serde(default)]
    is_generated: bool,
    // Derived fields are accepted so serialized files parse back, then recomputed.
    #[serde(default)]
    #[allow(dead_code)]
    size_bytes: Option<u64>,
    #[serde(default)]
    #[allow(dead_code)]
    content_id: Option<String>,
}

impl SourceFile {
    /// Builds a file with every optional field defaulted.
    pub fn new(repo_name: impl Into<String>, path: impl Into<String>, content: impl Into<String>) -> Self {
        let path = path.into();
        let content = content.into();
        SourceFile {
            repo_name: repo_name.into(),
            extension: extension_of(&path),
            size_bytes: content.len() as u64,
            content_id: content_id(content.as_bytes()),
            path,
            content,
            language: None,
            license_state: LicenseState::Undetermined,
            detected_spdx: Vec::new(),
            repo_license_spdx: None,
            stars: 0,
            forks: 0,
            latest_commit_ts: 0,
            is_generated: false,
        }
    }

    pub fn with_language(mut self, language: impl Into<String>) -> Self {
        self.language = Some(language.into());
        self
    }

    /// Replaces the content, keeping `size_bytes` and `content_id` consistent.
    pub fn set_content(&mut self, content: String) {
        self.size_bytes = content.len() as u64;
        self.content_id = content_id(content.as_bytes());
        self.content = content;
    }

    /// Final path component.
    pub fn file_name(&self) -> &str {
        file_name_of(&self.path)
    }

    pub fn language(&self) -> &str {
        self.language.as_deref().unwrap_or("")
    }
}

pub fn file_name_of(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

/// Extension of the final path component without the dot; empty when absent.
pub fn extension_of(path: &str) -> String {
    Path::new(file_name_of(path))
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_string()
}

fn object_of(raw: &Value) -> Result<&serde_json::Map<String, Value>, RecordError> {
    raw.as_object()
        .ok_or_else(|| RecordError::Malformed("record is not a JSON object".into()))
}

pub fn parse_source_record(raw: &Value) -> Result<SourceFile, RecordError> {
    let obj = object_of(raw)?;
    for field in ["repo_name", "path", "content"] {
        match obj.get(field) {
            None | Some(Value::Null) => {
                return Err(RecordError::Malformed(format!("missing field `{field}`")))
            }
            Some(Value::String(_)) => {}
            Some(_) => return Err(RecordError::Malformed(format!("field `{field}` is not text"))),
        }
    }
    let rec: RawSourceRecord =
        serde_json::from_value(raw.clone()).map_err(|e| RecordError::Malformed(e.to_string()))?;
    if rec.repo_name.is_empty() {
        return Err(RecordError::Malformed("empty repo_name".into()));
    }
    if rec.path.is_empty() {
        return Err(RecordError::Malformed("empty path".into()));
    }
    let mut file = SourceFile::new(rec.repo_name, rec.path, rec.content);
    if let Some(ext) = rec.extension {
        file.extension = ext;
    }
    file.language = rec.language.filter(|l| !l.is_empty());
    file.license_state = rec.license_state.unwrap_or_default();
    file.detected_spdx = rec.detected_spdx;
    file.repo_license_spdx = rec.repo_license_spdx.filter(|l| !l.is_empty());
    file.stars = rec.stars;
    file.forks = rec.forks;
    file.latest_commit_ts = rec.latest_commit_ts;
    file.is_generated = rec.is_generated;
    Ok(file)
}

/// Decodes one JSONL line into a JSON value, rejecting invalid UTF-8 up front.
pub fn parse_json_line(line: &[u8]) -> Result<Value, RecordError> {
    let text = std::str::from_utf8(line).map_err(|e| RecordError::InvalidUtf8(e.valid_up_to()))?;
    serde_json::from_str(text).map_err(|e| RecordError::Malformed(e.to_string()))
}

pub fn parse_source_line(line: &[u8]) -> Result<SourceFile, RecordError> {
    parse_source_record(&parse_json_line(line)?)
}

/// Generic typed record parse used by the structured record kinds.
pub(crate) fn parse_typed<T: DeserializeOwned>(raw: &Value) -> Result<T, RecordError> {
    object_of(raw)?;
    serde_json::from_value(raw.clone()).map_err(|e| RecordError::Malformed(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    CodeRepo,
    Pr,
    Issue,
    JupyterScript,
    JupyterStructured,
    KaggleScript,
    KaggleStructured,
    Stackexchange,
    IrPair,
}

impl SourceKind {
    pub const ALL: [SourceKind; 9] = [
        SourceKind::CodeRepo,
        SourceKind::Pr,
        SourceKind::Issue,
        SourceKind::JupyterScript,
        SourceKind::JupyterStructured,
        SourceKind::KaggleScript,
        SourceKind::KaggleStructured,
        SourceKind::Stackexchange,
        SourceKind::IrPair,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::CodeRepo => "code_repo",
            SourceKind::Pr => "pr",
            SourceKind::Issue => "issue",
            SourceKind::JupyterScript => "jupyter_script",
            SourceKind::JupyterStructured => "jupyter_structured",
            SourceKind::KaggleScript => "kaggle_script",
            SourceKind::KaggleStructured => "kaggle_structured",
            SourceKind::Stackexchange => "stackexchange",
            SourceKind::IrPair => "ir_pair",
        }
    }
}

impl std::str::FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown source kind `{s}`"))
    }
}

/// Final rendered training text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingDocument {
    pub text: String,
    pub source_kind: SourceKind,
    pub provenance_ids: Vec<String>,
    pub fim_applied: bool,
    pub seed_used: u64,
}
