//! Final document rendering for every source kind.

mod conversation;
mod ir;
mod notebook;
mod pr;
mod repo;

use std::sync::LazyLock;

use aho_corasick::{AhoCorasick, MatchKind};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Sentinel, SourceKind, TrainingDocument};
use crate::rng::{derive_seed, ChoiceRng};

pub use conversation::{render_issue, render_stackexchange};
pub use ir::render_ir_pair;
pub use notebook::{render_notebook, NotebookForm};
pub use pr::{render_pr, unified_hunks};
pub use repo::{fim_split, fim_transform, render_repo, split_chunks, undo_fim, Chunk, FimSplit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub p_repo_meta: f64,
    pub p_fim_repo: f64,
    pub p_fim_chunk: f64,
    pub p_pr_full_base: f64,
    pub pr_context_pad_max: usize,
    pub hunk_context_min: usize,
    pub hunk_context_max: usize,
    pub p_ir_size_opt: f64,
    pub p_ir_direction_code_first: f64,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            p_repo_meta: 0.5,
            p_fim_repo: 0.5,
            p_fim_chunk: 0.5,
            p_pr_full_base: 0.2,
            pr_context_pad_max: 32,
            hunk_context_min: 3,
            hunk_context_max: 10,
            p_ir_size_opt: 0.8,
            p_ir_direction_code_first: 0.5,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), String> {
        let probs = [
            ("p_repo_meta", self.p_repo_meta),
            ("p_fim_repo", self.p_fim_repo),
            ("p_fim_chunk", self.p_fim_chunk),
            ("p_pr_full_base", self.p_pr_full_base),
            ("p_ir_size_opt", self.p_ir_size_opt),
            ("p_ir_direction_code_first", self.p_ir_direction_code_first),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must be within [0, 1], got {p}"));
            }
        }
        if self.hunk_context_min > self.hunk_context_max {
            return Err("hunk_context_min exceeds hunk_context_max".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RenderError {
    #[error("cannot render a repository with no files")]
    EmptyFileList,
    #[error("{field} contains the reserved token {token}")]
    SentinelCollision { field: &'static str, token: &'static str },
}

impl RenderError {
    pub fn reason(&self) -> &'static str {
        match self {
            RenderError::EmptyFileList => "empty_file_list",
            RenderError::SentinelCollision { .. } => "sentinel_collision",
        }
    }
}

static SENTINEL_AC: LazyLock<AhoCorasick> =
    LazyLock::new(|| {
    AhoCorasick::builder()
        .match_kind(MatchKind::LeftmostLongest)
        .build(Sentinel::ALL.iter().map(|s| s.as_str()))
        .unwrap()
});

/// First reserved token literal found in `text`.
pub fn find_sentinel(text: &str) -> Option<Sentinel> {
    SENTINEL_AC.find(text).map(|m| Sentinel::ALL[m.pattern().as_usize()])
}

pub(crate) fn guard(field: &'static str, text: &str) -> Result<(), RenderError> {
    match find_sentinel(text) {
        Some(s) => Err(RenderError::SentinelCollision { field, token: s.as_str() }),
        None => Ok(()),
    }
}

/// Per-document generator; `seed_used` alone reproduces the stream.
pub(crate) fn doc_rng(run_seed: u64, doc_id: &str, kind: SourceKind) -> (u64, ChoiceRng) {
    let seed = derive_seed(run_seed, doc_id, kind.as_str());
    (seed, ChoiceRng::seed_from_u64(seed))
}

pub(crate) fn document(text: String, kind: SourceKind, ids: Vec<String>, seed: u64) -> TrainingDocument {
    TrainingDocument { text, source_kind: kind, provenance_ids: ids, fim_applied: false, seed_used: seed }
}

pub(crate) const EOS: &str = Sentinel::EndOfText.as_str();
