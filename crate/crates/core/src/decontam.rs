//! Benchmark decontamination by whitespace-insensitive substring matching.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeedleKind {
    Docstring,
    Solution,
    Question,
    Prompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Needle {
    pub benchmark: String,
    pub kind: NeedleKind,
    pub normalized_text: String,
}

#[derive(Debug, Error)]
pub enum NeedleError {
    #[error("needle line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("needle line {line} is empty after whitespace removal")]
    Empty { line: usize },
    #[error("reading needles: {0}")]
    Io(#[from] std::io::Error),
}

/// Removes every Unicode whitespace character.
pub fn normalize(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNeedle {
    benchmark: String,
    kind: NeedleKind,
    text: String,
}

/// Immutable needle collection with a prebuilt multi-pattern automaton.
#[derive(Debug, Clone)]
pub struct NeedleSet {
    entries: Vec<Needle>,
    /// Distinct normalized texts; automaton pattern i is `patterns[i]`.
    patterns: Vec<Vec<usize>>,
    automaton: Option<AhoCorasick>,
    /// Entries dropped at load time for being shorter than the minimum length.
    pub short_dropped: usize,
}

impl NeedleSet {
    pub fn new(entries: Vec<Needle>) -> Self {
        let mut by_text: HashMap<&str, usize> = HashMap::new();
        let mut texts: Vec<&str> = Vec::new();
        let mut patterns: Vec<Vec<usize>> = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let slot = *by_text.entry(e.normalized_text.as_str()).or_insert_with(|| {
                texts.push(&e.normalized_text);
                patterns.push(Vec::new());
                texts.len() - 1
            });
            patterns[slot].push(i);
        }
        let automaton = (!texts.is_empty()).then(|| {
            AhoCorasick::builder()
                .match_kind(MatchKind::Standard)
                .build(&texts)
                .expect("needle automaton builds")
        });
        NeedleSet { entries, patterns, automaton, short_dropped: 0 }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Needle] {
        &self.entries
    }

    /// Parses needle JSONL (`{benchmark, kind, text}` per line). Entries whose
    /// normalized text is shorter than `min_len` characters are skipped and
    /// counted in `short_dropped`.
    pub fn parse<R: BufRead>(reader: R, min_len: usize) -> Result<Self, NeedleError> {
        let mut entries = Vec::new();
        let mut short = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawNeedle = serde_json::from_str(&line)
                .map_err(|e| NeedleError::Malformed { line: idx + 1, message: e.to_string() })?;
            let normalized_text = normalize(&raw.text);
            if normalized_text.is_empty() {
                return Err(NeedleError::Empty { line: idx + 1 });
            }
            if normalized_text.chars().count() < min_len {
                short += 1;
                continue;
            }
            entries.push(Needle { benchmark: raw.benchmark, kind: raw.kind, normalized_text });
        }
        let mut set = Self::new(entries);
        set.short_dropped = short;
        Ok(set)
    }

    pub fn load(path: &Path, min_len: usize) -> Result<Self, NeedleError> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file), min_len)
    }

    /// Entries whose normalized text occurs in the normalized content, in
    /// entry order.
    pub fn find_contamination(&self, content: &str) -> Vec<&Needle> {
        let Some(ac) = &self.automaton else { return Vec::new() };
        let haystack = normalize(content);
        let mut hit = vec![false; self.patterns.len()];
        for m in ac.find_overlapping_iter(&haystack) {
            hit[m.pattern().as_usize()] = true;
        }
        let mut idx: Vec<usize> = hit
            .iter()
            .enumerate()
            .filter(|(_, h)| **h)
            .flat_map(|(p, _)| self.patterns[p].iter().copied())
            .collect();
        idx.sort_unstable();
        idx.into_iter().map(|i| &self.entries[i]).collect()
    }

    pub fn is_contaminated(&self, content: &str) -> bool {
        let Some(ac) = &self.automaton else { return false };
        ac.is_match(&normalize(content))
    }
}

/// Per-benchmark match counts for the run report.
pub fn count_by_benchmark<'a>(matches: impl IntoIterator<Item = &'a Needle>, into: &mut BTreeMap<String, u64>) {
    for n in matches {
        *into.entry(n.benchmark.clone()).or_default() += 1;
    }
}
