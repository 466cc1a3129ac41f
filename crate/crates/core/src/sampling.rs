//! PR retention, data-file subsampling, language volume caps and per-model
//! data composition.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::languages::{in_smol_set, known_languages, language_for_path};
use crate::model::{PullRequest, SourceKind};
use crate::rng::{bernoulli, derive_rng, derive_seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetentionSchedule {
    pub p_at_1: f64,
    pub p_at_1000: f64,
    pub cap_count: u64,
}

impl Default for RetentionSchedule {
    fn default() -> Self {
        RetentionSchedule { p_at_1: 0.8, p_at_1000: 0.1, cap_count: 100 }
    }
}

const ANCHOR: u64 = 1000;

/// Probability of keeping one PR from a repository that has `n` of them:
/// linear from `p_at_1` down to `p_at_1000`, then `cap_count / n`.
pub fn pr_retention_probability(n: u64, s: &RetentionSchedule) -> f64 {
    match n {
        0 | 1 => s.p_at_1,
        2..ANCHOR => s.p_at_1 - (s.p_at_1 - s.p_at_1000) * (n - 1) as f64 / (ANCHOR - 1) as f64,
        ANCHOR => s.p_at_1000,
        _ => s.cap_count as f64 / n as f64,
    }
}

pub fn retain_pr(pr: &PullRequest, n_in_repo: u64, s: &RetentionSchedule, seed: u64) -> bool {
    let mut rng = derive_rng(seed, &format!("{}#{}", pr.repo_name, pr.id), "pr_retention");
    bernoulli(&mut rng, pr_retention_probability(n_in_repo, s))
}

const DATA_KEYWORDS: &[&str] = &["pack", "lock", "yarn", "output", "swagger", "openapi"];
pub const DATA_FILE_RETENTION: f64 = 0.1;

fn is_yaml_or_json(path: &str, language: Option<&str>) -> bool {
    matches!(language.or_else(|| language_for_path(path)), Some("YAML" | "JSON"))
}

/// Whether a PR base file falls under the 10% retention rule.
pub fn data_file_triggered(path: &str, language: Option<&str>, size: usize, total_base_size: usize) -> bool {
    is_yaml_or_json(path, language)
        && (size * 2 > total_base_size || DATA_KEYWORDS.iter().any(|k| path.to_lowercase().contains(k)))
}

/// Drops triggered YAML/JSON base files (and their diffs) with probability
/// 0.9. Returns the number of files removed.
pub fn subsample_data_files(pr: &mut PullRequest, seed: u64) -> usize {
    let total: usize = pr.base_files.iter().map(|b| b.content.len()).sum();
    let dropped: BTreeSet<String> = pr
        .base_files
        .iter()
        .filter(|b| data_file_triggered(&b.path, b.language.as_deref(), b.content.len(), total))
        .filter(|b| {
            let mut rng = derive_rng(seed, &format!("{}#{}:{}", pr.repo_name, pr.id, b.path), "data_subsample");
            !bernoulli(&mut rng, DATA_FILE_RETENTION)
        })
        .map(|b| b.path.clone())
        .collect();
    pr.base_files.retain(|b| !dropped.contains(&b.path));
    for h in &mut pr.heads {
        h.file_diffs.retain(|d| !dropped.contains(&d.path));
    }
    dropped.len()
}

#[derive(Debug, Error)]
pub enum BudgetError {
    #[error("budget line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("reading budget file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageBudget {
    pub targets: BTreeMap<String, u64>,
}

const BUNDLED_BUDGETS: &str = include_str!("../data/language_budgets.tsv");

impl LanguageBudget {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_BUDGETS).expect("bundled budgets parse")
    }

    /// `language<TAB>bytes` lines; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self, BudgetError> {
        let mut targets = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: &str| BudgetError::Malformed { line: i + 1, message: message.into() };
            let (lang, bytes) = line.split_once('\t').ok_or_else(|| malformed("expected language<TAB>bytes"))?;
            let bytes: u64 = bytes.trim().parse().map_err(|_| malformed("target is not a byte count"))?;
            if bytes == 0 {
                return Err(malformed("target must be positive"));
            }
            if targets.insert(lang.trim().to_string(), bytes).is_some() {
                return Err(malformed("duplicate language"));
            }
        }
        Ok(LanguageBudget { targets })
    }

    pub fn load(path: &Path) -> Result<Self, BudgetError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn unknown_languages(&self) -> Vec<String> {
        let known = known_languages();
        self.targets.keys().filter(|l| !known.contains(l.as_str())).cloned().collect()
    }
}

/// One candidate for language downsampling.
#[derive(Debug, Clone, Copy)]
pub struct Sized<'a> {
    pub id: &'a str,
    pub language: &'a str,
    pub bytes: u64,
}

/// Keeps every file of an under-budget language. For an over-budget
/// language, walks its files in seeded random order and keeps each one that
/// still fits under the target. Returns a keep flag per input item.
pub fn downsample_language(items: &[Sized<'_>], budget: &LanguageBudget, seed: u64) -> Vec<bool> {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for it in items {
        *totals.entry(it.language).or_default() += it.bytes;
    }
    let mut keep = vec![true; items.len()];
    for (lang, total) in totals {
        let Some(&target) = budget.targets.get(lang) else { continue };
        if total <= target {
            continue;
        }
        let mut order: Vec<(u64, &str, usize)> = items
            .iter()
            .enumerate()
            .filter(|(_, it)| it.language == lang)
            .map(|(i, it)| (derive_seed(seed, it.id, "downsample"), it.id, i))
            .collect();
        order.sort_unstable();
        let mut used = 0u64;
        for (_, _, i) in order {
            if used + items[i].bytes <= target {
                used += items[i].bytes;
            } else {
                keep[i] = false;
            }
        }
    }
    keep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "3B")]
    B3,
    #[serde(rename = "7B")]
    B7,
    #[serde(rename = "15B")]
    B15,
}

impl std::str::FromStr for ModelTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "3B" => Ok(ModelTag::B3),
            "7B" => Ok(ModelTag::B7),
            "15B" => Ok(ModelTag::B15),
            _ => Err(format!("unknown model tag `{s}` (expected 3B, 7B or 15B)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeVariant {
    Smol,
    Full,
}

/// Rows of the composition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    StackSmol,
    StackFull,
    PullRequests,
    Issues,
    JupyterStructured,
    JupyterScripts,
    KaggleScripts,
    Documentation,
    OpenWebMath,
    Wikipedia,
    StackOverflow,
    Arxiv,
    Lhq,
    IntermediateRepr,
}

impl DataSource {
    pub const ALL: [DataSource; 14] = [
        DataSource::StackSmol,
        DataSource::StackFull,
        DataSource::PullRequests,
        DataSource::Issues,
        DataSource::JupyterStructured,
        DataSource::JupyterScripts,
        DataSource::KaggleScripts,
        DataSource::Documentation,
        DataSource::OpenWebMath,
        DataSource::Wikipedia,
        DataSource::StackOverflow,
        DataSource::Arxiv,
        DataSource::Lhq,
        DataSource::IntermediateRepr,
    ];

    /// The composition row a rendered document belongs to.
    pub fn for_kind(kind: SourceKind, variant: CodeVariant) -> DataSource {
        match kind {
            SourceKind::CodeRepo if variant == CodeVariant::Smol => DataSource::StackSmol,
            SourceKind::CodeRepo => DataSource::StackFull,
            SourceKind::Pr => DataSource::PullRequests,
            SourceKind::Issue => DataSource::Issues,
            SourceKind::JupyterStructured => DataSource::JupyterStructured,
            SourceKind::JupyterScript => DataSource::JupyterScripts,
            SourceKind::KaggleScript | SourceKind::KaggleStructured => DataSource::KaggleScripts,
            SourceKind::Stackexchange => DataSource::StackOverflow,
            SourceKind::IrPair => DataSource::IntermediateRepr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionPlan {
    pub model_tag: ModelTag,
    pub included_sources: BTreeSet<DataSource>,
    pub code_variant: CodeVariant,
}

impl CompositionPlan {
    pub fn for_model(tag: ModelTag) -> Self {
        use DataSource::*;
        let code_variant = if tag == ModelTag::B15 { CodeVariant::Full } else { CodeVariant::Smol };
        let mut included: BTreeSet<DataSource> = [
            PullRequests,
            Issues,
            JupyterStructured,
            JupyterScripts,
            KaggleScripts,
            Documentation,
            StackOverflow,
            Lhq,
            IntermediateRepr,
        ]
        .into();
        included.insert(if code_variant == CodeVariant::Full { StackFull } else { StackSmol });
        if tag != ModelTag::B3 {
            included.extend([OpenWebMath, Wikipedia, Arxiv]);
        }
        CompositionPlan { model_tag: tag, included_sources: included, code_variant }
    }

    pub fn admits_code_file(&self, language: Option<&str>, path: &str) -> bool {
        self.code_variant == CodeVariant::Full || in_smol_set(language, path)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamStats {
    pub documents: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionManifest {
    pub model_tag: ModelTag,
    pub code_variant: CodeVariant,
    pub sources: BTreeMap<DataSource, StreamStats>,
    pub excluded: Vec<DataSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AssembleError {
    #[error("missing required stream(s): {0:?}")]
    MissingStreams(Vec<DataSource>),
}

/// Selects the streams a plan uses. Every included source must be present.
pub fn assemble(
    plan: &CompositionPlan,
    streams: &BTreeMap<DataSource, StreamStats>,
) -> Result<CompositionManifest, AssembleError> {
    let missing: Vec<DataSource> =
        plan.included_sources.iter().filter(|s| !streams.contains_key(s)).copied().collect();
    if !missing.is_empty() {
        return Err(AssembleError::MissingStreams(missing));
    }
    let sources = plan.included_sources.iter().map(|s| (*s, streams[s])).collect();
    let excluded = streams.keys().filter(|s| !plan.included_sources.contains(s)).copied().collect();
    Ok(CompositionManifest { model_tag: plan.model_tag, code_variant: plan.code_variant, sources, excluded })
}
