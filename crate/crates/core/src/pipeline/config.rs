use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dedup::DedupConfig;
use crate::filters::FilterConfig;
use crate::issues::{IssueConfig, PrConfig};
use crate::model::content_id;
use crate::redact::{PiiKind, PiiPatterns, RuleDetector};
use crate::render::RenderConfig;
use crate::sampling::{LanguageBudget, ModelTag, RetentionSchedule};
use crate::stackexchange::QaConfig;

/// Which PII categories a source gets redacted, and whether conversation
/// participants are replaced by counters.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiiPolicy {
    pub kinds: BTreeSet<PiiKind>,
    pub usernames: bool,
}

impl PiiPolicy {
    pub fn none() -> Self {
        PiiPolicy::default()
    }

    pub fn full() -> Self {
        PiiPolicy { kinds: [PiiKind::Email, PiiKind::IpAddress, PiiKind::Key].into(), usernames: false }
    }

    pub fn full_with_usernames() -> Self {
        PiiPolicy { usernames: true, ..PiiPolicy::full() }
    }

    fn keys_and_emails() -> Self {
        PiiPolicy { kinds: [PiiKind::Email, PiiKind::Key].into(), usernames: false }
    }

    fn emails() -> Self {
        PiiPolicy { kinds: [PiiKind::Email].into(), usernames: false }
    }

    pub fn is_active(&self) -> bool {
        !self.kinds.is_empty() || self.usernames
    }
}

/// One row of the per-source processing grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageToggles {
    pub dedup: bool,
    pub malware: bool,
    pub decontaminate: bool,
    pub optout: bool,
    pub pii: PiiPolicy,
}

impl StageToggles {
    const fn row(dedup: bool, malware: bool, decontaminate: bool, optout: bool, pii: PiiPolicy) -> Self {
        StageToggles { dedup, malware, decontaminate, optout, pii }
    }

    pub fn off() -> Self {
        StageToggles::row(false, false, false, false, PiiPolicy::none())
    }
}

/// Stage toggles for every source. Docs, LHQ, arXiv, OpenWebMath and
/// Wikipedia are not ingested by `run`; their rows are kept so a config
/// describes the complete grid.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Stages {
    pub source_code: StageToggles,
    pub pull_requests: StageToggles,
    pub jupyter: StageToggles,
    pub kaggle: StageToggles,
    pub issues: StageToggles,
    pub docs: StageToggles,
    pub lhq: StageToggles,
    pub arxiv: StageToggles,
    pub open_web_math: StageToggles,
    pub wikipedia: StageToggles,
    pub stackexchange: StageToggles,
    pub ir_pairs: StageToggles,
}

impl Default for Stages {
    fn default() -> Self {
        use PiiPolicy as P;
        let row = StageToggles::row;
        Stages {
            source_code: row(true, true, true, true, P::full()),
            pull_requests: row(true, true, true, true, P::full_with_usernames()),
            jupyter: row(true, true, true, true, P::full()),
            kaggle: row(true, true, true, false, P::full()),
            issues: row(true, true, true, true, P::full_with_usernames()),
            docs: row(true, false, false, false, P::keys_and_emails()),
            lhq: StageToggles::off(),
            arxiv: row(false, false, false, false, P::emails()),
            open_web_math: row(false, false, true, false, P::keys_and_emails()),
            wikipedia: StageToggles::off(),
            stackexchange: row(false, false, true, false, P::full_with_usernames()),
            ir_pairs: StageToggles::off(),
        }
    }
}

/// Sources the pipeline reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    SourceCode,
    PullRequests,
    Issues,
    Jupyter,
    Kaggle,
    Stackexchange,
    IrPairs,
}

impl Source {
    pub const ALL: [Source; 7] = [
        Source::SourceCode,
        Source::PullRequests,
        Source::Issues,
        Source::Jupyter,
        Source::Kaggle,
        Source::Stackexchange,
        Source::IrPairs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::SourceCode => "source_code",
            Source::PullRequests => "pull_requests",
            Source::Issues => "issues",
            Source::Jupyter => "jupyter",
            Source::Kaggle => "kaggle",
            Source::Stackexchange => "stackexchange",
            Source::IrPairs => "ir_pairs",
        }
    }

    /// Static stage chain, before toggles are applied.
    pub fn stage_chain(self) -> &'static [&'static str] {
        match self {
            Source::SourceCode => &[
                "parse", "language", "license", "exclusions", "filters", "dedup", "malware", "decontaminate",
                "optout", "pii", "downsample", "smol", "render", "fim",
            ],
            Source::PullRequests => &[
                "parse", "optout", "base_files", "pr_filter", "retention", "data_subsample", "comments",
                "truncate", "dedup", "malware", "decontaminate", "pii", "render", "length_gate",
            ],
            Source::Issues => {
                &["parse", "optout", "clean", "engagement", "dedup", "malware", "decontaminate", "pii", "render"]
            }
            Source::Jupyter => &["parse", "optout", "language", "dedup", "malware", "decontaminate", "pii", "render"],
            Source::Kaggle => {
                &["parse", "optout", "kaggle_clean", "dedup", "malware", "decontaminate", "pii", "render"]
            }
            Source::Stackexchange => &["parse", "qa_filter", "dedup", "malware", "decontaminate", "pii", "render"],
            Source::IrPairs => &["parse", "dedup", "malware", "decontaminate", "pii", "render"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub source_code: Option<PathBuf>,
    pub pull_requests: Option<PathBuf>,
    pub issues: Option<PathBuf>,
    pub jupyter: Option<PathBuf>,
    pub kaggle: Option<PathBuf>,
    pub stackexchange: Option<PathBuf>,
    pub ir_pairs: Option<PathBuf>,
}

impl Inputs {
    pub fn get(&self, source: Source) -> Option<&Path> {
        match source {
            Source::SourceCode => self.source_code.as_deref(),
            Source::PullRequests => self.pull_requests.as_deref(),
            Source::Issues => self.issues.as_deref(),
            Source::Jupyter => self.jupyter.as_deref(),
            Source::Kaggle => self.kaggle.as_deref(),
            Source::Stackexchange => self.stackexchange.as_deref(),
            Source::IrPairs => self.ir_pairs.as_deref(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Resources {
    /// Benchmark needles, JSONL `{benchmark, kind, text}`.
    pub needles: Option<PathBuf>,
    pub optout: Option<PathBuf>,
    /// Malware verdict cache, JSONL `{content_id, flagged, signature_name}`.
    pub scan_cache: Option<PathBuf>,
    pub license_catalog: Option<PathBuf>,
    /// Language byte budgets, `language<TAB>bytes`.
    pub budgets: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads; 0 means one per available core. Never affects output.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub output_dir: PathBuf,
    pub inputs: Inputs,
    pub resources: Resources,
    pub stages: Stages,
    pub filters: FilterConfig,
    pub dedup: DedupConfig,
    pub issues: IssueConfig,
    pub prs: PrConfig,
    /// `render.seed` is replaced by the top-level seed at run time.
    pub render: RenderConfig,
    pub retention: RetentionSchedule,
    pub qa: QaConfig,
    pub pii: PiiPatterns,
    pub decontam_min_len: usize,
    /// When set, restricts code to the plan's variant and emits a composition manifest.
    pub composition: Option<ModelTag>,
    /// Also emit the structured form of Kaggle notebooks.
    pub kaggle_structured: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 0,
            output_dir: PathBuf::from("out"),
            inputs: Inputs::default(),
            resources: Resources::default(),
            stages: Stages::default(),
            filters: FilterConfig::default(),
            dedup: DedupConfig::default(),
            issues: IssueConfig::default(),
            prs: PrConfig::default(),
            render: RenderConfig::default(),
            retention: RetentionSchedule::default(),
            qa: QaConfig::default(),
            pii: PiiPatterns::default(),
            decontam_min_len: 20,
            composition: None,
            kaggle_structured: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config: {0}")]
    Parse(String),
    #[error("override `{0}`: expected key=value")]
    Override(String),
}

fn set_path(root: &mut toml::Table, key: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| ConfigError::Override(key.into()))?;
    let mut table = root;
    for p in parts {
        let entry = table.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry.as_table_mut().ok_or_else(|| ConfigError::Parse(format!("`{p}` in `{key}` is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// Tables merge key by key; any other value replaces the base.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// A flag value is read as a TOML literal when it parses as one, else as a string.
fn override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

impl PipelineConfig {
    /// Parses `text` over the defaults, so partial tables (a single field of
    /// one `[stages.<source>]` row, say) keep the rest of their default values.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let table = text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?;
        Self::from_table(table)
    }

    fn from_table(over: toml::Table) -> Result<Self, ConfigError> {
        let mut table = toml::Table::try_from(PipelineConfig::default()).expect("default config serializes");
        merge(&mut table, over);
        toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Defaults, then the optional file, then `key=value` overrides (dotted keys).
    pub fn layered(file: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table = match file {
            Some(p) => {
                let text =
                    std::fs::read_to_string(p).map_err(|source| ConfigError::Io { path: p.to_path_buf(), source })?;
                text.parse::<toml::Table>().map_err(|e| ConfigError::Parse(e.to_string()))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Override(o.clone()))?;
            set_path(&mut table, k.trim(), override_value(v.trim()))?;
        }
        Self::from_table(table)
    }

    pub fn toggles(&self, source: Source) -> &StageToggles {
        let s = &self.stages;
        match source {
            Source::SourceCode => &s.source_code,
            Source::PullRequests => &s.pull_requests,
            Source::Issues => &s.issues,
            Source::Jupyter => &s.jupyter,
            Source::Kaggle => &s.kaggle,
            Source::Stackexchange => &s.stackexchange,
            Source::IrPairs => &s.ir_pairs,
        }
    }

    /// Stage chain for `source` with disabled stages removed.
    pub fn enabled_stages(&self, source: Source) -> Vec<&'static str> {
        let t = self.toggles(source);
        source
            .stage_chain()
            .iter()
            .copied()
            .filter(|s| match *s {
                "dedup" => t.dedup,
                "malware" => t.malware,
                "decontaminate" => t.decontaminate,
                "optout" => t.optout,
                "pii" => t.pii.is_active(),
                "smol" => self.composition.is_some(),
                _ => true,
            })
            .collect()
    }

    /// Canonical JSON of everything that can influence output bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        content_id(self.canonical_json().as_bytes())
    }

    pub fn needs_needles(&self) -> bool {
        Source::ALL.iter().any(|s| self.inputs.get(*s).is_some() && self.toggles(*s).decontaminate)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub key: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn probability(out: &mut Vec<Diagnostic>, key: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        out.push(Diagnostic { key: key.into(), message: format!("probability {p} outside [0, 1]") });
    }
}

/// Checks a config without touching inputs. An empty list means valid.
pub fn validate_config(cfg: &PipelineConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let diag = |out: &mut Vec<Diagnostic>, key: &str, message: String| out.push(Diagnostic { key: key.into(), message });

    let r = &cfg.render;
    probability(&mut out, "render.p_repo_meta", r.p_repo_meta);
    probability(&mut out, "render.p_fim_repo", r.p_fim_repo);
    probability(&mut out, "render.p_fim_chunk", r.p_fim_chunk);
    probability(&mut out, "render.p_pr_full_base", r.p_pr_full_base);
    probability(&mut out, "render.p_ir_size_opt", r.p_ir_size_opt);
    probability(&mut out, "render.p_ir_direction_code_first", r.p_ir_direction_code_first);
    probability(&mut out, "retention.p_at_1", cfg.retention.p_at_1);
    probability(&mut out, "retention.p_at_1000", cfg.retention.p_at_1000);
    if cfg.retention.p_at_1000 > cfg.retention.p_at_1 {
        diag(&mut out, "retention", "p_at_1000 exceeds p_at_1; the schedule would increase".into());
    }
    let tail = cfg.retention.cap_count as f64 / 1000.0;
    if (tail - cfg.retention.p_at_1000).abs() > 1e-9 {
        diag(
            &mut out,
            "retention.cap_count",
            format!("cap_count/1000 = {tail} does not meet p_at_1000 = {}", cfg.retention.p_at_1000),
        );
    }
    if let Err(e) = cfg.dedup.validate() {
        diag(&mut out, "dedup", e.to_string());
    }
    if !(cfg.qa.min_mean_score.is_finite()) {
        diag(&mut out, "qa.min_mean_score", "must be finite".into());
    }
    if cfg.decontam_min_len == 0 {
        diag(&mut out, "decontam_min_len", "must be at least 1".into());
    }
    if let Err(e) = RuleDetector::new(&cfg.pii) {
        diag(&mut out, "pii", e.to_string());
    }
    if let Some(p) = &cfg.resources.budgets {
        match LanguageBudget::load(p) {
            Ok(b) => {
                for lang in b.unknown_languages() {
                    diag(&mut out, "resources.budgets", format!("unknown language `{lang}`"));
                }
            }
            Err(e) => diag(&mut out, "resources.budgets", e.to_string()),
        }
    }
    if cfg.needs_needles() {
        match &cfg.resources.needles {
            None => diag(&mut out, "resources.needles", "decontamination is enabled but no needle file is set".into()),
            Some(p) if !p.is_file() => {
                diag(&mut out, "resources.needles", format!("needle file {} does not exist", p.display()))
            }
            Some(_) => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid() {
        let s = Stages::default();
        assert!(!s.docs.decontaminate && !s.docs.optout && s.docs.dedup);
        assert!(s.kaggle.malware && !s.kaggle.optout && s.jupyter.optout);
        assert_eq!(s.stackexchange, StageToggles::row(false, false, true, false, PiiPolicy::full_with_usernames()));
        assert_eq!(s.wikipedia, StageToggles::off());
        assert!(s.arxiv.pii.kinds == [PiiKind::Email].into());
    }

    #[test]
    fn default_config_is_valid() {
        assert!(validate_config(&PipelineConfig::default()).is_empty());
    }

    #[test]
    fn bad_probability_is_reported() {
        let cfg = PipelineConfig::layered(None, &["render.p_fim_repo=1.5".into()]).unwrap();
        let d = validate_config(&cfg);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "render.p_fim_repo");
    }

    #[test]
    fn missing_needles_when_decontaminating() {
        let mut cfg = PipelineConfig::default();
        cfg.inputs.source_code = Some("code.jsonl".into());
        let d = validate_config(&cfg);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "resources.needles");
        cfg.stages.source_code.decontaminate = false;
        assert!(validate_config(&cfg).is_empty());
    }

    #[test]
    fn layering_and_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "seed = 5\n[stages.docs]\ndedup = false\nmalware = false\ndecontaminate = false\noptout = false\n[stages.docs.pii]\n").unwrap();
        let cfg = PipelineConfig::layered(Some(&path), &["seed=9".into(), "output_dir=/tmp/x".into()]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/x"));
        assert!(!cfg.stages.docs.dedup);
        assert!(cfg.stages.source_code.dedup);
        assert!(PipelineConfig::from_toml("sede = 1").is_err());
    }

    #[test]
    fn partial_tables_keep_defaults() {
        let cfg = PipelineConfig::from_toml("[stages.issues]\ndecontaminate = false\n[stages.issues.pii]\nusernames = false\n[render]\np_fim_repo = 0.25\n").unwrap();
        let want = PipelineConfig::default();
        assert!(!cfg.stages.issues.decontaminate);
        assert!(cfg.stages.issues.dedup && cfg.stages.issues.optout);
        assert!(!cfg.stages.issues.pii.usernames);
        assert_eq!(cfg.stages.issues.pii.kinds, want.stages.issues.pii.kinds);
        assert_eq!(cfg.render.p_fim_repo, 0.25);
        assert_eq!(cfg.render.p_repo_meta, want.render.p_repo_meta);
        assert!(PipelineConfig::from_toml("[stages.issues]\ndedupe = false\n").is_err());
        assert_eq!(PipelineConfig::from_toml("").unwrap(), want);
    }

    #[test]
    fn digest_ignores_workers() {
        let a = PipelineConfig::default();
        let b = PipelineConfig { workers: 16, ..PipelineConfig::default() };
        assert_eq!(a.digest(), b.digest());
        let c = PipelineConfig { seed: 1, ..PipelineConfig::default() };
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn toggles_trim_chain() {
        let cfg = PipelineConfig::default();
        let chain = cfg.enabled_stages(Source::Stackexchange);
        assert_eq!(chain, ["parse", "qa_filter", "decontaminate", "pii", "render"]);
        assert!(!cfg.enabled_stages(Source::SourceCode).contains(&"smol"));
    }
}
