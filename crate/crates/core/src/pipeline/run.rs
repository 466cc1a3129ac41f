use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::config::{validate_config, Diagnostic, PipelineConfig, Source};
use super::report::{RunReport, StageReport};
use crate::decontam::{NeedleError, NeedleSet};
use crate::dedup::dedup_stream;
use crate::filters::run_filter_chain;
use crate::issues::{
    apply_base_file_filter, clean_issue, filter_issue, filter_pr, pr_max_length_gate, process_pr_comments,
    truncate_pr_fields, LatinShareDetector,
};
use crate::languages::{language_for_path, ExclusionLists};
use crate::license::{admit_by_license, assign_repository, PermissiveCatalog, SpdxMentionDetector};
use crate::model::{
    content_id, parse_json_line, parse_source_record, record_content_id, Conversation, IrPair, Notebook,
    PullRequest, RecordError, ScoredQa, SourceFile, SourceKind, TrainingDocument,
};
use crate::notebooks::{
    bundled_templates, kaggle_clean, kaggle_enrich, notebook_language, to_script, to_structured, KeywordGuesser,
    PythonSyntax,
};
use crate::redact::{anonymize_participants, anonymize_pr, anonymize_qa, redact_with, OptOutList, PiiKind, RuleDetector, VerdictCache};
use crate::render::{
    fim_transform, render_ir_pair, render_issue, render_notebook, render_pr, render_repo, render_stackexchange,
    NotebookForm, RenderConfig, RenderError,
};
use crate::rng::derive_rng;
use crate::sampling::{
    assemble, downsample_language, retain_pr, subsample_data_files, AssembleError, CompositionManifest,
    CompositionPlan, DataSource, LanguageBudget, Sized, StreamStats,
};
use crate::stackexchange::{filter_qa, QaVerdict};
use crate::text::char_len;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {}", join_diagnostics(.0))]
    Config(Vec<Diagnostic>),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("internal error: {0}")]
    Internal(String),
}

fn join_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl RunError {
    /// Process exit code: 1 config, 2 io, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Io { .. } => 2,
            RunError::Internal(_) => 3,
        }
    }

    fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        RunError::Io { context: context.into(), source }
    }

    fn config(key: &str, message: impl ToString) -> Self {
        RunError::Config(vec![Diagnostic { key: key.into(), message: message.to_string() }])
    }
}

/// A record leaving the stream at some stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub source: Source,
    pub stage: String,
    pub id: String,
    pub reason: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

struct Drop {
    reason: String,
    detail: String,
}

impl Drop {
    fn new(reason: impl Into<String>) -> Self {
        Drop { reason: reason.into(), detail: String::new() }
    }

    fn with(reason: impl Into<String>, detail: impl Into<String>) -> Self {
        Drop { reason: reason.into(), detail: detail.into() }
    }
}

fn render_drop(e: RenderError) -> Drop {
    Drop::with(e.reason(), e.to_string())
}

trait Record: Send {
    fn id(&self) -> String;
    fn bytes(&self) -> u64;
}

pub(crate) struct RawLine {
    pub(crate) no: usize,
    pub(crate) bytes: Vec<u8>,
}

impl Record for RawLine {
    fn id(&self) -> String {
        format!("line {}", self.no)
    }
    fn bytes(&self) -> u64 {
        self.bytes.len() as u64
    }
}

impl Record for SourceFile {
    fn id(&self) -> String {
        format!("{}:{}", self.repo_name, self.path)
    }
    fn bytes(&self) -> u64 {
        self.size_bytes
    }
}

fn pr_key(pr: &PullRequest) -> String {
    format!("{}#{}", pr.repo_name, pr.id)
}

impl Record for PullRequest {
    fn id(&self) -> String {
        pr_key(self)
    }
    fn bytes(&self) -> u64 {
        pr_text(self).len() as u64
    }
}

impl Record for Conversation {
    fn id(&self) -> String {
        format!("{}#{}", self.repo_name, self.id)
    }
    fn bytes(&self) -> u64 {
        (self.title.len() + self.events.iter().map(|e| e.body.len()).sum::<usize>()) as u64
    }
}

impl Record for Notebook {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn bytes(&self) -> u64 {
        self.cells.iter().map(|c| c.text.len() as u64).sum()
    }
}

struct JupyterItem {
    nb: Notebook,
    language: String,
}

impl Record for JupyterItem {
    fn id(&self) -> String {
        self.nb.id.clone()
    }
    fn bytes(&self) -> u64 {
        self.nb.bytes()
    }
}

struct KaggleItem {
    nb: Notebook,
    script: String,
}

impl Record for KaggleItem {
    fn id(&self) -> String {
        self.nb.id.clone()
    }
    fn bytes(&self) -> u64 {
        self.script.len() as u64
    }
}

fn qa_text(q: &ScoredQa) -> String {
    let mut parts = vec![q.question.as_str()];
    parts.extend(q.answers.iter().map(|a| a.body.as_str()));
    parts.join("\n")
}

impl Record for ScoredQa {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn bytes(&self) -> u64 {
        (self.question.len() + self.answers.iter().map(|a| a.body.len()).sum::<usize>()) as u64
    }
}

impl Record for IrPair {
    fn id(&self) -> String {
        self.id.clone()
    }
    fn bytes(&self) -> u64 {
        (self.code.len() + self.ir_size_opt.len() + self.ir_perf_opt.len()) as u64
    }
}

impl Record for TrainingDocument {
    fn id(&self) -> String {
        self.provenance_ids.join(",")
    }
    fn bytes(&self) -> u64 {
        self.text.len() as u64
    }
}

struct RepoGroup {
    name: String,
    files: Vec<SourceFile>,
}

impl Record for RepoGroup {
    fn id(&self) -> String {
        self.name.clone()
    }
    fn bytes(&self) -> u64 {
        self.files.iter().map(|f| f.size_bytes).sum()
    }
}

/// Several documents rendered from one record.
struct Rendered(Vec<TrainingDocument>);

impl Record for Rendered {
    fn id(&self) -> String {
        self.0.first().map(Record::id).unwrap_or_default()
    }
    fn bytes(&self) -> u64 {
        self.0.iter().map(Record::bytes).sum()
    }
}

fn pr_text(pr: &PullRequest) -> String {
    let mut parts: Vec<&str> = vec![&pr.title, &pr.description];
    parts.extend(pr.comments.iter().map(|c| c.body.as_str()));
    parts.extend(pr.reviews.iter().map(|r| r.body.as_str()));
    for r in &pr.review_comments {
        parts.push(&r.body);
        if let Some(h) = &r.diff_hunk {
            parts.push(h);
        }
    }
    parts.extend(pr.base_files.iter().map(|b| b.content.as_str()));
    for h in &pr.heads {
        for d in &h.file_diffs {
            parts.extend(d.hunks.iter().map(|h| h.lines.as_str()));
            if let Some(c) = &d.head_content {
                parts.push(c);
            }
        }
    }
    parts.join("\n")
}

fn issue_text(c: &Conversation) -> String {
    let mut parts = vec![c.title.as_str()];
    parts.extend(c.events.iter().map(|e| e.body.as_str()));
    parts.join("\n")
}

/// Resources and settings shared by every stage.
struct Env<'a> {
    cfg: &'a PipelineConfig,
    render: RenderConfig,
    pool: rayon::ThreadPool,
    needles: NeedleSet,
    optout: OptOutList,
    scan: VerdictCache,
    catalog: PermissiveCatalog,
    license_detector: SpdxMentionDetector,
    budget: LanguageBudget,
    exclusions: ExclusionLists,
    pii: RuleDetector,
    templates: Vec<String>,
}

fn build_pool(workers: usize) -> Result<rayon::ThreadPool, RunError> {
    let n = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
    rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| RunError::Internal(e.to_string()))
}

impl<'a> Env<'a> {
    fn load(cfg: &'a PipelineConfig) -> Result<Self, RunError> {
        let res = &cfg.resources;
        let needles = match &res.needles {
            Some(p) if cfg.needs_needles() => NeedleSet::load(p, cfg.decontam_min_len).map_err(|e| match e {
                NeedleError::Io(io) => RunError::io(format!("reading {}", p.display()), io),
                other => RunError::config("resources.needles", other),
            })?,
            _ => NeedleSet::empty(),
        };
        let optout = match &res.optout {
            Some(p) => OptOutList::load(p).map_err(|e| RunError::io(format!("reading {}", p.display()), e))?,
            None => OptOutList::default(),
        };
        let scan = match &res.scan_cache {
            Some(p) => VerdictCache::load(p).map_err(|e| match e {
                crate::redact::ScanError::Io(io) => RunError::io(format!("reading {}", p.display()), io),
                other => RunError::config("resources.scan_cache", other),
            })?,
            None => VerdictCache::default(),
        };
        let catalog = match &res.license_catalog {
            Some(p) => PermissiveCatalog::load(p).map_err(|e| RunError::config("resources.license_catalog", e))?,
            None => PermissiveCatalog::bundled(),
        };
        let budget = match &res.budgets {
            Some(p) => LanguageBudget::load(p).map_err(|e| RunError::config("resources.budgets", e))?,
            None => LanguageBudget::bundled(),
        };
        let pii = RuleDetector::new(&cfg.pii).map_err(|e| RunError::config("pii", e))?;
        Ok(Env {
            cfg,
            render: RenderConfig { seed: cfg.seed, ..cfg.render.clone() },
            pool: build_pool(cfg.workers)?,
            needles,
            optout,
            scan,
            license_detector: SpdxMentionDetector::new(&catalog),
            catalog,
            budget,
            exclusions: ExclusionLists::bundled(),
            pii,
            templates: bundled_templates(),
        })
    }
}

#[derive(Default)]
struct Log {
    stages: Vec<StageReport>,
    rejects: Vec<Reject>,
    notes: BTreeMap<String, u64>,
}

impl Log {
    fn record<U: Record>(
        &mut self,
        source: Source,
        stage: &str,
        results: Vec<(String, u64, Result<U, Drop>)>,
    ) -> Vec<U> {
        let mut report = StageReport {
            source: source.as_str().into(),
            stage: stage.into(),
            input_count: results.len() as u64,
            ..StageReport::default()
        };
        let mut kept = Vec::with_capacity(results.len());
        for (id, bytes, r) in results {
            report.bytes_in += bytes;
            match r {
                Ok(u) => {
                    report.bytes_out += u.bytes();
                    kept.push(u);
                }
                Err(d) => {
                    *report.dropped_by_reason.entry(d.reason.clone()).or_default() += 1;
                    self.rejects.push(Reject { source, stage: stage.into(), id, reason: d.reason, detail: d.detail });
                }
            }
        }
        report.kept_count = kept.len() as u64;
        debug_assert!(report.is_conserved());
        self.stages.push(report);
        kept
    }

    fn note(&mut self, source: Source, key: &str, n: u64) {
        if n > 0 {
            *self.notes.entry(format!("{} {key}", source.as_str())).or_default() += n;
        }
    }
}

fn map_stage<T: Record, U: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    stage: &str,
    items: Vec<T>,
    f: impl Fn(T) -> Result<U, Drop> + Sync + Send,
) -> Vec<U> {
    let results = env.pool.install(|| items.into_par_iter().map(|t| (t.id(), t.bytes(), f(t))).collect());
    log.record(source, stage, results)
}

/// Applies precomputed per-item verdicts (`Some` drops).
fn decide<T: Record>(log: &mut Log, source: Source, stage: &str, items: Vec<T>, verdicts: Vec<Option<Drop>>) -> Vec<T> {
    let results = items
        .into_iter()
        .zip(verdicts)
        .map(|(t, v)| {
            let (id, bytes) = (t.id(), t.bytes());
            (id, bytes, v.map_or(Ok(t), Err))
        })
        .collect();
    log.record(source, stage, results)
}

fn parse_stage<U: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    lines: Vec<RawLine>,
    parse: impl Fn(&Value) -> Result<U, RecordError> + Sync + Send,
) -> Vec<U> {
    map_stage(env, log, source, "parse", lines, |l| {
        parse_json_line(&l.bytes).and_then(|v| parse(&v)).map_err(|e| Drop::with(e.reason(), e.to_string()))
    })
}

/// Records without an id get the content id of their input line.
fn fill_id(id: &mut String, raw: &Value) {
    if id.is_empty() {
        *id = record_content_id(raw);
    }
}

fn optout_stage<T: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    items: Vec<T>,
    repo: impl Fn(&T) -> &str + Sync + Send,
) -> Vec<T> {
    if !env.cfg.toggles(source).optout {
        return items;
    }
    map_stage(env, log, source, "optout", items, |t| {
        if env.optout.matches(repo(&t)) {
            Err(Drop::new("opted_out"))
        } else {
            Ok(t)
        }
    })
}

fn dedup_stage<T: Record + Sync>(
    env: &Env,
    log: &mut Log,
    source: Source,
    items: Vec<T>,
    as_file: impl Fn(&T) -> SourceFile + Sync + Send,
) -> Result<Vec<T>, RunError> {
    if !env.cfg.toggles(source).dedup {
        return Ok(items);
    }
    let files: Vec<SourceFile> = env.pool.install(|| items.par_iter().map(as_file).collect());
    let (decisions, stats) = dedup_stream(&files, &env.cfg.dedup, env.cfg.seed, &env.pool)
        .map_err(|e| RunError::Internal(e.to_string()))?;
    log.note(source, "dedup clusters", stats.clusters as u64);
    let verdicts = decisions.into_iter().map(|d| (!d.kept).then(|| Drop::with("near_duplicate", d.cluster_id))).collect();
    Ok(decide(log, source, "dedup", items, verdicts))
}

fn malware_stage<T: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    items: Vec<T>,
    cid: impl Fn(&T) -> String + Sync + Send,
) -> Vec<T> {
    if !env.cfg.toggles(source).malware {
        return items;
    }
    let unscanned = AtomicU64::new(0);
    let kept = map_stage(env, log, source, "malware", items, |t| match env.scan.get(&cid(&t)) {
        Some(v) if v.flagged => Err(Drop::with("malware", v.signature_name.clone().unwrap_or_default())),
        Some(_) => Ok(t),
        None => {
            unscanned.fetch_add(1, Ordering::Relaxed);
            Ok(t)
        }
    });
    log.note(source, "malware unscanned", unscanned.into_inner());
    kept
}

fn decontam_stage<T: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    items: Vec<T>,
    text: impl Fn(&T) -> String + Sync + Send,
) -> Vec<T> {
    if !env.cfg.toggles(source).decontaminate {
        return items;
    }
    map_stage(env, log, source, "decontaminate", items, |t| {
        let hits = env.needles.find_contamination(&text(&t));
        if hits.is_empty() {
            return Ok(t);
        }
        let benchmarks: BTreeSet<&str> = hits.iter().map(|n| n.benchmark.as_str()).collect();
        Err(Drop::with("contaminated", benchmarks.into_iter().collect::<Vec<_>>().join(",")))
    })
}

/// Per-record redaction context handed to the PII closures.
struct Redactor<'a> {
    detector: &'a RuleDetector,
    kinds: &'a BTreeSet<PiiKind>,
    usernames: bool,
    count: &'a AtomicU64,
}

impl Redactor<'_> {
    fn text(&self, s: &mut String) {
        let (out, n) = redact_with(self.detector, s, self.kinds);
        if n > 0 {
            self.count.fetch_add(n as u64, Ordering::Relaxed);
            *s = out;
        }
    }
}

fn pii_stage<T: Record>(
    env: &Env,
    log: &mut Log,
    source: Source,
    items: Vec<T>,
    apply: impl Fn(T, &Redactor) -> T + Sync + Send,
) -> Vec<T> {
    let policy = &env.cfg.toggles(source).pii;
    if !policy.is_active() {
        return items;
    }
    let count = AtomicU64::new(0);
    let r = Redactor { detector: &env.pii, kinds: &policy.kinds, usernames: policy.usernames, count: &count };
    let out = map_stage(env, log, source, "pii", items, |t| Ok(apply(t, &r)));
    log.note(source, "pii redactions", count.into_inner());
    out
}

/// Groups by key in order of first appearance.
fn group_by<T>(items: Vec<T>, key: impl Fn(&T) -> &str) -> Vec<(String, Vec<T>)> {
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    for it in items {
        let k = key(&it).to_string();
        match index.get(&k) {
            Some(&i) => groups[i].1.push(it),
            None => {
                index.insert(k.clone(), groups.len());
                groups.push((k, vec![it]));
            }
        }
    }
    groups
}

/// Puts a repository's files in a seeded random order that does not depend
/// on their input order.
pub(crate) fn shuffle_repo_files(repo: &str, files: &mut [SourceFile], seed: u64) {
    files.sort_by(|a, b| a.path.cmp(&b.path).then_with(|| a.content_id.cmp(&b.content_id)));
    files.shuffle(&mut derive_rng(seed, repo, "file_order"));
}

fn code_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::SourceCode;
    let cfg = env.cfg;
    let files = parse_stage(env, log, src, lines, parse_source_record);
    let files = map_stage(env, log, src, "language", files, |mut f: SourceFile| {
        if f.language.is_none() {
            f.language = language_for_path(&f.path).map(str::to_string);
        }
        Ok(f)
    });

    let mut groups = group_by(files, |f| f.repo_name.as_str());
    let unknown = AtomicU64::new(0);
    env.pool.install(|| {
        groups.par_iter_mut().for_each(|(_, g)| {
            if assign_repository(g, &env.catalog, &env.license_detector).unknown_repo_license {
                unknown.fetch_add(1, Ordering::Relaxed);
            }
        })
    });
    log.note(src, "unknown repo license", unknown.into_inner());
    let files: Vec<SourceFile> = groups.into_iter().flat_map(|(_, g)| g).collect();
    let files = map_stage(env, log, src, "license", files, |f| match admit_by_license(f.license_state) {
        Ok(true) => Ok(f),
        Ok(false) => Err(Drop::new("non_permissive")),
        Err(e) => Err(Drop::with("license_undetermined", e.to_string())),
    });
    let files = map_stage(env, log, src, "exclusions", files, |f| match env.exclusions.check(f.language(), &f.extension) {
        Some(x) => Err(Drop::new(x.reason())),
        None => Ok(f),
    });
    let files = map_stage(env, log, src, "filters", files, |f| {
        let v = run_filter_chain(&f, f.is_generated, &cfg.filters);
        if v.keep {
            Ok(f)
        } else {
            Err(Drop::with(v.reason.as_str(), v.detail))
        }
    });
    let files = dedup_stage(env, log, src, files, SourceFile::clone)?;
    let files = malware_stage(env, log, src, files, |f| f.content_id.clone());
    let files = decontam_stage(env, log, src, files, |f| f.content.clone());
    let files = optout_stage(env, log, src, files, |f| f.repo_name.as_str());
    let files = pii_stage(env, log, src, files, |mut f, r| {
        let mut c = std::mem::take(&mut f.content);
        r.text(&mut c);
        f.set_content(c);
        f
    });

    let keep = {
        let sized: Vec<Sized> =
            files.iter().map(|f| Sized { id: &f.content_id, language: f.language(), bytes: f.size_bytes }).collect();
        downsample_language(&sized, &env.budget, cfg.seed)
    };
    let verdicts = keep.into_iter().map(|k| (!k).then(|| Drop::new("over_budget"))).collect();
    let mut files = decide(log, src, "downsample", files, verdicts);
    if let Some(tag) = cfg.composition {
        let plan = CompositionPlan::for_model(tag);
        files = map_stage(env, log, src, "smol", files, |f| {
            if plan.admits_code_file(f.language.as_deref(), &f.path) {
                Ok(f)
            } else {
                Err(Drop::new("not_in_variant"))
            }
        });
    }

    let repos: Vec<RepoGroup> =
        group_by(files, |f| f.repo_name.as_str()).into_iter().map(|(name, files)| RepoGroup { name, files }).collect();
    let docs = map_stage(env, log, src, "render", repos, |mut g| {
        shuffle_repo_files(&g.name, &mut g.files, cfg.seed);
        render_repo(&g.name, &g.files, &env.render).map_err(render_drop)
    });
    Ok(map_stage(env, log, src, "fim", docs, |d| Ok(fim_transform(&d, &env.render))))
}

fn redact_pr(pr: PullRequest, r: &Redactor) -> PullRequest {
    let mut pr = if r.usernames { anonymize_pr(&pr).0 } else { pr };
    r.text(&mut pr.title);
    r.text(&mut pr.description);
    pr.comments.iter_mut().for_each(|c| r.text(&mut c.body));
    pr.reviews.iter_mut().for_each(|c| r.text(&mut c.body));
    for c in &mut pr.review_comments {
        r.text(&mut c.body);
        if let Some(h) = &mut c.diff_hunk {
            r.text(h);
        }
    }
    pr.base_files.iter_mut().for_each(|b| r.text(&mut b.content));
    for h in &mut pr.heads {
        for d in &mut h.file_diffs {
            d.hunks.iter_mut().for_each(|h| r.text(&mut h.lines));
            if let Some(c) = &mut d.head_content {
                r.text(c);
            }
        }
    }
    pr
}

fn pr_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::PullRequests;
    let cfg = env.cfg;
    let prs = parse_stage(env, log, src, lines, PullRequest::parse);
    let prs = optout_stage(env, log, src, prs, |p| p.repo_name.as_str());
    let removed = AtomicU64::new(0);
    let prs = map_stage(env, log, src, "base_files", prs, |mut p| {
        removed.fetch_add(apply_base_file_filter(&mut p, &cfg.prs, &LatinShareDetector) as u64, Ordering::Relaxed);
        Ok(p)
    });
    log.note(src, "base files removed", removed.into_inner());
    let prs = map_stage(env, log, src, "pr_filter", prs, |p| {
        let v = filter_pr(&p, &cfg.prs);
        if v.keep {
            Ok(p)
        } else {
            Err(Drop::new(v.reason.as_str()))
        }
    });

    let mut per_repo: HashMap<&str, u64> = HashMap::new();
    for p in &prs {
        *per_repo.entry(p.repo_name.as_str()).or_default() += 1;
    }
    let verdicts: Vec<Option<Drop>> = env.pool.install(|| {
        prs.par_iter()
            .map(|p| {
                let n = per_repo[p.repo_name.as_str()];
                (!retain_pr(p, n, &cfg.retention, cfg.seed)).then(|| Drop::with("retention", format!("{n} in repo")))
            })
            .collect()
    });
    drop(per_repo);
    let prs = decide(log, src, "retention", prs, verdicts);

    let subsampled = AtomicU64::new(0);
    let prs = map_stage(env, log, src, "data_subsample", prs, |mut p| {
        subsampled.fetch_add(subsample_data_files(&mut p, cfg.seed) as u64, Ordering::Relaxed);
        Ok(p)
    });
    log.note(src, "data files subsampled", subsampled.into_inner());
    let counters: [AtomicU64; 3] = Default::default();
    let prs = map_stage(env, log, src, "comments", prs, |p| {
        let (p, s) = process_pr_comments(&p, &cfg.prs);
        for (c, n) in counters.iter().zip([s.bot_removed, s.short_removed, s.hunks_dropped]) {
            c.fetch_add(n as u64, Ordering::Relaxed);
        }
        Ok(p)
    });
    for (key, c) in ["bot comments removed", "short comments removed", "review hunks dropped"].iter().zip(counters) {
        log.note(src, key, c.into_inner());
    }
    let prs = map_stage(env, log, src, "truncate", prs, |p| Ok(truncate_pr_fields(&p, &cfg.prs)));
    let prs = dedup_stage(env, log, src, prs, |p| SourceFile::new(p.repo_name.as_str(), pr_key(p), pr_text(p)))?;
    let prs = malware_stage(env, log, src, prs, record_content_id);
    let prs = decontam_stage(env, log, src, prs, pr_text);
    let prs = pii_stage(env, log, src, prs, redact_pr);
    let docs = map_stage(env, log, src, "render", prs, |p| render_pr(&p, &env.render).map_err(render_drop));
    Ok(map_stage(env, log, src, "length_gate", docs, |d| {
        if pr_max_length_gate(char_len(&d.text), &cfg.prs) {
            Ok(d)
        } else {
            Err(Drop::new("too_long"))
        }
    }))
}

fn issue_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::Issues;
    let cfg = env.cfg;
    let issues = parse_stage(env, log, src, lines, |v| {
        let mut c = Conversation::parse(v)?;
        fill_id(&mut c.id, v);
        Ok(c)
    });
    let issues = optout_stage(env, log, src, issues, |c| c.repo_name.as_str());
    let issues = map_stage(env, log, src, "clean", issues, |c| Ok(clean_issue(&c, &cfg.issues)));
    let issues = map_stage(env, log, src, "engagement", issues, |c| {
        let v = filter_issue(&c, &cfg.issues);
        if v.keep {
            Ok(c)
        } else {
            Err(Drop::new(v.reason.as_str()))
        }
    });
    let issues = dedup_stage(env, log, src, issues, |c| SourceFile::new(c.repo_name.as_str(), c.id(), issue_text(c)))?;
    let issues = malware_stage(env, log, src, issues, record_content_id);
    let issues = decontam_stage(env, log, src, issues, issue_text);
    let issues = pii_stage(env, log, src, issues, |c, r| {
        let mut c = if r.usernames { anonymize_participants(&c).0 } else { c };
        r.text(&mut c.title);
        c.events.iter_mut().for_each(|e| r.text(&mut e.body));
        c
    });
    Ok(map_stage(env, log, src, "render", issues, |c| render_issue(&c, &env.render).map_err(render_drop)))
}

fn redact_notebook(mut nb: Notebook, r: &Redactor) -> Notebook {
    nb.cells.iter_mut().for_each(|c| r.text(&mut c.text));
    if let Some(m) = &mut nb.kaggle_meta {
        r.text(&mut m.dataset_description);
    }
    nb
}

fn parse_notebook(v: &Value, skipped: &AtomicU64) -> Result<Notebook, RecordError> {
    let parsed = Notebook::parse(v)?;
    skipped.fetch_add(parsed.skipped_cells as u64, Ordering::Relaxed);
    let mut nb = parsed.notebook;
    fill_id(&mut nb.id, v);
    Ok(nb)
}

fn jupyter_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::Jupyter;
    let skipped = AtomicU64::new(0);
    let nbs = parse_stage(env, log, src, lines, |v| parse_notebook(v, &skipped));
    log.note(src, "cells skipped", skipped.into_inner());
    let nbs = optout_stage(env, log, src, nbs, |nb| nb.repo_name.as_str());
    let items = map_stage(env, log, src, "language", nbs, |nb| match notebook_language(&nb, &KeywordGuesser) {
        Some(language) => Ok(JupyterItem { nb, language }),
        None => Err(Drop::new("unknown_language")),
    });
    let script = |it: &JupyterItem| to_script(&it.nb, &it.language);
    let items = dedup_stage(env, log, src, items, |it| SourceFile::new(it.nb.repo_name.as_str(), it.nb.id.as_str(), script(it)))?;
    let items = malware_stage(env, log, src, items, |it| record_content_id(&it.nb));
    let items = decontam_stage(env, log, src, items, script);
    let items = pii_stage(env, log, src, items, |it, r| JupyterItem { nb: redact_notebook(it.nb, r), ..it });
    let rendered = map_stage(env, log, src, "render", items, |it| {
        let code = script(&it);
        let structured = to_structured(&it.nb);
        let a = render_notebook(&it.nb.id, &NotebookForm::JupyterScript(&code), &env.render).map_err(render_drop)?;
        let b = render_notebook(&it.nb.id, &NotebookForm::JupyterStructured(&structured), &env.render)
            .map_err(render_drop)?;
        Ok(Rendered(vec![a, b]))
    });
    Ok(rendered.into_iter().flat_map(|r| r.0).collect())
}

fn kaggle_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::Kaggle;
    let skipped = AtomicU64::new(0);
    let nbs = parse_stage(env, log, src, lines, |v| parse_notebook(v, &skipped));
    log.note(src, "cells skipped", skipped.into_inner());
    let nbs = optout_stage(env, log, src, nbs, |nb| nb.repo_name.as_str());
    let items = map_stage(env, log, src, "kaggle_clean", nbs, |nb| {
        let raw = to_script(&nb, "Python");
        match kaggle_clean(&raw, &env.templates, &PythonSyntax) {
            Some(script) => Ok(KaggleItem { nb, script }),
            None => Err(Drop::new("short_or_unparseable")),
        }
    });
    let items = dedup_stage(env, log, src, items, |it| SourceFile::new(it.nb.repo_name.as_str(), it.nb.id.as_str(), it.script.as_str()))?;
    let items = malware_stage(env, log, src, items, |it| content_id(it.script.as_bytes()));
    let items = decontam_stage(env, log, src, items, |it| it.script.clone());
    let items = pii_stage(env, log, src, items, |mut it, r| {
        r.text(&mut it.script);
        KaggleItem { nb: redact_notebook(it.nb, r), script: it.script }
    });
    let with_structured = env.cfg.kaggle_structured;
    let rendered = map_stage(env, log, src, "render", items, |it| {
        let meta = it.nb.kaggle_meta.as_ref();
        let mut docs = vec![render_notebook(&it.nb.id, &NotebookForm::KaggleScript { code: &it.script, meta }, &env.render)
            .map_err(render_drop)?];
        if with_structured {
            let structured = to_structured(&kaggle_enrich(&it.nb, meta));
            docs.push(
                render_notebook(&it.nb.id, &NotebookForm::KaggleStructured(&structured), &env.render)
                    .map_err(render_drop)?,
            );
        }
        Ok(Rendered(docs))
    });
    Ok(rendered.into_iter().flat_map(|r| r.0).collect())
}

fn stackexchange_chain(
    env: &Env,
    log: &mut Log,
    lines: Vec<RawLine>,
    unscored: &mut Vec<ScoredQa>,
) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::Stackexchange;
    let qas = parse_stage(env, log, src, lines, |v| {
        let mut q = ScoredQa::parse(v)?;
        fill_id(&mut q.id, v);
        Ok(q)
    });
    let verdicts: Vec<QaVerdict> = env.pool.install(|| qas.par_iter().map(|q| filter_qa(q, &env.cfg.qa)).collect());
    unscored.extend(qas.iter().zip(&verdicts).filter(|(_, v)| **v == QaVerdict::Unscored).map(|(q, _)| q.clone()));
    let drops = verdicts.into_iter().map(|v| (v != QaVerdict::Keep).then(|| Drop::new(v.as_str()))).collect();
    let qas = decide(log, src, "qa_filter", qas, drops);
    let qas = dedup_stage(env, log, src, qas, |q| SourceFile::new("stackexchange", q.id.as_str(), qa_text(q)))?;
    let qas = malware_stage(env, log, src, qas, record_content_id);
    let qas = decontam_stage(env, log, src, qas, qa_text);
    let qas = pii_stage(env, log, src, qas, |q, r| {
        let mut q = if r.usernames { anonymize_qa(&q).0 } else { q };
        r.text(&mut q.question);
        q.answers.iter_mut().for_each(|a| r.text(&mut a.body));
        q
    });
    Ok(map_stage(env, log, src, "render", qas, |q| render_stackexchange(&q, &env.render).map_err(render_drop)))
}

fn ir_chain(env: &Env, log: &mut Log, lines: Vec<RawLine>) -> Result<Vec<TrainingDocument>, RunError> {
    let src = Source::IrPairs;
    let pairs = parse_stage(env, log, src, lines, |v| {
        let mut p = IrPair::parse(v)?;
        fill_id(&mut p.id, v);
        Ok(p)
    });
    let pairs = dedup_stage(env, log, src, pairs, |p| SourceFile::new("ir_pairs", p.id.as_str(), p.code.as_str()))?;
    let pairs = malware_stage(env, log, src, pairs, record_content_id);
    let pairs = decontam_stage(env, log, src, pairs, |p| p.code.clone());
    let pairs = pii_stage(env, log, src, pairs, |mut p, r| {
        r.text(&mut p.code);
        p
    });
    Ok(map_stage(env, log, src, "render", pairs, |p| render_ir_pair(&p, &env.render).map_err(render_drop)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub content_id: String,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionSummary {
    #[serde(flatten)]
    pub manifest: CompositionManifest,
    /// Included sources this run did not produce; recorded with zero counts.
    pub missing: Vec<DataSource>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_digest: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: BTreeMap<Source, InputDigest>,
    pub documents: BTreeMap<SourceKind, StreamStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub composition: Option<CompositionSummary>,
}

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const REJECTS_FILE: &str = "rejects.jsonl";
pub const UNSCORED_FILE: &str = "unscored.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const REPORT_FILE: &str = "report.json";
pub const PARTIAL_SUFFIX: &str = ".partial";

pub(crate) fn read_lines(path: &Path) -> Result<(Vec<RawLine>, String), RunError> {
    let bytes = fs::read(path).map_err(|e| RunError::io(format!("reading {}", path.display()), e))?;
    let digest = content_id(&bytes);
    let lines = bytes
        .split(|b| *b == b'\n')
        .enumerate()
        .filter(|(_, l)| !l.iter().all(u8::is_ascii_whitespace))
        .map(|(i, l)| RawLine { no: i + 1, bytes: l.to_vec() })
        .collect();
    Ok((lines, digest))
}

fn pretty<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("serializes");
    out.push(b'\n');
    out
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).expect("records serialize");
        out.push(b'\n');
    }
    out
}

/// Writes every file under a `.partial` name first and renames them only
/// once all of them are on disk.
fn write_atomically(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), RunError> {
    fs::create_dir_all(dir).map_err(|e| RunError::io(format!("creating {}", dir.display()), e))?;
    let partial = |name: &str| dir.join(format!("{name}{PARTIAL_SUFFIX}"));
    for (name, bytes) in files {
        let p = partial(name);
        fs::write(&p, bytes).map_err(|e| RunError::io(format!("writing {}", p.display()), e))?;
    }
    for (name, _) in files {
        let to = dir.join(name);
        fs::rename(partial(name), &to).map_err(|e| RunError::io(format!("renaming to {}", to.display()), e))?;
    }
    Ok(())
}

fn composition(cfg: &PipelineConfig, documents: &BTreeMap<SourceKind, StreamStats>) -> Option<CompositionSummary> {
    let plan = CompositionPlan::for_model(cfg.composition?);
    let mut streams: BTreeMap<DataSource, StreamStats> = BTreeMap::new();
    for (kind, s) in documents {
        let e = streams.entry(DataSource::for_kind(*kind, plan.code_variant)).or_default();
        e.documents += s.documents;
        e.bytes += s.bytes;
    }
    let missing = match assemble(&plan, &streams) {
        Ok(manifest) => return Some(CompositionSummary { manifest, missing: Vec::new() }),
        Err(AssembleError::MissingStreams(m)) => m,
    };
    for m in &missing {
        streams.insert(*m, StreamStats::default());
    }
    let manifest = assemble(&plan, &streams).expect("all included streams present");
    Some(CompositionSummary { manifest, missing })
}

/// Everything a run produces, before it is written to disk.
pub struct RunOutput {
    pub documents: Vec<TrainingDocument>,
    pub rejects: Vec<Reject>,
    pub unscored: Vec<ScoredQa>,
    pub manifest: Manifest,
    pub report: RunReport,
}

/// Runs every configured source through its stage chain without writing output.
pub fn execute(cfg: &PipelineConfig) -> Result<RunOutput, RunError> {
    let started = Instant::now();
    let diagnostics = validate_config(cfg);
    if !diagnostics.is_empty() {
        return Err(RunError::Config(diagnostics));
    }
    let mut inputs = Vec::new();
    for source in Source::ALL {
        if let Some(path) = cfg.inputs.get(source) {
            let (lines, digest) = read_lines(path)?;
            inputs.push((source, path.to_path_buf(), lines, digest));
        }
    }
    let env = Env::load(cfg)?;
    let mut log = Log::default();
    let mut unscored = Vec::new();
    let mut documents = Vec::new();
    let mut input_digests = BTreeMap::new();
    for (source, path, lines, digest) in inputs {
        input_digests.insert(source, InputDigest { path, content_id: digest, records: lines.len() as u64 });
        let docs = match source {
            Source::SourceCode => code_chain(&env, &mut log, lines)?,
            Source::PullRequests => pr_chain(&env, &mut log, lines)?,
            Source::Issues => issue_chain(&env, &mut log, lines)?,
            Source::Jupyter => jupyter_chain(&env, &mut log, lines)?,
            Source::Kaggle => kaggle_chain(&env, &mut log, lines)?,
            Source::Stackexchange => stackexchange_chain(&env, &mut log, lines, &mut unscored)?,
            Source::IrPairs => ir_chain(&env, &mut log, lines)?,
        };
        documents.extend(docs);
    }
    if let Some(bad) = log.stages.iter().find(|s| !s.is_conserved()) {
        return Err(RunError::Internal(format!("stage {} {} does not conserve records", bad.source, bad.stage)));
    }

    let mut per_kind: BTreeMap<SourceKind, StreamStats> = BTreeMap::new();
    for d in &documents {
        let s = per_kind.entry(d.source_kind).or_default();
        s.documents += 1;
        s.bytes += d.text.len() as u64;
    }
    let digest = cfg.digest();
    let manifest = Manifest {
        config_digest: digest.clone(),
        seed: cfg.seed,
        config: serde_json::to_value(cfg).expect("config serializes"),
        inputs: input_digests,
        composition: composition(cfg, &per_kind),
        documents: per_kind,
    };
    let report = RunReport {
        config_digest: digest,
        stages: log.stages,
        notes: log.notes,
        wall_time_ms: started.elapsed().as_millis() as u64,
    };
    Ok(RunOutput { documents, rejects: log.rejects, unscored, manifest, report })
}

/// Runs the pipeline and writes documents, rejects, unscored questions,
/// manifest and report into `cfg.output_dir`.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport, RunError> {
    let out = execute(cfg)?;
    write_atomically(
        &cfg.output_dir,
        &[
            (DOCUMENTS_FILE, jsonl(&out.documents)),
            (REJECTS_FILE, jsonl(&out.rejects)),
            (UNSCORED_FILE, jsonl(&out.unscored)),
            (MANIFEST_FILE, pretty(&out.manifest)),
            (REPORT_FILE, pretty(&out.report)),
        ],
    )?;
    Ok(out.report)
}
