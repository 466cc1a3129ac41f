//! Single-stage entry points used by the `dedup` and `render` CLI verbs.

use std::fs;
use std::path::Path;

use serde::Serialize;

use super::config::Source;
use super::run::{read_lines, shuffle_repo_files, RunError};
use crate::dedup::{dedup_with_workers, DedupConfig, DedupStats};
use crate::model::{
    parse_json_line, parse_source_record, Conversation, IrPair, Notebook, PullRequest, RecordError, ScoredQa,
    SourceFile, TrainingDocument,
};
use crate::notebooks::{notebook_language, to_script, to_structured, KeywordGuesser};
use crate::render::{
    fim_transform, render_ir_pair, render_issue, render_notebook, render_pr, render_repo, render_stackexchange,
    NotebookForm, RenderConfig, RenderError,
};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RenderSummary {
    pub records: usize,
    pub documents: usize,
    pub failed: usize,
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| RunError::Io { context: format!("writing {}", path.display()), source: e })
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for it in items {
        serde_json::to_writer(&mut out, it).expect("records serialize");
        out.push(b'\n');
    }
    out
}

fn parse_all<T>(path: &Path, parse: impl Fn(&serde_json::Value) -> Result<T, RecordError>) -> Result<(Vec<T>, usize), RunError> {
    let (lines, _) = read_lines(path)?;
    let mut ok = Vec::new();
    let mut bad = 0;
    for l in lines {
        match parse_json_line(&l.bytes).and_then(|v| parse(&v)) {
            Ok(t) => ok.push(t),
            Err(_) => bad += 1,
        }
    }
    Ok((ok, bad))
}

/// Near-deduplicates a source-code JSONL file and writes one decision per
/// parsed record. Malformed lines are skipped.
pub fn dedup_file(
    input: &Path,
    output: &Path,
    cfg: &DedupConfig,
    seed: u64,
    workers: usize,
) -> Result<DedupStats, RunError> {
    cfg.validate().map_err(|e| RunError::Config(vec![super::Diagnostic { key: "dedup".into(), message: e.to_string() }]))?;
    let (files, _) = parse_all(input, parse_source_record)?;
    let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
    let (decisions, stats) =
        dedup_with_workers(&files, cfg, seed, workers).map_err(|e| RunError::Internal(e.to_string()))?;
    write(output, jsonl(&decisions))?;
    Ok(stats)
}

fn render_code(files: Vec<SourceFile>, cfg: &RenderConfig, fim: bool) -> Vec<Result<TrainingDocument, RenderError>> {
    let mut groups: Vec<(String, Vec<SourceFile>)> = Vec::new();
    for f in files {
        match groups.iter_mut().find(|(r, _)| *r == f.repo_name) {
            Some((_, g)) => g.push(f),
            None => groups.push((f.repo_name.clone(), vec![f])),
        }
    }
    groups
        .into_iter()
        .map(|(repo, mut g)| {
            shuffle_repo_files(&repo, &mut g, cfg.seed);
            let doc = render_repo(&repo, &g, cfg)?;
            Ok(if fim { fim_transform(&doc, cfg) } else { doc })
        })
        .collect()
}

fn render_jupyter(nb: &Notebook, cfg: &RenderConfig) -> Vec<Result<TrainingDocument, RenderError>> {
    let Some(lang) = notebook_language(nb, &KeywordGuesser) else { return Vec::new() };
    let script = to_script(nb, &lang);
    let structured = to_structured(nb);
    vec![
        render_notebook(&nb.id, &NotebookForm::JupyterScript(&script), cfg),
        render_notebook(&nb.id, &NotebookForm::JupyterStructured(&structured), cfg),
    ]
}

fn render_kaggle(nb: &Notebook, cfg: &RenderConfig) -> Vec<Result<TrainingDocument, RenderError>> {
    let script = to_script(nb, "Python");
    vec![render_notebook(&nb.id, &NotebookForm::KaggleScript { code: &script, meta: nb.kaggle_meta.as_ref() }, cfg)]
}

/// Renders already-curated records of one source without any filtering.
/// Code records are grouped per repository; `fim` applies the repository
/// FIM transform.
pub fn render_file(
    source: Source,
    input: &Path,
    output: &Path,
    cfg: &RenderConfig,
    fim: bool,
) -> Result<RenderSummary, RunError> {
    let notebook = |v: &serde_json::Value| Notebook::parse(v).map(|p| p.notebook);
    let (results, records, bad): (Vec<Result<TrainingDocument, RenderError>>, usize, usize) = match source {
        Source::SourceCode => {
            let (files, bad) = parse_all(input, parse_source_record)?;
            let n = files.len();
            (render_code(files, cfg, fim), n, bad)
        }
        Source::PullRequests => {
            let (prs, bad) = parse_all(input, PullRequest::parse)?;
            (prs.iter().map(|p| render_pr(p, cfg)).collect(), prs.len(), bad)
        }
        Source::Issues => {
            let (cs, bad) = parse_all(input, Conversation::parse)?;
            (cs.iter().map(|c| render_issue(c, cfg)).collect(), cs.len(), bad)
        }
        Source::Jupyter => {
            let (nbs, bad) = parse_all(input, notebook)?;
            (nbs.iter().flat_map(|nb| render_jupyter(nb, cfg)).collect(), nbs.len(), bad)
        }
        Source::Kaggle => {
            let (nbs, bad) = parse_all(input, notebook)?;
            (nbs.iter().flat_map(|nb| render_kaggle(nb, cfg)).collect(), nbs.len(), bad)
        }
        Source::Stackexchange => {
            let (qs, bad) = parse_all(input, ScoredQa::parse)?;
            (qs.iter().map(|q| render_stackexchange(q, cfg)).collect(), qs.len(), bad)
        }
        Source::IrPairs => {
            let (ps, bad) = parse_all(input, IrPair::parse)?;
            (ps.iter().map(|p| render_ir_pair(p, cfg)).collect(), ps.len(), bad)
        }
    };
    let failed = bad + results.iter().filter(|r| r.is_err()).count();
    let docs: Vec<TrainingDocument> = results.into_iter().flatten().collect();
    write(output, jsonl(&docs))?;
    Ok(RenderSummary { records: records + bad, documents: docs.len(), failed })
}
