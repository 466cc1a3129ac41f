use std::ops::Range;

use rand::Rng;
use similar::{DiffTag, TextDiff};

use super::{doc_rng, document, guard, RenderConfig, RenderError, EOS};
use crate::model::{FileDiff, PullRequest, Sentinel, SourceKind, StatusKind, TimelineItem, TrainingDocument};
use crate::rng::bernoulli;

/// Unified-diff hunks between two texts with `context` lines around each
/// change, plus the changed line ranges of `old` (0-based, end exclusive).
pub fn unified_hunks(old: &str, new: &str, context: usize) -> (Vec<String>, Vec<Range<usize>>) {
    let diff = TextDiff::from_lines(old, new);
    let hunks = diff
        .unified_diff()
        .context_radius(context)
        .iter_hunks()
        .map(|h| h.to_string().trim_end_matches('\n').to_string())
        .collect();
    let changed = diff.ops().iter().filter(|op| op.tag() != DiffTag::Equal).map(|op| op.old_range()).collect();
    (hunks, changed)
}

fn strip_newline(s: &str) -> &str {
    s.strip_suffix('\n').unwrap_or(s)
}

struct FileChange {
    hunks: Vec<String>,
    changed: Vec<Range<usize>>,
}

fn file_change<R: Rng>(pr: &PullRequest, d: &FileDiff, cfg: &RenderConfig, rng: &mut R) -> FileChange {
    if !d.hunks.is_empty() {
        return FileChange {
            hunks: d.hunks.iter().map(|h| strip_newline(&h.lines).to_string()).collect(),
            changed: d
                .hunks
                .iter()
                .map(|h| {
                    let s = h.base_start_line.saturating_sub(1);
                    s..s + h.base_len
                })
                .collect(),
        };
    }
    let base = pr.base_file(&d.path).map_or("", |b| b.content.as_str());
    let head = d.head_content.as_deref().unwrap_or("");
    let ctx = rng.gen_range(cfg.hunk_context_min..=cfg.hunk_context_max);
    let (hunks, changed) = unified_hunks(base, head, ctx);
    FileChange { hunks, changed }
}

/// Changed ranges padded by a random 0..=pad_max lines on each side, merged
/// and joined with a `...` line.
fn excerpt<R: Rng>(content: &str, changed: &[Range<usize>], pad_max: usize, rng: &mut R) -> String {
    let lines: Vec<&str> = crate::text::lines(content).collect();
    let mut padded: Vec<Range<usize>> = changed
        .iter()
        .map(|r| {
            let before = rng.gen_range(0..=pad_max);
            let after = rng.gen_range(0..=pad_max);
            r.start.saturating_sub(before).min(lines.len())..(r.end + after).min(lines.len())
        })
        .filter(|r| !r.is_empty())
        .collect();
    padded.sort_by_key(|r| (r.start, r.end));
    let mut merged: Vec<Range<usize>> = Vec::new();
    for r in padded {
        match merged.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => merged.push(r),
        }
    }
    merged.iter().map(|r| lines[r.clone()].join("\n")).collect::<Vec<_>>().join("\n...\n")
}

fn guard_pr(pr: &PullRequest) -> Result<(), RenderError> {
    guard("title", &pr.title)?;
    guard("description", &pr.description)?;
    guard("author", &pr.author)?;
    guard("repo_name", &pr.repo_name)?;
    for b in &pr.base_files {
        guard("path", &b.path)?;
        guard("base_code", &b.content)?;
    }
    for d in pr.heads.iter().flat_map(|h| &h.file_diffs) {
        guard("path", &d.path)?;
        guard("head_code", d.head_content.as_deref().unwrap_or_default())?;
        for h in &d.hunks {
            guard("diff_hunk", &h.lines)?;
        }
    }
    for c in &pr.comments {
        guard("author", &c.author)?;
        guard("comment", &c.body)?;
        guard("event_id", &c.id)?;
    }
    for r in &pr.reviews {
        guard("author", &r.author)?;
        guard("review", &r.body)?;
        guard("event_id", &r.id)?;
    }
    for r in &pr.review_comments {
        guard("author", &r.author)?;
        guard("review_comment", &r.body)?;
        guard("path", &r.path)?;
        guard("event_id", &r.id)?;
        guard("diff_hunk", r.diff_hunk.as_deref().unwrap_or_default())?;
        for id in [&r.in_reply_to_review_id, &r.in_reply_to_comment_id].into_iter().flatten() {
            guard("event_id", id)?;
        }
    }
    for s in &pr.status_events {
        guard("author", &s.author)?;
    }
    Ok(())
}

/// Renders an anonymized PR: the opening block with base files and the first
/// head's hunks, then the timeline, then the closing block when closed.
pub fn render_pr(pr: &PullRequest, cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    use Sentinel as S;
    guard_pr(pr)?;
    let doc_id = format!("{}#{}", pr.repo_name, pr.id);
    let (seed, mut rng) = doc_rng(cfg.seed, &doc_id, SourceKind::Pr);

    let changes: Vec<Vec<FileChange>> =
        pr.heads.iter().map(|h| h.file_diffs.iter().map(|d| file_change(pr, d, cfg, &mut rng)).collect()).collect();

    let mut out: Vec<String> = vec![
        format!("{}Title: {}\n{}: {}", S::Pr, pr.title, pr.author, pr.description),
        format!("{}opened", S::PrStatus),
        format!("{}{}", S::RepoName, pr.repo_name),
        S::PrBase.to_string(),
    ];
    for base in &pr.base_files {
        if !pr.heads.iter().any(|h| h.file_diffs.iter().any(|d| d.path == base.path)) {
            continue;
        }
        let changed: Vec<Range<usize>> = pr
            .heads
            .iter()
            .zip(&changes)
            .flat_map(|(h, ch)| h.file_diffs.iter().zip(ch).filter(|(d, _)| d.path == base.path))
            .flat_map(|(_, c)| c.changed.iter().cloned())
            .collect();
        let code = if bernoulli(&mut rng, cfg.p_pr_full_base) {
            strip_newline(&base.content).to_string()
        } else {
            excerpt(&base.content, &changed, cfg.pr_context_pad_max, &mut rng)
        };
        out.push(format!("{}{}", S::PrFile, base.path));
        out.push(format!("{}{}", S::PrBaseCode, code));
    }
    out.push(S::PrDiff.to_string());

    let push_head = |out: &mut Vec<String>, i: usize| {
        for (d, c) in pr.heads[i].file_diffs.iter().zip(&changes[i]) {
            out.push(format!("{}{}", S::PrFile, d.path));
            for h in &c.hunks {
                out.push(format!("{}{}", S::PrDiffHunk, h));
            }
        }
    };
    if !pr.heads.is_empty() {
        push_head(&mut out, 0);
    }

    let final_close = pr.is_closed().then(|| pr.status_events.len() - 1);
    for item in pr.timeline() {
        match item {
            TimelineItem::Head(0, _) => {}
            TimelineItem::Head(i, _) => push_head(&mut out, i),
            TimelineItem::Comment(c) => {
                out.push(format!("{}{}: {}", S::PrComment, c.author, c.body));
                out.push(format!("{}{}", S::PrEventId, c.id));
            }
            TimelineItem::Review(r) => {
                out.push(format!("{}{}: {}", S::PrReview, r.author, r.body));
                out.push(format!("{}{}", S::PrEventId, r.id));
                out.push(format!("{}{}", S::PrReviewState, r.state.as_str()));
            }
            TimelineItem::ReviewComment(r) => {
                out.push(S::PrReviewComment.to_string());
                out.push(format!("{}{}", S::PrEventId, r.id));
                if let Some(id) = &r.in_reply_to_review_id {
                    out.push(format!("{}{}", S::PrInReplyToReviewId, id));
                }
                if let Some(id) = &r.in_reply_to_comment_id {
                    out.push(format!("{}{}", S::PrInReplyToCommentId, id));
                }
                out.push(format!("{}{}", S::PrFile, r.path));
                if let Some(line) = r.line {
                    out.push(format!("{}{}", S::PrDiffHunkCommentLine, line));
                }
                if let Some(h) = &r.diff_hunk {
                    out.push(format!("{}{}", S::PrDiffHunk, strip_newline(h)));
                }
                out.push(format!("{}{}: {}", S::PrComment, r.author, r.body));
            }
            TimelineItem::Status(0, s) if s.kind == StatusKind::Opened => {}
            TimelineItem::Status(i, _) if Some(i) == final_close => {}
            TimelineItem::Status(_, s) => match s.kind {
                StatusKind::Closed => {
                    out.push(format!("{}{}", S::Pr, s.author));
                    out.push(format!("{}closed", S::PrStatus));
                    out.push(format!("{}False", S::PrIsMerged));
                }
                kind => {
                    out.push(format!("{}Title: {}\n{}: {}", S::Pr, pr.title, s.author, pr.description));
                    out.push(format!("{}{}", S::PrStatus, kind.as_str()));
                }
            },
        }
    }
    if let Some(i) = final_close {
        let s = &pr.status_events[i];
        out.push(format!("{}{}", S::Pr, s.author));
        out.push(format!("{}closed", S::PrStatus));
        out.push(format!("{}{}", S::PrIsMerged, if s.merged { "True" } else { "False" }));
    }
    out.push(EOS.to_string());
    Ok(document(out.join("\n"), SourceKind::Pr, vec![doc_id], seed))
}
