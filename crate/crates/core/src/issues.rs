//! Structural filtering and truncation of issue threads and pull requests.

use std::collections::BTreeSet;
use serde::{Deserialize, Serialize};

use crate::filters::hex_ranges;
use crate::languages::language_for_path;
use crate::model::{Conversation, DiffKind, LicenseState, PullRequest, ReviewState};
use crate::text;

/// Line that replaces the elided middle of a long comment.
pub const ELISION_MARKER: &str = "[...]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BotRule {
    pub suffixes: Vec<String>,
    pub substrings: Vec<String>,
}

impl Default for BotRule {
    fn default() -> Self {
        BotRule { suffixes: vec!["bot".into(), "[bot]".into()], substrings: vec!["dependabot".into()] }
    }
}

impl BotRule {
    pub fn is_bot(&self, name: &str) -> bool {
        let name = name.to_lowercase();
        self.suffixes.iter().any(|s| name.ends_with(s.as_str())) || self.substrings.iter().any(|s| name.contains(s.as_str()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IssueConfig {
    pub min_total_chars: usize,
    pub single_user_max_chars: usize,
    pub single_user_max_events: usize,
    pub comment_max_lines: usize,
    pub comment_head_lines: usize,
    pub comment_tail_lines: usize,
    pub bots: BotRule,
}

impl Default for IssueConfig {
    fn default() -> Self {
        IssueConfig {
            min_total_chars: 200,
            single_user_max_chars: 7000,
            single_user_max_events: 10,
            comment_max_lines: 100,
            comment_head_lines: 80,
            comment_tail_lines: 20,
            bots: BotRule::default(),
        }
    }
}

/// Removes email-reply residue: everything from a `--` signature line on,
/// and trailing quoted (`>`) lines together with a preceding `On … wrote:`
/// attribution line.
pub fn strip_email_reply(body: &str) -> String {
    let mut lines: Vec<&str> = body.split('\n').collect();
    if let Some(sig) = lines.iter().position(|l| matches!(l.trim_end_matches('\r'), "--" | "-- ")) {
        lines.truncate(sig);
    }
    let is_blank = |l: &&str| l.trim().is_empty();
    loop {
        while lines.last().is_some_and(is_blank) {
            lines.pop();
        }
        if !lines.last().is_some_and(|l| l.trim_start().starts_with('>')) {
            break;
        }
        while lines.last().is_some_and(|l| l.trim_start().starts_with('>') || l.trim().is_empty()) {
            lines.pop();
        }
        if lines.last().is_some_and(|l| {
            let t = l.trim();
            t.starts_with("On ") && t.ends_with("wrote:")
        }) {
            lines.pop();
        }
    }
    lines.join("\n")
}

/// Keeps the first 80 and last 20 lines of a comment longer than 100 lines,
/// joined by [`ELISION_MARKER`]. Marker lines do not count toward the limit,
/// so truncating twice changes nothing.
pub fn truncate_comment_with(body: &str, cfg: &IssueConfig) -> String {
    let all: Vec<&str> = text::lines(body).collect();
    let content_lines = all.iter().filter(|l| **l != ELISION_MARKER).count();
    if content_lines <= cfg.comment_max_lines {
        return body.to_string();
    }
    let mut out: Vec<&str> = all[..cfg.comment_head_lines].to_vec();
    out.push(ELISION_MARKER);
    out.extend_from_slice(&all[all.len() - cfg.comment_tail_lines..]);
    let mut s = out.join("\n");
    if body.ends_with('\n') {
        s.push('\n');
    }
    s
}

pub fn truncate_comment(body: &str) -> String {
    truncate_comment_with(body, &IssueConfig::default())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueReason {
    TooShort,
    Bot,
    SingleUserTooLong,
    SingleUserManyEvents,
    Kept,
}

impl IssueReason {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueReason::TooShort => "too_short",
            IssueReason::Bot => "bot",
            IssueReason::SingleUserTooLong => "single_user_too_long",
            IssueReason::SingleUserManyEvents => "single_user_many_events",
            IssueReason::Kept => "kept",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueVerdict {
    pub keep: bool,
    pub reason: IssueReason,
}

impl IssueVerdict {
    fn of(reason: IssueReason) -> Self {
        IssueVerdict { keep: reason == IssueReason::Kept, reason }
    }
}

/// Engagement filter over an already stripped and truncated conversation.
pub fn filter_issue(c: &Conversation, cfg: &IssueConfig) -> IssueVerdict {
    let body_chars: usize = c.events.iter().map(|e| text::char_len(&e.body)).sum();
    if text::char_len(&c.title) + body_chars < cfg.min_total_chars {
        return IssueVerdict::of(IssueReason::TooShort);
    }
    if c.events.iter().any(|e| cfg.bots.is_bot(&e.author)) {
        return IssueVerdict::of(IssueReason::Bot);
    }
    let users: BTreeSet<String> = c.events.iter().map(|e| e.author.to_lowercase()).collect();
    if users.len() == 1 {
        if body_chars >= cfg.single_user_max_chars {
            return IssueVerdict::of(IssueReason::SingleUserTooLong);
        }
        if c.events.len() > cfg.single_user_max_events {
            return IssueVerdict::of(IssueReason::SingleUserManyEvents);
        }
    }
    IssueVerdict::of(IssueReason::Kept)
}

/// Strips email residue and truncates every event body.
pub fn clean_issue(c: &Conversation, cfg: &IssueConfig) -> Conversation {
    let mut out = c.clone();
    for e in &mut out.events {
        e.body = truncate_comment_with(&strip_email_reply(&e.body), cfg);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrConfig {
    pub bots: BotRule,
    pub title_min_chars: usize,
    pub title_keywords: Vec<String>,
    pub description_min_chars: usize,
    pub description_keywords: Vec<String>,
    pub title_max_chars: usize,
    pub description_max_lines: usize,
    pub description_head_lines: usize,
    pub description_tail_lines: usize,
    pub description_max_chars: usize,
    pub comment_min_chars: usize,
    pub review_hunk_max_chars: usize,
    pub max_rendered_chars: usize,
    pub base_file_max_chars: usize,
    pub base_file_min_alnum: f64,
    pub base_file_max_hex: f64,
    pub base_file_max_lines: usize,
    pub base_file_max_mean_line: f64,
    pub base_file_max_line: usize,
}

impl Default for PrConfig {
    fn default() -> Self {
        PrConfig {
            bots: BotRule::default(),
            title_min_chars: 10,
            title_keywords: vec!["dependencies".into(), "dependency".into(), "depend".into(), "release".into()],
            description_min_chars: 20,
            description_keywords: vec!["Qwiet".into()],
            title_max_chars: 500,
            description_max_lines: 80,
            description_head_lines: 60,
            description_tail_lines: 20,
            description_max_chars: 1000,
            comment_min_chars: 20,
            review_hunk_max_chars: 10_000,
            max_rendered_chars: 100_000,
            base_file_max_chars: 1_000_000,
            base_file_min_alnum: 0.25,
            base_file_max_hex: 0.25,
            base_file_max_lines: 100_000,
            base_file_max_mean_line: 100.0,
            base_file_max_line: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrReason {
    BotOpened,
    BotOnlyComments,
    NonPermissive,
    OptedOut,
    BaseChanged,
    NotApprovedOrMerged,
    NoInitialDiff,
    TitleRule,
    DescriptionRule,
    Kept,
}

impl PrReason {
    pub fn as_str(self) -> &'static str {
        match self {
            PrReason::BotOpened => "bot_opened",
            PrReason::BotOnlyComments => "bot_only_comments",
            PrReason::NonPermissive => "non_permissive",
            PrReason::OptedOut => "opted_out",
            PrReason::BaseChanged => "base_changed",
            PrReason::NotApprovedOrMerged => "not_approved_or_merged",
            PrReason::NoInitialDiff => "no_initial_diff",
            PrReason::TitleRule => "title_rule",
            PrReason::DescriptionRule => "description_rule",
            PrReason::Kept => "kept",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrVerdict {
    pub keep: bool,
    pub reason: PrReason,
}

impl PrVerdict {
    fn of(reason: PrReason) -> Self {
        PrVerdict { keep: reason == PrReason::Kept, reason }
    }
}

fn comment_authors(pr: &PullRequest) -> impl Iterator<Item = &str> {
    pr.comments
        .iter()
        .map(|c| c.author.as_str())
        .chain(pr.reviews.iter().map(|r| r.author.as_str()))
        .chain(pr.review_comments.iter().map(|r| r.author.as_str()))
}

/// PR-level filters, first failing condition wins.
pub fn filter_pr(pr: &PullRequest, cfg: &PrConfig) -> PrVerdict {
    use PrReason::*;
    if cfg.bots.is_bot(&pr.author) {
        return PrVerdict::of(BotOpened);
    }
    let mut authors = comment_authors(pr).peekable();
    if authors.peek().is_some() && authors.all(|a| cfg.bots.is_bot(a)) {
        return PrVerdict::of(BotOnlyComments);
    }
    if pr.license_state == LicenseState::NonPermissive {
        return PrVerdict::of(NonPermissive);
    }
    if pr.opted_out {
        return PrVerdict::of(OptedOut);
    }
    let bases: BTreeSet<&str> =
        pr.heads.iter().map(|h| h.base_commit_id.as_str()).filter(|b| !b.is_empty()).collect();
    if bases.len() > 1 {
        return PrVerdict::of(BaseChanged);
    }
    if !pr.is_merged() && !pr.reviews.iter().any(|r| r.state == ReviewState::Approved) {
        return PrVerdict::of(NotApprovedOrMerged);
    }
    if pr.heads.first().is_none_or(|h| h.file_diffs.is_empty()) {
        return PrVerdict::of(NoInitialDiff);
    }
    let title = pr.title.to_lowercase();
    if text::char_len(&pr.title) < cfg.title_min_chars
        || cfg.title_keywords.iter().any(|k| title.contains(&k.to_lowercase()))
    {
        return PrVerdict::of(TitleRule);
    }
    if text::char_len(&pr.description) < cfg.description_min_chars
        || cfg.description_keywords.iter().any(|k| pr.description.contains(k.as_str()))
    {
        return PrVerdict::of(DescriptionRule);
    }
    PrVerdict::of(Kept)
}

/// Decides whether Markdown text is not English.
pub trait EnglishDetector: Send + Sync {
    fn is_non_english(&self, text: &str) -> bool;
}

/// Flags text whose letters are mostly outside basic Latin.
#[derive(Debug, Clone, Copy, Default)]
pub struct LatinShareDetector;

impl EnglishDetector for LatinShareDetector {
    fn is_non_english(&self, text: &str) -> bool {
        let (mut letters, mut foreign) = (0usize, 0usize);
        for c in text.chars().filter(|c| c.is_alphabetic()) {
            letters += 1;
            if !c.is_ascii() {
                foreign += 1;
            }
        }
        letters > 0 && foreign * 2 > letters
    }
}

/// Whether a base-commit file survives the PR file filters.
pub fn filter_pr_base_file(
    path: &str,
    content: &str,
    language: Option<&str>,
    kind: DiffKind,
    cfg: &PrConfig,
    english: &dyn EnglishDetector,
) -> bool {
    if kind != DiffKind::Modified {
        return false;
    }
    let chars = text::char_len(content);
    if chars > cfg.base_file_max_chars {
        return false;
    }
    let alnum = content.chars().filter(|c| c.is_alphanumeric()).count();
    if chars > 0 && (alnum as f64) < cfg.base_file_min_alnum * chars as f64 {
        return false;
    }
    let hex: usize = hex_ranges(content).map(|r| text::char_len(&content[r])).sum();
    if chars > 0 && hex as f64 > cfg.base_file_max_hex * chars as f64 {
        return false;
    }
    let n = text::line_count(content);
    if n > cfg.base_file_max_lines {
        return false;
    }
    if n > 0 {
        let lens: Vec<usize> = text::lines(content).map(text::char_len).collect();
        let mean = lens.iter().sum::<usize>() as f64 / n as f64;
        if mean > cfg.base_file_max_mean_line || lens.iter().any(|&l| l > cfg.base_file_max_line) {
            return false;
        }
    }
    let language = language.or_else(|| language_for_path(path));
    !(language == Some("Markdown") && english.is_non_english(content))
}

/// Drops diffs (in every head) for files that fail the base-file filters,
/// along with their base files. Returns how many paths were removed.
pub fn apply_base_file_filter(pr: &mut PullRequest, cfg: &PrConfig, english: &dyn EnglishDetector) -> usize {
    let mut drop: BTreeSet<String> = BTreeSet::new();
    for head in &pr.heads {
        for d in &head.file_diffs {
            let keep = match pr.base_file(&d.path) {
                Some(b) => filter_pr_base_file(&b.path, &b.content, b.language.as_deref(), d.kind, cfg, english),
                None => false,
            };
            if !keep {
                drop.insert(d.path.clone());
            }
        }
    }
    for head in &mut pr.heads {
        head.file_diffs.retain(|d| !drop.contains(&d.path));
    }
    pr.base_files.retain(|b| !drop.contains(&b.path));
    drop.len()
}

/// Title cut to 500 chars; descriptions over 80 lines keep the first 60 and
/// last 20; anything still over 1000 chars is cut.
pub fn truncate_pr_fields(pr: &PullRequest, cfg: &PrConfig) -> PullRequest {
    let mut out = pr.clone();
    out.title = text::take_chars(&pr.title, cfg.title_max_chars).to_string();
    let lines: Vec<&str> = text::lines(&pr.description).collect();
    let mut desc = if lines.len() > cfg.description_max_lines {
        let mut kept = lines[..cfg.description_head_lines].to_vec();
        kept.extend_from_slice(&lines[lines.len() - cfg.description_tail_lines..]);
        kept.join("\n")
    } else {
        pr.description.clone()
    };
    if text::char_len(&desc) > cfg.description_max_chars {
        desc = text::take_chars(&desc, cfg.description_max_chars).to_string();
    }
    out.description = desc;
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentStats {
    pub bot_removed: usize,
    pub short_removed: usize,
    pub hunks_dropped: usize,
}

/// Removes bot comments, strips email residue, drops short general comments
/// and oversized review-comment hunks.
pub fn process_pr_comments(pr: &PullRequest, cfg: &PrConfig) -> (PullRequest, CommentStats) {
    let mut out = pr.clone();
    let mut stats = CommentStats::default();
    let before = out.comments.len() + out.reviews.len() + out.review_comments.len();
    out.comments.retain(|c| !cfg.bots.is_bot(&c.author));
    out.reviews.retain(|r| !cfg.bots.is_bot(&r.author));
    out.review_comments.retain(|r| !cfg.bots.is_bot(&r.author));
    stats.bot_removed = before - (out.comments.len() + out.reviews.len() + out.review_comments.len());

    for c in &mut out.comments {
        c.body = strip_email_reply(&c.body);
    }
    for r in &mut out.reviews {
        r.body = strip_email_reply(&r.body);
    }
    for r in &mut out.review_comments {
        r.body = strip_email_reply(&r.body);
    }
    let n = out.comments.len();
    out.comments.retain(|c| text::char_len(&c.body) >= cfg.comment_min_chars);
    stats.short_removed = n - out.comments.len();
    for r in &mut out.review_comments {
        if r.diff_hunk.as_deref().is_some_and(|h| text::char_len(h) > cfg.review_hunk_max_chars) {
            r.diff_hunk = None;
            stats.hunks_dropped += 1;
        }
    }
    (out, stats)
}

pub fn pr_max_length_gate(rendered_chars: usize, cfg: &PrConfig) -> bool {
    rendered_chars <= cfg.max_rendered_chars
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        Action, BaseFile, Event, FileDiff, HeadCommit, PrComment, PrReview, ReviewComment, StatusEvent, StatusKind,
    };
    use proptest::prelude::*;

    fn numbered(n: usize) -> String {
        (0..n).map(|i| format!("line {i}")).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn email_stripping() {
        assert_eq!(strip_email_reply("thanks!\n> original message"), "thanks!");
        assert_eq!(strip_email_reply("plain comment"), "plain comment");
        assert_eq!(strip_email_reply("fix merged\n--\nJohn"), "fix merged");
        assert_eq!(strip_email_reply("fix merged\n-- \nJohn\n> q"), "fix merged");
        assert_eq!(
            strip_email_reply("ok\n\nOn Mon, Jan 1, 2024 at 9:00 AM Bob <b@x.org> wrote:\n> a\n>\n> b\n"),
            "ok"
        );
        assert_eq!(strip_email_reply("> quoted\nreply below"), "> quoted\nreply below");
    }

    #[test]
    fn comment_truncation() {
        assert_eq!(truncate_comment(&numbered(100)), numbered(100));
        assert_eq!(truncate_comment("one"), "one");
        let t = truncate_comment(&numbered(150));
        let lines: Vec<&str> = t.split('\n').collect();
        assert_eq!(lines.len(), 101);
        assert_eq!(lines[79], "line 79");
        assert_eq!(lines[80], ELISION_MARKER);
        assert_eq!(lines[81], "line 130");
        assert_eq!(lines[100], "line 149");
        assert_eq!(truncate_comment(&t), t);
    }

    fn issue(events: &[(&str, usize)], title: &str) -> Conversation {
        Conversation {
            id: String::new(),
            repo_name: "o/r".into(),
            title: title.into(),
            events: events
                .iter()
                .enumerate()
                .map(|(i, (a, n))| Event {
                    author: a.to_string(),
                    body: "x".repeat(*n),
                    action: if i == 0 { Action::Open } else { Action::Comment },
                    created_at: i as i64,
                })
                .collect(),
            is_closed: false,
        }
    }

    #[test]
    fn issue_rules() {
        let cfg = IssueConfig::default();
        let v = |c: &Conversation| filter_issue(c, &cfg).reason;
        assert_eq!(v(&issue(&[("a", 150), ("b", 150)], "t")), IssueReason::Kept);
        let mut many = vec![("a", 627); 11];
        many[10].1 = 630;
        assert_eq!(v(&issue(&many, "t")), IssueReason::SingleUserManyEvents);
        assert_eq!(v(&issue(&[("a", 3000), ("a", 3000), ("a", 1100)], "t")), IssueReason::SingleUserTooLong);
        assert_eq!(v(&issue(&[("a", 50), ("b", 50)], "t")), IssueReason::TooShort);
        assert_eq!(v(&issue(&[("a", 150), ("github-actions[bot]", 150)], "t")), IssueReason::Bot);
        assert_eq!(v(&issue(&[("a", 500)], "t")), IssueReason::Kept);
    }

    fn base_pr() -> PullRequest {
        PullRequest {
            id: "1".into(),
            title: "Fix off-by-one in parser".into(),
            description: "The loop skipped the final token; this adjusts the bound.".into(),
            author: "alice".into(),
            repo_name: "o/r".into(),
            created_at: 0,
            status_events: vec![
                StatusEvent { kind: StatusKind::Opened, merged: false, author: "alice".into(), created_at: 0 },
                StatusEvent { kind: StatusKind::Closed, merged: true, author: "bob".into(), created_at: 9 },
            ],
            base_files: vec![BaseFile { path: "a.py".into(), content: "x = 1\n".into(), language: None }],
            heads: vec![HeadCommit {
                commit_id: "h1".into(),
                base_commit_id: "b1".into(),
                created_at: 1,
                file_diffs: vec![FileDiff {
                    path: "a.py".into(),
                    kind: DiffKind::Modified,
                    hunks: vec![],
                    head_content: Some("x = 2\n".into()),
                }],
            }],
            comments: vec![PrComment { id: "c1".into(), author: "bob".into(), body: "Looks good to me overall, thanks!".into(), created_at: 2 }],
            reviews: vec![],
            review_comments: vec![],
            license_state: LicenseState::Permissive,
            opted_out: false,
        }
    }

    #[test]
    fn pr_rules() {
        let cfg = PrConfig::default();
        assert_eq!(filter_pr(&base_pr(), &cfg).reason, PrReason::Kept);
        let mut p = base_pr();
        p.title = "Bump dependency x".into();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::TitleRule);
        let mut p = base_pr();
        p.description = "0123456789".into();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::DescriptionRule);
        let mut p = base_pr();
        p.description = "Scanned by Qwiet for vulnerabilities, all good.".into();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::DescriptionRule);
    }

    #[test]
    fn pr_rules_short_circuit_in_order() {
        let cfg = PrConfig::default();
        let mut p = base_pr();
        p.author = "renovate-bot".into();
        p.comments[0].author = "ci-bot".into();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::BotOpened);
        p.author = "alice".into();
        p.license_state = LicenseState::NonPermissive;
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::BotOnlyComments);
        p.comments[0].author = "bob".into();
        p.opted_out = true;
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::NonPermissive);
        p.license_state = LicenseState::NoLicense;
        p.heads.push(HeadCommit { base_commit_id: "b2".into(), ..p.heads[0].clone() });
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::OptedOut);
        p.opted_out = false;
        p.status_events[1].merged = false;
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::BaseChanged);
        p.heads.pop();
        p.heads[0].file_diffs.clear();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::NotApprovedOrMerged);
        p.reviews.push(PrReview { id: "r".into(), author: "bob".into(), body: String::new(), state: ReviewState::Approved, created_at: 3 });
        p.title = "short".into();
        assert_eq!(filter_pr(&p, &cfg).reason, PrReason::NoInitialDiff);
    }

    #[test]
    fn base_file_rules() {
        let cfg = PrConfig::default();
        let en = LatinShareDetector;
        let keep = |content: &str, kind| filter_pr_base_file("a.py", content, None, kind, &cfg, &en);
        assert!(!keep(&"a".repeat(1_000_001), DiffKind::Modified));
        assert!(!keep("x = 1\n", DiffKind::Deletion));
        assert!(!keep("x = 1\n", DiffKind::Addition));
        let ordinary: String = (0..100).map(|i| format!("value_{i} = compute({i})\n")).collect();
        assert!(keep(&ordinary, DiffKind::Modified));
        let hexy: String = (0..40).map(|i| format!("0x{:02x}, ", i)).collect::<String>() + "\nint x;\n";
        assert!(!keep(&hexy, DiffKind::Modified));
        assert!(!filter_pr_base_file("README.md", "Это описание проекта на русском языке", None, DiffKind::Modified, &cfg, &en));
        assert!(filter_pr_base_file("README.md", "An English description", None, DiffKind::Modified, &cfg, &en));
    }

    #[test]
    fn base_file_filter_removes_diffs() {
        let mut p = base_pr();
        p.heads[0].file_diffs.push(FileDiff { path: "new.py".into(), kind: DiffKind::Addition, hunks: vec![], head_content: Some("y".into()) });
        let removed = apply_base_file_filter(&mut p, &PrConfig::default(), &LatinShareDetector);
        assert_eq!(removed, 1);
        assert_eq!(p.heads[0].file_diffs.len(), 1);
    }

    #[test]
    fn field_truncation() {
        let cfg = PrConfig::default();
        let mut p = base_pr();
        p.title = "t".repeat(600);
        p.description = numbered(100);
        let t = truncate_pr_fields(&p, &cfg);
        assert_eq!(text::char_len(&t.title), 500);
        let lines: Vec<&str> = t.description.split('\n').collect();
        assert_eq!(lines.len(), 80);
        assert_eq!((lines[59], lines[60]), ("line 59", "line 80"));
        assert_eq!(truncate_pr_fields(&t, &cfg), t);
        let mut p = base_pr();
        p.description = "short description here".into();
        assert_eq!(truncate_pr_fields(&p, &cfg).description, p.description);
        p.description = "w".repeat(30) + "\n" + &"v".repeat(2000);
        assert_eq!(text::char_len(&truncate_pr_fields(&p, &cfg).description), 1000);
    }

    #[test]
    fn comment_processing() {
        let cfg = PrConfig::default();
        let mut p = base_pr();
        p.comments.push(PrComment { id: "c2".into(), author: "carol".into(), body: "ok".into(), created_at: 4 });
        p.comments.push(PrComment { id: "c3".into(), author: "ci[bot]".into(), body: "Build passed on all platforms".into(), created_at: 5 });
        p.review_comments.push(ReviewComment {
            id: "rc1".into(),
            author: "carol".into(),
            body: "ok".into(),
            path: "a.py".into(),
            line: Some(1),
            diff_hunk: Some("h".repeat(12_000)),
            in_reply_to_review_id: None,
            in_reply_to_comment_id: None,
            created_at: 6,
        });
        let (out, stats) = process_pr_comments(&p, &cfg);
        assert_eq!(out.comments.len(), 1);
        assert_eq!(out.review_comments.len(), 1);
        assert_eq!(out.review_comments[0].body, "ok");
        assert!(out.review_comments[0].diff_hunk.is_none());
        assert_eq!(stats, CommentStats { bot_removed: 1, short_removed: 1, hunks_dropped: 1 });
    }

    #[test]
    fn length_gate() {
        let cfg = PrConfig::default();
        assert!(pr_max_length_gate(99_999, &cfg));
        assert!(pr_max_length_gate(100_000, &cfg));
        assert!(!pr_max_length_gate(100_001, &cfg));
        assert!(pr_max_length_gate(0, &cfg));
    }

    proptest! {
        #[test]
        fn truncation_is_idempotent(n in 0usize..300, trailing in any::<bool>()) {
            let mut body = numbered(n);
            if trailing { body.push('\n'); }
            let once = truncate_comment(&body);
            prop_assert_eq!(truncate_comment(&once), once.clone());
            let s = strip_email_reply(&body);
            prop_assert_eq!(strip_email_reply(&s), s);
        }

        #[test]
        fn issue_verdict_ignores_body_order(lens in proptest::collection::vec((0usize..3, 0usize..900), 1..14), seed in any::<u64>()) {
            let cfg = IssueConfig::default();
            let names = ["ann", "ben", "cat"];
            let events: Vec<(&str, usize)> = lens.iter().map(|(u, n)| (names[*u], *n)).collect();
            let c = issue(&events, "title");
            let mut shuffled = c.clone();
            let k = shuffled.events.len();
            let mut bodies: Vec<String> = shuffled.events.iter().map(|e| e.body.clone()).collect();
            bodies.rotate_left((seed as usize) % k);
            for (e, b) in shuffled.events.iter_mut().zip(bodies) { e.body = b; }
            prop_assert_eq!(filter_issue(&c, &cfg), filter_issue(&shuffled, &cfg));
        }
    }
}
