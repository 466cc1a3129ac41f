use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;

use super::{parse_typed, LicenseState, RecordError};

/// GitHub ids arrive as numbers in event dumps and as strings elsewhere.
pub(crate) fn de_id<'de, D: Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) => Ok(s),
        Value::Number(n) => Ok(n.to_string()),
        Value::Null => Ok(String::new()),
        other => Err(serde::de::Error::custom(format!("expected id, got {other}"))),
    }
}

fn de_opt_id<'de, D: Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let id = de_id(d)?;
    Ok(if id.is_empty() { None } else { Some(id) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    #[serde(alias = "opened")]
    Open,
    #[serde(alias = "created")]
    Comment,
    #[serde(alias = "closed")]
    Close,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub author: String,
    #[serde(default)]
    pub body: String,
    pub action: Action,
    #[serde(default)]
    pub created_at: i64,
}

/// A GitHub issue thread.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conversation {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    #[serde(default)]
    pub repo_name: String,
    pub title: String,
    pub events: Vec<Event>,
    #[serde(default)]
    pub is_closed: bool,
}

impl Conversation {
    pub fn parse(raw: &Value) -> Result<Self, RecordError> {
        let c: Conversation = parse_typed(raw)?;
        match c.events.first() {
            None => Err(RecordError::Malformed("conversation has no events".into())),
            Some(e) if e.action != Action::Open => Err(RecordError::Malformed(
                "first conversation event is not an open event".into(),
            )),
            Some(_) => Ok(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusKind {
    Opened,
    Reopened,
    Edited,
    Closed,
}

impl StatusKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatusKind::Opened => "opened",
            StatusKind::Reopened => "reopened",
            StatusKind::Edited => "edited",
            StatusKind::Closed => "closed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusEvent {
    pub kind: StatusKind,
    #[serde(default)]
    pub merged: bool,
    #[serde(default)]
    pub author: String,
    #[serde(default)]
    pub created_at: i64,
}

/// A file of the PR's base commit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseFile {
    pub path: String,
    pub content: String,
    #[serde(default)]
    pub language: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffKind {
    Modified,
    Addition,
    Deletion,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub base_start_line: usize,
    pub base_len: usize,
    pub head_start_line: usize,
    pub head_len: usize,
    /// Hunk body in unified-diff form (each line prefixed by ' ', '-' or '+').
    pub lines: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDiff {
    pub path: String,
    pub kind: DiffKind,
    /// Upstream hunks, when the producer already computed them.
    #[serde(default)]
    pub hunks: Vec<Hunk>,
    /// Head-side content; hunks are computed from it when `hunks` is empty.
    #[serde(default)]
    pub head_content: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadCommit {
    #[serde(default)]
    pub commit_id: String,
    #[serde(default)]
    pub base_commit_id: String,
    #[serde(default)]
    pub created_at: i64,
    #[serde(default)]
    pub file_diffs: Vec<FileDiff>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrComment {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    pub author: String,
    #[serde(default)]
    pub body: String,
    #[serde(default)]
    pub created_at: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewState {
    Approved,
    #[serde(alias = "dismissed")]
    Rejected,
    Commented,
    #[serde(alias = "changes_requested")]
    ChangesRequired,
}

impl ReviewState {
    pub fn as_str(self) -> &'static str {
        match self {
            ReviewState::Approved => "approved",
            ReviewState::Rejected => "rejected",
            ReviewState::Commented => "commented",
            ReviewState::ChangesRequired => "changes_required",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrReview {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    pub author: String,
    #[serde(default)]
    pub body: String,
    pub state: ReviewState,
    #[serde(default)]
    pub created_at: i64,
}

/// A code-review comment attached to a line of a diff hunk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewComment {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    pub author: String,
    #[serde(default)]
    pub body: String,
    pub path: String,
    #[serde(default)]
    pub line: Option<u64>,
    #[serde(default)]
    pub diff_hunk: Option<String>,
    #[serde(default, deserialize_with = "de_opt_id")]
    pub in_reply_to_review_id: Option<String>,
    #[serde(default, deserialize_with = "de_opt_id")]
    pub in_reply_to_comment_id: Option<String>,
    #[serde(default)]
    pub created_at: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub author: String,
    pub repo_name: String,
    #[serde(default)]
    pub created_at: i64,
    #[serde(default)]
    pub status_events: Vec<StatusEvent>,
    #[serde(default)]
    pub base_files: Vec<BaseFile>,
    #[serde(default)]
    pub heads: Vec<HeadCommit>,
    #[serde(default)]
    pub comments: Vec<PrComment>,
    #[serde(default)]
    pub reviews: Vec<PrReview>,
    #[serde(default)]
    pub review_comments: Vec<ReviewComment>,
    #[serde(default)]
    pub license_state: LicenseState,
    #[serde(default)]
    pub opted_out: bool,
}

impl PullRequest {
    pub fn parse(raw: &Value) -> Result<Self, RecordError> {
        let pr: PullRequest = parse_typed(raw)?;
        for head in &pr.heads {
            for diff in &head.file_diffs {
                if diff.kind == DiffKind::Modified
                    && !pr.base_files.iter().any(|b| b.path == diff.path)
                {
                    return Err(RecordError::Malformed(format!(
                        "modified diff `{}` has no base file",
                        diff.path
                    )));
                }
                if diff
                    .hunks
                    .windows(2)
                    .any(|w| w[0].base_start_line + w[0].base_len > w[1].base_start_line)
                {
                    return Err(RecordError::Malformed(format!(
                        "hunks of `{}` overlap or are unsorted",
                        diff.path
                    )));
                }
            }
        }
        Ok(pr)
    }

    /// Whether the PR ends in a closed state.
    pub fn is_closed(&self) -> bool {
        self.status_events
            .last()
            .is_some_and(|e| e.kind == StatusKind::Closed)
    }

    pub fn is_merged(&self) -> bool {
        self.status_events.iter().any(|e| e.merged)
    }

    pub fn base_file(&self, path: &str) -> Option<&BaseFile> {
        self.base_files.iter().find(|b| b.path == path)
    }

    /// Every status event, head commit and comment ordered by timestamp. Ties
    /// keep heads first, then comments, reviews, review comments, statuses,
    /// each in record order.
    pub fn timeline(&self) -> Vec<TimelineItem<'_>> {
        let mut items: Vec<(i64, u8, usize, TimelineItem<'_>)> = Vec::new();
        items.extend(self.heads.iter().enumerate().map(|(i, h)| (h.created_at, 0, i, TimelineItem::Head(i, h))));
        items.extend(self.comments.iter().enumerate().map(|(i, c)| (c.created_at, 1, i, TimelineItem::Comment(c))));
        items.extend(self.reviews.iter().enumerate().map(|(i, r)| (r.created_at, 2, i, TimelineItem::Review(r))));
        items.extend(
            self.review_comments.iter().enumerate().map(|(i, r)| (r.created_at, 3, i, TimelineItem::ReviewComment(r))),
        );
        items.extend(self.status_events.iter().enumerate().map(|(i, s)| (s.created_at, 4, i, TimelineItem::Status(i, s))));
        items.sort_by_key(|(t, rank, i, _)| (*t, *rank, *i));
        items.into_iter().map(|(_, _, _, item)| item).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimelineItem<'a> {
    Head(usize, &'a HeadCommit),
    Comment(&'a PrComment),
    Review(&'a PrReview),
    ReviewComment(&'a ReviewComment),
    Status(usize, &'a StatusEvent),
}

impl TimelineItem<'_> {
    pub fn author(&self) -> Option<&str> {
        match self {
            TimelineItem::Head(..) => None,
            TimelineItem::Comment(c) => Some(c.author.as_str()),
            TimelineItem::Review(r) => Some(r.author.as_str()),
            TimelineItem::ReviewComment(r) => Some(r.author.as_str()),
            TimelineItem::Status(_, s) => Some(s.author.as_str()).filter(|a| !a.is_empty()),
        }
    }
}
