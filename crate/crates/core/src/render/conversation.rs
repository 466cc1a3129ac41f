use rand::seq::SliceRandom;

use super::{doc_rng, document, guard, RenderConfig, RenderError, EOS};
use crate::model::{Action, Conversation, ScoredQa, Sentinel, SourceKind, TrainingDocument};

const ISSUE_START: &str = Sentinel::IssueStart.as_str();
const ISSUE_COMMENT: &str = Sentinel::IssueComment.as_str();
const ISSUE_CLOSED: &str = Sentinel::IssueClosed.as_str();

/// Renders an anonymized issue thread. `<issue_closed>` goes where the close
/// event happened, or just before end-of-text for a closed thread with no
/// close event.
pub fn render_issue(c: &Conversation, cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    guard("title", &c.title)?;
    for e in &c.events {
        guard("author", &e.author)?;
        guard("body", &e.body)?;
    }
    let mut text = format!("{ISSUE_START}Title: {}", c.title);
    let mut closed_marked = false;
    for (i, e) in c.events.iter().enumerate() {
        if i == 0 {
            text.push_str(&format!("\n{}: {}", e.author, e.body));
            continue;
        }
        if e.action == Action::Close {
            text.push_str(ISSUE_CLOSED);
            closed_marked = true;
            if e.body.is_empty() {
                continue;
            }
        }
        text.push_str(&format!("{ISSUE_COMMENT}{}: {}", e.author, e.body));
    }
    if c.is_closed && !closed_marked {
        text.push_str(ISSUE_CLOSED);
    }
    text.push_str(EOS);
    let (seed, _) = doc_rng(cfg.seed, &c.id, SourceKind::Issue);
    Ok(document(text, SourceKind::Issue, vec![c.id.clone()], seed))
}

/// Question first, then answers in an order drawn from the question id.
pub fn render_stackexchange(q: &ScoredQa, cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    guard("question", &q.question)?;
    for a in &q.answers {
        guard("answer", &a.body)?;
        guard("author", a.author.as_deref().unwrap_or_default())?;
    }
    let (seed, mut rng) = doc_rng(cfg.seed, &q.id, SourceKind::Stackexchange);
    let mut order: Vec<usize> = (0..q.answers.len()).collect();
    order.shuffle(&mut rng);
    let asker = q.author.as_deref().unwrap_or("username_0");
    let mut text = format!("{ISSUE_START}{asker}: {}", q.question);
    for i in order {
        let a = &q.answers[i];
        text.push_str(&format!(
            "\n{ISSUE_COMMENT}{}: {}\nUpvotes: {}",
            a.author.as_deref().unwrap_or_default(),
            a.body,
            a.upvotes
        ));
        if a.selected {
            text.push_str(" [selected answer]");
        }
    }
    text.push_str(EOS);
    Ok(document(text, SourceKind::Stackexchange, vec![q.id.clone()], seed))
}
