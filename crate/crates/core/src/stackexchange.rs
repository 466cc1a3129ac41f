//! Structural filters for scored question/answer threads.

use serde::{Deserialize, Serialize};

use crate::model::ScoredQa;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QaConfig {
    pub min_answers: usize,
    pub min_mean_score: f64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig { min_answers: 3, min_mean_score: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaVerdict {
    Keep,
    /// At least one answer has no quality score; held aside rather than dropped.
    Unscored,
    TooFewAnswers,
    LowScore,
}

impl QaVerdict {
    pub fn as_str(self) -> &'static str {
        match self {
            QaVerdict::Keep => "kept",
            QaVerdict::Unscored => "unscored",
            QaVerdict::TooFewAnswers => "too_few_answers",
            QaVerdict::LowScore => "low_score",
        }
    }

    fn is_drop(self) -> bool {
        matches!(self, QaVerdict::TooFewAnswers | QaVerdict::LowScore)
    }

    /// Composition of two filter results. Any drop wins (the answer-count
    /// reason over the score reason), and an unscored routing stands unless
    /// something drops. Symmetric, so filter order does not matter.
    pub fn then(self, next: QaVerdict) -> QaVerdict {
        match (self, next) {
            (a, b) if a.is_drop() && b.is_drop() => a.min(b),
            (a, _) if a.is_drop() => a,
            (_, b) if b.is_drop() => b,
            (QaVerdict::Unscored, _) | (_, QaVerdict::Unscored) => QaVerdict::Unscored,
            _ => QaVerdict::Keep,
        }
    }
}

pub fn min_answers_filter(qa: &ScoredQa, cfg: &QaConfig) -> QaVerdict {
    if qa.answers.len() >= cfg.min_answers {
        QaVerdict::Keep
    } else {
        QaVerdict::TooFewAnswers
    }
}

pub fn avg_score_filter(qa: &ScoredQa, cfg: &QaConfig) -> QaVerdict {
    let scores: Option<Vec<f64>> = qa.answers.iter().map(|a| a.quality_score).collect();
    match scores {
        None => QaVerdict::Unscored,
        Some(s) if s.is_empty() => QaVerdict::LowScore,
        Some(s) if s.iter().sum::<f64>() / s.len() as f64 >= cfg.min_mean_score => QaVerdict::Keep,
        Some(_) => QaVerdict::LowScore,
    }
}

pub fn filter_qa(qa: &ScoredQa, cfg: &QaConfig) -> QaVerdict {
    min_answers_filter(qa, cfg).then(avg_score_filter(qa, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Answer;
    use proptest::prelude::*;

    fn qa(scores: &[Option<f64>]) -> ScoredQa {
        ScoredQa {
            id: "q".into(),
            author: None,
            question: "?".into(),
            answers: scores
                .iter()
                .map(|s| Answer { author: None, body: "a".into(), upvotes: 0, selected: false, quality_score: *s })
                .collect(),
        }
    }

    #[test]
    fn answer_count() {
        let cfg = QaConfig::default();
        assert_eq!(min_answers_filter(&qa(&[Some(0.5); 3]), &cfg), QaVerdict::Keep);
        assert_eq!(min_answers_filter(&qa(&[Some(0.5); 2]), &cfg), QaVerdict::TooFewAnswers);
        assert_eq!(min_answers_filter(&qa(&[]), &cfg), QaVerdict::TooFewAnswers);
    }

    #[test]
    fn mean_score() {
        let cfg = QaConfig::default();
        assert_eq!(avg_score_filter(&qa(&[Some(0.3), Some(0.2), Some(0.4)]), &cfg), QaVerdict::Keep);
        assert_eq!(avg_score_filter(&qa(&[Some(0.05); 3]), &cfg), QaVerdict::LowScore);
        assert_eq!(avg_score_filter(&qa(&[Some(0.9), None, Some(0.9)]), &cfg), QaVerdict::Unscored);
        assert_eq!(avg_score_filter(&qa(&[Some(0.1); 3]), &cfg), QaVerdict::Keep);
    }

    proptest! {
        #[test]
        fn filters_commute(scores in proptest::collection::vec(proptest::option::weighted(0.9, 0.0f64..0.3), 0..6)) {
            let cfg = QaConfig::default();
            let q = qa(&scores);
            let a = min_answers_filter(&q, &cfg).then(avg_score_filter(&q, &cfg));
            let b = avg_score_filter(&q, &cfg).then(min_answers_filter(&q, &cfg));
            prop_assert_eq!(a, b);
        }
    }
}
