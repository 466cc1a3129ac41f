use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::conversation::de_id;
use super::{parse_typed, RecordError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Answer {
    #[serde(default)]
    pub author: Option<String>,
    pub body: String,
    #[serde(default)]
    pub upvotes: i64,
    #[serde(default)]
    pub selected: bool,
    /// Quality score from the external answer classifier, normalized to [0, 1].
    #[serde(default)]
    pub quality_score: Option<f64>,
}

/// A StackExchange question with its answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQa {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    #[serde(default)]
    pub author: Option<String>,
    pub question: String,
    #[serde(default)]
    pub answers: Vec<Answer>,
}

impl ScoredQa {
    pub fn parse(raw: &Value) -> Result<Self, RecordError> {
        let qa: ScoredQa = parse_typed(raw)?;
        if qa.answers.iter().filter(|a| a.selected).count() > 1 {
            return Err(RecordError::Malformed("more than one selected answer".into()));
        }
        if let Some(bad) = qa
            .answers
            .iter()
            .filter_map(|a| a.quality_score)
            .find(|s| !(0.0..=1.0).contains(s))
        {
            return Err(RecordError::Malformed(format!("quality_score {bad} outside [0, 1]")));
        }
        Ok(qa)
    }
}

/// Source code paired with two compiled intermediate representations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IrPair {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    #[serde(default)]
    pub language: Option<String>,
    pub code: String,
    pub ir_size_opt: String,
    pub ir_perf_opt: String,
}

impl IrPair {
    pub fn parse(raw: &Value) -> Result<Self, RecordError> {
        parse_typed(raw)
    }
}
