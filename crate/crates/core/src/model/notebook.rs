use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::conversation::de_id;
use super::RecordError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Markdown,
    Code,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    pub text: String,
}

impl Cell {
    pub fn markdown(text: impl Into<String>) -> Self {
        Cell { kind: CellKind::Markdown, text: text.into() }
    }

    pub fn code(text: impl Into<String>) -> Self {
        Cell { kind: CellKind::Code, text: text.into() }
    }

    pub fn output(text: impl Into<String>) -> Self {
        Cell { kind: CellKind::Output, text: text.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaBlock {
    /// Path passed to `pd.read_csv`.
    pub data_path: String,
    /// Captured `df.info()` output.
    pub info_text: String,
    /// Sample rows, one per line.
    pub sample_rows_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KaggleMeta {
    pub dataset_title: String,
    #[serde(default)]
    pub dataset_description: String,
    #[serde(default)]
    pub dataset_identifier: String,
    #[serde(default)]
    pub schema_blocks: Vec<SchemaBlock>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notebook {
    #[serde(default, deserialize_with = "de_id")]
    pub id: String,
    #[serde(default)]
    pub repo_name: String,
    pub cells: Vec<Cell>,
    #[serde(default)]
    pub declared_language: Option<String>,
    #[serde(default)]
    pub kaggle_meta: Option<KaggleMeta>,
}

/// Result of parsing a notebook record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedNotebook {
    pub notebook: Notebook,
    /// Cells that could not be interpreted and were skipped.
    pub skipped_cells: usize,
    /// Outputs without a text representation, replaced by an empty output.
    pub non_text_outputs: usize,
}

fn joined_source(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Array(parts) => parts.iter().map(|p| p.as_str()).collect::<Option<Vec<_>>>().map(|p| p.concat()),
        _ => None,
    }
}

/// Text of one ipynb output object; `None` when it carries no plain text.
fn ipynb_output_text(out: &Value) -> Option<String> {
    if let Some(text) = out.get("text").and_then(joined_source) {
        return Some(text);
    }
    out.get("data").and_then(|d| d.get("text/plain")).and_then(joined_source)
}

impl Notebook {
    /// Parses either the flat `{kind, text}` cell schema or raw ipynb cells
    /// (`cell_type`, `source`, `outputs`, with the language under
    /// `metadata.kernelspec.language` / `metadata.language_info.name`).
    pub fn parse(raw: &Value) -> Result<ParsedNotebook, RecordError> {
        let obj = raw
            .as_object()
            .ok_or_else(|| RecordError::Malformed("record is not a JSON object".into()))?;
        let raw_cells = obj
            .get("cells")
            .and_then(Value::as_array)
            .ok_or_else(|| RecordError::Malformed("missing `cells` array".into()))?;

        let mut cells = Vec::new();
        let mut skipped_cells = 0;
        let mut non_text_outputs = 0;
        for rc in raw_cells {
            if let Ok(cell) = serde_json::from_value::<Cell>(rc.clone()) {
                cells.push(cell);
                continue;
            }
            let kind = rc.get("cell_type").and_then(Value::as_str);
            let source = rc.get("source").and_then(joined_source);
            match (kind, source) {
                (Some("markdown"), Some(text)) => cells.push(Cell::markdown(text)),
                (Some("code"), Some(text)) => {
                    cells.push(Cell::code(text));
                    for out in rc.get("outputs").and_then(Value::as_array).into_iter().flatten() {
                        match ipynb_output_text(out) {
                            Some(text) => cells.push(Cell::output(text)),
                            None => {
                                non_text_outputs += 1;
                                cells.push(Cell::output(""));
                            }
                        }
                    }
                }
                // raw cells carry no notebook content
                (Some("raw"), Some(_)) => {}
                _ => skipped_cells += 1,
            }
        }

        let declared_language = obj
            .get("declared_language")
            .and_then(Value::as_str)
            .map(str::to_string)
            .or_else(|| {
                let meta = obj.get("metadata")?;
                meta.pointer("/kernelspec/language")
                    .or_else(|| meta.pointer("/language_info/name"))
                    .and_then(Value::as_str)
                    .map(str::to_string)
            })
            .filter(|l| !l.is_empty());
        let kaggle_meta = match obj.get("kaggle_meta") {
            None | Some(Value::Null) => None,
            Some(m) => Some(
                serde_json::from_value(m.clone()).map_err(|e| RecordError::Malformed(e.to_string()))?,
            ),
        };
        let id = match obj.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => String::new(),
        };
        let repo_name = obj.get("repo_name").and_then(Value::as_str).unwrap_or_default().to_string();

        // Output cells may only follow code cells (or further outputs of that cell).
        let mut prev = None;
        for cell in &cells {
            if cell.kind == CellKind::Output && !matches!(prev, Some(CellKind::Code | CellKind::Output)) {
                return Err(RecordError::Malformed("output cell does not follow a code cell".into()));
            }
            prev = Some(cell.kind);
        }

        Ok(ParsedNotebook {
            notebook: Notebook { id, repo_name, cells, declared_language, kaggle_meta },
            skipped_cells,
            non_text_outputs,
        })
    }
}
