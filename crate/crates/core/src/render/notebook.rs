use super::{doc_rng, document, guard, RenderConfig, RenderError, EOS};
use crate::model::{KaggleMeta, Sentinel, SourceKind, TrainingDocument};
use crate::notebooks::{dataset_header, load_call, StructuredNotebook};

const START: &str = Sentinel::JupyterStart.as_str();
const TEXT: &str = Sentinel::JupyterText.as_str();
const CODE: &str = Sentinel::JupyterCode.as_str();
const OUTPUT: &str = Sentinel::JupyterOutput.as_str();
const SCRIPT: &str = Sentinel::JupyterScript.as_str();
const EMPTY: &str = Sentinel::EmptyOutput.as_str();

#[derive(Debug, Clone, PartialEq)]
pub enum NotebookForm<'a> {
    JupyterScript(&'a str),
    JupyterStructured(&'a StructuredNotebook),
    KaggleScript { code: &'a str, meta: Option<&'a KaggleMeta> },
    KaggleStructured(&'a StructuredNotebook),
}

impl NotebookForm<'_> {
    pub fn kind(&self) -> SourceKind {
        match self {
            NotebookForm::JupyterScript(_) => SourceKind::JupyterScript,
            NotebookForm::JupyterStructured(_) => SourceKind::JupyterStructured,
            NotebookForm::KaggleScript { .. } => SourceKind::KaggleScript,
            NotebookForm::KaggleStructured(_) => SourceKind::KaggleStructured,
        }
    }
}

fn structured(nb: &StructuredNotebook, outputs: bool) -> Result<String, RenderError> {
    let mut text = START.to_string();
    for t in &nb.triplets {
        guard("text", &t.text)?;
        guard("code", &t.code)?;
        if !t.text.is_empty() {
            text.push_str(TEXT);
            text.push_str(&t.text);
        }
        if t.code.is_empty() && t.output.is_none() {
            continue;
        }
        text.push_str(CODE);
        text.push_str(&t.code);
        if outputs {
            text.push_str(OUTPUT);
            match &t.output {
                Some(o) => {
                    guard("output", o)?;
                    text.push_str(o);
                }
                None => text.push_str(EMPTY),
            }
        }
    }
    text.push_str(EOS);
    Ok(text)
}

fn kaggle_script(code: &str, meta: Option<&KaggleMeta>) -> Result<String, RenderError> {
    guard("code", code)?;
    let mut text = String::new();
    if let Some(m) = meta {
        let header = dataset_header(m);
        guard("dataset", &header)?;
        text.push_str(START);
        text.push_str(TEXT);
        text.push_str(&header);
        for b in &m.schema_blocks {
            for part in [&b.data_path, &b.info_text, &b.sample_rows_text] {
                guard("schema", part)?;
            }
            text.push_str(&format!(
                "\n{CODE}{}\n{OUTPUT}{}\n{TEXT}Examples:\n{}",
                load_call(&b.data_path),
                b.info_text,
                b.sample_rows_text
            ));
        }
        text.push('\n');
    }
    text.push_str(SCRIPT);
    text.push_str(code);
    text.push_str(EOS);
    Ok(text)
}

/// Renders one converted notebook form; `id` seeds nothing but is recorded.
pub fn render_notebook(id: &str, form: &NotebookForm<'_>, cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    let text = match form {
        NotebookForm::JupyterScript(code) => {
            guard("code", code)?;
            format!("{SCRIPT}{code}{EOS}")
        }
        NotebookForm::JupyterStructured(nb) => structured(nb, true)?,
        NotebookForm::KaggleStructured(nb) => structured(nb, false)?,
        NotebookForm::KaggleScript { code, meta } => kaggle_script(code, *meta)?,
    };
    let (seed, _) = doc_rng(cfg.seed, id, form.kind());
    Ok(document(text, form.kind(), vec![id.to_string()], seed))
}
