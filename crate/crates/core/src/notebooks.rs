//! Notebook conversion into script and structured forms, plus Kaggle cleanup.

use rustpython_parser::{parse, Mode};
use serde::{Deserialize, Serialize};

use crate::model::{Cell, CellKind, KaggleMeta, Notebook};

pub const KAGGLE_TEMPLATE_1: &str = include_str!("../data/kaggle_template_1.txt");
pub const KAGGLE_TEMPLATE_2: &str = include_str!("../data/kaggle_template_2.txt");

pub const MIN_GUESS_CONFIDENCE: f64 = 0.5;
pub const KAGGLE_MIN_CHARS: usize = 100;

/// Guesses the programming language of a code snippet.
pub trait LanguageGuesser: Send + Sync {
    fn guess(&self, code: &str) -> Option<(String, f64)>;
}

/// Keyword-vote guesser covering the common notebook kernels.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeywordGuesser;

const KEYWORDS: &[(&str, &[&str])] = &[
    ("Python", &["import ", "def ", "print(", "self.", "elif ", "lambda ", "None", "np.", "pd."]),
    ("R", &["<-", "library(", "function(", "%>%", "data.frame", "ggplot(", "c("]),
    ("Julia", &["using ", "function ", "end\n", "println(", "::", ".jl"]),
    ("Scala", &["val ", "object ", "def main", "println(", "case class", "=>"]),
];

impl LanguageGuesser for KeywordGuesser {
    fn guess(&self, code: &str) -> Option<(String, f64)> {
        let votes: Vec<(&str, usize)> = KEYWORDS
            .iter()
            .map(|(lang, kws)| (*lang, kws.iter().filter(|k| code.contains(*k)).count()))
            .collect();
        let total: usize = votes.iter().map(|v| v.1).sum();
        let (lang, best) = votes.iter().copied().max_by_key(|v| v.1)?;
        (total > 0).then(|| (lang.to_string(), best as f64 / total as f64))
    }
}

/// Declared kernel language, else a guess over the code cells when the
/// guesser is at least 50% confident.
pub fn notebook_language(nb: &Notebook, guesser: &dyn LanguageGuesser) -> Option<String> {
    if let Some(lang) = nb.declared_language.as_deref().filter(|l| !l.trim().is_empty()) {
        return Some(canonical_language(lang));
    }
    let code: Vec<&str> = nb.cells.iter().filter(|c| c.kind == CellKind::Code).map(|c| c.text.as_str()).collect();
    let (lang, p) = guesser.guess(&code.join("\n"))?;
    (p >= MIN_GUESS_CONFIDENCE).then_some(lang)
}

fn canonical_language(lang: &str) -> String {
    match lang.trim().to_lowercase().as_str() {
        "python" | "python3" | "python2" | "ipython" => "Python".into(),
        "r" => "R".into(),
        "julia" => "Julia".into(),
        "scala" => "Scala".into(),
        _ => lang.trim().to_string(),
    }
}

pub fn line_comment(language: &str) -> &'static str {
    match language.to_lowercase().as_str() {
        "python" | "r" | "julia" | "ruby" | "perl" | "shell" | "bash" | "powershell" | "octave" => "#",
        "sql" | "haskell" | "lua" => "--",
        "matlab" => "%",
        _ => "//",
    }
}

/// Code cells in order with Markdown kept verbatim as line comments.
/// Outputs are dropped.
pub fn to_script(nb: &Notebook, language: &str) -> String {
    let marker = line_comment(language);
    let mut parts: Vec<String> = Vec::new();
    for cell in &nb.cells {
        match cell.kind {
            CellKind::Code => parts.push(cell.text.clone()),
            CellKind::Markdown => parts.push(
                cell.text
                    .split('\n')
                    .map(|l| if l.is_empty() { marker.to_string() } else { format!("{marker} {l}") })
                    .collect::<Vec<_>>()
                    .join("\n"),
            ),
            CellKind::Output => {}
        }
    }
    parts.join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub text: String,
    pub code: String,
    /// `None` renders as the empty-output marker.
    pub output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct StructuredNotebook {
    pub triplets: Vec<Triplet>,
}

enum Block {
    Text(String),
    Code(String, Option<String>),
}

/// Attaches outputs to the preceding code cell, merges runs of same-kind
/// blocks (keeping the last code block's output) and pairs each code block
/// with the text before it.
pub fn to_structured(nb: &Notebook) -> StructuredNotebook {
    let mut blocks: Vec<Block> = Vec::new();
    let mut last_was_output = false;
    for cell in &nb.cells {
        match cell.kind {
            CellKind::Markdown => {
                if let Some(Block::Text(t)) = blocks.last_mut() {
                    t.push_str("\n\n");
                    t.push_str(&cell.text);
                } else {
                    blocks.push(Block::Text(cell.text.clone()));
                }
            }
            CellKind::Code => {
                if let Some(Block::Code(c, out)) = blocks.last_mut() {
                    c.push_str("\n\n");
                    c.push_str(&cell.text);
                    *out = None;
                } else {
                    blocks.push(Block::Code(cell.text.clone(), None));
                }
            }
            CellKind::Output => {
                if let Some(Block::Code(_, out)) = blocks.last_mut() {
                    match out {
                        Some(o) if last_was_output => {
                            o.push('\n');
                            o.push_str(&cell.text);
                        }
                        _ => *out = Some(cell.text.clone()),
                    }
                }
            }
        }
        last_was_output = cell.kind == CellKind::Output;
    }

    let mut triplets = Vec::new();
    let mut pending_text = String::new();
    for b in blocks {
        match b {
            Block::Text(t) => pending_text = t,
            Block::Code(code, output) => triplets.push(Triplet {
                text: std::mem::take(&mut pending_text),
                code,
                output: output.filter(|o| !o.is_empty()),
            }),
        }
    }
    if !pending_text.is_empty() {
        triplets.push(Triplet { text: pending_text, code: String::new(), output: None });
    }
    StructuredNotebook { triplets }
}

/// Parse-only syntax check for one language.
pub trait SyntaxChecker: Send + Sync {
    fn parses(&self, code: &str) -> bool;
}

/// Python grammar check. IPython magics and shell escapes are blanked
/// before parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct PythonSyntax;

impl SyntaxChecker for PythonSyntax {
    fn parses(&self, code: &str) -> bool {
        let cleaned: String = code
            .split('\n')
            .map(|l| {
                let t = l.trim_start();
                if t.starts_with('%') || t.starts_with('!') {
                    ""
                } else {
                    l
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        parse(&cleaned, Mode::Module, "<notebook>").is_ok()
    }
}

pub fn bundled_templates() -> Vec<String> {
    vec![KAGGLE_TEMPLATE_1.to_string(), KAGGLE_TEMPLATE_2.to_string()]
}

/// Removes leading boilerplate templates (longest first, repeatedly), then
/// rejects scripts under 100 characters or that fail to parse.
pub fn kaggle_clean(script: &str, templates: &[String], checker: &dyn SyntaxChecker) -> Option<String> {
    let mut sorted: Vec<&str> = templates.iter().map(|t| t.trim_end()).filter(|t| !t.is_empty()).collect();
    sorted.sort_by_key(|t| std::cmp::Reverse(t.len()));
    let mut rest = script;
    while let Some(t) = sorted.iter().find(|t| rest.trim_start().starts_with(*t)) {
        rest = rest.trim_start()[t.len()..].trim_start_matches(['\n', '\r']);
    }
    if rest.chars().count() < KAGGLE_MIN_CHARS || !checker.parses(rest) {
        return None;
    }
    Some(rest.to_string())
}

pub fn dataset_header(meta: &KaggleMeta) -> String {
    format!(
        "{}\n{}\nKaggle dataset identifier: {}",
        meta.dataset_title, meta.dataset_description, meta.dataset_identifier
    )
}

pub fn load_call(data_path: &str) -> String {
    format!("import pandas as pd\n\ndf = pd.read_csv(\"{data_path}\")\ndf.info()")
}

/// Prepends dataset context cells: a description text cell and, per schema
/// file, a load cell, its info output and an examples text cell.
pub fn kaggle_enrich(nb: &Notebook, meta: Option<&KaggleMeta>) -> Notebook {
    let Some(meta) = meta else { return nb.clone() };
    let mut cells = vec![Cell::markdown(dataset_header(meta))];
    for block in &meta.schema_blocks {
        cells.push(Cell::code(load_call(&block.data_path)));
        cells.push(Cell::output(block.info_text.clone()));
        cells.push(Cell::markdown(format!("Examples:\n{}", block.sample_rows_text)));
    }
    cells.extend(nb.cells.iter().cloned());
    Notebook { cells, ..nb.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SchemaBlock;
    use proptest::prelude::*;

    fn nb(cells: Vec<Cell>) -> Notebook {
        Notebook { id: "n".into(), repo_name: "o/r".into(), cells, declared_language: None, kaggle_meta: None }
    }

    struct Fixed(&'static str, f64);
    impl LanguageGuesser for Fixed {
        fn guess(&self, _: &str) -> Option<(String, f64)> {
            Some((self.0.into(), self.1))
        }
    }

    #[test]
    fn language_resolution() {
        let mut n = nb(vec![Cell::code("x <- 1")]);
        n.declared_language = Some("python".into());
        assert_eq!(notebook_language(&n, &Fixed("R", 0.9)).as_deref(), Some("Python"));
        n.declared_language = None;
        assert_eq!(notebook_language(&n, &Fixed("Python", 0.7)).as_deref(), Some("Python"));
        assert_eq!(notebook_language(&n, &Fixed("R", 0.4)), None);
        assert_eq!(notebook_language(&n, &Fixed("R", 0.5)).as_deref(), Some("R"));
        let py = nb(vec![Cell::code("import numpy as np\ndef f(x):\n    return np.sum(x)")]);
        assert_eq!(notebook_language(&py, &KeywordGuesser).as_deref(), Some("Python"));
        assert_eq!(notebook_language(&nb(vec![]), &KeywordGuesser), None);
    }

    #[test]
    fn script_form() {
        let n = nb(vec![Cell::markdown("Title"), Cell::code("x=1"), Cell::output("1")]);
        assert_eq!(to_script(&n, "Python"), "# Title\nx=1");
        let n = nb(vec![Cell::markdown("## Head\n\n- item"), Cell::code("a"), Cell::code("b")]);
        assert_eq!(to_script(&n, "Python"), "# ## Head\n#\n# - item\na\nb");
        assert_eq!(to_script(&nb(vec![Cell::markdown("T")]), "Scala"), "// T");
        assert_eq!(to_script(&nb(vec![]), "Python"), "");
    }

    #[test]
    fn structured_form() {
        let n = nb(vec![Cell::markdown("a"), Cell::markdown("b"), Cell::code("c"), Cell::output("o")]);
        assert_eq!(
            to_structured(&n).triplets,
            vec![Triplet { text: "a\n\nb".into(), code: "c".into(), output: Some("o".into()) }]
        );
        let n = nb(vec![Cell::code("c")]);
        assert_eq!(to_structured(&n).triplets[0].output, None);
        let n = nb(vec![Cell::code("c1"), Cell::output("out1"), Cell::code("c2"), Cell::output("out2")]);
        let t = to_structured(&n).triplets;
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].code.as_str(), t[0].output.as_deref()), ("c1\n\nc2", Some("out2")));
        let n = nb(vec![Cell::code("c1"), Cell::output("out1"), Cell::code("c2")]);
        assert_eq!(to_structured(&n).triplets[0].output, None);
        let n = nb(vec![Cell::code("c"), Cell::markdown("m"), Cell::code("d"), Cell::markdown("tail")]);
        let t = to_structured(&n).triplets;
        assert_eq!(t.len(), 3);
        assert_eq!(t[1].text, "m");
        assert_eq!((t[2].text.as_str(), t[2].code.as_str()), ("tail", ""));
    }

    fn long_script() -> String {
        (0..30).map(|i| format!("value_{i} = {i} * 2\n")).collect()
    }

    #[test]
    fn kaggle_cleaning() {
        let templates = bundled_templates();
        let body = long_script();
        assert_eq!(kaggle_clean(&"x = 1\n".repeat(13), &templates, &PythonSyntax), None);
        assert_eq!(kaggle_clean(&body, &templates, &PythonSyntax).as_deref(), Some(body.as_str()));
        let with_t2 = format!("{KAGGLE_TEMPLATE_2}\n{body}");
        assert_eq!(kaggle_clean(&with_t2, &templates, &PythonSyntax).as_deref(), Some(body.as_str()));
        let with_t1 = format!("{KAGGLE_TEMPLATE_1}\n{body}");
        assert_eq!(kaggle_clean(&with_t1, &templates, &PythonSyntax).as_deref(), Some(body.as_str()));
        let broken = format!("{body}def broken(:\n");
        assert_eq!(kaggle_clean(&broken, &templates, &PythonSyntax), None);
        let magic = format!("%matplotlib inline\n!pip install foo\n{body}");
        assert!(kaggle_clean(&magic, &templates, &PythonSyntax).is_some());
    }

    #[test]
    fn kaggle_enrichment() {
        let base = nb(vec![Cell::code("print(1)")]);
        assert_eq!(kaggle_enrich(&base, None), base);
        let mut meta = KaggleMeta {
            dataset_title: "Titanic".into(),
            dataset_description: "Passenger list".into(),
            dataset_identifier: "titanic".into(),
            schema_blocks: vec![],
        };
        let e = kaggle_enrich(&base, Some(&meta));
        assert_eq!(e.cells.len(), 2);
        assert_eq!(e.cells[0].text, "Titanic\nPassenger list\nKaggle dataset identifier: titanic");
        for p in ["train.csv", "test.csv"] {
            meta.schema_blocks.push(SchemaBlock { data_path: p.into(), info_text: "info".into(), sample_rows_text: "rows".into() });
        }
        let e = kaggle_enrich(&base, Some(&meta));
        assert_eq!(e.cells.len(), 8);
        assert!(e.cells[1].text.contains("train.csv"));
        assert!(e.cells[4].text.contains("test.csv"));
        assert_eq!(e.cells[3].text, "Examples:\nrows");
    }

    fn cell_strategy() -> impl Strategy<Value = Cell> {
        (0u8..3, "[a-z ]{0,8}").prop_map(|(k, t)| match k {
            0 => Cell::markdown(t),
            1 => Cell::code(t),
            _ => Cell::output(format!("OUT{t}")),
        })
    }

    proptest! {
        #[test]
        fn structured_keeps_all_code(cells in proptest::collection::vec(cell_strategy(), 0..20)) {
            let n = nb(cells.clone());
            let code_in: String = cells.iter().filter(|c| c.kind == CellKind::Code).map(|c| c.text.as_str()).collect();
            let code_out: String = to_structured(&n).triplets.iter().map(|t| t.code.replace("\n\n", "")).collect();
            prop_assert_eq!(code_out, code_in);
            let script = to_script(&n, "Python");
            prop_assert!(!script.contains("OUT"));
        }

        #[test]
        fn kaggle_clean_is_idempotent(prefix in 0usize..3, n in 0usize..40) {
            let templates = bundled_templates();
            let body: String = (0..n).map(|i| format!("v{i} = {i}\n")).collect();
            let script = match prefix {
                0 => body,
                1 => format!("{KAGGLE_TEMPLATE_2}\n{body}"),
                _ => format!("{KAGGLE_TEMPLATE_1}\n{KAGGLE_TEMPLATE_2}\n{body}"),
            };
            if let Some(once) = kaggle_clean(&script, &templates, &PythonSyntax) {
                prop_assert_eq!(kaggle_clean(&once, &templates, &PythonSyntax), Some(once.clone()));
            }
        }
    }
}
