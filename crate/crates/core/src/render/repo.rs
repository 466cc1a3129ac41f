use rand::Rng;

use super::{doc_rng, document, guard, RenderConfig, RenderError, EOS};
use crate::model::{content_id, Sentinel, SourceFile, SourceKind, TrainingDocument};
use crate::rng::{bernoulli, derive_rng};

const REPO_NAME: &str = Sentinel::RepoName.as_str();
const FILE_SEP: &str = Sentinel::FileSep.as_str();
const FIM_PREFIX: &str = Sentinel::FimPrefix.as_str();
const FIM_SUFFIX: &str = Sentinel::FimSuffix.as_str();
const FIM_MIDDLE: &str = Sentinel::FimMiddle.as_str();

/// Concatenates one repository's files, in the given order, with or
/// without the repository name and paths.
pub fn render_repo(repo_name: &str, files: &[SourceFile], cfg: &RenderConfig) -> Result<TrainingDocument, RenderError> {
    if files.is_empty() {
        return Err(RenderError::EmptyFileList);
    }
    guard("repo_name", repo_name)?;
    for f in files {
        guard("path", &f.path)?;
        guard("content", &f.content)?;
    }
    let (seed, mut rng) = doc_rng(cfg.seed, repo_name, SourceKind::CodeRepo);
    let with_meta = bernoulli(&mut rng, cfg.p_repo_meta);
    let mut text = String::new();
    if with_meta {
        text.push_str(REPO_NAME);
        text.push_str(repo_name);
    }
    for f in files {
        text.push_str(FILE_SEP);
        if with_meta {
            text.push_str(&f.path);
            text.push('\n');
        }
        text.push_str(&f.content);
    }
    text.push_str(EOS);
    let ids = files.iter().map(|f| f.content_id.clone()).collect();
    Ok(document(text, SourceKind::CodeRepo, ids, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chunk<'a> {
    Separator(&'a str),
    Text(&'a str),
}

/// Splits a repository document on end-of-text and file-separator tokens,
/// keeping the tokens. Empty text pieces are omitted.
pub fn split_chunks(text: &str) -> Vec<Chunk<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while !rest.is_empty() {
        let next = [FILE_SEP, EOS].iter().filter_map(|t| rest.find(t).map(|i| (i, *t))).min();
        match next {
            Some((i, tok)) => {
                if i > 0 {
                    out.push(Chunk::Text(&rest[..i]));
                }
                out.push(Chunk::Separator(tok));
                rest = &rest[i + tok.len()..];
            }
            None => {
                out.push(Chunk::Text(rest));
                rest = "";
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FimSplit {
    pub prefix: String,
    pub middle: String,
    pub suffix: String,
}

impl FimSplit {
    pub fn render(&self) -> String {
        format!("{FIM_PREFIX}{}{FIM_SUFFIX}{}{FIM_MIDDLE}{}", self.prefix, self.suffix, self.middle)
    }
}

/// Cuts `chunk[code_start..]` at two uniformly drawn character positions;
/// everything before `code_start` stays in the prefix.
pub fn fim_split<R: Rng + ?Sized>(chunk: &str, code_start: usize, rng: &mut R) -> FimSplit {
    let code = &chunk[code_start..];
    let n = code.chars().count();
    let mut cuts = [rng.gen_range(0..=n), rng.gen_range(0..=n)];
    cuts.sort_unstable();
    let byte = |c: usize| code.char_indices().nth(c).map_or(code.len(), |(b, _)| b) + code_start;
    let (a, b) = (byte(cuts[0]), byte(cuts[1]));
    FimSplit { prefix: chunk[..a].to_string(), middle: chunk[a..b].to_string(), suffix: chunk[b..].to_string() }
}

/// Repository-level FIM: the document is a candidate with `p_fim_repo`, and
/// each file chunk of a candidate is transformed with `p_fim_chunk`. The
/// `<repo_name>` chunk is never transformed.
pub fn fim_transform(doc: &TrainingDocument, cfg: &RenderConfig) -> TrainingDocument {
    let mut rng = derive_rng(cfg.seed, &content_id(doc.text.as_bytes()), "fim");
    if doc.source_kind != SourceKind::CodeRepo || !bernoulli(&mut rng, cfg.p_fim_repo) {
        return doc.clone();
    }
    let with_meta = doc.text.starts_with(REPO_NAME);
    let mut text = String::with_capacity(doc.text.len() + 64);
    let mut applied = false;
    for chunk in split_chunks(&doc.text) {
        match chunk {
            Chunk::Separator(t) => text.push_str(t),
            Chunk::Text(t) if t.starts_with(REPO_NAME) => text.push_str(t),
            Chunk::Text(t) => {
                if bernoulli(&mut rng, cfg.p_fim_chunk) {
                    let code_start = if with_meta { t.find('\n').map_or(t.len(), |i| i + 1) } else { 0 };
                    text.push_str(&fim_split(t, code_start, &mut rng).render());
                    applied = true;
                } else {
                    text.push_str(t);
                }
            }
        }
    }
    TrainingDocument { text, fim_applied: doc.fim_applied || applied, ..doc.clone() }
}

/// Inverse of the FIM rewrite: every `<fim_prefix>P<fim_suffix>S<fim_middle>M`
/// chunk becomes `PMS`.
pub fn undo_fim(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for chunk in split_chunks(text) {
        match chunk {
            Chunk::Separator(t) => out.push_str(t),
            Chunk::Text(t) => match t.strip_prefix(FIM_PREFIX).and_then(|r| {
                let (pre, rest) = r.split_once(FIM_SUFFIX)?;
                let (suf, mid) = rest.split_once(FIM_MIDDLE)?;
                Some((pre, mid, suf))
            }) {
                Some((pre, mid, suf)) => {
                    out.push_str(pre);
                    out.push_str(mid);
                    out.push_str(suf);
                }
                None => out.push_str(t),
            },
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(p_meta: f64, p_repo: f64, p_chunk: f64) -> RenderConfig {
        RenderConfig { p_repo_meta: p_meta, p_fim_repo: p_repo, p_fim_chunk: p_chunk, ..RenderConfig::default() }
    }

    #[test]
    fn repo_templates() {
        let one = [SourceFile::new("r", "p", "C")];
        assert_eq!(render_repo("r", &one, &cfg(1.0, 0.0, 0.0)).unwrap().text, "<repo_name>r<file_sep>p\nC<|endoftext|>");
        assert_eq!(render_repo("r", &one, &cfg(0.0, 0.0, 0.0)).unwrap().text, "<file_sep>C<|endoftext|>");
        let two = [SourceFile::new("r", "a.py", "A"), SourceFile::new("r", "b.py", "B")];
        assert_eq!(
            render_repo("r", &two, &cfg(1.0, 0.0, 0.0)).unwrap().text,
            "<repo_name>r<file_sep>a.py\nA<file_sep>b.py\nB<|endoftext|>"
        );
        assert_eq!(render_repo("r", &[], &cfg(1.0, 0.0, 0.0)), Err(RenderError::EmptyFileList));
        let bad = [SourceFile::new("r", "p", "x <file_sep> y")];
        assert_eq!(render_repo("r", &bad, &cfg(1.0, 0.0, 0.0)).unwrap_err().reason(), "sentinel_collision");
    }

    #[test]
    fn fim_branches() {
        let files = [SourceFile::new("r", "a.py", "print(1)\n"), SourceFile::new("r", "b.py", "x = 2\n")];
        let doc = render_repo("r", &files, &cfg(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(fim_transform(&doc, &cfg(1.0, 0.0, 1.0)), doc);
        let all = fim_transform(&doc, &cfg(1.0, 1.0, 1.0));
        assert!(all.fim_applied);
        assert!(all.text.starts_with("<repo_name>r<file_sep><fim_prefix>a.py\n"));
        assert_eq!(all.text.matches(FIM_PREFIX).count(), 2);
        assert_eq!(undo_fim(&all.text), doc.text);
    }

    #[test]
    fn forced_split_points() {
        let mut rng = rand::rngs::mock::StepRng::new(0, 0);
        let s = fim_split("abcdef", 0, &mut rng);
        assert_eq!((s.prefix.as_str(), s.middle.as_str(), s.suffix.as_str()), ("", "", "abcdef"));
        assert_eq!(s.render(), "<fim_prefix><fim_suffix>abcdef<fim_middle>");
    }

    #[test]
    fn chunking() {
        let c = split_chunks("<repo_name>r<file_sep>p\nx<file_sep>q\ny<|endoftext|>");
        assert_eq!(
            c,
            vec![
                Chunk::Text("<repo_name>r"),
                Chunk::Separator("<file_sep>"),
                Chunk::Text("p\nx"),
                Chunk::Separator("<file_sep>"),
                Chunk::Text("q\ny"),
                Chunk::Separator("<|endoftext|>"),
            ]
        );
    }

    proptest! {
        #[test]
        fn split_reconstructs(chunk in "[a-zé\\n ]{0,40}", start_frac in 0.0f64..1.0, seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = crate::rng::ChoiceRng::seed_from_u64(seed);
            let chars: Vec<(usize, char)> = chunk.char_indices().collect();
            let k = (start_frac * chars.len() as f64) as usize;
            let start = chars.get(k).map_or(chunk.len(), |c| c.0);
            let s = fim_split(&chunk, start, &mut rng);
            prop_assert_eq!(format!("{}{}{}", s.prefix, s.middle, s.suffix), chunk.clone());
            prop_assert!(s.prefix.len() >= start);
        }

        #[test]
        fn transform_round_trips(contents in proptest::collection::vec("[a-z\\n ]{0,30}", 1..6), seed in any::<u64>(), meta in any::<bool>()) {
            let files: Vec<SourceFile> = contents.iter().enumerate().map(|(i, c)| SourceFile::new("r", format!("f{i}.py"), c.clone())).collect();
            let c = RenderConfig { seed, ..cfg(if meta { 1.0 } else { 0.0 }, 1.0, 0.5) };
            let doc = render_repo("r", &files, &c).unwrap();
            let fim = fim_transform(&doc, &c);
            prop_assert_eq!(undo_fim(&fim.text), doc.text.clone());
            if meta {
                prop_assert!(fim.text.starts_with("<repo_name>r<file_sep>"));
            }
        }
    }
}
