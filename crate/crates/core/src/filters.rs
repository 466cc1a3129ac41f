//! Basic and language-specific file quality filters.
//!
//! Every filter returns a [`FilterVerdict`]; [`run_filter_chain`] applies them
//! in a fixed order and reports the first drop.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::model::SourceFile;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterReason {
    TooManyLines,
    AvgLineLen,
    MaxLineLen,
    Autogenerated,
    LowAlpha,
    EncodedData,
    DataFileLines,
    HtmlLowText,
    TextFilename,
    Kept,
}

impl FilterReason {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterReason::TooManyLines => "too_many_lines",
            FilterReason::AvgLineLen => "avg_line_len",
            FilterReason::MaxLineLen => "max_line_len",
            FilterReason::Autogenerated => "autogenerated",
            FilterReason::LowAlpha => "low_alpha",
            FilterReason::EncodedData => "encoded_data",
            FilterReason::DataFileLines => "data_file_lines",
            FilterReason::HtmlLowText => "html_low_text",
            FilterReason::TextFilename => "text_filename",
            FilterReason::Kept => "kept",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub keep: bool,
    pub reason: FilterReason,
    pub detail: String,
}

impl FilterVerdict {
    pub fn kept() -> Self {
        FilterVerdict { keep: true, reason: FilterReason::Kept, detail: String::new() }
    }

    pub fn drop(reason: FilterReason, detail: impl Into<String>) -> Self {
        debug_assert!(reason != FilterReason::Kept);
        FilterVerdict { keep: false, reason, detail: detail.into() }
    }
}

/// Thresholds and language sets. Defaults are the published values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub max_lines: usize,
    pub max_mean_line_len: f64,
    pub max_line_len: usize,
    pub exempt_max_line_len: usize,
    pub line_len_exempt_languages: Vec<String>,
    pub autogenerated_phrases: Vec<String>,
    pub autogenerated_scan_lines: usize,
    pub min_alpha_fraction: f64,
    pub alphanumeric_languages: Vec<String>,
    pub encoded_max_match_len: usize,
    pub encoded_max_fraction: f64,
    pub data_file_languages: Vec<String>,
    pub data_file_max_lines: usize,
    pub html_min_visible_chars: usize,
    pub html_min_visible_fraction: f64,
    pub text_filename_substrings: Vec<String>,
    pub text_filename_stems: Vec<String>,
    /// Remove a trailing `'\r'` from each line before measuring its length.
    pub strip_carriage_return: bool,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_lines: 100_000,
            max_mean_line_len: 100.0,
            max_line_len: 1000,
            exempt_max_line_len: 100_000,
            line_len_exempt_languages: strings(&[
                "HTML", "JSON", "Markdown", "Roff", "Roff Manpage", "SMT", "TeX", "Text", "XML",
            ]),
            autogenerated_phrases: strings(&[
                "auto-generated",
                "autogenerated",
                "automatically generated",
                "generated automatically",
                "this file is generated",
            ]),
            autogenerated_scan_lines: 5,
            min_alpha_fraction: 0.25,
            alphanumeric_languages: strings(&["Motorola 68K Assembly", "WebAssembly"]),
            encoded_max_match_len: 1024,
            encoded_max_fraction: 0.5,
            data_file_languages: strings(&["Text", "JSON", "YAML", "Web Ontology Language", "Graphviz (DOT)"]),
            data_file_max_lines: 512,
            html_min_visible_chars: 100,
            html_min_visible_fraction: 0.2,
            text_filename_substrings: strings(&["requirement"]),
            text_filename_stems: strings(&["readme", "notes", "todo", "description", "cmakelists"]),
            strip_carriage_return: false,
        }
    }
}

fn contains(set: &[String], language: &str) -> bool {
    set.iter().any(|l| l == language)
}

pub fn long_line_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let n = text::line_count(&f.content);
    if n > cfg.max_lines {
        return FilterVerdict::drop(FilterReason::TooManyLines, format!("{n} lines"));
    }
    if n == 0 {
        return FilterVerdict::kept();
    }
    let (mut total, mut longest) = (0usize, 0usize);
    for line in text::lines(&f.content) {
        let line = if cfg.strip_carriage_return { line.strip_suffix('\r').unwrap_or(line) } else { line };
        let len = text::char_len(line);
        total += len;
        longest = longest.max(len);
    }
    if contains(&cfg.line_len_exempt_languages, f.language()) {
        if longest > cfg.exempt_max_line_len {
            return FilterVerdict::drop(FilterReason::MaxLineLen, format!("longest line {longest} chars"));
        }
        return FilterVerdict::kept();
    }
    if longest > cfg.max_line_len {
        return FilterVerdict::drop(FilterReason::MaxLineLen, format!("longest line {longest} chars"));
    }
    let mean = total as f64 / n as f64;
    if mean > cfg.max_mean_line_len {
        return FilterVerdict::drop(FilterReason::AvgLineLen, format!("mean line length {mean:.1}"));
    }
    FilterVerdict::kept()
}

pub fn autogenerated_filter(f: &SourceFile, generated_flag: bool, cfg: &FilterConfig) -> FilterVerdict {
    if generated_flag {
        return FilterVerdict::drop(FilterReason::Autogenerated, "classifier flag");
    }
    for (i, line) in text::lines(&f.content).take(cfg.autogenerated_scan_lines).enumerate() {
        let lower = line.to_lowercase();
        if let Some(p) = cfg.autogenerated_phrases.iter().find(|p| lower.contains(p.as_str())) {
            return FilterVerdict::drop(FilterReason::Autogenerated, format!("`{p}` on line {}", i + 1));
        }
    }
    FilterVerdict::kept()
}

pub fn alpha_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let alnum = contains(&cfg.alphanumeric_languages, f.language());
    let (mut hits, mut total) = (0usize, 0usize);
    for c in f.content.chars() {
        total += 1;
        if c.is_alphabetic() || (alnum && c.is_numeric()) {
            hits += 1;
        }
    }
    let frac = if total == 0 { 0.0 } else { hits as f64 / total as f64 };
    if frac < cfg.min_alpha_fraction {
        FilterVerdict::drop(FilterReason::LowAlpha, format!("{frac:.3} {}", if alnum { "alphanumeric" } else { "alphabetic" }))
    } else {
        FilterVerdict::kept()
    }
}

static ENCODED_PATTERNS: LazyLock<[Regex; 3]> = LazyLock::new(|| {
    [
        Regex::new(r"[a-zA-Z0-9+/\n=]{64,}").unwrap(),
        Regex::new(r"(?:\b(?:0x|\\x)?[0-9a-fA-F]{2}(?:,|\b\s*)){8,}").unwrap(),
        Regex::new(r"(?:\\u[0-9a-fA-F]{4}){8,}").unwrap(),
    ]
});

/// Byte ranges matched by the base64, hex and unicode-escape patterns.
pub fn encoded_ranges(content: &str) -> Vec<Range<usize>> {
    ENCODED_PATTERNS
        .iter()
        .flat_map(|re| re.find_iter(content).map(|m| m.range()))
        .collect()
}

/// Byte ranges matched by the hex-sequence pattern alone.
pub fn hex_ranges(content: &str) -> impl Iterator<Item = Range<usize>> + '_ {
    ENCODED_PATTERNS[1].find_iter(content).map(|m| m.range())
}

fn merge(mut ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    ranges.sort_by_key(|r| (r.start, r.end));
    let mut out: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
            _ => out.push(r),
        }
    }
    out
}

pub fn encoded_data_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let ranges = encoded_ranges(&f.content);
    if ranges.is_empty() {
        return FilterVerdict::kept();
    }
    let content = f.content.as_str();
    for r in &ranges {
        let len = text::char_len(&content[r.clone()]);
        if len > cfg.encoded_max_match_len {
            return FilterVerdict::drop(FilterReason::EncodedData, format!("match of {len} chars"));
        }
    }
    let matched: usize = merge(ranges).into_iter().map(|r| text::char_len(&content[r])).sum();
    let total = text::char_len(content);
    let frac = matched as f64 / total as f64;
    if frac > cfg.encoded_max_fraction {
        return FilterVerdict::drop(FilterReason::EncodedData, format!("{frac:.3} of file is encoded"));
    }
    FilterVerdict::kept()
}

pub fn data_file_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let n = text::line_count(&f.content);
    if n > cfg.data_file_max_lines {
        FilterVerdict::drop(FilterReason::DataFileLines, format!("{n} lines"))
    } else {
        FilterVerdict::kept()
    }
}

static TAG_NAME_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^</?\s*([A-Za-z][A-Za-z0-9-]*)").unwrap());

/// Visible text of an HTML document: tags removed, comments and the contents
/// of `script`, `style` and `head` removed, whitespace runs collapsed to one
/// space. `None` when a tag or comment is never closed.
pub fn visible_html_text(html: &str) -> Option<String> {
    let mut out = String::new();
    let mut rest = html;
    let mut hidden: Option<String> = None;
    while let Some(lt) = rest.find('<') {
        if hidden.is_none() {
            out.push_str(&rest[..lt]);
        }
        rest = &rest[lt..];
        if rest.starts_with("<!--") {
            let end = rest.find("-->")?;
            rest = &rest[end + 3..];
            continue;
        }
        let gt = rest.find('>')?;
        let tag = &rest[..=gt];
        rest = &rest[gt + 1..];
        let Some(cap) = TAG_NAME_RE.captures(tag) else {
            // A bare '<' that does not open a tag is text.
            if !tag.starts_with("<!") && !tag.starts_with("<?") && hidden.is_none() {
                out.push_str(tag);
            }
            continue;
        };
        let name = cap[1].to_ascii_lowercase();
        let closing = tag.starts_with("</");
        match &hidden {
            Some(h) if closing && *h == name => hidden = None,
            None if !closing && !tag.ends_with("/>") && matches!(name.as_str(), "script" | "style" | "head") => {
                hidden = Some(name)
            }
            _ => {}
        }
    }
    if hidden.is_none() {
        out.push_str(rest);
    }
    Some(out.split_whitespace().collect::<Vec<_>>().join(" "))
}

pub fn html_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let visible = visible_html_text(&f.content).map_or(0, |t| text::char_len(&t));
    let total = text::char_len(&f.content);
    if visible < cfg.html_min_visible_chars || (visible as f64) < cfg.html_min_visible_fraction * total as f64 {
        FilterVerdict::drop(FilterReason::HtmlLowText, format!("{visible} visible of {total} chars"))
    } else {
        FilterVerdict::kept()
    }
}

pub fn text_filename_filter(f: &SourceFile, cfg: &FilterConfig) -> FilterVerdict {
    let name = f.file_name().to_lowercase();
    let stem = name.rsplit_once('.').map_or(name.as_str(), |(s, _)| s);
    if cfg.text_filename_substrings.iter().any(|s| name.contains(s.as_str()))
        || cfg.text_filename_stems.iter().any(|s| s == stem)
    {
        FilterVerdict::kept()
    } else {
        FilterVerdict::drop(FilterReason::TextFilename, name)
    }
}

/// Applies long_line, autogenerated, alpha, encoded_data and then the
/// language-specific filters; the first drop wins.
pub fn run_filter_chain(f: &SourceFile, generated_flag: bool, cfg: &FilterConfig) -> FilterVerdict {
    let lang = f.language();
    let general = [
        long_line_filter(f, cfg),
        autogenerated_filter(f, generated_flag, cfg),
        alpha_filter(f, cfg),
        encoded_data_filter(f, cfg),
    ];
    if let Some(v) = general.into_iter().find(|v| !v.keep) {
        return v;
    }
    if contains(&cfg.data_file_languages, lang) {
        let v = data_file_filter(f, cfg);
        if !v.keep {
            return v;
        }
    }
    if lang == "HTML" {
        let v = html_filter(f, cfg);
        if !v.keep {
            return v;
        }
    }
    if lang == "Text" {
        return text_filename_filter(f, cfg);
    }
    FilterVerdict::kept()
}

/// Re-runs only the filter named by `reason`.
pub fn rerun_single(reason: FilterReason, f: &SourceFile, generated_flag: bool, cfg: &FilterConfig) -> FilterVerdict {
    match reason {
        FilterReason::TooManyLines | FilterReason::AvgLineLen | FilterReason::MaxLineLen => long_line_filter(f, cfg),
        FilterReason::Autogenerated => autogenerated_filter(f, generated_flag, cfg),
        FilterReason::LowAlpha => alpha_filter(f, cfg),
        FilterReason::EncodedData => encoded_data_filter(f, cfg),
        FilterReason::DataFileLines => data_file_filter(f, cfg),
        FilterReason::HtmlLowText => html_filter(f, cfg),
        FilterReason::TextFilename => text_filename_filter(f, cfg),
        FilterReason::Kept => FilterVerdict::kept(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn file(lang: &str, path: &str, content: &str) -> SourceFile {
        SourceFile::new("o/r", path, content).with_language(lang)
    }

    fn cfg() -> FilterConfig {
        FilterConfig::default()
    }

    #[test]
    fn long_lines() {
        let content = format!("{}\n{}\n{}\n", "a".repeat(2000), "b".repeat(5), "c".repeat(5));
        assert_eq!(long_line_filter(&file("Python", "a.py", &content), &cfg()).reason, FilterReason::MaxLineLen);
        let json = "x".repeat(50_000);
        assert!(long_line_filter(&file("JSON", "a.json", &json), &cfg()).keep);
        assert!(long_line_filter(&file("Python", "a.py", ""), &cfg()).keep);
        let mean = format!("{}\n", "a".repeat(150)).repeat(3);
        assert_eq!(long_line_filter(&file("Python", "a.py", &mean), &cfg()).reason, FilterReason::AvgLineLen);
        let many = "a\n".repeat(100_001);
        assert_eq!(long_line_filter(&file("Text", "a.txt", &many), &cfg()).reason, FilterReason::TooManyLines);
        assert_eq!(
            long_line_filter(&file("Markdown", "a.md", &"m".repeat(100_001)), &cfg()).reason,
            FilterReason::MaxLineLen
        );
    }

    #[test]
    fn carriage_returns_count_unless_stripped() {
        let line = format!("{}\r\n", "a".repeat(1000));
        let stripped = FilterConfig { strip_carriage_return: true, ..cfg() };
        assert_eq!(long_line_filter(&file("C", "a.c", &line), &cfg()).reason, FilterReason::MaxLineLen);
        let with_short = format!("{line}{}", "x\r\n".repeat(20));
        assert!(!long_line_filter(&file("C", "a.c", &with_short), &cfg()).keep);
        assert!(long_line_filter(&file("C", "a.c", &with_short), &stripped).keep);
    }

    #[test]
    fn autogenerated_phrases() {
        let f = file("C", "a.c", "int x;\n// This file is GENERATED automatically\n");
        assert_eq!(autogenerated_filter(&f, false, &cfg()).reason, FilterReason::Autogenerated);
        let late = "l\n".repeat(5) + "// auto-generated\n";
        assert!(autogenerated_filter(&file("C", "a.c", &late), false, &cfg()).keep);
        assert!(!autogenerated_filter(&file("C", "a.c", "int x;"), true, &cfg()).keep);
    }

    #[test]
    fn alpha_fractions() {
        assert!(alpha_filter(&file("Python", "a", "abcd"), &cfg()).keep);
        assert_eq!(alpha_filter(&file("Python", "a", "1234 5678 90"), &cfg()).reason, FilterReason::LowAlpha);
        assert!(alpha_filter(&file("WebAssembly", "a.wat", "1234"), &cfg()).keep);
        assert!(!alpha_filter(&file("Python", "a", ""), &cfg()).keep);
        assert!(alpha_filter(&file("Python", "a", "привет мир"), &cfg()).keep);
    }

    #[test]
    fn encoded_data() {
        let b64 = "A".repeat(1100);
        assert_eq!(encoded_data_filter(&file("C", "a", &b64), &cfg()).reason, FilterReason::EncodedData);
        assert!(encoded_data_filter(&file("C", "a", "x\\u0041yzw"), &cfg()).keep);
        // 20 space-separated hex pairs (60 chars) in a 100-char file.
        let hex: String = (0..20).map(|i| format!("{:02x} ", (i * 7 + 16) % 256)).collect();
        let padded = format!("{hex}{}", "; q; ".repeat(8));
        assert_eq!(text::char_len(&padded), 100);
        assert_eq!(encoded_data_filter(&file("C", "a", &padded), &cfg()).reason, FilterReason::EncodedData);
    }

    #[test]
    fn data_files() {
        let n = |k: usize| "{}\n".repeat(k);
        assert_eq!(data_file_filter(&file("JSON", "a", &n(513)), &cfg()).reason, FilterReason::DataFileLines);
        assert!(data_file_filter(&file("YAML", "a", &n(512)), &cfg()).keep);
        assert!(data_file_filter(&file("Text", "a", "one"), &cfg()).keep);
    }

    #[test]
    fn html_visible_text() {
        let prose = "word ".repeat(40);
        let prose = prose.trim_end();
        assert_eq!(text::char_len(prose), 199);
        let page = format!("<p>{prose}.</p>{}", " ".repeat(43));
        assert_eq!(text::char_len(&page), 250);
        assert!(html_filter(&file("HTML", "a.html", &page), &cfg()).keep);
        let soup = "<div><span></span><br/></div>".repeat(10);
        assert_eq!(html_filter(&file("HTML", "a.html", &soup), &cfg()).reason, FilterReason::HtmlLowText);
        let sparse = format!("<p>{}</p><script>{}</script>", "t".repeat(120), "x".repeat(10_000 - 120 - 24));
        assert_eq!(text::char_len(&sparse), 10_000);
        assert_eq!(html_filter(&file("HTML", "a.html", &sparse), &cfg()).reason, FilterReason::HtmlLowText);
        assert_eq!(visible_html_text("<head><title>T</title></head><b>a</b>  b<!-- c -->").unwrap(), "a b");
        assert_eq!(visible_html_text("a < b"), None);
        assert_eq!(visible_html_text("1 <> 2").unwrap(), "1 <> 2");
    }

    #[test]
    fn text_filenames() {
        assert!(text_filename_filter(&file("Text", "requirements-dev.txt", ""), &cfg()).keep);
        assert!(text_filename_filter(&file("Text", "docs/README.TXT", ""), &cfg()).keep);
        assert_eq!(text_filename_filter(&file("Text", "ideas.txt", ""), &cfg()).reason, FilterReason::TextFilename);
    }

    #[test]
    fn chain_order() {
        let both = "0".repeat(1100);
        assert_eq!(run_filter_chain(&file("JSON", "a.json", &both), false, &cfg()).reason, FilterReason::LowAlpha);
        let clean = "def add(a, b):\n    return a + b\n";
        assert!(run_filter_chain(&file("Python", "a.py", clean), false, &cfg()).keep);
        let json = "1,\n".repeat(513);
        assert_eq!(run_filter_chain(&file("JSON", "a.json", &json), false, &cfg()).reason, FilterReason::LowAlpha);
        let words = "word,\n".repeat(513);
        assert_eq!(run_filter_chain(&file("JSON", "a.json", &words), false, &cfg()).reason, FilterReason::DataFileLines);
    }

    #[test]
    fn config_parses_partial_toml() {
        let c: FilterConfig = toml::from_str("max_lines = 10\n").unwrap();
        assert_eq!(c.max_lines, 10);
        assert_eq!(c.max_line_len, 1000);
    }

    proptest! {
        #[test]
        fn drops_are_reproducible_by_the_named_filter(
            content in "[a-f0-9 \\n{}=+/]{0,400}",
            lang in prop::sample::select(vec!["Python", "JSON", "Text", "HTML", "WebAssembly"]),
            generated in any::<bool>(),
        ) {
            let f = file(lang, "notes.txt", &content);
            let v = run_filter_chain(&f, generated, &cfg());
            prop_assert_eq!(v.keep, v.reason == FilterReason::Kept);
            if !v.keep {
                prop_assert!(!rerun_single(v.reason, &f, generated, &cfg()).keep);
            }
            prop_assert_eq!(v, run_filter_chain(&f, generated, &cfg()));
        }
    }
}
