//! File-level license assignment.
//!
//! A repository-level license, when present, decides every file. Otherwise
//! licenses detected in license-like files are propagated down the directory
//! tree and a file is permissive only when every license reaching it is.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::sync::LazyLock;

use aho_corasick::{AhoCorasick, MatchKind};
use regex::Regex;
use thiserror::Error;

use crate::model::{file_name_of, LicenseState, SourceFile};

#[derive(Debug, Error)]
pub enum LicenseError {
    #[error("license state is undetermined")]
    Undetermined,
    #[error("catalog line {line}: {message}")]
    Catalog { line: usize, message: String },
    #[error("reading catalog {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

const BUNDLED_CATALOG: &str = include_str!("../data/permissive_licenses.txt");

/// Permissive license ids plus the ids that never count as licenses
/// (contributor agreements, disclaimers). Lookups ignore ASCII case.
#[derive(Debug, Clone)]
pub struct PermissiveCatalog {
    spdx_ids: HashSet<String>,
    non_license_ids: HashSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LicenseClass {
    Permissive,
    NotPermissive,
    /// Ignored by every decision.
    NotALicense,
}

impl PermissiveCatalog {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_CATALOG).expect("bundled catalog is well-formed")
    }

    pub fn load(path: &Path) -> Result<Self, LicenseError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| LicenseError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parses the plain-text catalog: `[permissive]` and `[non-license]`
    /// section headers followed by one id per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LicenseError> {
        let mut spdx_ids = HashSet::new();
        let mut non_license_ids = HashSet::new();
        let mut section: Option<&mut HashSet<String>> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[permissive]" => section = Some(&mut spdx_ids),
                "[non-license]" => section = Some(&mut non_license_ids),
                _ if line.starts_with('[') => {
                    return Err(LicenseError::Catalog { line: idx + 1, message: format!("unknown section {line}") })
                }
                id => match section.as_deref_mut() {
                    Some(set) => {
                        set.insert(id.to_ascii_lowercase());
                    }
                    None => {
                        return Err(LicenseError::Catalog {
                            line: idx + 1,
                            message: "id before any section header".into(),
                        })
                    }
                },
            }
        }
        if let Some(both) = spdx_ids.intersection(&non_license_ids).next() {
            return Err(LicenseError::Catalog {
                line: 0,
                message: format!("`{both}` is listed as both permissive and non-license"),
            });
        }
        Ok(PermissiveCatalog { spdx_ids, non_license_ids })
    }

    pub fn classify(&self, id: &str) -> LicenseClass {
        let id = id.trim().to_ascii_lowercase();
        if self.non_license_ids.contains(&id) {
            LicenseClass::NotALicense
        } else if self.spdx_ids.contains(&id) {
            LicenseClass::Permissive
        } else {
            LicenseClass::NotPermissive
        }
    }

    pub fn is_permissive(&self, id: &str) -> bool {
        self.classify(id) == LicenseClass::Permissive
    }

    pub fn is_non_license(&self, id: &str) -> bool {
        self.classify(id) == LicenseClass::NotALicense
    }

    /// Whether the id appears in either list; unknown ids fail closed.
    pub fn is_known(&self, id: &str) -> bool {
        let id = id.trim().to_ascii_lowercase();
        self.spdx_ids.contains(&id) || self.non_license_ids.contains(&id)
    }

    pub fn permissive_count(&self) -> usize {
        self.spdx_ids.len()
    }

    pub fn non_license_count(&self) -> usize {
        self.non_license_ids.len()
    }

    fn all_ids(&self) -> impl Iterator<Item = &str> {
        self.spdx_ids.iter().chain(&self.non_license_ids).map(String::as_str)
    }
}

const LICENSE_FILE_NAMES: &[&str] = &[
    r"li[cs]en[cs]e(s?)",
    r"legal",
    r"copy(left|right|ing)",
    r"unlicense",
    r"[al]?gpl([-_ v]?)(\d\.?\d?)?",
    r"bsd(l?)",
    r"mit(x?)",
    r"apache",
    r"artistic",
    r"copying(v?)(\d?)",
    r"disclaimer",
    r"eupl",
    r"gfdl",
    r"[cm]pl",
    r"cc0",
    r"al([-_ v]?)(\d\.?\d)?",
    r"about",
    r"notice",
    r"readme",
    r"guidelines",
];

static LICENSE_FILE_RE: LazyLock<Regex> = LazyLock::new(|| {
    let names = LICENSE_FILE_NAMES.join("|");
    Regex::new(&format!(r"(?i)^(|.*[-_. ])({names})(|[-_. ].*)$")).unwrap()
});

/// Whether the file name could hold a license or a reference to one.
pub fn is_license_file(path: &str) -> bool {
    LICENSE_FILE_RE.is_match(file_name_of(path))
}

fn parent_dir(path: &str) -> &str {
    path.rfind('/').map_or("", |i| &path[..i])
}

/// `dir` is `ancestor` itself or lies beneath it.
fn dir_is_within(dir: &str, ancestor: &str) -> bool {
    ancestor.is_empty()
        || dir == ancestor
        || (dir.len() > ancestor.len() && dir.starts_with(ancestor) && dir.as_bytes()[ancestor.len()] == b'/')
}

/// Gives every file the union of licenses detected in license files whose
/// directory is the file's directory or one of its ancestors.
pub fn propagate_detected<'a>(
    repo_paths: impl IntoIterator<Item = &'a str>,
    detections: &BTreeMap<String, Vec<String>>,
) -> BTreeMap<String, BTreeSet<String>> {
    let sources: Vec<(&str, &Vec<String>)> =
        detections.iter().map(|(p, ids)| (parent_dir(p), ids)).collect();
    repo_paths
        .into_iter()
        .map(|path| {
            let dir = parent_dir(path);
            let ids = sources
                .iter()
                .filter(|(license_dir, _)| dir_is_within(dir, license_dir))
                .flat_map(|(_, ids)| ids.iter().cloned())
                .collect();
            (path.to_string(), ids)
        })
        .collect()
}

/// The license decision flow for one file.
pub fn assign_license_state(
    repo_license: Option<&str>,
    file_detections: &[String],
    catalog: &PermissiveCatalog,
) -> LicenseState {
    let repo_license = repo_license
        .map(str::trim)
        .filter(|l| !l.is_empty() && !catalog.is_non_license(l));
    if let Some(repo) = repo_license {
        return if catalog.is_permissive(repo) {
            LicenseState::Permissive
        } else {
            LicenseState::NonPermissive
        };
    }
    let mut detected = file_detections.iter().filter(|id| !catalog.is_non_license(id)).peekable();
    if detected.peek().is_none() {
        return LicenseState::NoLicense;
    }
    if detected.all(|id| catalog.is_permissive(id)) {
        LicenseState::Permissive
    } else {
        LicenseState::NonPermissive
    }
}

/// Permissive and unlicensed files are admitted; copyleft and other
/// non-permissive files are not.
pub fn admit_by_license(state: LicenseState) -> Result<bool, LicenseError> {
    match state {
        LicenseState::Permissive | LicenseState::NoLicense => Ok(true),
        LicenseState::NonPermissive => Ok(false),
        LicenseState::Undetermined => Err(LicenseError::Undetermined),
    }
}

/// Maps license-file text to detected license ids.
pub trait LicenseDetector: Send + Sync {
    fn detect(&self, path: &str, text: &str) -> Vec<String>;
}

/// Common copyleft and restrictive ids, so the fallback detector can report
/// them even though they are absent from the permissive catalog.
const NON_PERMISSIVE_IDS: &[&str] = &[
    "GPL-1.0-only", "GPL-1.0-or-later", "GPL-2.0", "GPL-2.0-only", "GPL-2.0-or-later", "GPL-3.0",
    "GPL-3.0-only", "GPL-3.0-or-later", "LGPL-2.0-only", "LGPL-2.0-or-later", "LGPL-2.1",
    "LGPL-2.1-only", "LGPL-2.1-or-later", "LGPL-3.0", "LGPL-3.0-only", "LGPL-3.0-or-later",
    "AGPL-1.0-only", "AGPL-3.0", "AGPL-3.0-only", "AGPL-3.0-or-later", "MPL-1.1", "MPL-2.0",
    "EPL-1.0", "EPL-2.0", "EUPL-1.1", "EUPL-1.2", "CDDL-1.0", "CDDL-1.1", "CC-BY-SA-4.0",
    "CC-BY-NC-4.0", "CC-BY-NC-SA-4.0", "CC-BY-ND-4.0", "CC0-1.0", "OSL-3.0", "SSPL-1.0",
    "BUSL-1.1", "Unlicense", "WTFPL",
];

/// Fallback detector: reports ids from `SPDX-License-Identifier:` lines and
/// whole-word mentions of catalog or well-known ids. No text classification.
pub struct SpdxMentionDetector {
    matcher: AhoCorasick,
    ids: Vec<String>,
}

static SPDX_TAG_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"SPDX-License-Identifier:\s*([^\r\n*]+)").unwrap());

impl SpdxMentionDetector {
    pub fn new(catalog: &PermissiveCatalog) -> Self {
        let mut ids: Vec<String> = catalog
            .all_ids()
            .map(str::to_string)
            .chain(NON_PERMISSIVE_IDS.iter().map(|s| s.to_ascii_lowercase()))
            .collect();
        ids.sort();
        ids.dedup();
        // Very short ids ("al", "doc") would fire on ordinary prose.
        ids.retain(|id| id.len() >= 3 && id != "doc" && id != "fair" && id != "json");
        let matcher = AhoCorasick::builder()
            .ascii_case_insensitive(true)
            .match_kind(MatchKind::LeftmostLongest)
            .build(&ids)
            .expect("license id automaton builds");
        SpdxMentionDetector { matcher, ids }
    }
}

fn is_id_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'+' | b'_')
}

impl LicenseDetector for SpdxMentionDetector {
    fn detect(&self, _path: &str, text: &str) -> Vec<String> {
        let mut found = BTreeSet::new();
        for cap in SPDX_TAG_RE.captures_iter(text) {
            for token in cap[1].split(|c: char| c.is_whitespace() || c == '(' || c == ')') {
                if !token.is_empty() && !matches!(token, "AND" | "OR" | "WITH" | "and" | "or" | "with") {
                    found.insert(token.to_string());
                }
            }
        }
        let bytes = text.as_bytes();
        for m in self.matcher.find_iter(text) {
            let before = m.start().checked_sub(1).map(|i| bytes[i]);
            let after = bytes.get(m.end()).copied();
            // "MIT." at a sentence end is still a mention of MIT.
            let after_ok = match after {
                None => true,
                Some(b'.') => bytes.get(m.end() + 1).map_or(true, |b| !b.is_ascii_alphanumeric()),
                Some(b) => !is_id_char(b),
            };
            if before.map_or(true, |b| !is_id_char(b)) && after_ok {
                found.insert(text[m.start()..m.end()].to_string());
            }
        }
        let _ = &self.ids;
        found.into_iter().collect()
    }
}

/// Counters from assigning one repository.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssignmentStats {
    pub license_files: usize,
    /// Repo-level ids absent from both catalog lists.
    pub unknown_repo_license: bool,
}

/// Assigns `license_state` (and the propagated `detected_spdx`) to every file
/// of one repository.
///
/// A license file's own `detected_spdx`, when supplied by an upstream scanner,
/// is used as its detection; otherwise `detector` reads its content.
pub fn assign_repository(
    files: &mut [SourceFile],
    catalog: &PermissiveCatalog,
    detector: &dyn LicenseDetector,
) -> AssignmentStats {
    let mut stats = AssignmentStats::default();
    let repo_license = files
        .iter()
        .find_map(|f| f.repo_license_spdx.clone())
        .filter(|l| !l.trim().is_empty() && !catalog.is_non_license(l.trim()));
    if let Some(repo) = repo_license.as_deref() {
        stats.unknown_repo_license = !catalog.is_known(repo);
        let state = assign_license_state(Some(repo), &[], catalog);
        for f in files.iter_mut() {
            f.license_state = state;
        }
        return stats;
    }

    let mut detections = BTreeMap::new();
    for f in files.iter().filter(|f| is_license_file(&f.path)) {
        stats.license_files += 1;
        let ids = if f.detected_spdx.is_empty() {
            detector.detect(&f.path, &f.content)
        } else {
            f.detected_spdx.clone()
        };
        if !ids.is_empty() {
            detections.insert(f.path.clone(), ids);
        }
    }
    let propagated = propagate_detected(files.iter().map(|f| f.path.as_str()), &detections);
    for f in files.iter_mut() {
        let ids: Vec<String> = propagated.get(&f.path).map(|s| s.iter().cloned().collect()).unwrap_or_default();
        f.license_state = assign_license_state(None, &ids, catalog);
        f.detected_spdx = ids;
    }
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn bundled_catalog_sizes() {
        let c = PermissiveCatalog::bundled();
        assert_eq!(c.permissive_count(), 300 + 491);
        assert_eq!(c.non_license_count(), 10);
    }

    #[test]
    fn license_file_names() {
        assert!(is_license_file("LICENSE"));
        assert!(is_license_file("MIT.txt"));
        // The published pattern needs a separator after the name token.
        assert!(!is_license_file("Apache2.0"));
        assert!(is_license_file("Apache-2.0.txt"));
        assert!(is_license_file("README.md"));
        assert!(is_license_file("GUIDELINES"));
        assert!(is_license_file("docs/copying-v3.txt"));
        assert!(is_license_file("COPYING3"));
        assert!(is_license_file("lib/AGPLv3"));
        assert!(is_license_file("license-mit"));
        assert!(!is_license_file("src/main.rs"));
        assert!(!is_license_file("licensed_software.c"));
        assert!(!is_license_file("submit.py"));
    }

    #[test]
    fn permissive_lookup() {
        let c = PermissiveCatalog::bundled();
        assert!(c.is_permissive("MIT"));
        assert!(c.is_permissive("mit"));
        assert!(c.is_permissive("LicenseRef-scancode-other-permissive"));
        assert!(!c.is_permissive("GPL-3.0-only"));
        assert_eq!(c.classify("LicenseRef-scancode-generic-cla"), LicenseClass::NotALicense);
        assert!(!c.is_known("Totally-Made-Up-1.0"));
    }

    #[test]
    fn catalog_rejects_overlap_and_orphans() {
        assert!(PermissiveCatalog::parse("[permissive]\nMIT\n[non-license]\nmit\n").is_err());
        assert!(PermissiveCatalog::parse("MIT\n").is_err());
        assert!(PermissiveCatalog::parse("[other]\n").is_err());
    }

    #[test]
    fn propagation_examples() {
        let paths = ["LICENSE", "src/a.c", "sub/LICENSE", "sub/x.c", "other/b.c", "subdir/y.c"];
        let root_only: BTreeMap<_, _> = [("LICENSE".to_string(), ids(&["MIT"]))].into();
        let out = propagate_detected(paths, &root_only);
        assert_eq!(out["src/a.c"], ["MIT".to_string()].into());

        let sub_only: BTreeMap<_, _> = [("sub/LICENSE".to_string(), ids(&["Apache-2.0"]))].into();
        let out = propagate_detected(paths, &sub_only);
        assert!(out["other/b.c"].is_empty());
        assert!(out["subdir/y.c"].is_empty());
        assert_eq!(out["sub/x.c"], ["Apache-2.0".to_string()].into());

        let both: BTreeMap<_, _> = [
            ("LICENSE".to_string(), ids(&["MIT"])),
            ("sub/LICENSE".to_string(), ids(&["GPL-3.0-only"])),
        ]
        .into();
        let out = propagate_detected(paths, &both);
        assert_eq!(out["sub/x.c"], ["GPL-3.0-only".to_string(), "MIT".to_string()].into());
    }

    #[test]
    fn decision_flow_examples() {
        let c = PermissiveCatalog::bundled();
        assert_eq!(assign_license_state(Some("Apache-2.0"), &ids(&["GPL-3.0-only"]), &c), LicenseState::Permissive);
        assert_eq!(assign_license_state(None, &[], &c), LicenseState::NoLicense);
        assert_eq!(assign_license_state(None, &ids(&["MIT", "GPL-3.0-only"]), &c), LicenseState::NonPermissive);
        assert_eq!(assign_license_state(Some("Made-Up"), &[], &c), LicenseState::NonPermissive);
        assert_eq!(
            assign_license_state(None, &ids(&["LicenseRef-scancode-generic-cla"]), &c),
            LicenseState::NoLicense
        );
    }

    #[test]
    fn admission() {
        assert!(admit_by_license(LicenseState::Permissive).unwrap());
        assert!(admit_by_license(LicenseState::NoLicense).unwrap());
        assert!(!admit_by_license(LicenseState::NonPermissive).unwrap());
        assert!(matches!(admit_by_license(LicenseState::Undetermined), Err(LicenseError::Undetermined)));
    }

    #[test]
    fn fallback_detector_reads_mentions_and_tags() {
        let c = PermissiveCatalog::bundled();
        let d = SpdxMentionDetector::new(&c);
        assert_eq!(d.detect("LICENSE", "Released under the MIT license."), ids(&["MIT"]));
        assert_eq!(
            d.detect("x.c", "// SPDX-License-Identifier: Apache-2.0 OR GPL-2.0-only\n"),
            ids(&["Apache-2.0", "GPL-2.0-only"])
        );
        assert!(d.detect("README", "permitted by the admit rule").is_empty());
        assert_eq!(d.detect("COPYING", "Licensed under gpl-3.0-only terms"), ids(&["gpl-3.0-only"]));
    }

    #[test]
    fn repository_assignment_uses_scanner_detections_first() {
        let c = PermissiveCatalog::bundled();
        let d = SpdxMentionDetector::new(&c);
        let mut lic = SourceFile::new("o/r", "LICENSE", "whatever text");
        lic.detected_spdx = ids(&["BSD-3-Clause"]);
        let mut files = vec![lic, SourceFile::new("o/r", "src/a.py", "x = 1\n")];
        assign_repository(&mut files, &c, &d);
        assert!(files.iter().all(|f| f.license_state == LicenseState::Permissive));
        assert_eq!(files[1].detected_spdx, ids(&["BSD-3-Clause"]));

        let mut files = vec![SourceFile::new("o/r", "COPYING", "GNU GPL-3.0-or-later"), SourceFile::new("o/r", "a.c", "")];
        assign_repository(&mut files, &c, &d);
        assert_eq!(files[1].license_state, LicenseState::NonPermissive);

        let mut files = vec![SourceFile::new("o/r", "a.c", "")];
        files[0].repo_license_spdx = Some("Weird-1.0".into());
        let stats = assign_repository(&mut files, &c, &d);
        assert!(stats.unknown_repo_license);
        assert_eq!(files[0].license_state, LicenseState::NonPermissive);

        // A contributor agreement at repo level defers to the license files.
        let mut lic = SourceFile::new("o/r", "LICENSE", "");
        lic.detected_spdx = ids(&["MIT"]);
        let mut files = vec![lic, SourceFile::new("o/r", "a.c", "")];
        files.iter_mut().for_each(|f| f.repo_license_spdx = Some("LicenseRef-scancode-generic-cla".into()));
        let stats = assign_repository(&mut files, &c, &d);
        assert!(!stats.unknown_repo_license);
        assert_eq!(files[1].license_state, LicenseState::Permissive);
    }

    fn any_id() -> impl Strategy<Value = String> {
        prop::sample::select(vec!["MIT", "Apache-2.0", "BSD-2-Clause", "GPL-3.0-only", "Made-Up-1.0", "ISC"])
            .prop_map(str::to_string)
    }

    proptest! {
        #[test]
        fn non_license_ids_never_change_the_result(
            repo in proptest::option::of(any_id()),
            mut dets in proptest::collection::vec(any_id(), 0..5),
            at in 0usize..6,
        ) {
            let c = PermissiveCatalog::bundled();
            let before = assign_license_state(repo.as_deref(), &dets, &c);
            dets.insert(at.min(dets.len()), "LicenseRef-scancode-warranty-disclaimer".into());
            prop_assert_eq!(before, assign_license_state(repo.as_deref(), &dets, &c));
        }

        #[test]
        fn propagation_is_monotone(
            extra_dir in prop::sample::select(vec!["", "a/", "a/b/", "c/"]),
            id in any_id(),
        ) {
            let paths = ["LICENSE", "a/x.c", "a/b/y.c", "c/z.c", "a/LICENSE", "a/b/LICENSE", "c/LICENSE"];
            let base: BTreeMap<_, _> = [("a/LICENSE".to_string(), vec!["MIT".to_string()])].into();
            let mut more = base.clone();
            more.entry(format!("{extra_dir}LICENSE")).or_default().push(id);
            let before = propagate_detected(paths, &base);
            let after = propagate_detected(paths, &more);
            for (path, ids) in &before {
                prop_assert!(ids.is_subset(&after[path]));
            }
        }
    }
}
