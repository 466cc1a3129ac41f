//! Language labels: the classifier adapter, its bundled extension-based
//! fallback, and the static language/extension lists used by other stages.

use std::collections::{BTreeSet, HashSet};

use crate::model::{extension_of, file_name_of};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Classification {
    pub language: Option<String>,
    pub generated: bool,
}

/// Supplies a language label and a generated-code verdict for a file.
pub trait LanguageClassifier: Send + Sync {
    fn classify(&self, path: &str, content: &str) -> Classification;
}

/// Fallback classifier: maps file names and extensions to labels and never
/// reports generated code.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExtensionClassifier;

impl LanguageClassifier for ExtensionClassifier {
    fn classify(&self, path: &str, _content: &str) -> Classification {
        Classification { language: language_for_path(path).map(str::to_string), generated: false }
    }
}

const FILENAMES: &[(&str, &str)] = &[
    ("Dockerfile", "Dockerfile"),
    ("Makefile", "Makefile"),
    ("GNUmakefile", "Makefile"),
    ("CMakeLists.txt", "CMake"),
    ("go.mod", "Go Module"),
    ("pom.xml", "Maven POM"),
    ("build.xml", "Ant Build System"),
    ("Gemfile", "Ruby"),
    ("Rakefile", "Ruby"),
    ("yarn.lock", "YAML"),
];

const EXTENSIONS: &[(&str, &str)] = &[
    ("py", "Python"), ("pyw", "Python"), ("pyi", "Python"),
    ("rs", "Rust"),
    ("js", "JavaScript"), ("mjs", "JavaScript"), ("cjs", "JavaScript"), ("jsx", "JavaScript"),
    ("ts", "TypeScript"), ("tsx", "TypeScript"),
    ("java", "Java"),
    ("c", "C"), ("h", "C"),
    ("cpp", "C++"), ("cc", "C++"), ("cxx", "C++"), ("hpp", "C++"), ("hh", "C++"), ("hxx", "C++"),
    ("cs", "C#"),
    ("go", "Go"),
    ("rb", "Ruby"),
    ("php", "PHP"),
    ("kt", "Kotlin"), ("kts", "Kotlin"),
    ("swift", "Swift"),
    ("lua", "Lua"),
    ("r", "R"),
    ("sql", "SQL"),
    ("sh", "Shell"), ("bash", "Shell"), ("zsh", "Shell"),
    ("scala", "Scala"),
    ("jl", "Julia"),
    ("hs", "Haskell"),
    ("pl", "Perl"), ("pm", "Perl"),
    ("ps1", "PowerShell"),
    ("dart", "Dart"),
    ("m", "Objective-C"),
    ("vb", "Visual Basic"),
    ("f90", "Fortran"), ("f", "Fortran"),
    ("gradle", "Gradle"),
    ("cmake", "CMake"),
    ("mk", "Makefile"),
    ("html", "HTML"), ("htm", "HTML"),
    ("css", "CSS"),
    ("scss", "SCSS"),
    ("json", "JSON"),
    ("yaml", "YAML"), ("yml", "YAML"),
    ("xml", "XML"),
    ("md", "Markdown"), ("markdown", "Markdown"),
    ("txt", "Text"),
    ("tex", "TeX"),
    ("rst", "reStructuredText"),
    ("adoc", "AsciiDoc"), ("asciidoc", "AsciiDoc"),
    ("rdoc", "RDoc"),
    ("rmd", "RMarkdown"),
    ("toml", "TOML"),
    ("ini", "INI"),
    ("dot", "Graphviz (DOT)"), ("gv", "Graphviz (DOT)"),
    ("owl", "Web Ontology Language"),
    ("wat", "WebAssembly"), ("wast", "WebAssembly"),
    ("smt2", "SMT"), ("smt", "SMT"),
    ("roff", "Roff"),
    ("man", "Roff Manpage"),
    ("jsp", "Java Server Pages"),
    ("bib", "BibTeX"),
    ("po", "Gettext Catalog"),
    ("properties", "Java Properties"),
    ("smali", "Smali"),
    ("ipynb", "Jupyter Notebook"),
    ("asm", "Assembly"), ("s", "Assembly"),
    ("x68", "Motorola 68K Assembly"),
    ("csv", "CSV"),
    ("tsv", "TSV"),
    ("svg", "SVG"),
];

pub fn language_for_path(path: &str) -> Option<&'static str> {
    let name = file_name_of(path);
    if let Some((_, lang)) = FILENAMES.iter().find(|(f, _)| *f == name) {
        return Some(lang);
    }
    let ext = extension_of(path).to_ascii_lowercase();
    EXTENSIONS.iter().find(|(e, _)| *e == ext).map(|(_, l)| *l)
}

/// Programming languages of the small code variant.
pub const SMOL_PROGRAMMING: &[&str] = &[
    "C", "C#", "C++", "Go", "Java", "JavaScript", "Kotlin", "Lua", "PHP", "Python", "R", "Ruby",
    "Rust", "SQL", "Shell", "Swift", "TypeScript",
];

/// Documentation languages of the small code variant.
pub const SMOL_DOCUMENTATION: &[&str] =
    &["AsciiDoc", "HTML", "Markdown", "RDoc", "RMarkdown", "Text", "reStructuredText"];

/// Configuration languages of the small code variant.
pub const SMOL_CONFIG_LANGUAGES: &[&str] = &[
    "Ant Build System", "CMake", "Dockerfile", "Go Module", "Gradle", "INI", "Java Properties",
    "Makefile", "Maven POM", "TOML",
];

/// Configuration files (by exact file name) of the small code variant.
pub const SMOL_CONFIG_FILES: &[&str] = &[
    "CMakeLists.txt", "Cargo.toml", "DESCRIPTION", "Gemfile", "Makefile", "Makefile.am", "NAMESPACE",
    "Package.swift", "Pipfile", "build.gradle", "build.gradle.kts", "composer.json", "conda.yml",
    "configure.ac", "docker-compose.yaml", "docker-compose.yml", "go.mod", "package.json", "pom.xml",
    "pyproject.toml", "requirements-dev.txt", "requirements-prod.txt", "requirements.in",
    "requirements.test.txt", "requirements.txt", "setup.cfg", "tsconfig.json", "yarn.lock",
];

/// Whether a file belongs to the small code variant.
pub fn in_smol_set(language: Option<&str>, path: &str) -> bool {
    let by_language = language.is_some_and(|l| {
        SMOL_PROGRAMMING.contains(&l) || SMOL_DOCUMENTATION.contains(&l) || SMOL_CONFIG_LANGUAGES.contains(&l)
    });
    by_language || SMOL_CONFIG_FILES.contains(&file_name_of(path))
}

const EXCLUDED_EXTENSIONS: &str = include_str!("../data/excluded_extensions.tsv");
const EXCLUDED_LANGUAGES: &str = include_str!("../data/excluded_languages.txt");

fn data_lines(text: &str) -> impl Iterator<Item = &str> {
    text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    Language,
    Extension,
}

impl Exclusion {
    pub fn reason(self) -> &'static str {
        match self {
            Exclusion::Language => "excluded_language",
            Exclusion::Extension => "excluded_extension",
        }
    }
}

/// Languages and (language, extension) pairs removed after visual inspection.
#[derive(Debug, Clone, Default)]
pub struct ExclusionLists {
    languages: HashSet<String>,
    extensions: HashSet<(String, String)>,
}

impl ExclusionLists {
    pub fn bundled() -> Self {
        let languages = data_lines(EXCLUDED_LANGUAGES).map(|l| l.trim().to_string()).collect();
        let extensions = data_lines(EXCLUDED_EXTENSIONS)
            .filter_map(|l| l.split_once('\t'))
            .map(|(lang, ext)| (lang.to_string(), ext.trim().to_ascii_lowercase()))
            .collect();
        ExclusionLists { languages, extensions }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn check(&self, language: &str, extension: &str) -> Option<Exclusion> {
        if self.languages.contains(language) {
            Some(Exclusion::Language)
        } else if self.extensions.contains(&(language.to_string(), extension.to_ascii_lowercase())) {
            Some(Exclusion::Extension)
        } else {
            None
        }
    }

    pub fn language_count(&self) -> usize {
        self.languages.len()
    }

    pub fn extension_count(&self) -> usize {
        self.extensions.len()
    }
}

/// Every language label this crate knows about.
pub fn known_languages() -> BTreeSet<&'static str> {
    let mut all: BTreeSet<&'static str> = EXTENSIONS.iter().chain(FILENAMES).map(|(_, l)| *l).collect();
    all.extend(SMOL_PROGRAMMING);
    all.extend(SMOL_DOCUMENTATION);
    all.extend(SMOL_CONFIG_LANGUAGES);
    all.extend(data_lines(EXCLUDED_LANGUAGES).map(str::trim));
    all.extend(data_lines(EXCLUDED_EXTENSIONS).filter_map(|l| l.split_once('\t')).map(|(l, _)| l));
    all.extend([
        "Roff", "Roff Manpage", "SMT", "TeX", "Web Ontology Language", "Graphviz (DOT)", "Smali",
        "Java Server Pages", "BibTeX", "Gettext Catalog", "WebAssembly", "Motorola 68K Assembly",
    ]);
    all
}
