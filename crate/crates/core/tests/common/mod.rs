//! Deterministic synthetic corpus covering every input source.

#![allow(dead_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use codemill_core::pipeline::PipelineConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "value", "count", "index", "buffer", "node", "tree", "left", "right",
    "parse", "token", "stream", "reader", "writer", "config", "layer", "state", "result", "error", "item",
    "total", "limit", "offset", "cache", "entry", "field", "record", "query", "table", "column", "width",
];

pub const NEEDLE_TEXT: &str = "def has_close_elements(numbers, threshold):\n    \"\"\" Check if in given list of numbers, are any two numbers closer to each other than given threshold. \"\"\"";

fn ident(rng: &mut ChaCha8Rng) -> String {
    let a = WORDS.choose(rng).unwrap();
    let b = WORDS.choose(rng).unwrap();
    format!("{a}_{b}{}", rng.gen_range(0..1000))
}

/// A Python-looking file of roughly `target` bytes.
pub fn python_file(rng: &mut ChaCha8Rng, target: usize) -> String {
    let mut s = String::new();
    while s.len() < target {
        let name = ident(rng);
        let arg = ident(rng);
        s.push_str(&format!("def {name}({arg}):\n"));
        for _ in 0..rng.gen_range(2..6) {
            let v = ident(rng);
            s.push_str(&format!("    {v} = {arg} + {}\n", rng.gen_range(0..100)));
        }
        s.push_str(&format!("    return {arg}\n\n"));
    }
    s
}

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

fn write_jsonl(path: &Path, rows: &[Value]) {
    let mut f = fs::File::create(path).unwrap();
    for r in rows {
        serde_json::to_writer(&mut f, r).unwrap();
        f.write_all(b"\n").unwrap();
    }
}

fn code_rows(rng: &mut ChaCha8Rng, target_bytes: usize) -> Vec<Value> {
    let mut rows = Vec::new();
    let mut bytes = 0;
    let mut repo = 0;
    while bytes < target_bytes {
        repo += 1;
        let name = format!("org{}/repo{repo}", repo % 37);
        let license = match repo % 10 {
            0 => Some("GPL-3.0-only"),
            1 => None,
            _ => Some("MIT"),
        };
        for i in 0..rng.gen_range(1..8) {
            let content = match (repo + i) % 25 {
                0 => "x".repeat(1200) + "\n",
                1 => format!("# this file is auto-generated\n{}", python_file(rng, 400)),
                2 => format!("{NEEDLE_TEXT}\n{}", python_file(rng, 300)),
                _ => {
                    let n = rng.gen_range(500..4000);
                    python_file(rng, n)
                }
            };
            bytes += content.len();
            let mut row = json!({
                "repo_name": name,
                "path": format!("src/mod_{i}.py"),
                "content": content,
                "stars": rng.gen_range(0..500),
                "forks": rng.gen_range(0..50),
                "latest_commit_ts": 1_700_000_000 + rng.gen_range(0..1_000_000),
            });
            if let Some(l) = license {
                row["repo_license_spdx"] = json!(l);
            }
            rows.push(row.clone());
            if (repo + i) % 19 == 0 {
                let mut dup = row;
                dup["repo_name"] = json!(format!("fork{repo}/copy"));
                rows.push(dup);
            }
        }
        if license.is_none() {
            rows.push(json!({"repo_name": name, "path": "LICENSE", "content": "MIT License\n\nPermission is hereby granted, free of charge.\n"}));
        }
    }
    rows
}

fn pr_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| {
            let base = python_file(rng, 600);
            let head = base.replacen("return", "return  ", 1);
            let merged = i % 4 != 0;
            let author = if i % 13 == 0 { "renovate[bot]".to_string() } else { format!("dev{}", i % 17) };
            json!({
                "id": i,
                "title": format!("Improve {} handling", sentence(rng, 2)),
                "description": sentence(rng, 12),
                "author": author,
                "repo_name": format!("org{}/repo{}", i % 7, i % 11),
                "created_at": i,
                "status_events": [
                    {"kind": "opened", "author": author, "created_at": i},
                    {"kind": "closed", "merged": merged, "author": "maint", "created_at": i + 10},
                ],
                "base_files": [{"path": "src/lib.py", "content": base}],
                "heads": [{"commit_id": "h", "base_commit_id": "b", "created_at": i + 1,
                           "file_diffs": [{"path": "src/lib.py", "kind": "modified", "head_content": head}]}],
                "comments": [{"id": i * 10 + 1, "author": "reviewer", "body": sentence(rng, 8), "created_at": i + 2}],
                "license_state": "permissive",
            })
        })
        .collect()
}

fn issue_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| {
            let mut events = vec![json!({"author": format!("user{}", i % 23), "action": "opened", "body": sentence(rng, 30)})];
            let replies = rng.gen_range(1..5);
            for k in 0..replies {
                let author = if i % 11 == 0 && k == 0 { "github-actions[bot]".to_string() } else { format!("user{}", (i + k + 1) % 29) };
                events.push(json!({"author": author, "action": "created", "body": sentence(rng, 20)}));
            }
            let short = i % 9 == 0;
            json!({
                "id": format!("issue-{i}"),
                "repo_name": format!("org{}/repo{}", i % 7, i % 11),
                "title": if short { "x".to_string() } else { sentence(rng, 5) },
                "events": if short { vec![json!({"author": "a", "action": "opened", "body": "?"})] } else { events },
                "is_closed": i % 3 == 0,
            })
        })
        .collect()
}

fn notebook_rows(rng: &mut ChaCha8Rng, n: usize, kaggle: bool) -> Vec<Value> {
    (0..n)
        .map(|i| {
            let mut cells = vec![json!({"kind": "markdown", "text": sentence(rng, 6)})];
            let code = if kaggle && i % 6 == 0 { "def broken(:\n".to_string() } else { python_file(rng, 200) };
            cells.push(json!({"kind": "code", "text": code}));
            cells.push(json!({"kind": "output", "text": format!("{}", rng.gen_range(0..1000))}));
            cells.push(json!({"kind": "code", "text": format!("print({})", ident(rng))}));
            let mut row = json!({
                "id": format!("{}-{i}", if kaggle { "kg" } else { "nb" }),
                "repo_name": format!("org{}/nb{}", i % 5, i),
                "cells": cells,
                "declared_language": "python",
            });
            if kaggle && i % 2 == 0 {
                row["kaggle_meta"] = json!({
                    "dataset_title": format!("Dataset {i}"),
                    "dataset_description": sentence(rng, 6),
                    "dataset_identifier": format!("owner/ds{i}"),
                    "schema_blocks": [{"data_path": format!("/kaggle/input/ds{i}/train.csv"),
                                       "info_text": "RangeIndex: 10 entries", "sample_rows_text": "1,2\n3,4"}],
                });
            }
            row
        })
        .collect()
}

fn qa_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| {
            let count = if i % 7 == 3 { rng.gen_range(1..3) } else { rng.gen_range(3..6) };
            let answers: Vec<Value> = (0..count)
                .map(|k| {
                    let mut a = json!({"author": format!("se{}", k + i), "body": sentence(rng, 15),
                                       "upvotes": rng.gen_range(-2..40), "selected": k == 0 && i % 2 == 0});
                    if i % 10 != 0 {
                        a["quality_score"] = json!(if i % 5 == 0 { 0.05 } else { 0.9 });
                    }
                    a
                })
                .collect();
            json!({"id": format!("q{i}"), "question": sentence(rng, 20), "answers": answers})
        })
        .collect()
}

fn ir_rows(rng: &mut ChaCha8Rng, n: usize) -> Vec<Value> {
    (0..n)
        .map(|i| {
            let f = ident(rng);
            json!({
                "id": format!("ir{i}"),
                "language": "C",
                "code": format!("int {f}(int x) {{ return x * {i}; }}"),
                "ir_size_opt": format!("define i32 @{f}(i32 %0) minsize {{\n  %2 = mul i32 %0, {i}\n  ret i32 %2\n}}"),
                "ir_perf_opt": format!("define i32 @{f}(i32 %0) {{\n  %2 = mul nsw i32 %0, {i}\n  ret i32 %2\n}}"),
            })
        })
        .collect()
}

/// Writes every input file under `dir` and returns a config pointing at
/// them. Source code makes up most of `code_bytes`.
pub fn write_corpus(dir: &Path, seed: u64, code_bytes: usize) -> PipelineConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = |name: &str| -> PathBuf { dir.join(name) };
    write_jsonl(&p("code.jsonl"), &code_rows(&mut rng, code_bytes));
    let scale = (code_bytes / 20_000).max(10);
    write_jsonl(&p("prs.jsonl"), &pr_rows(&mut rng, scale));
    write_jsonl(&p("issues.jsonl"), &issue_rows(&mut rng, scale * 2));
    write_jsonl(&p("jupyter.jsonl"), &notebook_rows(&mut rng, scale, false));
    write_jsonl(&p("kaggle.jsonl"), &notebook_rows(&mut rng, scale, true));
    write_jsonl(&p("qa.jsonl"), &qa_rows(&mut rng, scale));
    write_jsonl(&p("ir.jsonl"), &ir_rows(&mut rng, scale));
    write_jsonl(&p("needles.jsonl"), &[json!({"benchmark": "humaneval", "kind": "prompt", "text": NEEDLE_TEXT})]);
    fs::write(p("optout.txt"), "org3/repo3\n").unwrap();

    let mut cfg = PipelineConfig { seed, output_dir: dir.join("out"), ..PipelineConfig::default() };
    cfg.inputs.source_code = Some(p("code.jsonl"));
    cfg.inputs.pull_requests = Some(p("prs.jsonl"));
    cfg.inputs.issues = Some(p("issues.jsonl"));
    cfg.inputs.jupyter = Some(p("jupyter.jsonl"));
    cfg.inputs.kaggle = Some(p("kaggle.jsonl"));
    cfg.inputs.stackexchange = Some(p("qa.jsonl"));
    cfg.inputs.ir_pairs = Some(p("ir.jsonl"));
    cfg.resources.needles = Some(p("needles.jsonl"));
    cfg.resources.optout = Some(p("optout.txt"));
    cfg
}

/// Total bytes of every input file the config names.
pub fn input_bytes(cfg: &PipelineConfig) -> u64 {
    codemill_core::pipeline::Source::ALL
        .iter()
        .filter_map(|s| cfg.inputs.get(*s))
        .map(|p| fs::metadata(p).unwrap().len())
        .sum()
}
