//! MinHash-LSH near-deduplication.
//!
//! Files are shingled into word 5-grams, signed with `num_permutations`
//! keyed hashes, and bucketed by `bands` × `rows` LSH. Candidate pairs whose
//! signature agreement reaches `threshold` are joined with union-find; each
//! resulting cluster keeps its best-provenance file.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use xxhash_rust::xxh3::xxh3_64;

use crate::model::SourceFile;
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DedupConfig {
    pub num_permutations: usize,
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
    pub ngram: usize,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig { num_permutations: 250, bands: 25, rows: 10, threshold: 0.7, ngram: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DedupError {
    #[error("cannot sign an empty shingle set")]
    EmptyShingleSet,
    #[error("invalid dedup config: {0}")]
    Config(String),
    #[error("signature has {got} values, index expects {want}")]
    SignatureLength { got: usize, want: usize },
}

impl DedupConfig {
    pub fn validate(&self) -> Result<(), DedupError> {
        if self.bands == 0 || self.rows == 0 || self.ngram == 0 {
            return Err(DedupError::Config("bands, rows and ngram must be positive".into()));
        }
        if self.bands * self.rows > self.num_permutations {
            return Err(DedupError::Config(format!(
                "bands × rows = {} exceeds num_permutations = {}",
                self.bands * self.rows,
                self.num_permutations
            )));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DedupError::Config(format!("threshold {} outside [0, 1]", self.threshold)));
        }
        Ok(())
    }
}

/// Lowercased tokens split on every non-alphanumeric run.
pub fn tokens(content: &str) -> Vec<String> {
    content
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

/// Sorted, deduplicated digests of every `n` consecutive tokens. Texts with
/// fewer than `n` tokens yield one digest of the whole token sequence; texts
/// without tokens yield none.
pub fn shingle_n(content: &str, n: usize) -> Vec<u64> {
    let toks = tokens(content);
    if toks.is_empty() {
        return Vec::new();
    }
    let digest = |w: &[String]| xxh3_64(w.join(" ").as_bytes());
    let mut out: Vec<u64> = if toks.len() < n { vec![digest(&toks)] } else { toks.windows(n).map(digest).collect() };
    out.sort_unstable();
    out.dedup();
    out
}

pub fn shingle(content: &str) -> Vec<u64> {
    shingle_n(content, 5)
}

/// Keyed permutation family derived from the run seed.
#[derive(Debug, Clone)]
pub struct Permutations {
    keys: Vec<u64>,
}

fn fmix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^ (k >> 33)
}

impl Permutations {
    pub fn new(count: usize, seed: u64) -> Self {
        Permutations { keys: (0..count).map(|i| derive_seed(seed, "minhash", &i.to_string())).collect() }
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinHashSignature {
    pub values: Vec<u64>,
    pub content_id: String,
}

impl MinHashSignature {
    /// Fraction of positions on which the two signatures agree.
    pub fn agreement(&self, other: &MinHashSignature) -> f64 {
        let same = self.values.iter().zip(&other.values).filter(|(a, b)| a == b).count();
        same as f64 / self.values.len().max(1) as f64
    }
}

pub fn minhash(shingles: &[u64], perms: &Permutations, content_id: &str) -> Result<MinHashSignature, DedupError> {
    if shingles.is_empty() {
        return Err(DedupError::EmptyShingleSet);
    }
    let mut values = vec![u64::MAX; perms.len()];
    for &s in shingles {
        for (v, &key) in values.iter_mut().zip(&perms.keys) {
            *v = (*v).min(fmix64(s ^ key));
        }
    }
    Ok(MinHashSignature { values, content_id: content_id.to_string() })
}

/// Banded LSH buckets. Entries are caller-chosen ids (indices).
#[derive(Debug, Clone)]
pub struct LshIndex {
    bands: usize,
    rows: usize,
    tables: Vec<HashMap<u64, Vec<usize>>>,
}

impl LshIndex {
    pub fn new(bands: usize, rows: usize) -> Self {
        LshIndex { bands, rows, tables: vec![HashMap::new(); bands] }
    }

    fn band_digests<'a>(&'a self, sig: &'a MinHashSignature) -> impl Iterator<Item = u64> + 'a {
        (0..self.bands).map(move |b| {
            let rows = &sig.values[b * self.rows..(b + 1) * self.rows];
            let bytes: Vec<u8> = rows.iter().flat_map(|v| v.to_le_bytes()).collect();
            xxh3_64(&bytes)
        })
    }

    fn check(&self, sig: &MinHashSignature) -> Result<(), DedupError> {
        if sig.values.len() < self.bands * self.rows {
            return Err(DedupError::SignatureLength { got: sig.values.len(), want: self.bands * self.rows });
        }
        Ok(())
    }

    pub fn insert(&mut self, id: usize, sig: &MinHashSignature) -> Result<(), DedupError> {
        self.check(sig)?;
        let digests: Vec<u64> = self.band_digests(sig).collect();
        for (table, d) in self.tables.iter_mut().zip(digests) {
            table.entry(d).or_default().push(id);
        }
        Ok(())
    }

    /// Ids sharing at least one band with `sig`, ascending.
    pub fn candidates(&self, sig: &MinHashSignature) -> Result<Vec<usize>, DedupError> {
        self.check(sig)?;
        let mut out: Vec<usize> = self
            .band_digests(sig)
            .zip(&self.tables)
            .filter_map(|(d, t)| t.get(&d))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Number of bands in which `sig` shares a bucket with id `other`.
    pub fn shared_bands(&self, sig: &MinHashSignature, other: usize) -> usize {
        self.band_digests(sig)
            .zip(&self.tables)
            .filter(|(d, t)| t.get(d).is_some_and(|ids| ids.contains(&other)))
            .count()
    }
}

/// Provenance fields used to pick a cluster's representative.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance<'a> {
    pub content_id: &'a str,
    pub repo_name: &'a str,
    pub path: &'a str,
    pub stars: u64,
    pub forks: u64,
    pub latest_commit_ts: i64,
}

impl<'a> From<&'a SourceFile> for Provenance<'a> {
    fn from(f: &'a SourceFile) -> Self {
        Provenance {
            content_id: &f.content_id,
            repo_name: &f.repo_name,
            path: &f.path,
            stars: f.stars,
            forks: f.forks,
            latest_commit_ts: f.latest_commit_ts,
        }
    }
}

/// `Less` means `a` is the better representative.
pub fn representative_order(a: &Provenance, b: &Provenance) -> Ordering {
    b.stars
        .cmp(&a.stars)
        .then(b.forks.cmp(&a.forks))
        .then(b.latest_commit_ts.cmp(&a.latest_commit_ts))
        .then(a.repo_name.cmp(b.repo_name))
        .then(a.path.cmp(b.path))
}

/// Index of the preferred member of a non-empty cluster.
pub fn select_representative(cluster: &[Provenance]) -> usize {
    (0..cluster.len())
        .min_by(|&i, &j| representative_order(&cluster[i], &cluster[j]))
        .expect("cluster is non-empty")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupDecision {
    pub content_id: String,
    pub cluster_id: String,
    pub kept: bool,
    pub repo_name: String,
    pub path: String,
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupStats {
    pub files: usize,
    pub clusters: usize,
    pub dropped: usize,
    pub candidate_pairs: usize,
    pub verified_pairs: usize,
    /// Files without any token; grouped by exact content only.
    pub tokenless: usize,
}

/// Clusters `files` and returns one decision per input, in input order.
///
/// The kept set depends only on the multiset of inputs and `seed`, not on
/// input order or the size of `pool`.
pub fn dedup_stream(
    files: &[SourceFile],
    cfg: &DedupConfig,
    seed: u64,
    pool: &rayon::ThreadPool,
) -> Result<(Vec<DedupDecision>, DedupStats), DedupError> {
    cfg.validate()?;
    let perms = Permutations::new(cfg.num_permutations, seed);
    let sigs: Vec<Option<Vec<u64>>> = pool.install(|| {
        files
            .par_iter()
            .map(|f| {
                let sh = shingle_n(&f.content, cfg.ngram);
                minhash(&sh, &perms, &f.content_id).ok().map(|s| s.values)
            })
            .collect()
    });

    let mut uf = UnionFind::new(files.len());
    let mut stats = DedupStats { files: files.len(), ..Default::default() };

    // Identical signatures (and identical tokenless content) collapse first.
    let mut by_sig: HashMap<&[u64], usize> = HashMap::new();
    let mut tokenless: HashMap<&str, usize> = HashMap::new();
    let mut unique: Vec<usize> = Vec::new();
    for (i, sig) in sigs.iter().enumerate() {
        match sig {
            Some(values) => match by_sig.get(values.as_slice()) {
                Some(&first) => uf.union(first, i),
                None => {
                    by_sig.insert(values, i);
                    unique.push(i);
                }
            },
            None => {
                stats.tokenless += 1;
                let first = *tokenless.entry(files[i].content_id.as_str()).or_insert(i);
                uf.union(first, i);
            }
        }
    }

    // Canonical processing order so union-find sees the same edges regardless of input order.
    unique.sort_by(|&a, &b| sigs[a].cmp(&sigs[b]));
    let as_sig = |i: usize| MinHashSignature { values: sigs[i].clone().unwrap(), content_id: String::new() };
    let mut index = LshIndex::new(cfg.bands, cfg.rows);
    for (slot, &i) in unique.iter().enumerate() {
        let sig = as_sig(i);
        for other_slot in index.candidates(&sig)? {
            stats.candidate_pairs += 1;
            let j = unique[other_slot];
            if uf.find(i) == uf.find(j) {
                continue;
            }
            if sig.agreement(&as_sig(j)) >= cfg.threshold {
                stats.verified_pairs += 1;
                uf.union(i, j);
            }
        }
        index.insert(slot, &sig)?;
    }

    let mut clusters: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..files.len() {
        let root = uf.find(i);
        clusters.entry(root).or_default().push(i);
    }
    stats.clusters = clusters.len();
    let mut rep_of = vec![0usize; files.len()];
    for members in clusters.values() {
        let prov: Vec<Provenance> = members.iter().map(|&m| Provenance::from(&files[m])).collect();
        let rep = members[select_representative(&prov)];
        for &m in members {
            rep_of[m] = rep;
        }
    }
    let decisions: Vec<DedupDecision> = files
        .iter()
        .enumerate()
        .map(|(i, f)| DedupDecision {
            content_id: f.content_id.clone(),
            cluster_id: files[rep_of[i]].content_id.clone(),
            kept: rep_of[i] == i,
            repo_name: f.repo_name.clone(),
            path: f.path.clone(),
        })
        .collect();
    stats.dropped = decisions.iter().filter(|d| !d.kept).count();
    Ok((decisions, stats))
}

/// Convenience wrapper that builds a pool with `workers` threads.
pub fn dedup_with_workers(
    files: &[SourceFile],
    cfg: &DedupConfig,
    seed: u64,
    workers: usize,
) -> Result<(Vec<DedupDecision>, DedupStats), DedupError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool builds");
    dedup_stream(files, cfg, seed, &pool)
}
