// SPDX-License-Identifier: Apache-2.0

//! Persistent rule store with cosine top-k retrieval.
//!
//! File layout (UTF-8, one JSON object per line):
//!
//! ```text
//! {"kind":"rtlopt-rule-library","format":1,"embedder":"tfidf-hash-4096","dim":4096,"threshold":0.7}
//! {"id":"rule-0001","snippet":…,"condition":…,"action":…,"score":…,"provenance":{"pair_id":…,"attempt":…},"embedding":[…]}
//! ```
//!
//! Rules are appended as they are accepted; [`RuleLibrary::compact`] rewrites
//! the file from memory. Embedders whose vectors depend on the whole corpus
//! (the hashed TF-IDF fallback) are refitted and every rule re-embedded on
//! load and on add, so stored vectors for such embedders are snapshots.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{retrieval_text, Rule};
use crate::tfidf::{idf, tokens};

pub const LIBRARY_KIND: &str = "rtlopt-rule-library";
pub const LIBRARY_FORMAT: u32 = 1;
pub const DEFAULT_THRESHOLD: f64 = 0.7;
pub const DEFAULT_TOP_K: usize = 3;

pub trait Embedder: Send + Sync {
    /// Identifies the vector space; libraries refuse a different embedder.
    fn fingerprint(&self) -> String;
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
    /// Refits corpus statistics; only meaningful when `corpus_dependent`.
    fn refit(&mut self, _corpus: &[String]) {}
    fn corpus_dependent(&self) -> bool {
        false
    }
}

pub const HASHED_DIM: usize = 4096;

/// TF-IDF over a hashed vocabulary of 4096 buckets (FNV-1a of each token).
#[derive(Debug, Clone)]
pub struct HashedTfIdf {
    docs: usize,
    df: Vec<u32>,
}

impl Default for HashedTfIdf {
    fn default() -> Self {
        HashedTfIdf {
            docs: 0,
            df: vec![0; HASHED_DIM],
        }
    }
}

impl HashedTfIdf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bucket(token: &str) -> usize {
        let mut h = fnv::FnvHasher::default();
        h.write(token.as_bytes());
        (h.finish() % HASHED_DIM as u64) as usize
    }
}

impl Embedder for HashedTfIdf {
    fn fingerprint(&self) -> String {
        "tfidf-hash-4096".into()
    }

    fn dim(&self) -> usize {
        HASHED_DIM
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let mut v = vec![0.0; HASHED_DIM];
        for t in tokens(text) {
            v[Self::bucket(&t)] += 1.0;
        }
        for (b, x) in v.iter_mut().enumerate() {
            if *x != 0.0 {
                *x *= idf(self.docs, self.df[b] as usize);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }

    fn refit(&mut self, corpus: &[String]) {
        self.docs = corpus.len();
        self.df = vec![0; HASHED_DIM];
        for doc in corpus {
            let mut seen = vec![false; HASHED_DIM];
            for t in tokens(doc) {
                let b = Self::bucket(&t);
                if !seen[b] {
                    seen[b] = true;
                    self.df[b] += 1;
                }
            }
        }
    }

    fn corpus_dependent(&self) -> bool {
        true
    }
}

/// Returns preset vectors for known texts; unknown texts map to zero. Meant
/// for tests that need hand-constructed geometry.
#[derive(Debug, Clone, Default)]
pub struct TableEmbedder {
    pub dim: usize,
    pub table: BTreeMap<String, Vec<f64>>,
}

impl TableEmbedder {
    pub fn new(dim: usize) -> Self {
        TableEmbedder {
            dim,
            table: BTreeMap::new(),
        }
    }

    pub fn with(mut self, text: &str, v: Vec<f64>) -> Self {
        self.table.insert(text.to_string(), v);
        self
    }
}

impl Embedder for TableEmbedder {
    fn fingerprint(&self) -> String {
        format!("table-{}", self.dim)
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        Ok(self.table.get(text).cloned().unwrap_or_else(|| vec![0.0; self.dim]))
    }
}

/// Cosine of two dense vectors; 0 when either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    format: u32,
    embedder: String,
    dim: usize,
    threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved<'a> {
    pub rule: &'a Rule,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LibraryStats {
    pub rules: usize,
    pub embedder: String,
    pub dim: usize,
    pub threshold: f64,
    pub mean_score: f64,
    pub min_score: f64,
    pub max_score: f64,
    pub source_pairs: usize,
}

pub struct RuleLibrary {
    rules: Vec<Rule>,
    embedder: Box<dyn Embedder>,
    threshold: f64,
    path: Option<PathBuf>,
}

impl std::fmt::Debug for RuleLibrary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RuleLibrary")
            .field("rules", &self.rules.len())
            .field("embedder", &self.embedder.fingerprint())
            .field("path", &self.path)
            .finish()
    }
}

impl RuleLibrary {
    pub fn in_memory(embedder: Box<dyn Embedder>, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold <= 1.0) {
            return Err(Error::Domain(format!(
                "acceptance threshold must lie in (0, 1], got {threshold}"
            )));
        }
        Ok(RuleLibrary {
            rules: Vec::new(),
            embedder,
            threshold,
            path: None,
        })
    }

    /// Starts a new library file, replacing any file at `path`.
    pub fn create(path: &Path, embedder: Box<dyn Embedder>, threshold: f64) -> Result<Self> {
        let mut lib = Self::in_memory(embedder, threshold)?;
        lib.path = Some(path.to_path_buf());
        lib.compact()?;
        Ok(lib)
    }

    /// Loads a library written with the same embedder.
    pub fn open(path: &Path, embedder: Box<dyn Embedder>) -> Result<Self> {
        let file =
            File::open(path).map_err(|e| Error::Input(format!("cannot open library {}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::Parse(format!("{}: empty library file", path.display())))?;
        let header: Header =
            serde_json::from_str(&first).map_err(|e| Error::Parse(format!("{}: bad header: {e}", path.display())))?;
        if header.kind != LIBRARY_KIND || header.format != LIBRARY_FORMAT {
            return Err(Error::Parse(format!(
                "{}: not a rule library (format {})",
                path.display(),
                header.format
            )));
        }
        if header.embedder != embedder.fingerprint() || header.dim != embedder.dim() {
            return Err(Error::Input(format!(
                "library was built with embedder '{}' ({} dims), configured embedder is '{}' ({} dims)",
                header.embedder,
                header.dim,
                embedder.fingerprint(),
                embedder.dim()
            )));
        }
        let mut lib = Self::in_memory(embedder, header.threshold)?;
        lib.path = Some(path.to_path_buf());
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rule: Rule = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("{} line {}: {e}", path.display(), n + 2)))?;
            if lib.rules.iter().any(|r| r.id == rule.id) {
                return Err(Error::Parse(format!("duplicate rule id '{}'", rule.id)));
            }
            lib.rules.push(rule);
        }
        if lib.embedder.corpus_dependent() {
            lib.reembed()?;
        } else if let Some(r) = lib.rules.iter().find(|r| r.embedding.len() != header.dim) {
            return Err(Error::Parse(format!(
                "rule '{}' has a {}-dim embedding",
                r.id,
                r.embedding.len()
            )));
        }
        Ok(lib)
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// File form of a rule. Vectors that are recomputed on load are omitted.
    fn line(&self, r: &Rule) -> String {
        let text = if self.embedder.corpus_dependent() {
            serde_json::to_string(&Rule {
                embedding: Vec::new(),
                ..r.clone()
            })
        } else {
            serde_json::to_string(r)
        };
        text.expect("rule serializes")
    }

    fn reembed(&mut self) -> Result<()> {
        let corpus: Vec<String> = self.rules.iter().map(Rule::retrieval_text).collect();
        self.embedder.refit(&corpus);
        for r in &mut self.rules {
            r.embedding = self.embedder.embed(&r.retrieval_text())?;
        }
        Ok(())
    }

    /// Accepts a rule scoring strictly above the threshold, assigns its id and
    /// appends it to the file.
    pub fn add(&mut self, mut rule: Rule) -> Result<String> {
        if !(rule.score > self.threshold) {
            return Err(Error::Rejected(format!(
                "score {} does not exceed threshold {}",
                rule.score, self.threshold
            )));
        }
        if !rule.is_complete() {
            return Err(Error::Rejected("rule has an empty section".into()));
        }
        rule.id = format!("rule-{:04}", self.rules.len() + 1);
        if self.embedder.corpus_dependent() {
            rule.embedding.clear();
            self.rules.push(rule);
            if let Err(e) = self.reembed() {
                self.rules.pop();
                return Err(e);
            }
        } else {
            if rule.embedding.is_empty() {
                rule.embedding = self.embedder.embed(&rule.retrieval_text())?;
            }
            if rule.embedding.len() != self.embedder.dim() {
                return Err(Error::Domain(format!(
                    "embedding has {} dims, library uses {}",
                    rule.embedding.len(),
                    self.embedder.dim()
                )));
            }
            self.rules.push(rule);
        }
        let stored = self.rules.last().expect("just pushed");
        if let Some(path) = &self.path {
            let mut f = OpenOptions::new().append(true).open(path)?;
            writeln!(f, "{}", self.line(stored))?;
            f.sync_data()?;
        }
        Ok(stored.id.clone())
    }

    /// Top `k` rules by cosine similarity to `condition ‖ action`; ties keep
    /// insertion order.
    pub fn retrieve(&self, condition: &str, action: &str, k: usize) -> Result<Vec<Retrieved<'_>>> {
        if self.rules.is_empty() {
            return Err(Error::EmptyLibrary);
        }
        let q = self.embedder.embed(&retrieval_text(condition, action))?;
        Ok(self.rank(&q, k))
    }

    /// Ranks stored rules against a query vector.
    pub fn rank(&self, query: &[f64], k: usize) -> Vec<Retrieved<'_>> {
        let mut scored: Vec<(usize, f64)> = self
            .rules
            .iter()
            .enumerate()
            .map(|(i, r)| (i, cosine(query, &r.embedding)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| Retrieved {
                rule: &self.rules[i],
                similarity: s,
            })
            .collect()
    }

    /// Rewrites the file with the header and every rule's current embedding.
    pub fn compact(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        let header = Header {
            kind: LIBRARY_KIND.into(),
            format: LIBRARY_FORMAT,
            embedder: self.embedder.fingerprint(),
            dim: self.embedder.dim(),
            threshold: self.threshold,
        };
        let tmp = path.with_extension("tmp");
        {
            let mut f = File::create(&tmp)?;
            writeln!(f, "{}", serde_json::to_string(&header).expect("header serializes"))?;
            for r in &self.rules {
                writeln!(f, "{}", self.line(r))?;
            }
            f.sync_all()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn stats(&self) -> LibraryStats {
        let scores: Vec<f64> = self.rules.iter().map(|r| r.score).collect();
        let n = scores.len();
        let pairs: std::collections::BTreeSet<&str> =
            self.rules.iter().map(|r| r.provenance.pair_id.as_str()).collect();
        LibraryStats {
            rules: n,
            embedder: self.embedder.fingerprint(),
            dim: self.embedder.dim(),
            threshold: self.threshold,
            mean_score: if n == 0 {
                0.0
            } else {
                scores.iter().sum::<f64>() / n as f64
            },
            min_score: if n == 0 {
                0.0
            } else {
                scores.iter().copied().fold(f64::INFINITY, f64::min)
            },
            max_score: scores.iter().copied().fold(0.0, f64::max),
            source_pairs: pairs.len(),
        }
    }
}
