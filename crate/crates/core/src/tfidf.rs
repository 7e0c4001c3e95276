// SPDX-License-Identifier: Apache-2.0

//! Sparse TF-IDF over source text and cosine similarity.
//!
//! Tokens: comments stripped, lowercased, split on every non-alphanumeric
//! character, single-character tokens dropped. Term weights are raw counts
//! times `ln((1 + D) / (1 + df)) + 1`, and vectors are L2-normalized.

use std::collections::{BTreeMap, BTreeSet};

use crate::verilog::strip_comments;

pub fn tokens(text: &str) -> Vec<String> {
    strip_comments(text)
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() > 1)
        .map(str::to_string)
        .collect()
}

pub fn idf(docs: usize, df: usize) -> f64 {
    ((1 + docs) as f64 / (1 + df) as f64).ln() + 1.0
}

pub type SparseVec = BTreeMap<String, f64>;

#[derive(Debug, Clone, Default)]
pub struct TfIdf {
    docs: usize,
    df: BTreeMap<String, usize>,
}

impl TfIdf {
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Self {
        let mut df = BTreeMap::new();
        for doc in corpus {
            let uniq: BTreeSet<String> = tokens(doc.as_ref()).into_iter().collect();
            for t in uniq {
                *df.entry(t).or_insert(0) += 1;
            }
        }
        TfIdf { docs: corpus.len(), df }
    }

    pub fn vectorize(&self, text: &str) -> SparseVec {
        let mut v = SparseVec::new();
        for t in tokens(text) {
            *v.entry(t).or_insert(0.0) += 1.0;
        }
        for (t, w) in v.iter_mut() {
            *w *= idf(self.docs, self.df.get(t).copied().unwrap_or(0));
        }
        normalize(&mut v);
        v
    }
}

fn normalize(v: &mut SparseVec) {
    let norm = v.values().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.values_mut().for_each(|x| *x /= norm);
    }
}

/// Cosine of two sparse vectors; 0 when either is zero. Identical vectors
/// give exactly 1.
pub fn cosine(a: &SparseVec, b: &SparseVec) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    if a == b {
        return 1.0;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let dot: f64 = small.iter().filter_map(|(k, x)| large.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

/// `1 − max cosine(candidate, ancestor)`, with the vocabulary fitted over the
/// candidate and its ancestors. A candidate without tokens scores 1.
pub fn diversity(candidate: &str, ancestors: &[&str]) -> f64 {
    let mut corpus = Vec::with_capacity(ancestors.len() + 1);
    corpus.push(candidate);
    corpus.extend_from_slice(ancestors);
    let model = TfIdf::fit(&corpus);
    let c = model.vectorize(candidate);
    if c.is_empty() {
        return 1.0;
    }
    let best = ancestors
        .iter()
        .map(|a| cosine(&c, &model.vectorize(a)))
        .fold(0.0f64, f64::max);
    (1.0 - best).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenization_rules() {
        assert_eq!(
            tokens("assign Y = a_b + 8'hFF; // tail comment"),
            vec!["assign", "hff"].into_iter().map(String::from).collect::<Vec<_>>()
        );
        assert_eq!(tokens("module AddR2 (x1, y);"), vec!["module", "addr2", "x1"]);
    }

    #[test]
    fn idf_by_hand() {
        // D = 2, df = 1: ln(3/2) + 1
        assert!((idf(2, 1) - (1.5f64.ln() + 1.0)).abs() < 1e-15);
        assert_eq!(idf(3, 3), 1.0);
    }

    #[test]
    fn vector_by_hand() {
        // docs: "aa bb", "aa cc"; vector of "aa aa bb"
        let m = TfIdf::fit(&["aa bb", "aa cc"]);
        let v = m.vectorize("aa aa bb");
        let wa = 2.0 * idf(2, 2);
        let wb = idf(2, 1);
        let n = (wa * wa + wb * wb).sqrt();
        assert!((v["aa"] - wa / n).abs() < 1e-15);
        assert!((v["bb"] - wb / n).abs() < 1e-15);
    }

    #[test]
    fn diversity_examples() {
        let parent = "module m(input a, output y); assign y = ~a; endmodule";
        assert_eq!(diversity(parent, &[parent]), 0.0);
        assert_eq!(diversity("alpha beta", &["gamma delta"]), 1.0);
        let grand = "module g(input x1, output y1); assign y1 = x1; endmodule";
        assert_eq!(diversity(grand, &[grand, parent]), 0.0);
        assert_eq!(diversity("", &[parent]), 1.0);
    }

    #[test]
    fn cosine_degenerate_cases() {
        let e = SparseVec::new();
        let m = TfIdf::fit(&["xx yy"]);
        assert_eq!(cosine(&e, &m.vectorize("xx yy")), 0.0);
        assert_eq!(cosine(&m.vectorize("xx"), &m.vectorize("yy")), 0.0);
    }
}
