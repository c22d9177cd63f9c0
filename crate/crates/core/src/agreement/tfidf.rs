use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::preprocess;

/// Default vocabulary size.
pub const DEFAULT_VOCAB: usize = 768;

/// Sparse vector as `(index, value)` pairs sorted by index.
pub type SparseVec = Vec<(usize, f64)>;

/// TF-IDF vectorizer with a vocabulary restricted to the most frequent terms
/// by document frequency (ties broken lexicographically).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfVectorizer {
    vocabulary: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl TfidfVectorizer {
    /// Smoothed idf `ln((1 + N) / (1 + df)) + 1`.
    pub fn fit<S: AsRef<str>>(corpus: &[S], vocab_size: usize) -> Result<Self> {
        let docs: Vec<Vec<String>> = corpus.iter().map(|d| preprocess(d.as_ref())).collect();
        Self::fit_tokens(&docs, vocab_size)
    }

    pub fn fit_tokens(docs: &[Vec<String>], vocab_size: usize) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::InvalidInput("cannot fit TF-IDF on an empty corpus".into()));
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in docs {
            let unique: HashSet<&str> = doc.iter().map(String::as_str).collect();
            for t in unique {
                *df.entry(t).or_default() += 1;
            }
        }
        let mut terms: Vec<(&str, usize)> = df.into_iter().collect();
        terms.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        terms.truncate(vocab_size);
        // columns in lexicographic order, like a fitted sklearn vocabulary
        terms.sort_by(|a, b| a.0.cmp(b.0));
        let n = docs.len() as f64;
        let vocabulary: Vec<String> = terms.iter().map(|(t, _)| t.to_string()).collect();
        let idf = terms.iter().map(|&(_, d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect();
        Ok(Self::from_parts(vocabulary, idf))
    }

    pub fn from_parts(vocabulary: Vec<String>, idf: Vec<f64>) -> Self {
        let index = vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        TfidfVectorizer { vocabulary, idf, index }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn transform(&self, text: &str) -> SparseVec {
        self.transform_tokens(&preprocess(text))
    }

    /// Raw term counts times idf, L2-normalized. Out-of-vocabulary terms are
    /// ignored; a document without known terms maps to the zero vector.
    pub fn transform_tokens(&self, tokens: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(&i) = self.index.get(t) {
                *counts.entry(i).or_default() += 1.0;
            }
        }
        let mut v: SparseVec = counts.into_iter().map(|(i, c)| (i, c * self.idf[i])).collect();
        let norm = v.iter().map(|(_, x)| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, x) in &mut v {
                *x /= norm;
            }
        }
        v
    }

    pub fn to_dense(&self, v: &SparseVec) -> Vec<f64> {
        let mut d = vec![0.0; self.dim()];
        for &(i, x) in v {
            d[i] = x;
        }
        d
    }
}
