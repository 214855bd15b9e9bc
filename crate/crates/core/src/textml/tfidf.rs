use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse feature vector with entries sorted by term index.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    /// Builds a vector from arbitrary `(index, weight)` pairs. Duplicate
    /// indices are summed and zero weights dropped.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut entries: Vec<(usize, f64)> = pairs.into_iter().collect();
        entries.sort_by_key(|&(i, _)| i);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(entries.len());
        for (i, w) in entries {
            match merged.last_mut() {
                Some((j, acc)) if *j == i => *acc += w,
                _ => merged.push((i, w)),
            }
        }
        merged.retain(|&(_, w)| w != 0.0);
        SparseVector { entries: merged }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|&(_, w)| w * w).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Dot product against a dense weight vector; indices past its end count as zero.
    pub fn dot(&self, dense: &[f64]) -> f64 {
        self.entries
            .iter()
            .filter_map(|&(i, w)| dense.get(i).map(|d| d * w))
            .sum()
    }
}

/// Vocabulary plus smoothed inverse document frequencies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TfIdfModel {
    vocabulary: HashMap<String, usize>,
    idf: Vec<f64>,
}

impl TfIdfModel {
    /// Fits the vocabulary (first-occurrence order) and
    /// `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`.
    pub fn fit<D, S>(corpus: &[D]) -> Result<Self>
    where
        D: AsRef<[S]>,
        S: AsRef<str>,
    {
        if corpus.is_empty() {
            return Err(Error::invalid("cannot fit TF-IDF on an empty corpus"));
        }
        let mut vocabulary: HashMap<String, usize> = HashMap::new();
        let mut df: Vec<usize> = Vec::new();
        let mut last_seen: Vec<usize> = Vec::new();
        for (doc_idx, doc) in corpus.iter().enumerate() {
            for token in doc.as_ref() {
                let token = token.as_ref();
                let idx = match vocabulary.get(token) {
                    Some(&idx) => idx,
                    None => {
                        let idx = df.len();
                        vocabulary.insert(token.to_owned(), idx);
                        df.push(0);
                        last_seen.push(usize::MAX);
                        idx
                    }
                };
                if last_seen[idx] != doc_idx {
                    last_seen[idx] = doc_idx;
                    df[idx] += 1;
                }
            }
        }
        if vocabulary.is_empty() {
            return Err(Error::invalid("corpus contains no tokens"));
        }
        let n_docs = corpus.len() as f64;
        let idf = df
            .iter()
            .map(|&d| ((1.0 + n_docs) / (1.0 + d as f64)).ln() + 1.0)
            .collect();
        Ok(TfIdfModel { vocabulary, idf })
    }

    pub fn len(&self) -> usize {
        self.idf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idf.is_empty()
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.index_of(token).map(|i| self.idf[i])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    /// Term-count × idf weights, L2-normalized. Unknown tokens are ignored,
    /// so a document with no known tokens maps to the zero vector.
    pub fn transform<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        let raw = SparseVector::from_pairs(
            tokens
                .iter()
                .filter_map(|t| self.index_of(t.as_ref()))
                .map(|i| (i, self.idf[i])),
        );
        let norm = raw.norm();
        if norm == 0.0 {
            return SparseVector::default();
        }
        SparseVector {
            entries: raw.entries.into_iter().map(|(i, w)| (i, w / norm)).collect(),
        }
    }
}
