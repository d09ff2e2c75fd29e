//! TF-IDF term-document matrices.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::textstats;

#[derive(Debug, Error, PartialEq)]
pub enum VectorizeError {
    #[error("no documents")]
    NoDocuments,
    #[error("max_df_frac must lie in (0, 1], got {0}")]
    BadMaxDf(f64),
    #[error("no term survives document-frequency filtering")]
    EmptyVocabulary,
}

/// Lowercased word tokens, in order.
pub fn terms(text: &str) -> Vec<String> {
    textstats::words(text)
        .into_iter()
        .map(|w| w.to_lowercase())
        .collect()
}

/// Sparse row: (term index, weight) pairs sorted by term index.
pub type SparseRow = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfMatrix {
    /// Sorted lexicographically.
    pub vocab: Vec<String>,
    pub idf: Vec<f64>,
    /// One row per document, L2-normalized unless all-zero.
    pub rows: Vec<SparseRow>,
}

impl TfidfMatrix {
    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_terms(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_all_zero(&self) -> bool {
        self.rows.iter().all(|r| r.iter().all(|&(_, v)| v == 0.0))
    }

    pub fn dense_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.vocab.len()];
                for &(t, v) in row {
                    dense[t] = v;
                }
                dense
            })
            .collect()
    }

    pub fn term_index(&self, term: &str) -> Option<usize> {
        self.vocab.binary_search_by(|t| t.as_str().cmp(term)).ok()
    }
}

pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_DF_FRAC: f64 = 0.95;

/// Builds the matrix with `idf = ln((1 + N) / (1 + df)) + 1` and
/// `tf = count / document length`, keeping terms whose document frequency
/// lies in `[min_df, max_df_frac * N]`.
pub fn build_tfidf<S: AsRef<str>>(
    documents: &[S],
    min_df: usize,
    max_df_frac: f64,
) -> Result<TfidfMatrix, VectorizeError> {
    if documents.is_empty() {
        return Err(VectorizeError::NoDocuments);
    }
    if !(max_df_frac > 0.0 && max_df_frac <= 1.0) {
        return Err(VectorizeError::BadMaxDf(max_df_frac));
    }
    let n = documents.len();
    let tokenized: Vec<Vec<String>> = documents.iter().map(|d| terms(d.as_ref())).collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in &tokenized {
        let distinct: BTreeSet<&str> = doc.iter().map(String::as_str).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let max_df = max_df_frac * n as f64;
    let kept: Vec<(&str, usize)> = df
        .into_iter()
        .filter(|&(_, d)| d >= min_df && d as f64 <= max_df)
        .collect();
    if kept.is_empty() {
        return Err(VectorizeError::EmptyVocabulary);
    }
    let vocab: Vec<String> = kept.iter().map(|(t, _)| t.to_string()).collect();
    let idf: Vec<f64> = kept
        .iter()
        .map(|&(_, d)| ((1.0 + n as f64) / (1.0 + d as f64)).ln() + 1.0)
        .collect();
    let index: BTreeMap<&str, usize> = kept.iter().enumerate().map(|(i, (t, _))| (*t, i)).collect();

    let rows = tokenized
        .iter()
        .map(|doc| {
            let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
            for t in doc {
                if let Some(&i) = index.get(t.as_str()) {
                    *counts.entry(i).or_default() += 1;
                }
            }
            let len = doc.len().max(1) as f64;
            let mut row: SparseRow = counts
                .into_iter()
                .map(|(i, c)| (i, c as f64 / len * idf[i]))
                .collect();
            let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, v) in &mut row {
                    *v /= norm;
                }
            }
            row
        })
        .collect();

    Ok(TfidfMatrix { vocab, idf, rows })
}
