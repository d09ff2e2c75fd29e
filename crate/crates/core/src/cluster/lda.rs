//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use std::collections::BTreeMap;

use rand::Rng;

use super::{argmax, ClusterAssignment, ClusterError, Result, WithinClusterOrder};
use crate::rng;
use crate::vectorize::terms;

/// Documents as term-id sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdaCorpus {
    pub docs: Vec<Vec<usize>>,
    pub vocab: Vec<String>,
}

impl LdaCorpus {
    /// Tokenizes the texts. With `vocabulary`, tokens outside it are dropped
    /// (pass the TF-IDF vocabulary to share its document-frequency filter);
    /// otherwise every token is kept.
    pub fn from_texts<S: AsRef<str>>(texts: &[S], vocabulary: Option<&[String]>) -> Self {
        let tokenized: Vec<Vec<String>> = texts.iter().map(|t| terms(t.as_ref())).collect();
        let vocab: Vec<String> = match vocabulary {
            Some(v) => {
                let mut v = v.to_vec();
                v.sort();
                v.dedup();
                v
            }
            None => {
                let mut v: Vec<String> = tokenized.iter().flatten().cloned().collect();
                v.sort();
                v.dedup();
                v
            }
        };
        let index: BTreeMap<&str, usize> =
            vocab.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
        let docs = tokenized
            .iter()
            .map(|doc| doc.iter().filter_map(|t| index.get(t.as_str()).copied()).collect())
            .collect();
        Self { docs, vocab }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaParams {
    pub k: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl LdaParams {
    /// alpha = 50 / k, beta = 0.01, 200 sweeps.
    pub fn with_defaults(k: usize, seed: u64) -> Self {
        Self {
            k,
            alpha: 50.0 / k.max(1) as f64,
            beta: 0.01,
            iters: 200,
            seed,
        }
    }
}

/// Labels each document with the topic of largest posterior proportion
/// `(n_dk + alpha) / (n_d + k * alpha)` after `iters` sweeps. Documents are
/// swept in order, tokens in order.
pub fn lda_topics(corpus: &LdaCorpus, params: &LdaParams) -> Result<ClusterAssignment> {
    let LdaParams {
        k,
        alpha,
        beta,
        iters,
        seed,
    } = *params;
    let n = corpus.docs.len();
    if n == 0 {
        return Err(ClusterError::EmptyInput);
    }
    if k == 0 {
        return Err(ClusterError::BadK { k, n });
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(ClusterError::DegenerateInput("priors must be positive"));
    }
    if corpus.docs.iter().all(Vec::is_empty) {
        return Err(ClusterError::DegenerateInput("every document is empty"));
    }
    let v = corpus.vocab.len();
    let vbeta = v as f64 * beta;

    let mut rng = rng::seeded(seed);
    let mut doc_topic = vec![vec![0usize; k]; n];
    let mut topic_word = vec![vec![0usize; v]; k];
    let mut topic_total = vec![0usize; k];
    let mut z: Vec<Vec<usize>> = corpus
        .docs
        .iter()
        .enumerate()
        .map(|(d, doc)| {
            doc.iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    doc_topic[d][t] += 1;
                    topic_word[t][w] += 1;
                    topic_total[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let mut weights = vec![0.0; k];
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mut changed = 0usize;
        for (d, doc) in corpus.docs.iter().enumerate() {
            for (pos, &w) in doc.iter().enumerate() {
                let old = z[d][pos];
                doc_topic[d][old] -= 1;
                topic_word[old][w] -= 1;
                topic_total[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    total += (doc_topic[d][t] as f64 + alpha) * (topic_word[t][w] as f64 + beta)
                        / (topic_total[t] as f64 + vbeta);
                    weights[t] = total;
                }
                let target = rng.random::<f64>() * total;
                let new = weights.iter().position(|&c| c > target).unwrap_or(k - 1);

                z[d][pos] = new;
                doc_topic[d][new] += 1;
                topic_word[new][w] += 1;
                topic_total[new] += 1;
                if new != old {
                    changed += 1;
                }
            }
        }
        trace.push(changed as f64);
    }

    let proportions: Vec<Vec<f64>> = doc_topic
        .iter()
        .zip(&corpus.docs)
        .map(|(counts, doc)| {
            let denom = doc.len() as f64 + k as f64 * alpha;
            counts.iter().map(|&c| (c as f64 + alpha) / denom).collect()
        })
        .collect();
    let labels: Vec<usize> = proportions.iter().map(|p| argmax(p)).collect();
    let affinity = proportions.iter().zip(&labels).map(|(p, &l)| p[l]).collect();
    Ok(ClusterAssignment {
        k,
        labels,
        affinity,
        order: WithinClusterOrder::DescendingWeight,
        topic_weights: proportions,
        objective_trace: trace,
    })
}
