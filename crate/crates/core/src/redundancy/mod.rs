//! Cross-benchmark redundancy: semantic candidates, complexity filtering,
//! review adjudication, match rates and SuperSubset bookkeeping.

pub mod executor;
pub mod review;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use executor::{measure_fingerprint, ExecError, Executor, RunOutcome, SubprocessExecutor};
pub use review::{
    parse_similarity, ChatMessage, ChatRequest, HttpEndpoint, ReviewClient, ReviewEndpoint, ReviewError,
    ReviewInput, TransportError, DEFAULT_PROMPT_TEMPLATE,
};

use crate::cluster::cosine_similarity;
use crate::corpus::{EmbeddingSet, ResultMatrix};
use crate::sampler::{SampleRef, SubsetPlan, SuperSubset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RedundancyError {
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("embedding set for {0:?} is empty")]
    EmptyEmbeddings(String),
    #[error("threshold {0} is outside (-1, 1]")]
    BadTau(f64),
    #[error("tolerance factor {0} must exceed 1")]
    BadFactor(f64),
    #[error("no pairs to score")]
    EmptySet,
    #[error("score {value} for model {model:?} on sample {sample:?} is not 0 or 1")]
    NonBinaryScores { model: String, sample: String, value: f64 },
    #[error("pair references sample {0:?} missing from its result matrix")]
    UnknownSample(String),
    #[error("result matrices have different model sets")]
    ModelSetMismatch,
    #[error("plan ({plan_method}, {plan_rate}%) does not match SuperSubset ({sup_method}, {sup_rate}%)")]
    KeyMismatch {
        sup_method: String,
        sup_rate: u32,
        plan_method: String,
        plan_rate: u32,
    },
}

pub type Result<T> = std::result::Result<T, RedundancyError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Candidate,
    FilteredComplexity,
    FilteredReview,
    Redundant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundantPair {
    pub id_a: SampleRef,
    pub id_b: SampleRef,
    pub cosine: f64,
    /// `None` when a fingerprint is missing or the stage did not run.
    pub complexity_match: Option<bool>,
    pub llm_score: Option<u8>,
    pub verdict: Verdict,
    /// Stages applied to this pair, in order.
    pub stages: Vec<String>,
}

impl RedundantPair {
    pub fn key(&self) -> (SampleRef, SampleRef) {
        (self.id_a.clone(), self.id_b.clone())
    }
}

/// Every cross pair with cosine ≥ `tau`, by descending cosine then ids.
pub fn candidate_pairs(a: (&str, &EmbeddingSet), b: (&str, &EmbeddingSet), tau: f64) -> Result<Vec<RedundantPair>> {
    if !(tau > -1.0 && tau <= 1.0) {
        return Err(RedundancyError::BadTau(tau));
    }
    let (Some(da), Some(db)) = (a.1.dim(), b.1.dim()) else {
        let empty = if a.1.dim().is_none() { a.0 } else { b.0 };
        return Err(RedundancyError::EmptyEmbeddings(empty.to_string()));
    };
    if da != db {
        return Err(RedundancyError::DimMismatch(da, db));
    }
    let right: Vec<(&str, &[f64])> = b.1.iter().collect();
    let left: Vec<(&str, &[f64])> = a.1.iter().collect();
    let mut pairs: Vec<RedundantPair> = left
        .par_iter()
        .flat_map_iter(|&(ia, va)| {
            right.iter().filter_map(move |&(ib, vb)| {
                let cosine = cosine_similarity(va, vb);
                (cosine >= tau).then(|| RedundantPair {
                    id_a: (a.0.to_string(), ia.to_string()),
                    id_b: (b.0.to_string(), ib.to_string()),
                    cosine,
                    complexity_match: None,
                    llm_score: None,
                    verdict: Verdict::Candidate,
                    stages: vec!["semantic".into()],
                })
            })
        })
        .collect();
    pairs.sort_by(|x, y| {
        y.cosine
            .total_cmp(&x.cosine)
            .then_with(|| x.id_a.cmp(&y.id_a))
            .then_with(|| x.id_b.cmp(&y.id_b))
    });
    Ok(pairs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityFingerprint {
    pub time_s: f64,
    pub mem_bytes: f64,
}

pub const DEFAULT_COMPLEXITY_FACTOR: f64 = 4.0;
pub const DEFAULT_TAU: f64 = 0.8;
pub const DEFAULT_REVIEW_THRESHOLD: u8 = 4;

fn within(a: f64, b: f64, factor: f64) -> bool {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    lo > 0.0 && hi / lo <= factor
}

/// Both time and memory within a multiplicative `factor`; `None` when either
/// fingerprint is missing.
pub fn complexity_match(
    a: Option<&ComplexityFingerprint>,
    b: Option<&ComplexityFingerprint>,
    factor: f64,
) -> Result<Option<bool>> {
    if !(factor > 1.0) {
        return Err(RedundancyError::BadFactor(factor));
    }
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(within(a.time_s, b.time_s, factor) && within(a.mem_bytes, b.mem_bytes, factor)),
        _ => None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownComplexity {
    /// Pairs without fingerprints stop at the complexity stage.
    #[default]
    Drop,
    PassThrough,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityStage {
    pub factor: f64,
    pub unknown: UnknownComplexity,
}

impl Default for ComplexityStage {
    fn default() -> Self {
        Self {
            factor: DEFAULT_COMPLEXITY_FACTOR,
            unknown: UnknownComplexity::Drop,
        }
    }
}

/// Funnel stages after the semantic one; `None` disables a stage.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FunnelConfig {
    pub complexity: Option<ComplexityStage>,
    pub review_threshold: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FunnelCounts {
    pub candidates: usize,
    pub after_complexity: usize,
    pub after_review: usize,
}

/// Runs the enabled stages over semantic candidates. A pair is redundant iff
/// it survives every enabled stage; a pair missing a review score stays a
/// candidate.
pub fn classify_pairs(
    candidates: &[RedundantPair],
    fingerprints: &HashMap<SampleRef, ComplexityFingerprint>,
    reviews: &HashMap<(SampleRef, SampleRef), u8>,
    config: &FunnelConfig,
) -> Result<(Vec<RedundantPair>, FunnelCounts)> {
    let mut counts = FunnelCounts {
        candidates: candidates.len(),
        ..FunnelCounts::default()
    };
    let mut out = Vec::with_capacity(candidates.len());
    for c in candidates {
        let mut p = c.clone();
        p.verdict = Verdict::Candidate;
        if let Some(stage) = &config.complexity {
            p.stages.push("complexity".into());
            p.complexity_match = complexity_match(fingerprints.get(&p.id_a), fingerprints.get(&p.id_b), stage.factor)?;
            let pass = match p.complexity_match {
                Some(m) => m,
                None => stage.unknown == UnknownComplexity::PassThrough,
            };
            if !pass {
                if p.complexity_match == Some(false) {
                    p.verdict = Verdict::FilteredComplexity;
                }
                out.push(p);
                continue;
            }
        }
        counts.after_complexity += 1;
        if let Some(threshold) = config.review_threshold {
            p.stages.push("review".into());
            p.llm_score = reviews.get(&p.key()).copied();
            match p.llm_score {
                Some(s) if s >= threshold => {}
                Some(_) => {
                    p.verdict = Verdict::FilteredReview;
                    out.push(p);
                    continue;
                }
                None => {
                    out.push(p);
                    continue;
                }
            }
        }
        counts.after_review += 1;
        p.verdict = Verdict::Redundant;
        out.push(p);
    }
    Ok((out, counts))
}

fn binary(results: &ResultMatrix, model: usize, col: usize) -> Result<bool> {
    let v = results.score(model, col);
    if v == 0.0 || v == 1.0 {
        Ok(v == 1.0)
    } else {
        Err(RedundancyError::NonBinaryScores {
            model: results.models()[model].clone(),
            sample: results.sample_ids()[col].clone(),
            value: v,
        })
    }
}

/// Mean over pairs of the fraction of models whose pass/fail outcome agrees
/// on both members. `id_a` is looked up in `results_a`, `id_b` in `results_b`.
pub fn match_rate(
    pairs: &[(SampleRef, SampleRef)],
    results_a: &ResultMatrix,
    results_b: &ResultMatrix,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(RedundancyError::EmptySet);
    }
    if results_a.models() != results_b.models() {
        return Err(RedundancyError::ModelSetMismatch);
    }
    let m = results_a.n_models();
    let mut total = 0.0;
    for (a, b) in pairs {
        let ca = results_a
            .sample_position(&a.1)
            .ok_or_else(|| RedundancyError::UnknownSample(a.1.clone()))?;
        let cb = results_b
            .sample_position(&b.1)
            .ok_or_else(|| RedundancyError::UnknownSample(b.1.clone()))?;
        let mut agree = 0usize;
        for model in 0..m {
            if binary(results_a, model, ca)? == binary(results_b, model, cb)? {
                agree += 1;
            }
        }
        total += agree as f64 / m as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Adds the plan's ids to the SuperSubset.
pub fn supersubset_update(mut sup: SuperSubset, plan: &SubsetPlan) -> Result<SuperSubset> {
    if sup.method != plan.method || sup.rate_pct != plan.rate_pct {
        return Err(RedundancyError::KeyMismatch {
            sup_method: sup.method,
            sup_rate: sup.rate_pct,
            plan_method: plan.method.clone(),
            plan_rate: plan.rate_pct,
        });
    }
    sup.ids
        .extend(plan.ids.iter().map(|id| (plan.benchmark.clone(), id.clone())));
    Ok(sup)
}

/// Connected components of the redundancy graph (reporting only), each
/// sorted, components ordered by their first member.
pub fn closure_groups(pairs: &[(SampleRef, SampleRef)]) -> Vec<Vec<SampleRef>> {
    let mut index: BTreeMap<&SampleRef, usize> = BTreeMap::new();
    for (a, b) in pairs {
        for r in [a, b] {
            let next = index.len();
            index.entry(r).or_insert(next);
        }
    }
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (a, b) in pairs {
        let (ra, rb) = (find(&mut parent, index[a]), find(&mut parent, index[b]));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, Vec<SampleRef>> = BTreeMap::new();
    for (r, &i) in &index {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push((*r).clone());
    }
    let mut out: Vec<Vec<SampleRef>> = groups.into_values().collect();
    for g in &mut out {
        g.sort();
    }
    out.sort();
    out
}
