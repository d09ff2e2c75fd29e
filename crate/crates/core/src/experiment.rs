//! End-to-end pipeline pieces shared by the command line and the tests:
//! per-sample metrics, method preparation, fidelity curves and the
//! multi-benchmark sweeps with and without redundancy filtering.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{self, ClusterAssignment, ClusterError, LdaCorpus, LdaParams};
use crate::corpus::{Benchmark, EmbeddingSet, ResultMatrix};
use crate::fidelity::{self, FidelityError, FidelityPoint, ScoreVector};
use crate::redundancy::{self, RedundancyError};
use crate::sampler::{
    self, MethodKind, MethodSpec, PreparedMethod, QualityMetric, SampleRef, SamplerError, SubsetPlan, SuperSubset,
};
use crate::textstats::{self, DifficultyWeights, QualityProfile, ReadabilityProfile, TextStatsError, WordSet};
use crate::vectorize::{self, TfidfMatrix, VectorizeError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    TextStats(#[from] TextStatsError),
    #[error(transparent)]
    Vectorize(#[from] VectorizeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Fidelity(#[from] FidelityError),
    #[error(transparent)]
    Redundancy(#[from] RedundancyError),
    #[error("method {method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<ExperimentError>,
    },
    #[error("method {0} needs per-sample metrics")]
    MissingMetrics(String),
    #[error("no embeddings with tag {0:?}")]
    MissingEmbeddings(String),
    #[error("method {method}: bad value {value:?} for parameter {key:?}")]
    BadParam { method: String, key: String, value: String },
    #[error("invalid plans: {0}")]
    InvalidPlans(String),
    #[error("results for {0:?} do not match the benchmark's samples")]
    Misaligned(String),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleMetrics {
    pub id: String,
    pub quality: QualityProfile,
    /// `None` for samples without words.
    pub readability: Option<ReadabilityProfile>,
    pub difficulty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsTable {
    pub rows: Vec<SampleMetrics>,
}

pub const METRICS_HEADER: [&str; 11] = [
    "sample_id",
    "spelling_errors",
    "avg_word_length",
    "repeating_words",
    "lexical_diversity",
    "cpd",
    "difficult_pct",
    "dale_chall",
    "flesch",
    "gunning_fog",
    "difficulty",
];

impl MetricsTable {
    /// Score per sample id for a ranked method.
    pub fn scores(&self, kind: &MethodKind) -> Option<BTreeMap<String, f64>> {
        let pick: fn(&SampleMetrics) -> f64 = match kind {
            MethodKind::Quality(QualityMetric::SpellingErrors) => |m| m.quality.spelling_errors as f64,
            MethodKind::Quality(QualityMetric::RepeatingWords) => |m| m.quality.repeating_words as f64,
            MethodKind::Quality(QualityMetric::LexicalDiversity) => |m| m.quality.lexical_diversity,
            MethodKind::Quality(QualityMetric::AvgWordLength) => |m| m.quality.avg_word_length,
            MethodKind::Quality(QualityMetric::Cpd) => |m| m.quality.cpd,
            MethodKind::Difficulty => |m| m.difficulty,
            _ => return None,
        };
        Some(self.rows.iter().map(|m| (m.id.clone(), pick(m))).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(METRICS_HEADER).expect("in-memory write");
        for m in &self.rows {
            let q = &m.quality;
            let mut rec = vec![
                m.id.clone(),
                q.spelling_errors.to_string(),
                q.avg_word_length.to_string(),
                q.repeating_words.to_string(),
                q.lexical_diversity.to_string(),
                q.cpd.to_string(),
            ];
            match &m.readability {
                Some(r) => rec.extend([r.difficult_pct, r.dale_chall, r.flesch, r.gunning_fog].map(|v| v.to_string())),
                None => rec.extend(std::iter::repeat_n(String::new(), 4)),
            }
            rec.push(m.difficulty.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }
}

/// Quality and readability metrics for every sample, plus the difficulty
/// composite normalized over the samples that have words (others get 0).
pub fn compute_metrics(
    benchmark: &Benchmark,
    dictionary: &WordSet,
    easy_words: &WordSet,
    weights: &DifficultyWeights,
) -> Result<MetricsTable> {
    if dictionary.is_empty() || easy_words.is_empty() {
        return Err(TextStatsError::EmptyDictionary("word list".into()).into());
    }
    let per_sample: Vec<(QualityProfile, Option<ReadabilityProfile>)> = benchmark
        .samples()
        .par_iter()
        .map(|s| {
            let stats = textstats::tokenize(&s.text);
            let q = textstats::quality_profile(&stats, dictionary);
            let r = textstats::readability_profile(&stats, easy_words).ok();
            (q, r)
        })
        .collect();
    let with_words: Vec<ReadabilityProfile> = per_sample.iter().filter_map(|p| p.1).collect();
    let mut difficulty = textstats::difficulty_scores(&with_words, weights)?.into_iter();
    let rows = benchmark
        .samples()
        .iter()
        .zip(per_sample)
        .map(|(s, (quality, readability))| SampleMetrics {
            id: s.id.clone(),
            quality,
            readability,
            difficulty: if readability.is_some() {
                difficulty.next().expect("one score per profile")
            } else {
                0.0
            },
        })
        .collect();
    Ok(MetricsTable { rows })
}

pub const KMEANS_ITERS: usize = 300;
pub const NMF_ITERS: usize = 200;
pub const DEFAULT_NEIGHBORS: usize = 10;

fn param<T: std::str::FromStr>(spec: &MethodSpec, key: &str, default: T) -> Result<T> {
    match spec.params.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| ExperimentError::BadParam {
            method: spec.id.clone(),
            key: key.to_string(),
            value: v.clone(),
        }),
    }
}

fn tfidf_for(benchmark: &Benchmark, spec: &MethodSpec) -> Result<TfidfMatrix> {
    let min_df = param(spec, "min_df", vectorize::DEFAULT_MIN_DF)?;
    let max_df = param(spec, "max_df_frac", vectorize::DEFAULT_MAX_DF_FRAC)?;
    let texts: Vec<&str> = benchmark.samples().iter().map(|s| s.text.as_str()).collect();
    Ok(vectorize::build_tfidf(&texts, min_df, max_df)?)
}

fn per_seed<F>(seeds: &[u64], f: F) -> Result<BTreeMap<u64, ClusterAssignment>>
where
    F: Fn(u64) -> std::result::Result<ClusterAssignment, ClusterError> + Sync,
{
    sampler::canonical(seeds)
        .par_iter()
        .map(|&seed| Ok((seed, f(seed)?)))
        .collect()
}

/// Resolves whatever a method needs before sampling: metric scores for
/// ranked methods, one clustering per seed for stratified ones.
pub fn prepare_method(
    benchmark: &Benchmark,
    spec: &MethodSpec,
    metrics: Option<&MetricsTable>,
    embeddings: &BTreeMap<String, EmbeddingSet>,
    seeds: &[u64],
) -> Result<PreparedMethod> {
    prepare_inner(benchmark, spec, metrics, embeddings, seeds).map_err(|e| ExperimentError::Method {
        method: spec.id.clone(),
        source: Box::new(e),
    })
}

fn prepare_inner(
    benchmark: &Benchmark,
    spec: &MethodSpec,
    metrics: Option<&MetricsTable>,
    embeddings: &BTreeMap<String, EmbeddingSet>,
    seeds: &[u64],
) -> Result<PreparedMethod> {
    let n = benchmark.len();
    let k = param(spec, "k", cluster::default_k(n))?;
    let assignments = match &spec.kind {
        MethodKind::Random => return Ok(PreparedMethod::Random),
        kind @ (MethodKind::Quality(_) | MethodKind::Difficulty) => {
            let table = metrics.ok_or_else(|| ExperimentError::MissingMetrics(spec.id.clone()))?;
            return Ok(PreparedMethod::Ranked {
                scores: table.scores(kind).expect("ranked kind"),
                direction: spec.direction,
            });
        }
        MethodKind::ClusterKmeans => {
            let rows = tfidf_for(benchmark, spec)?.dense_rows();
            let iters = param(spec, "iters", KMEANS_ITERS)?;
            per_seed(seeds, |seed| cluster::kmeans(&rows, k, seed, iters))?
        }
        MethodKind::ClusterNmf => {
            let tfidf = tfidf_for(benchmark, spec)?;
            let iters = param(spec, "iters", NMF_ITERS)?;
            let k = if spec.params.contains_key("k") { k } else { k.min(tfidf.n_terms()) };
            per_seed(seeds, |seed| cluster::nmf_topics(&tfidf, k, seed, iters))?
        }
        MethodKind::ClusterLda => {
            let tfidf = tfidf_for(benchmark, spec)?;
            let texts: Vec<&str> = benchmark.samples().iter().map(|s| s.text.as_str()).collect();
            let corpus = LdaCorpus::from_texts(&texts, Some(&tfidf.vocab));
            let defaults = LdaParams::with_defaults(k, 0);
            let base = LdaParams {
                alpha: param(spec, "alpha", defaults.alpha)?,
                beta: param(spec, "beta", defaults.beta)?,
                iters: param(spec, "iters", defaults.iters)?,
                ..defaults
            };
            per_seed(seeds, |seed| cluster::lda_topics(&corpus, &LdaParams { seed, ..base }))?
        }
        MethodKind::ClusterSpectral(tag) => {
            let emb = embeddings
                .get(tag)
                .ok_or_else(|| ExperimentError::MissingEmbeddings(tag.clone()))?;
            let nn = param(spec, "n_neighbors", DEFAULT_NEIGHBORS.min(n.saturating_sub(1)))?;
            let ids: Vec<String> = benchmark.ids().map(str::to_string).collect();
            let prep = cluster::spectral_embedding(emb, &ids, k, nn)?;
            per_seed(seeds, |seed| prep.cluster(seed))?
        }
    };
    Ok(PreparedMethod::Stratified { assignments })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRun {
    pub plans: Vec<SubsetPlan>,
    /// In method order.
    pub curves: Vec<(String, Vec<FidelityPoint>)>,
}

fn is_nested(prepared: &PreparedMethod) -> bool {
    !matches!(prepared, PreparedMethod::Stratified { .. })
}

/// Builds and validates every plan, then one fidelity curve per method.
pub fn run_benchmark(
    benchmark: &Benchmark,
    results: &ResultMatrix,
    methods: &[(MethodSpec, PreparedMethod)],
    rates: &[u32],
    seeds: &[u64],
) -> Result<BenchmarkRun> {
    if !results.is_aligned_with(benchmark) {
        return Err(ExperimentError::Misaligned(benchmark.name().to_string()));
    }
    let view = benchmark.full_view();
    let plans = sampler::build_plan_grid(&view, methods, rates, seeds)?;
    let full = ScoreVector::full(results);
    let mut curves = Vec::with_capacity(methods.len());
    for (spec, prepared) in methods {
        let mine: Vec<SubsetPlan> = plans.iter().filter(|p| p.method == spec.id).cloned().collect();
        sampler::validate_plans(&view, &mine, is_nested(prepared)).map_err(ExperimentError::InvalidPlans)?;
        curves.push((spec.id.clone(), fidelity::fidelity_curve(results, &mine, &full)?));
    }
    Ok(BenchmarkRun { plans, curves })
}

/// One benchmark in a multi-benchmark sweep, in processing order.
pub struct SweepBenchmark<'a> {
    pub benchmark: &'a Benchmark,
    pub results: &'a ResultMatrix,
    pub prepared: PreparedMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rate_pct: u32,
    /// Pearson between subset and fullset average win-rates, mean over seeds.
    pub pearson: f64,
    /// Samples selected across all benchmarks, mean over seeds.
    pub total_samples: f64,
    pub per_seed_pearson: Vec<f64>,
    pub per_seed_total: Vec<usize>,
}

fn average_win_rates(vectors: Vec<(String, ScoreVector)>) -> Result<Vec<f64>> {
    Ok(fidelity::win_rate(&vectors)?.average)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    /// Ordered by rate, then seed, then benchmark.
    pub plans: Vec<SubsetPlan>,
}

/// Runs one method over several benchmarks at every rate and seed. With
/// `redundant`, each benchmark is first filtered against the SuperSubset of
/// the benchmarks before it; otherwise every benchmark is sampled in full.
pub fn multi_benchmark_sweep(
    method: &str,
    benches: &[SweepBenchmark<'_>],
    rates: &[u32],
    seeds: &[u64],
    redundant: Option<&[(SampleRef, SampleRef)]>,
) -> Result<SweepOutput> {
    for b in benches {
        if !b.results.is_aligned_with(b.benchmark) {
            return Err(ExperimentError::Misaligned(b.benchmark.name().to_string()));
        }
    }
    let rates = sampler::canonical(rates);
    for &r in &rates {
        sampler::check_rate(r)?;
    }
    let all_ranked = benches
        .iter()
        .all(|b| matches!(b.prepared, PreparedMethod::Ranked { .. }));
    let mut seeds = sampler::canonical(seeds);
    if all_ranked {
        seeds.truncate(1);
    }
    let full = average_win_rates(
        benches
            .iter()
            .map(|b| (b.benchmark.name().to_string(), ScoreVector::full(b.results)))
            .collect(),
    )?;

    let tasks: Vec<(u32, u64)> = rates
        .iter()
        .flat_map(|&r| seeds.iter().map(move |&s| (r, s)))
        .collect();
    let outcomes: Vec<(f64, usize, Vec<SubsetPlan>)> = tasks
        .par_iter()
        .map(|&(rate, seed)| {
            let mut sup = SuperSubset::new(method, rate);
            let mut vectors = Vec::with_capacity(benches.len());
            let mut total = 0;
            let mut plans = Vec::with_capacity(benches.len());
            for b in benches {
                let view = match redundant {
                    Some(pairs) => sampler::mr_filter(b.benchmark, pairs, &sup),
                    None => b.benchmark.full_view(),
                };
                let plan = sampler::sample_one(&view, method, &b.prepared, rate, seed).map_err(|e| {
                    SamplerError::Method {
                        method: method.to_string(),
                        rate,
                        source: Box::new(e),
                    }
                })?;
                total += plan.ids.len();
                vectors.push((b.benchmark.name().to_string(), fidelity::subset_scores(b.results, &plan.ids)?));
                sup = redundancy::supersubset_update(sup, &plan)?;
                plans.push(plan);
            }
            let sub = average_win_rates(vectors)?;
            Ok((fidelity::pearson_checked(&sub, &full)?.value, total, plans))
        })
        .collect::<Result<_>>()?;

    let points = rates
        .iter()
        .enumerate()
        .map(|(i, &rate_pct)| {
            let chunk = &outcomes[i * seeds.len()..(i + 1) * seeds.len()];
            let per_seed_pearson: Vec<f64> = chunk.iter().map(|c| c.0).collect();
            let per_seed_total: Vec<usize> = chunk.iter().map(|c| c.1).collect();
            SweepPoint {
                rate_pct,
                pearson: per_seed_pearson.iter().sum::<f64>() / chunk.len() as f64,
                total_samples: per_seed_total.iter().sum::<usize>() as f64 / chunk.len() as f64,
                per_seed_pearson,
                per_seed_total,
            }
        })
        .collect();
    Ok(SweepOutput {
        points,
        plans: outcomes.into_iter().flat_map(|o| o.2).collect(),
    })
}

/// The point with the fewest total samples among those whose Pearson
/// reaches `threshold`.
pub fn cheapest_reaching(points: &[SweepPoint], threshold: f64) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.pearson >= threshold)
        .min_by(|a, b| a.total_samples.total_cmp(&b.total_samples).then(a.rate_pct.cmp(&b.rate_pct)))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrComparison {
    pub method: String,
    pub threshold: f64,
    pub m_rate_pct: Option<u32>,
    pub m_total_samples: Option<f64>,
    pub mr_rate_pct: Option<u32>,
    pub mr_total_samples: Option<f64>,
}

impl MrComparison {
    pub fn new(method: &str, threshold: f64, m: &[SweepPoint], mr: &[SweepPoint]) -> Self {
        let a = cheapest_reaching(m, threshold);
        let b = cheapest_reaching(mr, threshold);
        Self {
            method: method.to_string(),
            threshold,
            m_rate_pct: a.map(|p| p.rate_pct),
            m_total_samples: a.map(|p| p.total_samples),
            mr_rate_pct: b.map(|p| p.rate_pct),
            mr_total_samples: b.map(|p| p.total_samples),
        }
    }
}
