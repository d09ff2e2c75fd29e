//! Benchmark subsampling toolkit.
//!
//! Selects representative subsets of evaluation benchmarks with random,
//! quality-ranked, difficulty-ranked and cluster-stratified sampling, then
//! measures how well each subset preserves the full-benchmark model ranking
//! (Pearson correlation) and score distribution (1-D Wasserstein distance).
//!
//! Modules, bottom-up:
//!
//! - [`corpus`]: benchmarks, per-sample result matrices, embeddings.
//! - [`textstats`]: tokenizer, text-quality and readability metrics.
//! - [`vectorize`]: TF-IDF term-document matrices.
//! - [`cluster`]: k-means, NMF, LDA and spectral clustering.
//! - [`sampler`]: subset plans over a sampling-rate grid.
//! - [`fidelity`]: rank/score preservation, win-rates, adaptive selection.
//! - [`redundancy`]: cross-benchmark duplicate detection and SuperSubsets.
//! - [`experiment`]: the per-benchmark and multi-benchmark sweep loops.

pub mod cluster;
pub mod corpus;
pub mod experiment;
pub mod fidelity;
pub mod redundancy;
pub mod rng;
pub mod sampler;
pub mod textstats;
pub mod vectorize;

pub use corpus::{Benchmark, BenchmarkView, EmbeddingSet, ResultMatrix, Sample};
pub use fidelity::{FidelityPoint, ScoreVector, WinRateTable};
pub use sampler::{Direction, MethodSpec, SubsetPlan};
