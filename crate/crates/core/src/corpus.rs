//! Benchmarks, per-sample model results and precomputed embeddings.
//!
//! Interchange formats:
//!
//! - benchmarks: JSON lines, `{"id": "...", "<text_field>": "...", ...}`
//! - results: CSV with header `model,sample_id,score`
//! - embeddings: JSON lines, `{"id": "...", "vector": [f, f, ...]}`
//!
//! Everything loaded here is immutable afterwards.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: invalid JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: duplicate sample id {id:?}")]
    DuplicateId { id: String, line: usize },
    #[error("line {line}: {detail}")]
    SchemaError { line: usize, detail: String },
    #[error("no score for model {model:?} on sample {sample_id:?}")]
    IncompleteMatrix { model: String, sample_id: String },
    #[error("line {line}: bad score {value:?}")]
    BadScore { line: usize, value: String },
    #[error("line {line}: sample {sample_id:?} is not part of the benchmark")]
    UnknownSample { sample_id: String, line: usize },
    #[error("line {line}: second score for model {model:?} on sample {sample_id:?}")]
    DuplicateCell {
        model: String,
        sample_id: String,
        line: usize,
    },
    #[error("duplicate model {0:?}")]
    DuplicateModel(String),
    #[error("score matrix shape does not match {models} models x {samples} samples")]
    ShapeMismatch { models: usize, samples: usize },
    #[error("line {line}: vector has dimension {found}, expected {expected}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: vector for {id:?} has a non-finite component")]
    BadVector { id: String, line: usize },
    #[error("embedding set is empty")]
    EmptyEmbeddings,
    #[error("no embedding for sample {0:?}")]
    MissingEmbedding(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One benchmark item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub text: String,
    /// Every other record field. Non-string JSON values are kept as their JSON text.
    pub aux: BTreeMap<String, String>,
}

impl Sample {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            aux: BTreeMap::new(),
        }
    }
}

/// A named, ordered collection of samples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Benchmark {
    name: String,
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
}

impl Benchmark {
    pub fn new(name: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (pos, sample) in samples.iter().enumerate() {
            if sample.id.is_empty() {
                return Err(CorpusError::SchemaError {
                    line: pos + 1,
                    detail: "empty sample id".into(),
                });
            }
            if index.insert(sample.id.clone(), pos).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: sample.id.clone(),
                    line: pos + 1,
                });
            }
        }
        Ok(Self {
            name: name.into(),
            samples,
            index,
        })
    }

    /// Parses JSON-lines content. Blank lines are skipped; line numbers in
    /// errors are physical, 1-based.
    pub fn from_jsonl(name: impl Into<String>, content: &str, text_field: &str) -> Result<Self> {
        let mut samples = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (i, raw) in content.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: Map<String, Value> = serde_json::from_str(raw)
                .map_err(|source| CorpusError::Json { line, source })?;
            let id = match record.get("id") {
                Some(Value::String(s)) if !s.is_empty() => s.clone(),
                Some(Value::String(_)) => {
                    return Err(CorpusError::SchemaError {
                        line,
                        detail: "empty id".into(),
                    })
                }
                Some(_) => {
                    return Err(CorpusError::SchemaError {
                        line,
                        detail: "field `id` must be a string".into(),
                    })
                }
                None => {
                    return Err(CorpusError::SchemaError {
                        line,
                        detail: "missing field `id`".into(),
                    })
                }
            };
            let text = match record.get(text_field) {
                Some(Value::String(s)) => s.clone(),
                Some(_) => {
                    return Err(CorpusError::SchemaError {
                        line,
                        detail: format!("field `{text_field}` must be a string"),
                    })
                }
                None => {
                    return Err(CorpusError::SchemaError {
                        line,
                        detail: format!("missing field `{text_field}`"),
                    })
                }
            };
            if seen.insert(id.clone(), line).is_some() {
                return Err(CorpusError::DuplicateId { id, line });
            }
            let aux = record
                .into_iter()
                .filter(|(k, _)| k != "id" && k != text_field)
                .map(|(k, v)| {
                    let v = match v {
                        Value::String(s) => s,
                        other => other.to_string(),
                    };
                    (k, v)
                })
                .collect();
            samples.push(Sample { id, text, aux });
        }
        Self::new(name, samples)
    }

    /// Canonical JSON-lines form: one object per sample, keys sorted.
    pub fn to_jsonl(&self, text_field: &str) -> String {
        let mut out = String::new();
        for sample in &self.samples {
            let mut record = Map::new();
            for (k, v) in &sample.aux {
                record.insert(k.clone(), Value::String(v.clone()));
            }
            record.insert("id".into(), Value::String(sample.id.clone()));
            record.insert(text_field.into(), Value::String(sample.text.clone()));
            out.push_str(&Value::Object(record).to_string());
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.position(id).map(|i| &self.samples[i])
    }

    pub fn full_view(&self) -> BenchmarkView<'_> {
        BenchmarkView {
            benchmark: self,
            members: (0..self.samples.len()).collect(),
        }
    }
}

/// Loads a benchmark; the name is the file stem.
pub fn load_benchmark(path: &Path, text_field: &str) -> Result<Benchmark> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Benchmark::from_jsonl(name, &read_file(path)?, text_field)
}

/// A subset of a benchmark's samples, kept in benchmark order.
#[derive(Debug, Clone)]
pub struct BenchmarkView<'a> {
    benchmark: &'a Benchmark,
    members: Vec<usize>,
}

impl<'a> BenchmarkView<'a> {
    /// Keeps the samples for which `keep` returns true.
    pub fn filtered(benchmark: &'a Benchmark, mut keep: impl FnMut(&Sample) -> bool) -> Self {
        let members = benchmark
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| keep(s))
            .map(|(i, _)| i)
            .collect();
        Self { benchmark, members }
    }

    pub fn benchmark(&self) -> &'a Benchmark {
        self.benchmark
    }

    /// Positions of the member samples in the underlying benchmark.
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn samples(&self) -> impl Iterator<Item = &'a Sample> + '_ {
        self.members.iter().map(|&i| &self.benchmark.samples[i])
    }
}

/// Models x samples score matrix. Models are sorted lexicographically and
/// samples follow benchmark order.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultMatrix {
    benchmark_name: String,
    models: Vec<String>,
    sample_ids: Vec<String>,
    scores: Vec<f64>,
    sample_index: HashMap<String, usize>,
}

impl ResultMatrix {
    /// Builds a matrix from one score row per model. Rows are reordered so
    /// that models end up sorted.
    pub fn new(
        benchmark_name: impl Into<String>,
        models: Vec<String>,
        sample_ids: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = sample_ids.len();
        if rows.len() != models.len() || rows.iter().any(|r| r.len() != n) {
            return Err(CorpusError::ShapeMismatch {
                models: models.len(),
                samples: n,
            });
        }
        let mut paired: Vec<(String, Vec<f64>)> = models.into_iter().zip(rows).collect();
        paired.sort_by(|a, b| a.0.cmp(&b.0));
        for w in paired.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(CorpusError::DuplicateModel(w[0].0.clone()));
            }
        }
        let mut scores = Vec::with_capacity(paired.len() * n);
        let mut models = Vec::with_capacity(paired.len());
        for (m, row) in paired {
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(CorpusError::BadScore {
                    line: 0,
                    value: bad.to_string(),
                });
            }
            scores.extend(row);
            models.push(m);
        }
        let mut sample_index = HashMap::with_capacity(n);
        for (j, id) in sample_ids.iter().enumerate() {
            if sample_index.insert(id.clone(), j).is_some() {
                return Err(CorpusError::DuplicateId {
                    id: id.clone(),
                    line: j + 1,
                });
            }
        }
        Ok(Self {
            benchmark_name: benchmark_name.into(),
            models,
            sample_ids,
            scores,
            sample_index,
        })
    }

    /// Parses `model,sample_id,score` CSV against a benchmark's sample list.
    pub fn from_csv(content: &str, benchmark: &Benchmark) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(content.as_bytes());
        let headers = reader.headers()?.clone();
        let column = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| CorpusError::SchemaError {
                    line: 1,
                    detail: format!("missing column `{name}`"),
                })
        };
        let (model_col, sample_col, score_col) =
            (column("model")?, column("sample_id")?, column("score")?);

        let n = benchmark.len();
        let mut cells: BTreeMap<String, Vec<Option<f64>>> = BTreeMap::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            let field = |col: usize| record.get(col).unwrap_or("");
            let model = field(model_col);
            let sample_id = field(sample_col);
            let raw = field(score_col);
            if model.is_empty() {
                return Err(CorpusError::SchemaError {
                    line,
                    detail: "empty model".into(),
                });
            }
            let score: f64 = raw.parse().map_err(|_| CorpusError::BadScore {
                line,
                value: raw.to_string(),
            })?;
            if !score.is_finite() {
                return Err(CorpusError::BadScore {
                    line,
                    value: raw.to_string(),
                });
            }
            let j = benchmark
                .position(sample_id)
                .ok_or_else(|| CorpusError::UnknownSample {
                    sample_id: sample_id.to_string(),
                    line,
                })?;
            let row = cells
                .entry(model.to_string())
                .or_insert_with(|| vec![None; n]);
            if row[j].replace(score).is_some() {
                return Err(CorpusError::DuplicateCell {
                    model: model.to_string(),
                    sample_id: sample_id.to_string(),
                    line,
                });
            }
        }

        let sample_ids: Vec<String> = benchmark.ids().map(str::to_string).collect();
        let mut models = Vec::with_capacity(cells.len());
        let mut rows = Vec::with_capacity(cells.len());
        for (model, row) in cells {
            let mut dense = Vec::with_capacity(n);
            for (j, cell) in row.into_iter().enumerate() {
                match cell {
                    Some(v) => dense.push(v),
                    None => {
                        return Err(CorpusError::IncompleteMatrix {
                            model,
                            sample_id: sample_ids[j].clone(),
                        })
                    }
                }
            }
            models.push(model);
            rows.push(dense);
        }
        Self::new(benchmark.name(), models, sample_ids, rows)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,sample_id,score\n");
        for (m, model) in self.models.iter().enumerate() {
            for (j, id) in self.sample_ids.iter().enumerate() {
                out.push_str(&format!("{model},{id},{}\n", self.score(m, j)));
            }
        }
        out
    }

    pub fn benchmark_name(&self) -> &str {
        &self.benchmark_name
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn sample_position(&self, id: &str) -> Option<usize> {
        self.sample_index.get(id).copied()
    }

    pub fn score(&self, model: usize, sample: usize) -> f64 {
        self.scores[model * self.sample_ids.len() + sample]
    }

    pub fn row(&self, model: usize) -> &[f64] {
        let n = self.sample_ids.len();
        &self.scores[model * n..(model + 1) * n]
    }

    /// Per-model mean over every sample: the full-benchmark score.
    pub fn full_means(&self) -> Vec<f64> {
        (0..self.models.len())
            .map(|m| {
                let row = self.row(m);
                if row.is_empty() {
                    0.0
                } else {
                    row.iter().sum::<f64>() / row.len() as f64
                }
            })
            .collect()
    }

    /// True when the matrix sample list is exactly the benchmark's id list.
    pub fn is_aligned_with(&self, benchmark: &Benchmark) -> bool {
        self.sample_ids.len() == benchmark.len()
            && self.sample_ids.iter().map(String::as_str).eq(benchmark.ids())
    }
}

pub fn load_results(path: &Path, benchmark: &Benchmark) -> Result<ResultMatrix> {
    ResultMatrix::from_csv(&read_file(path)?, benchmark)
}

/// Sample id to fixed-dimension vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingSet {
    dim: Option<usize>,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingSet {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut set = Self::default();
        for (i, (id, vector)) in entries.into_iter().enumerate() {
            set.insert(id, vector, i + 1)?;
        }
        Ok(set)
    }

    fn insert(&mut self, id: String, vector: Vec<f64>, line: usize) -> Result<()> {
        let expected = *self.dim.get_or_insert(vector.len());
        if vector.len() != expected {
            return Err(CorpusError::DimMismatch {
                line,
                expected,
                found: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(CorpusError::BadVector { id, line });
        }
        if self.vectors.contains_key(&id) {
            return Err(CorpusError::DuplicateId { id, line });
        }
        self.vectors.insert(id, vector);
        Ok(())
    }

    pub fn from_jsonl(content: &str) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Record {
            id: String,
            vector: Vec<Value>,
        }
        let mut set = Self::default();
        for (i, raw) in content.lines().enumerate() {
            let line = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(raw).map_err(|source| CorpusError::Json { line, source })?;
            let mut vector = Vec::with_capacity(record.vector.len());
            for v in &record.vector {
                match v.as_f64() {
                    Some(x) => vector.push(x),
                    None => {
                        return Err(CorpusError::BadVector {
                            id: record.id,
                            line,
                        })
                    }
                }
            }
            set.insert(record.id, vector, line)?;
        }
        Ok(set)
    }

    /// Vector dimension; `None` for an empty set, which is unusable.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn ensure_usable(&self) -> Result<usize> {
        match self.dim {
            Some(d) if !self.vectors.is_empty() => Ok(d),
            _ => Err(CorpusError::EmptyEmbeddings),
        }
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.vectors
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| CorpusError::MissingEmbedding(id.to_string()))
    }

    /// Entries in id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

pub fn load_embeddings(path: &Path) -> Result<EmbeddingSet> {
    EmbeddingSet::from_jsonl(&read_file(path)?)
}
