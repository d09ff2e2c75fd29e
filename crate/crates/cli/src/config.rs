//! Run configuration: one TOML document, with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sublime_core::fidelity::AdaptiveConfig;
use sublime_core::redundancy::{ComplexityStage, UnknownComplexity, DEFAULT_COMPLEXITY_FACTOR, DEFAULT_REVIEW_THRESHOLD, DEFAULT_TAU};
use sublime_core::sampler::{Direction, MethodSpec, SamplerError};
use sublime_core::textstats::DifficultyWeights;

use crate::error::{CliError, ExitCode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkEntry {
    /// Defaults to the file stem of `path`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub results: Option<PathBuf>,
    /// Embedding tag -> JSONL file.
    #[serde(default)]
    pub embeddings: BTreeMap<String, PathBuf>,
    /// JSONL of `{"id", "time_s", "mem_bytes"}` records.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fingerprints: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodEntry {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub params: BTreeMap<String, toml::Value>,
}

impl MethodEntry {
    pub fn spec(&self) -> Result<MethodSpec, SamplerError> {
        let mut spec = MethodSpec::parse(&self.id)?;
        if let Some(d) = self.direction {
            spec = spec.with_direction(d);
        }
        spec.params = self
            .params
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    toml::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (k.clone(), s)
            })
            .collect();
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dictionaries {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub english: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub easy: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveSection {
    pub window: [u32; 2],
    pub threshold: f64,
}

impl Default for AdaptiveSection {
    fn default() -> Self {
        let d = AdaptiveConfig::default();
        Self {
            window: [d.window.0, d.window.1],
            threshold: d.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutorSection {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_timeout() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RedundancySection {
    /// Embedding tag used for the semantic stage.
    pub embedding: Option<String>,
    pub tau: f64,
    pub complexity: bool,
    pub factor: f64,
    pub unknown_complexity: UnknownComplexity,
    pub review: bool,
    pub review_threshold: u8,
    pub review_url: Option<String>,
    pub review_model: String,
    pub prompt_template: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub in_flight: usize,
    pub solution_field: String,
    pub tests_field: String,
    pub executor: Option<ExecutorSection>,
    /// Average-win-rate Pearson target for the M vs MR comparison.
    pub mr_threshold: f64,
}

impl Default for RedundancySection {
    fn default() -> Self {
        Self {
            embedding: None,
            tau: DEFAULT_TAU,
            complexity: false,
            factor: DEFAULT_COMPLEXITY_FACTOR,
            unknown_complexity: UnknownComplexity::Drop,
            review: false,
            review_threshold: DEFAULT_REVIEW_THRESHOLD,
            review_url: None,
            review_model: sublime_core::redundancy::review::DEFAULT_MODEL.to_string(),
            prompt_template: None,
            cache_dir: None,
            in_flight: sublime_core::redundancy::review::DEFAULT_IN_FLIGHT,
            solution_field: "solution".into(),
            tests_field: "tests".into(),
            executor: None,
            mr_threshold: 0.9,
        }
    }
}

impl RedundancySection {
    pub fn complexity_stage(&self) -> Option<ComplexityStage> {
        self.complexity.then_some(ComplexityStage {
            factor: self.factor,
            unknown: self.unknown_complexity,
        })
    }
}

fn default_text_field() -> String {
    "text".into()
}

fn default_rates() -> Vec<u32> {
    (1..=100).collect()
}

fn default_seeds() -> Vec<u64> {
    (1..=5).collect()
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default = "default_text_field")]
    pub text_field: String,
    #[serde(default = "default_rates")]
    pub rates: Vec<u32>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub benchmarks: Vec<BenchmarkEntry>,
    pub methods: Vec<MethodEntry>,
    #[serde(default)]
    pub dictionaries: Dictionaries,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty_weights: Option<[f64; 4]>,
    #[serde(default)]
    pub adaptive: AdaptiveSection,
    #[serde(default)]
    pub redundancy: RedundancySection,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::new(ExitCode::Schema, anyhow::anyhow!(msg.into()))
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn parse(content: &str) -> Result<Self, CliError> {
        toml::from_str(content).map_err(|e| schema(format!("config: {e}")))
    }

    /// Reads the config and makes its relative paths relative to the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let content = std::fs::read_to_string(path)
            .map_err(|e| schema(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::parse(&content)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.output_dir);
        for b in &mut self.benchmarks {
            resolve(base, &mut b.path);
            if let Some(r) = &mut b.results {
                resolve(base, r);
            }
            if let Some(f) = &mut b.fingerprints {
                resolve(base, f);
            }
            for p in b.embeddings.values_mut() {
                resolve(base, p);
            }
        }
        for p in [&mut self.dictionaries.english, &mut self.dictionaries.easy]
            .into_iter()
            .flatten()
        {
            resolve(base, p);
        }
        let r = &mut self.redundancy;
        for p in [&mut r.prompt_template, &mut r.cache_dir].into_iter().flatten() {
            resolve(base, p);
        }
        if let Some(e) = &mut r.executor {
            if e.program.components().count() > 1 {
                resolve(base, &mut e.program);
            }
        }
    }

    /// Checks everything that can be checked without reading inputs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.benchmarks.is_empty() {
            return Err(schema("config lists no benchmarks"));
        }
        if self.methods.is_empty() {
            return Err(schema("config lists no methods"));
        }
        if self.seeds.is_empty() {
            return Err(schema("config lists no seeds"));
        }
        let mut names = std::collections::BTreeSet::new();
        for b in &self.benchmarks {
            if !names.insert(self.benchmark_name(b)) {
                return Err(schema(format!("benchmark {:?} listed twice", self.benchmark_name(b))));
            }
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.methods {
            if !ids.insert(m.id.as_str()) {
                return Err(schema(format!("method {:?} listed twice", m.id)));
            }
            m.spec().map_err(|e| schema(e.to_string()))?;
        }
        let [lo, hi] = self.adaptive.window;
        if lo == 0 || lo > hi || hi > 100 {
            return Err(schema(format!("adaptive window [{lo}, {hi}] is not within 1..=100")));
        }
        if let Some(w) = self.difficulty_weights {
            if w.iter().any(|x| !x.is_finite()) || !(w.iter().sum::<f64>() > 0.0) {
                return Err(schema("difficulty_weights must be finite with a positive sum"));
            }
        }
        let r = &self.redundancy;
        if !(r.tau > -1.0 && r.tau <= 1.0) {
            return Err(schema(format!("redundancy.tau {} is outside (-1, 1]", r.tau)));
        }
        if !(r.factor > 1.0) {
            return Err(schema(format!("redundancy.factor {} must exceed 1", r.factor)));
        }
        if r.review_threshold > 5 {
            return Err(schema("redundancy.review_threshold must be within 0..=5"));
        }
        Ok(())
    }

    pub fn benchmark_name(&self, b: &BenchmarkEntry) -> String {
        b.name.clone().unwrap_or_else(|| {
            b.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>, CliError> {
        self.methods
            .iter()
            .map(|m| m.spec().map_err(|e| schema(e.to_string())))
            .collect()
    }

    pub fn adaptive_config(&self) -> AdaptiveConfig {
        AdaptiveConfig {
            window: (self.adaptive.window[0], self.adaptive.window[1]),
            threshold: self.adaptive.threshold,
        }
    }

    pub fn weights(&self) -> DifficultyWeights {
        match self.difficulty_weights {
            Some([a, b, c, d]) => DifficultyWeights::new(a, b, c, d),
            None => DifficultyWeights::default(),
        }
    }
}

#[derive(Serialize)]
pub struct Resolved<'a> {
    pub tool: &'a str,
    pub tool_version: &'a str,
    #[serde(flatten)]
    pub config: &'a RunConfig,
}

/// `config.resolved` contents: the effective config plus the tool version.
pub fn resolved_text(config: &RunConfig) -> String {
    toml::to_string(&Resolved {
        tool: env!("CARGO_PKG_NAME"),
        tool_version: env!("CARGO_PKG_VERSION"),
        config,
    })
    .expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [[benchmarks]]
        path = "data/b1.jsonl"
        results = "data/b1.csv"
        embeddings = { mteb = "data/b1_emb.jsonl" }

        [[methods]]
        id = "random"

        [[methods]]
        id = "cluster_kmeans_tfidf"
        params = { k = 4, iters = "50" }
    "#;

    #[test]
    fn defaults_and_paths() {
        let mut cfg = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.rates.len(), 100);
        assert_eq!(cfg.seeds, vec![1, 2, 3, 4, 5]);
        assert_eq!(cfg.adaptive.window, [5, 25]);
        cfg.resolve_paths(Path::new("/cfg"));
        assert_eq!(cfg.benchmarks[0].path, PathBuf::from("/cfg/data/b1.jsonl"));
        assert_eq!(cfg.output_dir, PathBuf::from("/cfg/out"));
        assert_eq!(cfg.benchmark_name(&cfg.benchmarks[0]), "b1");
        let specs = cfg.method_specs().unwrap();
        assert_eq!(specs[1].params["k"], "4");
        assert_eq!(specs[1].params["iters"], "50");
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(RunConfig::parse("benchmarks = []\nmethods = []\nbogus = 1").is_err());
        let cfg = RunConfig::parse(&MINIMAL.replace("\"random\"", "\"nope\"")).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = RunConfig::parse(&MINIMAL.replace("\"cluster_kmeans_tfidf\"", "\"random\"")).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn resolved_has_version() {
        let cfg = RunConfig::parse(MINIMAL).unwrap();
        let text = resolved_text(&cfg);
        assert!(text.contains("tool_version"));
        assert!(RunConfig::parse(&text.replace("tool = \"sublime-cli\"", "").lines().filter(|l| !l.starts_with("tool_version")).collect::<Vec<_>>().join("\n")).is_ok());
    }
}
