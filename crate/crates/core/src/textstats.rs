//! Tokenization, text-quality metrics and readability indices.
//!
//! Tokenizer rules:
//!
//! - a word is a maximal run of letters, digits and apostrophes, with
//!   leading/trailing apostrophes removed;
//! - a sentence is a maximal segment ending in `.`, `!` or `?` that contains
//!   at least one word (at least one sentence whenever there is a word);
//! - syllables are maximal groups of `a e i o u y`, at least one per word.
//!
//! Every metric is a pure function of the text and the word lists.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TextStatsError {
    #[error("text has no words")]
    EmptyText,
    #[error("word list {0} is empty")]
    EmptyDictionary(String),
    #[error("cannot read word list {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("difficulty weights must be finite with a positive sum")]
    BadWeights,
}

const EASY_WORDS: &str = include_str!("../data/easy_words.txt");
const ENGLISH_WORDS: &str = include_str!("../data/english_words.txt");

/// A set of lowercase words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordSet(HashSet<String>);

impl WordSet {
    /// One word per line; blank lines ignored, entries lowercased.
    pub fn parse(content: &str) -> Option<Self> {
        let words: HashSet<String> = content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        (!words.is_empty()).then_some(Self(words))
    }

    pub fn load(path: &Path) -> Result<Self, TextStatsError> {
        let content = fs::read_to_string(path).map_err(|source| TextStatsError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&content).ok_or_else(|| TextStatsError::EmptyDictionary(path.display().to_string()))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    /// Dale-Chall list of words familiar to fourth-graders (2,940 entries).
    pub fn default_easy_words() -> Self {
        Self::parse(EASY_WORDS).expect("bundled list is nonempty")
    }

    /// General English vocabulary used for spelling checks.
    pub fn default_english() -> Self {
        Self::parse(ENGLISH_WORDS).expect("bundled list is nonempty")
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenStats {
    pub words: Vec<String>,
    pub n_words: usize,
    pub n_sentences: usize,
    pub n_syllables: usize,
    /// Distinct words after lowercasing.
    pub n_unique_words: usize,
    pub n_periods: usize,
    pub n_upper: usize,
    pub n_lower: usize,
    pub n_vowels: usize,
    pub n_consonants: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '\u{2019}'
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits text into word tokens (original case).
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .map(|run| run.trim_matches(is_apostrophe))
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn count_syllables(word: &str) -> usize {
    let mut groups = 0;
    let mut in_group = false;
    for c in word.chars().flat_map(char::to_lowercase) {
        let vowel = matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y');
        if vowel && !in_group {
            groups += 1;
        }
        in_group = vowel;
    }
    groups.max(1)
}

pub fn tokenize(text: &str) -> TokenStats {
    let words = words(text);

    let mut n_sentences = 0;
    let mut segment_has_word = false;
    let mut stats = TokenStats::default();
    for c in text.chars() {
        if c.is_alphanumeric() {
            segment_has_word = true;
        } else if is_terminator(c) && segment_has_word {
            n_sentences += 1;
            segment_has_word = false;
        }
        if c == '.' {
            stats.n_periods += 1;
        }
        if c.is_uppercase() {
            stats.n_upper += 1;
        } else if c.is_lowercase() {
            stats.n_lower += 1;
        }
        if c.is_alphabetic() {
            match c.to_ascii_lowercase() {
                'a' | 'e' | 'i' | 'o' | 'u' => stats.n_vowels += 1,
                _ => stats.n_consonants += 1,
            }
        }
    }
    if !words.is_empty() {
        n_sentences = n_sentences.max(1);
    }

    let unique: HashSet<String> = words.iter().map(|w| w.to_lowercase()).collect();
    stats.n_words = words.len();
    stats.n_sentences = n_sentences;
    stats.n_syllables = words.iter().map(|w| count_syllables(w)).sum();
    stats.n_unique_words = unique.len();
    stats.words = words;
    stats
}

/// Text-quality indicators for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityProfile {
    pub spelling_errors: usize,
    pub avg_word_length: f64,
    pub repeating_words: usize,
    pub lexical_diversity: f64,
    /// Mean of wordform ratio, vowel-consonant ratio and periods per sentence.
    pub cpd: f64,
}

/// Components of the compound score, exposed separately for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpdParts {
    pub wordform: f64,
    pub vowel_consonant_ratio: f64,
    pub periods_per_sentence: f64,
}

impl CpdParts {
    pub fn of(stats: &TokenStats) -> Self {
        Self {
            wordform: stats.n_upper as f64 / stats.n_lower.max(1) as f64,
            vowel_consonant_ratio: stats.n_vowels as f64 / stats.n_consonants.max(1) as f64,
            periods_per_sentence: stats.n_periods as f64 / stats.n_sentences.max(1) as f64,
        }
    }

    pub fn mean(&self) -> f64 {
        (self.wordform + self.vowel_consonant_ratio + self.periods_per_sentence) / 3.0
    }
}

pub fn quality_profile(stats: &TokenStats, dictionary: &WordSet) -> QualityProfile {
    let spelling_errors = stats
        .words
        .iter()
        .filter(|w| !dictionary.contains(&w.to_lowercase()))
        .count();
    let (avg_word_length, lexical_diversity) = if stats.n_words == 0 {
        (0.0, 0.0)
    } else {
        let chars: usize = stats.words.iter().map(|w| w.chars().count()).sum();
        (
            chars as f64 / stats.n_words as f64,
            stats.n_unique_words as f64 / stats.n_words as f64,
        )
    };
    QualityProfile {
        spelling_errors,
        avg_word_length,
        repeating_words: stats.n_words - stats.n_unique_words,
        lexical_diversity,
        cpd: CpdParts::of(stats).mean(),
    }
}

/// Readability indices for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityProfile {
    /// Fraction of words outside the familiar-word list.
    pub difficult_pct: f64,
    pub dale_chall: f64,
    pub flesch: f64,
    pub gunning_fog: f64,
}

const INFLECTIONS: [&str; 4] = ["s", "es", "ed", "ing"];

/// A word is familiar when it, or its base after stripping one regular
/// inflection, is on the list.
pub fn is_familiar(word: &str, easy_words: &WordSet) -> bool {
    let word = word.to_lowercase();
    if easy_words.contains(&word) {
        return true;
    }
    INFLECTIONS.iter().any(|suffix| {
        word.strip_suffix(suffix)
            .is_some_and(|base| !base.is_empty() && easy_words.contains(base))
    })
}

pub fn readability_profile(
    stats: &TokenStats,
    easy_words: &WordSet,
) -> Result<ReadabilityProfile, TextStatsError> {
    if stats.n_words == 0 {
        return Err(TextStatsError::EmptyText);
    }
    let words = stats.n_words as f64;
    let words_per_sentence = words / stats.n_sentences as f64;
    let syllables_per_word = stats.n_syllables as f64 / words;
    let difficult = stats
        .words
        .iter()
        .filter(|w| !is_familiar(w, easy_words))
        .count();
    let complex = stats
        .words
        .iter()
        .filter(|w| count_syllables(w) >= 3)
        .count();
    let difficult_pct = difficult as f64 / words;
    Ok(ReadabilityProfile {
        difficult_pct,
        dale_chall: 0.1579 * (difficult_pct * 100.0) + 0.0496 * words_per_sentence,
        flesch: 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word,
        gunning_fog: 0.4 * (words_per_sentence + 100.0 * complex as f64 / words),
    })
}

/// Weights of the four normalized readability terms in the difficulty composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifficultyWeights {
    pub difficult_pct: f64,
    pub dale_chall: f64,
    /// Applied to negated Flesch ease, so that higher means harder.
    pub flesch: f64,
    pub gunning_fog: f64,
}

impl Default for DifficultyWeights {
    fn default() -> Self {
        Self {
            difficult_pct: 0.25,
            dale_chall: 0.25,
            flesch: 0.25,
            gunning_fog: 0.25,
        }
    }
}

impl DifficultyWeights {
    pub fn new(difficult_pct: f64, dale_chall: f64, flesch: f64, gunning_fog: f64) -> Self {
        Self {
            difficult_pct,
            dale_chall,
            flesch,
            gunning_fog,
        }
    }

    fn as_array(&self) -> [f64; 4] {
        [self.difficult_pct, self.dale_chall, self.flesch, self.gunning_fog]
    }
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if !(span > 0.0) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / span).collect()
}

/// Composite difficulty per profile (higher = harder). Each readability
/// term is min-max normalized across the given profiles; a term that is
/// constant across them contributes nothing.
pub fn difficulty_scores(
    profiles: &[ReadabilityProfile],
    weights: &DifficultyWeights,
) -> Result<Vec<f64>, TextStatsError> {
    let w = weights.as_array();
    if w.iter().any(|x| !x.is_finite()) || !(w.iter().sum::<f64>() > 0.0) {
        return Err(TextStatsError::BadWeights);
    }
    let columns: [Vec<f64>; 4] = [
        profiles.iter().map(|p| p.difficult_pct).collect(),
        profiles.iter().map(|p| p.dale_chall).collect(),
        profiles.iter().map(|p| -p.flesch).collect(),
        profiles.iter().map(|p| p.gunning_fog).collect(),
    ];
    let normalized: Vec<Vec<f64>> = columns.iter().map(|c| min_max_normalize(c)).collect();
    Ok((0..profiles.len())
        .map(|i| (0..4).map(|t| w[t] * normalized[t][i]).sum())
        .collect())
}
