//! Corpus preparation: line filters, exact deduplication, per-language
//! size caps, and alpha-weighted multilingual sampling.
//!
//! Filtering operates on whitespace-separated tokens. "Alphabetic" means
//! the Unicode `Alphabetic` property, not ASCII, since target languages
//! span several scripts. The alphabetic ratio is computed over
//! non-whitespace characters.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

/// External reject-predicate hook (e.g. a language-ID gate). Returns
/// `true` when the line should be rejected.
pub type LangIdPredicate = Arc<dyn Fn(&str) -> bool + Send + Sync>;

/// Line-level cleaning thresholds.
#[derive(Clone, Serialize, Deserialize)]
pub struct FilterRules {
    /// Reject lines with fewer tokens than this.
    pub min_tokens: usize,
    /// Reject lines whose mean token length (in chars) exceeds this.
    pub max_avg_token_len: f64,
    /// Reject lines containing any token longer than this many chars.
    pub max_token_len: usize,
    /// Reject lines whose alphabetic fraction falls below this.
    pub min_alpha_ratio: f64,
    /// Optional external reject hook, applied last. Disabled by default.
    #[serde(skip)]
    pub langid_predicate: Option<LangIdPredicate>,
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            min_tokens: 2,
            max_avg_token_len: 16.0,
            max_token_len: 32,
            min_alpha_ratio: 0.5,
            langid_predicate: None,
        }
    }
}

impl fmt::Debug for FilterRules {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterRules")
            .field("min_tokens", &self.min_tokens)
            .field("max_avg_token_len", &self.max_avg_token_len)
            .field("max_token_len", &self.max_token_len)
            .field("min_alpha_ratio", &self.min_alpha_ratio)
            .field("langid_predicate", &self.langid_predicate.is_some())
            .finish()
    }
}

impl FilterRules {
    pub fn validate(&self) -> Result<()> {
        if self.min_tokens == 0 || self.max_token_len == 0 || self.max_avg_token_len <= 0.0 {
            return Err(Error::InvalidArgument(
                "filter thresholds must be strictly positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.min_alpha_ratio) {
            return Err(Error::InvalidArgument(format!(
                "min_alpha_ratio must lie in [0, 1], got {}",
                self.min_alpha_ratio
            )));
        }
        Ok(())
    }
}

/// Why a line was rejected. Checks run in this order; the first failure wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RejectReason {
    TooFewTokens,
    AvgTokenTooLong,
    TokenTooLong,
    AlphaRatioTooLow,
    LangIdReject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterDecision {
    Keep,
    Reject(RejectReason),
}

/// Per-reason rejection tallies for one filter pass.
///
/// `kept` plus all rejection counts equals the input line count.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionCounts {
    pub kept: u64,
    pub too_few_tokens: u64,
    pub avg_token_too_long: u64,
    pub token_too_long: u64,
    pub alpha_ratio_too_low: u64,
    pub langid_reject: u64,
}

impl RejectionCounts {
    pub fn total(&self) -> u64 {
        self.kept
            + self.too_few_tokens
            + self.avg_token_too_long
            + self.token_too_long
            + self.alpha_ratio_too_low
            + self.langid_reject
    }

    fn record(&mut self, decision: FilterDecision) {
        match decision {
            FilterDecision::Keep => self.kept += 1,
            FilterDecision::Reject(RejectReason::TooFewTokens) => self.too_few_tokens += 1,
            FilterDecision::Reject(RejectReason::AvgTokenTooLong) => self.avg_token_too_long += 1,
            FilterDecision::Reject(RejectReason::TokenTooLong) => self.token_too_long += 1,
            FilterDecision::Reject(RejectReason::AlphaRatioTooLow) => self.alpha_ratio_too_low += 1,
            FilterDecision::Reject(RejectReason::LangIdReject) => self.langid_reject += 1,
        }
    }
}

/// One language's lines plus cached size totals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LanguageStream {
    code: String,
    lines: Vec<String>,
    byte_count: u64,
}

impl LanguageStream {
    pub fn new(code: impl Into<String>, lines: Vec<String>) -> Self {
        let byte_count = lines.iter().map(|l| l.len() as u64).sum();
        LanguageStream {
            code: code.into(),
            lines,
            byte_count,
        }
    }

    pub fn language_code(&self) -> &str {
        &self.code
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn into_lines(self) -> Vec<String> {
        self.lines
    }

    /// Sum of UTF-8 encoded line lengths (newlines excluded).
    pub fn byte_count(&self) -> u64 {
        self.byte_count
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// Read a one-sentence-per-line UTF-8 file.
    pub fn read_from_path(code: impl Into<String>, path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = Vec::new();
        for line in BufReader::new(file).lines() {
            lines.push(line.map_err(|e| Error::io(path, e))?);
        }
        Ok(LanguageStream::new(code, lines))
    }

    pub fn write_to_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for line in &self.lines {
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Alpha-multinomial sampling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingPolicy {
    /// Exponent applied to language shares; values below 1 upsample
    /// low-resource languages.
    pub alpha: f64,
    /// Optional per-language byte cap, applied before weights are computed.
    pub per_language_cap_bytes: Option<u64>,
    pub seed: u64,
}

impl SamplingPolicy {
    pub fn new(alpha: f64, seed: u64) -> Self {
        SamplingPolicy {
            alpha,
            per_language_cap_bytes: None,
            seed,
        }
    }
}

fn decide(line: &str, rules: &FilterRules) -> FilterDecision {
    let tokens: Vec<&str> = line.split_whitespace().collect();
    if tokens.len() < rules.min_tokens {
        return FilterDecision::Reject(RejectReason::TooFewTokens);
    }
    let char_counts: Vec<usize> = tokens.iter().map(|t| t.chars().count()).collect();
    let total_chars: usize = char_counts.iter().sum();
    let avg = total_chars as f64 / tokens.len() as f64;
    if avg > rules.max_avg_token_len {
        return FilterDecision::Reject(RejectReason::AvgTokenTooLong);
    }
    if char_counts.iter().any(|&c| c > rules.max_token_len) {
        return FilterDecision::Reject(RejectReason::TokenTooLong);
    }
    let alpha_chars = line.chars().filter(|c| c.is_alphabetic()).count();
    if (alpha_chars as f64) < rules.min_alpha_ratio * total_chars as f64 {
        return FilterDecision::Reject(RejectReason::AlphaRatioTooLow);
    }
    if let Some(pred) = &rules.langid_predicate {
        if pred(line) {
            return FilterDecision::Reject(RejectReason::LangIdReject);
        }
    }
    FilterDecision::Keep
}

/// Classify one line against the cleaning rules.
///
/// Pure: identical `(line, rules)` always yield the same decision. An empty
/// line has zero tokens and is rejected as `TooFewTokens`.
pub fn filter_line(line: &str, rules: &FilterRules) -> FilterDecision {
    decide(line, rules)
}

/// Apply [`filter_line`] to every line, preserving the order of kept lines.
pub fn filter_corpus(
    stream: &LanguageStream,
    rules: &FilterRules,
) -> (LanguageStream, RejectionCounts) {
    let mut counts = RejectionCounts::default();
    let mut kept = Vec::new();
    for line in stream.lines() {
        let decision = decide(line, rules);
        counts.record(decision);
        if decision == FilterDecision::Keep {
            kept.push(line.clone());
        }
    }
    (LanguageStream::new(stream.language_code(), kept), counts)
}

/// Remove exact byte-identical duplicate lines, keeping first occurrences.
pub fn dedupe(stream: &LanguageStream) -> LanguageStream {
    let mut seen: HashSet<&str> = HashSet::with_capacity(stream.line_count());
    let mut kept = Vec::new();
    for line in stream.lines() {
        if seen.insert(line.as_str()) {
            kept.push(line.clone());
        }
    }
    LanguageStream::new(stream.language_code(), kept)
}

/// Normalized alpha-power sampling weights.
///
/// With shares `q_i = size_i / Σ size_j`, returns
/// `p_i = q_i^alpha / Σ_j q_j^alpha`. The result is invariant under
/// rescaling all sizes by a common positive factor, so raw magnitudes
/// (byte counts) may be passed directly.
pub fn compute_sampling_weights(sizes: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::EmptyInput("no languages given".into()));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    for (i, &s) in sizes.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::NonPositiveSize(format!("index {i} (size {s})")));
        }
    }
    let total: f64 = sizes.iter().sum();
    let powered: Vec<f64> = sizes.iter().map(|&s| (s / total).powf(alpha)).collect();
    let norm: f64 = powered.iter().sum();
    Ok(powered.iter().map(|&w| w / norm).collect())
}

/// Uniform random subset of lines under a byte budget.
///
/// Lines are visited in a seeded random order and taken until the next
/// line would exceed `max_bytes`; the survivors are emitted in their
/// original stream order. A stream already within budget passes through
/// unchanged.
pub fn take_subset(stream: &LanguageStream, max_bytes: u64, seed: u64) -> LanguageStream {
    if stream.byte_count() <= max_bytes {
        return stream.clone();
    }
    let mut order: Vec<usize> = (0..stream.line_count()).collect();
    order.shuffle(&mut stream_rng(seed));
    let mut taken = 0u64;
    let mut picked = Vec::new();
    for idx in order {
        let len = stream.lines()[idx].len() as u64;
        if taken + len > max_bytes {
            break;
        }
        taken += len;
        picked.push(idx);
    }
    picked.sort_unstable();
    let lines = picked
        .into_iter()
        .map(|i| stream.lines()[i].clone())
        .collect();
    LanguageStream::new(stream.language_code(), lines)
}

/// Interleave languages sentence-wise according to alpha-multinomial weights.
///
/// Per-language caps are applied first (with per-language derived seeds),
/// weights come from the capped byte counts, and each emitted line's
/// language is drawn i.i.d. Within a language, lines are emitted by
/// cycling the capped stream so small languages can be oversampled.
pub fn sample_multilingual(
    streams: &[LanguageStream],
    policy: &SamplingPolicy,
    n_lines: usize,
) -> Result<LanguageStream> {
    if streams.is_empty() {
        return Err(Error::EmptyInput("no language streams given".into()));
    }
    for s in streams {
        if s.is_empty() {
            return Err(Error::EmptyInput(format!(
                "language stream '{}' has no lines",
                s.language_code()
            )));
        }
    }
    if let Some(cap) = policy.per_language_cap_bytes {
        if cap == 0 {
            return Err(Error::InvalidArgument(
                "per_language_cap_bytes must be positive".into(),
            ));
        }
    }

    let capped: Vec<LanguageStream> = streams
        .iter()
        .map(|s| match policy.per_language_cap_bytes {
            Some(cap) => take_subset(s, cap, derive_seed(policy.seed, s.language_code())),
            None => s.clone(),
        })
        .collect();
    for s in &capped {
        if s.is_empty() {
            return Err(Error::EmptyInput(format!(
                "language stream '{}' is empty after applying the byte cap",
                s.language_code()
            )));
        }
    }

    let sizes: Vec<f64> = capped.iter().map(|s| s.byte_count() as f64).collect();
    let weights = compute_sampling_weights(&sizes, policy.alpha)?;
    let mut cumulative = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }

    let mut rng = stream_rng(derive_seed(policy.seed, "interleave"));
    let mut cursors = vec![0usize; capped.len()];
    let mut out = Vec::with_capacity(n_lines);
    for _ in 0..n_lines {
        let u: f64 = rng.gen();
        let lang = cumulative.partition_point(|&c| c <= u).min(capped.len() - 1);
        let stream = &capped[lang];
        let line = &stream.lines()[cursors[lang] % stream.line_count()];
        cursors[lang] += 1;
        out.push(line.clone());
    }
    Ok(LanguageStream::new("multi", out))
}
