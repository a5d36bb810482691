//! Similarity-weighted initialization for non-overlapping tokens.
//!
//! An auxiliary skipgram model with negative sampling is trained on the
//! target corpus (already tokenized with the target vocabulary, so whole
//! tokens need no character n-grams for coverage). Overlapping tokens keep
//! their source rows; each completely new token becomes a convex
//! combination of overlapping tokens' source embeddings, weighted by
//! sparsemax over cosine similarities in the auxiliary space. Sparse
//! support emerges from the projection itself; there is no top-k cutoff.
//!
//! Tokens without an auxiliary vector fall back to the group sampler and
//! ultimately to zero-mean random, mirroring the re-initialization
//! fallback chain.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embstats::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::lexicon::{analyze_vocab, OverlapMap};
use crate::modelio::{import_word2vec_text, export_word2vec_text};
use crate::reinit::{sample_token_row, FallbackReason, Provenance, ReinitReport, StatsChain};
use crate::rng::{derive_seed, stream_rng, token_rng};
use crate::vocab::Vocabulary;

/// Auxiliary skipgram trainer configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuxConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial learning rate, decayed linearly to 1e-4 of itself.
    pub initial_lr: f32,
    pub seed: u64,
    /// Worker threads. One worker is bit-reproducible; more trade
    /// reproducibility for speed (hogwild-style unsynchronized updates).
    pub workers: usize,
}

impl Default for AuxConfig {
    fn default() -> Self {
        AuxConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 10,
            initial_lr: 0.025,
            seed: 0,
            workers: 1,
        }
    }
}

/// Token-id keyed auxiliary vectors plus the trainer config that made them.
#[derive(Debug, Clone)]
pub struct AuxEmbeddings {
    dim: usize,
    vectors: HashMap<u32, Vec<f32>>,
    config: Option<AuxConfig>,
}

impl AuxEmbeddings {
    pub fn new(dim: usize) -> Self {
        AuxEmbeddings {
            dim,
            vectors: HashMap::new(),
            config: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn config(&self) -> Option<&AuxConfig> {
        self.config.as_ref()
    }

    pub fn get(&self, token_id: u32) -> Option<&[f32]> {
        self.vectors.get(&token_id).map(Vec::as_slice)
    }

    pub fn insert(&mut self, token_id: u32, vector: Vec<f32>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch(format!(
                "auxiliary vector for token {token_id} has {} entries, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "auxiliary vector for token {token_id} contains non-finite values"
            )));
        }
        self.vectors.insert(token_id, vector);
        Ok(())
    }

    /// Save as word2vec text (`count dim` header, then `token v1 .. vd`),
    /// rows in ascending token-id order.
    pub fn write_word2vec(&self, vocab: &Vocabulary, path: impl AsRef<Path>) -> Result<()> {
        let mut ids: Vec<u32> = self.vectors.keys().copied().collect();
        ids.sort_unstable();
        let mut tokens = Vec::with_capacity(ids.len());
        let mut rows = Vec::with_capacity(ids.len());
        for id in ids {
            let token = vocab.token(id).ok_or(Error::IdOutOfRange {
                id,
                len: vocab.len(),
            })?;
            tokens.push(token.to_string());
            rows.push(self.vectors[&id].clone());
        }
        let matrix = EmbeddingMatrix::from_rows(rows)
            .unwrap_or_else(|_| EmbeddingMatrix::zeros(0, self.dim));
        export_word2vec_text(&tokens, &matrix, path)
    }

    /// Load word2vec text, resolving token strings against `vocab`.
    pub fn read_word2vec(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<Self> {
        let path = path.as_ref();
        let (tokens, matrix) = import_word2vec_text(path)?;
        let mut aux = AuxEmbeddings::new(matrix.dim());
        for (i, token) in tokens.iter().enumerate() {
            let id = vocab.id_of(token).ok_or_else(|| {
                Error::format(
                    path,
                    format!("token {token:?} is not in the target vocabulary"),
                )
            })?;
            aux.insert(id, matrix.row(i).to_vec())?;
        }
        Ok(aux)
    }
}

fn sigmoid(x: f32) -> f32 {
    if x > 8.0 {
        1.0
    } else if x < -8.0 {
        0.0
    } else {
        1.0 / (1.0 + (-x).exp())
    }
}

struct NegativeTable {
    cumulative: Vec<f64>,
    total: f64,
}

impl NegativeTable {
    /// Unigram distribution raised to the 3/4 power, per dense index.
    fn new(counts: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(0.75);
            cumulative.push(acc);
        }
        NegativeTable {
            total: acc,
            cumulative,
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen::<f64>() * self.total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

// Raw shared views for hogwild updates in multi-worker mode. With one
// worker the accesses are strictly sequential.
struct SharedParams {
    w_in: *mut f32,
    w_out: *mut f32,
    dim: usize,
}

unsafe impl Sync for SharedParams {}

#[allow(clippy::too_many_arguments)]
fn train_shard(
    params: &SharedParams,
    sentences: &[Vec<u32>],
    shard: usize,
    workers: usize,
    table: &NegativeTable,
    config: &AuxConfig,
    processed: &AtomicU64,
    total_work: u64,
    epoch: usize,
) {
    let dim = params.dim;
    let mut rng = stream_rng(derive_seed(
        config.seed,
        &format!("sgns/{epoch}/{shard}"),
    ));
    let mut grad = vec![0.0f32; dim];
    let floor = config.initial_lr * 1e-4;
    for sentence in sentences.iter().skip(shard).step_by(workers.max(1)) {
        for (i, &center) in sentence.iter().enumerate() {
            let done = processed.fetch_add(1, Ordering::Relaxed);
            let lr = (config.initial_lr
                * (1.0 - done as f32 / (total_work + 1) as f32))
                .max(floor);
            let span = rng.gen_range(1..=config.window);
            let lo = i.saturating_sub(span);
            let hi = (i + span).min(sentence.len() - 1);
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let context = sentence[j] as usize;
                // SAFETY: rows are dim-sized blocks inside allocations that
                // outlive the scoped threads; concurrent lossy updates are
                // accepted in multi-worker mode.
                let v = unsafe {
                    std::slice::from_raw_parts_mut(
                        params.w_in.add(center as usize * dim),
                        dim,
                    )
                };
                grad.fill(0.0);
                for k in 0..=config.negatives {
                    let (target, label) = if k == 0 {
                        (context, 1.0f32)
                    } else {
                        let t = table.draw(&mut rng);
                        if t == context {
                            continue;
                        }
                        (t, 0.0)
                    };
                    let u = unsafe {
                        std::slice::from_raw_parts_mut(params.w_out.add(target * dim), dim)
                    };
                    let score: f32 = v.iter().zip(u.iter()).map(|(a, b)| a * b).sum();
                    let g = (label - sigmoid(score)) * lr;
                    for ((gj, uj), vj) in grad.iter_mut().zip(u.iter_mut()).zip(v.iter()) {
                        *gj += g * *uj;
                        *uj += g * *vj;
                    }
                }
                for (vj, gj) in v.iter_mut().zip(&grad) {
                    *vj += *gj;
                }
            }
        }
    }
}

/// Train skipgram-with-negative-sampling vectors over whole tokens.
///
/// Every token id that occurs in the corpus gets a vector; absent ids get
/// none and are reported for fallback by [`focus_init`]. With
/// `workers == 1` the result is bit-identical for a fixed seed.
pub fn train_aux(corpus: &[Vec<u32>], config: &AuxConfig) -> Result<AuxEmbeddings> {
    if config.dim < 2 {
        return Err(Error::InvalidArgument(format!(
            "auxiliary dimension must be at least 2, got {}",
            config.dim
        )));
    }
    if config.window == 0 || config.epochs == 0 {
        return Err(Error::InvalidArgument(
            "window and epochs must be at least 1".into(),
        ));
    }
    let total_tokens: u64 = corpus.iter().map(|s| s.len() as u64).sum();
    if total_tokens == 0 {
        return Err(Error::EmptyCorpus(
            "auxiliary corpus contains no tokens".into(),
        ));
    }

    // dense index over ids that actually occur, in ascending id order
    let mut counts_by_id: HashMap<u32, u64> = HashMap::new();
    for sentence in corpus {
        for &id in sentence {
            *counts_by_id.entry(id).or_insert(0) += 1;
        }
    }
    let mut ids: Vec<u32> = counts_by_id.keys().copied().collect();
    ids.sort_unstable();
    let dense_of: HashMap<u32, u32> = ids
        .iter()
        .enumerate()
        .map(|(dense, &id)| (id, dense as u32))
        .collect();
    let counts: Vec<u64> = ids.iter().map(|id| counts_by_id[id]).collect();
    let vocab_size = ids.len();

    let sentences: Vec<Vec<u32>> = corpus
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| s.iter().map(|id| dense_of[id]).collect())
        .collect();

    let dim = config.dim;
    let mut w_in = vec![0.0f32; vocab_size * dim];
    for (row, chunk) in w_in.chunks_mut(dim).enumerate() {
        let mut rng = token_rng(derive_seed(config.seed, "sgns/init"), row as u64);
        for v in chunk.iter_mut() {
            *v = (rng.gen::<f32>() - 0.5) / dim as f32;
        }
    }
    let mut w_out = vec![0.0f32; vocab_size * dim];

    let table = NegativeTable::new(&counts);
    let processed = AtomicU64::new(0);
    let total_work = total_tokens * config.epochs as u64;
    let params = SharedParams {
        w_in: w_in.as_mut_ptr(),
        w_out: w_out.as_mut_ptr(),
        dim,
    };

    let workers = config.workers.max(1);
    for epoch in 0..config.epochs {
        if workers == 1 {
            train_shard(
                &params,
                &sentences,
                0,
                1,
                &table,
                config,
                &processed,
                total_work,
                epoch,
            );
        } else {
            std::thread::scope(|scope| {
                for shard in 0..workers {
                    let params = &params;
                    let sentences = &sentences;
                    let table = &table;
                    let processed = &processed;
                    scope.spawn(move || {
                        train_shard(
                            params, sentences, shard, workers, table, config, processed,
                            total_work, epoch,
                        );
                    });
                }
            });
        }
    }

    let mut aux = AuxEmbeddings::new(dim);
    aux.config = Some(config.clone());
    for (dense, &id) in ids.iter().enumerate() {
        aux.vectors
            .insert(id, w_in[dense * dim..(dense + 1) * dim].to_vec());
    }
    Ok(aux)
}

/// Cosine similarity `a.b / (|a| |b|)`.
pub fn cosine(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimMismatch(format!(
            "cosine over vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    let mut dot = 0.0f64;
    let mut na = 0.0f64;
    let mut nb = 0.0f64;
    for (&x, &y) in a.iter().zip(b) {
        let (x, y) = (f64::from(x), f64::from(y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(dot / (na.sqrt() * nb.sqrt()))
}

/// Euclidean projection of `z` onto the probability simplex
/// (sorted-threshold algorithm). Output is non-negative, sums to one, and
/// preserves the argmax; adding a constant to every coordinate leaves the
/// result unchanged.
pub fn sparsemax(z: &[f64]) -> Vec<f64> {
    if z.is_empty() {
        return Vec::new();
    }
    let mut sorted: Vec<f64> = z.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut k = 0usize;
    let mut cum_at_k = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        cum += v;
        if 1.0 + (j + 1) as f64 * v > cum {
            k = j + 1;
            cum_at_k = cum;
        }
    }
    let tau = (cum_at_k - 1.0) / k as f64;
    z.iter().map(|&v| (v - tau).max(0.0)).collect()
}

fn norm_f64(v: &[f32]) -> f64 {
    v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt()
}

/// Initialize a target matrix FOCUS-style: overlap rows copy the source,
/// new tokens become sparsemax-weighted convex combinations of overlapping
/// tokens' source rows, and uncovered tokens walk the fallback chain.
///
/// Errors with [`Error::NoOverlapSupport`] when no overlapping token has a
/// usable auxiliary vector.
#[allow(clippy::too_many_arguments)]
pub fn focus_init(
    src: &EmbeddingMatrix,
    overlap: &OverlapMap,
    aux: &AuxEmbeddings,
    tgt_vocab: &Vocabulary,
    fallback: &StatsChain,
    seed: u64,
    fallback_std: &[f64],
) -> Result<(EmbeddingMatrix, ReinitReport)> {
    let d = src.dim();
    let tgt_meta = analyze_vocab(tgt_vocab);

    // overlap entries with a usable (non-zero) auxiliary vector
    struct Anchor<'a> {
        src_id: u32,
        vector: &'a [f32],
        norm: f64,
    }
    let anchors: Vec<Anchor> = overlap
        .pairs()
        .iter()
        .filter_map(|&(tgt_id, src_id)| {
            aux.get(tgt_id).and_then(|vector| {
                let norm = norm_f64(vector);
                (norm > 0.0).then_some(Anchor {
                    src_id,
                    vector,
                    norm,
                })
            })
        })
        .collect();
    if anchors.is_empty() {
        return Err(Error::NoOverlapSupport);
    }

    let results: Vec<(Vec<f32>, Provenance)> = tgt_meta
        .par_iter()
        .map(|meta| {
            let t = meta.id;
            if let Some(src_id) = overlap.source_of(t) {
                return (src.row(src_id as usize).to_vec(), Provenance::Copied);
            }
            let Some(vector) = aux.get(t) else {
                return sample_token_row(
                    meta,
                    fallback,
                    seed,
                    fallback_std,
                    true,
                    FallbackReason::NoAuxVector,
                );
            };
            let norm = norm_f64(vector);
            if norm == 0.0 {
                return sample_token_row(
                    meta,
                    fallback,
                    seed,
                    fallback_std,
                    true,
                    FallbackReason::ZeroAuxVector,
                );
            }
            let sims: Vec<f64> = anchors
                .iter()
                .map(|a| {
                    let dot: f64 = vector
                        .iter()
                        .zip(a.vector)
                        .map(|(&x, &y)| f64::from(x) * f64::from(y))
                        .sum();
                    dot / (norm * a.norm)
                })
                .collect();
            let weights = sparsemax(&sims);
            let mut row = vec![0.0f64; d];
            let mut support = 0usize;
            for (w, anchor) in weights.iter().zip(&anchors) {
                if *w == 0.0 {
                    continue;
                }
                support += 1;
                for (acc, &s) in row.iter_mut().zip(src.row(anchor.src_id as usize)) {
                    *acc += w * f64::from(s);
                }
            }
            let row: Vec<f32> = row.into_iter().map(|v| v as f32).collect();
            (row, Provenance::FocusWeighted { support })
        })
        .collect();

    let mut matrix = EmbeddingMatrix::zeros(tgt_meta.len(), d);
    let mut provenance = Vec::with_capacity(tgt_meta.len());
    for (i, (row, prov)) in results.into_iter().enumerate() {
        matrix.set_row(i, &row);
        provenance.push(prov);
    }
    Ok((
        matrix,
        ReinitReport::new("focus".to_string(), seed, provenance),
    ))
}
