//! Embedding re-initialization for a replaced vocabulary.
//!
//! A strategy builds a base matrix (random, group-sampled, or
//! focus-weighted) and the `*+ident` variants then copy source rows for
//! overlapping tokens, bit-exact — identity always takes precedence over
//! the base initializer. Every row's origin is recorded in a
//! [`ReinitReport`].
//!
//! When a target token's group is missing from the source statistics the
//! sampler falls back along (script, position) -> script -> global source
//! stats -> zero-mean random, recording each step in the report. Special
//! tokens never sample from script groups: they are copied by identity
//! when the string matches and otherwise drawn from global stats.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::embstats::{global_stats, group_stats, EmbeddingMatrix, Grouping};
use crate::error::{Error, Result};
use crate::focus::{focus_init, AuxEmbeddings};
use crate::lexicon::{analyze_vocab, compute_overlap, OverlapMap, PositionClass, ScriptClass, TokenMetadata};
use crate::rng::token_rng;
use crate::vocab::Vocabulary;

/// Re-initialization strategy kind. Composite `*Ident` kinds imply
/// identity precedence for overlapping tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyKind {
    Random,
    Ident,
    Script,
    ScriptPosn,
    ScriptIdent,
    ScriptPosnIdent,
    Focus,
    FocusIdent,
}

impl StrategyKind {
    pub fn applies_ident(self) -> bool {
        matches!(
            self,
            StrategyKind::Ident
                | StrategyKind::ScriptIdent
                | StrategyKind::ScriptPosnIdent
                | StrategyKind::FocusIdent
        )
    }

    pub fn needs_aux(self) -> bool {
        matches!(self, StrategyKind::Focus | StrategyKind::FocusIdent)
    }

    fn samples_groups(self) -> bool {
        matches!(
            self,
            StrategyKind::Script
                | StrategyKind::ScriptIdent
                | StrategyKind::ScriptPosn
                | StrategyKind::ScriptPosnIdent
        )
    }

    fn uses_position(self) -> bool {
        matches!(self, StrategyKind::ScriptPosn | StrategyKind::ScriptPosnIdent)
    }

    pub const ALL_NAMES: [&'static str; 8] = [
        "random",
        "ident",
        "script",
        "script+ident",
        "script+posn",
        "script+posn+ident",
        "focus",
        "focus+ident",
    ];
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            StrategyKind::Random => "random",
            StrategyKind::Ident => "ident",
            StrategyKind::Script => "script",
            StrategyKind::ScriptPosn => "script+posn",
            StrategyKind::ScriptIdent => "script+ident",
            StrategyKind::ScriptPosnIdent => "script+posn+ident",
            StrategyKind::Focus => "focus",
            StrategyKind::FocusIdent => "focus+ident",
        };
        f.write_str(name)
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(StrategyKind::Random),
            "ident" => Ok(StrategyKind::Ident),
            "script" => Ok(StrategyKind::Script),
            "script+posn" => Ok(StrategyKind::ScriptPosn),
            "script+ident" => Ok(StrategyKind::ScriptIdent),
            "script+posn+ident" => Ok(StrategyKind::ScriptPosnIdent),
            "focus" => Ok(StrategyKind::Focus),
            "focus+ident" => Ok(StrategyKind::FocusIdent),
            other => Err(Error::InvalidArgument(format!(
                "unknown strategy {other:?}; expected one of {}",
                StrategyKind::ALL_NAMES.join(", ")
            ))),
        }
    }
}

/// Full strategy configuration. The seed is always explicit.
#[derive(Debug, Clone)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub seed: u64,
    /// Standard deviation of zero-mean random rows. Defaults to 1.0
    /// (a standard normal about the origin), which is intentionally much
    /// wider than typical pre-trained embedding scales.
    pub random_std: f64,
    /// Extension, off by default: replace the isotropic `random_std` with
    /// the per-dimension global standard deviation of the source matrix.
    pub match_source_scale: bool,
}

impl Strategy {
    pub fn new(kind: StrategyKind, seed: u64) -> Self {
        Strategy {
            kind,
            seed,
            random_std: 1.0,
            match_source_scale: false,
        }
    }
}

/// Why a row ended up zero-mean random.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FallbackReason {
    /// The strategy itself is `random`.
    RandomStrategy,
    /// `ident` strategy and the token does not overlap the source.
    NoOverlap,
    /// Token's script has no statistics anywhere in the chain.
    UnseenScript,
    /// Focus strategy and the token has no auxiliary vector.
    NoAuxVector,
    /// The token's auxiliary vector has zero norm.
    ZeroAuxVector,
    /// Special token with no global statistics available.
    NoStats,
}

/// Per-token origin of an output row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    Copied,
    SampledScript {
        script: ScriptClass,
    },
    SampledScriptPosn {
        script: ScriptClass,
        position: PositionClass,
    },
    SampledGlobal,
    FocusWeighted {
        support: usize,
    },
    RandomFallback {
        reason: FallbackReason,
    },
}

/// Aggregate provenance tallies; they sum to the target vocabulary size.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ProvenanceCounts {
    pub copied: u64,
    pub sampled_script: u64,
    pub sampled_script_posn: u64,
    pub sampled_global: u64,
    pub focus_weighted: u64,
    pub random_fallback: u64,
}

impl ProvenanceCounts {
    pub fn tally(tokens: &[Provenance]) -> Self {
        let mut c = ProvenanceCounts::default();
        for p in tokens {
            match p {
                Provenance::Copied => c.copied += 1,
                Provenance::SampledScript { .. } => c.sampled_script += 1,
                Provenance::SampledScriptPosn { .. } => c.sampled_script_posn += 1,
                Provenance::SampledGlobal => c.sampled_global += 1,
                Provenance::FocusWeighted { .. } => c.focus_weighted += 1,
                Provenance::RandomFallback { .. } => c.random_fallback += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.copied
            + self.sampled_script
            + self.sampled_script_posn
            + self.sampled_global
            + self.focus_weighted
            + self.random_fallback
    }
}

/// Provenance record for one specialization run.
#[derive(Debug, Clone)]
pub struct ReinitReport {
    pub strategy: String,
    pub seed: u64,
    pub counts: ProvenanceCounts,
    pub tokens: Vec<Provenance>,
}

impl ReinitReport {
    pub fn new(strategy: String, seed: u64, tokens: Vec<Provenance>) -> Self {
        let counts = ProvenanceCounts::tally(&tokens);
        ReinitReport {
            strategy,
            seed,
            counts,
            tokens,
        }
    }

    pub fn write_json(&self, path: impl AsRef<Path>, include_tokens: bool) -> Result<()> {
        #[derive(Serialize)]
        struct View<'a> {
            strategy: &'a str,
            seed: u64,
            counts: &'a ProvenanceCounts,
            #[serde(skip_serializing_if = "Option::is_none")]
            tokens: Option<&'a [Provenance]>,
        }
        let path = path.as_ref();
        let view = View {
            strategy: &self.strategy,
            seed: self.seed,
            counts: &self.counts,
            tokens: include_tokens.then_some(self.tokens.as_slice()),
        };
        let json = serde_json::to_string_pretty(&view)
            .map_err(|e| Error::format(path, e.to_string()))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// A diagonal Gaussian summary.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanStd {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Source-model statistics at every fallback granularity.
#[derive(Debug, Clone, Default)]
pub struct StatsChain {
    dim: usize,
    script_posn: HashMap<(ScriptClass, PositionClass), MeanStd>,
    script: HashMap<ScriptClass, MeanStd>,
    global: Option<MeanStd>,
}

impl StatsChain {
    pub fn empty(dim: usize) -> Self {
        StatsChain {
            dim,
            ..StatsChain::default()
        }
    }

    /// Compute (script, position), script, and global statistics of a
    /// source model in one shot.
    pub fn from_source(matrix: &EmbeddingMatrix, meta: &[TokenMetadata]) -> Result<Self> {
        let mut chain = StatsChain::empty(matrix.dim());
        for s in group_stats(matrix, meta, Grouping::ScriptPosition)? {
            chain.script_posn.insert(
                (s.key.script, s.key.position.expect("position grouping")),
                MeanStd {
                    mean: s.mean,
                    std: s.std,
                },
            );
        }
        for s in group_stats(matrix, meta, Grouping::Script)? {
            chain.script.insert(
                s.key.script,
                MeanStd {
                    mean: s.mean,
                    std: s.std,
                },
            );
        }
        let (mean, std) = global_stats(matrix);
        chain.global = Some(MeanStd { mean, std });
        Ok(chain)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn set_script_posn(
        &mut self,
        script: ScriptClass,
        position: PositionClass,
        stats: MeanStd,
    ) -> &mut Self {
        self.script_posn.insert((script, position), stats);
        self
    }

    pub fn set_script(&mut self, script: ScriptClass, stats: MeanStd) -> &mut Self {
        self.script.insert(script, stats);
        self
    }

    pub fn set_global(&mut self, stats: MeanStd) -> &mut Self {
        self.global = Some(stats);
        self
    }

    pub fn global(&self) -> Option<&MeanStd> {
        self.global.as_ref()
    }
}

fn gaussian_row<R: Rng>(rng: &mut R, mean: Option<&[f64]>, std: &[f64]) -> Vec<f32> {
    std.iter()
        .enumerate()
        .map(|(j, &s)| {
            let z: f64 = rng.sample(StandardNormal);
            let m = mean.map_or(0.0, |m| m[j]);
            (m + s * z) as f32
        })
        .collect()
}

/// Sample one token row along the fallback chain.
///
/// `terminal_reason` labels the zero-mean random terminal step; the focus
/// path passes its own reason so reports can distinguish missing auxiliary
/// vectors from unseen scripts.
pub(crate) fn sample_token_row(
    meta: &TokenMetadata,
    chain: &StatsChain,
    seed: u64,
    fallback_std: &[f64],
    use_position: bool,
    terminal_reason: FallbackReason,
) -> (Vec<f32>, Provenance) {
    let mut rng = token_rng(seed, u64::from(meta.id));
    if meta.position == PositionClass::Special {
        return match &chain.global {
            Some(g) => (
                gaussian_row(&mut rng, Some(&g.mean), &g.std),
                Provenance::SampledGlobal,
            ),
            None => (
                gaussian_row(&mut rng, None, fallback_std),
                Provenance::RandomFallback {
                    reason: FallbackReason::NoStats,
                },
            ),
        };
    }
    if use_position {
        if let Some(s) = chain.script_posn.get(&(meta.script, meta.position)) {
            return (
                gaussian_row(&mut rng, Some(&s.mean), &s.std),
                Provenance::SampledScriptPosn {
                    script: meta.script,
                    position: meta.position,
                },
            );
        }
    }
    if let Some(s) = chain.script.get(&meta.script) {
        return (
            gaussian_row(&mut rng, Some(&s.mean), &s.std),
            Provenance::SampledScript {
                script: meta.script,
            },
        );
    }
    if let Some(g) = &chain.global {
        return (
            gaussian_row(&mut rng, Some(&g.mean), &g.std),
            Provenance::SampledGlobal,
        );
    }
    let reason = match terminal_reason {
        FallbackReason::NoAuxVector | FallbackReason::ZeroAuxVector => terminal_reason,
        _ => FallbackReason::UnseenScript,
    };
    (
        gaussian_row(&mut rng, None, fallback_std),
        Provenance::RandomFallback { reason },
    )
}

/// Zero-mean i.i.d. normal matrix with per-token keyed streams, so the
/// result is independent of generation order.
pub fn init_random(n: usize, d: usize, seed: u64, random_std: f64) -> EmbeddingMatrix {
    let std = vec![random_std; d];
    init_random_scaled(n, seed, &std)
}

fn init_random_scaled(n: usize, seed: u64, std: &[f64]) -> EmbeddingMatrix {
    let d = std.len();
    let rows: Vec<Vec<f32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = token_rng(seed, i as u64);
            gaussian_row(&mut rng, None, std)
        })
        .collect();
    let mut matrix = EmbeddingMatrix::zeros(n, d);
    for (i, row) in rows.iter().enumerate() {
        matrix.set_row(i, row);
    }
    matrix
}

/// Copy source rows into the base matrix for every overlap pair, bit-exact;
/// all other rows pass through unchanged.
pub fn apply_ident(
    base: &EmbeddingMatrix,
    src: &EmbeddingMatrix,
    overlap: &OverlapMap,
) -> Result<EmbeddingMatrix> {
    if base.dim() != src.dim() {
        return Err(Error::DimMismatch(format!(
            "base dim {} vs source dim {}",
            base.dim(),
            src.dim()
        )));
    }
    let mut out = base.clone();
    for &(tgt, src_id) in overlap.pairs() {
        if tgt as usize >= out.rows() || src_id as usize >= src.rows() {
            return Err(Error::IdOutOfRange {
                id: tgt.max(src_id),
                len: out.rows().min(src.rows()),
            });
        }
        out.set_row(tgt as usize, src.row(src_id as usize));
    }
    Ok(out)
}

/// Sample every token's row from its group's diagonal Gaussian, with the
/// documented fallback chain for groups absent from the source stats.
pub fn sample_from_groups(
    meta: &[TokenMetadata],
    chain: &StatsChain,
    seed: u64,
    fallback_std: &[f64],
    use_position: bool,
) -> (EmbeddingMatrix, Vec<Provenance>) {
    let d = chain.dim();
    let results: Vec<(Vec<f32>, Provenance)> = meta
        .par_iter()
        .map(|m| {
            sample_token_row(
                m,
                chain,
                seed,
                fallback_std,
                use_position,
                FallbackReason::UnseenScript,
            )
        })
        .collect();
    let mut matrix = EmbeddingMatrix::zeros(meta.len(), d);
    let mut provenance = Vec::with_capacity(meta.len());
    for (i, (row, prov)) in results.into_iter().enumerate() {
        matrix.set_row(i, &row);
        provenance.push(prov);
    }
    (matrix, provenance)
}

/// Produce the embedding matrix for a target vocabulary from a source
/// model under the given strategy.
pub fn specialize(
    src_vocab: &Vocabulary,
    src_emb: &EmbeddingMatrix,
    tgt_vocab: &Vocabulary,
    strategy: &Strategy,
    aux: Option<&AuxEmbeddings>,
) -> Result<(EmbeddingMatrix, ReinitReport)> {
    if src_emb.rows() != src_vocab.len() {
        return Err(Error::DimMismatch(format!(
            "source matrix has {} rows but source vocabulary has {} tokens",
            src_emb.rows(),
            src_vocab.len()
        )));
    }
    let d = src_emb.dim();
    let overlap = compute_overlap(src_vocab, tgt_vocab);
    let tgt_meta = analyze_vocab(tgt_vocab);

    let needs_chain = strategy.kind.samples_groups()
        || strategy.kind.needs_aux()
        || strategy.match_source_scale;
    let chain = if needs_chain {
        let src_meta = analyze_vocab(src_vocab);
        StatsChain::from_source(src_emb, &src_meta)?
    } else {
        StatsChain::empty(d)
    };
    let fallback_std: Vec<f64> = if strategy.match_source_scale {
        chain
            .global()
            .map(|g| g.std.clone())
            .unwrap_or_else(|| vec![strategy.random_std; d])
    } else {
        vec![strategy.random_std; d]
    };

    let (base, provenance) = match strategy.kind {
        StrategyKind::Random | StrategyKind::Ident => {
            let matrix = init_random_scaled(tgt_vocab.len(), strategy.seed, &fallback_std);
            let reason = if strategy.kind == StrategyKind::Random {
                FallbackReason::RandomStrategy
            } else {
                FallbackReason::NoOverlap
            };
            let prov = vec![Provenance::RandomFallback { reason }; tgt_vocab.len()];
            (matrix, prov)
        }
        StrategyKind::Script
        | StrategyKind::ScriptIdent
        | StrategyKind::ScriptPosn
        | StrategyKind::ScriptPosnIdent => sample_from_groups(
            &tgt_meta,
            &chain,
            strategy.seed,
            &fallback_std,
            strategy.kind.uses_position(),
        ),
        StrategyKind::Focus | StrategyKind::FocusIdent => {
            let aux = aux.ok_or(Error::MissingAux)?;
            let (matrix, report) = focus_init(
                src_emb,
                &overlap,
                aux,
                tgt_vocab,
                &chain,
                strategy.seed,
                &fallback_std,
            )?;
            (matrix, report.tokens)
        }
    };

    let (out, provenance) = if strategy.kind.applies_ident() && !strategy.kind.needs_aux() {
        let mut prov = provenance;
        let out = apply_ident(&base, src_emb, &overlap)?;
        for &(tgt, _) in overlap.pairs() {
            prov[tgt as usize] = Provenance::Copied;
        }
        (out, prov)
    } else {
        (base, provenance)
    };

    let report = ReinitReport::new(strategy.kind.to_string(), strategy.seed, provenance);
    debug_assert_eq!(report.counts.total() as usize, tgt_vocab.len());
    Ok((out, report))
}
