//! Vocabulary specialization toolkit for pre-trained multilingual models.
//!
//! A large cross-lingual subword vocabulary can eat most of a compact
//! model's parameter budget. This crate replaces it with a small
//! target-specific vocabulary and re-initializes the token embedding
//! matrix so the new rows land inside the distribution the pre-trained
//! transformer expects:
//!
//! - [`corpus`]: cleaning filters, exact deduplication, byte caps, and
//!   alpha-multinomial multilingual sampling.
//! - [`vocab`]: BPE training with the word-initial marker convention,
//!   encoding/decoding, and the vocabulary file format.
//! - [`lexicon`]: Unicode script and word-position classification, plus
//!   exact-match overlap between vocabularies.
//! - [`embstats`]: per-group embedding statistics and exact PCA atlases.
//! - [`reinit`]: the re-initialization strategies (random, identity,
//!   script, script+position, and their identity-precedence composites).
//! - [`focus`]: auxiliary skipgram training and similarity-weighted
//!   initialization of completely new tokens.
//! - [`modelio`]: bit-exact embedding containers, word2vec text import
//!   and export, parameter accounting, and artifact manifests.
//! - [`synth`]: deterministic synthetic corpora for tests and demos.
//!
//! Everything seeded is reproducible: one seed, byte-identical artifacts.

pub mod corpus;
pub mod embstats;
pub mod error;
pub mod focus;
pub mod lexicon;
pub mod modelio;
pub mod reinit;
pub mod rng;
pub mod synth;
pub mod vocab;

pub use error::{Error, Result};

/// Crate version, recorded in manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
