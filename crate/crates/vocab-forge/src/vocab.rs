//! Compact subword vocabularies: BPE training with a word-initial marker,
//! encoding/decoding, and the JSON vocabulary file format.
//!
//! Pre-tokenization is whitespace splitting; each word is prefixed with the
//! marker symbol and split to characters. There is no byte fallback:
//! characters outside the vocabulary encode to the unknown special. No
//! Unicode normalization is applied, and whitespace runs collapse to single
//! spaces on a decode round-trip — the only normalization in play.
//!
//! Merge selection is greedy by pair frequency. Pair counts include
//! overlapping occurrences ("aaa" contains two "aa" pairs); rewriting merges
//! occurrences left to right without overlap. Frequency ties break to the
//! lexicographically smallest `(left, right)` pair, which keeps training
//! deterministic across platforms.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Word-initial marker prepended by the tokenizer (U+2581).
pub const DEFAULT_MARKER: char = '\u{2581}';

/// Special tokens occupying ids 0-4, mirroring the source model family.
pub fn default_specials() -> Vec<String> {
    ["<s>", "</s>", "<pad>", "<unk>", "<mask>"]
        .into_iter()
        .map(String::from)
        .collect()
}

/// Token-id sequence produced by [`Vocabulary::encode`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq {
    pub ids: Vec<u32>,
}

/// Ordered token table with merge rules and reserved special tokens.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    marker: char,
    specials: Vec<String>,
    tokens: Vec<String>,
    merges: Vec<(String, String)>,
    index: HashMap<String, u32>,
    merge_ranks: HashMap<(String, String), usize>,
    unk_id: Option<u32>,
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.marker == other.marker
            && self.specials == other.specials
            && self.tokens == other.tokens
            && self.merges == other.merges
    }
}

impl Vocabulary {
    /// Assemble a vocabulary from explicit parts, validating invariants:
    /// unique token strings, dense implicit ids, specials present among the
    /// tokens, and merges whose parts and results are all tokens.
    pub fn from_parts(
        marker: char,
        specials: Vec<String>,
        tokens: Vec<String>,
        merges: Vec<(String, String)>,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate token string {tok:?}"
                )));
            }
        }
        let mut seen_special = HashSet::new();
        for s in &specials {
            if !index.contains_key(s) {
                return Err(Error::InvalidArgument(format!(
                    "special token {s:?} missing from token table"
                )));
            }
            if !seen_special.insert(s.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate special token {s:?}"
                )));
            }
        }
        for (a, b) in &merges {
            let merged = format!("{a}{b}");
            if !index.contains_key(a) || !index.contains_key(b) || !index.contains_key(&merged) {
                return Err(Error::InvalidArgument(format!(
                    "merge ({a:?}, {b:?}) references tokens missing from the table"
                )));
            }
        }
        let unk_id = specials
            .iter()
            .find(|s| s.as_str() == "<unk>")
            .or_else(|| specials.first())
            .map(|s| index[s]);
        let merge_ranks = merges
            .iter()
            .cloned()
            .enumerate()
            .map(|(rank, pair)| (pair, rank))
            .collect();
        Ok(Vocabulary {
            marker,
            specials,
            tokens,
            merges,
            index,
            merge_ranks,
            unk_id,
        })
    }

    /// Build a merge-free vocabulary from an ordered token list (the
    /// text-format import path for source-model vocabularies).
    pub fn from_token_list(
        tokens: Vec<String>,
        specials: Vec<String>,
        marker: char,
    ) -> Result<Self> {
        Vocabulary::from_parts(marker, specials, tokens, Vec::new())
    }

    pub fn marker(&self) -> char {
        self.marker
    }

    pub fn specials(&self) -> &[String] {
        &self.specials
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn is_special(&self, token: &str) -> bool {
        self.specials.iter().any(|s| s == token)
    }

    /// Id of the designated unknown special: `<unk>` when present,
    /// otherwise the first special.
    pub fn unk_id(&self) -> Option<u32> {
        self.unk_id
    }

    fn unk_token(&self) -> Result<&str> {
        self.unk_id
            .map(|id| self.tokens[id as usize].as_str())
            .ok_or_else(|| {
                Error::InvalidArgument(
                    "vocabulary has no special token to serve as the unknown".into(),
                )
            })
    }

    fn encode_word(&self, word: &str, unk: &str) -> Vec<u32> {
        let mut symbols: Vec<&str> = Vec::with_capacity(word.chars().count() + 1);
        let mut owned: Vec<String> = Vec::new();
        owned.push(self.marker.to_string());
        for c in word.chars() {
            owned.push(c.to_string());
        }
        for s in &owned {
            symbols.push(if self.index.contains_key(s) { s } else { unk });
        }
        // repeatedly merge the lowest-rank adjacent pair, left to right
        loop {
            let mut best: Option<(usize, &str, &str)> = None;
            for w in symbols.windows(2) {
                if let Some(&rank) = self
                    .merge_ranks
                    .get(&(w[0].to_string(), w[1].to_string()))
                {
                    if best.map_or(true, |(r, _, _)| rank < r) {
                        best = Some((rank, w[0], w[1]));
                    }
                }
            }
            let Some((_, a, b)) = best else { break };
            let merged = format!("{a}{b}");
            let merged_ref: &str = self.tokens[self.index[&merged] as usize].as_str();
            let mut next = Vec::with_capacity(symbols.len());
            let mut i = 0;
            while i < symbols.len() {
                if i + 1 < symbols.len() && symbols[i] == a && symbols[i + 1] == b {
                    next.push(merged_ref);
                    i += 2;
                } else {
                    next.push(symbols[i]);
                    i += 1;
                }
            }
            symbols = next;
        }
        symbols.iter().map(|s| self.index[*s]).collect()
    }

    /// Tokenize text: words are whitespace-split, marker-prefixed, split to
    /// characters, then merged in training order. Characters outside the
    /// vocabulary map to the unknown special.
    pub fn encode(&self, text: &str) -> Result<TokenSeq> {
        let unk = self.unk_token()?.to_string();
        let mut ids = Vec::new();
        let mut cache: HashMap<&str, Vec<u32>> = HashMap::new();
        for word in text.split_whitespace() {
            let word_ids = cache
                .entry(word)
                .or_insert_with(|| self.encode_word(word, &unk));
            ids.extend_from_slice(word_ids);
        }
        Ok(TokenSeq { ids })
    }

    /// Concatenate token strings; a token-initial marker becomes a leading
    /// space, with no space at the very start of the text.
    pub fn decode(&self, seq: &TokenSeq) -> Result<String> {
        let mut out = String::new();
        for &id in &seq.ids {
            let token = self.token(id).ok_or(Error::IdOutOfRange {
                id,
                len: self.len(),
            })?;
            match token.strip_prefix(self.marker) {
                Some(rest) => {
                    out.push(' ');
                    out.push_str(rest);
                }
                None => out.push_str(token),
            }
        }
        if let Some(stripped) = out.strip_prefix(' ') {
            Ok(stripped.to_string())
        } else {
            Ok(out)
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = VocabFile {
            marker: self.marker.to_string(),
            specials: self.specials.clone(),
            tokens: self
                .tokens
                .iter()
                .enumerate()
                .map(|(i, t)| (i as u32, t.clone()))
                .collect(),
            merges: self.merges.clone(),
        };
        let json =
            serde_json::to_string_pretty(&file).map_err(|e| Error::format(path, e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: VocabFile =
            serde_json::from_str(&raw).map_err(|e| Error::format(path, e.to_string()))?;
        let mut marker_chars = file.marker.chars();
        let marker = match (marker_chars.next(), marker_chars.next()) {
            (Some(c), None) => c,
            _ => {
                return Err(Error::format(
                    path,
                    format!("marker must be a single character, got {:?}", file.marker),
                ))
            }
        };
        let mut tokens = vec![None; file.tokens.len()];
        for (id, tok) in file.tokens {
            let slot = tokens.get_mut(id as usize).ok_or_else(|| {
                Error::format(path, format!("token id {id} leaves a gap in the id range"))
            })?;
            if slot.replace(tok).is_some() {
                return Err(Error::format(path, format!("duplicate token id {id}")));
            }
        }
        let tokens: Vec<String> = tokens
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::format(path, "gap in token ids".to_string()))?;
        Vocabulary::from_parts(marker, file.specials, tokens, file.merges)
            .map_err(|e| Error::format(path, e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    marker: String,
    specials: Vec<String>,
    tokens: Vec<(u32, String)>,
    merges: Vec<(String, String)>,
}

/// Train a BPE vocabulary to `target_size` total entries (specials + base
/// symbols + merges). Returns fewer entries when the corpus runs out of
/// mergeable pairs before the target is reached; callers compare `len()`
/// against the target if they want to surface a warning.
pub fn train_bpe<I, S>(
    lines: I,
    target_size: usize,
    specials: &[String],
    marker: char,
) -> Result<Vocabulary>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    // word types in first-seen order, as symbol-id sequences
    let mut sym_strings: Vec<String> = Vec::new();
    let mut sym_index: HashMap<String, u32> = HashMap::new();
    let intern = |s: String,
                      sym_strings: &mut Vec<String>,
                      sym_index: &mut HashMap<String, u32>| {
        if let Some(&id) = sym_index.get(&s) {
            id
        } else {
            let id = sym_strings.len() as u32;
            sym_index.insert(s.clone(), id);
            sym_strings.push(s);
            id
        }
    };

    let marker_sym = intern(marker.to_string(), &mut sym_strings, &mut sym_index);
    let mut word_order: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<(Vec<u32>, u64)> = Vec::new();
    for line in lines {
        for word in line.as_ref().split_whitespace() {
            if let Some(&i) = word_order.get(word) {
                words[i].1 += 1;
                continue;
            }
            let mut syms = Vec::with_capacity(word.chars().count() + 1);
            syms.push(marker_sym);
            for c in word.chars() {
                syms.push(intern(c.to_string(), &mut sym_strings, &mut sym_index));
            }
            word_order.insert(word.to_string(), words.len());
            words.push((syms, 1));
        }
    }
    if words.is_empty() {
        return Err(Error::EmptyCorpus(
            "no whitespace-delimited tokens found in the corpus".into(),
        ));
    }

    let special_set: HashSet<&str> = specials.iter().map(String::as_str).collect();
    if special_set.len() != specials.len() {
        return Err(Error::InvalidArgument("duplicate special token".into()));
    }
    let alphabet: BTreeSet<&String> = sym_strings.iter().collect();
    let mut tokens: Vec<String> = specials.to_vec();
    for sym in &alphabet {
        if !special_set.contains(sym.as_str()) {
            tokens.push((*sym).clone());
        }
    }
    let floor = tokens.len();
    if target_size < floor {
        return Err(Error::TargetTooSmall {
            target: target_size,
            floor,
        });
    }

    let mut token_set: HashSet<String> = tokens.iter().cloned().collect();
    let mut merges: Vec<(String, String)> = Vec::new();
    while tokens.len() < target_size {
        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (syms, count) in &words {
            for w in syms.windows(2) {
                *pair_counts.entry((w[0], w[1])).or_insert(0) += count;
            }
        }
        // highest count wins; ties break to the lexicographically smallest
        // pair; pairs whose concatenation collides with an existing token
        // (e.g. a special) are skipped
        let mut best: Option<((u32, u32), u64)> = None;
        for (&(a, b), &count) in &pair_counts {
            let better = match best {
                None => true,
                Some((_, best_count)) if count != best_count => count > best_count,
                Some(((ba, bb), _)) => {
                    let cand = (&sym_strings[a as usize], &sym_strings[b as usize]);
                    let cur = (&sym_strings[ba as usize], &sym_strings[bb as usize]);
                    cand < cur
                }
            };
            if better {
                let merged = format!(
                    "{}{}",
                    sym_strings[a as usize], sym_strings[b as usize]
                );
                if !token_set.contains(&merged) {
                    best = Some(((a, b), count));
                }
            }
        }
        let Some(((a, b), _)) = best else { break };

        let left = sym_strings[a as usize].clone();
        let right = sym_strings[b as usize].clone();
        let merged = format!("{left}{right}");
        let new_sym = sym_strings.len() as u32;
        sym_index.insert(merged.clone(), new_sym);
        sym_strings.push(merged.clone());
        token_set.insert(merged.clone());
        tokens.push(merged);
        merges.push((left, right));

        for (syms, _) in &mut words {
            if syms.len() < 2 {
                continue;
            }
            let mut rewritten = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == a && syms[i + 1] == b {
                    rewritten.push(new_sym);
                    i += 2;
                } else {
                    rewritten.push(syms[i]);
                    i += 1;
                }
            }
            *syms = rewritten;
        }
    }

    Vocabulary::from_parts(marker, specials.to_vec(), tokens, merges)
}
