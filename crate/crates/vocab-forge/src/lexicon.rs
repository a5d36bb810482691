//! Per-token script and position classification, and exact-match overlap
//! between a source and a target vocabulary.
//!
//! Unicode blocks are coalesced to scripts via the Unicode `Script`
//! property. Digits, punctuation, symbols, and inherited marks all land in
//! `Common`. Mixed-script tokens take the majority script; ties prefer any
//! non-Common script, then the script of the earliest character among the
//! tied scripts. The word-initial marker is stripped before classification,
//! so `classify_script(t)` equals `classify_script(marker + t)`.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use unicode_script::{Script, UnicodeScript};

use crate::error::{Error, Result};
use crate::vocab::Vocabulary;

/// Unicode version of the script tables compiled into this build; recorded
/// in manifests so classifications can be traced to a table revision.
pub fn unicode_version() -> String {
    let (major, minor, patch) = unicode_script::UNICODE_VERSION;
    format!("{major}.{minor}.{patch}")
}

/// Script label for one token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScriptClass {
    /// Configured special tokens (`<s>`, `<mask>`, ...).
    Special,
    /// Digits, punctuation, symbols, shared marks, or marker-only tokens.
    Common,
    /// A concrete Unicode script (Latin, Cyrillic, ...).
    Named(Script),
}

impl fmt::Display for ScriptClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl ScriptClass {
    pub fn name(&self) -> &'static str {
        match self {
            ScriptClass::Special => "Special",
            ScriptClass::Common => "Common",
            ScriptClass::Named(s) => s.full_name(),
        }
    }
}

impl Serialize for ScriptClass {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ScriptClass {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let name = String::deserialize(deserializer)?;
        match name.as_str() {
            "Special" => Ok(ScriptClass::Special),
            "Common" => Ok(ScriptClass::Common),
            other => Script::from_full_name(other)
                .map(ScriptClass::Named)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown script name {other:?}"))),
        }
    }
}

/// Whether a token starts a word (carries the marker) or continues one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionClass {
    Initial,
    Medial,
    Special,
}

impl PositionClass {
    pub fn name(&self) -> &'static str {
        match self {
            PositionClass::Initial => "initial",
            PositionClass::Medial => "medial",
            PositionClass::Special => "special",
        }
    }
}

impl fmt::Display for PositionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Classification record for one vocabulary entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenMetadata {
    pub id: u32,
    pub token: String,
    pub script: ScriptClass,
    pub position: PositionClass,
}

fn char_script(c: char) -> ScriptClass {
    match c.script() {
        Script::Common | Script::Inherited | Script::Unknown => ScriptClass::Common,
        s => ScriptClass::Named(s),
    }
}

/// Majority-vote script of a token, after stripping the marker.
///
/// Marker-only (or empty-after-strip) tokens are `Common`.
pub fn classify_script(token: &str, marker: char) -> ScriptClass {
    let body = token.strip_prefix(marker).unwrap_or(token);
    let mut counts: HashMap<ScriptClass, (usize, usize)> = HashMap::new();
    for (pos, c) in body.chars().enumerate() {
        let entry = counts.entry(char_script(c)).or_insert((0, pos));
        entry.0 += 1;
    }
    if counts.is_empty() {
        return ScriptClass::Common;
    }
    let mut best: Option<(ScriptClass, usize, usize)> = None;
    for (&script, &(count, first_pos)) in &counts {
        let better = match best {
            None => true,
            Some((cur, cur_count, cur_first)) => {
                if count != cur_count {
                    count > cur_count
                } else if (script == ScriptClass::Common) != (cur == ScriptClass::Common) {
                    // prefer any non-Common script on a count tie
                    cur == ScriptClass::Common
                } else {
                    first_pos < cur_first
                }
            }
        };
        if better {
            best = Some((script, count, first_pos));
        }
    }
    best.unwrap().0
}

/// Initial iff the token begins with the marker; configured specials are
/// classified `Special` by [`analyze_vocab`].
pub fn classify_position(token: &str, marker: char) -> PositionClass {
    if token.starts_with(marker) {
        PositionClass::Initial
    } else {
        PositionClass::Medial
    }
}

/// Classify every token in the vocabulary. Special tokens get
/// `(Special, Special)`; marker-only tokens get `(Common, Initial)`.
pub fn analyze_vocab(vocab: &Vocabulary) -> Vec<TokenMetadata> {
    vocab
        .tokens()
        .iter()
        .enumerate()
        .map(|(id, token)| {
            let (script, position) = if vocab.is_special(token) {
                (ScriptClass::Special, PositionClass::Special)
            } else {
                (
                    classify_script(token, vocab.marker()),
                    classify_position(token, vocab.marker()),
                )
            };
            TokenMetadata {
                id: id as u32,
                token: token.clone(),
                script,
                position,
            }
        })
        .collect()
}

/// Mapping `target id -> source id` for byte-identical token strings.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OverlapMap {
    pairs: Vec<(u32, u32)>,
    by_target: HashMap<u32, u32>,
}

impl OverlapMap {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn source_of(&self, target_id: u32) -> Option<u32> {
        self.by_target.get(&target_id).copied()
    }

    /// Pairs in ascending target-id order.
    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }
}

/// Exact string matches between two vocabularies; specials match by string
/// like any other token. The mapping is injective by construction since
/// token strings are unique within each vocabulary.
pub fn compute_overlap(src: &Vocabulary, tgt: &Vocabulary) -> OverlapMap {
    let mut pairs = Vec::new();
    let mut by_target = HashMap::new();
    for (tgt_id, token) in tgt.tokens().iter().enumerate() {
        if let Some(src_id) = src.id_of(token) {
            pairs.push((tgt_id as u32, src_id));
            by_target.insert(tgt_id as u32, src_id);
        }
    }
    OverlapMap { pairs, by_target }
}

/// Write the metadata table as CSV (`id,token,script,position`).
pub fn write_metadata_csv(meta: &[TokenMetadata], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    writer
        .write_record(["id", "token", "script", "position"])
        .map_err(|e| Error::format(path, e.to_string()))?;
    for m in meta {
        writer
            .write_record([
                m.id.to_string(),
                m.token.clone(),
                m.script.to_string(),
                m.position.to_string(),
            ])
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}
