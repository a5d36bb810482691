//! Deterministic synthetic corpora for integration tests and demos.
//!
//! Each language gets a fixed inventory of pseudo-words built from
//! script-specific syllables; lines sample words with a skewed rank
//! distribution so BPE has realistic pair statistics to chew on. A
//! language can mix scripts line-wise (each line is drawn from exactly
//! one script).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::LanguageStream;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthScript {
    Latin,
    Cyrillic,
}

impl SynthScript {
    fn vowels(self) -> &'static [char] {
        match self {
            SynthScript::Latin => &['a', 'e', 'i', 'o', 'u'],
            SynthScript::Cyrillic => &['а', 'е', 'и', 'о', 'у', 'ы'],
        }
    }

    fn consonants(self) -> &'static [char] {
        match self {
            SynthScript::Latin => &[
                'b', 'd', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z',
            ],
            SynthScript::Cyrillic => &[
                'б', 'в', 'г', 'д', 'к', 'л', 'м', 'н', 'п', 'р', 'с', 'т', 'ш',
            ],
        }
    }
}

impl std::str::FromStr for SynthScript {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "latin" => Ok(SynthScript::Latin),
            "cyrillic" => Ok(SynthScript::Cyrillic),
            other => Err(Error::InvalidArgument(format!(
                "unknown synthetic script {other:?}; expected latin or cyrillic"
            ))),
        }
    }
}

/// One synthetic language: a code, a line budget, and script weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthLanguage {
    pub code: String,
    pub lines: usize,
    /// Per-line script mix; weights need not be normalized.
    pub script_weights: Vec<(SynthScript, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthSpec {
    pub languages: Vec<SynthLanguage>,
    pub seed: u64,
}

const WORDS_PER_SCRIPT: usize = 320;

fn make_word(rng: &mut ChaCha8Rng, script: SynthScript) -> String {
    let syllables = 1 + rng.gen_range(0..3);
    let mut word = String::new();
    for _ in 0..syllables {
        let c = script.consonants()[rng.gen_range(0..script.consonants().len())];
        let v = script.vowels()[rng.gen_range(0..script.vowels().len())];
        word.push(c);
        word.push(v);
        if rng.gen_bool(0.3) {
            let c2 = script.consonants()[rng.gen_range(0..script.consonants().len())];
            word.push(c2);
        }
    }
    word
}

fn inventory(rng: &mut ChaCha8Rng, script: SynthScript) -> Vec<String> {
    let mut words = Vec::with_capacity(WORDS_PER_SCRIPT);
    while words.len() < WORDS_PER_SCRIPT {
        let w = make_word(rng, script);
        if !words.contains(&w) {
            words.push(w);
        }
    }
    words
}

/// Skewed rank pick: low ranks dominate, roughly Zipf-shaped.
fn pick_rank(rng: &mut ChaCha8Rng, len: usize) -> usize {
    let u: f64 = rng.gen();
    ((u.powi(3) * len as f64) as usize).min(len - 1)
}

/// Generate the corpora described by `spec`, one stream per language,
/// byte-identical for identical specs.
pub fn gen_synthetic(spec: &SynthSpec) -> Result<Vec<LanguageStream>> {
    if spec.languages.is_empty() {
        return Err(Error::EmptyInput("no synthetic languages given".into()));
    }
    let mut out = Vec::with_capacity(spec.languages.len());
    for lang in &spec.languages {
        if lang.lines == 0 {
            return Err(Error::InvalidArgument(format!(
                "language '{}' has a zero line budget",
                lang.code
            )));
        }
        if lang.script_weights.is_empty()
            || lang.script_weights.iter().any(|(_, w)| !(w > &0.0))
        {
            return Err(Error::InvalidArgument(format!(
                "language '{}' needs positive script weights",
                lang.code
            )));
        }
        let mut rng = stream_rng(derive_seed(spec.seed, &format!("synth/{}", lang.code)));
        let inventories: Vec<(f64, Vec<String>)> = lang
            .script_weights
            .iter()
            .map(|&(script, w)| (w, inventory(&mut rng, script)))
            .collect();
        let total_weight: f64 = inventories.iter().map(|(w, _)| w).sum();

        let mut lines = Vec::with_capacity(lang.lines);
        for _ in 0..lang.lines {
            let mut u: f64 = rng.gen::<f64>() * total_weight;
            let mut chosen = &inventories[0].1;
            for (w, inv) in &inventories {
                if u < *w {
                    chosen = inv;
                    break;
                }
                u -= w;
            }
            let n_words = rng.gen_range(3..=11);
            let mut line = String::new();
            for k in 0..n_words {
                if k > 0 {
                    line.push(' ');
                }
                line.push_str(&chosen[pick_rank(&mut rng, chosen.len())]);
            }
            lines.push(line);
        }
        out.push(LanguageStream::new(lang.code.clone(), lines));
    }
    Ok(out)
}
