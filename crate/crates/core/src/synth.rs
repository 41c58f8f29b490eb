//! Generated alert corpora with complementary class signal in the title and
//! the description.
//!
//! Each text draws class cue words from its own vocabulary (title and
//! description cues never overlap) mixed into neutral filler. With
//! probability `noise`, independently per text, the cues are left out, so
//! that text carries no class signal. Noise never inserts cues of the wrong
//! class.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::corpus::{AlertDocument, Label};
use crate::error::{Error, Result};
use crate::glove::EmbeddingTable;
use crate::numerics::{seeded_rng, DenseMat, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_docs: usize,
    pub event_fraction: f64,
    /// Per-text probability that the cue words are dropped.
    pub noise: f64,
    pub title_len: (usize, usize),
    pub description_len: (usize, usize),
    /// Cue words present in an informative text.
    pub cues_per_text: (usize, usize),
    /// Cue vocabulary size per (text, class).
    pub cue_vocab: usize,
    pub neutral_vocab: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_docs: 2000,
            event_fraction: 0.45,
            noise: 0.15,
            title_len: (4, 10),
            description_len: (12, 30),
            cues_per_text: (1, 3),
            cue_vocab: 25,
            neutral_vocab: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Title,
    Description,
}

/// Cue word `i` for the given text and class.
pub fn cue_word(part: Part, label: Label, i: usize) -> String {
    let p = match part {
        Part::Title => "t",
        Part::Description => "d",
    };
    let c = match label {
        Label::Event => "ev",
        Label::Other => "ot",
    };
    format!("{p}{c}{i}")
}

pub fn neutral_word(i: usize) -> String {
    format!("w{i}")
}

/// Every word the generator can emit.
pub fn vocabulary(cfg: &SynthConfig) -> Vec<String> {
    let mut out: Vec<String> = (0..cfg.neutral_vocab).map(neutral_word).collect();
    for part in [Part::Title, Part::Description] {
        for label in [Label::Event, Label::Other] {
            out.extend((0..cfg.cue_vocab).map(|i| cue_word(part, label, i)));
        }
    }
    out
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let range_ok = |(a, b): (usize, usize)| a >= 1 && a <= b;
        if self.num_docs < 2
            || !(0.0 < self.event_fraction && self.event_fraction < 1.0)
            || !(0.0..=1.0).contains(&self.noise)
            || !range_ok(self.title_len)
            || !range_ok(self.description_len)
            || self.cues_per_text.0 > self.cues_per_text.1
            || self.cues_per_text.1 > self.title_len.0.min(self.description_len.0)
            || self.cue_vocab == 0
            || self.neutral_vocab == 0
        {
            return Err(Error::InvalidArgument(format!("invalid synthetic corpus settings: {self:?}")));
        }
        Ok(())
    }
}

fn text(cfg: &SynthConfig, part: Part, label: Label, len: (usize, usize), rng: &mut Rng) -> String {
    let n = rng.random_range(len.0..=len.1);
    let mut words: Vec<String> = (0..n).map(|_| neutral_word(rng.random_range(0..cfg.neutral_vocab))).collect();
    if !rng.random_bool(cfg.noise) {
        let k = rng.random_range(cfg.cues_per_text.0..=cfg.cues_per_text.1);
        for _ in 0..k {
            let at = rng.random_range(0..words.len());
            words[at] = cue_word(part, label, rng.random_range(0..cfg.cue_vocab));
        }
    }
    words.join(" ")
}

/// Labeled documents with ids `syn-00000`, `syn-00001`, ...
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Vec<AlertDocument>> {
    cfg.validate()?;
    let mut rng = seeded_rng(cfg.seed);
    let events = ((cfg.num_docs as f64) * cfg.event_fraction).round() as usize;
    let events = events.clamp(1, cfg.num_docs - 1);
    let mut labels: Vec<Label> = (0..cfg.num_docs).map(|i| Label::from_bool(i < events)).collect();
    rand::seq::SliceRandom::shuffle(labels.as_mut_slice(), &mut rng);
    Ok(labels
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let title = text(cfg, Part::Title, label, cfg.title_len, &mut rng);
            let desc = text(cfg, Part::Description, label, cfg.description_len, &mut rng);
            AlertDocument::new(format!("syn-{i:05}"), title, desc).with_label(label)
        })
        .collect())
}

/// Random unit-scale vectors for `words`, a stand-in when no trained table is
/// available.
pub fn random_embeddings(words: &[String], dim: usize, seed: u64) -> Result<EmbeddingTable> {
    let mut rng = seeded_rng(seed);
    let scale = 1.0 / (dim as f64).sqrt();
    let values = (0..words.len() * dim).map(|_| rng.random_range(-1.0..1.0) * scale).collect();
    EmbeddingTable::new(words.to_vec(), DenseMat::from_vec(words.len(), dim, values)?)
}
