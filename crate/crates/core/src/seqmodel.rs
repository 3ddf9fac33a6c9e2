//! Token space, paradigm-specific training sequences and a count-based
//! autoregressive scorer.
//!
//! Every paradigm shares one sequence layout, `BOS · text · SEP · targets`,
//! and differs only in how targets are laid out:
//!
//! ```text
//! one2one : BOS text SEP BOK kp EOK EOS            (one sequence per label)
//! one2seq : BOS text SEP (BOK kp EOK)* EOS
//! pusl    : BOS text SEP (BOK kp EOK)*             (never terminated)
//! ```

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{text_tokens, Dataset, Instance};
use crate::{Error, Result};

pub type TokenId = u32;

pub const PAD: TokenId = 0;
pub const UNK: TokenId = 1;
pub const BOS: TokenId = 2;
pub const EOS: TokenId = 3;
pub const SEP: TokenId = 4;
pub const BOK: TokenId = 5;
pub const EOK: TokenId = 6;
pub const NUM_RESERVED: usize = 7;

pub const RESERVED_TOKENS: [&str; NUM_RESERVED] =
    ["<pad>", "<unk>", "<s>", "</s>", "<sep>", "<bok>", "<eok>"];

pub const DEFAULT_MAX_TEXT_TOKENS: usize = 32;

/// Bijection between token strings and ids. Ids below [`NUM_RESERVED`] are
/// the special tokens; unknown words map to [`UNK`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, TokenId>,
}

impl Vocab {
    /// Reserved tokens followed by `words` in order. Repeats and reserved
    /// spellings are skipped.
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut v = Self {
            tokens: Vec::new(),
            index: BTreeMap::new(),
        };
        for t in RESERVED_TOKENS.iter().copied() {
            v.push(t);
        }
        for w in words {
            v.push(w.as_ref());
        }
        v
    }

    fn push(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index
                .insert(token.to_string(), self.tokens.len() as TokenId);
            self.tokens.push(token.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Id of `token`, or [`UNK`].
    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn get(&self, token: &str) -> Option<TokenId> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    /// All tokens in id order, reserved ones included.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Ordinary word ids (everything after the reserved block).
    pub fn word_ids(&self) -> core::ops::Range<TokenId> {
        NUM_RESERVED as TokenId..self.tokens.len() as TokenId
    }

    /// `BOS · first max_text_tokens words of text · SEP`.
    pub fn prompt(&self, text: &str, max_text_tokens: usize) -> Vec<TokenId> {
        let mut ids = Vec::with_capacity(max_text_tokens + 2);
        ids.push(BOS);
        ids.extend(text_tokens(text).take(max_text_tokens).map(|t| self.id(&t)));
        ids.push(SEP);
        ids
    }

    /// Render word ids as a whitespace-joined string.
    pub fn render(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for (i, id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.token(*id).unwrap_or(RESERVED_TOKENS[UNK as usize]));
        }
        out
    }
}

/// Reserved ids first, then corpus words (item texts and labels) with count
/// at least `min_freq`, by descending count then lexicographically.
pub fn build_vocab(d: &Dataset, min_freq: usize) -> Result<Vocab> {
    if min_freq == 0 {
        return Err(Error::InvalidConfig("min_freq must be at least 1".into()));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for inst in d {
        for t in text_tokens(&inst.text) {
            *counts.entry(t).or_insert(0) += 1;
        }
        for kp in inst.keyphrases() {
            for t in kp.tokens() {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
        }
    }
    let mut words: Vec<(String, usize)> =
        counts.into_iter().filter(|(_, c)| *c >= min_freq).collect();
    words.sort_by_key(|w| core::cmp::Reverse(w.1));
    Ok(Vocab::from_words(words.into_iter().map(|(w, _)| w)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Paradigm {
    One2One,
    One2Seq,
    Pusl,
}

impl Paradigm {
    pub const ALL: [Paradigm; 3] = [Paradigm::One2One, Paradigm::One2Seq, Paradigm::Pusl];

    pub fn as_str(self) -> &'static str {
        match self {
            Paradigm::One2One => "one2one",
            Paradigm::One2Seq => "one2seq",
            Paradigm::Pusl => "pusl",
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Paradigm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one2one" => Ok(Paradigm::One2One),
            "one2seq" => Ok(Paradigm::One2Seq),
            "pusl" => Ok(Paradigm::Pusl),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown paradigm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingSequence {
    pub ids: Vec<TokenId>,
    pub paradigm: Paradigm,
}

/// Lay out an instance's targets for `paradigm`. Labels keep the corpus
/// order (descending frequency).
pub fn build_training_sequences(
    inst: &Instance,
    paradigm: Paradigm,
    vocab: &Vocab,
    max_text_tokens: usize,
) -> Result<Vec<TrainingSequence>> {
    if inst.num_labels() == 0 {
        return Err(Error::NoLabels(inst.item_id.clone()));
    }
    let prompt = vocab.prompt(&inst.text, max_text_tokens);
    let span = |ids: &mut Vec<TokenId>, kp: &crate::corpus::Keyphrase| {
        ids.push(BOK);
        ids.extend(kp.tokens().iter().map(|t| vocab.id(t)));
        ids.push(EOK);
    };
    let seqs = match paradigm {
        Paradigm::One2One => inst
            .keyphrases()
            .map(|kp| {
                let mut ids = prompt.clone();
                span(&mut ids, kp);
                ids.push(EOS);
                TrainingSequence { ids, paradigm }
            })
            .collect(),
        Paradigm::One2Seq | Paradigm::Pusl => {
            let mut ids = prompt;
            for kp in inst.keyphrases() {
                span(&mut ids, kp);
            }
            if paradigm == Paradigm::One2Seq {
                ids.push(EOS);
            }
            alloc::vec![TrainingSequence { ids, paradigm }]
        }
    };
    Ok(seqs)
}

/// Anything that can produce next-token log-probabilities over a vocabulary.
/// This is the only contract the decoders rely on.
pub trait Scorer {
    fn vocab(&self) -> &Vocab;

    fn max_text_tokens(&self) -> usize {
        DEFAULT_MAX_TEXT_TOKENS
    }

    /// Log-probabilities for every id in the vocabulary, given a non-empty
    /// prefix. Must be finite, deterministic and exponentiate to a
    /// distribution.
    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NgramConfig {
    pub order: usize,
    pub alpha: f64,
    pub max_text_tokens: usize,
}

impl Default for NgramConfig {
    fn default() -> Self {
        Self {
            order: 4,
            alpha: 0.01,
            max_text_tokens: DEFAULT_MAX_TEXT_TOKENS,
        }
    }
}

impl NgramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.order < 2 {
            return Err(Error::InvalidConfig("order must be at least 2".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig("alpha must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct ContextCounts {
    total: u64,
    next: BTreeMap<TokenId, u64>,
}

/// Add-α smoothed n-gram scorer that uses the longest context it has seen
/// and falls back to shorter ones only when that context never occurred.
#[derive(Debug, Clone, PartialEq)]
pub struct NgramScorer {
    config: NgramConfig,
    vocab: Vocab,
    contexts: BTreeMap<Vec<TokenId>, ContextCounts>,
}

impl NgramScorer {
    /// Count every transition of every sequence for all context lengths
    /// `0..order`, each sequence weighted by its paired count.
    pub fn train<'a, I>(seqs: I, vocab: Vocab, config: NgramConfig) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a TrainingSequence, u64)>,
    {
        config.validate()?;
        let mut contexts: BTreeMap<Vec<TokenId>, ContextCounts> = BTreeMap::new();
        for (seq, weight) in seqs {
            if weight == 0 {
                continue;
            }
            let ids = &seq.ids;
            for i in 1..ids.len() {
                let next = ids[i];
                for m in 0..config.order.min(i + 1) {
                    let entry = contexts.entry(ids[i - m..i].to_vec()).or_default();
                    entry.total += weight;
                    *entry.next.entry(next).or_insert(0) += weight;
                }
            }
        }
        if contexts.is_empty() {
            return Err(Error::NoSequences);
        }
        Ok(Self {
            config,
            vocab,
            contexts,
        })
    }

    pub fn config(&self) -> &NgramConfig {
        &self.config
    }

    pub fn order(&self) -> usize {
        self.config.order
    }

    pub fn alpha(&self) -> f64 {
        self.config.alpha
    }

    /// Longest suffix of `prefix` (at most `order - 1` tokens) seen in
    /// training, with its counts.
    fn lookup<'p>(&self, prefix: &'p [TokenId]) -> (&'p [TokenId], &ContextCounts) {
        let longest = (self.config.order - 1).min(prefix.len());
        for m in (0..=longest).rev() {
            let ctx = &prefix[prefix.len() - m..];
            if let Some(c) = self.contexts.get(ctx) {
                return (ctx, c);
            }
        }
        unreachable!("the empty context is always present after training")
    }

    /// Length of the context `score_next` would use for `prefix`.
    pub fn context_len(&self, prefix: &[TokenId]) -> usize {
        self.lookup(prefix).0.len()
    }

    /// Smoothed probability of `next` after `prefix`.
    pub fn prob(&self, prefix: &[TokenId], next: TokenId) -> f64 {
        let (_, c) = self.lookup(prefix);
        let count = c.next.get(&next).copied().unwrap_or(0);
        (count as f64 + self.config.alpha)
            / (c.total as f64 + self.config.alpha * self.vocab.len() as f64)
    }

    pub fn to_artifact(&self) -> ModelArtifact {
        ModelArtifact {
            format: ModelArtifact::FORMAT.into(),
            version: ModelArtifact::VERSION,
            order: self.config.order,
            alpha: self.config.alpha,
            max_text_tokens: self.config.max_text_tokens,
            vocab: self.vocab.tokens[NUM_RESERVED..].to_vec(),
            contexts: self
                .contexts
                .iter()
                .map(|(ctx, c)| ContextEntry {
                    context: ctx.clone(),
                    next: c.next.iter().map(|(&t, &n)| (t, n)).collect(),
                })
                .collect(),
        }
    }

    pub fn from_artifact(a: ModelArtifact) -> Result<Self> {
        if a.format != ModelArtifact::FORMAT || a.version != ModelArtifact::VERSION {
            return Err(Error::InvalidConfig(alloc::format!(
                "unsupported model artifact {} v{}",
                a.format,
                a.version
            )));
        }
        let config = NgramConfig {
            order: a.order,
            alpha: a.alpha,
            max_text_tokens: a.max_text_tokens,
        };
        config.validate()?;
        let vocab = Vocab::from_words(&a.vocab);
        if vocab.len() != a.vocab.len() + NUM_RESERVED {
            return Err(Error::InvalidConfig(
                "model vocabulary has repeated tokens".into(),
            ));
        }
        let mut contexts = BTreeMap::new();
        for entry in a.contexts {
            if entry.context.len() >= config.order {
                return Err(Error::InvalidConfig("context longer than order - 1".into()));
            }
            let mut c = ContextCounts::default();
            for (t, n) in entry.next {
                if t as usize >= vocab.len() {
                    return Err(Error::InvalidConfig(alloc::format!(
                        "token id {t} outside vocabulary"
                    )));
                }
                c.total += n;
                c.next.insert(t, n);
            }
            contexts.insert(entry.context, c);
        }
        if !contexts.contains_key(&Vec::new()) {
            return Err(Error::NoSequences);
        }
        Ok(Self {
            config,
            vocab,
            contexts,
        })
    }
}

impl Scorer for NgramScorer {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn max_text_tokens(&self) -> usize {
        self.config.max_text_tokens
    }

    fn score_next(&self, prefix: &[TokenId]) -> Vec<f64> {
        let (_, c) = self.lookup(prefix);
        let alpha = self.config.alpha;
        let denom = c.total as f64 + alpha * self.vocab.len() as f64;
        let mut scores = alloc::vec![libm::log(alpha / denom); self.vocab.len()];
        for (&t, &n) in &c.next {
            scores[t as usize] = libm::log((n as f64 + alpha) / denom);
        }
        scores
    }
}

/// Train on unit-weight sequences.
pub fn train_ngram(
    seqs: &[TrainingSequence],
    vocab: Vocab,
    config: NgramConfig,
) -> Result<NgramScorer> {
    NgramScorer::train(seqs.iter().map(|s| (s, 1)), vocab, config)
}

/// Serializable form of a trained [`NgramScorer`]. Field and entry order is
/// fixed, so identical models serialize to identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format: String,
    pub version: u32,
    pub order: usize,
    pub alpha: f64,
    pub max_text_tokens: usize,
    /// Word tokens in id order, starting at id [`NUM_RESERVED`].
    pub vocab: Vec<String>,
    pub contexts: Vec<ContextEntry>,
}

impl ModelArtifact {
    pub const FORMAT: &'static str = "oxmc-ngram";
    pub const VERSION: u32 = 1;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub context: Vec<TokenId>,
    pub next: Vec<(TokenId, u64)>,
}
