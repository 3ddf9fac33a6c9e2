//! Keyphrase generation over any [`Scorer`].
//!
//! - [`decode_pusl_topk`] forces exactly `k` keyphrases with a logits mask:
//!   a new keyphrase is opened after every `EOK`, empty keyphrases are
//!   banned, and generation is closed with `EOS` once `k` keyphrases exist.
//! - [`decode_one2seq`] runs free until the model emits `EOS`, so it returns
//!   however many keyphrases the model chooses to produce.
//! - [`beam_decode_one2one`] beam-searches single `BOK … EOK` spans and
//!   returns the `k` best distinct ones.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Keyphrase;
use crate::rng::{self, ChaCha8Rng};
use crate::seqmodel::{Paradigm, Scorer, TokenId, BOK, BOS, EOK, EOS, PAD, SEP};
use crate::{Error, Result};

pub const DEFAULT_MAX_TOKENS_PER_KP: usize = 8;
pub const DEFAULT_MAX_TOTAL_TOKENS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum DecodeMode {
    /// Argmax; ties go to the lowest token id.
    Greedy,
    /// Softmax sampling at `temperature` from a generator seeded with `seed`.
    Sampled { temperature: f64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeRequest {
    pub paradigm: Paradigm,
    pub k: usize,
    pub max_tokens_per_kp: usize,
    pub max_total_tokens: usize,
    pub mode: DecodeMode,
    pub beam_width: usize,
}

impl DecodeRequest {
    pub fn new(paradigm: Paradigm, k: usize) -> Self {
        Self {
            paradigm,
            k,
            max_tokens_per_kp: DEFAULT_MAX_TOKENS_PER_KP,
            max_total_tokens: DEFAULT_MAX_TOTAL_TOKENS,
            mode: DecodeMode::Greedy,
            beam_width: k,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.max_tokens_per_kp == 0 || self.max_total_tokens == 0 {
            return bad("token budgets must be at least 1");
        }
        if let DecodeMode::Sampled { temperature, .. } = self.mode {
            if !(temperature > 0.0 && temperature.is_finite()) {
                return bad("temperature must be positive");
            }
        }
        if self.paradigm == Paradigm::One2One && self.beam_width < self.k {
            return bad("beam width must be at least k for one2one");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    KReached,
    Eos,
    Budget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeResult {
    pub keyphrases: Vec<Keyphrase>,
    /// Generated ids after the prompt (for beam search: the chosen spans).
    pub trace: Vec<TokenId>,
    pub termination: Termination,
}

/// Where the decoder stands relative to keyphrase boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskCase {
    /// `k` keyphrases done: only `EOS`.
    Finished,
    /// Right after `SEP` or `EOK`: only `BOK`.
    OpenKeyphrase,
    /// Right after `BOK`: any word, never `EOK` or `EOS`.
    FirstWord,
    /// Inside a keyphrase with `len` words so far.
    InsideKeyphrase { len: usize },
}

/// Classify the generation state from the tokens so far.
pub fn mask_case(tokens_so_far: &[TokenId], k: usize) -> MaskCase {
    let eok_count = tokens_so_far.iter().filter(|&&t| t == EOK).count();
    if eok_count >= k {
        return MaskCase::Finished;
    }
    match tokens_so_far.last() {
        Some(&EOK) | Some(&SEP) | None => MaskCase::OpenKeyphrase,
        Some(&BOK) => MaskCase::FirstWord,
        Some(_) => {
            let len = tokens_so_far
                .iter()
                .rev()
                .take_while(|&&t| t != BOK)
                .count();
            MaskCase::InsideKeyphrase { len }
        }
    }
}

fn keep_only(scores: &mut [f64], keep: TokenId) {
    for (i, s) in scores.iter_mut().enumerate() {
        if i != keep as usize {
            *s = f64::NEG_INFINITY;
        }
    }
}

fn ban(scores: &mut [f64], ids: &[TokenId]) {
    for &id in ids {
        if let Some(s) = scores.get_mut(id as usize) {
            *s = f64::NEG_INFINITY;
        }
    }
}

/// Top-k logits processor. After `EOK` (or `SEP`) the only admissible token
/// is `BOK`; after `BOK` a word must follow; inside a keyphrase structural
/// tokens are banned and `EOK` is forced once `max_tokens_per_kp` words are
/// written; after `k` keyphrases only `EOS` remains. `PAD` is always banned.
pub fn pusl_topk_mask(
    tokens_so_far: &[TokenId],
    mut scores: Vec<f64>,
    k: usize,
    max_tokens_per_kp: usize,
) -> Vec<f64> {
    match mask_case(tokens_so_far, k) {
        MaskCase::Finished => keep_only(&mut scores, EOS),
        MaskCase::OpenKeyphrase => keep_only(&mut scores, BOK),
        MaskCase::FirstWord => ban(&mut scores, &[PAD, BOS, SEP, BOK, EOK, EOS]),
        MaskCase::InsideKeyphrase { len } if len >= max_tokens_per_kp => {
            keep_only(&mut scores, EOK)
        }
        MaskCase::InsideKeyphrase { .. } => ban(&mut scores, &[PAD, BOS, SEP, BOK, EOS]),
    }
    scores
}

/// Greedy argmax over finite scores, lowest id on ties.
pub fn argmax(scores: &[f64]) -> Option<TokenId> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY || s.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i as TokenId)
}

fn sample(scores: &[f64], temperature: f64, rng: &mut ChaCha8Rng) -> Option<TokenId> {
    let max = scores
        .iter()
        .copied()
        .filter(|s| *s != f64::NEG_INFINITY)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let weights: Vec<f64> = scores
        .iter()
        .map(|&s| {
            if s == f64::NEG_INFINITY {
                0.0
            } else {
                libm::exp((s - max) / temperature)
            }
        })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, w) in weights.iter().enumerate() {
        if *w == 0.0 {
            continue;
        }
        last = Some(i as TokenId);
        if u < *w {
            return last;
        }
        u -= w;
    }
    last
}

struct Picker {
    mode: DecodeMode,
    rng: Option<ChaCha8Rng>,
}

impl Picker {
    fn new(mode: DecodeMode) -> Self {
        let rng = match mode {
            DecodeMode::Sampled { seed, .. } => Some(rng::seeded(seed)),
            DecodeMode::Greedy => None,
        };
        Self { mode, rng }
    }

    fn pick(&mut self, scores: &[f64]) -> Option<TokenId> {
        match (self.mode, self.rng.as_mut()) {
            (DecodeMode::Sampled { temperature, .. }, Some(rng)) => {
                sample(scores, temperature, rng)
            }
            _ => argmax(scores),
        }
    }
}

/// Split `BOK w+ EOK` spans out of a token trace. Spans that are empty or
/// never closed are dropped; a `BOK` inside an open span restarts it.
pub fn parse_keyphrases<S: Scorer + ?Sized>(model: &S, trace: &[TokenId]) -> Vec<Keyphrase> {
    let vocab = model.vocab();
    let mut out = Vec::new();
    let mut current: Option<Vec<TokenId>> = None;
    for &t in trace {
        match t {
            BOK => current = Some(Vec::new()),
            EOK => {
                if let Some(words) = current.take() {
                    if let Ok(kp) =
                        Keyphrase::from_tokens(words.iter().map(|&w| vocab.render(&[w])))
                    {
                        out.push(kp);
                    }
                }
            }
            EOS => break,
            PAD | BOS | SEP => current = None,
            w => {
                if let Some(words) = current.as_mut() {
                    words.push(w);
                }
            }
        }
    }
    out
}

/// Constrained top-k decoding for PUSL models. Returns exactly `req.k`
/// keyphrases in generation order, or `BudgetExhausted` if
/// `max_total_tokens` target tokens are spent first.
pub fn decode_pusl_topk<S: Scorer + ?Sized>(
    model: &S,
    item_text: &str,
    req: &DecodeRequest,
) -> Result<DecodeResult> {
    req.validate()?;
    let mut seq = model.vocab().prompt(item_text, model.max_text_tokens());
    let start = seq.len();
    let mut picker = Picker::new(req.mode);
    let mut eoks = 0;
    loop {
        if eoks < req.k && seq.len() - start >= req.max_total_tokens {
            return Err(Error::BudgetExhausted {
                budget: req.max_total_tokens,
                keyphrases: eoks,
                k: req.k,
            });
        }
        let scores = pusl_topk_mask(
            &seq[start - 1..],
            model.score_next(&seq),
            req.k,
            req.max_tokens_per_kp,
        );
        let next = picker
            .pick(&scores)
            .expect("every mask case leaves an admissible token");
        seq.push(next);
        match next {
            EOK => eoks += 1,
            EOS => break,
            _ => {}
        }
    }
    let trace = seq.split_off(start);
    let keyphrases = parse_keyphrases(model, &trace);
    debug_assert_eq!(keyphrases.len(), req.k);
    Ok(DecodeResult {
        keyphrases,
        trace,
        termination: Termination::KReached,
    })
}

/// Free-running decoding until `EOS` or the token budget. The model alone
/// decides how many keyphrases to write.
pub fn decode_one2seq<S: Scorer + ?Sized>(
    model: &S,
    item_text: &str,
    req: &DecodeRequest,
) -> Result<DecodeResult> {
    req.validate()?;
    let mut seq = model.vocab().prompt(item_text, model.max_text_tokens());
    let start = seq.len();
    let mut picker = Picker::new(req.mode);
    let mut termination = Termination::Budget;
    while seq.len() - start < req.max_total_tokens {
        let mut scores = model.score_next(&seq);
        ban(&mut scores, &[PAD]);
        let next = picker.pick(&scores).expect("scorer returns finite scores");
        seq.push(next);
        if next == EOS {
            termination = Termination::Eos;
            break;
        }
    }
    let trace = seq.split_off(start);
    Ok(DecodeResult {
        keyphrases: parse_keyphrases(model, &trace),
        trace,
        termination,
    })
}

/// A finished one2one hypothesis: word ids of the span and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub words: Vec<TokenId>,
    /// Sum of log-probabilities of the words and the closing `EOK`.
    pub log_prob: f64,
}

impl Hypothesis {
    /// Log-probability per generated token (words plus `EOK`).
    pub fn normalized(&self) -> f64 {
        self.log_prob / (self.words.len() + 1) as f64
    }
}

/// Best first: higher normalized score, then smaller token-id sequence.
pub fn rank_hypotheses(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.normalized()
        .total_cmp(&a.normalized())
        .then_with(|| a.words.cmp(&b.words))
}

/// Admissible ids for the next position of a span with `len` words.
fn span_candidates(scores: &[f64], len: usize, max_tokens_per_kp: usize) -> Vec<TokenId> {
    if len >= max_tokens_per_kp {
        return alloc::vec![EOK];
    }
    let banned: &[TokenId] = if len == 0 {
        &[PAD, BOS, EOS, SEP, BOK, EOK]
    } else {
        &[PAD, BOS, EOS, SEP, BOK]
    };
    (0..scores.len() as TokenId)
        .filter(|t| !banned.contains(t))
        .collect()
}

/// Beam search over single keyphrases starting at `BOS · text · SEP · BOK`.
///
/// Open beams are ranked by cumulative log-probability and pruned to
/// `beam_width` after each step; every beam may close with `EOK`, and all
/// closed hypotheses are kept. The result is the `k` best distinct
/// keyphrases by length-normalized score.
pub fn beam_decode_one2one<S: Scorer + ?Sized>(
    model: &S,
    item_text: &str,
    req: &DecodeRequest,
) -> Result<DecodeResult> {
    req.validate()?;
    let mut finished = beam_hypotheses(model, item_text, req.beam_width, req.max_tokens_per_kp);
    finished.sort_by(rank_hypotheses);

    let vocab = model.vocab();
    let mut seen = BTreeSet::new();
    let mut keyphrases = Vec::new();
    let mut trace = Vec::new();
    for h in finished {
        if keyphrases.len() == req.k {
            break;
        }
        let Ok(kp) = Keyphrase::from_tokens(h.words.iter().map(|&w| vocab.render(&[w]))) else {
            continue;
        };
        if seen.insert(kp.clone()) {
            trace.push(BOK);
            trace.extend_from_slice(&h.words);
            trace.push(EOK);
            keyphrases.push(kp);
        }
    }
    trace.push(EOS);
    Ok(DecodeResult {
        keyphrases,
        trace,
        termination: Termination::KReached,
    })
}

/// Every hypothesis closed during a beam search of width `beam_width`.
pub fn beam_hypotheses<S: Scorer + ?Sized>(
    model: &S,
    item_text: &str,
    beam_width: usize,
    max_tokens_per_kp: usize,
) -> Vec<Hypothesis> {
    let mut prefix = model.vocab().prompt(item_text, model.max_text_tokens());
    prefix.push(BOK);
    let base = prefix.len();

    let mut open: Vec<Hypothesis> = alloc::vec![Hypothesis {
        words: Vec::new(),
        log_prob: 0.0,
    }];
    let mut finished = Vec::new();
    while !open.is_empty() {
        let mut expanded = Vec::new();
        for hyp in &open {
            prefix.truncate(base);
            prefix.extend_from_slice(&hyp.words);
            let scores = model.score_next(&prefix);
            for t in span_candidates(&scores, hyp.words.len(), max_tokens_per_kp) {
                let log_prob = hyp.log_prob + scores[t as usize];
                if t == EOK {
                    finished.push(Hypothesis {
                        words: hyp.words.clone(),
                        log_prob,
                    });
                } else {
                    let mut words = hyp.words.clone();
                    words.push(t);
                    expanded.push(Hypothesis { words, log_prob });
                }
            }
        }
        expanded.sort_by(|a, b| {
            b.log_prob
                .total_cmp(&a.log_prob)
                .then_with(|| a.words.cmp(&b.words))
        });
        expanded.truncate(beam_width);
        open = expanded;
    }
    finished
}

/// Dispatch on `req.paradigm`.
pub fn decode<S: Scorer + ?Sized>(
    model: &S,
    item_text: &str,
    req: &DecodeRequest,
) -> Result<DecodeResult> {
    match req.paradigm {
        Paradigm::Pusl => decode_pusl_topk(model, item_text, req),
        Paradigm::One2Seq => decode_one2seq(model, item_text, req),
        Paradigm::One2One => beam_decode_one2one(model, item_text, req),
    }
}

/// Render a keyphrase list back to strings (handy for reports).
pub fn rendered(kps: &[Keyphrase]) -> Vec<String> {
    kps.iter().map(Keyphrase::as_string).collect()
}
