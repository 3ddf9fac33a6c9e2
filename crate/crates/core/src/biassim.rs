//! Synthetic label universe with self-selection-biased annotation.
//!
//! Each item belongs to a topic and owns a complete set of true keyphrases
//! drawn from that topic's pool. Annotation picks items in proportion to a
//! Zipf popularity weight and then one of the item's true labels uniformly,
//! so popular items end up well labelled and the long tail does not. The
//! unobserved labels are exactly the true set minus what annotation hit.
//!
//! Item text is a bag of words from the item's labels plus topic words, and
//! always ends with the topic's tag word, so a short-context model can still
//! tell topics apart right before `SEP`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{curate, InteractionRecord, Keyphrase};
use crate::metrics::{dedup_top, Prediction};
use crate::rng::{self, ChaCha8Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseConfig {
    pub num_items: usize,
    pub min_labels: usize,
    pub max_labels: usize,
    pub mean_labels: f64,
    /// Total distinct words across all topics.
    pub word_vocab_size: usize,
    pub num_topics: usize,
    pub keyphrases_per_topic: usize,
    /// Zipf exponent `s` of item popularity; 0 is uniform.
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for UniverseConfig {
    fn default() -> Self {
        Self {
            num_items: 2000,
            min_labels: 3,
            max_labels: 13,
            mean_labels: 8.0,
            word_vocab_size: 1200,
            num_topics: 40,
            keyphrases_per_topic: 40,
            zipf_exponent: 1.1,
            seed: 0,
        }
    }
}

impl UniverseConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.num_items == 0 || self.num_topics == 0 {
            return bad("num_items and num_topics must be at least 1".into());
        }
        if self.min_labels < 1 || self.max_labels < self.min_labels {
            return bad(format!(
                "need 1 <= min_labels <= max_labels, got {}..{}",
                self.min_labels, self.max_labels
            ));
        }
        if !(self.mean_labels >= self.min_labels as f64
            && self.mean_labels <= self.max_labels as f64)
        {
            return bad(format!(
                "mean_labels {} outside [min, max]",
                self.mean_labels
            ));
        }
        if self.keyphrases_per_topic < self.max_labels {
            return bad("keyphrases_per_topic must be at least max_labels".into());
        }
        if self.word_vocab_size / self.num_topics < 3 {
            return bad("need at least 3 words per topic".into());
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return bad("zipf exponent must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniverseItem {
    pub item_id: String,
    pub text: String,
    pub topic: usize,
    pub labels: Vec<Keyphrase>,
    /// Normalized popularity weight.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Universe {
    pub items: Vec<UniverseItem>,
}

impl Universe {
    pub fn get(&self, item_id: &str) -> Option<&UniverseItem> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn mean_labels(&self) -> f64 {
        if self.items.is_empty() {
            return 0.0;
        }
        self.items.iter().map(|i| i.labels.len()).sum::<usize>() as f64 / self.items.len() as f64
    }
}

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";

/// Pronounceable, unique pseudo-word for an index.
fn word(mut index: usize) -> String {
    let n = CONSONANTS.len() * VOWELS.len();
    let mut out = String::new();
    for _ in 0..2 {
        let s = index % n;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
        index /= n;
    }
    loop {
        let s = index % n;
        out.push(CONSONANTS[s / VOWELS.len()] as char);
        out.push(VOWELS[s % VOWELS.len()] as char);
        index /= n;
        if index == 0 {
            break;
        }
    }
    out
}

fn binomial(rng: &mut ChaCha8Rng, trials: usize, p: f64) -> usize {
    (0..trials).filter(|_| rng::unit(rng) < p).count()
}

struct Topic {
    tag: String,
    words: Vec<String>,
    pool: Vec<Keyphrase>,
}

fn make_topic(index: usize, cfg: &UniverseConfig, rng: &mut ChaCha8Rng) -> Result<Topic> {
    let per_topic = cfg.word_vocab_size / cfg.num_topics;
    let mut words: Vec<String> = (index * per_topic..(index + 1) * per_topic)
        .map(word)
        .collect();
    let tag = words.remove(0);
    let mut seen = BTreeSet::new();
    let mut pool = Vec::with_capacity(cfg.keyphrases_per_topic);
    let mut attempts = 0;
    while pool.len() < cfg.keyphrases_per_topic {
        attempts += 1;
        if attempts > 1000 * cfg.keyphrases_per_topic {
            return Err(Error::InvalidConfig(format!(
                "cannot draw {} distinct keyphrases from {} topic words",
                cfg.keyphrases_per_topic,
                words.len()
            )));
        }
        let r = rng::unit(rng);
        let len = if r < 0.3 {
            1
        } else if r < 0.8 {
            2
        } else {
            3
        };
        let len = len.min(words.len());
        let mut picked: Vec<&str> = Vec::with_capacity(len);
        while picked.len() < len {
            let w = words[rng.gen_range(0..words.len())].as_str();
            if !picked.contains(&w) {
                picked.push(w);
            }
        }
        let kp = Keyphrase::from_tokens(&picked).expect("non-empty words");
        if seen.insert(kp.clone()) {
            pool.push(kp);
        }
    }
    Ok(Topic { tag, words, pool })
}

/// Deterministic universe for `cfg.seed`.
pub fn generate_universe(cfg: &UniverseConfig) -> Result<Universe> {
    cfg.validate()?;
    let mut rng = rng::seeded(rng::derive_seed(cfg.seed, "universe"));
    let topics = (0..cfg.num_topics)
        .map(|t| make_topic(t, cfg, &mut rng))
        .collect::<Result<Vec<Topic>>>()?;

    let spread = cfg.max_labels - cfg.min_labels;
    let p = if spread == 0 {
        0.0
    } else {
        (cfg.mean_labels - cfg.min_labels as f64) / spread as f64
    };

    let mut ranks: Vec<usize> = (1..=cfg.num_items).collect();
    rng::shuffle(&mut ranks, &mut rng);
    let raw: Vec<f64> = ranks
        .iter()
        .map(|&r| 1.0 / libm::pow(r as f64, cfg.zipf_exponent))
        .collect();
    let total: f64 = raw.iter().sum();

    let width = decimal_width(cfg.num_items);
    let mut items = Vec::with_capacity(cfg.num_items);
    for (i, w) in raw.into_iter().enumerate() {
        let topic_id = rng.gen_range(0..cfg.num_topics);
        let topic = &topics[topic_id];
        let n = cfg.min_labels + binomial(&mut rng, spread, p);
        let mut order: Vec<usize> = (0..topic.pool.len()).collect();
        rng::shuffle(&mut order, &mut rng);
        let labels: Vec<Keyphrase> = order[..n].iter().map(|&j| topic.pool[j].clone()).collect();

        let mut text_words: Vec<&str> = Vec::new();
        for kp in &labels {
            let first = kp.tokens()[0].as_str();
            if !text_words.contains(&first) {
                text_words.push(first);
            }
        }
        for _ in 0..2 {
            text_words.push(topic.words[rng.gen_range(0..topic.words.len())].as_str());
        }
        rng::shuffle(&mut text_words, &mut rng);
        text_words.push(topic.tag.as_str());

        items.push(UniverseItem {
            item_id: format!("item{:0width$}", i, width = width),
            text: text_words.join(" "),
            topic: topic_id,
            labels,
            weight: w / total,
        });
    }
    Ok(Universe { items })
}

/// Digits needed to print every index below `n`.
fn decimal_width(n: usize) -> usize {
    let mut rest = n.max(1) - 1;
    let mut w = 1;
    while rest >= 10 {
        rest /= 10;
        w += 1;
    }
    w
}

/// Draw `total_interactions` annotation events: an item by popularity, then
/// one of its true labels uniformly. Every record has frequency 1.
pub fn simulate_annotations(
    u: &Universe,
    total_interactions: u64,
    seed: u64,
) -> Result<Vec<InteractionRecord>> {
    if total_interactions == 0 {
        return Err(Error::InvalidConfig(
            "total_interactions must be at least 1".into(),
        ));
    }
    if u.items.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut cumulative = Vec::with_capacity(u.items.len());
    let mut acc = 0.0;
    for item in &u.items {
        acc += item.weight;
        cumulative.push(acc);
    }
    let mut rng = rng::seeded(rng::derive_seed(seed, "annotate"));
    let mut out = Vec::with_capacity(total_interactions as usize);
    for _ in 0..total_interactions {
        let x = rng::unit(&mut rng) * acc;
        let idx = cumulative
            .partition_point(|&c| c <= x)
            .min(u.items.len() - 1);
        let item = &u.items[idx];
        let label = &item.labels[rng.gen_range(0..item.labels.len())];
        out.push(InteractionRecord::new(
            item.item_id.clone(),
            item.text.clone(),
            label.as_string(),
            1,
        ));
    }
    Ok(out)
}

/// Mean unique-label count of the curated dataset produced by `volume`
/// simulated interactions.
pub fn observed_mean(u: &Universe, volume: u64, seed: u64) -> Result<f64> {
    Ok(curate(&simulate_annotations(u, volume, seed)?)?.mean_labels())
}

/// Smallest interaction volume (found by bisection) whose curated dataset
/// reaches an observed mean of at least `target_mean` labels per item.
pub fn calibrate_volume(u: &Universe, target_mean: f64, seed: u64) -> Result<u64> {
    if !(target_mean >= 1.0 && target_mean <= u.mean_labels()) {
        return Err(Error::InvalidConfig(format!(
            "target observed mean {target_mean} must lie in [1, {}]",
            u.mean_labels()
        )));
    }
    let mut lo = 1u64;
    let mut hi = u.items.len() as u64;
    while observed_mean(u, hi, seed)? < target_mean {
        lo = hi;
        hi = hi.saturating_mul(2);
        if hi > 1 << 32 {
            return Err(Error::InvalidConfig("observed mean unreachable".into()));
        }
    }
    while hi - lo > 1.max(hi / 200) {
        let mid = lo + (hi - lo) / 2;
        if observed_mean(u, mid, seed)? < target_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Mean over predictions of `|dedup(preds)[..k] ∩ true| / |true|`.
pub fn coverage(u: &Universe, preds: &[Prediction], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if preds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let index: BTreeMap<&str, &UniverseItem> =
        u.items.iter().map(|i| (i.item_id.as_str(), i)).collect();
    let mut total = 0.0;
    for p in preds {
        let item = index
            .get(p.item_id.as_str())
            .ok_or_else(|| Error::UnknownItem(p.item_id.clone()))?;
        let truth: BTreeSet<&Keyphrase> = item.labels.iter().collect();
        let hits = dedup_top(&p.keyphrases, k)
            .into_iter()
            .filter(|kp| truth.contains(kp))
            .count();
        total += hits as f64 / truth.len() as f64;
    }
    Ok(total / preds.len() as f64)
}
