//! Post-training data: instances that already carry more labels than the
//! dataset mean, plus sparse instances whose labels were topped up by the
//! PUSL generator and survived rejection.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Instance, Keyphrase, Label};
use crate::decoder::{
    decode_pusl_topk, DecodeMode, DecodeRequest, DEFAULT_MAX_TOKENS_PER_KP,
    DEFAULT_MAX_TOTAL_TOKENS,
};
use crate::rng;
use crate::seqmodel::{build_training_sequences, Paradigm, Scorer, TrainingSequence, Vocab};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Acceptance threshold on the deduplicated label count (strict `>`).
    pub target_mean: f64,
    pub samples_per_item: usize,
    pub temperature: f64,
    pub seed: u64,
    pub max_output_size: usize,
    pub max_tokens_per_kp: usize,
    pub max_total_tokens: usize,
}

impl AugmentationConfig {
    pub fn new(target_mean: f64, seed: u64) -> Self {
        Self {
            target_mean,
            samples_per_item: 6,
            temperature: 1.0,
            seed,
            max_output_size: 50_000,
            max_tokens_per_kp: DEFAULT_MAX_TOKENS_PER_KP,
            max_total_tokens: DEFAULT_MAX_TOTAL_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_mean.is_nan() || self.target_mean <= 0.0 {
            return Err(Error::ZeroMean);
        }
        if self.samples_per_item == 0 || self.max_output_size == 0 {
            return Err(Error::InvalidConfig(
                "samples_per_item and max_output_size must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn request(&self, item_id: &str) -> DecodeRequest {
        DecodeRequest {
            max_tokens_per_kp: self.max_tokens_per_kp,
            max_total_tokens: self.max_total_tokens,
            mode: DecodeMode::Sampled {
                temperature: self.temperature,
                seed: rng::derive_seed(self.seed, item_id),
            },
            ..DecodeRequest::new(Paradigm::Pusl, self.samples_per_item)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Augmented,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AugmentOutcome {
    Accepted(Instance),
    Rejected { unique_labels: usize },
}

/// Instances with strictly more unique labels than `mean`.
pub fn select_train_diverse(d: &Dataset, mean: f64) -> Result<Dataset> {
    if mean.is_nan() || mean <= 0.0 {
        return Err(Error::ZeroMean);
    }
    Ok(Dataset::new(
        d.iter()
            .filter(|i| i.num_labels() as f64 > mean)
            .cloned()
            .collect(),
        format!("train-diverse (> {mean} labels) of: {}", d.provenance),
    ))
}

/// Append generated keyphrases that the instance does not already have.
/// New labels carry frequency 0.
pub fn merge_generated(inst: &Instance, generated: &[Keyphrase]) -> Instance {
    let mut seen: BTreeSet<&Keyphrase> = inst.keyphrases().collect();
    let mut labels = inst.labels().to_vec();
    for kp in generated {
        if seen.insert(kp) {
            labels.push(Label {
                keyphrase: kp.clone(),
                frequency: 0,
            });
        }
    }
    Instance::new(inst.item_id.clone(), inst.text.clone(), labels)
        .expect("labels deduplicated above")
}

/// Sample `samples_per_item` keyphrases, merge, and accept iff the
/// deduplicated count exceeds `target_mean`.
pub fn augment_instance<S: Scorer + ?Sized>(
    inst: &Instance,
    model: &S,
    cfg: &AugmentationConfig,
) -> Result<AugmentOutcome> {
    cfg.validate()?;
    let generated = decode_pusl_topk(model, &inst.text, &cfg.request(&inst.item_id))?;
    let merged = merge_generated(inst, &generated.keyphrases);
    if merged.num_labels() as f64 > cfg.target_mean {
        Ok(AugmentOutcome::Accepted(merged))
    } else {
        Ok(AugmentOutcome::Rejected {
            unique_labels: merged.num_labels(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostTrainSet {
    pub dataset: Dataset,
    pub provenance: BTreeMap<String, Provenance>,
    /// Sparse instances that were tried and rejected.
    pub rejected: usize,
}

/// Train-Diverse plus accepted augmentations of every other instance,
/// capped at `max_output_size` by a seeded shuffle.
pub fn build_posttrain_set<S: Scorer + ?Sized>(
    d: &Dataset,
    model: &S,
    cfg: &AugmentationConfig,
) -> Result<PostTrainSet> {
    cfg.validate()?;
    let mut instances = Vec::new();
    let mut provenance = BTreeMap::new();
    let mut rejected = 0;
    for inst in d {
        if inst.num_labels() as f64 > cfg.target_mean {
            provenance.insert(inst.item_id.clone(), Provenance::Original);
            instances.push(inst.clone());
            continue;
        }
        match augment_instance(inst, model, cfg)? {
            AugmentOutcome::Accepted(aug) => {
                provenance.insert(aug.item_id.clone(), Provenance::Augmented);
                instances.push(aug);
            }
            AugmentOutcome::Rejected { .. } => rejected += 1,
        }
    }
    if instances.len() > cfg.max_output_size {
        rng::shuffle(
            &mut instances,
            &mut rng::seeded(rng::derive_seed(cfg.seed, "posttrain-cap")),
        );
        instances.truncate(cfg.max_output_size);
        let kept: BTreeSet<&str> = instances.iter().map(|i| i.item_id.as_str()).collect();
        provenance.retain(|id, _| kept.contains(id.as_str()));
    }
    Ok(PostTrainSet {
        dataset: Dataset::new(
            instances,
            format!(
                "post-train set (> {} labels) of: {}",
                cfg.target_mean, d.provenance
            ),
        ),
        provenance,
        rejected,
    })
}

/// Training sequences for a post-train set, augmented instances weighted by
/// `augmented_weight` and everything else by 1.
pub fn weighted_sequences(
    set: &Dataset,
    provenance: &BTreeMap<String, Provenance>,
    paradigm: Paradigm,
    vocab: &Vocab,
    max_text_tokens: usize,
    augmented_weight: u64,
) -> Result<Vec<(TrainingSequence, u64)>> {
    let mut out = Vec::new();
    for inst in set {
        let w = match provenance.get(&inst.item_id) {
            Some(Provenance::Augmented) => augmented_weight,
            _ => 1,
        };
        for s in build_training_sequences(inst, paradigm, vocab, max_text_tokens)? {
            out.push((s, w));
        }
    }
    Ok(out)
}
