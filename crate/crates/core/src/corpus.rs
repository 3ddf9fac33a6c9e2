//! Keyphrases, raw interaction records and curated datasets.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A normalized multi-word label: lowercase whitespace-separated words.
///
/// Equality is exact equality of the normalized form, which is what every
/// metric intersects on.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Keyphrase {
    tokens: Vec<String>,
}

impl Keyphrase {
    /// Build from already-split words. Each word is normalized on its own, so
    /// a word containing whitespace is split further.
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens: Vec<String> = tokens
            .into_iter()
            .flat_map(|t| {
                t.as_ref()
                    .split_whitespace()
                    .map(|w| w.to_lowercase())
                    .collect::<Vec<_>>()
            })
            .collect();
        if tokens.is_empty() {
            return Err(Error::EmptyKeyphrase);
        }
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Rendered form, words joined by single spaces.
    pub fn as_string(&self) -> String {
        self.tokens.join(" ")
    }
}

impl fmt::Display for Keyphrase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(t)?;
        }
        Ok(())
    }
}

impl TryFrom<String> for Keyphrase {
    type Error = Error;

    fn try_from(raw: String) -> Result<Self> {
        normalize_keyphrase(&raw)
    }
}

impl From<Keyphrase> for String {
    fn from(kp: Keyphrase) -> Self {
        kp.as_string()
    }
}

impl core::str::FromStr for Keyphrase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        normalize_keyphrase(s)
    }
}

/// Lowercase and collapse whitespace. Fails on empty or whitespace-only input.
pub fn normalize_keyphrase(raw: &str) -> Result<Keyphrase> {
    Keyphrase::from_tokens(raw.split_whitespace())
}

/// Whitespace word tokens of an item text, lowercased.
pub fn text_tokens(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().map(|w| w.to_lowercase())
}

/// One raw annotation event: a user attached `keyphrase` to an item
/// `frequency` times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub item_id: String,
    pub item_text: String,
    pub keyphrase: String,
    pub frequency: u64,
}

impl InteractionRecord {
    pub fn new(
        item_id: impl Into<String>,
        item_text: impl Into<String>,
        keyphrase: impl Into<String>,
        frequency: u64,
    ) -> Self {
        Self {
            item_id: item_id.into(),
            item_text: item_text.into(),
            keyphrase: keyphrase.into(),
            frequency,
        }
    }
}

/// An observed label and how often it was recorded. Frequency 0 marks a
/// label that was generated rather than observed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub keyphrase: Keyphrase,
    pub frequency: u64,
}

/// A curated item: text plus deduplicated labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub item_id: String,
    pub text: String,
    labels: Vec<Label>,
    total_interactions: u64,
}

impl Instance {
    /// Labels must be pairwise distinct; they are kept in the given order.
    pub fn new(
        item_id: impl Into<String>,
        text: impl Into<String>,
        labels: Vec<Label>,
    ) -> Result<Self> {
        let item_id = item_id.into();
        let mut seen = BTreeMap::new();
        for l in &labels {
            if seen.insert(&l.keyphrase, ()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "item `{item_id}` repeats label `{}`",
                    l.keyphrase
                )));
            }
        }
        let total_interactions = labels.iter().map(|l| l.frequency).sum();
        Ok(Self {
            item_id,
            text: text.into(),
            labels,
            total_interactions,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn keyphrases(&self) -> impl Iterator<Item = &Keyphrase> {
        self.labels.iter().map(|l| &l.keyphrase)
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    pub fn total_interactions(&self) -> u64 {
        self.total_interactions
    }

    pub fn has_label(&self, kp: &Keyphrase) -> bool {
        self.labels.iter().any(|l| &l.keyphrase == kp)
    }
}

/// Curated instances plus a free-form provenance note.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub instances: Vec<Instance>,
    pub provenance: String,
}

impl Dataset {
    pub fn new(instances: Vec<Instance>, provenance: impl Into<String>) -> Self {
        Self {
            instances,
            provenance: provenance.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    pub fn get(&self, item_id: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.item_id == item_id)
    }

    /// Unique-label count per instance, in dataset order.
    pub fn label_counts(&self) -> Vec<usize> {
        self.instances.iter().map(Instance::num_labels).collect()
    }

    /// Mean unique-label count; 0 for an empty dataset.
    pub fn mean_labels(&self) -> f64 {
        if self.instances.is_empty() {
            return 0.0;
        }
        let total: usize = self.instances.iter().map(Instance::num_labels).sum();
        total as f64 / self.instances.len() as f64
    }

    /// One record per observed label carrying its summed frequency. Labels
    /// with frequency 0 have no raw counterpart and are skipped.
    pub fn expand(&self) -> Vec<InteractionRecord> {
        self.instances
            .iter()
            .flat_map(|inst| {
                inst.labels
                    .iter()
                    .filter(|l| l.frequency > 0)
                    .map(move |l| {
                        InteractionRecord::new(
                            inst.item_id.clone(),
                            inst.text.clone(),
                            l.keyphrase.as_string(),
                            l.frequency,
                        )
                    })
            })
            .collect()
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a Instance;
    type IntoIter = core::slice::Iter<'a, Instance>;

    fn into_iter(self) -> Self::IntoIter {
        self.instances.iter()
    }
}

fn ordered_labels(freqs: BTreeMap<Keyphrase, u64>) -> Vec<Label> {
    let mut labels: Vec<Label> = freqs
        .into_iter()
        .map(|(keyphrase, frequency)| Label {
            keyphrase,
            frequency,
        })
        .collect();
    // BTreeMap iteration is already lexicographic, so a stable sort on
    // frequency alone keeps lexicographic tie order.
    labels.sort_by_key(|l| core::cmp::Reverse(l.frequency));
    labels
}

/// Group raw records per item, normalize and deduplicate keyphrases and sum
/// their frequencies. Items sharing a text are merged afterwards under the
/// smallest item id.
///
/// Labels come out ordered by descending frequency, ties lexicographic.
pub fn curate(records: &[InteractionRecord]) -> Result<Dataset> {
    let mut by_item: BTreeMap<&str, (&str, BTreeMap<Keyphrase, u64>)> = BTreeMap::new();
    for rec in records {
        if rec.frequency == 0 {
            return Err(Error::ZeroFrequency {
                item_id: rec.item_id.clone(),
            });
        }
        let kp = normalize_keyphrase(&rec.keyphrase)?;
        let entry = by_item
            .entry(rec.item_id.as_str())
            .or_insert_with(|| (rec.item_text.as_str(), BTreeMap::new()));
        if entry.0 != rec.item_text {
            return Err(Error::ConflictingText {
                item_id: rec.item_id.clone(),
            });
        }
        *entry.1.entry(kp).or_insert(0) += rec.frequency;
    }

    let instances = by_item
        .into_iter()
        .map(|(id, (text, freqs))| Instance::new(id, text, ordered_labels(freqs)))
        .collect::<Result<Vec<_>>>()?;
    let instances = group_by_text(instances);
    Ok(Dataset::new(
        instances,
        format!("curated from {} interaction records", records.len()),
    ))
}

/// Merge instances that share a text. The merged instance keeps the
/// smallest item id and the position of the first occurrence; label
/// frequencies are summed and the labels reordered.
pub fn group_by_text(instances: Vec<Instance>) -> Vec<Instance> {
    let mut slot_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<Instance>> = Vec::new();
    for inst in instances {
        match slot_of.get(&inst.text) {
            Some(&slot) => groups[slot].push(inst),
            None => {
                slot_of.insert(inst.text.clone(), groups.len());
                groups.push(alloc::vec![inst]);
            }
        }
    }
    groups
        .into_iter()
        .map(|mut group| {
            if group.len() == 1 {
                return group.pop().expect("non-empty group");
            }
            let item_id = group
                .iter()
                .map(|i| i.item_id.as_str())
                .min()
                .expect("non-empty group")
                .to_string();
            let text = group[0].text.clone();
            let mut freqs: BTreeMap<Keyphrase, u64> = BTreeMap::new();
            for inst in group {
                for l in inst.labels {
                    *freqs.entry(l.keyphrase).or_insert(0) += l.frequency;
                }
            }
            Instance::new(item_id, text, ordered_labels(freqs)).expect("labels deduplicated by map")
        })
        .collect()
}
