//! Ranking metrics for keyphrase predictions under incomplete ground truth.
//!
//! Every metric first deduplicates the prediction list (first occurrence
//! wins) and then truncates it, so repeated generations never count twice.
//!
//! | metric  | cutoff        | denominator                  |
//! | ------- | ------------- | ---------------------------- |
//! | `P@k`   | `k`           | number of kept predictions   |
//! | `R@k`   | `k`           | `|gt|`                       |
//! | `P@O`   | `O = |gt|`    | number of kept predictions   |
//! | `B@k`   | `k`           | `k`, always                  |
//! | `#K@k`  | first `k` raw | (count of distinct phrases)  |
//!
//! `P@k` divides by what the model produced, so a model that stops early is
//! rewarded; `B@k` divides by the budget and punishes it instead.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, Keyphrase};
use crate::{Error, Result};

/// Predictions beyond this rank are ignored by `F1@O`.
pub const MAX_PREDICTIONS: usize = 100;

/// Ranked keyphrases generated for one item. Duplicates are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub item_id: String,
    pub keyphrases: Vec<Keyphrase>,
}

impl Prediction {
    pub fn new(item_id: impl Into<String>, keyphrases: Vec<Keyphrase>) -> Self {
        Self {
            item_id: item_id.into(),
            keyphrases,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(hits: usize, kept: usize, gt: usize) -> Self {
        let precision = if kept == 0 {
            0.0
        } else {
            hits as f64 / kept as f64
        };
        let recall = hits as f64 / gt as f64;
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// First `k` distinct predictions, in rank order.
pub fn dedup_top(preds: &[Keyphrase], k: usize) -> Vec<&Keyphrase> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(k.min(preds.len()));
    for kp in preds {
        if out.len() == k {
            break;
        }
        if seen.insert(kp) {
            out.push(kp);
        }
    }
    out
}

fn hits(top: &[&Keyphrase], gt: &BTreeSet<&Keyphrase>) -> usize {
    top.iter().filter(|kp| gt.contains(**kp)).count()
}

fn gt_set(gt: &[Keyphrase]) -> Result<BTreeSet<&Keyphrase>> {
    let set: BTreeSet<&Keyphrase> = gt.iter().collect();
    if set.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    Ok(set)
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    Ok(())
}

/// P@k, R@k and F1@k. Precision divides by the number of kept predictions.
pub fn precision_recall_f1_at_k(preds: &[Keyphrase], gt: &[Keyphrase], k: usize) -> Result<Prf> {
    check_k(k)?;
    let gt = gt_set(gt)?;
    let top = dedup_top(preds, k);
    Ok(Prf::from_counts(hits(&top, &gt), top.len(), gt.len()))
}

/// P/R/F1 at the per-instance cutoff `O = |gt|`, after capping the raw
/// prediction list at [`MAX_PREDICTIONS`].
pub fn f1_at_o(preds: &[Keyphrase], gt: &[Keyphrase]) -> Result<Prf> {
    let gt = gt_set(gt)?;
    let capped = &preds[..preds.len().min(MAX_PREDICTIONS)];
    let top = dedup_top(capped, gt.len());
    Ok(Prf::from_counts(hits(&top, &gt), top.len(), gt.len()))
}

/// B@k: correct predictions among the first `k` distinct ones, over `k`.
/// Bounded above by `min(|gt|, k) / k`.
pub fn budget_accuracy_at_k(preds: &[Keyphrase], gt: &[Keyphrase], k: usize) -> Result<f64> {
    check_k(k)?;
    let gt: BTreeSet<&Keyphrase> = gt.iter().collect();
    let top = dedup_top(preds, k);
    Ok(hits(&top, &gt) as f64 / k as f64)
}

/// #K@k: distinct keyphrases among the first `k` generated.
pub fn unique_k_at_k(preds: &[Keyphrase], k: usize) -> Result<usize> {
    check_k(k)?;
    Ok(preds.iter().take(k).collect::<BTreeSet<_>>().len())
}

/// Fraction of judged keyphrases that are both relevant and present in the
/// domain universe.
pub fn rel_combine(judged: &[bool], in_universe: &[bool]) -> Result<f64> {
    if judged.len() != in_universe.len() {
        return Err(Error::LengthMismatch {
            left: judged.len(),
            right: in_universe.len(),
        });
    }
    if judged.is_empty() {
        return Err(Error::EmptyInput);
    }
    let both = judged
        .iter()
        .zip(in_universe)
        .filter(|(g, u)| **g && **u)
        .count();
    Ok(both as f64 / judged.len() as f64)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub item_id: String,
    pub p_at_k: f64,
    pub r_at_k: f64,
    pub f1_at_k: f64,
    pub p_at_o: f64,
    pub r_at_o: f64,
    pub f1_at_o: f64,
    pub b_at_k: f64,
    pub uniq_at_k: usize,
}

/// Unweighted means over evaluated instances.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub p_at_k: f64,
    pub r_at_k: f64,
    pub f1_at_k: f64,
    pub p_at_o: f64,
    pub r_at_o: f64,
    pub f1_at_o: f64,
    pub b_at_k: f64,
    pub uniq_at_k: f64,
}

impl MacroMetrics {
    /// (row name, value) pairs in report order.
    pub fn rows(&self, k: usize) -> Vec<(String, f64)> {
        use alloc::format;
        alloc::vec![
            (format!("P@{k}"), self.p_at_k),
            (format!("R@{k}"), self.r_at_k),
            (format!("F1@{k}"), self.f1_at_k),
            ("P@O".into(), self.p_at_o),
            ("R@O".into(), self.r_at_o),
            ("F1@O".into(), self.f1_at_o),
            (format!("B@{k}"), self.b_at_k),
            (format!("#K@{k}"), self.uniq_at_k),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub per_instance: Vec<InstanceMetrics>,
    pub macro_avg: MacroMetrics,
    /// Instances evaluated (empty ground truth excluded).
    pub instances: usize,
    /// Instances skipped because their label set was empty.
    pub excluded_empty_gt: usize,
}

pub fn evaluate_instance(
    item_id: &str,
    preds: &[Keyphrase],
    gt: &[Keyphrase],
    k: usize,
) -> Result<InstanceMetrics> {
    let at_k = precision_recall_f1_at_k(preds, gt, k)?;
    let at_o = f1_at_o(preds, gt)?;
    Ok(InstanceMetrics {
        item_id: item_id.into(),
        p_at_k: at_k.precision,
        r_at_k: at_k.recall,
        f1_at_k: at_k.f1,
        p_at_o: at_o.precision,
        r_at_o: at_o.recall,
        f1_at_o: at_o.f1,
        b_at_k: budget_accuracy_at_k(preds, gt, k)?,
        uniq_at_k: unique_k_at_k(preds, k)?,
    })
}

/// Evaluate one prediction per instance of `d` and macro-average.
///
/// Every prediction must name an item of `d` and every item needs exactly
/// one prediction (which may be empty).
pub fn evaluate_dataset(preds: &[Prediction], d: &Dataset, k: usize) -> Result<MetricReport> {
    check_k(k)?;
    let known: BTreeSet<&str> = d.iter().map(|i| i.item_id.as_str()).collect();
    let mut by_id: BTreeMap<&str, &Prediction> = BTreeMap::new();
    for p in preds {
        if !known.contains(p.item_id.as_str()) {
            return Err(Error::UnknownItem(p.item_id.clone()));
        }
        if by_id.insert(p.item_id.as_str(), p).is_some() {
            return Err(Error::InvalidConfig(alloc::format!(
                "more than one prediction for item `{}`",
                p.item_id
            )));
        }
    }

    let mut report = MetricReport {
        k,
        ..MetricReport::default()
    };
    for inst in d {
        let pred = by_id
            .get(inst.item_id.as_str())
            .ok_or_else(|| Error::MissingPrediction(inst.item_id.clone()))?;
        if inst.num_labels() == 0 {
            report.excluded_empty_gt += 1;
            continue;
        }
        let gt: Vec<Keyphrase> = inst.keyphrases().cloned().collect();
        report
            .per_instance
            .push(evaluate_instance(&inst.item_id, &pred.keyphrases, &gt, k)?);
    }
    report.instances = report.per_instance.len();
    report.macro_avg = macro_average(&report.per_instance);
    Ok(report)
}

fn macro_average(rows: &[InstanceMetrics]) -> MacroMetrics {
    if rows.is_empty() {
        return MacroMetrics::default();
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&InstanceMetrics) -> f64| rows.iter().map(f).sum::<f64>() / n;
    MacroMetrics {
        p_at_k: mean(|r| r.p_at_k),
        r_at_k: mean(|r| r.r_at_k),
        f1_at_k: mean(|r| r.f1_at_k),
        p_at_o: mean(|r| r.p_at_o),
        r_at_o: mean(|r| r.r_at_o),
        f1_at_o: mean(|r| r.f1_at_o),
        b_at_k: mean(|r| r.b_at_k),
        uniq_at_k: mean(|r| r.uniq_at_k as f64),
    }
}
