//! Merge-and-resplit procedure for top-k evaluation.
//!
//! The curated dataset is regrouped by text, shuffled with a seeded
//! Fisher–Yates pass, cut into contiguous train/dev/test slices, and the test
//! slice is bucketed by label count. Buckets with `k <= 2·mu_train` form
//! Test-Narrow; the rest form Test-Diverse.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{group_by_text, Dataset};
use crate::rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Train, dev and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitConfig {
    pub fn new(ratios: [f64; 3], seed: u64) -> Result<Self> {
        let cfg = Self { ratios, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.ratios.iter().sum();
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(self.ratios));
        }
        Ok(())
    }
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            ratios: [0.8, 0.1, 0.1],
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub test_buckets: BTreeMap<usize, Dataset>,
    pub test_narrow: Dataset,
    pub test_diverse: Dataset,
    pub mu_train: f64,
}

/// Slice sizes from cumulative floors, so each split is within one instance
/// of its exact share.
fn split_sizes(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let cut = |c: f64| -> usize { libm::floor((c * n as f64) + 1e-9).min(n as f64) as usize };
    let a = cut(ratios[0]);
    let b = cut(ratios[0] + ratios[1]).max(a);
    [a, b - a, n - b]
}

/// Regroup by text, shuffle and slice. Buckets and the narrow/diverse views
/// are left empty; `mu_train` is filled.
pub fn uniform_split(d: &Dataset, cfg: &SplitConfig) -> Result<DatasetSplits> {
    cfg.validate()?;
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut instances = group_by_text(d.instances.clone());
    rng::shuffle(&mut instances, &mut rng::seeded(cfg.seed));

    let [n_train, n_dev, _] = split_sizes(instances.len(), cfg.ratios);
    let test = instances.split_off(n_train + n_dev);
    let dev = instances.split_off(n_train);
    let train = instances;

    let note = |name: &str| format!("{name} split (seed {}) of: {}", cfg.seed, d.provenance);
    let train = Dataset::new(train, note("train"));
    let mu_train = train.mean_labels();
    Ok(DatasetSplits {
        dev: Dataset::new(dev, note("dev")),
        test: Dataset::new(test, note("test")),
        train,
        mu_train,
        ..DatasetSplits::default()
    })
}

/// Bucket instances by unique-label count. Buckets span every `k` from the
/// smallest to the largest observed count, so some may be empty.
pub fn bucket_by_label_count(test: &Dataset) -> BTreeMap<usize, Dataset> {
    let counts = test.label_counts();
    let (Some(&lo), Some(&hi)) = (counts.iter().min(), counts.iter().max()) else {
        return BTreeMap::new();
    };
    let mut buckets: BTreeMap<usize, Dataset> = (lo..=hi)
        .map(|k| {
            (
                k,
                Dataset::new(Vec::new(), format!("test bucket |labels| = {k}")),
            )
        })
        .collect();
    for inst in test {
        buckets
            .get_mut(&inst.num_labels())
            .expect("bucket range covers all counts")
            .instances
            .push(inst.clone());
    }
    buckets
}

/// Union buckets into (narrow, diverse): narrow takes `k <= 2·mu`.
pub fn aggregate_narrow_diverse(
    buckets: &BTreeMap<usize, Dataset>,
    mu: f64,
) -> Result<(Dataset, Dataset)> {
    if mu.is_nan() || mu <= 0.0 {
        return Err(Error::ZeroMean);
    }
    let mut narrow = Dataset::new(Vec::new(), format!("test-narrow, |labels| <= 2 x {mu}"));
    let mut diverse = Dataset::new(Vec::new(), format!("test-diverse, |labels| > 2 x {mu}"));
    for (&k, bucket) in buckets {
        let target = if k as f64 <= 2.0 * mu {
            &mut narrow
        } else {
            &mut diverse
        };
        target.instances.extend(bucket.instances.iter().cloned());
    }
    Ok((narrow, diverse))
}

/// Full procedure: uniform split, test buckets and narrow/diverse views.
pub fn split_dataset(d: &Dataset, cfg: &SplitConfig) -> Result<DatasetSplits> {
    let mut splits = uniform_split(d, cfg)?;
    splits.test_buckets = bucket_by_label_count(&splits.test);
    let (narrow, diverse) = aggregate_narrow_diverse(&splits.test_buckets, splits.mu_train)?;
    splits.test_narrow = narrow;
    splits.test_diverse = diverse;
    Ok(splits)
}
