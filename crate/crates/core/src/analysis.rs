//! Missing-label diagnostics: label-count imbalance, popularity/diversity
//! quadrants and keyphrase concentration.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::Dataset;
use crate::{Error, Result};

/// Coefficient of variation σ/μ with the population standard deviation.
pub fn coefficient_of_variation(counts: &[usize]) -> Result<f64> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = counts.len() as f64;
    let mean = counts.iter().map(|&c| c as f64).sum::<f64>() / n;
    if mean == 0.0 {
        return Err(Error::ZeroMean);
    }
    let var = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(libm::sqrt(var) / mean)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quadrant {
    HotDiverse,
    HotNarrow,
    RareNarrow,
    RareDiverse,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [
        Quadrant::HotDiverse,
        Quadrant::HotNarrow,
        Quadrant::RareNarrow,
        Quadrant::RareDiverse,
    ];

    pub fn classify(
        total_interactions: u64,
        unique_labels: usize,
        hot_threshold: u64,
        diverse_threshold: usize,
    ) -> Self {
        match (
            total_interactions >= hot_threshold,
            unique_labels >= diverse_threshold,
        ) {
            (true, true) => Quadrant::HotDiverse,
            (true, false) => Quadrant::HotNarrow,
            (false, false) => Quadrant::RareNarrow,
            (false, true) => Quadrant::RareDiverse,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Quadrant::HotDiverse => "hot_diverse",
            Quadrant::HotNarrow => "hot_narrow",
            Quadrant::RareNarrow => "rare_narrow",
            Quadrant::RareDiverse => "rare_diverse",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadrantCell {
    pub count: usize,
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadrantReport {
    pub hot_diverse: QuadrantCell,
    pub hot_narrow: QuadrantCell,
    pub rare_narrow: QuadrantCell,
    pub rare_diverse: QuadrantCell,
    pub hot_threshold: u64,
    pub diverse_threshold: usize,
}

impl QuadrantReport {
    pub fn cell(&self, q: Quadrant) -> QuadrantCell {
        match q {
            Quadrant::HotDiverse => self.hot_diverse,
            Quadrant::HotNarrow => self.hot_narrow,
            Quadrant::RareNarrow => self.rare_narrow,
            Quadrant::RareDiverse => self.rare_diverse,
        }
    }

    /// Quadrant holding the most instances; earlier quadrants win ties.
    pub fn largest(&self) -> Quadrant {
        let mut best = Quadrant::HotDiverse;
        for q in Quadrant::ALL {
            if self.cell(q).count > self.cell(best).count {
                best = q;
            }
        }
        best
    }
}

pub const DEFAULT_HOT_THRESHOLD: u64 = 5;
pub const DEFAULT_DIVERSE_THRESHOLD: usize = 5;

/// Hot iff `total_interactions >= hot_threshold`; diverse iff the unique
/// label count is `>= diverse_threshold`. An empty dataset gets zero
/// proportions everywhere.
pub fn quadrant_classify(
    d: &Dataset,
    hot_threshold: u64,
    diverse_threshold: usize,
) -> QuadrantReport {
    let mut counts = [0usize; 4];
    for inst in d {
        let q = Quadrant::classify(
            inst.total_interactions(),
            inst.num_labels(),
            hot_threshold,
            diverse_threshold,
        );
        counts[q as usize] += 1;
    }
    let n = d.len();
    let cell = |c: usize| QuadrantCell {
        count: c,
        proportion: if n == 0 { 0.0 } else { c as f64 / n as f64 },
    };
    QuadrantReport {
        hot_diverse: cell(counts[0]),
        hot_narrow: cell(counts[1]),
        rare_narrow: cell(counts[2]),
        rare_diverse: cell(counts[3]),
        hot_threshold,
        diverse_threshold,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationReport {
    /// (cumulative item share, cumulative keyphrase share), starting at (0, 0).
    pub lorenz_points: Vec<(f64, f64)>,
    pub gini: f64,
}

/// Lorenz curve over counts sorted ascending, and Gini = 1 − 2·(trapezoidal
/// area under the curve).
pub fn lorenz_gini(counts: &[usize]) -> Result<ConcentrationReport> {
    if counts.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::AllZero);
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let total = total as f64;

    let mut points = Vec::with_capacity(sorted.len() + 1);
    points.push((0.0, 0.0));
    let mut cum = 0usize;
    let mut area = 0.0;
    let mut prev_y = 0.0;
    for (i, &c) in sorted.iter().enumerate() {
        cum += c;
        let y = cum as f64 / total;
        area += (prev_y + y) / (2.0 * n);
        prev_y = y;
        points.push(((i + 1) as f64 / n, y));
    }
    if let Some(last) = points.last_mut() {
        *last = (1.0, 1.0);
    }
    Ok(ConcentrationReport {
        lorenz_points: points,
        gini: (1.0 - 2.0 * area).max(0.0),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCountHistogram {
    /// unique-label count → number of instances
    pub bins: BTreeMap<usize, usize>,
    pub mean: f64,
    /// `None` when the dataset is empty or every instance has zero labels.
    pub cv: Option<f64>,
}

pub fn label_count_histogram(d: &Dataset) -> LabelCountHistogram {
    let counts = d.label_counts();
    let mut bins = BTreeMap::new();
    for &c in &counts {
        *bins.entry(c).or_insert(0) += 1;
    }
    LabelCountHistogram {
        bins,
        mean: d.mean_labels(),
        cv: coefficient_of_variation(&counts).ok(),
    }
}
