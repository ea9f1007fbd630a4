//! Coverage-based tile labeling.

use serde::{Deserialize, Serialize};

use super::mask::BinaryMask;
use super::table::Label;
use crate::error::{Error, Result};

/// Fraction of white pixels.
pub fn gamma(mask: &BinaryMask) -> f64 {
    mask.count_set() as f64 / mask.cells().len() as f64
}

/// Nearest-rank percentile: the `ceil(q/100 · N)`-th smallest value (rank
/// clamped to at least 1, so `q = 0` gives the minimum).
pub fn percentile_threshold(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("percentile input"));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "percentile {q} outside [0, 100]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = ((q / 100.0) * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.clamp(1, sorted.len()) - 1])
}

/// Outcome of the coverage rule for one tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileLabel {
    Labeled(Label),
    Excluded,
}

/// `-1` for empty tiles, `+1` above the threshold, excluded in between.
pub fn assign_label(gamma: f64, epsilon: f64) -> TileLabel {
    if gamma == 0.0 {
        TileLabel::Labeled(Label::Neg)
    } else if gamma > epsilon {
        TileLabel::Labeled(Label::Pos)
    } else {
        TileLabel::Excluded
    }
}

/// Labels for a batch of tiles with the threshold taken as a percentile of
/// the positive coverages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelReport {
    pub epsilon: f64,
    pub percentile: f64,
    pub labels: Vec<TileLabel>,
    pub n_positive: usize,
    pub n_negative: usize,
    pub n_excluded: usize,
}

pub fn label_by_percentile(gammas: &[f64], q: f64) -> Result<LabelReport> {
    let positives: Vec<f64> = gammas.iter().copied().filter(|g| *g > 0.0).collect();
    let epsilon = percentile_threshold(&positives, q)?;
    let labels: Vec<TileLabel> = gammas.iter().map(|g| assign_label(*g, epsilon)).collect();
    let count = |t: TileLabel| labels.iter().filter(|l| **l == t).count();
    Ok(LabelReport {
        epsilon,
        percentile: q,
        n_positive: count(TileLabel::Labeled(Label::Pos)),
        n_negative: count(TileLabel::Labeled(Label::Neg)),
        n_excluded: count(TileLabel::Excluded),
        labels,
    })
}
