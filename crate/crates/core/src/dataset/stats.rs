use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

/// Per-class positive/negative counts over `total` samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassStats {
    pub n_pos: Vec<usize>,
    pub n_neg: Vec<usize>,
    pub total: usize,
}

impl ClassStats {
    pub fn from_counts(n_pos: Vec<usize>, total: usize) -> Result<Self> {
        if let Some(&bad) = n_pos.iter().find(|&&n| n > total) {
            return Err(Error::invalid(
                "n_pos",
                format!("count {bad} exceeds total {total}"),
            ));
        }
        let n_neg = n_pos.iter().map(|&p| total - p).collect();
        Ok(Self {
            n_pos,
            n_neg,
            total,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.n_pos.len()
    }

    /// `n_pos / n_neg`, or `None` when either count is zero.
    pub fn ratio(&self, class: usize) -> Option<f64> {
        let (p, n) = (self.n_pos[class], self.n_neg[class]);
        (p > 0 && n > 0).then(|| p as f64 / n as f64)
    }

    pub fn ratios(&self) -> Vec<Option<f64>> {
        (0..self.num_classes()).map(|c| self.ratio(c)).collect()
    }
}

pub fn compute_class_stats(labels: &BinaryMatrix) -> Result<ClassStats> {
    if labels.rows() == 0 {
        return Err(Error::Empty("label matrix"));
    }
    ClassStats::from_counts(labels.column_sums(), labels.rows())
}

/// `max(n_pos) / min(n_pos)`.
pub fn imbalance_factor(stats: &ClassStats) -> Result<f64> {
    if stats.n_pos.is_empty() {
        return Err(Error::Empty("class statistics"));
    }
    if let Some(c) = stats.n_pos.iter().position(|&n| n == 0) {
        return Err(Error::invalid(
            "stats",
            format!("class {c} has no positive samples"),
        ));
    }
    let max = *stats.n_pos.iter().max().unwrap() as f64;
    let min = *stats.n_pos.iter().min().unwrap() as f64;
    Ok(max / min)
}
