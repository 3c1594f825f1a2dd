use rand::Rng;
use serde::{Deserialize, Serialize};

use super::RatioState;
use crate::dataset::ClassStats;
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::par;
use crate::rng::{self, Domain};

/// Which side of a class is thinned, and the keep probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KeepRule {
    All,
    Positives(f64),
    Negatives(f64),
}

impl KeepRule {
    fn for_class(ratio: f64, target: f64) -> Self {
        if ratio > target {
            KeepRule::Positives(target / ratio)
        } else if ratio < target {
            KeepRule::Negatives(ratio / target)
        } else {
            KeepRule::All
        }
    }
}

/// Per-class keep rules for one epoch. Rows are masked independently from a
/// generator keyed by `(seed, row id)`, so materialising the whole matrix up
/// front and masking lazily batch by batch give identical masks.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskPlan {
    rules: Vec<KeepRule>,
}

impl MaskPlan {
    pub fn new(stats: &ClassStats, state: &RatioState) -> Result<Self> {
        if stats.num_classes() != state.target.len() {
            return Err(Error::shape(
                "MaskPlan",
                stats.num_classes(),
                state.target.len(),
            ));
        }
        let rules = (0..stats.num_classes())
            .map(|c| {
                if stats.n_pos[c] == 0 {
                    // class absent from these labels: nothing to rebalance
                    return Ok(KeepRule::All);
                }
                let r = stats.ratio(c).ok_or(Error::UndefinedRatio(c))?;
                Ok(KeepRule::for_class(r, state.target[c]))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rules })
    }

    /// Every label kept.
    pub fn keep_all(num_classes: usize) -> Self {
        Self {
            rules: vec![KeepRule::All; num_classes],
        }
    }

    pub fn rules(&self) -> &[KeepRule] {
        &self.rules
    }

    pub fn is_identity(&self) -> bool {
        self.rules.iter().all(|r| *r == KeepRule::All)
    }

    /// Fill `out` with the mask of one label row.
    pub fn mask_row(&self, seed: u64, row_id: u64, labels: &[u8], out: &mut [u8]) {
        if self.is_identity() {
            out.fill(1);
            return;
        }
        let mut rng = rng::stream(seed, Domain::Mask, row_id);
        for ((o, &y), rule) in out.iter_mut().zip(labels).zip(&self.rules) {
            let keep = match (*rule, y) {
                (KeepRule::Positives(p), 1) | (KeepRule::Negatives(p), 0) => {
                    rng.random::<f64>() < p
                }
                _ => true,
            };
            *o = u8::from(keep);
        }
    }

    /// Masks for the given label rows; `row_ids[i]` keys the stream of row `i`.
    pub fn masks_for(
        &self,
        labels: &BinaryMatrix,
        row_ids: &[usize],
        seed: u64,
    ) -> Result<BinaryMatrix> {
        if labels.cols() != self.rules.len() {
            return Err(Error::shape("masks_for", self.rules.len(), labels.cols()));
        }
        if row_ids.len() != labels.rows() {
            return Err(Error::shape(
                "masks_for row ids",
                labels.rows(),
                row_ids.len(),
            ));
        }
        let mut masks = BinaryMatrix::ones(labels.rows(), labels.cols());
        let width = labels.cols();
        par::for_each_byte_row_mut(masks.as_mut_slice(), width, |i, row| {
            self.mask_row(seed, row_ids[i] as u64, labels.row(i), row);
        });
        Ok(masks)
    }
}

/// Draw the epoch's masks for every label row (row `i` uses stream `i`).
pub fn generate_masks(
    labels: &BinaryMatrix,
    stats: &ClassStats,
    state: &RatioState,
    seed: u64,
) -> Result<BinaryMatrix> {
    let plan = MaskPlan::new(stats, state)?;
    let ids: Vec<usize> = (0..labels.rows()).collect();
    plan.masks_for(labels, &ids, seed)
}

/// Kept and masked label counts per class and side.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MaskCounts {
    pub kept_pos: Vec<usize>,
    pub kept_neg: Vec<usize>,
    pub masked_pos: Vec<usize>,
    pub masked_neg: Vec<usize>,
}

impl MaskCounts {
    pub fn new(num_classes: usize) -> Self {
        Self {
            kept_pos: vec![0; num_classes],
            kept_neg: vec![0; num_classes],
            masked_pos: vec![0; num_classes],
            masked_neg: vec![0; num_classes],
        }
    }

    pub fn add(&mut self, labels: &BinaryMatrix, masks: &BinaryMatrix) {
        for i in 0..labels.rows() {
            for (c, (&y, &g)) in labels.row(i).iter().zip(masks.row(i)).enumerate() {
                let slot = match (y, g) {
                    (1, 1) => &mut self.kept_pos,
                    (1, _) => &mut self.masked_pos,
                    (_, 1) => &mut self.kept_neg,
                    _ => &mut self.masked_neg,
                };
                slot[c] += 1;
            }
        }
    }

    pub fn tally(labels: &BinaryMatrix, masks: &BinaryMatrix) -> Self {
        let mut counts = Self::new(labels.cols());
        counts.add(labels, masks);
        counts
    }
}
