//! Desk-scale synthetic multi-label data.
//!
//! Every class owns a Gaussian prototype vector. A sample's latent feature is
//! the sum of the prototypes of its classes plus isotropic noise, squashed
//! through a logistic into `[0, 1]` and quantised to bytes so the result fits
//! the same `ImageGrid` storage as real images. Class positives are laid out
//! as "slots" and, with probability `cooccurrence_rate`, a slot is merged with
//! a nearby slot of another class, so the realised per-class positive counts
//! always equal the requested counts.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ImageGrid, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::par;
use crate::rng::{self, Domain};

const PAIR_SEARCH_WINDOW: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub feature_dim: usize,
    pub cooccurrence_rate: f64,
    /// Standard deviation of the per-sample latent noise.
    pub noise: f64,
    /// Standard deviation of prototype entries.
    pub separation: f64,
    /// Seed for the class prototypes; share it between train and test sets.
    pub prototype_seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, feature_dim: usize, cooccurrence_rate: f64) -> Self {
        Self {
            num_classes,
            feature_dim,
            cooccurrence_rate,
            noise: 1.0,
            separation: 1.0,
            prototype_seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be positive"));
        }
        if self.num_classes > u16::MAX as usize {
            return Err(Error::invalid("num_classes", "too many classes"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature_dim", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.cooccurrence_rate) {
            return Err(Error::invalid(
                "cooccurrence_rate",
                format!("must lie in [0, 1], got {}", self.cooccurrence_rate),
            ));
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return Err(Error::invalid("noise", "must be finite and non-negative"));
        }
        if !(self.separation.is_finite() && self.separation >= 0.0) {
            return Err(Error::invalid(
                "separation",
                "must be finite and non-negative",
            ));
        }
        Ok(())
    }

    fn prototypes(&self) -> Vec<Vec<f64>> {
        (0..self.num_classes)
            .map(|c| {
                let mut rng = rng::stream(self.prototype_seed, Domain::Prototype, c as u64);
                (0..self.feature_dim)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        self.separation * z
                    })
                    .collect()
            })
            .collect()
    }
}

fn group_slots(spec: &SyntheticSpec, per_class_counts: &[usize], seed: u64) -> Vec<Vec<u16>> {
    let mut slots: Vec<u16> = per_class_counts
        .iter()
        .enumerate()
        .flat_map(|(c, &n)| std::iter::repeat_n(c as u16, n))
        .collect();
    let mut rng = rng::stream(seed, Domain::Synthetic, 0);
    slots.shuffle(&mut rng);

    let mut used = vec![false; slots.len()];
    let mut samples = Vec::with_capacity(slots.len());
    for i in 0..slots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let mut classes = vec![slots[i]];
        if spec.cooccurrence_rate > 0.0 && rng.random_bool(spec.cooccurrence_rate) {
            let end = (i + 1 + PAIR_SEARCH_WINDOW).min(slots.len());
            if let Some(j) = (i + 1..end).find(|&j| !used[j] && slots[j] != slots[i]) {
                used[j] = true;
                classes.push(slots[j]);
                classes.sort_unstable();
            }
        }
        samples.push(classes);
    }
    samples
}

pub fn generate_synthetic(
    spec: &SyntheticSpec,
    per_class_counts: &[usize],
    seed: u64,
) -> Result<MultiLabelDataset> {
    spec.validate()?;
    if per_class_counts.len() != spec.num_classes {
        return Err(Error::shape(
            "generate_synthetic counts",
            spec.num_classes,
            per_class_counts.len(),
        ));
    }
    if let Some(c) = per_class_counts.iter().position(|&n| n == 0) {
        return Err(Error::invalid(
            "per_class_counts",
            format!("class {c} has a zero count"),
        ));
    }

    let samples = group_slots(spec, per_class_counts, seed);
    let protos = spec.prototypes();
    let d = spec.feature_dim;

    let grids = par::map_indexed(samples.len(), |i| {
        let mut rng = rng::stream(seed, Domain::Synthetic, 1 + i as u64);
        let px = (0..d)
            .map(|k| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let latent: f64 = samples[i]
                    .iter()
                    .map(|&c| protos[c as usize][k])
                    .sum::<f64>()
                    + spec.noise * z;
                let x = 1.0 / (1.0 + (-latent).exp());
                (x * 255.0).round() as u8
            })
            .collect();
        ImageGrid::new(1, d, px).expect("length matches")
    });

    let mut labels = BinaryMatrix::zeros(samples.len(), spec.num_classes);
    for (i, classes) in samples.iter().enumerate() {
        for &c in classes {
            labels.set(i, c as usize, true);
        }
    }
    MultiLabelDataset::new(grids, labels)
}
