use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Exponential long-tail profile: class `i` keeps
/// `round(max_count * rho^(-i / (C - 1)))` samples (half-up, at least 1).
#[derive(Clone, Debug, PartialEq)]
pub struct LongTailProfile {
    rho: f64,
    max_count: usize,
    counts: Vec<usize>,
}

impl LongTailProfile {
    pub fn exponential(num_classes: usize, rho: f64, max_count: usize) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::invalid("num_classes", "must be positive"));
        }
        if !(rho.is_finite() && rho >= 1.0) {
            return Err(Error::invalid("rho", format!("must be >= 1, got {rho}")));
        }
        if max_count == 0 {
            return Err(Error::invalid("max_count", "must be positive"));
        }
        let counts = (0..num_classes)
            .map(|i| {
                if num_classes == 1 {
                    return max_count;
                }
                let frac = i as f64 / (num_classes - 1) as f64;
                let n = max_count as f64 * rho.powf(-frac);
                ((n + 0.5).floor() as usize).max(1)
            })
            .collect();
        Ok(Self {
            rho,
            max_count,
            counts,
        })
    }

    /// A profile with the given per-class counts; `rho` becomes max / min.
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("counts", "need at least one class"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("counts", "every count must be positive"));
        }
        let max_count = *counts.iter().max().unwrap();
        let rho = max_count as f64 / *counts.iter().min().unwrap() as f64;
        Ok(Self {
            rho,
            max_count,
            counts,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn max_count(&self) -> usize {
        self.max_count
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// `max(count) / min(count)` after rounding.
    pub fn realized_rho(&self) -> f64 {
        let max = *self.counts.iter().max().unwrap() as f64;
        let min = *self.counts.iter().min().unwrap() as f64;
        max / min
    }
}

/// Sample, without replacement, the per-class counts of `profile` from a pool of
/// single-label samples. Returned indices are sorted ascending.
pub fn build_longtail_subset(
    labels: &[u8],
    profile: &LongTailProfile,
    seed: u64,
) -> Result<Vec<usize>> {
    let c = profile.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &l) in labels.iter().enumerate() {
        if let Some(bucket) = by_class.get_mut(l as usize) {
            bucket.push(i);
        }
    }
    let mut out = Vec::with_capacity(profile.counts().iter().sum());
    for (class, (pool, &want)) in by_class.iter().zip(profile.counts()).enumerate() {
        if pool.len() < want {
            return Err(Error::InsufficientSamples {
                class,
                requested: want,
                available: pool.len(),
            });
        }
        let mut rng = rng::stream(seed, Domain::LongTail, class as u64);
        out.extend(
            index::sample(&mut rng, pool.len(), want)
                .into_iter()
                .map(|k| pool[k]),
        );
    }
    out.sort_unstable();
    Ok(out)
}
