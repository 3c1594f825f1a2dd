use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, Matrix};
use crate::par;

pub const DEFAULT_TAU: usize = 10;

/// Bin `k` covers `[k/tau, (k+1)/tau)`; the last bin is closed at 1.
#[inline]
pub fn bin_index(p: f64, tau: usize) -> usize {
    ((p * tau as f64).floor() as usize).min(tau - 1)
}

/// Normalised `tau`-bin histogram of a non-empty set of probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityHistogram {
    pub mass: Vec<f64>,
    pub count: usize,
}

impl ProbabilityHistogram {
    /// `None` for an empty set.
    pub fn from_values<I>(values: I, tau: usize) -> Option<Self>
    where
        I: IntoIterator<Item = f64>,
    {
        let mut counts = vec![0usize; tau];
        let mut n = 0usize;
        for p in values {
            counts[bin_index(p, tau)] += 1;
            n += 1;
        }
        (n > 0).then(|| Self {
            mass: counts.iter().map(|&k| k as f64 / n as f64).collect(),
            count: n,
        })
    }

    pub fn tau(&self) -> usize {
        self.mass.len()
    }
}

/// The four distributions of one class; `None` marks an empty sample set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassHistograms {
    /// Predicted probabilities on positive samples.
    pub pos_pred: Option<ProbabilityHistogram>,
    /// Ground-truth values (all 1) of positive samples.
    pub pos_truth: Option<ProbabilityHistogram>,
    pub neg_pred: Option<ProbabilityHistogram>,
    pub neg_truth: Option<ProbabilityHistogram>,
}

pub fn build_histograms(
    labels: &BinaryMatrix,
    probs: &Matrix,
    tau: usize,
) -> Result<Vec<ClassHistograms>> {
    if tau < 2 {
        return Err(Error::invalid(
            "tau",
            format!("need at least 2 bins, got {tau}"),
        ));
    }
    if labels.shape() != probs.shape() {
        return Err(Error::shape(
            "build_histograms",
            format!("{:?}", labels.shape()),
            format!("{:?}", probs.shape()),
        ));
    }
    if probs.as_slice().iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("probs", "values must lie in [0, 1]"));
    }
    let n = labels.rows();
    Ok(par::map_indexed(labels.cols(), |c| {
        let side = |want: u8| (0..n).filter(move |&i| labels.get(i, c) == want);
        ClassHistograms {
            pos_pred: ProbabilityHistogram::from_values(side(1).map(|i| probs.get(i, c)), tau),
            pos_truth: ProbabilityHistogram::from_values(side(1).map(|_| 1.0), tau),
            neg_pred: ProbabilityHistogram::from_values(side(0).map(|i| probs.get(i, c)), tau),
            neg_truth: ProbabilityHistogram::from_values(side(0).map(|_| 0.0), tau),
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy() -> (BinaryMatrix, Matrix) {
        let y: Vec<Vec<u8>> = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let p: Vec<Vec<f64>> = [0.2, 0.6, 0.95, 0.99, 0.45, 0.1, 0.15, 0.8, 0.4, 0.3]
            .iter()
            .map(|&v| vec![v])
            .collect();
        (
            BinaryMatrix::from_rows(&y).unwrap(),
            Matrix::from_rows(&p).unwrap(),
        )
    }

    #[test]
    fn worked_toy_example() {
        let (y, p) = toy();
        let h = &build_histograms(&y, &p, 4).unwrap()[0];
        assert_eq!(h.pos_pred.as_ref().unwrap().mass, vec![0.2, 0.2, 0.2, 0.4]);
        assert_eq!(h.neg_pred.as_ref().unwrap().mass, vec![0.4, 0.4, 0.0, 0.2]);
        assert_eq!(h.pos_truth.as_ref().unwrap().mass, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(h.neg_truth.as_ref().unwrap().mass, vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(h.pos_pred.as_ref().unwrap().count, 5);
    }

    #[test]
    fn edges() {
        assert_eq!(bin_index(0.0, 4), 0);
        assert_eq!(bin_index(0.25, 4), 1);
        assert_eq!(bin_index(0.999, 4), 3);
        assert_eq!(bin_index(1.0, 4), 3);
        assert_eq!(bin_index(0.5, 10), 5);
    }

    #[test]
    fn empty_side_is_marked() {
        let y = BinaryMatrix::from_rows(&[vec![0], vec![0]]).unwrap();
        let p = Matrix::from_rows(&[vec![0.1], vec![0.7]]).unwrap();
        let h = &build_histograms(&y, &p, 10).unwrap()[0];
        assert!(h.pos_pred.is_none() && h.pos_truth.is_none());
        assert!(h.neg_pred.is_some());
    }

    #[test]
    fn rejects_bad_input() {
        let (y, p) = toy();
        assert!(build_histograms(&y, &p, 1).is_err());
        let bad = Matrix::from_rows(&[vec![1.5]]).unwrap();
        assert!(build_histograms(&BinaryMatrix::ones(1, 1), &bad, 4).is_err());
    }

    proptest! {
        #[test]
        fn mass_sums_to_one_and_bins_partition(values in proptest::collection::vec(0.0f64..=1.0, 1..200), tau in 2usize..30) {
            let h = ProbabilityHistogram::from_values(values.iter().copied(), tau).unwrap();
            prop_assert!((h.mass.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(h.mass.iter().all(|&m| m >= 0.0));
            for &v in &values {
                let k = bin_index(v, tau);
                prop_assert!(k < tau);
                prop_assert!(v >= k as f64 / tau as f64 - 1e-12);
                prop_assert!(v < (k + 1) as f64 / tau as f64 + 1e-12 || k == tau - 1);
            }
        }
    }
}
