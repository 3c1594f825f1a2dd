//! Multi-label evaluation: per-class precision, recall and F1, exact-match
//! accuracy, and averages over the rarest training classes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::ClassStats;
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;

/// Value of precision (resp. recall) when its denominator is zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZeroDivision {
    /// Nothing predicted and nothing missed counts as perfect.
    #[default]
    One,
    Zero,
}

impl ZeroDivision {
    fn value(self) -> f64 {
        match self {
            ZeroDivision::One => 1.0,
            ZeroDivision::Zero => 0.0,
        }
    }
}

fn check_pair(truth: &BinaryMatrix, pred: &BinaryMatrix) -> Result<()> {
    if truth.shape() != pred.shape() {
        return Err(Error::shape(
            "metrics",
            format!("{:?}", truth.shape()),
            format!("{:?}", pred.shape()),
        ));
    }
    Ok(())
}

fn ratio(num: usize, den: usize, zero: ZeroDivision) -> f64 {
    if den == 0 {
        zero.value()
    } else {
        num as f64 / den as f64
    }
}

/// Per-class `(precision, recall)`.
pub fn per_class_precision_recall(
    truth: &BinaryMatrix,
    pred: &BinaryMatrix,
    zero: ZeroDivision,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_pair(truth, pred)?;
    let c = truth.cols();
    let (mut tp, mut fp, mut fneg) = (vec![0usize; c], vec![0usize; c], vec![0usize; c]);
    for i in 0..truth.rows() {
        for (j, (&y, &h)) in truth.row(i).iter().zip(pred.row(i)).enumerate() {
            match (y, h) {
                (1, 1) => tp[j] += 1,
                (0, 1) => fp[j] += 1,
                (1, 0) => fneg[j] += 1,
                _ => {}
            }
        }
    }
    let precision = (0..c).map(|j| ratio(tp[j], tp[j] + fp[j], zero)).collect();
    let recall = (0..c)
        .map(|j| ratio(tp[j], tp[j] + fneg[j], zero))
        .collect();
    Ok((precision, recall))
}

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-class F1 and its macro average.
pub fn f1_scores(precision: &[f64], recall: &[f64]) -> Result<(Vec<f64>, f64)> {
    if precision.len() != recall.len() {
        return Err(Error::shape("f1_scores", precision.len(), recall.len()));
    }
    let per: Vec<f64> = precision
        .iter()
        .zip(recall)
        .map(|(&p, &r)| f1(p, r))
        .collect();
    let macro_f1 = mean(&per);
    Ok((per, macro_f1))
}

/// Fraction of rows predicted exactly.
pub fn exact_match(truth: &BinaryMatrix, pred: &BinaryMatrix) -> Result<f64> {
    check_pair(truth, pred)?;
    if truth.rows() == 0 {
        return Err(Error::Empty("label matrix"));
    }
    let hits = (0..truth.rows())
        .filter(|&i| truth.row(i) == pred.row(i))
        .count();
    Ok(hits as f64 / truth.rows() as f64)
}

/// The `k` classes with the fewest training positives, ties by index.
pub fn infrequent_classes(train: &ClassStats, k: usize) -> Result<Vec<usize>> {
    let c = train.num_classes();
    if k == 0 || k > c {
        return Err(Error::invalid("k", format!("must lie in 1..={c}, got {k}")));
    }
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by_key(|&j| (train.n_pos[j], j));
    order.truncate(k);
    Ok(order)
}

/// Mean of `values` over the `k` rarest training classes.
pub fn topk_infrequent(values: &[f64], train: &ClassStats, k: usize) -> Result<f64> {
    if values.len() != train.num_classes() {
        return Err(Error::shape(
            "topk_infrequent",
            train.num_classes(),
            values.len(),
        ));
    }
    let picked: Vec<f64> = infrequent_classes(train, k)?
        .into_iter()
        .map(|j| values[j])
        .collect();
    Ok(mean(&picked))
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub exact_match: f64,
    /// Averages over the `K` rarest training classes, keyed by `K`.
    pub topk: BTreeMap<usize, TopK>,
}

impl MetricsReport {
    /// `topk` lists the `K` values to report; out-of-range values are an error.
    pub fn compute(
        truth: &BinaryMatrix,
        pred: &BinaryMatrix,
        train: &ClassStats,
        topk: &[usize],
        zero: ZeroDivision,
    ) -> Result<Self> {
        let (precision, recall) = per_class_precision_recall(truth, pred, zero)?;
        let (f1, macro_f1) = f1_scores(&precision, &recall)?;
        let mut views = BTreeMap::new();
        for &k in topk {
            views.insert(
                k,
                TopK {
                    precision: topk_infrequent(&precision, train, k)?,
                    recall: topk_infrequent(&recall, train, k)?,
                    f1: topk_infrequent(&f1, train, k)?,
                },
            );
        }
        Ok(Self {
            macro_precision: mean(&precision),
            macro_recall: mean(&recall),
            macro_f1,
            exact_match: exact_match(truth, pred)?,
            precision,
            recall,
            f1,
            topk: views,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn col(v: &[u8]) -> BinaryMatrix {
        BinaryMatrix::from_rows(&v.iter().map(|&x| vec![x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn four_sample_counts() {
        let (p, r) =
            per_class_precision_recall(&col(&[1, 1, 0, 0]), &col(&[1, 0, 1, 0]), ZeroDivision::One)
                .unwrap();
        assert_eq!((p[0], r[0]), (0.5, 0.5));
    }

    #[test]
    fn zero_division_conventions() {
        let y = col(&[1, 0, 1]);
        let none = col(&[0, 0, 0]);
        let (p, r) = per_class_precision_recall(&y, &none, ZeroDivision::One).unwrap();
        assert_eq!((p[0], r[0]), (1.0, 0.0));
        let (p, _) = per_class_precision_recall(&y, &none, ZeroDivision::Zero).unwrap();
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(0.3, 0.3), 0.3);
        assert_eq!(f1(1.0, 0.0), 0.0);
        assert_relative_eq!(f1(0.5, 1.0), 2.0 / 3.0, max_relative = 1e-15);
    }

    #[test]
    fn exact_match_examples() {
        let y = BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]]).unwrap();
        assert_eq!(exact_match(&y, &y).unwrap(), 1.0);
        let mut off = y.clone();
        off.set(2, 0, false);
        assert_eq!(exact_match(&y, &off).unwrap(), 0.75);
        let flipped =
            BinaryMatrix::from_rows(&[vec![0, 1], vec![1, 0], vec![0, 0], vec![1, 1]]).unwrap();
        assert_eq!(exact_match(&y, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn topk_selection() {
        let s = ClassStats::from_counts(vec![100, 5], 200).unwrap();
        assert_eq!(topk_infrequent(&[0.9, 0.1], &s, 1).unwrap(), 0.1);
        assert_relative_eq!(topk_infrequent(&[0.9, 0.1], &s, 2).unwrap(), 0.5);
        assert!(topk_infrequent(&[0.9, 0.1], &s, 3).is_err());
        let multimnist = ClassStats::from_counts(
            vec![9485, 6167, 3967, 2476, 1508, 875, 538, 331, 164, 105],
            14694,
        )
        .unwrap();
        assert_eq!(infrequent_classes(&multimnist, 3).unwrap(), vec![9, 8, 7]);
        let tied = ClassStats::from_counts(vec![3, 1, 1], 4).unwrap();
        assert_eq!(infrequent_classes(&tied, 2).unwrap(), vec![1, 2]);
    }

    fn matrix_pair() -> impl Strategy<Value = (BinaryMatrix, BinaryMatrix)> {
        (1usize..40, 1usize..8).prop_flat_map(|(n, c)| {
            let cells = proptest::collection::vec(0u8..2, n * c);
            (cells.clone(), cells).prop_map(move |(a, b)| {
                (
                    BinaryMatrix::from_vec(n, c, a).unwrap(),
                    BinaryMatrix::from_vec(n, c, b).unwrap(),
                )
            })
        })
    }

    proptest! {
        #[test]
        fn class_permutation_permutes_metrics((y, h) in matrix_pair()) {
            let c = y.cols();
            let perm: Vec<usize> = (0..c).rev().collect();
            let permute = |m: &BinaryMatrix| {
                let rows: Vec<Vec<u8>> = (0..m.rows()).map(|i| perm.iter().map(|&j| m.get(i, j)).collect()).collect();
                BinaryMatrix::from_rows(&rows).unwrap()
            };
            let (p, r) = per_class_precision_recall(&y, &h, ZeroDivision::One).unwrap();
            let (pp, rp) = per_class_precision_recall(&permute(&y), &permute(&h), ZeroDivision::One).unwrap();
            for (k, &j) in perm.iter().enumerate() {
                prop_assert_eq!(pp[k], p[j]);
                prop_assert_eq!(rp[k], r[j]);
            }
            let (f, _) = f1_scores(&p, &r).unwrap();
            for j in 0..c {
                prop_assert!(f[j] <= 2.0 * p[j].min(r[j]) + 1e-15);
            }
        }
    }
}
