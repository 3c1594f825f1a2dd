use std::collections::BTreeSet;

use rand::seq::index;

use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::rng::{self, Domain};

/// Per-class undersampling: up to `budget` positives are drawn for each class
/// and the union is returned sorted, without duplicates. Pass a fresh seed per
/// epoch to re-draw.
pub fn undersample_epoch(labels: &BinaryMatrix, budget: usize, seed: u64) -> Result<Vec<usize>> {
    if budget == 0 {
        return Err(Error::invalid("budget", "must be at least 1"));
    }
    if labels.rows() == 0 {
        return Err(Error::Empty("label matrix"));
    }
    let mut chosen = BTreeSet::new();
    for class in 0..labels.cols() {
        let positives: Vec<usize> = (0..labels.rows())
            .filter(|&i| labels.get(i, class) == 1)
            .collect();
        if positives.len() <= budget {
            chosen.extend(positives);
        } else {
            let mut rng = rng::stream(seed, Domain::Undersample, class as u64);
            chosen.extend(
                index::sample(&mut rng, positives.len(), budget)
                    .into_iter()
                    .map(|k| positives[k]),
            );
        }
    }
    Ok(chosen.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn loose_budget_keeps_everything_positive() {
        let y = BinaryMatrix::from_rows(&[vec![1, 0], vec![0, 1], vec![1, 1]]).unwrap();
        assert_eq!(undersample_epoch(&y, 10, 0).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn one_per_disjoint_class() {
        let y = BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 0], vec![0, 1], vec![0, 1]]).unwrap();
        let idx = undersample_epoch(&y, 1, 3).unwrap();
        assert_eq!(idx.len(), 2);
        assert_eq!(y.get(idx[0], 0) + y.get(idx[1], 0), 1);
    }

    #[test]
    fn shared_sample_is_deduplicated() {
        let y = BinaryMatrix::from_rows(&[vec![1, 1]]).unwrap();
        assert_eq!(undersample_epoch(&y, 1, 0).unwrap(), vec![0]);
    }

    #[test]
    fn zero_budget_rejected() {
        let y = BinaryMatrix::from_rows(&[vec![1]]).unwrap();
        assert!(undersample_epoch(&y, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn no_duplicates_and_all_positive(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 4), 1..80),
            budget in 1usize..20,
            seed in any::<u64>(),
        ) {
            let y = BinaryMatrix::from_rows(&rows).unwrap();
            let idx = undersample_epoch(&y, budget, seed).unwrap();
            prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(idx.iter().all(|&i| y.row(i).contains(&1)));
            for c in 0..4 {
                let avail = (0..y.rows()).filter(|&i| y.get(i, c) == 1).count();
                let got = idx.iter().filter(|&&i| y.get(i, c) == 1).count();
                prop_assert!(got >= avail.min(budget));
            }
        }
    }
}
