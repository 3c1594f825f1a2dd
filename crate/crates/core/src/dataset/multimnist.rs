//! Two-digit composites on a 32x32 canvas.
//!
//! Each digit is zero-padded to the canvas, centred, shifted by independent
//! integer offsets in `[-MAX_SHIFT, MAX_SHIFT]` on both axes (pixels pushed past
//! the border are dropped) and the two placed digits are merged by pixel-wise
//! maximum.

use rand::Rng;

use super::{ImageGrid, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::matrix::BinaryMatrix;
use crate::par;
use crate::rng::{self, Domain};

pub const CANVAS: usize = 32;
pub const MAX_SHIFT: i32 = 6;

/// Source digits with integer class labels in `0..num_classes`.
#[derive(Clone, Debug)]
pub struct DigitSet {
    pub grids: Vec<ImageGrid>,
    pub labels: Vec<u8>,
    pub num_classes: usize,
}

impl DigitSet {
    pub fn new(grids: Vec<ImageGrid>, labels: Vec<u8>, num_classes: usize) -> Result<Self> {
        if grids.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: grids.len(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= num_classes) {
            return Err(Error::invalid(
                "labels",
                format!("label {bad} outside 0..{num_classes}"),
            ));
        }
        if let Some(g) = grids
            .iter()
            .find(|g| g.height() > CANVAS || g.width() > CANVAS)
        {
            return Err(Error::shape(
                "DigitSet::new",
                format!("at most {CANVAS}x{CANVAS}"),
                format!("{}x{}", g.height(), g.width()),
            ));
        }
        Ok(Self {
            grids,
            labels,
            num_classes,
        })
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            grids: indices.iter().map(|&i| self.grids[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }
}

/// One composite: two source digit indices and their `(dy, dx)` shifts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pairing {
    pub first: usize,
    pub second: usize,
    pub first_shift: (i32, i32),
    pub second_shift: (i32, i32),
}

#[derive(Clone, Copy, Debug)]
pub struct Composer {
    pub canvas: usize,
    pub max_shift: i32,
}

impl Default for Composer {
    fn default() -> Self {
        Self {
            canvas: CANVAS,
            max_shift: MAX_SHIFT,
        }
    }
}

impl Composer {
    fn shift<R: Rng>(&self, rng: &mut R) -> (i32, i32) {
        (
            rng.random_range(-self.max_shift..=self.max_shift),
            rng.random_range(-self.max_shift..=self.max_shift),
        )
    }

    /// Pad `grid` to the canvas, centre it and translate by `(dy, dx)`.
    pub fn place(&self, grid: &ImageGrid, (dy, dx): (i32, i32)) -> ImageGrid {
        let mut out = ImageGrid::zeros(self.canvas, self.canvas);
        self.place_into(grid, (dy, dx), &mut out);
        out
    }

    fn place_into(&self, grid: &ImageGrid, (dy, dx): (i32, i32), out: &mut ImageGrid) {
        let top = (self.canvas - grid.height()) as i32 / 2 + dy;
        let left = (self.canvas - grid.width()) as i32 / 2 + dx;
        let canvas = self.canvas as i32;
        let src = grid.bytes();
        let dst = out.bytes_mut();
        for r in 0..grid.height() as i32 {
            let y = top + r;
            if !(0..canvas).contains(&y) {
                continue;
            }
            for c in 0..grid.width() as i32 {
                let x = left + c;
                if !(0..canvas).contains(&x) {
                    continue;
                }
                let v = src[(r as usize) * grid.width() + c as usize];
                let d = &mut dst[(y * canvas + x) as usize];
                *d = (*d).max(v);
            }
        }
    }

    pub fn render(&self, digits: &DigitSet, p: &Pairing) -> ImageGrid {
        let mut out = ImageGrid::zeros(self.canvas, self.canvas);
        self.place_into(&digits.grids[p.first], p.first_shift, &mut out);
        self.place_into(&digits.grids[p.second], p.second_shift, &mut out);
        out
    }

    /// Each digit paired with a uniformly drawn different digit of the pool.
    pub fn plan_train(&self, n: usize, seed: u64) -> Vec<Pairing> {
        par::map_indexed(n, |i| {
            let mut rng = rng::stream(seed, Domain::Compose, i as u64);
            let first_shift = self.shift(&mut rng);
            let second = if n > 1 {
                let k = rng.random_range(0..n - 1);
                if k >= i {
                    k + 1
                } else {
                    k
                }
            } else {
                i
            };
            let second_shift = self.shift(&mut rng);
            Pairing {
                first: i,
                second,
                first_shift,
                second_shift,
            }
        })
    }

    /// For every digit, one partner from each other class.
    pub fn plan_test(&self, digits: &DigitSet, seed: u64) -> Result<Vec<Pairing>> {
        let c = digits.num_classes;
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
        for (i, &l) in digits.labels.iter().enumerate() {
            by_class[l as usize].push(i);
        }
        if let Some(missing) = by_class.iter().position(Vec::is_empty) {
            return Err(Error::MissingClass(missing));
        }
        let per_digit = par::map_indexed(digits.len(), |i| {
            let mut rng = rng::stream(seed, Domain::Compose, i as u64);
            let own = digits.labels[i] as usize;
            (0..c)
                .filter(|&b| b != own)
                .map(|b| {
                    let pool = &by_class[b];
                    let first_shift = self.shift(&mut rng);
                    let second = pool[rng.random_range(0..pool.len())];
                    let second_shift = self.shift(&mut rng);
                    Pairing {
                        first: i,
                        second,
                        first_shift,
                        second_shift,
                    }
                })
                .collect::<Vec<_>>()
        });
        Ok(per_digit.into_iter().flatten().collect())
    }

    pub fn build(&self, digits: &DigitSet, plan: &[Pairing]) -> Result<MultiLabelDataset> {
        let grids = par::map_indexed(plan.len(), |k| self.render(digits, &plan[k]));
        let mut labels = BinaryMatrix::zeros(plan.len(), digits.num_classes);
        for (k, p) in plan.iter().enumerate() {
            labels.set(k, digits.labels[p.first] as usize, true);
            labels.set(k, digits.labels[p.second] as usize, true);
        }
        MultiLabelDataset::new(grids, labels)
    }
}

/// Training composites: one per input digit, partner drawn from the same
/// (already long-tailed) pool.
pub fn compose_multimnist_train(digits: &DigitSet, seed: u64) -> Result<MultiLabelDataset> {
    if digits.is_empty() {
        return Err(Error::Empty("digit pool"));
    }
    let composer = Composer::default();
    composer.build(digits, &composer.plan_train(digits.len(), seed))
}

/// Test composites: `(C - 1)` per input digit, each with a partner of a
/// different class, so every composite carries exactly two labels.
pub fn compose_multimnist_test(digits: &DigitSet, seed: u64) -> Result<MultiLabelDataset> {
    if digits.is_empty() {
        return Err(Error::Empty("digit pool"));
    }
    let composer = Composer::default();
    let plan = composer.plan_test(digits, seed)?;
    composer.build(digits, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stroke(label: u8) -> ImageGrid {
        // distinct, non-zero patterns so superimposition is observable
        let mut px = vec![0u8; 28 * 28];
        for (k, p) in px.iter_mut().enumerate() {
            if k % 28 == 4 + label as usize * 2 {
                *p = 40 + 20 * label;
            }
        }
        ImageGrid::new(28, 28, px).unwrap()
    }

    fn pool(labels: &[u8]) -> DigitSet {
        DigitSet::new(
            labels.iter().map(|&l| stroke(l)).collect(),
            labels.to_vec(),
            10,
        )
        .unwrap()
    }

    #[test]
    fn three_and_seven_give_two_labels() {
        let d = pool(&[3, 7]);
        let ds = compose_multimnist_train(&d, 1).unwrap();
        assert_eq!(ds.len(), 2);
        for (_, y) in ds.samples() {
            let set: Vec<usize> = (0..10).filter(|&c| y[c] == 1).collect();
            assert_eq!(set, vec![3, 7]);
        }
    }

    #[test]
    fn same_digit_gives_single_label() {
        let ds = compose_multimnist_train(&pool(&[5, 5]), 3).unwrap();
        for (_, y) in ds.samples() {
            assert_eq!(y.iter().map(|&v| v as usize).sum::<usize>(), 1);
            assert_eq!(y[5], 1);
        }
    }

    #[test]
    fn placement_centres_and_crops() {
        let composer = Composer::default();
        let g = ImageGrid::new(1, 1, vec![200]).unwrap();
        let centred = composer.place(&g, (0, 0));
        assert_eq!(centred.bytes()[15 * 32 + 15], 200);
        let shifted = composer.place(&g, (-6, 6));
        assert_eq!(shifted.bytes()[9 * 32 + 21], 200);
        let full = ImageGrid::new(28, 28, vec![1; 784]).unwrap();
        let cropped = composer.place(&full, (6, 0));
        let ones: usize = cropped.bytes().iter().map(|&b| b as usize).sum();
        assert_eq!(ones, 24 * 28);
    }

    #[test]
    fn superimposition_is_pixelwise_max() {
        let d = DigitSet::new(
            vec![
                ImageGrid::new(1, 1, vec![100]).unwrap(),
                ImageGrid::new(1, 1, vec![30]).unwrap(),
            ],
            vec![0, 1],
            2,
        )
        .unwrap();
        let composer = Composer::default();
        let p = Pairing {
            first: 0,
            second: 1,
            first_shift: (0, 0),
            second_shift: (0, 0),
        };
        assert_eq!(composer.render(&d, &p).bytes()[15 * 32 + 15], 100);
    }

    #[test]
    fn shifts_stay_in_range_and_partners_differ() {
        let composer = Composer::default();
        let plan = composer.plan_train(10_000, 42);
        let mut seen = std::collections::BTreeSet::new();
        for (i, p) in plan.iter().enumerate() {
            assert_eq!(p.first, i);
            assert_ne!(p.second, i);
            for (dy, dx) in [p.first_shift, p.second_shift] {
                assert!((-6..=6).contains(&dy) && (-6..=6).contains(&dx));
                seen.insert(dy);
            }
        }
        assert_eq!(seen.len(), 13);
    }

    #[test]
    fn test_split_has_nine_two_label_composites_per_digit() {
        let labels: Vec<u8> = (0..30).map(|i| (i % 10) as u8).collect();
        let d = pool(&labels);
        let ds = compose_multimnist_test(&d, 5).unwrap();
        assert_eq!(ds.len(), 9 * 30);
        for (g, y) in ds.samples() {
            assert_eq!(y.iter().map(|&v| v as usize).sum::<usize>(), 2);
            assert_eq!((g.height(), g.width()), (32, 32));
        }
    }

    #[test]
    fn test_split_requires_every_class() {
        let d = pool(&[0, 1, 2]);
        assert!(matches!(
            compose_multimnist_test(&d, 0),
            Err(Error::MissingClass(3))
        ));
        assert!(matches!(
            compose_multimnist_train(&pool(&[]), 0),
            Err(Error::Empty(_))
        ));
    }

    #[test]
    fn composition_is_seeded() {
        let labels: Vec<u8> = (0..50).map(|i| (i % 10) as u8).collect();
        let d = pool(&labels);
        assert_eq!(
            compose_multimnist_train(&d, 8).unwrap(),
            compose_multimnist_train(&d, 8).unwrap()
        );
        assert_ne!(
            compose_multimnist_train(&d, 8).unwrap(),
            compose_multimnist_train(&d, 9).unwrap()
        );
    }
}
