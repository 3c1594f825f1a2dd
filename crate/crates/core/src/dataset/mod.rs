//! Datasets: ingestion, long-tail subsetting, composition and class statistics.

mod container;
mod idx;
mod longtail;
mod multimnist;
mod stats;
mod synthetic;
mod undersample;

pub use container::{read_dataset, write_dataset, CONTAINER_MAGIC, CONTAINER_VERSION};
pub use idx::{load_idx, read_idx_images, read_idx_labels, IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC};
pub use longtail::{build_longtail_subset, LongTailProfile};
pub use multimnist::{
    compose_multimnist_test, compose_multimnist_train, Composer, DigitSet, CANVAS, MAX_SHIFT,
};
pub use stats::{compute_class_stats, imbalance_factor, ClassStats};
pub use synthetic::{generate_synthetic, SyntheticSpec};
pub use undersample::undersample_epoch;

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, Matrix};

/// Grayscale image stored as bytes; intensities are `byte / 255` in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl ImageGrid {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height * width != pixels.len() {
            return Err(Error::shape("ImageGrid::new", height * width, pixels.len()));
        }
        Ok(Self {
            height,
            width,
            pixels,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            pixels: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub(crate) fn bytes_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    /// Normalised intensity at `(row, col)`.
    pub fn intensity(&self, row: usize, col: usize) -> f64 {
        f64::from(self.pixels[row * self.width + col]) / 255.0
    }

    /// Write normalised intensities into `out` (length `height * width`).
    pub fn write_normalized(&self, out: &mut [f64]) {
        for (o, &b) in out.iter_mut().zip(&self.pixels) {
            *o = f64::from(b) / 255.0;
        }
    }
}

/// Feature grids plus a binary label matrix with one row per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiLabelDataset {
    grids: Vec<ImageGrid>,
    labels: BinaryMatrix,
}

impl MultiLabelDataset {
    pub fn new(grids: Vec<ImageGrid>, labels: BinaryMatrix) -> Result<Self> {
        if grids.len() != labels.rows() {
            return Err(Error::CountMismatch {
                images: grids.len(),
                labels: labels.rows(),
            });
        }
        if labels.cols() == 0 {
            return Err(Error::invalid("num_classes", "must be positive"));
        }
        if let Some(first) = grids.first() {
            let (h, w) = (first.height(), first.width());
            if let Some(bad) = grids.iter().find(|g| g.height() != h || g.width() != w) {
                return Err(Error::shape(
                    "MultiLabelDataset::new",
                    format!("{h}x{w}"),
                    format!("{}x{}", bad.height(), bad.width()),
                ));
            }
        }
        Ok(Self { grids, labels })
    }

    pub fn len(&self) -> usize {
        self.grids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grids.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.cols()
    }

    /// `(height, width)` of every grid; `(0, 0)` when empty.
    pub fn grid_shape(&self) -> (usize, usize) {
        self.grids
            .first()
            .map_or((0, 0), |g| (g.height(), g.width()))
    }

    pub fn feature_dim(&self) -> usize {
        let (h, w) = self.grid_shape();
        h * w
    }

    pub fn grids(&self) -> &[ImageGrid] {
        &self.grids
    }

    pub fn labels(&self) -> &BinaryMatrix {
        &self.labels
    }

    pub fn samples(&self) -> impl Iterator<Item = (&ImageGrid, &[u8])> {
        self.grids
            .iter()
            .enumerate()
            .map(|(i, g)| (g, self.labels.row(i)))
    }

    /// Flattened, normalised features of the given samples.
    pub fn features(&self, indices: &[usize]) -> Matrix {
        let d = self.feature_dim();
        let mut out = Matrix::zeros(indices.len(), d);
        crate::par::for_each_row_mut(out.as_mut_slice(), d, |r, row| {
            self.grids[indices[r]].write_normalized(row);
        });
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            grids: indices.iter().map(|&i| self.grids[i].clone()).collect(),
            labels: self.labels.select_rows(indices),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_wrong_buffer_length() {
        assert!(ImageGrid::new(2, 2, vec![0; 3]).is_err());
        let g = ImageGrid::new(1, 2, vec![0, 255]).unwrap();
        assert_eq!(g.intensity(0, 1), 1.0);
    }

    #[test]
    fn dataset_checks_counts_and_shapes() {
        let labels = BinaryMatrix::from_rows(&[vec![1, 0]]).unwrap();
        assert!(matches!(
            MultiLabelDataset::new(vec![], labels.clone()),
            Err(Error::CountMismatch { .. })
        ));
        let ds = MultiLabelDataset::new(vec![ImageGrid::zeros(2, 3)], labels).unwrap();
        assert_eq!(ds.feature_dim(), 6);
        assert_eq!(ds.features(&[0]).shape(), (1, 6));

        let two = BinaryMatrix::from_rows(&[vec![1], vec![0]]).unwrap();
        assert!(
            MultiLabelDataset::new(vec![ImageGrid::zeros(2, 2), ImageGrid::zeros(1, 4)], two)
                .is_err()
        );
    }
}
