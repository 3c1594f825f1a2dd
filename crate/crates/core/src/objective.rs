//! Per-label losses and the masked, class-weighted batch reduction.
//!
//! A batch of `B` samples with label matrix `Y`, probabilities `P`, masks `G`
//! and class weights `w` reduces to
//!
//! ```text
//! L = (1/B) * sum_i sum_j w_j * g_ij * loss(y_ij, p_ij)
//! ```
//!
//! which is the plain per-class summed loss when `G` and `w` are all ones.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, Matrix};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before any log.
pub const PROB_EPS: f64 = 1e-7;

#[inline]
pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy.
pub fn bce(y: u8, p: f64) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// Binary focal loss `-[y (1-p)^g ln p + (1-y) p^g ln(1-p)]`.
pub fn focal(y: u8, p: f64, gamma: f64) -> f64 {
    let p = clamp_prob(p);
    if y == 1 {
        -(1.0 - p).powf(gamma) * p.ln()
    } else {
        -p.powf(gamma) * (1.0 - p).ln()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LossKind {
    #[default]
    Bce,
    Focal {
        #[serde(default = "default_gamma")]
        gamma: f64,
    },
}

fn default_gamma() -> f64 {
    LossKind::DEFAULT_FOCAL_GAMMA
}

impl LossKind {
    pub const DEFAULT_FOCAL_GAMMA: f64 = 2.0;

    pub fn validate(&self) -> Result<()> {
        match *self {
            LossKind::Bce => Ok(()),
            LossKind::Focal { gamma } if gamma.is_finite() && gamma >= 0.0 => Ok(()),
            LossKind::Focal { gamma } => Err(Error::invalid(
                "gamma",
                format!("must be finite and >= 0, got {gamma}"),
            )),
        }
    }

    #[inline]
    pub fn loss(&self, y: u8, p: f64) -> f64 {
        match *self {
            LossKind::Bce => bce(y, p),
            LossKind::Focal { gamma } => focal(y, p, gamma),
        }
    }

    /// Derivative of the loss with respect to the logit `z`, where `p = sigmoid(z)`.
    /// Zero where the probability clamp is active.
    #[inline]
    pub fn dloss_dlogit(&self, y: u8, p: f64) -> f64 {
        if clamp_prob(p) != p {
            return 0.0;
        }
        match *self {
            LossKind::Bce => p - f64::from(y),
            LossKind::Focal { gamma } => {
                let q = 1.0 - p;
                if y == 1 {
                    gamma * p * q.powf(gamma) * p.ln() - q.powf(gamma + 1.0)
                } else {
                    p.powf(gamma + 1.0) - gamma * p.powf(gamma) * q * q.ln()
                }
            }
        }
    }
}

/// Per-class loss weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub w: Vec<f64>,
}

impl ClassWeights {
    pub fn uniform(num_classes: usize) -> Self {
        Self {
            w: vec![1.0; num_classes],
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Rescale so the weights sum to the number of classes.
    fn normalized(raw: Vec<f64>) -> Self {
        let c = raw.len() as f64;
        let total: f64 = raw.iter().sum();
        Self {
            w: raw.into_iter().map(|v| v * c / total).collect(),
        }
    }
}

fn check_counts(n_pos: &[usize]) -> Result<()> {
    if n_pos.is_empty() {
        return Err(Error::Empty("class counts"));
    }
    if let Some(c) = n_pos.iter().position(|&n| n == 0) {
        return Err(Error::invalid(
            "n_pos",
            format!("class {c} has no positive samples"),
        ));
    }
    Ok(())
}

/// Class-balanced weights from the effective number of samples,
/// `w_j ∝ (1 - beta) / (1 - beta^n_j)`, normalised to sum to `C`.
pub fn effective_number_weights(n_pos: &[usize], beta: f64) -> Result<ClassWeights> {
    check_counts(n_pos)?;
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::invalid(
            "beta",
            format!("must lie in [0, 1), got {beta}"),
        ));
    }
    let raw = n_pos
        .iter()
        .map(|&n| (1.0 - beta) / (1.0 - beta.powf(n as f64)))
        .collect();
    Ok(ClassWeights::normalized(raw))
}

/// `w_j ∝ 1 / n_j`, normalised to sum to `C`.
pub fn inverse_frequency_weights(n_pos: &[usize]) -> Result<ClassWeights> {
    check_counts(n_pos)?;
    Ok(ClassWeights::normalized(
        n_pos.iter().map(|&n| 1.0 / n as f64).collect(),
    ))
}

pub(crate) fn check_batch_shapes(
    labels: &BinaryMatrix,
    probs_shape: (usize, usize),
    masks: &BinaryMatrix,
    weights: &ClassWeights,
) -> Result<()> {
    if labels.shape() != probs_shape {
        return Err(Error::shape(
            "labels vs probabilities",
            format!("{probs_shape:?}"),
            format!("{:?}", labels.shape()),
        ));
    }
    if masks.shape() != probs_shape {
        return Err(Error::shape(
            "masks vs probabilities",
            format!("{probs_shape:?}"),
            format!("{:?}", masks.shape()),
        ));
    }
    if weights.len() != probs_shape.1 {
        return Err(Error::shape("class weights", probs_shape.1, weights.len()));
    }
    Ok(())
}

/// Mean over the batch of the masked, weighted per-sample loss sums.
pub fn masked_weighted_loss(
    labels: &BinaryMatrix,
    probs: &Matrix,
    masks: &BinaryMatrix,
    weights: &ClassWeights,
    kind: LossKind,
) -> Result<f64> {
    check_batch_shapes(labels, probs.shape(), masks, weights)?;
    let b = probs.rows();
    if b == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for i in 0..b {
        let (y, p, g) = (labels.row(i), probs.row(i), masks.row(i));
        let mut sample = 0.0;
        for j in 0..probs.cols() {
            if g[j] == 1 {
                sample += weights.w[j] * kind.loss(y[j], p[j]);
            }
        }
        total += sample;
    }
    Ok(total / b as f64)
}
