use serde::{Deserialize, Serialize};

use super::{ClassHistograms, ProbabilityHistogram};
use crate::error::{Error, Result};

/// Additive smoothing applied to every bin before renormalising.
pub const DEFAULT_EPSILON: f64 = 1e-6;

/// Below this spread the standardised divergences are all zero.
const MIN_SIGMA: f64 = 1e-12;

fn smooth(h: &[f64], eps: f64) -> Vec<f64> {
    let total: f64 = h.iter().map(|v| v + eps).sum();
    h.iter().map(|v| (v + eps) / total).collect()
}

/// `KL(p_hat || p)` after adding `eps` to every bin of both and renormalising.
pub fn kl_divergence(p_hat: &[f64], p: &[f64], eps: f64) -> Result<f64> {
    if p_hat.len() != p.len() {
        return Err(Error::shape("kl_divergence", p.len(), p_hat.len()));
    }
    if p_hat.is_empty() {
        return Err(Error::Empty("histogram"));
    }
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::invalid(
            "epsilon",
            format!("must be positive, got {eps}"),
        ));
    }
    let a = smooth(p_hat, eps);
    let b = smooth(p, eps);
    Ok(a.iter().zip(&b).map(|(x, y)| x * (x / y).ln()).sum())
}

/// Per-class divergences for one epoch. `None` marks a class whose side had
/// no samples; such classes are left out of the mean and spread and get a
/// combined signal of 0.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub d_pos: Vec<Option<f64>>,
    pub d_neg: Vec<Option<f64>>,
    pub d_pos_norm: Vec<f64>,
    pub d_neg_norm: Vec<f64>,
    /// `D~+_c - D~-_c`, the signal driving the ratio update.
    pub d_combined: Vec<f64>,
    pub mu_pos: f64,
    pub mu_neg: f64,
    pub sigma_pos: f64,
    pub sigma_neg: f64,
}

impl DivergenceSummary {
    /// A summary carrying only the combined signal.
    pub fn from_combined(d_combined: Vec<f64>) -> Self {
        let c = d_combined.len();
        Self {
            d_pos: vec![None; c],
            d_neg: vec![None; c],
            d_pos_norm: vec![0.0; c],
            d_neg_norm: vec![0.0; c],
            d_combined,
            ..Self::default()
        }
    }
}

/// Standardise over the defined entries with the population deviation.
fn standardise(values: &[Option<f64>]) -> (Vec<f64>, f64, f64) {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return (vec![0.0; values.len()], 0.0, 0.0);
    }
    let n = defined.len() as f64;
    let mu = defined.iter().sum::<f64>() / n;
    let sigma = (defined.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n).sqrt();
    let norm = values
        .iter()
        .map(|v| match v {
            Some(v) if sigma >= MIN_SIGMA => (v - mu) / sigma,
            _ => 0.0,
        })
        .collect();
    (norm, mu, sigma)
}

pub fn normalize_divergences(
    d_pos: &[Option<f64>],
    d_neg: &[Option<f64>],
) -> Result<DivergenceSummary> {
    if d_pos.len() != d_neg.len() {
        return Err(Error::shape(
            "normalize_divergences",
            d_pos.len(),
            d_neg.len(),
        ));
    }
    if d_pos.iter().chain(d_neg).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("divergence"));
    }
    let (d_pos_norm, mu_pos, sigma_pos) = standardise(d_pos);
    let (d_neg_norm, mu_neg, sigma_neg) = standardise(d_neg);
    let d_combined = (0..d_pos.len())
        .map(|c| match (d_pos[c], d_neg[c]) {
            (Some(_), Some(_)) => d_pos_norm[c] - d_neg_norm[c],
            _ => 0.0,
        })
        .collect();
    Ok(DivergenceSummary {
        d_pos: d_pos.to_vec(),
        d_neg: d_neg.to_vec(),
        d_pos_norm,
        d_neg_norm,
        d_combined,
        mu_pos,
        mu_neg,
        sigma_pos,
        sigma_neg,
    })
}

/// Divergences of every class, standardised across classes.
pub fn divergences(hists: &[ClassHistograms], eps: f64) -> Result<DivergenceSummary> {
    let side = |pred: &Option<ProbabilityHistogram>, truth: &Option<ProbabilityHistogram>| match (
        pred, truth,
    ) {
        (Some(p), Some(t)) => kl_divergence(&p.mass, &t.mass, eps).map(Some),
        _ => Ok(None),
    };
    let mut d_pos = Vec::with_capacity(hists.len());
    let mut d_neg = Vec::with_capacity(hists.len());
    for h in hists {
        d_pos.push(side(&h.pos_pred, &h.pos_truth)?);
        d_neg.push(side(&h.neg_pred, &h.neg_truth)?);
    }
    normalize_divergences(&d_pos, &d_neg)
}
