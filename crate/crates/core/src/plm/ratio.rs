use serde::{Deserialize, Serialize};

use super::DivergenceSummary;
use crate::dataset::ClassStats;
use crate::error::{Error, Result};

/// How the target ratios are initialised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioInit {
    /// Each class starts at its own dataset ratio `r_c`.
    #[default]
    Dataset,
    Mean,
    Min,
    Max,
    Constant(f64),
}

/// Adaptive per-class target ratios.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioState {
    pub target: Vec<f64>,
    /// 1-based epoch these targets apply to.
    pub epoch: usize,
    pub clip: Option<(f64, f64)>,
    pub lambda: f64,
}

impl RatioState {
    fn clip_value(&self, v: f64) -> f64 {
        match self.clip {
            // the lower bound may be 0; keep targets strictly positive
            Some((lo, hi)) => v.clamp(lo, hi).max(f64::MIN_POSITIVE),
            None => v,
        }
    }
}

fn check_clip(clip: Option<(f64, f64)>) -> Result<()> {
    if let Some((lo, hi)) = clip {
        if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo) {
            return Err(Error::invalid(
                "clip",
                format!("need 0 <= low < high, got ({lo}, {hi})"),
            ));
        }
    }
    Ok(())
}

pub fn init_ratio_state(
    stats: &ClassStats,
    mode: RatioInit,
    lambda: f64,
    clip: Option<(f64, f64)>,
) -> Result<RatioState> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must be >= 0, got {lambda}"),
        ));
    }
    check_clip(clip)?;
    let c = stats.num_classes();
    if c == 0 {
        return Err(Error::Empty("class statistics"));
    }
    let ratios = stats.ratios();
    let defined: Vec<f64> = ratios.iter().flatten().copied().collect();
    let broadcast = |v: f64| vec![v; c];
    let target = match mode {
        RatioInit::Dataset => ratios
            .iter()
            .enumerate()
            .map(|(k, r)| r.ok_or(Error::UndefinedRatio(k)))
            .collect::<Result<Vec<_>>>()?,
        RatioInit::Constant(v) => {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    "ratio_init",
                    format!("constant must be positive, got {v}"),
                ));
            }
            broadcast(v)
        }
        _ if defined.is_empty() => return Err(Error::UndefinedRatio(0)),
        RatioInit::Mean => broadcast(defined.iter().sum::<f64>() / defined.len() as f64),
        RatioInit::Min => broadcast(defined.iter().copied().fold(f64::INFINITY, f64::min)),
        RatioInit::Max => broadcast(defined.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
    };
    let mut state = RatioState {
        target,
        epoch: 1,
        clip,
        lambda,
    };
    state.target = state.target.iter().map(|&v| state.clip_value(v)).collect();
    Ok(state)
}

/// `rbar_c <- exp(lambda * D_c) * rbar_c`, clipped when enabled; advances the epoch.
pub fn update_ratios(state: &RatioState, summary: &DivergenceSummary) -> Result<RatioState> {
    if summary.d_combined.len() != state.target.len() {
        return Err(Error::shape(
            "update_ratios",
            state.target.len(),
            summary.d_combined.len(),
        ));
    }
    if summary.d_combined.iter().any(|d| !d.is_finite()) {
        return Err(Error::NonFinite("divergence signal"));
    }
    let mut next = state.clone();
    for (r, &d) in next.target.iter_mut().zip(&summary.d_combined) {
        *r = state.clip_value((state.lambda * d).exp() * *r);
    }
    next.epoch += 1;
    Ok(next)
}
