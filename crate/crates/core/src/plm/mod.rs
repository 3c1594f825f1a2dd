//! Partial label masking.
//!
//! Each class `c` has a dataset ratio `r_c = n_c+ / n_c-` and an adaptive
//! target ratio `rbar_c`. Once per epoch every label is gated:
//!
//! - `r_c > rbar_c`, positive label: kept with probability `rbar_c / r_c`
//! - `r_c < rbar_c`, negative label: kept with probability `r_c / rbar_c`
//! - otherwise: always kept
//!
//! so the surviving positive:negative ratio is `rbar_c`. After the epoch the
//! predicted probabilities are binned per class and side, compared against the
//! ground-truth point masses with a smoothed KL divergence, the divergences are
//! standardised across classes, and each target ratio moves by
//! `rbar_c <- exp(lambda * D_c) * rbar_c` with `D_c = D~+_c - D~-_c`.

mod divergence;
mod histogram;
mod masks;
mod ratio;

pub use divergence::{
    divergences, kl_divergence, normalize_divergences, DivergenceSummary, DEFAULT_EPSILON,
};
pub use histogram::{
    bin_index, build_histograms, ClassHistograms, ProbabilityHistogram, DEFAULT_TAU,
};
pub use masks::{generate_masks, KeepRule, MaskCounts, MaskPlan};
pub use ratio::{init_ratio_state, update_ratios, RatioInit, RatioState};
