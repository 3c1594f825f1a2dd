//! The training loop: mask generation, mini-batch SGD, per-epoch histograms
//! and ratio adaptation, plus the reweighting and undersampling baselines.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{compute_class_stats, undersample_epoch, ClassStats, MultiLabelDataset};
use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, Matrix};
use crate::metrics::{MetricsReport, ZeroDivision};
use crate::nnet::{LrSchedule, Mlp, Sgd};
use crate::objective::{
    effective_number_weights, inverse_frequency_weights, ClassWeights, LossKind,
};
use crate::plm::{
    build_histograms, divergences, init_ratio_state, update_ratios, ClassHistograms,
    DivergenceSummary, MaskCounts, MaskPlan, RatioInit, RatioState, DEFAULT_EPSILON, DEFAULT_TAU,
};
use crate::rng::{self, Domain};

/// Rows per chunk when predicting a whole dataset.
const PREDICT_CHUNK: usize = 2048;

/// Class reweighting of the loss.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Reweight {
    #[default]
    None,
    /// `(1 - beta) / (1 - beta^n)` per class.
    Effective {
        #[serde(default = "default_beta")]
        beta: f64,
    },
    /// `1 / n` per class.
    Inverse,
}

fn default_beta() -> f64 {
    Reweight::DEFAULT_BETA
}

impl Reweight {
    pub const DEFAULT_BETA: f64 = 0.9999;

    fn weights(&self, stats: &ClassStats) -> Result<ClassWeights> {
        match *self {
            Reweight::None => Ok(ClassWeights::uniform(stats.num_classes())),
            Reweight::Effective { beta } => effective_number_weights(&stats.n_pos, beta),
            Reweight::Inverse => inverse_frequency_weights(&stats.n_pos),
        }
    }
}

/// Which predictions feed the end-of-epoch histograms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HistogramSource {
    /// Each sample's prediction from the batch it was trained in.
    #[default]
    InLoop,
    /// A fresh forward pass over the epoch's samples after the last step.
    PostEpoch,
}

/// How the epoch's masks are produced. Both yield identical masks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskMode {
    /// The full mask matrix is drawn at the start of the epoch.
    #[default]
    Epoch,
    /// Masks are drawn per batch from the same per-row streams.
    Lazy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub hidden: Vec<usize>,
    pub schedule: LrSchedule,
    pub momentum: f64,
    pub plm: bool,
    pub lambda: f64,
    pub tau: usize,
    pub epsilon: f64,
    pub clip: Option<(f64, f64)>,
    pub ratio_init: RatioInit,
    pub loss: LossKind,
    pub reweight: Reweight,
    /// Per-class budget `S`; `None` trains on every sample.
    pub undersample: Option<usize>,
    pub seed: u64,
    pub threshold: f64,
    pub topk: Vec<usize>,
    /// Epochs whose output distributions are kept in the log.
    pub snapshot_epochs: Vec<usize>,
    pub zero_division: ZeroDivision,
    pub histogram_source: HistogramSource,
    pub mask_mode: MaskMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            hidden: vec![256, 128],
            schedule: LrSchedule::default(),
            momentum: 0.9,
            plm: true,
            lambda: 0.01,
            tau: DEFAULT_TAU,
            epsilon: DEFAULT_EPSILON,
            clip: None,
            ratio_init: RatioInit::Dataset,
            loss: LossKind::Bce,
            reweight: Reweight::None,
            undersample: None,
            seed: 0,
            threshold: 0.5,
            topk: Vec::new(),
            snapshot_epochs: Vec::new(),
            zero_division: ZeroDivision::One,
            histogram_source: HistogramSource::InLoop,
            mask_mode: MaskMode::Epoch,
        }
    }
}

impl TrainConfig {
    /// Every violated constraint, as `(field, reason)`.
    pub fn problems(&self) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &'static str, reason: String| {
            if !ok {
                out.push((field, reason));
            }
        };
        check(
            self.epochs >= 1,
            "epochs",
            format!("must be >= 1, got {}", self.epochs),
        );
        check(
            self.batch_size >= 1,
            "batch_size",
            format!("must be >= 1, got {}", self.batch_size),
        );
        check(
            !self.hidden.contains(&0),
            "hidden",
            format!("layer sizes must be positive, got {:?}", self.hidden),
        );
        if let Err(e) = self.schedule.validate() {
            check(false, "schedule", e.to_string());
        }
        check(
            (0.0..1.0).contains(&self.momentum),
            "momentum",
            format!("must lie in [0, 1), got {}", self.momentum),
        );
        check(
            self.lambda.is_finite() && self.lambda >= 0.0,
            "lambda",
            format!("must be >= 0, got {}", self.lambda),
        );
        check(
            self.tau >= 2,
            "tau",
            format!("must be >= 2, got {}", self.tau),
        );
        check(
            self.epsilon.is_finite() && self.epsilon > 0.0,
            "epsilon",
            format!("must be positive, got {}", self.epsilon),
        );
        if let Some((lo, hi)) = self.clip {
            check(
                lo.is_finite() && hi.is_finite() && lo >= 0.0 && hi > lo,
                "clip",
                format!("need 0 <= low < high, got ({lo}, {hi})"),
            );
        }
        if let RatioInit::Constant(v) = self.ratio_init {
            check(
                v.is_finite() && v > 0.0,
                "ratio_init",
                format!("constant must be positive, got {v}"),
            );
        }
        if let Err(e) = self.loss.validate() {
            check(false, "loss", e.to_string());
        }
        if let Reweight::Effective { beta } = self.reweight {
            check(
                (0.0..1.0).contains(&beta),
                "reweight",
                format!("beta must lie in [0, 1), got {beta}"),
            );
        }
        if let Some(s) = self.undersample {
            check(s >= 1, "undersample", "budget must be >= 1".to_string());
        }
        check(
            (0.0..=1.0).contains(&self.threshold),
            "threshold",
            format!("must lie in [0, 1], got {}", self.threshold),
        );
        check(
            !self.topk.contains(&0),
            "topk",
            "K must be >= 1".to_string(),
        );
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            return Ok(());
        }
        let joined: Vec<String> = problems.iter().map(|(f, r)| format!("{f}: {r}")).collect();
        Err(Error::invalid("config", joined.join("; ")))
    }
}

/// One epoch of the run log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean masked, weighted loss (the optimised quantity).
    pub loss: f64,
    /// Mean plain loss over every label.
    pub unmasked_loss: f64,
    /// Target ratios the epoch's masks were drawn from (PLM only).
    pub ratio: Option<Vec<f64>>,
    /// Targets after this epoch's update (PLM only).
    pub next_ratio: Option<Vec<f64>>,
    pub divergence: Option<DivergenceSummary>,
    pub mask_counts: MaskCounts,
    /// Number of samples trained on.
    pub visited: usize,
    pub snapshot: Option<Vec<ClassHistograms>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub train_stats: ClassStats,
    pub epochs: Vec<EpochRecord>,
}

impl RunLog {
    /// Ratio vectors used in each epoch, for PLM runs.
    pub fn trajectory(&self) -> Option<Vec<Vec<f64>>> {
        self.epochs.iter().map(|e| e.ratio.clone()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub log: RunLog,
    pub report: MetricsReport,
}

/// Train and evaluate.
pub fn run_training(
    config: &TrainConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
) -> Result<TrainOutcome> {
    run_training_observed(config, train, test, |_, _, _| {})
}

/// As [`run_training`], calling `observe(epoch, batch, model)` after every step.
pub fn run_training_observed<F>(
    config: &TrainConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
    mut observe: F,
) -> Result<TrainOutcome>
where
    F: FnMut(usize, usize, &Mlp),
{
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let c = train.num_classes();
    if test.num_classes() != c {
        return Err(Error::shape("test classes", c, test.num_classes()));
    }
    if test.feature_dim() != train.feature_dim() {
        return Err(Error::shape(
            "test features",
            train.feature_dim(),
            test.feature_dim(),
        ));
    }

    let labels = train.labels();
    let full_stats = compute_class_stats(labels)?;
    let weights = config.reweight.weights(&full_stats)?;

    let mut dims = vec![train.feature_dim()];
    dims.extend(&config.hidden);
    dims.push(c);
    let mut model = Mlp::new(&dims, rng::derive_seed(config.seed, Domain::Init, 0))?;
    let mut sgd = Sgd::new(&model, config.momentum)?;

    let mut state: Option<RatioState> = if config.plm {
        Some(init_ratio_state(
            &full_stats,
            config.ratio_init,
            config.lambda,
            config.clip,
        )?)
    } else {
        None
    };

    let all: Vec<usize> = (0..train.len()).collect();
    let mut records = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let lr = config.schedule.lr_at(epoch);
        let visited = match config.undersample {
            Some(budget) => undersample_epoch(
                labels,
                budget,
                rng::derive_seed(config.seed, Domain::Undersample, epoch as u64),
            )?,
            None => all.clone(),
        };
        let epoch_labels = labels.select_rows(&visited);
        let plan = match &state {
            Some(st) => {
                let stats = if config.undersample.is_some() {
                    compute_class_stats(&epoch_labels)?
                } else {
                    full_stats.clone()
                };
                MaskPlan::new(&stats, st)?
            }
            None => MaskPlan::keep_all(c),
        };
        let mask_seed = rng::derive_seed(config.seed, Domain::Mask, epoch as u64);
        let epoch_masks = match config.mask_mode {
            MaskMode::Epoch => Some(plan.masks_for(&epoch_labels, &visited, mask_seed)?),
            MaskMode::Lazy => None,
        };

        let mut order: Vec<usize> = (0..visited.len()).collect();
        order.shuffle(&mut rng::stream(config.seed, Domain::Shuffle, epoch as u64));

        let mut probs = Matrix::zeros(visited.len(), c);
        let mut counts = MaskCounts::new(c);
        let (mut loss_sum, mut unmasked_sum) = (0.0, 0.0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let idx: Vec<usize> = chunk.iter().map(|&k| visited[k]).collect();
            let x = train.features(&idx);
            let y = labels.select_rows(&idx);
            let g = match &epoch_masks {
                Some(m) => m.select_rows(chunk),
                None => plan.masks_for(&y, &idx, mask_seed)?,
            };
            let out = model
                .loss_and_gradients(&x, &y, &g, &weights, config.loss)
                .map_err(|e| match e {
                    Error::NonFinite(_) => Error::NonFiniteLoss { epoch, batch: b },
                    other => other,
                })?;
            if !out.loss.is_finite() || !out.grads.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b });
            }
            sgd.step(&mut model, &out.grads, lr)?;
            observe(epoch, b, &model);

            for (r, &k) in chunk.iter().enumerate() {
                probs.row_mut(k).copy_from_slice(out.probs.row(r));
            }
            counts.add(&y, &g);
            loss_sum += out.loss * chunk.len() as f64;
            unmasked_sum += out.unmasked_loss * chunk.len() as f64;
        }

        if config.histogram_source == HistogramSource::PostEpoch {
            probs = predict_rows(&model, train, &visited)?;
        }
        let snapshot = if config.snapshot_epochs.contains(&epoch) {
            Some(snapshot_distributions(&epoch_labels, &probs, config.tau)?)
        } else {
            None
        };

        let (ratio, next_ratio, divergence) = match state.take() {
            Some(st) => {
                let hists = build_histograms(&epoch_labels, &probs, config.tau)?;
                let summary = divergences(&hists, config.epsilon)?;
                let next = update_ratios(&st, &summary)?;
                let used = st.target.clone();
                let after = next.target.clone();
                state = Some(next);
                (Some(used), Some(after), Some(summary))
            }
            None => (None, None, None),
        };

        let n = visited.len() as f64;
        records.push(EpochRecord {
            epoch,
            lr,
            loss: loss_sum / n,
            unmasked_loss: unmasked_sum / n,
            ratio,
            next_ratio,
            divergence,
            mask_counts: counts,
            visited: visited.len(),
            snapshot,
        });
    }

    let report = evaluate(
        &model,
        test,
        config.threshold,
        &full_stats,
        &config.topk,
        config.zero_division,
    )?;
    Ok(TrainOutcome {
        model,
        log: RunLog {
            train_stats: full_stats,
            epochs: records,
        },
        report,
    })
}

fn predict_rows(model: &Mlp, data: &MultiLabelDataset, rows: &[usize]) -> Result<Matrix> {
    let c = model.num_classes();
    let mut out = Matrix::zeros(rows.len(), c);
    for (k, chunk) in rows.chunks(PREDICT_CHUNK).enumerate() {
        let p = model.forward(&data.features(chunk))?;
        let start = k * PREDICT_CHUNK * c;
        out.as_mut_slice()[start..start + p.as_slice().len()].copy_from_slice(p.as_slice());
    }
    Ok(out)
}

/// Probabilities for every sample of `data`, computed in bounded chunks.
pub fn predict(model: &Mlp, data: &MultiLabelDataset) -> Result<Matrix> {
    let rows: Vec<usize> = (0..data.len()).collect();
    predict_rows(model, data, &rows)
}

/// Threshold the model's probabilities (`p >= threshold` is positive) and score them.
pub fn evaluate(
    model: &Mlp,
    test: &MultiLabelDataset,
    threshold: f64,
    train_stats: &ClassStats,
    topk: &[usize],
    zero: ZeroDivision,
) -> Result<MetricsReport> {
    if model.num_classes() != test.num_classes() {
        return Err(Error::shape(
            "evaluate",
            test.num_classes(),
            model.num_classes(),
        ));
    }
    let probs = predict(model, test)?;
    evaluate_probs(&probs, test.labels(), threshold, train_stats, topk, zero)
}

pub fn evaluate_probs(
    probs: &Matrix,
    truth: &BinaryMatrix,
    threshold: f64,
    train_stats: &ClassStats,
    topk: &[usize],
    zero: ZeroDivision,
) -> Result<MetricsReport> {
    let pred = BinaryMatrix::threshold(probs, threshold);
    MetricsReport::compute(truth, &pred, train_stats, topk, zero)
}

/// The four per-class distributions, for logging and plotting.
pub fn snapshot_distributions(
    labels: &BinaryMatrix,
    probs: &Matrix,
    tau: usize,
) -> Result<Vec<ClassHistograms>> {
    build_histograms(labels, probs, tau)
}
