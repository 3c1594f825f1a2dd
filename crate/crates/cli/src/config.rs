//! Experiment configuration: one TOML file with `[dataset]`, `[trainer]`,
//! `[output]` and an optional `[sweep]` table.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plm::objective::LossKind;
use plm::plm::RatioInit;
use plm::trainer::{Reweight, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Idx,
    Synthetic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: Source,
    /// Where `train.plmd`, `test.plmd` and `stats.json` live.
    pub dir: PathBuf,
    #[serde(default = "default_classes")]
    pub num_classes: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    /// Head-class count of the long-tail profile. For IDX data it defaults to
    /// the number of available class-0 digits.
    #[serde(default)]
    pub max_count: Option<usize>,
    /// Explicit per-class training counts, replacing the exponential profile.
    #[serde(default)]
    pub counts: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,

    /// Directory holding the four MNIST IDX files, plain or gzipped.
    #[serde(default)]
    pub mnist_dir: Option<PathBuf>,
    /// Compose test pairs from only the first `test_digits` test digits.
    #[serde(default)]
    pub test_digits: Option<usize>,

    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    #[serde(default = "default_cooccurrence")]
    pub cooccurrence: f64,
    #[serde(default = "default_noise")]
    pub noise: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
}

fn default_classes() -> usize {
    10
}
fn default_rho() -> f64 {
    100.0
}
fn default_feature_dim() -> usize {
    32
}
fn default_cooccurrence() -> f64 {
    0.1
}
fn default_noise() -> f64 {
    1.0
}
fn default_separation() -> f64 {
    0.5
}
fn default_test_per_class() -> usize {
    200
}

impl DatasetConfig {
    pub fn train_path(&self) -> PathBuf {
        self.dir.join("train.plmd")
    }

    pub fn test_path(&self) -> PathBuf {
        self.dir.join("test.plmd")
    }

    pub fn stats_path(&self) -> PathBuf {
        self.dir.join("stats.json")
    }

    fn problems(&self, out: &mut Vec<String>) {
        let mut check = |ok: bool, field: &str, reason: String| {
            if !ok {
                out.push(format!("dataset.{field}: {reason}"));
            }
        };
        check(
            self.num_classes >= 2,
            "num_classes",
            format!("must be >= 2, got {}", self.num_classes),
        );
        check(
            self.rho.is_finite() && self.rho >= 1.0,
            "rho",
            format!("must be >= 1, got {}", self.rho),
        );
        check(
            self.max_count != Some(0),
            "max_count",
            "must be positive".into(),
        );
        if let Some(c) = &self.counts {
            check(
                c.len() == self.num_classes,
                "counts",
                format!("expected {} entries, got {}", self.num_classes, c.len()),
            );
            check(
                !c.contains(&0),
                "counts",
                "every count must be positive".into(),
            );
        }
        match self.source {
            Source::Idx => {
                check(
                    self.mnist_dir.is_some(),
                    "mnist_dir",
                    "required when source = \"idx\"".into(),
                );
                check(
                    self.num_classes == 10,
                    "num_classes",
                    "IDX digits have exactly 10 classes".into(),
                );
                check(
                    self.test_digits != Some(0),
                    "test_digits",
                    "must be positive".into(),
                );
            }
            Source::Synthetic => {
                check(
                    self.feature_dim >= 1,
                    "feature_dim",
                    "must be positive".into(),
                );
                check(
                    (0.0..=1.0).contains(&self.cooccurrence),
                    "cooccurrence",
                    format!("must lie in [0, 1], got {}", self.cooccurrence),
                );
                check(
                    self.noise.is_finite() && self.noise >= 0.0,
                    "noise",
                    format!("must be >= 0, got {}", self.noise),
                );
                check(
                    self.separation.is_finite() && self.separation >= 0.0,
                    "separation",
                    format!("must be >= 0, got {}", self.separation),
                );
                check(
                    self.test_per_class >= 1,
                    "test_per_class",
                    "must be positive".into(),
                );
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Export {
    Trajectory,
    Distributions,
    Metrics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub run_dir: PathBuf,
    /// CSV files written next to the JSON results.
    #[serde(default = "all_exports")]
    pub exports: Vec<Export>,
    /// Save the trained weights as `model.bin`.
    #[serde(default = "yes")]
    pub checkpoint: bool,
}

fn all_exports() -> Vec<Export> {
    vec![Export::Trajectory, Export::Distributions, Export::Metrics]
}

fn yes() -> bool {
    true
}

/// Axes of a sweep; the grid is their Cartesian product. An empty axis keeps
/// the `[trainer]` value.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub lambda: Vec<f64>,
    pub ratio_init: Vec<RatioInit>,
    pub plm: Vec<bool>,
    pub loss: Vec<LossKind>,
    pub reweight: Vec<Reweight>,
    pub undersample: Vec<usize>,
    pub seeds: Vec<u64>,
}

impl SweepConfig {
    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
            && self.ratio_init.is_empty()
            && self.plm.is_empty()
            && self.loss.is_empty()
            && self.reweight.is_empty()
            && self.undersample.is_empty()
            && self.seeds.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub trainer: TrainConfig,
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

/// Values given on the command line or through `PLM_SEED` / `PLM_RUN_DIR`
/// instead of the file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub run_dir: Option<PathBuf>,
}

/// A parsed config together with the exact bytes it came from.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub text: String,
    pub overrides: Overrides,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("malformed config")?;
        let problems = cfg.problems();
        if !problems.is_empty() {
            bail!(
                "invalid config ({} problem{}):\n  {}",
                problems.len(),
                if problems.len() == 1 { "" } else { "s" },
                problems.join("\n  ")
            );
        }
        Ok(cfg)
    }

    /// Every constraint violation, each prefixed by its `section.field`.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.dataset.problems(&mut out);
        out.extend(
            self.trainer
                .problems()
                .into_iter()
                .map(|(field, reason)| format!("trainer.{field}: {reason}")),
        );
        let max_k = self.dataset.num_classes;
        if let Some(&k) = self.trainer.topk.iter().find(|&&k| k > max_k) {
            out.push(format!(
                "trainer.topk: K = {k} exceeds num_classes = {max_k}"
            ));
        }
        if let Some(&e) = self
            .trainer
            .snapshot_epochs
            .iter()
            .find(|&&e| e == 0 || e > self.trainer.epochs)
        {
            out.push(format!(
                "trainer.snapshot_epochs: epoch {e} outside 1..={}",
                self.trainer.epochs
            ));
        }
        if self.output.run_dir.as_os_str().is_empty() {
            out.push("output.run_dir: must not be empty".into());
        }
        if let Some(s) = &self.sweep {
            if s.is_empty() {
                out.push("sweep: grid is empty".into());
            }
            if let Some(l) = s.lambda.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                out.push(format!("sweep.lambda: must be >= 0, got {l}"));
            }
            if s.undersample.contains(&0) {
                out.push("sweep.undersample: budget must be >= 1".into());
            }
        }
        out
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.trainer.seed = seed;
        }
        if let Some(dir) = &o.run_dir {
            self.output.run_dir = dir.clone();
        }
    }
}

/// Read, validate and apply overrides.
pub fn load(path: &Path, overrides: Overrides) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut config =
        ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    config.apply(&overrides);
    Ok(LoadedConfig {
        config,
        text,
        overrides,
    })
}
