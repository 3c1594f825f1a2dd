//! Dataset construction and the on-disk layout of a built dataset.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plm::dataset::{
    build_longtail_subset, compose_multimnist_test, compose_multimnist_train, compute_class_stats,
    generate_synthetic, imbalance_factor, load_idx, read_dataset, write_dataset, ClassStats,
    DigitSet, LongTailProfile, MultiLabelDataset, SyntheticSpec,
};
use plm::rng::{derive_seed, Domain};
use serde::{Deserialize, Serialize};

use crate::config::{DatasetConfig, Source};

/// Summary of one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub samples: usize,
    pub n_pos: Vec<usize>,
    /// `n_pos / n_neg` per class; `null` when a class has no negatives.
    pub ratio: Vec<Option<f64>>,
    pub rho: Option<f64>,
}

impl SplitStats {
    fn of(ds: &MultiLabelDataset) -> Result<(Self, ClassStats)> {
        let stats = compute_class_stats(ds.labels())?;
        let rho = imbalance_factor(&stats).ok();
        Ok((
            Self {
                samples: ds.len(),
                n_pos: stats.n_pos.clone(),
                ratio: stats.ratios(),
                rho,
            },
            stats,
        ))
    }
}

/// The `stats.json` sidecar written next to the containers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsSidecar {
    pub source: Source,
    pub num_classes: usize,
    /// Single-label counts the training set was drawn with.
    pub profile_counts: Vec<usize>,
    pub profile_rho: f64,
    pub train: SplitStats,
    pub test: SplitStats,
}

impl StatsSidecar {
    pub fn read(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
    }

    /// Class statistics of the training split, as used for top-K views.
    pub fn train_stats(&self) -> Result<ClassStats> {
        Ok(ClassStats::from_counts(
            self.train.n_pos.clone(),
            self.train.samples,
        )?)
    }
}

fn profile(cfg: &DatasetConfig, head_available: Option<usize>) -> Result<LongTailProfile> {
    if let Some(counts) = &cfg.counts {
        return Ok(LongTailProfile::from_counts(counts.clone())?);
    }
    let max_count = match (cfg.max_count, head_available) {
        (Some(m), _) => m,
        (None, Some(m)) => m,
        (None, None) => 1000,
    };
    Ok(LongTailProfile::exponential(
        cfg.num_classes,
        cfg.rho,
        max_count,
    )?)
}

fn find_idx(dir: &Path, stem: &str) -> Result<PathBuf> {
    let plain = dir.join(stem);
    let gz = dir.join(format!("{stem}.gz"));
    match (plain.is_file(), gz.is_file()) {
        (true, _) => Ok(plain),
        (false, true) => Ok(gz),
        _ => bail!("{} not found (plain or .gz)", plain.display()),
    }
}

fn load_digits(dir: &Path, images: &str, labels: &str) -> Result<DigitSet> {
    let (grids, labels) = load_idx(find_idx(dir, images)?, find_idx(dir, labels)?)?;
    Ok(DigitSet::new(grids, labels, 10)?)
}

/// Build both splits in memory.
pub fn build(
    cfg: &DatasetConfig,
) -> Result<(MultiLabelDataset, MultiLabelDataset, LongTailProfile)> {
    match cfg.source {
        Source::Synthetic => {
            let profile = profile(cfg, None)?;
            let mut spec = SyntheticSpec::new(cfg.num_classes, cfg.feature_dim, cfg.cooccurrence);
            spec.noise = cfg.noise;
            spec.separation = cfg.separation;
            spec.prototype_seed = cfg.seed;
            let train = generate_synthetic(
                &spec,
                profile.counts(),
                derive_seed(cfg.seed, Domain::Synthetic, 1),
            )?;
            let test = generate_synthetic(
                &spec,
                &vec![cfg.test_per_class; cfg.num_classes],
                derive_seed(cfg.seed, Domain::Synthetic, 2),
            )?;
            Ok((train, test, profile))
        }
        Source::Idx => {
            let dir = cfg.mnist_dir.as_deref().expect("validated");
            let digits = load_digits(dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte")?;
            let zeros = digits.labels.iter().filter(|&&l| l == 0).count();
            let profile = profile(cfg, Some(zeros))?;
            let subset = build_longtail_subset(&digits.labels, &profile, cfg.seed)?;
            let train = compose_multimnist_train(&digits.subset(&subset), cfg.seed)?;
            let mut test_digits =
                load_digits(dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte")?;
            if let Some(n) = cfg.test_digits {
                let keep: Vec<usize> = (0..n.min(test_digits.len())).collect();
                test_digits = test_digits.subset(&keep);
            }
            let test = compose_multimnist_test(&test_digits, cfg.seed)?;
            Ok((train, test, profile))
        }
    }
}

/// Build and persist both splits plus the stats sidecar.
pub fn build_and_write(cfg: &DatasetConfig) -> Result<StatsSidecar> {
    let (train, test, profile) = build(cfg)?;
    fs::create_dir_all(&cfg.dir).with_context(|| format!("cannot create {}", cfg.dir.display()))?;
    write_dataset(cfg.train_path(), &train)?;
    write_dataset(cfg.test_path(), &test)?;
    let sidecar = StatsSidecar {
        source: cfg.source,
        num_classes: cfg.num_classes,
        profile_counts: profile.counts().to_vec(),
        profile_rho: profile.realized_rho(),
        train: SplitStats::of(&train)?.0,
        test: SplitStats::of(&test)?.0,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    fs::write(cfg.stats_path(), json + "\n")
        .with_context(|| format!("cannot write {}", cfg.stats_path().display()))?;
    Ok(sidecar)
}

/// Load a previously built dataset.
pub fn load(cfg: &DatasetConfig) -> Result<(MultiLabelDataset, MultiLabelDataset, StatsSidecar)> {
    let train_path = cfg.train_path();
    if !train_path.is_file() {
        bail!(
            "{} does not exist; run `plm dataset-build` first",
            train_path.display()
        );
    }
    let train = read_dataset(&train_path)?;
    let test = read_dataset(cfg.test_path())?;
    let sidecar = StatsSidecar::read(&cfg.stats_path())?;
    if train.num_classes() != cfg.num_classes {
        bail!(
            "{} has {} classes but the config says {}",
            train_path.display(),
            train.num_classes(),
            cfg.num_classes
        );
    }
    Ok((train, test, sidecar))
}
