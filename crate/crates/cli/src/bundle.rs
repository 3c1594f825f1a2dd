//! The run directory: config echo, results, run log, checkpoint and the
//! plot-ready CSV exports.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use plm::metrics::MetricsReport;
use plm::nnet::save_checkpoint;
use plm::plm::ProbabilityHistogram;
use plm::trainer::{EpochRecord, RunLog, TrainConfig, TrainOutcome};
use serde::{Deserialize, Serialize};

use crate::config::{Export, Overrides};

pub const CONFIG_ECHO: &str = "config.toml";
pub const RESULTS: &str = "results.json";
pub const EPOCHS: &str = "epochs.ndjson";
pub const TRAJECTORY: &str = "trajectory.csv";
pub const DISTRIBUTIONS: &str = "distributions.csv";
pub const METRICS: &str = "metrics.csv";
pub const MODEL: &str = "model.bin";
pub const RESULTS_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub dir: PathBuf,
    pub train_samples: usize,
    pub test_samples: usize,
    pub num_classes: usize,
    pub train_n_pos: Vec<usize>,
    pub train_rho: Option<f64>,
}

/// `results.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Results {
    pub format: u32,
    /// The sweep cell this run belongs to, if any.
    pub cell: Option<String>,
    pub overrides: Overrides,
    /// Trainer settings after overrides and sweep substitutions.
    pub trainer: TrainConfig,
    pub dataset: DatasetSummary,
    pub epochs: usize,
    pub final_ratio: Option<Vec<f64>>,
    pub final_loss: f64,
    pub metrics: MetricsReport,
}

impl Results {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RESULTS);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no results bundle at {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
    }
}

pub struct Bundle<'a> {
    pub dir: &'a Path,
    pub config_text: &'a str,
    pub exports: &'a [Export],
    pub checkpoint: bool,
}

impl Bundle<'_> {
    pub fn write(&self, results: &Results, outcome: &TrainOutcome) -> Result<()> {
        fs::create_dir_all(self.dir)
            .with_context(|| format!("cannot create {}", self.dir.display()))?;
        write_file(&self.dir.join(CONFIG_ECHO), self.config_text.as_bytes())?;
        write_json(&self.dir.join(RESULTS), results)?;
        write_epochs(&self.dir.join(EPOCHS), &outcome.log)?;
        if self.checkpoint {
            save_checkpoint(self.dir.join(MODEL), &outcome.model)?;
        }
        write_exports(self.dir, results, &outcome.log, self.exports)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn write_epochs(path: &Path, log: &RunLog) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    );
    for e in &log.epochs {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Read `epochs.ndjson` back into a run log.
pub fn read_epochs(dir: &Path, results: &Results) -> Result<RunLog> {
    let path = dir.join(EPOCHS);
    let file = File::open(&path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut epochs = Vec::new();
    for (k, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: EpochRecord = serde_json::from_str(&line)
            .with_context(|| format!("{}: line {}", path.display(), k + 1))?;
        epochs.push(e);
    }
    let train_stats = plm::dataset::ClassStats::from_counts(
        results.dataset.train_n_pos.clone(),
        results.dataset.train_samples,
    )?;
    Ok(RunLog {
        train_stats,
        epochs,
    })
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub epoch: usize,
    pub class: usize,
    pub ratio: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionRow {
    pub epoch: usize,
    pub class: usize,
    pub side: String,
    pub bin: usize,
    pub mass: f64,
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scope: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact_match: Option<f64>,
}

/// The ratio each epoch's masks were drawn from; empty without PLM.
pub fn trajectory_rows(log: &RunLog) -> Vec<TrajectoryRow> {
    log.epochs
        .iter()
        .filter_map(|e| e.ratio.as_ref().map(|r| (e.epoch, r)))
        .flat_map(|(epoch, r)| {
            r.iter()
                .enumerate()
                .map(move |(class, &ratio)| TrajectoryRow {
                    epoch,
                    class,
                    ratio,
                })
        })
        .collect()
}

/// Histogram masses of the snapshot epochs. A side with no samples that epoch
/// contributes no rows.
pub fn distribution_rows(log: &RunLog) -> Vec<DistributionRow> {
    let mut rows = Vec::new();
    for e in &log.epochs {
        let Some(snap) = &e.snapshot else { continue };
        for (class, h) in snap.iter().enumerate() {
            let sides: [(&str, &Option<ProbabilityHistogram>); 4] = [
                ("pos_pred", &h.pos_pred),
                ("pos_truth", &h.pos_truth),
                ("neg_pred", &h.neg_pred),
                ("neg_truth", &h.neg_truth),
            ];
            for (side, hist) in sides {
                let Some(hist) = hist else { continue };
                for (bin, &mass) in hist.mass.iter().enumerate() {
                    rows.push(DistributionRow {
                        epoch: e.epoch,
                        class,
                        side: side.to_string(),
                        bin,
                        mass,
                    });
                }
            }
        }
    }
    rows
}

pub fn metrics_rows(m: &MetricsReport) -> Vec<MetricsRow> {
    let mut rows = vec![MetricsRow {
        scope: "macro".into(),
        precision: m.macro_precision,
        recall: m.macro_recall,
        f1: m.macro_f1,
        exact_match: Some(m.exact_match),
    }];
    for (k, t) in &m.topk {
        rows.push(MetricsRow {
            scope: format!("top{k}"),
            precision: t.precision,
            recall: t.recall,
            f1: t.f1,
            exact_match: None,
        });
    }
    for c in 0..m.precision.len() {
        rows.push(MetricsRow {
            scope: format!("class{c}"),
            precision: m.precision[c],
            recall: m.recall[c],
            f1: m.f1[c],
            exact_match: None,
        });
    }
    rows
}

fn write_csv<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_exports(dir: &Path, results: &Results, log: &RunLog, which: &[Export]) -> Result<()> {
    for export in which {
        match export {
            Export::Trajectory => write_csv(
                &dir.join(TRAJECTORY),
                &["epoch", "class", "ratio"],
                &trajectory_rows(log),
            )?,
            Export::Distributions => write_csv(
                &dir.join(DISTRIBUTIONS),
                &["epoch", "class", "side", "bin", "mass"],
                &distribution_rows(log),
            )?,
            Export::Metrics => write_csv(
                &dir.join(METRICS),
                &["scope", "precision", "recall", "f1", "exact_match"],
                &metrics_rows(&results.metrics),
            )?,
        }
    }
    Ok(())
}

/// Regenerate every CSV of an existing run directory.
pub fn export_plots(dir: &Path) -> Result<()> {
    if !dir.join(RESULTS).is_file() {
        bail!("{} holds no results bundle", dir.display());
    }
    let results = Results::read(dir)?;
    let log = read_epochs(dir, &results)?;
    write_exports(
        dir,
        &results,
        &log,
        &[Export::Trajectory, Export::Distributions, Export::Metrics],
    )
}
