use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use plm::dataset::MultiLabelDataset;
use plm::nnet::load_checkpoint;
use plm::objective::LossKind;
use plm::plm::RatioInit;
use plm::trainer::{evaluate, run_training, Reweight, TrainConfig};

use crate::bundle::{self, Bundle, DatasetSummary, Results, MODEL};
use crate::config::{ExperimentConfig, LoadedConfig};
use crate::data::{self, StatsSidecar};

pub fn dataset_build(cfg: &LoadedConfig) -> Result<()> {
    let d = &cfg.config.dataset;
    let s = data::build_and_write(d)?;
    println!(
        "wrote {} ({} train, {} test samples); train rho {}",
        d.dir.display(),
        s.train.samples,
        s.test.samples,
        s.train
            .rho
            .map_or_else(|| "undefined".to_string(), |r| format!("{r:.2}")),
    );
    Ok(())
}

fn summary(
    cfg: &ExperimentConfig,
    train: &MultiLabelDataset,
    test: &MultiLabelDataset,
    s: &StatsSidecar,
) -> DatasetSummary {
    DatasetSummary {
        dir: cfg.dataset.dir.clone(),
        train_samples: train.len(),
        test_samples: test.len(),
        num_classes: train.num_classes(),
        train_n_pos: s.train.n_pos.clone(),
        train_rho: s.train.rho,
    }
}

/// Train one configuration and write its bundle into `dir`.
fn train_into(
    cfg: &LoadedConfig,
    trainer: &TrainConfig,
    cell: Option<String>,
    dir: &Path,
    data: &(MultiLabelDataset, MultiLabelDataset, StatsSidecar),
) -> Result<Results> {
    let (train, test, sidecar) = data;
    let outcome = run_training(trainer, train, test)?;
    let last = outcome.log.epochs.last().expect("at least one epoch");
    let results = Results {
        format: bundle::RESULTS_FORMAT,
        cell,
        overrides: cfg.overrides.clone(),
        trainer: trainer.clone(),
        dataset: summary(&cfg.config, train, test, sidecar),
        epochs: outcome.log.epochs.len(),
        final_ratio: last.next_ratio.clone(),
        final_loss: last.loss,
        metrics: outcome.report.clone(),
    };
    Bundle {
        dir,
        config_text: &cfg.text,
        exports: &cfg.config.output.exports,
        checkpoint: cfg.config.output.checkpoint,
    }
    .write(&results, &outcome)?;
    Ok(results)
}

fn headline(m: &plm::metrics::MetricsReport) -> String {
    let mut s = format!(
        "P {:.4}  R {:.4}  F1 {:.4}  0-1 {:.4}",
        m.macro_precision, m.macro_recall, m.macro_f1, m.exact_match
    );
    for (k, t) in &m.topk {
        let _ = write!(s, "  top{k} R {:.4} F1 {:.4}", t.recall, t.f1);
    }
    s
}

pub fn train(cfg: &LoadedConfig) -> Result<()> {
    let data = data::load(&cfg.config.dataset)?;
    let dir = &cfg.config.output.run_dir;
    let r = train_into(cfg, &cfg.config.trainer, None, dir, &data)?;
    println!("{}: {}", dir.display(), headline(&r.metrics));
    Ok(())
}

pub fn evaluate_run(
    cfg: &LoadedConfig,
    model: Option<&Path>,
    threshold: Option<f64>,
) -> Result<()> {
    let (_, test, sidecar) = data::load(&cfg.config.dataset)?;
    let dir = &cfg.config.output.run_dir;
    let path = model.map_or_else(|| dir.join(MODEL), Path::to_path_buf);
    let model = load_checkpoint(&path).with_context(|| format!("loading {}", path.display()))?;
    let t = &cfg.config.trainer;
    let threshold = threshold.unwrap_or(t.threshold);
    if !(0.0..=1.0).contains(&threshold) {
        anyhow::bail!("threshold must lie in [0, 1], got {threshold}");
    }
    let report = evaluate(
        &model,
        &test,
        threshold,
        &sidecar.train_stats()?,
        &t.topk,
        t.zero_division,
    )?;
    let out = dir.join("evaluation.json");
    bundle::write_json(&out, &report)?;
    println!("{}: {}", out.display(), headline(&report));
    Ok(())
}

/// One grid point of a sweep.
#[derive(Clone, Debug)]
pub struct Cell {
    pub seed: u64,
    pub trainer: TrainConfig,
}

fn ratio_init_label(r: RatioInit) -> String {
    match r {
        RatioInit::Dataset => "dataset".into(),
        RatioInit::Mean => "mean".into(),
        RatioInit::Min => "min".into(),
        RatioInit::Max => "max".into(),
        RatioInit::Constant(v) => format!("constant({v})"),
    }
}

fn loss_label(l: LossKind) -> String {
    match l {
        LossKind::Bce => "bce".into(),
        LossKind::Focal { gamma } => format!("focal({gamma})"),
    }
}

fn reweight_label(r: Reweight) -> String {
    match r {
        Reweight::None => "none".into(),
        Reweight::Effective { beta } => format!("effective({beta})"),
        Reweight::Inverse => "inverse".into(),
    }
}

impl Cell {
    pub fn key(&self) -> String {
        let t = &self.trainer;
        format!(
            "seed={} lambda={} init={} plm={} loss={} reweight={} undersample={}",
            self.seed,
            t.lambda,
            ratio_init_label(t.ratio_init),
            t.plm,
            loss_label(t.loss),
            reweight_label(t.reweight),
            t.undersample.map_or("off".to_string(), |s| s.to_string()),
        )
    }
}

fn axis<T: Clone>(values: &[T], fallback: T) -> Vec<T> {
    if values.is_empty() {
        vec![fallback]
    } else {
        values.to_vec()
    }
}

/// The Cartesian product of the sweep axes, seeds outermost.
pub fn grid(cfg: &ExperimentConfig) -> Vec<Cell> {
    let base = &cfg.trainer;
    let s = cfg.sweep.clone().unwrap_or_default();
    let mut cells = Vec::new();
    for seed in axis(&s.seeds, base.seed) {
        for &lambda in &axis(&s.lambda, base.lambda) {
            for &ratio_init in &axis(&s.ratio_init, base.ratio_init) {
                for &plm in &axis(&s.plm, base.plm) {
                    for &loss in &axis(&s.loss, base.loss) {
                        for &reweight in &axis(&s.reweight, base.reweight) {
                            let budgets: Vec<Option<usize>> = if s.undersample.is_empty() {
                                vec![base.undersample]
                            } else {
                                s.undersample.iter().map(|&b| Some(b)).collect()
                            };
                            for undersample in budgets {
                                cells.push(Cell {
                                    seed,
                                    trainer: TrainConfig {
                                        seed,
                                        lambda,
                                        ratio_init,
                                        plm,
                                        loss,
                                        reweight,
                                        undersample,
                                        ..base.clone()
                                    },
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    cells
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

/// Run every cell; returns the number that failed.
pub fn sweep(cfg: &LoadedConfig) -> Result<usize> {
    if cfg.config.sweep.is_none() {
        anyhow::bail!("config has no [sweep] table");
    }
    let data = data::load(&cfg.config.dataset)?;
    let root = &cfg.config.output.run_dir;
    let cells = grid(&cfg.config);
    let topk = &cfg.config.trainer.topk;

    let mut header: Vec<String> = [
        "cell",
        "key",
        "seed",
        "lambda",
        "ratio_init",
        "plm",
        "loss",
        "reweight",
        "undersample",
        "status",
        "macro_precision",
        "macro_recall",
        "macro_f1",
        "exact_match",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for k in topk {
        for m in ["precision", "recall", "f1"] {
            header.push(format!("top{k}_{m}"));
        }
    }
    std::fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
    let table = root.join("sweep.csv");
    let mut w = csv::Writer::from_path(&table)
        .with_context(|| format!("cannot write {}", table.display()))?;
    w.write_record(&header)?;

    let mut failed = 0;
    for (i, cell) in cells.iter().enumerate() {
        let name = format!("cell{i:03}");
        let key = cell.key();
        let result = train_into(
            cfg,
            &cell.trainer,
            Some(key.clone()),
            &root.join(&name),
            &data,
        );
        let t = &cell.trainer;
        let mut row = vec![
            name.clone(),
            key.clone(),
            cell.seed.to_string(),
            t.lambda.to_string(),
            ratio_init_label(t.ratio_init),
            t.plm.to_string(),
            loss_label(t.loss),
            reweight_label(t.reweight),
            t.undersample.map_or(String::new(), |s| s.to_string()),
        ];
        match result {
            Ok(r) => {
                let m = &r.metrics;
                row.push("ok".into());
                for v in [m.macro_precision, m.macro_recall, m.macro_f1, m.exact_match] {
                    row.push(v.to_string());
                }
                for k in topk {
                    let tk = m.topk.get(k);
                    row.push(fmt_opt(tk.map(|x| x.precision)));
                    row.push(fmt_opt(tk.map(|x| x.recall)));
                    row.push(fmt_opt(tk.map(|x| x.f1)));
                }
                println!("{name} [{key}]: {}", headline(m));
            }
            Err(e) => {
                failed += 1;
                row.push(format!("failed: {e:#}"));
                row.resize(header.len(), String::new());
                eprintln!("{name} [{key}] failed: {e:#}");
            }
        }
        w.write_record(&row)?;
        w.flush()?;
    }
    println!(
        "{} cells, {failed} failed; table at {}",
        cells.len(),
        table.display()
    );
    Ok(failed)
}
