mod common;

use plm::dataset::{compute_class_stats, generate_synthetic, SyntheticSpec};
use plm::nnet::{LrSchedule, Mlp};
use plm::trainer::{run_training, run_training_observed, HistogramSource, MaskMode, TrainConfig};
use plm::Error;

fn small() -> (
    plm::dataset::MultiLabelDataset,
    plm::dataset::MultiLabelDataset,
) {
    let spec = SyntheticSpec::new(4, 8, 0.2);
    let train = generate_synthetic(&spec, &[200, 80, 30, 8], 1).unwrap();
    let test = generate_synthetic(&spec, &[20; 4], 2).unwrap();
    (train, test)
}

fn quick(plm: bool) -> TrainConfig {
    TrainConfig {
        epochs: 5,
        batch_size: 16,
        hidden: vec![8],
        schedule: LrSchedule::constant(0.05),
        plm,
        lambda: 0.5,
        topk: vec![2],
        ..TrainConfig::default()
    }
}

fn trajectory(cfg: &TrainConfig) -> Vec<Vec<f64>> {
    let (train, test) = small();
    let mut steps = Vec::new();
    run_training_observed(cfg, &train, &test, |_, _, m: &Mlp| {
        steps.push(m.params_flat())
    })
    .unwrap();
    steps
}

fn bits(v: &[Vec<f64>]) -> Vec<Vec<u64>> {
    v.iter()
        .map(|r| r.iter().map(|x| x.to_bits()).collect())
        .collect()
}

#[test]
fn zero_lambda_plm_matches_plain_training_bit_for_bit() {
    let off = trajectory(&quick(false));
    let on = trajectory(&TrainConfig {
        lambda: 0.0,
        ..quick(true)
    });
    let (train, _) = small();
    assert_eq!(off.len(), 5 * train.len().div_ceil(16));
    assert_eq!(bits(&off), bits(&on));
}

#[test]
fn zero_lambda_freezes_ratios() {
    let (train, test) = small();
    let cfg = TrainConfig {
        lambda: 0.0,
        ratio_init: plm::plm::RatioInit::Mean,
        ..quick(true)
    };
    let run = run_training(&cfg, &train, &test).unwrap();
    let first = run.log.epochs[0].ratio.clone().unwrap();
    for e in &run.log.epochs {
        assert_eq!(e.ratio.as_ref().unwrap(), &first);
        assert_eq!(e.next_ratio.as_ref().unwrap(), &first);
    }
}

#[test]
fn runs_are_reproducible() {
    let (train, test) = small();
    let a = run_training(&quick(true), &train, &test).unwrap();
    let b = run_training(&quick(true), &train, &test).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model, b.model);
    assert_eq!(a.report, b.report);
}

#[test]
fn thread_count_does_not_change_results() {
    let (train, test) = small();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| run_training(&quick(true), &train, &test).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.model, four.model);
    assert_eq!(one.log, four.log);
}

#[test]
fn lazy_masks_reproduce_epoch_masks() {
    let (train, test) = small();
    let a = run_training(&quick(true), &train, &test).unwrap();
    let lazy = TrainConfig {
        mask_mode: MaskMode::Lazy,
        ..quick(true)
    };
    let b = run_training(&lazy, &train, &test).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.model, b.model);
}

#[test]
fn log_shape_and_positive_ratios() {
    let (train, test) = small();
    let cfg = TrainConfig {
        snapshot_epochs: vec![1, 5],
        histogram_source: HistogramSource::PostEpoch,
        ..quick(true)
    };
    let run = run_training(&cfg, &train, &test).unwrap();
    assert_eq!(run.log.epochs.len(), 5);
    let traj = run.log.trajectory().unwrap();
    assert!(traj.iter().flatten().all(|&r| r > 0.0));
    assert!(run.log.epochs[0].snapshot.is_some());
    assert!(run.log.epochs[1].snapshot.is_none());
    assert_eq!(run.log.epochs[4].snapshot.as_ref().unwrap().len(), 4);
    // each epoch starts from the previous epoch's updated targets
    for w in run.log.epochs.windows(2) {
        assert_eq!(w[0].next_ratio, w[1].ratio);
    }
}

#[test]
fn masked_counts_follow_binomial_expectation() {
    let (train, test) = small();
    let stats = compute_class_stats(train.labels()).unwrap();
    let run = run_training(&quick(true), &train, &test).unwrap();
    for e in &run.log.epochs {
        let rbar = e.ratio.as_ref().unwrap();
        for (c, &target) in rbar.iter().enumerate() {
            let r = stats.ratio(c).unwrap();
            let n = stats.n_pos[c] as f64;
            let q = 1.0 - (target / r).min(1.0);
            let (mean, sd) = (n * q, (n * q * (1.0 - q)).sqrt());
            let got = e.mask_counts.masked_pos[c] as f64;
            assert!(
                (got - mean).abs() <= 4.0 * sd + 1e-9,
                "epoch {} class {c}: {got} vs {mean}",
                e.epoch
            );
            let nn = stats.n_neg[c] as f64;
            let qn = 1.0 - (r / rbar[c]).min(1.0);
            let (mn, sn) = (nn * qn, (nn * qn * (1.0 - qn)).sqrt());
            let gn = e.mask_counts.masked_neg[c] as f64;
            assert!(
                (gn - mn).abs() <= 4.0 * sn + 1e-9,
                "epoch {} class {c}: {gn} vs {mn}",
                e.epoch
            );
        }
    }
}

#[test]
fn undersampling_changes_only_the_visited_rows() {
    let (train, test) = small();
    let cfg = TrainConfig {
        undersample: Some(20),
        ..quick(true)
    };
    let run = run_training(&cfg, &train, &test).unwrap();
    for e in &run.log.epochs {
        assert!(e.visited < train.len());
        let labelled: usize = (0..4)
            .map(|c| e.mask_counts.kept_pos[c] + e.mask_counts.masked_pos[c])
            .sum::<usize>();
        assert!(labelled >= e.visited);
        let total: usize = (0..4)
            .map(|c| {
                e.mask_counts.kept_pos[c]
                    + e.mask_counts.masked_pos[c]
                    + e.mask_counts.kept_neg[c]
                    + e.mask_counts.masked_neg[c]
            })
            .sum();
        assert_eq!(total, 4 * e.visited);
    }
    let off = run_training(
        &TrainConfig {
            plm: false,
            ..cfg.clone()
        },
        &train,
        &test,
    )
    .unwrap();
    let visited: Vec<usize> = run.log.epochs.iter().map(|e| e.visited).collect();
    let visited_off: Vec<usize> = off.log.epochs.iter().map(|e| e.visited).collect();
    assert_eq!(visited, visited_off);
}

#[test]
fn separable_toy_is_learned_exactly() {
    let mut spec = SyntheticSpec::new(2, 4, 0.0);
    spec.noise = 0.1;
    spec.separation = 3.0;
    let train = generate_synthetic(&spec, &[50, 50], 3).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        batch_size: 10,
        hidden: vec![],
        schedule: LrSchedule::constant(0.1),
        plm: false,
        ..TrainConfig::default()
    };
    let run = run_training(&cfg, &train, &train).unwrap();
    assert_eq!(run.report.exact_match, 1.0);
}

#[test]
fn saturated_run_stays_finite() {
    // the probability clamp zeroes gradients once outputs saturate
    let (train, test) = small();
    let cfg = TrainConfig {
        schedule: LrSchedule::constant(f64::MAX),
        momentum: 0.0,
        ..quick(false)
    };
    let run = run_training(&cfg, &train, &test).unwrap();
    assert!(run.log.epochs.iter().all(|e| e.loss.is_finite()));
}

#[test]
fn nan_parameters_are_reported() {
    let mut m = Mlp::new(&[2, 2], 0).unwrap();
    let mut p = m.params_flat();
    p[0] = f64::NAN;
    m.set_params_flat(&p).unwrap();
    let x = plm::Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
    let y = plm::BinaryMatrix::ones(1, 2);
    let w = plm::objective::ClassWeights::uniform(2);
    let r = m.loss_and_gradients(&x, &y, &y, &w, plm::objective::LossKind::Bce);
    assert!(matches!(r, Err(Error::NonFinite(_))));
}

#[test]
fn mismatched_test_classes_are_rejected() {
    let (train, _) = small();
    let other = generate_synthetic(&SyntheticSpec::new(3, 8, 0.0), &[5, 5, 5], 0).unwrap();
    assert!(run_training(&quick(true), &train, &other).is_err());
}
