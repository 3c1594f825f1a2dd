#![allow(dead_code)]

use plm::dataset::{generate_synthetic, LongTailProfile, MultiLabelDataset, SyntheticSpec};
use plm::nnet::{LrSchedule, Mlp};
use plm::objective::{masked_weighted_loss, ClassWeights, LossKind};
use plm::trainer::TrainConfig;
use plm::{BinaryMatrix, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Published per-digit counts of the composed training set, N = 14694.
pub const MULTIMNIST_TRAIN: [usize; 10] = [9485, 6167, 3967, 2476, 1508, 875, 538, 331, 164, 105];
pub const MULTIMNIST_N: usize = 14694;

/// Largest relative error between analytic and central-difference gradients
/// of the masked, weighted objective on a random small model.
pub fn gradient_check(seed: u64, kind: LossKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..6);
    let c = rng.random_range(2..5);
    let mut dims = vec![d];
    for _ in 0..rng.random_range(0..3) {
        dims.push(rng.random_range(2..7));
    }
    dims.push(c);
    let b = 5;
    let mut model = Mlp::new(&dims, seed).unwrap();
    // non-zero biases so no pre-activation sits on a ReLU kink
    let mut params = model.params_flat();
    params
        .iter_mut()
        .for_each(|p| *p += rng.random_range(-0.1..0.1));
    model.set_params_flat(&params).unwrap();

    let x = Matrix::from_vec(
        b,
        d,
        (0..b * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap();
    let y = BinaryMatrix::from_vec(b, c, (0..b * c).map(|_| rng.random_range(0..2u8)).collect())
        .unwrap();
    let g = BinaryMatrix::from_vec(
        b,
        c,
        (0..b * c).map(|_| u8::from(rng.random_bool(0.7))).collect(),
    )
    .unwrap();
    let w = ClassWeights {
        w: (0..c).map(|_| rng.random_range(0.2..2.0)).collect(),
    };

    let analytic = model.backward(&x, &y, &g, &w, kind).unwrap().flat();
    let objective = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params_flat(p).unwrap();
        masked_weighted_loss(&y, &m.forward(&x).unwrap(), &g, &w, kind).unwrap()
    };
    let h = 1e-5;
    let mut worst = 0.0f64;
    for k in 0..params.len() {
        let mut up = params.clone();
        let mut down = params.clone();
        up[k] += h;
        down[k] -= h;
        let numeric = (objective(&up) - objective(&down)) / (2.0 * h);
        let a = analytic[k];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

/// Ten-class long-tail synthetic problem (rho = 100, counts 1000 down to 10).
pub fn longtail_synthetic(seed: u64) -> (MultiLabelDataset, MultiLabelDataset) {
    let profile = LongTailProfile::exponential(10, 100.0, 1000).unwrap();
    let mut spec = SyntheticSpec::new(10, 32, 0.1);
    spec.separation = 0.5;
    let train = generate_synthetic(&spec, profile.counts(), 100 + seed).unwrap();
    let test = generate_synthetic(&spec, &[200; 10], 200 + seed).unwrap();
    (train, test)
}

pub fn longtail_config(seed: u64, plm: bool) -> TrainConfig {
    TrainConfig {
        epochs: 30,
        batch_size: 64,
        hidden: vec![64],
        schedule: LrSchedule::constant(0.05),
        momentum: 0.9,
        plm,
        lambda: 0.01,
        seed,
        topk: vec![3],
        ..TrainConfig::default()
    }
}

/// Element-by-element recount of precision, recall, F1 and exact match.
pub struct Naive {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub exact: f64,
}

pub fn naive_metrics(y: &[Vec<u8>], h: &[Vec<u8>]) -> Naive {
    let c = y[0].len();
    let mut out = Naive {
        precision: vec![],
        recall: vec![],
        f1: vec![],
        exact: 0.0,
    };
    for j in 0..c {
        let (mut tp, mut fp, mut fnn) = (0, 0, 0);
        for i in 0..y.len() {
            if y[i][j] == 1 && h[i][j] == 1 {
                tp += 1;
            }
            if y[i][j] == 0 && h[i][j] == 1 {
                fp += 1;
            }
            if y[i][j] == 1 && h[i][j] == 0 {
                fnn += 1;
            }
        }
        let p = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fnn == 0 {
            1.0
        } else {
            tp as f64 / (tp + fnn) as f64
        };
        out.precision.push(p);
        out.recall.push(r);
        out.f1.push(if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        });
    }
    out.exact = y.iter().zip(h).filter(|(a, b)| a == b).count() as f64 / y.len() as f64;
    out
}
