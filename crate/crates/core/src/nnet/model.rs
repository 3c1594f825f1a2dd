use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::{BinaryMatrix, Matrix};
use crate::objective::{check_batch_shapes, ClassWeights, LossKind};
use crate::par;
use crate::rng::{self, Domain};

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// `out = act(input * W^T + b)` for every batch row.
    fn apply(&self, input: &Matrix, output_layer: bool) -> Matrix {
        let mut out = Matrix::zeros(input.rows(), self.outputs);
        par::for_each_row_mut(out.as_mut_slice(), self.outputs, |i, row| {
            let x = input.row(i);
            for (j, o) in row.iter_mut().enumerate() {
                let w = &self.weights[j * self.inputs..(j + 1) * self.inputs];
                let z = self.bias[j] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                *o = if output_layer { sigmoid(z) } else { z.max(0.0) };
            }
        });
        out
    }
}

/// Parameter-shaped buffers (gradients, momentum velocity).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            weights: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.weights.len()])
                .collect(),
            biases: model
                .layers
                .iter()
                .map(|l| vec![0.0; l.bias.len()])
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b).copied())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(&self.biases)
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn same_shape(&self, model: &Mlp) -> bool {
        self.weights.len() == model.layers.len()
            && model.layers.iter().enumerate().all(|(l, layer)| {
                self.weights[l].len() == layer.weights.len()
                    && self.biases[l].len() == layer.bias.len()
            })
    }
}

/// Result of one forward/backward pass over a batch.
#[derive(Clone, Debug)]
pub struct BatchOutput {
    /// Masked, weighted batch-mean loss (the optimised quantity).
    pub loss: f64,
    /// Unmasked, unweighted batch-mean loss for reporting.
    pub unmasked_loss: f64,
    pub probs: Matrix,
    pub grads: Gradients,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

impl Mlp {
    fn check_dims(dims: &[usize]) -> Result<()> {
        if dims.len() < 2 {
            return Err(Error::invalid(
                "layer_dims",
                format!("need at least input and output sizes, got {dims:?}"),
            ));
        }
        if dims.contains(&0) {
            return Err(Error::invalid(
                "layer_dims",
                format!("all sizes must be positive, got {dims:?}"),
            ));
        }
        Ok(())
    }

    /// All-zero parameters.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    pub fn new(dims: &[usize], seed: u64) -> Result<Self> {
        let mut model = Self::zeros(dims)?;
        for (l, layer) in model.layers.iter_mut().enumerate() {
            let mut rng = rng::stream(seed, Domain::Init, l as u64);
            let std = (2.0 / layer.inputs as f64).sqrt();
            for w in &mut layer.weights {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = std * z;
            }
        }
        Ok(model)
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::invalid("layers", "need at least one layer"));
        }
        for (k, l) in layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::shape(
                    "Mlp layer",
                    l.inputs * l.outputs,
                    l.weights.len(),
                ));
            }
            if k > 0 && layers[k - 1].outputs != l.inputs {
                return Err(Error::shape(
                    "Mlp layer chain",
                    layers[k - 1].outputs,
                    l.inputs,
                ));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Parameters flattened layer by layer, weights before biases.
    pub fn params_flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::shape(
                "set_params_flat",
                self.num_params(),
                params.len(),
            ));
        }
        let mut it = params.iter().copied();
        for l in &mut self.layers {
            l.weights
                .iter_mut()
                .chain(l.bias.iter_mut())
                .for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(&l.bias).all(|p| p.is_finite()))
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(
                "forward input width",
                self.input_dim(),
                batch.cols(),
            ));
        }
        Ok(())
    }

    /// Post-activation outputs of every layer; the last entry holds probabilities.
    fn activations(&self, batch: &Matrix) -> Vec<Matrix> {
        let last = self.layers.len() - 1;
        let mut acts: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        for (l, layer) in self.layers.iter().enumerate() {
            let input = if l == 0 { batch } else { &acts[l - 1] };
            let out = layer.apply(input, l == last);
            acts.push(out);
        }
        acts
    }

    /// Per-class sigmoid probabilities, `batch_rows x C`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let probs = self.activations(batch).pop().unwrap();
        if probs.as_slice().iter().any(|p| p.is_nan()) {
            return Err(Error::NonFinite("forward activations"));
        }
        Ok(probs)
    }

    /// Loss and exact gradients of the masked, class-weighted batch-mean objective.
    pub fn loss_and_gradients(
        &self,
        batch: &Matrix,
        labels: &BinaryMatrix,
        masks: &BinaryMatrix,
        weights: &ClassWeights,
        kind: LossKind,
    ) -> Result<BatchOutput> {
        self.check_input(batch)?;
        let c = self.num_classes();
        check_batch_shapes(labels, (batch.rows(), c), masks, weights)?;
        kind.validate()?;
        let mut acts = self.activations(batch);
        if acts.iter().any(|a| a.as_slice().iter().any(|v| v.is_nan())) {
            return Err(Error::NonFinite("forward activations"));
        }
        let probs = acts.pop().unwrap();
        let b = batch.rows();
        let scale = if b == 0 { 0.0 } else { 1.0 / b as f64 };

        let mut loss = 0.0;
        let mut unmasked = 0.0;
        let mut delta = Matrix::zeros(b, c);
        for i in 0..b {
            let (y, p, g) = (labels.row(i), probs.row(i), masks.row(i));
            let mut sample = 0.0;
            let mut sample_unmasked = 0.0;
            let d = delta.row_mut(i);
            for j in 0..c {
                let l = kind.loss(y[j], p[j]);
                sample_unmasked += l;
                if g[j] == 1 {
                    sample += weights.w[j] * l;
                    d[j] = weights.w[j] * scale * kind.dloss_dlogit(y[j], p[j]);
                }
            }
            loss += sample;
            unmasked += sample_unmasked;
        }

        let mut grads = Gradients::zeros_like(self);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let input = if l == 0 { batch } else { &acts[l - 1] };
            let (n_in, n_out) = (layer.inputs, layer.outputs);

            par::for_each_row_mut(&mut grads.weights[l], n_in, |j, row| {
                for i in 0..b {
                    let dij = delta.get(i, j);
                    if dij != 0.0 {
                        for (r, &a) in row.iter_mut().zip(input.row(i)) {
                            *r += dij * a;
                        }
                    }
                }
            });
            for (j, gb) in grads.biases[l].iter_mut().enumerate() {
                *gb = (0..b).map(|i| delta.get(i, j)).sum();
            }

            if l > 0 {
                let mut next = Matrix::zeros(b, n_in);
                par::for_each_row_mut(next.as_mut_slice(), n_in, |i, row| {
                    let di = delta.row(i);
                    let act = input.row(i);
                    for (k, r) in row.iter_mut().enumerate() {
                        if act[k] > 0.0 {
                            *r = (0..n_out)
                                .map(|j| di[j] * layer.weights[j * n_in + k])
                                .sum();
                        }
                    }
                });
                delta = next;
            }
        }

        Ok(BatchOutput {
            loss: loss * scale,
            unmasked_loss: unmasked * scale,
            probs,
            grads,
        })
    }

    /// Gradients of the masked objective (see [`Mlp::loss_and_gradients`]).
    pub fn backward(
        &self,
        batch: &Matrix,
        labels: &BinaryMatrix,
        masks: &BinaryMatrix,
        weights: &ClassWeights,
        kind: LossKind,
    ) -> Result<Gradients> {
        Ok(self
            .loss_and_gradients(batch, labels, masks, weights, kind)?
            .grads)
    }
}
