//! Fully connected ReLU networks trained with Adam on MSE, sampled as
//! hypotheses by varying the initialization and data-order seed.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::PointSet;
use crate::samples::{HypothesisSamples, SampleSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArch {
    pub input_dim: usize,
    pub hidden_width: usize,
    /// Number of affine+ReLU layers before the output layer; 0 is a linear model.
    pub hidden_layers: usize,
    pub output_dim: usize,
}

impl MlpArch {
    pub fn desk(input_dim: usize, output_dim: usize) -> Self {
        MlpArch { input_dim, hidden_width: 64, hidden_layers: 3, output_dim }
    }

    /// Input projection plus nine hidden layers of width 512.
    pub fn full(input_dim: usize, output_dim: usize) -> Self {
        MlpArch { input_dim, hidden_width: 512, hidden_layers: 10, output_dim }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_width == 0 {
            return Err(Error::invalid("arch", "input_dim, output_dim and hidden_width must be at least 1"));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of every weight layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_width, self.hidden_layers));
        dims.push(self.output_dim);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| i * o + o).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { adam: AdamConfig::default(), epochs: 10, batch_size: 128, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.adam;
        // lr = 0 is accepted as a no-op run
        if !(a.lr >= 0.0 && a.lr.is_finite()) {
            return Err(Error::invalid("adam lr", format!("must be finite and non-negative, got {}", a.lr)));
        }
        if !((0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0) {
            return Err(Error::invalid("adam", "betas must lie in [0, 1) and eps must be positive"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("train config", "epochs and batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Weight `fan_in × fan_out` so that a layer maps rows `x ↦ x·W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: DMatrix<f64>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros(arch: &MlpArch) -> Self {
        MlpParams {
            layers: arch
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Layer { w: DMatrix::zeros(i, o), b: DVector::zeros(o) })
                .collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").w.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers.iter_mut().flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()])
    }
}

/// Glorot-uniform weights, zero biases.
pub fn init_mlp(arch: &MlpArch, seed: u64) -> Result<MlpParams> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MlpParams::zeros(arch);
    for layer in &mut params.layers {
        let (fan_in, fan_out) = layer.w.shape();
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite limit");
        layer.w.iter_mut().for_each(|w| *w = dist.sample(&mut rng));
    }
    Ok(params)
}

fn affine(x: &DMatrix<f64>, layer: &Layer) -> DMatrix<f64> {
    let mut z = x * &layer.w;
    for (mut col, &b) in z.column_iter_mut().zip(layer.b.iter()) {
        col.add_scalar_mut(b);
    }
    z
}

/// Pre-activations of every layer; the last entry is the network output.
fn forward_trace(params: &MlpParams, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
    let mut zs: Vec<DMatrix<f64>> = Vec::with_capacity(params.layers.len());
    for (i, layer) in params.layers.iter().enumerate() {
        let z = if i == 0 {
            affine(x, layer)
        } else {
            affine(&zs[i - 1].map(relu), layer)
        };
        zs.push(z);
    }
    zs
}

fn relu(v: f64) -> f64 {
    v.max(0.0)
}

pub fn mlp_forward_matrix(params: &MlpParams, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "MLP input width",
            expected: params.input_dim(),
            got: x.ncols(),
        });
    }
    Ok(forward_trace(params, x).pop().expect("at least one layer"))
}

pub fn mlp_forward(params: &MlpParams, x: &PointSet) -> Result<DMatrix<f64>> {
    mlp_forward_matrix(params, &x.to_matrix())
}

/// Mean over rows and channels of the squared error.
pub fn mse(pred: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (pred - y).norm_squared() / (y.nrows() * y.ncols()) as f64
}

/// MSE and its gradient with respect to every parameter.
pub fn mse_and_grad(params: &MlpParams, x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<(f64, MlpParams)> {
    let zs = forward_trace(params, x);
    let out = zs.last().expect("at least one layer");
    if out.shape() != y.shape() {
        return Err(Error::DimensionMismatch {
            context: "MLP targets",
            expected: out.ncols(),
            got: y.ncols(),
        });
    }
    let diff = out - y;
    let loss = diff.norm_squared() / diff.len() as f64;
    let mut delta = diff * (2.0 / y.len() as f64);
    let mut grads = Vec::with_capacity(params.layers.len());
    for i in (0..params.layers.len()).rev() {
        let input = if i == 0 { x.clone() } else { zs[i - 1].map(relu) };
        let gw = input.transpose() * &delta;
        let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
        if i > 0 {
            let mut back = &delta * params.layers[i].w.transpose();
            back.zip_apply(&zs[i - 1], |d, z| {
                if z <= 0.0 {
                    *d = 0.0
                }
            });
            delta = back;
        }
        grads.push(Layer { w: gw, b: gb });
    }
    grads.reverse();
    Ok((loss, MlpParams { layers: grads }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedMlp {
    pub params: MlpParams,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub steps: usize,
}

fn gather(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, c| m[(idx[i], c)])
}

/// Adam on minibatch MSE with a seeded shuffle each epoch. The shuffle stream
/// is independent of the initialization stream for the same seed.
pub fn train_mlp(params: MlpParams, data: &Dataset, cfg: &TrainConfig) -> Result<TrainedMlp> {
    cfg.validate()?;
    let x = data.train_x.to_matrix();
    let y = &data.train_y;
    if x.ncols() != params.input_dim() {
        return Err(Error::DimensionMismatch { context: "MLP input width", expected: params.input_dim(), got: x.ncols() });
    }
    if y.ncols() != params.output_dim() {
        return Err(Error::DimensionMismatch { context: "MLP output width", expected: params.output_dim(), got: y.ncols() });
    }
    let n = x.nrows();
    let initial_train_loss = mse(&mlp_forward_matrix(&params, &x)?, y);

    let AdamConfig { lr, beta1, beta2, eps } = cfg.adam;
    let mut params = params;
    let mut m = MlpParams { layers: params.layers.iter().map(|l| Layer { w: l.w.map(|_| 0.0), b: l.b.map(|_| 0.0) }).collect() };
    let mut v = m.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grad) = mse_and_grad(&params, &gather(&x, batch), &gather(y, batch))?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { step });
            }
            step += 1;
            let c1 = 1.0 - beta1.powi(step as i32);
            let c2 = 1.0 - beta2.powi(step as i32);
            for (((p, g), m), v) in params.tensors_mut().zip(grad.tensors()).zip(m.tensors_mut()).zip(v.tensors_mut()) {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    p[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
    let final_train_loss = mse(&mlp_forward_matrix(&params, &x)?, y);
    if !final_train_loss.is_finite() {
        return Err(Error::NonFiniteLoss { step });
    }
    Ok(TrainedMlp { params, initial_train_loss, final_train_loss, steps: step })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NnSampling {
    pub samples: HypothesisSamples,
    pub initial_train_losses: Vec<f64>,
    pub final_train_losses: Vec<f64>,
}

/// One trained network per hypothesis, seeded `cfg.seed + s` for both
/// initialization and data order. Trainings run in parallel; results are
/// assembled in index order so the output does not depend on thread count.
pub fn sample_nn_hypotheses(arch: &MlpArch, data: &Dataset, n_samples: usize, cfg: &TrainConfig) -> Result<NnSampling> {
    arch.validate()?;
    cfg.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("samples", "S must be at least 1"));
    }
    let test_x = data.test_x.to_matrix();
    let runs: Vec<Result<(DMatrix<f64>, f64, f64)>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let seed = cfg.seed.wrapping_add(s as u64);
            let run = || -> Result<_> {
                let cfg = TrainConfig { seed, ..*cfg };
                let trained = train_mlp(init_mlp(arch, seed)?, data, &cfg)?;
                let pred = mlp_forward_matrix(&trained.params, &test_x)?;
                Ok((pred, trained.initial_train_loss, trained.final_train_loss))
            };
            run().map_err(|e| Error::Hypothesis { index: s, source: Box::new(e) })
        })
        .collect();
    let (n, k) = (data.n_test(), data.output_dim());
    let mut values = Vec::with_capacity(n_samples * n * k);
    let mut initial = Vec::with_capacity(n_samples);
    let mut fin = Vec::with_capacity(n_samples);
    for run in runs {
        let (pred, l0, l1) = run?;
        for i in 0..n {
            values.extend(pred.row(i).iter());
        }
        initial.push(l0);
        fin.push(l1);
    }
    let samples = HypothesisSamples::new(n_samples, n, k, values, cfg.seed, SampleSource::NeuralNet)?;
    Ok(NnSampling { samples, initial_train_losses: initial, final_train_losses: fin })
}
