//! Fully connected networks with hand-written backpropagation.
//!
//! A layer computes, in order: affine map, optional batch normalization,
//! activation, optional (inverted) dropout.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::Rng;
use crate::error::{Error, Result};

pub const LEAKY_RELU_SLOPE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Linear,
    Sigmoid,
    Relu,
    LeakyRelu,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Linear => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    x
                } else {
                    LEAKY_RELU_SLOPE * x
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given the pre-activation `x` and the output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Linear => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if x >= 0.0 {
                    1.0
                } else {
                    LEAKY_RELU_SLOPE
                }
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
    pub eps: f64,
    pub momentum: f64,
}

impl BatchNorm {
    pub fn new(units: usize) -> Self {
        Self {
            gamma: Array1::ones(units),
            beta: Array1::zeros(units),
            running_mean: Array1::zeros(units),
            running_var: Array1::ones(units),
            eps: 1e-5,
            momentum: 0.99,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `units x inputs`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
    pub batch_norm: Option<BatchNorm>,
    pub dropout: Option<f64>,
}

impl Layer {
    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn units(&self) -> usize {
        self.weights.nrows()
    }
}

/// Shape of one layer for [`DenseNet::new`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerSpec {
    pub units: usize,
    pub activation: Activation,
    pub batch_norm: bool,
    pub dropout: Option<f64>,
}

impl LayerSpec {
    pub fn new(units: usize, activation: Activation) -> Self {
        Self {
            units,
            activation,
            batch_norm: false,
            dropout: None,
        }
    }

    pub fn with_batch_norm(mut self) -> Self {
        self.batch_norm = true;
        self
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = Some(rate);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

#[derive(Clone, Debug)]
struct LayerCache {
    input: Array2<f64>,
    pre_norm: Array2<f64>,
    /// Normalized pre-activation and `1 / sqrt(var + eps)` per unit.
    norm: Option<(Array2<f64>, Array1<f64>)>,
    batch_mean: Option<Array1<f64>>,
    batch_var: Option<Array1<f64>>,
    pre_activation: Array2<f64>,
    activated: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
}

/// Intermediates recorded by [`DenseNet::forward`] for [`DenseNet::backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    mode: Mode,
    layers: Vec<LayerCache>,
}

impl ForwardCache {
    pub fn mode(&self) -> Mode {
        self.mode
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGradients {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Option<Array1<f64>>,
    pub beta: Option<Array1<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    /// Gradient with respect to the network input.
    pub input: Array2<f64>,
}

impl Gradients {
    /// Gradient tensors in the same order as [`DenseNet::params_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            out.push(g.weights.as_slice().expect("standard layout"));
            out.push(g.bias.as_slice().expect("standard layout"));
            if let (Some(gamma), Some(beta)) = (&g.gamma, &g.beta) {
                out.push(gamma.as_slice().expect("standard layout"));
                out.push(beta.as_slice().expect("standard layout"));
            }
        }
        out
    }
}

impl DenseNet {
    /// Glorot-uniform weights, zero biases, `gamma = 1`, `beta = 0`.
    pub fn new(input_dim: usize, specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        if input_dim == 0 || specs.is_empty() {
            return Err(Error::InvalidParameter(
                "network needs a positive input width and at least one layer".into(),
            ));
        }
        let mut layers = Vec::with_capacity(specs.len());
        let mut fan_in = input_dim;
        for spec in specs {
            if spec.units == 0 {
                return Err(Error::InvalidParameter("layer with zero units".into()));
            }
            if let Some(rate) = spec.dropout {
                if !(0.0..1.0).contains(&rate) {
                    return Err(Error::InvalidParameter(format!(
                        "dropout rate must lie in [0, 1), got {rate}"
                    )));
                }
            }
            let limit = (6.0 / (fan_in + spec.units) as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((spec.units, fan_in), || {
                (2.0 * rng.uniform() - 1.0) * limit
            });
            layers.push(Layer {
                weights,
                bias: Array1::zeros(spec.units),
                activation: spec.activation,
                batch_norm: spec.batch_norm.then(|| BatchNorm::new(spec.units)),
                dropout: spec.dropout.filter(|&r| r > 0.0),
            });
            fan_in = spec.units;
        }
        Ok(Self { layers })
    }

    /// Assembles a network from explicit layers, checking that widths chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidParameter(
                "network needs at least one layer".into(),
            ));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.units() {
                return Err(Error::Shape {
                    layer: i,
                    expected: l.units(),
                    found: l.bias.len(),
                });
            }
            if i > 0 && layers[i - 1].units() != l.inputs() {
                return Err(Error::Shape {
                    layer: i,
                    expected: layers[i - 1].units(),
                    found: l.inputs(),
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].units()
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Trainable tensors: per layer weights, bias, then gamma and beta when
    /// batch-normalized.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weights.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
            if let Some(bn) = &l.batch_norm {
                out.push(bn.gamma.as_slice().expect("standard layout"));
                out.push(bn.beta.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.weights.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            if let Some(bn) = &mut l.batch_norm {
                out.push(bn.gamma.as_slice_mut().expect("standard layout"));
                out.push(bn.beta.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    /// Runs the batch through every layer. Dropout masks are drawn from `rng`
    /// in train mode only; batch norm uses batch statistics in train mode and
    /// running statistics otherwise. The network itself is not modified, see
    /// [`DenseNet::commit_batch_stats`].
    pub fn forward(
        &self,
        batch: ArrayView2<f64>,
        mode: Mode,
        rng: &mut Rng,
    ) -> Result<(Array2<f64>, ForwardCache)> {
        let mut x = batch.to_owned();
        let mut caches = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if x.ncols() != layer.inputs() {
                return Err(Error::Shape {
                    layer: i,
                    expected: layer.inputs(),
                    found: x.ncols(),
                });
            }
            let pre_norm = x.dot(&layer.weights.t()) + &layer.bias;
            let (pre_activation, norm, batch_mean, batch_var) = match (&layer.batch_norm, mode) {
                (None, _) => (pre_norm.clone(), None, None, None),
                (Some(bn), Mode::Train) => {
                    if x.nrows() < 2 {
                        return Err(Error::InvalidParameter(format!(
                            "layer {i}: batch normalization needs at least 2 rows in train mode"
                        )));
                    }
                    let mean = pre_norm.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = pre_norm.var_axis(Axis(0), 0.0);
                    let inv_std = var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                    let xhat = (&pre_norm - &mean) * &inv_std;
                    let y = &xhat * &bn.gamma + &bn.beta;
                    (y, Some((xhat, inv_std)), Some(mean), Some(var))
                }
                (Some(bn), Mode::Infer) => {
                    let inv_std = bn.running_var.mapv(|v| 1.0 / (v + bn.eps).sqrt());
                    let xhat = (&pre_norm - &bn.running_mean) * &inv_std;
                    let y = &xhat * &bn.gamma + &bn.beta;
                    (y, Some((xhat, inv_std)), None, None)
                }
            };
            let activated = pre_activation.mapv(|v| layer.activation.apply(v));
            let (out, dropout_mask) = match (layer.dropout, mode) {
                (Some(rate), Mode::Train) => {
                    let keep = 1.0 - rate;
                    let mask = Array2::from_shape_simple_fn(activated.raw_dim(), || {
                        if rng.uniform() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    (&activated * &mask, Some(mask))
                }
                _ => (activated.clone(), None),
            };
            caches.push(LayerCache {
                input: x,
                pre_norm,
                norm,
                batch_mean,
                batch_var,
                pre_activation,
                activated,
                dropout_mask,
            });
            x = out;
        }
        Ok((
            x,
            ForwardCache {
                mode,
                layers: caches,
            },
        ))
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// statistics: `running = momentum * running + (1 - momentum) * batch`.
    pub fn commit_batch_stats(&mut self, cache: &ForwardCache) -> Result<()> {
        self.check_cache(cache)?;
        for (layer, lc) in self.layers.iter_mut().zip(&cache.layers) {
            if let (Some(bn), Some(mean), Some(var)) =
                (&mut layer.batch_norm, &lc.batch_mean, &lc.batch_var)
            {
                let m = bn.momentum;
                bn.running_mean = &bn.running_mean * m + mean * (1.0 - m);
                bn.running_var = &bn.running_var * m + var * (1.0 - m);
            }
        }
        Ok(())
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.layers.len() != self.layers.len() {
            return Err(Error::StaleCache);
        }
        for (layer, lc) in self.layers.iter().zip(&cache.layers) {
            if lc.input.ncols() != layer.inputs()
                || lc.pre_norm.ncols() != layer.units()
                || lc.norm.is_some() != layer.batch_norm.is_some()
            {
                return Err(Error::StaleCache);
            }
        }
        Ok(())
    }

    /// Backpropagates `grad_output` (dLoss/dOutput, one row per sample)
    /// through the pass recorded in `cache`.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_output: ArrayView2<f64>,
    ) -> Result<Gradients> {
        self.check_cache(cache)?;
        let last = cache.layers.last().expect("non-empty cache");
        if grad_output.dim() != last.activated.dim() {
            return Err(Error::StaleCache);
        }
        let mut grad = grad_output.to_owned();
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        for (layer, lc) in self.layers.iter().zip(&cache.layers).rev() {
            if let Some(mask) = &lc.dropout_mask {
                grad *= mask;
            }
            let act = layer.activation;
            let mut dz = grad;
            ndarray::Zip::from(&mut dz)
                .and(&lc.pre_activation)
                .and(&lc.activated)
                .for_each(|g, &x, &y| *g *= act.derivative(x, y));

            let (dz, gamma, beta) = match (&layer.batch_norm, &lc.norm) {
                (Some(bn), Some((xhat, inv_std))) => {
                    let dgamma = (&dz * xhat).sum_axis(Axis(0));
                    let dbeta = dz.sum_axis(Axis(0));
                    let dxhat = &dz * &bn.gamma;
                    let dpre = match cache.mode {
                        Mode::Train => {
                            let n = dz.nrows() as f64;
                            let sum_dxhat = dxhat.sum_axis(Axis(0));
                            let sum_dxhat_xhat = (&dxhat * xhat).sum_axis(Axis(0));
                            ((&dxhat * n) - &sum_dxhat - &(xhat * &sum_dxhat_xhat)) * inv_std / n
                        }
                        Mode::Infer => dxhat * inv_std,
                    };
                    (dpre, Some(dgamma), Some(dbeta))
                }
                _ => (dz, None, None),
            };

            // matmul may hand back column-major output (e.g. for 1-column inputs)
            let dw = dz.t().dot(&lc.input).as_standard_layout().into_owned();
            let db = dz.sum_axis(Axis(0));
            grad = dz.dot(&layer.weights);
            layer_grads.push(LayerGradients {
                weights: dw,
                bias: db,
                gamma,
                beta,
            });
        }
        layer_grads.reverse();
        Ok(Gradients {
            layers: layer_grads,
            input: grad,
        })
    }
}
