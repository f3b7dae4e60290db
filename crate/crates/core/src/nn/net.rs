//! Feed-forward network over a fixed layer vocabulary with hand-written
//! backpropagation.
//!
//! A train-mode forward pass produces a [`Tape`] holding whatever each layer
//! needs for its backward step. Networks used more than once per update (the
//! generators inside the cycle terms) keep one tape per use, so gradients from
//! every path accumulate into the same parameter buffers.

use rand::Rng;

use super::matrix::{gemm, RealMatrix};
use crate::error::{Error, Result};

/// One entry of a network layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerSpec {
    Dense { width: usize },
    LeakyRelu { slope: f64 },
    Dropout { rate: f64 },
    Tanh,
}

impl LayerSpec {
    pub fn dense(width: usize) -> Self {
        LayerSpec::Dense { width }
    }

    pub fn leaky_relu() -> Self {
        LayerSpec::LeakyRelu { slope: 0.2 }
    }

    pub fn dropout() -> Self {
        LayerSpec::Dropout { rate: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Weights and accumulated gradients of one dense layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseParams {
    /// `[in × out]`
    pub weight: RealMatrix,
    pub bias: Vec<f64>,
    pub grad_weight: RealMatrix,
    pub grad_bias: Vec<f64>,
}

impl DenseParams {
    pub fn new(weight: RealMatrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::Dimension {
                op: "dense params",
                left: weight.shape(),
                right: (bias.len(), 1),
            });
        }
        let (r, c) = weight.shape();
        Ok(Self {
            grad_weight: RealMatrix::zeros(r, c),
            grad_bias: vec![0.0; c],
            weight,
            bias,
        })
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Layer {
    Dense(DenseParams),
    LeakyRelu(f64),
    Dropout(f64),
    Tanh,
}

impl Layer {
    pub(crate) fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(p) => LayerSpec::Dense { width: p.fan_out() },
            Layer::LeakyRelu(s) => LayerSpec::LeakyRelu { slope: *s },
            Layer::Dropout(r) => LayerSpec::Dropout { rate: *r },
            Layer::Tanh => LayerSpec::Tanh,
        }
    }
}

#[derive(Debug, Clone)]
enum Cache {
    /// Layer input.
    Dense(RealMatrix),
    /// Layer input.
    LeakyRelu(RealMatrix),
    /// Per-element multiplier (0 or 1/(1-p)).
    Dropout(Vec<f64>),
    /// Layer output.
    Tanh(RealMatrix),
}

/// Activations recorded by a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    caches: Vec<Cache>,
    out_shape: (usize, usize),
}

/// `x · W + b` for a batch of row vectors.
pub fn dense_forward(x: &RealMatrix, weight: &RealMatrix, bias: &[f64]) -> Result<RealMatrix> {
    if x.cols() != weight.rows() {
        return Err(Error::Dimension {
            op: "dense_forward",
            left: x.shape(),
            right: weight.shape(),
        });
    }
    if bias.len() != weight.cols() {
        return Err(Error::Dimension {
            op: "dense_forward bias",
            left: weight.shape(),
            right: (bias.len(), 1),
        });
    }
    let mut out = RealMatrix::zeros(x.rows(), weight.cols());
    for r in 0..out.rows() {
        out.row_mut(r).copy_from_slice(bias);
    }
    gemm(1.0, x, false, weight, false, 1.0, &mut out);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NeuralNet {
    input_width: usize,
    pub(crate) layers: Vec<Layer>,
    mode: Mode,
    last_tape: Option<Tape>,
}

// Tapes and mode are transient; equality is about layout and parameters.
impl PartialEq for NeuralNet {
    fn eq(&self, other: &Self) -> bool {
        self.input_width == other.input_width && self.layers == other.layers
    }
}

impl NeuralNet {
    /// Builds a network with Glorot-uniform weights and zero biases.
    pub fn new<R: Rng + ?Sized>(input_width: usize, specs: &[LayerSpec], rng: &mut R) -> Result<Self> {
        let mut layers = Vec::with_capacity(specs.len());
        let mut width = input_width;
        for (i, spec) in specs.iter().enumerate() {
            let layer = match *spec {
                LayerSpec::Dense { width: out } => {
                    if out == 0 || width == 0 {
                        return Err(Error::Domain(format!("layer {i}: zero-width dense layer")));
                    }
                    let limit = (6.0 / (width + out) as f64).sqrt();
                    let data = (0..width * out)
                        .map(|_| rng.random_range(-limit..=limit))
                        .collect();
                    let w = RealMatrix::from_vec(width, out, data)?;
                    width = out;
                    Layer::Dense(DenseParams::new(w, vec![0.0; out])?)
                }
                LayerSpec::LeakyRelu { slope } => {
                    if !(slope > 0.0) {
                        return Err(Error::Domain(format!("layer {i}: leaky relu slope must be > 0")));
                    }
                    Layer::LeakyRelu(slope)
                }
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(Error::Domain(format!("layer {i}: dropout rate must be in [0, 1)")));
                    }
                    Layer::Dropout(rate)
                }
                LayerSpec::Tanh => Layer::Tanh,
            };
            layers.push(layer);
        }
        Ok(Self {
            input_width,
            layers,
            mode: Mode::Train,
            last_tape: None,
        })
    }

    /// Assembles a network from explicit layers (used by checkpoint loading
    /// and tests that need hand-set weights).
    pub(crate) fn from_layers(input_width: usize, layers: Vec<Layer>) -> Result<Self> {
        let mut width = input_width;
        for (i, l) in layers.iter().enumerate() {
            if let Layer::Dense(p) = l {
                if p.fan_in() != width {
                    return Err(Error::Dimension {
                        op: "layer chain",
                        left: (i, width),
                        right: p.weight.shape(),
                    });
                }
                width = p.fan_out();
            }
        }
        Ok(Self {
            input_width,
            layers,
            mode: Mode::Train,
            last_tape: None,
        })
    }

    /// Single-layer network with the given weights, optionally followed by
    /// a nonlinearity. Handy for oracles and tests.
    pub fn from_dense(weight: RealMatrix, bias: Vec<f64>, tail: &[LayerSpec]) -> Result<Self> {
        let input_width = weight.rows();
        let mut layers = vec![Layer::Dense(DenseParams::new(weight, bias)?)];
        for spec in tail {
            layers.push(match *spec {
                LayerSpec::Dense { .. } => {
                    return Err(Error::Domain("from_dense tail takes activations only".into()))
                }
                LayerSpec::LeakyRelu { slope } => Layer::LeakyRelu(slope),
                LayerSpec::Dropout { rate } => Layer::Dropout(rate),
                LayerSpec::Tanh => Layer::Tanh,
            });
        }
        Self::from_layers(input_width, layers)
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers
            .iter()
            .rev()
            .find_map(|l| match l {
                Layer::Dense(p) => Some(p.fan_out()),
                _ => None,
            })
            .unwrap_or(self.input_width)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &DenseParams> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dense(p) => Some(p),
            _ => None,
        })
    }

    pub fn dense_layers_mut(&mut self) -> impl Iterator<Item = &mut DenseParams> {
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::Dense(p) => Some(p),
            _ => None,
        })
    }

    pub fn param_count(&self) -> usize {
        self.dense_layers()
            .map(|p| p.weight.data().len() + p.bias.len())
            .sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.dense_layers_mut() {
            p.grad_weight.fill(0.0);
            p.grad_bias.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    /// Forward pass in the network's current mode. Train mode records a tape
    /// for the next [`backward`](Self::backward).
    pub fn forward<R: Rng + ?Sized>(&mut self, x: &RealMatrix, rng: &mut R) -> Result<RealMatrix> {
        match self.mode {
            Mode::Eval => {
                self.last_tape = None;
                self.predict(x)
            }
            Mode::Train => {
                let (out, tape) = self.forward_tape(x, rng)?;
                self.last_tape = Some(tape);
                Ok(out)
            }
        }
    }

    /// Backward pass against the tape of the last train-mode [`forward`](Self::forward).
    pub fn backward(&mut self, upstream: &RealMatrix) -> Result<RealMatrix> {
        let tape = self
            .last_tape
            .take()
            .ok_or_else(|| Error::State("backward called without a train-mode forward".into()))?;
        let res = self.backward_tape(&tape, upstream);
        self.last_tape = Some(tape);
        res
    }

    /// Eval-mode forward: dropout disabled, no tape, a pure function of the
    /// parameters and the input.
    pub fn predict(&self, x: &RealMatrix) -> Result<RealMatrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Dense(p) => dense_forward(&h, &p.weight, &p.bias)?,
                Layer::LeakyRelu(s) => h.map(|v| if v >= 0.0 { v } else { s * v }),
                Layer::Dropout(_) => h,
                Layer::Tanh => h.map(f64::tanh),
            };
            if !h.is_finite() {
                return Err(Error::NonFinite { layer: i });
            }
        }
        Ok(h)
    }

    /// Eval-mode output of every layer, in order. Useful for inspecting
    /// pre-activations (e.g. distance of leaky-ReLU inputs from the kink).
    pub fn layer_outputs(&self, x: &RealMatrix) -> Result<Vec<RealMatrix>> {
        self.check_input(x)?;
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Dense(p) => dense_forward(&h, &p.weight, &p.bias)?,
                Layer::LeakyRelu(s) => h.map(|v| if v >= 0.0 { v } else { s * v }),
                Layer::Dropout(_) => h,
                Layer::Tanh => h.map(f64::tanh),
            };
            outs.push(h.clone());
        }
        Ok(outs)
    }

    /// Train-mode forward returning the tape explicitly, for networks that
    /// are applied several times within one update.
    pub fn forward_tape<R: Rng + ?Sized>(&self, x: &RealMatrix, rng: &mut R) -> Result<(RealMatrix, Tape)> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            h = match layer {
                Layer::Dense(p) => {
                    let out = dense_forward(&h, &p.weight, &p.bias)?;
                    caches.push(Cache::Dense(h));
                    out
                }
                Layer::LeakyRelu(s) => {
                    let out = h.map(|v| if v >= 0.0 { v } else { s * v });
                    caches.push(Cache::LeakyRelu(h));
                    out
                }
                Layer::Dropout(rate) => {
                    let keep = 1.0 / (1.0 - rate);
                    let mask: Vec<f64> = (0..h.data().len())
                        .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep })
                        .collect();
                    for (v, m) in h.data_mut().iter_mut().zip(&mask) {
                        *v *= m;
                    }
                    caches.push(Cache::Dropout(mask));
                    h
                }
                Layer::Tanh => {
                    let out = h.map(f64::tanh);
                    caches.push(Cache::Tanh(out.clone()));
                    out
                }
            };
            if !h.is_finite() {
                return Err(Error::NonFinite { layer: i });
            }
        }
        let out_shape = h.shape();
        Ok((h, Tape { caches, out_shape }))
    }

    /// Accumulates parameter gradients for `tape` and returns the gradient
    /// with respect to the network input.
    pub fn backward_tape(&mut self, tape: &Tape, upstream: &RealMatrix) -> Result<RealMatrix> {
        check_tape(&self.layers, tape, upstream)?;
        let mut g = upstream.clone();
        for (layer, cache) in self.layers.iter_mut().zip(&tape.caches).rev() {
            if let (Layer::Dense(p), Cache::Dense(x)) = (&mut *layer, cache) {
                gemm(1.0, x, true, &g, false, 1.0, &mut p.grad_weight);
                for r in 0..g.rows() {
                    for (gb, v) in p.grad_bias.iter_mut().zip(g.row(r)) {
                        *gb += v;
                    }
                }
            }
            g = layer_backward(layer, cache, g);
        }
        Ok(g)
    }

    /// Gradient with respect to the input only; parameter gradients are left
    /// untouched. Used when chaining through a network held fixed.
    pub fn input_grad(&self, tape: &Tape, upstream: &RealMatrix) -> Result<RealMatrix> {
        check_tape(&self.layers, tape, upstream)?;
        let mut g = upstream.clone();
        for (layer, cache) in self.layers.iter().zip(&tape.caches).rev() {
            g = layer_backward(layer, cache, g);
        }
        Ok(g)
    }

    fn check_input(&self, x: &RealMatrix) -> Result<()> {
        if x.cols() != self.input_width {
            return Err(Error::Dimension {
                op: "net_forward",
                left: x.shape(),
                right: (x.rows(), self.input_width),
            });
        }
        Ok(())
    }
}

fn check_tape(layers: &[Layer], tape: &Tape, upstream: &RealMatrix) -> Result<()> {
    if tape.caches.len() != layers.len() {
        return Err(Error::State("tape does not belong to this network".into()));
    }
    if upstream.shape() != tape.out_shape {
        return Err(Error::Dimension {
            op: "net_backward",
            left: upstream.shape(),
            right: tape.out_shape,
        });
    }
    Ok(())
}

fn layer_backward(layer: &Layer, cache: &Cache, mut g: RealMatrix) -> RealMatrix {
    match (layer, cache) {
        (Layer::Dense(p), Cache::Dense(_)) => {
            let mut dx = RealMatrix::zeros(g.rows(), p.fan_in());
            gemm(1.0, &g, false, &p.weight, true, 0.0, &mut dx);
            dx
        }
        (Layer::LeakyRelu(s), Cache::LeakyRelu(x)) => {
            for (gv, xv) in g.data_mut().iter_mut().zip(x.data()) {
                if *xv < 0.0 {
                    *gv *= s;
                }
            }
            g
        }
        (Layer::Dropout(_), Cache::Dropout(mask)) => {
            for (gv, m) in g.data_mut().iter_mut().zip(mask) {
                *gv *= m;
            }
            g
        }
        (Layer::Tanh, Cache::Tanh(y)) => {
            for (gv, yv) in g.data_mut().iter_mut().zip(y.data()) {
                *gv *= 1.0 - yv * yv;
            }
            g
        }
        _ => unreachable!("tape layout checked against layers"),
    }
}
