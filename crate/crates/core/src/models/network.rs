use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::numerics::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Identity,
    /// Identity in the network; the softmax is applied inside the loss and
    /// at prediction time.
    SoftmaxAtLoss,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Identity => 1,
            Activation::SoftmaxAtLoss => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Identity),
            2 => Some(Activation::SoftmaxAtLoss),
            _ => None,
        }
    }
}

/// Fully connected layer computing `act(x Wᵀ + b)`; `weights` is `out × in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, ModelError> {
        if bias.len() != weights.rows() {
            return Err(ModelError::ShapeMismatch(format!(
                "bias of length {} for a layer with {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        if !weights.is_finite() || bias.iter().any(|b| !b.is_finite()) {
            return Err(ModelError::NonFinite("layer parameters".into()));
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot(inputs: usize, outputs: usize, activation: Activation, rng: &mut RngStream) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let data = (0..inputs * outputs)
            .map(|_| rng.uniform_range(-limit, limit))
            .collect();
        Self {
            weights: Matrix::from_vec(outputs, inputs, data).expect("sized above"),
            bias: vec![0.0; outputs],
            activation,
        }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_width(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_width(&self) -> usize {
        self.weights.rows()
    }

    pub(crate) fn params_mut(&mut self) -> (&mut Matrix, &mut Vec<f64>) {
        (&mut self.weights, &mut self.bias)
    }

    fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x
            .matmul_transposed(&self.weights)
            .expect("widths checked by Network::forward");
        let width = self.out_width();
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
            }
            if self.activation == Activation::Relu {
                row.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            debug_assert_eq!(row.len(), width);
        }
        out
    }
}

/// Feedforward stack of dense layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::ShapeMismatch("a network needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_width() != pair[1].in_width() {
                return Err(ModelError::ShapeMismatch(format!(
                    "layer {i} emits {} values but layer {} expects {}",
                    pair[0].out_width(),
                    i + 1,
                    pair[1].in_width()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Multilayer perceptron over `widths` (input first). Hidden layers use
    /// ReLU; the last layer uses `output`.
    pub fn mlp(widths: &[usize], output: Activation, rng: &mut RngStream) -> Result<Self, ModelError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(ModelError::ShapeMismatch(format!(
                "invalid layer widths {widths:?}"
            )));
        }
        let last = widths.len() - 2;
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let act = if i == last { output } else { Activation::Relu };
                DenseLayer::glorot(w[0], w[1], act, rng)
            })
            .collect();
        Network::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer] {
        &mut self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].in_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].out_width()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.rows() * l.weights.cols() + l.bias.len())
            .sum()
    }

    /// `self` followed by `next`, as one network.
    pub fn stacked(&self, next: &Network) -> Result<Network, ModelError> {
        let mut layers = self.layers.clone();
        layers.extend(next.layers.iter().cloned());
        Network::new(layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.is_finite() && l.bias.iter().all(|b| b.is_finite()))
    }

    /// Forward pass returning only the final activation.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix, ModelError> {
        Ok(forward(self, x)?.into_output())
    }
}

/// Per-layer activations from a forward pass; entry 0 is the input.
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Matrix>,
}

impl Trace {
    pub fn input(&self) -> &Matrix {
        &self.activations[0]
    }

    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace holds the input")
    }

    pub fn into_output(mut self) -> Matrix {
        self.activations.pop().expect("trace holds the input")
    }

    pub fn activations(&self) -> &[Matrix] {
        &self.activations
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|g| g.weights.is_finite() && g.bias.iter().all(|b| b.is_finite()))
    }

    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: Matrix::zeros(l.out_width(), l.in_width()),
                    bias: vec![0.0; l.out_width()],
                })
                .collect(),
        }
    }
}

pub fn forward(net: &Network, x: &Matrix) -> Result<Trace, ModelError> {
    if x.cols() != net.input_width() {
        return Err(ModelError::WidthMismatch {
            expected: net.input_width(),
            actual: x.cols(),
        });
    }
    let mut activations = Vec::with_capacity(net.layers.len() + 1);
    activations.push(x.clone());
    for layer in &net.layers {
        let next = layer.forward(activations.last().expect("nonempty"));
        activations.push(next);
    }
    Ok(Trace { activations })
}

/// Backpropagates `grad_out` (the loss gradient w.r.t. the network output)
/// and returns the parameter gradients plus the gradient w.r.t. the input,
/// one row per sample.
pub fn backward(
    net: &Network,
    trace: &Trace,
    grad_out: &Matrix,
) -> Result<(Gradients, Matrix), ModelError> {
    if trace.activations.len() != net.layers.len() + 1 {
        return Err(ModelError::ShapeMismatch(
            "trace was not produced by this network".into(),
        ));
    }
    if grad_out.shape() != trace.output().shape() {
        return Err(ModelError::ShapeMismatch(format!(
            "output gradient is {:?} but the output is {:?}",
            grad_out.shape(),
            trace.output().shape()
        )));
    }
    let mut grads = Vec::with_capacity(net.layers.len());
    let mut delta = grad_out.clone();
    for (i, layer) in net.layers.iter().enumerate().rev() {
        if layer.activation == Activation::Relu {
            let out = &trace.activations[i + 1];
            for (d, &o) in delta.as_mut_slice().iter_mut().zip(out.as_slice()) {
                if o <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        let input = &trace.activations[i];
        let weights = delta.transposed_matmul(input)?;
        let bias = delta.column_sums();
        let next_delta = delta.matmul(&layer.weights)?;
        grads.push(LayerGradient { weights, bias });
        delta = next_delta;
    }
    grads.reverse();
    Ok((Gradients { layers: grads }, delta))
}
