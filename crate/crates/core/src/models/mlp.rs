use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{argmax, Classifier, Label, LossKind};
use crate::error::{contract, Result};

/// Fully connected layer, weights stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    out_dim: usize,
    in_dim: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(out_dim: usize, in_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(contract("layer dimensions must be positive"));
        }
        if weights.len() != out_dim * in_dim || bias.len() != out_dim {
            return Err(contract(format!(
                "layer {out_dim}x{in_dim} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(contract("layer parameters must be finite"));
        }
        Ok(Self {
            out_dim,
            in_dim,
            weights,
            bias,
        })
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| super::dot(row, input) + b)
            .collect()
    }

    /// `W^T * upstream`.
    fn backward_input(&self, upstream: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.in_dim];
        for (row, g) in self.weights.chunks_exact(self.in_dim).zip(upstream) {
            if *g == 0.0 {
                continue;
            }
            for (o, w) in out.iter_mut().zip(row) {
                *o += g * w;
            }
        }
        out
    }
}

/// Multilayer perceptron: rectifier on hidden layers, identity on the output
/// layer. A single layer is a plain multiclass affine model.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyMlp {
    layers: Vec<DenseLayer>,
}

/// Parameter gradients, laid out like the layers they belong to.
#[derive(Debug, Clone)]
pub struct MlpGradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl MlpGradients {
    fn zeros_like(mlp: &TinyMlp) -> Self {
        Self {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            bias: mlp.layers.iter().map(|l| vec![0.0; l.bias.len()]).collect(),
        }
    }
}

struct Trace {
    // inputs[i] is the input of layer i; the last entry is the logits.
    activations: Vec<Vec<f64>>,
}

impl TinyMlp {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(contract("mlp needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(contract(format!(
                    "layer output {} does not feed layer input {}",
                    pair[0].out_dim, pair[1].in_dim
                )));
            }
        }
        if layers.last().map(|l| l.out_dim).unwrap_or(0) < 2 {
            return Err(contract("a classifier needs at least two classes"));
        }
        Ok(Self { layers })
    }

    /// He-initialised network with the given layer widths
    /// (`[input, hidden..., classes]`) and zero biases.
    pub fn random(dims: &[usize], seed: u64) -> Self {
        assert!(dims.len() >= 2, "need input and output widths");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                let weights = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
                DenseLayer::new(fan_out, fan_in, weights, vec![0.0; fan_out]).unwrap()
            })
            .collect();
        Self::new(layers).unwrap()
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Layer widths `[input, hidden..., classes]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    fn trace(&self, x: &[f64]) -> Trace {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.forward(activations.last().unwrap());
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        Trace { activations }
    }

    /// Backpropagates `upstream = dL/dlogits`. Returns the input gradient and,
    /// when requested, accumulates parameter gradients into `grads`.
    fn backprop(&self, trace: &Trace, upstream: &[f64], mut grads: Option<&mut MlpGradients>) -> Vec<f64> {
        let mut delta = upstream.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &trace.activations[i];
            if let Some(g) = grads.as_deref_mut() {
                for (o, d) in delta.iter().enumerate() {
                    g.bias[i][o] += d;
                    let row = &mut g.weights[i][o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += d * a;
                    }
                }
            }
            let mut back = layer.backward_input(&delta);
            if i > 0 {
                // Rectifier of the previous layer: activation > 0 passes gradient.
                for (b, a) in back.iter_mut().zip(input) {
                    if *a <= 0.0 {
                        *b = 0.0;
                    }
                }
            }
            delta = back;
        }
        delta
    }

    /// Cross-entropy loss at `x` for class `class`, adding the parameter
    /// gradient into `grads`. Returns the loss.
    pub fn accumulate_param_grads(&self, x: &[f64], class: usize, grads: &mut MlpGradients) -> f64 {
        let trace = self.trace(x);
        let (loss, upstream) = cross_entropy(trace.activations.last().unwrap(), class);
        self.backprop(&trace, &upstream, Some(grads));
        loss
    }

    pub fn zero_grads(&self) -> MlpGradients {
        MlpGradients::zeros_like(self)
    }

    /// `params -= lr * grads`.
    pub fn apply_update(&mut self, grads: &MlpGradients, lr: f64) {
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (w, g) in layer.weights.iter_mut().zip(&grads.weights[i]) {
                *w -= lr * g;
            }
            for (b, g) in layer.bias.iter_mut().zip(&grads.bias[i]) {
                *b -= lr * g;
            }
        }
    }
}

/// Cross-entropy and its gradient with respect to the logits.
fn cross_entropy(logits: &[f64], class: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[class];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[class] -= 1.0;
    (loss.max(0.0), grad)
}

impl Classifier for TinyMlp {
    fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    fn num_classes(&self) -> usize {
        self.layers.last().unwrap().out_dim
    }

    fn label_of(&self, class: usize) -> Label {
        class as Label
    }

    fn class_of(&self, label: Label) -> Option<usize> {
        usize::try_from(label).ok().filter(|c| *c < self.num_classes())
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::CrossEntropy
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.trace(x).activations.pop().unwrap()
    }

    fn logits_with_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let trace = self.trace(x);
        let logits = trace.activations.last().unwrap().clone();
        let jac = (0..logits.len())
            .map(|k| {
                let mut unit = vec![0.0; logits.len()];
                unit[k] = 1.0;
                self.backprop(&trace, &unit, None)
            })
            .collect();
        (logits, jac)
    }

    fn predict_class(&self, x: &[f64]) -> usize {
        argmax(&self.logits(x))
    }

    fn class_loss_and_input_grad(&self, x: &[f64], class: usize) -> (f64, Vec<f64>) {
        let trace = self.trace(x);
        let (loss, upstream) = cross_entropy(trace.activations.last().unwrap(), class);
        (loss, self.backprop(&trace, &upstream, None))
    }
}
