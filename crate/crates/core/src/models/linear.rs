use serde::{Deserialize, Serialize};

use super::{dot, sigmoid, softplus, Classifier, Label, LossKind};
use crate::error::{contract, Result};

/// Binary affine classifier `sign(theta . x + b)` with labels `-1`/`+1`.
///
/// Used both as the student perceptron and, frozen, as the teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    weights: Vec<f64>,
    bias: f64,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(contract("linear model needs at least one weight"));
        }
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(contract("linear model parameters must be finite"));
        }
        Ok(Self { weights, bias })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            weights: vec![0.0; dim.max(1)],
            bias: 0.0,
        }
    }

    /// The canonical teacher `(1, 0, 0, ...)`.
    pub fn teacher(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        m.weights[0] = 1.0;
        m
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn set_bias(&mut self, bias: f64) {
        self.bias = bias;
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    pub fn l1_norm(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

impl Classifier for LinearModel {
    fn input_dim(&self) -> usize {
        self.weights.len()
    }

    fn num_classes(&self) -> usize {
        2
    }

    // Class 0 is the negative label, class 1 the positive one.
    fn label_of(&self, class: usize) -> Label {
        if class == 0 {
            -1
        } else {
            1
        }
    }

    fn class_of(&self, label: Label) -> Option<usize> {
        match label {
            -1 => Some(0),
            1 => Some(1),
            _ => None,
        }
    }

    fn loss_kind(&self) -> LossKind {
        LossKind::LogisticMargin
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.score(x)]
    }

    fn logits_with_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        (
            self.logits(x),
            vec![vec![0.0; self.weights.len()], self.weights.clone()],
        )
    }

    /// A score of exactly zero predicts the positive class.
    fn predict_class(&self, x: &[f64]) -> usize {
        usize::from(self.score(x) >= 0.0)
    }

    fn class_loss_and_input_grad(&self, x: &[f64], class: usize) -> (f64, Vec<f64>) {
        let y = self.label_of(class) as f64;
        let z = y * self.score(x);
        let coef = -y * sigmoid(-z);
        (softplus(-z), self.weights.iter().map(|w| coef * w).collect())
    }
}
