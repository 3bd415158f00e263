//! Differentiable desk-scale classifiers.
//!
//! Two model families share the [`Classifier`] trait: the binary
//! [`LinearModel`] (labels `-1`/`+1`) and the multiclass [`TinyMlp`]
//! (labels `0..C`). Attacks and margin estimators are written against the
//! trait, so they work on either.

mod checkpoint;
mod linear;
mod mlp;

pub use checkpoint::{load_checkpoint, read_checkpoint, write_checkpoint, CheckpointFormat};
pub use linear::LinearModel;
pub use mlp::{DenseLayer, MlpGradients, TinyMlp};

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};

/// Class label. Binary models use `-1`/`+1`; multiclass models use class ids.
pub type Label = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    /// `log(1 + exp(-y * score))`, binary models only.
    LogisticMargin,
    /// Softmax cross-entropy, multiclass models only.
    CrossEntropy,
}

/// A classifier exposing logits, predictions and input gradients.
///
/// The `*_unchecked` style methods assume the caller already validated the
/// input dimension; the checked entry points are [`Classifier::predict`] and
/// [`loss_and_input_grad`].
pub trait Classifier: Send + Sync {
    fn input_dim(&self) -> usize;

    fn num_classes(&self) -> usize;

    fn label_of(&self, class: usize) -> Label;

    fn class_of(&self, label: Label) -> Option<usize>;

    /// The loss this model is trained and attacked with.
    fn loss_kind(&self) -> LossKind;

    fn logits(&self, x: &[f64]) -> Vec<f64>;

    /// Logits together with the Jacobian rows `d logit_k / d x`.
    fn logits_with_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>);

    /// Index of the predicted class. Ties go to the lowest index unless the
    /// model documents otherwise.
    fn predict_class(&self, x: &[f64]) -> usize;

    /// Loss of `x` against class index `class` and its gradient in `x`.
    fn class_loss_and_input_grad(&self, x: &[f64], class: usize) -> (f64, Vec<f64>);

    fn predict(&self, x: &[f64]) -> Result<Label> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.label_of(self.predict_class(x)))
    }

    fn is_correct(&self, x: &[f64], y: Label) -> bool {
        self.class_of(y) == Some(self.predict_class(x))
    }
}

/// Loss value and exact input gradient, validating dimensions, label and
/// loss kind against the model.
pub fn loss_and_input_grad<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    loss: LossKind,
) -> Result<(f64, Vec<f64>)> {
    check_dim(model.input_dim(), x.len())?;
    if loss != model.loss_kind() {
        return Err(contract(format!(
            "loss {loss:?} is not defined for a model trained with {:?}",
            model.loss_kind()
        )));
    }
    let class = model
        .class_of(y)
        .ok_or_else(|| contract(format!("label {y} is outside the model's label space")))?;
    Ok(model.class_loss_and_input_grad(x, class))
}

/// Either model family, as loaded from a checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearModel),
    Mlp(TinyMlp),
}

macro_rules! delegate {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Model::Linear($m) => $e,
            Model::Mlp($m) => $e,
        }
    };
}

impl Classifier for Model {
    fn input_dim(&self) -> usize {
        delegate!(self, m => m.input_dim())
    }
    fn num_classes(&self) -> usize {
        delegate!(self, m => m.num_classes())
    }
    fn label_of(&self, class: usize) -> Label {
        delegate!(self, m => m.label_of(class))
    }
    fn class_of(&self, label: Label) -> Option<usize> {
        delegate!(self, m => m.class_of(label))
    }
    fn loss_kind(&self) -> LossKind {
        delegate!(self, m => m.loss_kind())
    }
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        delegate!(self, m => m.logits(x))
    }
    fn logits_with_jacobian(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        delegate!(self, m => m.logits_with_jacobian(x))
    }
    fn predict_class(&self, x: &[f64]) -> usize {
        delegate!(self, m => m.predict_class(x))
    }
    fn class_loss_and_input_grad(&self, x: &[f64], class: usize) -> (f64, Vec<f64>) {
        delegate!(self, m => m.class_loss_and_input_grad(x, class))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Index of the largest value; ties resolve to the lowest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = k;
        }
    }
    best
}
