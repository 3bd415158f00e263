//! Margin-based data pruning for adversarial training on desk-scale models.
//!
//! The crate covers the whole pipeline of the teacher-student perceptron
//! study and its multiclass toy counterpart:
//!
//! - [`models`]: the linear student and a small rectifier MLP with exact
//!   input gradients, plus checkpoint I/O.
//! - [`attacks`]: FGSM, BIM/PGD and signed (anti-)adversarial perturbations.
//! - [`margins`]: analytic, DeepFool, fast (early-stopped BIM + bisection)
//!   and online segment margins.
//! - [`pruning`]: prune-easy / prune-difficult plans, classification
//!   difficulty and the margin-clamped per-sample attack strengths.
//! - [`train`] and [`lab`]: adversarial training, error metrics and
//!   deterministic grid sweeps.

pub mod attacks;
pub mod data;
pub mod error;
pub mod io;
pub mod lab;
pub mod margins;
pub mod models;
pub mod pruning;
pub mod rational;
pub mod train;

pub use error::{Error, Result};
