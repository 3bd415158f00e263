//! Adversarial training of the student perceptron and the tiny MLP.
//!
//! Both trainers run mini-batch gradient descent. Adversarial examples are
//! regenerated for every batch from the weights at the start of that batch,
//! either at the global radius or at the per-sample strength of an
//! [`EpsilonSchedule`]. Every visit records whether the clean sample was
//! classified correctly, which yields the per-epoch history behind
//! classification difficulty.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{iterated_attack, perturb_signed, AttackConfig};
use crate::data::Dataset;
use crate::error::{contract, Error, Result};
use crate::io::derive_seed;
use crate::models::{sigmoid, sign0, Classifier, LinearModel, LossKind, TinyMlp};
use crate::pruning::{CdHistory, EpsilonSchedule, PruningPlan};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TrainAttack {
    Fgsm,
    /// PGD with `steps` iterations of size `step_fraction * eps` from a
    /// random start.
    Pgd { steps: usize, step_fraction: f64 },
}

impl TrainAttack {
    fn config(&self, epsilon: f64) -> AttackConfig {
        match *self {
            TrainAttack::Fgsm => AttackConfig::fgsm(epsilon),
            TrainAttack::Pgd { steps, step_fraction } => AttackConfig::pgd(epsilon, epsilon * step_fraction, steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub loss: LossKind,
    pub attack: TrainAttack,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.05,
            loss: LossKind::LogisticMargin,
            attack: TrainAttack::Fgsm,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(contract(format!("training radius must be finite and >= 0, got {}", self.epsilon)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(contract("epochs and batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(contract(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if let TrainAttack::Pgd { steps, step_fraction } = self.attack {
            if steps == 0 || !(step_fraction > 0.0 && step_fraction <= 2.0) {
                return Err(contract("pgd needs steps >= 1 and a step fraction in (0, 2]"));
            }
        }
        Ok(())
    }
}

fn check_inputs(dataset: &Dataset, plan: &PruningPlan, schedule: Option<&EpsilonSchedule>, cfg: &TrainConfig) -> Result<()> {
    cfg.validate()?;
    if plan.len() != dataset.len() {
        return Err(contract(format!("plan covers {} samples, dataset has {}", plan.len(), dataset.len())));
    }
    if plan.retained.is_empty() {
        return Err(Error::EmptyRetained {
            removed: plan.removed.len(),
            total: plan.len(),
        });
    }
    if let Some(s) = schedule {
        if s.values.len() != dataset.len() {
            return Err(contract("schedule length differs from the dataset"));
        }
        if s.epsilon > cfg.epsilon {
            return Err(contract(format!(
                "schedule radius {} exceeds the training radius {}",
                s.epsilon, cfg.epsilon
            )));
        }
    }
    Ok(())
}

/// Trains a bias-free linear student from zero initialisation on the
/// retained samples. The returned history has one column per retained
/// sample, in the order of `plan.retained`.
pub fn train_student(
    dataset: &Dataset,
    plan: &PruningPlan,
    schedule: Option<&EpsilonSchedule>,
    cfg: &TrainConfig,
) -> Result<(LinearModel, CdHistory)> {
    check_inputs(dataset, plan, schedule, cfg)?;
    if cfg.loss != LossKind::LogisticMargin {
        return Err(contract("the linear student is trained with the logistic-margin loss"));
    }
    if dataset.labels.iter().any(|y| y.abs() != 1) {
        return Err(contract("the linear student needs labels in {-1, +1}"));
    }
    match cfg.attack {
        TrainAttack::Fgsm => Ok(train_linear_fgsm(dataset, plan, schedule, cfg)),
        TrainAttack::Pgd { .. } => train_linear_generic(dataset, plan, schedule, cfg),
    }
}

fn strength(schedule: Option<&EpsilonSchedule>, cfg: &TrainConfig, i: usize) -> f64 {
    schedule.map_or(cfg.epsilon, |s| s.values[i])
}

/// FGSM on a linear model moves `x` to `x - e * y * sign(theta)`, so the
/// adversarial score is `theta.x - e * y * |theta|_1` and the gradient of the
/// loss splits into a data term and a multiple of `sign(theta)`.
fn train_linear_fgsm(dataset: &Dataset, plan: &PruningPlan, schedule: Option<&EpsilonSchedule>, cfg: &TrainConfig) -> (LinearModel, CdHistory) {
    let k = dataset.dim;
    let retained = &plan.retained;
    let mut theta = vec![0.0f64; k];
    let mut grad = vec![0.0; k];
    let mut order: Vec<usize> = (0..retained.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = CdHistory::empty();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut correct = vec![false; retained.len()];
        for batch in order.chunks(cfg.batch_size) {
            let l1: f64 = theta.iter().map(|t| t.abs()).sum();
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut along_sign = 0.0;
            for &j in batch {
                let i = retained[j];
                let x = dataset.row(i);
                let y = dataset.labels[i] as f64;
                let s: f64 = theta.iter().zip(x).map(|(t, v)| t * v).sum();
                correct[j] = (s >= 0.0) == (y > 0.0);
                let e = strength(schedule, cfg, i);
                let sig = sigmoid(-y * (s - e * y * l1));
                let c = y * sig;
                for (g, v) in grad.iter_mut().zip(x) {
                    *g -= c * v;
                }
                along_sign += sig * e;
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for (t, g) in theta.iter_mut().zip(&grad) {
                *t -= scale * (g + along_sign * sign0(*t));
            }
        }
        history.push_epoch(correct);
    }
    (LinearModel::new(theta, 0.0).expect("finite weights"), history)
}

/// Attack-agnostic trainer: builds each adversarial example explicitly.
fn train_linear_generic(dataset: &Dataset, plan: &PruningPlan, schedule: Option<&EpsilonSchedule>, cfg: &TrainConfig) -> Result<(LinearModel, CdHistory)> {
    let retained = &plan.retained;
    let mut model = LinearModel::zeros(dataset.dim);
    let mut grad = vec![0.0; dataset.dim];
    let mut order: Vec<usize> = (0..retained.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut attack_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "attack"));
    let attack = cfg.attack.config(cfg.epsilon);
    let mut history = CdHistory::empty();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut correct = vec![false; retained.len()];
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &j in batch {
                let i = retained[j];
                let x = dataset.row(i);
                let y = dataset.labels[i];
                correct[j] = model.is_correct(x, y);
                let adv = match schedule {
                    Some(s) => perturb_signed(&model, x, y, s.values[i], &attack, &mut attack_rng)?,
                    None => iterated_attack(&model, x, y, &attack, &mut attack_rng)?,
                };
                let yf = y as f64;
                let c = yf * sigmoid(-yf * model.score(&adv));
                for (g, v) in grad.iter_mut().zip(&adv) {
                    *g -= c * v;
                }
            }
            let scale = cfg.learning_rate / batch.len() as f64;
            for (t, g) in model.weights_mut().iter_mut().zip(&grad) {
                *t -= scale * g;
            }
        }
        history.push_epoch(correct);
    }
    Ok((model, history))
}

/// Trains a [`TinyMlp`] with layer widths `dims` (input first, classes last)
/// using cross-entropy on adversarial examples.
pub fn train_mlp(
    dataset: &Dataset,
    plan: &PruningPlan,
    schedule: Option<&EpsilonSchedule>,
    cfg: &TrainConfig,
    dims: &[usize],
) -> Result<(TinyMlp, CdHistory)> {
    check_inputs(dataset, plan, schedule, cfg)?;
    if cfg.loss != LossKind::CrossEntropy {
        return Err(contract("the multiclass model is trained with cross-entropy"));
    }
    if dims.len() < 2 || dims[0] != dataset.dim {
        return Err(contract("layer widths must start with the input dimension"));
    }
    let classes = *dims.last().unwrap();
    if dataset.labels.iter().any(|y| *y < 0 || *y as usize >= classes) {
        return Err(contract(format!("labels must be class ids below {classes}")));
    }
    let retained = &plan.retained;
    let mut model = TinyMlp::random(dims, derive_seed(cfg.seed, "init"));
    let mut order: Vec<usize> = (0..retained.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut attack_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "attack"));
    let attack = cfg.attack.config(cfg.epsilon);
    let mut history = CdHistory::empty();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut correct = vec![false; retained.len()];
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = model.zero_grads();
            for &j in batch {
                let i = retained[j];
                let x = dataset.row(i);
                let y = dataset.labels[i];
                correct[j] = model.predict_class(x) == y as usize;
                let adv = match schedule {
                    Some(s) => perturb_signed(&model, x, y, s.values[i], &attack, &mut attack_rng)?,
                    None => iterated_attack(&model, x, y, &attack, &mut attack_rng)?,
                };
                model.accumulate_param_grads(&adv, y as usize, &mut grads);
            }
            model.apply_update(&grads, cfg.learning_rate / batch.len() as f64);
        }
        history.push_epoch(correct);
    }
    Ok((model, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_teacher_dataset, make_toy_multiclass};
    use crate::pruning::{cd_score, epsilon_schedule};

    fn quick(epsilon: f64, seed: u64) -> TrainConfig {
        TrainConfig {
            epsilon,
            epochs: 20,
            seed,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_radius_is_clean_training_bit_for_bit() {
        let d = generate_teacher_dataset(20, 200, 1).unwrap();
        let plan = PruningPlan::keep_all(d.len());
        let cfg = quick(0.0, 5);
        let (fast, h1) = train_student(&d, &plan, None, &cfg).unwrap();
        let (generic, h2) = train_linear_generic(&d, &plan, None, &cfg).unwrap();
        assert_eq!(fast.weights(), generic.weights());
        assert_eq!(h1, h2);
        let zeros = epsilon_schedule(&vec![0.0; d.len()], 0.01, 0.0).unwrap();
        let (scheduled, _) = train_student(&d, &plan, Some(&zeros), &TrainConfig { epsilon: 0.01, ..cfg }).unwrap();
        assert_eq!(scheduled.weights(), fast.weights());
    }

    #[test]
    fn fgsm_fast_path_matches_explicit_attacks() {
        let d = generate_teacher_dataset(10, 100, 2).unwrap();
        let plan = PruningPlan::keep_all(d.len());
        let cfg = quick(0.05, 3);
        let (fast, _) = train_student(&d, &plan, None, &cfg).unwrap();
        let (generic, _) = train_linear_generic(&d, &plan, None, &cfg).unwrap();
        for (a, b) in fast.weights().iter().zip(generic.weights()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        let margins: Vec<f64> = d.true_margins.clone().unwrap().iter().map(|m| m - 0.03).collect();
        let s = epsilon_schedule(&margins, 0.05, 0.0).unwrap();
        let (fast, _) = train_student(&d, &plan, Some(&s), &cfg).unwrap();
        let (generic, _) = train_linear_generic(&d, &plan, Some(&s), &cfg).unwrap();
        for (a, b) in fast.weights().iter().zip(generic.weights()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn separable_pair_is_learned() {
        let d = Dataset::new(2, vec![1.0, 0.3, -1.0, 0.2], vec![1, -1], None, vec![0, 1]).unwrap();
        let (m, history) = train_student(&d, &PruningPlan::keep_all(2), None, &quick(0.01, 0)).unwrap();
        assert!(m.is_correct(d.row(0), 1) && m.is_correct(d.row(1), -1));
        assert_eq!(history.num_epochs(), 20);
        assert_eq!(cd_score(&history, 1).unwrap(), 1.0 / 20.0);
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let d = generate_teacher_dataset(10, 100, 2).unwrap();
        let plan = PruningPlan::keep_all(d.len());
        let a = train_student(&d, &plan, None, &quick(0.01, 1)).unwrap().0;
        let b = train_student(&d, &plan, None, &quick(0.01, 1)).unwrap().0;
        let c = train_student(&d, &plan, None, &quick(0.01, 2)).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn history_follows_retained_order() {
        let d = generate_teacher_dataset(5, 10, 2).unwrap();
        let plan = crate::pruning::filter_below_margin(d.true_margins.as_ref().unwrap(), 0.5).unwrap();
        let (_, h) = train_student(&d, &plan, None, &quick(0.0, 0)).unwrap();
        assert_eq!(h.num_samples(), plan.retained.len());
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = generate_teacher_dataset(5, 4, 2).unwrap();
        let empty = crate::pruning::filter_below_margin(&[-1.0; 4], 0.0).unwrap();
        assert!(matches!(
            train_student(&d, &empty, None, &quick(0.0, 0)),
            Err(Error::EmptyRetained { .. })
        ));
        assert!(train_student(&d, &PruningPlan::keep_all(3), None, &quick(0.0, 0)).is_err());
        let cfg = TrainConfig { batch_size: 0, ..quick(0.0, 0) };
        assert!(train_student(&d, &PruningPlan::keep_all(4), None, &cfg).is_err());
    }

    #[test]
    fn pgd_training_runs_and_learns() {
        let d = generate_teacher_dataset(10, 400, 4).unwrap();
        let cfg = TrainConfig {
            attack: TrainAttack::Pgd { steps: 3, step_fraction: 0.5 },
            ..quick(0.01, 0)
        };
        let (m, _) = train_student(&d, &PruningPlan::keep_all(d.len()), None, &cfg).unwrap();
        assert!(m.weights()[0] > 5.0 * m.weights()[1..].iter().map(|w| w.abs()).fold(0.0, f64::max));
    }

    #[test]
    fn mlp_learns_blobs() {
        let d = make_toy_multiclass(3, 600, 1).unwrap();
        let cfg = TrainConfig {
            loss: LossKind::CrossEntropy,
            epochs: 30,
            ..TrainConfig::default()
        };
        let (m, h) = train_mlp(&d, &PruningPlan::keep_all(d.len()), None, &cfg, &[2, 16, 3]).unwrap();
        let acc = (0..d.len()).filter(|i| m.predict_class(d.row(*i)) == d.labels[*i] as usize).count() as f64 / d.len() as f64;
        // Three unit-variance blobs on the unit circle overlap heavily; the
        // Bayes accuracy is about 0.6.
        assert!(acc > 0.5, "{acc}");
        assert_eq!(h.num_epochs(), 30);
        let bad = TrainConfig { loss: LossKind::LogisticMargin, ..cfg };
        assert!(train_mlp(&d, &PruningPlan::keep_all(d.len()), None, &bad, &[2, 16, 3]).is_err());
    }
}
