//! Sign-gradient perturbations: FGSM, BIM/PGD, signed (anti-)adversarial
//! perturbations and the segment interpolation used by online margins.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, contract, Result};
use crate::models::{sign0, Classifier, Label, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// L-infinity radius. `f64::INFINITY` disables the projection.
    pub epsilon: f64,
    /// Per-iteration L-infinity step.
    pub step: f64,
    pub iters: usize,
    #[serde(default)]
    pub random_init: bool,
    #[serde(default)]
    pub early_stop_on_flip: bool,
    /// Optional per-coordinate box, e.g. `[0, 1]` for image-like data.
    #[serde(default)]
    pub domain: Option<(f64, f64)>,
}

impl AttackConfig {
    /// Single full-size step, no random start.
    pub fn fgsm(epsilon: f64) -> Self {
        Self {
            epsilon,
            step: epsilon,
            iters: 1,
            random_init: false,
            early_stop_on_flip: false,
            domain: None,
        }
    }

    /// BIM: iterated sign steps starting from the clean point.
    pub fn bim(epsilon: f64, step: f64, iters: usize) -> Self {
        Self {
            epsilon,
            step,
            iters,
            random_init: false,
            early_stop_on_flip: false,
            domain: None,
        }
    }

    /// PGD: BIM from a uniform random start in the ball.
    pub fn pgd(epsilon: f64, step: f64, iters: usize) -> Self {
        Self {
            random_init: true,
            ..Self::bim(epsilon, step, iters)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(contract(format!("attack radius must be >= 0, got {}", self.epsilon)));
        }
        if self.iters == 0 {
            return Err(contract("attack needs at least one iteration"));
        }
        if self.epsilon > 0.0 && !(self.step > 0.0 && self.step.is_finite()) {
            return Err(contract(format!("attack step must be positive, got {}", self.step)));
        }
        if self.epsilon.is_finite() && self.epsilon > 0.0 && self.step > 2.0 * self.epsilon {
            return Err(contract(format!(
                "step {} exceeds twice the radius {}",
                self.step, self.epsilon
            )));
        }
        if self.random_init && !self.epsilon.is_finite() {
            return Err(contract("random start needs a finite radius"));
        }
        if let Some((lo, hi)) = self.domain {
            if !(lo < hi) {
                return Err(contract("empty input domain"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Increase the loss (adversarial).
    Ascent,
    /// Decrease the loss (anti-adversarial).
    Descent,
}

impl Direction {
    fn factor(self) -> f64 {
        match self {
            Direction::Ascent => 1.0,
            Direction::Descent => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub point: Vec<f64>,
    /// Number of gradient steps taken.
    pub iterations: usize,
    /// Whether the prediction left its initial value.
    pub flipped: bool,
}

fn class_for<M: Classifier + ?Sized>(model: &M, x: &[f64], y: Label) -> Result<usize> {
    check_dim(model.input_dim(), x.len())?;
    model
        .class_of(y)
        .ok_or_else(|| contract(format!("label {y} is outside the model's label space")))
}

/// `x + eps * sign(grad_x L(model, x, y))`.
pub fn fgsm<M: Classifier + ?Sized>(model: &M, x: &[f64], y: Label, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon >= 0.0) {
        return Err(contract(format!("attack radius must be >= 0, got {epsilon}")));
    }
    let class = class_for(model, x, y)?;
    if epsilon == 0.0 {
        return Ok(x.to_vec());
    }
    let (_, grad) = model.class_loss_and_input_grad(x, class);
    Ok(x.iter().zip(&grad).map(|(xi, g)| xi + epsilon * sign0(*g)).collect())
}

/// FGSM for the linear student written into `out` without allocating.
///
/// The logistic-margin gradient is a positive multiple of `-y * theta`, so
/// the step is `-y * eps_signed * sign(theta)`; a negative `eps_signed` gives
/// the anti-adversarial step.
pub fn linear_fgsm_into(model: &LinearModel, x: &[f64], y: Label, eps_signed: f64, out: &mut [f64]) {
    let dir = -(y as f64) * eps_signed;
    for ((o, xi), t) in out.iter_mut().zip(x).zip(model.weights()) {
        *o = xi + dir * sign0(*t);
    }
}

/// Iterated sign-gradient attack (BIM, or PGD with `random_init`).
pub fn iterated_attack<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    cfg: &AttackConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    Ok(iterated_attack_outcome(model, x, y, cfg, Direction::Ascent, rng)?.point)
}

/// Iterated attack reporting the steps taken and whether the prediction
/// flipped.
pub fn iterated_attack_outcome<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    cfg: &AttackConfig,
    direction: Direction,
    rng: &mut dyn RngCore,
) -> Result<AttackOutcome> {
    cfg.validate()?;
    let class = class_for(model, x, y)?;
    let initial = model.predict_class(x);
    if cfg.epsilon == 0.0 {
        return Ok(AttackOutcome {
            point: x.to_vec(),
            iterations: 0,
            flipped: false,
        });
    }
    let eps = cfg.epsilon;
    let project = |v: &mut [f64]| {
        for (vi, xi) in v.iter_mut().zip(x) {
            if eps.is_finite() {
                *vi = vi.clamp(xi - eps, xi + eps);
            }
            if let Some((lo, hi)) = cfg.domain {
                *vi = vi.clamp(lo, hi);
            }
        }
    };
    let mut cur = x.to_vec();
    if cfg.random_init {
        for v in cur.iter_mut() {
            *v += rng.random_range(-eps..=eps);
        }
        project(&mut cur);
    }
    let sign = direction.factor();
    for it in 1..=cfg.iters {
        let (_, grad) = model.class_loss_and_input_grad(&cur, class);
        for (v, g) in cur.iter_mut().zip(&grad) {
            *v += sign * cfg.step * sign0(*g);
        }
        project(&mut cur);
        if cfg.early_stop_on_flip && model.predict_class(&cur) != initial {
            return Ok(AttackOutcome {
                point: cur,
                iterations: it,
                flipped: true,
            });
        }
    }
    let flipped = model.predict_class(&cur) != initial;
    Ok(AttackOutcome {
        point: cur,
        iterations: cfg.iters,
        flipped,
    })
}

/// Perturbation of signed strength `eps_i`: adversarial with radius `eps_i`
/// when `eps_i >= 0`, anti-adversarial (loss descent) with radius `|eps_i|`
/// otherwise.
///
/// `cfg.epsilon` is the global radius; the per-iteration step is rescaled by
/// `|eps_i| / cfg.epsilon` so the step-to-radius ratio of `cfg` is kept.
pub fn perturb_signed<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    eps_i: f64,
    cfg: &AttackConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    if !eps_i.is_finite() || eps_i.abs() > cfg.epsilon {
        return Err(contract(format!(
            "per-sample strength {eps_i} exceeds the global radius {}",
            cfg.epsilon
        )));
    }
    if eps_i == 0.0 {
        class_for(model, x, y)?;
        return Ok(x.to_vec());
    }
    let radius = eps_i.abs();
    let step = if cfg.step == cfg.epsilon {
        radius
    } else {
        cfg.step * (radius / cfg.epsilon)
    };
    let scaled = AttackConfig {
        epsilon: radius,
        step,
        ..*cfg
    };
    let direction = if eps_i > 0.0 { Direction::Ascent } else { Direction::Descent };
    Ok(iterated_attack_outcome(model, x, y, &scaled, direction, rng)?.point)
}

/// `x + (m / eps) (x' - x)`, for `m` in `[-eps, eps]`.
pub fn segment_point(x: &[f64], x_adv: &[f64], m: f64, epsilon: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0) {
        return Err(contract(format!("segment radius must be positive, got {epsilon}")));
    }
    if !(m.abs() <= epsilon) {
        return Err(contract(format!("segment position {m} outside [-{epsilon}, {epsilon}]")));
    }
    extrapolated_point(x, x_adv, m, epsilon)
}

/// Same line as [`segment_point`] but without the `[-eps, eps]` restriction.
pub fn extrapolated_point(x: &[f64], x_adv: &[f64], m: f64, epsilon: f64) -> Result<Vec<f64>> {
    if x.len() != x_adv.len() {
        return Err(contract("segment endpoints differ in dimension"));
    }
    let t = m / epsilon;
    Ok(x.iter().zip(x_adv).map(|(a, b)| a + t * (b - a)).collect())
}

pub fn linf_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::models::{loss_and_input_grad, LossKind, TinyMlp};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn lin(w: &[f64]) -> LinearModel {
        LinearModel::new(w.to_vec(), 0.0).unwrap()
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn fgsm_zero_radius_is_identity() {
        let m = lin(&[2.0, -1.0]);
        assert_eq!(fgsm(&m, &[0.5, 0.3], 1, 0.0).unwrap(), vec![0.5, 0.3]);
    }

    #[test]
    fn fgsm_moves_against_the_label() {
        let m = lin(&[2.0, -1.0]);
        let adv = fgsm(&m, &[0.5, 0.3], 1, 0.1).unwrap();
        assert!((adv[0] - 0.4).abs() < 1e-15 && (adv[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn fgsm_can_mislabel_a_low_margin_sample() {
        let m = lin(&[1.0, 0.0]);
        let adv = fgsm(&m, &[0.05, 0.7], 1, 0.1).unwrap();
        assert!((adv[0] + 0.05).abs() < 1e-15);
        assert_eq!(adv[1], 0.7);
        assert_eq!(LinearModel::teacher(2).predict(&adv).unwrap(), -1);
    }

    #[test]
    fn bim_single_full_step_is_fgsm() {
        let mlp = TinyMlp::random(&[2, 32, 3], 5);
        let x = [0.2, -0.4];
        let a = fgsm(&mlp, &x, 2, 0.05).unwrap();
        let b = iterated_attack(&mlp, &x, 2, &AttackConfig::fgsm(0.05), &mut rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn early_stop_at_first_flip() {
        let m = lin(&[1.0, 0.0]);
        let cfg = AttackConfig {
            early_stop_on_flip: true,
            ..AttackConfig::bim(f64::INFINITY, 0.01, 100)
        };
        let out = iterated_attack_outcome(&m, &[0.055, 0.4], 1, &cfg, Direction::Ascent, &mut rng()).unwrap();
        assert_eq!(out.iterations, 6);
        assert!(out.flipped);
        assert!((out.point[0] + 0.005).abs() < 1e-12);
        assert_eq!(out.point[1], 0.4);
    }

    #[test]
    fn anti_adversarial_moves_away_from_boundary() {
        let m = lin(&[1.0, 0.0]);
        let cfg = AttackConfig::fgsm(0.1);
        let out = perturb_signed(&m, &[0.02, 0.0], 1, -0.05, &cfg, &mut rng()).unwrap();
        assert!((out[0] - 0.07).abs() < 1e-15);
        assert_eq!(out[1], 0.0);
        assert_eq!(perturb_signed(&m, &[0.02, 0.0], 1, 0.0, &cfg, &mut rng()).unwrap(), vec![0.02, 0.0]);
        assert!(perturb_signed(&m, &[0.02, 0.0], 1, 0.2, &cfg, &mut rng()).is_err());
    }

    #[test]
    fn positive_strength_lowers_teacher_margin_by_l1_norm() {
        let teacher = lin(&[1.0, -2.0, 0.5]);
        let x = [0.3, -0.4, 0.9];
        let cfg = AttackConfig::fgsm(0.1);
        let adv = perturb_signed(&teacher, &x, 1, 0.05, &cfg, &mut rng()).unwrap();
        let drop = teacher.score(&x) - teacher.score(&adv);
        assert!((drop - 0.05 * teacher.l1_norm()).abs() < 1e-12);
    }

    #[test]
    fn linear_fast_path_matches_generic_fgsm() {
        let m = lin(&[0.7, 0.0, -1.2]);
        let x = [0.1, 2.0, -0.3];
        let mut out = [0.0; 3];
        for (y, e) in [(1, 0.03), (-1, 0.03), (1, -0.02)] {
            linear_fgsm_into(&m, &x, y, e, &mut out);
            let cfg = AttackConfig::fgsm(0.05);
            let expected = perturb_signed(&m, &x, y, e, &cfg, &mut rng()).unwrap();
            assert_eq!(out.to_vec(), expected);
        }
    }

    #[test]
    fn segment_points() {
        let x = [4.0 / 255.0, 0.0];
        let xa = [-4.0 / 255.0, 0.0];
        let e = 8.0 / 255.0;
        assert_eq!(segment_point(&x, &xa, 0.0, e).unwrap(), x.to_vec());
        assert_eq!(segment_point(&x, &xa, e, e).unwrap(), xa.to_vec());
        let mid = segment_point(&x, &xa, 4.0 / 255.0, e).unwrap();
        assert!(mid[0].abs() < 1e-15 && mid[1] == 0.0);
        assert!(segment_point(&x, &xa, 9.0 / 255.0, e).is_err());
        assert!(segment_point(&x, &xa, 0.0, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::bim(0.1, 0.3, 3).validate().is_err());
        assert!(AttackConfig::bim(0.1, 0.05, 0).validate().is_err());
        assert!(AttackConfig::pgd(f64::INFINITY, 0.05, 3).validate().is_err());
        assert!(AttackConfig::pgd(0.1, 0.025, 10).validate().is_ok());
    }

    proptest! {
        #[test]
        fn outputs_stay_in_the_ball(seed in any::<u64>(), eps in 0.0..0.5f64, iters in 1usize..8, random in any::<bool>()) {
            let mlp = TinyMlp::random(&[2, 16, 3], seed);
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x = [r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let cfg = AttackConfig { random_init: random, ..AttackConfig::bim(eps, eps / 2.0, iters) };
            let adv = iterated_attack(&mlp, &x, (seed % 3) as i64, &cfg, &mut r).unwrap();
            prop_assert!(linf_distance(&adv, &x) <= eps + 1e-12);
            let neg = perturb_signed(&mlp, &x, 0, -eps / 2.0, &cfg, &mut r).unwrap();
            prop_assert!(linf_distance(&neg, &x) <= eps / 2.0 + 1e-12);
        }

        #[test]
        fn anti_adversarial_never_raises_linear_loss(
            w in prop::collection::vec(-2.0..2.0f64, 1..6),
            seed in any::<u64>(),
            a in 1e-4..0.5f64,
        ) {
            let m = LinearModel::new(w.clone(), 0.0).unwrap();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = w.iter().map(|_| r.random_range(-1.0..1.0)).collect();
            let y = if r.random_bool(0.5) { 1 } else { -1 };
            let moved = perturb_signed(&m, &x, y, -a, &AttackConfig::fgsm(a), &mut r).unwrap();
            let before = loss_and_input_grad(&m, &x, y, LossKind::LogisticMargin).unwrap().0;
            let after = loss_and_input_grad(&m, &moved, y, LossKind::LogisticMargin).unwrap().0;
            prop_assert!(after <= before);
        }
    }
}
