//! Margin estimators.
//!
//! All margins are signed L-infinity distances to the decision boundary of a
//! reference model: positive when the model classifies the clean sample
//! correctly, negative otherwise.
//!
//! * [`analytic_margin`]: exact, affine binary models only.
//! * [`deepfool_margin`]: iterative linearisation of the nearest class
//!   boundary (L-infinity geometry by default).
//! * [`fast_margin`]: early-stopped BIM followed by bisection along the
//!   found direction.
//! * [`online_margin`]: bisection on the segment between a sample and its
//!   full-strength adversarial example.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{extrapolated_point, iterated_attack, linf_distance, AttackConfig};
use crate::error::{check_dim, contract, Error, Result};
use crate::io::format_sig;
use crate::models::{sign0, Classifier, Label, LinearModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginMethod {
    Analytic,
    DeepFool,
    Fast,
    Online,
}

impl MarginMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            MarginMethod::Analytic => "analytic",
            MarginMethod::DeepFool => "deepfool",
            MarginMethod::Fast => "fast",
            MarginMethod::Online => "online",
        }
    }
}

impl fmt::Display for MarginMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MarginMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Self::Analytic),
            "deepfool" => Ok(Self::DeepFool),
            "fast" => Ok(Self::Fast),
            "online" => Ok(Self::Online),
            other => Err(Error::Parse(format!("unknown margin method {other:?}"))),
        }
    }
}

/// Result of a single margin estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginEstimate {
    pub margin: f64,
    pub iterations: usize,
    /// False when the estimator hit its iteration budget without crossing the
    /// boundary; the margin is then a best effort.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginRecord {
    pub sample_id: u64,
    pub margin: f64,
    pub method: MarginMethod,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Linf,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeepFoolConfig {
    pub max_iter: usize,
    pub overshoot: f64,
    pub norm: Norm,
}

impl Default for DeepFoolConfig {
    fn default() -> Self {
        Self {
            max_iter: 50,
            overshoot: 0.02,
            norm: Norm::Linf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FastMarginConfig {
    /// BIM step size.
    pub step: f64,
    pub i_max: usize,
    pub j_max: usize,
}

impl FastMarginConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.i_max == 0 || self.j_max == 0 {
            return Err(contract(format!("fast margin parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

fn label_class<M: Classifier + ?Sized>(model: &M, x: &[f64], y: Label) -> Result<usize> {
    check_dim(model.input_dim(), x.len())?;
    model
        .class_of(y)
        .ok_or_else(|| contract(format!("label {y} is outside the model's label space")))
}

/// `y (theta . x + b) / ||theta||_1`, the signed L-infinity distance to the
/// hyperplane.
pub fn analytic_margin(model: &LinearModel, x: &[f64], y: Label) -> Result<f64> {
    label_class(model, x, y)?;
    let l1 = model.l1_norm();
    if l1 == 0.0 {
        return Err(Error::DegenerateModel("zero weight vector has no boundary"));
    }
    Ok(y as f64 * model.score(x) / l1)
}

pub fn deepfool_margin<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    cfg: &DeepFoolConfig,
) -> Result<MarginEstimate> {
    let class = label_class(model, x, y)?;
    let start = model.predict_class(x);
    let sign = if start == class { 1.0 } else { -1.0 };
    let dim = x.len();
    let norm = |v: &[f64]| match cfg.norm {
        Norm::Linf => v.iter().fold(0.0f64, |a, b| a.max(b.abs())),
        Norm::L2 => v.iter().map(|a| a * a).sum::<f64>().sqrt(),
    };
    let mut total = vec![0.0; dim];
    let mut cur = x.to_vec();
    let mut w = vec![0.0; dim];
    for it in 0..cfg.max_iter {
        if model.predict_class(&cur) != start {
            return Ok(MarginEstimate {
                margin: sign * norm(&total),
                iterations: it,
                converged: true,
            });
        }
        let (logits, jac) = model.logits_with_jacobian(&cur);
        // Nearest linearised boundary among the other classes.
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for k in (0..logits.len()).filter(|k| *k != start) {
            for ((wj, a), b) in w.iter_mut().zip(&jac[k]).zip(&jac[start]) {
                *wj = a - b;
            }
            let gap = (logits[k] - logits[start]).abs();
            let dual = match cfg.norm {
                Norm::Linf => w.iter().map(|v| v.abs()).sum::<f64>(),
                Norm::L2 => w.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
            if dual == 0.0 {
                continue;
            }
            let dist = gap / dual;
            if best.as_ref().is_none_or(|(d, _, _)| dist < *d) {
                best = Some((dist, dual, w.clone()));
            }
        }
        let Some((dist, dual, w_best)) = best else {
            break;
        };
        if dist == 0.0 {
            // Already on the boundary.
            return Ok(MarginEstimate {
                margin: sign * norm(&total),
                iterations: it,
                converged: true,
            });
        }
        for (t, wj) in total.iter_mut().zip(&w_best) {
            *t += match cfg.norm {
                Norm::Linf => dist * sign0(*wj),
                Norm::L2 => dist * wj / dual,
            };
        }
        for ((c, xi), t) in cur.iter_mut().zip(x).zip(&total) {
            *c = xi + (1.0 + cfg.overshoot) * t;
        }
    }
    let converged = model.predict_class(&cur) != start;
    Ok(MarginEstimate {
        margin: sign * norm(&total),
        iterations: cfg.max_iter,
        converged,
    })
}

/// Early-stopped BIM, then bisection on the L-infinity size of the found
/// perturbation.
///
/// Samples the model gets right are attacked (`k = +1`); misclassified ones
/// are pushed towards their label (`k = -1`), which yields a negative margin.
/// Bisection probes the point at L-infinity distance `|m|` along the
/// direction found by BIM.
pub fn fast_margin<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    cfg: &FastMarginConfig,
) -> Result<MarginEstimate> {
    cfg.validate()?;
    let class = label_class(model, x, y)?;
    let start = model.predict_class(x);
    let k = if start == class { 1.0 } else { -1.0 };
    let mut cur = x.to_vec();
    let mut steps = 0;
    while model.predict_class(&cur) == start && steps < cfg.i_max {
        let (_, grad) = model.class_loss_and_input_grad(&cur, class);
        for (c, g) in cur.iter_mut().zip(&grad) {
            *c += k * cfg.step * sign0(*g);
        }
        steps += 1;
    }
    if model.predict_class(&cur) == start {
        return Ok(MarginEstimate {
            margin: k * cfg.i_max as f64 * cfg.step,
            iterations: steps,
            converged: false,
        });
    }
    let reach = linf_distance(&cur, x);
    let m = k * reach;
    let (mut down, mut up) = (m.min(0.0), m.max(0.0));
    let mut probe = vec![0.0; x.len()];
    for _ in 0..cfg.j_max {
        let mid = 0.5 * (down + up);
        let t = mid.abs() / reach;
        for ((p, a), b) in probe.iter_mut().zip(x).zip(&cur) {
            *p = a + (b - a) * t;
        }
        if model.predict_class(&probe) == class {
            down = mid;
        } else {
            up = mid;
        }
    }
    Ok(MarginEstimate {
        margin: 0.5 * (down + up),
        iterations: steps,
        converged: true,
    })
}

/// Largest `m` in `[-eps, eps]` at which `x + (m / eps)(x' - x)` is still
/// classified as `y`, or `-eps` when no probed point is.
pub fn online_margin<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    x_adv: &[f64],
    epsilon: f64,
    j_max: usize,
) -> Result<f64> {
    let class = label_class(model, x, y)?;
    check_dim(x.len(), x_adv.len())?;
    if !(epsilon > 0.0) {
        return Err(contract(format!("online margin needs a positive radius, got {epsilon}")));
    }
    let correct_at = |m: f64| -> Result<bool> {
        Ok(model.predict_class(&extrapolated_point(x, x_adv, m, epsilon)?) == class)
    };
    if correct_at(epsilon)? {
        return Ok(epsilon);
    }
    let mut lo = if correct_at(-epsilon)? {
        -epsilon
    } else if correct_at(0.0)? {
        0.0
    } else {
        return Ok(-epsilon);
    };
    let mut hi = epsilon;
    for _ in 0..j_max {
        let mid = 0.5 * (lo + hi);
        if correct_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// How to estimate margins for a batch of samples.
#[derive(Debug, Clone, PartialEq)]
pub enum MarginSpec {
    Analytic,
    DeepFool(DeepFoolConfig),
    Fast(FastMarginConfig),
    /// Online margin against an attack of radius `attack.epsilon`.
    Online { attack: AttackConfig, j_max: usize, seed: u64 },
}

impl MarginSpec {
    pub fn method(&self) -> MarginMethod {
        match self {
            MarginSpec::Analytic => MarginMethod::Analytic,
            MarginSpec::DeepFool(_) => MarginMethod::DeepFool,
            MarginSpec::Fast(_) => MarginMethod::Fast,
            MarginSpec::Online { .. } => MarginMethod::Online,
        }
    }
}

/// Margin of one sample under `spec`. `Analytic` needs a linear model.
pub fn estimate_margin(model: &crate::models::Model, x: &[f64], y: Label, spec: &MarginSpec, sample_id: u64) -> Result<MarginEstimate> {
    use crate::models::Model;
    match spec {
        MarginSpec::Analytic => match model {
            Model::Linear(m) => Ok(MarginEstimate {
                margin: analytic_margin(m, x, y)?,
                iterations: 0,
                converged: true,
            }),
            Model::Mlp(_) => Err(contract("analytic margins need an affine binary model")),
        },
        MarginSpec::DeepFool(cfg) => deepfool_margin(model, x, y, cfg),
        MarginSpec::Fast(cfg) => fast_margin(model, x, y, cfg),
        MarginSpec::Online { attack, j_max, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ sample_id.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let adv = iterated_attack(model, x, y, attack, &mut rng)?;
            Ok(MarginEstimate {
                margin: online_margin(model, x, y, &adv, attack.epsilon, *j_max)?,
                iterations: *j_max,
                converged: true,
            })
        }
    }
}

/// Margins for every row of `dataset`, keyed by sample id and sorted by it.
pub fn compute_margins(
    model: &crate::models::Model,
    dataset: &crate::data::Dataset,
    spec: &MarginSpec,
) -> Result<Vec<MarginRecord>> {
    let one = |i: usize| -> Result<MarginRecord> {
        let id = dataset.sample_ids[i];
        let est = estimate_margin(model, dataset.row(i), dataset.labels[i], spec, id)?;
        Ok(MarginRecord {
            sample_id: id,
            margin: est.margin,
            method: spec.method(),
            iterations: est.iterations,
        })
    };
    #[cfg(feature = "parallel")]
    let mut records = {
        use rayon::prelude::*;
        (0..dataset.len()).into_par_iter().map(one).collect::<Result<Vec<_>>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let mut records = (0..dataset.len()).map(one).collect::<Result<Vec<_>>>()?;
    records.sort_by_key(|r| r.sample_id);
    Ok(records)
}

pub const MANIFEST_HEADER: &str = "sample_id,margin,method,iterations";

/// Margin manifest CSV, rows sorted by sample id, margins with 9 significant
/// digits.
pub fn manifest_to_csv(records: &[MarginRecord]) -> String {
    let mut rows: Vec<&MarginRecord> = records.iter().collect();
    rows.sort_by_key(|r| r.sample_id);
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.sample_id,
            format_sig(r.margin, 9),
            r.method,
            r.iterations
        ));
    }
    out
}

pub fn manifest_from_csv(text: &str) -> Result<Vec<MarginRecord>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == MANIFEST_HEADER => {}
        other => return Err(Error::Parse(format!("bad manifest header {other:?}"))),
    }
    let bad = |line: &str| Error::Parse(format!("bad manifest row {line:?}"));
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(bad(line));
            }
            Ok(MarginRecord {
                sample_id: cols[0].parse().map_err(|_| bad(line))?,
                margin: cols[1].parse().map_err(|_| bad(line))?,
                method: cols[2].parse()?,
                iterations: cols[3].parse().map_err(|_| bad(line))?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::fgsm;
    use crate::models::{DenseLayer, TinyMlp};
    use proptest::prelude::*;
    use rand::Rng;

    fn lin(w: &[f64], b: f64) -> LinearModel {
        LinearModel::new(w.to_vec(), b).unwrap()
    }

    #[test]
    fn analytic_examples() {
        let mut x = vec![0.5; 10];
        x[0] = 0.3;
        assert!((analytic_margin(&LinearModel::teacher(10), &x, 1).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(analytic_margin(&lin(&[3.0, 1.0], 0.0), &[1.0, 1.0], 1).unwrap(), 1.0);
        assert_eq!(analytic_margin(&lin(&[1.0, 0.0], 0.0), &[-0.2, 0.0], 1).unwrap(), -0.2);
        assert!(matches!(
            analytic_margin(&LinearModel::zeros(2), &[1.0, 0.0], 1),
            Err(Error::DegenerateModel(_))
        ));
    }

    #[test]
    fn deepfool_on_affine_binary_is_one_step() {
        let m = lin(&[0.8, -1.3, 0.2], 0.1);
        let x = [0.4, -0.2, 1.0];
        let est = deepfool_margin(&m, &x, 1, &DeepFoolConfig::default()).unwrap();
        assert_eq!(est.iterations, 1);
        assert!((est.margin - analytic_margin(&m, &x, 1).unwrap()).abs() < 1e-12);
        let neg = deepfool_margin(&m, &x, -1, &DeepFoolConfig::default()).unwrap();
        assert!((neg.margin + est.margin).abs() < 1e-15);
    }

    #[test]
    fn deepfool_on_boundary_is_zero() {
        let m = lin(&[1.0, 0.0], 0.0);
        let est = deepfool_margin(&m, &[0.0, 3.0], 1, &DeepFoolConfig::default()).unwrap();
        assert_eq!(est.margin, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn deepfool_three_class_affine_picks_nearest_class() {
        // Rows w0 = (1, 0), w1 = (0, 1), w2 = (-1, -1), no bias.
        let layer = DenseLayer::new(3, 2, vec![1.0, 0.0, 0.0, 1.0, -1.0, -1.0], vec![0.0; 3]).unwrap();
        let mlp = TinyMlp::new(vec![layer]).unwrap();
        let x = [1.0, 0.2];
        // Exhaustive per-class distances: (f0 - fk) / ||w0 - wk||_1.
        let per_class = [(1.0 - 0.2) / 2.0, (1.0 - (-1.2)) / 3.0];
        let expected = per_class.iter().cloned().fold(f64::INFINITY, f64::min);
        let est = deepfool_margin(&mlp, &x, 0, &DeepFoolConfig::default()).unwrap();
        assert!((est.margin - expected).abs() < 1e-12, "{est:?}");
        assert!((expected - 0.4).abs() < 1e-15);
        assert_eq!(est.iterations, 1);
    }

    #[test]
    fn deepfool_l2_mode_matches_euclidean_distance() {
        let m = lin(&[3.0, 4.0], 0.0);
        let cfg = DeepFoolConfig {
            norm: Norm::L2,
            ..DeepFoolConfig::default()
        };
        let est = deepfool_margin(&m, &[1.0, 1.0], 1, &cfg).unwrap();
        assert!((est.margin - 7.0 / 5.0).abs() < 1e-12);
    }

    #[test]
    fn fast_margin_refines_the_bim_flip() {
        let m = lin(&[1.0, 0.0], 0.0);
        let cfg = FastMarginConfig { step: 0.01, i_max: 100, j_max: 20 };
        let est = fast_margin(&m, &[0.055, 0.4], 1, &cfg).unwrap();
        assert_eq!(est.iterations, 6);
        assert!((est.margin - 0.055).abs() <= 0.06 * 2f64.powi(-20));
        let mirrored = fast_margin(&m, &[-0.055, 0.4], 1, &cfg).unwrap();
        assert!((mirrored.margin + 0.055).abs() <= 0.06 * 2f64.powi(-20));
    }

    #[test]
    fn fast_margin_without_flip_is_flagged() {
        let m = lin(&[1.0, 0.0], 0.0);
        let cfg = FastMarginConfig { step: 0.01, i_max: 3, j_max: 20 };
        let est = fast_margin(&m, &[0.5, 0.0], 1, &cfg).unwrap();
        assert!(!est.converged);
        assert!((est.margin - 0.03).abs() < 1e-15);
    }

    #[test]
    fn online_margin_examples() {
        let m = lin(&[1.0, 0.0], 0.0);
        let e = 8.0 / 255.0;
        let x = [4.0 / 255.0, 0.0];
        let xa = [-4.0 / 255.0, 0.0];
        let got = online_margin(&m, &x, 1, &xa, e, 20).unwrap();
        assert!((got - 4.0 / 255.0).abs() <= 16.0 / 255.0 * 2f64.powi(-20));

        let deep = [0.5, 0.0];
        let adv = fgsm(&m, &deep, 1, e).unwrap();
        assert_eq!(online_margin(&m, &deep, 1, &adv, e, 20).unwrap(), e);

        let wrong = [-20.0 / 255.0, 0.0];
        let adv = fgsm(&m, &wrong, 1, e).unwrap();
        assert_eq!(online_margin(&m, &wrong, 1, &adv, e, 20).unwrap(), -e);
    }

    #[test]
    fn manifest_round_trip_sorted() {
        let recs = vec![
            MarginRecord { sample_id: 3, margin: -0.25, method: MarginMethod::Fast, iterations: 4 },
            MarginRecord { sample_id: 1, margin: 1.0 / 3.0, method: MarginMethod::Fast, iterations: 7 },
        ];
        let csv = manifest_to_csv(&recs);
        assert_eq!(csv, "sample_id,margin,method,iterations\n1,0.333333333,fast,7\n3,-0.25,fast,4\n");
        let back = manifest_from_csv(&csv).unwrap();
        assert_eq!(back[0].sample_id, 1);
        assert_eq!(back[1].margin, -0.25);
        assert!(manifest_from_csv("id,m\n").is_err());
    }

    proptest! {
        #[test]
        fn all_methods_are_sign_coherent_on_affine_models(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = LinearModel::new(w, rng.random_range(-0.3..0.3)).unwrap();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = if rng.random_bool(0.5) { 1 } else { -1 };
            let correct = m.predict(&x).unwrap() == y;
            let e = 0.2;
            let adv = fgsm(&m, &x, y, e).unwrap();
            let margins = [
                analytic_margin(&m, &x, y).unwrap(),
                deepfool_margin(&m, &x, y, &DeepFoolConfig::default()).unwrap().margin,
                fast_margin(&m, &x, y, &FastMarginConfig { step: 1e-3, i_max: 100_000, j_max: 20 }).unwrap().margin,
                online_margin(&m, &x, y, &adv, e, 20).unwrap(),
            ];
            for mg in margins {
                prop_assert_eq!(mg >= 0.0, correct, "{:?}", margins);
            }
        }

        #[test]
        fn bisection_error_bound_shrinks_with_j_max(seed in any::<u64>(), j in 1usize..24) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let w: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let m = LinearModel::new(w, 0.0).unwrap();
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5..0.5)).collect();
            let exact = analytic_margin(&m, &x, 1).unwrap();
            let check = |j_max: usize| {
                let cfg = FastMarginConfig { step: 0.01, i_max: 10_000, j_max };
                let est = fast_margin(&m, &x, 1, &cfg).unwrap();
                let bound = est.iterations as f64 * 0.01 * 2f64.powi(-(j_max as i32));
                ((est.margin - exact).abs(), bound)
            };
            let (err_j, bound_j) = check(j);
            let (err_next, bound_next) = check(j + 1);
            prop_assert!(err_j <= bound_j + 1e-12);
            prop_assert!(err_next <= bound_next + 1e-12);
            prop_assert!(bound_next <= bound_j);
        }
    }
}
