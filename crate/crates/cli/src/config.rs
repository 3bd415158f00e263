//! Experiment configuration files (TOML).
//!
//! Radii may be written as plain numbers or as exact fractions such as
//! `"8/255"`; the original spelling is kept so a parsed config serializes
//! back to an equivalent file.

use std::path::{Path, PathBuf};

use mplab_core::lab::SweepGrid;
use mplab_core::models::LossKind;
use mplab_core::pruning::Strategy;
use mplab_core::rational::parse_real;
use mplab_core::train::{TrainAttack, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Real {
    Number(f64),
    Exact(String),
}

impl Real {
    pub fn value(&self) -> Result<f64, String> {
        match self {
            Real::Number(v) => Ok(*v),
            Real::Exact(s) => parse_real(s).map_err(|e| e.to_string()),
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::Number(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Perceptron,
    ToyMlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default)]
    pub attack: AttackSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruning: Option<PruningSettings>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Write checkpoints in the binary format instead of text.
    #[serde(default)]
    pub binary_checkpoints: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    /// Feature count K of the perceptron task.
    pub dim: usize,
    /// Class count of the toy task.
    pub classes: usize,
    /// Hidden widths of the toy MLP.
    pub hidden: Vec<usize>,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            dim: 200,
            classes: 3,
            hidden: vec![32],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Training attack; FGSM when absent on the perceptron task, PGD-10 with
    /// step eps/4 on the toy task.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<TrainAttack>,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            epochs: d.epochs,
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            attack: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSettings {
    /// Training radius.
    pub epsilon: Real,
    /// Radius of the robust evaluation attack.
    pub eval_epsilon: Real,
}

impl Default for AttackSettings {
    fn default() -> Self {
        Self {
            epsilon: Real::Number(0.0),
            eval_epsilon: Real::Number(0.01),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub strategies: Vec<Strategy>,
    pub epsilons: Vec<Real>,
    pub alphas: Vec<f64>,
    #[serde(default = "zero_ratio")]
    pub ratios: Vec<f64>,
    #[serde(default = "twenty")]
    pub replicates: usize,
    #[serde(default = "thousand")]
    pub test_size: usize,
}

fn zero_ratio() -> Vec<f64> {
    vec![0.0]
}

fn twenty() -> usize {
    20
}

fn thousand() -> usize {
    1000
}

/// Training data for single runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSettings {
    /// Existing dataset CSV; generated from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// Sample count of generated data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Generated sample count as a multiple of `model.dim`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default = "thousand")]
    pub test_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarginSource {
    /// True teacher margins (perceptron data only).
    Teacher,
    /// Precomputed margin manifest.
    Manifest,
    /// Margins of a reference model trained on the full data first.
    Reference,
    /// Segment margins of a reference model against its own attack.
    Online,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginEstimator {
    Analytic,
    DeepFool,
    Fast,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningSettings {
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    /// Margin threshold for `filter-below` and `pe+filter`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<Real>,
    pub margin_source: MarginSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Estimator for `reference` margins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator: Option<MarginEstimator>,
    /// Train with per-sample radii clamped to the margins.
    #[serde(default)]
    pub schedule: bool,
    #[serde(default = "zero_real")]
    pub gap: Real,
    /// Online pruning margin; may exceed the training radius.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_p: Option<Real>,
}

fn zero_real() -> Real {
    Real::Number(0.0)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }

    /// Checks values and that referenced files exist, resolving relative
    /// paths against `base`.
    pub fn validate(&mut self, base: &Path) -> Result<(), String> {
        self.epsilon()?;
        self.attack.eval_epsilon.value()?;
        self.train_config()?.validate().map_err(|e| e.to_string())?;
        if self.model.dim == 0 || self.model.classes < 2 || self.model.hidden.contains(&0) {
            return Err("model sizes must be positive (and classes >= 2)".into());
        }
        if let Some(grid) = &self.grid {
            if self.task != Task::Perceptron {
                return Err("sweeps run on the perceptron task".into());
            }
            for e in &grid.epsilons {
                e.value()?;
            }
            self.sweep_grid()?.validate().map_err(|e| e.to_string())?;
        }
        if let Some(data) = &mut self.data {
            if let Some(f) = &mut data.file {
                *f = resolve(base, f)?;
            } else if data.samples.is_none() && data.alpha.is_none() {
                return Err("data needs a file, samples or alpha".into());
            }
            if data.alpha.is_some_and(|a| !(a > 0.0)) || data.samples == Some(0) || data.test_size == 0 {
                return Err("data sizes must be positive".into());
            }
        }
        let eps = self.epsilon()?;
        if let Some(p) = &mut self.pruning {
            if let Some(m) = &mut p.manifest {
                *m = resolve(base, m)?;
            }
            if p.margin_source == MarginSource::Manifest && p.manifest.is_none() {
                return Err("margin_source = \"manifest\" needs a manifest path".into());
            }
            if p.margin_source == MarginSource::Teacher && self.task != Task::Perceptron {
                return Err("teacher margins exist only on the perceptron task".into());
            }
            if p.ratio.is_some_and(|r| !(0.0..1.0).contains(&r)) {
                return Err("pruning ratio must lie in [0, 1)".into());
            }
            let has_criterion = match p.strategy {
                Strategy::PruneEasy => p.ratio.is_some() || p.threshold.is_some() || p.m_p.is_some(),
                Strategy::PruneDifficult => p.ratio.is_some() || p.threshold.is_some(),
                Strategy::Random | Strategy::PruneEasyFiltered => p.ratio.is_some(),
                Strategy::None | Strategy::FilterBelow => true,
            };
            if !has_criterion {
                return Err(format!("strategy {} needs a ratio or threshold", p.strategy));
            }
            if p.m_p.is_some() && p.strategy != Strategy::PruneEasy {
                return Err("online pruning at m_p removes easy samples; use strategy = \"pe\"".into());
            }
            let gap = p.gap.value()?;
            if p.schedule {
                if !(eps > 0.0 && gap >= 0.0 && gap < eps) {
                    return Err("a schedule needs epsilon > 0 and 0 <= gap < epsilon".into());
                }
            }
            if let Some(t) = &p.threshold {
                t.value()?;
            }
            if let Some(m) = &p.m_p {
                if p.margin_source != MarginSource::Online {
                    return Err("m_p applies to online margins only".into());
                }
                if !(m.value()? > 0.0) {
                    return Err("m_p must be positive".into());
                }
            }
        }
        Ok(())
    }

    pub fn epsilon(&self) -> Result<f64, String> {
        let e = self.attack.epsilon.value()?;
        if !(e >= 0.0 && e.is_finite()) {
            return Err(format!("epsilon must be finite and >= 0, got {e}"));
        }
        Ok(e)
    }

    pub fn loss(&self) -> LossKind {
        match self.task {
            Task::Perceptron => LossKind::LogisticMargin,
            Task::ToyMlp => LossKind::CrossEntropy,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig, String> {
        let attack = self.train.attack.unwrap_or(match self.task {
            Task::Perceptron => TrainAttack::Fgsm,
            Task::ToyMlp => TrainAttack::Pgd {
                steps: 10,
                step_fraction: 0.25,
            },
        });
        Ok(TrainConfig {
            epsilon: self.epsilon()?,
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            loss: self.loss(),
            attack,
            seed: self.seed,
        })
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid, String> {
        let g = self.grid.as_ref().ok_or("config has no [grid] section")?;
        Ok(SweepGrid {
            dim: self.model.dim,
            strategies: g.strategies.clone(),
            epsilons: g.epsilons.iter().map(Real::value).collect::<Result<_, _>>()?,
            alphas: g.alphas.clone(),
            ratios: g.ratios.clone(),
            replicates: g.replicates,
            master_seed: self.seed,
            eval_epsilon: self.attack.eval_epsilon.value()?,
            test_size: g.test_size,
            train: self.train_config()?,
        })
    }
}

fn resolve(base: &Path, path: &Path) -> Result<PathBuf, String> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    if !full.exists() {
        return Err(format!("referenced file {} does not exist", full.display()));
    }
    Ok(full)
}
