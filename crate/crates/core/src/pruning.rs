//! Pruning strategies, classification difficulty and the margin-driven
//! per-sample attack strengths used by PUMA.
//!
//! Scores are oriented by the caller: margins are [`Orientation::HighIsEasy`],
//! classification difficulty is [`Orientation::HighIsDifficult`]. "Prune
//! easy" (PE) always removes the easiest samples and "prune difficult" (PD)
//! the hardest, whatever the score.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Neg, Sub};
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{extrapolated_point, iterated_attack, AttackConfig};
use crate::data::Dataset;
use crate::error::{check_dim, contract, Error, Result};
use crate::io::format_sig;
use crate::margins::online_margin;
use crate::models::{Classifier, Label};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "pe")]
    PruneEasy,
    #[serde(rename = "pd")]
    PruneDifficult,
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "filter-below")]
    FilterBelow,
    /// Prune easy after removing every sample whose margin is below the
    /// training radius.
    #[serde(rename = "pe+filter")]
    PruneEasyFiltered,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::PruneEasy => "pe",
            Strategy::PruneDifficult => "pd",
            Strategy::Random => "random",
            Strategy::FilterBelow => "filter-below",
            Strategy::PruneEasyFiltered => "pe+filter",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Strategy::None,
            "pe" => Strategy::PruneEasy,
            "pd" => Strategy::PruneDifficult,
            "random" => Strategy::Random,
            "filter-below" => Strategy::FilterBelow,
            "pe+filter" => Strategy::PruneEasyFiltered,
            other => return Err(Error::Parse(format!("unknown pruning strategy {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Larger score = easier sample (margins).
    HighIsEasy,
    /// Larger score = harder sample (classification difficulty).
    HighIsDifficult,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Ratio(f64),
    Threshold(f64),
}

/// Partition of `0..n` into retained and removed positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PruningPlan {
    pub strategy: Strategy,
    pub criterion: Criterion,
    pub seed: Option<u64>,
    /// Sorted positions into the scored sample list.
    pub retained: Vec<usize>,
    /// Sorted positions into the scored sample list.
    pub removed: Vec<usize>,
}

impl PruningPlan {
    /// Keep everything.
    pub fn keep_all(n: usize) -> Self {
        Self {
            strategy: Strategy::None,
            criterion: Criterion::Ratio(0.0),
            seed: None,
            retained: (0..n).collect(),
            removed: Vec::new(),
        }
    }

    fn from_removed(n: usize, mut removed: Vec<usize>, strategy: Strategy, criterion: Criterion, seed: Option<u64>) -> Self {
        removed.sort_unstable();
        let mut mask = vec![false; n];
        removed.iter().for_each(|i| mask[*i] = true);
        let retained = (0..n).filter(|i| !mask[*i]).collect();
        Self {
            strategy,
            criterion,
            seed,
            retained,
            removed,
        }
    }

    pub fn len(&self) -> usize {
        self.retained.len() + self.removed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keeps only samples retained by both plans.
    pub fn intersect(&self, other: &PruningPlan, strategy: Strategy) -> Result<PruningPlan> {
        if self.len() != other.len() {
            return Err(contract("cannot intersect plans over different sample sets"));
        }
        let n = self.len();
        let mut keep = vec![false; n];
        other.retained.iter().for_each(|i| keep[*i] = true);
        let removed = (0..n).filter(|i| !(keep[*i] && self.retained.binary_search(i).is_ok())).collect();
        Ok(Self::from_removed(n, removed, strategy, self.criterion, self.seed))
    }
}

/// Number of samples removed at `ratio`, rounding half away from zero.
pub fn removed_count(n: usize, ratio: f64) -> usize {
    (ratio * n as f64).round() as usize
}

fn validate_scores(ids: &[u64], scores: &[f64]) -> Result<()> {
    if ids.len() != scores.len() {
        return Err(contract(format!("{} ids for {} scores", ids.len(), scores.len())));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(contract("scores must be finite"));
    }
    Ok(())
}

/// Positions ordered easiest first; ties go to the lower sample id.
fn easiest_first(ids: &[u64], scores: &[f64], orientation: Orientation) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match orientation {
            Orientation::HighIsEasy => scores[b].total_cmp(&scores[a]),
            Orientation::HighIsDifficult => scores[a].total_cmp(&scores[b]),
        };
        by_score.then(ids[a].cmp(&ids[b]))
    });
    order
}

fn hardest_first(ids: &[u64], scores: &[f64], orientation: Orientation) -> Vec<usize> {
    let flipped = match orientation {
        Orientation::HighIsEasy => Orientation::HighIsDifficult,
        Orientation::HighIsDifficult => Orientation::HighIsEasy,
    };
    easiest_first(ids, scores, flipped)
}

/// Removes exactly `count` samples according to `strategy`.
pub fn prune_count(
    ids: &[u64],
    scores: &[f64],
    strategy: Strategy,
    orientation: Orientation,
    count: usize,
    seed: u64,
) -> Result<PruningPlan> {
    validate_scores(ids, scores)?;
    let n = scores.len();
    if count >= n && !(count == 0 && strategy == Strategy::None) {
        return Err(Error::EmptyRetained { removed: count, total: n });
    }
    let criterion = Criterion::Ratio(if n == 0 { 0.0 } else { count as f64 / n as f64 });
    let removed: Vec<usize> = match strategy {
        Strategy::None if count == 0 => Vec::new(),
        Strategy::None => return Err(contract("strategy none cannot remove samples")),
        Strategy::PruneEasy => easiest_first(ids, scores, orientation).into_iter().take(count).collect(),
        Strategy::PruneDifficult => hardest_first(ids, scores, orientation).into_iter().take(count).collect(),
        Strategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            sample(&mut rng, n, count).into_vec()
        }
        Strategy::FilterBelow | Strategy::PruneEasyFiltered => {
            return Err(contract(format!("{strategy} is not a ratio strategy")))
        }
    };
    let seed = (strategy == Strategy::Random).then_some(seed);
    Ok(PruningPlan::from_removed(n, removed, strategy, criterion, seed))
}

/// Ratio-based pruning: removes `round(ratio * n)` samples.
pub fn rank_and_prune(
    ids: &[u64],
    scores: &[f64],
    strategy: Strategy,
    orientation: Orientation,
    ratio: f64,
    seed: u64,
) -> Result<PruningPlan> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(contract(format!("pruning ratio {ratio} outside [0, 1]")));
    }
    let count = removed_count(scores.len(), ratio);
    let mut plan = prune_count(ids, scores, strategy, orientation, count, seed)?;
    plan.criterion = Criterion::Ratio(ratio);
    Ok(plan)
}

/// Threshold pruning. PE removes samples strictly easier than `threshold`
/// (margin above it, or difficulty below it); PD removes samples at least as
/// hard (margin below it, or difficulty at or above it).
pub fn threshold_prune(scores: &[f64], strategy: Strategy, orientation: Orientation, threshold: f64) -> Result<PruningPlan> {
    if scores.iter().any(|s| !s.is_finite()) || !threshold.is_finite() {
        return Err(contract("scores and threshold must be finite"));
    }
    let remove = |s: f64| match (strategy, orientation) {
        (Strategy::PruneEasy, Orientation::HighIsEasy) => s > threshold,
        (Strategy::PruneEasy, Orientation::HighIsDifficult) => s < threshold,
        (Strategy::PruneDifficult, Orientation::HighIsEasy) => s < threshold,
        (Strategy::PruneDifficult, Orientation::HighIsDifficult) => s >= threshold,
        _ => false,
    };
    if !matches!(strategy, Strategy::PruneEasy | Strategy::PruneDifficult) {
        return Err(contract(format!("{strategy} has no threshold form")));
    }
    let removed: Vec<usize> = (0..scores.len()).filter(|i| remove(scores[*i])).collect();
    Ok(PruningPlan::from_removed(scores.len(), removed, strategy, Criterion::Threshold(threshold), None))
}

/// Removes every sample with margin strictly below `threshold`.
pub fn filter_below_margin(margins: &[f64], threshold: f64) -> Result<PruningPlan> {
    if !(threshold >= 0.0) {
        return Err(contract(format!("filter threshold must be >= 0, got {threshold}")));
    }
    let mut plan = threshold_prune(margins, Strategy::PruneDifficult, Orientation::HighIsEasy, threshold)?;
    plan.strategy = Strategy::FilterBelow;
    Ok(plan)
}

/// Piecewise clamp of a margin into a signed attack strength:
///
/// ```text
/// -eps      if m <= -eps + g
/// m - g     if -eps + g < m < eps + g
/// eps       if m >= eps + g
/// ```
///
/// Generic so it can run on exact rationals as well as floats.
pub fn adaptive_strength<T>(margin: T, epsilon: T, gap: T) -> T
where
    T: Copy + PartialOrd + Add<Output = T> + Sub<Output = T> + Neg<Output = T>,
{
    if margin <= -epsilon + gap {
        -epsilon
    } else if margin < epsilon + gap {
        margin - gap
    } else {
        epsilon
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSchedule {
    pub epsilon: f64,
    pub gap: f64,
    pub values: Vec<f64>,
}

pub fn epsilon_schedule(margins: &[f64], epsilon: f64, gap: f64) -> Result<EpsilonSchedule> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(contract(format!("base radius must be positive, got {epsilon}")));
    }
    if !(gap >= 0.0 && gap < epsilon) {
        return Err(contract(format!("gap {gap} must lie in [0, {epsilon})")));
    }
    if margins.iter().any(|m| !m.is_finite()) {
        return Err(contract("margins must be finite"));
    }
    Ok(EpsilonSchedule {
        epsilon,
        gap,
        values: margins.iter().map(|m| adaptive_strength(*m, epsilon, gap)).collect(),
    })
}

pub const SCHEDULE_HEADER: &str = "sample_id,epsilon_i";

pub fn schedule_to_csv(ids: &[u64], schedule: &EpsilonSchedule) -> Result<String> {
    if ids.len() != schedule.values.len() {
        return Err(contract("schedule and id list differ in length"));
    }
    let mut rows: Vec<(u64, f64)> = ids.iter().copied().zip(schedule.values.iter().copied()).collect();
    rows.sort_by_key(|r| r.0);
    let mut out = format!("{SCHEDULE_HEADER}\n");
    for (id, e) in rows {
        out.push_str(&format!("{id},{}\n", format_sig(e, 9)));
    }
    Ok(out)
}

pub fn schedule_from_csv(text: &str) -> Result<(Vec<u64>, Vec<f64>)> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SCHEDULE_HEADER) {
        return Err(Error::Parse("bad schedule header".into()));
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let bad = || Error::Parse(format!("bad schedule row {line:?}"));
        let (id, e) = line.split_once(',').ok_or_else(bad)?;
        ids.push(id.parse().map_err(|_| bad())?);
        values.push(e.parse().map_err(|_| bad())?);
    }
    Ok((ids, values))
}

/// Per-epoch correctness of each tracked sample, `epochs[t][i]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CdHistory {
    epochs: Vec<Vec<bool>>,
}

impl CdHistory {
    pub fn new(epochs: Vec<Vec<bool>>) -> Result<Self> {
        if epochs.is_empty() {
            return Err(contract("history needs at least one epoch"));
        }
        let n = epochs[0].len();
        if epochs.iter().any(|e| e.len() != n) {
            return Err(contract("history rows differ in length"));
        }
        Ok(Self { epochs })
    }

    pub(crate) fn empty() -> Self {
        Self { epochs: Vec::new() }
    }

    pub(crate) fn push_epoch(&mut self, correct: Vec<bool>) {
        self.epochs.push(correct);
    }

    pub fn num_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn num_samples(&self) -> usize {
        self.epochs.first().map_or(0, Vec::len)
    }

    pub fn epochs(&self) -> &[Vec<bool>] {
        &self.epochs
    }
}

/// Fraction of epochs in which sample `i` was misclassified.
pub fn cd_score(history: &CdHistory, i: usize) -> Result<f64> {
    if history.num_epochs() == 0 {
        return Err(contract("empty history"));
    }
    if i >= history.num_samples() {
        return Err(contract(format!("sample {i} not tracked")));
    }
    let wrong = history.epochs.iter().filter(|e| !e[i]).count();
    Ok(wrong as f64 / history.num_epochs() as f64)
}

/// Online pruning test: prune when the model is still right at margin `m_p`
/// along the segment towards the full-strength adversarial example. `m_p`
/// above `eps` extrapolates past `x'`.
pub fn online_prune_decision<M: Classifier + ?Sized>(
    model: &M,
    x: &[f64],
    y: Label,
    x_adv: &[f64],
    m_p: f64,
    epsilon: f64,
) -> Result<bool> {
    check_dim(model.input_dim(), x.len())?;
    if !(m_p > 0.0 && m_p.is_finite()) {
        return Err(contract(format!("pruning margin must be positive, got {m_p}")));
    }
    if !(epsilon > 0.0) {
        return Err(contract(format!("segment radius must be positive, got {epsilon}")));
    }
    let class = model
        .class_of(y)
        .ok_or_else(|| contract(format!("label {y} is outside the model's label space")))?;
    if model.predict_class(x) != class {
        return Ok(false);
    }
    let probe = extrapolated_point(x, x_adv, m_p, epsilon)?;
    Ok(model.predict_class(&probe) == class)
}

/// One online pass over `dataset`: each sample is attacked once, giving its
/// segment margin and, when `m_p` is set, the pruning decision at `m_p`.
pub fn online_pass<M: Classifier + ?Sized>(
    model: &M,
    dataset: &Dataset,
    attack: &AttackConfig,
    j_max: usize,
    m_p: Option<f64>,
    seed: u64,
) -> Result<Vec<(f64, bool)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dataset.len())
        .map(|i| {
            let (x, y) = (dataset.row(i), dataset.labels[i]);
            let adv = iterated_attack(model, x, y, attack, &mut rng)?;
            let margin = online_margin(model, x, y, &adv, attack.epsilon, j_max)?;
            let prune = match m_p {
                Some(m) => online_prune_decision(model, x, y, &adv, m, attack.epsilon)?,
                None => false,
            };
            Ok((margin, prune))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanHeader {
    pub strategy: Strategy,
    pub ratio: Option<f64>,
    pub threshold: Option<f64>,
    pub seed: Option<u64>,
    pub manifest_sha256: String,
    pub total: usize,
    pub retained: usize,
}

/// Plan file: one JSON header line, then the retained sample ids in
/// ascending order, one per line.
pub fn plan_to_text(plan: &PruningPlan, ids: &[u64], manifest_sha256: &str) -> Result<String> {
    if ids.len() != plan.len() {
        return Err(contract("plan and id list differ in length"));
    }
    let (ratio, threshold) = match plan.criterion {
        Criterion::Ratio(r) => (Some(r), None),
        Criterion::Threshold(t) => (None, Some(t)),
    };
    let header = PlanHeader {
        strategy: plan.strategy,
        ratio,
        threshold,
        seed: plan.seed,
        manifest_sha256: manifest_sha256.to_string(),
        total: plan.len(),
        retained: plan.retained.len(),
    };
    let mut kept: Vec<u64> = plan.retained.iter().map(|i| ids[*i]).collect();
    kept.sort_unstable();
    let mut out = serde_json::to_string(&header).map_err(|e| contract(e.to_string()))?;
    out.push('\n');
    for id in kept {
        out.push_str(&id.to_string());
        out.push('\n');
    }
    Ok(out)
}

pub fn plan_from_text(text: &str) -> Result<(PlanHeader, Vec<u64>)> {
    let mut lines = text.lines();
    let header: PlanHeader = serde_json::from_str(lines.next().unwrap_or_default())
        .map_err(|e| Error::Parse(format!("bad plan header: {e}")))?;
    let ids = lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.trim().parse::<u64>().map_err(|_| Error::Parse(format!("bad sample id {l:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if ids.len() != header.retained {
        return Err(Error::Parse(format!(
            "plan header announces {} ids, found {}",
            header.retained,
            ids.len()
        )));
    }
    Ok((header, ids))
}

/// Orders `(sample_id, value)` pairs canonically; used when comparing plans.
pub fn cmp_scores(a: &(u64, f64), b: &(u64, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
}
