//! The teacher-student experiment engine: error metrics, scaling fits and
//! grid sweeps over pruning strategies, radii and data ratios.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{iterated_attack, AttackConfig};
use crate::data::{generate_teacher_dataset, Dataset};
use crate::error::{contract, Error, Result};
use crate::io::{derive_seed, format_sig};
use crate::models::{dot, Classifier, LinearModel};
use crate::pruning::{filter_below_margin, prune_count, Orientation, PruningPlan, Strategy};
use crate::train::{train_student, TrainConfig};

fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(contract("weight vectors differ in dimension"));
    }
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateModel("zero weight vector"));
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// `1 - cos(teacher, student)`, in `[0, 2]`.
pub fn correlation_error(teacher: &[f64], student: &[f64]) -> Result<f64> {
    Ok(1.0 - cosine(teacher, student)?)
}

/// Probability that the two bias-free linear models disagree on an
/// isotropic Gaussian input: the angle between them divided by pi.
pub fn generalization_error(teacher: &[f64], student: &[f64]) -> Result<f64> {
    Ok(cosine(teacher, student)?.acos() / std::f64::consts::PI)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square residual in log space.
    pub residual: f64,
}

/// Least-squares line through `(ln alpha, ln error)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 2 {
        return Err(contract("a slope needs at least two points"));
    }
    if points.iter().any(|(a, e)| !(*a > 0.0 && *e > 0.0 && a.is_finite() && e.is_finite())) {
        return Err(contract("log-log fit needs positive finite values"));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(contract("log-log fit needs at least two distinct abscissae"));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(LogLogFit {
        slope,
        intercept,
        residual: (sse / n).sqrt(),
    })
}

/// The attack used for robust evaluation: 20 sign steps of size `eps / 4`
/// from the clean point.
pub fn evaluation_attack(epsilon: f64) -> AttackConfig {
    AttackConfig::bim(epsilon, epsilon / 4.0, 20)
}

/// Fraction of samples still classified correctly after `attack`. A zero
/// radius gives the clean accuracy.
pub fn robust_accuracy<M: Classifier + ?Sized>(model: &M, dataset: &Dataset, attack: &AttackConfig, seed: u64) -> Result<f64> {
    attack.validate()?;
    if dataset.is_empty() {
        return Err(contract("robust accuracy of an empty dataset"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut correct = 0usize;
    for i in 0..dataset.len() {
        let (x, y) = (dataset.row(i), dataset.labels[i]);
        let ok = if attack.epsilon == 0.0 {
            model.predict(x)? == y
        } else {
            model.is_correct(&iterated_attack(model, x, y, attack, &mut rng)?, y)
        };
        correct += ok as usize;
    }
    Ok(correct as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    /// Feature count K.
    pub dim: usize,
    pub strategies: Vec<Strategy>,
    pub epsilons: Vec<f64>,
    /// Post-pruning data ratios.
    pub alphas: Vec<f64>,
    /// Pruning ratios for every strategy except `none`, which always runs
    /// unpruned.
    pub ratios: Vec<f64>,
    pub replicates: usize,
    pub master_seed: u64,
    /// Radius of the robust evaluation attack.
    pub eval_epsilon: f64,
    /// Held-out samples per cell for the robust error.
    pub test_size: usize,
    /// Optimiser settings; `epsilon` and `seed` are set per cell.
    pub train: TrainConfig,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            dim: 200,
            strategies: vec![Strategy::None],
            epsilons: vec![0.0],
            alphas: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            ratios: vec![0.0],
            replicates: 20,
            master_seed: 0,
            eval_epsilon: 0.01,
            test_size: 1000,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepCell {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub alpha: f64,
    pub prune_ratio: f64,
    pub replicate: usize,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.replicates == 0 || self.test_size == 0 {
            return Err(contract("dim, replicates and test_size must be positive"));
        }
        if self.strategies.is_empty() || self.epsilons.is_empty() || self.alphas.is_empty() {
            return Err(contract("sweep grid is empty"));
        }
        if self.strategies.iter().any(|s| *s != Strategy::None) && self.ratios.is_empty() {
            return Err(contract("pruning strategies need at least one ratio"));
        }
        if self.alphas.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
            return Err(contract("data ratios must be positive"));
        }
        if self.epsilons.iter().chain([&self.eval_epsilon]).any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(contract("radii must be finite and >= 0"));
        }
        if self.ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(contract("pruning ratios must lie in [0, 1]"));
        }
        if self.strategies.contains(&Strategy::FilterBelow) {
            return Err(contract("filter-below is a threshold filter; use pe+filter in sweeps"));
        }
        TrainConfig { epsilon: 0.0, ..self.train }.validate()
    }

    /// Every cell of the grid, in canonical order.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &strategy in &self.strategies {
            let ratios: &[f64] = if strategy == Strategy::None { &[0.0] } else { &self.ratios };
            for &epsilon in &self.epsilons {
                for &alpha in &self.alphas {
                    for &prune_ratio in ratios {
                        for replicate in 0..self.replicates {
                            cells.push(SweepCell {
                                strategy,
                                epsilon,
                                alpha,
                                prune_ratio,
                                replicate,
                            });
                        }
                    }
                }
            }
        }
        cells.sort_by(|a, b| key_cmp(&cell_key(a), &cell_key(b)));
        cells.dedup();
        cells
    }
}

type CellKey = (&'static str, f64, f64, f64, usize);

fn cell_key(c: &SweepCell) -> CellKey {
    (c.strategy.as_str(), c.epsilon, c.alpha, c.prune_ratio, c.replicate)
}

fn key_cmp(a: &CellKey, b: &CellKey) -> std::cmp::Ordering {
    a.0.cmp(b.0)
        .then(a.1.total_cmp(&b.1))
        .then(a.2.total_cmp(&b.2))
        .then(a.3.total_cmp(&b.3))
        .then(a.4.cmp(&b.4))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: SweepCell,
    pub corr_error: f64,
    pub clean_error: f64,
    pub robust_error: f64,
    /// Why the cell failed; the metrics are NaN in that case.
    pub failure: Option<String>,
}

/// Seed shared by every cell with the same data ratio and replicate, so
/// strategies and radii are compared on the same draws.
pub fn cell_seed(master: u64, alpha: f64, replicate: usize) -> u64 {
    derive_seed(master, &format!("alpha={};replicate={replicate}", format_sig(alpha, 17)))
}

/// Pre-pruning sample count that leaves `round(alpha * k)` samples after
/// pruning a fraction `ratio`.
pub fn pre_pruning_size(alpha: f64, k: usize, ratio: f64) -> Result<(usize, usize)> {
    let target = (alpha * k as f64).round();
    if target < 1.0 {
        return Err(contract(format!("alpha {alpha} leaves no training samples")));
    }
    if ratio >= 1.0 {
        return Err(Error::EmptyRetained { removed: 0, total: 0 });
    }
    let pre = (target / (1.0 - ratio)).round();
    Ok((target as usize, pre.max(target) as usize))
}

/// Builds the retained set for one cell on teacher data, pruning by true
/// margins so exactly `target` samples remain.
pub fn cell_plan(data: &Dataset, strategy: Strategy, target: usize, epsilon: f64, seed: u64) -> Result<PruningPlan> {
    let margins = data
        .true_margins
        .as_deref()
        .ok_or_else(|| contract("sweep data needs true margins"))?;
    let count = data.len() - target;
    match strategy {
        Strategy::None => Ok(PruningPlan::keep_all(data.len())),
        Strategy::PruneEasyFiltered => {
            let filter = filter_below_margin(margins, epsilon)?;
            let pe_count = filter.retained.len().saturating_sub(target);
            let pe = prune_count(&data.sample_ids, margins, Strategy::PruneEasy, Orientation::HighIsEasy, pe_count, seed)?;
            pe.intersect(&filter, Strategy::PruneEasyFiltered)
        }
        _ => prune_count(&data.sample_ids, margins, strategy, Orientation::HighIsEasy, count, seed),
    }
}

fn run_cell(grid: &SweepGrid, cell: &SweepCell) -> Result<(f64, f64, f64)> {
    let seed = cell_seed(grid.master_seed, cell.alpha, cell.replicate);
    let (target, pre) = pre_pruning_size(cell.alpha, grid.dim, cell.prune_ratio)?;
    let data = generate_teacher_dataset(grid.dim, pre, derive_seed(seed, "train-data"))?;
    let plan = cell_plan(&data, cell.strategy, target, cell.epsilon, derive_seed(seed, "random-prune"))?;
    let cfg = TrainConfig {
        epsilon: cell.epsilon,
        seed: derive_seed(seed, "train"),
        ..grid.train
    };
    let (student, _) = train_student(&data, &plan, None, &cfg)?;
    let teacher = LinearModel::teacher(grid.dim);
    let corr = correlation_error(teacher.weights(), student.weights())?;
    let clean = generalization_error(teacher.weights(), student.weights())?;
    let test = generate_teacher_dataset(grid.dim, grid.test_size, derive_seed(seed, "test-data"))?;
    let robust = 1.0 - robust_accuracy(&student, &test, &evaluation_attack(grid.eval_epsilon), 0)?;
    Ok((corr, clean, robust))
}

fn evaluate(grid: &SweepGrid, cell: SweepCell) -> SweepRow {
    match run_cell(grid, &cell) {
        Ok((corr_error, clean_error, robust_error)) => SweepRow {
            cell,
            corr_error,
            clean_error,
            robust_error,
            failure: None,
        },
        Err(e) => SweepRow {
            cell,
            corr_error: f64::NAN,
            clean_error: f64::NAN,
            robust_error: f64::NAN,
            failure: Some(e.to_string()),
        },
    }
}

/// Runs every cell (in parallel when enabled) and returns the rows in
/// canonical order. Failing cells become rows with NaN metrics.
pub fn run_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let cells = grid.cells();
    #[cfg(feature = "parallel")]
    let mut rows: Vec<SweepRow> = {
        use rayon::prelude::*;
        cells.into_par_iter().map(|c| evaluate(grid, c)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut rows: Vec<SweepRow> = cells.into_iter().map(|c| evaluate(grid, c)).collect();
    rows.sort_by(|a, b| key_cmp(&cell_key(&a.cell), &cell_key(&b.cell)));
    Ok(rows)
}

pub const SWEEP_HEADER: &str = "strategy,epsilon,alpha,prune_ratio,seed,corr_error,clean_error,robust_error";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut sorted: Vec<&SweepRow> = rows.iter().collect();
    sorted.sort_by(|a, b| key_cmp(&cell_key(&a.cell), &cell_key(&b.cell)));
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in sorted {
        let c = &r.cell;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.strategy,
            format_sig(c.epsilon, 9),
            format_sig(c.alpha, 9),
            format_sig(c.prune_ratio, 9),
            c.replicate,
            format_sig(r.corr_error, 9),
            format_sig(r.clean_error, 9),
            format_sig(r.robust_error, 9),
        ));
    }
    out
}

pub fn sweep_from_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SWEEP_HEADER) {
        return Err(Error::Parse("bad sweep header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let bad = || Error::Parse(format!("bad sweep row {line:?}"));
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 8 {
                return Err(bad());
            }
            let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(SweepRow {
                cell: SweepCell {
                    strategy: c[0].parse()?,
                    epsilon: f(c[1])?,
                    alpha: f(c[2])?,
                    prune_ratio: f(c[3])?,
                    replicate: c[4].parse().map_err(|_| bad())?,
                },
                corr_error: f(c[5])?,
                clean_error: f(c[6])?,
                robust_error: f(c[7])?,
                failure: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Correlation,
    Clean,
    Robust,
}

impl Metric {
    pub fn of(self, row: &SweepRow) -> f64 {
        match self {
            Metric::Correlation => row.corr_error,
            Metric::Clean => row.clean_error,
            Metric::Robust => row.robust_error,
        }
    }
}

/// Mean and sample standard deviation over replicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Summary { mean, std: var.sqrt(), count: n }
}

/// Curve identity: strategy, radius and pruning ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveKey {
    pub strategy: Strategy,
    pub epsilon: f64,
    pub prune_ratio: f64,
}

/// Per-curve, per-alpha summaries of `metric` over successful rows.
pub fn curves(rows: &[SweepRow], metric: Metric) -> Vec<(CurveKey, Vec<(f64, Summary)>)> {
    let mut groups: BTreeMap<(&'static str, u64, u64), (CurveKey, BTreeMap<u64, Vec<f64>>)> = BTreeMap::new();
    let ord = |v: f64| {
        // Order-preserving map of non-negative floats to integers.
        v.to_bits()
    };
    for r in rows.iter().filter(|r| r.failure.is_none() && Metric::of(metric, r).is_finite()) {
        let c = &r.cell;
        let key = CurveKey {
            strategy: c.strategy,
            epsilon: c.epsilon,
            prune_ratio: c.prune_ratio,
        };
        groups
            .entry((c.strategy.as_str(), ord(c.epsilon), ord(c.prune_ratio)))
            .or_insert_with(|| (key, BTreeMap::new()))
            .1
            .entry(ord(c.alpha))
            .or_default()
            .push(metric.of(r));
    }
    groups
        .into_values()
        .map(|(key, by_alpha)| {
            let points = by_alpha
                .into_iter()
                .map(|(a, v)| (f64::from_bits(a), summarize(&v)))
                .collect();
            (key, points)
        })
        .collect()
}

/// Log-log slope of the mean curve restricted to `alpha` in `[lo, hi]`.
pub fn curve_slope(points: &[(f64, Summary)], lo: f64, hi: f64) -> Result<LogLogFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, _)| *a >= lo && *a <= hi)
        .map(|(a, s)| (*a, s.mean))
        .collect();
    fit_loglog_slope(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use crate::pruning::Strategy;

    #[test]
    fn correlation_examples() {
        let mut t = vec![0.0; 5];
        t[0] = 1.0;
        assert_eq!(correlation_error(&t, &[3.0, 0.0, 0.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(correlation_error(&t, &[0.0, 2.0, 0.0, 0.0, 0.0]).unwrap(), 1.0);
        let e = correlation_error(&t, &[1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((e - (1.0 - 1.0 / 2f64.sqrt())).abs() < 1e-15);
        assert!((e - 0.29289).abs() < 1e-5);
        assert!(matches!(correlation_error(&t, &[0.0; 5]), Err(Error::DegenerateModel(_))));
        assert_eq!(generalization_error(&t, &[0.0, 2.0, 0.0, 0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn slope_examples() {
        let inv: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 64.0].iter().map(|a| (*a, 1.0 / a)).collect();
        assert!((fit_loglog_slope(&inv).unwrap().slope + 1.0).abs() < 1e-12);
        let flat = [(2.0, 0.3), (8.0, 0.3)];
        assert_eq!(fit_loglog_slope(&flat).unwrap().slope, 0.0);
        let two = fit_loglog_slope(&[(2.0, 0.30), (64.0, 0.011)]).unwrap();
        let hand = (0.011f64 / 0.30).ln() / 32f64.ln();
        assert!((two.slope - hand).abs() < 1e-12);
        assert!((two.slope + 0.954).abs() < 1e-3);
        assert!(fit_loglog_slope(&[(2.0, 0.0), (4.0, 1.0)]).is_err());
        assert!(fit_loglog_slope(&[(2.0, 0.1)]).is_err());
    }

    #[test]
    fn robust_accuracy_of_the_teacher_counts_margins_above_eps() {
        let d = generate_teacher_dataset(20, 3000, 8).unwrap();
        let teacher = LinearModel::teacher(20);
        for eps in [0.0, 0.05, 0.3] {
            let acc = robust_accuracy(&teacher, &d, &evaluation_attack(eps), 0).unwrap();
            let above = d.true_margins.as_ref().unwrap().iter().filter(|m| **m > eps).count();
            assert_eq!(acc, above as f64 / d.len() as f64);
        }
    }

    #[test]
    fn pre_pruning_sizes() {
        assert_eq!(pre_pruning_size(2.0, 200, 0.0).unwrap(), (400, 400));
        assert_eq!(pre_pruning_size(2.0, 200, 0.8).unwrap(), (400, 2000));
        assert_eq!(pre_pruning_size(1.0, 200, 0.3).unwrap(), (200, 286));
        assert!(pre_pruning_size(2.0, 200, 1.0).is_err());
    }

    fn tiny_grid() -> SweepGrid {
        SweepGrid {
            dim: 20,
            strategies: vec![Strategy::None, Strategy::PruneEasy, Strategy::PruneEasyFiltered, Strategy::Random],
            epsilons: vec![0.0, 0.01],
            alphas: vec![1.0, 2.0],
            ratios: vec![0.0, 0.5],
            replicates: 2,
            master_seed: 3,
            eval_epsilon: 0.01,
            test_size: 50,
            train: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
        }
    }

    #[test]
    fn fairness_rule_holds_for_every_strategy() {
        for strategy in [Strategy::None, Strategy::PruneEasy, Strategy::PruneDifficult, Strategy::Random, Strategy::PruneEasyFiltered] {
            let ratio = if strategy == Strategy::None { 0.0 } else { 0.7 };
            let (target, pre) = pre_pruning_size(3.0, 50, ratio).unwrap();
            let d = generate_teacher_dataset(50, pre, 1).unwrap();
            let plan = cell_plan(&d, strategy, target, 0.05, 0).unwrap();
            assert_eq!(plan.retained.len(), 150, "{strategy}");
        }
    }

    #[test]
    fn filtered_plan_drops_low_margins() {
        let d = generate_teacher_dataset(5, 2000, 1).unwrap();
        let plan = cell_plan(&d, Strategy::PruneEasyFiltered, 400, 0.05, 0).unwrap();
        let m = d.true_margins.as_ref().unwrap();
        assert!(plan.retained.iter().all(|i| m[*i] >= 0.05));
        let top = plan.retained.iter().map(|i| m[*i]).fold(0.0, f64::max);
        assert!(plan.removed.iter().all(|i| m[*i] < 0.05 || m[*i] >= top));
    }

    #[test]
    fn sweep_is_deterministic_sorted_and_fair() {
        let grid = tiny_grid();
        let rows = run_sweep(&grid).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2 + 3 * (2 * 2 * 2 * 2));
        assert!(rows.iter().all(|r| r.failure.is_none()));
        let csv = sweep_to_csv(&rows);
        assert_eq!(csv, sweep_to_csv(&run_sweep(&grid).unwrap()));
        assert!(csv.starts_with(SWEEP_HEADER));
        let reread = sweep_from_csv(&csv).unwrap();
        assert_eq!(sweep_to_csv(&reread), csv);
        // Ratio-0 pruning is the unpruned run.
        for r in rows.iter().filter(|r| r.cell.strategy == Strategy::PruneEasy && r.cell.prune_ratio == 0.0) {
            let none = rows
                .iter()
                .find(|n| n.cell.strategy == Strategy::None && n.cell.epsilon == r.cell.epsilon && n.cell.alpha == r.cell.alpha && n.cell.replicate == r.cell.replicate)
                .unwrap();
            assert_eq!(none.corr_error, r.corr_error);
            assert_eq!(none.robust_error, r.robust_error);
        }
    }

    #[test]
    fn failing_cells_become_rows() {
        let grid = SweepGrid {
            strategies: vec![Strategy::PruneEasy],
            ratios: vec![1.0],
            ..tiny_grid()
        };
        let rows = run_sweep(&grid).unwrap();
        assert!(rows.iter().all(|r| r.failure.is_some() && r.corr_error.is_nan()));
        assert!(sweep_to_csv(&rows).lines().nth(1).unwrap().ends_with("nan,nan,nan"));
        assert_eq!(sweep_to_csv(&[]), format!("{SWEEP_HEADER}\n"));
    }

    #[test]
    fn curves_average_replicates() {
        let rows = run_sweep(&SweepGrid {
            strategies: vec![Strategy::None],
            epsilons: vec![0.0],
            ..tiny_grid()
        })
        .unwrap();
        let c = curves(&rows, Metric::Correlation);
        assert_eq!(c.len(), 1);
        let (_, pts) = &c[0];
        assert_eq!(pts.len(), 2);
        let mean = (rows[0].corr_error + rows[1].corr_error) / 2.0;
        assert!((pts[0].1.mean - mean).abs() < 1e-15);
        assert_eq!(pts[0].1.count, 2);
    }

    proptest! {
        #[test]
        fn correlation_error_ignores_positive_scale(seed in any::<u64>(), c1 in 0.01..100.0f64, c2 in 0.01..100.0f64) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let b: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let sa: Vec<f64> = a.iter().map(|v| v * c1).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * c2).collect();
            let e = correlation_error(&a, &b).unwrap();
            prop_assert!((e - correlation_error(&sa, &sb).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=2.0).contains(&e));
        }

        #[test]
        fn attacked_linear_accuracy_equals_margin_count(seed in any::<u64>(), eps in 0.001..0.5f64) {
            use rand::Rng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = LinearModel::new((0..4).map(|_| rng.random_range(-1.0..1.0)).collect(), 0.0).unwrap();
            let d = generate_teacher_dataset(4, 200, seed).unwrap();
            let acc = robust_accuracy(&model, &d, &evaluation_attack(eps), 0).unwrap();
            let above = (0..d.len())
                .filter(|i| crate::margins::analytic_margin(&model, d.row(*i), d.labels[*i]).unwrap() > eps)
                .count();
            prop_assert_eq!(acc, above as f64 / d.len() as f64);
        }
    }
}
