//! Browser bindings for the demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function of the same name
//! with a `_impl` suffix, so the logic is testable off the browser.

use mplab_core::data::make_toy_multiclass;
use mplab_core::lab::{curve_slope, curves, run_sweep, Metric, SweepGrid};
use mplab_core::margins::{compute_margins, DeepFoolConfig, FastMarginConfig, MarginSpec};
use mplab_core::models::{LossKind, Model};
use mplab_core::pruning::{adaptive_strength, PruningPlan, Strategy};
use mplab_core::train::{train_mlp, TrainAttack, TrainConfig};
use wasm_bindgen::prelude::*;

/// `points` evenly spaced margins over `[lo, hi]` and their clamped attack
/// strengths, interleaved as `[m_0, eps_0, m_1, eps_1, ...]`.
pub fn schedule_curve_impl(epsilon: f64, gap: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(epsilon > 0.0 && gap >= 0.0 && gap < epsilon) {
        return Err("need epsilon > 0 and 0 <= gap < epsilon".into());
    }
    if !(lo < hi) || points < 2 {
        return Err("need lo < hi and at least two points".into());
    }
    let step = (hi - lo) / (points - 1) as f64;
    Ok((0..points)
        .flat_map(|i| {
            let m = lo + step * i as f64;
            [m, adaptive_strength(m, epsilon, gap)]
        })
        .collect())
}

#[wasm_bindgen]
pub fn schedule_curve(epsilon: f64, gap: f64, lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, JsError> {
    schedule_curve_impl(epsilon, gap, lo, hi, points).map_err(|e| JsError::new(&e))
}

/// Small scaling sweep for one strategy. Returns
/// `[slope, alpha_0, mean_0, std_0, alpha_1, ...]` of the correlation error
/// (`1 - cos`) over the data ratios 1, 2, 4, 8 and 16.
pub fn scaling_sweep_impl(
    strategy: &str,
    ratio: f64,
    epsilon: f64,
    dim: usize,
    replicates: usize,
    epochs: usize,
    seed: u32,
) -> Result<Vec<f64>, String> {
    let strategy: Strategy = strategy.parse().map_err(|e: mplab_core::Error| e.to_string())?;
    let mut grid = SweepGrid {
        dim,
        strategies: vec![strategy],
        epsilons: vec![epsilon],
        alphas: vec![1.0, 2.0, 4.0, 8.0, 16.0],
        ratios: vec![if strategy == Strategy::None { 0.0 } else { ratio }],
        replicates,
        master_seed: seed.into(),
        test_size: 1,
        ..SweepGrid::default()
    };
    grid.train.epochs = epochs;
    let rows = run_sweep(&grid).map_err(|e| e.to_string())?;
    if let Some(bad) = rows.iter().find_map(|r| r.failure.clone()) {
        return Err(bad);
    }
    let (_, points) = curves(&rows, Metric::Correlation)
        .into_iter()
        .next()
        .ok_or("sweep produced no rows")?;
    let slope = curve_slope(&points, 0.0, f64::INFINITY).map_err(|e| e.to_string())?.slope;
    let mut out = vec![slope];
    for (a, s) in points {
        out.extend([a, s.mean, s.std]);
    }
    Ok(out)
}

#[wasm_bindgen]
pub fn scaling_sweep(
    strategy: &str,
    ratio: f64,
    epsilon: f64,
    dim: usize,
    replicates: usize,
    epochs: usize,
    seed: u32,
) -> Result<Vec<f64>, JsError> {
    scaling_sweep_impl(strategy, ratio, epsilon, dim, replicates, epochs, seed).map_err(|e| JsError::new(&e))
}

/// Trains a small MLP on Gaussian blobs and estimates every sample's margin
/// with DeepFool and with the fast BIM-plus-bisection method. Returns
/// `[n, deepfool_0..deepfool_{n-1}, fast_0..fast_{n-1}]`.
pub fn toy_margins_impl(classes: usize, samples: usize, epochs: usize, epsilon: f64, seed: u32) -> Result<Vec<f64>, String> {
    let data = make_toy_multiclass(classes, samples, seed.into()).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        epsilon,
        epochs,
        batch_size: 32,
        learning_rate: 0.05,
        loss: LossKind::CrossEntropy,
        attack: if epsilon > 0.0 {
            TrainAttack::Pgd {
                steps: 10,
                step_fraction: 0.25,
            }
        } else {
            TrainAttack::Fgsm
        },
        seed: seed.into(),
    };
    let plan = PruningPlan::keep_all(data.len());
    let (mlp, _) = train_mlp(&data, &plan, None, &cfg, &[2, 32, classes]).map_err(|e| e.to_string())?;
    let model = Model::Mlp(mlp);
    let deepfool = compute_margins(&model, &data, &MarginSpec::DeepFool(DeepFoolConfig::default())).map_err(|e| e.to_string())?;
    let fast_cfg = FastMarginConfig {
        step: 2e-3,
        i_max: 5000,
        j_max: 16,
    };
    let fast = compute_margins(&model, &data, &MarginSpec::Fast(fast_cfg)).map_err(|e| e.to_string())?;
    let mut out = vec![data.len() as f64];
    out.extend(deepfool.iter().map(|r| r.margin));
    out.extend(fast.iter().map(|r| r.margin));
    Ok(out)
}

#[wasm_bindgen]
pub fn toy_margins(classes: usize, samples: usize, epochs: usize, epsilon: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    toy_margins_impl(classes, samples, epochs, epsilon, seed).map_err(|e| JsError::new(&e))
}
