use std::path::{Path, PathBuf};

use mplab_core::attacks::AttackConfig;
use mplab_core::data::{dataset_from_csv, dataset_to_csv, generate_teacher_dataset, make_toy_multiclass, Dataset};
use mplab_core::io::{derive_seed, format_sig, sha256_hex, write_atomic};
use mplab_core::lab::{
    correlation_error, curve_slope, curves, evaluation_attack, generalization_error, robust_accuracy, run_sweep,
    sweep_from_csv, sweep_to_csv, Metric,
};
use mplab_core::margins::{
    compute_margins, manifest_from_csv, manifest_to_csv, DeepFoolConfig, FastMarginConfig, MarginMethod, MarginRecord,
    MarginSpec, MANIFEST_HEADER,
};
use mplab_core::models::{load_checkpoint, write_checkpoint, CheckpointFormat, LinearModel, Model};
use mplab_core::pruning::{
    epsilon_schedule, filter_below_margin, online_pass, plan_to_text, rank_and_prune, schedule_to_csv, threshold_prune,
    cd_score, CdHistory, Criterion, EpsilonSchedule, Orientation, PruningPlan, Strategy,
};
use mplab_core::train::{train_mlp, train_student, TrainConfig};

use crate::config::{ExperimentConfig, MarginEstimator, MarginSource, PruningSettings, Task};
use crate::{Cli, Command, DataKind, Failure, MethodArg, MetricArg};

type Outcome<T = ()> = Result<T, Failure>;

const CD_HEADER: &str = "sample_id,cd";

fn config_error(e: impl ToString) -> Failure {
    Failure::Config(e.to_string())
}

fn runtime_error(e: impl ToString) -> Failure {
    Failure::Runtime(e.to_string())
}

pub fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Sweep { config } => sweep(cli, config),
        Command::Train { config, eps, gap, mp } => train(cli, config, *eps, *gap, *mp),
        Command::Margin {
            model,
            data,
            method,
            eps,
            step,
            i_max,
            j_max,
            max_iter,
            overshoot,
            attack_steps,
        } => {
            let spec = match method {
                MethodArg::Analytic => MarginSpec::Analytic,
                MethodArg::Deepfool => MarginSpec::DeepFool(DeepFoolConfig {
                    max_iter: *max_iter,
                    overshoot: *overshoot,
                    ..DeepFoolConfig::default()
                }),
                MethodArg::Fast => {
                    let cfg = FastMarginConfig {
                        step: *step,
                        i_max: *i_max,
                        j_max: *j_max,
                    };
                    cfg.validate().map_err(config_error)?;
                    MarginSpec::Fast(cfg)
                }
                MethodArg::Online => {
                    let eps = eps.ok_or_else(|| config_error("--method online needs --eps"))?;
                    if !(eps > 0.0) || *attack_steps == 0 || *j_max == 0 {
                        return Err(config_error("online margins need eps > 0 and positive step counts"));
                    }
                    MarginSpec::Online {
                        attack: AttackConfig::bim(eps, eps / 4.0, *attack_steps),
                        j_max: *j_max,
                        seed: cli.seed.unwrap_or(0),
                    }
                }
            };
            margin(cli, model, data, &spec)
        }
        Command::Prune {
            manifest,
            strategy,
            ratio,
            threshold,
        } => prune(cli, manifest, *strategy, *ratio, *threshold),
        Command::Schedule { manifest, eps, gap } => schedule(cli, manifest, *eps, *gap),
        Command::Fit {
            csv,
            metric,
            alpha_min,
            alpha_max,
        } => fit(csv, *metric, *alpha_min, *alpha_max),
        Command::Generate {
            kind,
            samples,
            dim,
            classes,
        } => generate(cli, *kind, *samples, *dim, *classes),
    }
}

fn read_input(path: &Path) -> Outcome<String> {
    std::fs::read_to_string(path).map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))
}

fn load_config(path: &Path) -> Outcome<ExperimentConfig> {
    let text = read_input(path)?;
    ExperimentConfig::from_toml(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
}

fn validate_config(cfg: &mut ExperimentConfig, path: &Path) -> Outcome {
    let base = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    cfg.validate(base).map_err(config_error)
}

fn out_dir(cli: &Cli, configured: Option<&Path>) -> Outcome<PathBuf> {
    let dir = cli
        .out
        .clone()
        .or_else(|| configured.map(Path::to_path_buf))
        .or_else(|| std::env::var_os("MPLAB_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| runtime_error(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Outcome<PathBuf> {
    let path = dir.join(name);
    write_atomic(&path, bytes).map_err(|e| runtime_error(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn sweep(cli: &Cli, path: &Path) -> Outcome {
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    validate_config(&mut cfg, path)?;
    let grid = cfg.sweep_grid().map_err(config_error)?;
    let dir = out_dir(cli, cfg.output.dir.as_deref())?;
    write(&dir, "config.toml", cfg.to_toml().as_bytes())?;
    let rows = run_sweep(&grid).map_err(runtime_error)?;
    let mut failed = 0;
    for r in rows.iter().filter(|r| r.failure.is_some()) {
        failed += 1;
        let c = &r.cell;
        eprintln!(
            "cell {} eps={} alpha={} ratio={} replicate={} failed: {}",
            c.strategy,
            c.epsilon,
            c.alpha,
            c.prune_ratio,
            c.replicate,
            r.failure.as_deref().unwrap_or_default()
        );
    }
    let out = write(&dir, "sweep.csv", sweep_to_csv(&rows).as_bytes())?;
    println!("wrote {} ({} rows, {failed} failed)", out.display(), rows.len());
    Ok(())
}

/// Margins, optional online decisions and the manifest they came from.
struct Scores {
    margins: Vec<f64>,
    prune_online: Option<Vec<bool>>,
    /// Manifest text, written next to the plan unless it was an input.
    manifest: String,
    from_input: bool,
}

fn train(cli: &Cli, path: &Path, eps: Option<f64>, gap: Option<f64>, mp: Option<f64>) -> Outcome {
    let mut cfg = load_config(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(e) = eps {
        cfg.attack.epsilon = e.into();
    }
    if let Some(p) = cfg.pruning.as_mut() {
        if let Some(g) = gap {
            p.gap = g.into();
        }
        if let Some(m) = mp {
            p.m_p = Some(m.into());
        }
    } else if gap.is_some() || mp.is_some() {
        return Err(config_error("--gap and --mp need a [pruning] section"));
    }
    validate_config(&mut cfg, path)?;
    let dir = out_dir(cli, cfg.output.dir.as_deref())?;
    write(&dir, "config.toml", cfg.to_toml().as_bytes())?;

    let data = training_data(&cfg)?;
    let test = test_data(&cfg, data.dim)?;
    let tc = TrainConfig {
        seed: derive_seed(cfg.seed, "train"),
        ..cfg.train_config().map_err(config_error)?
    };
    let mut plan = PruningPlan::keep_all(data.len());
    let mut schedule: Option<EpsilonSchedule> = None;
    if let Some(p) = &cfg.pruning {
        let scores = pruning_scores(&cfg, p, &data, &tc)?;
        plan = build_plan(&cfg, p, &data, &scores, tc.epsilon)?;
        if p.schedule {
            let gap = p.gap.value().map_err(config_error)?;
            schedule = Some(epsilon_schedule(&scores.margins, tc.epsilon, gap).map_err(runtime_error)?);
        }
        let hash = sha256_hex(scores.manifest.as_bytes());
        if !scores.from_input {
            write(&dir, "margins.csv", scores.manifest.as_bytes())?;
        }
        let text = plan_to_text(&plan, &data.sample_ids, &hash).map_err(runtime_error)?;
        write(&dir, "plan.txt", text.as_bytes())?;
        if let Some(s) = &schedule {
            let text = schedule_to_csv(&data.sample_ids, s).map_err(runtime_error)?;
            write(&dir, "schedule.csv", text.as_bytes())?;
        }
    }

    let (model, history) = fit_model(&cfg, &data, &plan, schedule.as_ref(), &tc)?;
    let retained_ids: Vec<u64> = plan.retained.iter().map(|i| data.sample_ids[*i]).collect();
    write(&dir, "cd.csv", cd_to_csv(&retained_ids, &history)?.as_bytes())?;
    let (name, format) = if cfg.output.binary_checkpoints {
        ("model.bin", CheckpointFormat::Binary)
    } else {
        ("model.txt", CheckpointFormat::Text)
    };
    let ckpt = write(&dir, name, &write_checkpoint(&model, format))?;

    let eval_eps = cfg.attack.eval_epsilon.value().map_err(config_error)?;
    let mut metrics = vec![("retained", plan.retained.len() as f64)];
    if let Model::Linear(student) = &model {
        let teacher = LinearModel::teacher(data.dim);
        metrics.push(("corr_error", correlation_error(teacher.weights(), student.weights()).map_err(runtime_error)?));
        metrics.push(("clean_error", generalization_error(teacher.weights(), student.weights()).map_err(runtime_error)?));
    } else {
        metrics.push(("clean_error", 1.0 - robust_accuracy(&model, &test, &evaluation_attack(0.0), 0).map_err(runtime_error)?));
    }
    let robust = robust_accuracy(&model, &test, &evaluation_attack(eval_eps), 0).map_err(runtime_error)?;
    metrics.push(("robust_error", 1.0 - robust));
    let mut csv = String::from("metric,value\n");
    for (k, v) in &metrics {
        println!("{k}={}", format_sig(*v, 9));
        csv.push_str(&format!("{k},{}\n", format_sig(*v, 9)));
    }
    write(&dir, "metrics.csv", csv.as_bytes())?;
    println!("wrote {}", ckpt.display());
    Ok(())
}

fn training_data(cfg: &ExperimentConfig) -> Outcome<Dataset> {
    let data_cfg = cfg.data.as_ref();
    if let Some(file) = data_cfg.and_then(|d| d.file.as_ref()) {
        return dataset_from_csv(&read_input(file)?).map_err(config_error);
    }
    let seed = derive_seed(cfg.seed, "train-data");
    let n = match (data_cfg.and_then(|d| d.samples), data_cfg.and_then(|d| d.alpha)) {
        (Some(n), _) => n,
        (None, Some(a)) => (a * cfg.model.dim as f64).round() as usize,
        (None, None) => match cfg.task {
            Task::Perceptron => 8 * cfg.model.dim,
            Task::ToyMlp => 2000,
        },
    };
    match cfg.task {
        Task::Perceptron => generate_teacher_dataset(cfg.model.dim, n, seed),
        Task::ToyMlp => make_toy_multiclass(cfg.model.classes, n, seed),
    }
    .map_err(config_error)
}

fn test_data(cfg: &ExperimentConfig, dim: usize) -> Outcome<Dataset> {
    let n = cfg.data.as_ref().map_or(1000, |d| d.test_size);
    let seed = derive_seed(cfg.seed, "test-data");
    match cfg.task {
        Task::Perceptron => generate_teacher_dataset(dim, n, seed),
        Task::ToyMlp => make_toy_multiclass(cfg.model.classes, n, seed),
    }
    .map_err(config_error)
}

fn fit_model(
    cfg: &ExperimentConfig,
    data: &Dataset,
    plan: &PruningPlan,
    schedule: Option<&EpsilonSchedule>,
    tc: &TrainConfig,
) -> Outcome<(Model, CdHistory)> {
    match cfg.task {
        Task::Perceptron => train_student(data, plan, schedule, tc).map(|(m, h)| (Model::Linear(m), h)),
        Task::ToyMlp => {
            let mut dims = vec![data.dim];
            dims.extend(&cfg.model.hidden);
            dims.push(cfg.model.classes);
            train_mlp(data, plan, schedule, tc, &dims).map(|(m, h)| (Model::Mlp(m), h))
        }
    }
    .map_err(runtime_error)
}

fn pruning_scores(cfg: &ExperimentConfig, p: &PruningSettings, data: &Dataset, tc: &TrainConfig) -> Outcome<Scores> {
    let records = |margins: &[f64], method: MarginMethod, iterations: usize| -> Vec<MarginRecord> {
        data.sample_ids
            .iter()
            .zip(margins)
            .map(|(id, m)| MarginRecord {
                sample_id: *id,
                margin: *m,
                method,
                iterations,
            })
            .collect()
    };
    match p.margin_source {
        MarginSource::Teacher => {
            let margins = data
                .true_margins
                .clone()
                .ok_or_else(|| config_error("training data carries no teacher margins"))?;
            let manifest = manifest_to_csv(&records(&margins, MarginMethod::Analytic, 0));
            Ok(Scores {
                margins,
                prune_online: None,
                manifest,
                from_input: false,
            })
        }
        MarginSource::Manifest => {
            let path = p.manifest.as_ref().expect("validated");
            let text = read_input(path)?;
            let recs = manifest_from_csv(&text).map_err(config_error)?;
            let margins = join_by_id(data, &recs)?;
            Ok(Scores {
                margins,
                prune_online: None,
                manifest: text,
                from_input: true,
            })
        }
        MarginSource::Reference | MarginSource::Online => {
            let ref_cfg = TrainConfig {
                seed: derive_seed(cfg.seed, "reference"),
                ..*tc
            };
            let (reference, _) = fit_model(cfg, data, &PruningPlan::keep_all(data.len()), None, &ref_cfg)?;
            if p.margin_source == MarginSource::Reference {
                let spec = match (p.estimator, &reference) {
                    (Some(MarginEstimator::Analytic), Model::Mlp(_)) => {
                        return Err(config_error("analytic margins need the perceptron task"))
                    }
                    (Some(MarginEstimator::Analytic), _) | (None, Model::Linear(_)) => MarginSpec::Analytic,
                    (Some(MarginEstimator::DeepFool), _) => MarginSpec::DeepFool(DeepFoolConfig::default()),
                    (Some(MarginEstimator::Fast), _) | (None, Model::Mlp(_)) => MarginSpec::Fast(FastMarginConfig {
                        step: 1e-3,
                        i_max: 5000,
                        j_max: 20,
                    }),
                };
                let recs = compute_margins(&reference, data, &spec).map_err(runtime_error)?;
                let margins = join_by_id(data, &recs)?;
                return Ok(Scores {
                    margins,
                    prune_online: None,
                    manifest: manifest_to_csv(&recs),
                    from_input: false,
                });
            }
            let eps = tc.epsilon;
            if !(eps > 0.0) {
                return Err(config_error("online margins need attack.epsilon > 0"));
            }
            let attack = match cfg.task {
                Task::Perceptron => AttackConfig::fgsm(eps),
                Task::ToyMlp => AttackConfig::bim(eps, eps / 4.0, 10),
            };
            let m_p = p.m_p.as_ref().map(|m| m.value()).transpose().map_err(config_error)?;
            let pass = online_pass(&reference, data, &attack, 20, m_p, derive_seed(cfg.seed, "online"))
                .map_err(runtime_error)?;
            let margins: Vec<f64> = pass.iter().map(|(m, _)| *m).collect();
            let manifest = manifest_to_csv(&records(&margins, MarginMethod::Online, 20));
            Ok(Scores {
                margins,
                prune_online: m_p.map(|_| pass.iter().map(|(_, d)| *d).collect()),
                manifest,
                from_input: false,
            })
        }
    }
}

fn join_by_id(data: &Dataset, recs: &[MarginRecord]) -> Outcome<Vec<f64>> {
    let by_id: std::collections::HashMap<u64, f64> = recs.iter().map(|r| (r.sample_id, r.margin)).collect();
    data.sample_ids
        .iter()
        .map(|id| {
            by_id
                .get(id)
                .copied()
                .ok_or_else(|| config_error(format!("manifest has no margin for sample {id}")))
        })
        .collect()
}

fn build_plan(cfg: &ExperimentConfig, p: &PruningSettings, data: &Dataset, scores: &Scores, eps: f64) -> Outcome<PruningPlan> {
    let ids = &data.sample_ids;
    let margins = &scores.margins;
    let seed = derive_seed(cfg.seed, "random-prune");
    let threshold = p.threshold.as_ref().map(|t| t.value()).transpose().map_err(config_error)?;
    let plan = if let Some(decisions) = &scores.prune_online {
        let flags: Vec<f64> = decisions.iter().map(|d| f64::from(u8::from(*d))).collect();
        let mut plan = threshold_prune(&flags, Strategy::PruneEasy, Orientation::HighIsEasy, 0.5).map_err(runtime_error)?;
        let m_p = p.m_p.as_ref().expect("online decisions need m_p").value().map_err(config_error)?;
        plan.criterion = Criterion::Threshold(m_p);
        plan
    } else {
        match (p.strategy, p.ratio, threshold) {
            (Strategy::None, _, _) => Ok(PruningPlan::keep_all(data.len())),
            (Strategy::FilterBelow, _, t) => filter_below_margin(margins, t.unwrap_or(eps)),
            (Strategy::PruneEasyFiltered, Some(r), t) => {
                let filter = filter_below_margin(margins, t.unwrap_or(eps)).map_err(config_error)?;
                rank_and_prune(ids, margins, Strategy::PruneEasy, Orientation::HighIsEasy, r, seed)
                    .and_then(|pe| pe.intersect(&filter, Strategy::PruneEasyFiltered))
            }
            (s, Some(r), _) => rank_and_prune(ids, margins, s, Orientation::HighIsEasy, r, seed),
            (s, None, Some(t)) => threshold_prune(margins, s, Orientation::HighIsEasy, t),
            (s, None, None) => return Err(config_error(format!("strategy {s} needs a ratio or threshold"))),
        }
        .map_err(config_error)?
    };
    if plan.retained.is_empty() {
        return Err(runtime_error("pruning removed every sample"));
    }
    Ok(plan)
}

fn cd_to_csv(ids: &[u64], history: &CdHistory) -> Outcome<String> {
    let mut rows: Vec<(u64, f64)> = ids
        .iter()
        .enumerate()
        .map(|(j, id)| cd_score(history, j).map(|s| (*id, s)))
        .collect::<Result<_, _>>()
        .map_err(runtime_error)?;
    rows.sort_by_key(|r| r.0);
    let mut out = format!("{CD_HEADER}\n");
    for (id, s) in rows {
        out.push_str(&format!("{id},{}\n", format_sig(s, 9)));
    }
    Ok(out)
}

/// Sample ids, scores and score orientation from a margin manifest or a
/// difficulty (`sample_id,cd`) file.
fn read_scores(text: &str) -> Outcome<(Vec<u64>, Vec<f64>, Orientation)> {
    let header = text.lines().next().unwrap_or_default().trim();
    if header == MANIFEST_HEADER {
        let mut recs = manifest_from_csv(text).map_err(config_error)?;
        recs.sort_by_key(|r| r.sample_id);
        return Ok((
            recs.iter().map(|r| r.sample_id).collect(),
            recs.iter().map(|r| r.margin).collect(),
            Orientation::HighIsEasy,
        ));
    }
    if header != CD_HEADER {
        return Err(config_error(format!("unrecognised score file header {header:?}")));
    }
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let bad = || config_error(format!("bad difficulty row {line:?}"));
        let (id, cd) = line.split_once(',').ok_or_else(bad)?;
        rows.push((id.trim().parse::<u64>().map_err(|_| bad())?, cd.trim().parse::<f64>().map_err(|_| bad())?));
    }
    rows.sort_by_key(|r| r.0);
    Ok((
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        Orientation::HighIsDifficult,
    ))
}

fn margin(cli: &Cli, model_path: &Path, data_path: &Path, spec: &MarginSpec) -> Outcome {
    if !model_path.exists() {
        return Err(config_error(format!("cannot read {}", model_path.display())));
    }
    let model = load_checkpoint(model_path).map_err(config_error)?;
    let data = dataset_from_csv(&read_input(data_path)?).map_err(config_error)?;
    if matches!((spec, &model), (MarginSpec::Analytic, Model::Mlp(_))) {
        return Err(config_error("analytic margins need a linear model"));
    }
    let dir = out_dir(cli, None)?;
    let records = compute_margins(&model, &data, spec).map_err(runtime_error)?;
    let out = write(&dir, &format!("margins-{}.csv", spec.method()), manifest_to_csv(&records).as_bytes())?;
    println!("wrote {} ({} samples)", out.display(), records.len());
    Ok(())
}

fn prune(cli: &Cli, manifest: &Path, strategy: Strategy, ratio: Option<f64>, threshold: Option<f64>) -> Outcome {
    let text = read_input(manifest)?;
    let (ids, scores, orientation) = read_scores(&text)?;
    let seed = cli.seed.unwrap_or(0);
    let margins_only = |s: Strategy| {
        if orientation == Orientation::HighIsEasy {
            Ok(())
        } else {
            Err(config_error(format!("{s} needs a margin manifest")))
        }
    };
    let plan = match (strategy, ratio, threshold) {
        (Strategy::None, None, None) => Ok(PruningPlan::keep_all(ids.len())),
        (Strategy::FilterBelow, None, t) => {
            margins_only(strategy)?;
            filter_below_margin(&scores, t.unwrap_or(0.0))
        }
        (Strategy::PruneEasyFiltered, Some(r), t) => {
            margins_only(strategy)?;
            let filter = filter_below_margin(&scores, t.unwrap_or(0.0)).map_err(config_error)?;
            rank_and_prune(&ids, &scores, Strategy::PruneEasy, orientation, r, seed)
                .and_then(|pe| pe.intersect(&filter, Strategy::PruneEasyFiltered))
        }
        (Strategy::PruneEasy | Strategy::PruneDifficult | Strategy::Random, Some(r), None) => {
            rank_and_prune(&ids, &scores, strategy, orientation, r, seed)
        }
        (Strategy::PruneEasy | Strategy::PruneDifficult, None, Some(t)) => threshold_prune(&scores, strategy, orientation, t),
        _ => {
            return Err(config_error(format!(
                "strategy {strategy} takes --ratio (pe, pd, random, pe+filter) or --threshold (pe, pd, filter-below, pe+filter)"
            )))
        }
    }
    .map_err(config_error)?;
    let dir = out_dir(cli, None)?;
    let body = plan_to_text(&plan, &ids, &sha256_hex(text.as_bytes())).map_err(runtime_error)?;
    let out = write(&dir, "plan.txt", body.as_bytes())?;
    println!(
        "wrote {} (retained {} of {})",
        out.display(),
        plan.retained.len(),
        plan.len()
    );
    Ok(())
}

fn schedule(cli: &Cli, manifest: &Path, eps: f64, gap: f64) -> Outcome {
    let text = read_input(manifest)?;
    let (ids, margins, orientation) = read_scores(&text)?;
    if orientation != Orientation::HighIsEasy {
        return Err(config_error("schedules are built from margin manifests"));
    }
    let sched = epsilon_schedule(&margins, eps, gap).map_err(config_error)?;
    let dir = out_dir(cli, None)?;
    let body = schedule_to_csv(&ids, &sched).map_err(runtime_error)?;
    let out = write(&dir, "schedule.csv", body.as_bytes())?;
    println!("wrote {} ({} samples)", out.display(), ids.len());
    Ok(())
}

fn fit(csv: &Path, metric: MetricArg, lo: f64, hi: f64) -> Outcome {
    let rows = sweep_from_csv(&read_input(csv)?).map_err(config_error)?;
    let metric = match metric {
        MetricArg::Corr => Metric::Correlation,
        MetricArg::Clean => Metric::Clean,
        MetricArg::Robust => Metric::Robust,
    };
    for (key, points) in curves(&rows, metric) {
        let n = points.iter().filter(|(a, _)| *a >= lo && *a <= hi).count();
        let fit = match curve_slope(&points, lo, hi) {
            Ok(f) => format!(
                "slope={} intercept={} residual={}",
                format_sig(f.slope, 6),
                format_sig(f.intercept, 6),
                format_sig(f.residual, 6)
            ),
            Err(e) => format!("slope=nan ({e})"),
        };
        println!(
            "strategy={} epsilon={} prune_ratio={} points={n} {fit}",
            key.strategy,
            format_sig(key.epsilon, 9),
            format_sig(key.prune_ratio, 9)
        );
    }
    Ok(())
}

fn generate(cli: &Cli, kind: DataKind, samples: usize, dim: usize, classes: usize) -> Outcome {
    let seed = cli.seed.unwrap_or(0);
    let (data, name) = match kind {
        DataKind::Teacher => (generate_teacher_dataset(dim, samples, seed), "teacher.csv"),
        DataKind::Toy => (make_toy_multiclass(classes, samples, seed), "toy.csv"),
    };
    let data = data.map_err(config_error)?;
    let dir = out_dir(cli, None)?;
    let out = write(&dir, name, dataset_to_csv(&data).as_bytes())?;
    println!("wrote {} ({} samples)", out.display(), data.len());
    Ok(())
}
