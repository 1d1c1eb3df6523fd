use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ModelChoice, RunConfig, EvaluationMode};
use super::manifest::{ArtifactWriter, RunManifest};
use super::pipeline::{preprocessing_fingerprint, raw_frame, run_pipeline, InputHashes, PipelineRecord};
use super::config::sha256_hex;
use super::CliError;
use crate::artifact::{windows_from_container, windows_to_container, ModelArtifact, ModelBody};
use crate::baselines::{boost_fit, forest_fit, linreg_fit};
use crate::cmapss_io::to_snapshot_csv;
use crate::container::Container;
use crate::features::{correlation_matrix, pca_fit, pca_transform};
use crate::frame::FeatureFrame;
use crate::metrics::{EvalMode, EvalReport};
use crate::nn::train;
use crate::preprocess::{WindowSet, SmoothingConfig, SmoothingMethod, smooth};

pub const PIPELINE_FILE: &str = "pipeline.json";
pub const TRAIN_WINDOWS: &str = "windows_train.bin";
pub const TEST_LAST_WINDOWS: &str = "windows_test_last.bin";
pub const TEST_ALL_WINDOWS: &str = "windows_test_all.bin";
pub const MODEL_FILE: &str = "model.bin";

const HIST_BINS: usize = 20;

/// A loaded config plus the output directory it writes to.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
    pub config_fp: String,
}

impl Context {
    /// Loads a config file; `out` and `seed` override the file's values
    /// before the fingerprint is taken.
    pub fn load(config: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Self, CliError> {
        let mut cfg = RunConfig::load(config)?;
        if let Some(o) = out {
            cfg.output_dir = o;
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        Ok(Self::new(cfg))
    }

    pub fn new(cfg: RunConfig) -> Self {
        let config_fp = cfg.fingerprint();
        let out = cfg.output_dir.clone();
        Self { cfg, out, config_fp }
    }

    fn writer(&self, command: &str) -> ArtifactWriter {
        ArtifactWriter::new(&self.out, command, &self.config_fp)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Data(format!("csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Data(format!("csv: {e}")))
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// `unit_id,cycle,<columns>,rul` for a frame aligned with its keys.
fn keyed_frame_csv(frame: &FeatureFrame, keys: &[(u32, u32)], labels: &[f64]) -> Result<Vec<u8>, CliError> {
    let mut header = strings(&["unit_id", "cycle"]);
    header.extend(frame.names().iter().cloned());
    header.push("rul".into());
    let rows = frame.rows().zip(keys).zip(labels).map(|((row, &(u, c)), &y)| {
        let mut r = vec![u.to_string(), c.to_string()];
        r.extend(row.iter().map(|&v| fmt(v)));
        r.push(fmt(y));
        r
    });
    csv_bytes(&header, rows)
}

fn current_inputs(cfg: &RunConfig) -> Result<InputHashes, CliError> {
    let h = |p: &Path| -> Result<String, CliError> {
        let b = std::fs::read(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
        Ok(sha256_hex(&b))
    };
    Ok(InputHashes {
        train: h(&cfg.data.train)?,
        test: h(&cfg.data.test)?,
        rul: h(&cfg.data.rul)?,
    })
}

/// Reads `pipeline.json` and checks it was produced by the current config
/// and input files.
pub fn load_prepared(ctx: &Context) -> Result<PipelineRecord, CliError> {
    let path = ctx.out.join(PIPELINE_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| {
        CliError::Data(format!("{}: {e}; run `prepare` first", path.display()))
    })?;
    let rec: PipelineRecord =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let expected = preprocessing_fingerprint(&ctx.cfg, &current_inputs(&ctx.cfg)?);
    if rec.fingerprint != expected {
        return Err(CliError::Data(format!(
            "{} was written for preprocessing {} but the config now gives {expected}; rerun `prepare`",
            path.display(),
            rec.fingerprint
        )));
    }
    Ok(rec)
}

pub fn load_windows(ctx: &Context, file: &str) -> Result<WindowSet, CliError> {
    let path = ctx.out.join(file);
    let c = Container::read(&path)?;
    Ok(windows_from_container(&c, &path.display().to_string())?)
}

pub fn cmd_prepare(ctx: &Context) -> Result<RunManifest, CliError> {
    let mut w = ctx.writer("prepare");
    let p = run_pipeline(&ctx.cfg)?;
    w.lap("pipeline");
    info!(
        "prepared {} training windows over {} features, dropped {:?}",
        p.train_windows.len(),
        p.record.feature_names.len(),
        p.record.dropped
    );

    w.write("snapshot_train.csv", to_snapshot_csv(&p.split.train).as_bytes())?;
    w.write("snapshot_test.csv", to_snapshot_csv(&p.split.test).as_bytes())?;
    w.write("normalized_train.csv", &keyed_frame_csv(&p.train_norm, &p.train_keys, &p.train_labels)?)?;
    w.write("features_train.csv", &keyed_frame_csv(&p.train_final, &p.train_keys, &p.train_labels)?)?;
    w.write("features_test.csv", &keyed_frame_csv(&p.test_final, &p.test_keys, &p.test_labels)?)?;
    w.write(TRAIN_WINDOWS, &windows_to_container(&p.train_windows).to_bytes())?;
    w.write(TEST_LAST_WINDOWS, &windows_to_container(&p.test_last).to_bytes())?;
    w.write(TEST_ALL_WINDOWS, &windows_to_container(&p.test_all).to_bytes())?;
    w.write_json(
        "dropped_features.json",
        &serde_json::json!({
            "variance_tol": ctx.cfg.preprocess.variance_tol,
            "dropped": p.record.dropped,
            "kept": p.record.kept,
        }),
    )?;
    w.write_json(PIPELINE_FILE, &p.record)?;
    w.lap("write");
    w.finish()
}

fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    (0..bins)
        .map(|b| (lo + b as f64 * width, lo + (b + 1) as f64 * width, counts[b]))
        .collect()
}

pub fn cmd_analyze(ctx: &Context) -> Result<RunManifest, CliError> {
    load_prepared(ctx)?;
    let mut w = ctx.writer("analyze");
    let p = run_pipeline(&ctx.cfg)?;
    w.lap("pipeline");

    let raw = raw_frame(&p.split.train).select(&p.record.kept)?;
    let kept = &p.record.kept;
    let sensors: Vec<String> = kept.iter().filter(|n| n.starts_with("sensor_")).cloned().collect();

    // Raw sensor trajectories against remaining life.
    w.write("analysis/life_curves.csv", &keyed_frame_csv(&raw, &p.train_keys, &p.train_labels)?)?;

    let mut rows = Vec::new();
    for (c, name) in kept.iter().enumerate() {
        for (b, (lo, hi, n)) in histogram(&raw.column(c), HIST_BINS).into_iter().enumerate() {
            rows.push(vec![name.clone(), b.to_string(), fmt(lo), fmt(hi), n.to_string()]);
        }
    }
    w.write(
        "analysis/histograms.csv",
        &csv_bytes(&strings(&["feature", "bin", "lo", "hi", "count"]), rows)?,
    )?;

    w.write(
        "analysis/parallel_coordinates.csv",
        &keyed_frame_csv(&p.train_norm, &p.train_keys, &p.train_labels)?,
    )?;

    // Smoothed sensor values at each engine's failure cycle.
    let smoothed = p.train_smoothed.select(&sensors)?;
    let mut header = strings(&["unit_id", "failure_cycle"]);
    header.extend(sensors.iter().cloned());
    let mut rows = Vec::new();
    let mut start = 0;
    for e in &p.split.train {
        let last = start + e.len() - 1;
        let mut r = vec![e.unit_id.to_string(), e.max_cycle().to_string()];
        r.extend(smoothed.row(last).iter().map(|&v| fmt(v)));
        rows.push(r);
        start += e.len();
    }
    w.write("analysis/ema_failure_points.csv", &csv_bytes(&header, rows)?)?;

    let first = &p.split.train[0];
    let mut rows = Vec::new();
    let all = crate::cmapss_io::feature_names();
    let cfg_smooth = match ctx.cfg.preprocess.smoothing.method {
        SmoothingMethod::None => SmoothingConfig { method: SmoothingMethod::Ema, ..ctx.cfg.preprocess.smoothing },
        _ => ctx.cfg.preprocess.smoothing,
    };
    for name in &sensors {
        let i = all.iter().position(|n| n == name).expect("schema name");
        let series = first.column(i);
        let sm = smooth(&series, &cfg_smooth)?;
        for ((r, &x), s) in first.records.iter().zip(&series).zip(sm) {
            rows.push(vec![first.unit_id.to_string(), name.clone(), r.cycle.to_string(), fmt(x), fmt(s)]);
        }
    }
    w.write(
        "analysis/raw_vs_ema.csv",
        &csv_bytes(&strings(&["unit_id", "feature", "cycle", "raw", "smoothed"]), rows)?,
    )?;

    let full = pca_fit(&p.train_norm, kept.len())?;
    let mut cum = 0.0;
    let rows = (0..full.n_components).map(|j| {
        cum += full.explained_variance_ratio[j];
        vec![(j + 1).to_string(), fmt(full.eigenvalues[j]), fmt(full.explained_variance_ratio[j]), fmt(cum)]
    });
    w.write(
        "analysis/explained_variance.csv",
        &csv_bytes(&strings(&["component", "eigenvalue", "ratio", "cumulative"]), rows)?,
    )?;

    let proj = pca_transform(&full, &p.train_norm)?;
    let n_pc = full.n_components.min(2);
    let mut header = strings(&["unit_id", "cycle", "rul"]);
    header.extend((1..=n_pc).map(|j| format!("pc_{j}")));
    let rows = proj.rows().zip(&p.train_keys).zip(&p.train_labels).map(|((row, &(u, c)), &y)| {
        let mut r = vec![u.to_string(), c.to_string(), fmt(y)];
        r.extend(row[..n_pc].iter().map(|&v| fmt(v)));
        r
    });
    w.write("analysis/pc_scatter.csv", &csv_bytes(&header, rows)?)?;

    let corr = correlation_matrix(&p.train_norm)?;
    let k = kept.len();
    let mut header = strings(&["feature"]);
    header.extend(kept.iter().cloned());
    let rows = (0..k).map(|i| {
        let mut r = vec![kept[i].clone()];
        r.extend(corr[i * k..(i + 1) * k].iter().map(|&v| fmt(v)));
        r
    });
    w.write("analysis/correlation_matrix.csv", &csv_bytes(&header, rows)?)?;

    let rows = p
        .record
        .ranking
        .ranked()
        .map(|(n, s)| vec![n.to_string(), fmt(s)])
        .collect::<Vec<_>>();
    w.write("analysis/f_scores.csv", &csv_bytes(&strings(&["feature", "f_score"]), rows)?)?;
    w.lap("write");
    w.finish()
}

/// Fits one model choice on prepared training windows.
pub fn fit_model(
    cfg: &RunConfig,
    choice: &ModelChoice,
    windows: &WindowSet,
    rec: &PipelineRecord,
) -> Result<ModelArtifact, CliError> {
    let cap = rec.rul_cap as f64;
    if let ModelChoice::Neural { name, config } = choice {
        let tcfg = cfg.train_config(name)?;
        let m = train(config, &tcfg, windows, cap, &rec.fingerprint)?;
        return Ok(ModelArtifact::neural(name, m));
    }
    let input = cfg.baselines.input;
    let x = input.design(windows);
    let body = match choice {
        ModelChoice::Linear => ModelBody::Linear(linreg_fit(&x, &windows.labels)?),
        ModelChoice::Forest => ModelBody::Forest(forest_fit(&x, &windows.labels, &cfg.forest_config())?),
        ModelChoice::Boost => ModelBody::Boost(boost_fit(&x, &windows.labels, &cfg.boost_config())?),
        ModelChoice::Neural { .. } => unreachable!(),
    };
    Ok(ModelArtifact {
        name: choice.name().to_string(),
        fingerprint: rec.fingerprint.clone(),
        rul_cap: cap,
        window_len: windows.window_len,
        n_features: windows.n_features,
        input,
        body,
    })
}

pub fn cmd_train(ctx: &Context) -> Result<RunManifest, CliError> {
    let rec = load_prepared(ctx)?;
    let windows = load_windows(ctx, TRAIN_WINDOWS)?;
    let mut w = ctx.writer("train");
    let choice = ctx.cfg.model.resolve()?;
    info!("training {} on {} windows", choice.name(), windows.len());
    let model = fit_model(&ctx.cfg, &choice, &windows, &rec)?;
    w.lap("fit");
    w.write(MODEL_FILE, &model.to_container().to_bytes())?;
    match &model.body {
        ModelBody::Neural(m) => {
            let rows = m.loss_curve.iter().enumerate().map(|(e, &l)| vec![(e + 1).to_string(), fmt(l)]);
            w.write("loss_curve.csv", &csv_bytes(&strings(&["epoch", "loss"]), rows)?)?;
        }
        ModelBody::Boost(b) => {
            let rows = b.train_mse.iter().enumerate().map(|(s, &l)| vec![s.to_string(), fmt(l)]);
            w.write("loss_curve.csv", &csv_bytes(&strings(&["stage", "train_mse"]), rows)?)?;
        }
        _ => {}
    }
    w.lap("write");
    w.finish()
}

fn modes(m: EvaluationMode) -> Vec<EvalMode> {
    match m {
        EvaluationMode::Both => vec![EvalMode::PerWindow, EvalMode::LastCycle],
        EvaluationMode::PerWindow => vec![EvalMode::PerWindow],
        EvaluationMode::LastCycle => vec![EvalMode::LastCycle],
    }
}

fn evaluate_model(
    model: &ModelArtifact,
    test: &[(EvalMode, &WindowSet)],
    config_fp: &str,
) -> Result<Vec<EvalReport>, CliError> {
    test.iter()
        .map(|(mode, ws)| {
            let pred = model.predict(ws)?;
            Ok(EvalReport::compute(&pred, &ws.labels, *mode, &model.name, config_fp)?)
        })
        .collect()
}

/// Scores a saved model on the prepared test windows. `model_path`
/// defaults to `model.bin` in the output directory.
pub fn cmd_evaluate(ctx: &Context, model_path: Option<&Path>) -> Result<Vec<EvalReport>, CliError> {
    let rec = load_prepared(ctx)?;
    let path = model_path.map(Path::to_path_buf).unwrap_or_else(|| ctx.out.join(MODEL_FILE));
    let model = ModelArtifact::load(&path)?;
    if model.fingerprint != rec.fingerprint {
        return Err(CliError::FingerprintMismatch {
            model: model.fingerprint,
            artifacts: rec.fingerprint,
            dir: ctx.out.clone(),
        });
    }
    let last = load_windows(ctx, TEST_LAST_WINDOWS)?;
    let all = load_windows(ctx, TEST_ALL_WINDOWS)?;
    let mut w = ctx.writer("evaluate");
    let test: Vec<(EvalMode, &WindowSet)> = modes(ctx.cfg.evaluation_mode)
        .into_iter()
        .map(|m| (m, if m == EvalMode::LastCycle { &last } else { &all }))
        .collect();
    let reports = evaluate_model(&model, &test, &ctx.config_fp)?;
    w.lap("evaluate");
    w.write_json("evaluation.json", &reports)?;
    w.finish()?;
    Ok(reports)
}

/// Test scores of one model in one evaluation mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub rmse: f64,
    pub r2: f64,
    pub nasa_score: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub model: String,
    /// Set when the model failed to train or score.
    pub error: Option<String>,
    pub per_window: Option<Scores>,
    pub last_cycle: Option<Scores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_fingerprint: String,
    pub preprocessing_fingerprint: String,
    pub rows: Vec<CompareRow>,
    /// Model names best first, keyed `<metric>_<mode>`.
    pub rankings: BTreeMap<String, Vec<String>>,
}

/// The comparison roster, in table order.
pub const ROSTER: [(&str, &str); 6] = [
    ("linreg", "linreg"),
    ("random_forest", "random_forest"),
    ("gradient_boost", "gradient_boost"),
    ("mlp", "mlp_default"),
    ("lstm", "lstm_default"),
    ("cnn_lstm", "cnn_lstm_default"),
];

type Metric = (&'static str, fn(&Scores) -> f64, bool);
const METRICS: [Metric; 3] = [
    ("rmse", |s| s.rmse, false),
    ("r2", |s| s.r2, true),
    ("nasa_score", |s| s.nasa_score, false),
];

fn rank(rows: &[CompareRow], mode: EvalMode, metric: &Metric) -> Vec<String> {
    let mut scored: Vec<(f64, &str)> = rows
        .iter()
        .filter_map(|r| {
            let s = match mode {
                EvalMode::PerWindow => r.per_window.as_ref(),
                EvalMode::LastCycle => r.last_cycle.as_ref(),
            }?;
            let v = (metric.1)(s);
            Some((if metric.2 { -v } else { v }, r.model.as_str()))
        })
        .filter(|(v, _)| !v.is_nan())
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    scored.into_iter().map(|(_, n)| n.to_string()).collect()
}

fn score_row(
    ctx: &Context,
    name: &str,
    preset: &str,
    train: &WindowSet,
    last: &WindowSet,
    all: &WindowSet,
    rec: &PipelineRecord,
) -> CompareRow {
    let run = || -> Result<Vec<EvalReport>, CliError> {
        let block = super::config::ModelBlock {
            preset: Some(preset.to_string()),
            config: None,
        };
        let model = fit_model(&ctx.cfg, &block.resolve()?, train, rec)?;
        evaluate_model(&model, &[(EvalMode::PerWindow, all), (EvalMode::LastCycle, last)], &ctx.config_fp)
    };
    let to_scores = |r: &EvalReport| Scores {
        rmse: r.rmse,
        r2: r.r2,
        nasa_score: r.nasa_score,
        n: r.n,
    };
    match run() {
        Ok(reports) => CompareRow {
            model: name.to_string(),
            error: None,
            per_window: Some(to_scores(&reports[0])),
            last_cycle: Some(to_scores(&reports[1])),
        },
        Err(e) => {
            log::warn!("{name}: {e}");
            CompareRow {
                model: name.to_string(),
                error: Some(e.to_string()),
                per_window: None,
                last_cycle: None,
            }
        }
    }
}

pub fn cmd_compare(ctx: &Context) -> Result<Comparison, CliError> {
    let rec = load_prepared(ctx)?;
    let train = load_windows(ctx, TRAIN_WINDOWS)?;
    let last = load_windows(ctx, TEST_LAST_WINDOWS)?;
    let all = load_windows(ctx, TEST_ALL_WINDOWS)?;
    let mut w = ctx.writer("compare");
    let rows: Vec<CompareRow> = ROSTER
        .par_iter()
        .map(|(name, preset)| score_row(ctx, name, preset, &train, &last, &all, &rec))
        .collect();
    w.lap("roster");

    let mut rankings = BTreeMap::new();
    for mode in [EvalMode::PerWindow, EvalMode::LastCycle] {
        for m in &METRICS {
            rankings.insert(format!("{}_{}", m.0, mode.as_str()), rank(&rows, mode, m));
        }
    }
    let mut header = strings(&["model", "status", "error"]);
    for mode in [EvalMode::PerWindow, EvalMode::LastCycle] {
        for m in &METRICS {
            header.push(format!("{}_{}", m.0, mode.as_str()));
        }
    }
    for mode in [EvalMode::PerWindow, EvalMode::LastCycle] {
        for m in &METRICS {
            header.push(format!("rank_{}_{}", m.0, mode.as_str()));
        }
    }
    let csv_rows = rows.iter().map(|r| {
        let mut out = vec![
            r.model.clone(),
            if r.error.is_none() { "ok".into() } else { "failed".into() },
            r.error.clone().unwrap_or_default(),
        ];
        for s in [&r.per_window, &r.last_cycle] {
            for m in &METRICS {
                out.push(s.as_ref().map(|s| fmt((m.1)(s))).unwrap_or_default());
            }
        }
        for mode in [EvalMode::PerWindow, EvalMode::LastCycle] {
            for m in &METRICS {
                let key = format!("{}_{}", m.0, mode.as_str());
                out.push(
                    rankings[&key]
                        .iter()
                        .position(|n| *n == r.model)
                        .map(|i| (i + 1).to_string())
                        .unwrap_or_default(),
                );
            }
        }
        out
    });
    w.write("comparison.csv", &csv_bytes(&header, csv_rows.collect::<Vec<_>>())?)?;
    let table = Comparison {
        config_fingerprint: ctx.config_fp.clone(),
        preprocessing_fingerprint: rec.fingerprint.clone(),
        rows,
        rankings,
    };
    w.write_json("comparison.json", &table)?;
    w.finish()?;
    Ok(table)
}
