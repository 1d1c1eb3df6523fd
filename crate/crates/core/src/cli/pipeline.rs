//! The fixed preprocessing chain shared by every command.

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{canonical_json, sha256_hex, RunConfig};
use super::CliError;
use crate::cmapss_io::{feature_names, load_split, DatasetSplit, EngineSeries};
use crate::features::{f_scores, pca_fit, pca_transform, select_k_best, FeatureRanking, PcaModel};
use crate::frame::FeatureFrame;
use crate::preprocess::{
    constant_columns, label_piecewise_rul, label_test_rul, make_test_windows, make_test_windows_all,
    make_train_windows, normalize_apply, normalize_fit, smooth, EngineFeatures, NormalizationStats,
    RulTargetConfig, WindowSet,
};

/// Everything downstream commands need to know about a prepare run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineRecord {
    pub fingerprint: String,
    pub input_sha256: InputHashes,
    pub dropped: Vec<String>,
    pub kept: Vec<String>,
    pub normalization: NormalizationStats,
    pub ranking: FeatureRanking,
    pub selected: Vec<String>,
    pub pca: Option<PcaModel>,
    /// Model input columns in window order.
    pub feature_names: Vec<String>,
    pub rul_cap: u32,
    pub window_len: usize,
    pub n_train_windows: usize,
    pub n_test_engines: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputHashes {
    pub train: String,
    pub test: String,
    pub rul: String,
}

pub struct PipelineOutput {
    pub record: PipelineRecord,
    pub split: DatasetSplit,
    /// Smoothed kept columns, original scale.
    pub train_smoothed: FeatureFrame,
    /// Smoothed and normalized kept columns.
    pub train_norm: FeatureFrame,
    pub train_final: FeatureFrame,
    pub test_final: FeatureFrame,
    pub train_keys: Vec<(u32, u32)>,
    pub test_keys: Vec<(u32, u32)>,
    pub train_labels: Vec<f64>,
    pub test_labels: Vec<f64>,
    pub train_windows: WindowSet,
    pub test_last: WindowSet,
    pub test_all: WindowSet,
}

/// Raw feature rows of the given engines as a frame.
pub fn raw_frame(engines: &[EngineSeries]) -> FeatureFrame {
    let data = engines
        .iter()
        .flat_map(|e| &e.records)
        .flat_map(|r| r.features().collect::<Vec<_>>())
        .collect();
    FeatureFrame::new(feature_names(), data).expect("24 values per record")
}

fn keys(engines: &[EngineSeries]) -> Vec<(u32, u32)> {
    engines
        .iter()
        .flat_map(|e| e.records.iter().map(|r| (r.unit_id, r.cycle)))
        .collect()
}

/// Kept columns of each engine, smoothed per engine on sensor channels.
fn smoothed_frame(engines: &[EngineSeries], kept: &[String], cfg: &RunConfig) -> Result<FeatureFrame, CliError> {
    let all = feature_names();
    let idx: Vec<usize> = kept
        .iter()
        .map(|k| all.iter().position(|n| n == k).expect("kept names come from the schema"))
        .collect();
    let mut data = Vec::new();
    for e in engines {
        let mut cols: Vec<Vec<f64>> = Vec::with_capacity(idx.len());
        for (&i, name) in idx.iter().zip(kept) {
            let raw = e.column(i);
            cols.push(if name.starts_with("sensor_") {
                smooth(&raw, &cfg.preprocess.smoothing)?
            } else {
                raw
            });
        }
        for t in 0..e.len() {
            data.extend(cols.iter().map(|c| c[t]));
        }
    }
    let f = FeatureFrame::new(kept.to_vec(), data)?;
    Ok(f.with_provenance(format!("smooth[{:?}]", cfg.preprocess.smoothing.method)))
}

fn engine_features(engines: &[EngineSeries], frame: &FeatureFrame, labels: &[f64]) -> Vec<EngineFeatures> {
    let mut out = Vec::with_capacity(engines.len());
    let mut row = 0;
    let f = frame.n_cols();
    for e in engines {
        let n = e.len();
        out.push(EngineFeatures {
            unit_id: e.unit_id,
            cycles: e.records.iter().map(|r| r.cycle).collect(),
            n_features: f,
            data: frame.data()[row * f..(row + n) * f].to_vec(),
            rul: labels[row..row + n].to_vec(),
        });
        row += n;
    }
    out
}

fn file_hash(p: &std::path::Path) -> Result<String, CliError> {
    let bytes = std::fs::read(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Hash of the input files and every setting that shapes the artifacts.
pub fn preprocessing_fingerprint(cfg: &RunConfig, inputs: &InputHashes) -> String {
    let v = json!({
        "inputs": inputs,
        "preprocess": cfg.preprocess,
        "features": cfg.features,
    });
    sha256_hex(canonical_json(&v).as_bytes())
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<PipelineOutput, CliError> {
    let inputs = InputHashes {
        train: file_hash(&cfg.data.train)?,
        test: file_hash(&cfg.data.test)?,
        rul: file_hash(&cfg.data.rul)?,
    };
    let split = load_split(&cfg.data.train, &cfg.data.test, &cfg.data.rul)?;
    let pp = &cfg.preprocess;
    let target = RulTargetConfig { cap: pp.rul_cap };

    let raw = raw_frame(&split.train);
    let dropped = constant_columns(&raw, pp.variance_tol)?;
    let kept: Vec<String> = raw.names().iter().filter(|n| !dropped.contains(n)).cloned().collect();
    if kept.is_empty() {
        return Err(CliError::Data(format!(
            "every column has variance <= {}; nothing to model",
            pp.variance_tol
        )));
    }

    let train_smoothed = smoothed_frame(&split.train, &kept, cfg)?;
    let test_smoothed = smoothed_frame(&split.test, &kept, cfg)?;
    let norm = normalize_fit(&train_smoothed, pp.normalization)?;
    let train_norm = normalize_apply(&train_smoothed, &norm)?;
    let test_norm = normalize_apply(&test_smoothed, &norm)?;

    let mut train_labels = Vec::with_capacity(raw.n_rows());
    for e in &split.train {
        train_labels.extend(label_piecewise_rul(e, target)?);
    }
    let mut test_labels = Vec::new();
    for (e, &r) in split.test.iter().zip(&split.true_rul) {
        test_labels.extend(label_test_rul(e, r, target)?);
    }

    let ranking = f_scores(&train_norm, &train_labels)?;
    let k = cfg
        .features
        .select_k
        .unwrap_or_else(|| kept.len().saturating_sub(2).max(1));
    let chosen = select_k_best(&ranking, k)?;
    let selected: Vec<String> = kept.iter().filter(|n| chosen.contains(n)).cloned().collect();

    let mut train_final = train_norm.select(&selected)?;
    let mut test_final = test_norm.select(&selected)?;
    let pca = if cfg.features.pca_components > 0 {
        let n = cfg.features.pca_components.min(kept.len());
        Some(pca_fit(&train_norm, n)?)
    } else {
        None
    };
    if cfg.features.append_pc1 {
        let model = pca.as_ref().expect("validated: append_pc1 needs components");
        let tr = pca_transform(model, &train_norm)?.column(0);
        let te = pca_transform(model, &test_norm)?.column(0);
        train_final = train_final.push_column("pc_1", &tr)?.with_provenance("append_pc1");
        test_final = test_final.push_column("pc_1", &te)?.with_provenance("append_pc1");
    }

    let train_engines = engine_features(&split.train, &train_final, &train_labels);
    let test_engines = engine_features(&split.test, &test_final, &test_labels);
    let train_windows = make_train_windows(&train_engines, pp.window_len, pp.stride)?;
    let test_last = make_test_windows(&test_engines, pp.window_len)?;
    let test_all = make_test_windows_all(&test_engines, pp.window_len)?;

    let record = PipelineRecord {
        fingerprint: preprocessing_fingerprint(cfg, &inputs),
        input_sha256: inputs,
        dropped,
        kept,
        normalization: norm,
        ranking,
        selected,
        pca,
        feature_names: train_final.names().to_vec(),
        rul_cap: pp.rul_cap,
        window_len: pp.window_len,
        n_train_windows: train_windows.len(),
        n_test_engines: split.test.len(),
    };
    Ok(PipelineOutput {
        record,
        train_keys: keys(&split.train),
        test_keys: keys(&split.test),
        split,
        train_smoothed,
        train_norm,
        train_final,
        test_final,
        train_labels,
        test_labels,
        train_windows,
        test_last,
        test_all,
    })
}
