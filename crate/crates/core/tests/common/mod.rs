//! Synthetic CMAPSS-like fleets written to a temp directory.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Sensors held exactly constant, mirroring the flat channels of FD001.
pub const FLAT_SENSORS: [usize; 6] = [1, 5, 10, 16, 18, 19];

pub struct Fleet {
    pub train: String,
    pub test: String,
    pub rul: String,
    pub true_rul: Vec<u32>,
}

fn health(t: f64, life: f64) -> f64 {
    // Flat early on, accelerating towards failure.
    ((3.0 * t / life).exp() - 1.0) / (3.0f64.exp() - 1.0)
}

fn engine_rows(out: &mut String, unit: u32, cycles: u32, life: u32, rng: &mut ChaCha8Rng) {
    let noise = Normal::new(0.0, 1.0).unwrap();
    for t in 1..=cycles {
        let h = health(t as f64, life as f64);
        let _ = write!(
            out,
            "{unit} {t} {:?} {:?} 100.0",
            0.002 * noise.sample(rng),
            0.0003 * noise.sample(rng)
        );
        for s in 1..=21usize {
            let v = if FLAT_SENSORS.contains(&s) {
                500.0 + s as f64
            } else if s % 3 == 0 {
                // Non-informative channel.
                50.0 * s as f64 + noise.sample(rng)
            } else {
                let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
                100.0 * s as f64 + sign * 8.0 * h + 0.6 * noise.sample(rng)
            };
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
}

/// `n_train` run-to-failure engines and `n_test` truncated ones.
pub fn fleet(n_train: u32, n_test: u32, life: std::ops::Range<u32>, seed: u64) -> Fleet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = String::new();
    for u in 1..=n_train {
        let l = rng.random_range(life.clone());
        engine_rows(&mut train, u, l, l, &mut rng);
    }
    let mut test = String::new();
    let mut true_rul = Vec::new();
    for u in 1..=n_test {
        let l = rng.random_range(life.clone());
        let seen = rng.random_range(l * 2 / 5..l * 9 / 10);
        engine_rows(&mut test, u, seen, l, &mut rng);
        true_rul.push(l - seen);
    }
    let rul = true_rul.iter().map(|r| format!("{r}\n")).collect();
    Fleet { train, test, rul, true_rul }
}

impl Fleet {
    pub fn small(seed: u64) -> Self {
        fleet(8, 6, 60..90, seed)
    }

    pub fn write(&self, dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
        let p = (dir.join("train.txt"), dir.join("test.txt"), dir.join("rul.txt"));
        std::fs::write(&p.0, &self.train).unwrap();
        std::fs::write(&p.1, &self.test).unwrap();
        std::fs::write(&p.2, &self.rul).unwrap();
        p
    }
}

/// A workspace holding a small fleet and a config whose extra keys are
/// merged from `extra`. Returns the config path.
pub fn workspace(dir: &Path, extra: serde_json::Value) -> PathBuf {
    Fleet::small(7).write(dir);
    let mut cfg = serde_json::json!({
        "data": {"train": "train.txt", "test": "test.txt", "rul": "rul.txt"},
        "preprocess": {"window_len": 15},
        "train": {"epochs": 2, "batch_size": 32},
        "baselines": {
            "random_forest": {"n_estimators": 10},
            "gradient_boost": {"n_estimators": 10}
        },
        "output_dir": "out"
    });
    if let (Some(c), Some(e)) = (cfg.as_object_mut(), extra.as_object()) {
        for (k, v) in e {
            c.insert(k.clone(), v.clone());
        }
    }
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

/// A small CNN-LSTM so end-to-end tests stay quick.
pub fn tiny_cnn_lstm() -> serde_json::Value {
    serde_json::json!({
        "config": {
            "architecture": "CNN_LSTM",
            "conv_filters": 4,
            "conv_kernel": 3,
            "pool": 2,
            "lstm_layers": [6],
            "dense_layers": [4, 1]
        }
    })
}

/// Relative path, sha256 of every regular file under `root`, sorted.
pub fn tree_hashes(root: &Path) -> Vec<(String, String)> {
    use sha2::{Digest, Sha256};
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, hex::encode(Sha256::digest(std::fs::read(&p).unwrap()))));
            }
        }
    }
    out.sort();
    out
}
