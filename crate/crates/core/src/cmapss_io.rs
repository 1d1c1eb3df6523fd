//! Reading and writing the CMAPSS run-to-failure text files.
//!
//! Each row of a CMAPSS file is one operational cycle of one engine:
//! unit id, cycle index, three operational settings and twenty-one sensor
//! readings, separated by whitespace. The true-RUL file holds one integer per
//! test engine.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const N_SETTINGS: usize = 3;
pub const N_SENSORS: usize = 21;
/// Unit id + cycle + settings + sensors.
pub const N_FIELDS: usize = 2 + N_SETTINGS + N_SENSORS;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("line {line}: expected {N_FIELDS} fields, found {found}")]
    RowArity { line: usize, found: usize },
    #[error("line {line}: cannot parse `{token}` as a number")]
    NonNumeric { line: usize, token: String },
    #[error("line {line}: {what} must be a positive integer, got `{token}`")]
    BadIndex { line: usize, what: &'static str, token: String },
    #[error("unit {unit_id}: cycle {cycle} appears more than once")]
    DuplicateCycle { unit_id: u32, cycle: u32 },
    #[error("unit {unit_id}: expected cycle {expected}, found {found}")]
    GapInCycles { unit_id: u32, expected: u32, found: u32 },
    #[error("{test_engines} test engines but {labels} true-RUL labels")]
    CountMismatch { test_engines: usize, labels: usize },
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<IoError>,
    },
}

pub type Result<T> = std::result::Result<T, IoError>;

/// One engine cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub unit_id: u32,
    pub cycle: u32,
    pub settings: [f64; N_SETTINGS],
    pub sensors: [f64; N_SENSORS],
}

impl CycleRecord {
    /// Settings followed by sensors, in dataset column order.
    pub fn features(&self) -> impl Iterator<Item = f64> + '_ {
        self.settings.iter().chain(self.sensors.iter()).copied()
    }
}

/// All cycles of one engine, dense from cycle 1.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSeries {
    pub unit_id: u32,
    pub records: Vec<CycleRecord>,
}

impl EngineSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_cycle(&self) -> u32 {
        self.records.last().map_or(0, |r| r.cycle)
    }

    /// Values of the named feature column over the engine's life.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| {
                if idx < N_SETTINGS {
                    r.settings[idx]
                } else {
                    r.sensors[idx - N_SETTINGS]
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<EngineSeries>,
    pub test: Vec<EngineSeries>,
    pub true_rul: Vec<u32>,
}

/// Canonical names of the 24 feature columns, `setting_1..3` then `sensor_1..21`.
pub fn feature_names() -> Vec<String> {
    (1..=N_SETTINGS)
        .map(|i| format!("setting_{i}"))
        .chain((1..=N_SENSORS).map(|i| format!("sensor_{i}")))
        .collect()
}

fn parse_index(token: &str, line: usize, what: &'static str) -> Result<u32> {
    // Some distributions write the indices as floats ("1.0").
    let bad = || IoError::BadIndex {
        line,
        what,
        token: token.to_string(),
    };
    let value = match token.parse::<u32>() {
        Ok(v) => v,
        Err(_) => {
            let f: f64 = token.parse().map_err(|_| bad())?;
            if f.fract() != 0.0 || f < 1.0 || f > u32::MAX as f64 {
                return Err(bad());
            }
            f as u32
        }
    };
    if value == 0 {
        return Err(bad());
    }
    Ok(value)
}

/// Parses whitespace-delimited CMAPSS rows. Blank lines are skipped.
pub fn parse_records(text: &str) -> Result<Vec<CycleRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        if tokens.is_empty() {
            continue;
        }
        if tokens.len() != N_FIELDS {
            return Err(IoError::RowArity {
                line,
                found: tokens.len(),
            });
        }
        let unit_id = parse_index(tokens[0], line, "unit id")?;
        let cycle = parse_index(tokens[1], line, "cycle")?;
        let mut values = [0.0; N_SETTINGS + N_SENSORS];
        for (slot, token) in values.iter_mut().zip(&tokens[2..]) {
            *slot = token.parse().map_err(|_| IoError::NonNumeric {
                line,
                token: token.to_string(),
            })?;
        }
        let mut settings = [0.0; N_SETTINGS];
        let mut sensors = [0.0; N_SENSORS];
        settings.copy_from_slice(&values[..N_SETTINGS]);
        sensors.copy_from_slice(&values[N_SETTINGS..]);
        out.push(CycleRecord {
            unit_id,
            cycle,
            settings,
            sensors,
        });
    }
    Ok(out)
}

/// Groups records into per-engine series ordered by unit id then cycle.
pub fn group_engines(records: Vec<CycleRecord>) -> Result<Vec<EngineSeries>> {
    let mut by_unit: BTreeMap<u32, Vec<CycleRecord>> = BTreeMap::new();
    for r in records {
        by_unit.entry(r.unit_id).or_default().push(r);
    }
    let mut engines = Vec::with_capacity(by_unit.len());
    for (unit_id, mut recs) in by_unit {
        recs.sort_by_key(|r| r.cycle);
        for (pos, r) in recs.iter().enumerate() {
            let expected = pos as u32 + 1;
            if r.cycle != expected {
                if pos > 0 && recs[pos - 1].cycle == r.cycle {
                    return Err(IoError::DuplicateCycle {
                        unit_id,
                        cycle: r.cycle,
                    });
                }
                return Err(IoError::GapInCycles {
                    unit_id,
                    expected,
                    found: r.cycle,
                });
            }
        }
        engines.push(EngineSeries {
            unit_id,
            records: recs,
        });
    }
    Ok(engines)
}

/// Parses a true-RUL file: one non-negative integer per non-blank line.
pub fn parse_rul(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let token = raw.trim();
        if token.is_empty() {
            continue;
        }
        let parsed = token.parse::<u32>().ok().or_else(|| {
            token
                .parse::<f64>()
                .ok()
                .filter(|f| f.fract() == 0.0 && *f >= 0.0 && *f <= u32::MAX as f64)
                .map(|f| f as u32)
        });
        match parsed {
            Some(v) => out.push(v),
            None => {
                return Err(IoError::NonNumeric {
                    line: i + 1,
                    token: token.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Builds a validated split from the three file contents.
pub fn split_from_text(train: &str, test: &str, rul: &str) -> Result<DatasetSplit> {
    let train = group_engines(parse_records(train)?)?;
    let test = group_engines(parse_records(test)?)?;
    let true_rul = parse_rul(rul)?;
    if true_rul.len() != test.len() {
        return Err(IoError::CountMismatch {
            test_engines: test.len(),
            labels: true_rul.len(),
        });
    }
    Ok(DatasetSplit {
        train,
        test,
        true_rul,
    })
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.to_path_buf(),
        source,
    })
}

fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| IoError::InFile {
        path: path.to_path_buf(),
        source: Box::new(e),
    })
}

/// Loads the train/test/RUL triple from disk.
pub fn load_split(train: &Path, test: &Path, rul: &Path) -> Result<DatasetSplit> {
    let train_text = read(train)?;
    let test_text = read(test)?;
    let rul_text = read(rul)?;
    let train_engines = in_file(train, parse_records(&train_text).and_then(group_engines))?;
    let test_engines = in_file(test, parse_records(&test_text).and_then(group_engines))?;
    let true_rul = in_file(rul, parse_rul(&rul_text))?;
    if true_rul.len() != test_engines.len() {
        return Err(IoError::CountMismatch {
            test_engines: test_engines.len(),
            labels: true_rul.len(),
        });
    }
    Ok(DatasetSplit {
        train: train_engines,
        test: test_engines,
        true_rul,
    })
}

/// Writes records back in the space-delimited CMAPSS layout.
///
/// Floats use the shortest representation that parses back to the same
/// value, so `parse_records(&to_cmapss_text(r)) == r`.
pub fn to_cmapss_text(records: &[CycleRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = write!(out, "{} {}", r.unit_id, r.cycle);
        for v in r.features() {
            let _ = write!(out, " {v:?}");
        }
        out.push('\n');
    }
    out
}

/// Canonical CSV snapshot: `unit_id,cycle,setting_1..3,sensor_1..21`.
pub fn to_snapshot_csv(engines: &[EngineSeries]) -> String {
    let mut out = String::from("unit_id,cycle");
    for name in feature_names() {
        out.push(',');
        out.push_str(&name);
    }
    out.push('\n');
    for r in engines.iter().flat_map(|e| &e.records) {
        let _ = write!(out, "{},{}", r.unit_id, r.cycle);
        for v in r.features() {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}
