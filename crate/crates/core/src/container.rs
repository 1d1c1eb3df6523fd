//! Self-describing binary container for named f64 arrays.
//!
//! Layout: the tag line `rulforge-container v1`, one line of JSON header
//! (`kind`, free-form `meta`, and the name and shape of every tensor), then
//! the tensors' values back to back as little-endian f64.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::autodiff::Tensor;

pub const FORMAT_TAG: &str = "rulforge-container v1";

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("{path}: not a rulforge container (missing `{FORMAT_TAG}` tag)")]
    BadTag { path: String },
    #[error("{path}: malformed header: {source}")]
    BadHeader {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: payload holds {got} bytes, header describes {expected}")]
    PayloadSize {
        path: String,
        expected: usize,
        got: usize,
    },
    #[error("{path}: expected a `{expected}` container, found `{found}`")]
    WrongKind {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: missing entry `{name}`")]
    Missing { path: String, name: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, ContainerError>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    kind: String,
    meta: Value,
    tensors: Vec<Entry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub meta: Value,
    pub tensors: Vec<(String, Tensor)>,
}

impl Container {
    pub fn new(kind: &str, meta: Value) -> Self {
        Self {
            kind: kind.to_string(),
            meta,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.push((name.into(), t));
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            kind: self.kind.clone(),
            meta: self.meta.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|(n, t)| Entry {
                    name: n.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let json = serde_json::to_string(&header).expect("header serializes");
        let total: usize = self.tensors.iter().map(|(_, t)| t.len()).sum();
        let mut out = Vec::with_capacity(FORMAT_TAG.len() + json.len() + 2 + 8 * total);
        out.extend_from_slice(FORMAT_TAG.as_bytes());
        out.push(b'\n');
        out.extend_from_slice(json.as_bytes());
        out.push(b'\n');
        for (_, t) in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    /// `origin` only labels error messages.
    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        let path = origin.to_string();
        let rest = bytes
            .strip_prefix(FORMAT_TAG.as_bytes())
            .and_then(|r| r.strip_prefix(b"\n"))
            .ok_or_else(|| ContainerError::BadTag { path: path.clone() })?;
        let nl = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| ContainerError::Invalid {
                path: path.clone(),
                message: "header line is not terminated".into(),
            })?;
        let header: Header = serde_json::from_slice(&rest[..nl])
            .map_err(|source| ContainerError::BadHeader { path: path.clone(), source })?;
        let payload = &rest[nl + 1..];
        let expected: usize = header
            .tensors
            .iter()
            .map(|e| e.shape.iter().product::<usize>() * 8)
            .sum();
        if payload.len() != expected {
            return Err(ContainerError::PayloadSize {
                path,
                expected,
                got: payload.len(),
            });
        }
        let mut offset = 0;
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            let n: usize = e.shape.iter().product();
            let data: Vec<f64> = payload[offset..offset + 8 * n]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            offset += 8 * n;
            let t = Tensor::new(e.shape, data).expect("length checked above");
            tensors.push((e.name, t));
        }
        Ok(Self {
            kind: header.kind,
            meta: header.meta,
            tensors,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| ContainerError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }

    pub fn expect_kind(&self, kinds: &[&str], origin: &str) -> Result<()> {
        if kinds.contains(&self.kind.as_str()) {
            Ok(())
        } else {
            Err(ContainerError::WrongKind {
                path: origin.to_string(),
                expected: kinds.join("|"),
                found: self.kind.clone(),
            })
        }
    }

    pub fn require(&self, name: &str, origin: &str) -> Result<&Tensor> {
        self.get(name).ok_or_else(|| ContainerError::Missing {
            path: origin.to_string(),
            name: name.to_string(),
        })
    }
}

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| ContainerError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp: PathBuf = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}
