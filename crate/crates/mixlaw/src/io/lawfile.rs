//! JSON law files: a family id plus named parameters, with optional fitting
//! provenance. Serialization is pretty-printed with sorted keys, so
//! write -> read -> write is byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{Family, Law};

pub const LAW_SCHEMA_VERSION: u32 = 1;

/// How a law was obtained. Everything here is deterministic given the input
/// data; wall time deliberately stays out.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitMeta {
    pub seed: u64,
    pub restarts: usize,
    pub epsilon: f64,
    pub huber_delta: f64,
    pub split: String,
    pub objective: f64,
    pub train_wr2: f64,
    pub test_wr2: Option<f64>,
    pub n_train: usize,
    pub n_test: usize,
    pub n_filtered_regime: usize,
    pub n_dropped_nonfinite: usize,
    pub tool_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LawFile {
    pub schema_version: u32,
    pub family: String,
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitMeta>,
}

impl LawFile {
    pub fn new(law: &Law, fit: Option<FitMeta>) -> Self {
        LawFile {
            schema_version: LAW_SCHEMA_VERSION,
            family: law.family().id().to_string(),
            params: law.to_map(),
            fit,
        }
    }

    pub fn law(&self) -> Result<Law> {
        let family: Family = self.family.parse()?;
        Law::from_map(family, &self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Schema(format!("law serialization failed: {e}")))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| Error::Parse { line: Some(e.line() as u64), msg: e.to_string() })?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == LAW_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "law file has schema_version {v}; this build reads {LAW_SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::Schema("law file is missing schema_version".into())),
        }
        serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::atomic_write(path, self.to_json()?.as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)?;
        Self::from_json(&s)
    }
}
