//! Multi-domain plan specs: named target domains, each pointing at a fitted
//! law file. Law paths resolve relative to the spec file's directory.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::lawfile::LawFile;
use crate::planner::DomainSpec;

pub const MULTI_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiSpecDomain {
    pub name: String,
    /// Law file path, relative to the spec file.
    pub law: String,
    pub d_target: f64,
    #[serde(default)]
    pub model_size: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiSpec {
    pub schema_version: u32,
    pub domains: Vec<MultiSpecDomain>,
}

impl MultiSpec {
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)
            .map_err(|e| Error::Parse { line: Some(e.line() as u64), msg: e.to_string() })?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == MULTI_SCHEMA_VERSION as u64 => {}
            Some(v) => {
                return Err(Error::Schema(format!(
                    "plan spec has schema_version {v}; this build reads {MULTI_SCHEMA_VERSION}"
                )))
            }
            None => return Err(Error::Schema("plan spec is missing schema_version".into())),
        }
        let spec: MultiSpec =
            serde_json::from_value(value).map_err(|e| Error::Schema(e.to_string()))?;
        if spec.domains.is_empty() {
            return Err(Error::Schema("plan spec lists no domains".into()));
        }
        Ok(spec)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Loads every referenced law file, resolving paths against `base_dir`.
    pub fn load_domains(&self, base_dir: &Path) -> Result<Vec<DomainSpec>> {
        self.domains
            .iter()
            .map(|d| {
                let law_path = base_dir.join(&d.law);
                let law = LawFile::read(&law_path)?.law()?;
                Ok(DomainSpec {
                    name: d.name.clone(),
                    law,
                    d_target: d.d_target,
                    model_size: d.model_size,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::Law;
    use crate::model::FixParams;

    #[test]
    fn loads_relative_law_paths() {
        let dir = tempfile::tempdir().unwrap();
        let law = Law::Fix(FixParams { e: 2.0, a: 480.0, alpha: 0.32, r1: 6.0, tau: 2.0, gamma: 0.4 });
        LawFile::new(&law, None).write(&dir.path().join("code.json")).unwrap();
        let json = r#"{
  "schema_version": 1,
  "domains": [
    {"name": "code", "law": "code.json", "d_target": 5e7}
  ]
}"#;
        let spec_path = dir.path().join("plan.json");
        std::fs::write(&spec_path, json).unwrap();
        let spec = MultiSpec::read(&spec_path).unwrap();
        let domains = spec.load_domains(spec_path.parent().unwrap()).unwrap();
        assert_eq!(domains.len(), 1);
        assert_eq!(domains[0].name, "code");
        assert_eq!(domains[0].d_target, 5e7);
        assert_eq!(domains[0].law.values(), law.values());
    }

    #[test]
    fn schema_and_shape_checks() {
        assert!(matches!(
            MultiSpec::from_json(r#"{"schema_version": 2, "domains": []}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            MultiSpec::from_json(r#"{"domains": []}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            MultiSpec::from_json(r#"{"schema_version": 1, "domains": []}"#),
            Err(Error::Schema(_))
        ));
    }
}
