//! Per-run record of document status, stage timings and outputs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocStatus {
    Ok,
    /// Output written but some clusters were unusable.
    Partial,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub input: String,
    pub id: Option<String>,
    pub status: DocStatus,
    pub error_class: Option<String>,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub reactions: usize,
    /// Milliseconds per stage.
    pub stages: BTreeMap<String, f64>,
    /// Relative to the output directory.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusCounts {
    pub ok: usize,
    pub partial: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub started_unix_ms: u64,
    pub total_ms: f64,
    pub documents: Vec<DocumentEntry>,
    pub summary: StatusCounts,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_FAILED: i32 = 4;

impl RunManifest {
    pub fn new(config_hash: String, started_unix_ms: u64, documents: Vec<DocumentEntry>) -> Self {
        let mut summary = StatusCounts::default();
        for d in &documents {
            match d.status {
                DocStatus::Ok => summary.ok += 1,
                DocStatus::Partial => summary.partial += 1,
                DocStatus::Failed => summary.failed += 1,
            }
        }
        RunManifest {
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_ms,
            total_ms: 0.0,
            documents,
            summary,
        }
    }

    /// 0 when every document is ok, 4 when all failed, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        let n = self.documents.len();
        if n > 0 && self.summary.failed == n {
            EXIT_FAILED
        } else if self.summary.failed + self.summary.partial > 0 {
            EXIT_PARTIAL
        } else {
            EXIT_OK
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// Same manifest with clock-dependent fields zeroed.
    pub fn without_timings(&self) -> RunManifest {
        let mut m = self.clone();
        m.started_unix_ms = 0;
        m.total_ms = 0.0;
        for d in &mut m.documents {
            for v in d.stages.values_mut() {
                *v = 0.0;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(status: DocStatus) -> DocumentEntry {
        DocumentEntry {
            input: "a.json".into(),
            id: None,
            status,
            error_class: None,
            error: None,
            warnings: vec![],
            reactions: 0,
            stages: BTreeMap::from([("load".to_string(), 1.5)]),
            outputs: vec![],
        }
    }

    #[test]
    fn exit_codes() {
        let m =
            |s: Vec<DocStatus>| RunManifest::new("h".into(), 0, s.into_iter().map(entry).collect());
        assert_eq!(m(vec![]).exit_code(), EXIT_OK);
        assert_eq!(m(vec![DocStatus::Ok, DocStatus::Ok]).exit_code(), EXIT_OK);
        assert_eq!(
            m(vec![DocStatus::Ok, DocStatus::Failed]).exit_code(),
            EXIT_PARTIAL
        );
        assert_eq!(m(vec![DocStatus::Partial]).exit_code(), EXIT_PARTIAL);
        assert_eq!(
            m(vec![DocStatus::Failed, DocStatus::Failed]).exit_code(),
            EXIT_FAILED
        );
    }

    #[test]
    fn timings_strip() {
        let mut a = RunManifest::new("h".into(), 5, vec![entry(DocStatus::Ok)]);
        let mut b = a.clone();
        a.total_ms = 3.0;
        b.documents[0].stages.insert("load".into(), 9.0);
        assert_ne!(a, b);
        assert_eq!(a.without_timings(), b.without_timings());
    }
}
