//! Flat TOML configuration with per-key overrides and a canonical hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::eval::{Criterion, DEFAULT_IOU};
use crate::perception::LiveConfig;
use crate::reasoning::ReasoningConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlannerPolicy {
    Rule,
    Vlm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriterionSet {
    Hard,
    Soft,
    Both,
}

impl CriterionSet {
    pub fn criteria(self) -> Vec<Criterion> {
        match self {
            CriterionSet::Hard => vec![Criterion::Hard],
            CriterionSet::Soft => vec![Criterion::Soft],
            CriterionSet::Both => vec![Criterion::Hard, Criterion::Soft],
        }
    }
}

/// Everything that is not a reasoning parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    pub detections_dir: Option<PathBuf>,
    pub fixtures_dir: Option<PathBuf>,
    pub weights_file: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
    pub prompts_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub backend: Backend,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub min_interval_ms: u64,
    pub planner: PlannerPolicy,
    pub planner_fallback: bool,
    pub query: String,
    pub iou: f64,
    pub criterion: CriterionSet,
    pub per_layout: bool,
    /// Document workers; 0 picks the core count.
    pub workers: usize,
    /// Also write an SVG per parsed document.
    pub render: bool,
}

impl Default for Settings {
    fn default() -> Self {
        let live = LiveConfig::default();
        Settings {
            detections_dir: None,
            fixtures_dir: None,
            weights_file: None,
            lexicon_file: None,
            prompts_dir: None,
            output_dir: PathBuf::from("out"),
            backend: Backend::Mock,
            endpoint: live.endpoint,
            model: live.model,
            api_key_env: live.api_key_env,
            max_retries: live.max_retries,
            timeout_secs: live.timeout_secs,
            max_in_flight: live.max_in_flight,
            min_interval_ms: live.min_interval_ms,
            planner: PlannerPolicy::Rule,
            planner_fallback: true,
            query: "extract all reactions".into(),
            iou: DEFAULT_IOU,
            criterion: CriterionSet::Both,
            per_layout: false,
            workers: 0,
            render: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PipelineConfig {
    pub settings: Settings,
    pub reasoning: ReasoningConfig,
}

fn config_err(msg: impl Into<String>) -> PipelineError {
    PipelineError::Config(msg.into())
}

fn defaults_json() -> serde_json::Map<String, Value> {
    let mut m = match serde_json::to_value(Settings::default()).expect("settings serialize") {
        Value::Object(m) => m,
        _ => unreachable!(),
    };
    if let Value::Object(r) =
        serde_json::to_value(ReasoningConfig::default()).expect("reasoning serializes")
    {
        m.extend(r);
    }
    m
}

fn reasoning_keys() -> Vec<String> {
    match serde_json::to_value(ReasoningConfig::default()).expect("reasoning serializes") {
        Value::Object(m) => m.keys().cloned().collect(),
        _ => unreachable!(),
    }
}

/// Every key accepted in a config file, sorted.
pub fn config_keys() -> Vec<String> {
    defaults_json().keys().cloned().collect()
}

/// Converts a flag value to the type of the key's default.
fn coerce(key: &str, raw: &str) -> Result<toml::Value, PipelineError> {
    let defaults = defaults_json();
    let default = defaults
        .get(key)
        .ok_or_else(|| config_err(format!("unknown config key '{key}'")))?;
    let bad = |what: &str| config_err(format!("{key}: expected {what}, got '{raw}'"));
    Ok(match default {
        Value::Bool(_) => toml::Value::Boolean(raw.parse().map_err(|_| bad("true or false"))?),
        Value::Number(n) if n.is_f64() => {
            toml::Value::Float(raw.parse().map_err(|_| bad("a number"))?)
        }
        Value::Number(_) => toml::Value::Integer(raw.parse().map_err(|_| bad("an integer"))?),
        _ => toml::Value::String(raw.to_string()),
    })
}

impl PipelineConfig {
    /// Parses TOML text, applies `overrides` (flags win) and validates.
    pub fn from_toml(text: &str, overrides: &[(String, String)]) -> Result<Self, PipelineError> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        for (k, v) in overrides {
            table.insert(k.clone(), coerce(k, v)?);
        }
        let rkeys = reasoning_keys();
        let (mut reasoning, mut settings) = (toml::Table::new(), toml::Table::new());
        for (k, v) in table {
            if rkeys.contains(&k) {
                reasoning.insert(k, v);
            } else {
                settings.insert(k, v);
            }
        }
        let settings: Settings = settings
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        let reasoning: ReasoningConfig = reasoning
            .try_into()
            .map_err(|e: toml::de::Error| config_err(e.to_string()))?;
        let cfg = PipelineConfig {
            settings,
            reasoning,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` if given, else starts from defaults.
    pub fn load(
        path: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, PipelineError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        PipelineConfig::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        self.reasoning
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        let s = &self.settings;
        if !(0.0..=1.0).contains(&s.iou) {
            return Err(config_err(format!("iou = {} outside [0, 1]", s.iou)));
        }
        if s.query.trim().is_empty() {
            return Err(config_err("query must not be empty"));
        }
        let files = [
            ("weights_file", &s.weights_file),
            ("lexicon_file", &s.lexicon_file),
        ];
        for (name, p) in files {
            if let Some(p) = p {
                if !p.is_file() {
                    return Err(config_err(format!("{name}: {} is not a file", p.display())));
                }
            }
        }
        let dirs = [
            ("detections_dir", &s.detections_dir),
            ("fixtures_dir", &s.fixtures_dir),
            ("prompts_dir", &s.prompts_dir),
        ];
        for (name, p) in dirs {
            if let Some(p) = p {
                if !p.is_dir() {
                    return Err(config_err(format!(
                        "{name}: {} is not a directory",
                        p.display()
                    )));
                }
            }
        }
        if s.backend == Backend::Live && (s.endpoint.is_empty() || s.model.is_empty()) {
            return Err(config_err("live backend needs endpoint and model"));
        }
        Ok(())
    }

    pub fn live_config(&self) -> LiveConfig {
        let s = &self.settings;
        LiveConfig {
            endpoint: s.endpoint.clone(),
            model: s.model.clone(),
            api_key_env: s.api_key_env.clone(),
            max_retries: s.max_retries,
            timeout_secs: s.timeout_secs,
            max_in_flight: s.max_in_flight,
            min_interval_ms: s.min_interval_ms,
        }
    }

    /// All keys as one sorted JSON object.
    pub fn canonical_json(&self) -> String {
        let mut m = match serde_json::to_value(&self.settings).expect("settings serialize") {
            Value::Object(m) => m,
            _ => unreachable!(),
        };
        if let Value::Object(r) =
            serde_json::to_value(&self.reasoning).expect("reasoning serializes")
        {
            m.extend(r);
        }
        let sorted: std::collections::BTreeMap<String, Value> = m.into_iter().collect();
        serde_json::to_string(&sorted).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_load_and_validate() {
        let c = PipelineConfig::from_toml("", &[]).unwrap();
        assert_eq!(c, PipelineConfig::default());
        assert_eq!(c.reasoning.tau_fuse, 0.45);
    }

    #[test]
    fn key_order_does_not_change_hash() {
        let a = PipelineConfig::from_toml("tau_fuse = 0.5\nquery = \"parse\"\nk_nn = 3\n", &[])
            .unwrap();
        let b = PipelineConfig::from_toml("k_nn = 3\nquery = \"parse\"\ntau_fuse = 0.5\n", &[])
            .unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), PipelineConfig::default().hash());
    }

    #[test]
    fn flags_win_over_file() {
        let over = vec![
            ("tau_fuse".to_string(), "0.6".to_string()),
            ("k_nn".to_string(), "7".to_string()),
            ("render".to_string(), "true".to_string()),
            ("model".to_string(), "123".to_string()),
        ];
        let c = PipelineConfig::from_toml("tau_fuse = 0.5\n", &over).unwrap();
        assert_eq!(c.reasoning.tau_fuse, 0.6);
        assert_eq!(c.reasoning.k_nn, 7);
        assert!(c.settings.render);
        assert_eq!(c.settings.model, "123");
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "tau_fuse = 1.5",
            "alpha_init = 0.9",
            "nope = 1",
            "backend = \"remote\"",
            "backend = \"live\"",
            "iou = -0.1",
            "weights_file = \"/definitely/not/here.json\"",
            "fixtures_dir = \"/definitely/not/here\"",
        ] {
            assert!(
                matches!(
                    PipelineConfig::from_toml(bad, &[]),
                    Err(PipelineError::Config(_))
                ),
                "{bad}"
            );
        }
        let over = vec![("k_nn".to_string(), "many".to_string())];
        assert!(PipelineConfig::from_toml("", &over).is_err());
        let over = vec![("unknown".to_string(), "1".to_string())];
        assert!(PipelineConfig::from_toml("", &over).is_err());
    }

    #[test]
    fn keys_cover_both_parts() {
        let keys = config_keys();
        for k in [
            "tau_fuse",
            "k_nn",
            "output_dir",
            "backend",
            "iou",
            "workers",
        ] {
            assert!(keys.iter().any(|x| x == k), "{k}");
        }
    }
}
