//! Agent client: prompt templates plus fixture-replay, recording and HTTP backends.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentRole {
    Planner,
    MoleculeRecognition,
    ReactionCombiner,
}

impl AgentRole {
    pub const ALL: [AgentRole; 3] = [
        AgentRole::Planner,
        AgentRole::MoleculeRecognition,
        AgentRole::ReactionCombiner,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentRole::Planner => "planner",
            AgentRole::MoleculeRecognition => "molecule_recognition",
            AgentRole::ReactionCombiner => "reaction_combiner",
        }
    }

    pub fn parse(s: &str) -> Option<AgentRole> {
        AgentRole::ALL.into_iter().find(|r| r.as_str() == s)
    }
}

impl std::fmt::Display for AgentRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AgentError {
    #[error("no prompt template registered for role {0}")]
    MissingTemplate(AgentRole),
    #[error("template for {role}: {message}")]
    BadTemplate { role: AgentRole, message: String },
    #[error("template for {role} references unbound variable '{variable}'")]
    UnboundVariable { role: AgentRole, variable: String },
    #[error("fixture missing for {role} (hash {hash}) at {path}")]
    FixtureMissing {
        role: AgentRole,
        hash: String,
        path: String,
    },
    #[error("backend unavailable after {attempts} attempt(s): {last}")]
    BackendUnavailable { attempts: u32, last: String },
    #[error("agent backend config: {0}")]
    Config(String),
    #[error("fixture io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    variables: Vec<String>,
}

impl PromptTemplate {
    pub fn new(role: AgentRole, text: impl Into<String>) -> Result<Self, AgentError> {
        let text = text.into();
        let mut variables = Vec::new();
        let mut rest = text.as_str();
        while let Some(start) = rest.find("{{") {
            let after = &rest[start + 2..];
            let end = after.find("}}").ok_or_else(|| AgentError::BadTemplate {
                role,
                message: "unterminated '{{'".into(),
            })?;
            let name = after[..end].trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(AgentError::BadTemplate {
                    role,
                    message: format!("invalid variable name '{name}'"),
                });
            }
            if !variables.iter().any(|v| v == name) {
                variables.push(name.to_string());
            }
            rest = &after[end + 2..];
        }
        Ok(PromptTemplate { text, variables })
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn render(
        &self,
        role: AgentRole,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, AgentError> {
        if let Some(v) = self.variables.iter().find(|v| !vars.contains_key(*v)) {
            return Err(AgentError::UnboundVariable {
                role,
                variable: v.clone(),
            });
        }
        let mut out = String::with_capacity(self.text.len());
        let mut rest = self.text.as_str();
        while let Some(start) = rest.find("{{") {
            out.push_str(&rest[..start]);
            let after = &rest[start + 2..];
            let end = after.find("}}").expect("validated at construction");
            out.push_str(&vars[after[..end].trim()]);
            rest = &after[end + 2..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct PromptSet {
    templates: BTreeMap<AgentRole, PromptTemplate>,
}

impl PromptSet {
    pub fn builtin() -> PromptSet {
        let mut set = PromptSet::default();
        let shipped = [
            (
                AgentRole::Planner,
                include_str!("../../data/prompts/planner.txt"),
            ),
            (
                AgentRole::MoleculeRecognition,
                include_str!("../../data/prompts/molecule_recognition.txt"),
            ),
            (
                AgentRole::ReactionCombiner,
                include_str!("../../data/prompts/reaction_combiner.txt"),
            ),
        ];
        for (role, text) in shipped {
            set.insert(
                role,
                PromptTemplate::new(role, text).expect("shipped template"),
            );
        }
        set
    }

    /// Overrides templates with `<dir>/<role>.txt` files that exist.
    pub fn with_overrides(mut self, dir: &Path) -> Result<PromptSet, AgentError> {
        for role in AgentRole::ALL {
            let p = dir.join(format!("{}.txt", role.as_str()));
            if p.exists() {
                let text =
                    std::fs::read_to_string(&p).map_err(|e| AgentError::Io(e.to_string()))?;
                self.insert(role, PromptTemplate::new(role, text)?);
            }
        }
        Ok(self)
    }

    pub fn insert(&mut self, role: AgentRole, t: PromptTemplate) {
        self.templates.insert(role, t);
    }

    pub fn get(&self, role: AgentRole) -> Option<&PromptTemplate> {
        self.templates.get(&role)
    }

    pub fn render(
        &self,
        role: AgentRole,
        vars: &BTreeMap<String, String>,
    ) -> Result<String, AgentError> {
        self.get(role)
            .ok_or(AgentError::MissingTemplate(role))?
            .render(role, vars)
    }
}

#[derive(Debug, Clone, Default)]
pub struct AgentRequest {
    pub vars: BTreeMap<String, String>,
    pub image: Option<Vec<u8>>,
}

impl AgentRequest {
    pub fn var(mut self, k: impl Into<String>, v: impl Into<String>) -> Self {
        self.vars.insert(k.into(), v.into());
        self
    }
}

/// SHA-256 over the rendered prompt, then a zero byte and the image bytes when present.
pub fn content_hash(prompt: &str, image: Option<&[u8]>) -> String {
    let mut h = Sha256::new();
    h.update(prompt.as_bytes());
    if let Some(img) = image {
        h.update([0u8]);
        h.update(img);
    }
    hex::encode(h.finalize())
}

pub trait AgentBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(
        &self,
        role: AgentRole,
        prompt: &str,
        image: Option<&[u8]>,
        hash: &str,
    ) -> Result<String, AgentError>;
}

/// Replays `<dir>/<role>/<hash>.txt`.
#[derive(Debug, Clone)]
pub struct MockBackend {
    dir: PathBuf,
}

impl MockBackend {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        MockBackend { dir: dir.into() }
    }
}

pub fn fixture_path(dir: &Path, role: AgentRole, hash: &str) -> PathBuf {
    dir.join(role.as_str()).join(format!("{hash}.txt"))
}

impl AgentBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(
        &self,
        role: AgentRole,
        _: &str,
        _: Option<&[u8]>,
        hash: &str,
    ) -> Result<String, AgentError> {
        let path = fixture_path(&self.dir, role, hash);
        std::fs::read_to_string(&path).map_err(|_| AgentError::FixtureMissing {
            role,
            hash: hash.to_string(),
            path: path.display().to_string(),
        })
    }
}

type Responder = dyn Fn(AgentRole, &str) -> String + Send + Sync;

/// Answers with a closure and writes each answer as a mock fixture.
pub struct RecorderBackend {
    dir: PathBuf,
    responder: Box<Responder>,
}

impl RecorderBackend {
    pub fn new(
        dir: impl Into<PathBuf>,
        responder: impl Fn(AgentRole, &str) -> String + Send + Sync + 'static,
    ) -> Self {
        RecorderBackend {
            dir: dir.into(),
            responder: Box::new(responder),
        }
    }
}

impl AgentBackend for RecorderBackend {
    fn name(&self) -> &str {
        "recorder"
    }

    fn complete(
        &self,
        role: AgentRole,
        prompt: &str,
        _: Option<&[u8]>,
        hash: &str,
    ) -> Result<String, AgentError> {
        let answer = (self.responder)(role, prompt);
        let path = fixture_path(&self.dir, role, hash);
        std::fs::create_dir_all(path.parent().expect("fixture path has parent"))
            .and_then(|_| std::fs::write(&path, &answer))
            .map_err(|e| AgentError::Io(e.to_string()))?;
        Ok(answer)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LiveConfig {
    pub endpoint: String,
    pub model: String,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub min_interval_ms: u64,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            endpoint: String::new(),
            model: String::new(),
            api_key_env: "RXNGRAPH_API_KEY".into(),
            max_retries: 3,
            timeout_secs: 60,
            max_in_flight: 4,
            min_interval_ms: 0,
        }
    }
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

impl Gate {
    fn acquire(&self) {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.max {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
    }

    fn release(&self) {
        *self.in_flight.lock().expect("gate poisoned") -= 1;
        self.freed.notify_one();
    }
}

/// JSON-over-HTTP chat completion backend.
pub struct LiveBackend {
    config: LiveConfig,
    api_key: String,
    agent: ureq::Agent,
    gate: Gate,
    last_sent: Mutex<Option<Instant>>,
}

impl LiveBackend {
    pub fn new(config: LiveConfig) -> Result<Self, AgentError> {
        if config.endpoint.is_empty() || config.model.is_empty() {
            return Err(AgentError::Config(
                "live backend needs endpoint and model".into(),
            ));
        }
        if config.max_in_flight == 0 {
            return Err(AgentError::Config("max_in_flight must be >= 1".into()));
        }
        let api_key = std::env::var(&config.api_key_env).map_err(|_| {
            AgentError::Config(format!(
                "environment variable {} not set",
                config.api_key_env
            ))
        })?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(LiveBackend {
            gate: Gate {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                max: config.max_in_flight,
            },
            config,
            api_key,
            agent,
            last_sent: Mutex::new(None),
        })
    }

    fn throttle(&self) {
        let min = Duration::from_millis(self.config.min_interval_ms);
        if min.is_zero() {
            return;
        }
        let mut last = self.last_sent.lock().expect("rate limiter poisoned");
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < min {
                std::thread::sleep(min - since);
            }
        }
        *last = Some(Instant::now());
    }

    fn send_once(&self, body: &str) -> Result<(u16, String), String> {
        self.throttle();
        let mut resp = self
            .agent
            .post(&self.config.endpoint)
            .header("content-type", "application/json")
            .header("authorization", &format!("Bearer {}", self.api_key))
            .send(body)
            .map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| e.to_string())?;
        Ok((status, text))
    }
}

pub fn request_body(model: &str, prompt: &str, image: Option<&[u8]>) -> serde_json::Value {
    let mut body = serde_json::json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
    });
    if let Some(img) = image {
        body["image"] =
            serde_json::Value::String(base64::engine::general_purpose::STANDARD.encode(img));
    }
    body
}

/// Pulls the completion text out of common response shapes; falls back to the raw body.
pub fn extract_content(body: &str) -> String {
    let Ok(v) = serde_json::from_str::<serde_json::Value>(body) else {
        return body.to_string();
    };
    let picks = [
        v.pointer("/choices/0/message/content"),
        v.pointer("/message/content"),
        v.get("content"),
        v.get("response"),
    ];
    let found = picks
        .into_iter()
        .flatten()
        .find_map(|x| x.as_str().map(str::to_string));
    found.unwrap_or_else(|| body.to_string())
}

impl AgentBackend for LiveBackend {
    fn name(&self) -> &str {
        "live"
    }

    fn complete(
        &self,
        _: AgentRole,
        prompt: &str,
        image: Option<&[u8]>,
        _: &str,
    ) -> Result<String, AgentError> {
        let body = request_body(&self.config.model, prompt, image).to_string();
        self.gate.acquire();
        let mut last = String::new();
        let mut attempts = 0;
        let result = loop {
            attempts += 1;
            match self.send_once(&body) {
                Ok((200..=299, text)) => break Ok(extract_content(&text)),
                Ok((status, text)) => {
                    last = format!(
                        "HTTP {status}: {}",
                        text.chars().take(200).collect::<String>()
                    );
                    if status != 429 && status < 500 {
                        break Err(());
                    }
                }
                Err(e) => last = e,
            }
            if attempts > self.config.max_retries {
                break Err(());
            }
            std::thread::sleep(Duration::from_millis(250 << (attempts - 1).min(5)));
        };
        self.gate.release();
        result.map_err(|_| AgentError::BackendUnavailable { attempts, last })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exchange {
    pub unix_ms: u128,
    pub role: AgentRole,
    pub backend: String,
    pub prompt_hash: String,
    pub latency_ms: f64,
    pub ok: bool,
}

#[derive(Clone)]
pub struct AgentClient {
    prompts: Arc<PromptSet>,
    backend: Arc<dyn AgentBackend>,
    log: Arc<Mutex<Vec<Exchange>>>,
}

impl AgentClient {
    pub fn new(prompts: PromptSet, backend: Arc<dyn AgentBackend>) -> Self {
        AgentClient {
            prompts: Arc::new(prompts),
            backend,
            log: Arc::new(Mutex::new(Vec::new())),
        }
    }

    pub fn mock(dir: impl Into<PathBuf>) -> Self {
        AgentClient::new(PromptSet::builtin(), Arc::new(MockBackend::new(dir)))
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn prompts(&self) -> &PromptSet {
        &self.prompts
    }

    /// Renders the role's template and sends it. Rendering errors happen before any backend call.
    pub fn request(&self, role: AgentRole, req: &AgentRequest) -> Result<String, AgentError> {
        let prompt = self.prompts.render(role, &req.vars)?;
        let hash = content_hash(&prompt, req.image.as_deref());
        let started = Instant::now();
        let out = self
            .backend
            .complete(role, &prompt, req.image.as_deref(), &hash);
        let entry = Exchange {
            unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            role,
            backend: self.backend.name().to_string(),
            prompt_hash: hash,
            latency_ms: started.elapsed().as_secs_f64() * 1e3,
            ok: out.is_ok(),
        };
        log::debug!(
            "agent {} {} {} {:.1}ms ok={}",
            entry.backend,
            entry.role,
            entry.prompt_hash,
            entry.latency_ms,
            entry.ok
        );
        self.log.lock().expect("exchange log poisoned").push(entry);
        out
    }

    pub fn exchanges(&self) -> Vec<Exchange> {
        self.log.lock().expect("exchange log poisoned").clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting(AtomicUsize);

    impl AgentBackend for Counting {
        fn name(&self) -> &str {
            "counting"
        }
        fn complete(
            &self,
            _: AgentRole,
            p: &str,
            _: Option<&[u8]>,
            _: &str,
        ) -> Result<String, AgentError> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(p.len().to_string())
        }
    }

    #[test]
    fn templates_render_and_reject_unbound() {
        let t =
            PromptTemplate::new(AgentRole::Planner, "Q: {{query}} / {{ query }} {{n}}").unwrap();
        assert_eq!(t.variables(), ["query", "n"]);
        let vars = BTreeMap::from([
            ("query".to_string(), "x".to_string()),
            ("n".into(), "1".into()),
        ]);
        assert_eq!(t.render(AgentRole::Planner, &vars).unwrap(), "Q: x / x 1");
        assert!(PromptTemplate::new(AgentRole::Planner, "{{open").is_err());
        assert!(PromptTemplate::new(AgentRole::Planner, "{{a b}}").is_err());
    }

    #[test]
    fn unbound_variable_never_reaches_backend() {
        let backend = Arc::new(Counting(AtomicUsize::new(0)));
        let client = AgentClient::new(PromptSet::builtin(), backend.clone());
        let err = client
            .request(AgentRole::Planner, &AgentRequest::default())
            .unwrap_err();
        assert_eq!(
            err,
            AgentError::UnboundVariable {
                role: AgentRole::Planner,
                variable: "query".into()
            }
        );
        assert_eq!(backend.0.load(Ordering::SeqCst), 0);
        client
            .request(
                AgentRole::Planner,
                &AgentRequest::default().var("query", "q"),
            )
            .unwrap();
        assert_eq!(backend.0.load(Ordering::SeqCst), 1);
        assert_eq!(client.exchanges().len(), 1);
    }

    #[test]
    fn shipped_templates_carry_the_prompt_text() {
        let p = PromptSet::builtin();
        assert!(p
            .get(AgentRole::Planner)
            .unwrap()
            .text()
            .contains("\"plan\""));
        assert_eq!(p.get(AgentRole::Planner).unwrap().variables(), ["query"]);
        assert_eq!(
            p.get(AgentRole::ReactionCombiner).unwrap().variables(),
            ["graph"]
        );
        assert!(p
            .get(AgentRole::ReactionCombiner)
            .unwrap()
            .text()
            .contains("REL_ARROW_TO_PRODUCT = 6"));
    }

    #[test]
    fn recorder_then_mock_replays_identical_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let rec = AgentClient::new(
            PromptSet::builtin(),
            Arc::new(RecorderBackend::new(dir.path(), |_, _| {
                r#"{"plan": {"molecule_expert": true, "arrow_expert": false, "text_expert": true, "reaction_expert": true}}"#.to_string()
            })),
        );
        let req = AgentRequest::default().var("query", "extract all reactions");
        let first = rec.request(AgentRole::Planner, &req).unwrap();
        let mock = AgentClient::mock(dir.path());
        let a = mock.request(AgentRole::Planner, &req).unwrap();
        let b = mock.request(AgentRole::Planner, &req).unwrap();
        assert_eq!(first, a);
        assert_eq!(a, b);
        let other = AgentRequest::default().var("query", "something else");
        assert!(matches!(
            mock.request(AgentRole::Planner, &other),
            Err(AgentError::FixtureMissing { .. })
        ));
    }

    #[test]
    fn hash_depends_on_image() {
        assert_ne!(content_hash("p", None), content_hash("p", Some(b"img")));
        assert_eq!(
            content_hash("p", Some(b"img")),
            content_hash("p", Some(b"img"))
        );
    }

    #[test]
    fn live_wire_format() {
        let body = request_body("m", "hello", Some(b"\x89PNG"));
        assert_eq!(body["model"], "m");
        assert_eq!(body["messages"][0]["content"], "hello");
        assert_eq!(body["image"], "iVBORw==");
        assert_eq!(
            extract_content(r#"{"choices":[{"message":{"role":"assistant","content":"[]"}}]}"#),
            "[]"
        );
        assert_eq!(extract_content("not json"), "not json");
    }

    #[test]
    fn live_requires_key_from_environment() {
        let cfg = LiveConfig {
            endpoint: "http://127.0.0.1:9/v1".into(),
            model: "m".into(),
            api_key_env: "RXNGRAPH_TEST_UNSET_KEY_VAR".into(),
            ..Default::default()
        };
        assert!(matches!(LiveBackend::new(cfg), Err(AgentError::Config(_))));
    }
}
