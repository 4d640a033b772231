//! Model backends: anything that turns an (image, prompt, seed) request into
//! raw text.
//!
//! Three families ship here: [`HttpChatBackend`] for hosted OpenAI-compatible
//! chat endpoints, [`ScriptedBackend`] for deterministic tests, and
//! [`ReplayBackend`] which serves recorded responses by request key.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{mpsc, Arc};
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("call timed out after {0:?}")]
    Timeout(Duration),
    #[error("api error: {0}")]
    Api(String),
    #[error("transport error: {0}")]
    Transport(String),
    /// No response can be produced for this request (quota or replay miss).
    #[error("backend exhausted: {0}")]
    Exhausted(String),
}

#[derive(Debug, Clone)]
pub struct ModelRequest {
    /// Stable identity of the request used by replay backends, e.g. `scene#seed`.
    pub key: String,
    pub image_png: Option<Arc<Vec<u8>>>,
    pub system: Option<String>,
    pub prompt: String,
    pub seed: u64,
    pub timeout: Duration,
    /// Number of overlay candidates, for backends that need it.
    pub k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReply {
    pub text: String,
    /// Reported latency; when absent the caller measures wall-clock time.
    #[serde(default)]
    pub latency_s: Option<f64>,
}

impl ModelReply {
    pub fn text(text: impl Into<String>) -> Self {
        Self { text: text.into(), latency_s: None }
    }
}

pub trait ModelBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, request: &ModelRequest) -> Result<ModelReply, BackendError>;
}

/// Runs `backend.complete` on a worker thread and waits at most
/// `request.timeout`. Returns the reply with latency filled in.
pub fn call_with_timeout(
    backend: &Arc<dyn ModelBackend>,
    request: &ModelRequest,
) -> Result<ModelReply, BackendError> {
    let (tx, rx) = mpsc::channel();
    let worker_backend = Arc::clone(backend);
    let worker_request = request.clone();
    let started = Instant::now();
    std::thread::Builder::new()
        .name("model-call".into())
        .spawn(move || {
            let _ = tx.send(worker_backend.complete(&worker_request));
        })
        .map_err(|e| BackendError::Transport(format!("spawn failed: {e}")))?;
    match rx.recv_timeout(request.timeout) {
        Ok(Ok(mut reply)) => {
            if reply.latency_s.is_none() {
                reply.latency_s = Some(started.elapsed().as_secs_f64());
            }
            Ok(reply)
        }
        Ok(Err(e)) => Err(e),
        Err(mpsc::RecvTimeoutError::Timeout) => Err(BackendError::Timeout(request.timeout)),
        Err(mpsc::RecvTimeoutError::Disconnected) => Err(BackendError::Transport("backend worker panicked".into())),
    }
}

type Script = dyn Fn(&ModelRequest) -> Result<ModelReply, BackendError> + Send + Sync;

/// Deterministic backend driven by a closure; optional artificial delay.
pub struct ScriptedBackend {
    name: String,
    script: Box<Script>,
    delay: Option<Duration>,
}

impl ScriptedBackend {
    pub fn new(
        name: impl Into<String>,
        script: impl Fn(&ModelRequest) -> Result<ModelReply, BackendError> + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), script: Box::new(script), delay: None }
    }

    /// Always answers with `text`.
    pub fn fixed(text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new("fixed", move |_| Ok(ModelReply { text: text.clone(), latency_s: Some(0.0) }))
    }

    /// Valid schema object choosing `choice` for every request.
    pub fn choosing(choice: usize) -> Self {
        Self::fixed(decision_json(choice, "scripted"))
    }

    /// Answers per seed from a table; unknown seeds are an API error.
    pub fn by_seed(table: BTreeMap<u64, String>) -> Self {
        Self::new("by-seed", move |req| {
            table
                .get(&req.seed)
                .map(|t| ModelReply { text: t.clone(), latency_s: Some(0.0) })
                .ok_or_else(|| BackendError::Api(format!("no scripted answer for seed {}", req.seed)))
        })
    }

    /// Deterministic pseudo-model: hashes the request key and seed into a valid
    /// choice in `0..=k`.
    pub fn hashing() -> Self {
        Self::new("hash-mock", |req| {
            let k = req.k.unwrap_or(0) as u64;
            let digest = Sha256::digest(format!("{}#{}", req.key, req.seed).as_bytes());
            let h = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"));
            Ok(ModelReply { text: decision_json((h % (k + 1)) as usize, "mock"), latency_s: Some(0.0) })
        })
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

impl ModelBackend for ScriptedBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelReply, BackendError> {
        if let Some(d) = self.delay {
            std::thread::sleep(d);
        }
        (self.script)(request)
    }
}

/// Well-formed selector output choosing `choice`.
pub fn decision_json(choice: usize, note: &str) -> String {
    serde_json::json!({
        "see": format!("{note} view"),
        "implications": "no specific hazard",
        "action": "proceed with caution",
        "choice_id": choice,
        "confidence": 0.5,
    })
    .to_string()
}

/// One recorded response; replay files are JSON-lines of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRecord {
    pub key: String,
    pub text: String,
    #[serde(default)]
    pub latency_s: Option<f64>,
    /// Recorded failure instead of text: `timeout` or `api_error`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Serves recorded responses keyed by request key. Missing keys are
/// [`BackendError::Exhausted`].
pub struct ReplayBackend {
    name: String,
    records: BTreeMap<String, ReplayRecord>,
}

impl ReplayBackend {
    pub fn new(name: impl Into<String>, records: impl IntoIterator<Item = ReplayRecord>) -> Self {
        Self { name: name.into(), records: records.into_iter().map(|r| (r.key.clone(), r)).collect() }
    }

    pub fn load(name: impl Into<String>, path: &Path) -> crate::Result<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| crate::Error::io(format!("open replay file {}", path.display()), e))?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| crate::Error::io(format!("read {}", path.display()), e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: ReplayRecord = serde_json::from_str(&line)
                .map_err(|e| crate::Error::json(format!("{} line {}", path.display(), i + 1), e))?;
            records.push(rec);
        }
        Ok(Self::new(name, records))
    }

    pub fn save(records: &[ReplayRecord], path: &Path) -> crate::Result<()> {
        let mut f = std::fs::File::create(path)
            .map_err(|e| crate::Error::io(format!("create {}", path.display()), e))?;
        for r in records {
            let line = serde_json::to_string(r).map_err(|e| crate::Error::json("replay record", e))?;
            writeln!(f, "{line}").map_err(|e| crate::Error::io("write replay", e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

impl ModelBackend for ReplayBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelReply, BackendError> {
        let rec = self
            .records
            .get(&request.key)
            .ok_or_else(|| BackendError::Exhausted(format!("no recorded response for {}", request.key)))?;
        match rec.error.as_deref() {
            Some("timeout") => Err(BackendError::Timeout(request.timeout)),
            Some(other) => Err(BackendError::Api(other.to_string())),
            None => Ok(ModelReply { text: rec.text.clone(), latency_s: rec.latency_s.or(Some(0.0)) }),
        }
    }
}

/// OpenAI-compatible `chat/completions` adapter.
///
/// The overlay goes in as a base64 PNG data URL next to the prompt text; the
/// request seed is forwarded in the `seed` field. The API key is read from the
/// environment variable named by `api_key_env` at call time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpChatBackend {
    pub name: String,
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}

impl HttpChatBackend {
    pub fn request_body(&self, request: &ModelRequest) -> serde_json::Value {
        let mut content = vec![serde_json::json!({"type": "text", "text": request.prompt})];
        if let Some(png) = &request.image_png {
            let b64 = base64::engine::general_purpose::STANDARD.encode(png.as_slice());
            content.push(serde_json::json!({
                "type": "image_url",
                "image_url": {"url": format!("data:image/png;base64,{b64}")}
            }));
        }
        let mut messages = Vec::new();
        if let Some(system) = &request.system {
            messages.push(serde_json::json!({"role": "system", "content": system}));
        }
        messages.push(serde_json::json!({"role": "user", "content": content}));
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": messages,
            "seed": request.seed,
        });
        if let Some(t) = self.temperature {
            body["temperature"] = t.into();
        }
        for (k, v) in &self.extra {
            body[k] = v.clone();
        }
        body
    }
}

impl ModelBackend for HttpChatBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelReply, BackendError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| BackendError::Api(format!("environment variable {} not set", self.api_key_env)))?;
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(request.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let started = Instant::now();
        let response = agent
            .post(&url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(self.request_body(request))
            .map_err(|e| match e {
                ureq::Error::Timeout(_) => BackendError::Timeout(request.timeout),
                other => BackendError::Transport(other.to_string()),
            })?;
        let status = response.status();
        let value: serde_json::Value = response
            .into_body()
            .read_json()
            .map_err(|e| BackendError::Transport(format!("response body: {e}")))?;
        if status.as_u16() == 429 {
            return Err(BackendError::Exhausted(format!("rate limited: {value}")));
        }
        if !status.is_success() {
            return Err(BackendError::Api(format!("HTTP {status}: {value}")));
        }
        let text = value["choices"][0]["message"]["content"]
            .as_str()
            .ok_or_else(|| BackendError::Api("response has no message content".into()))?;
        Ok(ModelReply { text: text.to_string(), latency_s: Some(started.elapsed().as_secs_f64()) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(seed: u64) -> ModelRequest {
        ModelRequest {
            key: format!("scene#{seed}"),
            image_png: Some(Arc::new(vec![1, 2, 3])),
            system: None,
            prompt: "pick".into(),
            seed,
            timeout: Duration::from_millis(200),
            k: Some(4),
        }
    }

    #[test]
    fn timeout_is_enforced() {
        let slow: Arc<dyn ModelBackend> = Arc::new(ScriptedBackend::choosing(1).with_delay(Duration::from_secs(2)));
        let started = Instant::now();
        assert!(matches!(call_with_timeout(&slow, &req(1)), Err(BackendError::Timeout(_))));
        assert!(started.elapsed() < Duration::from_secs(1));
    }

    #[test]
    fn replay_serves_and_misses() {
        let b: Arc<dyn ModelBackend> = Arc::new(ReplayBackend::new(
            "r",
            [
                ReplayRecord { key: "scene#1".into(), text: "hello".into(), latency_s: Some(4.5), error: None },
                ReplayRecord { key: "scene#2".into(), text: String::new(), latency_s: None, error: Some("timeout".into()) },
            ],
        ));
        let r = call_with_timeout(&b, &req(1)).unwrap();
        assert_eq!(r, ModelReply { text: "hello".into(), latency_s: Some(4.5) });
        assert!(matches!(call_with_timeout(&b, &req(2)), Err(BackendError::Timeout(_))));
        assert!(matches!(call_with_timeout(&b, &req(3)), Err(BackendError::Exhausted(_))));
    }

    #[test]
    fn hashing_mock_is_deterministic_and_in_range() {
        let b = ScriptedBackend::hashing();
        for seed in 0..50 {
            let a = b.complete(&req(seed)).unwrap();
            assert_eq!(a, b.complete(&req(seed)).unwrap());
            let d = super::super::parse_decision(&a.text, 4);
            assert_eq!(d.parse_status, super::super::ParseStatus::Ok);
        }
    }

    #[test]
    fn http_body_shape() {
        let b = HttpChatBackend {
            name: "x".into(),
            base_url: "http://localhost:1".into(),
            model: "m".into(),
            api_key_env: "NOPE".into(),
            temperature: Some(1.0),
            extra: BTreeMap::new(),
        };
        let body = b.request_body(&req(9));
        assert_eq!(body["seed"], 9);
        assert_eq!(body["messages"][0]["content"][0]["text"], "pick");
        assert!(body["messages"][0]["content"][1]["image_url"]["url"].as_str().unwrap().starts_with("data:image/png;base64,"));
    }
}
