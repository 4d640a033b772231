use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::normalize;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::selector::backend::{call_with_timeout, BackendError, ModelBackend, ModelRequest};

/// Instruction sent with each image to the describing model.
pub const DESCRIBE_PROMPT: &str = "Describe this camera frame from a small surface vessel in exactly one sentence. \
Mention only objects and conditions that matter for navigation, such as hazards, vessels, structures, markers and water. \
Do not describe the own vessel or anyone on board.";

/// Image → one navigation-centric sentence.
pub trait SceneDescriber: Send + Sync {
    fn describe(&self, image: &[u8]) -> Result<String>;
}

/// Sentence → embedding vector.
pub trait TextEmbedder: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>>;
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the two-stage pipeline and returns a unit vector.
pub fn embed_scene<T: Real>(describer: &dyn SceneDescriber, embedder: &dyn TextEmbedder, image: &[u8]) -> Result<Vec<T>> {
    let sentence = describer.describe(image)?;
    let raw = embedder.embed(&sentence)?;
    let cast: Vec<T> = raw.iter().map(|&x| T::from_f64(x).unwrap_or_else(T::nan)).collect();
    normalize(&cast)
}

/// Describer that names the image by its content hash; deterministic.
#[derive(Debug, Default, Clone, Copy)]
pub struct MockDescriber;

impl SceneDescriber for MockDescriber {
    fn describe(&self, image: &[u8]) -> Result<String> {
        let h = sha256_hex(image);
        Ok(format!("open water scene {} {} {}", &h[..4], &h[4..8], &h[8..12]))
    }
}

/// Feature-hashing embedder over lowercase word tokens; deterministic and
/// offline. Texts sharing words get positive cosine similarity.
#[derive(Debug, Clone, Copy)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        Self { dim: 256 }
    }
}

impl TextEmbedder for HashingEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        if self.dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        let mut v = vec![0.0; self.dim];
        for token in text.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let digest = Sha256::digest(token.to_lowercase().as_bytes());
            let idx = u64::from_le_bytes(digest[..8].try_into().expect("8 bytes")) % self.dim as u64;
            let sign = if digest[8] & 1 == 0 { 1.0 } else { -1.0 };
            v[idx as usize] += sign;
        }
        Ok(v)
    }
}

/// Recorded describer/embedder outputs for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayEntry {
    pub image_sha256: String,
    pub sentence: String,
    pub vector: Vec<f64>,
}

/// Replays recorded sentences (keyed by image hash) and vectors (keyed by
/// sentence). Unknown keys are errors.
#[derive(Debug, Clone, Default)]
pub struct ReplayEmbedding {
    sentences: BTreeMap<String, String>,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl ReplayEmbedding {
    pub fn new(entries: impl IntoIterator<Item = ReplayEntry>) -> Self {
        let mut out = Self::default();
        for e in entries {
            out.sentences.insert(e.image_sha256, e.sentence.clone());
            out.vectors.insert(e.sentence, e.vector);
        }
        out
    }

    pub fn entry_for(image: &[u8], sentence: impl Into<String>, vector: Vec<f64>) -> ReplayEntry {
        ReplayEntry { image_sha256: sha256_hex(image), sentence: sentence.into(), vector }
    }

    /// Loads a JSON-lines file of [`ReplayEntry`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("read {}", path.display()), e))?;
        let entries = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("{} line {}", path.display(), i + 1), e)))
            .collect::<Result<Vec<ReplayEntry>>>()?;
        Ok(Self::new(entries))
    }
}

impl SceneDescriber for ReplayEmbedding {
    fn describe(&self, image: &[u8]) -> Result<String> {
        let key = sha256_hex(image);
        self.sentences
            .get(&key)
            .cloned()
            .ok_or_else(|| BackendError::Exhausted(format!("no recorded description for image {key}")).into())
    }
}

impl TextEmbedder for ReplayEmbedding {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| BackendError::Exhausted(format!("no recorded embedding for {text:?}")).into())
    }
}

/// Describer backed by a vision-language [`ModelBackend`].
pub struct VlmDescriber {
    pub backend: Arc<dyn ModelBackend>,
    pub timeout: Duration,
}

impl SceneDescriber for VlmDescriber {
    fn describe(&self, image: &[u8]) -> Result<String> {
        let request = ModelRequest {
            key: sha256_hex(image),
            image_png: Some(Arc::new(image.to_vec())),
            system: None,
            prompt: DESCRIBE_PROMPT.to_string(),
            seed: 0,
            timeout: self.timeout,
            k: None,
        };
        let reply = call_with_timeout(&self.backend, &request)?;
        let sentence = reply.text.trim().to_string();
        if sentence.is_empty() {
            return Err(BackendError::Api("empty scene description".into()).into());
        }
        Ok(sentence)
    }
}

/// OpenAI-compatible `/embeddings` client.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HttpEmbedder {
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> f64 {
    30.0
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    data: Vec<EmbeddingDatum>,
}

#[derive(Deserialize)]
struct EmbeddingDatum {
    embedding: Vec<f64>,
}

impl TextEmbedder for HttpEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.timeout_s.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut req = agent.post(&url);
        if let Ok(key) = std::env::var(&self.api_key_env) {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::json!({ "model": self.model, "input": text });
        let mut resp = req.send_json(&body).map_err(|e| BackendError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| BackendError::Transport(e.to_string()))?;
        if status == 429 {
            return Err(BackendError::Exhausted(format!("embeddings quota: {text}")).into());
        }
        if !(200..300).contains(&status) {
            return Err(BackendError::Api(format!("embeddings HTTP {status}: {text}")).into());
        }
        let parsed: EmbeddingResponse = serde_json::from_str(&text).map_err(|e| Error::json("embeddings response", e))?;
        parsed
            .data
            .into_iter()
            .next()
            .map(|d| d.embedding)
            .ok_or_else(|| BackendError::Api("embeddings response without data".into()).into())
    }
}
