//! Embedding pipeline selection for the monitor commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use asv_fallback::monitor::{HashingEmbedder, HttpEmbedder, MockDescriber, ReplayEmbedding, SceneDescriber, TextEmbedder, VlmDescriber};
use asv_fallback::suite::{BackendRole, BackendSpec};
use serde::{Deserialize, Serialize};

/// How scene images become embeddings.
///
/// ```toml
/// kind = "http"
/// timeout_s = 30
/// [describer]
/// kind = "http"
/// base_url = "https://api.example.com/v1"
/// model = "vision-model"
/// [embedder]
/// base_url = "https://api.example.com/v1"
/// model = "embedding-model"
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingSpec {
    /// Offline: hash-derived sentences and hashed token features.
    #[default]
    Mock,
    /// Recorded `{image_sha256, sentence, vector}` JSON lines.
    Replay { path: PathBuf },
    Http {
        describer: BackendSpec,
        embedder: HttpEmbedder,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

fn default_timeout() -> f64 {
    30.0
}

pub struct Pipeline {
    pub describer: Arc<dyn SceneDescriber>,
    pub embedder: Arc<dyn TextEmbedder>,
}

impl EmbeddingSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("read {}", path.display()))?;
        let mut spec: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text)?
        };
        if let EmbeddingSpec::Replay { path: p } = &mut spec {
            if p.is_relative() {
                *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
            }
        }
        Ok(spec)
    }

    pub fn build(&self) -> Result<Pipeline> {
        Ok(match self {
            EmbeddingSpec::Mock => Pipeline { describer: Arc::new(MockDescriber), embedder: Arc::new(HashingEmbedder::default()) },
            EmbeddingSpec::Replay { path } => {
                let r = Arc::new(ReplayEmbedding::load(path)?);
                Pipeline { describer: r.clone(), embedder: r }
            }
            EmbeddingSpec::Http { describer, embedder, timeout_s } => {
                let backend = describer.build("describer", BackendRole::Selector, Path::new("."))?;
                Pipeline {
                    describer: Arc::new(VlmDescriber { backend, timeout: Duration::from_secs_f64(*timeout_s) }),
                    embedder: Arc::new(embedder.clone()),
                }
            }
        })
    }
}
