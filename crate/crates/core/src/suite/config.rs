use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::TAU_ACC;
use crate::selector::backend::{
    BackendError, HttpChatBackend, ModelBackend, ModelReply, ModelRequest, ReplayBackend, ScriptedBackend,
};
use crate::selector::{OutOfRangePolicy, PromptVariant};

/// Where a model's answers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Deterministic offline stand-in. As a selector it hashes the request into
    /// a valid choice; as a judge it returns mid-scale scores.
    Mock,
    /// Always answers with `text`.
    Fixed { text: String },
    /// Recorded responses, JSON-lines of `{key, text, latency_s?, error?}`.
    Replay { path: PathBuf },
    /// OpenAI-compatible chat endpoint.
    Http {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        temperature: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendRole {
    Selector,
    Judge,
}

const MOCK_JUDGE_REPLY: &str = r#"{"hazard_score": 0.5, "implication_score": 0.5, "action_score": 0.5, "notes": "mock judge"}"#;

impl BackendSpec {
    /// Builds the backend; relative replay paths resolve against `base`.
    pub fn build(&self, name: &str, role: BackendRole, base: &Path) -> Result<Arc<dyn ModelBackend>> {
        Ok(match self {
            BackendSpec::Mock => match role {
                BackendRole::Selector => Arc::new(ScriptedBackend::hashing()),
                BackendRole::Judge => Arc::new(ScriptedBackend::fixed(MOCK_JUDGE_REPLY)),
            },
            BackendSpec::Fixed { text } => Arc::new(ScriptedBackend::fixed(text.clone())),
            BackendSpec::Replay { path } => {
                let p = if path.is_absolute() { path.clone() } else { base.join(path) };
                if !p.exists() {
                    return Err(Error::MissingFile(p));
                }
                Arc::new(ReplayBackend::load(name, &p)?)
            }
            BackendSpec::Http { base_url, model, api_key_env, temperature } => Arc::new(HttpChatBackend {
                name: name.to_string(),
                base_url: base_url.clone(),
                model: model.clone(),
                api_key_env: api_key_env.clone().unwrap_or_else(|| "OPENAI_API_KEY".into()),
                temperature: *temperature,
                extra: Default::default(),
            }),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Used in file names: ASCII letters, digits, `-`, `_`, `.` only.
    pub name: String,
    #[serde(flatten)]
    pub backend: BackendSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeSpec {
    #[serde(flatten)]
    pub backend: BackendSpec,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
}

/// Offline experiment configuration (TOML or JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    /// Directory of `*.scene.json` files.
    pub corpus: PathBuf,
    /// Output directory for logs, overlays and reports.
    pub output: PathBuf,
    pub models: Vec<ModelSpec>,
    /// One selector call per seed; the ensemble size is the number of seeds.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_variant")]
    pub variant: PromptVariant,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default)]
    pub out_of_range: OutOfRangePolicy,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<f64>,
    #[serde(default = "default_speed")]
    pub anomaly_speed: f64,
    #[serde(default = "default_tau_acc")]
    pub tau_acc: f64,
    #[serde(default = "default_true")]
    pub count_abstainer_best: bool,
    #[serde(default)]
    pub judge: Option<JudgeSpec>,
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}
fn default_variant() -> PromptVariant {
    PromptVariant::Conservative
}
fn default_timeout() -> f64 {
    60.0
}
fn default_horizons() -> Vec<f64> {
    vec![10.0, 30.0, 60.0]
}
fn default_speed() -> f64 {
    0.514
}
fn default_tau_acc() -> f64 {
    TAU_ACC
}
fn default_true() -> bool {
    true
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && !name.starts_with('.')
        && name.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.models.is_empty() {
            return err("at least one model is required".into());
        }
        let mut names: Vec<&str> = self.models.iter().map(|m| m.name.as_str()).collect();
        if let Some(bad) = names.iter().find(|n| !valid_name(n)) {
            return err(format!("model name {bad:?} may only use letters, digits, '-', '_' and '.'"));
        }
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return err("model names must be unique".into());
        }
        if self.seeds.is_empty() {
            return err("at least one seed is required".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        if seeds.windows(2).any(|w| w[0] == w[1]) {
            return err("seeds must be distinct".into());
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return err("timeout_s must be positive".into());
        }
        if self.horizons.iter().any(|h| !(*h >= 0.0 && h.is_finite())) {
            return err("horizons must be finite and non-negative".into());
        }
        if !(self.anomaly_speed >= 0.0 && self.anomaly_speed.is_finite()) {
            return err("anomaly_speed must be non-negative".into());
        }
        if !(self.tau_acc > 0.0 && self.tau_acc <= 1.0) {
            return err("tau_acc must lie in (0, 1]".into());
        }
        Ok(())
    }

    /// Reads `.toml` or `.json` by extension; relative paths resolve against
    /// the config file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingFile(path.to_path_buf())),
            Err(e) => return Err(Error::io(format!("read {}", path.display()), e)),
        };
        let mut cfg: SuiteConfig = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.rebase(base);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Makes every relative path absolute with respect to `base`.
    pub fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output);
        for m in &mut self.models {
            if let BackendSpec::Replay { path } = &mut m.backend {
                fix(path);
            }
        }
        if let Some(JudgeSpec { backend: BackendSpec::Replay { path }, .. }) = &mut self.judge {
            fix(path);
        }
    }
}

/// Counts calls that reach the wrapped backend.
pub struct CountingBackend {
    inner: Arc<dyn ModelBackend>,
    calls: Arc<AtomicU64>,
}

impl CountingBackend {
    pub fn wrap(inner: Arc<dyn ModelBackend>, calls: Arc<AtomicU64>) -> Arc<dyn ModelBackend> {
        Arc::new(Self { inner, calls })
    }
}

impl ModelBackend for CountingBackend {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(&self, request: &ModelRequest) -> Result<ModelReply, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}
