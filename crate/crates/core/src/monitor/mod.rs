//! Embedding-space anomaly monitor: a cache of unit-normalized nominal scene
//! embeddings, max-cosine scoring, and leave-one-out quantile calibration.

mod embed;
mod store;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use embed::{
    embed_scene, HashingEmbedder, HttpEmbedder, MockDescriber, ReplayEmbedding, ReplayEntry, SceneDescriber,
    TextEmbedder, VlmDescriber, DESCRIBE_PROMPT,
};
pub use store::{load_cache, save_cache, CacheSidecar};

/// Returns `v / ‖v‖`; zero-norm or non-finite input is rejected.
pub fn normalize<T: Real>(v: &[T]) -> Result<Vec<T>> {
    if v.is_empty() {
        return Err(Error::invalid("empty embedding"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite embedding component"));
    }
    let scale = v.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    if scale == T::zero() {
        return Err(Error::invalid("zero-norm embedding"));
    }
    // Rescale first so tiny or huge vectors do not under/overflow the sum.
    let norm = v.iter().map(|&x| (x / scale) * (x / scale)).fold(T::zero(), |a, b| a + b).sqrt() * scale;
    Ok(v.iter().map(|&x| x / norm).collect())
}

/// Nominal embedding cache. Every stored vector has unit norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCache<T = f64> {
    d: usize,
    vectors: Vec<Vec<T>>,
    source_ids: Vec<String>,
}

impl<T: Real> EmbeddingCache<T> {
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self { d, vectors: Vec::new(), source_ids: Vec::new() })
    }

    /// Builds a cache from raw vectors; ids default to their index.
    pub fn from_vectors(vectors: &[Vec<T>]) -> Result<Self> {
        let d = vectors.first().map(Vec::len).ok_or_else(|| Error::invalid("no vectors"))?;
        let mut cache = Self::new(d)?;
        for (i, v) in vectors.iter().enumerate() {
            cache.insert(i.to_string(), v)?;
        }
        Ok(cache)
    }

    /// Normalizes and appends `v`. The cache is untouched on error.
    pub fn insert(&mut self, source_id: impl Into<String>, v: &[T]) -> Result<()> {
        if v.len() != self.d {
            return Err(Error::DimensionMismatch(format!("embedding has {} components, cache expects {}", v.len(), self.d)));
        }
        let unit = normalize(v)?;
        self.vectors.push(unit);
        self.source_ids.push(source_id.into());
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[Vec<T>] {
        &self.vectors
    }

    pub fn source_ids(&self) -> &[String] {
        &self.source_ids
    }

    /// `min_i (1 − e_i·u)` evaluated as `‖e_i − u‖² / 2`, which is the same
    /// quantity for unit vectors but exact at zero and free of cancellation.
    fn min_score(&self, unit: &[T], skip: Option<usize>) -> T {
        let half = T::lit(0.5);
        let s = self
            .vectors
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, e)| e.iter().zip(unit).fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b)) * half)
            .fold(T::infinity(), T::min);
        s.min(T::lit(2.0))
    }
}

/// `1 − max_i cos(e_i, e_t)`, in `[0, 2]`.
pub fn anomaly_score<T: Real>(e_t: &[T], cache: &EmbeddingCache<T>) -> Result<T> {
    if cache.is_empty() {
        return Err(Error::invalid("embedding cache is empty"));
    }
    if e_t.len() != cache.d {
        return Err(Error::DimensionMismatch(format!("query has {} components, cache expects {}", e_t.len(), cache.d)));
    }
    let unit = normalize(e_t)?;
    Ok(cache.min_score(&unit, None))
}

/// Score of every cache member against the cache with that member removed.
pub fn loo_scores<T: Real>(cache: &EmbeddingCache<T>) -> Result<Vec<T>> {
    if cache.len() < 2 {
        return Err(Error::invalid(format!("calibration needs at least 2 cached vectors, got {}", cache.len())));
    }
    Ok((0..cache.len()).map(|i| cache.min_score(&cache.vectors[i], Some(i))).collect())
}

/// Smallest observed score `q` with `|{s ≤ q}| / N ≥ alpha`.
pub fn empirical_quantile<T: Real>(scores: &[T], alpha: f64) -> Result<T> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if scores.is_empty() || scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores must be non-empty and free of NaN"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
    let n = sorted.len() as f64;
    // The count function only jumps at observed values, so the infimum is one
    // of them. Compare counts directly to avoid ceil() rounding at alpha·N.
    for (i, &q) in sorted.iter().enumerate() {
        if i + 1 < sorted.len() && sorted[i + 1] == q {
            continue;
        }
        if (i + 1) as f64 >= alpha * n {
            return Ok(q);
        }
    }
    Ok(*sorted.last().expect("non-empty"))
}

/// Leave-one-out threshold at quantile level `alpha`.
pub fn calibrate_threshold<T: Real>(cache: &EmbeddingCache<T>, alpha: f64) -> Result<T> {
    empirical_quantile(&loo_scores(cache)?, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Nominal,
    Anomalous,
}

/// Anomalous iff the score strictly exceeds `tau`.
pub fn classify<T: Real>(e_t: &[T], cache: &EmbeddingCache<T>, tau: T) -> Result<Verdict> {
    let s = anomaly_score(e_t, cache)?;
    Ok(if s > tau { Verdict::Anomalous } else { Verdict::Nominal })
}

pub const DEFAULT_ALPHA: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorConfig {
    pub alpha: f64,
    pub tau: f64,
}

impl MonitorConfig {
    pub fn new(alpha: f64, tau: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        if !(0.0..=2.0).contains(&tau) {
            return Err(Error::invalid(format!("tau must lie in [0, 2], got {tau}")));
        }
        Ok(Self { alpha, tau })
    }
}

/// A calibrated, read-only monitor snapshot.
#[derive(Debug, Clone)]
pub struct Monitor<T = f64> {
    pub cache: EmbeddingCache<T>,
    pub config: MonitorConfig,
}

impl<T: Real> Monitor<T> {
    pub fn calibrate(cache: EmbeddingCache<T>, alpha: f64) -> Result<Self> {
        let tau = calibrate_threshold(&cache, alpha)?;
        let config = MonitorConfig::new(alpha, tau.to_f64_lossy())?;
        Ok(Self { cache, config })
    }

    pub fn score(&self, e_t: &[T]) -> Result<(T, Verdict)> {
        let s = anomaly_score(e_t, &self.cache)?;
        let verdict = if s > T::lit(self.config.tau) { Verdict::Anomalous } else { Verdict::Nominal };
        Ok((s, verdict))
    }
}
