//! Fallback maneuver selection: prompt construction, one-shot (FB-1) and
//! ensemble (FB-n) model calls, strict output parsing with safe defaults,
//! strict-majority voting and geometric baselines.
//!
//! Every failure path (timeout, API error, malformed output, no candidates)
//! resolves to station-keeping (id 0) and emits an operator notification.

pub mod backend;
mod baseline;
mod log;
mod parse;
mod prompt;
mod vote;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use backend::{
    call_with_timeout, BackendError, HttpChatBackend, ModelBackend, ModelReply, ModelRequest, ReplayBackend,
    ReplayRecord, ScriptedBackend,
};
pub use baseline::{baseline_select, BaselinePolicy};
pub use log::{read_decision_log, DecisionLogWriter, DecisionRecord};
pub use parse::{parse_decision, parse_decision_with, Decision, OutOfRangePolicy, ParseStatus, WORD_LIMIT};
pub use prompt::{build_prompt, PromptVariant, SelectorPrompt};
pub use vote::{aggregate_votes, VoteRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    Timeout,
    ApiError,
    InvalidOutput,
    NoCandidates,
}

/// Operator-facing notice that the selector fell back to station-keeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notification {
    pub kind: NotificationKind,
    pub scene_id: String,
    pub seed: u64,
    pub message: String,
}

/// Receives notifications; may be called from several worker threads at once.
pub trait NotificationSink: Send + Sync {
    fn notify(&self, notification: Notification);
}

/// Sink that keeps every notification in memory.
#[derive(Debug, Default)]
pub struct CollectingSink {
    inner: Mutex<Vec<Notification>>,
}

impl CollectingSink {
    pub fn take(&self) -> Vec<Notification> {
        std::mem::take(&mut *self.inner.lock().expect("sink poisoned"))
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("sink poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl NotificationSink for CollectingSink {
    fn notify(&self, notification: Notification) {
        self.inner.lock().expect("sink poisoned").push(notification);
    }
}

/// Sink that only logs.
#[derive(Debug, Default, Clone, Copy)]
pub struct LogSink;

impl NotificationSink for LogSink {
    fn notify(&self, n: Notification) {
        tracing::warn!(kind = ?n.kind, scene = %n.scene_id, seed = n.seed, "{}", n.message);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectorConfig {
    #[serde(default = "default_variant")]
    pub variant: PromptVariant,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    #[serde(default)]
    pub out_of_range: OutOfRangePolicy,
}

fn default_variant() -> PromptVariant {
    PromptVariant::Conservative
}
fn default_timeout_s() -> f64 {
    30.0
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self { variant: default_variant(), timeout_s: default_timeout_s(), out_of_range: OutOfRangePolicy::Clip }
    }
}

impl SelectorConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_s.max(0.0))
    }
}

/// Per-call identity and limits.
#[derive(Debug, Clone)]
pub struct CallContext {
    pub scene_id: String,
    pub seed: u64,
    pub timeout: Duration,
    pub out_of_range: OutOfRangePolicy,
}

impl CallContext {
    pub fn request_key(&self) -> String {
        format!("{}#{}", self.scene_id, self.seed)
    }
}

/// A selector call's decision together with its measured latency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallOutcome {
    pub seed: u64,
    pub decision: Decision,
    pub latency_s: f64,
    /// Backend could not serve this request at all (quota or replay miss).
    pub exhausted: bool,
}

fn notify(sink: &dyn NotificationSink, ctx: &CallContext, kind: NotificationKind, message: String) {
    sink.notify(Notification { kind, scene_id: ctx.scene_id.clone(), seed: ctx.seed, message });
}

/// One-shot runtime selection: a single backend call, clipped into `0..=k`.
/// With `k == 0` the backend is not called.
pub fn select_fb1(
    backend: &Arc<dyn ModelBackend>,
    overlay_png: &Arc<Vec<u8>>,
    k: usize,
    prompt: &SelectorPrompt,
    ctx: &CallContext,
    sink: &dyn NotificationSink,
) -> CallOutcome {
    if k == 0 {
        notify(sink, ctx, NotificationKind::NoCandidates, "no feasible candidates; station-keeping".into());
        return CallOutcome {
            seed: ctx.seed,
            decision: Decision::defaulted("", "no feasible candidates"),
            latency_s: 0.0,
            exhausted: false,
        };
    }
    let request = ModelRequest {
        key: ctx.request_key(),
        image_png: Some(Arc::clone(overlay_png)),
        system: None,
        prompt: prompt.text.clone(),
        seed: ctx.seed,
        timeout: ctx.timeout,
        k: Some(k),
    };
    match call_with_timeout(backend, &request) {
        Ok(reply) => {
            let decision = parse_decision_with(&reply.text, k, ctx.out_of_range);
            if decision.is_defaulted() {
                let why = decision.failure.clone().unwrap_or_default();
                notify(sink, ctx, NotificationKind::InvalidOutput, format!("non-conforming output: {why}"));
            }
            CallOutcome { seed: ctx.seed, decision, latency_s: reply.latency_s.unwrap_or(0.0), exhausted: false }
        }
        Err(err) => {
            let kind = match err {
                BackendError::Timeout(_) => NotificationKind::Timeout,
                _ => NotificationKind::ApiError,
            };
            notify(sink, ctx, kind, format!("selector call failed: {err}"));
            CallOutcome {
                seed: ctx.seed,
                decision: Decision::defaulted("", err.to_string()),
                latency_s: ctx.timeout.as_secs_f64(),
                exhausted: matches!(err, BackendError::Exhausted(_)),
            }
        }
    }
}

/// Result of an FB-n ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbnOutcome {
    pub calls: Vec<CallOutcome>,
    pub record: VoteRecord,
}

/// Evaluation ensemble: one call per seed (run concurrently), each clipped,
/// then strict-majority aggregation. Failed calls vote 0.
#[allow(clippy::too_many_arguments)]
pub fn select_fbn(
    backend: &Arc<dyn ModelBackend>,
    overlay_png: &Arc<Vec<u8>>,
    k: usize,
    prompt: &SelectorPrompt,
    scene_id: &str,
    seeds: &[u64],
    config: &SelectorConfig,
    sink: &dyn NotificationSink,
) -> Result<FbnOutcome> {
    if seeds.is_empty() {
        return Err(Error::invalid("FB-n needs at least one seed"));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("FB-n seeds must be distinct"));
    }
    let calls: Vec<CallOutcome> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let ctx = CallContext {
                    scene_id: scene_id.to_string(),
                    seed,
                    timeout: config.timeout(),
                    out_of_range: config.out_of_range,
                };
                scope.spawn(move || select_fb1(backend, overlay_png, k, prompt, &ctx, sink))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("selector worker panicked")).collect()
    });
    let votes: Vec<usize> = calls.iter().map(|c| c.decision.choice_id).collect();
    Ok(FbnOutcome { record: aggregate_votes(&votes, k), calls })
}
