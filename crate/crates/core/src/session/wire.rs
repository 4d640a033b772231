//! JSON text frames exchanged with console clients.
//!
//! Server to client:
//! - `{"type":"state", tick, t, pose, alpha, mode, phase, candidates?, decision?, events}`
//!   every tick. `t` is simulated seconds; `pose.north`/`pose.east` are metres in
//!   the world frame, `pose.heading` radians clockwise from north, `pose.speed` m/s.
//!   `alpha` is the override ramp in [0, 1]. `candidates` and `decision` are
//!   present while an alert is handled; world polylines are `[north, east]` pairs.
//! - `{"type":"overlay", png_base64}` once per alert, on the tick the
//!   candidates are generated.
//!
//! Client to server:
//! - `{"type":"joystick", surge, sway, yaw}` with each axis in [-1, 1]
//!   (larger values are clamped). Sent while the stick is engaged, plus a zero
//!   frame on release.
//! - `{"type":"alert"}` and `{"type":"clear"}`.

use serde::{Deserialize, Serialize};

use super::{Phase, SessionEvent};
use crate::candidates::{Candidate, CandidateSet};
use crate::selector::{Decision, ParseStatus};
use crate::sim::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseView {
    pub north: f64,
    pub east: f64,
    pub heading: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateView {
    pub id: usize,
    /// `[u, v]` pixel of the endpoint in the overlay image.
    pub endpoint_pixel: [f64; 2],
    pub polyline_world: Vec<[f64; 2]>,
}

impl From<&Candidate<f64>> for CandidateView {
    fn from(c: &Candidate<f64>) -> Self {
        Self {
            id: c.id,
            endpoint_pixel: [c.endpoint_pixel.u, c.endpoint_pixel.v],
            polyline_world: c.polyline_world.iter().map(|p| [p.north, p.east]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionView {
    pub choice_id: usize,
    pub see: String,
    pub implications: String,
    pub action: String,
    pub confidence: f64,
    pub status: ParseStatus,
    /// World path being executed; empty for station-keeping.
    pub path: Vec<[f64; 2]>,
}

impl DecisionView {
    pub fn new(d: &Decision, set: &CandidateSet<f64>) -> Self {
        let path = set.get(d.choice_id).map(|c| c.polyline_world.iter().map(|p| [p.north, p.east]).collect()).unwrap_or_default();
        Self {
            choice_id: d.choice_id,
            see: d.see.clone(),
            implications: d.implications.clone(),
            action: d.action.clone(),
            confidence: d.confidence,
            status: d.parse_status,
            path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrame {
    pub tick: u64,
    pub t: f64,
    pub pose: PoseView,
    pub alpha: f64,
    pub mode: Mode,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidates: Option<Vec<CandidateView>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<DecisionView>,
    pub events: Vec<SessionEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlayFrame {
    pub png_base64: String,
}

impl OverlayFrame {
    pub fn new(png_base64: String) -> Self {
        Self { png_base64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
pub enum ServerFrame {
    State(StateFrame),
    Overlay(OverlayFrame),
}

impl ServerFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server frames always serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Joystick { surge: f64, sway: f64, yaw: f64 },
    Alert,
    Clear,
}

/// Parses one client text frame. The error is a short reason suitable for a
/// warning event.
pub fn parse_client_message(text: &str) -> Result<ClientMessage, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("malformed frame: {e}"))?;
    let kind = value.get("type").and_then(|t| t.as_str()).ok_or("frame has no string \"type\"")?.to_string();
    if !matches!(kind.as_str(), "joystick" | "alert" | "clear") {
        return Err(format!("unknown message type {kind:?}"));
    }
    serde_json::from_value(value).map_err(|e| format!("bad {kind} frame: {e}"))
}
