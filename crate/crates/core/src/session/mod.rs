//! Live session engine: one tick loop that owns the simulated vessel, takes
//! operator commands, runs a one-shot selector per alert and publishes state
//! frames.
//!
//! Every input the engine consumes (commands and selector results) is written
//! to the event log with the tick it was applied on, so a session can be
//! rebuilt from its log with [`replay`].

mod wire;

use std::collections::{BTreeMap, VecDeque};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Duration;

use base64::Engine as _;
use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::candidates::{encode_png, generate_candidates, render_overlay, CandidateSet, OverlayStyle, SamplingParams};
use crate::error::{Error, Result};
use crate::frames::{CameraModel, NavPose, WorldPoint};
use crate::scenario::Scenario;
use crate::selector::backend::ModelBackend;
use crate::selector::{
    build_prompt, select_fb1, CallContext, CollectingSink, Decision, NotificationKind, OutOfRangePolicy, PromptVariant,
};
use crate::sim::{
    blend_coefficients, blend_override, plan_for_choice, step, update_alpha, Autopilot, ControlGains, DynamicsConfig,
    FollowerConfig, ManeuverPlan, Mode, OverrideConfig, SimState, Wrench,
};
use crate::water::WaterGrid;

pub use wire::{parse_client_message, CandidateView, ClientMessage, DecisionView, OverlayFrame, PoseView, ServerFrame, StateFrame};

/// Seconds without a joystick frame after which the authoritative client
/// loses its lease.
pub const JOYSTICK_LEASE_S: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Nominal,
    Alerted,
    Selecting,
    Executing,
    Overridden,
    Cleared,
}

impl Phase {
    /// An alert is being handled.
    pub fn alert_active(self) -> bool {
        matches!(self, Phase::Alerted | Phase::Selecting | Phase::Executing | Phase::Overridden)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertSource {
    Operator,
    Monitor,
}

/// Command from a connected client. `client` identifies the connection.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Joystick { client: u64, surge: f64, sway: f64, yaw: f64 },
    Alert { client: u64 },
    Clear { client: u64 },
    /// A frame the wire layer could not interpret.
    Unrecognized { client: u64, reason: String },
    Disconnect { client: u64 },
}

impl Command {
    pub fn from_message(client: u64, msg: ClientMessage) -> Self {
        match msg {
            ClientMessage::Joystick { surge, sway, yaw } => Command::Joystick { client, surge, sway, yaw },
            ClientMessage::Alert => Command::Alert { client },
            ClientMessage::Clear => Command::Clear { client },
        }
    }
}

/// Session event; inputs and outcomes share one stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Joystick { client: u64, surge: f64, sway: f64, yaw: f64 },
    AlertRequested { source: AlertSource },
    ClearRequested { client: u64 },
    Disconnected { client: u64 },
    /// A client frame that could not be applied.
    InputRejected { client: u64, reason: String },
    Warning { message: String },
    LeaseGranted { client: u64 },
    LeaseReleased { client: u64 },
    PhaseChange { from: Phase, to: Phase },
    ModeChange { from: Mode, to: Mode },
    CandidatesReady { k: usize, n_survivors: usize },
    SelectorStarted { seed: u64 },
    Notification { kind: NotificationKind, message: String },
    DecisionReady { decision: Decision, latency_s: f64 },
    /// The selector answered after the alert was cleared.
    SelectionDiscarded,
    WaypointReached { index: usize },
    PathComplete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub event: SessionEvent,
}

/// Static scene data the session needs at alert time.
#[derive(Debug, Clone)]
pub struct SessionScene {
    pub scene_id: String,
    pub grid: WaterGrid<f64>,
    pub camera: CameraModel<f64>,
    pub sampling: SamplingParams<f64>,
    pub background: RgbImage,
    pub start: SimState<f64>,
}

impl SessionScene {
    pub fn from_scenario(s: &Scenario<f64>) -> Result<Self> {
        let p = s.pose.position();
        Ok(Self {
            scene_id: s.scene_id.clone(),
            grid: s.water_grid(),
            camera: s.camera,
            sampling: s.sampling,
            background: s.background()?,
            start: SimState::at_rest(p.north, p.east, s.pose.heading()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub tick_hz: f64,
    pub follower: FollowerConfig<f64>,
    pub override_cfg: OverrideConfig<f64>,
    pub dynamics: DynamicsConfig<f64>,
    pub gains: ControlGains<f64>,
    /// Nominal transit route; empty means straight ahead from the start pose.
    pub route: Vec<WorldPoint<f64>>,
    pub transit_speed: f64,
    /// Length of the default straight-ahead route (m).
    pub default_route_length: f64,
    pub variant: PromptVariant,
    pub timeout_s: f64,
    pub out_of_range: OutOfRangePolicy,
    /// Seed of the one-shot selector call; alert `i` uses `seed + i`.
    pub seed: u64,
    /// Raise an alert on the first tick when the monitor flags the scene.
    /// Off by default: alerts come from the operator.
    pub auto_alert: bool,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            tick_hz: 20.0,
            follower: FollowerConfig::default(),
            override_cfg: OverrideConfig::default(),
            dynamics: DynamicsConfig::default(),
            gains: ControlGains::default(),
            route: Vec::new(),
            transit_speed: 1.0,
            default_route_length: 200.0,
            variant: PromptVariant::Conservative,
            timeout_s: 30.0,
            out_of_range: OutOfRangePolicy::default(),
            seed: 1,
            auto_alert: false,
        }
    }
}

impl SessionConfig {
    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tick_hz > 2.0 && self.tick_hz.is_finite()) {
            return Err(Error::Config("tick_hz must exceed 2".into()));
        }
        if !(self.timeout_s > 0.0 && self.timeout_s.is_finite()) {
            return Err(Error::Config("timeout_s must be positive".into()));
        }
        if !(self.transit_speed > 0.0 && self.default_route_length > 0.0) {
            return Err(Error::Config("transit_speed and default_route_length must be positive".into()));
        }
        self.override_cfg.validate()?;
        self.follower.validate()
    }
}

/// How selector calls are executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Resolve within the alert tick. Deterministic; used headless.
    Inline,
    /// Run on a worker thread; the result is picked up on a later tick.
    Background,
}

#[derive(Clone)]
pub struct SessionSelector {
    pub backend: Arc<dyn ModelBackend>,
    pub mode: SelectionMode,
}

#[derive(Debug, Clone, PartialEq)]
struct SelectionResult {
    notifications: Vec<(NotificationKind, String)>,
    decision: Decision,
    latency_s: f64,
}

enum Source {
    Live(SessionSelector),
    /// Results recovered from a log, keyed by alert ordinal; `None` marks a
    /// result that arrived after its alert was cleared.
    Recorded(BTreeMap<u64, (u64, Option<SelectionResult>)>),
}

enum Pending {
    Channel(mpsc::Receiver<SelectionResult>),
    Ready(SelectionResult),
    Recorded(u64),
}

struct Alert {
    frozen: SimState<f64>,
    set: Arc<CandidateSet<f64>>,
    pending: Option<Pending>,
    decision: Option<Decision>,
    pilot: Option<Autopilot<f64>>,
}

struct Lease {
    client: u64,
    last_t: f64,
}

/// Output of one tick: the state frame, plus the overlay on the tick an
/// alert's candidates were generated.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub state: StateFrame,
    pub overlay: Option<OverlayFrame>,
}

pub struct Session {
    scene: SessionScene,
    cfg: SessionConfig,
    source: Source,
    state: SimState<f64>,
    tick: u64,
    phase: Phase,
    route: Autopilot<f64>,
    alert: Option<Alert>,
    alerts_raised: u64,
    auto_alert_armed: bool,
    joystick: Wrench<f64>,
    lease: Option<Lease>,
    queue: VecDeque<Command>,
    log: Vec<LoggedEvent>,
    selector_calls: u64,
}

impl Session {
    pub fn new(scene: SessionScene, cfg: SessionConfig, selector: SessionSelector) -> Result<Self> {
        Self::build(scene, cfg, Source::Live(selector), false)
    }

    /// Like [`Session::new`] with the monitor's verdict for the scene; an
    /// anomalous verdict raises an alert on the first tick when
    /// `cfg.auto_alert` is set.
    pub fn with_monitor_verdict(scene: SessionScene, cfg: SessionConfig, selector: SessionSelector, anomalous: bool) -> Result<Self> {
        let armed = cfg.auto_alert && anomalous;
        Self::build(scene, cfg, Source::Live(selector), armed)
    }

    fn build(scene: SessionScene, cfg: SessionConfig, source: Source, auto_alert_armed: bool) -> Result<Self> {
        cfg.validate()?;
        let start = scene.start;
        let route = if cfg.route.is_empty() {
            let (s, c) = start.heading.sin_cos();
            vec![start.position(), WorldPoint::planar(start.north + cfg.default_route_length * c, start.east + cfg.default_route_length * s)]
        } else {
            cfg.route.clone()
        };
        let pilot = Autopilot::new(ManeuverPlan::Track { path: route, speed: cfg.transit_speed }, cfg.follower, cfg.gains)?;
        Ok(Self {
            scene,
            cfg,
            source,
            state: start,
            tick: 0,
            phase: Phase::Nominal,
            route: pilot,
            alert: None,
            alerts_raised: 0,
            auto_alert_armed,
            joystick: Wrench::zero(),
            lease: None,
            queue: VecDeque::new(),
            log: Vec::new(),
            selector_calls: 0,
        })
    }

    pub fn enqueue(&mut self, cmd: Command) {
        self.queue.push_back(cmd);
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }
    pub fn state(&self) -> &SimState<f64> {
        &self.state
    }
    pub fn tick_count(&self) -> u64 {
        self.tick
    }
    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }
    pub fn events(&self) -> &[LoggedEvent] {
        &self.log
    }
    /// Selector invocations made by this session.
    pub fn selector_calls(&self) -> u64 {
        self.selector_calls
    }
    pub fn candidates(&self) -> Option<&CandidateSet<f64>> {
        self.alert.as_ref().map(|a| a.set.as_ref())
    }
    pub fn decision(&self) -> Option<&Decision> {
        self.alert.as_ref().and_then(|a| a.decision.as_ref())
    }
    /// Joystick wrench currently applied, after clamping and lease handling.
    pub fn joystick(&self) -> Wrench<f64> {
        self.joystick
    }
    /// Seconds of simulated time.
    pub fn time(&self) -> f64 {
        self.state.t
    }

    fn emit(&mut self, event: SessionEvent, out: &mut Vec<SessionEvent>) {
        self.log.push(LoggedEvent { tick: self.tick + 1, event: event.clone() });
        out.push(event);
    }

    fn set_phase(&mut self, to: Phase, out: &mut Vec<SessionEvent>) {
        if self.phase != to {
            let from = self.phase;
            self.phase = to;
            self.emit(SessionEvent::PhaseChange { from, to }, out);
        }
    }

    /// Advances the simulation by one tick.
    pub fn tick(&mut self) -> Result<TickOutput> {
        let mut out = Vec::new();
        let mut overlay = None;

        while let Some(cmd) = self.queue.pop_front() {
            self.apply(cmd, &mut out, &mut overlay)?;
        }
        if self.auto_alert_armed {
            self.auto_alert_armed = false;
            self.raise_alert(AlertSource::Monitor, &mut out, &mut overlay)?;
        }
        self.poll_selection(&mut out)?;
        if let Some(lease) = &self.lease {
            if self.state.t - lease.last_t >= JOYSTICK_LEASE_S {
                let client = lease.client;
                self.lease = None;
                self.joystick = Wrench::zero();
                self.emit(SessionEvent::LeaseReleased { client }, &mut out);
            }
        }

        let dt = self.cfg.dt();
        let tau_h = self.joystick;
        let before_mode = self.state.mode();
        self.state.override_state = update_alpha(&self.state.override_state, &tau_h, self.state.t, dt, &self.cfg.override_cfg);
        if self.state.mode() != before_mode {
            let to = self.state.mode();
            self.emit(SessionEvent::ModeChange { from: before_mode, to }, &mut out);
        }

        let mut reached = Vec::new();
        let mut done = false;
        let tau_m = match self.alert.as_mut() {
            Some(Alert { pilot: Some(p), .. }) if self.phase.alert_active() => {
                let before = p.active_waypoint();
                let (w, just_done) = p.command(&self.state)?;
                reached.extend(before..p.active_waypoint());
                done = just_done;
                w
            }
            Some(a) if self.phase.alert_active() => {
                let f = a.frozen;
                let mut hold = Autopilot::new(ManeuverPlan::StationKeep { point: f.position(), heading: f.heading }, self.cfg.follower, self.cfg.gains)?;
                hold.command(&self.state)?.0
            }
            _ => self.route.command(&self.state)?.0,
        };
        let tau_d = blend_override(&tau_m, &tau_h, self.state.alpha());
        debug_assert!(tau_h.max_norm() == 0.0 || blend_coefficients(self.state.alpha()).1 >= 0.5);
        self.state = step(&self.state, &tau_d, dt, &self.cfg.dynamics)?;
        for index in reached {
            self.emit(SessionEvent::WaypointReached { index }, &mut out);
        }
        if done {
            self.emit(SessionEvent::PathComplete, &mut out);
        }
        if self.phase == Phase::Executing && self.state.alpha() >= 1.0 {
            self.set_phase(Phase::Overridden, &mut out);
        }

        self.tick += 1;
        Ok(TickOutput { state: self.snapshot(out), overlay })
    }

    fn apply(&mut self, cmd: Command, out: &mut Vec<SessionEvent>, overlay: &mut Option<OverlayFrame>) -> Result<()> {
        match cmd {
            Command::Joystick { client, surge, sway, yaw } => {
                if ![surge, sway, yaw].iter().all(|v| v.is_finite()) {
                    self.emit(SessionEvent::InputRejected { client, reason: "non-finite joystick axes".into() }, out);
                    return Ok(());
                }
                let w = Wrench::new(surge, sway, yaw).clamped();
                self.emit(SessionEvent::Joystick { client, surge: w.surge, sway: w.sway, yaw: w.yaw }, out);
                match self.lease.as_mut() {
                    Some(l) if l.client == client => l.last_t = self.state.t,
                    Some(l) => {
                        let message = format!("client {client}: joystick ignored, client {} holds the lease", l.client);
                        self.emit(SessionEvent::Warning { message }, out);
                        return Ok(());
                    }
                    None => {
                        self.lease = Some(Lease { client, last_t: self.state.t });
                        self.emit(SessionEvent::LeaseGranted { client }, out);
                    }
                }
                self.joystick = w;
            }
            Command::Alert { .. } => self.raise_alert(AlertSource::Operator, out, overlay)?,
            Command::Clear { client } => {
                self.emit(SessionEvent::ClearRequested { client }, out);
                if self.phase.alert_active() {
                    self.set_phase(Phase::Cleared, out);
                } else {
                    self.emit(SessionEvent::Warning { message: "clear ignored: no active alert".into() }, out);
                }
            }
            Command::Unrecognized { client, reason } => {
                self.emit(SessionEvent::InputRejected { client, reason }, out);
            }
            Command::Disconnect { client } => {
                self.emit(SessionEvent::Disconnected { client }, out);
                if self.lease.as_ref().is_some_and(|l| l.client == client) {
                    self.lease = None;
                    self.joystick = Wrench::zero();
                    self.emit(SessionEvent::LeaseReleased { client }, out);
                }
            }
        }
        Ok(())
    }

    fn raise_alert(&mut self, source: AlertSource, out: &mut Vec<SessionEvent>, overlay: &mut Option<OverlayFrame>) -> Result<()> {
        self.emit(SessionEvent::AlertRequested { source }, out);
        if self.phase.alert_active() {
            self.emit(SessionEvent::Warning { message: "alert ignored: an alert is already being handled".into() }, out);
            return Ok(());
        }
        self.set_phase(Phase::Alerted, out);
        let frozen = self.state;
        let pose = NavPose::planar(frozen.north, frozen.east, frozen.heading, frozen.t);
        let set = Arc::new(generate_candidates(&self.scene.grid, &self.scene.camera, &pose, &self.scene.sampling)?);
        self.emit(SessionEvent::CandidatesReady { k: set.k(), n_survivors: set.n_survivors }, out);
        let img = render_overlay(&self.scene.background, &set, &OverlayStyle::default())?;
        let png = Arc::new(encode_png(&img)?);
        *overlay = Some(OverlayFrame::new(base64::engine::general_purpose::STANDARD.encode(png.as_slice())));

        let ordinal = self.alerts_raised;
        self.alerts_raised += 1;
        let seed = self.cfg.seed.wrapping_add(ordinal);
        self.set_phase(Phase::Selecting, out);
        self.emit(SessionEvent::SelectorStarted { seed }, out);
        let pending = match &self.source {
            Source::Live(sel) => {
                self.selector_calls += 1;
                let ctx = CallContext {
                    scene_id: self.scene.scene_id.clone(),
                    seed,
                    timeout: Duration::from_secs_f64(self.cfg.timeout_s),
                    out_of_range: self.cfg.out_of_range,
                };
                let prompt = build_prompt(self.cfg.variant, set.k());
                let backend = Arc::clone(&sel.backend);
                let k = set.k();
                let run = move || {
                    let sink = CollectingSink::default();
                    let o = select_fb1(&backend, &png, k, &prompt, &ctx, &sink);
                    SelectionResult {
                        notifications: sink.take().into_iter().map(|n| (n.kind, n.message)).collect(),
                        decision: o.decision,
                        latency_s: o.latency_s,
                    }
                };
                match sel.mode {
                    SelectionMode::Inline => Pending::Ready(run()),
                    SelectionMode::Background => {
                        let (tx, rx) = mpsc::channel();
                        std::thread::spawn(move || {
                            let _ = tx.send(run());
                        });
                        Pending::Channel(rx)
                    }
                }
            }
            Source::Recorded(_) => Pending::Recorded(ordinal),
        };
        self.alert = Some(Alert { frozen, set, pending: Some(pending), decision: None, pilot: None });
        Ok(())
    }

    fn poll_selection(&mut self, out: &mut Vec<SessionEvent>) -> Result<()> {
        let Some(alert) = self.alert.as_mut() else { return Ok(()) };
        let ready = match alert.pending.take() {
            None => return Ok(()),
            Some(Pending::Ready(r)) => r,
            Some(Pending::Channel(rx)) => match rx.try_recv() {
                Ok(r) => r,
                Err(mpsc::TryRecvError::Empty) => {
                    alert.pending = Some(Pending::Channel(rx));
                    return Ok(());
                }
                Err(mpsc::TryRecvError::Disconnected) => SelectionResult {
                    notifications: vec![(NotificationKind::ApiError, "selector worker stopped; station-keeping".into())],
                    decision: Decision::defaulted("", "selector worker stopped"),
                    latency_s: 0.0,
                },
            },
            Some(Pending::Recorded(ordinal)) => {
                let Source::Recorded(map) = &self.source else { unreachable!("recorded pending needs a recorded source") };
                match map.get(&ordinal) {
                    Some((tick, r)) if *tick == self.tick + 1 => {
                        r.clone().unwrap_or_else(|| SelectionResult { notifications: Vec::new(), decision: Decision::defaulted("", "discarded"), latency_s: 0.0 })
                    }
                    _ => {
                        alert.pending = Some(Pending::Recorded(ordinal));
                        return Ok(());
                    }
                }
            }
        };
        if !self.phase.alert_active() {
            self.emit(SessionEvent::SelectionDiscarded, out);
            return Ok(());
        }
        for (kind, message) in ready.notifications {
            self.emit(SessionEvent::Notification { kind, message }, out);
        }
        self.emit(SessionEvent::DecisionReady { decision: ready.decision.clone(), latency_s: ready.latency_s }, out);
        let alert = self.alert.as_mut().expect("alert present");
        let plan = plan_for_choice(&alert.set, ready.decision.choice_id, &alert.frozen, self.cfg.follower.anomaly_speed)?;
        alert.pilot = Some(Autopilot::new(plan, self.cfg.follower, self.cfg.gains)?);
        alert.decision = Some(ready.decision);
        self.set_phase(Phase::Executing, out);
        Ok(())
    }

    fn snapshot(&self, events: Vec<SessionEvent>) -> StateFrame {
        let s = &self.state;
        let (candidates, decision) = match &self.alert {
            Some(a) if self.phase.alert_active() => (
                Some(a.set.candidates.iter().map(CandidateView::from).collect()),
                a.decision.as_ref().map(|d| DecisionView::new(d, &a.set)),
            ),
            _ => (None, None),
        };
        StateFrame {
            tick: self.tick,
            t: s.t,
            pose: PoseView { north: s.north, east: s.east, heading: s.heading, speed: s.speed() },
            alpha: s.alpha(),
            mode: s.mode(),
            phase: self.phase,
            candidates,
            decision,
            events,
        }
    }
}

/// Rebuilds a session from its event log: commands and selector results are
/// re-applied on their logged ticks. The rebuilt session's log equals the
/// input when the log is complete.
pub fn replay(scene: SessionScene, cfg: SessionConfig, log: &[LoggedEvent], ticks: u64) -> Result<Session> {
    let mut results = BTreeMap::new();
    let mut ordinal = 0u64;
    let mut notes = Vec::new();
    for e in log {
        match &e.event {
            SessionEvent::SelectorStarted { .. } => notes.clear(),
            SessionEvent::Notification { kind, message } => notes.push((*kind, message.clone())),
            SessionEvent::DecisionReady { decision, latency_s } => {
                let r = SelectionResult { notifications: std::mem::take(&mut notes), decision: decision.clone(), latency_s: *latency_s };
                results.insert(ordinal, (e.tick, Some(r)));
                ordinal += 1;
            }
            SessionEvent::SelectionDiscarded => {
                results.insert(ordinal, (e.tick, None));
                ordinal += 1;
            }
            _ => {}
        }
    }
    let mut session = Session::build(scene, cfg, Source::Recorded(results), false)?;
    let mut by_tick: BTreeMap<u64, Vec<Command>> = BTreeMap::new();
    for e in log {
        let cmd = match &e.event {
            SessionEvent::Joystick { client, surge, sway, yaw } => Command::Joystick { client: *client, surge: *surge, sway: *sway, yaw: *yaw },
            SessionEvent::ClearRequested { client } => Command::Clear { client: *client },
            SessionEvent::Disconnected { client } => Command::Disconnect { client: *client },
            SessionEvent::AlertRequested { source: AlertSource::Operator } => Command::Alert { client: 0 },
            SessionEvent::AlertRequested { source: AlertSource::Monitor } => {
                session.auto_alert_armed = true;
                continue;
            }
            SessionEvent::InputRejected { client, reason } => Command::Unrecognized { client: *client, reason: reason.clone() },
            _ => continue,
        };
        by_tick.entry(e.tick).or_default().push(cmd);
    }
    for _ in 0..ticks {
        if let Some(cmds) = by_tick.remove(&(session.tick + 1)) {
            session.queue.extend(cmds);
        }
        session.tick()?;
    }
    Ok(session)
}

/// Writes the log as JSON lines.
pub fn write_event_log<W: std::io::Write>(log: &[LoggedEvent], mut out: W) -> Result<()> {
    for e in log {
        let line = serde_json::to_string(e).map_err(|err| Error::json("session event", err))?;
        writeln!(out, "{line}").map_err(|err| Error::io("write session log", err))?;
    }
    Ok(())
}

pub fn read_event_log(text: &str) -> Result<Vec<LoggedEvent>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::json(format!("session log line {}", i + 1), e)))
        .collect()
}
