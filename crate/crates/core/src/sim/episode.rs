use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{
    blend_override, step, update_alpha, Autopilot, ControlGains, DynamicsConfig, FollowerConfig, ManeuverPlan, Mode,
    OverrideConfig, SimState, Wrench,
};
use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Constant joystick input over `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoystickSegment<T = f64> {
    pub start: T,
    pub end: T,
    pub input: Wrench<T>,
}

/// Piecewise-constant joystick timeline; zero outside every segment. The first
/// matching segment wins.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct JoystickScript<T = f64> {
    pub segments: Vec<JoystickSegment<T>>,
}

impl<T: Real> JoystickScript<T> {
    pub fn idle() -> Self {
        Self { segments: Vec::new() }
    }

    pub fn at(&self, t: T) -> Wrench<T> {
        self.segments.iter().find(|s| s.start <= t && t < s.end).map(|s| s.input).unwrap_or_else(Wrench::zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig<T = f64> {
    pub dt: T,
    pub t_max: T,
    pub follower: FollowerConfig<T>,
    pub override_cfg: OverrideConfig<T>,
    pub dynamics: DynamicsConfig<T>,
    pub gains: ControlGains<T>,
    /// Scripted alert clearance time.
    pub clear_at: Option<T>,
}

impl<T: Real> Default for EpisodeConfig<T> {
    fn default() -> Self {
        Self {
            dt: T::lit(0.05),
            t_max: T::lit(120.0),
            follower: FollowerConfig::default(),
            override_cfg: OverrideConfig::default(),
            dynamics: DynamicsConfig::default(),
            gains: ControlGains::default(),
            clear_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SimEvent {
    ModeChange { from: Mode, to: Mode },
    WaypointReached { index: usize },
    PathComplete,
    OverrideComplete,
    AlertCleared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeEnd {
    PathComplete,
    Overridden,
    AlertCleared,
    TimeLimit,
}

/// One line of the episode log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickRecord {
    pub tick: u64,
    pub t: f64,
    pub north: f64,
    pub east: f64,
    pub heading: f64,
    pub speed: f64,
    pub alpha: f64,
    pub mode: Mode,
    pub active_waypoint: usize,
    pub events: Vec<SimEvent>,
}

impl TickRecord {
    fn new<T: Real>(tick: u64, s: &SimState<T>, active_waypoint: usize, events: Vec<SimEvent>) -> Self {
        Self {
            tick,
            t: s.t.to_f64_lossy(),
            north: s.north.to_f64_lossy(),
            east: s.east.to_f64_lossy(),
            heading: s.heading.to_f64_lossy(),
            speed: s.speed().to_f64_lossy(),
            alpha: s.alpha().to_f64_lossy(),
            mode: s.mode(),
            active_waypoint,
            events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub ticks: Vec<TickRecord>,
    pub end: EpisodeEnd,
}

impl EpisodeLog {
    pub fn events(&self) -> impl Iterator<Item = &SimEvent> {
        self.ticks.iter().flat_map(|t| t.events.iter())
    }
}

/// Writes one JSON object per tick.
pub fn write_episode_log<W: Write>(log: &EpisodeLog, mut out: W) -> Result<()> {
    for rec in &log.ticks {
        let line = serde_json::to_string(rec).map_err(|e| Error::json("episode record", e))?;
        writeln!(out, "{line}").map_err(|e| Error::io("write episode log", e))?;
    }
    Ok(())
}

/// Plan for a selector choice: 0 holds the current pose, `k ≥ 1` tracks the
/// candidate's frozen world polyline at `speed`.
pub fn plan_for_choice<T: Real>(set: &CandidateSet<T>, choice: usize, state: &SimState<T>, speed: T) -> Result<ManeuverPlan<T>> {
    if choice == 0 {
        return Ok(ManeuverPlan::StationKeep { point: state.position(), heading: state.heading });
    }
    let cand = set
        .get(choice)
        .ok_or_else(|| Error::invalid(format!("action {choice} is not in 0..={}", set.k())))?;
    Ok(ManeuverPlan::Track { path: cand.polyline_world.clone(), speed })
}

/// Runs the fallback maneuver from `start` until the path completes, the
/// operator reaches full authority, the alert is cleared, or `t_max`.
pub fn run_episode<T: Real>(start: &SimState<T>, plan: ManeuverPlan<T>, script: &JoystickScript<T>, cfg: &EpisodeConfig<T>) -> Result<EpisodeLog> {
    cfg.override_cfg.validate()?;
    let mut pilot = Autopilot::new(plan, cfg.follower, cfg.gains)?;
    let mut state = *start;
    let mut tick = 0u64;
    let mut ticks = vec![TickRecord::new(tick, &state, pilot.active_waypoint(), Vec::new())];
    let half_dt = cfg.dt * T::lit(0.5);
    let end = loop {
        if state.t + half_dt > cfg.t_max {
            break EpisodeEnd::TimeLimit;
        }
        if cfg.clear_at.is_some_and(|c| state.t + half_dt >= c) {
            ticks.last_mut().expect("initial record").events.push(SimEvent::AlertCleared);
            break EpisodeEnd::AlertCleared;
        }
        let mut events = Vec::new();
        let tau_h = script.at(state.t).clamped();
        let before_mode = state.mode();
        let before_wp = pilot.active_waypoint();
        state.override_state = update_alpha(&state.override_state, &tau_h, state.t, cfg.dt, &cfg.override_cfg);
        if state.mode() != before_mode {
            events.push(SimEvent::ModeChange { from: before_mode, to: state.mode() });
        }
        let (tau_m, just_done) = pilot.command(&state)?;
        let tau_d = blend_override(&tau_m, &tau_h, state.alpha());
        state = step(&state, &tau_d, cfg.dt, &cfg.dynamics)?;
        tick += 1;
        if pilot.active_waypoint() > before_wp {
            for index in before_wp..pilot.active_waypoint() {
                events.push(SimEvent::WaypointReached { index });
            }
        }
        if just_done {
            events.push(SimEvent::PathComplete);
        }
        let overridden = state.alpha() >= T::one();
        if overridden {
            events.push(SimEvent::OverrideComplete);
        }
        ticks.push(TickRecord::new(tick, &state, pilot.active_waypoint(), events));
        if overridden {
            break EpisodeEnd::Overridden;
        }
        if just_done {
            break EpisodeEnd::PathComplete;
        }
    };
    Ok(EpisodeLog { ticks, end })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::WorldPoint;

    #[test]
    fn station_hold_does_not_drift() {
        let start = SimState::at_rest(3.0, -2.0, 0.4);
        let plan = ManeuverPlan::StationKeep { point: start.position(), heading: start.heading };
        let cfg = EpisodeConfig { t_max: 60.0, ..Default::default() };
        let log = run_episode(&start, plan, &JoystickScript::idle(), &cfg).unwrap();
        assert_eq!(log.end, EpisodeEnd::TimeLimit);
        assert_eq!(log.ticks.len(), 1201);
        let last = log.ticks.last().unwrap();
        assert_eq!((last.north, last.east), (3.0, -2.0));
    }

    #[test]
    fn straight_track_respects_speed_bound() {
        let start = SimState::at_rest(0.0, 0.0, 0.0);
        let plan = ManeuverPlan::Track { path: vec![WorldPoint::planar(0.0, 0.0), WorldPoint::planar(20.0, 0.0)], speed: 0.514 };
        let log = run_episode(&start, plan, &JoystickScript::idle(), &EpisodeConfig::default()).unwrap();
        assert_eq!(log.end, EpisodeEnd::PathComplete);
        let t_done = log.ticks.last().unwrap().t;
        assert!(t_done >= (20.0 - 7.5) / 0.514, "{t_done}");
    }

    #[test]
    fn saturated_stick_overrides_in_order() {
        let start = SimState::at_rest(0.0, 0.0, 0.0);
        let plan = ManeuverPlan::Track { path: vec![WorldPoint::planar(0.0, 0.0), WorldPoint::planar(50.0, 0.0)], speed: 0.514 };
        let script = JoystickScript {
            segments: vec![JoystickSegment { start: 5.0, end: 20.0, input: Wrench::new(0.0, 0.0, 1.0) }],
        };
        let log = run_episode(&start, plan, &script, &EpisodeConfig::default()).unwrap();
        assert_eq!(log.end, EpisodeEnd::Overridden);
        let modes: Vec<_> = log.events().filter_map(|e| match e {
            SimEvent::ModeChange { from, to } => Some((*from, *to)),
            _ => None,
        }).collect();
        assert_eq!(modes, vec![(Mode::Autonomy, Mode::Shared), (Mode::Shared, Mode::Manual)]);
        assert!((log.ticks.last().unwrap().t - 8.0).abs() <= 0.05 + 1e-9);
    }

    #[test]
    fn clear_ends_episode_and_is_deterministic() {
        let start = SimState::at_rest(0.0, 0.0, 0.0);
        let plan = ManeuverPlan::Track { path: vec![WorldPoint::planar(0.0, 0.0), WorldPoint::planar(5.0, 30.0)], speed: 0.514 };
        let cfg = EpisodeConfig { clear_at: Some(12.0), ..Default::default() };
        let a = run_episode(&start, plan.clone(), &JoystickScript::idle(), &cfg).unwrap();
        let b = run_episode(&start, plan, &JoystickScript::idle(), &cfg).unwrap();
        assert_eq!(a.end, EpisodeEnd::AlertCleared);
        assert_eq!(a, b);
        let mut buf = Vec::new();
        write_episode_log(&a, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), a.ticks.len());
    }
}
