//! Planar vessel simulation: reduced first-order dynamics, LOS path
//! following, station keeping, and the human-override blend with its α ramp.

mod episode;
mod guidance;

use std::ops::{Add, Mul, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::WorldPoint;
use crate::scalar::Real;

pub use episode::{
    plan_for_choice, run_episode, write_episode_log, EpisodeConfig, EpisodeEnd, EpisodeLog, JoystickScript,
    JoystickSegment, SimEvent, TickRecord,
};
pub use guidance::{
    cross_track_error, los_guidance, wrap_angle, Autopilot, ControlGains, FollowerConfig, LosOutput, ManeuverPlan,
};

/// Normalized force/moment triple (surge, sway, yaw).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench<T = f64> {
    pub surge: T,
    pub sway: T,
    pub yaw: T,
}

impl<T: Real> Wrench<T> {
    pub fn new(surge: T, sway: T, yaw: T) -> Self {
        Self { surge, sway, yaw }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn max_norm(&self) -> T {
        self.surge.abs().max(self.sway.abs()).max(self.yaw.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.surge.is_finite() && self.sway.is_finite() && self.yaw.is_finite()
    }

    /// Each axis clamped to `[-1, 1]`; non-finite axes become 0.
    pub fn clamped(&self) -> Self {
        let c = |v: T| if v.is_finite() { v.max(-T::one()).min(T::one()) } else { T::zero() };
        Self::new(c(self.surge), c(self.sway), c(self.yaw))
    }
}

impl<T: Real> Add for Wrench<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.surge + o.surge, self.sway + o.sway, self.yaw + o.yaw)
    }
}

impl<T: Real> Sub for Wrench<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.surge - o.surge, self.sway - o.sway, self.yaw - o.yaw)
    }
}

impl<T: Real> Mul<T> for Wrench<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.surge * s, self.sway * s, self.yaw * s)
    }
}

/// Machine, human, and applied inputs of one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput<T = f64> {
    pub tau_m: Wrench<T>,
    pub tau_h: Wrench<T>,
    pub tau_d: Wrench<T>,
}

/// `τ_d = (1 − α)·τ_m + (0.5 + 0.5α)·τ_h`.
pub fn blend_override<T: Real>(tau_m: &Wrench<T>, tau_h: &Wrench<T>, alpha: T) -> Wrench<T> {
    let (cm, ch) = blend_coefficients(alpha);
    *tau_m * cm + *tau_h * ch
}

/// `(machine, human)` coefficients of the blend.
pub fn blend_coefficients<T: Real>(alpha: T) -> (T, T) {
    let half = T::lit(0.5);
    (T::one() - alpha, half + half * alpha)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Autonomy,
    Shared,
    Manual,
}

impl Mode {
    pub fn from_alpha<T: Real>(alpha: T) -> Self {
        if alpha <= T::zero() {
            Mode::Autonomy
        } else if alpha >= T::one() {
            Mode::Manual
        } else {
            Mode::Shared
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Autonomy => "autonomy",
            Mode::Shared => "shared",
            Mode::Manual => "manual",
        }
    }
}

/// Ramp time and joystick engagement threshold of the α schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverrideConfig<T = f64> {
    /// Seconds for α to ramp fully in or out, and the idle hold after release.
    pub ramp_time: T,
    /// Max-norm of `τ_h` above which the stick counts as engaged.
    pub tau_h_min: T,
}

impl<T: Real> Default for OverrideConfig<T> {
    fn default() -> Self {
        Self { ramp_time: T::lit(3.0), tau_h_min: T::lit(0.05) }
    }
}

impl<T: Real> OverrideConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_time > T::zero() && self.ramp_time.is_finite()) {
            return Err(Error::invalid("ramp time must be positive"));
        }
        if !(self.tau_h_min >= T::zero()) {
            return Err(Error::invalid("joystick threshold must be non-negative"));
        }
        Ok(())
    }
}

/// Override state carried between ticks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverrideState<T = f64> {
    pub alpha: T,
    /// Time of the most recent above-threshold joystick sample.
    pub t_c: Option<T>,
}

impl<T: Real> Default for OverrideState<T> {
    fn default() -> Self {
        Self { alpha: T::zero(), t_c: None }
    }
}

const SNAP: f64 = 1e-9;

/// Advances α by one tick of length `dt` taken at time `t`.
///
/// Stick engaged: α rises at 1/T and `t_c ← t`. Released for less than T: α
/// holds. Released for at least T: α falls at 1/T.
pub fn update_alpha<T: Real>(state: &OverrideState<T>, tau_h: &Wrench<T>, t: T, dt: T, cfg: &OverrideConfig<T>) -> OverrideState<T> {
    let rate = dt / cfg.ramp_time;
    let engaged = tau_h.max_norm() > cfg.tau_h_min;
    let (mut alpha, t_c) = if engaged {
        (state.alpha + rate, Some(t))
    } else {
        match state.t_c {
            Some(tc) if t - tc < cfg.ramp_time => (state.alpha, state.t_c),
            _ => (state.alpha - rate, state.t_c),
        }
    };
    let snap = T::lit(SNAP);
    if alpha <= snap {
        alpha = T::zero();
    } else if alpha >= T::one() - snap {
        alpha = T::one();
    }
    OverrideState { alpha, t_c }
}

/// Reduced planar dynamics: surge, sway and yaw rate each follow a first-order
/// lag `ẋ = (g·τ − x)/T_c` toward their input, integrated exactly over a tick
/// with the input held constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig<T = f64> {
    /// Steady surge speed per unit surge input (m/s).
    pub surge_gain: T,
    pub surge_time_constant: T,
    pub sway_gain: T,
    pub sway_time_constant: T,
    /// Steady yaw rate per unit yaw input (rad/s).
    pub yaw_gain: T,
    pub yaw_time_constant: T,
    /// Constant water current (north, east) in m/s.
    pub current: (T, T),
}

impl<T: Real> Default for DynamicsConfig<T> {
    fn default() -> Self {
        Self {
            surge_gain: T::one(),
            surge_time_constant: T::one(),
            sway_gain: T::one(),
            sway_time_constant: T::one(),
            yaw_gain: T::one(),
            yaw_time_constant: T::one(),
            current: (T::zero(), T::zero()),
        }
    }
}

/// Vessel state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimState<T = f64> {
    pub north: T,
    pub east: T,
    pub heading: T,
    /// Body-frame forward speed (m/s).
    pub surge: T,
    /// Body-frame starboard speed (m/s).
    pub sway: T,
    pub yaw_rate: T,
    pub t: T,
    #[serde(flatten)]
    pub override_state: OverrideState<T>,
}

impl<T: Real> SimState<T> {
    pub fn at_rest(north: T, east: T, heading: T) -> Self {
        Self {
            north,
            east,
            heading,
            surge: T::zero(),
            sway: T::zero(),
            yaw_rate: T::zero(),
            t: T::zero(),
            override_state: OverrideState::default(),
        }
    }

    pub fn position(&self) -> WorldPoint<T> {
        WorldPoint::planar(self.north, self.east)
    }

    pub fn speed(&self) -> T {
        self.surge.hypot(self.sway)
    }

    pub fn alpha(&self) -> T {
        self.override_state.alpha
    }

    pub fn mode(&self) -> Mode {
        Mode::from_alpha(self.alpha())
    }
}

/// `(x(dt), ∫₀^dt x)` for `ẋ = (target − x)/tc` from `x0`.
fn first_order<T: Real>(x0: T, target: T, tc: T, dt: T) -> (T, T) {
    let decay = (-dt / tc).exp();
    let x = target + (x0 - target) * decay;
    let integral = target * dt + (x0 - target) * tc * (T::one() - decay);
    (x, integral)
}

/// Advances the vessel by `dt` seconds under applied input `tau_d`.
pub fn step<T: Real>(state: &SimState<T>, tau_d: &Wrench<T>, dt: T, dynamics: &DynamicsConfig<T>) -> Result<SimState<T>> {
    if !(dt > T::zero() && dt <= T::lit(0.5)) {
        return Err(Error::invalid(format!("time step must lie in (0, 0.5], got {dt}")));
    }
    if !tau_d.is_finite() {
        return Err(Error::invalid("non-finite control input"));
    }
    let d = dynamics;
    let (surge, dx) = first_order(state.surge, d.surge_gain * tau_d.surge, d.surge_time_constant, dt);
    let (sway, dy) = first_order(state.sway, d.sway_gain * tau_d.sway, d.sway_time_constant, dt);
    let (yaw_rate, dpsi) = first_order(state.yaw_rate, d.yaw_gain * tau_d.yaw, d.yaw_time_constant, dt);
    // Body displacement rotated at the mid-step heading; exact when the yaw
    // rate is zero.
    let mid = state.heading + dpsi * T::lit(0.5);
    let (s, c) = mid.sin_cos();
    let mut next = *state;
    next.north = state.north + c * dx - s * dy + d.current.0 * dt;
    next.east = state.east + s * dx + c * dy + d.current.1 * dt;
    next.heading = wrap_angle(state.heading + dpsi);
    next.surge = surge;
    next.sway = sway;
    next.yaw_rate = yaw_rate;
    next.t = state.t + dt;
    Ok(next)
}
