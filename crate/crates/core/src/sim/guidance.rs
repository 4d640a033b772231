use serde::{Deserialize, Serialize};

use super::{SimState, Wrench};
use crate::error::{Error, Result};
use crate::frames::WorldPoint;
use crate::scalar::Real;

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut w = a % two_pi;
    if w > T::PI() {
        w -= two_pi;
    } else if w <= -T::PI() {
        w += two_pi;
    }
    w
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FollowerConfig<T = f64> {
    /// Acceptance radius (m).
    #[serde(rename = "R")]
    pub acceptance_radius: T,
    /// Lookahead distance (m).
    #[serde(rename = "Delta")]
    pub lookahead: T,
    /// Anomaly-mode speed (m/s).
    #[serde(rename = "U_anom")]
    pub anomaly_speed: T,
}

impl<T: Real> Default for FollowerConfig<T> {
    fn default() -> Self {
        Self { acceptance_radius: T::lit(7.5), lookahead: T::lit(10.0), anomaly_speed: T::lit(0.514) }
    }
}

impl<T: Real> FollowerConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.acceptance_radius > T::zero()) || !(self.lookahead > T::zero()) || !(self.anomaly_speed >= T::zero()) {
            return Err(Error::invalid("follower needs R > 0, Delta > 0, U_anom >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LosOutput<T = f64> {
    pub desired_course: T,
    pub done: bool,
    /// Index of the waypoint currently steered toward.
    pub active_waypoint: usize,
}

/// Signed distance from the line through `a → b`, positive to starboard of
/// the direction of travel.
pub fn cross_track_error<T: Real>(a: &WorldPoint<T>, b: &WorldPoint<T>, p: &WorldPoint<T>) -> T {
    let gamma = (b.east - a.east).atan2(b.north - a.north);
    let (s, c) = gamma.sin_cos();
    -(p.north - a.north) * s + (p.east - a.east) * c
}

/// Lookahead LOS guidance.
///
/// `active` is the waypoint being steered toward (the segment runs from
/// `active - 1`). It advances past every waypoint within the acceptance radius
/// and past zero-length segments. Returns the new active index.
pub fn los_guidance<T: Real>(path: &[WorldPoint<T>], active: usize, position: &WorldPoint<T>, cfg: &FollowerConfig<T>) -> Result<LosOutput<T>> {
    let last = path.len().checked_sub(1).ok_or_else(|| Error::invalid("empty path"))?;
    let done = position.planar_distance(&path[last]) <= cfg.acceptance_radius;
    if last == 0 {
        let p = &path[0];
        let course = (p.east - position.east).atan2(p.north - position.north);
        return Ok(LosOutput { desired_course: course, done, active_waypoint: 0 });
    }
    let mut k = active.clamp(1, last);
    while k < last
        && (position.planar_distance(&path[k]) <= cfg.acceptance_radius
            || path[k].planar_distance(&path[k - 1]) == T::zero())
    {
        k += 1;
    }
    // A zero-length final segment falls back to the last proper one.
    let mut a = k - 1;
    while a > 0 && path[a].planar_distance(&path[k]) == T::zero() {
        a -= 1;
    }
    let (pa, pb) = (&path[a], &path[k]);
    let course = if pa.planar_distance(pb) == T::zero() {
        (pb.east - position.east).atan2(pb.north - position.north)
    } else {
        let gamma = (pb.east - pa.east).atan2(pb.north - pa.north);
        let e = cross_track_error(pa, pb, position);
        wrap_angle(gamma - (e / cfg.lookahead).atan())
    };
    Ok(LosOutput { desired_course: course, done, active_waypoint: k })
}

/// Feedback gains of the machine controllers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlGains<T = f64> {
    /// Yaw input per radian of heading error.
    pub heading_p: T,
    /// Yaw input per rad/s of yaw rate.
    pub heading_d: T,
    /// Surge/sway input per meter of station error.
    pub station_p: T,
    /// Surge/sway input per m/s of body velocity while station keeping.
    pub station_d: T,
    /// Surge input per m/s of speed error, on top of the feed-forward.
    pub speed_p: T,
}

impl<T: Real> Default for ControlGains<T> {
    fn default() -> Self {
        Self {
            heading_p: T::one(),
            heading_d: T::one(),
            station_p: T::lit(0.1),
            station_d: T::lit(0.5),
            speed_p: T::zero(),
        }
    }
}

/// What the machine is asked to do.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub enum ManeuverPlan<T = f64> {
    /// Hold a world point and heading.
    StationKeep { point: WorldPoint<T>, heading: T },
    /// Follow a world polyline at constant speed.
    Track { path: Vec<WorldPoint<T>>, speed: T },
}

/// Machine controller for a [`ManeuverPlan`].
#[derive(Debug, Clone, PartialEq)]
pub struct Autopilot<T = f64> {
    pub plan: ManeuverPlan<T>,
    pub follower: FollowerConfig<T>,
    pub gains: ControlGains<T>,
    active: usize,
    /// Latched once the track is complete; the vessel then holds its final point.
    finished: Option<(WorldPoint<T>, T)>,
}

impl<T: Real> Autopilot<T> {
    pub fn new(plan: ManeuverPlan<T>, follower: FollowerConfig<T>, gains: ControlGains<T>) -> Result<Self> {
        follower.validate()?;
        if let ManeuverPlan::Track { path, speed } = &plan {
            if path.is_empty() {
                return Err(Error::invalid("track plan needs at least one point"));
            }
            if !(*speed >= T::zero()) {
                return Err(Error::invalid("track speed must be non-negative"));
            }
        }
        Ok(Self { plan, follower, gains, active: 1, finished: None })
    }

    pub fn active_waypoint(&self) -> usize {
        match self.plan {
            ManeuverPlan::StationKeep { .. } => 0,
            ManeuverPlan::Track { .. } => self.active,
        }
    }

    pub fn is_done(&self) -> bool {
        self.finished.is_some()
    }

    fn heading_command(&self, state: &SimState<T>, desired: T) -> T {
        let err = wrap_angle(desired - state.heading);
        self.gains.heading_p * err - self.gains.heading_d * state.yaw_rate
    }

    fn station_command(&self, state: &SimState<T>, point: &WorldPoint<T>, heading: T) -> Wrench<T> {
        let dn = point.north - state.north;
        let de = point.east - state.east;
        let (s, c) = state.heading.sin_cos();
        let ex = c * dn + s * de;
        let ey = -s * dn + c * de;
        let g = &self.gains;
        Wrench::new(
            g.station_p * ex - g.station_d * state.surge,
            g.station_p * ey - g.station_d * state.sway,
            self.heading_command(state, heading),
        )
        .clamped()
    }

    /// Machine input for this tick and whether the plan just completed.
    pub fn command(&mut self, state: &SimState<T>) -> Result<(Wrench<T>, bool)> {
        if let Some((p, h)) = self.finished {
            return Ok((self.station_command(state, &p, h), false));
        }
        match &self.plan {
            ManeuverPlan::StationKeep { point, heading } => Ok((self.station_command(state, point, *heading), false)),
            ManeuverPlan::Track { path, speed } => {
                let out = los_guidance(path, self.active, &state.position(), &self.follower)?;
                self.active = out.active_waypoint;
                if out.done {
                    let hold = (*path.last().expect("non-empty"), state.heading);
                    self.finished = Some(hold);
                    return Ok((self.station_command(state, &hold.0, hold.1), true));
                }
                let surge = *speed + self.gains.speed_p * (*speed - state.surge);
                let w = Wrench::new(surge, T::zero(), self.heading_command(state, out.desired_course));
                Ok((w.clamped(), false))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(n: f64, e: f64) -> WorldPoint {
        WorldPoint::planar(n, e)
    }

    #[test]
    fn on_path_course_is_bearing() {
        let path = [wp(0.0, 0.0), wp(100.0, 100.0)];
        let out = los_guidance(&path, 1, &wp(20.0, 20.0), &FollowerConfig::default()).unwrap();
        assert!((out.desired_course - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(!out.done);
    }

    #[test]
    fn offset_equal_to_lookahead_gives_45_degrees() {
        let path = [wp(0.0, 0.0), wp(100.0, 0.0)];
        let cfg = FollowerConfig::default();
        let out = los_guidance(&path, 1, &wp(30.0, 10.0), &cfg).unwrap();
        assert!((out.desired_course + std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let left = los_guidance(&path, 1, &wp(30.0, -10.0), &cfg).unwrap();
        assert!((left.desired_course - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn done_within_radius_and_advance() {
        let path = [wp(0.0, 0.0), wp(10.0, 0.0), wp(10.0, 0.0), wp(20.0, 0.0)];
        let cfg = FollowerConfig::default();
        assert!(los_guidance(&path, 1, &wp(13.0, 0.0), &cfg).unwrap().done);
        let out = los_guidance(&path, 1, &wp(5.0, 0.0), &cfg).unwrap();
        assert_eq!(out.active_waypoint, 3);
        assert!(out.desired_course.abs() < 1e-12);
        assert!(los_guidance::<f64>(&[], 1, &wp(0.0, 0.0), &cfg).is_err());
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5f64) + 0.5).abs() < 1e-15);
        assert!(wrap_angle(-std::f64::consts::PI) > 0.0);
    }
}
