use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Geometry-only reference selectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselinePolicy {
    KeepStation,
    KeepCourse,
    KeepStarboard,
    Forward,
    Clearance,
}

impl BaselinePolicy {
    pub const ALL: [BaselinePolicy; 5] =
        [Self::KeepStation, Self::KeepCourse, Self::KeepStarboard, Self::Forward, Self::Clearance];

    pub fn label(&self) -> &'static str {
        match self {
            Self::KeepStation => "Keep-station",
            Self::KeepCourse => "Keep-course",
            Self::KeepStarboard => "Keep-starboard",
            Self::Forward => "Forward",
            Self::Clearance => "Clearance",
        }
    }
}

impl fmt::Display for BaselinePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BaselinePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown baseline {s:?}")))
    }
}

/// Picks an id in `0..=K` by a fixed geometric rule. Bearings are measured from
/// the sampling anchor, positive to starboard. Ties go to the smaller id.
pub fn baseline_select<T: Real>(policy: BaselinePolicy, set: &CandidateSet<T>) -> usize {
    if set.candidates.is_empty() {
        return 0;
    }
    let anchor = set.params.anchor;
    // score to maximise; strict improvement keeps the smaller id on ties
    let score = |c: &crate::candidates::Candidate<T>| -> T {
        match policy {
            BaselinePolicy::KeepStation => T::zero(),
            BaselinePolicy::KeepCourse => -c.bearing_from(&anchor).abs(),
            BaselinePolicy::KeepStarboard => c.bearing_from(&anchor),
            BaselinePolicy::Forward => c.endpoint_body.x,
            BaselinePolicy::Clearance => c.min_clearance.unwrap_or(T::infinity()),
        }
    };
    if policy == BaselinePolicy::KeepStation {
        return 0;
    }
    let mut best = &set.candidates[0];
    let mut best_score = score(best);
    for c in &set.candidates[1..] {
        let s = score(c);
        if s > best_score {
            best = c;
            best_score = s;
        }
    }
    best.id
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::candidates::{Candidate, SamplingParams};
    use crate::frames::{BodyPoint, NavPose, PixelPoint};

    fn cand(id: usize, bearing_deg: f64, r: f64, clearance: Option<f64>) -> Candidate {
        let phi = bearing_deg.to_radians();
        Candidate {
            id,
            endpoint_body: BodyPoint::planar(4.0 + r * phi.cos(), r * phi.sin()),
            samples_body: vec![],
            samples_pixel: vec![],
            first_visible_index: 0,
            endpoint_pixel: PixelPoint::new(0.0, 0.0),
            polyline_world: vec![],
            min_clearance: clearance,
        }
    }

    fn set(cands: Vec<Candidate>) -> CandidateSet {
        CandidateSet {
            candidates: cands,
            t_alert: 0.0,
            anchor_pose: NavPose::identity(),
            overlay_meta: vec![],
            params: SamplingParams::default(),
            seed: 0,
            n_survivors: 0,
        }
    }

    #[test]
    fn empty_set_is_station_for_all() {
        let s = set(vec![]);
        for p in BaselinePolicy::ALL {
            assert_eq!(baseline_select(p, &s), 0);
        }
    }

    #[test]
    fn bearings() {
        let s = set(vec![cand(1, -20.0, 10.0, None), cand(2, 5.0, 10.0, None), cand(3, 30.0, 10.0, None)]);
        assert_eq!(baseline_select(BaselinePolicy::KeepCourse, &s), 2);
        assert_eq!(baseline_select(BaselinePolicy::KeepStarboard, &s), 3);
        assert_eq!(baseline_select(BaselinePolicy::KeepStation, &s), 0);
        // forward: x = 4 + 10 cos(phi), largest at 5°
        assert_eq!(baseline_select(BaselinePolicy::Forward, &s), 2);
    }

    #[test]
    fn clearance_prefers_widest_margin() {
        let s = set(vec![cand(1, 0.0, 10.0, Some(41.0)), cand(2, 10.0, 10.0, Some(45.0))]);
        assert_eq!(baseline_select(BaselinePolicy::Clearance, &s), 2);
        let s = set(vec![cand(1, 0.0, 10.0, Some(45.0)), cand(2, 10.0, 10.0, Some(45.0))]);
        assert_eq!(baseline_select(BaselinePolicy::Clearance, &s), 1);
    }

    #[test]
    fn policy_names_round_trip() {
        for p in BaselinePolicy::ALL {
            assert_eq!(p.label().parse::<BaselinePolicy>().unwrap(), p);
        }
    }
}
