use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::frames::{world_to_body, BodyPoint, WorldPoint};
use crate::scalar::Real;

/// Bow anchor every maneuver starts from, in body coordinates (m).
pub const BOW_ANCHOR: (f64, f64) = (4.0, 0.0);

/// A single stationary hazard on the water plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct HazardAnnotation<T = f64> {
    pub scene_id: String,
    pub h: WorldPoint<T>,
}

impl<T: Real> HazardAnnotation<T> {
    pub fn new(scene_id: impl Into<String>, h: WorldPoint<T>) -> Result<Self> {
        if !(h.north.is_finite() && h.east.is_finite() && h.down.is_finite()) {
            return Err(Error::invalid("hazard coordinates must be finite"));
        }
        Ok(Self { scene_id: scene_id.into(), h })
    }
}

/// Change in hazard separation after `horizon` seconds of straight-line motion
/// from `start` toward `endpoint` at `speed`, stopping at the endpoint.
/// `endpoint = None` is station keeping and always yields 0. Negative values
/// mean the vessel closed on the hazard.
pub fn risk_relief<T: Real>(start: &BodyPoint<T>, endpoint: Option<&BodyPoint<T>>, hazard: &BodyPoint<T>, horizon: T, speed: T) -> Result<T> {
    if !(horizon >= T::zero()) || !(speed >= T::zero()) {
        return Err(Error::invalid("horizon and speed must be non-negative"));
    }
    let Some(end) = endpoint else { return Ok(T::zero()) };
    let length = start.distance(end);
    let travel = (speed * horizon).min(length);
    let at = if length == T::zero() || travel == T::zero() {
        *start
    } else {
        let f = travel / length;
        BodyPoint::planar(start.x + (end.x - start.x) * f, start.y + (end.y - start.y) * f)
    };
    Ok(at.distance(hazard) - start.distance(hazard))
}

/// Risk relief of a selector choice, starting from the set's anchor and with
/// the hazard converted into the frozen body frame.
pub fn risk_relief_for_choice<T: Real>(set: &CandidateSet<T>, choice: usize, hazard: &WorldPoint<T>, horizon: T, speed: T) -> Result<T> {
    let endpoint = match choice {
        0 => None,
        id => Some(
            set.get(id)
                .map(|c| c.endpoint_body)
                .ok_or_else(|| Error::invalid(format!("choice {id} is not in 0..={}", set.k())))?,
        ),
    };
    let h = world_to_body(&set.anchor_pose, hazard);
    risk_relief(&set.params.anchor, endpoint.as_ref(), &BodyPoint::planar(h.x, h.y), horizon, speed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approach_case() {
        let x0 = BodyPoint::<f64>::planar(4.0, 0.0);
        let h = BodyPoint::planar(10.0, 0.0);
        let d = risk_relief(&x0, Some(&BodyPoint::planar(10.0, 0.0)), &h, 10.0, 0.514).unwrap();
        assert!((d + 5.14).abs() < 1e-9);
        assert_eq!(risk_relief(&x0, None, &h, 60.0, 0.514).unwrap(), 0.0);
        assert_eq!(risk_relief(&x0, Some(&BodyPoint::planar(30.0, 5.0)), &h, 0.0, 0.514).unwrap(), 0.0);
    }

    #[test]
    fn flee_saturates_at_path_length() {
        let x0 = BodyPoint::<f64>::planar(4.0, 0.0);
        let h = BodyPoint::planar(10.0, 0.0);
        let end = BodyPoint::planar(-6.0, 0.0);
        let d = risk_relief(&x0, Some(&end), &h, 60.0, 0.514).unwrap();
        assert!((d - 10.0).abs() < 1e-12);
        assert!(risk_relief(&x0, Some(&end), &h, -1.0, 0.514).is_err());
    }
}
