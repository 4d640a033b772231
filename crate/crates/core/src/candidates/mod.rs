//! Straight motion-primitive candidates: annulus sampling, projection,
//! pixel-space gating, farthest-point thinning, indexing and world anchoring.

mod font;
pub mod overlay;
mod thinning;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{body_to_world, project_body_to_pixel, BodyPoint, CameraModel, NavPose, PixelPoint, WorldPoint};
use crate::scalar::Real;
use crate::water::WaterGrid;

pub use overlay::{encode_png, render_overlay, OverlayStyle};
pub use thinning::farthest_point_thin;

/// Sampling and gating parameters. Defaults for the annulus radii, half-angle,
/// raw count and per-line sample count are artifact choices; `d_min = 40 px`
/// and `k = 15` are the operating values of the method.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct SamplingParams<T = f64> {
    pub anchor: BodyPoint<T>,
    pub r_min: T,
    pub r_max: T,
    /// Forward half-angle, radians.
    pub phi_max: T,
    pub n_raw: usize,
    pub n_samples_per_line: usize,
    pub d_min: T,
    pub k: usize,
    pub delta_px: T,
    pub rng_seed: u64,
}

impl<T: Real> Default for SamplingParams<T> {
    fn default() -> Self {
        Self {
            anchor: BodyPoint::planar(T::lit(4.0), T::zero()),
            r_min: T::lit(8.0),
            r_max: T::lit(40.0),
            phi_max: T::lit(60f64.to_radians()),
            n_raw: 600,
            n_samples_per_line: 24,
            d_min: T::lit(40.0),
            k: 15,
            delta_px: T::zero(),
            rng_seed: 0,
        }
    }
}

impl<T: Real> SamplingParams<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > T::zero() && self.r_min < self.r_max) {
            return Err(Error::invalid("require 0 < r_min < r_max"));
        }
        if !(self.phi_max > T::zero() && self.phi_max <= T::FRAC_PI_2()) {
            return Err(Error::invalid("require 0 < phi_max <= pi/2"));
        }
        if self.n_samples_per_line < 2 {
            return Err(Error::invalid("need at least 2 samples per line"));
        }
        if self.k < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.d_min >= T::zero()) || !(self.delta_px >= T::zero()) {
            return Err(Error::invalid("d_min and delta_px must be non-negative"));
        }
        Ok(())
    }
}

/// Outcome of gating one primitive.
#[derive(Debug, Clone, PartialEq)]
pub struct GateResult<T = f64> {
    pub retained: bool,
    pub first_visible_index: Option<usize>,
    pub endpoint_pixel: Option<PixelPoint<T>>,
    pub samples_pixel: Vec<Option<PixelPoint<T>>>,
    /// Smallest clearance over the visible samples; `None` when unbounded.
    pub min_clearance: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Candidate<T = f64> {
    pub id: usize,
    pub endpoint_body: BodyPoint<T>,
    pub samples_body: Vec<BodyPoint<T>>,
    pub samples_pixel: Vec<Option<PixelPoint<T>>>,
    pub first_visible_index: usize,
    pub endpoint_pixel: PixelPoint<T>,
    pub polyline_world: Vec<WorldPoint<T>>,
    /// Smallest pixel clearance along the visible samples; `None` = unbounded.
    pub min_clearance: Option<T>,
}

impl<T: Real> Candidate<T> {
    /// Bearing of the endpoint seen from `anchor`, positive to starboard.
    pub fn bearing_from(&self, anchor: &BodyPoint<T>) -> T {
        (self.endpoint_body.y - anchor.y).atan2(self.endpoint_body.x - anchor.x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelPosition<T = f64> {
    pub id: usize,
    pub u: T,
    pub v: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct CandidateSet<T = f64> {
    pub candidates: Vec<Candidate<T>>,
    pub t_alert: T,
    pub anchor_pose: NavPose<T>,
    pub overlay_meta: Vec<LabelPosition<T>>,
    pub params: SamplingParams<T>,
    pub seed: u64,
    pub n_survivors: usize,
}

impl<T: Real> CandidateSet<T> {
    /// Number of indexed candidates; valid choices are `0..=k()`.
    pub fn k(&self) -> usize {
        self.candidates.len()
    }

    pub fn get(&self, id: usize) -> Option<&Candidate<T>> {
        id.checked_sub(1).and_then(|i| self.candidates.get(i))
    }
}

/// Draws `n_raw` endpoints uniformly in radius and bearing around the anchor.
pub fn sample_endpoints<T: Real>(params: &SamplingParams<T>) -> Vec<BodyPoint<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(params.rng_seed);
    let (r_lo, r_span) = (params.r_min, params.r_max - params.r_min);
    (0..params.n_raw)
        .map(|_| {
            let ur: f64 = rng.random();
            let up: f64 = rng.random();
            let r = r_lo + r_span * T::lit(ur);
            let phi = params.phi_max * T::lit(2.0 * up - 1.0);
            BodyPoint::planar(params.anchor.x + r * phi.cos(), params.anchor.y + r * phi.sin())
        })
        .collect()
}

/// `n` evenly spaced samples from `start` to `end`, both included.
pub fn discretize<T: Real>(start: &BodyPoint<T>, end: &BodyPoint<T>, n: usize) -> Vec<BodyPoint<T>> {
    let last = T::from_usize_lossy(n.max(2) - 1);
    (0..n)
        .map(|i| {
            if i + 1 == n {
                return *end;
            }
            let s = T::from_usize_lossy(i) / last;
            BodyPoint {
                x: start.x + (end.x - start.x) * s,
                y: start.y + (end.y - start.y) * s,
                z: start.z + (end.z - start.z) * s,
            }
        })
        .collect()
}

/// Gates one discretised primitive against water membership and the `d_min`
/// clearance margin on every visible sample from the first visible one to the
/// endpoint. The endpoint itself must be visible.
pub fn gate_primitive<T: Real>(
    camera: &CameraModel<T>,
    grid: &WaterGrid<T>,
    line: &[BodyPoint<T>],
    d_min: T,
) -> GateResult<T> {
    let samples_pixel: Vec<_> = line.iter().map(|p| project_body_to_pixel(camera, p)).collect();
    let first_visible_index = samples_pixel.iter().position(Option::is_some);
    let endpoint_pixel = samples_pixel.last().copied().flatten();
    let mut result = GateResult {
        retained: false,
        first_visible_index,
        endpoint_pixel,
        samples_pixel,
        min_clearance: None,
    };
    let (Some(k0), Some(_)) = (first_visible_index, endpoint_pixel) else {
        return result;
    };
    if line.len() < 2 {
        return result;
    }

    let mut min_clear: Option<T> = None;
    for px in result.samples_pixel[k0..].iter().flatten() {
        let Some((c, r)) = px.cell() else { return result };
        let (Some(true), Some(d)) = (grid.is_water(c, r), grid.clearance_at(c, r)) else {
            return result;
        };
        if !(d >= d_min) {
            return result;
        }
        if d.is_finite() {
            min_clear = Some(min_clear.map_or(d, |m| m.min(d)));
        }
    }
    result.retained = true;
    result.min_clearance = min_clear;
    result
}

/// Full generation pipeline at alert time: sample → discretise → project →
/// gate → thin → index `1..=K` in thinning order → anchor to the world frame.
///
/// An empty result is legal and means only station-keeping is available.
pub fn generate_candidates<T: Real>(
    grid: &WaterGrid<T>,
    camera: &CameraModel<T>,
    pose_at_alert: &NavPose<T>,
    params: &SamplingParams<T>,
) -> Result<CandidateSet<T>> {
    params.validate()?;
    if grid.width() != camera.width() || grid.height() != camera.height() {
        return Err(Error::DimensionMismatch(format!(
            "grid {}×{} vs camera {}×{}",
            grid.width(),
            grid.height(),
            camera.width(),
            camera.height()
        )));
    }

    let mut survivors = Vec::new();
    for endpoint in sample_endpoints(params) {
        let line = discretize(&params.anchor, &endpoint, params.n_samples_per_line);
        let gate = gate_primitive(camera, grid, &line, params.d_min);
        if gate.retained {
            survivors.push((endpoint, line, gate));
        }
    }

    let endpoint_pixels: Vec<_> = survivors
        .iter()
        .map(|(_, _, g)| g.endpoint_pixel.expect("retained primitives have a visible endpoint"))
        .collect();
    let order = farthest_point_thin(&endpoint_pixels, params.k, params.delta_px);

    let candidates: Vec<Candidate<T>> = order
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let (endpoint, line, gate) = &survivors[i];
            Candidate {
                id: rank + 1,
                endpoint_body: *endpoint,
                polyline_world: line.iter().map(|p| body_to_world(pose_at_alert, p)).collect(),
                samples_body: line.clone(),
                samples_pixel: gate.samples_pixel.clone(),
                first_visible_index: gate.first_visible_index.expect("retained"),
                endpoint_pixel: gate.endpoint_pixel.expect("retained"),
                min_clearance: gate.min_clearance,
            }
        })
        .collect();

    let overlay_meta = candidates
        .iter()
        .map(|c| LabelPosition { id: c.id, u: c.endpoint_pixel.u, v: c.endpoint_pixel.v })
        .collect();

    Ok(CandidateSet {
        candidates,
        t_alert: pose_at_alert.timestamp(),
        anchor_pose: *pose_at_alert,
        overlay_meta,
        params: *params,
        seed: params.rng_seed,
        n_survivors: survivors.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::world_to_body;
    use crate::water::{clearance_map, Mask};

    fn camera() -> CameraModel {
        CameraModel::forward_looking(
            500.0, 500.0, 320.0, 240.0, 640, 480,
            BodyPoint { x: 2.0, y: 0.0, z: -2.0 }, 0.17,
        )
        .unwrap()
    }

    #[test]
    fn empty_draw() {
        let p = SamplingParams::<f64> { n_raw: 0, ..Default::default() };
        assert!(sample_endpoints(&p).is_empty());
    }

    #[test]
    fn draws_respect_annulus_and_are_deterministic() {
        let p = SamplingParams::<f64> { n_raw: 10_000, rng_seed: 7, ..Default::default() };
        let a = sample_endpoints(&p);
        assert_eq!(a.len(), 10_000);
        for e in &a {
            let (dx, dy) = (e.x - p.anchor.x, e.y - p.anchor.y);
            let r = dx.hypot(dy);
            assert!(r >= p.r_min - 1e-9 && r <= p.r_max + 1e-9);
            assert!(dy.atan2(dx).abs() <= p.phi_max + 1e-12);
        }
        assert_eq!(a, sample_endpoints(&p));
    }

    #[test]
    fn discretize_endpoints() {
        let l = discretize::<f64>(&BodyPoint::planar(4.0, 0.0), &BodyPoint::planar(14.0, 5.0), 11);
        assert_eq!(l.len(), 11);
        assert_eq!(l[0], BodyPoint::planar(4.0, 0.0));
        assert_eq!(l[10], BodyPoint::planar(14.0, 5.0));
        assert!((l[5].x - 9.0).abs() < 1e-12 && (l[5].y - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unobstructed_line_is_retained() {
        let cam = camera();
        let grid = clearance_map(&Mask::filled(640, 480, true).unwrap());
        let line = discretize(&BodyPoint::planar(12.0, 0.0), &BodyPoint::planar(20.0, 1.0), 8);
        let g = gate_primitive(&cam, &grid, &line, 40.0);
        assert!(g.retained);
        assert_eq!(g.first_visible_index, Some(0));
        assert_eq!(g.min_clearance, None);
    }

    #[test]
    fn endpoint_outside_frame_rejects() {
        let cam = camera();
        let grid = clearance_map(&Mask::filled(640, 480, true).unwrap());
        // endpoint far to starboard projects beyond the right edge
        let line = discretize(&BodyPoint::planar(12.0, 0.0), &BodyPoint::planar(12.0, 30.0), 8);
        let g = gate_primitive(&cam, &grid, &line, 0.0);
        assert!(g.endpoint_pixel.is_none());
        assert!(!g.retained);
    }

    #[test]
    fn saturation_with_all_water() {
        let cam = camera();
        let grid = clearance_map(&Mask::filled(640, 480, true).unwrap());
        let pose = NavPose::planar(100.0, 50.0, 0.3, 12.5);
        let set = generate_candidates(&grid, &cam, &pose, &SamplingParams { rng_seed: 3, ..Default::default() }).unwrap();
        assert_eq!(set.k(), 15);
        assert_eq!(set.t_alert, 12.5);
        for (i, c) in set.candidates.iter().enumerate() {
            assert_eq!(c.id, i + 1);
            for (b, w) in c.samples_body.iter().zip(&c.polyline_world) {
                let back = world_to_body(&pose, w);
                assert!(b.distance(&back) < 1e-9);
            }
        }
    }

    #[test]
    fn non_water_above_band_gives_empty_set() {
        let cam = camera();
        let mask = crate::water::apply_bottom_band(&Mask::filled(640, 480, false).unwrap(), 8).unwrap();
        let grid = clearance_map(&mask);
        let set = generate_candidates(&grid, &cam, &NavPose::identity(), &SamplingParams::default()).unwrap();
        assert_eq!(set.k(), 0);
        assert!(set.get(1).is_none());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let grid = clearance_map::<f64>(&Mask::filled(320, 240, true).unwrap());
        assert!(generate_candidates(&grid, &camera(), &NavPose::identity(), &SamplingParams::default()).is_err());
    }

    #[test]
    fn params_validation() {
        let bad = SamplingParams::<f64> { r_min: 10.0, r_max: 5.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SamplingParams::<f64> { n_samples_per_line: 1, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = SamplingParams::<f64> { k: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let json = r#"{"k": 5}"#;
        let p: SamplingParams = serde_json::from_str(json).unwrap();
        assert_eq!(p.k, 5);
        assert_eq!(p.n_raw, 600);
    }
}
