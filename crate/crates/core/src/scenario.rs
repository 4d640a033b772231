//! Scenario files: one JSON document per scene. Relative paths resolve
//! against the scenario file's directory.
//!
//! ```json
//! {
//!   "scene_id": "harbor-01",
//!   "image": "harbor-01.png",
//!   "mask": {"path": "harbor-01-mask.png", "water_is_bright": true, "threshold": 128, "bottom_band_rows": 8},
//!   "camera": "camera.json",
//!   "pose": {"north": 0.0, "east": 0.0, "yaw": 0.0},
//!   "sampling": {"k": 15, "d_min": 40.0},
//!   "hazard": {"north": 10.0, "east": 0.0},
//!   "ratings": "ratings.csv",
//!   "policy": "Keep clear of the diver-down flag.",
//!   "label": {"anomaly": "diver"}
//! }
//! ```
//!
//! `camera` may also be an inline calibration object and `pose` a full
//! `{R_nb, r_nb, timestamp}` object.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::candidates::{generate_candidates, CandidateSet, SamplingParams};
use crate::error::{Error, Result};
use crate::eval::{load_ratings, HazardAnnotation, RaterData};
use crate::frames::{CameraCalibration, CameraModel, NavPose, NavPoseFile, WorldPoint};
use crate::scalar::Real;
use crate::water::{apply_bottom_band, clearance_map, Mask, MaskSource, WaterGrid};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyLabel {
    Nominal,
    Anomaly(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum CameraSpec {
    File(PathBuf),
    Inline(CameraCalibration<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum PoseSpec {
    Planar {
        north: f64,
        east: f64,
        /// Radians, clockwise from north.
        yaw: f64,
        #[serde(default)]
        timestamp: f64,
    },
    Full(NavPoseFile<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scene_id: String,
    #[serde(default)]
    image: Option<PathBuf>,
    mask: MaskSource,
    camera: CameraSpec,
    pose: PoseSpec,
    #[serde(default)]
    sampling: Option<SamplingParams<f64>>,
    #[serde(default)]
    hazard: Option<WorldPoint<f64>>,
    #[serde(default)]
    ratings: Option<PathBuf>,
    #[serde(default)]
    policy: Option<String>,
    #[serde(default = "nominal")]
    label: AnomalyLabel,
}

fn nominal() -> AnomalyLabel {
    AnomalyLabel::Nominal
}

/// A validated scene.
#[derive(Debug, Clone)]
pub struct Scenario<T = f64> {
    pub scene_id: String,
    pub path: PathBuf,
    pub image_path: Option<PathBuf>,
    pub mask_source: MaskSource,
    /// Mask with the bottom band already applied.
    pub mask: Mask,
    pub camera: CameraModel<T>,
    pub pose: NavPose<T>,
    pub sampling: SamplingParams<T>,
    pub hazard: Option<HazardAnnotation<T>>,
    pub ratings: Option<RaterData>,
    pub policy: Option<String>,
    pub label: AnomalyLabel,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_json<V: serde::de::DeserializeOwned>(path: &Path) -> Result<V> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::MissingFile(path.to_path_buf())),
        Err(e) => return Err(Error::io(format!("read {}", path.display()), e)),
    };
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn cast<T: Real>(v: f64) -> T {
    T::from_f64(v).unwrap_or_else(T::nan)
}

fn cast_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| cast(x)).collect()
}

fn cast_sampling<T: Real>(p: &SamplingParams<f64>) -> SamplingParams<T> {
    SamplingParams {
        anchor: crate::frames::BodyPoint { x: cast(p.anchor.x), y: cast(p.anchor.y), z: cast(p.anchor.z) },
        r_min: cast(p.r_min),
        r_max: cast(p.r_max),
        phi_max: cast(p.phi_max),
        n_raw: p.n_raw,
        n_samples_per_line: p.n_samples_per_line,
        d_min: cast(p.d_min),
        k: p.k,
        delta_px: cast(p.delta_px),
        rng_seed: p.rng_seed,
    }
}

/// Loads and validates a scenario; the error names the first violated check.
pub fn load_scenario<T: Real>(path: &Path) -> Result<Scenario<T>> {
    let file: ScenarioFile = read_json(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    if file.scene_id.trim().is_empty() {
        return Err(Error::invalid(format!("{}: empty scene_id", path.display())));
    }

    let calibration = match &file.camera {
        CameraSpec::File(p) => read_json::<CameraCalibration<f64>>(&resolve(base, p))?,
        CameraSpec::Inline(c) => c.clone(),
    };
    let camera = CameraModel::<T>::try_from(CameraCalibration {
        k: cast_vec(&calibration.k),
        r_cb: cast_vec(&calibration.r_cb),
        t_cb: cast_vec(&calibration.t_cb),
        width: calibration.width,
        height: calibration.height,
    })?;

    let pose = match &file.pose {
        PoseSpec::Planar { north, east, yaw, timestamp } => {
            if ![north, east, yaw, timestamp].iter().all(|v| v.is_finite()) {
                return Err(Error::invalid("pose must be finite"));
            }
            NavPose::planar(cast(*north), cast(*east), cast(*yaw), cast(*timestamp))
        }
        PoseSpec::Full(f) => NavPose::try_from(NavPoseFile { r_nb: cast_vec(&f.r_nb), t_nb: cast_vec(&f.t_nb), timestamp: cast(f.timestamp) })?,
    };

    let mut mask_source = file.mask.clone();
    mask_source.path = resolve(base, &mask_source.path);
    let raw = Mask::load(&mask_source.path, mask_source.threshold, mask_source.water_is_bright)?;
    if (raw.width(), raw.height()) != (camera.width(), camera.height()) {
        return Err(Error::DimensionMismatch(format!(
            "mask {} is {}x{} but the camera declares {}x{}",
            mask_source.path.display(),
            raw.width(),
            raw.height(),
            camera.width(),
            camera.height()
        )));
    }
    let mask = apply_bottom_band(&raw, mask_source.bottom_band_rows)?;

    let image_path = file.image.as_ref().map(|p| resolve(base, p));
    if let Some(p) = &image_path {
        let (w, h) = image::image_dimensions(p).map_err(|source| {
            if p.exists() {
                Error::Image { context: p.display().to_string(), source }
            } else {
                Error::MissingFile(p.clone())
            }
        })?;
        if (w, h) != (camera.width(), camera.height()) {
            return Err(Error::DimensionMismatch(format!(
                "image {} is {w}x{h} but the camera declares {}x{}",
                p.display(),
                camera.width(),
                camera.height()
            )));
        }
    }

    let sampling: SamplingParams<T> = file.sampling.as_ref().map(cast_sampling).unwrap_or_default();
    sampling.validate()?;

    let hazard = file
        .hazard
        .map(|h| HazardAnnotation::new(file.scene_id.clone(), WorldPoint { north: cast(h.north), east: cast(h.east), down: cast(h.down) }))
        .transpose()?;

    let ratings = match &file.ratings {
        None => None,
        Some(p) => {
            let p = resolve(base, p);
            let mut all = load_ratings(&p, Some(sampling.k))?;
            let data = all.remove(&file.scene_id).ok_or_else(|| {
                Error::invalid(format!("{} has no ratings for scene {}", p.display(), file.scene_id))
            })?;
            Some(data)
        }
    };

    Ok(Scenario {
        scene_id: file.scene_id,
        path: path.to_path_buf(),
        image_path,
        mask_source,
        mask,
        camera,
        pose,
        sampling,
        hazard,
        ratings,
        policy: file.policy,
        label: file.label,
    })
}

/// Loads every `*.scene.json` under `dir`, ordered by file name.
pub fn load_corpus<T: Real>(dir: &Path) -> Result<Vec<Scenario<T>>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(format!("list {}", dir.display()), e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".scene.json")))
        .collect();
    paths.sort();
    let scenes: Vec<Scenario<T>> = paths.iter().map(|p| load_scenario(p)).collect::<Result<_>>()?;
    let mut ids: Vec<&str> = scenes.iter().map(|s| s.scene_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::invalid(format!("duplicate scene_id {} in {}", w[0], dir.display())));
    }
    Ok(scenes)
}

impl<T: Real> Scenario<T> {
    pub fn water_grid(&self) -> WaterGrid<T> {
        clearance_map(&self.mask)
    }

    /// Generates the gated, thinned candidate set at the alert pose.
    pub fn candidates(&self) -> Result<CandidateSet<T>> {
        generate_candidates(&self.water_grid(), &self.camera, &self.pose, &self.sampling)
    }

    /// Camera image for overlays, or a flat rendering of the mask when the
    /// scene has no image.
    pub fn background(&self) -> Result<RgbImage> {
        match &self.image_path {
            Some(p) => Ok(image::open(p)
                .map_err(|source| Error::Image { context: p.display().to_string(), source })?
                .to_rgb8()),
            None => Ok(RgbImage::from_fn(self.mask.width(), self.mask.height(), |c, r| {
                if self.mask.get(c, r) {
                    Rgb([40, 90, 140])
                } else {
                    Rgb([110, 110, 100])
                }
            })),
        }
    }
}
