//! Coordinate frames, calibrated projection and body↔world transforms.
//!
//! Frames: body `{b}` (x forward, y starboard, z down, water plane at z = 0),
//! camera `{c}` (third axis is depth), world `{n}` (local NED), image plane Ω
//! (integer pixel grid of the camera's width × height).
//!
//! Extrinsics use the subtract-then-rotate convention throughout:
//! `p_c = R_cb (p_b − r_cb)` and `p_n = R_nb (p_b − r_nb)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

/// Tolerance on `RᵀR − I` accepted for rotation matrices.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyPoint<T = f64> {
    pub x: T,
    pub y: T,
    #[serde(default)]
    pub z: T,
}

impl<T: Real> BodyPoint<T> {
    /// Point on the water plane (z = 0).
    pub fn planar(x: T, y: T) -> Self {
        Self { x, y, z: T::zero() }
    }

    pub fn to_vec(self) -> Vec3<T> {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn from_vec(v: Vec3<T>) -> Self {
        Self { x: v.x(), y: v.y(), z: v.z() }
    }

    pub fn distance(&self, other: &Self) -> T {
        (self.to_vec() - other.to_vec()).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint<T = f64> {
    pub north: T,
    pub east: T,
    #[serde(default)]
    pub down: T,
}

impl<T: Real> WorldPoint<T> {
    pub fn planar(north: T, east: T) -> Self {
        Self { north, east, down: T::zero() }
    }

    pub fn to_vec(self) -> Vec3<T> {
        Vec3::new(self.north, self.east, self.down)
    }

    pub fn from_vec(v: Vec3<T>) -> Self {
        Self { north: v.x(), east: v.y(), down: v.z() }
    }

    /// Horizontal distance, ignoring `down`.
    pub fn planar_distance(&self, other: &Self) -> T {
        (self.north - other.north).hypot(self.east - other.east)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PixelPoint<T = f64> {
    pub u: T,
    pub v: T,
}

impl<T: Real> PixelPoint<T> {
    pub fn new(u: T, v: T) -> Self {
        Self { u, v }
    }

    pub fn distance_sq(&self, other: &Self) -> T {
        let du = self.u - other.u;
        let dv = self.v - other.v;
        du * du + dv * dv
    }

    /// Nearest integer grid cell `(column, row)`.
    pub fn cell(&self) -> Option<(i64, i64)> {
        Some((self.u.to_cell()?, self.v.to_cell()?))
    }
}

/// Camera calibration file layout: row-major `K` and `R_cb`, `r_cb`, image size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraCalibration<T = f64> {
    #[serde(rename = "K")]
    pub k: Vec<T>,
    #[serde(rename = "R_cb")]
    pub r_cb: Vec<T>,
    #[serde(rename = "r_cb")]
    pub t_cb: Vec<T>,
    pub width: u32,
    pub height: u32,
}

/// Calibrated pinhole camera rigidly mounted on the vessel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "CameraCalibration<T>",
    into = "CameraCalibration<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct CameraModel<T = f64> {
    intrinsics: Mat3<T>,
    rotation_body_to_camera: Mat3<T>,
    translation: Vec3<T>,
    width: u32,
    height: u32,
}

impl<T: Real> CameraModel<T> {
    pub fn new(
        intrinsics: Mat3<T>,
        rotation_body_to_camera: Mat3<T>,
        translation: Vec3<T>,
        width: u32,
        height: u32,
    ) -> Result<Self> {
        let k = &intrinsics.0;
        if !intrinsics.is_finite() || !rotation_body_to_camera.is_finite() || !translation.is_finite() {
            return Err(Error::invalid("camera parameters must be finite"));
        }
        let upper = k[1][0] == T::zero() && k[2][0] == T::zero() && k[2][1] == T::zero();
        if !upper || k[2][2] != T::one() {
            return Err(Error::invalid("K must be upper-triangular with K[2][2] = 1"));
        }
        if k[0][0] <= T::zero() || k[1][1] <= T::zero() {
            return Err(Error::invalid("K focal entries must be positive"));
        }
        if rotation_body_to_camera.orthonormality_error() > T::lit(ORTHONORMAL_TOL) {
            return Err(Error::invalid("R_cb is not orthonormal"));
        }
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        Ok(Self { intrinsics, rotation_body_to_camera, translation, width, height })
    }

    /// Forward-looking camera: optical axis along body x, image x to starboard,
    /// image y down, pitched down by `pitch_down` radians, optical centre at
    /// `mount` in the body frame.
    #[allow(clippy::too_many_arguments)]
    pub fn forward_looking(
        fx: T,
        fy: T,
        cx: T,
        cy: T,
        width: u32,
        height: u32,
        mount: BodyPoint<T>,
        pitch_down: T,
    ) -> Result<Self> {
        let (o, z) = (T::one(), T::zero());
        let k = Mat3([[fx, z, cx], [z, fy, cy], [z, z, o]]);
        let axes = Mat3([[z, o, z], [z, z, o], [o, z, z]]);
        let rot = Mat3::rot_x(pitch_down) * axes;
        Self::new(k, rot, mount.to_vec(), width, height)
    }

    pub fn intrinsics(&self) -> &Mat3<T> {
        &self.intrinsics
    }
    pub fn rotation_body_to_camera(&self) -> &Mat3<T> {
        &self.rotation_body_to_camera
    }
    pub fn translation(&self) -> &Vec3<T> {
        &self.translation
    }
    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Body point expressed in the camera frame.
    pub fn body_to_camera(&self, p: &BodyPoint<T>) -> Vec3<T> {
        self.rotation_body_to_camera.mul_vec(&(p.to_vec() - self.translation))
    }

    /// Real-valued projection and depth without the frustum/Ω test.
    pub fn project_unchecked(&self, p: &BodyPoint<T>) -> (PixelPoint<T>, T) {
        let pc = self.body_to_camera(p);
        let h = self.intrinsics.mul_vec(&pc);
        (PixelPoint::new(h.x() / h.z(), h.y() / h.z()), pc.z())
    }

    /// Whether a real pixel rounds to a cell inside Ω.
    pub fn in_image(&self, px: &PixelPoint<T>) -> bool {
        match px.cell() {
            Some((c, r)) => c >= 0 && r >= 0 && c < self.width as i64 && r < self.height as i64,
            None => false,
        }
    }
}

impl<T: Real> TryFrom<CameraCalibration<T>> for CameraModel<T> {
    type Error = Error;

    fn try_from(c: CameraCalibration<T>) -> Result<Self> {
        let k = Mat3::from_row_major(&c.k).ok_or_else(|| Error::invalid("K needs 9 numbers"))?;
        let r = Mat3::from_row_major(&c.r_cb).ok_or_else(|| Error::invalid("R_cb needs 9 numbers"))?;
        if c.t_cb.len() != 3 {
            return Err(Error::invalid("r_cb needs 3 numbers"));
        }
        let t = Vec3::new(c.t_cb[0], c.t_cb[1], c.t_cb[2]);
        CameraModel::new(k, r, t, c.width, c.height)
    }
}

impl<T: Real> From<CameraModel<T>> for CameraCalibration<T> {
    fn from(m: CameraModel<T>) -> Self {
        CameraCalibration {
            k: m.intrinsics.to_row_major().to_vec(),
            r_cb: m.rotation_body_to_camera.to_row_major().to_vec(),
            t_cb: m.translation.0.to_vec(),
            width: m.width,
            height: m.height,
        }
    }
}

/// Projects a body-frame point to the image. `None` when the point is behind
/// the camera (`depth ≤ 0`) or rounds to a cell outside Ω. The returned pixel is
/// not rounded.
pub fn project_body_to_pixel<T: Real>(camera: &CameraModel<T>, p: &BodyPoint<T>) -> Option<PixelPoint<T>> {
    let (px, depth) = camera.project_unchecked(p);
    if depth > T::zero() && px.u.is_finite() && px.v.is_finite() && camera.in_image(&px) {
        Some(px)
    } else {
        None
    }
}

/// Navigation pose `T_{N←B}`: `p_n = R_nb (p_b − r_nb)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "NavPoseFile<T>",
    into = "NavPoseFile<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct NavPose<T = f64> {
    rotation_body_to_world: Mat3<T>,
    translation: Vec3<T>,
    timestamp: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NavPoseFile<T = f64> {
    #[serde(rename = "R_nb")]
    pub r_nb: Vec<T>,
    #[serde(rename = "r_nb")]
    pub t_nb: Vec<T>,
    pub timestamp: T,
}

impl<T: Real> NavPose<T> {
    pub fn new(rotation_body_to_world: Mat3<T>, translation: Vec3<T>, timestamp: T) -> Result<Self> {
        if !rotation_body_to_world.is_finite() || !translation.is_finite() || !timestamp.is_finite() {
            return Err(Error::invalid("pose must be finite"));
        }
        if rotation_body_to_world.orthonormality_error() > T::lit(ORTHONORMAL_TOL) {
            return Err(Error::invalid("R_nb is not orthonormal"));
        }
        Ok(Self { rotation_body_to_world, translation, timestamp })
    }

    pub fn identity() -> Self {
        Self { rotation_body_to_world: Mat3::identity(), translation: Vec3::zero(), timestamp: T::zero() }
    }

    /// Planar pose of a vessel at (`north`, `east`) with heading `yaw`.
    /// `r_nb` is stored in the body frame so that the body origin maps to the
    /// given position.
    pub fn planar(north: T, east: T, yaw: T, timestamp: T) -> Self {
        let rot = Mat3::rot_z(yaw);
        let pos = Vec3::new(north, east, T::zero());
        let translation = -(rot.transpose().mul_vec(&pos));
        Self { rotation_body_to_world: rot, translation, timestamp }
    }

    pub fn rotation_body_to_world(&self) -> &Mat3<T> {
        &self.rotation_body_to_world
    }
    pub fn translation(&self) -> &Vec3<T> {
        &self.translation
    }
    pub fn timestamp(&self) -> T {
        self.timestamp
    }

    /// World position of the body origin.
    pub fn position(&self) -> WorldPoint<T> {
        body_to_world(self, &BodyPoint::default())
    }

    /// Heading (yaw) of the body x axis in the world frame.
    pub fn heading(&self) -> T {
        let m = &self.rotation_body_to_world.0;
        m[1][0].atan2(m[0][0])
    }
}

impl<T: Real> TryFrom<NavPoseFile<T>> for NavPose<T> {
    type Error = Error;
    fn try_from(f: NavPoseFile<T>) -> Result<Self> {
        let r = Mat3::from_row_major(&f.r_nb).ok_or_else(|| Error::invalid("R_nb needs 9 numbers"))?;
        if f.t_nb.len() != 3 {
            return Err(Error::invalid("r_nb needs 3 numbers"));
        }
        NavPose::new(r, Vec3::new(f.t_nb[0], f.t_nb[1], f.t_nb[2]), f.timestamp)
    }
}

impl<T: Real> From<NavPose<T>> for NavPoseFile<T> {
    fn from(p: NavPose<T>) -> Self {
        NavPoseFile {
            r_nb: p.rotation_body_to_world.to_row_major().to_vec(),
            t_nb: p.translation.0.to_vec(),
            timestamp: p.timestamp,
        }
    }
}

pub fn body_to_world<T: Real>(pose: &NavPose<T>, p: &BodyPoint<T>) -> WorldPoint<T> {
    WorldPoint::from_vec(pose.rotation_body_to_world.mul_vec(&(p.to_vec() - pose.translation)))
}

pub fn world_to_body<T: Real>(pose: &NavPose<T>, p: &WorldPoint<T>) -> BodyPoint<T> {
    BodyPoint::from_vec(pose.rotation_body_to_world.transpose().mul_vec(&p.to_vec()) + pose.translation)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pinhole_identity() -> CameraModel {
        let k = Mat3([[500.0, 0.0, 320.0], [0.0, 500.0, 240.0], [0.0, 0.0, 1.0]]);
        CameraModel::new(k, Mat3::identity(), Vec3::zero(), 640, 480).unwrap()
    }

    #[test]
    fn principal_point() {
        let cam = pinhole_identity();
        // identity R_cb: body z is the optical axis
        let p = BodyPoint { x: 0.0, y: 0.0, z: 10.0 };
        let px = project_body_to_pixel(&cam, &p).unwrap();
        assert_eq!((px.u, px.v), (320.0, 240.0));
    }

    #[test]
    fn behind_camera_is_absent() {
        let cam = pinhole_identity();
        assert!(project_body_to_pixel(&cam, &BodyPoint { x: 0.0, y: 0.0, z: -3.0 }).is_none());
        assert!(project_body_to_pixel(&cam, &BodyPoint { x: 0.0, y: 0.0, z: 0.0 }).is_none());
    }

    #[test]
    fn outside_frame_is_absent() {
        let cam = pinhole_identity();
        // u = 320 + 500 * 4 / 1 = 2320
        assert!(project_body_to_pixel(&cam, &BodyPoint { x: 4.0, y: 0.0, z: 1.0 }).is_none());
    }

    #[test]
    fn identity_pose_is_identity() {
        let pose = NavPose::<f64>::identity();
        let w = body_to_world(&pose, &BodyPoint::planar(3.0, -2.0));
        assert_eq!(w, WorldPoint::planar(3.0, -2.0));
    }

    #[test]
    fn yaw_90_maps_forward_to_east() {
        let pose = NavPose::new(Mat3::rot_z(std::f64::consts::FRAC_PI_2), Vec3::zero(), 0.0).unwrap();
        let w = body_to_world(&pose, &BodyPoint::planar(1.0, 0.0));
        // rotation oracle: [cos -sin; sin cos] (1, 0) = (0, 1)
        assert!((w.north - 0.0).abs() < 1e-12);
        assert!((w.east - 1.0).abs() < 1e-12);
    }

    #[test]
    fn planar_pose_places_origin() {
        let pose = NavPose::<f64>::planar(10.0, -5.0, 0.7, 2.0);
        let o = pose.position();
        assert!((o.north - 10.0).abs() < 1e-12 && (o.east + 5.0).abs() < 1e-12);
        assert!((pose.heading() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_camera() {
        let k = Mat3([[500.0, 0.0, 320.0], [1.0, 500.0, 240.0], [0.0, 0.0, 1.0]]);
        assert!(CameraModel::new(k, Mat3::identity(), Vec3::zero(), 640, 480).is_err());
        let k = Mat3([[500.0, 0.0, 320.0], [0.0, 500.0, 240.0], [0.0, 0.0, 1.0]]);
        let mut r = Mat3::identity();
        r.0[0][0] = 1.1;
        assert!(CameraModel::new(k, r, Vec3::zero(), 640, 480).is_err());
        assert!(CameraModel::new(k, Mat3::identity(), Vec3::zero(), 0, 480).is_err());
    }

    #[test]
    fn calibration_json_round_trip() {
        let cam = CameraModel::forward_looking(
            500.0, 500.0, 320.0, 240.0, 640, 480,
            BodyPoint { x: 2.0, y: 0.0, z: -2.0 }, 0.17,
        )
        .unwrap();
        let s = serde_json::to_string(&cam).unwrap();
        assert!(s.contains("\"K\"") && s.contains("\"R_cb\"") && s.contains("\"r_cb\""));
        let back: CameraModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cam);
    }

    #[test]
    fn f32_camera_projects() {
        let cam = CameraModel::<f32>::forward_looking(
            500.0, 500.0, 320.0, 240.0, 640, 480,
            BodyPoint { x: 0.0, y: 0.0, z: -2.0 }, 0.0,
        )
        .unwrap();
        let px = project_body_to_pixel(&cam, &BodyPoint::planar(10.0, 0.0)).unwrap();
        assert!((px.u - 320.0).abs() < 1e-4);
        assert!((px.v - 340.0).abs() < 1e-3);
    }
}
