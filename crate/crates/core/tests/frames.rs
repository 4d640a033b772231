//! Frame transforms against a 4×4 homogeneous-matrix oracle.

use asv_fallback::frames::{body_to_world, world_to_body, BodyPoint, CameraModel, NavPose};
use asv_fallback::linalg::{Mat3, Vec3};
use asv_fallback::project_body_to_pixel;
use proptest::prelude::*;

type H = [[f64; 4]; 4];

fn rot(yaw: f64, pitch: f64, roll: f64) -> [[f64; 3]; 3] {
    let (sy, cy) = yaw.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sr, cr) = roll.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

/// `[R | -R r; 0 1]`, the map x ↦ R(x − r).
fn homogeneous(r: &[[f64; 3]; 3], t: [f64; 3]) -> H {
    let mut h = [[0.0; 4]; 4];
    for i in 0..3 {
        h[i][..3].copy_from_slice(&r[i]);
        h[i][3] = -(0..3).map(|j| r[i][j] * t[j]).sum::<f64>();
    }
    h[3][3] = 1.0;
    h
}

fn apply(h: &H, p: [f64; 3]) -> [f64; 3] {
    let x = [p[0], p[1], p[2], 1.0];
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = (0..4).map(|j| h[i][j] * x[j]).sum();
    }
    [out[0] / out[3], out[1] / out[3], out[2] / out[3]]
}

fn invert_rigid(h: &H) -> H {
    let mut inv = [[0.0; 4]; 4];
    for i in 0..3 {
        for j in 0..3 {
            inv[i][j] = h[j][i];
        }
        inv[i][3] = -(0..3).map(|j| h[j][i] * h[j][3]).sum::<f64>();
    }
    inv[3][3] = 1.0;
    inv
}

fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
    a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol * (1.0 + y.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn body_world_matches_homogeneous(
        yaw in -3.2f64..3.2, pitch in -0.5f64..0.5, roll in -0.5f64..0.5,
        t in prop::array::uniform3(-100.0f64..100.0),
        p in prop::array::uniform3(-50.0f64..50.0),
    ) {
        let r = rot(yaw, pitch, roll);
        let pose = NavPose::new(Mat3(r), Vec3::new(t[0], t[1], t[2]), 0.0).unwrap();
        let h = homogeneous(&r, t);
        let w = body_to_world(&pose, &BodyPoint { x: p[0], y: p[1], z: p[2] });
        prop_assert!(close([w.north, w.east, w.down], apply(&h, p), 1e-9));
        let back = world_to_body(&pose, &w);
        prop_assert!(close([back.x, back.y, back.z], apply(&invert_rigid(&h), [w.north, w.east, w.down]), 1e-9));
        prop_assert!(close([back.x, back.y, back.z], p, 1e-9));
    }

    #[test]
    fn pixel_matches_homogeneous(
        pitch in 0.0f64..0.4,
        mount in prop::array::uniform3(-2.0f64..2.0),
        p in prop::array::uniform3(-30.0f64..30.0),
        f in 200.0f64..800.0,
    ) {
        let cam = CameraModel::forward_looking(f, f, 320.0, 240.0, 640, 480, BodyPoint { x: mount[0], y: mount[1], z: mount[2] }, pitch).unwrap();
        let h = homogeneous(&cam.rotation_body_to_camera().0, mount);
        let pc = apply(&h, p);
        let k = cam.intrinsics().0;
        let got = project_body_to_pixel(&cam, &BodyPoint { x: p[0], y: p[1], z: p[2] });
        if pc[2] <= 0.0 {
            prop_assert!(got.is_none());
        } else {
            let u = (k[0][0] * pc[0] + k[0][1] * pc[1] + k[0][2] * pc[2]) / pc[2];
            let v = (k[1][1] * pc[1] + k[1][2] * pc[2]) / pc[2];
            let inside = (u + 0.5).floor() >= 0.0 && (v + 0.5).floor() >= 0.0 && (u + 0.5).floor() < 640.0 && (v + 0.5).floor() < 480.0;
            match got {
                Some(px) => {
                    prop_assert!(inside);
                    prop_assert!((px.u - u).abs() <= 1e-9 * (1.0 + u.abs()) && (px.v - v).abs() <= 1e-9 * (1.0 + v.abs()));
                }
                None => prop_assert!(!inside),
            }
        }
    }
}

#[test]
fn quarter_turn_maps_forward_to_east() {
    let pose = NavPose::planar(10.0, -5.0, std::f64::consts::FRAC_PI_2, 0.0);
    let w = body_to_world(&pose, &BodyPoint::planar(3.0, 0.0));
    assert!((w.north - 10.0).abs() < 1e-12 && (w.east + 2.0).abs() < 1e-12);
    // starboard of an east-facing vessel is south
    let s = body_to_world(&pose, &BodyPoint::planar(0.0, 4.0));
    assert!((s.north - 6.0).abs() < 1e-12 && (s.east + 5.0).abs() < 1e-12);
    let pos = pose.position();
    assert!((pos.north - 10.0).abs() < 1e-12 && (pos.east + 5.0).abs() < 1e-12);
    assert!((pose.heading() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn centre_ray_hits_principal_point() {
    let cam = CameraModel::<f64>::forward_looking(400.0, 400.0, 320.0, 240.0, 640, 480, BodyPoint { x: 1.0, y: 0.0, z: -2.0 }, 0.0).unwrap();
    let px = project_body_to_pixel(&cam, &BodyPoint { x: 41.0, y: 0.0, z: -2.0 }).unwrap();
    assert!((px.u - 320.0).abs() < 1e-12 && (px.v - 240.0).abs() < 1e-12);
    assert!(project_body_to_pixel(&cam, &BodyPoint { x: -5.0, y: 0.0, z: -2.0 }).is_none());
    let starboard = project_body_to_pixel(&cam, &BodyPoint { x: 41.0, y: 10.0, z: -2.0 }).unwrap();
    assert!((starboard.u - 420.0).abs() < 1e-9);
}
