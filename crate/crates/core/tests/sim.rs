use asv_fallback::frames::WorldPoint;
use asv_fallback::sim::{
    blend_coefficients, cross_track_error, run_episode, step, update_alpha, DynamicsConfig, EpisodeConfig, EpisodeEnd,
    JoystickScript, ManeuverPlan, OverrideConfig, OverrideState, SimEvent, SimState, Wrench,
};
use proptest::prelude::*;

fn stick() -> impl Strategy<Value = Wrench> {
    (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5).prop_map(|(a, b, c)| Wrench::new(a, b, c))
}

proptest! {
    #[test]
    fn alpha_stays_in_unit_interval(
        sticks in prop::collection::vec(prop_oneof![Just(Wrench::zero()), stick()], 1..400),
        dt in 0.01f64..0.5,
        ramp in 0.1f64..5.0,
    ) {
        let cfg = OverrideConfig { ramp_time: ramp, ..Default::default() };
        let mut st = OverrideState::default();
        for (i, w) in sticks.iter().enumerate() {
            let next = update_alpha(&st, w, i as f64 * dt, dt, &cfg);
            prop_assert!((0.0..=1.0).contains(&next.alpha));
            if w.max_norm() > cfg.tau_h_min {
                prop_assert!(next.alpha >= st.alpha);
            }
            st = next;
        }
    }

    #[test]
    fn blend_weights_are_bounded(alpha in 0.0f64..=1.0) {
        let (m, h) = blend_coefficients(alpha);
        prop_assert!((0.0..=1.0).contains(&m) && (0.5..=1.0).contains(&h));
        prop_assert!((m + h - (1.5 - 0.5 * alpha)).abs() < 1e-12);
    }

    #[test]
    fn step_converges_to_gain(surge in -1.0f64..1.0, yaw in -1.0f64..1.0) {
        let dyn_cfg = DynamicsConfig { surge_gain: 2.0, ..Default::default() };
        let mut s = SimState::at_rest(0.0, 0.0, 0.0);
        for _ in 0..400 {
            s = step(&s, &Wrench::new(surge, 0.0, yaw), 0.05, &dyn_cfg).unwrap();
        }
        prop_assert!((s.surge - 2.0 * surge).abs() < 1e-6);
        prop_assert!((s.yaw_rate - yaw).abs() < 1e-6);
        prop_assert!((-std::f64::consts::PI..=std::f64::consts::PI).contains(&s.heading));
    }
}

#[test]
fn resting_vessel_stays_put() {
    let s0 = SimState::at_rest(3.0, -2.0, 0.7);
    let mut s = s0;
    for _ in 0..100 {
        s = step(&s, &Wrench::zero(), 0.1, &DynamicsConfig::default()).unwrap();
    }
    assert_eq!((s.north, s.east, s.heading), (s0.north, s0.east, s0.heading));
    assert!(step(&s, &Wrench::zero(), 0.0, &DynamicsConfig::default()).is_err());
}

#[test]
fn los_converges_onto_straight_track() {
    let path = vec![WorldPoint::planar(0.0, 0.0), WorldPoint::planar(150.0, 0.0)];
    let start = SimState::at_rest(0.0, 20.0, 0.3);
    let plan = ManeuverPlan::Track { path: path.clone(), speed: 1.0 };
    let log = run_episode(&start, plan, &JoystickScript::idle(), &EpisodeConfig { t_max: 400.0, ..Default::default() }).unwrap();
    assert_eq!(log.end, EpisodeEnd::PathComplete);
    assert!(log.events().any(|e| *e == SimEvent::PathComplete));
    let late: Vec<f64> = log
        .ticks
        .iter()
        .filter(|r| r.north > 60.0 && r.north < 130.0)
        .map(|r| cross_track_error(&path[0], &path[1], &WorldPoint::planar(r.north, r.east)).abs())
        .collect();
    assert!(!late.is_empty());
    let worst = late.iter().cloned().fold(0.0, f64::max);
    assert!(worst < 0.5, "cross-track error {worst} m after convergence");
    let first = cross_track_error(&path[0], &path[1], &start.position()).abs();
    assert!((first - 20.0).abs() < 1e-12);
}

#[test]
fn held_stick_ends_episode_as_override() {
    let path = vec![WorldPoint::planar(0.0, 0.0), WorldPoint::planar(200.0, 0.0)];
    let script = JoystickScript { segments: vec![asv_fallback::sim::JoystickSegment { start: 2.0, end: 60.0, input: Wrench::new(0.0, 0.0, 0.8) }] };
    let log = run_episode(&SimState::at_rest(0.0, 0.0, 0.0), ManeuverPlan::Track { path, speed: 1.0 }, &script, &EpisodeConfig::default()).unwrap();
    assert_eq!(log.end, EpisodeEnd::Overridden);
    let last = log.ticks.last().unwrap();
    assert!(last.alpha >= 1.0 && (last.t - 5.0).abs() <= 0.05 + 1e-9, "ended at t={} alpha={}", last.t, last.alpha);
}
