use super::*;
use crate::energy::mechanical_energy;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_PI_2;

fn moving_ee(vx: f64, vy: f64, omega: f64) -> SystemState {
    SystemState {
        ee_twist: Twist2::new(vx, vy, omega),
        ..Default::default()
    }
}

#[test]
fn sector_follows_circular_arc() {
    // ICR at (0, 0.5), radius 0.5, sweeps 0.4 rad in one second
    let z = moving_ee(0.2, 0.0, 0.4);
    let on_arc = |phi: f64| Vec2::new(0.5 * phi.sin(), 0.5 - 0.5 * phi.cos());
    assert!(in_swept_sector(&z, on_arc(0.1), 1.0, 0.02));
    assert!(in_swept_sector(&z, on_arc(0.38), 1.0, 0.02));
    assert!(!in_swept_sector(&z, on_arc(0.5), 1.0, 0.02));
    assert!(!in_swept_sector(&z, on_arc(-0.3), 1.0, 0.02));
    // off the arc radially
    let off = on_arc(0.2) + Vec2::new(0.0, 0.05);
    assert!(!in_swept_sector(&z, off, 1.0, 0.02));
}

#[test]
fn sector_clockwise_mirror() {
    let z = moving_ee(0.2, 0.0, -0.4);
    let on_arc = |phi: f64| Vec2::new(0.5 * phi.sin(), -0.5 + 0.5 * phi.cos());
    assert!(in_swept_sector(&z, on_arc(0.1), 1.0, 0.02));
    assert!(!in_swept_sector(&z, on_arc(0.5), 1.0, 0.02));
}

#[test]
fn sector_straight_strip() {
    let z = moving_ee(0.1, 0.0, 0.0);
    assert!(in_swept_sector(&z, Vec2::new(0.05, 0.01), 1.0, 0.02));
    assert!(!in_swept_sector(&z, Vec2::new(0.05, 0.05), 1.0, 0.02));
    assert!(!in_swept_sector(&z, Vec2::new(-0.05, 0.0), 1.0, 0.02));
    assert!(!in_swept_sector(&z, Vec2::new(0.15, 0.0), 1.0, 0.02));
    // the footprint disk covers points just behind the end-effector
    assert!(in_swept_sector(&z, Vec2::new(-0.01, 0.0), 1.0, 0.02));
}

#[test]
fn sector_grows_with_horizon() {
    let z = moving_ee(0.1, 0.05, 0.7);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let p = Vec2::new(
            rand::Rng::gen_range(&mut rng, -0.3..0.3),
            rand::Rng::gen_range(&mut rng, -0.3..0.3),
        );
        if in_swept_sector(&z, p, 0.5, 0.03) {
            assert!(in_swept_sector(&z, p, 1.0, 0.03));
        }
    }
}

#[test]
fn toppling_slip_bound() {
    let spec = make_scenario(&ScenarioConfig::default_for("toppling").unwrap()).unwrap();
    let mut z = spec.initial_state();
    z.object_twist = Twist2::new(0.2, 0.0, 0.0);
    assert!(!spec.capture_contains(&spec.initial, &z));
    z.object_twist = Twist2::new(0.05, 0.0, 0.0);
    assert!(spec.capture_contains(&spec.initial, &z));
    // pure rotation about the bottom-left corner does not slip there
    let c = z.object_pose.position();
    let pivot = Vec2::new(-0.025, 0.0);
    let w = 2.0;
    let v = Vec2::new(w * (c.y - pivot.y), -w * (c.x - pivot.x));
    z.object_pose = Pose2::new(c.x, c.y, 0.3);
    z.object_twist = Twist2::new(v.x, v.y, w);
    let low = spec.object_world_vertices(&z);
    let lowest = low
        .iter()
        .fold(low[0], |a, b| if b.y < a.y { *b } else { a });
    let r = lowest - z.object_pose.position();
    let slip = (z.object_twist.vx - w * r.y).abs();
    assert!((spec.pivot_slip_speed(&z) - slip).abs() < 1e-12);
}

#[test]
fn toppling_orientation_goal() {
    let spec = make_scenario(&ScenarioConfig::default_for("toppling").unwrap()).unwrap();
    let mut z = spec.initial_state();
    z.object_pose.theta = FRAC_PI_2 - 0.01;
    assert!(spec.success_contains(&z));
    z.object_pose.theta = FRAC_PI_2 - 0.06;
    assert!(!spec.success_contains(&z));
    z.object_pose.theta = 0.0;
    assert!(!spec.success_contains(&z));
}

#[test]
fn displaced_cube_is_uncaptured() {
    let c = BalanceConfig {
        cube_offset: 0.1,
        ..Default::default()
    };
    match make_balance_scenario(&c) {
        Err(ScenarioError::InitiallyUncaptured(msg)) => assert!(msg.contains("balance")),
        other => panic!("expected an uncaptured error, got {other:?}"),
    }
}

#[test]
fn flat_support_is_valid() {
    let c = BalanceConfig {
        slope: 0.0,
        ..Default::default()
    };
    let spec = make_balance_scenario(&c).unwrap();
    assert_eq!(spec.world.gravity(), Vec2::new(-0.0, -9.81));
}

#[test]
fn rejects_bad_configs() {
    let bad_slope = BalanceConfig {
        slope: 2.0,
        ..Default::default()
    };
    assert!(matches!(
        make_balance_scenario(&bad_slope),
        Err(ScenarioError::Invalid(_))
    ));
    let bad_spring = TopplingConfig {
        stiffness: -1.0,
        ..Default::default()
    };
    assert!(matches!(
        make_toppling_scenario(&bad_spring),
        Err(ScenarioError::Invalid(_))
    ));
    let bad_bounds = PushingConfig {
        control: ControlBoundsConfig::new(-1.0, 0.0),
        ..Default::default()
    };
    assert!(make_pushing_scenario(&bad_bounds).is_err());
}

#[test]
fn cube_rests_on_still_inclined_support() {
    let c = BalanceConfig {
        accel: 0.0,
        ..Default::default()
    };
    let spec = make_balance_scenario(&c).unwrap();
    let run = spec.rollout(0).unwrap();
    let start = run.states[0].object_pose;
    let end = run.states.last().unwrap().object_pose;
    assert!((end.position() - start.position()).norm() < 1e-3);
    assert!(end.theta.abs() < 1e-3);
    assert!(run
        .states
        .iter()
        .all(|z| spec.capture_contains(&spec.initial, z)));
}

#[test]
fn default_balance_transport_succeeds() {
    let spec = make_scenario(&ScenarioConfig::default_for("balance").unwrap()).unwrap();
    let run = spec.rollout(0).unwrap();
    let last = run.states.last().unwrap();
    assert!(spec.success_contains(last), "final {:?}", last.object_pose);
    assert!(spec.capture_contains(&spec.initial, last));
}

#[test]
fn default_pushing_reaches_wall() {
    let spec = make_scenario(&ScenarioConfig::default_for("pushing").unwrap()).unwrap();
    let run = spec.rollout(0).unwrap();
    assert!(
        run.states.iter().any(|z| spec.success_contains(z)),
        "final {:?}",
        run.states.last().unwrap().object_pose
    );
}

#[test]
fn default_toppling_tips_box() {
    let spec = make_scenario(&ScenarioConfig::default_for("toppling").unwrap()).unwrap();
    let run = spec.rollout(0).unwrap();
    let last = run.states.last().unwrap();
    assert!(spec.success_contains(last), "final {:?}", last.object_pose);
}

#[test]
fn short_anchor_travel_leaves_box_upright() {
    let c = TopplingConfig {
        anchor_travel: 0.01,
        ..Default::default()
    };
    let spec = make_toppling_scenario(&c).unwrap();
    let run = spec.rollout(0).unwrap();
    let last = run.states.last().unwrap();
    // the box may lean on the fingertip but must not tip over
    assert!(
        last.object_pose.theta.abs() < 0.3,
        "final {:?}",
        last.object_pose
    );
    assert!(!spec.success_contains(last));
}

#[test]
fn well_disk_rests_inside() {
    let spec = make_scenario(&ScenarioConfig::default_for("well").unwrap()).unwrap();
    assert!(spec.ee.is_none());
    let run = spec.rollout(0).unwrap();
    let last = run.states.last().unwrap();
    assert!((last.object_pose.position() - spec.initial.object_pose.position()).norm() < 1e-3);
    assert!(spec.capture_contains(&spec.initial, last));
    let mut above = *last;
    above.object_pose.y = 0.05 + 0.1 + 1e-3;
    assert!(!spec.capture_contains(&spec.initial, &above));
}

#[test]
fn free_fingertip_trades_spring_and_kinetic_energy() {
    let spec = make_scenario(&ScenarioConfig::default_for("toppling").unwrap()).unwrap();
    let mut z = spec.initial_state();
    z.ee_twist = Twist2::new(0.3, 0.0, 0.0);
    let (pose, twist) = spec.propagate_ee(&z, 0.02).unwrap();
    assert!(pose.x > z.ee_pose.x);
    assert!(twist.vx < 0.3);
    // light damping bleeds a little energy over a short interval
    let k = 200.0;
    let m = 0.05;
    let anchor = z.ee_anchor.unwrap();
    let energy = |p: Pose2, t: Twist2| {
        let d = p.position() - anchor;
        0.5 * m * t.linear().norm_sq() + 0.5 * k * d.norm_sq() - m * -9.81 * p.y
    };
    let e0 = energy(z.ee_pose, z.ee_twist);
    let e1 = energy(pose, twist);
    assert!(e1 <= e0 + 1e-9 && e1 > 0.9 * e0 - 1e-3, "{e0} -> {e1}");
}

#[test]
fn constant_velocity_ee_moves_linearly() {
    let spec = make_scenario(&ScenarioConfig::default_for("pushing").unwrap()).unwrap();
    let mut z = spec.initial_state();
    z.ee_pose = Pose2::new(0.0, 0.0, 0.0);
    z.ee_twist = Twist2::new(0.0, 0.1, 0.0);
    let (pose, twist) = spec.propagate_ee(&z, 0.5).unwrap();
    assert!((pose.y - 0.05).abs() < 1e-12 && pose.x.abs() < 1e-12);
    assert_eq!(twist, z.ee_twist);
}

#[test]
fn scripted_rollouts_are_deterministic() {
    for name in SCENARIO_NAMES {
        let spec = make_scenario(&ScenarioConfig::default_for(name).unwrap()).unwrap();
        let a = spec.rollout(11).unwrap();
        let b = spec.rollout(11).unwrap();
        assert_eq!(a.states, b.states, "{name}");
    }
}

#[test]
fn capture_test_is_pure() {
    let spec = make_scenario(&ScenarioConfig::default_for("pushing").unwrap()).unwrap();
    let z = spec.initial_state();
    let first = spec.capture_contains(&z, &z);
    for _ in 0..3 {
        assert_eq!(spec.capture_contains(&z, &z), first);
    }
    let mut nan = z;
    nan.object_pose.x = f64::NAN;
    assert!(!spec.capture_contains(&z, &nan));
    assert!(!spec.success_contains(&nan));
}

#[test]
fn randomized_configs_build() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for name in SCENARIO_NAMES {
        let base = ScenarioConfig::default_for(name).unwrap();
        for _ in 0..20 {
            let c = base.randomized(&mut rng);
            make_scenario(&c).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }
}

#[test]
fn world_state_round_trip() {
    let spec = make_scenario(&ScenarioConfig::default_for("toppling").unwrap()).unwrap();
    let z = spec.initial_state();
    let ws = spec.to_world_state(&z);
    assert_eq!(spec.from_world_state(&ws), z);
    let e = mechanical_energy(&spec.world, &ws, spec.datum_height);
    assert!(e.total.is_finite());
}
