use super::*;
use crate::energy::mechanical_energy;
use crate::geometry::{Pose2, Shape, Twist2, Vec2};

const G: Vec2 = Vec2::new(0.0, -9.81);

fn ground() -> BodyDef {
    BodyDef::fixed(Shape::rect(20.0, 1.0))
}

fn energy(w: &World, s: &WorldState) -> f64 {
    mechanical_energy(w, s, 0.0).total
}

#[test]
fn resting_box_reports_one_contact() {
    let w = build_world(
        vec![ground(), BodyDef::dynamic(Shape::rect(1.0, 1.0), 1.0)],
        vec![],
        G,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.0, -0.5, 0.0);
    s.poses[1] = Pose2::new(0.0, 0.5, 0.0);
    let (s1, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
    assert_eq!(rep.contacts.len(), 1);
    let c = &rep.contacts[0];
    assert_eq!(c.body_pair, (0, 1));
    assert!((c.normal.norm() - 1.0).abs() < 1e-9);
    assert!(rep.w_noncons <= 1e-12);

    // stays put for a second, carrying its weight
    let mut s = s1;
    for k in 0..240 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert_eq!(rep.contacts.len(), 1);
        if k > 10 {
            let f = rep.contacts[0].normal_force;
            assert!((f - 9.81).abs() < 1e-6, "step {k}: {f}");
        }
        s = n;
    }
    assert!((s.poses[1].y - 0.5).abs() < 1e-3, "y = {}", s.poses[1].y);
    assert!(s.poses[1].x.abs() < 1e-9);
}

#[test]
fn empty_world_steps() {
    let w = build_world(vec![], vec![], G).unwrap();
    let s = w.initial_state();
    let (s1, rep) = step(&w, &s, &[], 0.01).unwrap();
    assert!(rep.contacts.is_empty());
    assert_eq!(rep.w_noncons, 0.0);
    assert!((s1.time - 0.01).abs() < 1e-15);
}

#[test]
fn rejects_bad_bodies() {
    let collinear = Shape::polygon(vec![
        Vec2::new(0.0, 0.0),
        Vec2::new(1.0, 0.0),
        Vec2::new(2.0, 0.0),
    ]);
    let err = build_world(vec![BodyDef::fixed(collinear)], vec![], G).unwrap_err();
    assert!(err.to_string().contains("degenerate shape"), "{err}");
    let mut b = BodyDef::dynamic(Shape::circle(1.0), 1.0);
    b.mass = 0.0;
    assert!(build_world(vec![b], vec![], G).is_err());
}

#[test]
fn free_body_coasts() {
    let w = build_world(
        vec![BodyDef::dynamic(Shape::circle(0.1), 1.0)],
        vec![],
        Vec2::ZERO,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.twists[0] = Twist2::new(1.0, 0.0, 0.0);
    let (s1, rep) = step(&w, &s, &[], 0.1).unwrap();
    assert!((s1.poses[0].x - 0.1).abs() < 1e-15);
    assert_eq!(s1.twists[0], s.twists[0]);
    assert_eq!(rep.w_noncons, 0.0);
}

#[test]
fn constant_force_work_closes() {
    let w = build_world(
        vec![BodyDef::dynamic(Shape::circle(0.1), 1.0)],
        vec![],
        Vec2::ZERO,
    )
    .unwrap();
    let s = w.initial_state();
    let (s1, rep) = step(&w, &s, &[Wrench::new(2.0, 0.0, 0.0)], 0.5).unwrap();
    assert!((s1.twists[0].vx - 1.0).abs() < 1e-15);
    // midpoint position update: dx = 0.25 m, so the force does 0.5 J = ½mv²
    assert!((s1.poses[0].x - 0.25).abs() < 1e-15);
    assert!((rep.w_control - 0.5).abs() < 1e-15);
    assert!((energy(&w, &s1) - energy(&w, &s) - rep.w_control).abs() < 1e-15);
}

fn ball_and_wall(e: f64) -> (World, WorldState) {
    let ball = BodyDef::dynamic(Shape::circle(0.1), 1.0)
        .with_friction(0.0)
        .with_restitution(e);
    let wall = BodyDef::fixed(Shape::rect(0.2, 2.0)).with_friction(0.0);
    let w = build_world(vec![ball, wall], vec![], Vec2::ZERO).unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.0, 0.0, 0.0);
    s.poses[1] = Pose2::new(1.0, 0.0, 0.0);
    s.twists[0] = Twist2::new(2.0, 0.0, 0.0);
    (w, s)
}

#[test]
fn elastic_bounce() {
    let (w, mut s) = ball_and_wall(1.0);
    let e0 = energy(&w, &s);
    let mut total_noncons = 0.0;
    for _ in 0..240 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        total_noncons += rep.w_noncons;
        s = n;
    }
    assert!(
        (s.twists[0].vx + 2.0).abs() < 1e-6,
        "vx = {}",
        s.twists[0].vx
    );
    assert!(total_noncons.abs() < 1e-9);
    assert!((energy(&w, &s) - e0).abs() < 1e-9);
}

#[test]
fn inelastic_impact_is_dissipation() {
    let (w, mut s) = ball_and_wall(0.0);
    let e0 = energy(&w, &s);
    let mut total = 0.0;
    for _ in 0..240 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert!(rep.w_noncons <= 1e-12);
        total += rep.w_noncons;
        s = n;
    }
    assert!(s.twists[0].vx.abs() < 1e-9);
    assert!((total + e0).abs() < 1e-9);
    // no penetration beyond slop
    assert!(s.poses[0].x <= 0.8 + 1e-9);
}

#[test]
fn sliding_box_stops_and_friction_obeys_cone() {
    let w = build_world(
        vec![
            ground().with_friction(0.5),
            BodyDef::dynamic(Shape::rect(0.2, 0.2), 1.0).with_friction(0.5),
        ],
        vec![],
        G,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.0, -0.5, 0.0);
    s.poses[1] = Pose2::new(0.0, 0.1, 0.0);
    s.twists[1] = Twist2::new(1.0, 0.0, 0.0);
    let e0 = energy(&w, &s);
    let mut noncons = 0.0;
    let mut numerical = 0.0;
    for _ in 0..480 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert!(rep.w_noncons <= 1e-12);
        for c in &rep.contacts {
            assert!(c.tangent_force.abs() <= c.mu * c.normal_force + 1e-6);
        }
        noncons += rep.w_noncons;
        numerical += rep.w_numerical;
        s = n;
    }
    assert!(s.twists[1].vx.abs() < 1e-3);
    // distance ~ v²/(2μg)
    let expected = 1.0 / (2.0 * 0.5 * 9.81);
    assert!(
        (s.poses[1].x - expected).abs() < 0.01,
        "x = {}",
        s.poses[1].x
    );
    assert!((energy(&w, &s) - e0 - noncons - numerical).abs() < 1e-9);
}

#[test]
fn tunneling_is_reported() {
    let w = build_world(
        vec![ground(), BodyDef::dynamic(Shape::rect(0.2, 0.2), 1.0)],
        vec![],
        G,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.0, -0.5, 0.0);
    s.poses[1] = Pose2::new(0.0, 0.05, 0.0);
    assert!(matches!(
        step(&w, &s, &[], DEFAULT_DT),
        Err(SimError::Tunneling { a: 0, b: 1, .. })
    ));
}

#[test]
fn distance_examples() {
    let w = build_world(
        vec![
            BodyDef::fixed(Shape::circle(1.0)),
            BodyDef::fixed(Shape::circle(1.0)),
            BodyDef::fixed(Shape::rect(1.0, 1.0)),
            BodyDef::fixed(Shape::circle(0.5)),
        ],
        vec![],
        G,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[1] = Pose2::new(3.0, 0.0, 0.0);
    assert!((min_body_distance(&w, &s, 0, 1) - 1.0).abs() < 1e-12);
    s.poses[3] = Pose2::new(2.0, 0.0, 0.0);
    assert!((min_body_distance(&w, &s, 2, 3) - 1.0).abs() < 1e-12);
    s.poses[3] = Pose2::new(0.3, 0.0, 0.0);
    assert_eq!(min_body_distance(&w, &s, 2, 3), 0.0);
}

#[test]
fn kinematic_pusher_work_is_control() {
    let w = build_world(
        vec![
            BodyDef::kinematic(Shape::circle(0.02)),
            BodyDef::dynamic(Shape::rect(0.08, 0.05), 0.2),
        ],
        vec![],
        Vec2::ZERO,
    )
    .unwrap()
    .with_ground_friction(GroundFriction {
        mu: 0.4,
        normal_accel: 9.81,
    });
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.0, -0.06, 0.0);
    s.poses[1] = Pose2::new(0.0, 0.0, 0.0);
    s.twists[0] = Twist2::new(0.0, 0.1, 0.0);
    let e0 = energy(&w, &s);
    let (mut wc, mut wn, mut wx) = (0.0, 0.0, 0.0);
    for _ in 0..480 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert!(rep.w_noncons <= 1e-12);
        wc += rep.w_control;
        wn += rep.w_noncons;
        wx += rep.w_numerical;
        s = n;
    }
    assert!(s.poses[1].y > 0.1, "object pushed: y = {}", s.poses[1].y);
    assert!(wc > 0.0 && wn < 0.0);
    assert!((energy(&w, &s) - e0 - wc - wn - wx).abs() < 1e-9);
}

#[test]
fn spring_oscillation_conserves_energy() {
    let spring = SpringJointDef {
        body_index: 0,
        anchor_world: Vec2::ZERO,
        stiffness: 200.0,
        damping: 0.0,
        rest_length: 0.0,
    };
    let w = build_world(
        vec![BodyDef::dynamic(Shape::circle(0.01), 0.05)],
        vec![spring],
        Vec2::ZERO,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.02, 0.0, 0.0);
    let e0 = energy(&w, &s);
    for _ in 0..480 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert_eq!(rep.w_noncons, 0.0);
        s = n;
        assert!((energy(&w, &s) - e0).abs() < 1e-9);
    }
}

#[test]
fn damped_moving_anchor_closes() {
    let spring = SpringJointDef {
        body_index: 0,
        anchor_world: Vec2::ZERO,
        stiffness: 200.0,
        damping: 1.5,
        rest_length: 0.01,
    };
    let w = build_world(
        vec![BodyDef::dynamic(Shape::circle(0.01), 0.05)],
        vec![spring],
        G,
    )
    .unwrap();
    let mut s = w.initial_state();
    s.poses[0] = Pose2::new(0.03, 0.0, 0.0);
    s.anchor_velocities[0] = Vec2::new(-0.1, 0.05);
    let e0 = energy(&w, &s);
    let (mut wc, mut wn, mut wx) = (0.0, 0.0, 0.0);
    for _ in 0..480 {
        let (n, rep) = step(&w, &s, &[], DEFAULT_DT).unwrap();
        assert!(rep.w_noncons <= 1e-12);
        wc += rep.w_control;
        wn += rep.w_noncons;
        wx += rep.w_numerical;
        s = n;
    }
    assert!(wn < 0.0);
    assert!(wx.abs() < 1e-9, "numerical residual {wx}");
    assert!((energy(&w, &s) - e0 - wc - wn - wx).abs() < 1e-9);
}

#[test]
fn mirrored_scene_mirrors_trajectory() {
    let build = |sign: f64| {
        let w = build_world(
            vec![
                ground().with_friction(0.6),
                BodyDef::dynamic(Shape::circle(0.1), 1.0)
                    .with_friction(0.6)
                    .with_restitution(0.5),
            ],
            vec![],
            G,
        )
        .unwrap();
        let mut s = w.initial_state();
        s.poses[0] = Pose2::new(0.0, -0.5, 0.0);
        s.poses[1] = Pose2::new(sign * 0.3, 0.5, 0.0);
        s.twists[1] = Twist2::new(sign * 1.5, -1.0, sign * 2.0);
        (w, s)
    };
    let (w, mut a) = build(1.0);
    let (_, mut b) = build(-1.0);
    for _ in 0..480 {
        a = step(&w, &a, &[], DEFAULT_DT).unwrap().0;
        b = step(&w, &b, &[], DEFAULT_DT).unwrap().0;
        let (pa, pb) = (a.poses[1], b.poses[1]);
        assert!((pa.x + pb.x).abs() < 1e-9);
        assert!((pa.y - pb.y).abs() < 1e-9);
        assert!((pa.theta + pb.theta).abs() < 1e-9);
    }
}

#[test]
fn deterministic() {
    let (w, s) = ball_and_wall(0.7);
    let run = || {
        let mut s = s.clone();
        let mut out = Vec::new();
        for _ in 0..300 {
            let (n, rep) = step(
                &w,
                &s,
                &[Wrench::new(0.3, 0.1, 0.01), Wrench::default()],
                DEFAULT_DT,
            )
            .unwrap();
            out.push((n.clone(), rep));
            s = n;
        }
        out
    };
    assert_eq!(run(), run());
}
