use std::f64::consts::PI;

use mpcom::comm::{comm_utility, surrogate, CommParams, Sensor, SurrogateTerm};
use mpcom::dynamics::{linearize, linearize_vector, pose_vector, step_nonlinear, Control};
use mpcom::geometry::{
    normalize_angle, polytope_distance, separating_hyperplane, ConvexPolytope, Pose, Shape, Vec2,
};
use mpcom::radio::{
    eval_los, eval_multizone, generate_radio_map, to_db, ChannelModel, DistanceModel, GridSpec,
    MultiZoneModel, WallSegment, ZoneParams,
};
use mpcom::sim::{Knot, Obstacle};
use proptest::prelude::*;

fn vec2(range: f64) -> impl Strategy<Value = Vec2> {
    (-range..range, -range..range).prop_map(|(x, y)| Vec2::new(x, y))
}

/// Random convex polygon: perturbed regular polygon, rotated and placed.
fn polygon() -> impl Strategy<Value = ConvexPolytope> {
    (3usize..8, 0.2..1.5f64, vec2(5.0), -PI..PI, 0.3..1.7f64).prop_map(
        |(sides, radius, center, heading, stretch)| {
            let base = ConvexPolytope::regular(Vec2::new(0.0, 0.0), radius, sides).unwrap();
            let stretched: Vec<Vec2> = base
                .vertices()
                .iter()
                .map(|v| Vec2::new(v.x * stretch, v.y))
                .collect();
            ConvexPolytope::from_vertices(&stretched)
                .unwrap()
                .transform(&Pose::from_parts(center, heading))
        },
    )
}

fn pose() -> impl Strategy<Value = Pose> {
    (vec2(10.0), -PI..PI).prop_map(|(p, h)| Pose::from_parts(p, h))
}

fn control() -> impl Strategy<Value = Control> {
    (-0.2..1.0f64, -1.0..1.0f64).prop_map(|(v, w)| Control::new(v, w))
}

fn los_sensor(position: Vec2, rho0: f64, lambda: f64) -> Sensor {
    Sensor {
        position,
        params: CommParams::default(),
        model: ChannelModel::Distance(DistanceModel::new(rho0, lambda)),
    }
}

fn small_grid() -> GridSpec {
    GridSpec {
        origin: Vec2::new(-4.0, -4.0),
        resolution: 0.25,
        width: 32,
        height: 32,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_symmetric(p in polygon(), q in polygon()) {
        let d_pq = polytope_distance(&p, &q).distance;
        let d_qp = polytope_distance(&q, &p).distance;
        prop_assert!((d_pq - d_qp).abs() <= 1e-12, "{d_pq} vs {d_qp}");
    }

    #[test]
    fn distance_is_translation_invariant(p in polygon(), q in polygon(), shift in vec2(50.0)) {
        let before = polytope_distance(&p, &q).distance;
        let after = polytope_distance(&p.translate(shift), &q.translate(shift)).distance;
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn distance_matches_witnesses(p in polygon(), q in polygon()) {
        let prox = polytope_distance(&p, &q);
        if prox.distance > 0.0 {
            prop_assert!((prox.p_closest.distance(prox.q_closest) - prox.distance).abs() <= 1e-9);
        }
    }

    #[test]
    fn transform_is_rigid(p in polygon(), pose in pose()) {
        let moved = p.transform(&pose);
        let a = p.vertices();
        let b = moved.vertices();
        prop_assert_eq!(a.len(), b.len());
        // Rotation may change which vertex comes first, so compare sorted
        // pairwise distances.
        let pairwise = |v: &[Vec2]| {
            let mut d: Vec<f64> = (0..v.len())
                .flat_map(|i| (i + 1..v.len()).map(move |j| (i, j)))
                .map(|(i, j)| v[i].distance(v[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d
        };
        for (x, y) in pairwise(a).iter().zip(pairwise(b)) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
        for (n, m) in p.normals().iter().zip(moved.normals()) {
            prop_assert!((n.norm() - m.norm()).abs() <= 1e-12);
        }
    }

    #[test]
    fn separating_margin_equals_distance(p in polygon(), q in polygon()) {
        let d = polytope_distance(&p, &q).distance;
        prop_assume!(d > 1e-6);
        let h = separating_hyperplane(&p, &q).unwrap();
        prop_assert!((h.normal.norm() - 1.0).abs() <= 1e-12);
        prop_assert!(p.vertices().iter().all(|&z| h.normal.dot(z) <= h.offset + 1e-9));
        let margin = q.min_support(h.normal) - h.offset;
        prop_assert!((margin - d).abs() <= 1e-6, "margin {margin} distance {d}");
    }

    #[test]
    fn los_zone_matches_distance_model(
        rho0 in 1e-6..1e-2f64,
        lambda in 2.0..5.0f64,
        alpha2 in 0.0..8.0f64,
        beta2 in 1e-10..1e-4f64,
        robot in vec2(3.0),
    ) {
        let sensor = Vec2::new(0.3, -0.2);
        let model = MultiZoneModel {
            zones: vec![
                ConvexPolytope::rectangle(Vec2::new(-3.0, -3.0), Vec2::new(3.0, 3.0)).unwrap(),
                ConvexPolytope::rectangle(Vec2::new(-10.0, -10.0), Vec2::new(10.0, 10.0)).unwrap(),
            ],
            beta: vec![rho0, beta2],
            alpha: vec![lambda, alpha2],
            sensor,
            d_min: 0.5,
        };
        let los = eval_los(&DistanceModel::new(rho0, lambda), robot, sensor);
        let mz = eval_multizone(&model, robot).unwrap();
        prop_assert!((mz - los).abs() <= 1e-12 * los);
    }

    #[test]
    fn map_gain_is_monotone_in_transmission(
        a in vec2(4.0),
        b in vec2(4.0),
        t_low in 0.01..1.0f64,
        raise in 0.0..1.0f64,
        sensor in vec2(3.0),
    ) {
        prop_assume!(a.distance(b) > 0.1);
        let t_high = t_low + raise * (1.0 - t_low);
        let truth = DistanceModel::new(1e-3, 2.5);
        let map = |t: f64| {
            let wall = WallSegment::new(a, b, t).unwrap();
            generate_radio_map(&[wall], sensor, &small_grid(), &truth).unwrap()
        };
        let low = map(t_low);
        let high = map(t_high);
        for (l, h) in low.gains.iter().zip(&high.gains) {
            prop_assert!(h >= l);
        }
    }

    #[test]
    fn wall_free_map_is_radially_symmetric(lambda in 2.0..5.0f64, rho0 in 1e-6..1e-1f64) {
        // Sensor on a cell corner so the grid is symmetric under quarter turns.
        let grid = small_grid();
        let map = generate_radio_map(&[], Vec2::new(0.0, 0.0), &grid, &DistanceModel::new(rho0, lambda)).unwrap();
        let n = grid.width;
        for j in 0..grid.height {
            for i in 0..n {
                let g = map.gain(i, j);
                for (ri, rj) in [(n - 1 - i, j), (i, n - 1 - j), (j, i)] {
                    let h = map.gain(ri, rj);
                    prop_assert!((g - h).abs() <= 1e-9 * g);
                }
                prop_assert!(to_db(g).is_finite());
            }
        }
    }

    #[test]
    fn surrogate_lower_bounds_utility(
        rho0 in 1e-6..1e-2f64,
        lambda in 1.0..5.0f64,
        anchor in vec2(6.0),
        state in vec2(6.0),
        heading in -PI..PI,
    ) {
        let sensor = los_sensor(Vec2::new(0.5, 0.5), rho0, lambda);
        let anchor = Pose::from_parts(anchor, 0.0);
        let state = Pose::from_parts(state, heading);
        let term = SurrogateTerm::at_anchor(anchor.position, &sensor).unwrap();
        prop_assume!(term.log_argument(state.position) > 1e-6);
        let phi = comm_utility(&state, &sensor).unwrap();
        let lower = surrogate(&state, &anchor, &sensor).unwrap();
        prop_assert!(lower <= phi + 1e-9, "{lower} > {phi}");
    }

    #[test]
    fn surrogate_is_tight_at_anchor(
        rho0 in 1e-6..1e-2f64,
        lambda in 1.0..5.0f64,
        anchor in vec2(6.0),
    ) {
        let sensor = los_sensor(Vec2::new(-1.0, 2.0), rho0, lambda);
        let anchor = Pose::from_parts(anchor, 0.3);
        let phi = comm_utility(&anchor, &sensor).unwrap();
        let at = surrogate(&anchor, &anchor, &sensor).unwrap();
        prop_assert!((at - phi).abs() <= 1e-12 * phi.abs());
    }

    #[test]
    fn surrogate_is_midpoint_concave(
        rho0 in 1e-6..1e-2f64,
        lambda in 1.0..5.0f64,
        anchor in vec2(6.0),
        s1 in vec2(6.0),
        s2 in vec2(6.0),
    ) {
        let sensor = los_sensor(Vec2::new(0.0, 0.0), rho0, lambda);
        let term = SurrogateTerm::at_anchor(anchor, &sensor).unwrap();
        let in_domain = |p: Vec2| term.log_argument(p) > 1e-6;
        // The domain is a disc, so checking both ends keeps the segment inside.
        prop_assume!(in_domain(s1) && in_domain(s2));
        let mid = s1.lerp(s2, 0.5);
        let f = |p: Vec2| term.value(p).unwrap();
        prop_assert!(f(mid) >= 0.5 * f(s1) + 0.5 * f(s2) - 1e-9);
    }

    #[test]
    fn reciprocal_tangent_inequality(x in 1e-6..1e6f64, y in 1e-6..1e6f64) {
        let tangent = 1.0 / y - (x - y) / (y * y);
        prop_assert!(1.0 / x >= tangent - 1e-12 * tangent.abs().max(1.0 / x));
    }

    #[test]
    fn utility_ignores_heading(p in vec2(6.0), h1 in -PI..PI, h2 in -PI..PI) {
        let sensor = los_sensor(Vec2::new(1.0, 1.0), 1e-3, 2.2);
        let a = comm_utility(&Pose::from_parts(p, h1), &sensor).unwrap();
        let b = comm_utility(&Pose::from_parts(p, h2), &sensor).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn frozen_zone_term_uses_anchor_zone(anchor in vec2(2.0)) {
        let sensor = Sensor {
            position: Vec2::new(0.0, 0.0),
            params: CommParams::default(),
            model: ChannelModel::MultiZone(MultiZoneModel {
                zones: vec![
                    ConvexPolytope::rectangle(Vec2::new(-5.0, -5.0), Vec2::new(0.0, 5.0)).unwrap(),
                    ConvexPolytope::rectangle(Vec2::new(0.0, -5.0), Vec2::new(5.0, 5.0)).unwrap(),
                ],
                beta: vec![1e-3, 1e-5],
                alpha: vec![2.0, 3.0],
                sensor: Vec2::new(0.0, 0.0),
                d_min: 0.5,
            }),
        };
        let term = SurrogateTerm::at_anchor(anchor, &sensor).unwrap();
        let expected = if anchor.x <= 0.0 { 0 } else { 1 };
        prop_assert_eq!(term.zone, ZoneParams {
            zone: expected,
            beta: [1e-3, 1e-5][expected],
            alpha: [2.0, 3.0][expected],
        });
    }

    #[test]
    fn step_keeps_heading_normalized(s in pose(), u in control(), tau in 0.01..1.0f64) {
        let next = step_nonlinear(&s, &u, tau);
        prop_assert!(next.heading > -PI && next.heading <= PI);
        prop_assert_eq!(next.heading, normalize_angle(next.heading));
    }

    #[test]
    fn linearization_is_exact_at_expansion_point(s in pose(), u in control(), tau in 0.01..0.5f64) {
        let lin = linearize(&s, &u, tau);
        let predicted = lin.predict(&pose_vector(&s), &u);
        let next = step_nonlinear(&s, &u, tau);
        prop_assert!((predicted[0] - next.position.x).abs() <= 1e-12);
        prop_assert!((predicted[1] - next.position.y).abs() <= 1e-12);
        prop_assert!(normalize_angle(predicted[2] - next.heading).abs() <= 1e-12);
    }

    #[test]
    fn two_half_steps_agree_to_second_order(s in pose(), u in control(), tau in 0.001..0.1f64) {
        let split_error = |tau: f64| {
            let half = tau / 2.0;
            let x0 = pose_vector(&s);
            let x1 = linearize(&s, &u, half).predict(&x0, &u);
            // The state vector keeps its heading unwrapped across the seam.
            let x2 = linearize_vector(&x1, &u, half).predict(&x1, &u);
            let whole = step_nonlinear(&s, &u, tau);
            let heading = normalize_angle(x2[2] - whole.heading).abs();
            ((x2[0] - whole.position.x).hypot(x2[1] - whole.position.y), heading)
        };
        let (err, heading_err) = split_error(tau);
        prop_assert!(heading_err <= 1e-12);
        // Two half steps differ from one by tau/2 |v| 2|sin(tau w / 4)|.
        prop_assert!(err <= tau * tau * (u.v * u.w).abs() / 4.0 + 1e-12, "err {err}");
        // Richardson: halving the step quarters the discrepancy.
        let (finer, _) = split_error(tau / 2.0);
        if err > 1e-9 {
            let ratio = err / finer;
            prop_assert!((3.9..=4.1).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn linearization_commutes_with_translation(s in pose(), u in control(), shift in vec2(20.0), tau in 0.01..0.5f64) {
        let base = linearize(&s, &u, tau);
        let moved_pose = Pose::from_parts(s.position + shift, s.heading);
        let moved = linearize(&moved_pose, &u, tau);
        prop_assert!((base.a - moved.a).abs().max() <= 1e-12);
        prop_assert!((base.b - moved.b).abs().max() <= 1e-12);
        // c absorbs the shift: (I - A) applied to the translation.
        let d = nalgebra::Vector3::new(shift.x, shift.y, 0.0);
        let expected = base.c + d - base.a * d;
        prop_assert!((moved.c - expected).abs().max() <= 1e-9);
    }

    #[test]
    fn scripts_hit_their_knots(
        poses in prop::collection::vec(pose(), 1..6),
        gaps in prop::collection::vec(0.1..5.0f64, 5),
    ) {
        let mut t = 0.0;
        let script: Vec<Knot> = poses
            .iter()
            .enumerate()
            .map(|(i, &pose)| {
                if i > 0 {
                    t += gaps[i - 1];
                }
                Knot { time: t, pose }
            })
            .collect();
        let obstacle = Obstacle { shape: Shape::Circle { radius: 0.3 }, script: script.clone() };
        prop_assert!(obstacle.validate().is_ok());
        for k in &script {
            let p = obstacle.pose_at(k.time);
            prop_assert_eq!(p.position, k.pose.position);
            prop_assert_eq!(p.heading, k.pose.heading);
        }
    }
}
