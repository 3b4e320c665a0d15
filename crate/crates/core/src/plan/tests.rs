use super::*;
use crate::field::AnalyticDistanceField;
use crate::geom::{Aabb, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn ideal(space: PoseSpace) -> AnalyticDistanceField {
    AnalyticDistanceField::new(space)
}

fn params(eta: f64, d_s: f64) -> MarchParams {
    MarchParams {
        eta,
        d_s,
        ..MarchParams::default()
    }
}

#[test]
fn closed_form_march_on_linear_field() {
    let f = ideal(PoseSpace::translation_only());
    let a = Pose::identity();
    let b = Pose::from_translation([1.0, 0.0, 0.0]);
    let (traj, stats) = march_with_stats(&f, &a, &b, &params(0.05, 0.05)).unwrap();
    assert_eq!(stats.iterations, 10);
    assert!(stats.meet_gap < 1e-12);
    // start front at k·η, goal front at 1 − k·η
    for k in 0..=10 {
        assert!((traj.poses()[k].translation()[0] - 0.05 * k as f64).abs() < 1e-12);
    }
    assert_eq!(traj.first(), &a);
    assert_eq!(traj.last(), &b);
    assert!((traj.length_m() - 1.0).abs() < 1e-12);
}

#[test]
fn tiny_offset_terminates_immediately() {
    let f = ideal(PoseSpace::translation_only());
    let a = Pose::from_translation([0.2, 0.2, 0.2]);
    let b = Pose::from_translation([0.21, 0.2, 0.2]);
    let (traj, stats) = march_with_stats(&f, &a, &b, &MarchParams::default()).unwrap();
    assert_eq!(stats.iterations, 0);
    assert_eq!(traj.poses(), &[a, b]);
}

fn point_segment_distance(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab: Vec<f64> = (0..3).map(|i| b[i] - a[i]).collect();
    let ap: Vec<f64> = (0..3).map(|i| p[i] - a[i]).collect();
    let l2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if l2 > 0.0 {
        (ap.iter().zip(&ab).map(|(x, y)| x * y).sum::<f64>() / l2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (0..3)
        .map(|i| (ap[i] - t * ab[i]).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn ideal_field_marches_straight_with_bounded_steps() {
    let space = PoseSpace::full(0.2);
    let f = ideal(space);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let mut r = || rng.random_range(-0.5..0.5);
        let a = Pose::new([r(), r(), r()], [r() * 4.0, r() * 2.0, r() * 6.0]);
        let b = Pose::new([r(), r(), r()], [r() * 4.0, r() * 2.0, r() * 6.0]);
        let p = MarchParams::default();
        let traj = march_bidirectional(&f, &a, &b, &p).unwrap();
        for q in traj.poses() {
            assert!(
                point_segment_distance(q.translation(), a.translation(), b.translation()) < 1e-6
            );
        }
        assert!(traj.max_translation_gap() <= p.eta * p.s_const + 1e-12);
        let recomputed: f64 = traj
            .poses()
            .windows(2)
            .map(|w| w[0].translation_distance(&w[1]))
            .sum();
        assert!((traj.length_m() - recomputed).abs() < 1e-9);
        assert!((traj.length_m() - a.translation_distance(&b)).abs() < 1e-9);
    }
}

#[test]
fn halving_eta_doubles_iterations() {
    let f = ideal(PoseSpace::translation_only());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let a = Pose::from_translation([rng.random(), rng.random(), rng.random()]);
        let b = Pose::from_translation([rng.random(), rng.random(), rng.random()]);
        if a.translation_distance(&b) < 0.2 {
            continue;
        }
        let (_, s1) = march_with_stats(&f, &a, &b, &params(0.04, 0.05)).unwrap();
        let (_, s2) = march_with_stats(&f, &a, &b, &params(0.02, 0.05)).unwrap();
        assert!(
            (s2.iterations as i64 - 2 * s1.iterations as i64).abs() <= 1,
            "{s1:?} {s2:?}"
        );
    }
}

#[test]
fn non_convergence_reports_partial_chains() {
    let f = ideal(PoseSpace::translation_only());
    let a = Pose::identity();
    let b = Pose::from_translation([1.0, 0.0, 0.0]);
    let p = MarchParams {
        max_iters: 3,
        ..params(0.05, 0.05)
    };
    match march_bidirectional(&f, &a, &b, &p) {
        Err(Error::NoConvergence {
            iterations,
            gap,
            start_chain,
            goal_chain,
        }) => {
            assert_eq!(iterations, 3);
            assert!((gap - 0.7).abs() < 1e-12);
            assert_eq!(start_chain.len(), 4);
            assert_eq!(goal_chain.len(), 4);
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn deg(v: f64) -> f64 {
    v.to_radians()
}

#[test]
fn decouple_examples() {
    let t = [0.1, 0.2, 0.3];
    let s = Pose::new(t, [0.0, 0.0, 0.0]);
    let g = Pose::new([0.5, 0.5, 0.5], [deg(90.0), 0.0, deg(170.0)]);
    let c = decouple(&s, &g).unwrap();
    assert_eq!(c.translation(), t);
    assert_eq!(c.rotation(), [0.0, 0.0, deg(170.0)]);

    let g2 = Pose::new([0.5, 0.5, 0.5], [0.0, 0.0, 0.0]);
    assert!(matches!(decouple(&s, &g2), Err(Error::DegenerateDecouple)));

    let s3 = Pose::new(t, [deg(10.0), 0.0, 0.0]);
    let g3 = Pose::new(t, [deg(-170.0), 0.0, 0.0]);
    let c3 = decouple(&s3, &g3).unwrap();
    assert!((c3.rotation()[0] - deg(-170.0)).abs() < 1e-12);

    // ties go to the earlier axis
    let g4 = Pose::new(t, [0.5, 0.5, 0.5]);
    assert_eq!(decouple(&s, &g4).unwrap().rotation(), [0.5, 0.0, 0.0]);
}

fn grasp_list() -> Vec<Grasp> {
    vec![
        Grasp::new("rim", Pose::identity(), 0.9),
        Grasp::new("side", Pose::from_translation([0.0, 0.05, 0.0]), 0.6),
    ]
}

#[test]
fn all_feasible_gives_single_segment_with_best_grasp() {
    let f = ideal(PoseSpace::planar_xy_yaw(0.2));
    let ik = |_: &Pose, _: &Grasp| true;
    let a = Pose::new([0.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
    let b = Pose::new([0.4, 0.1, 0.0], [0.0, 0.0, 1.0]);
    let plan = omanip(&f, &a, &b, &grasp_list(), &ik, &PlanParams::default()).unwrap();
    assert_eq!(plan.segments.len(), 1);
    assert_eq!(plan.segments[0].grasp.id, "rim");
    assert!(plan.intermediate_poses.is_empty());
    assert!((plan.total_length_m - plan.segments[0].trajectory.length_m()).abs() < 1e-12);
}

/// The two-grasp yaw partition: "rim" holds the object for |yaw| ≤ 90°, or
/// for any yaw while it stays at the start translation (an in-place
/// rotation); "side" holds it for |yaw| ≥ 90°.
pub(crate) fn regrasp_ik(start: [f64; 3]) -> impl Fn(&Pose, &Grasp) -> bool + Send + Sync {
    move |pose: &Pose, grasp: &Grasp| {
        let yaw = pose.rotation()[2].abs();
        let t = pose.translation();
        let at_start = (0..3)
            .map(|i| (t[i] - start[i]).powi(2))
            .sum::<f64>()
            .sqrt()
            <= 0.01;
        match grasp.id.as_str() {
            "rim" => at_start || yaw <= PI / 2.0 + 1e-12,
            "side" => yaw >= PI / 2.0 - 1e-12,
            _ => false,
        }
    }
}

#[test]
fn regrasp_scenario_yields_two_segments() {
    let f = ideal(PoseSpace::planar_xy_yaw(0.2));
    let start = [0.1, 0.1, 0.0];
    let a = Pose::new(start, [0.0, 0.0, 0.0]);
    let b = Pose::new([0.4, 0.3, 0.0], [0.0, 0.0, PI]);
    let ik = regrasp_ik(start);
    let plan = omanip(&f, &a, &b, &grasp_list(), &ik, &PlanParams::default()).unwrap();
    assert_eq!(plan.segments.len(), 2);
    assert_eq!(plan.segments[0].grasp.id, "rim");
    assert_eq!(plan.segments[1].grasp.id, "side");
    assert_eq!(
        plan.segments[0].trajectory.last(),
        plan.segments[1].trajectory.first()
    );
    assert_eq!(
        plan.intermediate_poses,
        vec![Pose::new(start, [0.0, 0.0, PI])]
    );
    for seg in &plan.segments {
        assert!(seg.trajectory.poses().iter().all(|p| ik(p, &seg.grasp)));
    }
    assert_eq!(plan.segments[0].trajectory.first(), &a);
    assert_eq!(plan.segments[1].trajectory.last(), &b);

    let again = omanip(&f, &a, &b, &grasp_list(), &ik, &PlanParams::default()).unwrap();
    assert_eq!(again.segments, plan.segments);

    let no_depth = PlanParams {
        depth_limit: 0,
        ..PlanParams::default()
    };
    match omanip(&f, &a, &b, &grasp_list(), &ik, &no_depth) {
        Err(Error::PlanFailure {
            deepest_infeasible,
            best_coverage,
            ..
        }) => {
            assert!(deepest_infeasible.is_some());
            assert!(best_coverage > 0.0 && best_coverage < 1.0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn omanip_rejects_bad_grasp_lists() {
    let f = ideal(PoseSpace::translation_only());
    let ik = |_: &Pose, _: &Grasp| true;
    let a = Pose::identity();
    let b = Pose::from_translation([0.3, 0.0, 0.0]);
    assert!(matches!(
        omanip(&f, &a, &b, &[], &ik, &PlanParams::default()),
        Err(Error::InvalidInput(_))
    ));
    let mut g = grasp_list();
    g.reverse();
    assert!(matches!(
        omanip(&f, &a, &b, &g, &ik, &PlanParams::default()),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn translation_only_failure_is_degenerate() {
    let f = ideal(PoseSpace::translation_only());
    let ik = |p: &Pose, _: &Grasp| p.translation()[0] < 0.2;
    let a = Pose::identity();
    let b = Pose::from_translation([0.5, 0.0, 0.0]);
    assert!(matches!(
        omanip(&f, &a, &b, &grasp_list(), &ik, &PlanParams::default()),
        Err(Error::PlanFailure { .. })
    ));
}

#[test]
fn smoothing_examples() {
    let zig = Trajectory::new(
        vec![
            Pose::from_translation([0.0, 0.0, 0.0]),
            Pose::from_translation([1.0, 1.0, 0.0]),
            Pose::from_translation([2.0, 0.0, 0.0]),
        ],
        TrajectorySource::LearnedField,
    );
    assert_eq!(smooth(&zig, 1).unwrap(), zig);
    let s = smooth(&zig, 3).unwrap();
    assert_eq!(s.first(), zig.first());
    assert_eq!(s.last(), zig.last());
    let mid = s.poses()[1].translation();
    assert!((mid[0] - 1.0).abs() < 1e-12 && (mid[1] - 1.0 / 3.0).abs() < 1e-12);
    assert!(s.length_m() <= zig.length_m());
    assert!(smooth(&zig, 2).is_err());

    // rotations average across the wrap
    let wrap = Trajectory::new(
        vec![
            Pose::new([0.0; 3], [0.0, 0.0, PI - 0.1]),
            Pose::new([0.0; 3], [0.0, 0.0, -PI + 0.3]),
            Pose::new([0.0; 3], [0.0, 0.0, -PI + 0.1]),
        ],
        TrajectorySource::LearnedField,
    );
    let w = smooth(&wrap, 3).unwrap();
    assert!((w.poses()[1].rotation()[2] - (-PI + 0.1)).abs() < 1e-12);
}

fn wall_scene() -> Scene {
    let mut pts = Vec::new();
    for i in 0..=20 {
        for k in 0..=10 {
            pts.push([0.5, -0.1 + i as f64 * 0.01, -0.05 + k as f64 * 0.01]);
        }
    }
    let cube: Vec<[f64; 3]> = (0..8)
        .map(|i| {
            [
                if i & 1 == 0 { -0.02 } else { 0.02 },
                if i & 2 == 0 { -0.02 } else { 0.02 },
                if i & 4 == 0 { -0.02 } else { 0.02 },
            ]
        })
        .collect();
    Scene::new(
        Some(PointCloud::new(pts).unwrap()),
        Aabb::new([0.0, -0.5, -0.5], [1.0, 0.5, 0.5]).unwrap(),
        [("cube".to_string(), PointCloud::new(cube).unwrap())],
    )
    .unwrap()
}

#[test]
fn validation_flags_collisions_and_measures_length() {
    let scene = wall_scene();
    let through = Trajectory::new(
        vec![
            Pose::from_translation([0.2, 0.0, 0.0]),
            Pose::from_translation([0.8, 0.0, 0.0]),
        ],
        TrajectorySource::LearnedField,
    );
    let r = validate_trajectory(&scene, "cube", &through, 0.001).unwrap();
    assert!(r.collision);
    assert!((r.length_m - through.length_m()).abs() < 1e-6);
    assert!(r.samples >= 600);

    let around = Trajectory::new(
        vec![
            Pose::from_translation([0.2, 0.0, 0.0]),
            Pose::from_translation([0.2, 0.3, 0.0]),
            Pose::from_translation([0.8, 0.3, 0.0]),
        ],
        TrajectorySource::LearnedField,
    );
    let r = validate_trajectory(&scene, "cube", &around, 0.001).unwrap();
    assert!(!r.collision);
    assert!(r.min_distance > 0.1);
    assert!((r.length_m - around.length_m()).abs() < 1e-6);

    let free = Scene::new(
        Some(PointCloud::empty()),
        Aabb::new([0.0; 3], [1.0; 3]).unwrap(),
        [("cube".to_string(), scene.object("cube").unwrap().clone())],
    )
    .unwrap();
    let r = validate_trajectory(&free, "cube", &through, 0.001).unwrap();
    assert!(!r.collision);
    assert_eq!(r.min_distance, f64::INFINITY);

    // smoothing that would cut into the wall is refused
    let hug = Trajectory::new(
        vec![
            Pose::from_translation([0.44, -0.12, 0.0]),
            Pose::from_translation([0.44, 0.2, 0.0]),
            Pose::from_translation([0.56, 0.2, 0.0]),
            Pose::from_translation([0.56, -0.12, 0.0]),
        ],
        TrajectorySource::LearnedField,
    );
    let (out, applied) = smooth_checked(&hug, 3, &scene, "cube", 0.001).unwrap();
    if !applied {
        assert_eq!(out, hug);
    }
}

#[test]
fn grasp_file_parsing() {
    let text = "# id x y z r p y score\nlow 0 0 0.1 0 0 0 0.2\nhigh 0 0 0.1 0 0 1.5 0.8\n";
    let g = parse_grasps(text, "mem").unwrap();
    assert_eq!(g[0].id, "high");
    assert_eq!(g[1].id, "low");
    assert!(matches!(
        parse_grasps("a 1 2", "mem"),
        Err(Error::Parse { .. })
    ));

    let ik = ShellIk::new([0.0; 3], 0.1, 0.5, Aabb::new([-1.0; 3], [1.0; 3]).unwrap());
    let grasp = Grasp::new("up", Pose::from_translation([0.0, 0.0, 0.1]), 1.0);
    assert!(ik.feasible(&Pose::from_translation([0.2, 0.0, 0.0]), &grasp));
    assert!(!ik.feasible(&Pose::from_translation([0.0, 0.0, -0.05]), &grasp));
    assert!(!ik.feasible(&Pose::from_translation([0.6, 0.0, 0.0]), &grasp));
}
