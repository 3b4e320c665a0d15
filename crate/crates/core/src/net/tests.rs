use super::*;
use proptest::prelude::*;
use rand::Rng;

fn random_cloud(seed: u64, scale: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = (0..CANONICAL_CLOUD_SIZE)
        .map(|_| {
            [
                scale * rng.random_range(-0.05..0.05),
                scale * rng.random_range(-0.05..0.05),
                scale * rng.random_range(-0.03..0.03),
            ]
        })
        .collect();
    PointCloud::new(pts).unwrap()
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        [
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ],
        [
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.4..1.4),
            rng.random_range(-3.0..3.0),
        ],
    )
}

/// A compact model with its head weights enlarged so the network part of
/// `T` actually varies.
fn perturbed(config: ModelConfig, seed: u64) -> TimeFieldModel {
    let mut m = TimeFieldModel::new(config, seed).unwrap();
    let hi = m.head_index();
    m.layers[hi].w.mapv_inplace(|v| v * 50.0);
    m
}

#[test]
fn zero_frequencies_give_constant_features() {
    let map = FourierFeatureMap::from_matrix(Array2::zeros((4, 6))).unwrap();
    let f = map.apply(&Pose::new([0.3, -1.0, 2.0], [0.1, 0.2, 0.3]));
    assert_eq!(f, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
}

#[test]
fn fourier_features_are_periodic_in_rotation() {
    let config = ModelConfig::compact(PoseSpace::full(0.3));
    let m = TimeFieldModel::new(config, 5).unwrap();
    let a = m
        .fourier()
        .apply(&Pose::from_array([0.1, 0.2, 0.3, 0.0, 0.0, PI - 1e-9]));
    let b = m
        .fourier()
        .apply(&Pose::from_array([0.1, 0.2, 0.3, 0.0, 0.0, -PI + 1e-9]));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-6);
        assert!(x.abs() <= 1.0);
    }
}

#[test]
fn symmetric_combine_examples() {
    assert_eq!(
        symmetric_combine(&[1.0, 3.0], &[2.0, 2.0]).unwrap(),
        vec![2.0, 3.0, 1.0, 2.0]
    );
    assert_eq!(
        symmetric_combine(&[1.0, -3.0], &[1.0, -3.0]).unwrap(),
        vec![1.0, -3.0, 1.0, -3.0]
    );
    assert!(matches!(
        symmetric_combine(&[1.0], &[1.0, 2.0]),
        Err(Error::InvalidInput(_))
    ));
}

proptest! {
    #[test]
    fn symmetric_combine_is_symmetric(a in prop::collection::vec(-5.0..5.0f64, 8), b in prop::collection::vec(-5.0..5.0f64, 8)) {
        prop_assert_eq!(symmetric_combine(&a, &b).unwrap(), symmetric_combine(&b, &a).unwrap());
    }
}

#[test]
fn encode_pose_is_deterministic_and_matches_batched_path() {
    let m = TimeFieldModel::new(ModelConfig::compact(PoseSpace::default()), 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let poses: Vec<Pose> = (0..5).map(|_| random_pose(&mut rng)).collect();
    let (jet, _) = mlp_forward(m.pose_layers(), m.fourier.jet(&poses, &[], false), false);
    for (b, p) in poses.iter().enumerate() {
        let seq = m.encode_pose(p).unwrap();
        assert_eq!(seq, m.encode_pose(p).unwrap());
        for (i, v) in seq.iter().enumerate() {
            assert!((v - jet.data[[0, b, i]]).abs() < 1e-12);
        }
    }
    let bad = Pose::from_array([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(m.encode_pose(&bad), Err(Error::InvalidInput(_))));
}

#[test]
fn shape_encoder_contract() {
    let m = TimeFieldModel::new(ModelConfig::compact(PoseSpace::default()), 1).unwrap();
    let cloud = random_cloud(4, 1.0);
    let base = m.encode_shape(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let mut pts = cloud.points().to_vec();
        for i in (1..pts.len()).rev() {
            pts.swap(i, rng.random_range(0..=i));
        }
        assert_eq!(
            m.encode_shape(&PointCloud::new(pts).unwrap()).unwrap(),
            base
        );
    }
    let other = m.encode_shape(&random_cloud(5, 1.0)).unwrap();
    assert!(other.iter().zip(&base).any(|(a, b)| a != b));
    let scaled = m.encode_shape(&cloud.scaled(2.0)).unwrap();
    assert!(scaled.iter().zip(&base).any(|(a, b)| a != b));
    let short = PointCloud::new(cloud.points()[..10].to_vec()).unwrap();
    assert!(matches!(
        m.encode_shape(&short),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn boundary_and_initial_distance() {
    let space = PoseSpace::default();
    let m = TimeFieldModel::new(ModelConfig::compact(space), 2).unwrap();
    let cloud = random_cloud(1, 1.0);
    let field = m.for_object(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let a = random_pose(&mut rng);
        let b = random_pose(&mut rng);
        assert_eq!(field.time(&a, &a).unwrap(), 0.0);
        let t = field.time(&a, &b).unwrap();
        let d = space.distance(&a, &b);
        assert!(t >= 0.0);
        assert!((t / d - 1.0).abs() < 0.05, "T = {t}, dist = {d}");
    }
}

#[test]
fn symmetry_holds_on_random_pairs() {
    let m = perturbed(ModelConfig::compact(PoseSpace::default()), 4);
    let cloud = random_cloud(2, 1.0);
    let field = m.for_object(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..1000 {
        let a = random_pose(&mut rng);
        let b = random_pose(&mut rng);
        let ab = field.evaluate(&a, &b).unwrap();
        let ba = field.evaluate(&b, &a).unwrap();
        assert!((ab.time - ba.time).abs() <= 1e-6);
        for j in 0..6 {
            assert!((ab.grad_start[j] - ba.grad_goal[j]).abs() <= 1e-6);
        }
    }
}

fn fd_gradients(field: &dyn TimeField, a: &Pose, b: &Pose, h: f64) -> ([f64; 6], [f64; 6]) {
    let mut gs = [0.0; 6];
    let mut gg = [0.0; 6];
    for j in field.space().active_dims() {
        let shift = |p: &Pose, s: f64| {
            let mut x = p.to_array();
            x[j] += s;
            Pose::from_array(x)
        };
        gs[j] = (field.time(&shift(a, h), b).unwrap() - field.time(&shift(a, -h), b).unwrap())
            / (2.0 * h);
        gg[j] = (field.time(a, &shift(b, h)).unwrap() - field.time(a, &shift(b, -h)).unwrap())
            / (2.0 * h);
    }
    (gs, gg)
}

/// Central differences are only meaningful away from the max/min switching
/// surfaces of the symmetric combination.
fn away_from_kinks(m: &TimeFieldModel, a: &Pose, b: &Pose) -> bool {
    let la = m.encode_pose(a).unwrap();
    let lb = m.encode_pose(b).unwrap();
    la.iter().zip(&lb).all(|(x, y)| (x - y).abs() > 2e-2)
}

fn rel_err(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    let num: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let den: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    num / den.max(1e-12)
}

#[test]
fn input_gradients_match_finite_differences() {
    let m = perturbed(ModelConfig::compact(PoseSpace::default()), 6);
    let cloud = random_cloud(3, 1.0);
    let field = m.for_object(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut checked = 0;
    while checked < 100 {
        let a = random_pose(&mut rng);
        let b = random_pose(&mut rng);
        if !away_from_kinks(&m, &a, &b) {
            continue;
        }
        checked += 1;
        let e = field.evaluate(&a, &b).unwrap();
        let (gs, gg) = fd_gradients(&field, &a, &b, 1e-4);
        assert!(
            rel_err(&e.grad_start, &gs) < 1e-4,
            "{:?} vs {gs:?}",
            e.grad_start
        );
        assert!(
            rel_err(&e.grad_goal, &gg) < 1e-4,
            "{:?} vs {gg:?}",
            e.grad_goal
        );
    }
}

#[test]
fn gradient_near_source_is_head_times_metric_gradient() {
    let space = PoseSpace::default();
    let m = perturbed(ModelConfig::compact(space), 8);
    let cloud = random_cloud(3, 1.0);
    let field = m.for_object(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let a = random_pose(&mut rng);
        let mut dir = [0.0; 6];
        for v in &mut dir {
            *v = rng.random_range(-1.0..1.0);
        }
        let norm = space.displacement_norm(&dir);
        let b = space.offset(&a, &dir.map(|v| v * 1e-5 / norm));
        let e = field.evaluate(&a, &b).unwrap();
        let head = e.time / space.distance(&a, &b);
        let n = space.gradient_norm(&e.grad_goal);
        assert!((n - head).abs() < 1e-3 * head, "{n} vs {head}");
    }
}

#[test]
fn laplacian_matches_finite_differences() {
    struct Fd<'a>(ObjectField<'a>);
    impl TimeField for Fd<'_> {
        fn space(&self) -> PoseSpace {
            self.0.space()
        }
        fn evaluate(&self, a: &Pose, b: &Pose) -> Result<FieldEval> {
            self.0.evaluate(a, b)
        }
    }
    let m = perturbed(ModelConfig::compact(PoseSpace::default()), 10);
    let cloud = random_cloud(3, 1.0);
    let field = m.for_object(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut checked = 0;
    while checked < 20 {
        let a = random_pose(&mut rng);
        let b = random_pose(&mut rng);
        if !away_from_kinks(&m, &a, &b) {
            continue;
        }
        checked += 1;
        let exact = field.goal_laplacian(&a, &b).unwrap();
        let fd = Fd(field.clone()).goal_laplacian(&a, &b).unwrap();
        assert!(
            (exact - fd).abs() < 1e-3 * (1.0 + exact.abs()),
            "{exact} vs {fd}"
        );
    }
}

/// By symmetry the start-side second derivatives at `(a, b)` are the
/// goal-side ones at `(b, a)`.
#[test]
fn start_second_derivatives_mirror_goal_side() {
    let m = perturbed(ModelConfig::compact(PoseSpace::full(0.3)), 21);
    let clouds = [random_cloud(3, 1.0)];
    let refs: Vec<&PointCloud> = clouds.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a: Vec<Pose> = (0..8).map(|_| random_pose(&mut rng)).collect();
    let b: Vec<Pose> = (0..8).map(|_| random_pose(&mut rng)).collect();
    let objects = [0; 8];
    let ab = m
        .forward_batch(&refs, &a, &b, &objects, SecondOrder::Both)
        .unwrap();
    let ba = m
        .forward_batch(&refs, &b, &a, &objects, SecondOrder::Goal)
        .unwrap();
    let l = &ab.layout;
    for i in 0..8 {
        for t in 0..l.k() {
            let x = ab.time[[l.start_second_row(t), i]];
            let y = ba.time[[ba.layout.second_row(t), i]];
            assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()), "{x} vs {y}");
            assert_eq!(ab.time[[l.second_row(t), i]].to_bits(), {
                let g = m
                    .forward_batch(&refs, &a, &b, &objects, SecondOrder::Goal)
                    .unwrap();
                g.time[[g.layout.second_row(t), i]].to_bits()
            });
        }
    }
}

/// Reverse pass against central differences over every parameter for a
/// random linear functional of all jet rows.
#[test]
fn parameter_gradients_match_finite_differences() {
    for second in [SecondOrder::None, SecondOrder::Goal, SecondOrder::Both] {
        let mut m = perturbed(ModelConfig::tiny(PoseSpace::default()), 12);
        let clouds = [random_cloud(1, 1.0), random_cloud(2, 1.5)];
        let refs: Vec<&PointCloud> = clouds.iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(37);
        let starts: Vec<Pose> = (0..4).map(|_| random_pose(&mut rng)).collect();
        let goals: Vec<Pose> = (0..4).map(|_| random_pose(&mut rng)).collect();
        let objects = [0, 1, 1, 0];
        let fwd = m
            .forward_batch(&refs, &starts, &goals, &objects, second)
            .unwrap();
        let weights = fwd.time.mapv(|_| rng.random_range(-1.0..1.0));
        let grads = m.backward_batch(&fwd, &weights);
        let analytic: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|g| g.w.iter().chain(g.b.iter()).copied().collect::<Vec<_>>())
            .collect();
        let base = m.parameters();
        let h = 1e-6;
        for i in 0..base.len() {
            let mut eval = |v: f64| {
                let mut p = base.clone();
                p[i] = v;
                m.set_parameters(&p).unwrap();
                let f = m
                    .forward_batch(&refs, &starts, &goals, &objects, second)
                    .unwrap();
                (&f.time * &weights).sum()
            };
            let fd = (eval(base[i] + h) - eval(base[i] - h)) / (2.0 * h);
            assert!(
                (fd - analytic[i]).abs() < 1e-5 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                analytic[i]
            );
        }
        m.set_parameters(&base).unwrap();
    }
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let m = perturbed(ModelConfig::compact(PoseSpace::planar_xy_yaw(0.3)), 14);
    let meta = CheckpointMeta {
        speed_params: crate::speed::SpeedParams::default(),
        scene_hash: "abc".into(),
    };
    save_checkpoint(&m, &meta, &path).unwrap();
    let (loaded, lmeta) = load_checkpoint(&path, Some("abc"), false).unwrap();
    assert_eq!(lmeta, meta);
    assert_eq!(loaded, m);
    let cloud = random_cloud(1, 1.0);
    let a = Pose::new([0.1, 0.2, 0.0], [0.0, 0.0, 0.5]);
    let b = Pose::new([-0.3, 0.1, 0.0], [0.0, 0.0, -2.0]);
    assert_eq!(
        m.forward_time(&cloud, &a, &b).unwrap().to_bits(),
        loaded.forward_time(&cloud, &a, &b).unwrap().to_bits()
    );

    assert!(matches!(
        load_checkpoint(&path, Some("other"), false),
        Err(Error::SceneHashMismatch { .. })
    ));
    assert!(load_checkpoint(&path, Some("other"), true).is_ok());

    let text =
        std::fs::read_to_string(&path)
            .unwrap()
            .replacen("\"version\":1", "\"version\":99", 1);
    std::fs::write(&path, text).unwrap();
    assert!(matches!(
        load_checkpoint(&path, None, true),
        Err(Error::VersionMismatch {
            expected: 1,
            found: 99
        })
    ));
    assert!(matches!(
        load_checkpoint(&dir.path().join("missing.json"), None, false),
        Err(Error::FileNotFound(_))
    ));
}

#[test]
fn rejects_non_finite_inputs() {
    let m = TimeFieldModel::new(ModelConfig::tiny(PoseSpace::default()), 0).unwrap();
    let cloud = random_cloud(1, 1.0);
    let bad = Pose::from_array([0.0, f64::INFINITY, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        m.forward_time(&cloud, &bad, &Pose::identity()),
        Err(Error::InvalidInput(_))
    ));
}
