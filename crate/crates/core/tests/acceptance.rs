//! Acceptance checks, one PASS/FAIL line each. Runs as a plain binary so
//! the lines show up in `cargo test` output; exits non-zero on any FAIL.

use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use timefield::bench::{
    benchmark_queries, generate_dataset, run_benchmark, BenchOptions, EnvSpec, ObjectKind,
};
use timefield::geom::{Aabb, PointCloud, Pose, PoseSpace, Scene};
use timefield::net::{ModelConfig, TimeFieldModel};
use timefield::oracle::{compare_fields, dijkstra_solve, fmm_solve, GridGeometry, SpeedGrid};
use timefield::plan::{march_bidirectional, omanip, Grasp, MarchParams, PlanParams};
use timefield::speed::SpeedParams;
use timefield::train::{isotropic_loss, train, DatasetTuple, Regularizer, TrainConfig, Trainer};
use timefield::{AnalyticDistanceField, FieldFamily};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
    Pose::new(
        [rng.random(), rng.random(), rng.random()],
        [
            rng.random_range(-3.0..3.0),
            rng.random_range(-1.5..1.5),
            rng.random_range(-3.0..3.0),
        ],
    )
}

fn symmetry_and_boundary() -> Outcome {
    let model = TimeFieldModel::new(ModelConfig::compact(PoseSpace::full(0.2)), 11)
        .map_err(|e| e.to_string())?;
    let clouds: Vec<PointCloud> = ObjectKind::ALL.iter().map(|k| k.cloud()).collect();
    let fields: Vec<_> = clouds.iter().map(|c| model.field_for(c).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut diagonal_ok = true;
    for i in 0..1000 {
        let f = &fields[i % fields.len()];
        let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
        let ab = f.time(&a, &b).unwrap();
        let ba = f.time(&b, &a).unwrap();
        worst = worst.max((ab - ba).abs());
        diagonal_ok &= f.time(&a, &a).unwrap() == 0.0;
    }
    check(
        worst <= 1e-6 && diagonal_ok,
        format!("max |T(a,b) - T(b,a)| = {worst:.2e}, T(p,p) == 0: {diagonal_ok}"),
    )
}

fn free_scene(ids: &[&str]) -> Scene {
    let cloud = ObjectKind::Box.cloud();
    Scene::new(
        Some(PointCloud::empty()),
        Aabb::new([0.0; 3], [1.0; 3]).unwrap(),
        ids.iter().map(|id| (id.to_string(), cloud.clone())),
    )
    .unwrap()
}

fn gradient_correctness() -> Outcome {
    let space = PoseSpace::full(0.3);
    let model = TimeFieldModel::new(ModelConfig::compact(space), 5).map_err(|e| e.to_string())?;
    let cloud = ObjectKind::Cylinder.cloud();
    let field = model.field_for(&cloud).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut tested = 0;
    while tested < 100 {
        let (a, b) = (random_pose(&mut rng), random_pose(&mut rng));
        // keep clear of the max/min switching surfaces of the symmetric combine
        let (la, lb) = (
            model.encode_pose(&a).unwrap(),
            model.encode_pose(&b).unwrap(),
        );
        if la.iter().zip(&lb).any(|(x, y)| (x - y).abs() <= 0.02) {
            continue;
        }
        tested += 1;
        let e = field.evaluate(&a, &b).unwrap();
        let mut fd = [[0.0; 6]; 2];
        for (side, row) in fd.iter_mut().enumerate() {
            for j in 0..6 {
                let shifted = |d: f64| {
                    let mut v = if side == 0 {
                        a.to_array()
                    } else {
                        b.to_array()
                    };
                    v[j] += d;
                    let p = Pose::from_array(v);
                    if side == 0 {
                        field.time(&p, &b).unwrap()
                    } else {
                        field.time(&a, &p).unwrap()
                    }
                };
                row[j] = (shifted(h) - shifted(-h)) / (2.0 * h);
            }
        }
        for (g, f) in [(e.grad_start, fd[0]), (e.grad_goal, fd[1])] {
            let norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
            let diff = g
                .iter()
                .zip(&f)
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / norm.max(1e-12));
        }
    }

    // parameter gradients of the full loss (input gradients and the
    // Laplacian inside) on a two-unit network
    let scene = free_scene(&["a"]);
    let mut worst_param: f64 = 0.0;
    for regularizer in [Regularizer::Dirichlet, Regularizer::Viscosity] {
        let mut model = TimeFieldModel::new(ModelConfig::tiny(space), 5).unwrap();
        let mut p = model.parameters();
        for v in &mut p {
            *v += rng.random_range(-0.5..0.5);
        }
        model.set_parameters(&p).unwrap();
        let batch: Vec<DatasetTuple> = (0..6)
            .map(|_| DatasetTuple {
                object_id: "a".into(),
                p_s: random_pose(&mut rng),
                p_g: random_pose(&mut rng),
                s_star_s: rng.random_range(0.2..1.0),
                s_star_g: rng.random_range(0.2..1.0),
            })
            .collect();
        let refs: Vec<&DatasetTuple> = batch.iter().collect();
        let config = TrainConfig {
            regularizer,
            epsilon: 0.3,
            ..TrainConfig::for_epochs(1)
        };
        let params = SpeedParams::default();
        let trainer = Trainer::new(model.clone(), &scene, &params, config.clone()).unwrap();
        let (_, analytic) = trainer.parameter_gradients(&refs, 0.8).unwrap();
        for i in 0..p.len() {
            let loss_at = |v: f64| {
                let mut q = p.clone();
                q[i] = v;
                let mut m = model.clone();
                m.set_parameters(&q).unwrap();
                let t = Trainer::new(m, &scene, &params, config.clone()).unwrap();
                t.batch_loss(&refs, 0.8).unwrap().total(config.epsilon)
            };
            let fd = (loss_at(p[i] + h) - loss_at(p[i] - h)) / (2.0 * h);
            let rel = (fd - analytic[i]).abs() / fd.abs().max(analytic[i].abs()).max(1e-3);
            worst_param = worst_param.max(rel);
        }
    }
    check(
        worst < 1e-4 && worst_param < 1e-3,
        format!("input gradients worst relative error {worst:.2e}; parameter gradients {worst_param:.2e}"),
    )
}

fn loss_identities() -> Outcome {
    let exact = isotropic_loss(0.4, 0.9, 0.4, 0.9).unwrap();
    let double = isotropic_loss(0.4, 0.9, 0.8, 1.8).unwrap();
    let half = isotropic_loss(0.4, 0.9, 0.2, 0.9).unwrap();
    check(
        exact == 0.0 && double == 1.0 && half == 0.5,
        format!("exact {exact}, both at 2x {double}, one at 0.5x {half}"),
    )
}

fn unit_square(n: usize) -> GridGeometry {
    GridGeometry::planar(n, n, 1.0 / (n - 1) as f64, [0.0; 3]).unwrap()
}

fn center(g: &GridGeometry) -> usize {
    g.index([g.dims[0] / 2, g.dims[1] / 2, 0])
}

fn wavy(p: [f64; 3]) -> f64 {
    0.65 + 0.35 * (3.0 * p[0]).sin() * (2.0 * p[1] + 0.5).cos()
}

fn fmm_error(n: usize) -> f64 {
    let g = unit_square(n);
    let src = center(&g);
    let t = fmm_solve(&SpeedGrid::uniform(g.clone(), 1.0).unwrap(), src).unwrap();
    let s = g.position(src);
    (0..g.len())
        .map(|i| {
            let p = g.position(i);
            (t.value(i) - ((p[0] - s[0]).powi(2) + (p[1] - s[1]).powi(2)).sqrt()).abs()
        })
        .fold(0.0, f64::max)
}

fn fmm_oracle() -> Outcome {
    let g = unit_square(101);
    let t = fmm_solve(&SpeedGrid::uniform(g.clone(), 1.0).unwrap(), center(&g)).unwrap();
    let corner = [[0, 0, 0], [100, 0, 0], [0, 100, 0], [100, 100, 0]]
        .iter()
        .map(|&c| (t.value(g.index(c)) - std::f64::consts::FRAC_1_SQRT_2).abs())
        .fold(0.0, f64::max);

    let g = unit_square(41);
    let s = SpeedGrid::from_fn(g.clone(), wavy).unwrap();
    let base = fmm_solve(&s, 123).unwrap();
    let half = fmm_solve(&s.scaled(0.5).unwrap(), 123).unwrap();
    let homogeneous = (0..g.len()).all(|i| half.value(i) == 2.0 * base.value(i));

    let g = unit_square(51);
    let s = SpeedGrid::from_fn(g.clone(), wavy).unwrap();
    let src = center(&g);
    let f = fmm_solve(&s, src).unwrap();
    let d = dijkstra_solve(&s, src).unwrap();
    let dijkstra = (0..g.len())
        .filter(|&i| i != src)
        .map(|i| (f.value(i) - d.value(i)).abs() / d.value(i))
        .fold(0.0, f64::max);

    let e = [51, 101, 201].map(fmm_error);
    let rate = (e[0] / e[1]).min(e[1] / e[2]);
    check(
        corner <= 2.0 / 100.0 && homogeneous && dijkstra <= 0.08 && rate >= 1.8,
        format!(
            "corner error {corner:.4}, homogeneity exact: {homogeneous}, Dijkstra gap {:.1}%, refinement {rate:.2}x",
            100.0 * dijkstra
        ),
    )
}

fn free_space_learning() -> Outcome {
    let env = EnvSpec::free_space();
    let scene = env.scene().unwrap();
    let data = generate_dataset(&env, &scene, 5000, 1).unwrap().dataset;
    let recipe = env.training_recipe();
    if recipe.train.epochs > 200 {
        return Err(format!("recipe asks for {} epochs", recipe.train.epochs));
    }
    let model = TimeFieldModel::new(recipe.model, 1).unwrap();
    let (model, _) = train(model, &data, &scene, &recipe.train).map_err(|e| e.to_string())?;
    let field = model
        .field_for(scene.object(&env.object_ids()[0]).unwrap())
        .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut err, mut worst_excess, mut probes) = (0.0, 0.0f64, 0);
    while probes < 200 {
        let a = Pose::from_translation([rng.random(), rng.random(), 0.0]);
        let b = Pose::from_translation([rng.random(), rng.random(), 0.0]);
        let d = a.translation_distance(&b);
        if d < 0.05 {
            continue;
        }
        probes += 1;
        err += (field.time(&a, &b).unwrap() - d).abs() / d;
        let path = march_bidirectional(field.as_ref(), &a, &b, &MarchParams::default())
            .map_err(|e| e.to_string())?;
        worst_excess = worst_excess.max(path.length_m() / d - 1.0);
    }
    let mean = err / probes as f64;
    check(
        mean < 0.05 && worst_excess <= 0.02,
        format!(
            "mean relative error {:.2}%, worst path length excess {:.2}%",
            100.0 * mean,
            100.0 * worst_excess
        ),
    )
}

fn tabletop_analogue() -> Outcome {
    let started = Instant::now();
    let env = EnvSpec::tabletop_center_obstacle();
    let scene = env.scene().unwrap();
    let data = generate_dataset(&env, &scene, 10_000, 1)
        .map_err(|e| e.to_string())?
        .dataset;
    let recipe = env.training_recipe();
    let model = TimeFieldModel::new(recipe.model, 1).unwrap();
    let (model, _) = train(model, &data, &scene, &recipe.train).map_err(|e| e.to_string())?;
    let queries = benchmark_queries(&env, &scene, 100, 7).unwrap();
    let report = run_benchmark(&model, &env, &scene, &queries, &BenchOptions::default())
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed().as_secs_f64();

    // learned versus grid paths on the slice through each query
    let mut ratios = Vec::new();
    for q in &queries {
        let geometry = GridGeometry::planar_covering([0.0, 0.0], [0.5, 0.5], 0.0, 0.01).unwrap();
        let source = geometry.nearest_node(&q.goal.translation()).unwrap();
        let speed = SpeedGrid::from_scene(
            &scene,
            &q.object_id,
            geometry.clone(),
            [0.0; 3],
            &env.speed,
            &env.reachability(),
        )
        .unwrap();
        let times = fmm_solve(&speed, source).unwrap();
        let goal = Pose::from_translation(geometry.position(source));
        let field = model
            .field_for(scene.object(&q.object_id).unwrap())
            .unwrap();
        let cmp = compare_fields(
            field.as_ref(),
            &times,
            &[(q.start, goal)],
            Some(&MarchParams::default()),
        )
        .unwrap();
        ratios.extend(cmp.path_ratios);
    }
    let ratio = ratios.iter().sum::<f64>() / ratios.len().max(1) as f64;
    let s = report.summary;
    check(
        s.success_rate >= 0.9 && ratio <= 1.5 && s.time_mean_s <= 0.1 && elapsed < 1800.0,
        format!(
            "{s}; learned/FMM length {ratio:.3} over {} slices; pipeline {elapsed:.0} s",
            ratios.len()
        ),
    )
}

fn dirichlet_vs_viscosity() -> Outcome {
    let env = EnvSpec::free_space();
    let scene = env.scene().unwrap();
    let data = generate_dataset(&env, &scene, 2000, 4).unwrap().dataset;
    let mut runs = Vec::new();
    for regularizer in [Regularizer::Dirichlet, Regularizer::Viscosity] {
        let model = TimeFieldModel::new(ModelConfig::compact(env.space), 3).unwrap();
        let config = TrainConfig {
            regularizer,
            ..TrainConfig::for_epochs(40)
        };
        let (_, log) = train(model, &data, &scene, &config).map_err(|e| e.to_string())?;
        let wall: f64 = log.epochs.iter().map(|e| e.wall_seconds).sum();
        runs.push((wall, log.final_loss().unwrap()));
    }
    let (ratio, loss_ratio) = (runs[0].0 / runs[1].0, runs[0].1 / runs[1].1);
    check(
        ratio <= 0.7 && loss_ratio <= 1.1,
        format!(
            "time per iteration dirichlet/viscosity {ratio:.2}; final loss {:.5} vs {:.5} ({loss_ratio:.2}x)",
            runs[0].1, runs[1].1
        ),
    )
}

fn regrasp_scenario() -> Outcome {
    let field = AnalyticDistanceField::new(PoseSpace::planar_xy_yaw(0.2));
    let home = [0.1, 0.1, 0.0];
    let start = Pose::new(home, [0.0; 3]);
    let goal = Pose::new([0.4, 0.3, 0.0], [0.0, 0.0, PI]);
    let ik = move |p: &Pose, g: &Grasp| {
        let yaw = p.rotation()[2].abs();
        let at_home = p.translation_distance(&Pose::from_translation(home)) <= 0.01;
        match g.id.as_str() {
            "rim" => at_home || yaw <= PI / 2.0 + 1e-12,
            "side" => yaw >= PI / 2.0 - 1e-12,
            _ => false,
        }
    };
    let grasps = [
        Grasp::new("rim", Pose::from_translation([0.0, 0.0, 0.05]), 0.9),
        Grasp::new(
            "side",
            Pose::new([0.05, 0.0, 0.0], [0.0, 0.0, PI / 2.0]),
            0.5,
        ),
    ];
    let plan = omanip(&field, &start, &goal, &grasps, &ik, &PlanParams::default())
        .map_err(|e| e.to_string())?;
    let segs = &plan.segments;
    let continuous = segs
        .windows(2)
        .all(|w| w[0].trajectory.last() == w[1].trajectory.first());
    // re-check every pose against the rule directly, not through the planner
    let feasible = segs.iter().all(|s| {
        s.trajectory.poses().iter().all(|p| {
            let yaw = p.rotation()[2].abs();
            match s.grasp.id.as_str() {
                "rim" => p.translation() == home || yaw <= PI / 2.0 + 1e-12,
                _ => yaw >= PI / 2.0 - 1e-12,
            }
        })
    });
    let ends = segs.first().map(|s| *s.trajectory.first()) == Some(start)
        && segs.last().map(|s| *s.trajectory.last()) == Some(goal);
    check(
        segs.len() == 2 && continuous && feasible && ends,
        format!(
            "{} segments ({}), continuous {continuous}, feasible {feasible}, regrasp at {:?}",
            segs.len(),
            segs.iter()
                .map(|s| s.grasp.id.as_str())
                .collect::<Vec<_>>()
                .join(" -> "),
            plan.intermediate_poses
                .iter()
                .map(|p| p.to_array())
                .collect::<Vec<_>>()
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_timefield"))
        .current_dir(dir)
        .args(["--seed", "3", "--threads", "1"])
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

/// Metrics CSV without the wall-clock column.
fn without_timing(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    let col = text
        .lines()
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == "planning_time_s")
        .unwrap();
    text.lines()
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let dir = root.path().join(run);
        fs::create_dir_all(&dir).unwrap();
        cli(
            &dir,
            &["gen-data", "--n-tuples", "500", "--out", "data.csv"],
        )?;
        cli(
            &dir,
            &[
                "train",
                "--data",
                "data.csv",
                "--epochs",
                "1",
                "--out",
                "model.json",
            ],
        )?;
        cli(
            &dir,
            &[
                "bench",
                "--model",
                "model.json",
                "--queries",
                "5",
                "--out",
                "metrics.csv",
            ],
        )?;
        runs.push((
            fs::read(dir.join("data.csv")).unwrap(),
            fs::read(dir.join("model.json")).unwrap(),
            without_timing(&dir.join("metrics.csv")),
        ));
    }
    let same = [
        runs[0].0 == runs[1].0,
        runs[0].1 == runs[1].1,
        runs[0].2 == runs[1].2,
    ];
    check(
        same.iter().all(|&s| s),
        format!("dataset, checkpoint, metrics identical: {same:?}"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, f64);

fn main() {
    let criteria: [Criterion; 9] = [
        ("symmetry and boundary", symmetry_and_boundary, 10.0),
        ("gradient correctness", gradient_correctness, 30.0),
        ("loss identities", loss_identities, 1.0),
        ("fast marching oracle", fmm_oracle, 60.0),
        ("free-space learning", free_space_learning, 600.0),
        ("tabletop analogue", tabletop_analogue, 1800.0),
        ("dirichlet vs viscosity cost", dirichlet_vs_viscosity, 900.0),
        ("regrasp scenario", regrasp_scenario, 10.0),
        ("determinism", determinism, 120.0),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (i, &(name, run, budget)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        let (verdict, detail) = match outcome {
            Ok(d) if secs < budget => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; over the {budget:.0} s budget")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("criterion {n} [{name}]: {verdict} ({secs:.1} s) {detail}");
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
