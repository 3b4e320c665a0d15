use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use timefield::bench::{
    benchmark_queries, emit_plot_data, generate_dataset, run_benchmark, write_metrics_csv,
    write_trajectories, BenchOptions, EnvName, EnvSpec, SliceJob, SliceRequest,
};
use timefield::geom::{Pose, Scene};
use timefield::net::{
    load_checkpoint, save_checkpoint, CheckpointMeta, ModelConfig, TimeFieldModel,
};
use timefield::oracle::{
    backtrack_from, compare_fields, dijkstra_solve, fmm_solve, save_grid, GridGeometry, SpeedGrid,
    TimeGrid,
};
use timefield::plan::{omanip, validate_trajectory, PlanParams};
use timefield::train::{train, Dataset, Regularizer, TrainConfig};
use timefield::{Error, FieldFamily};

/// Learned travel-time fields for object manipulation planning.
#[derive(Parser)]
#[command(name = "timefield", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample valid start/goal tuples and label them with ground-truth speed.
    GenData {
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long, default_value_t = 10_000)]
        n_tuples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a time field to a dataset and write a checkpoint.
    Train {
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON training config; replaces the environment's recipe.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        regularizer: Option<Regularizer>,
        #[arg(long, value_enum)]
        model: Option<ModelSize>,
        #[arg(long)]
        fourier_scale: Option<f64>,
        /// Per-epoch loss log (CSV).
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Plan one manipulation task with a trained field.
    Plan {
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        object: String,
        /// x,y | x,y,z | x,y,z,yaw | x,y,z,roll,pitch,yaw
        #[arg(long, allow_hyphen_values = true)]
        start: String,
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 3)]
        depth_limit: usize,
        /// Trajectory output (CSV).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Benchmark a checkpoint on random queries.
    Bench {
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 100)]
        queries: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trajectories: Option<PathBuf>,
        /// Moving-average smoothing window; 1 disables it.
        #[arg(long, default_value_t = 1)]
        smoothing: usize,
    },
    /// Solve the grid Eikonal problem on a 2D slice of the environment.
    Oracle {
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long)]
        object: String,
        /// x,y of the source.
        #[arg(long, allow_hyphen_values = true)]
        goal: String,
        /// Fixed object yaw of the slice (rad).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw: f64,
        #[arg(long)]
        spacing: Option<f64>,
        #[arg(long, value_enum, default_value_t = Solver::Fmm)]
        solver: Solver,
        #[arg(long)]
        out: PathBuf,
        /// Backtrack a path from this x,y and report its length.
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        /// Compare a checkpoint against the grid at the start.
        #[arg(long, requires = "start")]
        compare: Option<PathBuf>,
    },
    /// Emit CSV for offline plots: histograms, trajectories, field slices.
    PlotData {
        #[arg(long)]
        metrics: PathBuf,
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Checkpoint to slice; needs --object and --goal.
        #[arg(long, requires_all = ["object", "goal"])]
        model: Option<PathBuf>,
        #[arg(long, default_value = "tabletop_center_obstacle")]
        env: EnvName,
        #[arg(long)]
        object: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        goal: Option<String>,
        #[arg(long, default_value_t = 51)]
        samples: usize,
        /// Pair the slice with an FMM solution on the same grid.
        #[arg(long)]
        with_oracle: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelSize {
    Tiny,
    Compact,
    Default,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Solver {
    Fmm,
    Dijkstra,
}

/// Plan failures exit with 2; everything else that goes wrong exits with 3.
enum Failure {
    Plan(String),
    Other(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::PlanFailure { .. } | Error::NoConvergence { .. } | Error::DegenerateDecouple => {
                Failure::Plan(e.to_string())
            }
            other => Failure::Other(other),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match run(cli.command, cli.seed) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Plan(msg)) => {
            eprintln!("plan failed: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn run(command: Command, seed: u64) -> Result<(), Failure> {
    match command {
        Command::GenData { env, n_tuples, out } => {
            let env = EnvSpec::new(env, seed);
            let scene = env.scene()?;
            let report = generate_dataset(&env, &scene, n_tuples, seed)?;
            report.dataset.save(&out)?;
            println!(
                "{} tuples in {:.2} s ({} rejected samples) -> {}",
                report.dataset.len(),
                report.wall_seconds,
                report.rejections,
                out.display()
            );
        }
        Command::Train {
            env,
            data,
            out,
            config,
            epochs,
            lr,
            epsilon,
            regularizer,
            model,
            fourier_scale,
            log,
        } => {
            let env = EnvSpec::new(env, seed);
            let scene = env.scene()?;
            let dataset = Dataset::load(&data)?;
            let recipe = env.training_recipe();
            let mut cfg = match config {
                Some(path) => TrainConfig::load(&path)?,
                None => recipe.train,
            };
            if let Some(n) = epochs {
                cfg = TrainConfig {
                    epochs: n,
                    alpha_schedule: rescale_schedule(&cfg, n),
                    ..cfg
                };
            }
            cfg.learning_rate = lr.unwrap_or(cfg.learning_rate);
            cfg.epsilon = epsilon.unwrap_or(cfg.epsilon);
            cfg.regularizer = regularizer.unwrap_or(cfg.regularizer);
            cfg.rng_seed = seed;
            let mut mc = match model {
                Some(ModelSize::Tiny) => ModelConfig::tiny(env.space),
                Some(ModelSize::Compact) => ModelConfig::compact(env.space),
                Some(ModelSize::Default) => ModelConfig::default().with_space(env.space),
                None => recipe.model.clone(),
            };
            if model.is_some() {
                mc.fourier_scale = recipe.model.fourier_scale;
            }
            mc.fourier_scale = fourier_scale.unwrap_or(mc.fourier_scale);
            let net = TimeFieldModel::new(mc, seed)?;
            let (net, train_log) = train(net, &dataset, &scene, &cfg)?;
            let meta = CheckpointMeta {
                speed_params: dataset.speed_params,
                scene_hash: scene.hash(),
            };
            save_checkpoint(&net, &meta, &out)?;
            if let Some(path) = log {
                train_log.write_csv(&path)?;
            }
            println!(
                "trained {} epochs, final loss {:.5} -> {}",
                train_log.epochs.len(),
                train_log.final_loss().unwrap_or(f64::NAN),
                out.display()
            );
        }
        Command::Plan {
            env,
            model,
            object,
            start,
            goal,
            eta,
            depth_limit,
            out,
        } => {
            let env = EnvSpec::new(env, seed);
            let scene = env.scene()?;
            let (net, meta) = load_checkpoint(&model, Some(&scene.hash()), false)?;
            let space = net.config().space;
            let start = space.project(&parse_pose(&start)?);
            let goal = space.project(&parse_pose(&goal)?);
            let field = net.field_for(scene.object(&object)?)?;
            let mut params = PlanParams {
                depth_limit,
                ..PlanParams::default()
            };
            params.march.s_const = meta.speed_params.s_const;
            params.march.eta = eta.unwrap_or(params.march.eta);
            let plan = omanip(
                field.as_ref(),
                &start,
                &goal,
                &env.default_grasps(),
                &env.ik(),
                &params,
            )?;
            let mut clearance = f64::INFINITY;
            for seg in &plan.segments {
                clearance = clearance.min(
                    validate_trajectory(&scene, &object, &seg.trajectory, 0.001)?.min_distance,
                );
            }
            if let Some(path) = out {
                write_trajectories(&path, &[Some(plan.clone())])?;
            }
            println!(
                "{} segment(s), length {:.4} m, planned in {:.4} s, min clearance {:.4} m",
                plan.segments.len(),
                plan.total_length_m,
                plan.plan_time_s,
                clearance
            );
            if clearance <= scene.collision_margin() {
                return Err(Failure::Plan("trajectory collides with an obstacle".into()));
            }
        }
        Command::Bench {
            env,
            model,
            queries,
            out,
            trajectories,
            smoothing,
        } => {
            let env = EnvSpec::new(env, seed);
            let scene = env.scene()?;
            let (net, meta) = load_checkpoint(&model, Some(&scene.hash()), false)?;
            let mut opts = BenchOptions {
                smoothing_window: smoothing,
                ..BenchOptions::default()
            };
            opts.plan.march.s_const = meta.speed_params.s_const;
            let qs = benchmark_queries(&env, &scene, queries, seed)?;
            let report = run_benchmark(&net, &env, &scene, &qs, &opts)?;
            write_metrics_csv(&out, &report.records)?;
            if let Some(path) = trajectories {
                write_trajectories(&path, &report.plans)?;
            }
            println!("{}", report.summary);
        }
        Command::Oracle {
            env,
            object,
            goal,
            yaw,
            spacing,
            solver,
            out,
            start,
            compare,
        } => {
            let env = EnvSpec::new(env, seed);
            let scene = env.scene()?;
            let times = solve_slice(
                &env,
                &scene,
                &object,
                &parse_pose(&goal)?,
                yaw,
                spacing,
                solver,
            )?;
            save_grid(
                &out,
                &times.geometry,
                times.orientation,
                Some(times.source()),
                times.values(),
            )?;
            println!("{} nodes -> {}", times.values().len(), out.display());
            if let Some(start) = start {
                let s = parse_pose(&start)?;
                let path = backtrack_from(&times, s.translation())?;
                println!(
                    "T(start) = {:.5}, backtracked length {:.4} m",
                    times.value_at(&s.translation()).unwrap_or(f64::NAN),
                    path.length_m()
                );
                if let Some(ckpt) = compare {
                    let (net, meta) = load_checkpoint(&ckpt, Some(&scene.hash()), false)?;
                    let field = net.field_for(scene.object(&object)?)?;
                    let rot = [0.0, 0.0, yaw];
                    let g = times.geometry.position(times.source());
                    let pair = (Pose::new(s.translation(), rot), Pose::new(g, rot));
                    let mut march = PlanParams::default().march;
                    march.s_const = meta.speed_params.s_const;
                    let cmp = compare_fields(field.as_ref(), &times, &[pair], Some(&march))?;
                    println!(
                        "learned vs grid: relative time error {:.4}, path length ratio {:.4}",
                        cmp.mean_relative_error,
                        cmp.mean_path_ratio().unwrap_or(f64::NAN)
                    );
                }
            }
        }
        Command::PlotData {
            metrics,
            trajectories,
            out_dir,
            model,
            env,
            object,
            goal,
            samples,
            with_oracle,
        } => {
            let mut jobs = Vec::new();
            let loaded;
            let field;
            let oracle: Option<TimeGrid>;
            if let (Some(model), Some(object), Some(goal)) = (model, object, goal) {
                let env = EnvSpec::new(env, seed);
                let scene = env.scene()?;
                loaded = load_checkpoint(&model, Some(&scene.hash()), false)?.0;
                let space = loaded.config().space;
                let goal = space.project(&parse_pose(&goal)?);
                field = loaded.field_for(scene.object(&object)?)?;
                let (lo, hi) = (env.bounds.min, env.bounds.max);
                let mut request = SliceRequest::xy(goal, [lo[0], lo[1]], [hi[0], hi[1]], samples);
                oracle = if with_oracle {
                    let h = (hi[0] - lo[0]) / (samples.max(2) - 1) as f64;
                    let times = solve_slice(
                        &env,
                        &scene,
                        &object,
                        &goal,
                        goal.rotation()[2],
                        Some(h),
                        Solver::Fmm,
                    )?;
                    let g = times.geometry.clone();
                    request.min = [g.origin[0], g.origin[1]];
                    request.max = [
                        g.origin[0] + (g.dims[0] - 1) as f64 * g.spacing,
                        g.origin[1] + (g.dims[1] - 1) as f64 * g.spacing,
                    ];
                    request.samples = [g.dims[0], g.dims[1]];
                    request.goal = goal.with_translation(g.position(times.source()));
                    Some(times)
                } else {
                    None
                };
                jobs.push(SliceJob {
                    name: object.clone(),
                    field: field.as_ref(),
                    request,
                    oracle: oracle.as_ref(),
                });
            }
            let written = emit_plot_data(&metrics, trajectories.as_deref(), &jobs, &out_dir)?;
            for path in written {
                println!("{}", path.display());
            }
        }
    }
    Ok(())
}

/// Keeps a configured alpha schedule's shape when only the epoch count changes.
fn rescale_schedule(cfg: &TrainConfig, epochs: usize) -> timefield::train::AlphaSchedule {
    let a = cfg.alpha_schedule;
    if a.delta_per_epoch == 0.0 {
        a
    } else {
        timefield::train::AlphaSchedule::for_epochs(epochs)
    }
}

fn solve_slice(
    env: &EnvSpec,
    scene: &Scene,
    object: &str,
    goal: &Pose,
    yaw: f64,
    spacing: Option<f64>,
    solver: Solver,
) -> Result<TimeGrid, Error> {
    let h = spacing.or(env.grid_spacing).unwrap_or(0.01);
    let (lo, hi) = (env.bounds.min, env.bounds.max);
    let z = goal.translation()[2];
    let geometry = GridGeometry::planar_covering([lo[0], lo[1]], [hi[0], hi[1]], z, h)?;
    let source = geometry
        .nearest_node(&goal.translation())
        .ok_or_else(|| Error::InvalidInput("goal lies outside the environment bounds".into()))?;
    let speed = SpeedGrid::from_scene(
        scene,
        object,
        geometry,
        [0.0, 0.0, yaw],
        &env.speed,
        &env.reachability(),
    )?;
    match solver {
        Solver::Fmm => fmm_solve(&speed, source),
        Solver::Dijkstra => dijkstra_solve(&speed, source),
    }
}

fn parse_pose(text: &str) -> Result<Pose, Error> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidInput(format!("bad pose {text:?}: {e}")))?;
    let pose = match v.as_slice() {
        [x, y] => Pose::from_translation([*x, *y, 0.0]),
        [x, y, z] => Pose::from_translation([*x, *y, *z]),
        [x, y, z, yaw] => Pose::new([*x, *y, *z], [0.0, 0.0, *yaw]),
        [x, y, z, r, p, w] => Pose::new([*x, *y, *z], [*r, *p, *w]),
        _ => {
            return Err(Error::InvalidInput(format!(
                "pose {text:?} needs 2, 3, 4 or 6 values"
            )))
        }
    };
    if !pose.is_finite() {
        return Err(Error::InvalidInput(format!("pose {text:?} is not finite")));
    }
    Ok(pose)
}
