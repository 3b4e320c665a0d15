use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldFamily;
use crate::geom::{Pose, Scene};
use crate::net::load_checkpoint;
use crate::plan::{omanip, smooth_checked, validate_trajectory, PlanParams, PlanResult};
use crate::speed::sample_pose_with_clearance;

use super::env::EnvSpec;

/// One benchmark query's outcome. `length_m` is present only on success.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub query: usize,
    pub env: String,
    pub object_id: String,
    pub seed: u64,
    pub success: bool,
    pub segments: usize,
    pub planning_time_s: f64,
    pub length_m: Option<f64>,
    pub min_clearance_m: Option<f64>,
    /// Empty on success.
    pub failure: String,
}

pub const METRICS_HEADER: [&str; 10] = [
    "query",
    "env",
    "object_id",
    "seed",
    "success",
    "segments",
    "planning_time_s",
    "length_m",
    "min_clearance_m",
    "failure",
];

/// Mean ± sample standard deviation of planning time (all queries) and path
/// length (successful queries), plus the success rate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Summary {
    pub queries: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub time_mean_s: f64,
    pub time_std_s: f64,
    pub length_mean_m: f64,
    pub length_std_m: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Summary {
    pub fn from_records(records: &[MetricsRecord]) -> Self {
        if records.is_empty() {
            return Summary::default();
        }
        let times: Vec<f64> = records.iter().map(|r| r.planning_time_s).collect();
        let lengths: Vec<f64> = records
            .iter()
            .filter(|r| r.success)
            .filter_map(|r| r.length_m)
            .collect();
        let successes = records.iter().filter(|r| r.success).count();
        let (time_mean_s, time_std_s) = mean_std(&times);
        let (length_mean_m, length_std_m) = mean_std(&lengths);
        Summary {
            queries: records.len(),
            successes,
            success_rate: successes as f64 / records.len() as f64,
            time_mean_s,
            time_std_s,
            length_mean_m,
            length_std_m,
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "time {:.4} ± {:.4} s | length {:.3} ± {:.3} m | success {:.1}% ({}/{})",
            self.time_mean_s,
            self.time_std_s,
            self.length_mean_m,
            self.length_std_m,
            100.0 * self.success_rate,
            self.successes,
            self.queries
        )
    }
}

/// Writes the header even when there are no rows.
pub fn write_metrics_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_error)?;
    w.write_record(METRICS_HEADER).map_err(csv_error)?;
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize().enumerate() {
        out.push(row.map_err(|e| Error::parse(path.display().to_string(), i + 2, e.to_string()))?);
    }
    Ok(out)
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::invalid(format!("csv: {other:?}")),
    }
}

/// A start/goal pair for one object.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchQuery {
    pub index: usize,
    pub object_id: String,
    pub start: Pose,
    pub goal: Pose,
    pub seed: u64,
}

/// Stream offset separating query sampling from dataset sampling.
const QUERY_STREAM: u64 = 1 << 40;

/// `n` random start/goal pairs that clear the collision margin, cycling
/// through the environment's objects.
pub fn benchmark_queries(
    env: &EnvSpec,
    scene: &Scene,
    n: usize,
    seed: u64,
) -> Result<Vec<BenchQuery>> {
    let ids = env.object_ids();
    if ids.is_empty() && n > 0 {
        return Err(Error::invalid("environment has no objects"));
    }
    (0..n)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(QUERY_STREAM + i as u64);
            let id = &ids[i % ids.len()];
            let margin = scene.collision_margin();
            let start = sample_pose_with_clearance(scene, id, &env.space, margin, &mut rng)?.pose;
            let goal = sample_pose_with_clearance(scene, id, &env.space, margin, &mut rng)?.pose;
            Ok(BenchQuery {
                index: i,
                object_id: id.clone(),
                start,
                goal,
                seed,
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchOptions {
    pub plan: PlanParams,
    /// Densification step of the collision check.
    pub validation_resolution_m: f64,
    /// Moving-average window; 1 disables smoothing.
    pub smoothing_window: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            plan: PlanParams::default(),
            validation_resolution_m: 0.001,
            smoothing_window: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub records: Vec<MetricsRecord>,
    /// The plan behind each record, when planning succeeded.
    pub plans: Vec<Option<PlanResult>>,
    pub summary: Summary,
}

/// Plans every query with `omanip` over the learned (or analytic) field and
/// checks the result at `validation_resolution_m`. A query succeeds when a
/// plan exists and no densified pose comes within the collision margin.
///
/// Queries run in parallel; results keep query order.
pub fn run_benchmark<F>(
    family: &F,
    env: &EnvSpec,
    scene: &Scene,
    queries: &[BenchQuery],
    opts: &BenchOptions,
) -> Result<BenchReport>
where
    F: FieldFamily + Sync + ?Sized,
{
    let grasps = env.default_grasps();
    let ik = env.ik();
    let outcomes = queries
        .par_iter()
        .map(|q| -> Result<(MetricsRecord, Option<PlanResult>)> {
            let field = family.field_for(scene.object(&q.object_id)?)?;
            let started = Instant::now();
            let planned = omanip(field.as_ref(), &q.start, &q.goal, &grasps, &ik, &opts.plan);
            let mut record = MetricsRecord {
                query: q.index,
                env: env.name.to_string(),
                object_id: q.object_id.clone(),
                seed: q.seed,
                success: false,
                segments: 0,
                planning_time_s: 0.0,
                length_m: None,
                min_clearance_m: None,
                failure: String::new(),
            };
            let mut plan = match planned {
                Ok(p) => p,
                Err(e) => {
                    record.planning_time_s = started.elapsed().as_secs_f64();
                    record.failure = failure_label(&e);
                    return Ok((record, None));
                }
            };
            if opts.smoothing_window > 1 {
                for seg in &mut plan.segments {
                    let res = 2.0 * opts.validation_resolution_m;
                    seg.trajectory = smooth_checked(
                        &seg.trajectory,
                        opts.smoothing_window,
                        scene,
                        &q.object_id,
                        res,
                    )?
                    .0;
                }
                plan.total_length_m = plan.segments.iter().map(|s| s.trajectory.length_m()).sum();
            }
            record.planning_time_s = started.elapsed().as_secs_f64();
            record.segments = plan.segments.len();
            let mut clearance = f64::INFINITY;
            for seg in &plan.segments {
                let report = validate_trajectory(
                    scene,
                    &q.object_id,
                    &seg.trajectory,
                    opts.validation_resolution_m,
                )?;
                clearance = clearance.min(report.min_distance);
            }
            record.min_clearance_m = Some(clearance);
            if clearance > scene.collision_margin() {
                record.success = true;
                record.length_m = Some(plan.total_length_m);
            } else {
                record.failure = "collision".into();
            }
            Ok((record, Some(plan)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (records, plans): (Vec<_>, Vec<_>) = outcomes.into_iter().unzip();
    let summary = Summary::from_records(&records);
    Ok(BenchReport {
        records,
        plans,
        summary,
    })
}

fn failure_label(e: &Error) -> String {
    match e {
        Error::PlanFailure { reason, .. } if reason.starts_with("marching failed") => {
            "march_failed".into()
        }
        Error::PlanFailure { .. } => "no_feasible_grasp".into(),
        Error::NoConvergence { .. } => "no_convergence".into(),
        Error::DegenerateGradient { .. } => "degenerate_gradient".into(),
        other => other.to_string(),
    }
}

/// Loads a checkpoint, refuses it unless its scene hash matches `scene`,
/// then benchmarks `n_queries` seeded queries.
pub fn run_benchmark_checkpoint(
    checkpoint: &Path,
    env: &EnvSpec,
    scene: &Scene,
    n_queries: usize,
    seed: u64,
    opts: &BenchOptions,
) -> Result<BenchReport> {
    let (model, meta) = load_checkpoint(checkpoint, Some(&scene.hash()), false)?;
    let mut opts = *opts;
    opts.plan.march.s_const = meta.speed_params.s_const;
    let queries = benchmark_queries(env, scene, n_queries, seed)?;
    run_benchmark(&model, env, scene, &queries, &opts)
}

/// One row per pose: query, segment, grasp, index, then the six pose values.
pub fn write_trajectories(path: &Path, plans: &[Option<PlanResult>]) -> Result<()> {
    let mut out = String::from("query,segment,grasp,index,x,y,z,roll,pitch,yaw\n");
    for (q, plan) in plans.iter().enumerate() {
        let Some(plan) = plan else { continue };
        for (s, seg) in plan.segments.iter().enumerate() {
            for (i, p) in seg.trajectory.poses().iter().enumerate() {
                let a = p.to_array();
                out.push_str(&format!(
                    "{q},{s},{},{i},{},{},{},{},{},{}\n",
                    seg.grasp.id, a[0], a[1], a[2], a[3], a[4], a[5]
                ));
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}
