//! Trajectory extraction from time fields and regrasp planning.

mod grasp;
mod trajectory;

pub use grasp::{load_grasps, parse_grasps, Grasp, IkProvider, ShellIk};
pub use trajectory::{translation_length, Trajectory, TrajectorySource};

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::TimeField;
use crate::geom::{angular_distance, transform_cloud, Pose, PoseSpace, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarchParams {
    pub eta: f64,
    pub d_s: f64,
    pub max_iters: usize,
    /// Upper clamp on the speed read off the field.
    pub s_const: f64,
}

impl Default for MarchParams {
    fn default() -> Self {
        MarchParams {
            eta: 0.03,
            d_s: 0.05,
            max_iters: 2000,
            s_const: 1.0,
        }
    }
}

impl MarchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.d_s > 0.0 && self.s_const > 0.0) {
            return Err(Error::invalid("eta, d_s and s_const must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarchStats {
    pub iterations: usize,
    /// Metric gap between the fronts when they met.
    pub meet_gap: f64,
}

pub fn march_bidirectional(
    field: &dyn TimeField,
    p_s: &Pose,
    p_g: &Pose,
    params: &MarchParams,
) -> Result<Trajectory> {
    Ok(march_with_stats(field, p_s, p_g, params)?.0)
}

/// Descends the field from both ends at once,
/// `p ← p − η S² M⁻¹∇T` with `S = 1/‖∇T‖`, until the fronts are within
/// `d_s`, then bridges the remaining gap by interpolation.
///
/// Each step is capped at half the current gap so the fronts never cross.
pub fn march_with_stats(
    field: &dyn TimeField,
    p_s: &Pose,
    p_g: &Pose,
    params: &MarchParams,
) -> Result<(Trajectory, MarchStats)> {
    params.validate()?;
    let space = field.space();
    let mut a = *p_s;
    let mut b = *p_g;
    let mut start_chain = vec![a];
    let mut goal_chain = vec![b];
    let mut gap = space.distance(&a, &b);
    let mut iterations = 0;
    while gap >= params.d_s {
        if iterations == params.max_iters {
            return Err(Error::NoConvergence {
                iterations,
                gap,
                start_chain,
                goal_chain,
            });
        }
        let e = field.evaluate(&a, &b)?;
        let step_a = march_step(&space, &e.grad_start, params, gap)?;
        let step_b = march_step(&space, &e.grad_goal, params, gap)?;
        a = space.offset(&a, &step_a);
        b = space.offset(&b, &step_b);
        start_chain.push(a);
        goal_chain.push(b);
        gap = space.distance(&a, &b);
        iterations += 1;
    }
    let bridge = (gap / params.eta).ceil() as usize;
    let mut poses = start_chain;
    for i in 1..bridge {
        poses.push(space.interpolate(&a, &b, i as f64 / bridge as f64));
    }
    goal_chain.reverse();
    poses.extend(goal_chain);
    Ok((
        Trajectory::new(poses, TrajectorySource::LearnedField),
        MarchStats {
            iterations,
            meet_gap: gap,
        },
    ))
}

fn march_step(
    space: &PoseSpace,
    grad: &[f64; 6],
    params: &MarchParams,
    gap: f64,
) -> Result<[f64; 6]> {
    let norm = space.gradient_norm(grad);
    if !(norm > 1e-12) {
        return Err(Error::DegenerateGradient { norm });
    }
    let speed = (1.0 / norm).min(params.s_const);
    let raised = space.raise(grad);
    // metric length of η S² M⁻¹∇T is η S
    let length = params.eta * speed;
    let scale = length.min(0.5 * gap) / norm;
    Ok(raised.map(|v| -scale * v))
}

/// In-place intermediate pose: the start pose with the rotation component
/// farthest from its goal value (ties to roll, then pitch) set to the goal's.
pub fn decouple(p_s: &Pose, p_g: &Pose) -> Result<Pose> {
    let rs = p_s.rotation();
    let rg = p_g.rotation();
    let mut best = 0;
    let mut best_d = angular_distance(rs[0], rg[0]);
    for k in 1..3 {
        let d = angular_distance(rs[k], rg[k]);
        if d > best_d {
            best = k;
            best_d = d;
        }
    }
    if best_d == 0.0 {
        return Err(Error::DegenerateDecouple);
    }
    let mut r = rs;
    r[best] = rg[best];
    Ok(Pose::new(p_s.translation(), r))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub trajectory: Trajectory,
    pub grasp: Grasp,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub segments: Vec<PlanSegment>,
    /// Poses at which the object is regrasped.
    pub intermediate_poses: Vec<Pose>,
    pub total_length_m: f64,
    pub plan_time_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanParams {
    pub march: MarchParams,
    pub depth_limit: usize,
}

impl Default for PlanParams {
    fn default() -> Self {
        PlanParams {
            march: MarchParams::default(),
            depth_limit: 3,
        }
    }
}

struct Failure {
    reason: String,
    depth: usize,
    deepest_infeasible: Option<Pose>,
    best_coverage: f64,
}

impl Failure {
    fn deeper(self, other: Failure) -> Failure {
        if other.depth > self.depth {
            other
        } else {
            self
        }
    }
}

/// Plans an object trajectory and assigns grasps, splitting the task at an
/// in-place rotation when no single grasp is feasible along the whole path.
pub fn omanip(
    field: &dyn TimeField,
    p_s: &Pose,
    p_g: &Pose,
    grasps: &[Grasp],
    ik: &dyn IkProvider,
    params: &PlanParams,
) -> Result<PlanResult> {
    if grasps.is_empty() {
        return Err(Error::invalid("no grasps supplied"));
    }
    if grasps.windows(2).any(|w| w[0].score < w[1].score) {
        return Err(Error::invalid("grasps must be sorted by descending score"));
    }
    let started = Instant::now();
    let mut segments = Vec::new();
    if let Err(f) = solve(
        field,
        p_s,
        p_g,
        grasps,
        ik,
        params,
        params.depth_limit,
        0,
        &mut segments,
    ) {
        return Err(Error::PlanFailure {
            reason: f.reason,
            deepest_infeasible: f.deepest_infeasible,
            best_coverage: f.best_coverage,
        });
    }
    let intermediate_poses = segments[1..]
        .iter()
        .map(|s| *s.trajectory.first())
        .collect();
    let total_length_m = segments.iter().map(|s| s.trajectory.length_m()).sum();
    Ok(PlanResult {
        segments,
        intermediate_poses,
        total_length_m,
        plan_time_s: started.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn solve(
    field: &dyn TimeField,
    p_s: &Pose,
    p_g: &Pose,
    grasps: &[Grasp],
    ik: &dyn IkProvider,
    params: &PlanParams,
    depth_left: usize,
    depth: usize,
    out: &mut Vec<PlanSegment>,
) -> std::result::Result<(), Failure> {
    let traj = march_bidirectional(field, p_s, p_g, &params.march).map_err(|e| Failure {
        reason: format!("marching failed: {e}"),
        depth,
        deepest_infeasible: None,
        best_coverage: 0.0,
    })?;
    let mut best_coverage = -1.0;
    let mut deepest_infeasible = None;
    for grasp in grasps {
        let mut feasible = 0;
        let mut first_bad = None;
        for pose in traj.poses() {
            if ik.feasible(pose, grasp) {
                feasible += 1;
            } else if first_bad.is_none() {
                first_bad = Some(*pose);
            }
        }
        if first_bad.is_none() {
            out.push(PlanSegment {
                trajectory: traj,
                grasp: grasp.clone(),
            });
            return Ok(());
        }
        let coverage = feasible as f64 / traj.len() as f64;
        if coverage > best_coverage {
            best_coverage = coverage;
            deepest_infeasible = first_bad;
        }
    }
    let fail = |reason: String| Failure {
        reason,
        depth,
        deepest_infeasible,
        best_coverage,
    };
    if depth_left == 0 {
        return Err(fail(
            "no single grasp is feasible and the depth limit is reached".into(),
        ));
    }
    let p_c = decouple(p_s, p_g).map_err(|e| fail(format!("no single grasp is feasible: {e}")))?;
    let mark = out.len();
    let left = solve(
        field,
        p_s,
        &p_c,
        grasps,
        ik,
        params,
        depth_left - 1,
        depth + 1,
        out,
    );
    let right = match left {
        Ok(()) => solve(
            field,
            &p_c,
            p_g,
            grasps,
            ik,
            params,
            depth_left - 1,
            depth + 1,
            out,
        ),
        Err(e) => Err(e),
    };
    right.map_err(|e| {
        out.truncate(mark);
        fail(String::new()).deeper(e)
    })
}

/// Moving average over translations and wrapped rotations, endpoints
/// pinned; the window shrinks symmetrically near the ends.
pub fn smooth(traj: &Trajectory, window: usize) -> Result<Trajectory> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "smoothing window must be odd, got {window}"
        )));
    }
    let poses = traj.poses();
    let n = poses.len();
    let half = window / 2;
    let space = PoseSpace::full(1.0);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let h = half.min(i).min(n - 1 - i);
        if h == 0 {
            out.push(poses[i]);
            continue;
        }
        let mut acc = [0.0; 6];
        for p in &poses[i - h..=i + h] {
            let d = space.delta(&poses[i], p);
            for (a, v) in acc.iter_mut().zip(d) {
                *a += v;
            }
        }
        let m = (2 * h + 1) as f64;
        out.push(space.offset(&poses[i], &acc.map(|v| v / m)));
    }
    Ok(Trajectory::new(out, traj.source()))
}

/// Smooths, but keeps the input when smoothing would deepen the worst
/// penetration of the collision margin. The flag reports whether smoothing
/// was applied.
pub fn smooth_checked(
    traj: &Trajectory,
    window: usize,
    scene: &Scene,
    object_id: &str,
    resolution_m: f64,
) -> Result<(Trajectory, bool)> {
    let smoothed = smooth(traj, window)?;
    let before = validate_trajectory(scene, object_id, traj, resolution_m)?;
    let after = validate_trajectory(scene, object_id, &smoothed, resolution_m)?;
    let margin = scene.collision_margin();
    let penetration = |d: f64| (margin - d).max(0.0);
    if penetration(after.min_distance) <= penetration(before.min_distance) {
        Ok((smoothed, true))
    } else {
        Ok((traj.clone(), false))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    /// Smallest obstacle distance over all densified poses; infinite in free space.
    pub min_distance: f64,
    pub collision: bool,
    pub length_m: f64,
    pub samples: usize,
}

/// Densifies so no object point moves more than `resolution_m` between
/// checked poses, and measures clearance at every one.
pub fn validate_trajectory(
    scene: &Scene,
    object_id: &str,
    traj: &Trajectory,
    resolution_m: f64,
) -> Result<ValidationReport> {
    if !(resolution_m > 0.0) {
        return Err(Error::invalid("resolution must be positive"));
    }
    let cloud = scene.object(object_id)?;
    let radius = cloud.radius();
    let space = PoseSpace::full(1.0);
    let mut min_distance = f64::INFINITY;
    let mut samples = 0;
    let mut chain_length = 0.0;
    let mut prev: Option<Pose> = None;
    let mut check = |pose: &Pose| -> Result<()> {
        samples += 1;
        if !scene.is_free_space() {
            let d = scene.exact_distance(&transform_cloud(cloud, pose)?)?;
            min_distance = min_distance.min(d);
        }
        Ok(())
    };
    for pose in traj.poses() {
        if let Some(p) = prev {
            let dt = p.translation_distance(pose);
            let dr: f64 = p
                .rotation()
                .iter()
                .zip(pose.rotation())
                .map(|(a, b)| angular_distance(*a, b))
                .sum();
            let n = ((dt + radius * dr) / resolution_m).ceil().max(1.0) as usize;
            let mut last = p;
            for k in 1..=n {
                let q = space.interpolate(&p, pose, k as f64 / n as f64);
                chain_length += last.translation_distance(&q);
                check(&q)?;
                last = q;
            }
        } else {
            check(pose)?;
        }
        prev = Some(*pose);
    }
    Ok(ValidationReport {
        min_distance,
        collision: min_distance <= scene.collision_margin(),
        length_m: chain_length,
        samples,
    })
}

#[cfg(test)]
mod tests;
