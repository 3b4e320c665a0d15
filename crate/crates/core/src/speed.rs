//! Ground-truth speed over object poses, reachability gating and the
//! progressive speed schedule.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{min_obstacle_distance, transform_cloud, Aabb, Pose, PoseSpace, Scene};

/// Consecutive rejections after which pose sampling gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: usize = 10_000;

/// Constants of the clipped distance-to-speed map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedParams {
    pub s_const: f64,
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for SpeedParams {
    fn default() -> Self {
        SpeedParams {
            s_const: 1.0,
            d_min: 0.05,
            d_max: 0.3,
        }
    }
}

impl SpeedParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s_const > 0.0
            && self.d_min > 0.0
            && self.d_min < self.d_max
            && self.d_max.is_finite())
        {
            return Err(Error::invalid(format!("invalid speed parameters {self:?}")));
        }
        Ok(())
    }

    /// The speed assigned to gated or touching poses.
    pub fn floor(&self) -> f64 {
        self.s_const * self.d_min / self.d_max
    }

    /// `(s_const / d_max) · clip(d · gate, d_min, d_max)`.
    pub fn speed_from_distance(&self, distance: f64, gate: f64) -> f64 {
        // gate is 0 or 1; avoid inf * 0 for obstacle-free scenes
        let gated = if gate == 0.0 { 0.0 } else { distance * gate };
        self.s_const / self.d_max * gated.clamp(self.d_min, self.d_max)
    }

    /// Blends the uniform field into the target: `(1 − α)·s_const + α·s*`,
    /// clamped to `(0, s_const]`.
    pub fn scheduled(&self, s_star: f64, alpha: f64) -> f64 {
        scheduled_speed(s_star, alpha, self.s_const)
    }
}

pub fn scheduled_speed(s_star: f64, alpha: f64, s_const: f64) -> f64 {
    let v = (1.0 - alpha) * s_const + alpha * s_star;
    v.clamp(s_const * 1e-6, s_const)
}

/// Predicate deciding whether an object pose is kinematically reachable.
#[derive(Clone)]
pub enum ReachabilityModel {
    AlwaysReachable,
    /// Reachable when the object's center lies in a spherical shell around the robot base.
    SphericalShell {
        center: [f64; 3],
        r_inner: f64,
        r_outer: f64,
    },
    Custom(Arc<dyn Fn(&Pose) -> bool + Send + Sync>),
}

impl std::fmt::Debug for ReachabilityModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::AlwaysReachable => write!(f, "AlwaysReachable"),
            Self::SphericalShell {
                center,
                r_inner,
                r_outer,
            } => write!(f, "SphericalShell({center:?}, {r_inner}..{r_outer})"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Default for ReachabilityModel {
    fn default() -> Self {
        ReachabilityModel::shell_at([0.0, 0.0, 0.0])
    }
}

impl ReachabilityModel {
    pub fn shell_at(center: [f64; 3]) -> Self {
        ReachabilityModel::SphericalShell {
            center,
            r_inner: 0.15,
            r_outer: 0.9,
        }
    }

    pub fn reachable(&self, pose: &Pose) -> bool {
        match self {
            Self::AlwaysReachable => true,
            Self::SphericalShell {
                center,
                r_inner,
                r_outer,
            } => {
                let t = pose.translation();
                let r = ((t[0] - center[0]).powi(2)
                    + (t[1] - center[1]).powi(2)
                    + (t[2] - center[2]).powi(2))
                .sqrt();
                r >= *r_inner && r <= *r_outer
            }
            Self::Custom(f) => f(pose),
        }
    }

    /// Indicator value, exactly 0.0 or 1.0.
    pub fn gate(&self, pose: &Pose) -> f64 {
        if self.reachable(pose) {
            1.0
        } else {
            0.0
        }
    }
}

/// Speed of `object_id` placed at `pose`. The reachability gate multiplies the
/// distance before clipping, so unreachable poses get the floor speed.
pub fn ground_truth_speed(
    scene: &Scene,
    object_id: &str,
    pose: &Pose,
    params: &SpeedParams,
    reach: &ReachabilityModel,
) -> Result<f64> {
    let cloud = scene.object(object_id)?;
    let gate = reach.gate(pose);
    if gate == 0.0 {
        return Ok(params.floor());
    }
    let posed = transform_cloud(cloud, pose)?;
    let d = min_obstacle_distance(scene, &posed)?.distance;
    Ok(params.speed_from_distance(d, gate))
}

/// A collision-free pose plus how many candidates were thrown away first.
#[derive(Clone, Copy, Debug)]
pub struct SampledPose {
    pub pose: Pose,
    pub rejections: usize,
}

/// Draws a uniform pose over the workspace bounds and the active rotation
/// components until no object point touches an obstacle point (`d > 0`).
///
/// Near-contact poses are kept on purpose: they carry the floor speed that
/// teaches a field where the obstacles are.
pub fn sample_valid_pose<R: Rng + ?Sized>(
    scene: &Scene,
    object_id: &str,
    space: &PoseSpace,
    rng: &mut R,
) -> Result<SampledPose> {
    sample_pose_with_clearance(scene, object_id, space, 0.0, rng)
}

/// As [`sample_valid_pose`], but the posed object must clear the obstacles
/// by more than `clearance`.
pub fn sample_pose_with_clearance<R: Rng + ?Sized>(
    scene: &Scene,
    object_id: &str,
    space: &PoseSpace,
    clearance: f64,
    rng: &mut R,
) -> Result<SampledPose> {
    sample_pose_in(scene, object_id, space, scene.bounds(), clearance, rng)
}

/// As [`sample_pose_with_clearance`], with translations drawn from `b`
/// instead of the scene bounds.
pub fn sample_pose_in<R: Rng + ?Sized>(
    scene: &Scene,
    object_id: &str,
    space: &PoseSpace,
    b: &Aabb,
    clearance: f64,
    rng: &mut R,
) -> Result<SampledPose> {
    let cloud = scene.object(object_id)?;
    for rejections in 0..MAX_CONSECUTIVE_REJECTIONS {
        let mut a = [0.0; 6];
        for (i, v) in a.iter_mut().enumerate() {
            if !space.active[i] {
                continue;
            }
            *v = if i < 3 {
                if b.max[i] > b.min[i] {
                    rng.random_range(b.min[i]..=b.max[i])
                } else {
                    b.min[i]
                }
            } else {
                rng.random_range(-PI..PI)
            };
        }
        let pose = Pose::from_array(a);
        if scene.is_free_space()
            || scene.exact_distance(&transform_cloud(cloud, &pose)?)? > clearance
        {
            return Ok(SampledPose { pose, rejections });
        }
    }
    Err(Error::SceneTooCluttered {
        rejections: MAX_CONSECUTIVE_REJECTIONS,
    })
}

/// Exact clearance test against the collision margin.
pub fn is_collision_free(
    scene: &Scene,
    cloud: &crate::geom::PointCloud,
    pose: &Pose,
) -> Result<bool> {
    if scene.is_free_space() {
        return Ok(true);
    }
    let posed = transform_cloud(cloud, pose)?;
    Ok(scene.exact_distance(&posed)? > scene.collision_margin())
}
