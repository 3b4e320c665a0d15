use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Aabb, Pose};
use crate::speed::ReachabilityModel;

/// A gripper placement relative to the object frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grasp {
    pub id: String,
    pub transform: Pose,
    pub score: f64,
}

impl Grasp {
    pub fn new(id: impl Into<String>, transform: Pose, score: f64) -> Self {
        Grasp {
            id: id.into(),
            transform,
            score,
        }
    }

    /// Gripper pose for the object at `object_pose`.
    pub fn gripper_pose(&self, object_pose: &Pose) -> Pose {
        object_pose.compose(&self.transform)
    }
}

/// Parses `id x y z roll pitch yaw score` records (`#` comments allowed)
/// and returns them sorted by descending score, ties in file order.
pub fn parse_grasps(text: &str, origin: &str) -> Result<Vec<Grasp>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 8 {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let mut v = [0.0; 7];
        for (slot, f) in v.iter_mut().zip(&fields[1..]) {
            *slot = f
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, format!("bad number {f:?}")))?;
        }
        out.push(Grasp::new(
            fields[0],
            Pose::new([v[0], v[1], v[2]], [v[3], v[4], v[5]]),
            v[6],
        ));
    }
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}

pub fn load_grasps(path: &Path) -> Result<Vec<Grasp>> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    parse_grasps(&text, &path.display().to_string())
}

/// Decides whether the robot can hold the object at a pose with a grasp.
pub trait IkProvider: Send + Sync {
    fn feasible(&self, object_pose: &Pose, grasp: &Grasp) -> bool;
}

impl<F> IkProvider for F
where
    F: Fn(&Pose, &Grasp) -> bool + Send + Sync,
{
    fn feasible(&self, object_pose: &Pose, grasp: &Grasp) -> bool {
        self(object_pose, grasp)
    }
}

/// The gripper position must lie in a spherical reachability shell and
/// inside the workspace bounds.
#[derive(Clone)]
pub struct ShellIk {
    pub reach: ReachabilityModel,
    pub workspace: Aabb,
}

impl ShellIk {
    pub fn new(center: [f64; 3], r_inner: f64, r_outer: f64, workspace: Aabb) -> Self {
        ShellIk {
            reach: ReachabilityModel::SphericalShell {
                center,
                r_inner,
                r_outer,
            },
            workspace,
        }
    }
}

impl IkProvider for ShellIk {
    fn feasible(&self, object_pose: &Pose, grasp: &Grasp) -> bool {
        let gripper = grasp.gripper_pose(object_pose);
        self.workspace.contains(&gripper.translation()) && self.reach.reachable(&gripper)
    }
}
