use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{
    Aabb, PointCloud, Pose, PoseSpace, Scene, DEFAULT_GRID_SPACING, DEFAULT_ROTATION_WEIGHT,
};
use crate::plan::{Grasp, ShellIk};
use crate::speed::{ReachabilityModel, SpeedParams};

use super::objects::ObjectKind;

/// Spacing of the lattice used to turn obstacle boxes into point clouds.
pub const OBSTACLE_SAMPLING: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EnvName {
    TabletopCenterObstacle,
    UTunnel,
    Cabinet,
    /// Obstacle-free planar scene used for sanity checks.
    FreeSpace,
}

impl EnvName {
    pub const ALL: [EnvName; 4] = [
        EnvName::TabletopCenterObstacle,
        EnvName::UTunnel,
        EnvName::Cabinet,
        EnvName::FreeSpace,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EnvName::TabletopCenterObstacle => "tabletop_center_obstacle",
            EnvName::UTunnel => "u_tunnel",
            EnvName::Cabinet => "cabinet",
            EnvName::FreeSpace => "free_space",
        }
    }
}

impl fmt::Display for EnvName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvName::ALL
            .into_iter()
            .find(|e| e.as_str() == s || (s == "tabletop" && *e == EnvName::TabletopCenterObstacle))
            .ok_or_else(|| Error::invalid(format!("unknown environment `{s}`")))
    }
}

/// A procedurally generated benchmark environment.
///
/// Obstacles are solid boxes whose surfaces are sampled on a 1 cm lattice.
/// Poses are sampled inside `bounds` over the active dims of `space`.
#[derive(Clone, Debug)]
pub struct EnvSpec {
    pub name: EnvName,
    pub seed: u64,
    pub bounds: Aabb,
    pub obstacles: Vec<Aabb>,
    pub space: PoseSpace,
    /// Robot base location used by the reachability gate and the IK model.
    pub robot_base: [f64; 3],
    pub reach_radii: (f64, f64),
    pub objects: Vec<ObjectKind>,
    pub grid_spacing: Option<f64>,
    pub speed: SpeedParams,
    /// Training poses are also drawn up to this far outside `bounds`, where
    /// they count as unreachable. This walls the learned field in; without
    /// it, marching fronts can drift off the workspace where nothing was
    /// sampled.
    pub label_padding: f64,
}

fn aabb(min: [f64; 3], max: [f64; 3]) -> Aabb {
    Aabb::new(min, max).expect("static box is well formed")
}

impl EnvSpec {
    /// `seed` only matters for environments with randomized clutter.
    pub fn new(name: EnvName, seed: u64) -> Self {
        match name {
            EnvName::TabletopCenterObstacle => Self::tabletop_center_obstacle(),
            EnvName::UTunnel => Self::u_tunnel(),
            EnvName::Cabinet => Self::cabinet(seed),
            EnvName::FreeSpace => Self::free_space(),
        }
    }

    /// A 0.5 m tabletop with one box in the middle. Objects are carried
    /// upright in the plane `z = 0`, 0.3 m above the table surface; use
    /// [`EnvSpec::with_space`] to let them turn about z as well.
    pub fn tabletop_center_obstacle() -> Self {
        EnvSpec {
            name: EnvName::TabletopCenterObstacle,
            seed: 0,
            bounds: aabb([0.0, 0.0, 0.0], [0.5, 0.5, 0.0]),
            obstacles: vec![
                aabb([-0.05, -0.05, -0.32], [0.55, 0.55, -0.3]),
                aabb([0.2, 0.2, -0.3], [0.3, 0.3, 0.15]),
            ],
            space: PoseSpace::planar_xy(),
            robot_base: [0.25, -0.35, 0.0],
            reach_radii: (0.15, 0.9),
            objects: vec![ObjectKind::Box, ObjectKind::Mug],
            grid_spacing: Some(DEFAULT_GRID_SPACING),
            // A 5 cm floor leaves a uniform slow band as wide as the box
            // itself, which makes cutting through it time-optimal.
            speed: SpeedParams {
                d_min: 0.02,
                ..SpeedParams::default()
            },
            label_padding: 0.05,
        }
    }

    /// A 1 m cube with a U-shaped corridor: a wall from the floor edge up
    /// the middle forces paths between the two legs to turn around its end.
    pub fn u_tunnel() -> Self {
        let space = PoseSpace {
            active: [true, true, true, false, false, true],
            rotation_weight: DEFAULT_ROTATION_WEIGHT,
        };
        EnvSpec {
            name: EnvName::UTunnel,
            seed: 0,
            bounds: aabb([0.08, 0.08, 0.35], [0.92, 0.92, 0.65]),
            obstacles: vec![
                aabb([0.0, 0.0, 0.15], [1.0, 1.0, 0.2]),
                aabb([0.0, 0.0, 0.8], [1.0, 1.0, 0.85]),
                aabb([0.4, 0.0, 0.2], [0.6, 0.65, 0.8]),
            ],
            space,
            robot_base: [0.5, 0.5, 0.5],
            reach_radii: (0.0, 1.0),
            objects: vec![ObjectKind::Box, ObjectKind::Cylinder],
            grid_spacing: Some(0.02),
            speed: SpeedParams::default(),
            label_padding: 0.0,
        }
    }

    /// A 0.55 × 1 × 0.6 m (width × height × depth) cabinet with two
    /// shelves and seeded box clutter standing on each shelf.
    pub fn cabinet(seed: u64) -> Self {
        let (w, h, d, t) = (0.55, 1.0, 0.6, 0.02);
        let mut obstacles = vec![
            aabb([0.0, 0.0, 0.0], [t, d, h]),
            aabb([w - t, 0.0, 0.0], [w, d, h]),
            aabb([0.0, d - t, 0.0], [w, d, h]),
            aabb([0.0, 0.0, 0.0], [w, d, t]),
            aabb([0.0, 0.0, h - t], [w, d, h]),
        ];
        let shelves = [1.0 / 3.0, 2.0 / 3.0];
        for z in shelves {
            obstacles.push(aabb([0.0, 0.0, z - t / 2.0], [w, d, z + t / 2.0]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for z0 in [t, shelves[0] + t / 2.0, shelves[1] + t / 2.0] {
            for _ in 0..2 {
                let sx = rng.random_range(0.05..0.1);
                let sy = rng.random_range(0.05..0.1);
                let sz = rng.random_range(0.08..0.15);
                let x = rng.random_range(t + 0.02..w - t - 0.02 - sx);
                let y = rng.random_range(0.3..d - t - sy);
                obstacles.push(aabb([x, y, z0], [x + sx, y + sy, z0 + sz]));
            }
        }
        EnvSpec {
            name: EnvName::Cabinet,
            seed,
            bounds: aabb([0.08, 0.06, 0.08], [w - 0.08, 0.25, h - 0.08]),
            obstacles,
            space: PoseSpace {
                active: [true, true, true, false, false, true],
                rotation_weight: DEFAULT_ROTATION_WEIGHT,
            },
            robot_base: [w / 2.0, -0.4, h / 2.0],
            reach_radii: (0.15, 1.0),
            objects: vec![ObjectKind::Box, ObjectKind::Cylinder],
            grid_spacing: Some(DEFAULT_GRID_SPACING),
            speed: SpeedParams::default(),
            label_padding: 0.0,
        }
    }

    /// A 1 m planar square without obstacles; every speed is `s_const`.
    pub fn free_space() -> Self {
        EnvSpec {
            name: EnvName::FreeSpace,
            seed: 0,
            bounds: aabb([0.0, 0.0, 0.0], [1.0, 1.0, 0.0]),
            obstacles: Vec::new(),
            space: PoseSpace::planar_xy(),
            robot_base: [0.5, 0.5, 0.0],
            reach_radii: (0.0, f64::INFINITY),
            objects: vec![ObjectKind::Box],
            grid_spacing: None,
            speed: SpeedParams::default(),
            label_padding: 0.0,
        }
    }

    pub fn with_objects(mut self, objects: Vec<ObjectKind>) -> Self {
        self.objects = objects;
        self
    }

    pub fn with_speed(mut self, speed: SpeedParams) -> Self {
        self.speed = speed;
        self
    }

    pub fn with_space(mut self, space: PoseSpace) -> Self {
        self.space = space;
        self
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.objects.iter().map(|o| o.id().to_string()).collect()
    }

    /// Box surfaces sampled on the obstacle lattice.
    pub fn obstacle_cloud(&self) -> PointCloud {
        let mut pts = Vec::new();
        for b in &self.obstacles {
            sample_box_surface(b, OBSTACLE_SAMPLING, &mut pts);
        }
        PointCloud::new(pts).expect("lattice points are finite")
    }

    pub fn scene(&self) -> Result<Scene> {
        let objects = self.objects.iter().map(|o| (o.id().to_string(), o.cloud()));
        let scene = Scene::new(Some(self.obstacle_cloud()), self.bounds, objects)?;
        match self.grid_spacing {
            Some(h) if !self.obstacles.is_empty() => scene.with_distance_grid(h),
            _ => Ok(scene),
        }
    }

    pub fn reachability(&self) -> ReachabilityModel {
        let shell = if self.reach_radii.1.is_infinite() {
            ReachabilityModel::AlwaysReachable
        } else {
            ReachabilityModel::SphericalShell {
                center: self.robot_base,
                r_inner: self.reach_radii.0,
                r_outer: self.reach_radii.1,
            }
        };
        if self.label_padding <= 0.0 {
            return shell;
        }
        // grid nodes on the boundary must not fall out through rounding
        let inside = self.bounds.padded(1e-9);
        ReachabilityModel::Custom(Arc::new(move |p: &Pose| {
            inside.contains(&p.translation()) && shell.reachable(p)
        }))
    }

    /// Translation bounds for training poses: `bounds` grown by
    /// `label_padding` along its non-degenerate axes.
    pub fn sampling_bounds(&self) -> Aabb {
        let mut b = self.bounds;
        for i in 0..3 {
            if b.max[i] > b.min[i] {
                b.min[i] -= self.label_padding;
                b.max[i] += self.label_padding;
            }
        }
        b
    }

    /// Gripper reachability: the same shell as the speed gate, with the
    /// gripper allowed up to 0.2 m outside the object workspace.
    pub fn ik(&self) -> ShellIk {
        let (r_inner, r_outer) = self.reach_radii;
        ShellIk::new(
            self.robot_base,
            r_inner,
            r_outer.min(1e6),
            self.bounds.padded(0.2),
        )
    }

    /// A top grasp and a side grasp, best first.
    pub fn default_grasps(&self) -> Vec<Grasp> {
        vec![
            Grasp::new("top", Pose::from_translation([0.0, 0.0, 0.06]), 0.9),
            Grasp::new(
                "side",
                Pose::new([0.0, -0.06, 0.0], [0.0, 0.0, std::f64::consts::FRAC_PI_2]),
                0.6,
            ),
        ]
    }
}

fn lattice(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect()
}

/// Points on the six faces of `b` with spacing about `step`.
pub fn sample_box_surface(b: &Aabb, step: f64, out: &mut Vec<[f64; 3]>) {
    let axes = [
        lattice(b.min[0], b.max[0], step),
        lattice(b.min[1], b.max[1], step),
        lattice(b.min[2], b.max[2], step),
    ];
    for fixed in 0..3 {
        let (u, v) = ((fixed + 1) % 3, (fixed + 2) % 3);
        for side in [b.min[fixed], b.max[fixed]] {
            for &a in &axes[u] {
                for &c in &axes[v] {
                    let mut p = [0.0; 3];
                    p[fixed] = side;
                    p[u] = a;
                    p[v] = c;
                    out.push(p);
                }
            }
            if b.min[fixed] == b.max[fixed] {
                break;
            }
        }
    }
}
