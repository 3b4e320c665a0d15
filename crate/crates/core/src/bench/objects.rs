use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geom::{farthest_point_sample, Aabb, PointCloud, CANONICAL_CLOUD_SIZE};

use super::env::sample_box_surface;

/// Desk-scale object catalog. Every object is centered on its origin and
/// canonicalized to 64 points by farthest point sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ObjectKind {
    Box,
    Cylinder,
    LShape,
    Mug,
}

impl ObjectKind {
    pub const ALL: [ObjectKind; 4] = [
        ObjectKind::Box,
        ObjectKind::Cylinder,
        ObjectKind::LShape,
        ObjectKind::Mug,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            ObjectKind::Box => "box",
            ObjectKind::Cylinder => "cylinder",
            ObjectKind::LShape => "l_shape",
            ObjectKind::Mug => "mug",
        }
    }

    /// Dense surface samples before downsampling.
    pub fn dense_cloud(&self) -> PointCloud {
        let mut pts = Vec::new();
        match self {
            ObjectKind::Box => {
                let b = Aabb::new([-0.03, -0.02, -0.02], [0.03, 0.02, 0.02]).expect("box");
                sample_box_surface(&b, 0.005, &mut pts);
            }
            ObjectKind::Cylinder => cylinder([0.0, 0.0], 0.02, -0.03, 0.03, &mut pts),
            ObjectKind::LShape => {
                let long = Aabb::new([-0.04, -0.01, -0.01], [0.04, 0.01, 0.01]).expect("bar");
                let short = Aabb::new([0.02, 0.01, -0.01], [0.04, 0.04, 0.01]).expect("bar");
                sample_box_surface(&long, 0.005, &mut pts);
                sample_box_surface(&short, 0.005, &mut pts);
            }
            ObjectKind::Mug => {
                cylinder([0.0, 0.0], 0.025, -0.025, 0.025, &mut pts);
                // handle: a half ring in the x–z plane on the +x side
                for i in 0..=24 {
                    let a = -PI / 2.0 + PI * i as f64 / 24.0;
                    pts.push([0.025 + 0.015 * a.cos(), 0.0, 0.015 * a.sin()]);
                }
            }
        }
        PointCloud::new(pts).expect("finite samples")
    }

    pub fn cloud(&self) -> PointCloud {
        farthest_point_sample(&self.dense_cloud(), CANONICAL_CLOUD_SIZE, 0)
            .expect("dense clouds have more than 64 points")
            .cloud
    }
}

fn cylinder(c: [f64; 2], r: f64, z0: f64, z1: f64, out: &mut Vec<[f64; 3]>) {
    let rings = 12;
    let around = 24;
    for i in 0..=rings {
        let z = z0 + (z1 - z0) * i as f64 / rings as f64;
        for j in 0..around {
            let a = 2.0 * PI * j as f64 / around as f64;
            out.push([c[0] + r * a.cos(), c[1] + r * a.sin(), z]);
        }
    }
    for z in [z0, z1] {
        for k in 1..4 {
            let rr = r * k as f64 / 4.0;
            for j in 0..around {
                let a = 2.0 * PI * j as f64 / around as f64;
                out.push([c[0] + rr * a.cos(), c[1] + rr * a.sin(), z]);
            }
        }
        out.push([c[0], c[1], z]);
    }
}

impl fmt::Display for ObjectKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ObjectKind::ALL
            .into_iter()
            .find(|o| o.id() == s)
            .ok_or_else(|| Error::UnknownObject(s.to_string()))
    }
}
