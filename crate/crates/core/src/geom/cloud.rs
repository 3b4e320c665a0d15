use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::Pose;

/// Canonical number of points an object cloud is reduced to.
pub const CANONICAL_CLOUD_SIZE: usize = 64;

/// A finite set of 3D points in meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<[f64; 3]>,
}

impl PointCloud {
    /// Rejects non-finite coordinates. Empty clouds are allowed.
    pub fn new(points: Vec<[f64; 3]>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        Ok(PointCloud { points })
    }

    pub fn empty() -> Self {
        PointCloud { points: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 3]] {
        &self.points
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64; 3]> {
        self.points.iter()
    }

    /// Largest distance of any point from the cloud's own origin.
    pub fn radius(&self) -> f64 {
        self.points
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| p.map(|v| v * factor)).collect(),
        }
    }

    /// Parses the plain-text format: one `x y z` triple per line, `#` comments.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut points = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(origin, i + 1, e.to_string()))?;
            if vals.len() != 3 {
                return Err(Error::parse(
                    origin,
                    i + 1,
                    format!("expected 3 values, got {}", vals.len()),
                ));
            }
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::parse(origin, i + 1, "non-finite coordinate"));
            }
            points.push([vals[0], vals[1], vals[2]]);
        }
        Ok(PointCloud { points })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.points.len() * 32);
        for p in &self.points {
            let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

/// Applies `pose` to every point: `R·x + t`.
pub fn transform_cloud(cloud: &PointCloud, pose: &Pose) -> Result<PointCloud> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let r = pose.rotation_matrix();
    let t = pose.translation();
    let points = cloud
        .points
        .iter()
        .map(|p| {
            [
                r[0][0] * p[0] + r[0][1] * p[1] + r[0][2] * p[2] + t[0],
                r[1][0] * p[0] + r[1][1] * p[1] + r[1][2] * p[2] + t[1],
                r[2][0] * p[0] + r[2][1] * p[1] + r[2][2] * p[2] + t[2],
            ]
        })
        .collect();
    Ok(PointCloud { points })
}

pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Exhaustive minimum pairwise distance between two clouds (`+∞` if either is empty).
pub fn cloud_distance(a: &PointCloud, b: &PointCloud) -> f64 {
    let mut best = f64::INFINITY;
    for p in &a.points {
        for q in &b.points {
            best = best.min(dist2(p, q));
        }
    }
    best.sqrt()
}

/// Result of [`farthest_point_sample`].
#[derive(Clone, Debug)]
pub struct FpsSample {
    pub cloud: PointCloud,
    /// Indices into the input, in selection order.
    pub indices: Vec<usize>,
    /// True when the input had fewer distinct points than requested and the
    /// remainder was filled with copies of the seed point.
    pub padded: bool,
}

/// Greedy farthest point sampling starting from `seed_index`.
///
/// Each step picks the point with the largest distance to the selected set,
/// breaking ties by lowest index.
pub fn farthest_point_sample(cloud: &PointCloud, k: usize, seed_index: usize) -> Result<FpsSample> {
    let n = cloud.len();
    if k > n {
        return Err(Error::InsufficientPoints {
            requested: k,
            available: n,
        });
    }
    if seed_index >= n {
        return Err(Error::invalid(format!(
            "seed index {seed_index} out of range for {n} points"
        )));
    }
    let pts = &cloud.points;
    let mut indices = Vec::with_capacity(k);
    let mut padded = false;
    if k > 0 {
        indices.push(seed_index);
        let mut nearest: Vec<f64> = pts.iter().map(|p| dist2(p, &pts[seed_index])).collect();
        while indices.len() < k {
            let mut best = 0;
            let mut best_d = f64::NEG_INFINITY;
            for (i, &d) in nearest.iter().enumerate() {
                if d > best_d {
                    best_d = d;
                    best = i;
                }
            }
            if best_d <= 0.0 {
                log::warn!(
                    "cloud has only {} distinct points, padding to {k} with the seed point",
                    indices.len()
                );
                padded = true;
                indices.resize(k, seed_index);
                break;
            }
            indices.push(best);
            let sel = pts[best];
            for (d, p) in nearest.iter_mut().zip(pts) {
                *d = d.min(dist2(p, &sel));
            }
        }
    }
    let cloud = PointCloud {
        points: indices.iter().map(|&i| pts[i]).collect(),
    };
    Ok(FpsSample {
        cloud,
        indices,
        padded,
    })
}
