use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::cloud::{dist2, PointCloud};

/// Default distance-grid spacing in meters.
pub const DEFAULT_GRID_SPACING: f64 = 0.01;
/// Default clearance below which an object counts as touching an obstacle.
pub const DEFAULT_COLLISION_MARGIN: f64 = 0.01;
/// Extra margin around the workspace covered by the distance grid.
const GRID_PADDING: f64 = 0.1;

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Result<Self> {
        if (0..3).any(|i| !(min[i] <= max[i]) || !min[i].is_finite() || !max[i].is_finite()) {
            return Err(Error::invalid(format!("bad bounds {min:?}..{max:?}")));
        }
        Ok(Aabb { min, max })
    }

    pub fn contains(&self, p: &[f64; 3]) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|i| self.max[i] - self.min[i])
    }

    pub fn padded(&self, pad: f64) -> Aabb {
        Aabb {
            min: self.min.map(|v| v - pad),
            max: self.max.map(|v| v + pad),
        }
    }
}

/// Nearest-neighbour index over the obstacle cloud.
struct ObstacleIndex {
    tree: ImmutableKdTree<f64, 3>,
}

impl ObstacleIndex {
    fn new(cloud: &PointCloud) -> Self {
        ObstacleIndex {
            tree: ImmutableKdTree::new_from_slice(cloud.points()),
        }
    }

    fn nearest(&self, p: &[f64; 3]) -> f64 {
        self.tree.nearest_one::<SquaredEuclidean>(p).distance.sqrt()
    }
}

/// Uniform grid of precomputed minimum obstacle distances.
#[derive(Clone, Debug)]
pub struct DistanceGrid {
    pub origin: [f64; 3],
    pub spacing: f64,
    pub dims: [usize; 3],
    values: Vec<f64>,
}

impl DistanceGrid {
    fn build(index: &ObstacleIndex, region: &Aabb, spacing: f64) -> Self {
        let dims = region.extent().map(|e| (e / spacing).ceil() as usize + 1);
        let mut values = Vec::with_capacity(dims[0] * dims[1] * dims[2]);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let p = [
                        region.min[0] + i as f64 * spacing,
                        region.min[1] + j as f64 * spacing,
                        region.min[2] + k as f64 * spacing,
                    ];
                    values.push(index.nearest(&p));
                }
            }
        }
        DistanceGrid {
            origin: region.min,
            spacing,
            dims,
            values,
        }
    }

    pub fn node_position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.spacing,
            self.origin[1] + j as f64 * self.spacing,
            self.origin[2] + k as f64 * self.spacing,
        ]
    }

    pub fn node_value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[(i * self.dims[1] + j) * self.dims[2] + k]
    }

    /// Trilinear interpolation, `None` outside the grid.
    pub fn sample(&self, p: &[f64; 3]) -> Option<f64> {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let u = (p[a] - self.origin[a]) / self.spacing;
            let last = (self.dims[a] - 1) as f64;
            if !(0.0..=last).contains(&u) {
                return None;
            }
            let b = (u.floor() as usize).min(self.dims[a].saturating_sub(2));
            base[a] = b;
            frac[a] = u - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..8 {
            let o = [corner & 1, (corner >> 1) & 1, (corner >> 2) & 1];
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..3 {
                w *= if o[a] == 1 { frac[a] } else { 1.0 - frac[a] };
                idx[a] = (base[a] + o[a]).min(self.dims[a] - 1);
            }
            if w != 0.0 {
                acc += w * self.node_value(idx[0], idx[1], idx[2]);
            }
        }
        Some(acc)
    }
}

/// Minimum obstacle distance and whether it came from grid interpolation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistanceQuery {
    pub distance: f64,
    pub interpolated: bool,
}

/// Obstacles, workspace bounds and the object catalog.
///
/// An obstacle cloud that is present but empty describes free space; every
/// distance query then returns `+∞`.
#[derive(Clone)]
pub struct Scene {
    obstacle_cloud: Option<PointCloud>,
    index: Option<Arc<ObstacleIndex>>,
    distance_grid: Option<Arc<DistanceGrid>>,
    bounds: Aabb,
    objects: BTreeMap<String, PointCloud>,
    collision_margin: f64,
}

impl std::fmt::Debug for Scene {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Scene")
            .field(
                "obstacle_points",
                &self.obstacle_cloud.as_ref().map(|c| c.len()),
            )
            .field("grid", &self.distance_grid.as_ref().map(|g| g.dims))
            .field("bounds", &self.bounds)
            .field("objects", &self.objects.keys().collect::<Vec<_>>())
            .field("collision_margin", &self.collision_margin)
            .finish()
    }
}

impl Scene {
    /// Fails on duplicate object ids.
    pub fn new(
        obstacles: Option<PointCloud>,
        bounds: Aabb,
        objects: impl IntoIterator<Item = (String, PointCloud)>,
    ) -> Result<Self> {
        let mut catalog = BTreeMap::new();
        for (id, cloud) in objects {
            if cloud.is_empty() {
                return Err(Error::invalid(format!("object `{id}` has an empty cloud")));
            }
            if catalog.insert(id.clone(), cloud).is_some() {
                return Err(Error::invalid(format!("duplicate object id `{id}`")));
            }
        }
        let index = obstacles
            .as_ref()
            .filter(|c| !c.is_empty())
            .map(|c| Arc::new(ObstacleIndex::new(c)));
        Ok(Scene {
            obstacle_cloud: obstacles,
            index,
            distance_grid: None,
            bounds,
            objects: catalog,
            collision_margin: DEFAULT_COLLISION_MARGIN,
        })
    }

    /// Precomputes a distance grid covering the padded workspace.
    pub fn with_distance_grid(mut self, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::invalid("grid spacing must be positive"));
        }
        let index = self.index.clone().ok_or(Error::MissingObstacles)?;
        let region = self.bounds.padded(GRID_PADDING);
        self.distance_grid = Some(Arc::new(DistanceGrid::build(&index, &region, spacing)));
        Ok(self)
    }

    pub fn with_collision_margin(mut self, margin: f64) -> Self {
        self.collision_margin = margin;
        self
    }

    pub fn bounds(&self) -> &Aabb {
        &self.bounds
    }

    pub fn collision_margin(&self) -> f64 {
        self.collision_margin
    }

    pub fn obstacle_cloud(&self) -> Option<&PointCloud> {
        self.obstacle_cloud.as_ref()
    }

    pub fn distance_grid(&self) -> Option<&DistanceGrid> {
        self.distance_grid.as_deref()
    }

    pub fn objects(&self) -> &BTreeMap<String, PointCloud> {
        &self.objects
    }

    pub fn object_ids(&self) -> Vec<String> {
        self.objects.keys().cloned().collect()
    }

    pub fn object(&self, id: &str) -> Result<&PointCloud> {
        self.objects
            .get(id)
            .ok_or_else(|| Error::UnknownObject(id.to_string()))
    }

    pub fn is_free_space(&self) -> bool {
        matches!(&self.obstacle_cloud, Some(c) if c.is_empty())
    }

    /// Exact distance from one point to the obstacle cloud.
    pub fn point_distance(&self, p: &[f64; 3]) -> Result<f64> {
        match (&self.obstacle_cloud, &self.index) {
            (Some(_), Some(index)) => Ok(index.nearest(p)),
            (Some(_), None) => Ok(f64::INFINITY),
            (None, _) => Err(Error::MissingObstacles),
        }
    }

    /// Exact minimum distance between `cloud` (already posed) and the obstacles.
    pub fn exact_distance(&self, cloud: &PointCloud) -> Result<f64> {
        if cloud.is_empty() {
            return Err(Error::EmptyCloud);
        }
        let mut best = f64::INFINITY;
        for p in cloud.iter() {
            best = best.min(self.point_distance(p)?);
        }
        Ok(best)
    }

    /// Content hash over obstacles, bounds, margin, grid spacing and catalog.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        let mut put = |v: f64| h.update(v.to_bits().to_le_bytes());
        match &self.obstacle_cloud {
            Some(c) => {
                put(c.len() as f64);
                for p in c.iter() {
                    p.iter().for_each(|v| put(*v));
                }
            }
            None => put(-1.0),
        }
        self.bounds
            .min
            .iter()
            .chain(&self.bounds.max)
            .for_each(|v| put(*v));
        put(self.collision_margin);
        put(self.distance_grid.as_ref().map_or(0.0, |g| g.spacing));
        for (id, cloud) in &self.objects {
            h.update(id.as_bytes());
            h.update([0u8]);
            for p in cloud.iter() {
                p.iter().for_each(|v| h.update(v.to_bits().to_le_bytes()));
            }
        }
        let digest = h.finalize();
        digest[..8].iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Reads a key-value scene file. Cloud paths are relative to the file.
    ///
    /// ```text
    /// obstacles = obstacles.xyz    # or `none` for free space
    /// bounds = 0 0 0 0.5 0.5 0.5
    /// grid_spacing = 0.01          # optional
    /// collision_margin = 0.01      # optional
    /// object box = box.xyz
    /// ```
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let origin = path.display().to_string();
        let resolve = |p: &str| -> PathBuf {
            let p = Path::new(p);
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                dir.join(p)
            }
        };
        let mut obstacles: Option<Option<PointCloud>> = None;
        let mut bounds = None;
        let mut spacing = None;
        let mut margin = None;
        let mut objects = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&origin, i + 1, "expected `key = value`"))?;
            let key = key.trim();
            let value = value.trim();
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(&origin, i + 1, e.to_string()))
            };
            match key {
                "obstacles" if value == "none" => obstacles = Some(Some(PointCloud::empty())),
                "obstacles" => obstacles = Some(Some(PointCloud::load(resolve(value))?)),
                "bounds" => {
                    let v: Vec<f64> = value.split_whitespace().map(num).collect::<Result<_>>()?;
                    if v.len() != 6 {
                        return Err(Error::parse(&origin, i + 1, "bounds needs 6 numbers"));
                    }
                    bounds = Some(Aabb::new([v[0], v[1], v[2]], [v[3], v[4], v[5]])?);
                }
                "grid_spacing" => spacing = Some(num(value)?),
                "collision_margin" => margin = Some(num(value)?),
                k if k.starts_with("object ") => {
                    let id = k["object ".len()..].trim().to_string();
                    objects.push((id, PointCloud::load(resolve(value))?));
                }
                other => {
                    return Err(Error::parse(
                        &origin,
                        i + 1,
                        format!("unknown key `{other}`"),
                    ))
                }
            }
        }
        let bounds = bounds.ok_or_else(|| Error::parse(&origin, 0, "missing `bounds`"))?;
        let mut scene = Scene::new(obstacles.flatten(), bounds, objects)?;
        if let Some(m) = margin {
            scene = scene.with_collision_margin(m);
        }
        if let Some(h) = spacing {
            if !scene.is_free_space() {
                scene = scene.with_distance_grid(h)?;
            }
        }
        Ok(scene)
    }

    /// Writes `scene.txt` plus one `.xyz` file per cloud into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut s = String::from("# timefield scene\n");
        match &self.obstacle_cloud {
            Some(c) if c.is_empty() => s.push_str("obstacles = none\n"),
            Some(c) => {
                c.save(dir.join("obstacles.xyz"))?;
                s.push_str("obstacles = obstacles.xyz\n");
            }
            None => {}
        }
        let b = &self.bounds;
        let _ = writeln!(
            s,
            "bounds = {} {} {} {} {} {}",
            b.min[0], b.min[1], b.min[2], b.max[0], b.max[1], b.max[2]
        );
        if let Some(g) = &self.distance_grid {
            let _ = writeln!(s, "grid_spacing = {}", g.spacing);
        }
        let _ = writeln!(s, "collision_margin = {}", self.collision_margin);
        for (id, cloud) in &self.objects {
            let file = format!("object_{id}.xyz");
            cloud.save(dir.join(&file))?;
            let _ = writeln!(s, "object {id} = {file}");
        }
        let path = dir.join("scene.txt");
        std::fs::write(&path, s)?;
        Ok(path)
    }
}

/// Minimum distance between a posed object cloud and the scene obstacles.
///
/// Uses trilinear interpolation of the distance grid when every point lies
/// inside it, otherwise exact nearest-neighbour queries.
pub fn min_obstacle_distance(scene: &Scene, cloud: &PointCloud) -> Result<DistanceQuery> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(grid) = &scene.distance_grid {
        let mut best = f64::INFINITY;
        let mut inside = true;
        for p in cloud.iter() {
            match grid.sample(p) {
                Some(d) => best = best.min(d),
                None => {
                    inside = false;
                    break;
                }
            }
        }
        if inside {
            return Ok(DistanceQuery {
                distance: best,
                interpolated: true,
            });
        }
    }
    Ok(DistanceQuery {
        distance: scene.exact_distance(cloud)?,
        interpolated: false,
    })
}

/// Brute-force point-to-cloud distance (test oracle and grid validation).
pub fn brute_force_point_distance(cloud: &PointCloud, p: &[f64; 3]) -> f64 {
    cloud
        .iter()
        .map(|q| dist2(p, q))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::cloud_distance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(p: [f64; 3]) -> PointCloud {
        PointCloud::new(vec![p]).unwrap()
    }

    fn unit_bounds() -> Aabb {
        Aabb::new([0.0; 3], [1.0; 3]).unwrap()
    }

    #[test]
    fn distance_examples() {
        let scene = Scene::new(Some(single([0.0, 0.0, 1.0])), unit_bounds(), []).unwrap();
        let q = min_obstacle_distance(&scene, &single([0.0; 3])).unwrap();
        assert_eq!(q.distance, 1.0);
        assert!(!q.interpolated);
        let q = min_obstacle_distance(&scene, &single([0.0, 0.0, 1.0])).unwrap();
        assert_eq!(q.distance, 0.0);
    }

    #[test]
    fn missing_and_empty_obstacles() {
        let none = Scene::new(None, unit_bounds(), []).unwrap();
        assert!(matches!(
            min_obstacle_distance(&none, &single([0.0; 3])),
            Err(Error::MissingObstacles)
        ));
        let free = Scene::new(Some(PointCloud::empty()), unit_bounds(), []).unwrap();
        assert!(free.is_free_space());
        assert_eq!(
            min_obstacle_distance(&free, &single([0.0; 3]))
                .unwrap()
                .distance,
            f64::INFINITY
        );
    }

    #[test]
    fn random_clouds_match_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut gen = || {
                PointCloud::new(
                    (0..10)
                        .map(|_| [rng.random(), rng.random(), rng.random()])
                        .collect(),
                )
                .unwrap()
            };
            let obj = gen();
            let obs = gen();
            let mut oracle = f64::INFINITY;
            for p in obj.iter() {
                for q in obs.iter() {
                    let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                        .sqrt();
                    oracle = oracle.min(d);
                }
            }
            let scene = Scene::new(Some(obs.clone()), unit_bounds(), []).unwrap();
            let got = min_obstacle_distance(&scene, &obj).unwrap().distance;
            assert!((got - oracle).abs() < 1e-12);
            // swapping roles
            let swapped = Scene::new(Some(obj.clone()), unit_bounds(), []).unwrap();
            assert!((min_obstacle_distance(&swapped, &obs).unwrap().distance - got).abs() < 1e-12);
            assert!((cloud_distance(&obj, &obs) - got).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_nodes_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let obs = PointCloud::new(
            (0..200)
                .map(|_| [rng.random(), rng.random(), rng.random::<f64>() * 0.5])
                .collect(),
        )
        .unwrap();
        let bounds = Aabb::new([0.0; 3], [0.3, 0.3, 0.2]).unwrap();
        let scene = Scene::new(Some(obs.clone()), bounds, [])
            .unwrap()
            .with_distance_grid(0.02)
            .unwrap();
        let grid = scene.distance_grid().unwrap();
        for i in 0..grid.dims[0] {
            for j in 0..grid.dims[1] {
                for k in 0..grid.dims[2] {
                    let p = grid.node_position(i, j, k);
                    let oracle = brute_force_point_distance(&obs, &p);
                    assert!((grid.node_value(i, j, k) - oracle).abs() < 1e-6);
                    assert!((grid.sample(&p).unwrap() - oracle).abs() < 1e-6);
                }
            }
        }
        let q = min_obstacle_distance(&scene, &single([0.1, 0.1, 0.1])).unwrap();
        assert!(q.interpolated);
        let far = min_obstacle_distance(&scene, &single([5.0, 5.0, 5.0])).unwrap();
        assert!(!far.interpolated);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let c = single([0.0; 3]);
        let r = Scene::new(
            None,
            unit_bounds(),
            [("a".to_string(), c.clone()), ("a".to_string(), c)],
        );
        assert!(r.is_err());
    }

    #[test]
    fn scene_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let obs = PointCloud::new(vec![[0.1, 0.2, 0.3], [0.4, 0.4, 0.4]]).unwrap();
        let obj = PointCloud::new(vec![[0.01, 0.0, 0.0], [0.0, 0.02, 0.0]]).unwrap();
        let scene = Scene::new(Some(obs), unit_bounds(), [("cup".to_string(), obj)])
            .unwrap()
            .with_collision_margin(0.005)
            .with_distance_grid(0.1)
            .unwrap();
        let path = scene.save(dir.path()).unwrap();
        let back = Scene::load(&path).unwrap();
        assert_eq!(back.hash(), scene.hash());
        assert_eq!(back.object("cup").unwrap(), scene.object("cup").unwrap());
        assert!(matches!(back.object("mug"), Err(Error::UnknownObject(_))));
        assert!(matches!(
            Scene::load(dir.path().join("nope.txt")),
            Err(Error::FileNotFound(_))
        ));
    }
}
