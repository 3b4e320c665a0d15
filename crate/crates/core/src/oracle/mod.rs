//! Grid Eikonal solvers used as ground truth: first-order fast marching,
//! Dijkstra on the grid graph, gradient backtracking and field comparison.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{check_finite, FieldEval, TimeField};
use crate::geom::{Pose, PoseSpace, Scene};
use crate::plan::{march_bidirectional, MarchParams, Trajectory, TrajectorySource};
use crate::speed::{ground_truth_speed, ReachabilityModel, SpeedParams};

/// Regular 2D or 3D node lattice; 2D grids have `dims[2] == 1`.
///
/// Nodes are stored row-major over `(x, y, z)`, with `z` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridGeometry {
    pub dims: [usize; 3],
    pub spacing: f64,
    pub origin: [f64; 3],
}

impl GridGeometry {
    pub fn new(dims: [usize; 3], spacing: f64, origin: [f64; 3]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) || origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "grid spacing and origin must be finite, spacing positive",
            ));
        }
        Ok(GridGeometry {
            dims,
            spacing,
            origin,
        })
    }

    /// `nx × ny` nodes in the plane `z = origin[2]`.
    pub fn planar(nx: usize, ny: usize, spacing: f64, origin: [f64; 3]) -> Result<Self> {
        GridGeometry::new([nx, ny, 1], spacing, origin)
    }

    /// Covers `[min, max]` in x and y at height `z`, with spacing `h`.
    pub fn planar_covering(min: [f64; 2], max: [f64; 2], z: f64, h: f64) -> Result<Self> {
        let n = |a: f64, b: f64| ((b - a) / h).round() as usize + 1;
        GridGeometry::planar(n(min[0], max[0]), n(min[1], max[1]), h, [min[0], min[1], z])
    }

    pub fn ndim(&self) -> usize {
        if self.dims[2] == 1 {
            2
        } else {
            3
        }
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [0, 1, 2].map(|a| self.origin[a] + c[a] as f64 * self.spacing)
    }

    /// Whether `p` lies inside the grid extents (z ignored for planar grids).
    pub fn contains(&self, p: &[f64; 3]) -> bool {
        let tol = 1e-9 * self.spacing;
        (0..self.ndim()).all(|a| {
            let hi = self.origin[a] + (self.dims[a] - 1) as f64 * self.spacing;
            p[a] >= self.origin[a] - tol && p[a] <= hi + tol
        })
    }

    pub fn nearest_node(&self, p: &[f64; 3]) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let mut c = [0usize; 3];
        for a in 0..self.ndim() {
            let f = ((p[a] - self.origin[a]) / self.spacing).round();
            c[a] = (f.max(0.0) as usize).min(self.dims[a] - 1);
        }
        Some(self.index(c))
    }

    fn neighbor(&self, idx: usize, offset: [i64; 3]) -> Option<usize> {
        let c = self.coords(idx);
        let mut n = [0usize; 3];
        for a in 0..3 {
            let v = c[a] as i64 + offset[a];
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            n[a] = v as usize;
        }
        Some(self.index(n))
    }

    /// Multilinear interpolation weights of the cell containing `p`.
    fn stencil(&self, p: &[f64; 3]) -> Option<Vec<(usize, f64)>> {
        if !self.contains(p) {
            return None;
        }
        let nd = self.ndim();
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..nd {
            if self.dims[a] == 1 {
                continue;
            }
            let f = ((p[a] - self.origin[a]) / self.spacing).clamp(0.0, (self.dims[a] - 1) as f64);
            let b = (f.floor() as usize).min(self.dims[a] - 2);
            base[a] = b;
            frac[a] = f - b as f64;
        }
        let mut out = Vec::with_capacity(1 << nd);
        for corner in 0..(1usize << nd) {
            let mut c = base;
            let mut w = 1.0;
            for a in 0..nd {
                let up = (corner >> a) & 1 == 1;
                if up {
                    if self.dims[a] == 1 {
                        w = 0.0;
                        break;
                    }
                    c[a] += 1;
                    w *= frac[a];
                } else {
                    w *= 1.0 - frac[a];
                }
            }
            if w > 0.0 {
                out.push((self.index(c), w));
            }
        }
        Some(out)
    }
}

/// Per-node speeds; every value is strictly positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeedGrid {
    pub geometry: GridGeometry,
    /// Object orientation (roll, pitch, yaw) the speeds were computed for.
    pub orientation: [f64; 3],
    values: Vec<f64>,
}

impl SpeedGrid {
    pub fn new(geometry: GridGeometry, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::invalid("speed values do not match the grid size"));
        }
        if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!(
                "grid speeds must be positive and finite, found {v}"
            )));
        }
        Ok(SpeedGrid {
            geometry,
            orientation: [0.0; 3],
            values,
        })
    }

    pub fn uniform(geometry: GridGeometry, speed: f64) -> Result<Self> {
        let n = geometry.len();
        SpeedGrid::new(geometry, vec![speed; n])
    }

    pub fn from_fn(geometry: GridGeometry, f: impl Fn([f64; 3]) -> f64) -> Result<Self> {
        let values = (0..geometry.len())
            .map(|i| f(geometry.position(i)))
            .collect();
        SpeedGrid::new(geometry, values)
    }

    /// Ground-truth speed of the object placed at each node with a fixed orientation.
    pub fn from_scene(
        scene: &Scene,
        object_id: &str,
        geometry: GridGeometry,
        orientation: [f64; 3],
        params: &SpeedParams,
        reach: &ReachabilityModel,
    ) -> Result<Self> {
        scene.object(object_id)?;
        let values = (0..geometry.len())
            .into_par_iter()
            .map(|i| {
                let pose = Pose::new(geometry.position(i), orientation);
                ground_truth_speed(scene, object_id, &pose, params, reach)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut grid = SpeedGrid::new(geometry, values)?;
        grid.orientation = orientation;
        Ok(grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut g = SpeedGrid::new(
            self.geometry.clone(),
            self.values.iter().map(|v| v * c).collect(),
        )?;
        g.orientation = self.orientation;
        Ok(g)
    }

    pub fn max_speed(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeState {
    Far,
    Narrow,
    Frozen,
}

/// Arrival times from a single source node.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeGrid {
    pub geometry: GridGeometry,
    pub orientation: [f64; 3],
    source: usize,
    values: Vec<f64>,
    states: Vec<NodeState>,
    freeze_order: Vec<usize>,
    predecessors: Option<Vec<usize>>,
    max_speed: f64,
}

impl TimeGrid {
    pub fn source(&self) -> usize {
        self.source
    }

    pub fn source_position(&self) -> [f64; 3] {
        self.geometry.position(self.source)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn state(&self, idx: usize) -> NodeState {
        self.states[idx]
    }

    /// Nodes in the order the solver finalized them.
    pub fn freeze_order(&self) -> &[usize] {
        &self.freeze_order
    }

    pub fn max_speed(&self) -> f64 {
        self.max_speed
    }

    /// Multilinear interpolation; `None` outside the grid.
    pub fn value_at(&self, p: &[f64; 3]) -> Option<f64> {
        let s = self.geometry.stencil(p)?;
        Some(s.iter().map(|&(i, w)| w * self.values[i]).sum())
    }

    /// Node-wise central-difference gradients, one-sided at the borders.
    pub fn node_gradients(&self) -> Vec<[f64; 3]> {
        let g = &self.geometry;
        let h = g.spacing;
        (0..g.len())
            .map(|i| {
                let mut grad = [0.0; 3];
                for (a, ga) in grad.iter_mut().enumerate().take(g.ndim()) {
                    let mut off = [0i64; 3];
                    off[a] = 1;
                    let up = g.neighbor(i, off).map(|n| self.values[n]);
                    off[a] = -1;
                    let down = g.neighbor(i, off).map(|n| self.values[n]);
                    *ga = match (up, down) {
                        (Some(u), Some(d)) => (u - d) / (2.0 * h),
                        (Some(u), None) => (u - self.values[i]) / h,
                        (None, Some(d)) => (self.values[i] - d) / h,
                        (None, None) => 0.0,
                    };
                }
                grad
            })
            .collect()
    }

    /// Node path following Dijkstra predecessors to the source.
    pub fn graph_path(&self, start: usize) -> Option<Vec<usize>> {
        let pred = self.predecessors.as_ref()?;
        let mut path = vec![start];
        let mut cur = start;
        while cur != self.source {
            cur = pred[cur];
            if cur == usize::MAX || path.len() > pred.len() {
                return None;
            }
            path.push(cur);
        }
        Some(path)
    }

    pub fn graph_path_length(&self, start: usize) -> Option<f64> {
        let path = self.graph_path(start)?;
        Some(
            path.windows(2)
                .map(|w| dist3(&self.geometry.position(w[0]), &self.geometry.position(w[1])))
                .sum(),
        )
    }

    fn empty(speed: &SpeedGrid, source: usize) -> Self {
        let n = speed.geometry.len();
        TimeGrid {
            geometry: speed.geometry.clone(),
            orientation: speed.orientation,
            source,
            values: vec![f64::INFINITY; n],
            states: vec![NodeState::Far; n],
            freeze_order: Vec::with_capacity(n),
            predecessors: None,
            max_speed: speed.max_speed(),
        }
    }
}

fn dist3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct HeapItem {
    time: f64,
    idx: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on time, ties by lower index
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FmmOptions {
    /// Nodes within this distance (m) of the source are initialized with
    /// straight-line travel times at the trapezoidal mean slowness.
    pub init_radius: f64,
    /// Visit neighbours in reverse order; the result must not change.
    pub reverse_neighbors: bool,
}

impl Default for FmmOptions {
    fn default() -> Self {
        FmmOptions {
            init_radius: 0.05,
            reverse_neighbors: false,
        }
    }
}

fn check_source(speed: &SpeedGrid, source: usize) -> Result<()> {
    if source >= speed.geometry.len() {
        return Err(Error::invalid(format!(
            "source node {source} outside a grid of {} nodes",
            speed.geometry.len()
        )));
    }
    Ok(())
}

pub fn fmm_solve(speed: &SpeedGrid, source: usize) -> Result<TimeGrid> {
    fmm_solve_with(speed, source, &FmmOptions::default())
}

/// First-order upwind fast marching.
pub fn fmm_solve_with(speed: &SpeedGrid, source: usize, opts: &FmmOptions) -> Result<TimeGrid> {
    check_source(speed, source)?;
    let g = &speed.geometry;
    let h = g.spacing;
    let nd = g.ndim();
    let mut grid = TimeGrid::empty(speed, source);
    let mut locked = vec![false; g.len()];
    let mut heap = BinaryHeap::new();

    let src_pos = g.position(source);
    let s_src = speed.values[source];
    grid.values[source] = 0.0;
    locked[source] = true;
    heap.push(HeapItem {
        time: 0.0,
        idx: source,
    });
    if opts.init_radius > 0.0 {
        let r = (opts.init_radius / h).ceil() as i64;
        let span = |a: usize| if a < nd { -r..=r } else { 0..=0 };
        for dx in span(0) {
            for dy in span(1) {
                for dz in span(2) {
                    let Some(n) = g.neighbor(source, [dx, dy, dz]) else {
                        continue;
                    };
                    let d = dist3(&src_pos, &g.position(n));
                    if n == source || d > opts.init_radius {
                        continue;
                    }
                    let t = d * 0.5 * (1.0 / s_src + 1.0 / speed.values[n]);
                    grid.values[n] = t;
                    grid.states[n] = NodeState::Narrow;
                    locked[n] = true;
                    heap.push(HeapItem { time: t, idx: n });
                }
            }
        }
    }
    grid.states[source] = NodeState::Narrow;

    let mut axis_offsets: Vec<[i64; 3]> = Vec::new();
    for a in 0..nd {
        for s in [-1, 1] {
            let mut o = [0i64; 3];
            o[a] = s;
            axis_offsets.push(o);
        }
    }
    if opts.reverse_neighbors {
        axis_offsets.reverse();
    }

    let mut last = f64::NEG_INFINITY;
    while let Some(HeapItem { time, idx }) = heap.pop() {
        if grid.states[idx] == NodeState::Frozen || time > grid.values[idx] {
            continue;
        }
        debug_assert!(time >= last, "freeze order must be non-decreasing");
        last = time;
        grid.states[idx] = NodeState::Frozen;
        grid.freeze_order.push(idx);
        for off in &axis_offsets {
            let Some(n) = g.neighbor(idx, *off) else {
                continue;
            };
            if grid.states[n] == NodeState::Frozen || locked[n] {
                continue;
            }
            let t = upwind_update(&grid, n, h / speed.values[n], nd);
            if t < grid.values[n] {
                grid.values[n] = t;
                grid.states[n] = NodeState::Narrow;
                heap.push(HeapItem { time: t, idx: n });
            }
        }
    }
    Ok(grid)
}

/// Solves `Σ_a (T − t_a)² = r²` over the upwind axes.
fn upwind_update(grid: &TimeGrid, idx: usize, r: f64, nd: usize) -> f64 {
    let g = &grid.geometry;
    let mut a = [f64::INFINITY; 3];
    for (axis, slot) in a.iter_mut().enumerate().take(nd) {
        for s in [-1, 1] {
            let mut o = [0i64; 3];
            o[axis] = s;
            if let Some(n) = g.neighbor(idx, o) {
                if grid.states[n] == NodeState::Frozen {
                    *slot = slot.min(grid.values[n]);
                }
            }
        }
    }
    a[..nd].sort_by(f64::total_cmp);
    let mut t = a[0] + r;
    let (mut sum, mut sum2) = (a[0], a[0] * a[0]);
    for m in 1..nd {
        if !(t > a[m]) {
            break;
        }
        sum += a[m];
        sum2 += a[m] * a[m];
        let k = (m + 1) as f64;
        let disc = (sum * sum - k * (sum2 - r * r)).max(0.0);
        t = (sum + disc.sqrt()) / k;
    }
    t
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// 8 neighbours in 2D, 26 in 3D.
    Standard,
    /// Offsets up to two cells with coprime components (16 in 2D).
    Extended,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeSpeed {
    /// Edge cost `len · (1/S_a + 1/S_b) / 2`.
    Harmonic,
    /// Edge cost `len · 2 / (S_a + S_b)`.
    Arithmetic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DijkstraOptions {
    pub connectivity: Connectivity,
    pub edge_speed: EdgeSpeed,
}

impl Default for DijkstraOptions {
    fn default() -> Self {
        DijkstraOptions {
            connectivity: Connectivity::Standard,
            edge_speed: EdgeSpeed::Harmonic,
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn graph_offsets(nd: usize, connectivity: Connectivity) -> Vec<[i64; 3]> {
    let r = match connectivity {
        Connectivity::Standard => 1,
        Connectivity::Extended => 2,
    };
    let span = |a: usize| if a < nd { -r..=r } else { 0..=0 };
    let mut out = Vec::new();
    for dx in span(0) {
        for dy in span(1) {
            for dz in span(2) {
                if (dx, dy, dz) == (0, 0, 0) || gcd(gcd(dx, dy), dz) != 1 {
                    continue;
                }
                out.push([dx, dy, dz]);
            }
        }
    }
    out
}

pub fn dijkstra_solve(speed: &SpeedGrid, source: usize) -> Result<TimeGrid> {
    dijkstra_solve_with(speed, source, &DijkstraOptions::default())
}

/// Shortest arrival times on the grid graph, with predecessors recorded.
pub fn dijkstra_solve_with(
    speed: &SpeedGrid,
    source: usize,
    opts: &DijkstraOptions,
) -> Result<TimeGrid> {
    check_source(speed, source)?;
    let g = &speed.geometry;
    let h = g.spacing;
    let offsets = graph_offsets(g.ndim(), opts.connectivity);
    let mut grid = TimeGrid::empty(speed, source);
    let mut pred = vec![usize::MAX; g.len()];
    let mut heap = BinaryHeap::new();
    grid.values[source] = 0.0;
    grid.states[source] = NodeState::Narrow;
    heap.push(HeapItem {
        time: 0.0,
        idx: source,
    });
    while let Some(HeapItem { time, idx }) = heap.pop() {
        if grid.states[idx] == NodeState::Frozen || time > grid.values[idx] {
            continue;
        }
        grid.states[idx] = NodeState::Frozen;
        grid.freeze_order.push(idx);
        let sa = speed.values[idx];
        for off in &offsets {
            let Some(n) = g.neighbor(idx, *off) else {
                continue;
            };
            if grid.states[n] == NodeState::Frozen {
                continue;
            }
            let len = h * ((off[0] * off[0] + off[1] * off[1] + off[2] * off[2]) as f64).sqrt();
            let sb = speed.values[n];
            let cost = match opts.edge_speed {
                EdgeSpeed::Harmonic => len * 0.5 * (1.0 / sa + 1.0 / sb),
                EdgeSpeed::Arithmetic => len * 2.0 / (sa + sb),
            };
            let t = time + cost;
            if t < grid.values[n] {
                grid.values[n] = t;
                grid.states[n] = NodeState::Narrow;
                pred[n] = idx;
                heap.push(HeapItem { time: t, idx: n });
            }
        }
    }
    grid.predecessors = Some(pred);
    Ok(grid)
}

/// Steepest descent on the interpolated time field from node `start` to the source.
pub fn backtrack_path(times: &TimeGrid, start: usize) -> Result<Trajectory> {
    if start >= times.geometry.len() {
        return Err(Error::invalid(format!(
            "start node {start} outside the grid"
        )));
    }
    backtrack_from(times, times.geometry.position(start))
}

/// Steepest descent with step `h/2` from an arbitrary point inside the grid.
///
/// The iteration budget is the start time divided by the smallest time a
/// step can cover, `(h/2)/S_max`, with a quarter slack for interpolated
/// gradient directions.
pub fn backtrack_from(times: &TimeGrid, start: [f64; 3]) -> Result<Trajectory> {
    let g = &times.geometry;
    let h = g.spacing;
    let to_pose = |p: [f64; 3]| Pose::new(p, times.orientation);
    let t0 = times
        .value_at(&start)
        .ok_or_else(|| Error::invalid("backtrack start outside the grid"))?;
    let src = times.source_position();
    let mut p = start;
    if g.ndim() == 2 {
        p[2] = src[2];
    }
    let mut poses = vec![to_pose(p)];
    if dist3(&p, &src) <= h {
        if dist3(&p, &src) > 0.0 {
            poses.push(to_pose(src));
        }
        return Ok(Trajectory::new(poses, TrajectorySource::OracleBacktrack));
    }
    let node_grad = times.node_gradients();
    let step = 0.5 * h;
    let budget = (1.25 * t0 * times.max_speed / step).ceil() as usize + 4;
    let mut t_cur = t0;
    let mut stalls = 0;
    for _ in 0..budget {
        let stencil = g.stencil(&p).expect("descent stays inside the grid");
        let mut grad = [0.0; 3];
        for (i, w) in stencil {
            for a in 0..3 {
                grad[a] += w * node_grad[i][a];
            }
        }
        let norm = (grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2]).sqrt();
        if !(norm > 1e-12) {
            break;
        }
        let mut next = [0.0; 3];
        for a in 0..3 {
            next[a] = p[a] - step * grad[a] / norm;
        }
        for a in 0..g.ndim() {
            let hi = g.origin[a] + (g.dims[a] - 1) as f64 * h;
            next[a] = next[a].clamp(g.origin[a], hi);
        }
        let t_next = times.value_at(&next).expect("clamped inside");
        if t_next >= t_cur {
            stalls += 1;
            if stalls >= 3 {
                break;
            }
        } else {
            stalls = 0;
        }
        p = next;
        t_cur = t_next;
        poses.push(to_pose(p));
        if dist3(&p, &src) <= h {
            poses.push(to_pose(src));
            return Ok(Trajectory::new(poses, TrajectorySource::OracleBacktrack));
        }
    }
    Err(Error::BacktrackStall {
        position: p.to_vec(),
        iterations: poses.len() - 1,
    })
}

/// Wraps a solved grid as a time field whose one endpoint must be the grid
/// source. The source-side gradient is the negated query-side gradient.
#[derive(Clone, Debug)]
pub struct GridTimeField {
    times: TimeGrid,
    node_grad: Vec<[f64; 3]>,
}

impl GridTimeField {
    pub fn new(times: TimeGrid) -> Self {
        let node_grad = times.node_gradients();
        GridTimeField { times, node_grad }
    }

    pub fn times(&self) -> &TimeGrid {
        &self.times
    }

    fn at_source(&self, p: &Pose) -> bool {
        let src = self.times.source_position();
        let t = p.translation();
        let d = if self.times.geometry.ndim() == 2 {
            ((t[0] - src[0]).powi(2) + (t[1] - src[1]).powi(2)).sqrt()
        } else {
            dist3(&t, &src)
        };
        d <= 0.5 * self.times.geometry.spacing
    }

    fn query(&self, p: &Pose) -> Result<(f64, [f64; 3])> {
        let mut t = p.translation();
        if self.times.geometry.ndim() == 2 {
            t[2] = self.times.geometry.origin[2];
        }
        let stencil = self
            .times
            .geometry
            .stencil(&t)
            .ok_or_else(|| Error::invalid(format!("pose {t:?} outside the oracle grid")))?;
        let mut value = 0.0;
        let mut grad = [0.0; 3];
        for (i, w) in stencil {
            value += w * self.times.values[i];
            for a in 0..3 {
                grad[a] += w * self.node_grad[i][a];
            }
        }
        Ok((value, grad))
    }
}

impl TimeField for GridTimeField {
    fn space(&self) -> PoseSpace {
        if self.times.geometry.ndim() == 2 {
            PoseSpace::planar_xy()
        } else {
            PoseSpace::translation_only()
        }
    }

    fn evaluate(&self, p_s: &Pose, p_g: &Pose) -> Result<FieldEval> {
        check_finite(p_s, p_g)?;
        let expand = |g: [f64; 3], sign: f64| {
            let mut out = [0.0; 6];
            for a in 0..3 {
                out[a] = sign * g[a];
            }
            out
        };
        if self.at_source(p_g) {
            let (time, g) = self.query(p_s)?;
            Ok(FieldEval {
                time,
                grad_start: expand(g, 1.0),
                grad_goal: expand(g, -1.0),
            })
        } else if self.at_source(p_s) {
            let (time, g) = self.query(p_g)?;
            Ok(FieldEval {
                time,
                grad_start: expand(g, -1.0),
                grad_goal: expand(g, 1.0),
            })
        } else {
            Err(Error::invalid(
                "one endpoint must be the oracle grid source",
            ))
        }
    }
}

/// Learned-versus-oracle agreement over probe pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldComparison {
    pub probes: usize,
    pub mean_relative_error: f64,
    pub max_relative_error: f64,
    /// Learned-path length over oracle-path length, one per probe that both
    /// planners solved.
    pub path_ratios: Vec<f64>,
}

impl FieldComparison {
    pub fn mean_path_ratio(&self) -> Option<f64> {
        if self.path_ratios.is_empty() {
            None
        } else {
            Some(self.path_ratios.iter().sum::<f64>() / self.path_ratios.len() as f64)
        }
    }
}

/// Compares `field` against a solved grid. Every probe's goal must sit at
/// the grid source and its start inside the grid. Path ratios are computed
/// when `march` is given.
pub fn compare_fields(
    field: &dyn TimeField,
    times: &TimeGrid,
    probes: &[(Pose, Pose)],
    march: Option<&MarchParams>,
) -> Result<FieldComparison> {
    let oracle = GridTimeField::new(times.clone());
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    let mut path_ratios = Vec::new();
    for (p_s, p_g) in probes {
        if !oracle.at_source(p_g) {
            return Err(Error::invalid(format!(
                "probe goal {:?} is not the oracle source",
                p_g.translation()
            )));
        }
        let truth = oracle.time(p_s, p_g)?;
        let learned = field.time(p_s, p_g)?;
        let err = if truth > 0.0 {
            (learned - truth).abs() / truth
        } else {
            learned.abs()
        };
        sum += err;
        max = max.max(err);
        if let Some(params) = march {
            let mut start = p_s.translation();
            if times.geometry.ndim() == 2 {
                start[2] = times.geometry.origin[2];
            }
            let learned_path = march_bidirectional(field, p_s, p_g, params);
            let oracle_path = backtrack_from(times, start);
            if let (Ok(l), Ok(o)) = (learned_path, oracle_path) {
                if o.length_m() > 0.0 {
                    path_ratios.push(l.length_m() / o.length_m());
                }
            }
        }
    }
    let n = probes.len();
    Ok(FieldComparison {
        probes: n,
        mean_relative_error: if n > 0 { sum / n as f64 } else { 0.0 },
        max_relative_error: max,
        path_ratios,
    })
}

const GRID_MAGIC: &str = "timefield-grid 1";

/// Writes a text header followed by little-endian binary: three `u64`
/// dims, `f64` spacing, three `f64` origin, then the row-major values.
pub fn save_grid(
    path: &Path,
    geometry: &GridGeometry,
    orientation: [f64; 3],
    source: Option<usize>,
    values: &[f64],
) -> Result<()> {
    if values.len() != geometry.len() {
        return Err(Error::invalid("grid values do not match the geometry"));
    }
    let mut out = Vec::new();
    writeln!(out, "{GRID_MAGIC}")?;
    let d = geometry.dims;
    writeln!(out, "dims {} {} {}", d[0], d[1], d[2])?;
    writeln!(out, "spacing {:?}", geometry.spacing)?;
    let o = geometry.origin;
    writeln!(out, "origin {:?} {:?} {:?}", o[0], o[1], o[2])?;
    writeln!(
        out,
        "orientation {:?} {:?} {:?}",
        orientation[0], orientation[1], orientation[2]
    )?;
    match source {
        Some(s) => writeln!(out, "source {s}")?,
        None => writeln!(out, "source none")?,
    }
    writeln!(out, "layout row-major x,y,z z-fastest f64-le")?;
    writeln!(out, "end")?;
    for v in d {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    out.extend_from_slice(&geometry.spacing.to_le_bytes());
    for v in o {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// A grid file read back: geometry, orientation, optional source and values.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDump {
    pub geometry: GridGeometry,
    pub orientation: [f64; 3],
    pub source: Option<usize>,
    pub values: Vec<f64>,
}

pub fn load_grid(path: &Path) -> Result<GridDump> {
    let file = fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let name = path.display().to_string();
    let mut r = BufReader::new(file);
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::parse(
                name,
                header.len() + 1,
                "header not terminated",
            ));
        }
        let line = line.trim_end().to_string();
        if line == "end" {
            break;
        }
        header.push(line);
    }
    if header.first().map(String::as_str) != Some(GRID_MAGIC) {
        return Err(Error::parse(name, 1, "not a grid file"));
    }
    let floats = |line: usize, rest: &str| -> Result<Vec<f64>> {
        rest.split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| {
                    Error::parse(
                        path.display().to_string(),
                        line,
                        format!("bad number {t:?}"),
                    )
                })
            })
            .collect()
    };
    let mut orientation = [0.0; 3];
    let mut source = None;
    for (i, line) in header.iter().enumerate().skip(1) {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        match key {
            "orientation" => {
                let v = floats(i + 1, rest)?;
                if v.len() != 3 {
                    return Err(Error::parse(name, i + 1, "orientation needs three values"));
                }
                orientation = [v[0], v[1], v[2]];
            }
            "source" if rest != "none" => {
                source = Some(
                    rest.parse()
                        .map_err(|_| Error::parse(name.clone(), i + 1, "bad source index"))?,
                );
            }
            _ => {}
        }
    }
    let mut buf = [0u8; 8];
    let mut next = |r: &mut BufReader<fs::File>| -> Result<[u8; 8]> {
        r.read_exact(&mut buf)?;
        Ok(buf)
    };
    let mut dims = [0usize; 3];
    for d in &mut dims {
        *d = u64::from_le_bytes(next(&mut r)?) as usize;
    }
    let spacing = f64::from_le_bytes(next(&mut r)?);
    let mut origin = [0.0; 3];
    for o in &mut origin {
        *o = f64::from_le_bytes(next(&mut r)?);
    }
    let geometry = GridGeometry::new(dims, spacing, origin)?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * geometry.len() {
        return Err(Error::parse(
            name,
            header.len() + 2,
            "value block has the wrong size",
        ));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(GridDump {
        geometry,
        orientation,
        source,
        values,
    })
}

impl TimeGrid {
    pub fn save(&self, path: &Path) -> Result<()> {
        save_grid(
            path,
            &self.geometry,
            self.orientation,
            Some(self.source),
            &self.values,
        )
    }
}
