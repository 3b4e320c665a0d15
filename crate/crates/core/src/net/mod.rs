//! The time-field network: Fourier pose features, a pose encoder applied
//! to both endpoints, a symmetric max/min combination, a point-cloud shape
//! encoder and a residual generator whose positive output scales the
//! metric distance between the poses.

mod checkpoint;
mod jet;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub(crate) use jet::DenseGrad;
pub use jet::{sigmoid, softplus};

use std::f64::consts::{E, PI};

use ndarray::{s, Array1, Array2, Array3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{check_finite, FieldEval, FieldFamily, TimeField};
use crate::geom::{PointCloud, Pose, PoseSpace, CANONICAL_CLOUD_SIZE};
use jet::{activate, activate_backward, Dense, Jet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub fourier_features: usize,
    pub fourier_scale: f64,
    /// Hidden widths of the pose encoder; the last one is the pose latent size.
    pub pose_layers: Vec<usize>,
    /// Widths of the per-point shape MLP; the last one is the shape latent size.
    pub shape_layers: Vec<usize>,
    pub generator_width: usize,
    pub generator_blocks: usize,
    pub space: PoseSpace,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            fourier_features: 64,
            fourier_scale: 1.0,
            pose_layers: vec![128, 128],
            shape_layers: vec![64, 64],
            generator_width: 128,
            generator_blocks: 4,
            space: PoseSpace::default(),
        }
    }
}

impl ModelConfig {
    /// A smaller network for single-core runs.
    pub fn compact(space: PoseSpace) -> Self {
        ModelConfig {
            fourier_features: 32,
            fourier_scale: 1.0,
            pose_layers: vec![64, 64],
            shape_layers: vec![32, 32],
            generator_width: 64,
            generator_blocks: 2,
            space,
        }
    }

    /// Two units everywhere; for derivative checks.
    pub fn tiny(space: PoseSpace) -> Self {
        ModelConfig {
            fourier_features: 2,
            fourier_scale: 1.0,
            pose_layers: vec![2],
            shape_layers: vec![2],
            generator_width: 2,
            generator_blocks: 1,
            space,
        }
    }

    pub fn with_space(mut self, space: PoseSpace) -> Self {
        self.space = space;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let widths_ok = self.fourier_features > 0
            && self.generator_width > 0
            && !self.pose_layers.is_empty()
            && !self.shape_layers.is_empty()
            && self
                .pose_layers
                .iter()
                .chain(&self.shape_layers)
                .all(|&w| w > 0);
        if !widths_ok {
            return Err(Error::invalid("model widths must be positive"));
        }
        if !(self.fourier_scale.is_finite() && self.fourier_scale >= 0.0) {
            return Err(Error::invalid(
                "fourier scale must be finite and non-negative",
            ));
        }
        if self.space.dim() == 0 {
            return Err(Error::invalid("pose space has no active dimensions"));
        }
        if !(self.space.rotation_weight.is_finite() && self.space.rotation_weight >= 0.0) {
            return Err(Error::invalid(
                "rotation weight must be finite and non-negative",
            ));
        }
        Ok(())
    }

    pub fn pose_latent(&self) -> usize {
        *self.pose_layers.last().expect("validated")
    }

    pub fn shape_latent(&self) -> usize {
        *self.shape_layers.last().expect("validated")
    }
}

/// Random Fourier features `[cos(2πBp); sin(2πBp)]`.
///
/// Rotation columns are rounded so `2πB` is integral there, which keeps the
/// features periodic in every angle.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFeatureMap {
    b: Array2<f64>,
}

impl FourierFeatureMap {
    pub fn sample(features: usize, scale: f64, space: &PoseSpace, rng: &mut ChaCha8Rng) -> Self {
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let mut b = Array2::zeros((features, 6));
        for f in 0..features {
            for j in 0..6 {
                let z: f64 = normal.sample(rng);
                if !space.active[j] {
                    continue;
                }
                b[[f, j]] = if j < 3 {
                    scale * z
                } else {
                    (2.0 * PI * scale * space.rotation_weight * z).round() / (2.0 * PI)
                };
            }
        }
        FourierFeatureMap { b }
    }

    pub fn from_matrix(b: Array2<f64>) -> Result<Self> {
        if b.ncols() != 6 || b.nrows() == 0 {
            return Err(Error::invalid("frequency matrix must be F × 6"));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("frequency matrix must be finite"));
        }
        Ok(FourierFeatureMap { b })
    }

    pub fn frequency_matrix(&self) -> &Array2<f64> {
        &self.b
    }

    pub fn features(&self) -> usize {
        self.b.nrows()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.b.nrows()
    }

    fn phase(&self, f: usize, p: &[f64; 6]) -> f64 {
        let mut acc = 0.0;
        for (j, pj) in p.iter().enumerate() {
            acc += self.b[[f, j]] * pj;
        }
        2.0 * PI * acc
    }

    pub fn apply(&self, pose: &Pose) -> Vec<f64> {
        let p = pose.to_array();
        let n = self.features();
        let mut out = vec![0.0; 2 * n];
        for f in 0..n {
            let theta = self.phase(f, &p);
            out[f] = theta.cos();
            out[n + f] = theta.sin();
        }
        out
    }

    /// Features with derivatives along the given pose dimensions, and pure
    /// second derivatives when `second` is set.
    fn jet(&self, poses: &[Pose], dims: &[usize], second: bool) -> Jet {
        let k = dims.len();
        let sec: Vec<usize> = if second { (0..k).collect() } else { Vec::new() };
        let n = self.features();
        let mut jet = Jet::zeros(k, sec, poses.len(), 2 * n);
        for (bi, pose) in poses.iter().enumerate() {
            let p = pose.to_array();
            for f in 0..n {
                let theta = self.phase(f, &p);
                let (sn, cs) = theta.sin_cos();
                jet.data[[0, bi, f]] = cs;
                jet.data[[0, bi, n + f]] = sn;
                for (t, &j) in dims.iter().enumerate() {
                    let w = 2.0 * PI * self.b[[f, j]];
                    jet.data[[1 + t, bi, f]] = -sn * w;
                    jet.data[[1 + t, bi, n + f]] = cs * w;
                    if second {
                        jet.data[[1 + k + t, bi, f]] = -cs * w * w;
                        jet.data[[1 + k + t, bi, n + f]] = -sn * w * w;
                    }
                }
            }
        }
        jet
    }
}

/// `(max(a, b), min(a, b))` elementwise, concatenated.
pub fn symmetric_combine(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "latent dimensions differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut out = Vec::with_capacity(2 * a.len());
    out.extend(a.iter().zip(b).map(|(x, y)| x.max(*y)));
    out.extend(a.iter().zip(b).map(|(x, y)| x.min(*y)));
    Ok(out)
}

struct MlpTape {
    inputs: Vec<Jet>,
    pre: Vec<Jet>,
}

fn mlp_forward(layers: &[Dense], mut x: Jet, keep: bool) -> (Jet, MlpTape) {
    let mut tape = MlpTape {
        inputs: Vec::new(),
        pre: Vec::new(),
    };
    for layer in layers {
        let y = layer.forward(&x);
        let z = activate(&y);
        if keep {
            tape.inputs.push(x);
            tape.pre.push(y);
        }
        x = z;
    }
    (x, tape)
}

fn mlp_backward(
    layers: &[Dense],
    tape: &MlpTape,
    mut g: Array3<f64>,
    grads: &mut [DenseGrad],
) -> Array3<f64> {
    for i in (0..layers.len()).rev() {
        let gy = activate_backward(&tape.pre[i], g.view());
        g = layers[i].backward(&tape.inputs[i], &gy, &mut grads[i]);
    }
    g
}

/// Which pure second derivatives a batched pass carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SecondOrder {
    None,
    Goal,
    Both,
}

/// Layout of the per-sample time jet returned by batched evaluation:
/// row 0 is `T`, rows `1..=k` are `∂T/∂p_s` along the active dims, rows
/// `k+1..=2k` are `∂T/∂p_g`. With second order the next `k` rows are
/// `∂²T/∂p_g²` along the same dims, followed by `∂²T/∂p_s²` for `Both`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct JetLayout {
    pub dims: Vec<usize>,
    pub second: SecondOrder,
}

impl JetLayout {
    pub fn k(&self) -> usize {
        self.dims.len()
    }

    pub fn rows(&self) -> usize {
        let extra = match self.second {
            SecondOrder::None => 0,
            SecondOrder::Goal => 1,
            SecondOrder::Both => 2,
        };
        1 + (2 + extra) * self.k()
    }

    pub fn has_goal_second(&self) -> bool {
        self.second != SecondOrder::None
    }

    pub fn has_start_second(&self) -> bool {
        self.second == SecondOrder::Both
    }

    pub fn start_row(&self, t: usize) -> usize {
        1 + t
    }

    pub fn goal_row(&self, t: usize) -> usize {
        1 + self.k() + t
    }

    pub fn second_row(&self, t: usize) -> usize {
        1 + 2 * self.k() + t
    }

    pub fn start_second_row(&self, t: usize) -> usize {
        1 + 3 * self.k() + t
    }
}

struct BlockTape {
    input: Jet,
    u_pre: Jet,
    u: Jet,
    v_pre: Jet,
}

struct CoreTape {
    start: MlpTape,
    goal: MlpTape,
    start_max: Array2<bool>,
    combined: Jet,
    gen_pre: Jet,
    blocks: Vec<BlockTape>,
    head_in: Jet,
    head_pre: Jet,
    dist: Array2<f64>,
}

struct ShapeTape {
    mlp: MlpTape,
    argmax: Vec<usize>,
}

/// Result of a batched forward pass kept for the reverse pass.
pub(crate) struct Forward {
    pub layout: JetLayout,
    pub time: Array2<f64>,
    core: CoreTape,
    shapes: Vec<ShapeTape>,
    objects: Vec<usize>,
}

/// Parameter gradients, one entry per dense layer in declaration order.
#[derive(Clone, Debug)]
pub(crate) struct Gradients {
    pub layers: Vec<DenseGrad>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeFieldModel {
    config: ModelConfig,
    fourier: FourierFeatureMap,
    layers: Vec<Dense>,
}

/// Head bias making the initial head output exactly 1.
fn unit_head_bias() -> f64 {
    (E - 1.0).ln()
}

impl TimeFieldModel {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fourier = FourierFeatureMap::sample(
            config.fourier_features,
            config.fourier_scale,
            &config.space,
            &mut rng,
        );
        let shapes = Self::layer_shapes(&config);
        let head_index = shapes.len() - 1;
        let layers = shapes
            .into_iter()
            .enumerate()
            .map(|(i, (out, inp))| {
                let std = if i == head_index {
                    0.01 / (inp as f64).sqrt()
                } else {
                    1.0 / (inp as f64).sqrt()
                };
                let normal = Normal::new(0.0, std).expect("positive std");
                let w = Array2::from_shape_simple_fn((out, inp), || normal.sample(&mut rng));
                let b = if i == head_index {
                    Array1::from_elem(out, unit_head_bias())
                } else {
                    Array1::zeros(out)
                };
                Dense { w, b }
            })
            .collect();
        Ok(TimeFieldModel {
            config,
            fourier,
            layers,
        })
    }

    /// `(outputs, inputs)` for every dense layer in declaration order:
    /// pose encoder, shape encoder, generator input, residual blocks, head.
    fn layer_shapes(config: &ModelConfig) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        let mut prev = 2 * config.fourier_features;
        for &w in &config.pose_layers {
            shapes.push((w, prev));
            prev = w;
        }
        prev = 3;
        for &w in &config.shape_layers {
            shapes.push((w, prev));
            prev = w;
        }
        let gw = config.generator_width;
        shapes.push((gw, 2 * config.pose_latent() + config.shape_latent()));
        for _ in 0..config.generator_blocks {
            shapes.push((gw, gw));
            shapes.push((gw, gw));
        }
        shapes.push((1, gw));
        shapes
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        fourier: FourierFeatureMap,
        layers: Vec<Dense>,
    ) -> Result<Self> {
        config.validate()?;
        if fourier.features() != config.fourier_features {
            return Err(Error::invalid("frequency matrix does not match the config"));
        }
        let shapes = Self::layer_shapes(&config);
        if shapes.len() != layers.len()
            || shapes
                .iter()
                .zip(&layers)
                .any(|(&(o, i), l)| l.w.dim() != (o, i) || l.b.len() != o)
        {
            return Err(Error::invalid("parameter shapes do not match the config"));
        }
        Ok(TimeFieldModel {
            config,
            fourier,
            layers,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn space(&self) -> PoseSpace {
        self.config.space
    }

    pub fn fourier(&self) -> &FourierFeatureMap {
        &self.fourier
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    fn pose_layers(&self) -> &[Dense] {
        &self.layers[..self.config.pose_layers.len()]
    }

    fn shape_range(&self) -> std::ops::Range<usize> {
        let p = self.config.pose_layers.len();
        p..p + self.config.shape_layers.len()
    }

    fn gen_index(&self) -> usize {
        self.config.pose_layers.len() + self.config.shape_layers.len()
    }

    fn head_index(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// All trainable parameters flattened in declaration order.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.parameter_count() {
            return Err(Error::invalid("parameter vector has the wrong length"));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for v in l.w.iter_mut().chain(l.b.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn parameters_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(l.b.iter()).all(|v| v.is_finite()))
    }

    /// Pose latent, evaluated with plain sequential loops.
    pub fn encode_pose(&self, pose: &Pose) -> Result<Vec<f64>> {
        if !pose.is_finite() {
            return Err(Error::invalid("non-finite pose"));
        }
        let mut x = self.fourier.apply(pose);
        for layer in self.pose_layers() {
            x = layer
                .apply_sequential(&x)
                .into_iter()
                .map(softplus)
                .collect();
        }
        Ok(x)
    }

    pub fn encode_shape(&self, cloud: &PointCloud) -> Result<Vec<f64>> {
        Ok(self.shape_forward(cloud, false)?.0.to_vec())
    }

    fn shape_forward(&self, cloud: &PointCloud, keep: bool) -> Result<(Array1<f64>, ShapeTape)> {
        if cloud.len() != CANONICAL_CLOUD_SIZE {
            return Err(Error::invalid(format!(
                "shape encoder expects {CANONICAL_CLOUD_SIZE} points, got {}",
                cloud.len()
            )));
        }
        let mut x = Jet::zeros(0, Vec::new(), cloud.len(), 3);
        for (i, p) in cloud.iter().enumerate() {
            for j in 0..3 {
                x.data[[0, i, j]] = p[j];
            }
        }
        let (out, mlp) = mlp_forward(&self.layers[self.shape_range()], x, keep);
        let values = out.data.index_axis(Axis(0), 0);
        let width = values.ncols();
        let mut latent = Array1::zeros(width);
        let mut argmax = vec![0; width];
        for j in 0..width {
            let mut best = 0;
            for i in 1..values.nrows() {
                if values[[i, j]] > values[[best, j]] {
                    best = i;
                }
            }
            argmax[j] = best;
            latent[j] = values[[best, j]];
        }
        Ok((latent, ShapeTape { mlp, argmax }))
    }

    /// The field for one object, with its shape latent computed once.
    pub fn for_object(&self, cloud: &PointCloud) -> Result<ObjectField<'_>> {
        let shape = self.encode_shape(cloud)?;
        Ok(ObjectField {
            model: self,
            shape: Array1::from(shape),
        })
    }

    pub fn forward_time(&self, cloud: &PointCloud, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        self.for_object(cloud)?.time(p_s, p_g)
    }

    pub fn input_gradients(
        &self,
        cloud: &PointCloud,
        p_s: &Pose,
        p_g: &Pose,
    ) -> Result<([f64; 6], [f64; 6])> {
        let e = self.for_object(cloud)?.evaluate(p_s, p_g)?;
        Ok((e.grad_start, e.grad_goal))
    }

    pub fn predicted_speed(
        &self,
        cloud: &PointCloud,
        p_s: &Pose,
        p_g: &Pose,
    ) -> Result<(f64, f64)> {
        crate::field::predicted_speed(&self.for_object(cloud)?, p_s, p_g)
    }

    /// Metric distance with its derivatives in the layout's row order.
    fn distance_jet(&self, layout: &JetLayout, starts: &[Pose], goals: &[Pose]) -> Array2<f64> {
        let space = self.config.space;
        let c = space.metric_weights();
        let mut out = Array2::zeros((layout.rows(), starts.len()));
        for (b, (s, g)) in starts.iter().zip(goals).enumerate() {
            let delta = space.delta(s, g);
            let d = space.distance(s, g);
            out[[0, b]] = d;
            if d == 0.0 {
                continue;
            }
            for (t, &j) in layout.dims.iter().enumerate() {
                let u = c[j] * delta[j] / d;
                out[[layout.start_row(t), b]] = -u;
                out[[layout.goal_row(t), b]] = u;
                if layout.has_goal_second() {
                    out[[layout.second_row(t), b]] = (c[j] - u * u) / d;
                }
                if layout.has_start_second() {
                    out[[layout.start_second_row(t), b]] = (c[j] - u * u) / d;
                }
            }
        }
        out
    }

    /// Batched forward pass with per-sample shape latents (`B × S`).
    fn forward_core(
        &self,
        starts: &[Pose],
        goals: &[Pose],
        shapes: &Array2<f64>,
        second: SecondOrder,
        keep: bool,
    ) -> (Array2<f64>, JetLayout, CoreTape) {
        let dims = self.config.space.active_dims();
        let layout = JetLayout {
            dims: dims.clone(),
            second,
        };
        let k = dims.len();
        let batch = starts.len();
        let pose_layers = self.pose_layers();
        let goal_second = layout.has_goal_second();
        let start_second = layout.has_start_second();
        let (sj, start_tape) = mlp_forward(
            pose_layers,
            self.fourier.jet(starts, &dims, start_second),
            keep,
        );
        let (gj, goal_tape) = mlp_forward(
            pose_layers,
            self.fourier.jet(goals, &dims, goal_second),
            keep,
        );

        let l = self.config.pose_latent();
        let sw = self.config.shape_latent();
        let mut sec: Vec<usize> = Vec::new();
        if goal_second {
            sec.extend(k..2 * k);
        }
        if start_second {
            sec.extend(0..k);
        }
        let mut x = Jet::zeros(2 * k, sec, batch, 2 * l + sw);
        let mut start_max = Array2::from_elem((batch, l), false);
        for b in 0..batch {
            for i in 0..l {
                let a0 = sj.data[[0, b, i]];
                let g0 = gj.data[[0, b, i]];
                let (hi, lo) = if a0 >= g0 { (i, l + i) } else { (l + i, i) };
                start_max[[b, i]] = a0 >= g0;
                x.data[[0, b, hi]] = a0;
                x.data[[0, b, lo]] = g0;
                for t in 0..k {
                    x.data[[1 + t, b, hi]] = sj.data[[1 + t, b, i]];
                    x.data[[1 + k + t, b, lo]] = gj.data[[1 + t, b, i]];
                    if goal_second {
                        x.data[[1 + 2 * k + t, b, lo]] = gj.data[[1 + k + t, b, i]];
                    }
                    if start_second {
                        x.data[[1 + 3 * k + t, b, hi]] = sj.data[[1 + k + t, b, i]];
                    }
                }
            }
            x.data.slice_mut(s![0, b, 2 * l..]).assign(&shapes.row(b));
        }

        let gen = &self.layers[self.gen_index()];
        let gen_pre = gen.forward(&x);
        let mut h = activate(&gen_pre);
        let mut blocks = Vec::new();
        for i in 0..self.config.generator_blocks {
            let w1 = &self.layers[self.gen_index() + 1 + 2 * i];
            let w2 = &self.layers[self.gen_index() + 2 + 2 * i];
            let u_pre = w1.forward(&h);
            let u = activate(&u_pre);
            let v_pre = w2.forward(&u);
            let v = activate(&v_pre);
            let mut next = h.clone();
            next.data += &v.data;
            if keep {
                blocks.push(BlockTape {
                    input: h,
                    u_pre,
                    u,
                    v_pre,
                });
            }
            h = next;
        }
        let head_pre = self.layers[self.head_index()].forward(&h);
        let head = activate(&head_pre);
        let dist = self.distance_jet(&layout, starts, goals);

        let q = head.data.index_axis(Axis(2), 0);
        let mut time = Array2::zeros((layout.rows(), batch));
        for b in 0..batch {
            let d0 = dist[[0, b]];
            let q0 = q[[0, b]];
            time[[0, b]] = d0 * q0;
            for r in 1..=2 * k {
                time[[r, b]] = dist[[r, b]] * q0 + d0 * q[[r, b]];
            }
            // T'' = d''q + 2d'q' + dq''
            for t in 0..k {
                let mut pairs = Vec::with_capacity(2);
                if goal_second {
                    pairs.push((layout.second_row(t), layout.goal_row(t)));
                }
                if start_second {
                    pairs.push((layout.start_second_row(t), layout.start_row(t)));
                }
                for (r, g) in pairs {
                    time[[r, b]] =
                        dist[[r, b]] * q0 + 2.0 * dist[[g, b]] * q[[g, b]] + d0 * q[[r, b]];
                }
            }
        }
        let tape = CoreTape {
            start: start_tape,
            goal: goal_tape,
            start_max,
            combined: x,
            gen_pre,
            blocks,
            head_in: h,
            head_pre,
            dist,
        };
        (time, layout, tape)
    }

    /// Reverse pass of [`forward_core`]; returns the adjoint of the shape rows.
    fn backward_core(
        &self,
        layout: &JetLayout,
        tape: &CoreTape,
        g_time: &Array2<f64>,
        grads: &mut [DenseGrad],
    ) -> Array2<f64> {
        let k = layout.k();
        let batch = g_time.ncols();
        let dist = &tape.dist;

        let mut g_q = Array3::zeros((layout.rows(), batch, 1));
        for b in 0..batch {
            let d0 = dist[[0, b]];
            let mut g0 = g_time[[0, b]] * d0;
            for r in 1..=2 * k {
                g0 += g_time[[r, b]] * dist[[r, b]];
                g_q[[r, b, 0]] = g_time[[r, b]] * d0;
            }
            for t in 0..k {
                let mut pairs = Vec::with_capacity(2);
                if layout.has_goal_second() {
                    pairs.push((layout.second_row(t), layout.goal_row(t)));
                }
                if layout.has_start_second() {
                    pairs.push((layout.start_second_row(t), layout.start_row(t)));
                }
                for (r, g) in pairs {
                    g0 += g_time[[r, b]] * dist[[r, b]];
                    g_q[[g, b, 0]] += 2.0 * g_time[[r, b]] * dist[[g, b]];
                    g_q[[r, b, 0]] = g_time[[r, b]] * d0;
                }
            }
            g_q[[0, b, 0]] = g0;
        }

        let hi = self.head_index();
        let g_head_pre = activate_backward(&tape.head_pre, g_q.view());
        let mut g_h = self.layers[hi].backward(&tape.head_in, &g_head_pre, &mut grads[hi]);
        let gi = self.gen_index();
        for i in (0..tape.blocks.len()).rev() {
            let bt = &tape.blocks[i];
            let (i1, i2) = (gi + 1 + 2 * i, gi + 2 + 2 * i);
            let g_vpre = activate_backward(&bt.v_pre, g_h.view());
            let g_u = self.layers[i2].backward(&bt.u, &g_vpre, &mut grads[i2]);
            let g_upre = activate_backward(&bt.u_pre, g_u.view());
            g_h += &self.layers[i1].backward(&bt.input, &g_upre, &mut grads[i1]);
        }
        let g_gen_pre = activate_backward(&tape.gen_pre, g_h.view());
        let g_x = self.layers[gi].backward(&tape.combined, &g_gen_pre, &mut grads[gi]);

        let l = self.config.pose_latent();
        let goal_second = layout.has_goal_second();
        let start_second = layout.has_start_second();
        let rows = |on: bool| 1 + k + if on { k } else { 0 };
        let mut g_s = Array3::zeros((rows(start_second), batch, l));
        let mut g_g = Array3::zeros((rows(goal_second), batch, l));
        for b in 0..batch {
            for i in 0..l {
                let (hi, lo) = if tape.start_max[[b, i]] {
                    (i, l + i)
                } else {
                    (l + i, i)
                };
                g_s[[0, b, i]] = g_x[[0, b, hi]];
                g_g[[0, b, i]] = g_x[[0, b, lo]];
                for t in 0..k {
                    g_s[[1 + t, b, i]] = g_x[[1 + t, b, hi]];
                    g_g[[1 + t, b, i]] = g_x[[1 + k + t, b, lo]];
                    if goal_second {
                        g_g[[1 + k + t, b, i]] = g_x[[1 + 2 * k + t, b, lo]];
                    }
                    if start_second {
                        g_s[[1 + k + t, b, i]] = g_x[[1 + 3 * k + t, b, hi]];
                    }
                }
            }
        }
        let np = self.config.pose_layers.len();
        let pose_layers = self.pose_layers();
        mlp_backward(pose_layers, &tape.start, g_s, &mut grads[..np]);
        mlp_backward(pose_layers, &tape.goal, g_g, &mut grads[..np]);

        g_x.slice(s![0, .., 2 * l..]).to_owned()
    }

    /// Batched forward pass over samples drawn from several objects.
    pub(crate) fn forward_batch(
        &self,
        clouds: &[&PointCloud],
        starts: &[Pose],
        goals: &[Pose],
        objects: &[usize],
        second: SecondOrder,
    ) -> Result<Forward> {
        if starts.len() != goals.len() || starts.len() != objects.len() {
            return Err(Error::invalid("batch arrays differ in length"));
        }
        for (s, g) in starts.iter().zip(goals) {
            check_finite(s, g)?;
        }
        let mut latents = Vec::with_capacity(clouds.len());
        let mut shape_tapes = Vec::with_capacity(clouds.len());
        for c in clouds {
            let (lat, tape) = self.shape_forward(c, true)?;
            latents.push(lat);
            shape_tapes.push(tape);
        }
        let sw = self.config.shape_latent();
        let mut shapes = Array2::zeros((starts.len(), sw));
        for (b, &o) in objects.iter().enumerate() {
            let lat = latents
                .get(o)
                .ok_or_else(|| Error::invalid(format!("object index {o} out of range")))?;
            shapes.row_mut(b).assign(lat);
        }
        let (time, layout, core) = self.forward_core(starts, goals, &shapes, second, true);
        Ok(Forward {
            layout,
            time,
            core,
            shapes: shape_tapes,
            objects: objects.to_vec(),
        })
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(DenseGrad::zeros_like).collect(),
        }
    }

    /// Parameter gradients of `Σ g_time ⊙ time`.
    pub(crate) fn backward_batch(&self, fwd: &Forward, g_time: &Array2<f64>) -> Gradients {
        let mut grads = self.zero_gradients();
        let g_shapes = self.backward_core(&fwd.layout, &fwd.core, g_time, &mut grads.layers);
        let range = self.shape_range();
        let sw = self.config.shape_latent();
        for (o, tape) in fwd.shapes.iter().enumerate() {
            let mut g_latent = Array1::<f64>::zeros(sw);
            let mut used = false;
            for (b, &ob) in fwd.objects.iter().enumerate() {
                if ob == o {
                    g_latent += &g_shapes.row(b);
                    used = true;
                }
            }
            if !used {
                continue;
            }
            let mut g_out = Array3::zeros((1, CANONICAL_CLOUD_SIZE, sw));
            for j in 0..sw {
                g_out[[0, tape.argmax[j], j]] = g_latent[j];
            }
            mlp_backward(
                &self.layers[range.clone()],
                &tape.mlp,
                g_out,
                &mut grads.layers[range.clone()],
            );
        }
        grads
    }

    fn evaluate_rows(
        &self,
        shape: &Array1<f64>,
        p_s: &Pose,
        p_g: &Pose,
        second: SecondOrder,
    ) -> (Array2<f64>, JetLayout) {
        let shapes = shape.view().insert_axis(Axis(0)).to_owned();
        let (time, layout, _) = self.forward_core(
            std::slice::from_ref(p_s),
            std::slice::from_ref(p_g),
            &shapes,
            second,
            false,
        );
        (time, layout)
    }
}

impl FieldFamily for TimeFieldModel {
    fn field_for<'a>(&'a self, cloud: &PointCloud) -> Result<Box<dyn TimeField + 'a>> {
        Ok(Box::new(self.for_object(cloud)?))
    }
}

/// A [`TimeFieldModel`] conditioned on one object's shape.
#[derive(Clone, Debug)]
pub struct ObjectField<'a> {
    model: &'a TimeFieldModel,
    shape: Array1<f64>,
}

impl ObjectField<'_> {
    pub fn shape_latent(&self) -> &[f64] {
        self.shape.as_slice().expect("contiguous")
    }
}

impl TimeField for ObjectField<'_> {
    fn space(&self) -> PoseSpace {
        self.model.space()
    }

    fn evaluate(&self, p_s: &Pose, p_g: &Pose) -> Result<FieldEval> {
        check_finite(p_s, p_g)?;
        let (rows, layout) = self
            .model
            .evaluate_rows(&self.shape, p_s, p_g, SecondOrder::None);
        let mut grad_start = [0.0; 6];
        let mut grad_goal = [0.0; 6];
        for (t, &j) in layout.dims.iter().enumerate() {
            grad_start[j] = rows[[layout.start_row(t), 0]];
            grad_goal[j] = rows[[layout.goal_row(t), 0]];
        }
        Ok(FieldEval {
            time: rows[[0, 0]],
            grad_start,
            grad_goal,
        })
    }

    fn time(&self, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        check_finite(p_s, p_g)?;
        Ok(self
            .model
            .evaluate_rows(&self.shape, p_s, p_g, SecondOrder::None)
            .0[[0, 0]])
    }

    fn goal_laplacian(&self, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        check_finite(p_s, p_g)?;
        let (rows, layout) = self
            .model
            .evaluate_rows(&self.shape, p_s, p_g, SecondOrder::Goal);
        Ok((0..layout.k())
            .map(|t| rows[[layout.second_row(t), 0]])
            .sum())
    }
}

#[cfg(test)]
mod tests;
