//! Eikonal training: the isotropic speed-ratio loss, Dirichlet and viscosity
//! regularizers, progressive speed scheduling and Adam.

mod dataset;

pub use dataset::{Dataset, DatasetTuple};

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::FieldFamily;
use crate::geom::{PointCloud, Scene};
use crate::net::{Gradients, SecondOrder, TimeFieldModel};
use crate::speed::SpeedParams;

/// `S*_s/S_s + S_s/S*_s + S*_g/S_g + S_g/S*_g − 4`.
pub fn isotropic_loss(s_star_s: f64, s_star_g: f64, s_pred_s: f64, s_pred_g: f64) -> Result<f64> {
    for v in [s_star_s, s_star_g, s_pred_s, s_pred_g] {
        if !(v > 0.0) {
            return Err(Error::invalid(format!("speeds must be positive, got {v}")));
        }
    }
    Ok(s_star_s / s_pred_s + s_pred_s / s_star_s + s_star_g / s_pred_g + s_pred_g / s_star_g - 4.0)
}

fn batch_fields<'a>(
    family: &'a dyn FieldFamily,
    scene: &Scene,
    batch: &[DatasetTuple],
) -> Result<HashMap<String, Box<dyn crate::field::TimeField + 'a>>> {
    let mut fields = HashMap::new();
    for t in batch {
        if !fields.contains_key(&t.object_id) {
            let f = family.field_for(scene.object(&t.object_id)?)?;
            fields.insert(t.object_id.clone(), f);
        }
    }
    Ok(fields)
}

/// Mean of `‖∇_{p_g} T‖²` over the batch, evaluated sample by sample.
pub fn dirichlet_term(
    family: &dyn FieldFamily,
    scene: &Scene,
    batch: &[DatasetTuple],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let fields = batch_fields(family, scene, batch)?;
    let mut sum = 0.0;
    for t in batch {
        let f = &fields[&t.object_id];
        let e = f.evaluate(&t.p_s, &t.p_g)?;
        sum += f.space().gradient_norm(&e.grad_goal).powi(2);
    }
    Ok(sum / batch.len() as f64)
}

/// Mean goal-side Laplacian `Δ_{p_g} T` over the batch.
pub fn viscosity_term(
    family: &dyn FieldFamily,
    scene: &Scene,
    batch: &[DatasetTuple],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let fields = batch_fields(family, scene, batch)?;
    let mut sum = 0.0;
    for t in batch {
        sum += fields[&t.object_id].goal_laplacian(&t.p_s, &t.p_g)?;
    }
    Ok(sum / batch.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    Dirichlet,
    Viscosity,
    None,
}

impl std::str::FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dirichlet" => Ok(Regularizer::Dirichlet),
            "viscosity" => Ok(Regularizer::Viscosity),
            "none" => Ok(Regularizer::None),
            _ => Err(Error::invalid(format!("unknown regularizer {s:?}"))),
        }
    }
}

/// Hold `alpha_init` for `warmup_epochs`, then add `delta_per_epoch` per
/// epoch until `alpha_stop`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSchedule {
    pub alpha_init: f64,
    pub warmup_epochs: usize,
    pub delta_per_epoch: f64,
    pub alpha_stop: f64,
}

impl AlphaSchedule {
    /// 0.5 for the first 10% of epochs, a linear ramp to 1 over the next 80%.
    pub fn for_epochs(epochs: usize) -> Self {
        let warmup = epochs.div_ceil(10);
        let ramp = ((epochs as f64) * 0.8).round().max(1.0);
        AlphaSchedule {
            alpha_init: 0.5,
            warmup_epochs: warmup,
            delta_per_epoch: 0.5 / ramp,
            alpha_stop: 1.0,
        }
    }

    pub fn constant(alpha: f64) -> Self {
        AlphaSchedule {
            alpha_init: alpha,
            warmup_epochs: 0,
            delta_per_epoch: 0.0,
            alpha_stop: alpha,
        }
    }

    pub fn alpha(&self, epoch: usize) -> f64 {
        if epoch < self.warmup_epochs {
            return self.alpha_init;
        }
        let steps = (epoch - self.warmup_epochs + 1) as f64;
        (self.alpha_init + steps * self.delta_per_epoch).min(self.alpha_stop)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epsilon: f64,
    pub regularizer: Regularizer,
    /// Regularize the start side as well: its gradient for the Dirichlet
    /// term, its Laplacian for the viscosity term.
    pub both_endpoints: bool,
    pub alpha_schedule: AlphaSchedule,
    pub rng_seed: u64,
    pub adam: AdamParams,
    /// Rescale each step's gradient to at most this global L2 norm.
    #[serde(default)]
    pub grad_clip: Option<f64>,
    /// Cosine decay of the learning rate down to this fraction of it by the
    /// last epoch; 1 keeps it constant.
    #[serde(default = "one")]
    pub lr_final_fraction: f64,
    /// Re-pair endpoints of the same object at random every epoch. A speed
    /// label depends only on its own pose, so any two labelled poses form a
    /// valid training pair.
    #[serde(default)]
    pub repair_endpoints: bool,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::for_epochs(100)
    }
}

impl TrainConfig {
    pub fn for_epochs(epochs: usize) -> Self {
        TrainConfig {
            epochs,
            batch_size: 256,
            learning_rate: 1e-3,
            epsilon: 0.1,
            regularizer: Regularizer::Dirichlet,
            both_endpoints: true,
            alpha_schedule: AlphaSchedule::for_epochs(epochs),
            rng_seed: 0,
            adam: AdamParams::default(),
            grad_clip: None,
            lr_final_fraction: 1.0,
            repair_endpoints: false,
        }
    }

    /// Learning rate in effect during `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 || self.lr_final_fraction == 1.0 {
            return self.learning_rate;
        }
        let t = (epoch.min(self.epochs - 1)) as f64 / (self.epochs - 1) as f64;
        let f = self.lr_final_fraction
            + (1.0 - self.lr_final_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.learning_rate * f
    }

    pub fn validate(&self) -> Result<()> {
        let a = &self.alpha_schedule;
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be finite and non-negative"));
        }
        if !(a.alpha_stop >= a.alpha_init && a.delta_per_epoch >= 0.0 && a.alpha_init >= 0.0) {
            return Err(Error::invalid("alpha schedule must be non-decreasing"));
        }
        if self.grad_clip.is_some_and(|c| !(c > 0.0)) {
            return Err(Error::invalid("gradient clip must be positive"));
        }
        if !(self.lr_final_fraction > 0.0 && self.lr_final_fraction <= 1.0) {
            return Err(Error::invalid(
                "final learning-rate fraction must be in (0, 1]",
            ));
        }
        let b = &self.adam;
        if !(0.0..1.0).contains(&b.beta1) || !(0.0..1.0).contains(&b.beta2) || !(b.eps > 0.0) {
            return Err(Error::invalid("invalid Adam hyperparameters"));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        let c: TrainConfig = serde_json::from_str(&text)?;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub alpha: f64,
    pub mean_loss: f64,
    pub reg_term: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.mean_loss)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w =
            csv::Writer::from_path(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        if self.epochs.is_empty() {
            w.write_record(["epoch", "alpha", "mean_loss", "reg_term", "wall_seconds"])
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        for e in &self.epochs {
            w.serialize(e)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Loss components of one batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepStats {
    /// Mean isotropic loss against the scheduled targets.
    pub data_loss: f64,
    /// Mean regularizer value as penalized (before the ε weight).
    pub reg_term: f64,
    /// Mean goal Laplacian, when second derivatives were computed.
    pub laplacian: Option<f64>,
}

impl StepStats {
    pub fn total(&self, epsilon: f64) -> f64 {
        self.data_loss + epsilon * self.reg_term
    }
}

struct Adam {
    params: AdamParams,
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(model: &TimeFieldModel, params: AdamParams) -> Self {
        Adam {
            params,
            m: model.zero_gradients(),
            v: model.zero_gradients(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut TimeFieldModel, grads: &Gradients, lr: f64) {
        self.t += 1;
        let AdamParams { beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.t);
        let c2 = 1.0 - beta2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            ndarray::Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

/// Owns a model and its optimizer state for step-wise training.
pub struct Trainer {
    model: TimeFieldModel,
    config: TrainConfig,
    clouds: Vec<PointCloud>,
    object_index: HashMap<String, usize>,
    s_const: f64,
    adam: Adam,
    lr: f64,
}

impl Trainer {
    /// Objects are resolved against `scene`; every scene object is available.
    pub fn new(
        model: TimeFieldModel,
        scene: &Scene,
        speed_params: &SpeedParams,
        config: TrainConfig,
    ) -> Result<Self> {
        config.validate()?;
        speed_params.validate()?;
        let mut clouds = Vec::new();
        let mut object_index = HashMap::new();
        for (i, (id, cloud)) in scene.objects().iter().enumerate() {
            clouds.push(cloud.clone());
            object_index.insert(id.clone(), i);
        }
        let adam = Adam::new(&model, config.adam);
        let lr = config.learning_rate;
        Ok(Trainer {
            lr,
            model,
            config,
            clouds,
            object_index,
            s_const: speed_params.s_const,
            adam,
        })
    }

    pub fn model(&self) -> &TimeFieldModel {
        &self.model
    }

    pub fn into_model(self) -> TimeFieldModel {
        self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Loss and parameter gradients on one batch.
    fn loss_and_gradients(
        &self,
        batch: &[&DatasetTuple],
        alpha: f64,
        with_gradients: bool,
    ) -> Result<(StepStats, Option<Gradients>)> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        let mut starts = Vec::with_capacity(batch.len());
        let mut goals = Vec::with_capacity(batch.len());
        let mut objects = Vec::with_capacity(batch.len());
        for t in batch {
            starts.push(t.p_s);
            goals.push(t.p_g);
            objects.push(
                *self
                    .object_index
                    .get(&t.object_id)
                    .ok_or_else(|| Error::UnknownObject(t.object_id.clone()))?,
            );
        }
        let space = self.model.space();
        let c = space.metric_weights();
        let s_const = self.s_const;
        let viscosity = self.config.regularizer == Regularizer::Viscosity;
        let second = match (viscosity, self.config.both_endpoints) {
            (false, _) => SecondOrder::None,
            (true, false) => SecondOrder::Goal,
            (true, true) => SecondOrder::Both,
        };
        let clouds: Vec<&PointCloud> = self.clouds.iter().collect();
        let fwd = self
            .model
            .forward_batch(&clouds, &starts, &goals, &objects, second)?;
        let layout = &fwd.layout;
        let time = &fwd.time;
        let n = batch.len() as f64;
        let eps = self.config.epsilon;
        let mut g_time = Array2::zeros(time.raw_dim());
        let mut data = 0.0;
        let mut reg = 0.0;
        let mut lap_sum = 0.0;

        for (b, t) in batch.iter().enumerate() {
            let tau_s = crate::speed::scheduled_speed(t.s_star_s, alpha, s_const);
            let tau_g = crate::speed::scheduled_speed(t.s_star_g, alpha, s_const);
            let norm = |row: &dyn Fn(usize) -> usize| {
                layout
                    .dims
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| time[[row(k), b]].powi(2) / c[j])
                    .sum::<f64>()
                    .sqrt()
            };
            let ns = norm(&|k| layout.start_row(k));
            let ng = norm(&|k| layout.goal_row(k));
            // S = 1/n, so S*/S + S/S* = τ n + 1/(τ n)
            data += tau_s * ns + 1.0 / (tau_s * ns) + tau_g * ng + 1.0 / (tau_g * ng) - 4.0;
            let dls = tau_s - 1.0 / (tau_s * ns * ns);
            let dlg = tau_g - 1.0 / (tau_g * ng * ng);
            for (k, &j) in layout.dims.iter().enumerate() {
                let gs = time[[layout.start_row(k), b]];
                let gg = time[[layout.goal_row(k), b]];
                g_time[[layout.start_row(k), b]] = dls * gs / (c[j] * ns) / n;
                g_time[[layout.goal_row(k), b]] = dlg * gg / (c[j] * ng) / n;
            }
            match self.config.regularizer {
                Regularizer::Dirichlet => {
                    reg += ng * ng;
                    for (k, &j) in layout.dims.iter().enumerate() {
                        let gg = time[[layout.goal_row(k), b]];
                        g_time[[layout.goal_row(k), b]] += eps * 2.0 * gg / c[j] / n;
                    }
                    if self.config.both_endpoints {
                        reg += ns * ns;
                        for (k, &j) in layout.dims.iter().enumerate() {
                            let gs = time[[layout.start_row(k), b]];
                            g_time[[layout.start_row(k), b]] += eps * 2.0 * gs / c[j] / n;
                        }
                    }
                }
                Regularizer::Viscosity => {
                    let lap: f64 = (0..layout.k())
                        .map(|k| time[[layout.second_row(k), b]])
                        .sum();
                    lap_sum += lap;
                    reg += lap * lap;
                    for k in 0..layout.k() {
                        g_time[[layout.second_row(k), b]] = eps * 2.0 * lap / n;
                    }
                    if layout.has_start_second() {
                        let lap_s: f64 = (0..layout.k())
                            .map(|k| time[[layout.start_second_row(k), b]])
                            .sum();
                        reg += lap_s * lap_s;
                        for k in 0..layout.k() {
                            g_time[[layout.start_second_row(k), b]] = eps * 2.0 * lap_s / n;
                        }
                    }
                }
                Regularizer::None => {}
            }
        }
        let stats = StepStats {
            data_loss: data / n,
            reg_term: reg / n,
            laplacian: viscosity.then_some(lap_sum / n),
        };
        let grads = with_gradients.then(|| self.model.backward_batch(&fwd, &g_time));
        Ok((stats, grads))
    }

    /// Loss components on a batch without touching the parameters.
    pub fn batch_loss(&self, batch: &[&DatasetTuple], alpha: f64) -> Result<StepStats> {
        Ok(self.loss_and_gradients(batch, alpha, false)?.0)
    }

    /// Loss components and the gradient of the total loss with respect to
    /// every parameter, flattened in [`TimeFieldModel::parameters`] order.
    pub fn parameter_gradients(
        &self,
        batch: &[&DatasetTuple],
        alpha: f64,
    ) -> Result<(StepStats, Vec<f64>)> {
        let (stats, grads) = self.loss_and_gradients(batch, alpha, true)?;
        let flat = grads
            .expect("requested")
            .layers
            .iter()
            .flat_map(|g| g.w.iter().chain(g.b.iter()).copied().collect::<Vec<_>>())
            .collect();
        Ok((stats, flat))
    }

    /// One Adam step on `batch`; returns the pre-step loss components.
    pub fn step(&mut self, batch: &[&DatasetTuple], alpha: f64) -> Result<StepStats> {
        let (stats, grads) = self.loss_and_gradients(batch, alpha, true)?;
        let mut grads = grads.expect("requested");
        let finite = grads
            .layers
            .iter()
            .all(|g| g.w.iter().chain(g.b.iter()).all(|v| v.is_finite()));
        if !stats.total(self.config.epsilon).is_finite() || !finite {
            return Err(Error::NanLoss { epoch: 0, batch: 0 });
        }
        if let Some(clip) = self.config.grad_clip {
            let norm = grads
                .layers
                .iter()
                .flat_map(|g| g.w.iter().chain(g.b.iter()))
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt();
            if norm > clip {
                let k = clip / norm;
                for g in &mut grads.layers {
                    g.w.mapv_inplace(|v| v * k);
                    g.b.mapv_inplace(|v| v * k);
                }
            }
        }
        self.adam.step(&mut self.model, &grads, self.lr);
        Ok(stats)
    }

    /// Mean loss components over a whole dataset in batches, no updates.
    pub fn evaluate(&self, tuples: &[DatasetTuple], alpha: f64) -> Result<StepStats> {
        let mut data = 0.0;
        let mut reg = 0.0;
        let mut lap = 0.0;
        for chunk in tuples.chunks(self.config.batch_size) {
            let refs: Vec<&DatasetTuple> = chunk.iter().collect();
            let s = self.batch_loss(&refs, alpha)?;
            let w = chunk.len() as f64;
            data += s.data_loss * w;
            reg += s.reg_term * w;
            lap += s.laplacian.unwrap_or(0.0) * w;
        }
        let n = tuples.len().max(1) as f64;
        Ok(StepStats {
            data_loss: data / n,
            reg_term: reg / n,
            laplacian: (self.config.regularizer == Regularizer::Viscosity).then_some(lap / n),
        })
    }

    /// Runs every configured epoch over `dataset`.
    pub fn fit(&mut self, dataset: &Dataset) -> Result<TrainLog> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.rng_seed);
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut log = TrainLog::default();
        let started = Instant::now();
        for epoch in 0..self.config.epochs {
            let alpha = self.config.alpha_schedule.alpha(epoch);
            self.lr = self.config.learning_rate_at(epoch);
            let repaired;
            let tuples = if self.config.repair_endpoints {
                repaired = repair_endpoints(&dataset.tuples, &mut rng);
                &repaired
            } else {
                &dataset.tuples
            };
            order.shuffle(&mut rng);
            let mut data = 0.0;
            let mut reg = 0.0;
            for (bi, chunk) in order.chunks(self.config.batch_size).enumerate() {
                let batch: Vec<&DatasetTuple> = chunk.iter().map(|&i| &tuples[i]).collect();
                let stats = self.step(&batch, alpha).map_err(|e| match e {
                    Error::NanLoss { .. } => Error::NanLoss { epoch, batch: bi },
                    other => other,
                })?;
                data += stats.data_loss * chunk.len() as f64;
                reg += stats.reg_term * chunk.len() as f64;
            }
            let n = dataset.len().max(1) as f64;
            let entry = EpochLog {
                epoch,
                alpha,
                mean_loss: data / n,
                reg_term: reg / n,
                wall_seconds: started.elapsed().as_secs_f64(),
            };
            log::info!(
                "epoch {epoch}: alpha {alpha:.3} loss {:.5} reg {:.5}",
                entry.mean_loss,
                entry.reg_term
            );
            log.epochs.push(entry);
        }
        Ok(log)
    }
}

/// Shuffles every endpoint among the tuples of the same object, keeping
/// the tuple count and each object's share.
fn repair_endpoints(tuples: &[DatasetTuple], rng: &mut ChaCha8Rng) -> Vec<DatasetTuple> {
    let mut groups: Vec<(&str, Vec<usize>)> = Vec::new();
    for (i, t) in tuples.iter().enumerate() {
        match groups.iter_mut().find(|(id, _)| *id == t.object_id) {
            Some((_, idx)) => idx.push(i),
            None => groups.push((&t.object_id, vec![i])),
        }
    }
    let mut out = tuples.to_vec();
    for (_, idx) in groups {
        let mut ends: Vec<_> = idx
            .iter()
            .flat_map(|&i| {
                [
                    (tuples[i].p_s, tuples[i].s_star_s),
                    (tuples[i].p_g, tuples[i].s_star_g),
                ]
            })
            .collect();
        ends.shuffle(rng);
        for (k, &i) in idx.iter().enumerate() {
            let t = &mut out[i];
            (t.p_s, t.s_star_s) = ends[2 * k];
            (t.p_g, t.s_star_g) = ends[2 * k + 1];
        }
    }
    out
}

/// Trains `model` on `dataset`, which must have been generated against `scene`.
pub fn train(
    model: TimeFieldModel,
    dataset: &Dataset,
    scene: &Scene,
    config: &TrainConfig,
) -> Result<(TimeFieldModel, TrainLog)> {
    let hash = scene.hash();
    if dataset.scene_hash != hash {
        return Err(Error::SceneHashMismatch {
            expected: hash,
            found: dataset.scene_hash.clone(),
        });
    }
    if dataset.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let mut trainer = Trainer::new(model, scene, &dataset.speed_params, config.clone())?;
    let log = trainer.fit(dataset)?;
    Ok((trainer.into_model(), log))
}
