use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::Scene;
use crate::speed::{ground_truth_speed, sample_pose_in};
use crate::train::{Dataset, DatasetTuple};

use super::env::EnvSpec;

/// A generated dataset with its cost.
#[derive(Clone, Debug)]
pub struct GenerationReport {
    pub dataset: Dataset,
    pub wall_seconds: f64,
    /// Colliding candidates discarded while sampling.
    pub rejections: usize,
}

/// Samples `n_tuples` valid start/goal pairs (over the environment's
/// sampling bounds), cycling through the
/// environment's objects, and labels both endpoints with ground-truth speed
/// under the environment's speed parameters.
///
/// Tuple `i` draws from its own random stream, so the file does not depend
/// on the number of worker threads.
pub fn generate_dataset(
    env: &EnvSpec,
    scene: &Scene,
    n_tuples: usize,
    seed: u64,
) -> Result<GenerationReport> {
    let params = &env.speed;
    if n_tuples == 0 {
        return Err(Error::invalid("n_tuples must be positive"));
    }
    params.validate()?;
    let ids = env.object_ids();
    if ids.is_empty() {
        return Err(Error::invalid("environment has no objects"));
    }
    for id in &ids {
        scene.object(id)?;
    }
    let reach = env.reachability();
    let bounds = env.sampling_bounds();
    let started = Instant::now();
    let rows = (0..n_tuples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let id = &ids[i % ids.len()];
            // d > 0 only: near-contact poses teach the field the obstacles
            let s = sample_pose_in(scene, id, &env.space, &bounds, 0.0, &mut rng)?;
            let g = sample_pose_in(scene, id, &env.space, &bounds, 0.0, &mut rng)?;
            let tuple = DatasetTuple {
                object_id: id.clone(),
                p_s: s.pose,
                p_g: g.pose,
                s_star_s: ground_truth_speed(scene, id, &s.pose, params, &reach)?,
                s_star_g: ground_truth_speed(scene, id, &g.pose, params, &reach)?,
            };
            Ok((tuple, s.rejections + g.rejections))
        })
        .collect::<Result<Vec<_>>>()?;
    let rejections = rows.iter().map(|r| r.1).sum();
    let tuples = rows.into_iter().map(|r| r.0).collect();
    let wall_seconds = started.elapsed().as_secs_f64();
    log::info!("generated {n_tuples} tuples in {wall_seconds:.2} s ({rejections} rejections)");
    Ok(GenerationReport {
        dataset: Dataset {
            scene_hash: scene.hash(),
            speed_params: *params,
            tuples,
        },
        wall_seconds,
        rejections,
    })
}
