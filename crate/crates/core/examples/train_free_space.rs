//! Train a field on the obstacle-free scene, where the exact arrival time
//! is the Euclidean distance, and report the error on probe pairs.
//!
//! `cargo run --release --example train_free_space -- [epochs]`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use timefield::bench::{generate_dataset, EnvSpec};
use timefield::geom::Pose;
use timefield::net::TimeFieldModel;
use timefield::train::train;

fn main() -> timefield::Result<()> {
    let epochs = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(60);
    let env = EnvSpec::free_space();
    let scene = env.scene()?;
    let data = generate_dataset(&env, &scene, 5000, 1)?.dataset;
    let mut recipe = env.training_recipe();
    recipe.train.epochs = epochs;
    let model = TimeFieldModel::new(recipe.model, 1)?;
    let (model, log) = train(model, &data, &scene, &recipe.train)?;
    println!(
        "final loss {:.5} after {} epochs",
        log.final_loss().unwrap_or(f64::NAN),
        log.epochs.len()
    );

    let cloud = scene.object(&env.object_ids()[0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut err = 0.0;
    for _ in 0..200 {
        let mut p = || Pose::from_translation([rng.random(), rng.random(), 0.0]);
        let (a, b) = (p(), p());
        let d = a.translation_distance(&b);
        err += (model.forward_time(cloud, &a, &b)? - d).abs() / d;
    }
    println!("mean relative error vs distance: {:.2}%", err / 2.0);
    Ok(())
}
