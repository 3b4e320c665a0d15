//! Ground-truth speed labels: sample valid poses in the tabletop scene and
//! print how the speed drops near the center box.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use timefield::bench::EnvSpec;
use timefield::geom::Pose;
use timefield::speed::{ground_truth_speed, sample_valid_pose};

fn main() -> timefield::Result<()> {
    let env = EnvSpec::tabletop_center_obstacle();
    let scene = env.scene()?;
    let reach = env.reachability();
    println!("speed along y = 0.25 for the box object:");
    for i in 0..=10 {
        let x = 0.02 + 0.016 * i as f64;
        let s = ground_truth_speed(
            &scene,
            "box",
            &Pose::from_translation([x, 0.25, 0.0]),
            &env.speed,
            &reach,
        )?;
        println!("  x = {x:.3}  S* = {s:.3}");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..3 {
        let sampled = sample_valid_pose(&scene, "mug", &env.space, &mut rng)?;
        let s = ground_truth_speed(&scene, "mug", &sampled.pose, &env.speed, &reach)?;
        println!(
            "valid mug pose {:?} after {} rejections, S* = {s:.3}",
            sampled.pose.translation(),
            sampled.rejections
        );
    }
    Ok(())
}
