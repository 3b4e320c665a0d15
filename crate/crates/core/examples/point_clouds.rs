//! Canonicalize an object cloud with farthest point sampling, place it in
//! the tabletop scene and query its clearance.

use timefield::bench::{EnvSpec, ObjectKind};
use timefield::geom::{farthest_point_sample, min_obstacle_distance, transform_cloud, Pose};

fn main() -> timefield::Result<()> {
    let dense = ObjectKind::Mug.dense_cloud();
    let fps = farthest_point_sample(&dense, 64, 0)?;
    println!(
        "mug: {} points -> {} (radius {:.3} m)",
        dense.len(),
        fps.cloud.len(),
        fps.cloud.radius()
    );

    let env = EnvSpec::tabletop_center_obstacle();
    let scene = env.scene()?;
    println!("scene hash {}", scene.hash());
    for x in [0.05, 0.15, 0.19, 0.25] {
        let pose = Pose::new([x, 0.25, 0.0], [0.0, 0.0, 0.3]);
        let placed = transform_cloud(&fps.cloud, &pose)?;
        let d = min_obstacle_distance(&scene, &placed)?;
        println!(
            "x = {x:.2}: clearance {:.4} m (exact {:.4} m)",
            d.distance,
            scene.exact_distance(&placed)?
        );
    }
    Ok(())
}
