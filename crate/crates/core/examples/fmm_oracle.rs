//! Solve the grid Eikonal problem on a tabletop slice with fast marching,
//! cross-check it with Dijkstra and backtrack a collision-free path.

use timefield::bench::EnvSpec;
use timefield::geom::Pose;
use timefield::oracle::{backtrack_from, dijkstra_solve, fmm_solve, GridGeometry, SpeedGrid};
use timefield::plan::validate_trajectory;

fn main() -> timefield::Result<()> {
    let env = EnvSpec::tabletop_center_obstacle();
    let scene = env.scene()?;
    let geometry = GridGeometry::planar_covering([0.0, 0.0], [0.5, 0.5], 0.0, 0.01)?;
    let goal = geometry
        .nearest_node(&[0.45, 0.45, 0.0])
        .expect("goal on grid");
    let speed = SpeedGrid::from_scene(
        &scene,
        "box",
        geometry,
        [0.0; 3],
        &env.speed,
        &env.reachability(),
    )?;
    let fmm = fmm_solve(&speed, goal)?;
    let dij = dijkstra_solve(&speed, goal)?;
    let start = [0.05, 0.05, 0.0];
    let t = fmm.value_at(&start).unwrap_or(f64::NAN);
    let td = dij.value_at(&start).unwrap_or(f64::NAN);
    println!(
        "T(start): fmm {t:.4}, dijkstra {td:.4} ({:+.1}%)",
        100.0 * (td - t) / t
    );

    let path = backtrack_from(&fmm, start)?;
    let poses: Vec<Pose> = path.poses().to_vec();
    let report = validate_trajectory(&scene, "box", &path, 0.001)?;
    println!(
        "backtracked {} poses, {:.3} m, min clearance {:.4} m, ends at {:?}",
        poses.len(),
        path.length_m(),
        report.min_distance,
        path.last().translation()
    );
    Ok(())
}
