//! March a trajectory through a time field and split a task that no single
//! grasp can cover into two segments joined by an in-place rotation.

use std::f64::consts::PI;

use timefield::geom::{Pose, PoseSpace};
use timefield::plan::{march_bidirectional, omanip, Grasp, MarchParams, PlanParams};
use timefield::AnalyticDistanceField;

fn main() -> timefield::Result<()> {
    let field = AnalyticDistanceField::new(PoseSpace::planar_xy_yaw(0.2));
    let start = Pose::new([0.1, 0.1, 0.0], [0.0, 0.0, 0.0]);
    let goal = Pose::new([0.4, 0.3, 0.0], [0.0, 0.0, PI]);

    let path = march_bidirectional(&field, &start, &goal, &MarchParams::default())?;
    println!("marched {} poses, {:.3} m", path.len(), path.length_m());

    // "rim" works up to a quarter turn (and anywhere at the start spot, where
    // the object is rotated in place); "side" needs at least a quarter turn.
    let at = start.translation();
    let ik = move |p: &Pose, g: &Grasp| {
        let yaw = p.rotation()[2].abs();
        let home = p.translation_distance(&Pose::from_translation(at)) <= 0.01;
        match g.id.as_str() {
            "rim" => home || yaw <= PI / 2.0,
            _ => yaw >= PI / 2.0,
        }
    };
    let grasps = [
        Grasp::new("rim", Pose::from_translation([0.0, 0.0, 0.05]), 0.9),
        Grasp::new(
            "side",
            Pose::new([0.05, 0.0, 0.0], [0.0, 0.0, PI / 2.0]),
            0.5,
        ),
    ];
    let plan = omanip(&field, &start, &goal, &grasps, &ik, &PlanParams::default())?;
    for (i, seg) in plan.segments.iter().enumerate() {
        println!(
            "segment {i}: grasp {}, {} poses, {:?} -> {:?}",
            seg.grasp.id,
            seg.trajectory.len(),
            seg.trajectory.first().to_array(),
            seg.trajectory.last().to_array()
        );
    }
    println!("regrasp at {:?}", plan.intermediate_poses);
    Ok(())
}
