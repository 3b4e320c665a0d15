//! Evaluate an untrained time-field network: symmetry, the zero diagonal,
//! input gradients and the speed they imply.

use timefield::bench::ObjectKind;
use timefield::geom::{Pose, PoseSpace};
use timefield::net::{ModelConfig, TimeFieldModel};

fn main() -> timefield::Result<()> {
    let model = TimeFieldModel::new(ModelConfig::compact(PoseSpace::planar_xy_yaw(0.2)), 7)?;
    println!("{} parameters", model.parameter_count());
    let cloud = ObjectKind::Box.cloud();
    let a = Pose::new([0.1, 0.1, 0.0], [0.0, 0.0, 0.5]);
    let b = Pose::new([0.4, 0.3, 0.0], [0.0, 0.0, -1.0]);
    let ab = model.forward_time(&cloud, &a, &b)?;
    let ba = model.forward_time(&cloud, &b, &a)?;
    println!(
        "T(a,b) = {ab:.6}, T(b,a) = {ba:.6}, T(a,a) = {}",
        model.forward_time(&cloud, &a, &a)?
    );
    let (gs, gg) = model.input_gradients(&cloud, &a, &b)?;
    println!("dT/dp_s = {gs:.4?}\ndT/dp_g = {gg:.4?}");
    let (ss, sg) = model.predicted_speed(&cloud, &a, &b)?;
    println!("implied speeds: start {ss:.4}, goal {sg:.4}");
    Ok(())
}
