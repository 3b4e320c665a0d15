//! Poses, point clouds and obstacle-distance queries.

mod cloud;
mod pose;
mod scene;

pub use cloud::{
    cloud_distance, farthest_point_sample, transform_cloud, FpsSample, PointCloud,
    CANONICAL_CLOUD_SIZE,
};
pub use pose::{
    angular_distance, euler_zyx_matrix, matrix_to_euler_zyx, wrap_angle, Mat3, Pose, PoseSpace,
    DEFAULT_ROTATION_WEIGHT,
};
pub use scene::{
    brute_force_point_distance, min_obstacle_distance, Aabb, DistanceGrid, DistanceQuery, Scene,
    DEFAULT_COLLISION_MARGIN, DEFAULT_GRID_SPACING,
};
