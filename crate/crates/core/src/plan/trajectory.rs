use serde::{Deserialize, Serialize};

use crate::geom::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectorySource {
    LearnedField,
    OracleBacktrack,
}

/// An ordered pose chain with its translation arc length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose>,
    length_m: f64,
    source: TrajectorySource,
}

/// Sum of consecutive translation distances.
pub fn translation_length(poses: &[Pose]) -> f64 {
    poses
        .windows(2)
        .map(|w| w[0].translation_distance(&w[1]))
        .sum()
}

impl Trajectory {
    /// Panics on an empty pose list.
    pub fn new(poses: Vec<Pose>, source: TrajectorySource) -> Self {
        assert!(!poses.is_empty(), "trajectory needs at least one pose");
        let length_m = translation_length(&poses);
        Trajectory {
            poses,
            length_m,
            source,
        }
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn into_poses(self) -> Vec<Pose> {
        self.poses
    }

    pub fn length_m(&self) -> f64 {
        self.length_m
    }

    pub fn source(&self) -> TrajectorySource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn first(&self) -> &Pose {
        &self.poses[0]
    }

    pub fn last(&self) -> &Pose {
        self.poses.last().expect("non-empty")
    }

    /// Largest translation distance between consecutive poses.
    pub fn max_translation_gap(&self) -> f64 {
        self.poses
            .windows(2)
            .map(|w| w[0].translation_distance(&w[1]))
            .fold(0.0, f64::max)
    }
}
