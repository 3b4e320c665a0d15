use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let r = (a + PI).rem_euclid(2.0 * PI) - PI;
    if r <= -PI {
        r + 2.0 * PI
    } else {
        r
    }
}

/// Absolute wrapped difference between two angles, in `[0, π]`.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

pub type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

fn mat_vec(m: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn transpose(m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = m[j][i];
        }
    }
    out
}

/// Rotation matrix for intrinsic Z-Y-X Euler angles: yaw about z, then
/// pitch about the new y, then roll about the new x. `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_zyx_matrix(roll: f64, pitch: f64, yaw: f64) -> Mat3 {
    let (sr, cr) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let (sy, cy) = yaw.sin_cos();
    [
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ]
}

/// Inverse of [`euler_zyx_matrix`], returning `(roll, pitch, yaw)`.
pub fn matrix_to_euler_zyx(m: &Mat3) -> (f64, f64, f64) {
    let s = (-m[2][0]).clamp(-1.0, 1.0);
    if s.abs() > 1.0 - 1e-12 {
        // gimbal lock: yaw and roll are coupled, put everything in roll
        let pitch = s.signum() * PI / 2.0;
        let roll = (-m[1][2]).atan2(m[1][1]);
        return (roll, pitch, 0.0);
    }
    let pitch = s.asin();
    let roll = m[2][1].atan2(m[2][2]);
    let yaw = m[1][0].atan2(m[0][0]);
    (roll, pitch, yaw)
}

/// Object pose: translation in meters plus intrinsic Z-Y-X Euler angles
/// `(roll, pitch, yaw)` in radians, each kept in `(-π, π]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    translation: [f64; 3],
    rotation: [f64; 3],
}

impl Default for Pose {
    fn default() -> Self {
        Pose::identity()
    }
}

impl Pose {
    pub fn new(translation: [f64; 3], rotation: [f64; 3]) -> Self {
        Pose {
            translation,
            rotation: rotation.map(wrap_angle),
        }
    }

    pub fn identity() -> Self {
        Pose {
            translation: [0.0; 3],
            rotation: [0.0; 3],
        }
    }

    pub fn from_translation(translation: [f64; 3]) -> Self {
        Pose::new(translation, [0.0; 3])
    }

    /// `[x, y, z, roll, pitch, yaw]`.
    pub fn from_array(a: [f64; 6]) -> Self {
        Pose::new([a[0], a[1], a[2]], [a[3], a[4], a[5]])
    }

    pub fn to_array(&self) -> [f64; 6] {
        let t = self.translation;
        let r = self.rotation;
        [t[0], t[1], t[2], r[0], r[1], r[2]]
    }

    pub fn translation(&self) -> [f64; 3] {
        self.translation
    }

    pub fn rotation(&self) -> [f64; 3] {
        self.rotation
    }

    pub fn with_translation(&self, translation: [f64; 3]) -> Self {
        Pose {
            translation,
            rotation: self.rotation,
        }
    }

    pub fn with_rotation(&self, rotation: [f64; 3]) -> Self {
        Pose::new(self.translation, rotation)
    }

    pub fn is_finite(&self) -> bool {
        self.translation
            .iter()
            .chain(&self.rotation)
            .all(|v| v.is_finite())
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        let [r, p, y] = self.rotation;
        euler_zyx_matrix(r, p, y)
    }

    pub fn transform_point(&self, p: &[f64; 3]) -> [f64; 3] {
        let q = mat_vec(&self.rotation_matrix(), p);
        [
            q[0] + self.translation[0],
            q[1] + self.translation[1],
            q[2] + self.translation[2],
        ]
    }

    /// The pose `q` with `q ∘ self == identity`.
    pub fn inverse(&self) -> Pose {
        let rt = transpose(&self.rotation_matrix());
        let t = mat_vec(&rt, &self.translation);
        let (r, p, y) = matrix_to_euler_zyx(&rt);
        Pose::new([-t[0], -t[1], -t[2]], [r, p, y])
    }

    /// Rigid composition: `self.compose(other)` maps `x` to `self(other(x))`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let m = mat_mul(&self.rotation_matrix(), &other.rotation_matrix());
        let (r, p, y) = matrix_to_euler_zyx(&m);
        Pose::new(self.transform_point(&other.translation), [r, p, y])
    }

    pub fn translation_distance(&self, other: &Pose) -> f64 {
        let a = self.translation;
        let b = other.translation;
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }
}

/// Rotation weight (m/rad) used by the pose-space metric.
pub const DEFAULT_ROTATION_WEIGHT: f64 = 0.2;

const TRANSLATION_AXES: [bool; 6] = [true, true, true, false, false, false];

/// The planning space: which of the six pose components are free and how
/// rotations are weighted against translations.
///
/// Distances are `sqrt(|Δt|² + w²·Σ wrap(Δr)²)` over the active components.
/// Inactive components are held at zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSpace {
    pub active: [bool; 6],
    pub rotation_weight: f64,
}

impl Default for PoseSpace {
    fn default() -> Self {
        PoseSpace::full(DEFAULT_ROTATION_WEIGHT)
    }
}

impl PoseSpace {
    pub fn full(rotation_weight: f64) -> Self {
        PoseSpace {
            active: if rotation_weight > 0.0 {
                [true; 6]
            } else {
                TRANSLATION_AXES
            },
            rotation_weight,
        }
    }

    /// Translation only, all three axes.
    pub fn translation_only() -> Self {
        PoseSpace {
            active: TRANSLATION_AXES,
            rotation_weight: 0.0,
        }
    }

    /// `(x, y)` only.
    pub fn planar_xy() -> Self {
        PoseSpace {
            active: [true, true, false, false, false, false],
            rotation_weight: 0.0,
        }
    }

    /// `(x, y, yaw)`.
    pub fn planar_xy_yaw(rotation_weight: f64) -> Self {
        PoseSpace {
            active: [true, true, false, false, false, rotation_weight > 0.0],
            rotation_weight,
        }
    }

    pub fn active_dims(&self) -> Vec<usize> {
        (0..6).filter(|&i| self.active[i]).collect()
    }

    pub fn dim(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Per-component metric weight: 1 for translation, `w²` for rotation, 0 if inactive.
    pub fn metric_weights(&self) -> [f64; 6] {
        let w2 = self.rotation_weight * self.rotation_weight;
        let mut c = [0.0; 6];
        for (i, ci) in c.iter_mut().enumerate() {
            if self.active[i] {
                *ci = if i < 3 { 1.0 } else { w2 };
            }
        }
        c
    }

    /// Component-wise `to − from`, rotations wrapped, inactive components zero.
    pub fn delta(&self, from: &Pose, to: &Pose) -> [f64; 6] {
        let a = from.to_array();
        let b = to.to_array();
        let mut d = [0.0; 6];
        for i in 0..6 {
            if self.active[i] {
                d[i] = if i < 3 {
                    b[i] - a[i]
                } else {
                    wrap_angle(b[i] - a[i])
                };
            }
        }
        d
    }

    pub fn distance(&self, a: &Pose, b: &Pose) -> f64 {
        let c = self.metric_weights();
        let d = self.delta(a, b);
        (0..6).map(|i| c[i] * d[i] * d[i]).sum::<f64>().sqrt()
    }

    /// Zeroes the inactive components.
    pub fn project(&self, pose: &Pose) -> Pose {
        let mut a = pose.to_array();
        for (i, v) in a.iter_mut().enumerate() {
            if !self.active[i] {
                *v = 0.0;
            }
        }
        Pose::from_array(a)
    }

    /// Dual norm of a pose gradient under the metric: `sqrt(Σ g_i² / c_i)`.
    pub fn gradient_norm(&self, grad: &[f64; 6]) -> f64 {
        let c = self.metric_weights();
        (0..6)
            .filter(|&i| self.active[i])
            .map(|i| grad[i] * grad[i] / c[i])
            .sum::<f64>()
            .sqrt()
    }

    /// Metric norm of a displacement: `sqrt(Σ c_i v_i²)`.
    pub fn displacement_norm(&self, v: &[f64; 6]) -> f64 {
        let c = self.metric_weights();
        (0..6).map(|i| c[i] * v[i] * v[i]).sum::<f64>().sqrt()
    }

    /// Raises a gradient to a displacement direction (`M⁻¹ g`).
    pub fn raise(&self, grad: &[f64; 6]) -> [f64; 6] {
        let c = self.metric_weights();
        let mut v = [0.0; 6];
        for i in 0..6 {
            if self.active[i] {
                v[i] = grad[i] / c[i];
            }
        }
        v
    }

    /// `pose + v` on the active components, rotations re-wrapped.
    pub fn offset(&self, pose: &Pose, v: &[f64; 6]) -> Pose {
        let mut a = pose.to_array();
        for i in 0..6 {
            if self.active[i] {
                a[i] += v[i];
            }
        }
        Pose::from_array(a)
    }

    /// Shortest-path interpolation; `t = 0` gives `a` exactly and `t = 1` gives `b` exactly.
    pub fn interpolate(&self, a: &Pose, b: &Pose, t: f64) -> Pose {
        if t <= 0.0 {
            return *a;
        }
        if t >= 1.0 {
            return *b;
        }
        let d = self.delta(a, b);
        let mut out = a.to_array();
        let bb = b.to_array();
        for i in 0..6 {
            if self.active[i] {
                out[i] += t * d[i];
            } else {
                // inactive components follow a plain lerp so non-projected poses stay consistent
                out[i] += t * if i < 3 {
                    bb[i] - out[i]
                } else {
                    wrap_angle(bb[i] - out[i])
                };
            }
        }
        Pose::from_array(out)
    }
}
