//! Arrival-time fields conditioned on a single object.

use crate::error::{Error, Result};
use crate::geom::{PointCloud, Pose, PoseSpace};

/// Value and pose gradients of a time field at a start/goal pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldEval {
    pub time: f64,
    pub grad_start: [f64; 6],
    pub grad_goal: [f64; 6],
}

/// `T(p_s, p_g)` for one object.
pub trait TimeField: Send + Sync {
    fn space(&self) -> PoseSpace;

    fn evaluate(&self, p_s: &Pose, p_g: &Pose) -> Result<FieldEval>;

    fn time(&self, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        Ok(self.evaluate(p_s, p_g)?.time)
    }

    /// Trace of the goal-side Hessian over the active dimensions.
    ///
    /// The default uses central second differences.
    fn goal_laplacian(&self, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        let h = 1e-3;
        let t0 = self.time(p_s, p_g)?;
        let base = p_g.to_array();
        let mut lap = 0.0;
        for j in self.space().active_dims() {
            let mut plus = base;
            let mut minus = base;
            plus[j] += h;
            minus[j] -= h;
            let tp = self.time(p_s, &Pose::from_array(plus))?;
            let tm = self.time(p_s, &Pose::from_array(minus))?;
            lap += (tp - 2.0 * t0 + tm) / (h * h);
        }
        Ok(lap)
    }
}

/// Something that yields a [`TimeField`] per object shape.
pub trait FieldFamily {
    fn field_for<'a>(&'a self, cloud: &PointCloud) -> Result<Box<dyn TimeField + 'a>>;
}

/// Speeds `(S(p_s), S(p_g))` implied by the field gradients, `S = 1/‖∇T‖`
/// with the metric dual norm.
pub fn predicted_speed(field: &dyn TimeField, p_s: &Pose, p_g: &Pose) -> Result<(f64, f64)> {
    let eval = field.evaluate(p_s, p_g)?;
    let space = field.space();
    let ns = space.gradient_norm(&eval.grad_start);
    let ng = space.gradient_norm(&eval.grad_goal);
    let norm = ns.min(ng);
    if !(norm >= 1e-12) {
        return Err(Error::DegenerateGradient { norm });
    }
    Ok((1.0 / ns, 1.0 / ng))
}

/// `T = scale · dist_w(p_s, p_g)`: the exact solution for constant speed `1/scale`.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticDistanceField {
    pub space: PoseSpace,
    pub scale: f64,
}

impl AnalyticDistanceField {
    pub fn new(space: PoseSpace) -> Self {
        AnalyticDistanceField { space, scale: 1.0 }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

impl TimeField for AnalyticDistanceField {
    fn space(&self) -> PoseSpace {
        self.space
    }

    fn evaluate(&self, p_s: &Pose, p_g: &Pose) -> Result<FieldEval> {
        check_finite(p_s, p_g)?;
        let c = self.space.metric_weights();
        let delta = self.space.delta(p_s, p_g);
        let d = self.space.distance(p_s, p_g);
        let mut grad_goal = [0.0; 6];
        let mut grad_start = [0.0; 6];
        if d > 0.0 {
            for j in 0..6 {
                grad_goal[j] = self.scale * c[j] * delta[j] / d;
                grad_start[j] = -grad_goal[j];
            }
        }
        Ok(FieldEval {
            time: self.scale * d,
            grad_start,
            grad_goal,
        })
    }

    fn goal_laplacian(&self, p_s: &Pose, p_g: &Pose) -> Result<f64> {
        check_finite(p_s, p_g)?;
        let c = self.space.metric_weights();
        let delta = self.space.delta(p_s, p_g);
        let d = self.space.distance(p_s, p_g);
        if d == 0.0 {
            return Ok(f64::INFINITY);
        }
        let lap: f64 = self
            .space
            .active_dims()
            .into_iter()
            .map(|j| {
                let u = c[j] * delta[j] / d;
                (c[j] - u * u) / d
            })
            .sum();
        Ok(self.scale * lap)
    }
}

impl FieldFamily for AnalyticDistanceField {
    fn field_for<'a>(&'a self, _cloud: &PointCloud) -> Result<Box<dyn TimeField + 'a>> {
        Ok(Box::new(*self))
    }
}

pub(crate) fn check_finite(p_s: &Pose, p_g: &Pose) -> Result<()> {
    if p_s.is_finite() && p_g.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("non-finite pose"))
    }
}
