//! Batched jets: values together with first and pure second directional
//! derivatives, pushed forward through dense layers and the softplus
//! activation, and pulled back again for parameter gradients.

use ndarray::{s, Array1, Array2, Array3, ArrayView3, Axis, Zip};

/// `data[[r, b, i]]`: row 0 is the value, rows `1..=k` the first derivatives
/// along each direction and rows `k+1..` the second derivatives along the
/// directions listed in `second`.
#[derive(Clone, Debug)]
pub(crate) struct Jet {
    pub data: Array3<f64>,
    pub k: usize,
    pub second: Vec<usize>,
}

impl Jet {
    pub fn zeros(k: usize, second: Vec<usize>, batch: usize, width: usize) -> Self {
        Jet {
            data: Array3::zeros((1 + k + second.len(), batch, width)),
            k,
            second,
        }
    }

    pub fn batch(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn like(&self, width: usize) -> Self {
        Jet::zeros(self.k, self.second.clone(), self.batch(), width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense {
    /// `out × in`
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct DenseGrad {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl DenseGrad {
    pub fn zeros_like(d: &Dense) -> Self {
        DenseGrad {
            w: Array2::zeros(d.w.raw_dim()),
            b: Array1::zeros(d.b.raw_dim()),
        }
    }
}

fn flat(a: &Array3<f64>) -> ndarray::ArrayView2<'_, f64> {
    let (r, b, n) = a.dim();
    a.view()
        .into_shape_with_order((r * b, n))
        .expect("jet storage is contiguous")
}

impl Dense {
    pub fn inputs(&self) -> usize {
        self.w.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.w.nrows()
    }

    /// `y = W x + b` on the value row, `W ẋ` on derivative rows.
    pub fn forward(&self, x: &Jet) -> Jet {
        let (r, b, _) = x.data.dim();
        let y = flat(&x.data).dot(&self.w.t());
        let mut data = y
            .into_shape_with_order((r, b, self.outputs()))
            .expect("contiguous");
        data.slice_mut(s![0, .., ..])
            .zip_mut_with(&self.b.view().insert_axis(Axis(0)), |v, bias| *v += bias);
        Jet {
            data,
            k: x.k,
            second: x.second.clone(),
        }
    }

    /// Accumulates parameter gradients and returns the input adjoint.
    pub fn backward(&self, x: &Jet, g_out: &Array3<f64>, grad: &mut DenseGrad) -> Array3<f64> {
        let (r, b, _) = g_out.dim();
        let g2 = flat(g_out);
        grad.w += &g2.t().dot(&flat(&x.data));
        grad.b += &g_out.index_axis(Axis(0), 0).sum_axis(Axis(0));
        g2.dot(&self.w)
            .into_shape_with_order((r, b, self.inputs()))
            .expect("contiguous")
    }

    /// Plain matrix-vector product with a fixed left-to-right summation order.
    pub fn apply_sequential(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs())
            .map(|o| {
                let mut acc = self.b[o];
                for (i, xi) in x.iter().enumerate() {
                    acc += self.w[[o, i]] * xi;
                }
                acc
            })
            .collect()
    }
}

/// `ln(1 + eˣ)`, overflow safe.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softplus and its first three derivatives at `x`.
#[inline]
fn softplus_derivs(x: f64) -> (f64, f64, f64, f64) {
    let s = sigmoid(x);
    let d2 = s * (1.0 - s);
    (softplus(x), s, d2, d2 * (1.0 - 2.0 * s))
}

/// Elementwise softplus on a jet.
pub(crate) fn activate(y: &Jet) -> Jet {
    let k = y.k;
    let mut z = y.like(y.width());
    let v = y.data.index_axis(Axis(0), 0);
    let mut d1 = v.to_owned();
    let mut d2 = v.to_owned();
    Zip::from(z.data.index_axis_mut(Axis(0), 0))
        .and(&mut d1)
        .and(&mut d2)
        .and(&v)
        .for_each(|zv, a, b, &x| {
            let (f, f1, f2, _) = softplus_derivs(x);
            *zv = f;
            *a = f1;
            *b = f2;
        });
    for t in 0..k {
        Zip::from(z.data.index_axis_mut(Axis(0), 1 + t))
            .and(y.data.index_axis(Axis(0), 1 + t))
            .and(&d1)
            .for_each(|o, &yt, &f1| *o = f1 * yt);
    }
    for (l, &dir) in y.second.iter().enumerate() {
        Zip::from(z.data.index_axis_mut(Axis(0), 1 + k + l))
            .and(y.data.index_axis(Axis(0), 1 + k + l))
            .and(y.data.index_axis(Axis(0), 1 + dir))
            .and(&d1)
            .and(&d2)
            .for_each(|o, &yss, &yt, &f1, &f2| *o = f2 * yt * yt + f1 * yss);
    }
    z
}

/// Adjoint of [`activate`] given the stored pre-activation `y`.
pub(crate) fn activate_backward(y: &Jet, g_z: ArrayView3<'_, f64>) -> Array3<f64> {
    let k = y.k;
    let v = y.data.index_axis(Axis(0), 0);
    let (b, n) = v.dim();
    let mut d1 = Array2::zeros((b, n));
    let mut d2 = Array2::zeros((b, n));
    let mut d3 = Array2::zeros((b, n));
    Zip::from(&mut d1)
        .and(&mut d2)
        .and(&mut d3)
        .and(&v)
        .for_each(|a, bb, c, &x| {
            let (_, f1, f2, f3) = softplus_derivs(x);
            *a = f1;
            *bb = f2;
            *c = f3;
        });
    let mut g_y = Array3::zeros(y.data.raw_dim());
    // value row
    {
        let mut g0 = g_y.index_axis_mut(Axis(0), 0);
        Zip::from(&mut g0)
            .and(g_z.index_axis(Axis(0), 0))
            .and(&d1)
            .for_each(|o, &g, &f1| *o = g * f1);
        for t in 0..k {
            Zip::from(&mut g0)
                .and(g_z.index_axis(Axis(0), 1 + t))
                .and(y.data.index_axis(Axis(0), 1 + t))
                .and(&d2)
                .for_each(|o, &g, &yt, &f2| *o += g * f2 * yt);
        }
        for (l, &dir) in y.second.iter().enumerate() {
            Zip::from(&mut g0)
                .and(g_z.index_axis(Axis(0), 1 + k + l))
                .and(y.data.index_axis(Axis(0), 1 + dir))
                .and(y.data.index_axis(Axis(0), 1 + k + l))
                .and(&d2)
                .and(&d3)
                .for_each(|o, &g, &yt, &yss, &f2, &f3| *o += g * (f3 * yt * yt + f2 * yss));
        }
    }
    for t in 0..k {
        Zip::from(g_y.index_axis_mut(Axis(0), 1 + t))
            .and(g_z.index_axis(Axis(0), 1 + t))
            .and(&d1)
            .for_each(|o, &g, &f1| *o = g * f1);
    }
    for (l, &dir) in y.second.iter().enumerate() {
        Zip::from(g_y.index_axis_mut(Axis(0), 1 + k + l))
            .and(g_z.index_axis(Axis(0), 1 + k + l))
            .and(&d1)
            .for_each(|o, &g, &f1| *o = g * f1);
        let (mut gt, gs) = {
            // g_y[1+dir] += g_z[second l] * 2 f'' y[1+dir]
            let gs = g_z.index_axis(Axis(0), 1 + k + l);
            (g_y.index_axis_mut(Axis(0), 1 + dir), gs)
        };
        Zip::from(&mut gt)
            .and(gs)
            .and(y.data.index_axis(Axis(0), 1 + dir))
            .and(&d2)
            .for_each(|o, &g, &yt, &f2| *o += 2.0 * g * f2 * yt);
    }
    g_y
}
