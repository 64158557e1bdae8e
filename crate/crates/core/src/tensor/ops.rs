use std::rc::Rc;

use super::conv::{
    avg_pool_raw, channel_sums, conv2d_input_grad, conv2d_raw, conv2d_weight_grad,
    conv_transpose2d_raw, sum_pool_raw, upsample_nearest_raw, ConvGeom,
};
use super::{Float, Tape, Tensor, Var};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn broadcast_shape(a: &[usize], b: &[usize]) -> Vec<usize> {
    assert_eq!(a.len(), b.len(), "broadcast needs equal rank: {a:?} vs {b:?}");
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            assert!(x == y || x == 1 || y == 1, "cannot broadcast {a:?} with {b:?}");
            x.max(y)
        })
        .collect()
}

fn strides_for(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let mut strides = vec![0; shape.len()];
    let mut acc = 1;
    for d in (0..shape.len()).rev() {
        strides[d] = if shape[d] == 1 && out[d] != 1 { 0 } else { acc };
        acc *= shape[d];
    }
    strides
}

/// Elementwise `f(a, b)` with numpy-style broadcasting over equal-rank shapes.
pub(crate) fn broadcast_zip<T: Float>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Tensor<T> {
    if a.shape() == b.shape() {
        return a.zip_map(b, f);
    }
    let out_shape = broadcast_shape(a.shape(), b.shape());
    let sa = strides_for(a.shape(), &out_shape);
    let sb = strides_for(b.shape(), &out_shape);
    let n: usize = out_shape.iter().product();
    let rank = out_shape.len();
    let mut idx = vec![0usize; rank];
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut out = Vec::with_capacity(n);
    let (ad, bd) = (a.data(), b.data());
    for _ in 0..n {
        out.push(f(ad[ia], bd[ib]));
        for d in (0..rank).rev() {
            idx[d] += 1;
            ia += sa[d];
            ib += sb[d];
            if idx[d] < out_shape[d] {
                break;
            }
            ia -= sa[d] * out_shape[d];
            ib -= sb[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    Tensor::new(&out_shape, out)
}

/// Sum `t` down to `shape` (the inverse bookkeeping of broadcasting).
pub(crate) fn sum_to_shape<T: Float>(t: Tensor<T>, shape: &[usize]) -> Tensor<T> {
    if t.shape() == shape {
        return t;
    }
    let out_shape = t.shape().to_vec();
    let so = strides_for(shape, &out_shape);
    let rank = out_shape.len();
    let mut out = vec![T::zero(); shape.iter().product()];
    let mut idx = vec![0usize; rank];
    let mut io = 0usize;
    for &v in t.data() {
        out[io] += v;
        for d in (0..rank).rev() {
            idx[d] += 1;
            io += so[d];
            if idx[d] < out_shape[d] {
                break;
            }
            io -= so[d] * out_shape[d];
            idx[d] = 0;
        }
    }
    Tensor::new(shape, out)
}

impl<'t, T: Float> Var<'t, T> {
    /// Elementwise map with derivative `df(x, y)` given input `x` and output `y`.
    pub fn map(self, f: impl Fn(T) -> T, df: impl Fn(T, T) -> T + 'static) -> Var<'t, T> {
        let x = self.value();
        let y = Rc::new(x.map(f));
        let yc = Rc::clone(&y);
        let out = self.tape.push(y, &[self], move |g| {
            let mut gx = g.clone();
            for ((gv, &xv), &yv) in gx.data_mut().iter_mut().zip(x.data()).zip(yc.data()) {
                *gv *= df(xv, yv);
            }
            vec![Some(gx)]
        });
        out
    }

    pub fn neg(self) -> Var<'t, T> {
        self.map(|v| -v, |_, _| -T::one())
    }

    pub fn exp(self) -> Var<'t, T> {
        self.map(|v| v.exp(), |_, y| y)
    }

    pub fn ln(self) -> Var<'t, T> {
        self.map(|v| v.ln(), |x, _| T::one() / x)
    }

    pub fn log2(self) -> Var<'t, T> {
        let inv_ln2 = T::of(std::f64::consts::LOG2_E);
        self.map(|v| v.log2(), move |x, _| inv_ln2 / x)
    }

    pub fn sqrt(self) -> Var<'t, T> {
        self.map(|v| v.sqrt(), |_, y| T::of(0.5) / y)
    }

    pub fn square(self) -> Var<'t, T> {
        self.map(|v| v * v, |x, _| T::of(2.0) * x)
    }

    pub fn abs(self) -> Var<'t, T> {
        self.map(
            |v| v.abs(),
            |x, _| {
                if x > T::zero() {
                    T::one()
                } else if x < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn tanh(self) -> Var<'t, T> {
        self.map(|v| v.tanh(), |_, y| T::one() - y * y)
    }

    pub fn sigmoid(self) -> Var<'t, T> {
        self.map(
            |v| T::one() / (T::one() + (-v).exp()),
            |_, y| y * (T::one() - y),
        )
    }

    /// `ln(1 + e^x)`, evaluated stably for large `|x|`.
    pub fn softplus(self) -> Var<'t, T> {
        self.map(softplus, |x, _| T::one() / (T::one() + (-x).exp()))
    }

    pub fn leaky_relu(self, slope: T) -> Var<'t, T> {
        self.map(
            move |v| if v >= T::zero() { v } else { v * slope },
            move |x, _| if x >= T::zero() { T::one() } else { slope },
        )
    }

    /// Standard normal CDF `Φ(x) = erfc(-x/√2) / 2`, accurate in the lower tail.
    pub fn normal_cdf(self) -> Var<'t, T> {
        let k = T::of(FRAC_1_SQRT_2);
        let c = T::of(INV_SQRT_2PI);
        self.map(
            move |v| T::of(0.5) * (-(v * k)).erfc(),
            move |x, _| c * (-(x * x) * T::of(0.5)).exp(),
        )
    }

    /// Clamp into `[lo, hi]`; gradient passes only strictly inside.
    pub fn clamp(self, lo: T, hi: T) -> Var<'t, T> {
        self.map(
            move |v| v.max(lo).min(hi),
            move |x, _| {
                if x >= lo && x <= hi {
                    T::one()
                } else {
                    T::zero()
                }
            },
        )
    }

    /// Clamp into `[lo, hi]` with an identity gradient everywhere.
    pub fn clamp_pass_through(self, lo: T, hi: T) -> Var<'t, T> {
        self.map(move |v| v.max(lo).min(hi), |_, _| T::one())
    }

    pub fn clamp_min(self, lo: T) -> Var<'t, T> {
        self.map(
            move |v| v.max(lo),
            move |x, _| if x >= lo { T::one() } else { T::zero() },
        )
    }

    pub fn add_scalar(self, s: T) -> Var<'t, T> {
        self.map(move |v| v + s, |_, _| T::one())
    }

    pub fn mul_scalar(self, s: T) -> Var<'t, T> {
        self.map(move |v| v * s, move |_, _| s)
    }

    pub fn add(self, other: Var<'t, T>) -> Var<'t, T> {
        let (sa, sb) = (self.shape(), other.shape());
        let out = broadcast_zip(&self.value(), &other.value(), |a, b| a + b);
        self.tape.push(out, &[self, other], move |g| {
            vec![
                Some(sum_to_shape(g.clone(), &sa)),
                Some(sum_to_shape(g.clone(), &sb)),
            ]
        })
    }

    pub fn sub(self, other: Var<'t, T>) -> Var<'t, T> {
        let (sa, sb) = (self.shape(), other.shape());
        let out = broadcast_zip(&self.value(), &other.value(), |a, b| a - b);
        self.tape.push(out, &[self, other], move |g| {
            vec![
                Some(sum_to_shape(g.clone(), &sa)),
                Some(sum_to_shape(g.map(|v| -v), &sb)),
            ]
        })
    }

    pub fn mul(self, other: Var<'t, T>) -> Var<'t, T> {
        let (a, b) = (self.value(), other.value());
        let out = broadcast_zip(&a, &b, |x, y| x * y);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        self.tape.push(out, &[self, other], move |g| {
            let ga = ra.then(|| sum_to_shape(broadcast_zip(g, &b, |x, y| x * y), a.shape()));
            let gb = rb.then(|| sum_to_shape(broadcast_zip(g, &a, |x, y| x * y), b.shape()));
            vec![ga, gb]
        })
    }

    pub fn div(self, other: Var<'t, T>) -> Var<'t, T> {
        let (a, b) = (self.value(), other.value());
        let out = broadcast_zip(&a, &b, |x, y| x / y);
        let (ra, rb) = (self.requires_grad(), other.requires_grad());
        self.tape.push(out, &[self, other], move |g| {
            let ga = ra.then(|| sum_to_shape(broadcast_zip(g, &b, |x, y| x / y), a.shape()));
            let gb = rb.then(|| {
                let gab = broadcast_zip(g, &a, |x, y| x * y);
                sum_to_shape(broadcast_zip(&gab, &b, |x, y| -x / (y * y)), b.shape())
            });
            vec![ga, gb]
        })
    }

    /// Sum of all elements, as a `[1]` tensor.
    pub fn sum(self) -> Var<'t, T> {
        let shape = self.shape();
        let s = self.value().sum();
        self.tape
            .push(Tensor::scalar(s), &[self], move |g| vec![Some(Tensor::full(&shape, g.data()[0]))])
    }

    pub fn mean(self) -> Var<'t, T> {
        let n = self.value().numel();
        self.sum().mul_scalar(T::of(1.0 / n as f64))
    }

    /// 2-D convolution; `w` is `[c_out, c_in, k, k]`, `b` is `[c_out]`.
    pub fn conv2d(self, w: Var<'t, T>, b: Option<Var<'t, T>>, g: ConvGeom) -> Var<'t, T> {
        let (x, wv) = (self.value(), w.value());
        let bv = b.map(|b| b.value());
        let out = conv2d_raw(&x, &wv, bv.as_deref(), g);
        let in_hw = (x.shape()[2], x.shape()[3]);
        let rx = self.requires_grad();
        let rw = w.requires_grad();
        let mut parents = vec![self, w];
        parents.extend(b);
        let has_b = b.is_some();
        self.tape.push(out, &parents, move |gout| {
            let mut grads = vec![
                rx.then(|| conv2d_input_grad(gout, &wv, g, in_hw)),
                rw.then(|| conv2d_weight_grad(gout, &x, g)),
            ];
            if has_b {
                grads.push(Some(channel_sums(gout)));
            }
            grads
        })
    }

    /// Transposed convolution (adjoint of `conv2d` with the same kernel and
    /// geometry evaluated at spatial size `out_hw`). `w` is `[c_in, c_out, k, k]`.
    pub fn conv_transpose2d(
        self,
        w: Var<'t, T>,
        b: Option<Var<'t, T>>,
        g: ConvGeom,
        out_hw: (usize, usize),
    ) -> Var<'t, T> {
        let (x, wv) = (self.value(), w.value());
        let bv = b.map(|b| b.value());
        let out = conv_transpose2d_raw(&x, &wv, bv.as_deref(), g, out_hw);
        let rx = self.requires_grad();
        let rw = w.requires_grad();
        let mut parents = vec![self, w];
        parents.extend(b);
        let has_b = b.is_some();
        self.tape.push(out, &parents, move |gout| {
            let mut grads = vec![
                rx.then(|| conv2d_raw(gout, &wv, None, g)),
                rw.then(|| conv2d_weight_grad(&x, gout, g)),
            ];
            if has_b {
                grads.push(Some(channel_sums(gout)));
            }
            grads
        })
    }

    pub fn avg_pool(self, f: usize) -> Var<'t, T> {
        if f == 1 {
            return self;
        }
        let out = avg_pool_raw(&self.value(), f);
        self.tape.push(out, &[self], move |g| {
            let mut up = upsample_nearest_raw(g, f);
            up.scale(T::of(1.0 / (f * f) as f64));
            vec![Some(up)]
        })
    }

    pub fn upsample_nearest(self, f: usize) -> Var<'t, T> {
        if f == 1 {
            return self;
        }
        let out = upsample_nearest_raw(&self.value(), f);
        self.tape
            .push(out, &[self], move |g| vec![Some(sum_pool_raw(g, f))])
    }
}

#[inline]
pub(crate) fn softplus<T: Float>(v: T) -> T {
    if v > T::of(30.0) {
        v
    } else if v < T::of(-30.0) {
        v.exp()
    } else {
        v.exp().ln_1p()
    }
}

impl<T: Float> Tape<T> {
    /// Sum of several vars (all the same shape).
    pub fn sum_all<'t>(&'t self, vars: &[Var<'t, T>]) -> Var<'t, T> {
        let mut it = vars.iter().copied();
        let first = it.next().expect("sum_all of nothing");
        it.fold(first, |acc, v| acc.add(v))
    }
}

macro_rules! bin_op {
    ($tr:ident, $m:ident, $f:ident) => {
        impl<'t, T: Float> std::ops::$tr for Var<'t, T> {
            type Output = Var<'t, T>;
            fn $m(self, rhs: Self) -> Self::Output {
                Var::$f(self, rhs)
            }
        }
    };
}

bin_op!(Add, add, add);
bin_op!(Sub, sub, sub);
bin_op!(Mul, mul, mul);
bin_op!(Div, div, div);

impl<'t, T: Float> std::ops::Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Self::Output {
        Var::neg(self)
    }
}
