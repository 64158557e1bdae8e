use super::{Float, Tensor};

/// Square-kernel convolution geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeom {
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeom {
    pub const fn new(kernel: usize, stride: usize, pad: usize) -> Self {
        ConvGeom {
            kernel,
            stride,
            pad,
        }
    }

    /// Stride-1 convolution that preserves spatial size (odd kernels).
    pub const fn same(kernel: usize) -> Self {
        ConvGeom::new(kernel, 1, kernel / 2)
    }

    pub fn out_len(&self, len: usize) -> usize {
        assert!(
            len + 2 * self.pad >= self.kernel,
            "input extent {len} smaller than kernel {}",
            self.kernel
        );
        (len + 2 * self.pad - self.kernel) / self.stride + 1
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1 && self.pad == 0
    }
}

/// Output columns `ow` whose input column `ow * stride + kj - pad` lies in `[0, w)`.
#[inline]
fn valid_cols(g: ConvGeom, kj: usize, w: usize, wo: usize) -> (usize, usize) {
    let s = g.stride;
    let lo = g.pad.saturating_sub(kj).div_ceil(s);
    let hi = if w + g.pad > kj {
        ((w + g.pad - kj - 1) / s + 1).min(wo)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// Target size (elements) of one im2col tile; convs are evaluated a band of
/// output rows at a time so the column buffer stays cache resident.
const TILE_ELEMS: usize = 1 << 17;

fn tile_rows(kdim: usize, wo: usize, ho: usize) -> usize {
    (TILE_ELEMS / (kdim * wo).max(1)).clamp(1, ho.max(1))
}

/// im2col of output rows `oh0..oh1` into `col` laid out `[kdim, rows·wo]`.
#[allow(clippy::too_many_arguments)]
fn im2col<T: Float>(
    x: &[T],
    c: usize,
    h: usize,
    w: usize,
    g: ConvGeom,
    (oh0, oh1): (usize, usize),
    wo: usize,
    col: &mut [T],
) {
    let k = g.kernel;
    let p = (oh1 - oh0) * wo;
    let mut row = 0;
    for ci in 0..c {
        let plane = &x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let dst = &mut col[row * p..(row + 1) * p];
                let (lo, hi) = valid_cols(g, kj, w, wo);
                for oh in oh0..oh1 {
                    let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                    let r = oh - oh0;
                    let drow = &mut dst[r * wo..(r + 1) * wo];
                    if ih < 0 || ih >= h as isize {
                        drow.fill(T::zero());
                        continue;
                    }
                    let src = &plane[ih as usize * w..(ih as usize + 1) * w];
                    drow[..lo].fill(T::zero());
                    drow[hi..].fill(T::zero());
                    if lo < hi {
                        let first = lo * g.stride + kj - g.pad;
                        if g.stride == 1 {
                            drow[lo..hi].copy_from_slice(&src[first..first + (hi - lo)]);
                        } else {
                            for (d, &v) in drow[lo..hi].iter_mut().zip(src[first..].iter().step_by(g.stride)) {
                                *d = v;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Adjoint of [`im2col`]: accumulates the tile back onto the input grid.
#[allow(clippy::too_many_arguments)]
fn col2im<T: Float>(
    col: &[T],
    c: usize,
    h: usize,
    w: usize,
    g: ConvGeom,
    (oh0, oh1): (usize, usize),
    wo: usize,
    x: &mut [T],
) {
    let k = g.kernel;
    let p = (oh1 - oh0) * wo;
    let mut row = 0;
    for ci in 0..c {
        let plane = &mut x[ci * h * w..(ci + 1) * h * w];
        for ki in 0..k {
            for kj in 0..k {
                let src = &col[row * p..(row + 1) * p];
                let (lo, hi) = valid_cols(g, kj, w, wo);
                if lo < hi {
                    let first = lo * g.stride + kj - g.pad;
                    for oh in oh0..oh1 {
                        let ih = (oh * g.stride + ki) as isize - g.pad as isize;
                        if ih < 0 || ih >= h as isize {
                            continue;
                        }
                        let r = oh - oh0;
                        let dst = &mut plane[ih as usize * w..(ih as usize + 1) * w];
                        let srow = &src[r * wo + lo..r * wo + hi];
                        if g.stride == 1 {
                            for (d, &v) in dst[first..first + (hi - lo)].iter_mut().zip(srow) {
                                *d += v;
                            }
                        } else {
                            for (d, &v) in dst[first..].iter_mut().step_by(g.stride).zip(srow) {
                                *d += v;
                            }
                        }
                    }
                }
                row += 1;
            }
        }
    }
}

/// Forward 2-D convolution. `w` is `[c_out, c_in, k, k]`, `bias` is `[c_out]`.
pub fn conv2d_raw<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    g: ConvGeom,
) -> Tensor<T> {
    let (n, c, h, wd) = x.dims4();
    let (co, ci, kh, kw) = w.dims4();
    assert_eq!(ci, c, "conv2d: input has {c} channels, kernel expects {ci}");
    assert!(kh == g.kernel && kw == g.kernel, "conv2d: kernel size mismatch");
    let (ho, wo) = (g.out_len(h), g.out_len(wd));
    let kdim = c * g.kernel * g.kernel;
    let p = ho * wo;
    let mut out = vec![T::zero(); n * co * p];
    let rows = tile_rows(kdim, wo, ho);
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); kdim * rows * wo]
    };
    for b in 0..n {
        let xb = &x.data()[b * c * h * wd..(b + 1) * c * h * wd];
        let ob = &mut out[b * co * p..(b + 1) * co * p];
        if let Some(bias) = bias {
            for (o, &bv) in bias.data().iter().enumerate() {
                ob[o * p..(o + 1) * p].fill(bv);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        if g.is_pointwise() {
            unsafe {
                T::gemm(
                    co, kdim, p, T::one(),
                    w.data().as_ptr(), kdim as isize, 1,
                    xb.as_ptr(), p as isize, 1,
                    beta, ob.as_mut_ptr(), p as isize, 1,
                );
            }
            continue;
        }
        let mut oh0 = 0;
        while oh0 < ho {
            let oh1 = (oh0 + rows).min(ho);
            let tp = (oh1 - oh0) * wo;
            im2col(xb, c, h, wd, g, (oh0, oh1), wo, &mut col);
            unsafe {
                T::gemm(
                    co, kdim, tp, T::one(),
                    w.data().as_ptr(), kdim as isize, 1,
                    col.as_ptr(), tp as isize, 1,
                    beta, ob[oh0 * wo..].as_mut_ptr(), p as isize, 1,
                );
            }
            oh0 = oh1;
        }
    }
    Tensor::new(&[n, co, ho, wo], out)
}

/// Gradient of `conv2d_raw` w.r.t. its input, also the transposed-convolution
/// forward map: scatters `grad_out` through `w` onto a `[n, c_in, h, w]` grid.
pub fn conv2d_input_grad<T: Float>(
    grad_out: &Tensor<T>,
    w: &Tensor<T>,
    g: ConvGeom,
    in_hw: (usize, usize),
) -> Tensor<T> {
    let (n, co, ho, wo) = grad_out.dims4();
    let (wco, ci, _, _) = w.dims4();
    assert_eq!(wco, co, "conv adjoint: channel mismatch");
    let (h, wd) = in_hw;
    assert_eq!(g.out_len(h), ho, "conv adjoint: height {h} does not map to {ho}");
    assert_eq!(g.out_len(wd), wo, "conv adjoint: width {wd} does not map to {wo}");
    let kdim = ci * g.kernel * g.kernel;
    let p = ho * wo;
    let mut out = vec![T::zero(); n * ci * h * wd];
    let rows = tile_rows(kdim, wo, ho);
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); kdim * rows * wo]
    };
    for b in 0..n {
        let gb = &grad_out.data()[b * co * p..(b + 1) * co * p];
        let xb = &mut out[b * ci * h * wd..(b + 1) * ci * h * wd];
        if g.is_pointwise() {
            unsafe {
                T::gemm(
                    kdim, co, p, T::one(),
                    w.data().as_ptr(), 1, kdim as isize,
                    gb.as_ptr(), p as isize, 1,
                    T::zero(), xb.as_mut_ptr(), p as isize, 1,
                );
            }
            continue;
        }
        let mut oh0 = 0;
        while oh0 < ho {
            let oh1 = (oh0 + rows).min(ho);
            let tp = (oh1 - oh0) * wo;
            unsafe {
                T::gemm(
                    kdim, co, tp, T::one(),
                    w.data().as_ptr(), 1, kdim as isize,
                    gb[oh0 * wo..].as_ptr(), p as isize, 1,
                    T::zero(), col.as_mut_ptr(), tp as isize, 1,
                );
            }
            col2im(&col, ci, h, wd, g, (oh0, oh1), wo, xb);
            oh0 = oh1;
        }
    }
    Tensor::new(&[n, ci, h, wd], out)
}

/// Gradient of `conv2d_raw` w.r.t. its kernel.
pub fn conv2d_weight_grad<T: Float>(
    grad_out: &Tensor<T>,
    x: &Tensor<T>,
    g: ConvGeom,
) -> Tensor<T> {
    let (n, c, h, wd) = x.dims4();
    let (gn, co, ho, wo) = grad_out.dims4();
    assert_eq!(gn, n);
    let kdim = c * g.kernel * g.kernel;
    let p = ho * wo;
    let mut gw = vec![T::zero(); co * kdim];
    let rows = tile_rows(kdim, wo, ho);
    let mut col = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); kdim * rows * wo]
    };
    for b in 0..n {
        let xb = &x.data()[b * c * h * wd..(b + 1) * c * h * wd];
        let gb = &grad_out.data()[b * co * p..(b + 1) * co * p];
        if g.is_pointwise() {
            unsafe {
                T::gemm(
                    co, p, kdim, T::one(),
                    gb.as_ptr(), p as isize, 1,
                    xb.as_ptr(), 1, p as isize,
                    T::one(), gw.as_mut_ptr(), kdim as isize, 1,
                );
            }
            continue;
        }
        let mut oh0 = 0;
        while oh0 < ho {
            let oh1 = (oh0 + rows).min(ho);
            let tp = (oh1 - oh0) * wo;
            im2col(xb, c, h, wd, g, (oh0, oh1), wo, &mut col);
            unsafe {
                T::gemm(
                    co, tp, kdim, T::one(),
                    gb[oh0 * wo..].as_ptr(), p as isize, 1,
                    col.as_ptr(), 1, tp as isize,
                    T::one(), gw.as_mut_ptr(), kdim as isize, 1,
                );
            }
            oh0 = oh1;
        }
    }
    Tensor::new(&[co, c, g.kernel, g.kernel], gw)
}

/// Per-channel sum of an NCHW tensor (bias gradient).
pub fn channel_sums<T: Float>(t: &Tensor<T>) -> Tensor<T> {
    let (n, c, h, w) = t.dims4();
    let plane = h * w;
    let mut out = vec![T::zero(); c];
    for b in 0..n {
        for (ci, o) in out.iter_mut().enumerate() {
            let s = &t.data()[(b * c + ci) * plane..(b * c + ci + 1) * plane];
            let mut acc = T::zero();
            for &v in s {
                acc += v;
            }
            *o += acc;
        }
    }
    Tensor::new(&[c], out)
}

/// Transposed convolution, defined as the exact adjoint of
/// `conv2d_raw(·, w, geom)` evaluated at an input of size `out_hw`.
/// `w` is `[c_in, c_out, k, k]` (the conv kernel it is the adjoint of).
pub fn conv_transpose2d_raw<T: Float>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    g: ConvGeom,
    out_hw: (usize, usize),
) -> Tensor<T> {
    let mut out = conv2d_input_grad(x, w, g, out_hw);
    if let Some(bias) = bias {
        let (n, c, h, wd) = out.dims4();
        assert_eq!(bias.numel(), c);
        let plane = h * wd;
        let data = out.data_mut();
        for b in 0..n {
            for (ci, &bv) in bias.data().iter().enumerate() {
                for v in &mut data[(b * c + ci) * plane..(b * c + ci + 1) * plane] {
                    *v += bv;
                }
            }
        }
    }
    out
}

/// Non-overlapping average pooling with window = stride = `f`.
pub fn avg_pool_raw<T: Float>(x: &Tensor<T>, f: usize) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    assert!(h % f == 0 && w % f == 0, "avg_pool: {h}x{w} not divisible by {f}");
    let (ho, wo) = (h / f, w / f);
    let inv = T::of(1.0 / (f * f) as f64);
    let mut out = vec![T::zero(); n * c * ho * wo];
    for bc in 0..n * c {
        let src = &x.data()[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out[bc * ho * wo..(bc + 1) * ho * wo];
        for i in 0..h {
            for j in 0..w {
                dst[(i / f) * wo + j / f] += src[i * w + j];
            }
        }
        for v in dst.iter_mut() {
            *v *= inv;
        }
    }
    Tensor::new(&[n, c, ho, wo], out)
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample_nearest_raw<T: Float>(x: &Tensor<T>, f: usize) -> Tensor<T> {
    let (n, c, h, w) = x.dims4();
    let (ho, wo) = (h * f, w * f);
    let mut out = vec![T::zero(); n * c * ho * wo];
    for bc in 0..n * c {
        let src = &x.data()[bc * h * w..(bc + 1) * h * w];
        let dst = &mut out[bc * ho * wo..(bc + 1) * ho * wo];
        for i in 0..ho {
            for j in 0..wo {
                dst[i * wo + j] = src[(i / f) * w + j / f];
            }
        }
    }
    Tensor::new(&[n, c, ho, wo], out)
}

/// Adjoint of `upsample_nearest_raw`: sums each `f×f` block.
pub fn sum_pool_raw<T: Float>(x: &Tensor<T>, f: usize) -> Tensor<T> {
    let mut out = avg_pool_raw(x, f);
    out.scale(T::of((f * f) as f64));
    out
}
