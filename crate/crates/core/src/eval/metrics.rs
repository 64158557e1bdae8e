use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Value reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

/// MS-SSIM scale weights, finest first.
pub const MS_SSIM_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];
const WIN: usize = 11;
const WIN_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Smallest image side MS-SSIM accepts.
pub const MS_SSIM_MIN_SIDE: usize = 160;

fn same_shape(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Eval(format!("shape mismatch {:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

pub fn mse(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    same_shape(a, b)?;
    let s: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum();
    Ok(s / a.numel().max(1) as f64)
}

/// `−10·log10(MSE)` for peak 1, capped at [`PSNR_CAP`].
pub fn psnr(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (-10.0 * mse.log10()).min(PSNR_CAP)
    }
}

/// Quantize to 8-bit levels, as a stored image would be.
pub fn to_8bit(x: &Tensor<f32>) -> Tensor<f32> {
    x.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() / 255.0)
}

struct Plane {
    h: usize,
    w: usize,
    v: Vec<f64>,
}

impl Plane {
    fn zip(&self, o: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        Plane {
            h: self.h,
            w: self.w,
            v: self.v.iter().zip(&o.v).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Separable valid filtering; a dimension shorter than the window is
    /// left unfiltered.
    fn blur(&self, win: &[f64]) -> Plane {
        let k = win.len();
        let mut p = Plane { h: self.h, w: self.w, v: self.v.clone() };
        if p.h >= k {
            let oh = p.h - k + 1;
            let mut v = vec![0.0; oh * p.w];
            for i in 0..oh {
                for (t, &g) in win.iter().enumerate() {
                    let src = &p.v[(i + t) * p.w..(i + t + 1) * p.w];
                    for (o, &s) in v[i * p.w..(i + 1) * p.w].iter_mut().zip(src) {
                        *o += g * s;
                    }
                }
            }
            p = Plane { h: oh, w: p.w, v };
        }
        if p.w >= k {
            let ow = p.w - k + 1;
            let mut v = vec![0.0; p.h * ow];
            for i in 0..p.h {
                let row = &p.v[i * p.w..(i + 1) * p.w];
                for j in 0..ow {
                    v[i * ow + j] = win.iter().zip(&row[j..j + k]).map(|(g, s)| g * s).sum();
                }
            }
            p = Plane { h: p.h, w: ow, v };
        }
        p
    }

    /// 2×2 average with one zero-padded row/column on each side of an odd
    /// dimension (padding counted in the average).
    fn pool(&self) -> Plane {
        let (ph, pw) = (self.h % 2, self.w % 2);
        let oh = (self.h + 2 * ph - 2) / 2 + 1;
        let ow = (self.w + 2 * pw - 2) / 2 + 1;
        let get = |i: isize, j: isize| {
            if i < 0 || j < 0 || i >= self.h as isize || j >= self.w as isize {
                0.0
            } else {
                self.v[i as usize * self.w + j as usize]
            }
        };
        let mut v = Vec::with_capacity(oh * ow);
        for i in 0..oh {
            for j in 0..ow {
                let (r, c) = (2 * i as isize - ph as isize, 2 * j as isize - pw as isize);
                v.push(0.25 * (get(r, c) + get(r + 1, c) + get(r, c + 1) + get(r + 1, c + 1)));
            }
        }
        Plane { h: oh, w: ow, v }
    }
}

fn gauss_window() -> Vec<f64> {
    let g: Vec<f64> = (0..WIN)
        .map(|i| {
            let x = i as f64 - (WIN / 2) as f64;
            (-(x * x) / (2.0 * WIN_SIGMA * WIN_SIGMA)).exp()
        })
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Mean SSIM and mean contrast-structure term of one plane pair.
fn ssim_cs(x: &Plane, y: &Plane, win: &[f64]) -> (f64, f64) {
    let (c1, c2) = (K1 * K1, K2 * K2);
    let mu1 = x.blur(win);
    let mu2 = y.blur(win);
    let sxx = x.zip(x, |a, b| a * b).blur(win);
    let syy = y.zip(y, |a, b| a * b).blur(win);
    let sxy = x.zip(y, |a, b| a * b).blur(win);
    let n = mu1.v.len();
    let (mut ssim, mut cs) = (0.0, 0.0);
    for i in 0..n {
        let (m1, m2) = (mu1.v[i], mu2.v[i]);
        let s1 = sxx.v[i] - m1 * m1;
        let s2 = syy.v[i] - m2 * m2;
        let s12 = sxy.v[i] - m1 * m2;
        let c = (2.0 * s12 + c2) / (s1 + s2 + c2);
        cs += c;
        ssim += (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1) * c;
    }
    (ssim / n as f64, cs / n as f64)
}

/// Five-scale MS-SSIM of `[1, c, h, w]` images in `[0, 1]`, averaged over
/// channels (11-tap Gaussian window, σ = 1.5, luminance at the coarsest
/// scale only).
pub fn ms_ssim(a: &Tensor<f32>, b: &Tensor<f32>) -> Result<f64> {
    same_shape(a, b)?;
    let (n, c, h, w) = a.dims4();
    if h.min(w) < MS_SSIM_MIN_SIDE {
        return Err(Error::Eval(format!(
            "MS-SSIM needs images of at least {MS_SSIM_MIN_SIDE}x{MS_SSIM_MIN_SIDE}, got {w}x{h}"
        )));
    }
    let win = gauss_window();
    let mut total = 0.0;
    for plane in 0..n * c {
        let take = |t: &Tensor<f32>| Plane {
            h,
            w,
            v: t.data()[plane * h * w..(plane + 1) * h * w].iter().map(|&v| v as f64).collect(),
        };
        let (mut x, mut y) = (take(a), take(b));
        let mut val = 1.0;
        for (level, &wt) in MS_SSIM_WEIGHTS.iter().enumerate() {
            let (ssim, cs) = ssim_cs(&x, &y, &win);
            if level + 1 < MS_SSIM_WEIGHTS.len() {
                val *= cs.max(0.0).powf(wt);
                x = x.pool();
                y = y.pool();
            } else {
                val *= ssim.max(0.0).powf(wt);
            }
        }
        total += val;
    }
    Ok(total / (n * c) as f64)
}

/// `8·bytes/(w·h)`.
pub fn bpp(bytes: usize, w: usize, h: usize) -> f64 {
    8.0 * bytes as f64 / (w * h) as f64
}
