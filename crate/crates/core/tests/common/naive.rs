//! Loop-level reference operators on single images `[c, h, w]`, written
//! independently of the library's im2col kernels.

use fdsc::params::ParamStore;
use fdsc::tensor::Tensor;

/// Single image, channel-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Img {
    pub c: usize,
    pub h: usize,
    pub w: usize,
    pub v: Vec<f64>,
}

impl Img {
    pub fn zeros(c: usize, h: usize, w: usize) -> Img {
        Img { c, h, w, v: vec![0.0; c * h * w] }
    }

    pub fn at(&self, c: usize, i: usize, j: usize) -> f64 {
        self.v[(c * self.h + i) * self.w + j]
    }

    pub fn at_mut(&mut self, c: usize, i: usize, j: usize) -> &mut f64 {
        &mut self.v[(c * self.h + i) * self.w + j]
    }

    /// First batch entry of an NCHW tensor.
    pub fn from_tensor(t: &Tensor<f64>) -> Img {
        let s = t.shape();
        let n = s[1] * s[2] * s[3];
        Img { c: s[1], h: s[2], w: s[3], v: t.data()[..n].to_vec() }
    }

    pub fn to_tensor(&self) -> Tensor<f64> {
        Tensor::new(&[1, self.c, self.h, self.w], self.v.clone())
    }

    pub fn add(&self, o: &Img) -> Img {
        assert_eq!((self.c, self.h, self.w), (o.c, o.h, o.w), "naive add shape mismatch");
        Img { v: self.v.iter().zip(&o.v).map(|(a, b)| a + b).collect(), ..self.clone() }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Img {
        Img { v: self.v.iter().map(|&a| f(a)).collect(), ..self.clone() }
    }
}

/// Kernel `[co, ci, k, k]` and optional bias read from a store by name.
pub struct Kernel {
    pub w: Tensor<f64>,
    pub b: Option<Vec<f64>>,
}

pub fn kernel(store: &ParamStore<f64>, prefix: &str) -> Kernel {
    let w = store
        .get(store.find(&format!("{prefix}/weight")).unwrap_or_else(|| panic!("no {prefix}/weight")))
        .clone();
    let b = store
        .find(&format!("{prefix}/bias"))
        .map(|id| store.get(id).data().to_vec());
    Kernel { w, b }
}

/// `out[o,i,j] = b[o] + Σ x[c, i·s+ki−p, j·s+kj−p] · w[o,c,ki,kj]`.
pub fn conv(x: &Img, k: &Kernel, stride: usize, pad: usize) -> Img {
    let s = k.w.shape();
    let (co, ci, kk) = (s[0], s[1], s[2]);
    assert_eq!(ci, x.c);
    let ho = (x.h + 2 * pad - kk) / stride + 1;
    let wo = (x.w + 2 * pad - kk) / stride + 1;
    let mut out = Img::zeros(co, ho, wo);
    for o in 0..co {
        for i in 0..ho {
            for j in 0..wo {
                let mut acc = k.b.as_ref().map_or(0.0, |b| b[o]);
                for c in 0..ci {
                    for ki in 0..kk {
                        for kj in 0..kk {
                            let y = (i * stride + ki) as isize - pad as isize;
                            let z = (j * stride + kj) as isize - pad as isize;
                            if y < 0 || z < 0 || y >= x.h as isize || z >= x.w as isize {
                                continue;
                            }
                            acc += x.at(c, y as usize, z as usize)
                                * k.w.data()[((o * ci + c) * kk + ki) * kk + kj];
                        }
                    }
                }
                *out.at_mut(o, i, j) = acc;
            }
        }
    }
    out
}

/// Transposed conv by scattering: every input sample spreads `w[c, o, ·, ·]`
/// onto the output grid at stride `stride`, offset `-pad`; output is
/// `stride ×` the input size.
pub fn conv_t(x: &Img, k: &Kernel, stride: usize, pad: usize) -> Img {
    let s = k.w.shape();
    let (ci, co, kk) = (s[0], s[1], s[2]);
    assert_eq!(ci, x.c);
    let (ho, wo) = (x.h * stride, x.w * stride);
    let mut out = Img::zeros(co, ho, wo);
    for c in 0..ci {
        for i in 0..x.h {
            for j in 0..x.w {
                let v = x.at(c, i, j);
                for o in 0..co {
                    for ki in 0..kk {
                        for kj in 0..kk {
                            let y = (i * stride + ki) as isize - pad as isize;
                            let z = (j * stride + kj) as isize - pad as isize;
                            if y < 0 || z < 0 || y >= ho as isize || z >= wo as isize {
                                continue;
                            }
                            *out.at_mut(o, y as usize, z as usize) +=
                                v * k.w.data()[((c * co + o) * kk + ki) * kk + kj];
                        }
                    }
                }
            }
        }
    }
    if let Some(b) = &k.b {
        for o in 0..co {
            for i in 0..ho {
                for j in 0..wo {
                    *out.at_mut(o, i, j) += b[o];
                }
            }
        }
    }
    out
}

pub fn pool(x: &Img, f: usize) -> Img {
    let mut out = Img::zeros(x.c, x.h / f, x.w / f);
    for c in 0..x.c {
        for i in 0..out.h {
            for j in 0..out.w {
                let mut s = 0.0;
                for a in 0..f {
                    for b in 0..f {
                        s += x.at(c, i * f + a, j * f + b);
                    }
                }
                *out.at_mut(c, i, j) = s / (f * f) as f64;
            }
        }
    }
    out
}

pub fn up(x: &Img, f: usize) -> Img {
    let mut out = Img::zeros(x.c, x.h * f, x.w * f);
    for c in 0..x.c {
        for i in 0..out.h {
            for j in 0..out.w {
                *out.at_mut(c, i, j) = x.at(c, i / f, j / f);
            }
        }
    }
    out
}

pub fn lrelu(x: &Img, slope: f64) -> Img {
    x.map(|v| if v >= 0.0 { v } else { slope * v })
}
