//! Two-band octave baselines used for ablation: OctConv, GoConv and ToRB.
//! The low band sits at half the high band's resolution.

use crate::error::{shape_err, Result};
use crate::nn::{Conv2d, ConvTranspose2d, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Var};

/// High band at full resolution, low band at 1/2. Either may be absent.
#[derive(Clone, Copy, Debug)]
pub struct TwoBand<V> {
    pub high: Option<V>,
    pub low: Option<V>,
}

impl<V> TwoBand<V> {
    pub fn new(high: Option<V>, low: Option<V>) -> Self {
        TwoBand { high, low }
    }
}

fn check_pair<T: Float>(x: &TwoBand<Var<'_, T>>, c: [usize; 2], stride_divisor: usize) -> Result<()> {
    let mut hw = None;
    for (i, v) in [x.high, x.low].iter().enumerate() {
        let name = if i == 0 { "high" } else { "low" };
        match (v, c[i]) {
            (None, 0) => {}
            (None, n) => return shape_err(format!("{name} band missing ({n} channels expected)")),
            (Some(_), 0) => return shape_err(format!("{name} band present but assigned no channels")),
            (Some(v), n) => {
                let s = v.shape();
                if s.len() != 4 || s[1] != n {
                    return shape_err(format!("{name} band shape {s:?}, expected {n} channels"));
                }
                let f = 1 << i;
                if s[2] % stride_divisor != 0 || s[3] % stride_divisor != 0 {
                    return shape_err(format!("{name} band {}x{} not divisible by {stride_divisor}", s[2], s[3]));
                }
                let implied = (s[2] * f, s[3] * f);
                if *hw.get_or_insert(implied) != implied {
                    return shape_err("two-band input breaks the 1:1/2 resolution law".to_string());
                }
            }
        }
    }
    if hw.is_none() {
        return shape_err("two-band input is empty".to_string());
    }
    Ok(())
}

fn add_opt<'t, T: Float>(a: Option<Var<'t, T>>, b: Option<Var<'t, T>>) -> Option<Var<'t, T>> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a + b),
        (a, None) => a,
        (None, b) => b,
    }
}

fn conv<T: Float>(
    b: &mut Builder<'_, T>,
    name: &str,
    ci: usize,
    co: usize,
    geom: ConvGeom,
    bias: bool,
) -> Option<Conv2d> {
    (ci > 0 && co > 0).then(|| Conv2d::new(b, name, ci, co, geom, bias))
}

fn tconv<T: Float>(
    b: &mut Builder<'_, T>,
    name: &str,
    ci: usize,
    co: usize,
    geom: ConvGeom,
) -> Option<ConvTranspose2d> {
    (ci > 0 && co > 0).then(|| ConvTranspose2d::new(b, name, ci, co, geom, false))
}

fn apply<'t, T: Float>(
    c: &Option<Conv2d>,
    tape: &'t Tape<T>,
    store: &ParamStore<T>,
    x: Option<Var<'t, T>>,
) -> Option<Var<'t, T>> {
    match (c, x) {
        (Some(c), Some(x)) => Some(c.forward(tape, store, x)),
        _ => None,
    }
}

fn apply_t<'t, T: Float>(
    c: &Option<ConvTranspose2d>,
    tape: &'t Tape<T>,
    store: &ParamStore<T>,
    x: Option<Var<'t, T>>,
) -> Option<Var<'t, T>> {
    match (c, x) {
        (Some(c), Some(x)) => Some(c.forward(tape, store, x)),
        _ => None,
    }
}

/// Down-sampling octave convolution with average pooling and nearest
/// interpolation:
///
/// `Y^H = f(pool(X^H,2); W^HH) + pool(up(f(X^L; W^LH), 2), 2)`,
/// `Y^L = f(pool(X^L,2); W^LL) + f(pool(X^H,4); W^HL)`.
#[derive(Clone, Debug)]
pub struct OctConv {
    pub c_in: [usize; 2],
    pub c_out: [usize; 2],
    pub hh: Option<Conv2d>,
    pub lh: Option<Conv2d>,
    pub ll: Option<Conv2d>,
    pub hl: Option<Conv2d>,
}

impl OctConv {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: [usize; 2], c_out: [usize; 2], kernel: usize) -> Self {
        let mut sb = b.sub(name);
        let g = ConvGeom::same(kernel);
        OctConv {
            c_in,
            c_out,
            hh: conv(&mut sb, "h2h", c_in[0], c_out[0], g, true),
            lh: conv(&mut sb, "l2h", c_in[1], c_out[0], g, c_in[0] == 0),
            ll: conv(&mut sb, "l2l", c_in[1], c_out[1], g, true),
            hl: conv(&mut sb, "h2l", c_in[0], c_out[1], g, c_in[1] == 0),
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &TwoBand<Var<'t, T>>,
    ) -> Result<TwoBand<Var<'t, T>>> {
        check_pair(x, self.c_in, 2)?;
        if let Some(h) = x.high {
            let s = h.shape();
            if s[2] % 4 != 0 || s[3] % 4 != 0 {
                return shape_err(format!("high band {}x{} not divisible by 4", s[2], s[3]));
            }
        }
        let hh = apply(&self.hh, tape, store, x.high.map(|v| v.avg_pool(2)));
        let lh = apply(&self.lh, tape, store, x.low).map(|v| v.upsample_nearest(2).avg_pool(2));
        let ll = apply(&self.ll, tape, store, x.low.map(|v| v.avg_pool(2)));
        let hl = apply(&self.hl, tape, store, x.high.map(|v| v.avg_pool(4)));
        Ok(TwoBand::new(add_opt(hh, lh), add_opt(ll, hl)))
    }
}

/// Generalized octave convolution with strided convs:
///
/// `Y^HH = f↓(X^H)`, `Y^LL = f↓(X^L)`,
/// `Y^H = Y^HH + f↑(Y^LL)`, `Y^L = Y^LL + f↓(Y^HH)`.
#[derive(Clone, Debug)]
pub struct GoConv {
    pub c_in: [usize; 2],
    pub c_out: [usize; 2],
    pub hh: Option<Conv2d>,
    pub ll: Option<Conv2d>,
    pub lh: Option<ConvTranspose2d>,
    pub hl: Option<Conv2d>,
}

impl GoConv {
    /// Inter-band paths read the intra outputs, so they map output channels
    /// to output channels.
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: [usize; 2], c_out: [usize; 2]) -> Self {
        let mut sb = b.sub(name);
        let s2 = ConvGeom::new(3, 2, 1);
        GoConv {
            c_in,
            c_out,
            hh: conv(&mut sb, "h2h", c_in[0], c_out[0], s2, true),
            ll: conv(&mut sb, "l2l", c_in[1], c_out[1], s2, true),
            lh: tconv(&mut sb, "l2h", c_out[1], c_out[0], s2),
            hl: conv(&mut sb, "h2l", c_out[0], c_out[1], s2, false),
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &TwoBand<Var<'t, T>>,
    ) -> Result<TwoBand<Var<'t, T>>> {
        check_pair(x, self.c_in, 2)?;
        if let Some(h) = x.high {
            let s = h.shape();
            if s[2] % 4 != 0 || s[3] % 4 != 0 {
                return shape_err(format!("high band {}x{} not divisible by 4", s[2], s[3]));
            }
        }
        let yhh = apply(&self.hh, tape, store, x.high);
        let yll = apply(&self.ll, tape, store, x.low);
        let yh = add_opt(yhh, apply_t(&self.lh, tape, store, yll));
        let yl = add_opt(yll, apply(&self.hl, tape, store, yhh));
        Ok(TwoBand::new(yh, yl))
    }
}

/// Two-stage octave residual block:
///
/// `Y^H_p = f(X^H; W^HH) + f↑(X^L; W^LH)`, `Y^L_p = f(X^L; W^LL) + f↓(X^H; W^HL)`,
/// `Y^b = f↓(lrelu(Y^b_p); W^b) + f_sc(X^b)`.
#[derive(Clone, Debug)]
pub struct Torb {
    pub c_in: [usize; 2],
    pub c_out: [usize; 2],
    pub hh: Option<Conv2d>,
    pub lh: Option<ConvTranspose2d>,
    pub ll: Option<Conv2d>,
    pub hl: Option<Conv2d>,
    pub main_h: Option<Conv2d>,
    pub main_l: Option<Conv2d>,
    pub sc_h: Option<Conv2d>,
    pub sc_l: Option<Conv2d>,
    pub slope: f64,
}

impl Torb {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c_in: [usize; 2], c_out: [usize; 2]) -> Self {
        let mut sb = b.sub(name);
        let s1 = ConvGeom::same(3);
        let s2 = ConvGeom::new(3, 2, 1);
        let sc = ConvGeom::new(1, 2, 0);
        Torb {
            c_in,
            c_out,
            hh: conv(&mut sb, "h2h", c_in[0], c_out[0], s1, true),
            lh: tconv(&mut sb, "l2h", c_in[1], c_out[0], s2),
            ll: conv(&mut sb, "l2l", c_in[1], c_out[1], s1, true),
            hl: conv(&mut sb, "h2l", c_in[0], c_out[1], s2, false),
            main_h: conv(&mut sb, "main_h", c_out[0], c_out[0], s2, true),
            main_l: conv(&mut sb, "main_l", c_out[1], c_out[1], s2, true),
            sc_h: conv(&mut sb, "shortcut_h", c_in[0], c_out[0], sc, false),
            sc_l: conv(&mut sb, "shortcut_l", c_in[1], c_out[1], sc, false),
            slope: LEAKY_SLOPE,
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: &TwoBand<Var<'t, T>>,
    ) -> Result<TwoBand<Var<'t, T>>> {
        check_pair(x, self.c_in, 2)?;
        let slope = T::of(self.slope);
        let yhp = add_opt(
            apply(&self.hh, tape, store, x.high),
            apply_t(&self.lh, tape, store, x.low),
        );
        let ylp = add_opt(
            apply(&self.ll, tape, store, x.low),
            apply(&self.hl, tape, store, x.high),
        );
        let yh = add_opt(
            apply(&self.main_h, tape, store, yhp.map(|v| v.leaky_relu(slope))),
            apply(&self.sc_h, tape, store, x.high),
        );
        let yl = add_opt(
            apply(&self.main_l, tape, store, ylp.map(|v| v.leaky_relu(slope))),
            apply(&self.sc_l, tape, store, x.low),
        );
        Ok(TwoBand::new(yh, yl))
    }
}
