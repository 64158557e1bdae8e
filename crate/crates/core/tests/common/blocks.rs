//! Transcription oracles for the frequency blocks: each function builds a
//! block with random weights, runs it, recomputes the same equations with
//! the loop-level operators in [`super::naive`] and returns the max abs
//! difference over all output bands.

use super::naive::{conv, conv_t, kernel, lrelu, pool, up, Img};
use super::{build, pseudo, randomize};
use fdsc::freq::{Band, Triple};
use fdsc::freq_blocks::{GoConv, MoConv, Mtorb, OctConv, Torb, TwoBand};
use fdsc::params::ParamStore;
use fdsc::tensor::{Tape, Tensor};

fn diff(a: &Img, b: &Tensor<f64>) -> f64 {
    let b = Img::from_tensor(b);
    assert_eq!((a.c, a.h, a.w), (b.c, b.h, b.w), "oracle shape mismatch");
    a.v.iter().zip(&b.v).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn tag(b: Band) -> char {
    b.short().to_ascii_lowercase()
}

/// Random three-band input at high resolution `r`.
pub fn triple_input(c: [usize; 3], r: usize, seed: u64) -> Triple<Tensor<f64>> {
    let mut t = Triple::default();
    for b in Band::ALL {
        if c[b.index()] > 0 {
            let s = r >> b.level();
            t.set(b, Some(pseudo(&[1, c[b.index()], s, s], seed + b.index() as u64)));
        }
    }
    t
}

/// First-stage sums written out term by term.
fn moconv_naive(store: &ParamStore<f64>, prefix: &str, x: &Triple<Img>, c_out: [usize; 3]) -> Triple<Img> {
    let mut out = Triple::default();
    for dst in Band::ALL {
        if c_out[dst.index()] == 0 {
            continue;
        }
        let mut acc: Option<Img> = None;
        for (src, xs) in x.iter() {
            let k = kernel(store, &format!("{prefix}/{}2{}", tag(src), tag(dst)));
            let d = dst.level() as i32 - src.level() as i32;
            let y = match d {
                0 => conv(xs, &k, 1, 1),
                1 => conv(xs, &k, 2, 1),
                2 => conv(xs, &k, 4, 2),
                -1 => conv_t(xs, &k, 2, 1),
                -2 => conv_t(xs, &k, 4, 2),
                _ => unreachable!(),
            };
            acc = Some(match acc {
                Some(a) => a.add(&y),
                None => y,
            });
        }
        out.set(dst, acc);
    }
    out
}

fn to_imgs(x: &Triple<Tensor<f64>>) -> Triple<Img> {
    x.map(|_, t| Img::from_tensor(t))
}

fn run_triple(
    store: &ParamStore<f64>,
    x: &Triple<Tensor<f64>>,
    f: impl for<'t> FnOnce(&'t Tape<f64>, &Triple<fdsc::tensor::Var<'t, f64>>) -> Triple<fdsc::tensor::Var<'t, f64>>,
) -> Triple<Tensor<f64>> {
    let _ = store;
    let tape = Tape::inference();
    let xv = x.map(|_, t| tape.constant(t.clone()));
    f(&tape, &xv).values()
}

fn triple_diff(a: &Triple<Img>, b: &Triple<Tensor<f64>>) -> f64 {
    let mut m = 0.0f64;
    for band in Band::ALL {
        match (a.get(band), b.get(band)) {
            (Some(a), Some(b)) => m = m.max(diff(a, b)),
            (None, None) => {}
            _ => return f64::INFINITY,
        }
    }
    m
}

pub fn moconv_oracle(seed: u64, c_in: [usize; 3], c_out: [usize; 3], r: usize) -> f64 {
    let (mut store, blk) = build(seed, |b| MoConv::new(b, "mo", c_in, c_out, 3));
    randomize(&mut store, seed + 1, 0.5);
    let x = triple_input(c_in, r, seed + 2);
    let got = run_triple(&store, &x, |t, xv| blk.forward(t, &store, xv).unwrap());
    triple_diff(&moconv_naive(&store, "mo", &to_imgs(&x), c_out), &got)
}

pub fn mtorb_oracle(seed: u64, c: [usize; 3], r: usize, upward: bool) -> f64 {
    let (mut store, blk) = build(seed, |b| {
        if upward {
            Mtorb::up(b, "blk", c, c)
        } else {
            Mtorb::down(b, "blk", c, c)
        }
    });
    randomize(&mut store, seed + 1, 0.5);
    let x = triple_input(c, r, seed + 2);
    let got = run_triple(&store, &x, |t, xv| blk.forward(t, &store, xv).unwrap());
    let xi = to_imgs(&x);
    let yp = moconv_naive(&store, "blk/moconv", &xi, c);
    let slope = blk.slope;
    let want = yp.map(|band, p| {
        let main = kernel(&store, &format!("blk/main_{}", tag(band)));
        let sc = kernel(&store, &format!("blk/shortcut_{}", tag(band)));
        let xb = xi.band(band);
        if upward {
            conv_t(&lrelu(p, slope), &main, 2, 1).add(&up(&conv(xb, &sc, 1, 0), 2))
        } else {
            conv(&lrelu(p, slope), &main, 2, 1).add(&conv(xb, &sc, 2, 0))
        }
    });
    triple_diff(&want, &got)
}

pub fn pair_input(c: [usize; 2], r: usize, seed: u64) -> TwoBand<Tensor<f64>> {
    TwoBand::new(
        (c[0] > 0).then(|| pseudo(&[1, c[0], r, r], seed)),
        (c[1] > 0).then(|| pseudo(&[1, c[1], r / 2, r / 2], seed + 1)),
    )
}

fn run_pair(
    x: &TwoBand<Tensor<f64>>,
    f: impl for<'t> FnOnce(&'t Tape<f64>, &TwoBand<fdsc::tensor::Var<'t, f64>>) -> TwoBand<fdsc::tensor::Var<'t, f64>>,
) -> TwoBand<Tensor<f64>> {
    let tape = Tape::inference();
    let xv = TwoBand::new(
        x.high.as_ref().map(|t| tape.constant(t.clone())),
        x.low.as_ref().map(|t| tape.constant(t.clone())),
    );
    let y = f(&tape, &xv);
    TwoBand::new(
        y.high.map(|v| (*v.value()).clone()),
        y.low.map(|v| (*v.value()).clone()),
    )
}

fn pair_diff(want: (Img, Img), got: &TwoBand<Tensor<f64>>) -> f64 {
    diff(&want.0, got.high.as_ref().unwrap()).max(diff(&want.1, got.low.as_ref().unwrap()))
}

pub fn octconv_oracle(seed: u64, c: [usize; 2], r: usize) -> f64 {
    let (mut store, blk) = build(seed, |b| OctConv::new(b, "oct", c, c, 3));
    randomize(&mut store, seed + 1, 0.5);
    let x = pair_input(c, r, seed + 2);
    let got = run_pair(&x, |t, xv| blk.forward(t, &store, xv).unwrap());
    let (xh, xl) = (Img::from_tensor(x.high.as_ref().unwrap()), Img::from_tensor(x.low.as_ref().unwrap()));
    let k = |n: &str| kernel(&store, &format!("oct/{n}"));
    // Y^H = f(pool(X^H,2); W^HH) + pool(up(f(X^L; W^LH), 2), 2)
    let yh = conv(&pool(&xh, 2), &k("h2h"), 1, 1).add(&pool(&up(&conv(&xl, &k("l2h"), 1, 1), 2), 2));
    // Y^L = f(pool(X^L,2); W^LL) + f(pool(X^H,4); W^HL)
    let yl = conv(&pool(&xl, 2), &k("l2l"), 1, 1).add(&conv(&pool(&xh, 4), &k("h2l"), 1, 1));
    pair_diff((yh, yl), &got)
}

pub fn goconv_oracle(seed: u64, c: [usize; 2], r: usize) -> f64 {
    let (mut store, blk) = build(seed, |b| GoConv::new(b, "go", c, c));
    randomize(&mut store, seed + 1, 0.5);
    let x = pair_input(c, r, seed + 2);
    let got = run_pair(&x, |t, xv| blk.forward(t, &store, xv).unwrap());
    let (xh, xl) = (Img::from_tensor(x.high.as_ref().unwrap()), Img::from_tensor(x.low.as_ref().unwrap()));
    let k = |n: &str| kernel(&store, &format!("go/{n}"));
    let yhh = conv(&xh, &k("h2h"), 2, 1);
    let yll = conv(&xl, &k("l2l"), 2, 1);
    let yh = yhh.add(&conv_t(&yll, &k("l2h"), 2, 1));
    let yl = yll.add(&conv(&yhh, &k("h2l"), 2, 1));
    pair_diff((yh, yl), &got)
}

pub fn torb_oracle(seed: u64, c: [usize; 2], r: usize) -> f64 {
    let (mut store, blk) = build(seed, |b| Torb::new(b, "torb", c, c));
    randomize(&mut store, seed + 1, 0.5);
    let x = pair_input(c, r, seed + 2);
    let got = run_pair(&x, |t, xv| blk.forward(t, &store, xv).unwrap());
    let (xh, xl) = (Img::from_tensor(x.high.as_ref().unwrap()), Img::from_tensor(x.low.as_ref().unwrap()));
    let k = |n: &str| kernel(&store, &format!("torb/{n}"));
    let s = blk.slope;
    let yhp = conv(&xh, &k("h2h"), 1, 1).add(&conv_t(&xl, &k("l2h"), 2, 1));
    let ylp = conv(&xl, &k("l2l"), 1, 1).add(&conv(&xh, &k("h2l"), 2, 1));
    let yh = conv(&lrelu(&yhp, s), &k("main_h"), 2, 1).add(&conv(&xh, &k("shortcut_h"), 2, 0));
    let yl = conv(&lrelu(&ylp, s), &k("main_l"), 2, 1).add(&conv(&xl, &k("shortcut_l"), 2, 0));
    pair_diff((yh, yl), &got)
}
