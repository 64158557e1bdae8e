//! Triple-scale feature fusion residual blocks and window attention.

use crate::error::{shape_err, Result};
use crate::nn::{Conv2d, Gdn, LEAKY_SLOPE};
use crate::params::{Builder, ParamStore};
use crate::tensor::{ConvGeom, Float, Tape, Var};

const BRANCH_KERNELS: [usize; 3] = [3, 5, 7];

fn check_channels<T: Float>(x: &Var<'_, T>, c: usize, what: &str) -> Result<()> {
    let s = x.shape();
    if s.len() != 4 || s[1] != c {
        return shape_err(format!("{what} expects {c} channels, got shape {s:?}"));
    }
    Ok(())
}

/// `x + conv3(lrelu(conv3(x)))`.
#[derive(Clone, Debug)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl ResBlock {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c: usize) -> Self {
        let mut sb = b.sub(name);
        ResBlock {
            conv1: Conv2d::new(&mut sb, "conv1", c, c, ConvGeom::same(3), true),
            conv2: Conv2d::new(&mut sb, "conv2", c, c, ConvGeom::same(3), true),
        }
    }

    pub fn forward<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, x: Var<'t, T>) -> Var<'t, T> {
        let h = self.conv1.forward(tape, store, x).leaky_relu(T::of(LEAKY_SLOPE));
        x + self.conv2.forward(tape, store, h)
    }
}

/// Triple-scale feature fusion residual block.
///
/// Branches `lrelu(conv_k(f))` for k = 3, 5, 7 are fused by a 1×1 conv and
/// GDN; each third of the fused map goes through a residual block and a 3×3
/// conv; a second 1×1 conv + GDN fuses them back to `c` channels and the
/// result is added to the input.
#[derive(Clone, Debug)]
pub struct Tsfrb {
    pub channels: usize,
    pub branches: Vec<Conv2d>,
    pub fuse1: Conv2d,
    pub gdn1: Gdn,
    pub refine: Vec<(ResBlock, Conv2d)>,
    pub fuse2: Conv2d,
    pub gdn2: Gdn,
}

impl Tsfrb {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c: usize) -> Self {
        let mut sb = b.sub(name);
        let branches = BRANCH_KERNELS
            .iter()
            .map(|&k| Conv2d::new(&mut sb, &format!("branch{k}"), c, c, ConvGeom::same(k), true))
            .collect();
        let fuse1 = Conv2d::new(&mut sb, "fuse1", 3 * c, 3 * c, ConvGeom::same(1), true);
        let gdn1 = Gdn::new(&mut sb, "gdn1", 3 * c, false);
        let refine = (0..3)
            .map(|i| {
                (
                    ResBlock::new(&mut sb, &format!("rb{i}"), c),
                    Conv2d::new(&mut sb, &format!("refine{i}"), c, c, ConvGeom::same(3), true),
                )
            })
            .collect();
        let fuse2 = Conv2d::new(&mut sb, "fuse2", 3 * c, c, ConvGeom::same(1), true);
        let gdn2 = Gdn::new(&mut sb, "gdn2", c, false);
        Tsfrb {
            channels: c,
            branches,
            fuse1,
            gdn1,
            refine,
            fuse2,
            gdn2,
        }
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        f_in: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        check_channels(&f_in, self.channels, "TSFRB")?;
        let slope = T::of(LEAKY_SLOPE);
        let c = self.channels;
        let b: Vec<_> = self
            .branches
            .iter()
            .map(|conv| conv.forward(tape, store, f_in).leaky_relu(slope))
            .collect();
        let f1 = self.gdn1.forward(tape, store, self.fuse1.forward(tape, store, tape.cat_channels(&b)));
        let g: Vec<_> = self
            .refine
            .iter()
            .enumerate()
            .map(|(i, (rb, conv))| {
                let gi = f1.narrow_channels(i * c, c);
                conv.forward(tape, store, rb.forward(tape, store, gi))
            })
            .collect();
        let f2 = self.gdn2.forward(tape, store, self.fuse2.forward(tape, store, tape.cat_channels(&g)));
        Ok(f_in + f2)
    }
}

/// One or two TSFRBs in cascade. Each TSFRB keeps its own skip, so the
/// cascade is `f_in` plus the accumulated residuals and is the identity when
/// all weights are zero.
#[derive(Clone, Debug)]
pub struct Ctsfrb {
    pub blocks: Vec<Tsfrb>,
}

impl Ctsfrb {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c: usize, cascaded: bool) -> Self {
        let mut sb = b.sub(name);
        let n = if cascaded { 2 } else { 1 };
        Ctsfrb {
            blocks: (0..n).map(|i| Tsfrb::new(&mut sb, &format!("tsfrb{i}"), c)).collect(),
        }
    }

    pub fn cascaded(&self) -> bool {
        self.blocks.len() > 1
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        f_in: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let mut f = f_in;
        for blk in &self.blocks {
            f = blk.forward(tape, store, f)?;
        }
        Ok(f)
    }
}

/// Single-head self attention inside non-overlapping `window`×`window`
/// tiles, with a 1×1 output projection added back to the input.
#[derive(Clone, Debug)]
pub struct Wam {
    pub channels: usize,
    pub window: usize,
    pub qkv: Conv2d,
    pub proj: Conv2d,
}

impl Wam {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, c: usize, window: usize) -> Self {
        let mut sb = b.sub(name);
        Wam {
            channels: c,
            window,
            qkv: Conv2d::new(&mut sb, "qkv", c, 3 * c, ConvGeom::same(1), true),
            proj: Conv2d::new(&mut sb, "proj", c, c, ConvGeom::same(1), true),
        }
    }

    /// Window side used for an `h`×`w` map: the largest side not above the
    /// configured one (nor the map) that tiles the map exactly.
    pub fn window_for(&self, h: usize, w: usize) -> usize {
        let mut ws = self.window.min(h).min(w);
        while ws > 1 && (h % ws != 0 || w % ws != 0) {
            ws -= 1;
        }
        ws
    }

    fn partition<'t, T: Float>(x: Var<'t, T>, ws: usize) -> Var<'t, T> {
        let s = x.shape();
        let (n, c, h, w) = (s[0], s[1], s[2], s[3]);
        x.reshape(&[n, c, h / ws, ws, w / ws, ws])
            .permute(&[0, 2, 4, 3, 5, 1])
            .reshape(&[n * (h / ws) * (w / ws), ws * ws, c])
    }

    fn merge<'t, T: Float>(x: Var<'t, T>, n: usize, c: usize, h: usize, w: usize, ws: usize) -> Var<'t, T> {
        x.reshape(&[n, h / ws, w / ws, ws, ws, c])
            .permute(&[0, 5, 1, 3, 2, 4])
            .reshape(&[n, c, h, w])
    }

    fn qkv_windows<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Result<(Var<'t, T>, Var<'t, T>, Var<'t, T>, usize)> {
        check_channels(&x, self.channels, "WAM")?;
        let s = x.shape();
        let ws = self.window_for(s[2], s[3]);
        if ws == 0 || s[2] % ws != 0 || s[3] % ws != 0 {
            return shape_err(format!(
                "WAM window {ws} does not tile a {}x{} map",
                s[2], s[3]
            ));
        }
        let c = self.channels;
        let qkv = self.qkv.forward(tape, store, x);
        let q = Self::partition(qkv.narrow_channels(0, c), ws);
        let k = Self::partition(qkv.narrow_channels(c, c), ws);
        let v = Self::partition(qkv.narrow_channels(2 * c, c), ws);
        Ok((q, k, v, ws))
    }

    /// Attention weights `[windows, L, L]` (rows sum to one).
    pub fn attention<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let (q, k, _, _) = self.qkv_windows(tape, store, x)?;
        Ok(Self::weights(q, k, self.channels))
    }

    fn weights<'t, T: Float>(q: Var<'t, T>, k: Var<'t, T>, c: usize) -> Var<'t, T> {
        let scale = T::of(1.0 / (c as f64).sqrt());
        q.bmm(k.permute(&[0, 2, 1])).mul_scalar(scale).softmax_last()
    }

    pub fn forward<'t, T: Float>(
        &self,
        tape: &'t Tape<T>,
        store: &ParamStore<T>,
        x: Var<'t, T>,
    ) -> Result<Var<'t, T>> {
        let (q, k, v, ws) = self.qkv_windows(tape, store, x)?;
        let s = x.shape();
        let attn = Self::weights(q, k, self.channels);
        let o = Self::merge(attn.bmm(v), s[0], s[1], s[2], s[3], ws);
        Ok(x + self.proj.forward(tape, store, o))
    }
}
