use super::tables::{CdfRow, MAX_ROW_SYMBOLS, TAIL_MASS};
use super::P_MIN;
use crate::params::{Builder, ParamId, ParamStore};
use crate::tensor::{Float, Tape, Var};

/// Layer widths of the per-channel density network.
pub const FILTERS: [usize; 5] = [1, 3, 3, 3, 1];

/// Controls the initial spread of the learned density.
pub const INIT_SCALE: f64 = 3.0;

const LAYERS: usize = FILTERS.len() - 1;

/// Learned univariate density per channel, defined through its CDF
/// `c(x) = σ(f_K ∘ … ∘ f_1(x))` with
/// `f_k(x) = softplus(H_k)·x + b_k` followed (for k < K) by
/// `x + tanh(a_k) ⊙ tanh(x)`.
#[derive(Clone, Debug)]
pub struct FactorizedModel {
    pub channels: usize,
    pub matrices: Vec<ParamId>,
    pub biases: Vec<ParamId>,
    pub factors: Vec<ParamId>,
}

impl FactorizedModel {
    pub fn new<T: Float>(b: &mut Builder<'_, T>, name: &str, channels: usize) -> Self {
        let mut sb = b.sub(name);
        let scale = INIT_SCALE.powf(1.0 / LAYERS as f64);
        let mut matrices = Vec::new();
        let mut biases = Vec::new();
        let mut factors = Vec::new();
        for k in 0..LAYERS {
            let (fin, fout) = (FILTERS[k], FILTERS[k + 1]);
            let init = (1.0 / scale / fout as f64).exp_m1().ln();
            matrices.push(sb.constant(&format!("matrix{k}"), &[channels, fout, fin], init));
            biases.push(sb.uniform(&format!("bias{k}"), &[channels, fout, 1], 0.5));
            if k + 1 < LAYERS {
                factors.push(sb.constant(&format!("factor{k}"), &[channels, fout, 1], 0.0));
            }
        }
        FactorizedModel {
            channels,
            matrices,
            biases,
            factors,
        }
    }

    /// Logits of the CDF for `x` laid out as `[channels, 1, P]`.
    fn logits<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, x: Var<'t, T>) -> Var<'t, T> {
        let mut h = x;
        for k in 0..LAYERS {
            let m = store.var(tape, self.matrices[k]).softplus();
            h = m.bmm(h) + store.var(tape, self.biases[k]);
            if k + 1 < LAYERS {
                let a = store.var(tape, self.factors[k]).tanh();
                h = h + a * h.tanh();
            }
        }
        h
    }

    /// Probability of the unit interval around each element of `z`
    /// (`[n, channels, h, w]`), floored at [`P_MIN`].
    pub fn likelihood<'t, T: Float>(&self, tape: &'t Tape<T>, store: &ParamStore<T>, z: Var<'t, T>) -> Var<'t, T> {
        let s = z.shape();
        assert_eq!(s[1], self.channels, "factorized model channel count");
        let p = s[0] * s[2] * s[3];
        let flat = z.permute(&[1, 0, 2, 3]).reshape(&[s[1], 1, p]);
        let half = T::of(0.5);
        let lower = self.logits(tape, store, flat.add_scalar(-half));
        let upper = self.logits(tape, store, flat.add_scalar(half));
        // Evaluate on the side of the median where the sigmoids are small.
        let sign = (*lower.value()).zip_map(&upper.value(), |l, u| {
            if l + u > T::zero() {
                -T::one()
            } else {
                T::one()
            }
        });
        let sign = tape.constant(sign);
        let lik = ((sign * upper).sigmoid() - (sign * lower).sigmoid()).abs();
        lik.clamp_min(T::of(P_MIN))
            .reshape(&[s[1], s[0], s[2], s[3]])
            .permute(&[1, 0, 2, 3])
    }

    /// CDF logit of channel `c` at `x`, in double precision.
    pub fn logit_f64<T: Float>(&self, store: &ParamStore<T>, c: usize, x: f64) -> f64 {
        let mut h = vec![x];
        for k in 0..LAYERS {
            let (fin, fout) = (FILTERS[k], FILTERS[k + 1]);
            let m = store.get(self.matrices[k]).data();
            let b = store.get(self.biases[k]).data();
            let mut next = vec![0.0; fout];
            for (o, nv) in next.iter_mut().enumerate() {
                let mut acc = b[c * fout + o].f64();
                for (i, hv) in h.iter().enumerate() {
                    acc += softplus(m[(c * fout + o) * fin + i].f64()) * hv;
                }
                *nv = acc;
            }
            if k + 1 < LAYERS {
                let a = store.get(self.factors[k]).data();
                for (o, nv) in next.iter_mut().enumerate() {
                    *nv += a[c * fout + o].f64().tanh() * nv.tanh();
                }
            }
            h = next;
        }
        h[0]
    }

    /// Point where the channel's CDF logit equals `target`, by bisection.
    pub fn solve_logit<T: Float>(&self, store: &ParamStore<T>, c: usize, target: f64) -> f64 {
        let f = |x: f64| self.logit_f64(store, c, x) - target;
        let (mut lo, mut hi) = (-1.0, 1.0);
        while f(lo) > 0.0 && lo > -1e9 {
            lo *= 2.0;
        }
        while f(hi) < 0.0 && hi < 1e9 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-10 * hi.abs().max(1.0) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn median<T: Float>(&self, store: &ParamStore<T>, c: usize) -> f64 {
        self.solve_logit(store, c, 0.0)
    }

    /// `P(k) = c(k + ½) − c(k − ½)` in double precision.
    pub fn mass_f64<T: Float>(&self, store: &ParamStore<T>, c: usize, k: f64) -> f64 {
        let lo = self.logit_f64(store, c, k - 0.5);
        let hi = self.logit_f64(store, c, k + 0.5);
        let s = if lo + hi > 0.0 { -1.0 } else { 1.0 };
        (sigmoid(s * hi) - sigmoid(s * lo)).abs()
    }

    /// Integer coding table of channel `c`: support between the
    /// `TAIL_MASS/2` quantiles, remaining mass on the escape symbol.
    pub fn cdf_row<T: Float>(&self, store: &ParamStore<T>, c: usize) -> CdfRow {
        let t = 0.5 * TAIL_MASS;
        let logit = (t / (1.0 - t)).ln();
        let q_lo = self.solve_logit(store, c, logit);
        let q_hi = self.solve_logit(store, c, -logit);
        let med = self.median(store, c).round();
        let half = MAX_ROW_SYMBOLS as f64 / 2.0 - 1.0;
        let lo = q_lo.floor().max(med - half) as i32;
        let hi = q_hi.ceil().min(med + half).max(lo as f64) as i32;
        let probs: Vec<f64> = (lo..=hi).map(|k| self.mass_f64(store, c, k as f64)).collect();
        CdfRow::from_probs(lo, &probs)
    }

    pub fn cdf_rows<T: Float>(&self, store: &ParamStore<T>) -> Vec<CdfRow> {
        (0..self.channels).map(|c| self.cdf_row(store, c)).collect()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
