//! Central-difference gradient verification for 64-bit graphs.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::params::{ParamId, ParamStore};
use crate::tensor::{Tape, Tensor, Var};

/// Default perturbation for central differences.
pub const STEP: f64 = 1e-5;

/// Relative-error floor: entries whose analytic and numeric gradients are
/// both below this magnitude are compared absolutely against it.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Default)]
pub struct GradReport {
    pub checked: usize,
    pub max_rel_err: f64,
    /// Label, analytic and numeric value of the worst entry.
    pub worst: Option<(String, f64, f64)>,
}

impl GradReport {
    fn record(&mut self, label: impl FnOnce() -> String, analytic: f64, numeric: f64, floor: f64) {
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor);
        self.checked += 1;
        if err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = err;
            self.worst = Some((label(), analytic, numeric));
        }
    }

    pub fn merge(&mut self, other: GradReport) {
        self.checked += other.checked;
        if other.max_rel_err > self.max_rel_err || self.worst.is_none() {
            self.max_rel_err = other.max_rel_err;
            self.worst = other.worst;
        }
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Relative-error floor suited to a loss of magnitude `loss` that sums many
/// terms. Evaluating such a loss carries a round-off near `1e4·ε·|loss|`,
/// which central differences amplify by `1/STEP`; gradients below ten times
/// that are compared absolutely.
pub fn floor_for_loss(loss: f64) -> f64 {
    (1e5 * f64::EPSILON * loss.abs() / STEP).max(REL_FLOOR)
}

fn pick(n: usize, per_tensor: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    if n <= per_tensor {
        (0..n).collect()
    } else {
        sample(rng, n, per_tensor).into_vec()
    }
}

/// Compare analytic and numeric gradients of the scalar produced by `loss`
/// with respect to up to `per_tensor` random entries of each listed parameter.
pub fn check_params<F>(
    store: &mut ParamStore<f64>,
    ids: &[ParamId],
    per_tensor: usize,
    seed: u64,
    loss: F,
) -> GradReport
where
    F: for<'t> Fn(&'t Tape<f64>, &ParamStore<f64>) -> Var<'t, f64>,
{
    check_params_with_floor(store, ids, per_tensor, seed, REL_FLOOR, loss)
}

/// [`check_params`] with an explicit relative-error floor.
pub fn check_params_with_floor<F>(
    store: &mut ParamStore<f64>,
    ids: &[ParamId],
    per_tensor: usize,
    seed: u64,
    floor: f64,
    loss: F,
) -> GradReport
where
    F: for<'t> Fn(&'t Tape<f64>, &ParamStore<f64>) -> Var<'t, f64>,
{
    let tape = Tape::new();
    let l = loss(&tape, store);
    let grads = tape.backward(l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport::default();
    for &id in ids {
        let n = store.get(id).numel();
        for idx in pick(n, per_tensor, &mut rng) {
            let analytic = grads.param(id.index()).map_or(0.0, |g| g.data()[idx]);
            let orig = store.get(id).data()[idx];
            store.get_mut(id).data_mut()[idx] = orig + STEP;
            let fp = eval(store, &loss);
            store.get_mut(id).data_mut()[idx] = orig - STEP;
            let fm = eval(store, &loss);
            store.get_mut(id).data_mut()[idx] = orig;
            let numeric = (fp - fm) / (2.0 * STEP);
            report.record(|| format!("{}[{idx}]", store.name(id)), analytic, numeric, floor);
        }
    }
    report
}

fn eval<F>(store: &ParamStore<f64>, loss: &F) -> f64
where
    F: for<'t> Fn(&'t Tape<f64>, &ParamStore<f64>) -> Var<'t, f64>,
{
    let tape = Tape::inference();
    loss(&tape, store).item()
}

/// Same as [`check_params`] for input tensors: `loss` receives one leaf per
/// entry of `inputs`.
pub fn check_inputs<F>(inputs: &[Tensor<f64>], per_tensor: usize, seed: u64, loss: F) -> GradReport
where
    F: for<'t> Fn(&'t Tape<f64>, &[Var<'t, f64>]) -> Var<'t, f64>,
{
    let run = |xs: &[Tensor<f64>], grad: bool| -> (f64, Vec<Option<Tensor<f64>>>) {
        let tape = if grad { Tape::new() } else { Tape::inference() };
        let vars: Vec<_> = xs.iter().map(|x| tape.leaf(x.clone())).collect();
        let l = loss(&tape, &vars);
        let v = l.item();
        if !grad {
            return (v, Vec::new());
        }
        let g = tape.backward(l);
        (v, vars.iter().map(|&x| g.wrt(x).cloned()).collect())
    };
    let (_, grads) = run(inputs, true);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = GradReport::default();
    let mut xs = inputs.to_vec();
    for (t, g) in grads.iter().enumerate() {
        for idx in pick(xs[t].numel(), per_tensor, &mut rng) {
            let analytic = g.as_ref().map_or(0.0, |g| g.data()[idx]);
            let orig = xs[t].data()[idx];
            xs[t].data_mut()[idx] = orig + STEP;
            let fp = run(&xs, false).0;
            xs[t].data_mut()[idx] = orig - STEP;
            let fm = run(&xs, false).0;
            xs[t].data_mut()[idx] = orig;
            report.record(|| format!("input{t}[{idx}]"), analytic, (fp - fm) / (2.0 * STEP), REL_FLOOR);
        }
    }
    report
}

/// Contract an arbitrary-shaped output against a fixed pseudo-random tensor,
/// giving a scalar whose gradient exercises every output entry.
pub fn project<'t>(y: Var<'t, f64>, seed: u64) -> Var<'t, f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = Tensor::from_fn(&y.shape(), |_| rng.gen_range(-1.0..1.0));
    (y * y.tape().constant(w)).sum()
}
