//! Helpers shared by the integration tests: straight-line reference
//! implementations and deterministic random tensors.
#![allow(dead_code)]

pub mod blocks;
pub mod naive;
pub mod oracle;
pub mod reference;

use fdsc::params::{init_rng, Builder, ParamStore};
use fdsc::tensor::Tensor;

/// Deterministic uniform values in `[-1, 1)` from a 64-bit LCG.
pub fn pseudo(shape: &[usize], seed: u64) -> Tensor<f64> {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    Tensor::from_fn(shape, |_| {
        s = s
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    })
}

/// Build a block into a fresh store with a seeded initialiser.
pub fn build<B>(seed: u64, f: impl FnOnce(&mut Builder<'_, f64>) -> B) -> (ParamStore<f64>, B) {
    let mut store = ParamStore::new();
    let mut rng = init_rng(seed);
    let block = {
        let mut b = Builder::new(&mut store, &mut rng);
        f(&mut b)
    };
    (store, block)
}

/// Overwrite every parameter with fresh pseudo-random values so biases and
/// zero-initialised tensors are exercised too.
pub fn randomize(store: &mut ParamStore<f64>, seed: u64, scale: f64) {
    let ids: Vec<_> = store.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let shape = store.get(id).shape().to_vec();
        let mut v = pseudo(&shape, seed + k as u64 * 7919);
        v.scale(scale);
        *store.get_mut(id) = v;
    }
}

pub fn zero_params(store: &mut ParamStore<f64>, pred: impl Fn(&str) -> bool) {
    let ids: Vec<_> = store.ids().filter(|&id| pred(store.name(id))).collect();
    for id in ids {
        store.get_mut(id).data_mut().fill(0.0);
    }
}

pub fn max_abs_diff(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.data()
        .iter()
        .zip(b.data())
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}
