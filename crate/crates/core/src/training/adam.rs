use crate::params::ParamStore;
use crate::tensor::{Gradients, Tensor};

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    m: Vec<Option<Tensor<f32>>>,
    v: Vec<Option<Tensor<f32>>>,
}

impl Adam {
    pub fn new(params: usize) -> Self {
        Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![None; params],
            v: vec![None; params],
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// One update; parameters without a gradient keep their value and state.
    pub fn update(&mut self, store: &mut ParamStore<f32>, grads: &Gradients<f32>, lr: f64, grad_scale: f64) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let bc1 = 1.0 - b1.powi(self.step as i32);
        let bc2 = 1.0 - b2.powi(self.step as i32);
        let step_size = (lr / bc1) as f32;
        let bc2_sqrt = bc2.sqrt() as f32;
        let (b1, b2, eps, gs) = (b1 as f32, b2 as f32, self.eps as f32, grad_scale as f32);
        let ids: Vec<_> = store.ids().collect();
        for id in ids {
            let i = id.index();
            let Some(g) = grads.param(i) else { continue };
            let p = store.get_mut(id);
            let m = self.m[i].get_or_insert_with(|| Tensor::zeros(p.shape()));
            let v = self.v[i].get_or_insert_with(|| Tensor::zeros(p.shape()));
            for (((pv, &gv), mv), vv) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                let gv = gv * gs;
                *mv = b1 * *mv + (1.0 - b1) * gv;
                *vv = b2 * *vv + (1.0 - b2) * gv * gv;
                *pv -= step_size * *mv / (vv.sqrt() / bc2_sqrt + eps);
            }
        }
    }
}

/// Global L2 norm of all parameter gradients.
pub fn grad_norm(grads: &Gradients<f32>) -> f64 {
    grads
        .params()
        .map(|(_, g)| g.data().iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>())
        .sum::<f64>()
        .sqrt()
}
