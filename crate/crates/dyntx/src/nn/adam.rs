//! Adam over a fixed subset of the parameter store.

use super::params::{ParamId, ParamStore};
use crate::tensor::Scalar;
use ndarray::ArrayD;

pub struct Adam<F: Scalar> {
    ids: Vec<ParamId>,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Scalar> Adam<F> {
    pub fn new(store: &ParamStore<F>, ids: Vec<ParamId>, lr: f64, beta1: f64, beta2: f64) -> Self {
        let m = ids
            .iter()
            .map(|&id| ArrayD::zeros(store.data(id).raw_dim()))
            .collect();
        let v = ids
            .iter()
            .map(|&id| ArrayD::zeros(store.data(id).raw_dim()))
            .collect();
        Adam {
            ids,
            m,
            v,
            t: 0,
            lr,
            beta1,
            beta2,
            eps: 1e-8,
        }
    }

    pub fn ids(&self) -> &[ParamId] {
        &self.ids
    }

    /// One update from gradients aligned with the full store (entries for
    /// parameters outside this optimizer are ignored; missing gradients are
    /// treated as zero).
    pub fn step(&mut self, store: &mut ParamStore<F>, grads: &[Option<ArrayD<F>>]) {
        self.t += 1;
        let b1 = F::from(self.beta1).unwrap();
        let b2 = F::from(self.beta2).unwrap();
        let one = F::one();
        let corr1 = F::from(1.0 - self.beta1.powi(self.t as i32)).unwrap();
        let corr2 = F::from(1.0 - self.beta2.powi(self.t as i32)).unwrap();
        let lr = F::from(self.lr).unwrap();
        let eps = F::from(self.eps).unwrap();
        let zero = ArrayD::zeros(ndarray::IxDyn(&[]));
        for (slot, &id) in self.ids.iter().enumerate() {
            let g_holder;
            let g: &ArrayD<F> = match grads.get(id.0).and_then(|g| g.as_ref()) {
                Some(g) => g,
                None => {
                    g_holder = zero.broadcast(store.data(id).raw_dim()).unwrap().to_owned();
                    &g_holder
                }
            };
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            m.zip_mut_with(g, |mv, &gv| *mv = b1 * *mv + (one - b1) * gv);
            v.zip_mut_with(g, |vv, &gv| *vv = b2 * *vv + (one - b2) * gv * gv);
            let data = store.data_mut(id);
            ndarray::Zip::from(&mut *data)
                .and(&*m)
                .and(&*v)
                .for_each(|p, &mv, &vv| {
                    let mhat = mv / corr1;
                    let vhat = vv / corr2;
                    *p = *p - lr * mhat / (vhat.sqrt() + eps);
                });
        }
    }

    pub fn state_tensors(&self) -> (&[ArrayD<F>], &[ArrayD<F>]) {
        (&self.m, &self.v)
    }

    pub fn state_tensors_mut(&mut self) -> (&mut [ArrayD<F>], &mut [ArrayD<F>]) {
        (&mut self.m, &mut self.v)
    }
}
