//! Convolutional gated recurrent cell used by the generator to carry temporal
//! state across frames.

use super::layers::Conv2d;
use super::params::{Leaves, ParamGroup, ParamStore};
use crate::tensor::{concat, Scalar, Var};
use rand_chacha::ChaCha8Rng;

pub struct ConvGru {
    update: Conv2d,
    reset: Conv2d,
    candidate: Conv2d,
}

impl ConvGru {
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: ParamGroup,
        input_channels: usize,
        hidden_channels: usize,
    ) -> Self {
        let ci = input_channels + hidden_channels;
        let mk = |store: &mut ParamStore<F>, rng: &mut ChaCha8Rng, gate: &str, gain: f64| {
            Conv2d::new(
                store,
                rng,
                &format!("{name}.{gate}"),
                group,
                ci,
                hidden_channels,
                3,
                1,
                1,
                gain,
            )
        };
        ConvGru {
            update: mk(store, rng, "update", 1.0),
            reset: mk(store, rng, "reset", 1.0),
            candidate: mk(store, rng, "candidate", 1.0),
        }
    }

    /// h' = h + z * (c - h), with
    ///   z = sigmoid(Wz * [h, x]),  r = sigmoid(Wr * [h, x]),
    ///   c = tanh(Wc * [r * h, x]).
    pub fn step<F: Scalar>(&self, leaves: &Leaves<F>, h: &Var<F>, x: &Var<F>) -> Var<F> {
        let hx = concat(&[h, x], 1);
        let z = self.update.forward(leaves, &hx).sigmoid();
        let r = self.reset.forward(leaves, &hx).sigmoid();
        let rh = r.mul(h);
        let rhx = concat(&[&rh, x], 1);
        let c = self.candidate.forward(leaves, &rhx).tanh();
        h.add(&z.mul(&c.sub(h)))
    }
}
