//! Convolution layers over the parameter store.

use super::params::{Leaves, ParamGroup, ParamId, ParamStore};
use crate::tensor::{Scalar, Var};
use ndarray::{ArrayD, IxDyn};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// He-style normal init computed in f64 and cast, so f32 and f64 models built
/// from the same seed start from the same values.
fn normal_tensor<F: Scalar>(rng: &mut ChaCha8Rng, shape: &[usize], std: f64) -> ArrayD<F> {
    ArrayD::from_shape_simple_fn(IxDyn(shape), || {
        // Box-Muller on two uniform draws keeps us off rand_distr's internal
        // state layout, which is not guaranteed stable across versions.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        F::from(z * std).unwrap()
    })
}

pub struct Conv2d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl Conv2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: ParamGroup,
        ci: usize,
        co: usize,
        k: usize,
        stride: usize,
        pad: usize,
        gain: f64,
    ) -> Self {
        let fan_in = (ci * k * k) as f64;
        let std = gain / fan_in.sqrt();
        let w = store.register(
            &format!("{name}.w"),
            group,
            normal_tensor(rng, &[co, ci, k, k], std),
        );
        let b = store.register(&format!("{name}.b"), group, ArrayD::zeros(IxDyn(&[co])));
        Conv2d { w, b, stride, pad }
    }

    pub fn forward<F: Scalar>(&self, leaves: &Leaves<F>, x: &Var<F>) -> Var<F> {
        x.conv2d(leaves.var(self.w), self.stride, self.pad)
            .bias_channel(leaves.var(self.b))
    }
}

pub struct ConvTranspose2d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: usize,
    pub pad: usize,
}

impl ConvTranspose2d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: ParamGroup,
        ci: usize,
        co: usize,
        k: usize,
        stride: usize,
        pad: usize,
        gain: f64,
    ) -> Self {
        let fan_in = (ci * k * k) as f64;
        let std = gain / fan_in.sqrt();
        let w = store.register(
            &format!("{name}.w"),
            group,
            normal_tensor(rng, &[ci, co, k, k], std),
        );
        let b = store.register(&format!("{name}.b"), group, ArrayD::zeros(IxDyn(&[co])));
        ConvTranspose2d { w, b, stride, pad }
    }

    pub fn forward<F: Scalar>(&self, leaves: &Leaves<F>, x: &Var<F>) -> Var<F> {
        x.conv_transpose2d(leaves.var(self.w), self.stride, self.pad)
            .bias_channel(leaves.var(self.b))
    }
}

pub struct Conv3d {
    pub w: ParamId,
    pub b: ParamId,
    pub stride: (usize, usize, usize),
    pub pad: (usize, usize, usize),
}

impl Conv3d {
    #[allow(clippy::too_many_arguments)]
    pub fn new<F: Scalar>(
        store: &mut ParamStore<F>,
        rng: &mut ChaCha8Rng,
        name: &str,
        group: ParamGroup,
        ci: usize,
        co: usize,
        k: (usize, usize, usize),
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
        gain: f64,
    ) -> Self {
        let fan_in = (ci * k.0 * k.1 * k.2) as f64;
        let std = gain / fan_in.sqrt();
        let w = store.register(
            &format!("{name}.w"),
            group,
            normal_tensor(rng, &[co, ci, k.0, k.1, k.2], std),
        );
        let b = store.register(&format!("{name}.b"), group, ArrayD::zeros(IxDyn(&[co])));
        Conv3d { w, b, stride, pad }
    }

    pub fn forward<F: Scalar>(&self, leaves: &Leaves<F>, x: &Var<F>) -> Var<F> {
        x.conv3d(leaves.var(self.w), self.stride, self.pad)
            .bias_channel(leaves.var(self.b))
    }
}

pub const LEAKY_SLOPE: f64 = 0.2;

pub fn lrelu<F: Scalar>(x: &Var<F>) -> Var<F> {
    x.leaky_relu(F::from(LEAKY_SLOPE).unwrap())
}
