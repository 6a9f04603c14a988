//! Differentiable tensor operations.

use super::kernels;
use super::scalar::Scalar;
use super::var::Var;
use ndarray::{concatenate, ArrayD, Axis, Ix4, Ix5, Slice};

fn same_shape<F: Scalar>(a: &Var<F>, b: &Var<F>, op: &str) {
    assert_eq!(a.shape(), b.shape(), "{op}: shape mismatch");
}

impl<F: Scalar> Var<F> {
    pub fn add(&self, other: &Var<F>) -> Var<F> {
        same_shape(self, other, "add");
        let data = self.data() + other.data();
        Var::from_op(
            data,
            vec![self.clone(), other.clone()],
            Box::new(|_, g| vec![Some(g.clone()), Some(g.clone())]),
        )
    }

    pub fn sub(&self, other: &Var<F>) -> Var<F> {
        same_shape(self, other, "sub");
        let data = self.data() - other.data();
        Var::from_op(
            data,
            vec![self.clone(), other.clone()],
            Box::new(|_, g| vec![Some(g.clone()), Some(-g.clone())]),
        )
    }

    pub fn mul(&self, other: &Var<F>) -> Var<F> {
        same_shape(self, other, "mul");
        let data = self.data() * other.data();
        Var::from_op(
            data,
            vec![self.clone(), other.clone()],
            Box::new(|node, g| {
                let a = node.parents[0].data();
                let b = node.parents[1].data();
                vec![Some(g * b), Some(g * a)]
            }),
        )
    }

    pub fn neg(&self) -> Var<F> {
        Var::from_op(
            -self.data().clone(),
            vec![self.clone()],
            Box::new(|_, g| vec![Some(-g.clone())]),
        )
    }

    pub fn scale(&self, c: F) -> Var<F> {
        Var::from_op(
            self.data().mapv(|v| v * c),
            vec![self.clone()],
            Box::new(move |_, g| vec![Some(g.mapv(|v| v * c))]),
        )
    }

    pub fn add_scalar(&self, c: F) -> Var<F> {
        Var::from_op(
            self.data().mapv(|v| v + c),
            vec![self.clone()],
            Box::new(|_, g| vec![Some(g.clone())]),
        )
    }

    pub fn tanh(&self) -> Var<F> {
        Var::from_op(
            self.data().mapv(F::tanh),
            vec![self.clone()],
            Box::new(|node, g| {
                let y = &node.data;
                vec![Some(g * &y.mapv(|v| F::one() - v * v))]
            }),
        )
    }

    pub fn sigmoid(&self) -> Var<F> {
        Var::from_op(
            self.data().mapv(sigmoid_stable),
            vec![self.clone()],
            Box::new(|node, g| {
                let y = &node.data;
                vec![Some(g * &y.mapv(|v| v * (F::one() - v)))]
            }),
        )
    }

    pub fn leaky_relu(&self, alpha: F) -> Var<F> {
        Var::from_op(
            self.data()
                .mapv(|v| if v > F::zero() { v } else { alpha * v }),
            vec![self.clone()],
            Box::new(move |node, g| {
                let x = node.parents[0].data();
                let slope = x.mapv(|v| if v > F::zero() { F::one() } else { alpha });
                vec![Some(g * &slope)]
            }),
        )
    }

    /// Numerically stable ln(1 + e^x).
    pub fn softplus(&self) -> Var<F> {
        Var::from_op(
            self.data().mapv(softplus_stable),
            vec![self.clone()],
            Box::new(|node, g| {
                let x = node.parents[0].data();
                vec![Some(g * &x.mapv(sigmoid_stable))]
            }),
        )
    }

    pub fn abs(&self) -> Var<F> {
        Var::from_op(
            self.data().mapv(F::abs),
            vec![self.clone()],
            Box::new(|node, g| {
                let x = node.parents[0].data();
                let sign = x.mapv(|v| {
                    if v > F::zero() {
                        F::one()
                    } else if v < F::zero() {
                        -F::one()
                    } else {
                        F::zero()
                    }
                });
                vec![Some(g * &sign)]
            }),
        )
    }

    pub fn sum_all(&self) -> Var<F> {
        let shape = self.shape().to_vec();
        let data = ndarray::arr0(self.data().sum()).into_dyn();
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let gv = g.iter().next().copied().unwrap_or_else(F::zero);
                vec![Some(ArrayD::from_elem(shape.clone(), gv))]
            }),
        )
    }

    pub fn mean_all(&self) -> Var<F> {
        let count = F::from(self.data().len() as f64).unwrap();
        self.sum_all().scale(F::one() / count)
    }

    /// Mean over the given axes (dropped from the output shape).
    pub fn mean_axes(&self, axes: &[usize]) -> Var<F> {
        let mut axes = axes.to_vec();
        axes.sort_unstable();
        axes.dedup();
        let in_shape = self.shape().to_vec();
        let mut data = self.data().clone();
        for &ax in axes.iter().rev() {
            data = data.mean_axis(Axis(ax)).expect("non-empty axis");
        }
        let count: usize = axes.iter().map(|&ax| in_shape[ax]).product();
        let inv = F::one() / F::from(count as f64).unwrap();
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let mut ge = g.clone();
                for &ax in axes.iter() {
                    ge = ge.insert_axis(Axis(ax));
                }
                let full = ge
                    .broadcast(in_shape.as_slice())
                    .expect("broadcast to input shape")
                    .to_owned();
                vec![Some(full.mapv(|v| v * inv))]
            }),
        )
    }

    /// Keep row `i` of axis 0 (result keeps a leading axis of size 1).
    pub fn row(&self, i: usize) -> Var<F> {
        assert!(i < self.shape()[0], "row index out of range");
        let data = self
            .data()
            .slice_axis(Axis(0), Slice::from(i..i + 1))
            .to_owned();
        let in_shape = self.shape().to_vec();
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let mut dx = ArrayD::<F>::zeros(in_shape.clone());
                dx.slice_axis_mut(Axis(0), Slice::from(i..i + 1)).assign(g);
                vec![Some(dx)]
            }),
        )
    }

    /// Broadcast a leading axis of size 1 to size `n`.
    pub fn repeat_batch(&self, n: usize) -> Var<F> {
        assert_eq!(self.shape()[0], 1, "repeat_batch expects batch dim 1");
        let mut shape = self.shape().to_vec();
        shape[0] = n;
        let data = self
            .data()
            .broadcast(shape.as_slice())
            .expect("broadcast batch")
            .to_owned();
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(|_, g| vec![Some(g.sum_axis(Axis(0)).insert_axis(Axis(0)))]),
        )
    }

    /// out[i] = x[i] - x[r] along axis 0; row r of the output is exactly zero.
    pub fn sub_ref_row(&self, r: usize) -> Var<F> {
        assert!(r < self.shape()[0], "reference row out of range");
        let reference = self
            .data()
            .slice_axis(Axis(0), Slice::from(r..r + 1))
            .to_owned();
        let data = self.data() - &reference;
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                let mut dx = g.clone();
                let total = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                {
                    let mut row = dx.slice_axis_mut(Axis(0), Slice::from(r..r + 1));
                    row -= &total;
                }
                vec![Some(dx)]
            }),
        )
    }

    pub fn reshape(&self, shape: &[usize]) -> Var<F> {
        let orig: Vec<usize> = self.shape().to_vec();
        let data = self
            .data()
            .clone()
            .into_shape_with_order(shape)
            .expect("reshape element count");
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                vec![Some(
                    g.clone()
                        .into_shape_with_order(orig.as_slice())
                        .expect("reshape grad"),
                )]
            }),
        )
    }

    pub fn permute(&self, perm: &[usize]) -> Var<F> {
        let perm = perm.to_vec();
        let mut inverse = vec![0usize; perm.len()];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let data = self
            .data()
            .view()
            .permuted_axes(perm.as_slice())
            .as_standard_layout()
            .to_owned();
        Var::from_op(
            data,
            vec![self.clone()],
            Box::new(move |_, g| {
                vec![Some(
                    g.view()
                        .permuted_axes(inverse.as_slice())
                        .as_standard_layout()
                        .to_owned(),
                )]
            }),
        )
    }

    /// Add a per-channel bias over axis 1 of an (N, C, ...) tensor.
    pub fn bias_channel(&self, bias: &Var<F>) -> Var<F> {
        let c = self.shape()[1];
        assert_eq!(bias.shape(), [c], "bias length must equal channel count");
        let ndim = self.shape().len();
        let mut bshape = vec![1usize; ndim];
        bshape[1] = c;
        let b = bias
            .data()
            .view()
            .into_shape_with_order(bshape.as_slice())
            .unwrap();
        let data = self.data() + &b;
        Var::from_op(
            data,
            vec![self.clone(), bias.clone()],
            Box::new(move |_, g| {
                let mut db = g.clone();
                // reduce every axis except the channel axis (1)
                for ax in (0..ndim).rev() {
                    if ax != 1 {
                        db = db.sum_axis(Axis(ax));
                    }
                }
                vec![Some(g.clone()), Some(db)]
            }),
        )
    }

    pub fn conv2d(&self, w: &Var<F>, stride: usize, pad: usize) -> Var<F> {
        let x4 = self.data().view().into_dimensionality::<Ix4>().unwrap();
        let w4 = w.data().view().into_dimensionality::<Ix4>().unwrap();
        let (_, _, h, wi) = x4.dim();
        let (_, _, kh, kw) = w4.dim();
        let out = kernels::conv2d_fwd(&x4, &w4, stride, pad).into_dyn();
        Var::from_op(
            out,
            vec![self.clone(), w.clone()],
            Box::new(move |node, g| {
                let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = node.parents[0]
                    .data()
                    .view()
                    .into_dimensionality::<Ix4>()
                    .unwrap();
                let w4 = node.parents[1]
                    .data()
                    .view()
                    .into_dimensionality::<Ix4>()
                    .unwrap();
                let dx = node.parents[0]
                    .requires_grad()
                    .then(|| kernels::conv2d_dx(&g4, &w4, (h, wi), stride, pad).into_dyn());
                let dw = node.parents[1]
                    .requires_grad()
                    .then(|| kernels::conv2d_dw(&g4, &x4, (kh, kw), stride, pad).into_dyn());
                vec![dx, dw]
            }),
        )
    }

    pub fn conv_transpose2d(&self, w: &Var<F>, stride: usize, pad: usize) -> Var<F> {
        let x4 = self.data().view().into_dimensionality::<Ix4>().unwrap();
        let w4 = w.data().view().into_dimensionality::<Ix4>().unwrap();
        let (_, _, kh, kw) = w4.dim();
        let out = kernels::convt2d_fwd(&x4, &w4, stride, pad).into_dyn();
        Var::from_op(
            out,
            vec![self.clone(), w.clone()],
            Box::new(move |node, g| {
                let g4 = g.view().into_dimensionality::<Ix4>().unwrap();
                let x4 = node.parents[0]
                    .data()
                    .view()
                    .into_dimensionality::<Ix4>()
                    .unwrap();
                let w4 = node.parents[1]
                    .data()
                    .view()
                    .into_dimensionality::<Ix4>()
                    .unwrap();
                let dx = node.parents[0]
                    .requires_grad()
                    .then(|| kernels::convt2d_dx(&g4, &w4, stride, pad).into_dyn());
                let dw = node.parents[1]
                    .requires_grad()
                    .then(|| kernels::convt2d_dw(&g4, &x4, (kh, kw), stride, pad).into_dyn());
                vec![dx, dw]
            }),
        )
    }

    pub fn conv3d(
        &self,
        w: &Var<F>,
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
    ) -> Var<F> {
        let x5 = self.data().view().into_dimensionality::<Ix5>().unwrap();
        let w5 = w.data().view().into_dimensionality::<Ix5>().unwrap();
        let (_, _, t, h, wi) = x5.dim();
        let (_, _, kt, kh, kw) = w5.dim();
        let out = kernels::conv3d_fwd(&x5, &w5, stride, pad).into_dyn();
        Var::from_op(
            out,
            vec![self.clone(), w.clone()],
            Box::new(move |node, g| {
                let g5 = g.view().into_dimensionality::<Ix5>().unwrap();
                let x5 = node.parents[0]
                    .data()
                    .view()
                    .into_dimensionality::<Ix5>()
                    .unwrap();
                let w5 = node.parents[1]
                    .data()
                    .view()
                    .into_dimensionality::<Ix5>()
                    .unwrap();
                let dx = node.parents[0]
                    .requires_grad()
                    .then(|| kernels::conv3d_dx(&g5, &w5, (t, h, wi), stride, pad).into_dyn());
                let dw = node.parents[1]
                    .requires_grad()
                    .then(|| kernels::conv3d_dw(&g5, &x5, (kt, kh, kw), stride, pad).into_dyn());
                vec![dx, dw]
            }),
        )
    }
}

/// Concatenate along `axis`.
pub fn concat<F: Scalar>(vars: &[&Var<F>], axis: usize) -> Var<F> {
    assert!(!vars.is_empty());
    let views: Vec<_> = vars.iter().map(|v| v.data().view()).collect();
    let data = concatenate(Axis(axis), &views).expect("concat shapes");
    let widths: Vec<usize> = vars.iter().map(|v| v.shape()[axis]).collect();
    let parents: Vec<Var<F>> = vars.iter().map(|v| (*v).clone()).collect();
    Var::from_op(
        data,
        parents,
        Box::new(move |node, g| {
            let mut out = Vec::with_capacity(node.parents.len());
            let mut offset = 0usize;
            for (parent, &w) in node.parents.iter().zip(&widths) {
                if parent.requires_grad() {
                    let piece = g
                        .slice_axis(Axis(axis), Slice::from(offset..offset + w))
                        .to_owned();
                    out.push(Some(piece));
                } else {
                    out.push(None);
                }
                offset += w;
            }
            out
        }),
    )
}

fn sigmoid_stable<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

fn softplus_stable<F: Scalar>(x: F) -> F {
    // max(x, 0) + ln(1 + exp(-|x|))
    let m = if x > F::zero() { x } else { F::zero() };
    m + (-x.abs()).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::super::check::finite_difference_scalar;
    use super::*;
    use ndarray::{ArrayD, IxDyn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_arr(rng: &mut ChaCha8Rng, shape: &[usize]) -> ArrayD<f64> {
        ArrayD::from_shape_simple_fn(IxDyn(shape), || rng.gen_range(-1.0..1.0))
    }

    /// Exhaustive finite-difference check of a scalar-valued graph w.r.t. one input.
    fn check_unary(shape: &[usize], f: impl Fn(&Var<f64>) -> Var<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x0 = rand_arr(&mut rng, shape);
        let leaf = Var::leaf(x0.clone(), true);
        let loss = f(&leaf);
        loss.backward();
        let analytic = leaf.take_grad().expect("gradient");
        let numeric = finite_difference_scalar(&x0, 1e-6, |a| {
            f(&Var::constant(a.clone())).scalar_value()
        });
        for (i, (a, n)) in analytic.iter().zip(numeric.iter()).enumerate() {
            let denom = a.abs().max(n.abs()).max(1e-8);
            assert!(
                (a - n).abs() / denom < 1e-5,
                "coord {i}: analytic {a} vs numeric {n}"
            );
        }
    }

    #[test]
    fn pointwise_op_gradients() {
        check_unary(&[3, 4], |x| x.tanh().mul(&x.sigmoid()).mean_all(), 1);
        check_unary(&[5], |x| x.softplus().sum_all(), 2);
        check_unary(&[4, 2], |x| x.leaky_relu(0.2).abs().mean_all(), 3);
        check_unary(&[2, 3], |x| x.scale(2.5).add_scalar(0.7).neg().sum_all(), 4);
    }

    #[test]
    fn reduction_and_shape_op_gradients() {
        check_unary(&[2, 3, 4], |x| x.mean_axes(&[1, 2]).sum_all(), 5);
        check_unary(&[3, 2, 2], |x| x.row(1).mean_all(), 6);
        check_unary(&[1, 2, 3], |x| x.repeat_batch(4).tanh().mean_all(), 7);
        check_unary(&[4, 2, 2], |x| x.sub_ref_row(2).abs().mean_all(), 8);
        check_unary(&[2, 6], |x| x.reshape(&[3, 4]).tanh().sum_all(), 9);
        check_unary(&[2, 3, 4], |x| x.permute(&[2, 0, 1]).sigmoid().mean_all(), 10);
    }

    #[test]
    fn binary_op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a0 = rand_arr(&mut rng, &[3, 3]);
        let b0 = rand_arr(&mut rng, &[3, 3]);
        let a = Var::leaf(a0.clone(), true);
        let b = Var::leaf(b0.clone(), true);
        let loss = a.mul(&b).add(&a.sub(&b).tanh()).mean_all();
        loss.backward();
        let ga = a.take_grad().unwrap();
        let gb = b.take_grad().unwrap();
        let na = finite_difference_scalar(&a0, 1e-6, |av| {
            let a = Var::constant(av.clone());
            let b = Var::constant(b0.clone());
            a.mul(&b).add(&a.sub(&b).tanh()).mean_all().scalar_value()
        });
        let nb = finite_difference_scalar(&b0, 1e-6, |bv| {
            let a = Var::constant(a0.clone());
            let b = Var::constant(bv.clone());
            a.mul(&b).add(&a.sub(&b).tanh()).mean_all().scalar_value()
        });
        for (x, y) in ga.iter().zip(na.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
        for (x, y) in gb.iter().zip(nb.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn concat_and_bias_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a0 = rand_arr(&mut rng, &[2, 2, 2, 2]);
        let b0 = rand_arr(&mut rng, &[2, 3, 2, 2]);
        let bias0 = rand_arr(&mut rng, &[5]);
        let run = |a: &Var<f64>, b: &Var<f64>, bias: &Var<f64>| {
            concat(&[a, b], 1).bias_channel(bias).tanh().mean_all()
        };
        let a = Var::leaf(a0.clone(), true);
        let b = Var::leaf(b0.clone(), true);
        let bias = Var::leaf(bias0.clone(), true);
        run(&a, &b, &bias).backward();
        let gbias = bias.take_grad().unwrap();
        let nbias = finite_difference_scalar(&bias0, 1e-6, |bv| {
            run(
                &Var::constant(a0.clone()),
                &Var::constant(b0.clone()),
                &Var::constant(bv.clone()),
            )
            .scalar_value()
        });
        for (x, y) in gbias.iter().zip(nbias.iter()) {
            assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
        let ga = a.take_grad().unwrap();
        let na = finite_difference_scalar(&a0, 1e-6, |av| {
            run(
                &Var::constant(av.clone()),
                &Var::constant(b0.clone()),
                &Var::constant(bias0.clone()),
            )
            .scalar_value()
        });
        for (x, y) in ga.iter().zip(na.iter()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn conv_op_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        // conv2d
        let x0 = rand_arr(&mut rng, &[2, 2, 6, 6]);
        let w0 = rand_arr(&mut rng, &[3, 2, 3, 3]);
        let run2 = |x: &Var<f64>, w: &Var<f64>| x.conv2d(w, 2, 1).tanh().mean_all();
        let x = Var::leaf(x0.clone(), true);
        let w = Var::leaf(w0.clone(), true);
        run2(&x, &w).backward();
        let gw = w.take_grad().unwrap();
        let nw = finite_difference_scalar(&w0, 1e-6, |wv| {
            run2(&Var::constant(x0.clone()), &Var::constant(wv.clone())).scalar_value()
        });
        for (a, n) in gw.iter().zip(nw.iter()) {
            assert!((a - n).abs() < 1e-6, "conv2d dw {a} vs {n}");
        }
        let gx = x.take_grad().unwrap();
        let nx = finite_difference_scalar(&x0, 1e-6, |xv| {
            run2(&Var::constant(xv.clone()), &Var::constant(w0.clone())).scalar_value()
        });
        for (a, n) in gx.iter().zip(nx.iter()) {
            assert!((a - n).abs() < 1e-6, "conv2d dx {a} vs {n}");
        }
        // conv_transpose2d
        let x0 = rand_arr(&mut rng, &[1, 3, 3, 3]);
        let w0 = rand_arr(&mut rng, &[3, 2, 2, 2]);
        let runt = |x: &Var<f64>, w: &Var<f64>| x.conv_transpose2d(w, 2, 0).sigmoid().mean_all();
        let x = Var::leaf(x0.clone(), true);
        let w = Var::leaf(w0.clone(), true);
        runt(&x, &w).backward();
        let gw = w.take_grad().unwrap();
        let nw = finite_difference_scalar(&w0, 1e-6, |wv| {
            runt(&Var::constant(x0.clone()), &Var::constant(wv.clone())).scalar_value()
        });
        for (a, n) in gw.iter().zip(nw.iter()) {
            assert!((a - n).abs() < 1e-6, "convt2d dw {a} vs {n}");
        }
        // conv3d
        let x0 = rand_arr(&mut rng, &[1, 2, 3, 4, 4]);
        let w0 = rand_arr(&mut rng, &[2, 2, 3, 3, 3]);
        let run3 =
            |x: &Var<f64>, w: &Var<f64>| x.conv3d(w, (1, 2, 2), (1, 1, 1)).tanh().mean_all();
        let x = Var::leaf(x0.clone(), true);
        let w = Var::leaf(w0.clone(), true);
        run3(&x, &w).backward();
        let gx = x.take_grad().unwrap();
        let nx = finite_difference_scalar(&x0, 1e-6, |xv| {
            run3(&Var::constant(xv.clone()), &Var::constant(w0.clone())).scalar_value()
        });
        for (a, n) in gx.iter().zip(nx.iter()) {
            assert!((a - n).abs() < 1e-6, "conv3d dx {a} vs {n}");
        }
    }
}
