//! Dense convolution kernels (2-d, transposed 2-d, 3-d) via im2col + GEMM.
//!
//! Layouts follow the usual channels-first convention:
//! - conv2d:  x (N, Ci, H, W), w (Co, Ci, Kh, Kw)
//! - conv_transpose2d: x (N, Ci, H, W), w (Ci, Co, Kh, Kw)
//! - conv3d:  x (N, Ci, T, H, W), w (Co, Ci, Kt, Kh, Kw)
//!
//! All loops run in a fixed order, so results are bit-reproducible across runs.

use super::scalar::Scalar;
use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array4, Array5, ArrayView2, ArrayView4, ArrayView5};

pub fn conv2d_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    debug_assert!(input + 2 * pad >= kernel, "kernel larger than padded input");
    (input + 2 * pad - kernel) / stride + 1
}

pub fn convt2d_out_dim(input: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (input - 1) * stride + kernel - 2 * pad
}

/// Unfold one image (Ci, H, W) into (Ci*Kh*Kw, Ho*Wo) patch columns.
fn im2col<F: Scalar>(
    x: &[F],
    (ci, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    stride: usize,
    pad: usize,
) -> Array2<F> {
    let ho = conv2d_out_dim(h, kh, stride, pad);
    let wo = conv2d_out_dim(w, kw, stride, pad);
    let positions = ho * wo;
    let mut cols = Array2::<F>::zeros((ci * kh * kw, positions));
    let cs = cols.as_slice_mut().expect("standard layout");
    for c in 0..ci {
        let plane = &x[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * positions;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let src_row = iy as usize * w;
                    let dst_row = row + oy * wo;
                    // ox range with 0 <= ox*stride + kx - pad < w
                    let lo = pad.saturating_sub(kx).div_ceil(stride);
                    let hi_excl = ((w + pad - kx - 1) / stride + 1).min(wo);
                    for ox in lo..hi_excl {
                        let ix = ox * stride + kx - pad;
                        cs[dst_row + ox] = plane[src_row + ix];
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`]: scatter-add patch columns back into an image.
fn col2im<F: Scalar>(
    cols: &ArrayView2<F>,
    (ci, h, w): (usize, usize, usize),
    (kh, kw): (usize, usize),
    stride: usize,
    pad: usize,
) -> Vec<F> {
    let ho = conv2d_out_dim(h, kh, stride, pad);
    let wo = conv2d_out_dim(w, kw, stride, pad);
    let positions = ho * wo;
    debug_assert_eq!(cols.shape(), &[ci * kh * kw, positions]);
    let mut x = vec![F::zero(); ci * h * w];
    let cs = cols.as_slice().expect("standard layout");
    for c in 0..ci {
        let plane = &mut x[c * h * w..(c + 1) * h * w];
        for ky in 0..kh {
            for kx in 0..kw {
                let row = ((c * kh + ky) * kw + kx) * positions;
                for oy in 0..ho {
                    let iy = (oy * stride + ky) as isize - pad as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    let dst_row = iy as usize * w;
                    let src_row = row + oy * wo;
                    let lo = pad.saturating_sub(kx).div_ceil(stride);
                    let hi_excl = ((w + pad - kx - 1) / stride + 1).min(wo);
                    for ox in lo..hi_excl {
                        let ix = ox * stride + kx - pad;
                        plane[dst_row + ix] = plane[dst_row + ix] + cs[src_row + ox];
                    }
                }
            }
        }
    }
    x
}

fn as_slice<'a, F: Scalar, D: ndarray::Dimension>(
    a: &'a ndarray::ArrayView<'_, F, D>,
) -> std::borrow::Cow<'a, [F]> {
    match a.as_slice() {
        Some(s) => std::borrow::Cow::Borrowed(s),
        None => std::borrow::Cow::Owned(a.iter().cloned().collect()),
    }
}

pub fn conv2d_fwd<F: Scalar>(
    x: &ArrayView4<F>,
    w: &ArrayView4<F>,
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, ci, h, wi) = x.dim();
    let (co, ciw, kh, kw) = w.dim();
    assert_eq!(ci, ciw, "conv2d channel mismatch");
    let ho = conv2d_out_dim(h, kh, stride, pad);
    let wo = conv2d_out_dim(wi, kw, stride, pad);
    let wflat = as_slice(w);
    let wmat = ArrayView2::from_shape((co, ci * kh * kw), &wflat).unwrap();
    let mut out = Array4::<F>::zeros((n, co, ho, wo));
    let xs = as_slice(x);
    for i in 0..n {
        let cols = im2col(&xs[i * ci * h * wi..], (ci, h, wi), (kh, kw), stride, pad);
        let mut outmat = out.slice_mut(s![i, .., .., ..]);
        let mut outmat = outmat
            .as_slice_mut()
            .map(|sl| ndarray::ArrayViewMut2::from_shape((co, ho * wo), sl).unwrap())
            .expect("standard layout");
        general_mat_mul(F::one(), &wmat, &cols.view(), F::zero(), &mut outmat);
    }
    out
}

pub fn conv2d_dx<F: Scalar>(
    dout: &ArrayView4<F>,
    w: &ArrayView4<F>,
    (h, wi): (usize, usize),
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, co, ho, wo) = dout.dim();
    let (cow, ci, kh, kw) = w.dim();
    assert_eq!(co, cow);
    let wflat = as_slice(w);
    let wmat = ArrayView2::from_shape((co, ci * kh * kw), &wflat).unwrap();
    let wmat_t = wmat.t();
    let mut dx = Array4::<F>::zeros((n, ci, h, wi));
    let douts = as_slice(dout);
    for i in 0..n {
        let dmat = ArrayView2::from_shape((co, ho * wo), &douts[i * co * ho * wo..][..co * ho * wo])
            .unwrap();
        let dcols = wmat_t.dot(&dmat);
        let img = col2im(&dcols.view(), (ci, h, wi), (kh, kw), stride, pad);
        dx.slice_mut(s![i, .., .., ..])
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&img);
    }
    dx
}

pub fn conv2d_dw<F: Scalar>(
    dout: &ArrayView4<F>,
    x: &ArrayView4<F>,
    (kh, kw): (usize, usize),
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, ci, h, wi) = x.dim();
    let (nd, co, ho, wo) = dout.dim();
    assert_eq!(n, nd);
    let mut dw = Array2::<F>::zeros((co, ci * kh * kw));
    let xs = as_slice(x);
    let douts = as_slice(dout);
    for i in 0..n {
        let cols = im2col(&xs[i * ci * h * wi..], (ci, h, wi), (kh, kw), stride, pad);
        let dmat = ArrayView2::from_shape((co, ho * wo), &douts[i * co * ho * wo..][..co * ho * wo])
            .unwrap();
        general_mat_mul(F::one(), &dmat, &cols.t(), F::one(), &mut dw.view_mut());
    }
    dw.into_shape_with_order((co, ci, kh, kw)).unwrap()
}

pub fn convt2d_fwd<F: Scalar>(
    x: &ArrayView4<F>,
    w: &ArrayView4<F>,
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, ci, hi, wi) = x.dim();
    let (ciw, co, kh, kw) = w.dim();
    assert_eq!(ci, ciw, "conv_transpose2d channel mismatch");
    let ho = convt2d_out_dim(hi, kh, stride, pad);
    let wo = convt2d_out_dim(wi, kw, stride, pad);
    let wflat = as_slice(w);
    let wmat = ArrayView2::from_shape((ci, co * kh * kw), &wflat).unwrap();
    let wmat_t = wmat.t();
    let mut out = Array4::<F>::zeros((n, co, ho, wo));
    let xs = as_slice(x);
    for i in 0..n {
        let xmat =
            ArrayView2::from_shape((ci, hi * wi), &xs[i * ci * hi * wi..][..ci * hi * wi]).unwrap();
        let cols = wmat_t.dot(&xmat);
        let img = col2im(&cols.view(), (co, ho, wo), (kh, kw), stride, pad);
        out.slice_mut(s![i, .., .., ..])
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&img);
    }
    out
}

/// Gradient of conv_transpose2d w.r.t. its input: a plain convolution of the
/// upstream gradient with the same (Ci, Co, Kh, Kw) weights.
pub fn convt2d_dx<F: Scalar>(
    dout: &ArrayView4<F>,
    w: &ArrayView4<F>,
    stride: usize,
    pad: usize,
) -> Array4<F> {
    conv2d_fwd(dout, w, stride, pad)
}

pub fn convt2d_dw<F: Scalar>(
    dout: &ArrayView4<F>,
    x: &ArrayView4<F>,
    (kh, kw): (usize, usize),
    stride: usize,
    pad: usize,
) -> Array4<F> {
    let (n, ci, hi, wi) = x.dim();
    let (nd, co, _ho, _wo) = dout.dim();
    assert_eq!(n, nd);
    let mut dw = Array2::<F>::zeros((ci, co * kh * kw));
    let xs = as_slice(x);
    let douts = as_slice(dout);
    let dlen = dout.len() / n;
    for i in 0..n {
        let xmat =
            ArrayView2::from_shape((ci, hi * wi), &xs[i * ci * hi * wi..][..ci * hi * wi]).unwrap();
        let cols = im2col(
            &douts[i * dlen..],
            (co, dout.dim().2, dout.dim().3),
            (kh, kw),
            stride,
            pad,
        );
        general_mat_mul(F::one(), &xmat, &cols.t(), F::one(), &mut dw.view_mut());
    }
    dw.into_shape_with_order((ci, co, kh, kw)).unwrap()
}

/// Unfold one volume (Ci, T, H, W) into (Ci*Kt*Kh*Kw, To*Ho*Wo) columns.
fn vol2col<F: Scalar>(
    x: &[F],
    (ci, t, h, w): (usize, usize, usize, usize),
    (kt, kh, kw): (usize, usize, usize),
    (st, sh, sw): (usize, usize, usize),
    (pt, ph, pw): (usize, usize, usize),
) -> Array2<F> {
    let to = conv2d_out_dim(t, kt, st, pt);
    let ho = conv2d_out_dim(h, kh, sh, ph);
    let wo = conv2d_out_dim(w, kw, sw, pw);
    let positions = to * ho * wo;
    let mut cols = Array2::<F>::zeros((ci * kt * kh * kw, positions));
    let cs = cols.as_slice_mut().expect("standard layout");
    for c in 0..ci {
        let vol = &x[c * t * h * w..(c + 1) * t * h * w];
        for tk in 0..kt {
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = (((c * kt + tk) * kh + ky) * kw + kx) * positions;
                    for ot in 0..to {
                        let it = (ot * st + tk) as isize - pt as isize;
                        if it < 0 || it >= t as isize {
                            continue;
                        }
                        let plane = it as usize * h * w;
                        for oy in 0..ho {
                            let iy = (oy * sh + ky) as isize - ph as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let src_row = plane + iy as usize * w;
                            let dst_row = row + (ot * ho + oy) * wo;
                            let lo = pw.saturating_sub(kx).div_ceil(sw);
                            let hi_excl = ((w + pw - kx - 1) / sw + 1).min(wo);
                            for ox in lo..hi_excl {
                                let ix = ox * sw + kx - pw;
                                cs[dst_row + ox] = vol[src_row + ix];
                            }
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2vol<F: Scalar>(
    cols: &ArrayView2<F>,
    (ci, t, h, w): (usize, usize, usize, usize),
    (kt, kh, kw): (usize, usize, usize),
    (st, sh, sw): (usize, usize, usize),
    (pt, ph, pw): (usize, usize, usize),
) -> Vec<F> {
    let to = conv2d_out_dim(t, kt, st, pt);
    let ho = conv2d_out_dim(h, kh, sh, ph);
    let wo = conv2d_out_dim(w, kw, sw, pw);
    let positions = to * ho * wo;
    let mut x = vec![F::zero(); ci * t * h * w];
    let cs = cols.as_slice().expect("standard layout");
    for c in 0..ci {
        let vol = &mut x[c * t * h * w..(c + 1) * t * h * w];
        for tk in 0..kt {
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = (((c * kt + tk) * kh + ky) * kw + kx) * positions;
                    for ot in 0..to {
                        let it = (ot * st + tk) as isize - pt as isize;
                        if it < 0 || it >= t as isize {
                            continue;
                        }
                        let plane = it as usize * h * w;
                        for oy in 0..ho {
                            let iy = (oy * sh + ky) as isize - ph as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let dst_row = plane + iy as usize * w;
                            let src_row = row + (ot * ho + oy) * wo;
                            let lo = pw.saturating_sub(kx).div_ceil(sw);
                            let hi_excl = ((w + pw - kx - 1) / sw + 1).min(wo);
                            for ox in lo..hi_excl {
                                let ix = ox * sw + kx - pw;
                                vol[dst_row + ix] = vol[dst_row + ix] + cs[src_row + ox];
                            }
                        }
                    }
                }
            }
        }
    }
    x
}

pub fn conv3d_fwd<F: Scalar>(
    x: &ArrayView5<F>,
    w: &ArrayView5<F>,
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Array5<F> {
    let (n, ci, t, h, wi) = x.dim();
    let (co, ciw, kt, kh, kw) = w.dim();
    assert_eq!(ci, ciw, "conv3d channel mismatch");
    let to = conv2d_out_dim(t, kt, stride.0, pad.0);
    let ho = conv2d_out_dim(h, kh, stride.1, pad.1);
    let wo = conv2d_out_dim(wi, kw, stride.2, pad.2);
    let wflat = as_slice(w);
    let wmat = ArrayView2::from_shape((co, ci * kt * kh * kw), &wflat).unwrap();
    let mut out = Array5::<F>::zeros((n, co, to, ho, wo));
    let xs = as_slice(x);
    let xlen = ci * t * h * wi;
    for i in 0..n {
        let cols = vol2col(
            &xs[i * xlen..],
            (ci, t, h, wi),
            (kt, kh, kw),
            stride,
            pad,
        );
        let mut outmat = out.slice_mut(s![i, .., .., .., ..]);
        let mut outmat = outmat
            .as_slice_mut()
            .map(|sl| ndarray::ArrayViewMut2::from_shape((co, to * ho * wo), sl).unwrap())
            .expect("standard layout");
        general_mat_mul(F::one(), &wmat, &cols.view(), F::zero(), &mut outmat);
    }
    out
}

pub fn conv3d_dx<F: Scalar>(
    dout: &ArrayView5<F>,
    w: &ArrayView5<F>,
    (t, h, wi): (usize, usize, usize),
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Array5<F> {
    let (n, co, to, ho, wo) = dout.dim();
    let (cow, ci, kt, kh, kw) = w.dim();
    assert_eq!(co, cow);
    let wflat = as_slice(w);
    let wmat = ArrayView2::from_shape((co, ci * kt * kh * kw), &wflat).unwrap();
    let wmat_t = wmat.t();
    let mut dx = Array5::<F>::zeros((n, ci, t, h, wi));
    let douts = as_slice(dout);
    let dlen = co * to * ho * wo;
    for i in 0..n {
        let dmat = ArrayView2::from_shape((co, to * ho * wo), &douts[i * dlen..][..dlen]).unwrap();
        let dcols = wmat_t.dot(&dmat);
        let vol = col2vol(&dcols.view(), (ci, t, h, wi), (kt, kh, kw), stride, pad);
        dx.slice_mut(s![i, .., .., .., ..])
            .as_slice_mut()
            .expect("standard layout")
            .copy_from_slice(&vol);
    }
    dx
}

pub fn conv3d_dw<F: Scalar>(
    dout: &ArrayView5<F>,
    x: &ArrayView5<F>,
    (kt, kh, kw): (usize, usize, usize),
    stride: (usize, usize, usize),
    pad: (usize, usize, usize),
) -> Array5<F> {
    let (n, ci, t, h, wi) = x.dim();
    let (nd, co, to, ho, wo) = dout.dim();
    assert_eq!(n, nd);
    let mut dw = Array2::<F>::zeros((co, ci * kt * kh * kw));
    let xs = as_slice(x);
    let douts = as_slice(dout);
    let xlen = ci * t * h * wi;
    let dlen = co * to * ho * wo;
    for i in 0..n {
        let cols = vol2col(&xs[i * xlen..], (ci, t, h, wi), (kt, kh, kw), stride, pad);
        let dmat = ArrayView2::from_shape((co, to * ho * wo), &douts[i * dlen..][..dlen]).unwrap();
        general_mat_mul(F::one(), &dmat, &cols.t(), F::one(), &mut dw.view_mut());
    }
    dw.into_shape_with_order((co, ci, kt, kh, kw)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array4, Array5};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randn4(rng: &mut ChaCha8Rng, dim: (usize, usize, usize, usize)) -> Array4<f64> {
        Array4::from_shape_simple_fn(dim, || rng.gen_range(-1.0..1.0))
    }

    fn randn5(rng: &mut ChaCha8Rng, dim: (usize, usize, usize, usize, usize)) -> Array5<f64> {
        Array5::from_shape_simple_fn(dim, || rng.gen_range(-1.0..1.0))
    }

    /// Reference conv2d: direct quintuple loop.
    fn conv2d_naive(x: &Array4<f64>, w: &Array4<f64>, stride: usize, pad: usize) -> Array4<f64> {
        let (n, ci, h, wi) = x.dim();
        let (co, _, kh, kw) = w.dim();
        let ho = conv2d_out_dim(h, kh, stride, pad);
        let wo = conv2d_out_dim(wi, kw, stride, pad);
        let mut out = Array4::zeros((n, co, ho, wo));
        for i in 0..n {
            for o in 0..co {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut acc = 0.0;
                        for c in 0..ci {
                            for ky in 0..kh {
                                for kx in 0..kw {
                                    let iy = (oy * stride + ky) as isize - pad as isize;
                                    let ix = (ox * stride + kx) as isize - pad as isize;
                                    if iy >= 0 && iy < h as isize && ix >= 0 && ix < wi as isize {
                                        acc += w[[o, c, ky, kx]]
                                            * x[[i, c, iy as usize, ix as usize]];
                                    }
                                }
                            }
                        }
                        out[[i, o, oy, ox]] = acc;
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv2d_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(stride, pad, k) in &[(1usize, 0usize, 1usize), (1, 1, 3), (2, 1, 3), (2, 0, 2), (2, 1, 4)] {
            let x = randn4(&mut rng, (2, 3, 8, 9));
            let w = randn4(&mut rng, (4, 3, k, k));
            let got = conv2d_fwd(&x.view(), &w.view(), stride, pad);
            let want = conv2d_naive(&x, &w, stride, pad);
            let diff = (&got - &want).mapv(f64::abs).sum();
            assert!(diff < 1e-10, "stride={stride} pad={pad} k={k}: diff={diff}");
        }
    }

    /// <conv(x), y> == <x, conv_dx(y)> pins the backward pass as the true adjoint.
    #[test]
    fn conv2d_dx_is_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for &(stride, pad, k) in &[(1usize, 1usize, 3usize), (2, 1, 3), (2, 0, 2)] {
            let x = randn4(&mut rng, (2, 3, 8, 8));
            let w = randn4(&mut rng, (4, 3, k, k));
            let y = conv2d_fwd(&x.view(), &w.view(), stride, pad);
            let cot = randn4(&mut rng, y.dim());
            let dx = conv2d_dx(&cot.view(), &w.view(), (8, 8), stride, pad);
            let lhs = (&y * &cot).sum();
            let rhs = (&x * &dx).sum();
            assert!((lhs - rhs).abs() < 1e-9, "adjoint mismatch: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn conv2d_dw_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = randn4(&mut rng, (2, 2, 6, 6));
        let mut w = randn4(&mut rng, (3, 2, 3, 3));
        let cot = {
            let y = conv2d_fwd(&x.view(), &w.view(), 2, 1);
            randn4(&mut rng, y.dim())
        };
        let dw = conv2d_dw(&cot.view(), &x.view(), (3, 3), 2, 1);
        let eps = 1e-6;
        for idx in [[0, 0, 0, 0], [2, 1, 2, 2], [1, 0, 1, 2]] {
            let orig = w[idx];
            w[idx] = orig + eps;
            let fp = (&conv2d_fwd(&x.view(), &w.view(), 2, 1) * &cot).sum();
            w[idx] = orig - eps;
            let fm = (&conv2d_fwd(&x.view(), &w.view(), 2, 1) * &cot).sum();
            w[idx] = orig;
            let num = (fp - fm) / (2.0 * eps);
            assert!((num - dw[idx]).abs() < 1e-6, "dw mismatch at {idx:?}");
        }
    }

    #[test]
    fn convt2d_shapes_and_adjointness() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for &(stride, pad, k) in &[(2usize, 1usize, 4usize), (2, 0, 2), (1, 1, 3)] {
            let x = randn4(&mut rng, (2, 3, 4, 5));
            let w = randn4(&mut rng, (3, 2, k, k));
            let y = convt2d_fwd(&x.view(), &w.view(), stride, pad);
            let (_, co, ho, wo) = y.dim();
            assert_eq!(co, 2);
            assert_eq!(ho, convt2d_out_dim(4, k, stride, pad));
            assert_eq!(wo, convt2d_out_dim(5, k, stride, pad));
            // adjoint: <convT(x), y> == <x, conv(y)>
            let cot = randn4(&mut rng, y.dim());
            let dx = convt2d_dx(&cot.view(), &w.view(), stride, pad);
            let lhs = (&y * &cot).sum();
            let rhs = (&x * &dx).sum();
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn convt2d_dw_matches_finite_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = randn4(&mut rng, (2, 3, 4, 4));
        let mut w = randn4(&mut rng, (3, 2, 4, 4));
        let cot = {
            let y = convt2d_fwd(&x.view(), &w.view(), 2, 1);
            randn4(&mut rng, y.dim())
        };
        let dw = convt2d_dw(&cot.view(), &x.view(), (4, 4), 2, 1);
        let eps = 1e-6;
        for idx in [[0, 0, 0, 0], [2, 1, 3, 3], [1, 0, 2, 1]] {
            let orig = w[idx];
            w[idx] = orig + eps;
            let fp = (&convt2d_fwd(&x.view(), &w.view(), 2, 1) * &cot).sum();
            w[idx] = orig - eps;
            let fm = (&convt2d_fwd(&x.view(), &w.view(), 2, 1) * &cot).sum();
            w[idx] = orig;
            let num = (fp - fm) / (2.0 * eps);
            assert!((num - dw[idx]).abs() < 1e-6, "dw mismatch at {idx:?}");
        }
    }

    /// Reference conv3d on a tiny case.
    fn conv3d_naive(
        x: &Array5<f64>,
        w: &Array5<f64>,
        stride: (usize, usize, usize),
        pad: (usize, usize, usize),
    ) -> Array5<f64> {
        let (n, ci, t, h, wi) = x.dim();
        let (co, _, kt, kh, kw) = w.dim();
        let to = conv2d_out_dim(t, kt, stride.0, pad.0);
        let ho = conv2d_out_dim(h, kh, stride.1, pad.1);
        let wo = conv2d_out_dim(wi, kw, stride.2, pad.2);
        let mut out = Array5::zeros((n, co, to, ho, wo));
        for i in 0..n {
            for o in 0..co {
                for ot in 0..to {
                    for oy in 0..ho {
                        for ox in 0..wo {
                            let mut acc = 0.0;
                            for c in 0..ci {
                                for tk in 0..kt {
                                    for ky in 0..kh {
                                        for kx in 0..kw {
                                            let it = (ot * stride.0 + tk) as isize - pad.0 as isize;
                                            let iy = (oy * stride.1 + ky) as isize - pad.1 as isize;
                                            let ix = (ox * stride.2 + kx) as isize - pad.2 as isize;
                                            if it >= 0
                                                && it < t as isize
                                                && iy >= 0
                                                && iy < h as isize
                                                && ix >= 0
                                                && ix < wi as isize
                                            {
                                                acc += w[[o, c, tk, ky, kx]]
                                                    * x[[
                                                        i,
                                                        c,
                                                        it as usize,
                                                        iy as usize,
                                                        ix as usize,
                                                    ]];
                                            }
                                        }
                                    }
                                }
                            }
                            out[[i, o, ot, oy, ox]] = acc;
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn conv3d_matches_naive_and_adjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let stride = (1, 2, 2);
        let pad = (1, 1, 1);
        let x = randn5(&mut rng, (1, 2, 3, 6, 6));
        let w = randn5(&mut rng, (3, 2, 3, 3, 3));
        let got = conv3d_fwd(&x.view(), &w.view(), stride, pad);
        let want = conv3d_naive(&x, &w, stride, pad);
        let diff = (&got - &want).mapv(f64::abs).sum();
        assert!(diff < 1e-10, "diff={diff}");

        let cot = randn5(&mut rng, got.dim());
        let dx = conv3d_dx(&cot.view(), &w.view(), (3, 6, 6), stride, pad);
        let lhs = (&got * &cot).sum();
        let rhs = (&x * &dx).sum();
        assert!((lhs - rhs).abs() < 1e-9);

        let dw = conv3d_dw(&cot.view(), &x.view(), (3, 3, 3), stride, pad);
        let eps = 1e-6;
        let mut wp = w.clone();
        for idx in [[0, 0, 0, 0, 0], [2, 1, 2, 2, 2], [1, 0, 1, 0, 2]] {
            let orig = wp[idx];
            wp[idx] = orig + eps;
            let fp = (&conv3d_fwd(&x.view(), &wp.view(), stride, pad) * &cot).sum();
            wp[idx] = orig - eps;
            let fm = (&conv3d_fwd(&x.view(), &wp.view(), stride, pad) * &cot).sum();
            wp[idx] = orig;
            let num = (fp - fm) / (2.0 * eps);
            assert!((num - dw[idx]).abs() < 1e-6, "dw mismatch at {idx:?}");
        }
    }
}
