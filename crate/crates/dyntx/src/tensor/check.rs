//! Central finite-difference helpers for validating analytic gradients.

use super::scalar::Scalar;
use ndarray::ArrayD;

/// Central-difference gradient of `f` (scalar-valued) w.r.t. every element of `x`.
pub fn finite_difference_scalar<F: Scalar>(
    x: &ArrayD<F>,
    eps: f64,
    mut f: impl FnMut(&ArrayD<F>) -> F,
) -> ArrayD<F> {
    let eps = F::from(eps).unwrap();
    let two = F::from(2.0).unwrap();
    let mut probe = x.clone();
    let mut grad = ArrayD::<F>::zeros(x.raw_dim());
    let n = x.len();
    for i in 0..n {
        let orig = probe.as_slice().unwrap()[i];
        probe.as_slice_mut().unwrap()[i] = orig + eps;
        let fp = f(&probe);
        probe.as_slice_mut().unwrap()[i] = orig - eps;
        let fm = f(&probe);
        probe.as_slice_mut().unwrap()[i] = orig;
        grad.as_slice_mut().unwrap()[i] = (fp - fm) / (two * eps);
    }
    grad
}

/// Central-difference gradient on a selected subset of coordinates.
/// Returns (analytic-index, numeric-gradient) pairs.
pub fn finite_difference_coords<F: Scalar>(
    x: &ArrayD<F>,
    coords: &[usize],
    eps: f64,
    mut f: impl FnMut(&ArrayD<F>) -> F,
) -> Vec<(usize, F)> {
    let eps = F::from(eps).unwrap();
    let two = F::from(2.0).unwrap();
    let mut probe = x.clone();
    coords
        .iter()
        .map(|&i| {
            let orig = probe.as_slice().unwrap()[i];
            probe.as_slice_mut().unwrap()[i] = orig + eps;
            let fp = f(&probe);
            probe.as_slice_mut().unwrap()[i] = orig - eps;
            let fm = f(&probe);
            probe.as_slice_mut().unwrap()[i] = orig;
            (i, (fp - fm) / (two * eps))
        })
        .collect()
}

/// Relative agreement used by all gradient checks:
/// |a - n| / max(|a|, |n|, floor).
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
