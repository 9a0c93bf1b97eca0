use super::dense::DenseMat;
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

/// Central-difference gradient of a scalar function of a matrix:
/// `(f(x + eps·e) − f(x − eps·e)) / (2·eps)` per coordinate.
pub fn finite_diff_grad<F>(mut f: F, x: &DenseMat, eps: f64) -> Result<DenseMat>
where
    F: FnMut(&DenseMat) -> f64,
{
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let mut probe = x.clone();
    let mut grad = DenseMat::zeros(x.rows(), x.cols());
    for k in 0..x.as_slice().len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + eps;
        let up = f(&probe);
        probe.as_mut_slice()[k] = orig - eps;
        let down = f(&probe);
        probe.as_mut_slice()[k] = orig;
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("objective at coordinate {k}")));
        }
        grad.as_mut_slice()[k] = (up - down) / (2.0 * eps);
    }
    Ok(grad)
}

/// Scalar version of [`finite_diff_grad`].
pub fn finite_diff_scalar<F>(mut f: F, x: f64, eps: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let m = DenseMat::from_vec(1, 1, vec![x])?;
    let g = finite_diff_grad(|p| f(p.as_slice()[0]), &m, eps)?;
    Ok(g.as_slice()[0])
}

/// Relative error used by gradient checks: `|a−n| / max(|a|, |n|, floor)`.
pub fn grad_rel_error(analytic: &DenseMat, numeric: &DenseMat, floor: f64) -> f64 {
    analytic.max_rel_diff(numeric, floor)
}
