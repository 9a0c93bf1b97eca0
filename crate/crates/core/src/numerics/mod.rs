//! Dense and sparse matrix arithmetic, the deterministic RNG, and the
//! finite-difference gradient oracle.

mod dense;
mod gradcheck;
mod rng;
mod sparse;

pub use dense::{dot, rel_diff, DenseMat};
pub use gradcheck::{finite_diff_grad, finite_diff_scalar, grad_rel_error, DEFAULT_EPS};
pub use rng::Rng;
pub use sparse::{normalize_adjacency, row_sums, spmm, SparseAdj};

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Uniform fan-scaled init in `±sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut Rng) -> DenseMat {
    let bound = (6.0 / (rows + cols).max(1) as f64).sqrt();
    DenseMat::from_fn(rows, cols, |_, _| rng.uniform(-bound, bound))
}

pub fn random_matrix(rows: usize, cols: usize, lo: f64, hi: f64, rng: &mut Rng) -> DenseMat {
    DenseMat::from_fn(rows, cols, |_, _| rng.uniform(lo, hi))
}
