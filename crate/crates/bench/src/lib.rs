//! Shared fixtures for the benchmarks.

use pancake_core::distributions::Gmm1D;
use pancake_core::pancakes::{basis_vector, make_instance, Direction};
use pancake_core::PancakeInstance;

/// The two-point design `{-1, +1}` lifted with `delta = 0.9` into `d`
/// dimensions along `e_1`.
pub fn fixture_instance(d: usize) -> PancakeInstance {
    let rho = 0.9f64.sqrt();
    let base = Gmm1D::new(vec![-rho, rho], vec![0.5, 0.5], 0.9).expect("valid mixture");
    make_instance(base, d, Direction::Explicit(basis_vector(d, 0)), 7).expect("valid instance")
}
