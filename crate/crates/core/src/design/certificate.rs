//! Exact analysis of uniform-weight designs with at least as many moment
//! constraints as points.
//!
//! `k` points with weights `1/k` matching moments `1..=k` have power sums
//! `P_i = k E_N[x^i]`. Newton's identities turn these into the elementary
//! symmetric polynomials of the points, so the points must be the roots of a
//! single monic polynomial. Either that polynomial has `k` distinct real
//! roots (the unique candidate), or no design exists.

use serde::{Deserialize, Serialize};

use crate::hermite::{gaussian_moment, Polynomial};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Coefficients of the implied characteristic polynomial, ascending.
    pub char_poly: Polynomial,
    pub real_roots: usize,
    pub explanation: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SquareAnalysis {
    /// The unique candidate support (ascending).
    Candidate(Vec<f64>),
    Impossible(Certificate),
}

/// Monic polynomial whose roots are the support of a `k`-point uniform
/// design matching the first `k` Gaussian moments.
pub fn characteristic_polynomial(k: usize) -> Polynomial {
    let power_sums: Vec<f64> = (0..=k).map(|i| k as f64 * gaussian_moment(i)).collect();
    let mut e = vec![0.0; k + 1];
    e[0] = 1.0;
    for i in 1..=k {
        let mut acc = 0.0;
        for j in 1..=i {
            let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[i - j] * power_sums[j];
        }
        e[i] = acc / i as f64;
    }
    // x^k - e1 x^{k-1} + e2 x^{k-2} - ...
    let mut coeffs = vec![0.0; k + 1];
    for (i, &ei) in e.iter().enumerate() {
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[k - i] = sign * ei;
    }
    Polynomial::new(coeffs)
}

pub fn analyze_square(k: usize) -> SquareAnalysis {
    let poly = characteristic_polynomial(k);
    let roots = poly.real_roots();
    let distinct = roots.windows(2).all(|w| w[1] - w[0] > 1e-9);
    if roots.len() == k && distinct {
        return SquareAnalysis::Candidate(roots);
    }
    let explanation = if k.is_multiple_of(2) && poly.coeffs().iter().skip(1).step_by(2).all(|&c| c == 0.0) {
        // even polynomial: roots come from y = x^2
        let squares = Polynomial::new(poly.coeffs().iter().step_by(2).copied().collect());
        let ys = squares.real_roots();
        let negative: Vec<String> = ys.iter().filter(|&&y| y < 0.0).map(|y| format!("{y:.6}")).collect();
        format!(
            "Newton's identities force the support to be the roots of {poly}; it has only {} distinct real roots of {k} needed (squared roots {:?} include negative values [{}])",
            roots.len(),
            ys.iter().map(|y| format!("{y:.6}")).collect::<Vec<_>>(),
            negative.join(", ")
        )
    } else {
        format!(
            "Newton's identities force the support to be the roots of {poly}; it has only {} distinct real roots of {k} needed",
            roots.len()
        )
    };
    SquareAnalysis::Impossible(Certificate {
        char_poly: poly,
        real_roots: roots.len(),
        explanation,
    })
}
