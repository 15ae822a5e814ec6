//! Sup/inf ratios of zero-mean polynomials and anti-concentration.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{
    gaussian_lp_norm, gaussian_superlevel_probability, to_hermite, HermiteExpansion, LpOrder, Polynomial,
};
use crate::numeric::grid_max;
use crate::report::CheckReport;
use crate::rng::{stream_id, stream_rng};

/// Half-width multiplier of the interval `[-C sqrt(t), C sqrt(t)]`.
pub const DEFAULT_INTERVAL_SCALE: f64 = 10.0;
pub const DEFAULT_GRID_SIZE: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub t: usize,
    pub interval: [f64; 2],
    /// Largest observed `sup p / |inf p|` (over `p` and `-p`); a lower bound
    /// on the true constant.
    pub estimate: f64,
    pub samples_used: usize,
    pub skipped: usize,
}

/// `max(sup/|inf|, |inf|/sup)` of `p` on `[-half, half]`, or `None` when
/// either extreme is numerically zero or has the wrong sign.
pub fn polynomial_ratio(p: &HermiteExpansion, half_width: f64, grid_size: usize) -> Option<f64> {
    let (_, sup) = grid_max(-half_width, half_width, grid_size, |x| p.eval(x));
    let (_, neg_inf) = grid_max(-half_width, half_width, grid_size, |x| -p.eval(x));
    if sup < 1e-300 || neg_inf < 1e-300 {
        return None;
    }
    Some((sup / neg_inf).max(neg_inf / sup))
}

/// Random degree-`t` polynomials with i.i.d. standard normal Hermite
/// coefficients `a_1..a_t` and `a_0 = 0`.
///
/// Polynomial `j` draws from its own stream, so the estimate for `n` samples
/// is a prefix maximum of the estimate for any larger `n`.
pub fn estimate_design_ratio(t: usize, n_polys: usize, grid_size: usize, seed: u64) -> Result<RatioEstimate> {
    estimate_design_ratio_with(t, n_polys, grid_size, seed, DEFAULT_INTERVAL_SCALE)
}

pub fn estimate_design_ratio_with(
    t: usize,
    n_polys: usize,
    grid_size: usize,
    seed: u64,
    interval_scale: f64,
) -> Result<RatioEstimate> {
    if t == 0 {
        return Err(Error::invalid("t must be at least 1"));
    }
    let half = interval_scale * (t as f64).sqrt();
    let mut estimate = 1.0f64;
    let mut skipped = 0;
    for j in 0..n_polys {
        let mut rng = stream_rng(seed, stream_id(7, j as u64));
        let mut coeffs = vec![0.0];
        coeffs.extend((0..t).map(|_| -> f64 { StandardNormal.sample(&mut rng) }));
        match polynomial_ratio(&HermiteExpansion::new(coeffs), half, grid_size) {
            Some(r) => estimate = estimate.max(r),
            None => skipped += 1,
        }
    }
    Ok(RatioEstimate {
        t,
        interval: [-half, half],
        estimate,
        samples_used: n_polys,
        skipped,
    })
}

/// `Pr(p(x) > eps ||p||_1) >= (1/2 (||p||_1/||p||_2) (1 - c t eps^{1 + 1/t}))^2`
/// for centered `p` of degree `t`.
pub fn anti_concentration_check(p: &Polynomial, eps: f64, c: f64) -> Result<CheckReport> {
    if p.is_zero() {
        return Err(Error::invalid("polynomial must be nonzero"));
    }
    let t = p.degree();
    let l2 = gaussian_lp_norm(p, LpOrder::L2);
    let mean = to_hermite(p).coeffs[0];
    if mean.abs() > 1e-8 * l2.max(1.0) {
        return Err(Error::invalid(format!("polynomial must be centered, E[p] = {mean:e}")));
    }
    let l1 = gaussian_lp_norm(p, LpOrder::L1);
    let prob = gaussian_superlevel_probability(p, eps * l1);
    let inner = 1.0 - c * t as f64 * eps.powf(1.0 + 1.0 / t as f64);
    let name = "anti_concentration";
    let report = if inner < 0.0 {
        CheckReport::vacuous(name, prob, 0.0)
    } else {
        CheckReport::at_least(name, prob, (0.5 * (l1 / l2) * inner).powi(2))
    };
    Ok(report.with("degree", t).with("eps", eps).with("c", c))
}
