//! Normalized probabilist's Hermite polynomials and Gaussian norms.
//!
//! `h_n = He_n / sqrt(n!)` is orthonormal under `N(0, 1)`. Values come from the
//! normalized three-term recurrence
//! `h_{n+1}(x) = (x h_n(x) - sqrt(n) h_{n-1}(x)) / sqrt(n + 1)` with a running
//! log scale, so no factorial is ever formed.

mod polynomial;

pub use polynomial::Polynomial;

use serde::{Deserialize, Serialize};

use crate::numeric::{double_factorial, integrate_composite, ln_factorial, normal_mass, normal_pdf};
use crate::quadrature::GaussHermiteRule;

const RESCALE_ABOVE: f64 = 1e150;

/// `h_n(x)` split as `mantissa * exp(log_scale)`; finite for any `n` and `x`.
pub fn hermite_eval_scaled(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut prev = 1.0;
    let mut cur = x;
    let mut log_scale = 0.0;
    for k in 1..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            cur /= RESCALE_ABOVE;
            prev /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
        }
    }
    (cur, log_scale)
}

/// `h_n(x)`. Overflows to infinity only when the true value does.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (m, ls) = hermite_eval_scaled(n, x);
    if ls == 0.0 {
        m
    } else {
        m * ls.exp()
    }
}

/// `[h_0(x), ..., h_n(x)]`.
pub fn hermite_values(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for k in 1..n {
        let next = (x * out[k] - (k as f64).sqrt() * out[k - 1]) / ((k + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// Closed-form sum `sqrt(n!) sum_j (-1)^j x^{n-2j} / (j! (n-2j)! 2^j)`.
///
/// Only meant for `n <= 20`, where factorials are exact in `f64`; it is kept as
/// a cross-check of the recurrence.
pub fn hermite_eval_closed_form(n: usize, x: f64) -> f64 {
    assert!(n <= 20, "closed form is only used for n <= 20");
    let fact = |k: usize| (1..=k).fold(1.0f64, |acc, i| acc * i as f64);
    let mut sum = 0.0;
    for j in 0..=n / 2 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * x.powi((n - 2 * j) as i32) / (fact(j) * fact(n - 2 * j) * 2f64.powi(j as i32));
    }
    fact(n).sqrt() * sum
}

/// Monomial coefficients of `h_n`.
pub fn hermite_coeffs(n: usize) -> Polynomial {
    let mut coeffs = vec![0.0; n + 1];
    let half_ln_nfact = 0.5 * ln_factorial(n);
    let exact = n <= 20;
    let fact = |k: usize| (1..=k).fold(1.0f64, |acc, i| acc * i as f64);
    for j in 0..=n / 2 {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let magnitude = if exact {
            fact(n).sqrt() / (fact(j) * fact(n - 2 * j) * 2f64.powi(j as i32))
        } else {
            (half_ln_nfact - ln_factorial(j) - ln_factorial(n - 2 * j) - j as f64 * std::f64::consts::LN_2).exp()
        };
        coeffs[n - 2 * j] = sign * magnitude;
    }
    Polynomial::new(coeffs)
}

/// `log2(max |coeff of h_n|) / n`, the measured constant in the `2^{cn}` bound.
pub fn max_coeff_log2_rate(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let max = hermite_coeffs(n).coeffs().iter().fold(0.0f64, |m, c| m.max(c.abs()));
    max.log2() / n as f64
}

/// Coefficients `a_0..a_r` of a polynomial in the basis `h_0..h_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteExpansion {
    pub coeffs: Vec<f64>,
}

impl HermiteExpansion {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// `||p||_2` by Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// Clenshaw evaluation of `sum a_k h_k(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.coeffs.len();
        if n == 0 {
            return 0.0;
        }
        // h_{k+1} = alpha_k(x) h_k + beta_k h_{k-1}
        let alpha = |k: usize| x / ((k + 1) as f64).sqrt();
        let beta = |k: usize| -((k as f64) / ((k + 1) as f64)).sqrt();
        let mut b1 = 0.0;
        let mut b2 = 0.0;
        for k in (0..n).rev() {
            let b0 = self.coeffs[k] + alpha(k) * b1 + beta(k + 1) * b2;
            b2 = b1;
            b1 = b0;
        }
        b1
    }
}

/// Basis change monomial -> Hermite, using
/// `x^n = sum_j n! / (j! (n-2j)! 2^j) He_{n-2j}(x)`.
pub fn to_hermite(p: &Polynomial) -> HermiteExpansion {
    let r = p.degree();
    let lnf: Vec<f64> = (0..=r).map(ln_factorial).collect();
    let mut a = vec![0.0; r + 1];
    for (n, &pn) in p.coeffs().iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        for j in 0..=n / 2 {
            let k = n - 2 * j;
            let c = (lnf[n] - lnf[j] - 0.5 * lnf[k] - j as f64 * std::f64::consts::LN_2).exp();
            a[k] += pn * c;
        }
    }
    HermiteExpansion::new(a)
}

/// Basis change Hermite -> monomial.
pub fn from_hermite(e: &HermiteExpansion) -> Polynomial {
    let mut out = vec![0.0; e.coeffs.len().max(1)];
    for (k, &ak) in e.coeffs.iter().enumerate() {
        if ak == 0.0 {
            continue;
        }
        for (i, c) in hermite_coeffs(k).coeffs().iter().enumerate() {
            out[i] += ak * c;
        }
    }
    Polynomial::new(out)
}

/// `E_{x ~ N(0,1)}[x^t]`: zero for odd `t`, `(t-1)!!` for even `t`.
pub fn gaussian_moment(t: usize) -> f64 {
    if t % 2 == 1 {
        0.0
    } else {
        double_factorial(t as i64 - 1)
    }
}

/// Gaussian norm order `p` in `||f||_p = E[|f|^p]^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpOrder {
    L1,
    L2,
    L3,
    L4,
}

impl LpOrder {
    pub fn exponent(self) -> u32 {
        match self {
            LpOrder::L1 => 1,
            LpOrder::L2 => 2,
            LpOrder::L3 => 3,
            LpOrder::L4 => 4,
        }
    }

    pub fn from_exponent(k: u32) -> Option<Self> {
        match k {
            1 => Some(LpOrder::L1),
            2 => Some(LpOrder::L2),
            3 => Some(LpOrder::L3),
            4 => Some(LpOrder::L4),
            _ => None,
        }
    }
}

/// Node count used for the Gauss–Hermite path of a degree-`deg` polynomial.
pub fn quadrature_order_for(ord: LpOrder, deg: usize) -> usize {
    2 * (ord.exponent() as usize * deg) + 8
}

/// `||p||_ord` under `N(0, 1)`.
///
/// L2 is exact via Parseval, L4 by Gauss–Hermite quadrature (`p^4` is a
/// polynomial), and L1/L3 by panel quadrature of `|p|^ord * phi` split at the
/// real roots of `p`, so every panel integrand is smooth.
pub fn gaussian_lp_norm(p: &Polynomial, ord: LpOrder) -> f64 {
    if p.is_zero() {
        return 0.0;
    }
    match ord {
        LpOrder::L2 => to_hermite(p).l2_norm(),
        LpOrder::L4 => {
            let rule =
                GaussHermiteRule::cached(quadrature_order_for(ord, p.degree())).expect("positive quadrature order");
            rule.expect(|x| p.eval(x).powi(4)).powf(0.25)
        }
        LpOrder::L1 | LpOrder::L3 => {
            let k = ord.exponent();
            gaussian_abs_power_expectation(p, k).powf(1.0 / k as f64)
        }
    }
}

/// Plain Gauss–Hermite estimate of `||p||_ord`, used to cross-check the exact
/// paths. Inaccurate for odd orders because `|p|` is not smooth at roots.
pub fn gaussian_lp_norm_quadrature(p: &Polynomial, ord: LpOrder) -> f64 {
    let k = ord.exponent();
    let rule = GaussHermiteRule::cached(quadrature_order_for(ord, p.degree())).expect("positive quadrature order");
    rule.expect(|x| p.eval(x).abs().powi(k as i32)).powf(1.0 / k as f64)
}

/// `E[|p(x)|^k]`, integrating piecewise between consecutive real roots.
pub fn gaussian_abs_power_expectation(p: &Polynomial, k: u32) -> f64 {
    let roots = p.real_roots();
    let spread = ((k as usize * p.degree()) as f64).sqrt();
    let reach = roots.iter().fold(spread, |m, r| m.max(r.abs())) + 12.0;
    let mut breaks = vec![-reach];
    breaks.extend(roots.iter().copied().filter(|r| r.abs() < reach));
    breaks.push(reach);
    breaks
        .windows(2)
        .map(|w| integrate_composite(w[0], w[1], 0.5, |x| p.eval(x).abs().powi(k as i32) * normal_pdf(x)))
        .sum()
}

/// Gaussian measure of the set where `keep(x)` holds, given that `keep` can
/// only change value at the listed breakpoints.
fn measure_between<F: Fn(f64) -> bool>(mut breaks: Vec<f64>, keep: F) -> f64 {
    breaks.sort_by(|a, b| a.total_cmp(b));
    breaks.dedup();
    if breaks.is_empty() {
        return if keep(0.0) { 1.0 } else { 0.0 };
    }
    let mut total = 0.0;
    let first = breaks[0];
    if keep(first - 1.0) {
        total += normal_mass(f64::NEG_INFINITY, first);
    }
    for w in breaks.windows(2) {
        if keep(0.5 * (w[0] + w[1])) {
            total += normal_mass(w[0], w[1]);
        }
    }
    let last = *breaks.last().unwrap();
    if keep(last + 1.0) {
        total += normal_mass(last, f64::INFINITY);
    }
    total
}

/// `Pr_{x ~ N(0,1)}(p(x) > c)`.
pub fn gaussian_superlevel_probability(p: &Polynomial, c: f64) -> f64 {
    let shifted = p.sub(&Polynomial::constant(c));
    measure_between(shifted.real_roots(), |x| p.eval(x) > c)
}

/// `Pr_{x ~ N(0,1)}(|p(x)| <= gamma)`.
pub fn gaussian_band_probability(p: &Polynomial, gamma: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let mut breaks = p.sub(&Polynomial::constant(gamma)).real_roots();
    breaks.extend(p.add(&Polynomial::constant(gamma)).real_roots());
    measure_between(breaks, |x| p.eval(x).abs() <= gamma)
}
