//! One-dimensional laws: finitely supported distributions and common-variance
//! Gaussian mixtures.
//!
//! A mixture `B = sum_i w_i N(c_i, 1 - delta)` is the Ornstein–Uhlenbeck image
//! `U_rho A` (with `rho = sqrt(delta)`) of the discrete law `A` on the points
//! `c_i / rho`. Hermite expectations are diagonal under this map:
//! `E_B[h_n] = rho^n E_A[h_n]`, which is how mixture moments are computed.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermite::{gaussian_moment, hermite_eval_scaled, hermite_values, Polynomial};
use crate::numeric::{binomial, CompensatedSum};
use crate::quadrature::GaussHermiteRule;
use crate::report::CheckReport;

/// Minimum spacing between support points unless overridden.
pub const DEFAULT_MIN_SEPARATION: f64 = 1e-6;

/// Nodes per mixture component when integrating arbitrary functions.
const COMPONENT_QUADRATURE: usize = 64;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Shared moment interface of [`DiscreteDist1D`] and [`Gmm1D`].
pub trait Distribution1D {
    /// `E[h_n(X)]`.
    fn hermite_expectation(&self, n: usize) -> f64;

    /// `E[X^t]`.
    fn raw_moment(&self, t: usize) -> f64;

    /// `E[f(X)]` by exact summation / per-component quadrature.
    fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64;

    /// Points at which an oracle query function is evaluated.
    fn query_points(&self) -> Vec<f64>;

    /// `[|E[h_1]|, ..., |E[h_m]|]`; Gaussian Hermite expectations vanish for
    /// `n >= 1`, so these are the gaps to `N(0, 1)`.
    fn moment_gap_profile(&self, m: usize) -> Vec<f64> {
        (1..=m).map(|i| self.hermite_expectation(i).abs()).collect()
    }

    /// `[|E[X^i] - E_N[x^i]|]` for `i = 1..=m`.
    fn raw_moment_gaps(&self, m: usize) -> Vec<f64> {
        (1..=m)
            .map(|i| (self.raw_moment(i) - gaussian_moment(i)).abs())
            .collect()
    }

    /// `E[p(X)]` through raw moments.
    fn expect_polynomial(&self, p: &Polynomial) -> f64 {
        let mut acc = CompensatedSum::new();
        for (t, &c) in p.coeffs().iter().enumerate() {
            if c != 0.0 {
                acc.add(c * self.raw_moment(t));
            }
        }
        acc.value()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DiscreteRepr {
    points: Vec<f64>,
    weights: Vec<f64>,
    #[serde(default)]
    free_count: usize,
}

/// Finitely supported law `sum_i w_i delta_{mu_i}`.
///
/// The first `free_count` points carry unconstrained weights; the remaining
/// points are expected to share a common weight (not enforced, since
/// arbitrary laws such as quadrature rules also live here).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DiscreteRepr", into = "DiscreteRepr")]
pub struct DiscreteDist1D {
    points: Vec<f64>,
    weights: Vec<f64>,
    free_count: usize,
}

impl TryFrom<DiscreteRepr> for DiscreteDist1D {
    type Error = Error;

    fn try_from(r: DiscreteRepr) -> Result<Self> {
        DiscreteDist1D::new(r.points, r.weights, r.free_count)
    }
}

impl From<DiscreteDist1D> for DiscreteRepr {
    fn from(d: DiscreteDist1D) -> Self {
        DiscreteRepr {
            points: d.points,
            weights: d.weights,
            free_count: d.free_count,
        }
    }
}

impl DiscreteDist1D {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, free_count: usize) -> Result<Self> {
        Self::with_separation(points, weights, free_count, DEFAULT_MIN_SEPARATION)
    }

    pub fn with_separation(
        points: Vec<f64>,
        weights: Vec<f64>,
        free_count: usize,
        min_separation: f64,
    ) -> Result<Self> {
        validate_weights(&points, &weights, "points")?;
        if free_count >= points.len() {
            return Err(Error::field(
                "free_count",
                format!("must be below the support size {}", points.len()),
            ));
        }
        let sep = min_gap(&points);
        if sep < min_separation {
            return Err(Error::InvalidDistribution(format!(
                "support points closer than {min_separation:e} (min gap {sep:e})"
            )));
        }
        Ok(Self {
            points,
            weights,
            free_count,
        })
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let k = points.len();
        Self::new(points, vec![1.0 / k.max(1) as f64; k], 0)
    }

    pub fn point_mass(x: f64) -> Self {
        Self {
            points: vec![x],
            weights: vec![1.0],
            free_count: 0,
        }
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn free_count(&self) -> usize {
        self.free_count
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest weight, `w_min`.
    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total mass of the constrained (non-free) points.
    pub fn constrained_mass(&self) -> f64 {
        self.weights[self.free_count..].iter().sum()
    }

    pub fn min_separation(&self) -> f64 {
        min_gap(&self.points)
    }

    /// Same law with a different free-point count.
    pub fn with_free_count(mut self, free_count: usize) -> Result<Self> {
        if free_count >= self.points.len() {
            return Err(Error::field("free_count", "must be below the support size"));
        }
        self.free_count = free_count;
        Ok(self)
    }

    /// `[E h_0, ..., E h_m]` in one pass per point.
    pub fn hermite_expectations(&self, m: usize) -> Vec<f64> {
        let mut acc = vec![CompensatedSum::new(); m + 1];
        for (&x, &w) in self.points.iter().zip(&self.weights) {
            for (a, h) in acc.iter_mut().zip(hermite_values(m, x)) {
                a.add(w * h);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }
}

/// Spreads coincident or near-coincident points to at least `min_separation`
/// apart, preserving order, and reports the induced worst Hermite gap change
/// `nu` over orders `1..=m`.
pub fn separate_points(points: &[f64], weights: &[f64], min_separation: f64, m: usize) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let mut moved = points.to_vec();
    for w in 1..order.len() {
        let (prev, cur) = (order[w - 1], order[w]);
        if moved[cur] - moved[prev] < min_separation {
            moved[cur] = moved[prev] + min_separation;
        }
    }
    let nu = (1..=m)
        .map(|n| {
            let before: f64 = points
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * crate::hermite::hermite_eval(n, x))
                .sum();
            let after: f64 = moved
                .iter()
                .zip(weights)
                .map(|(&x, &w)| w * crate::hermite::hermite_eval(n, x))
                .sum();
            (after - before).abs()
        })
        .fold(0.0, f64::max);
    (moved, nu)
}

impl Distribution1D for DiscreteDist1D {
    fn hermite_expectation(&self, n: usize) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.points.iter().zip(&self.weights) {
            let (m, ls) = hermite_eval_scaled(n, x);
            acc.add(w * m * ls.exp());
        }
        acc.value()
    }

    fn raw_moment(&self, t: usize) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.points.iter().zip(&self.weights) {
            acc.add(w * x.powi(t as i32));
        }
        acc.value()
    }

    fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.points.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }

    fn query_points(&self) -> Vec<f64> {
        self.points.clone()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct GmmRepr {
    centers: Vec<f64>,
    weights: Vec<f64>,
    delta: f64,
}

/// `sum_i w_i N(c_i, 1 - delta)` with `delta` in `(0, 1]`.
///
/// `delta = 1` gives zero component variance; such mixtures are flagged by
/// [`Gmm1D::is_degenerate`] and behave like the discrete law on the centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GmmRepr", into = "GmmRepr")]
pub struct Gmm1D {
    centers: Vec<f64>,
    weights: Vec<f64>,
    delta: f64,
}

impl TryFrom<GmmRepr> for Gmm1D {
    type Error = Error;

    fn try_from(r: GmmRepr) -> Result<Self> {
        Gmm1D::new(r.centers, r.weights, r.delta)
    }
}

impl From<Gmm1D> for GmmRepr {
    fn from(g: Gmm1D) -> Self {
        GmmRepr {
            centers: g.centers,
            weights: g.weights,
            delta: g.delta,
        }
    }
}

impl Gmm1D {
    pub fn new(centers: Vec<f64>, weights: Vec<f64>, delta: f64) -> Result<Self> {
        validate_weights(&centers, &weights, "centers")?;
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::field("delta", format!("must lie in (0, 1], got {delta}")));
        }
        Ok(Self {
            centers,
            weights,
            delta,
        })
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Common component variance `1 - delta`.
    pub fn variance(&self) -> f64 {
        1.0 - self.delta
    }

    pub fn is_degenerate(&self) -> bool {
        self.delta >= 1.0
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn mean(&self) -> f64 {
        self.centers.iter().zip(&self.weights).map(|(c, w)| c * w).sum()
    }

    /// The law `A` on `c_i / sqrt(delta)` with `B = U_{sqrt(delta)} A`.
    pub fn underlying_discrete(&self) -> Result<DiscreteDist1D> {
        let rho = self.delta.sqrt();
        DiscreteDist1D::with_separation(
            self.centers.iter().map(|c| c / rho).collect(),
            self.weights.clone(),
            0,
            0.0,
        )
    }

    /// Per-component quadrature `E[f(c + sigma Z)]`.
    fn component_expectation<F: Fn(f64) -> f64>(&self, f: &F) -> f64 {
        let sigma = self.variance().max(0.0).sqrt();
        if sigma == 0.0 {
            return self.centers.iter().zip(&self.weights).map(|(&c, &w)| w * f(c)).sum();
        }
        let rule = GaussHermiteRule::cached(COMPONENT_QUADRATURE).expect("fixed order");
        let mut acc = CompensatedSum::new();
        for (&c, &w) in self.centers.iter().zip(&self.weights) {
            acc.add(w * rule.expect(|z| f(c + sigma * z)));
        }
        acc.value()
    }

    /// `E_B[h_n]` by quadrature over each component, independent of the
    /// Ornstein–Uhlenbeck identity. Exact for `n < 2 * 64`.
    pub fn hermite_expectation_quadrature(&self, n: usize) -> f64 {
        self.component_expectation(&|x| crate::hermite::hermite_eval(n, x))
    }
}

impl Distribution1D for Gmm1D {
    fn hermite_expectation(&self, n: usize) -> f64 {
        let rho = self.delta.sqrt();
        let ln_rho_n = n as f64 * rho.ln();
        let mut acc = CompensatedSum::new();
        for (&c, &w) in self.centers.iter().zip(&self.weights) {
            let (m, ls) = hermite_eval_scaled(n, c / rho);
            acc.add(w * m * (ls + ln_rho_n).exp());
        }
        acc.value()
    }

    fn raw_moment(&self, t: usize) -> f64 {
        let sigma = self.variance().max(0.0).sqrt();
        let mut acc = CompensatedSum::new();
        for (&c, &w) in self.centers.iter().zip(&self.weights) {
            let mut inner = 0.0;
            for j in (0..=t).step_by(2) {
                inner += binomial(t, j) * c.powi((t - j) as i32) * sigma.powi(j as i32) * gaussian_moment(j);
            }
            acc.add(w * inner);
        }
        acc.value()
    }

    fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.component_expectation(&f)
    }

    fn query_points(&self) -> Vec<f64> {
        let sigma = self.variance().max(0.0).sqrt();
        let rule = GaussHermiteRule::cached(COMPONENT_QUADRATURE).expect("fixed order");
        self.centers
            .iter()
            .flat_map(|&c| rule.nodes.iter().map(move |z| c + sigma * z).collect::<Vec<_>>())
            .collect()
    }
}

fn validate_weights(points: &[f64], weights: &[f64], points_field: &str) -> Result<()> {
    if points.is_empty() {
        return Err(Error::field(points_field, "must be non-empty"));
    }
    if points.len() != weights.len() {
        return Err(Error::field(
            "weights",
            format!(
                "length {} does not match {} {}",
                weights.len(),
                points_field,
                points.len()
            ),
        ));
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::field(points_field, "must be finite"));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::field("weights", "must be finite and nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL * weights.len().max(1) as f64 {
        return Err(Error::field("weights", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

fn min_gap(points: &[f64]) -> f64 {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Ornstein–Uhlenbeck lift `rho X + sqrt(1 - rho^2) Z` of a discrete law.
pub fn ou_smooth(a: &DiscreteDist1D, rho: f64) -> Result<Gmm1D> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::invalid(format!("rho must lie in (0, 1], got {rho}")));
    }
    Gmm1D::new(
        a.points().iter().map(|x| rho * x).collect(),
        a.weights().to_vec(),
        rho * rho,
    )
}

/// Simulated `STAT(tau)` oracle: exact `E[f]` plus uniform noise in
/// `[-tau, tau]`.
///
/// `f` is checked against `[-1, 1]` at every point where it is evaluated.
pub fn stat_oracle<D, F, R>(dist: &D, f: F, tau: f64, rng: &mut R) -> Result<f64>
where
    D: Distribution1D,
    F: Fn(f64) -> f64,
    R: Rng + ?Sized,
{
    if !(tau > 0.0) {
        return Err(Error::invalid("tau must be positive"));
    }
    for x in dist.query_points() {
        let v = f(x);
        if !(-1.0..=1.0).contains(&v) {
            return Err(Error::QueryOutOfRange { x, value: v });
        }
    }
    let exact = dist.expectation(&f);
    Ok(exact + rng.random_range(-tau..=tau))
}

/// Checks the mixture-to-discrete transfer of approximate moment matching:
/// if every Hermite gap of `B` up to `m_prime` is at most `lambda`, then every
/// gap of the underlying discrete law is at most
/// `sqrt(m') * lambda * delta^{-m'/2}`.
pub fn check_moment_relationship(b: &Gmm1D, m_prime: usize, lambda: f64) -> Result<CheckReport> {
    let a = b.underlying_discrete()?;
    let gaps_b = b.moment_gap_profile(m_prime);
    let gaps_a = a.moment_gap_profile(m_prime);
    let bound = (m_prime as f64).sqrt() * lambda * b.delta().powf(-(m_prime as f64) / 2.0);
    let worst_a = gaps_a.iter().copied().fold(0.0, f64::max);
    let worst_b = gaps_b.iter().copied().fold(0.0, f64::max);
    let name = "moment_relationship";
    let report = if worst_b > lambda {
        CheckReport::vacuous(name, worst_a, bound)
    } else {
        CheckReport::at_most(name, worst_a, bound)
    };
    Ok(report
        .with("m_prime", m_prime)
        .with("lambda", lambda)
        .with("delta", b.delta())
        .with("max_gap_b", worst_b))
}
