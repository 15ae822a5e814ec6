//! Constructive moment matching.
//!
//! Designs are discrete laws whose Hermite expectations `E[h_i]` vanish for
//! `i = 1..=m`, i.e. which agree with `N(0, 1)` on every polynomial of degree
//! at most `m`. The search minimizes the squared Hermite gaps with
//! Levenberg–Marquardt; the Jacobian is cheap because `h_i' = sqrt(i) h_{i-1}`.
//!
//! Uniform-weight searches try a symmetric ansatz first (points in `+-` pairs,
//! odd gaps vanish identically) and fall back to unconstrained points. When
//! `m >= k` the answer is decided exactly through Newton's identities, see
//! [`certificate`].

pub mod certificate;
mod lm;
mod ratio;

pub use certificate::Certificate;
pub use lm::{levenberg_marquardt, LmOptions, LmOutcome};
pub use ratio::{
    anti_concentration_check, estimate_design_ratio, estimate_design_ratio_with, polynomial_ratio, RatioEstimate,
    DEFAULT_GRID_SIZE, DEFAULT_INTERVAL_SCALE,
};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DiscreteDist1D, Distribution1D, DEFAULT_MIN_SEPARATION};
use crate::error::{Error, Result};
use crate::hermite::{gaussian_moment, hermite_values, to_hermite, Polynomial};
use crate::numeric::normal_quantile;
use crate::quadrature::GaussHermiteRule;
use crate::rng::{stream_id, stream_rng};
use certificate::{analyze_square, SquareAnalysis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignStatus {
    Found,
    Infeasible,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignResult {
    pub status: DesignStatus,
    pub k: usize,
    pub free_count: usize,
    pub m: usize,
    pub tol: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dist: Option<DiscreteDist1D>,
    /// `max_{1 <= i <= m} |E[h_i]|` of the best candidate seen; NaN (JSON
    /// `null`) when no candidate exists.
    #[serde(with = "nullable_f64")]
    pub residual: f64,
    pub restarts_used: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

impl DesignResult {
    fn unknown(k: usize, free_count: usize, m: usize, tol: f64, residual: f64, restarts_used: usize) -> Self {
        Self {
            status: DesignStatus::Unknown,
            k,
            free_count,
            m,
            tol,
            dist: None,
            residual,
            restarts_used,
            certificate: None,
        }
    }

    pub fn is_found(&self) -> bool {
        self.status == DesignStatus::Found
    }
}

mod nullable_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Search knobs shared by the design routines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchOptions {
    pub tol: f64,
    pub restarts: usize,
    pub seed: u64,
    pub min_separation: f64,
    pub max_iterations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restarts: 16,
            seed: 0,
            min_separation: DEFAULT_MIN_SEPARATION,
            max_iterations: 400,
        }
    }
}

impl SearchOptions {
    pub fn new(tol: f64, restarts: usize, seed: u64) -> Self {
        Self {
            tol,
            restarts,
            seed,
            ..Self::default()
        }
    }
}

/// `t`-node Gauss–Hermite rule as a discrete law; matches `N(0, 1)` on all
/// moments up to `2t - 1`.
pub fn gauss_hermite(t: usize) -> Result<DiscreteDist1D> {
    let rule = GaussHermiteRule::new(t)?;
    DiscreteDist1D::with_separation(rule.nodes, rule.weights, 0, 0.0)
}

/// Independent check of a design through raw moments: if every Hermite gap
/// up to `m` is at most `tol`, then `|E[x^i] - E_N[x^i]| <= tol * sum_j |c_ij|`
/// where `x^i = sum_j c_ij h_j`.
pub fn verify_by_raw_moments(dist: &DiscreteDist1D, m: usize, tol: f64) -> bool {
    (1..=m).all(|i| {
        let expansion = to_hermite(&Polynomial::monomial(i));
        let allowance: f64 = expansion.coeffs.iter().skip(1).map(|c| c.abs()).sum::<f64>() * tol;
        let scale: f64 = dist
            .points()
            .iter()
            .zip(dist.weights())
            .map(|(x, w)| w * x.abs().powi(i as i32))
            .sum::<f64>()
            .max(gaussian_moment(i + i % 2));
        let gap = (dist.raw_moment(i) - gaussian_moment(i)).abs();
        gap <= allowance + 1e-12 * scale
    })
}

fn max_gap(dist: &DiscreteDist1D, m: usize) -> f64 {
    dist.hermite_expectations(m)
        .iter()
        .skip(1)
        .fold(0.0f64, |a, v| a.max(v.abs()))
}

/// Uniform quantiles `Phi^{-1}((j + 1/2) / k)`.
fn quantile_points(k: usize) -> Vec<f64> {
    (0..k).map(|j| normal_quantile((j as f64 + 0.5) / k as f64)).collect()
}

/// Starting configuration for restart `r`: uniform quantiles, Gauss–Hermite
/// nodes, then alternately i.i.d. normal draws and jittered, rescaled
/// quantiles.
fn initial_points<R: Rng>(k: usize, restart: usize, rng: &mut R) -> Vec<f64> {
    let mut pts = match restart {
        0 => quantile_points(k),
        1 => GaussHermiteRule::new(k).expect("k >= 1").nodes,
        r if r % 2 == 0 => (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
        _ => {
            let scale = rng.random_range(0.8..1.25);
            quantile_points(k)
                .into_iter()
                .map(|x| x * scale + 0.15 * rng.sample::<f64, _>(StandardNormal))
                .collect()
        }
    };
    pts.sort_by(|a, b| a.total_cmp(b));
    pts
}

/// Runs `attempt(r)` for restarts `0..restarts`, returning the successful
/// attempt with the smallest index (independent of the thread count).
fn first_success<T, F>(restarts: usize, attempt: F) -> (Option<(usize, T)>, f64)
where
    T: Send,
    F: Fn(usize) -> (Option<T>, f64) + Sync,
{
    let chunk = rayon::current_num_threads().max(1);
    let mut best_residual = f64::INFINITY;
    let mut start = 0;
    while start < restarts {
        let end = (start + chunk).min(restarts);
        let results: Vec<(Option<T>, f64)> = (start..end).into_par_iter().map(&attempt).collect();
        for (offset, (found, residual)) in results.into_iter().enumerate() {
            best_residual = best_residual.min(residual);
            if let Some(v) = found {
                return (Some((start + offset, v)), best_residual);
            }
        }
        start = end;
    }
    (None, best_residual)
}

/// `k` distinct points with weights `1/k` whose Hermite gaps `1..=m` are all
/// at most `opts.tol`.
pub fn find_uniform_design(k: usize, m: usize, opts: &SearchOptions) -> Result<DesignResult> {
    if k < 2 || m < 1 {
        return Err(Error::invalid("uniform design search needs k >= 2 and m >= 1"));
    }
    if m >= k {
        return Ok(decide_square(k, m, opts));
    }

    // symmetric ansatz: +-a_j (and 0 when k is odd); odd gaps vanish exactly
    let half = k / 2;
    let (found, residual_sym) = first_success(opts.restarts, |r| {
        let mut rng = stream_rng(opts.seed, stream_id(1, r as u64));
        let start: Vec<f64> = initial_points(k, r, &mut rng)
            .into_iter()
            .rev()
            .take(half)
            .map(f64::abs)
            .collect();
        let out = symmetric_solve(k, m, start, opts);
        let dist = assemble_symmetric(k, &out.x, opts.min_separation);
        accept(dist, m, opts, out.max_residual)
    });
    if let Some((r, dist)) = found {
        return Ok(found_result(k, 0, m, opts.tol, dist, r + 1));
    }

    let (found, residual_gen) = first_success(opts.restarts, |r| {
        let mut rng = stream_rng(opts.seed, stream_id(2, r as u64));
        let start = initial_points(k, r, &mut rng);
        let out = mostly_uniform_solve(k, 0, m, start, Vec::new(), opts);
        let dist = assemble_mostly_uniform(k, 0, &out.x, opts.min_separation);
        accept(dist, m, opts, out.max_residual)
    });
    if let Some((r, dist)) = found {
        return Ok(found_result(k, 0, m, opts.tol, dist, opts.restarts + r + 1));
    }
    Ok(DesignResult::unknown(
        k,
        0,
        m,
        opts.tol,
        residual_sym.min(residual_gen),
        2 * opts.restarts,
    ))
}

/// Like [`find_uniform_design`] but the first `free_count` points carry
/// unconstrained weights; the remaining `k - free_count` share one weight.
pub fn find_mostly_uniform_design(k: usize, free_count: usize, m: usize, opts: &SearchOptions) -> Result<DesignResult> {
    find_mostly_uniform_design_from(k, free_count, m, opts, &[])
}

/// [`find_mostly_uniform_design`] with extra warm starts tried before the
/// generic restarts.
pub fn find_mostly_uniform_design_from(
    k: usize,
    free_count: usize,
    m: usize,
    opts: &SearchOptions,
    warm_starts: &[DiscreteDist1D],
) -> Result<DesignResult> {
    if free_count >= k {
        return Err(Error::invalid("need 0 <= k' < k"));
    }
    if free_count == 0 {
        return find_uniform_design(k, m, opts);
    }
    if m < 1 {
        return Err(Error::invalid("m must be at least 1"));
    }

    let mut residual = f64::INFINITY;
    for (i, warm) in warm_starts.iter().enumerate() {
        if warm.len() != k {
            continue;
        }
        let (pts, free_w) = split_warm_start(warm, free_count);
        let out = mostly_uniform_solve(k, free_count, m, pts, free_w, opts);
        residual = residual.min(out.max_residual);
        if let Some(dist) = assemble_mostly_uniform(k, free_count, &out.x, opts.min_separation) {
            if max_gap(&dist, m) <= opts.tol && verify_by_raw_moments(&dist, m, opts.tol) {
                return Ok(found_result(k, free_count, m, opts.tol, dist, i + 1));
            }
        }
    }

    let (found, res) = first_success(opts.restarts, |r| {
        let mut rng = stream_rng(opts.seed, stream_id(3, r as u64));
        let (pts, free_w) = if r == 1 {
            gauss_hermite_start(k, free_count)
        } else {
            let pts = initial_points(k, r, &mut rng);
            // centre-most points become the free ones
            let mut order: Vec<usize> = (0..k).collect();
            order.sort_by(|&a, &b| pts[a].abs().total_cmp(&pts[b].abs()));
            let reordered: Vec<f64> = order.iter().map(|&i| pts[i]).collect();
            (reordered, vec![1.0 / k as f64; free_count])
        };
        let out = mostly_uniform_solve(k, free_count, m, pts, free_w, opts);
        let dist = assemble_mostly_uniform(k, free_count, &out.x, opts.min_separation);
        accept(dist, m, opts, out.max_residual)
    });
    residual = residual.min(res);
    if let Some((r, dist)) = found {
        return Ok(found_result(
            k,
            free_count,
            m,
            opts.tol,
            dist,
            warm_starts.len() + r + 1,
        ));
    }
    Ok(DesignResult::unknown(
        k,
        free_count,
        m,
        opts.tol,
        residual,
        warm_starts.len() + opts.restarts,
    ))
}

fn accept(
    dist: Option<DiscreteDist1D>,
    m: usize,
    opts: &SearchOptions,
    lm_residual: f64,
) -> (Option<DiscreteDist1D>, f64) {
    match dist {
        Some(d) => {
            let gap = max_gap(&d, m);
            if gap <= opts.tol && verify_by_raw_moments(&d, m, opts.tol) {
                (Some(d), gap)
            } else {
                (None, gap)
            }
        }
        None => (None, lm_residual),
    }
}

fn found_result(
    k: usize,
    free_count: usize,
    m: usize,
    tol: f64,
    dist: DiscreteDist1D,
    restarts_used: usize,
) -> DesignResult {
    DesignResult {
        status: DesignStatus::Found,
        k,
        free_count,
        m,
        tol,
        residual: max_gap(&dist, m),
        dist: Some(dist),
        restarts_used,
        certificate: None,
    }
}

/// `m >= k`: the first `k` moments pin the support down completely.
fn decide_square(k: usize, m: usize, opts: &SearchOptions) -> DesignResult {
    match analyze_square(k) {
        SquareAnalysis::Impossible(cert) => DesignResult {
            status: DesignStatus::Infeasible,
            k,
            free_count: 0,
            m,
            tol: opts.tol,
            dist: None,
            residual: f64::NAN,
            restarts_used: 0,
            certificate: Some(cert),
        },
        SquareAnalysis::Candidate(points) => {
            let Ok(dist) = DiscreteDist1D::uniform(points.clone()) else {
                return DesignResult::unknown(k, 0, m, opts.tol, f64::NAN, 0);
            };
            let gap = max_gap(&dist, m);
            if gap <= opts.tol && verify_by_raw_moments(&dist, m, opts.tol) {
                return found_result(k, 0, m, opts.tol, dist, 0);
            }
            let gaps = dist.moment_gap_profile(m);
            let (worst_i, worst) = gaps
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |acc, (i, &g)| if g > acc.1 { (i + 1, g) } else { acc });
            if worst > 1e-3 {
                let poly = certificate::characteristic_polynomial(k);
                DesignResult {
                    status: DesignStatus::Infeasible,
                    k,
                    free_count: 0,
                    m,
                    tol: opts.tol,
                    dist: None,
                    residual: gap,
                    restarts_used: 0,
                    certificate: Some(Certificate {
                        explanation: format!(
                            "Newton's identities force the support to be the roots of {poly}; that unique candidate misses moment {worst_i} by {worst:.6e}"
                        ),
                        real_roots: k,
                        char_poly: poly,
                    }),
                }
            } else {
                DesignResult::unknown(k, 0, m, opts.tol, gap, 0)
            }
        }
    }
}

fn symmetric_solve(k: usize, m: usize, start: Vec<f64>, opts: &SearchOptions) -> LmOutcome {
    let kf = k as f64;
    let has_zero = k % 2 == 1;
    let orders: Vec<usize> = (2..=m).step_by(2).collect();
    let zero_vals = hermite_values(m, 0.0);
    let model = |a: &[f64]| {
        let mut r = DVector::zeros(orders.len());
        let mut j = DMatrix::zeros(orders.len(), a.len());
        for (row, &i) in orders.iter().enumerate() {
            r[row] = if has_zero { zero_vals[i] / kf } else { 0.0 };
        }
        for (col, &x) in a.iter().enumerate() {
            let h = hermite_values(m, x);
            for (row, &i) in orders.iter().enumerate() {
                r[row] += 2.0 * h[i] / kf;
                j[(row, col)] = 2.0 * (i as f64).sqrt() * h[i - 1] / kf;
            }
        }
        (r, j)
    };
    levenberg_marquardt(
        start,
        model,
        |_| {},
        LmOptions {
            max_iterations: opts.max_iterations,
            target: opts.tol * 1e-2,
            ..LmOptions::default()
        },
    )
}

fn assemble_symmetric(k: usize, half: &[f64], min_separation: f64) -> Option<DiscreteDist1D> {
    let mut pts: Vec<f64> = half.iter().flat_map(|&a| [-a.abs(), a.abs()]).collect();
    if k % 2 == 1 {
        pts.push(0.0);
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    DiscreteDist1D::with_separation(pts, vec![1.0 / k as f64; k], 0, min_separation).ok()
}

fn gauss_hermite_start(k: usize, free_count: usize) -> (Vec<f64>, Vec<f64>) {
    let rule = GaussHermiteRule::new(k).expect("k >= 1");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| rule.weights[b].total_cmp(&rule.weights[a]));
    let pts = order.iter().map(|&i| rule.nodes[i]).collect();
    let free = order[..free_count].iter().map(|&i| rule.weights[i]).collect();
    (pts, free)
}

fn split_warm_start(d: &DiscreteDist1D, free_count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut free_w: Vec<f64> = d.weights()[..d.free_count().min(free_count)].to_vec();
    let shared = d.weights()[d.len() - 1];
    while free_w.len() < free_count {
        free_w.push(shared);
    }
    (d.points().to_vec(), free_w)
}

/// Variables: `k` locations followed by `free_count` free weights.
fn mostly_uniform_solve(
    k: usize,
    free_count: usize,
    m: usize,
    pts: Vec<f64>,
    free_w: Vec<f64>,
    opts: &SearchOptions,
) -> LmOutcome {
    let shared_n = (k - free_count) as f64;
    let mut x0 = pts;
    x0.extend(free_w);
    let model = |v: &[f64]| {
        let (mu, w) = v.split_at(k);
        let shared = (1.0 - w.iter().sum::<f64>()) / shared_n;
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, v.len());
        let mut shared_sum = vec![0.0; m + 1];
        let values: Vec<Vec<f64>> = mu.iter().map(|&x| hermite_values(m, x)).collect();
        for (p, h) in values.iter().enumerate().skip(free_count) {
            for i in 1..=m {
                shared_sum[i] += h[i];
            }
            for i in 1..=m {
                j[(i - 1, p)] = shared * (i as f64).sqrt() * h[i - 1];
            }
        }
        for i in 1..=m {
            r[i - 1] = shared * shared_sum[i];
        }
        for (f, &wf) in w.iter().enumerate() {
            let h = &values[f];
            for i in 1..=m {
                r[i - 1] += wf * h[i];
                j[(i - 1, f)] = wf * (i as f64).sqrt() * h[i - 1];
                j[(i - 1, k + f)] = h[i] - shared_sum[i] / shared_n;
            }
        }
        (r, j)
    };
    let project = |v: &mut [f64]| {
        let w = &mut v[k..];
        for x in w.iter_mut() {
            *x = x.clamp(0.0, 1.0);
        }
        let total: f64 = w.iter().sum();
        if total > 1.0 - 1e-9 {
            let s = (1.0 - 1e-9) / total;
            w.iter_mut().for_each(|x| *x *= s);
        }
    };
    levenberg_marquardt(
        x0,
        model,
        project,
        LmOptions {
            max_iterations: opts.max_iterations,
            target: opts.tol * 1e-2,
            ..LmOptions::default()
        },
    )
}

fn assemble_mostly_uniform(k: usize, free_count: usize, v: &[f64], min_separation: f64) -> Option<DiscreteDist1D> {
    let (mu, w) = v.split_at(k);
    let shared = (1.0 - w.iter().sum::<f64>()) / (k - free_count) as f64;
    if shared < 0.0 || w.iter().any(|&x| x < 0.0) {
        return None;
    }
    let mut weights = w.to_vec();
    weights.extend(std::iter::repeat_n(shared, k - free_count));
    // keep the free points first but sort each block
    let mut free: Vec<(f64, f64)> = mu[..free_count]
        .iter()
        .copied()
        .zip(weights[..free_count].iter().copied())
        .collect();
    free.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut rest: Vec<f64> = mu[free_count..].to_vec();
    rest.sort_by(|a, b| a.total_cmp(b));
    let points: Vec<f64> = free.iter().map(|p| p.0).chain(rest).collect();
    let weights: Vec<f64> = free
        .iter()
        .map(|p| p.1)
        .chain(std::iter::repeat_n(shared, k - free_count))
        .collect();
    DiscreteDist1D::with_separation(points, weights, free_count, min_separation).ok()
}

/// Largest `m` whose search returns Found, with the status that stopped the
/// scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchableMoments {
    pub k: usize,
    pub free_count: usize,
    pub m_star: usize,
    /// Status at `m_star + 1` (Infeasible, Unknown, or Found if the cap hit).
    pub stop_status: DesignStatus,
    pub witness: Option<DiscreteDist1D>,
}

/// Budget for [`max_matchable_moments`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentBudget {
    pub restarts: usize,
    pub max_m: usize,
    pub seed: u64,
}

impl Default for MomentBudget {
    fn default() -> Self {
        Self {
            restarts: 12,
            max_m: 48,
            seed: 0,
        }
    }
}

/// Scans `m = 1, 2, ...` until the search stops returning Found.
///
/// Each accepted design seeds the next search; the Gauss–Hermite rule of `k`
/// nodes is tried as a witness whenever its weights fit the shape (one free
/// weight per point except a shared block).
pub fn max_matchable_moments(k: usize, free_count: usize, tol: f64, budget: &MomentBudget) -> Result<MatchableMoments> {
    if k < 2 {
        return Err(Error::invalid("k must be at least 2"));
    }
    if free_count >= k {
        return Err(Error::invalid("need 0 <= k' < k"));
    }
    let opts = SearchOptions::new(tol, budget.restarts, budget.seed);
    let mut witness: Option<DiscreteDist1D> = None;
    let mut m_star = 0;
    let mut stop = DesignStatus::Found;
    let quad_witness = quadrature_witness(k, free_count);
    for m in 1..=budget.max_m {
        let mut warm: Vec<DiscreteDist1D> = Vec::new();
        if let Some(q) = &quad_witness {
            warm.push(q.clone());
        }
        if let Some(w) = &witness {
            warm.push(w.clone());
        }
        let result = if free_count == 0 {
            find_uniform_design(k, m, &opts)?
        } else {
            find_mostly_uniform_design_from(k, free_count, m, &opts, &warm)?
        };
        if result.is_found() {
            m_star = m;
            witness = result.dist;
        } else {
            stop = result.status;
            break;
        }
    }
    Ok(MatchableMoments {
        k,
        free_count,
        m_star,
        stop_status: stop,
        witness,
    })
}

/// Gauss–Hermite rule of `k` nodes reshaped as a mostly-uniform law, if at
/// most `k - free_count` of its weights are equal (only possible for
/// `k - free_count <= 2` by symmetry).
fn quadrature_witness(k: usize, free_count: usize) -> Option<DiscreteDist1D> {
    if free_count == 0 || k - free_count > 2 {
        return None;
    }
    let rule = GaussHermiteRule::new(k).ok()?;
    // shared block: the two outermost nodes (equal weights by symmetry), or
    // any single node
    let shared_idx: Vec<usize> = if k - free_count == 2 {
        vec![0, k - 1]
    } else {
        vec![k - 1]
    };
    let mut points: Vec<f64> = Vec::with_capacity(k);
    let mut weights: Vec<f64> = Vec::with_capacity(k);
    for i in 0..k {
        if !shared_idx.contains(&i) {
            points.push(rule.nodes[i]);
            weights.push(rule.weights[i]);
        }
    }
    for &i in &shared_idx {
        points.push(rule.nodes[i]);
        weights.push(rule.weights[i]);
    }
    DiscreteDist1D::with_separation(points, weights, free_count, 0.0).ok()
}
