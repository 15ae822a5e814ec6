//! The moment-tensor distinguisher.
//!
//! One check at order `i` draws `n` samples, rejects immediately if some
//! sample norm exceeds the norm threshold `T`, and otherwise compares the
//! empirical order-`i` tensor with the Gaussian one entrywise. The full test
//! runs orders `1..=m+1`, repeats each check `R` times and stops at the first
//! order whose majority says H1.
//!
//! Thresholds normally come from [`calibrate_thresholds`]: empirical null
//! quantiles of the entry gap. [`worst_case_thresholds`] gives the worst-case
//! constants instead; they are so small that sampling noise alone exceeds
//! them at any feasible `n`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pancakes::{sample_null, Sampler};
use crate::rng::{stream_id, stream_rng};
use crate::tensor::{empirical_tensors, gaussian_tensor, max_entry_gap, SymmetricTensor};

/// Default constant in the order budget `ceil(c (log2 k + k'))`.
pub const DEFAULT_ORDER_CONSTANT: f64 = 3.0;
pub const MIN_CALIBRATION_TRIALS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    H0,
    H1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    /// Order budget `m`; orders `1..=m+1` are checked.
    pub order_budget: usize,
    /// Target failure probability.
    pub tau: f64,
    /// Samples per check.
    pub n: usize,
    /// `theta_i` for `i = 1..=m+1` (index 0 is order 1).
    pub entry_thresholds: Vec<f64>,
    pub norm_threshold: f64,
    /// Declared minimum mixture weight.
    pub min_weight: f64,
    /// Votes per order; odd.
    pub repetitions: usize,
    pub seed: u64,
}

impl TestConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::field("tau", "must lie in (0, 1)"));
        }
        if self.n == 0 {
            return Err(Error::field("n", "must be at least 1"));
        }
        if self.repetitions.is_multiple_of(2) {
            return Err(Error::field("repetitions", "must be odd"));
        }
        if self.entry_thresholds.len() < self.order_budget + 1 {
            return Err(Error::field(
                "entry_thresholds",
                format!(
                    "need {} thresholds, got {}",
                    self.order_budget + 1,
                    self.entry_thresholds.len()
                ),
            ));
        }
        if self.entry_thresholds.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::field("entry_thresholds", "must be positive"));
        }
        if !(self.norm_threshold > 0.0) {
            return Err(Error::field("norm_threshold", "must be positive"));
        }
        if !(self.min_weight > 0.0 && self.min_weight <= 1.0) {
            return Err(Error::field("min_weight", "must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Config from a calibration table; `R` follows from the budget and `tau`.
    pub fn calibrated(cal: &Calibration, order_budget: usize, tau: f64, min_weight: f64, seed: u64) -> Result<Self> {
        let entry_thresholds = (1..=order_budget + 1)
            .map(|i| {
                cal.threshold(i).ok_or_else(|| {
                    Error::field(
                        "entry_thresholds",
                        format!(
                            "calibration has no order {i}; the budget {order_budget} needs orders 1..={}",
                            order_budget + 1
                        ),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = Self {
            order_budget,
            tau,
            n: cal.n,
            entry_thresholds,
            norm_threshold: cal.norm_threshold,
            min_weight,
            repetitions: repetitions_for(order_budget, tau),
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// `ceil(c (log2 k + k'))`, at least 4.
pub fn choose_order_budget(k: usize, free_count: usize, c: f64) -> usize {
    let raw = (c * ((k.max(1) as f64).log2() + free_count as f64)).ceil();
    (raw as usize).max(4)
}

/// Smallest odd `R >= ceil(log2((m + 1) / tau))`.
pub fn repetitions_for(order_budget: usize, tau: f64) -> usize {
    let r = ((order_budget as f64 + 1.0) / tau).log2().ceil().max(1.0) as usize;
    if r.is_multiple_of(2) {
        r + 1
    } else {
        r
    }
}

/// `max(n, ceil(10 ln k / w_min))`: enough samples to see every component.
pub fn coverage_sample_size(n: usize, k: usize, min_weight: f64) -> usize {
    let need = (10.0 * (k.max(2) as f64).ln() / min_weight).ceil() as usize;
    n.max(need)
}

/// `sqrt(d + c1 ln(n trials / (1 - q)) + c2 sqrt(d ln(n / (1 - q))))`.
pub fn calibrated_norm_threshold(d: usize, n: usize, trials: usize, quantile: f64, c1: f64, c2: f64) -> f64 {
    let d = d as f64;
    let miss = 1.0 - quantile;
    let a = (n as f64 * trials as f64 / miss).ln();
    let b = (n as f64 / miss).ln();
    (d + c1 * a + c2 * (d * b).sqrt()).sqrt()
}

/// Worst-case thresholds: every order gets `d^{-c m} (delta/2)^{c m}`
/// (clamped to the smallest positive float), and `T = c sqrt(d ln n)`.
pub fn worst_case_thresholds(d: usize, order_budget: usize, n: usize, delta: f64, c: f64) -> (Vec<f64>, f64) {
    let cm = c * order_budget as f64;
    let ln_theta = -cm * (d as f64).ln() + cm * (delta / 2.0).ln();
    let theta = ln_theta.exp().max(f64::MIN_POSITIVE);
    let norm = c * (d as f64 * (n.max(2) as f64).ln()).sqrt();
    (vec![theta; order_budget + 1], norm)
}

/// Result of one order-`i` check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub order: usize,
    pub repetition: usize,
    pub hypothesis: Hypothesis,
    pub norm_fired: bool,
    pub max_norm: f64,
    /// Largest entry gap and where it occurs (absent when the norm screen
    /// fired first).
    pub gap: Option<f64>,
    pub threshold: f64,
    pub entry: Option<Vec<usize>>,
}

/// Per-order voting summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderTrace {
    pub order: usize,
    pub h0_votes: usize,
    pub h1_votes: usize,
    pub records: Vec<CheckRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub hypothesis: Hypothesis,
    pub firing_order: Option<usize>,
    pub firing_entry: Option<Vec<usize>>,
    pub trace: Vec<OrderTrace>,
}

impl Verdict {
    /// One JSON object per check, in order.
    pub fn json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for t in &self.trace {
            for r in &t.records {
                out.push_str(&serde_json::to_string(r)?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Cached Gaussian tensors for orders `1..=max`.
pub struct GaussianTensors {
    d: usize,
    tensors: Vec<SymmetricTensor>,
}

impl GaussianTensors {
    pub fn new(d: usize, max_order: usize) -> Result<Self> {
        let tensors = (1..=max_order).map(|i| gaussian_tensor(d, i)).collect::<Result<_>>()?;
        Ok(Self { d, tensors })
    }

    pub fn get(&self, order: usize) -> &SymmetricTensor {
        &self.tensors[order - 1]
    }
}

/// Single order-`order` check on a fresh sample drawn with `sample_seed`.
pub fn check_order(
    source: &dyn Sampler,
    order: usize,
    cfg: &TestConfig,
    gaussian: &GaussianTensors,
    sample_seed: u64,
) -> Result<CheckRecord> {
    if order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if gaussian.d != source.dim() {
        return Err(Error::ShapeMismatch(
            "gaussian tensors built for another dimension".into(),
        ));
    }
    let threshold = *cfg
        .entry_thresholds
        .get(order - 1)
        .ok_or_else(|| Error::invalid(format!("no threshold for order {order}")))?;
    let x = source.sample(cfg.n, sample_seed);
    let max_norm = x.rows().into_iter().map(|r| r.dot(&r)).fold(0.0f64, f64::max).sqrt();
    let mut record = CheckRecord {
        order,
        repetition: 0,
        hypothesis: Hypothesis::H1,
        norm_fired: max_norm > cfg.norm_threshold,
        max_norm,
        gap: None,
        threshold,
        entry: None,
    };
    if record.norm_fired {
        return Ok(record);
    }
    let empirical = empirical_tensors(x.view(), order)?.pop().expect("order >= 1");
    let (gap, entry) = max_entry_gap(&empirical, gaussian.get(order))?;
    record.gap = Some(gap);
    record.entry = Some(entry);
    record.hypothesis = if gap > threshold {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    };
    Ok(record)
}

/// Seed of the sample used by repetition `rep` at `order`.
fn check_seed(seed: u64, order: usize, rep: usize) -> u64 {
    stream_rng(seed, stream_id(order as u64, rep as u64)).random()
}

/// Orders `1..=m+1`, `R` votes each; H1 at the first order with an H1
/// majority.
pub fn run_test(source: &dyn Sampler, cfg: &TestConfig) -> Result<Verdict> {
    cfg.validate()?;
    let gaussian = GaussianTensors::new(source.dim(), cfg.order_budget + 1)?;
    run_test_with(source, cfg, &gaussian)
}

/// [`run_test`] reusing precomputed Gaussian tensors.
pub fn run_test_with(source: &dyn Sampler, cfg: &TestConfig, gaussian: &GaussianTensors) -> Result<Verdict> {
    let mut trace = Vec::new();
    for order in 1..=cfg.order_budget + 1 {
        let records: Vec<CheckRecord> = (0..cfg.repetitions)
            .into_par_iter()
            .map(|rep| {
                let mut r = check_order(source, order, cfg, gaussian, check_seed(cfg.seed, order, rep))?;
                r.repetition = rep;
                Ok(r)
            })
            .collect::<Result<_>>()?;
        let h1_votes = records.iter().filter(|r| r.hypothesis == Hypothesis::H1).count();
        let h0_votes = records.len() - h1_votes;
        let fired = h1_votes > h0_votes;
        let entry = records
            .iter()
            .filter(|r| r.hypothesis == Hypothesis::H1)
            .find_map(|r| r.entry.clone());
        trace.push(OrderTrace {
            order,
            h0_votes,
            h1_votes,
            records,
        });
        if fired {
            return Ok(Verdict {
                hypothesis: Hypothesis::H1,
                firing_order: Some(order),
                firing_entry: entry,
                trace,
            });
        }
    }
    Ok(Verdict {
        hypothesis: Hypothesis::H0,
        firing_order: None,
        firing_entry: None,
        trace,
    })
}

/// Most frequent vote (`votes` should have odd length).
pub fn majority(votes: &[Hypothesis]) -> Hypothesis {
    let h1 = votes.iter().filter(|&&v| v == Hypothesis::H1).count();
    if 2 * h1 > votes.len() {
        Hypothesis::H1
    } else {
        Hypothesis::H0
    }
}

/// Hoeffding bound `exp(-2 R (1/2 - eps)^2)` on the voted error.
pub fn majority_error_bound(eps: f64, repetitions: usize) -> f64 {
    (-2.0 * repetitions as f64 * (0.5 - eps).powi(2)).exp()
}

/// One row of the calibration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub d: usize,
    pub order: usize,
    pub n: usize,
    pub quantile: f64,
    pub trials: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub d: usize,
    pub n: usize,
    pub quantile: f64,
    pub trials: usize,
    pub seed: u64,
    pub norm_threshold: f64,
    pub rows: Vec<CalibrationRow>,
}

impl Calibration {
    pub fn threshold(&self, order: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.order == order).map(|r| r.threshold)
    }
}

/// Null-quantile thresholds: for each order, the `quantile` order statistic
/// of the max entry gap over `trials` independent null samples of size `n`.
pub fn calibrate_thresholds(
    d: usize,
    orders: &[usize],
    n: usize,
    trials: usize,
    quantile: f64,
    seed: u64,
) -> Result<Calibration> {
    if trials < MIN_CALIBRATION_TRIALS {
        return Err(Error::field(
            "trials",
            format!("need at least {MIN_CALIBRATION_TRIALS} trials, got {trials}"),
        ));
    }
    if !(quantile > 0.5 && quantile < 1.0) {
        return Err(Error::field("quantile", "must lie in (0.5, 1)"));
    }
    if n == 0 || d == 0 {
        return Err(Error::invalid("n and d must be positive"));
    }
    let mut orders: Vec<usize> = orders.to_vec();
    orders.sort_unstable();
    orders.dedup();
    let max_order = *orders
        .last()
        .ok_or_else(|| Error::field("orders", "must be non-empty"))?;
    if orders[0] == 0 {
        return Err(Error::field("orders", "must be at least 1"));
    }
    let gaussian = GaussianTensors::new(d, max_order)?;

    let gaps: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let sample_seed: u64 = stream_rng(seed, stream_id(u64::MAX - 1, trial as u64)).random();
            let x = sample_null(d, n, sample_seed);
            let tensors = empirical_tensors(x.view(), max_order)?;
            orders
                .iter()
                .map(|&i| max_entry_gap(&tensors[i - 1], gaussian.get(i)).map(|g| g.0))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let rank = ((quantile * trials as f64).ceil() as usize).clamp(1, trials) - 1;
    let rows = orders
        .iter()
        .enumerate()
        .map(|(col, &order)| {
            let mut column: Vec<f64> = gaps.iter().map(|g| g[col]).collect();
            column.sort_by(|a, b| a.total_cmp(b));
            CalibrationRow {
                d,
                order,
                n,
                quantile,
                trials,
                threshold: column[rank],
            }
        })
        .collect();
    Ok(Calibration {
        d,
        n,
        quantile,
        trials,
        seed,
        norm_threshold: calibrated_norm_threshold(d, n, trials, quantile, 4.0, 4.0),
        rows,
    })
}

/// Seed of trial `t` in a repeated experiment rooted at `seed`.
pub fn trial_seed(seed: u64, t: usize) -> u64 {
    stream_rng(seed, stream_id(u64::MAX - 2, t as u64)).random()
}

/// Verdicts of `trials` independent runs; trial `t` uses [`trial_seed`].
pub fn trial_verdicts(source: &dyn Sampler, cfg: &TestConfig, trials: usize, seed: u64) -> Result<Vec<Verdict>> {
    let gaussian = GaussianTensors::new(source.dim(), cfg.order_budget + 1)?;
    (0..trials)
        .map(|t| run_test_with(source, &cfg.with_seed(trial_seed(seed, t)), &gaussian))
        .collect()
}

/// Fraction of `trials` runs (seeds derived from `seed`) that return
/// `target`, with a histogram of firing orders.
pub fn hypothesis_rate(
    source: &dyn Sampler,
    cfg: &TestConfig,
    trials: usize,
    seed: u64,
    target: Hypothesis,
) -> Result<(f64, BTreeMap<Option<usize>, usize>)> {
    let verdicts = trial_verdicts(source, cfg, trials, seed)?;
    let hits = verdicts.iter().filter(|v| v.hypothesis == target).count();
    let mut firing = BTreeMap::new();
    for v in &verdicts {
        *firing.entry(v.firing_order).or_insert(0) += 1;
    }
    Ok((hits as f64 / trials.max(1) as f64, firing))
}
