//! Parallel-pancake instances: `sum_i w_i N(v c_i, I - delta v v^T)` in `R^d`.
//!
//! An instance stores only the one-dimensional base mixture and the unit
//! direction `v`. A row is drawn as `v y + (I - v v^T) z` with `y` from the
//! base and `z ~ N(0, I_d)`, so every direction orthogonal to `v` is exactly
//! standard normal.

use std::path::Path;

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::Gmm1D;
use crate::error::{Error, Result};
use crate::rng::{stream_id, stream_rng, StreamRng};

/// Rows per independently seeded block.
const BLOCK_ROWS: usize = 2048;

const UNIT_TOL: f64 = 1e-12;

/// A source of `n x d` sample matrices, deterministic in `seed`.
pub trait Sampler: Sync {
    fn dim(&self) -> usize;

    fn sample(&self, n: usize, seed: u64) -> Array2<f64>;

    /// Smallest mixture weight, if known (used to size the norm screen).
    fn min_weight(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Direction {
    Explicit(Vec<f64>),
    /// Normalized Gaussian vector drawn from the instance seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct PancakeInstance {
    d: usize,
    v: Vec<f64>,
    base: Gmm1D,
    seed: u64,
}

/// On-disk layout; every field is optional here so that a missing one can be
/// reported by name.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceRepr {
    d: Option<usize>,
    v: Option<Vec<f64>>,
    centers: Option<Vec<f64>>,
    weights: Option<Vec<f64>>,
    delta: Option<f64>,
    seed: Option<u64>,
}

fn require<T>(value: Option<T>, name: &str) -> Result<T> {
    value.ok_or_else(|| Error::field(name, "missing"))
}

impl TryFrom<InstanceRepr> for PancakeInstance {
    type Error = Error;

    fn try_from(r: InstanceRepr) -> Result<Self> {
        let d = require(r.d, "d")?;
        let v = require(r.v, "v")?;
        let centers = require(r.centers, "centers")?;
        let weights = require(r.weights, "weights")?;
        let delta = require(r.delta, "delta")?;
        let seed = require(r.seed, "seed")?;
        let base = Gmm1D::new(centers, weights, delta)?;
        PancakeInstance::from_parts(d, v, base, seed)
    }
}

impl From<PancakeInstance> for InstanceRepr {
    fn from(p: PancakeInstance) -> Self {
        InstanceRepr {
            d: Some(p.d),
            v: Some(p.v),
            centers: Some(p.base.centers().to_vec()),
            weights: Some(p.base.weights().to_vec()),
            delta: Some(p.base.delta()),
            seed: Some(p.seed),
        }
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::field("delta", format!("must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

impl PancakeInstance {
    /// Validates stored parts without renormalizing `v`.
    pub fn from_parts(d: usize, v: Vec<f64>, base: Gmm1D, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(Error::field("d", format!("must be at least 2, got {d}")));
        }
        if v.len() != d {
            return Err(Error::field("v", format!("length {} does not match d = {d}", v.len())));
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if !((norm - 1.0).abs() <= UNIT_TOL) {
            return Err(Error::field("v", format!("must be a unit vector, norm is {norm}")));
        }
        check_delta(base.delta())?;
        Ok(Self { d, v, base, seed })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn base(&self) -> &Gmm1D {
        &self.base
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn delta(&self) -> f64 {
        self.base.delta()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let repr: InstanceRepr = serde_json::from_str(text)?;
        repr.try_into()
    }

    /// Rows drawn through the covariance form `v c_i + L z` with
    /// `L = I - (1 - sqrt(1 - delta)) v v^T`, `L L^T = I - delta v v^T`.
    ///
    /// Same law as [`Sampler::sample`]; kept as an independent check.
    pub fn sample_by_covariance(&self, n: usize, seed: u64) -> Array2<f64> {
        let shrink = 1.0 - self.base.variance().sqrt();
        let picker = WeightedIndex::new(self.base.weights()).expect("validated weights");
        fill_blocks(n, self.d, seed, 2, |rng, row| {
            let c = self.base.centers()[picker.sample(rng)];
            for x in row.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let proj: f64 = row.iter().zip(&self.v).map(|(x, v)| x * v).sum();
            for (x, v) in row.iter_mut().zip(&self.v) {
                *x += v * (c - shrink * proj);
            }
        })
    }
}

impl Sampler for PancakeInstance {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        let sigma = self.base.variance().sqrt();
        let picker = WeightedIndex::new(self.base.weights()).expect("validated weights");
        fill_blocks(n, self.d, seed, 1, |rng, row| {
            let c = self.base.centers()[picker.sample(rng)];
            let z: f64 = StandardNormal.sample(rng);
            let y = c + sigma * z;
            for x in row.iter_mut() {
                *x = StandardNormal.sample(rng);
            }
            let proj: f64 = row.iter().zip(&self.v).map(|(x, v)| x * v).sum();
            for (x, v) in row.iter_mut().zip(&self.v) {
                *x += v * (y - proj);
            }
        })
    }

    fn min_weight(&self) -> Option<f64> {
        Some(self.base.min_weight())
    }
}

/// `N(0, I_d)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NullSampler {
    pub d: usize,
}

impl Sampler for NullSampler {
    fn dim(&self) -> usize {
        self.d
    }

    fn sample(&self, n: usize, seed: u64) -> Array2<f64> {
        sample_null(self.d, n, seed)
    }
}

pub fn sample_null(d: usize, n: usize, seed: u64) -> Array2<f64> {
    fill_blocks(n, d, seed, 0, |rng, row| {
        for x in row.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
    })
}

/// Builds the instance for `base` in dimension `d`; explicit directions are
/// normalized.
pub fn make_instance(base: Gmm1D, d: usize, direction: Direction, seed: u64) -> Result<PancakeInstance> {
    if d < 2 {
        return Err(Error::field("d", format!("must be at least 2, got {d}")));
    }
    check_delta(base.delta())?;
    let raw = match direction {
        Direction::Explicit(v) => {
            if v.len() != d {
                return Err(Error::field("v", format!("length {} does not match d = {d}", v.len())));
            }
            v
        }
        Direction::Random => {
            let mut rng = stream_rng(seed, stream_id(u64::MAX, 0));
            (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    };
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::field("v", "direction must be a nonzero finite vector"));
    }
    let v = raw.iter().map(|x| x / norm).collect();
    PancakeInstance::from_parts(d, v, base, seed)
}

/// Unit vector `e_j` in `R^d`.
pub fn basis_vector(d: usize, j: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[j] = 1.0;
    v
}

/// Fills an `n x d` matrix block by block; block `b` uses stream
/// `(kind, b)` so the output does not depend on the thread count.
fn fill_blocks<F>(n: usize, d: usize, seed: u64, kind: u64, row_fn: F) -> Array2<f64>
where
    F: Fn(&mut StreamRng, &mut [f64]) + Sync,
{
    let mut data = vec![0.0; n * d];
    if d == 0 {
        return Array2::from_shape_vec((n, 0), data).expect("shape");
    }
    data.par_chunks_mut(BLOCK_ROWS * d).enumerate().for_each(|(b, chunk)| {
        let mut rng = stream_rng(seed, stream_id(kind, b as u64));
        for row in chunk.chunks_mut(d) {
            row_fn(&mut rng, row);
        }
    });
    Array2::from_shape_vec((n, d), data).expect("shape")
}

/// Draws a fresh sample seed from `rng`.
pub fn next_seed<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    rng.random()
}
