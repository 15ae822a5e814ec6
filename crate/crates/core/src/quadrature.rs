//! Gauss–Hermite quadrature for the standard normal measure.
//!
//! Nodes are the eigenvalues of the symmetric tridiagonal Jacobi matrix of the
//! probabilist's Hermite recurrence (zero diagonal, off-diagonals `sqrt(1..t-1)`),
//! polished by Newton steps on `h_t`. Weights come from the Christoffel function
//! `1 / sum_{k<t} h_k(x)^2`, which keeps full relative accuracy for the tiny
//! tail weights where eigenvector components would not.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermiteRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermiteRule {
    pub fn new(t: usize) -> Result<Self> {
        if t == 0 {
            return Err(Error::invalid("quadrature order must be at least 1"));
        }
        let mut jacobi = DMatrix::<f64>::zeros(t, t);
        for i in 1..t {
            let b = (i as f64).sqrt();
            jacobi[(i - 1, i)] = b;
            jacobi[(i, i - 1)] = b;
        }
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        for x in nodes.iter_mut() {
            for _ in 0..8 {
                let (h_t, h_prev) = last_two(t, *x);
                let deriv = (t as f64).sqrt() * h_prev;
                if deriv == 0.0 {
                    break;
                }
                let step = h_t / deriv;
                *x -= step;
                if step.abs() <= 1e-16 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        // exact mirror symmetry
        for i in 0..t / 2 {
            let a = 0.5 * (nodes[t - 1 - i] - nodes[i]);
            nodes[i] = -a;
            nodes[t - 1 - i] = a;
        }
        if t % 2 == 1 {
            nodes[t / 2] = 0.0;
        }

        let mut weights: Vec<f64> = nodes.iter().map(|&x| 1.0 / christoffel_sum(t, x)).collect();
        for i in 0..t / 2 {
            let w = 0.5 * (weights[i] + weights[t - 1 - i]);
            weights[i] = w;
            weights[t - 1 - i] = w;
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { nodes, weights })
    }

    /// Shared rule of order `t`; rules are built once per process.
    pub fn cached(t: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermiteRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("quadrature cache").get(&t) {
            return Ok(rule.clone());
        }
        let rule = Arc::new(Self::new(t)?);
        cache.lock().expect("quadrature cache").insert(t, rule.clone());
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// `E_{x ~ N(0,1)}[f(x)]`.
    pub fn expect<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let mut acc = CompensatedSum::new();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(x));
        }
        acc.value()
    }
}

/// `(h_t(x), h_{t-1}(x))` by the normalized recurrence.
fn last_two(t: usize, x: f64) -> (f64, f64) {
    let mut prev = 1.0;
    let mut cur = x;
    if t == 0 {
        return (1.0, 0.0);
    }
    for n in 1..t {
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    (cur, prev)
}

fn christoffel_sum(t: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    let mut cur = x;
    let mut acc = 1.0;
    if t >= 2 {
        acc += x * x;
    }
    for n in 1..t.saturating_sub(1) {
        let next = (x * cur - (n as f64).sqrt() * prev) / ((n + 1) as f64).sqrt();
        acc += next * next;
        prev = cur;
        cur = next;
    }
    acc
}
