//! Symmetric moment tensors in canonical storage.
//!
//! An order-`i` symmetric tensor over `R^d` is stored once per multiset of
//! indices, i.e. per nondecreasing multi-index `a_1 <= ... <= a_i`, in
//! lexicographic order. Equivalently each entry is keyed by its count vector
//! `c` (`c_j` = how often index `j` occurs) and stands for `i! / prod c_j!`
//! entries of the dense tensor.

use std::sync::Arc;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial, double_factorial, ln_factorial, CompensatedSum};

/// Rows per accumulation block; fixed so that sums do not depend on the
/// thread count.
const BLOCK_ROWS: usize = 512;
/// Blocks accumulated in parallel before a sequential merge.
const BLOCK_GROUP: usize = 16;

/// Number of nondecreasing length-`len` sequences over `n` symbols.
fn multichoose(n: usize, len: usize) -> usize {
    if len == 0 {
        return 1;
    }
    if n == 0 {
        return 0;
    }
    binomial(n + len - 1, len).round() as usize
}

/// Number of canonical entries of an order-`order` tensor over `R^d`.
pub fn canonical_len(d: usize, order: usize) -> usize {
    multichoose(d, order)
}

/// Lexicographic rank of a nondecreasing multi-index.
pub fn rank(d: usize, idx: &[usize]) -> usize {
    let len = idx.len();
    let mut r = 0;
    let mut lo = 0;
    for (p, &a) in idx.iter().enumerate() {
        for v in lo..a {
            r += multichoose(d - v, len - p - 1);
        }
        lo = a;
    }
    r
}

/// Iterator over nondecreasing multi-indices in lexicographic order.
pub struct MultiIndices {
    d: usize,
    current: Option<Vec<usize>>,
}

impl Iterator for MultiIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        match next.iter().rposition(|&a| a + 1 < self.d) {
            Some(p) => {
                let v = next[p] + 1;
                next[p..].iter_mut().for_each(|a| *a = v);
                self.current = Some(next);
            }
            None => self.current = None,
        }
        Some(out)
    }
}

pub fn multi_indices(d: usize, order: usize) -> MultiIndices {
    MultiIndices {
        d,
        current: if d == 0 && order > 0 {
            None
        } else {
            Some(vec![0; order])
        },
    }
}

pub fn counts_of(d: usize, idx: &[usize]) -> Vec<usize> {
    let mut c = vec![0; d];
    for &a in idx {
        c[a] += 1;
    }
    c
}

pub fn index_of(counts: &[usize]) -> Vec<usize> {
    counts
        .iter()
        .enumerate()
        .flat_map(|(j, &c)| std::iter::repeat_n(j, c))
        .collect()
}

/// Dense entries represented by one canonical entry: `i! / prod c_j!`.
pub fn multiplicity(counts: &[usize]) -> f64 {
    let i: usize = counts.iter().sum();
    (ln_factorial(i) - counts.iter().map(|&c| ln_factorial(c)).sum::<f64>())
        .exp()
        .round()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricTensor {
    d: usize,
    order: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    counts: Vec<usize>,
    value: f64,
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    d: usize,
    order: usize,
    entries: Vec<TensorEntry>,
}

impl Serialize for SymmetricTensor {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TensorRepr {
            d: self.d,
            order: self.order,
            entries: self
                .entries()
                .map(|(idx, value)| TensorEntry {
                    counts: counts_of(self.d, &idx),
                    value,
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SymmetricTensor {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = TensorRepr::deserialize(de)?;
        let mut t = SymmetricTensor::zeros(r.d, r.order);
        for e in r.entries {
            if e.counts.len() != r.d || e.counts.iter().sum::<usize>() != r.order {
                return Err(D::Error::custom("entry counts do not match d and order"));
            }
            let pos = rank(r.d, &index_of(&e.counts));
            t.values[pos] = e.value;
        }
        Ok(t)
    }
}

impl SymmetricTensor {
    pub fn zeros(d: usize, order: usize) -> Self {
        Self {
            d,
            order,
            values: vec![0.0; canonical_len(d, order)],
        }
    }

    /// Entry for every canonical count vector from `f(counts)`.
    pub fn from_fn<F: FnMut(&[usize]) -> f64>(d: usize, order: usize, mut f: F) -> Self {
        let values = multi_indices(d, order).map(|idx| f(&counts_of(d, &idx))).collect();
        Self { d, order, values }
    }

    /// `lambda v^{(x) order}`.
    pub fn rank_one(v: &[f64], order: usize, lambda: f64) -> Self {
        Self::from_fn(v.len(), order, |c| {
            lambda * c.iter().zip(v).map(|(&cj, vj)| vj.powi(cj as i32)).product::<f64>()
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Canonical values in lexicographic key order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entry at any (not necessarily sorted) multi-index.
    pub fn get(&self, idx: &[usize]) -> f64 {
        assert_eq!(idx.len(), self.order, "multi-index length must equal the order");
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        self.values[rank(self.d, &sorted)]
    }

    pub fn get_counts(&self, counts: &[usize]) -> f64 {
        self.get(&index_of(counts))
    }

    /// `(sorted multi-index, value)` pairs in storage order.
    pub fn entries(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        multi_indices(self.d, self.order).zip(self.values.iter().copied())
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.d != other.d || self.order != other.order {
            return Err(Error::ShapeMismatch(format!(
                "(d={}, order={}) vs (d={}, order={})",
                self.d, self.order, other.d, other.order
            )));
        }
        Ok(())
    }
}

/// `E_{x ~ N(0, I_d)}[x^{(x) order}]`: `prod_j (c_j - 1)!!` when every count is
/// even, else 0.
pub fn gaussian_tensor(d: usize, order: usize) -> Result<SymmetricTensor> {
    if order == 0 {
        return Err(Error::invalid("tensor order must be at least 1"));
    }
    Ok(SymmetricTensor::from_fn(d, order, |c| {
        if c.iter().all(|cj| cj % 2 == 0) {
            c.iter().map(|&cj| double_factorial(cj as i64 - 1)).product()
        } else {
            0.0
        }
    }))
}

/// `max |M - M'|` over canonical entries with the count vector where it is
/// attained (the first one on ties).
pub fn max_entry_gap(a: &SymmetricTensor, b: &SymmetricTensor) -> Result<(f64, Vec<usize>)> {
    a.check_shape(b)?;
    let mut best = (0.0f64, 0usize);
    for (i, (x, y)) in a.values.iter().zip(&b.values).enumerate() {
        let g = (x - y).abs();
        if g > best.0 || (i == 0 && g >= best.0) {
            best = (g, i);
        }
    }
    let key = multi_indices(a.d, a.order).nth(best.1).unwrap_or_default();
    Ok((best.0, counts_of(a.d, &key)))
}

/// Dense Frobenius norm of `M - M'` computed from canonical entries.
pub fn frobenius_gap(a: &SymmetricTensor, b: &SymmetricTensor) -> Result<f64> {
    a.check_shape(b)?;
    let mut acc = CompensatedSum::new();
    for ((idx, x), y) in a.entries().zip(&b.values) {
        let diff = x - y;
        acc.add(multiplicity(&counts_of(a.d, &idx)) * diff * diff);
    }
    Ok(acc.value().sqrt())
}

/// For each order `1..=max_order`, the last index of every canonical key;
/// drives the prefix recursion `x^{key} = x^{prefix} * x_{last}`.
#[derive(Debug)]
struct Layout {
    d: usize,
    /// `last[L]` lists the final index of each length-`L` key (`last[0]` is
    /// the empty key, treated as ending in 0).
    last: Vec<Vec<u32>>,
}

impl Layout {
    fn new(d: usize, max_order: usize) -> Self {
        let mut last = vec![vec![0u32]];
        for l in 1..=max_order {
            let prev = &last[l - 1];
            let mut cur = Vec::with_capacity(canonical_len(d, l));
            for &p in prev {
                cur.extend(p..d as u32);
            }
            last.push(cur);
        }
        Self { d, last }
    }

    /// Fills `levels[L]` with the monomials of `x` for every key of length
    /// `L`.
    fn monomials(&self, x: &[f64], levels: &mut [Vec<f64>]) {
        levels[0][0] = 1.0;
        for l in 1..levels.len() {
            let (done, rest) = levels.split_at_mut(l);
            let prev = &done[l - 1];
            let cur = &mut rest[0];
            let mut pos = 0;
            for (pv, &p) in prev.iter().zip(&self.last[l - 1]) {
                for &xv in &x[p as usize..self.d] {
                    cur[pos] = pv * xv;
                    pos += 1;
                }
            }
        }
    }
}

/// Empirical tensors `(1/n) sum_rows x^{(x) i}` for every order
/// `i = 1..=max_order` in one pass over the samples.
pub fn empirical_tensors(samples: ArrayView2<'_, f64>, max_order: usize) -> Result<Vec<SymmetricTensor>> {
    let (n, d) = samples.dim();
    if n == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    if max_order == 0 {
        return Ok(Vec::new());
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("samples must be finite"));
    }
    let layout = Arc::new(Layout::new(d, max_order));
    let sizes: Vec<usize> = layout.last.iter().map(Vec::len).collect();
    let total: usize = sizes[1..].iter().sum();

    let blocks: Vec<ArrayView2<'_, f64>> = samples.axis_chunks_iter(Axis(0), BLOCK_ROWS).collect();
    let mut acc = vec![CompensatedSum::new(); total];
    for group in blocks.chunks(BLOCK_GROUP) {
        let partials: Vec<Vec<CompensatedSum>> = group
            .par_iter()
            .map(|block| {
                let mut levels: Vec<Vec<f64>> = sizes.iter().map(|&s| vec![0.0; s]).collect();
                let mut part = vec![CompensatedSum::new(); total];
                let mut row = vec![0.0; d];
                for r in block.rows() {
                    row.iter_mut().zip(r.iter()).for_each(|(a, b)| *a = *b);
                    layout.monomials(&row, &mut levels);
                    let flat = levels[1..].iter().flat_map(|l| l.iter());
                    for (a, v) in part.iter_mut().zip(flat) {
                        a.add(*v);
                    }
                }
                part
            })
            .collect();
        for part in &partials {
            for (a, p) in acc.iter_mut().zip(part) {
                a.merge(p);
            }
        }
    }

    // divide rather than multiply by 1/n: one rounding, so exactly
    // representable sums give exactly rounded means
    let n_f = n as f64;
    let mut out = Vec::with_capacity(max_order);
    let mut offset = 0;
    for (order, &size) in sizes.iter().enumerate().skip(1) {
        let values: Vec<f64> = acc[offset..offset + size].iter().map(|a| a.value() / n_f).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("order-{order} moments overflowed")));
        }
        out.push(SymmetricTensor { d, order, values });
        offset += size;
    }
    Ok(out)
}

/// Empirical tensor of a single order.
pub fn empirical_tensor(samples: ArrayView2<'_, f64>, order: usize) -> Result<SymmetricTensor> {
    if order == 0 {
        return Err(Error::invalid("tensor order must be at least 1"));
    }
    Ok(empirical_tensors(samples, order)?.pop().expect("order >= 1"))
}

/// Dense row-major expansion (`d^order` entries); for tests and small cases.
pub fn to_dense(t: &SymmetricTensor) -> Vec<f64> {
    let total = t.d.pow(t.order as u32);
    (0..total)
        .map(|flat| {
            let mut idx = vec![0; t.order];
            let mut rem = flat;
            for p in (0..t.order).rev() {
                idx[p] = rem % t.d;
                rem /= t.d;
            }
            t.get(&idx)
        })
        .collect()
}

/// Samples as an owned matrix, for callers holding rows in other layouts.
pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<Array2<f64>> {
    let d = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::ShapeMismatch("rows have different lengths".into()));
    }
    Array2::from_shape_vec((rows.len(), d), rows.concat()).map_err(|e| Error::ShapeMismatch(e.to_string()))
}
