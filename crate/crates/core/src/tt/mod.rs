//! Tensor Train representation of an unnormalized discrete density.
//!
//! A [`TensorTrain`] stores a `d`-way tensor as a chain of three-way cores,
//! core `i` having shape `(r_{i-1}, n_i, r_i)` with `r_0 = r_d = 1`. The value
//! at a multi-index is the product of the matrix slices selected by each
//! digit. Summation, conditional sampling and log-likelihood gradients are all
//! computed by sweeping interface vectors along the chain, so every operation
//! costs `O(d * n * r^2)` per index instead of touching the full grid.
//!
//! Interface vectors are rescaled to unit max-norm as they are swept. Sampling
//! and log-likelihood gradients depend only on ratios, so the rescaling makes
//! them safe for long chains whose raw products would over- or underflow.

mod io;
mod quantize;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_tt, write_tt};
pub use quantize::QuantizationMap;

/// Floor applied to conditional sampling weights and to densities inside the
/// logarithm.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// A point of a discrete multi-index grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatentIndex(pub Vec<usize>);

impl LatentIndex {
    pub fn new(digits: Vec<usize>) -> Self {
        LatentIndex(digits)
    }

    pub fn digits(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Checks the index against a grid shape.
    pub fn validate(&self, shape: &[usize]) -> Result<()> {
        if self.0.len() != shape.len() {
            return Err(Error::input(format!(
                "index has {} digits, grid has {} modes",
                self.0.len(),
                shape.len()
            )));
        }
        for (pos, (&digit, &mode)) in self.0.iter().zip(shape).enumerate() {
            if digit >= mode {
                return Err(Error::input(format!(
                    "digit {digit} at mode {pos} exceeds mode size {mode}"
                )));
            }
        }
        Ok(())
    }

    /// Parses the `a-b-c` form produced by `Display`.
    pub fn parse(text: &str) -> Result<Self> {
        text.split('-')
            .map(|d| {
                d.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::input(format!("bad index digit {d:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()
            .map(LatentIndex)
    }
}

impl fmt::Display for LatentIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{d}")?;
        }
        Ok(())
    }
}

impl From<Vec<usize>> for LatentIndex {
    fn from(v: Vec<usize>) -> Self {
        LatentIndex(v)
    }
}

/// One three-way core, stored row-major as `[left][mode][right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Core {
    left: usize,
    mode: usize,
    right: usize,
    data: Vec<f64>,
}

impl Core {
    pub fn new(left: usize, mode: usize, right: usize, data: Vec<f64>) -> Result<Self> {
        if left == 0 || right == 0 || mode == 0 {
            return Err(Error::input("core dimensions must be positive"));
        }
        if data.len() != left * mode * right {
            return Err(Error::input(format!(
                "core data has {} values, expected {}x{}x{}",
                data.len(),
                left,
                mode,
                right
            )));
        }
        Ok(Core { left, mode, right, data })
    }

    pub fn filled(left: usize, mode: usize, right: usize, value: f64) -> Self {
        Core { left, mode, right, data: vec![value; left * mode * right] }
    }

    pub fn left(&self) -> usize {
        self.left
    }

    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    fn offset(&self, a: usize, k: usize, b: usize) -> usize {
        (a * self.mode + k) * self.right + b
    }

    #[inline]
    pub fn get(&self, a: usize, k: usize, b: usize) -> f64 {
        self.data[self.offset(a, k, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, k: usize, b: usize, v: f64) {
        let o = self.offset(a, k, b);
        self.data[o] = v;
    }

    /// `row · G[k]`: a left interface pushed through one slice.
    fn push_left(&self, row: &[f64], k: usize, out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.right, 0.0);
        for (a, &ra) in row.iter().enumerate() {
            if ra == 0.0 {
                continue;
            }
            let base = self.offset(a, k, 0);
            for (o, g) in out.iter_mut().zip(&self.data[base..base + self.right]) {
                *o += ra * g;
            }
        }
    }

    /// The core with its mode dimension summed out, as a `left x right` matrix.
    fn mode_sum(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.left * self.right];
        for a in 0..self.left {
            for k in 0..self.mode {
                let base = self.offset(a, k, 0);
                for b in 0..self.right {
                    m[a * self.right + b] += self.data[base + b];
                }
            }
        }
        m
    }
}

fn vec_mat(row: &[f64], mat: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for (a, &ra) in row.iter().enumerate() {
        for (o, m) in out.iter_mut().zip(&mat[a * cols..(a + 1) * cols]) {
            *o += ra * m;
        }
    }
    out
}

fn mat_vec(mat: &[f64], col: &[f64], rows: usize) -> Vec<f64> {
    let cols = col.len();
    (0..rows)
        .map(|a| mat[a * cols..(a + 1) * cols].iter().zip(col).map(|(m, c)| m * c).sum())
        .collect()
}

/// Rescales `v` to unit max-norm in place and returns the removed scale.
/// A zero vector is left untouched and reports scale zero.
fn rescale(v: &mut [f64]) -> f64 {
    let norm = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if norm > 0.0 && norm.is_finite() {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient with respect to every core entry, laid out like the cores.
#[derive(Debug, Clone, PartialEq)]
pub struct TtGradient {
    pub cores: Vec<Vec<f64>>,
    /// The objective whose gradient this is: the weighted mean log-likelihood.
    pub value: f64,
}

impl TtGradient {
    pub fn norm(&self) -> f64 {
        self.cores.iter().flatten().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Chain of three-way cores; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorTrain {
    cores: Vec<Core>,
}

impl TensorTrain {
    /// Builds a train from explicit cores, checking every structural invariant.
    pub fn from_cores(cores: Vec<Core>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::input("tensor train needs at least one core"));
        }
        if cores[0].left != 1 || cores[cores.len() - 1].right != 1 {
            return Err(Error::input("boundary ranks must be 1"));
        }
        for (i, c) in cores.iter().enumerate() {
            if c.mode < 2 {
                return Err(Error::input(format!("mode {i} has size {} (< 2)", c.mode)));
            }
            if i + 1 < cores.len() && c.right != cores[i + 1].left {
                return Err(Error::input(format!(
                    "rank mismatch between cores {i} and {}: {} vs {}",
                    i + 1,
                    c.right,
                    cores[i + 1].left
                )));
            }
            if c.data.iter().any(|v| !v.is_finite()) {
                return Err(Error::input(format!("core {i} holds a non-finite value")));
            }
        }
        Ok(TensorTrain { cores })
    }

    /// Maximal internal ranks representable for `shape`, capped at `rank`.
    pub fn clipped_ranks(shape: &[usize], rank: usize) -> Vec<usize> {
        let d = shape.len();
        let mut ranks = vec![1usize; d + 1];
        for i in 1..d {
            let left: usize = shape[..i].iter().fold(1usize, |p, &n| p.saturating_mul(n));
            let right: usize = shape[i..].iter().fold(1usize, |p, &n| p.saturating_mul(n));
            ranks[i] = rank.min(left).min(right);
        }
        ranks
    }

    fn check_shape(shape: &[usize], rank: usize) -> Result<()> {
        if shape.is_empty() {
            return Err(Error::input("shape must have at least one mode"));
        }
        if let Some(n) = shape.iter().find(|&&n| n < 2) {
            return Err(Error::input(format!("mode size {n} is below 2")));
        }
        if rank < 1 {
            return Err(Error::input("rank must be at least 1"));
        }
        Ok(())
    }

    /// A train that evaluates to the same positive value everywhere.
    ///
    /// Every entry of core `i` is `1 / sqrt(r * n_i)` where `r` is the larger
    /// of the core's two ranks.
    pub fn uniform(shape: &[usize], rank: usize) -> Result<Self> {
        Self::check_shape(shape, rank)?;
        let ranks = Self::clipped_ranks(shape, rank);
        let cores = shape
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let r = ranks[i].max(ranks[i + 1]);
                Core::filled(ranks[i], n, ranks[i + 1], 1.0 / ((r * n) as f64).sqrt())
            })
            .collect();
        TensorTrain::from_cores(cores)
    }

    /// A train with entries drawn uniformly from `[lo, hi)`.
    pub fn random<R: Rng + ?Sized>(shape: &[usize], rank: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        Self::check_shape(shape, rank)?;
        let ranks = Self::clipped_ranks(shape, rank);
        let cores = shape
            .iter()
            .enumerate()
            .map(|(i, &n)| {
                let len = ranks[i] * n * ranks[i + 1];
                let data = (0..len).map(|_| rng.random_range(lo..hi)).collect();
                Core::new(ranks[i], n, ranks[i + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::from_cores(cores)
    }

    pub fn dim(&self) -> usize {
        self.cores.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.mode).collect()
    }

    /// All `d + 1` ranks including the unit boundaries.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r: Vec<usize> = self.cores.iter().map(|c| c.left).collect();
        r.push(1);
        r
    }

    pub fn cores(&self) -> &[Core] {
        &self.cores
    }

    /// Mutable access to one core. Structure cannot change through it, only
    /// values; callers must keep them finite.
    pub fn core_mut(&mut self, i: usize) -> &mut Core {
        &mut self.cores[i]
    }

    /// Number of grid points, saturating at `usize::MAX`.
    pub fn grid_size(&self) -> usize {
        self.cores.iter().fold(1usize, |p, c| p.saturating_mul(c.mode))
    }

    pub fn num_params(&self) -> usize {
        self.cores.iter().map(|c| c.data.len()).sum()
    }

    /// Value at one multi-index: the product of the selected slices.
    pub fn eval(&self, index: &LatentIndex) -> Result<f64> {
        index.validate(&self.shape())?;
        Ok(self.eval_unchecked(index.digits()))
    }

    fn eval_unchecked(&self, digits: &[usize]) -> f64 {
        let mut row = vec![1.0];
        let mut next = Vec::new();
        for (core, &k) in self.cores.iter().zip(digits) {
            core.push_left(&row, k, &mut next);
            std::mem::swap(&mut row, &mut next);
        }
        row[0]
    }

    /// Sum over the whole grid via mode-summed cores.
    pub fn sum(&self) -> f64 {
        let mut row = vec![1.0];
        for core in &self.cores {
            row = vec_mat(&row, &core.mode_sum(), core.right);
        }
        row[0]
    }

    /// Right-to-left partial sums, each rescaled to unit max-norm.
    /// Entry `i` is the interface entering core `i` from the right, so entry
    /// `d` is the scalar `[1]`.
    fn right_sums(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = vec![Vec::new(); d + 1];
        out[d] = vec![1.0];
        for i in (0..d).rev() {
            let core = &self.cores[i];
            let mut v = mat_vec(&core.mode_sum(), &out[i + 1], core.left);
            rescale(&mut v);
            out[i] = v;
        }
        out
    }

    /// Draws `count` indices by sequential conditional sampling.
    ///
    /// At each mode the conditional weights are the absolute values of the
    /// contraction of the current left interface with the right partial sums,
    /// floored at [`DENSITY_FLOOR`] relative to the largest weight.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<LatentIndex>> {
        if count == 0 {
            return Err(Error::input("sample count must be at least 1"));
        }
        let right = self.right_sums();
        let mut out = Vec::with_capacity(count);
        let mut weights = Vec::new();
        let mut row = Vec::new();
        let mut next = Vec::new();
        for _ in 0..count {
            row.clear();
            row.push(1.0);
            let mut digits = Vec::with_capacity(self.dim());
            for (i, core) in self.cores.iter().enumerate() {
                weights.clear();
                for k in 0..core.mode {
                    core.push_left(&row, k, &mut next);
                    weights.push(dot(&next, &right[i + 1]).abs());
                }
                let k = draw(&mut weights, rng);
                core.push_left(&row, k, &mut next);
                rescale(&mut next);
                std::mem::swap(&mut row, &mut next);
                digits.push(k);
            }
            out.push(LatentIndex(digits));
        }
        Ok(out)
    }

    /// Gradient of the mean log-likelihood of `indices` under the sampling
    /// distribution; see [`TensorTrain::weighted_log_likelihood_grad`].
    pub fn log_likelihood_grad(&self, indices: &[LatentIndex]) -> Result<TtGradient> {
        let weights = vec![1.0; indices.len()];
        self.weighted_log_likelihood_grad(indices, &weights)
    }

    /// Gradient of `(1/M) sum_j w_j log q(x_j)` with respect to every core
    /// entry, where `q` is the distribution [`TensorTrain::sample`] draws
    /// from: the product over modes of the absolute conditional weights,
    /// each normalized over its mode.
    ///
    /// For a nonnegative train `q(x) = p(x) / Z`, so this is the ordinary
    /// log-likelihood of the normalized tensor. For trains with mixed signs it
    /// stays consistent with what the sampler actually does, which the ratio
    /// `p / Z` does not. Each per-mode factor is floored at [`DENSITY_FLOOR`]
    /// inside the logarithm; a floored factor contributes no gradient.
    pub fn weighted_log_likelihood_grad(&self, indices: &[LatentIndex], weights: &[f64]) -> Result<TtGradient> {
        if indices.is_empty() {
            return Err(Error::input("gradient needs at least one index"));
        }
        if indices.len() != weights.len() {
            return Err(Error::input("one weight per index is required"));
        }
        let shape = self.shape();
        for idx in indices {
            idx.validate(&shape)?;
        }
        let d = self.dim();
        let m = indices.len() as f64;
        let mut grad: Vec<Vec<f64>> = self.cores.iter().map(|c| vec![0.0; c.data.len()]).collect();

        // Right partial sums and the scale removed at each step, shared by
        // every sample.
        let sums: Vec<Vec<f64>> = self.cores.iter().map(|c| c.mode_sum()).collect();
        let mut rights = vec![Vec::new(); d + 1];
        let mut right_scale = vec![1.0; d + 1];
        rights[d] = vec![1.0];
        for i in (0..d).rev() {
            let mut v = mat_vec(&sums[i], &rights[i + 1], self.cores[i].left);
            right_scale[i] = rescale(&mut v);
            rights[i] = v;
        }

        let mut value = 0.0;
        let mut lefts: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
        let mut left_scale = vec![1.0; d];
        // Per-mode adjoints of the left and right interfaces coming from the
        // conditional at that mode, in rescaled units.
        let mut left_adj: Vec<Vec<f64>> = vec![Vec::new(); d];
        let mut right_adj: Vec<Vec<f64>> = vec![Vec::new(); d + 1];
        let mut pushed: Vec<Vec<f64>> = Vec::new();
        let mut contrib = Vec::new();
        for (idx, &w) in indices.iter().zip(weights) {
            let digits = idx.digits();
            let coef = w / m;
            lefts[0] = vec![1.0];
            for i in 0..d {
                let core = &self.cores[i];
                let x = digits[i];
                pushed.resize(core.mode, Vec::new());
                contrib.clear();
                for (k, u) in pushed.iter_mut().enumerate() {
                    core.push_left(&lefts[i], k, u);
                    contrib.push(dot(u, &rights[i + 1]));
                }
                let total: f64 = contrib.iter().map(|c| c.abs()).sum();
                let q = if total > 0.0 { contrib[x].abs() / total } else { 0.0 };
                value += coef * q.max(DENSITY_FLOOR).ln();

                let mut la = vec![0.0; core.left];
                let mut ra = vec![0.0; core.right];
                if q > DENSITY_FLOOR && coef != 0.0 {
                    for (k, u) in pushed.iter().enumerate() {
                        let mut a = -contrib[k].signum() / total;
                        if contrib[k] == 0.0 {
                            a = 0.0;
                        }
                        if k == x {
                            a += 1.0 / contrib[x];
                        }
                        if a == 0.0 {
                            continue;
                        }
                        for (r, uv) in ra.iter_mut().zip(u) {
                            *r += a * uv;
                        }
                        for (p, l) in la.iter_mut().enumerate() {
                            let base = core.offset(p, k, 0);
                            let g = &core.data[base..base + core.right];
                            *l += a * dot(g, &rights[i + 1]);
                            let lp = lefts[i][p];
                            if lp != 0.0 {
                                let gi = &mut grad[i][base..base + core.right];
                                for (gv, rb) in gi.iter_mut().zip(&rights[i + 1]) {
                                    *gv += coef * a * lp * rb;
                                }
                            }
                        }
                    }
                }
                left_adj[i] = la;
                right_adj[i + 1] = ra;

                let mut next = pushed[x].clone();
                left_scale[i] = rescale(&mut next);
                lefts[i + 1] = next;
            }

            // Left interfaces depend on the selected slices of earlier cores.
            let mut carry = vec![0.0];
            for i in (0..d).rev() {
                let core = &self.cores[i];
                let x = digits[i];
                let inv = if left_scale[i] > 0.0 { 1.0 / left_scale[i] } else { 0.0 };
                let mut back = left_adj[i].clone();
                if inv != 0.0 && carry.iter().any(|&c| c != 0.0) {
                    for (a, bk) in back.iter_mut().enumerate() {
                        let base = core.offset(a, x, 0);
                        let g = &core.data[base..base + core.right];
                        *bk += inv * dot(g, &carry);
                        let la = lefts[i][a];
                        if la != 0.0 {
                            for (gv, c) in grad[i][base..base + core.right].iter_mut().zip(&carry) {
                                *gv += coef * inv * la * c;
                            }
                        }
                    }
                }
                carry = back;
            }

            // Right interfaces depend on the mode sums of later cores.
            let mut carry: Vec<f64> = vec![0.0];
            for i in 0..d {
                let core = &self.cores[i];
                let inv = if right_scale[i] > 0.0 { 1.0 / right_scale[i] } else { 0.0 };
                let mut next = right_adj[i + 1].clone();
                if i > 0 && inv != 0.0 && carry.iter().any(|&c| c != 0.0) {
                    for (a, &pa) in carry.iter().enumerate() {
                        if pa == 0.0 {
                            continue;
                        }
                        let srow = &sums[i][a * core.right..(a + 1) * core.right];
                        for (n, s) in next.iter_mut().zip(srow) {
                            *n += inv * pa * s;
                        }
                        for k in 0..core.mode {
                            let base = core.offset(a, k, 0);
                            for (gv, rb) in grad[i][base..base + core.right].iter_mut().zip(&rights[i + 1]) {
                                *gv += coef * inv * pa * rb;
                            }
                        }
                    }
                }
                carry = next;
            }
        }
        Ok(TtGradient { cores: grad, value })
    }

    /// `cores += step * grad`, rejecting updates that would leave a
    /// non-finite entry.
    pub fn apply_gradient(&mut self, grad: &TtGradient, step: f64) -> Result<()> {
        if grad.cores.len() != self.cores.len()
            || grad.cores.iter().zip(&self.cores).any(|(g, c)| g.len() != c.data.len())
        {
            return Err(Error::input("gradient layout does not match the train"));
        }
        let updated: Vec<Vec<f64>> = self
            .cores
            .iter()
            .zip(&grad.cores)
            .map(|(c, g)| c.data.iter().zip(g).map(|(x, dx)| x + step * dx).collect())
            .collect();
        if updated.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Divergence("tensor-train update produced a non-finite core".into()));
        }
        for (c, u) in self.cores.iter_mut().zip(updated) {
            c.data = u;
        }
        Ok(())
    }
}

/// Picks an index proportionally to `weights` after the relative floor.
fn draw<R: Rng + ?Sized>(weights: &mut [f64], rng: &mut R) -> usize {
    let max = weights.iter().cloned().fold(0.0_f64, f64::max);
    if !(max > 0.0 && max.is_finite()) {
        return rng.random_range(0..weights.len());
    }
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = (*w / max).max(DENSITY_FLOOR);
        total += *w;
    }
    let mut u = rng.random::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}
