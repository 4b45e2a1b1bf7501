//! Piecewise-linear functions on a closed interval, the bounded-variation
//! proxy used throughout the crate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::Interval;

/// A function that is linear on each piece `[b_{i-1}, b_i]` of a partition of
/// `domain`, with independent one-sided values at the breakpoints.
///
/// Evaluation is left-continuous: at a breakpoint the value of the piece on
/// the left is used. Piecewise-constant functions (staircases) are the case
/// `left == right`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFn {
    domain: Interval,
    breaks: Vec<f64>,
    left: Vec<f64>,
    right: Vec<f64>,
}

impl PiecewiseFn {
    /// `breaks` are the interior breakpoints; `left[i]`/`right[i]` the values at
    /// the left/right end of piece `i`.
    pub fn new(
        domain: Interval,
        breaks: Vec<f64>,
        left: Vec<f64>,
        right: Vec<f64>,
    ) -> Result<Self> {
        if domain.length() <= 0.0 {
            return Err(Error::InvalidParameter("empty domain".into()));
        }
        if left.len() != breaks.len() + 1 || right.len() != left.len() {
            return Err(Error::InvalidParameter(format!(
                "{} breakpoints need {} values per side",
                breaks.len(),
                breaks.len() + 1
            )));
        }
        let mut prev = domain.lo;
        for &b in &breaks {
            if !(b > prev) {
                return Err(Error::InvalidParameter(format!(
                    "breakpoints not increasing at {b}"
                )));
            }
            prev = b;
        }
        if !(domain.hi > prev) {
            return Err(Error::InvalidParameter("breakpoint outside domain".into()));
        }
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite value".into()));
        }
        Ok(Self {
            domain,
            breaks,
            left,
            right,
        })
    }

    pub fn staircase(domain: Interval, breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(domain, breaks, values.clone(), values)
    }

    pub fn constant(domain: Interval, c: f64) -> Self {
        Self::staircase(domain, vec![], vec![c]).expect("valid constant")
    }

    /// Staircase with one value per uniform bin.
    pub fn from_bins(domain: Interval, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("no bins".into()));
        }
        let n = values.len();
        let w = domain.length() / n as f64;
        let breaks = (1..n).map(|i| domain.lo + i as f64 * w).collect();
        Self::staircase(domain, breaks, values)
    }

    /// Indicator of `set ∩ domain`.
    pub fn indicator(domain: Interval, set: Interval) -> Result<Self> {
        let Some(s) = set.intersect(&domain) else {
            return Ok(Self::constant(domain, 0.0));
        };
        let mut breaks = Vec::new();
        let mut values = Vec::new();
        if s.lo > domain.lo {
            breaks.push(s.lo);
            values.push(0.0);
        }
        values.push(1.0);
        if s.hi < domain.hi {
            breaks.push(s.hi);
            values.push(0.0);
        }
        Self::staircase(domain, breaks, values)
    }

    /// Continuous interpolant of `f` at `n + 1` uniform nodes.
    pub fn interpolate(domain: Interval, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = n.max(1);
        let w = domain.length() / n as f64;
        let nodes: Vec<f64> = (0..=n).map(|i| f(domain.lo + i as f64 * w)).collect();
        Self::from_node_values(domain, &nodes)
    }

    /// Continuous piecewise-linear function through `values` at uniform nodes
    /// (including both endpoints).
    pub fn from_node_values(domain: Interval, values: &[f64]) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("need at least two nodes".into()));
        }
        let n = values.len() - 1;
        let w = domain.length() / n as f64;
        let breaks = (1..n).map(|i| domain.lo + i as f64 * w).collect();
        Self::new(domain, breaks, values[..n].to_vec(), values[1..].to_vec())
    }

    /// Staircase with `pieces` pieces at sorted uniform-random breakpoints and
    /// values uniform in `[-1, 1]`.
    pub fn random_staircase<R: Rng + ?Sized>(domain: Interval, pieces: usize, rng: &mut R) -> Self {
        let pieces = pieces.max(1);
        let mut breaks: Vec<f64> = (1..pieces)
            .map(|_| rng.random_range(domain.lo..domain.hi))
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks.retain(|&b| b > domain.lo && b < domain.hi);
        let values = (0..=breaks.len())
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self::staircase(domain, breaks, values).expect("sorted breakpoints")
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    pub fn piece_count(&self) -> usize {
        self.left.len()
    }

    pub fn is_staircase(&self) -> bool {
        self.left == self.right
    }

    /// Index of the piece whose half-open span `(b_{i-1}, b_i]` holds `x`.
    #[inline]
    pub fn piece_index(&self, x: f64) -> usize {
        self.breaks.partition_point(|&b| b < x)
    }

    /// Closed bounds of piece `i`.
    #[inline]
    pub fn piece_bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            self.domain.lo
        } else {
            self.breaks[i - 1]
        };
        let hi = if i == self.breaks.len() {
            self.domain.hi
        } else {
            self.breaks[i]
        };
        (lo, hi)
    }

    /// `(alpha, beta)` with `f(t) = alpha + beta t` on piece `i`.
    #[inline]
    pub(crate) fn piece_coefficients(&self, i: usize) -> (f64, f64) {
        let (lo, hi) = self.piece_bounds(i);
        let beta = (self.right[i] - self.left[i]) / (hi - lo);
        (self.left[i] - beta * lo, beta)
    }

    pub fn left_values(&self) -> &[f64] {
        &self.left
    }

    pub fn right_values(&self) -> &[f64] {
        &self.right
    }

    #[inline]
    fn eval_in(&self, i: usize, x: f64) -> f64 {
        if self.left[i] == self.right[i] {
            return self.left[i];
        }
        let (lo, hi) = self.piece_bounds(i);
        let t = ((x - lo) / (hi - lo)).clamp(0.0, 1.0);
        self.left[i] + t * (self.right[i] - self.left[i])
    }

    /// Left-continuous value. Points outside the domain are clamped.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.domain.lo, self.domain.hi);
        self.eval_in(self.piece_index(x), x)
    }

    /// `lim_{t -> x+} f(t)`.
    pub fn limit_right(&self, x: f64) -> f64 {
        let x = x.clamp(self.domain.lo, self.domain.hi);
        let i = self
            .breaks
            .partition_point(|&b| b <= x)
            .min(self.piece_count() - 1);
        self.eval_in(i, x)
    }

    pub fn integral(&self) -> f64 {
        (0..self.piece_count())
            .map(|i| {
                let (lo, hi) = self.piece_bounds(i);
                0.5 * (self.left[i] + self.right[i]) * (hi - lo)
            })
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        (0..self.piece_count())
            .map(|i| {
                let (lo, hi) = self.piece_bounds(i);
                let (l, r) = (self.left[i], self.right[i]);
                let w = hi - lo;
                if l * r >= 0.0 {
                    0.5 * (l.abs() + r.abs()) * w
                } else {
                    0.5 * w * (l * l + r * r) / (l.abs() + r.abs())
                }
            })
            .sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.left
            .iter()
            .chain(&self.right)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Variation of the left-continuous representative over the open
    /// interior: within-piece oscillation plus interior jumps. Jumps at the
    /// two domain endpoints are not counted.
    pub fn total_variation(&self) -> f64 {
        let within: f64 = self
            .left
            .iter()
            .zip(&self.right)
            .map(|(l, r)| (r - l).abs())
            .sum();
        let jumps: f64 = self
            .right
            .iter()
            .zip(&self.left[1..])
            .map(|(r, l)| (l - r).abs())
            .sum();
        within + jumps
    }

    /// Pointwise combination on the common refinement, applied to the
    /// one-sided endpoint values of every piece. Exact for linear `op` and for
    /// staircases under any `op`.
    pub fn zip_with(&self, other: &PiecewiseFn, op: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.domain != other.domain {
            return Err(Error::InvalidParameter("domain mismatch".into()));
        }
        let mut breaks = Vec::with_capacity(self.breaks.len() + other.breaks.len());
        let (mut i, mut j) = (0, 0);
        while i < self.breaks.len() || j < other.breaks.len() {
            let b = match (self.breaks.get(i), other.breaks.get(j)) {
                (Some(&x), Some(&y)) if x == y => {
                    i += 1;
                    j += 1;
                    x
                }
                (Some(&x), Some(&y)) if x < y => {
                    i += 1;
                    x
                }
                (Some(_), Some(&y)) => {
                    j += 1;
                    y
                }
                (Some(&x), None) => {
                    i += 1;
                    x
                }
                (None, Some(&y)) => {
                    j += 1;
                    y
                }
                (None, None) => unreachable!(),
            };
            breaks.push(b);
        }
        let n = breaks.len() + 1;
        let mut left = Vec::with_capacity(n);
        let mut right = Vec::with_capacity(n);
        for k in 0..n {
            let lo = if k == 0 {
                self.domain.lo
            } else {
                breaks[k - 1]
            };
            let hi = if k == n - 1 {
                self.domain.hi
            } else {
                breaks[k]
            };
            let mid = 0.5 * (lo + hi);
            let (pa, pb) = (self.piece_index(mid), other.piece_index(mid));
            left.push(op(self.eval_in(pa, lo), other.eval_in(pb, lo)));
            right.push(op(self.eval_in(pa, hi), other.eval_in(pb, hi)));
        }
        Self::new(self.domain, breaks, left, right)
    }

    pub fn add(&self, other: &PiecewiseFn) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &PiecewiseFn) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// Product; exact for staircases, endpoint-interpolated otherwise.
    pub fn mul(&self, other: &PiecewiseFn) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_values(|v| c * v)
    }

    pub fn map_values(&self, op: impl Fn(f64) -> f64) -> Self {
        Self {
            domain: self.domain,
            breaks: self.breaks.clone(),
            left: self.left.iter().map(|&v| op(v)).collect(),
            right: self.right.iter().map(|&v| op(v)).collect(),
        }
    }
}
