use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseFn;
use crate::rosen_map::{Cover, RosenParams};
use crate::special::shifted_difference_tail;

/// Ulam discretization of `H` on `bins` uniform bins of `I_q`:
/// `P[i][j] = m(B_j ∩ T^{-1} B_i) / m(B_j)`, stored row-compressed.
///
/// Entries are computed in closed form over every branch, including the
/// infinitely many cylinders accumulating at 0, so no digit truncation
/// enters the matrix.
#[derive(Clone, Debug, Serialize)]
pub struct UlamOperator {
    params: RosenParams,
    bins: usize,
    #[serde(skip)]
    row_ptr: Vec<usize>,
    #[serde(skip)]
    cols: Vec<u32>,
    #[serde(skip)]
    vals: Vec<f64>,
}

impl UlamOperator {
    pub fn new(params: RosenParams, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 bins, got {bins}"
            )));
        }
        let columns: Vec<Vec<(u32, f64)>> = (0..bins)
            .into_par_iter()
            .map(|j| column(&params, bins, j))
            .collect();
        let mut counts = vec![0usize; bins + 1];
        for col in &columns {
            for &(i, _) in col {
                counts[i as usize + 1] += 1;
            }
        }
        for i in 0..bins {
            counts[i + 1] += counts[i];
        }
        let nnz = counts[bins];
        let mut next = counts.clone();
        let mut cols = vec![0u32; nnz];
        let mut vals = vec![0.0; nnz];
        for (j, col) in columns.iter().enumerate() {
            for &(i, v) in col {
                let slot = next[i as usize];
                cols[slot] = j as u32;
                vals[slot] = v;
                next[i as usize] += 1;
            }
        }
        Ok(Self {
            params,
            bins,
            row_ptr: counts,
            cols,
            vals,
        })
    }

    pub fn params(&self) -> &RosenParams {
        &self.params
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_width(&self) -> f64 {
        self.params.lambda() / self.bins as f64
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        -self.params.sigma() + (i as f64 + 0.5) * self.bin_width()
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Mass lost to digit truncation; the assembly is untruncated.
    pub fn truncation_tail(&self) -> f64 {
        0.0
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let row = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[row.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[row.start + k],
            Err(_) => 0.0,
        }
    }

    /// `P v`, parallel over rows with a fixed summation order per row.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.bins];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.bins);
        out.par_iter_mut().enumerate().for_each(|(i, o)| {
            let row = self.row_ptr[i]..self.row_ptr[i + 1];
            *o = self.cols[row.clone()]
                .iter()
                .zip(&self.vals[row])
                .map(|(&j, &p)| p * v[j as usize])
                .sum();
        });
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.bins];
        for (&j, &v) in self.cols.iter().zip(&self.vals) {
            sums[j as usize] += v;
        }
        sums
    }

    /// Bin averages of `f` (the `L^2` projection onto bin staircases).
    pub fn project(&self, f: &PiecewiseFn) -> Vec<f64> {
        let w = self.bin_width();
        let lo = -self.params.sigma();
        let edge = |i: usize| {
            if i == self.bins {
                self.params.sigma()
            } else {
                lo + i as f64 * w
            }
        };
        let mut out = vec![0.0; self.bins];
        for k in 0..f.piece_count() {
            let (plo, phi) = f.piece_bounds(k);
            let (alpha, beta) = f.piece_coefficients(k);
            let first = (((plo - lo) / w).floor().max(0.0) as usize).min(self.bins - 1);
            for (i, slot) in out.iter_mut().enumerate().skip(first) {
                let a = edge(i).max(plo);
                let b = edge(i + 1).min(phi);
                if edge(i) >= phi {
                    break;
                }
                if b > a {
                    *slot += (b - a) * (alpha + beta * 0.5 * (a + b));
                }
            }
        }
        out.iter_mut().for_each(|v| *v /= w);
        out
    }

    /// Staircase with the given per-bin values.
    pub fn to_piecewise(&self, values: &[f64]) -> PiecewiseFn {
        PiecewiseFn::from_bins(self.params.interval(), values.to_vec()).expect("bins")
    }
}

/// Column `j`: where the mass of bin `B_j` goes under one application of `T`.
fn column(p: &RosenParams, bins: usize, j: usize) -> Vec<(u32, f64)> {
    let lam = p.lambda();
    let sigma = p.sigma();
    let w = lam / bins as f64;
    let edge = |i: usize| {
        if i == bins {
            sigma
        } else {
            -sigma + i as f64 * w
        }
    };
    let (c, d) = (edge(j), edge(j + 1));
    let cover: Cover = p.cover(c, d);
    let mut acc = vec![0.0; bins];
    let bin_of = |y: f64| (((y + sigma) / w).floor().max(0.0) as usize).min(bins - 1);
    for piece in &cover.pieces {
        let al = piece.digit.a as f64 * lam;
        let (t_lo, t_hi) = (piece.image.lo, piece.image.hi);
        for (i, slot) in acc
            .iter_mut()
            .enumerate()
            .take(bin_of(t_hi) + 1)
            .skip(bin_of(t_lo))
        {
            let y1 = edge(i).max(t_lo);
            let y2 = edge(i + 1).min(t_hi);
            if y2 > y1 {
                *slot += (y2 - y1) / ((y1 + al) * (y2 + al));
            }
        }
    }
    for run in &cover.runs {
        let first = run.first as f64;
        for (i, slot) in acc.iter_mut().enumerate() {
            let (alpha, beta) = (edge(i) / lam, edge(i + 1) / lam);
            let mut mass = shifted_difference_tail(first, alpha, beta);
            if let Some(last) = run.last {
                mass -= shifted_difference_tail(last as f64 + 1.0, alpha, beta);
            }
            *slot += mass / lam;
        }
    }
    acc.into_iter()
        .enumerate()
        .filter(|&(_, m)| m > 0.0)
        .map(|(i, m)| (i as u32, m / w))
        .collect()
}
