//! The transfer operator `Hf(x) = sum_h |h'(x)| f(h(x)) 1_{T I_h}(x)`.

mod spectral;
mod ulam;

pub use spectral::{invariant_density, spectral_gap, InvariantDensity, SpectralReport};
pub use ulam::UlamOperator;

use rayon::prelude::*;
use serde::Serialize;

use crate::interval::Interval;
use crate::piecewise::PiecewiseFn;
use crate::rosen_map::{Digit, RosenParams, Sign, ZERO_GUARD};
use crate::special::{branch_power_sum, hurwitz};

/// Literal branch sum over all digits with `a <= a_max`.
pub fn apply_transfer(p: &RosenParams, f: &PiecewiseFn, x: f64, a_max: u64) -> f64 {
    let lam = p.lambda();
    let mut total = 0.0;
    for a in p.a_min()..=a_max {
        for sign in [Sign::Plus, Sign::Minus] {
            let d = Digit::new(sign, a);
            let image = p.branch_image(d).expect("admissible");
            if !image.contains(x) {
                continue;
            }
            let denom = x + a as f64 * lam;
            total += f.eval(sign.as_f64() / denom) / (denom * denom);
        }
    }
    total
}

/// Bound on `|Hf(x) - H_{a_max} f(x)|` for `sup|f| <= sup_f`, uniform in `x`.
pub fn tail_bound(p: &RosenParams, sup_f: f64, a_max: u64) -> f64 {
    let lam = p.lambda();
    // x + a lambda >= (a - 1/2) lambda on I_q
    2.0 * sup_f * hurwitz(2, a_max as f64 + 0.5) / (lam * lam)
}

/// Evaluator that groups consecutive digits landing in the same piece of `f`
/// and sums each group in closed form. Without a cap it is exact (no
/// truncation); with a cap it equals [`apply_transfer`] at that cap.
#[derive(Clone, Copy, Debug)]
pub struct TransferOperator {
    params: RosenParams,
    a_max: Option<u64>,
}

impl TransferOperator {
    pub fn exact(params: RosenParams) -> Self {
        Self {
            params,
            a_max: None,
        }
    }

    pub fn truncated(params: RosenParams, a_max: u64) -> Self {
        Self {
            params,
            a_max: Some(a_max),
        }
    }

    pub fn params(&self) -> &RosenParams {
        &self.params
    }

    pub fn a_max(&self) -> Option<u64> {
        self.a_max
    }

    pub fn apply_at(&self, f: &PiecewiseFn, x: f64) -> f64 {
        self.side_sum(f, x, Sign::Plus) + self.side_sum(f, x, Sign::Minus)
    }

    fn side_sum(&self, f: &PiecewiseFn, x: f64, sign: Sign) -> f64 {
        let p = &self.params;
        let lam = p.lambda();
        let s = sign.as_f64();
        let mut a = p.a_min();
        if x < p.clipped_image_lo() {
            a += 1;
        }
        let mut total = 0.0;
        loop {
            if self.a_max.is_some_and(|cap| a > cap) {
                break;
            }
            let y = s / (x + a as f64 * lam);
            let j = f.piece_index(y);
            let (plo, phi) = f.piece_bounds(j);
            // last digit whose preimage stays in piece j
            let last = match sign {
                Sign::Plus if plo > 0.0 => {
                    Some((((1.0 / plo - x) / lam).ceil() - 1.0).max(a as f64) as u64)
                }
                Sign::Minus if phi < 0.0 => {
                    Some(((-1.0 / phi - x) / lam).floor().max(a as f64) as u64)
                }
                _ => None,
            };
            let last = match (last, self.a_max) {
                (Some(l), Some(cap)) => Some(l.min(cap)),
                (None, cap) => cap,
                (l, None) => l,
            };
            let (alpha, beta) = f.piece_coefficients(j);
            total += alpha * branch_power_sum(2, x, lam, a, last);
            if beta != 0.0 {
                total += s * beta * branch_power_sum(3, x, lam, a, last);
            }
            match last {
                Some(l) => a = l + 1,
                None => break,
            }
        }
        total
    }

    pub fn apply_many(&self, f: &PiecewiseFn, xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| self.apply_at(f, x)).collect()
    }

    /// Points where `Hf` may jump: images of the breakpoints of `f` and the
    /// free endpoint of the clipped branch.
    pub fn discontinuities(&self, f: &PiecewiseFn) -> Vec<f64> {
        let p = &self.params;
        let mut cuts = vec![p.clipped_image_lo()];
        for &b in f.breakpoints() {
            if b.abs() < ZERO_GUARD {
                continue;
            }
            if let (t, Some(d)) = p.step_unchecked(b) {
                if self.a_max.is_none_or(|cap| d.a <= cap) {
                    cuts.push(t);
                }
            }
        }
        cuts
    }

    /// Continuous piecewise-linear interpolant of `Hf` on `nodes + 1`
    /// uniform points of `I_q`.
    pub fn apply_grid(&self, f: &PiecewiseFn, nodes: usize) -> PiecewiseFn {
        let dom = self.params.interval();
        let w = dom.length() / nodes as f64;
        let xs: Vec<f64> = (0..=nodes).map(|i| dom.lo + i as f64 * w).collect();
        PiecewiseFn::from_node_values(dom, &self.apply_many(f, &xs)).expect("grid has two nodes")
    }

    /// `int_I Hf dm` by 3-point Gauss rule on `cells` cells aligned with the
    /// jumps of `Hf`.
    pub fn integral(&self, f: &PiecewiseFn, cells: usize) -> f64 {
        let cuts = self.discontinuities(f);
        let values: Vec<f64> = aligned_nodes(self.params.interval(), &cuts, cells)
            .into_iter()
            .map(|(x, wt)| wt * self.apply_at(f, x))
            .collect();
        values.iter().sum()
    }
}

/// 3-point Gauss-Legendre on `[lo, hi]`, returned as `(node, weight)` pairs.
fn gauss3(lo: f64, hi: f64) -> [(f64, f64); 3] {
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let r = (0.6f64).sqrt();
    [
        (mid - r * half, half * 5.0 / 9.0),
        (mid, half * 8.0 / 9.0),
        (mid + r * half, half * 5.0 / 9.0),
    ]
}

/// Quadrature nodes on `dom` with cells split at every cut; about `cells`
/// cells in total, distributed by length.
fn aligned_nodes(dom: Interval, cuts: &[f64], cells: usize) -> Vec<(f64, f64)> {
    let mut pts: Vec<f64> = cuts
        .iter()
        .copied()
        .filter(|&c| c > dom.lo && c < dom.hi)
        .chain([dom.lo, dom.hi])
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut nodes = Vec::with_capacity(3 * (cells + pts.len()));
    for w in pts.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let m = ((hi - lo) / dom.length() * cells as f64).ceil().max(1.0) as usize;
        let h = (hi - lo) / m as f64;
        for k in 0..m {
            let a = lo + k as f64 * h;
            let b = if k + 1 == m { hi } else { a + h };
            nodes.extend(gauss3(a, b));
        }
    }
    nodes
}

/// Both sides of `int (f o T) g dm = int f Hg dm`, with `T` and `H`
/// restricted to digits `a <= a_max` so that the identity is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Duality {
    pub lhs: f64,
    pub rhs: f64,
}

impl Duality {
    pub fn gap(&self) -> f64 {
        (self.lhs - self.rhs).abs()
    }
}

/// Quadrature of both sides of the adjoint identity. The left side is
/// integrated cylinder by cylinder on cells where `f o T` and `g` are
/// smooth; the right side on cells aligned with the jumps of `H_{a_max} g`.
pub fn duality_check(
    p: &RosenParams,
    f: &PiecewiseFn,
    g: &PiecewiseFn,
    a_max: u64,
    cells: usize,
) -> Duality {
    let lam = p.lambda();
    let lhs: f64 = (p.a_min()..=a_max)
        .into_par_iter()
        .map(|a| {
            let mut acc = 0.0;
            let mut cuts = Vec::new();
            for sign in [Sign::Plus, Sign::Minus] {
                let d = Digit::new(sign, a);
                let cyl = p.cylinder(d).expect("admissible");
                let image = p.branch_image(d).expect("admissible");
                let s = sign.as_f64();
                cuts.clear();
                cuts.extend(
                    f.breakpoints()
                        .iter()
                        .filter(|&&b| image.lo < b && b < image.hi)
                        .map(|&b| s / (b + a as f64 * lam)),
                );
                cuts.extend(g.breakpoints().iter().copied());
                let cells_here = if a < 64 { (cells / 8).max(1) } else { 1 };
                for (x, wt) in aligned_nodes(cyl, &cuts, cells_here) {
                    let t = 1.0 / x.abs() - a as f64 * lam;
                    acc += wt * f.eval(t) * g.eval(x);
                }
            }
            acc
        })
        .sum();
    let op = TransferOperator::truncated(*p, a_max);
    let mut cuts = op.discontinuities(g);
    cuts.extend(f.breakpoints().iter().copied());
    let rhs = aligned_nodes(p.interval(), &cuts, cells)
        .par_iter()
        .map(|&(x, wt)| wt * f.eval(x) * op.apply_at(g, x))
        .sum();
    Duality { lhs, rhs }
}
