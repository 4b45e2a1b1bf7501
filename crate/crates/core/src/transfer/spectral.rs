use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::UlamOperator;
use crate::error::{Error, Result};
use crate::piecewise::PiecewiseFn;

const DENSITY_TOL: f64 = 1e-12;
const DENSITY_MAX_ITER: usize = 100_000;
const DEFLATION_TOL: f64 = 1e-10;
const KRYLOV_DIM: usize = 80;
const POWER_STEPS: usize = 400;
const POWER_WINDOW: usize = 100;

/// Fixed point of the Ulam matrix, as a probability density on the bins.
#[derive(Clone, Debug, Serialize)]
pub struct InvariantDensity {
    pub bins: usize,
    pub bin_width: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
    /// `||P f - f||_1` after the last step.
    pub residual: f64,
}

impl InvariantDensity {
    pub fn to_piecewise(&self, op: &UlamOperator) -> PiecewiseFn {
        op.to_piecewise(&self.values)
    }

    /// Per-bin probabilities `f_i * w`.
    pub fn masses(&self) -> Vec<f64> {
        self.values.iter().map(|v| v * self.bin_width).collect()
    }

    pub fn l1_distance_to(&self, other: &InvariantDensity) -> f64 {
        let a = PiecewiseFn::from_bins(crate::Interval::new(0.0, 1.0), self.values.clone())
            .expect("bins");
        let b = PiecewiseFn::from_bins(crate::Interval::new(0.0, 1.0), other.values.clone())
            .expect("bins");
        let span = self.bin_width * self.bins as f64;
        a.sub(&b).expect("same domain").l1_norm() * span
    }
}

fn l1(v: &[f64], w: f64) -> f64 {
    v.iter().map(|x| x.abs()).sum::<f64>() * w
}

/// Power iteration from the uniform density, renormalized every step.
pub fn invariant_density(op: &UlamOperator) -> Result<InvariantDensity> {
    let n = op.bins();
    let w = op.bin_width();
    let mut f = vec![1.0 / (w * n as f64); n];
    let mut next = vec![0.0; n];
    let mut increment = f64::INFINITY;
    for it in 1..=DENSITY_MAX_ITER {
        op.apply_into(&f, &mut next);
        let mass: f64 = next.iter().sum::<f64>() * w;
        next.iter_mut().for_each(|v| *v /= mass);
        increment = f.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
        std::mem::swap(&mut f, &mut next);
        if increment < DENSITY_TOL {
            op.apply_into(&f, &mut next);
            let residual = f.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum::<f64>() * w;
            return Ok(InvariantDensity {
                bins: n,
                bin_width: w,
                values: f,
                iterations: it,
                residual,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: DENSITY_MAX_ITER,
        residual: increment,
    })
}

/// Invariant density together with the second-eigenvalue estimate.
#[derive(Clone, Debug, Serialize)]
pub struct SpectralReport {
    pub q: u32,
    pub bins: usize,
    /// `||P f_1||_1 / ||f_1||_1`.
    pub leading_eigenvalue: f64,
    pub density: InvariantDensity,
    /// `|lambda_2|`: largest Ritz modulus of the deflated operator.
    pub second_modulus: f64,
    /// Growth rate of plain power iteration on the deflated operator, kept
    /// as a cross-check. It converges slowly when several eigenvalues share
    /// nearly the same modulus.
    pub power_modulus: f64,
    pub gap: f64,
    pub residual: f64,
    /// `||D f_1||_1` for the deflated operator `D`.
    pub deflation_residual: f64,
}

/// The deflated operator `D v = P v - p * sum(v)`, with `p` the invariant
/// probability vector. Its spectrum is that of `P` with the eigenvalue 1
/// replaced by 0.
struct Deflated<'a> {
    op: &'a UlamOperator,
    p: Vec<f64>,
}

impl Deflated<'_> {
    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.op.apply_into(v, out);
        let s: f64 = v.iter().sum();
        out.iter_mut().zip(&self.p).for_each(|(o, pi)| *o -= pi * s);
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn start_vector(n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mean = v.iter().sum::<f64>() / n as f64;
    v.iter_mut().for_each(|x| *x -= mean);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Largest Ritz modulus from a `dim`-step Arnoldi factorization with
/// re-orthogonalized Gram-Schmidt.
fn arnoldi_modulus(d: &Deflated, dim: usize) -> f64 {
    let n = d.p.len();
    let dim = dim.min(n - 1);
    let mut basis = vec![start_vector(n)];
    let mut h = DMatrix::<f64>::zeros(dim + 1, dim);
    let mut size = dim;
    for j in 0..dim {
        let mut w = vec![0.0; n];
        d.apply(&basis[j], &mut w);
        for _ in 0..2 {
            for (i, b) in basis.iter().enumerate() {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                h[(i, j)] += c;
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nw = norm2(&w);
        h[(j + 1, j)] = nw;
        if nw < 1e-14 {
            size = j + 1;
            break;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        basis.push(w);
    }
    h.view((0, 0), (size, size))
        .into_owned()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max)
}

/// Geometric-mean growth rate of `||D^k v||` over the last `window` of
/// `iterations` steps.
fn power_modulus(d: &Deflated, iterations: usize, window: usize) -> f64 {
    let n = d.p.len();
    let mut v = start_vector(n);
    let mut next = vec![0.0; n];
    let mut logs = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        d.apply(&v, &mut next);
        let r = norm2(&next);
        if r == 0.0 || !r.is_finite() {
            return 0.0;
        }
        logs.push(r.ln());
        next.iter_mut().for_each(|x| *x /= r);
        std::mem::swap(&mut v, &mut next);
    }
    let tail = &logs[logs.len().saturating_sub(window)..];
    (tail.iter().sum::<f64>() / tail.len() as f64).exp()
}

/// Second-eigenvalue modulus of the Ulam matrix via the deflated operator.
pub fn spectral_gap(op: &UlamOperator, density: &InvariantDensity) -> Result<SpectralReport> {
    let n = op.bins();
    let w = op.bin_width();
    let d = Deflated {
        op,
        p: density.masses(),
    };
    let mut dp = vec![0.0; n];
    d.apply(&d.p, &mut dp);
    let deflation_residual = l1(&dp, 1.0);
    if deflation_residual > DEFLATION_TOL {
        return Err(Error::Deflation(deflation_residual));
    }
    let second = arnoldi_modulus(&d, KRYLOV_DIM);
    let power = power_modulus(&d, POWER_STEPS, POWER_WINDOW);

    let mut pf = vec![0.0; n];
    op.apply_into(&density.values, &mut pf);
    let leading = l1(&pf, w) / l1(&density.values, w);
    Ok(SpectralReport {
        q: op.params().q(),
        bins: n,
        leading_eigenvalue: leading,
        residual: density.residual,
        density: density.clone(),
        second_modulus: second,
        power_modulus: power,
        gap: 1.0 - second,
        deflation_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rosen_map::RosenParams;

    #[test]
    fn density_is_positive_normalized_fixed_point() {
        let op = UlamOperator::new(RosenParams::new(3).unwrap(), 512).unwrap();
        let d = invariant_density(&op).unwrap();
        assert!(d.residual < 1e-10);
        assert!(d.values.iter().all(|&v| v > 0.0));
        let mass: f64 = d.masses().iter().sum();
        assert!((mass - 1.0).abs() < 1e-12);
        let report = spectral_gap(&op, &d).unwrap();
        assert!((report.leading_eigenvalue - 1.0).abs() < 1e-10);
        assert!(report.gap > 0.0 && report.gap <= 1.0);
        assert!(report.deflation_residual < 1e-10);
        // power iteration drifts between near-equal moduli but stays close
        assert!((report.power_modulus - report.second_modulus).abs() < 0.05);
    }

    #[test]
    fn ritz_modulus_matches_dense_eigenvalues() {
        let op = UlamOperator::new(RosenParams::new(5).unwrap(), 128).unwrap();
        let d = invariant_density(&op).unwrap();
        let report = spectral_gap(&op, &d).unwrap();
        let dense = DMatrix::from_fn(128, 128, |i, j| op.entry(i, j));
        let mut mods: Vec<f64> = dense
            .complex_eigenvalues()
            .iter()
            .map(|c| c.norm())
            .collect();
        mods.sort_by(|a, b| b.total_cmp(a));
        assert!((mods[0] - 1.0).abs() < 1e-10);
        assert!(
            (report.second_modulus - mods[1]).abs() < 1e-8,
            "{} vs {}",
            report.second_modulus,
            mods[1]
        );
    }

    #[test]
    fn zero_mean_vectors_decay() {
        use rand::{Rng, SeedableRng};
        let op = UlamOperator::new(RosenParams::new(5).unwrap(), 512).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let w = op.bin_width();
        for _ in 0..5 {
            let mut v: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mean = v.iter().sum::<f64>() / 512.0;
            v.iter_mut().for_each(|x| *x -= mean);
            let mut steps = 0;
            while l1(&v, w) >= 1e-6 {
                v = op.apply(&v);
                steps += 1;
                assert!(steps <= 500, "no decay after 500 steps");
            }
        }
    }
}
