//! Birkhoff sums over the invariant measure and their Gaussian limit.

pub mod ks;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::piecewise::PiecewiseFn;
use crate::rosen_map::{Digit, RosenParams, Sign, ZERO_GUARD};
use crate::transfer::{InvariantDensity, UlamOperator};

pub use ks::{kolmogorov_survival, ks_statistic, ks_test, normal_cdf, normal_pdf, KsResult};

/// Largest lag in the integrated autocovariance estimate.
pub const AUTOCOV_LAGS: usize = 50;
/// `sigma^2` below this is degenerate outright.
pub const DEGENERATE_SIGMA2: f64 = 1e-12;

/// A bounded cost function on `I_q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostFn {
    /// Cost of digit `a` is `values[min(a, values.len()) - 1]`, for either sign.
    Digit {
        values: Vec<f64>,
    },
    Piecewise {
        f: PiecewiseFn,
    },
    /// `u - u o T`.
    Coboundary {
        u: PiecewiseFn,
    },
}

impl CostFn {
    pub fn digit_table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "digit cost table must be finite and nonempty".into(),
            ));
        }
        Ok(CostFn::Digit { values })
    }

    /// `min(a, cap)`.
    pub fn digit_min(cap: u64) -> Self {
        CostFn::Digit {
            values: (1..=cap.max(1)).map(|a| a as f64).collect(),
        }
    }

    pub fn constant(c: f64) -> Self {
        CostFn::Digit { values: vec![c] }
    }

    /// `1` on digit `a`, `0` elsewhere.
    pub fn digit_indicator(a: u64) -> Self {
        let mut values = vec![0.0; a as usize + 1];
        values[a as usize - 1] = 1.0;
        CostFn::Digit { values }
    }

    fn digit_value(values: &[f64], a: u64) -> f64 {
        values[(a as usize).clamp(1, values.len()) - 1]
    }

    /// `f(x)`; at 0 a digit cost takes its saturated value.
    pub fn eval(&self, p: &RosenParams, x: f64) -> f64 {
        match self {
            CostFn::Digit { values } => match p.digit(x) {
                Some(d) => Self::digit_value(values, d.a),
                None => *values.last().expect("nonempty"),
            },
            CostFn::Piecewise { f } => f.eval(x),
            CostFn::Coboundary { u } => u.eval(x) - u.eval(p.map(x)),
        }
    }

    /// `int_{B_i} f dm` for every Ulam bin. Exact for digit and piecewise
    /// costs; for coboundaries exact when `u` is constant on bins.
    pub fn bin_integrals(&self, op: &UlamOperator) -> Vec<f64> {
        let p = op.params();
        let w = op.bin_width();
        match self {
            CostFn::Digit { values } => {
                let lam = p.lambda();
                let cap = values.len() as u64;
                // length of the positive cylinders a in first..=last (None: to 0)
                let run_len = |first: u64, last: Option<u64>| {
                    let upper = 2.0 / ((2 * first - 1) as f64 * lam);
                    let lower = last.map_or(0.0, |l| 2.0 / ((2 * l + 1) as f64 * lam));
                    upper - lower
                };
                (0..op.bins())
                    .map(|i| {
                        let lo = -p.sigma() + i as f64 * w;
                        let hi = if i + 1 == op.bins() {
                            p.sigma()
                        } else {
                            lo + w
                        };
                        let cover = p.cover(lo, hi);
                        let mut total: f64 = cover
                            .pieces
                            .iter()
                            .map(|pc| Self::digit_value(values, pc.digit.a) * pc.overlap.length())
                            .sum();
                        for run in &cover.runs {
                            let mut a = run.first;
                            while a < cap && run.last.is_none_or(|l| a <= l) {
                                total += Self::digit_value(values, a) * run_len(a, Some(a));
                                a += 1;
                            }
                            if run.last.is_none_or(|l| a <= l) {
                                total += values[values.len() - 1] * run_len(a, run.last);
                            }
                        }
                        total
                    })
                    .collect()
            }
            CostFn::Piecewise { f } => op.project(f).into_iter().map(|v| v * w).collect(),
            CostFn::Coboundary { u } => {
                // int_{B_i} u o T = sum_j m(B_i ∩ T^{-1} B_j) u_j = w sum_j P[j][i] u_j
                let ub = op.project(u);
                let mut out: Vec<f64> = ub.iter().map(|v| v * w).collect();
                for (j, &uj) in ub.iter().enumerate() {
                    for (i, o) in out.iter_mut().enumerate() {
                        let pji = op.entry(j, i);
                        if pji != 0.0 {
                            *o -= w * pji * uj;
                        }
                    }
                }
                out
            }
        }
    }

    /// `int f dmu` under the Ulam invariant density.
    pub fn mean(&self, op: &UlamOperator, density: &InvariantDensity) -> f64 {
        self.bin_integrals(op)
            .iter()
            .zip(&density.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Whether `x` lies within `tol` of a discontinuity of `f` or of a
    /// cylinder endpoint.
    fn near_discontinuity(&self, p: &RosenParams, x: f64, tol: f64) -> bool {
        let near_cylinder_edge = |y: f64| match p.digit(y) {
            Some(d) => {
                let c = p.cylinder(d).expect("admissible");
                (y - c.lo).abs() < tol || (y - c.hi).abs() < tol
            }
            None => true,
        };
        let near_break =
            |f: &PiecewiseFn, y: f64| f.breakpoints().iter().any(|b| (b - y).abs() < tol);
        near_cylinder_edge(x)
            || match self {
                CostFn::Digit { .. } => false,
                CostFn::Piecewise { f } => near_break(f, x),
                CostFn::Coboundary { u } => near_break(u, x) || near_break(u, p.map(x)),
            }
    }
}

/// Inverse-CDF sampler for a bin density.
#[derive(Clone, Debug)]
pub struct InvariantSampler {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
}

impl InvariantSampler {
    pub fn new(op: &UlamOperator, density: &InvariantDensity) -> Result<Self> {
        Self::from_bins(-op.params().sigma(), op.bin_width(), &density.values)
    }

    pub fn from_bins(lo: f64, width: f64, values: &[f64]) -> Result<Self> {
        if values.iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "density must be finite and nonnegative".into(),
            ));
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = values
            .iter()
            .map(|v| {
                acc += v * width;
                acc
            })
            .collect();
        if !(acc > 0.0) {
            return Err(Error::InvalidParameter("density has zero mass".into()));
        }
        cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(Self { lo, width, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        self.lo + (i as f64 + rng.random::<f64>()) * self.width
    }
}

/// `count` draws from the sampler, deterministic in `seed`.
pub fn sample_invariant(sampler: &InvariantSampler, seed: u64, count: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sampler.sample(&mut rng)).collect()
}

/// A Birkhoff sum that may stop early at the zero guard.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BirkhoffSum {
    pub sum: f64,
    /// Terms actually summed.
    pub steps: usize,
}

impl BirkhoffSum {
    pub fn truncated(&self, n: usize) -> bool {
        self.steps < n
    }
}

/// `S_N f(x) = sum_{k<N} f(T^k x)`.
pub fn birkhoff_sum(p: &RosenParams, f: &CostFn, x: f64, n: usize) -> Result<BirkhoffSum> {
    let mut x = p.check_domain(x)?;
    let mut sum = 0.0;
    for k in 0..n {
        if x.abs() < ZERO_GUARD {
            return Ok(BirkhoffSum { sum, steps: k });
        }
        sum += f.eval(p, x);
        x = p.map(x);
    }
    Ok(BirkhoffSum { sum, steps: n })
}

/// Per-trial aggregates; enough to assemble both variance estimators.
#[derive(Clone, Debug)]
struct TrialStats {
    s_n: f64,
    s_tenth: f64,
    discarded: u64,
    /// `sum_k y_k y_{k+l}` for `l = 0..=AUTOCOV_LAGS`.
    lag_sums: Vec<f64>,
    head: Vec<f64>,
    tail: Vec<f64>,
}

fn run_trial(
    p: &RosenParams,
    f: &CostFn,
    sampler: &InvariantSampler,
    n: usize,
    seed: u64,
    trial: u64,
) -> TrialStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let lags = AUTOCOV_LAGS.min(n.saturating_sub(1));
    let tenth = n / 10;
    let mut discarded = 0;
    'restart: loop {
        let mut x = sampler.sample(&mut rng);
        let mut ring = vec![0.0; lags + 1];
        let mut lag_sums = vec![0.0; lags + 1];
        let mut head = Vec::with_capacity(lags);
        let mut s_n = 0.0;
        let mut s_tenth = 0.0;
        for k in 0..n {
            if x.abs() < ZERO_GUARD {
                discarded += 1;
                continue 'restart;
            }
            let y = f.eval(p, x);
            s_n += y;
            if k + 1 == tenth {
                s_tenth = s_n;
            }
            ring[k % (lags + 1)] = y;
            for (l, acc) in lag_sums.iter_mut().enumerate().take(lags.min(k) + 1) {
                *acc += y * ring[(k - l) % (lags + 1)];
            }
            if head.len() < lags {
                head.push(y);
            }
            x = p.map(x);
        }
        let tail = (n.saturating_sub(lags)..n)
            .map(|k| ring[k % (lags + 1)])
            .collect();
        return TrialStats {
            s_n,
            s_tenth,
            discarded,
            lag_sums,
            head,
            tail,
        };
    }
}

/// The two variance estimates and the diagnostics behind the degeneracy test.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SigmaEstimate {
    pub n: usize,
    pub trials: u64,
    /// Sample mean of `S_N / N`.
    pub mean: f64,
    /// Batch means: `Var(S_N) / N` across trials.
    pub batch_means: f64,
    /// `gamma_0 + 2 sum_{l<=50} gamma_l`, pooled over trials.
    pub autocov: f64,
    /// `Var(S_N) / Var(S_{N/10})`; about 10 unless `f` is a coboundary.
    pub growth_ratio: f64,
    /// Orbits that hit the zero guard and were resampled.
    pub discarded: u64,
    #[serde(skip)]
    sums: Vec<f64>,
}

impl SigmaEstimate {
    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.batch_means >= DEGENERATE_SIGMA2)
            || (self.n >= 10 && !(self.growth_ratio >= 10f64.sqrt()))
    }
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
}

/// Runs `trials` orbits of length `n` from the invariant sampler. Trial `t`
/// draws from stream `t` of the generator seeded with `seed`.
pub fn estimate_sigma(
    p: &RosenParams,
    f: &CostFn,
    sampler: &InvariantSampler,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<SigmaEstimate> {
    if n == 0 || trials < 2 {
        return Err(Error::InvalidParameter(
            "need n >= 1 and at least 2 trials".into(),
        ));
    }
    let stats: Vec<TrialStats> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(p, f, sampler, n, seed, t))
        .collect();
    let sums: Vec<f64> = stats.iter().map(|s| s.s_n).collect();
    let tenths: Vec<f64> = stats.iter().map(|s| s.s_tenth).collect();
    let nf = n as f64;
    let mean = sums.iter().sum::<f64>() / (nf * trials as f64);
    let var_n = sample_variance(&sums);
    let batch_means = var_n / nf;
    let growth_ratio = var_n / sample_variance(&tenths);

    let lags = AUTOCOV_LAGS.min(n - 1);
    let mut autocov = 0.0;
    for l in 0..=lags {
        // sum_k (y_k - m)(y_{k+l} - m) from raw sums, pooled over trials
        let mut acc = 0.0;
        for s in &stats {
            let total = s.s_n;
            let head: f64 = s.head[..l.min(s.head.len())].iter().sum();
            let tail: f64 = s.tail[s.tail.len() - l.min(s.tail.len())..].iter().sum();
            acc += s.lag_sums[l] - mean * ((total - tail) + (total - head))
                + (n - l) as f64 * mean * mean;
        }
        let gamma = acc / (trials as f64 * (n - l) as f64);
        autocov += if l == 0 { gamma } else { 2.0 * gamma };
    }
    Ok(SigmaEstimate {
        n,
        trials,
        mean,
        batch_means,
        autocov,
        growth_ratio,
        discarded: stats.iter().map(|s| s.discarded).sum(),
        sums,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CltResult {
    pub q: u32,
    pub trials: u64,
    pub n: usize,
    pub seed: u64,
    pub mean: f64,
    pub sigma2: f64,
    pub sigma2_autocov: f64,
    pub growth_ratio: f64,
    pub discarded: u64,
    pub ks_statistic: f64,
    pub ks_p_value: f64,
    pub standardized: Vec<f64>,
}

/// Standardizes `S_N f` over `trials` invariant starting points and tests the
/// result against the standard normal law.
pub fn clt_experiment(
    p: &RosenParams,
    f: &CostFn,
    sampler: &InvariantSampler,
    n: usize,
    trials: u64,
    seed: u64,
) -> Result<CltResult> {
    let est = estimate_sigma(p, f, sampler, n, trials, seed)?;
    if est.is_degenerate() {
        return Err(Error::DegenerateVariance {
            sigma2: est.batch_means,
            growth_ratio: est.growth_ratio,
        });
    }
    let nf = n as f64;
    let scale = (est.batch_means * nf).sqrt();
    let standardized: Vec<f64> = est
        .sums
        .iter()
        .map(|s| (s - nf * est.mean) / scale)
        .collect();
    let ks = ks_test(&standardized, normal_cdf);
    Ok(CltResult {
        q: p.q(),
        trials,
        n,
        seed,
        mean: est.mean,
        sigma2: est.batch_means,
        sigma2_autocov: est.autocov,
        growth_ratio: est.growth_ratio,
        discarded: est.discarded,
        ks_statistic: ks.statistic,
        ks_p_value: ks.p_value,
        standardized,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    EvidenceOfDegeneracy,
    EvidenceAgainst,
}

/// A fixed point `x = h_d(x)` and `f(x) - int f dmu` there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FixedPoint {
    pub digit: Digit,
    pub x: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionH {
    pub verdict: Verdict,
    pub witness: Option<FixedPoint>,
    pub mean: f64,
    pub candidates: Vec<FixedPoint>,
}

/// Deviations at or below this count as zero.
pub const CONDITION_H_TOL: f64 = 1e-9;

/// Fixed point of the inverse branch of `d`, if it exists inside `I_q`.
pub fn branch_fixed_point(p: &RosenParams, d: Digit) -> Option<f64> {
    let al = d.a as f64 * p.lambda();
    let x = match d.sign {
        Sign::Plus => (-al + (al * al + 4.0).sqrt()) / 2.0,
        Sign::Minus if al > 2.0 => (-al + (al * al - 4.0).sqrt()) / 2.0,
        Sign::Minus => return None,
    };
    p.cylinder_contains(d, x).then_some(x)
}

/// Looks for a fixed point `x` (period 1) of `T` whose orbit avoids the
/// discontinuities of `f` and where `S_1 f(x) = f(x)` differs from
/// `int f dmu`. Such a point rules out `f = u - u o T + int f dmu`.
pub fn condition_h_check(
    p: &RosenParams,
    f: &CostFn,
    op: &UlamOperator,
    density: &InvariantDensity,
    a_cap: u64,
) -> ConditionH {
    let mean = f.mean(op, density);
    let mut candidates = Vec::new();
    for a in p.a_min()..=a_cap {
        for sign in [Sign::Plus, Sign::Minus] {
            let d = Digit::new(sign, a);
            let Some(x) = branch_fixed_point(p, d) else {
                continue;
            };
            if f.near_discontinuity(p, x, 1e-12) {
                continue;
            }
            candidates.push(FixedPoint {
                digit: d,
                x,
                deviation: f.eval(p, x) - mean,
            });
        }
    }
    let witness = candidates
        .iter()
        .find(|c| c.deviation.abs() > CONDITION_H_TOL)
        .copied();
    ConditionH {
        verdict: if witness.is_some() {
            Verdict::EvidenceAgainst
        } else {
            Verdict::EvidenceOfDegeneracy
        },
        witness,
        mean,
        candidates,
    }
}
