//! The Rosen map `T_q(x) = |1/x| - lambda_q * floor(|1/(lambda_q x)| + 1/2)` on
//! `I_q = [-lambda_q/2, lambda_q/2]`, its digits, cylinders and inverse branches.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};

/// Orbit values with `|x|` below this are treated as 0.
pub const ZERO_GUARD: f64 = 1e-13;

/// Default cap on enumerated digits.
pub const DEFAULT_A_MAX: u64 = 10_000;

/// Inputs this far outside `I_q` are clamped rather than rejected.
const DOMAIN_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Sign::Minus),
            1 => Ok(Sign::Plus),
            _ => Err(format!("sign must be +1 or -1, got {v}")),
        }
    }
}

/// One step of the expansion `x = e1/(a1*lambda + e2/(a2*lambda + ...))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Digit {
    pub sign: Sign,
    pub a: u64,
}

impl Digit {
    pub fn new(sign: Sign, a: u64) -> Self {
        Self { sign, a }
    }

    pub fn plus(a: u64) -> Self {
        Self::new(Sign::Plus, a)
    }

    pub fn minus(a: u64) -> Self {
        Self::new(Sign::Minus, a)
    }
}

impl fmt::Display for Digit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.sign {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        };
        write!(f, "({s}, {})", self.a)
    }
}

/// A forward branch together with its domain and range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Branch {
    pub digit: Digit,
    /// Domain of the forward branch (range of the inverse branch).
    pub cylinder: Interval,
    /// `T` applied to the cylinder.
    pub image: Interval,
}

/// Part of an interval that falls inside a single cylinder.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct CoverPiece {
    pub digit: Digit,
    pub overlap: Interval,
    pub image: Interval,
}

/// Consecutive full cylinders `first..=last` (`None` = unbounded) of one sign.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct FullRun {
    pub sign: Sign,
    pub first: u64,
    pub last: Option<u64>,
}

/// How an interval decomposes over the cylinder partition: explicit end
/// pieces plus runs of cylinders it contains entirely.
#[derive(Clone, Debug, Default, PartialEq)]
pub(crate) struct Cover {
    pub pieces: Vec<CoverPiece>,
    pub runs: Vec<FullRun>,
}

impl Cover {
    pub fn image(&self, p: &RosenParams) -> IntervalSet {
        if !self.runs.is_empty() {
            return IntervalSet::from(p.interval());
        }
        IntervalSet::new(self.pieces.iter().map(|pc| pc.image).collect())
    }
}

/// The family index `q` with the derived constants of `T_q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RosenParams {
    q: u32,
    lambda: f64,
    sigma: f64,
    a_min: u64,
}

impl RosenParams {
    pub fn new(q: u32) -> Result<Self> {
        if q < 3 {
            return Err(Error::InvalidParameter(format!(
                "q must be at least 3, got {q}"
            )));
        }
        // cos(pi/3) rounds one ulp above 1/2; keep the integer case exact.
        let lambda = if q == 3 {
            1.0
        } else {
            2.0 * (PI / q as f64).cos()
        };
        let sigma = lambda / 2.0;
        let a_min = (1u64..)
            .find(|&a| 2.0 / ((2 * a + 1) as f64 * lambda) < sigma)
            .expect("some digit is admissible");
        Ok(Self {
            q,
            lambda,
            sigma,
            a_min,
        })
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Properness constant `max{|a|, |b|}` of `I_q`, equal to `sigma`.
    pub fn gamma(&self) -> f64 {
        self.sigma
    }

    /// Smallest admissible digit value.
    pub fn a_min(&self) -> u64 {
        self.a_min
    }

    pub fn interval(&self) -> Interval {
        Interval::new(-self.sigma, self.sigma)
    }

    pub fn check_domain(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || x.abs() > self.sigma + DOMAIN_SLACK {
            return Err(Error::OutOfDomain {
                x,
                sigma: self.sigma,
            });
        }
        Ok(x.clamp(-self.sigma, self.sigma))
    }

    /// One application of `T_q`, returning the digit consumed. Points inside
    /// the zero guard map to 0 with no digit.
    pub fn step(&self, x: f64) -> Result<(f64, Option<Digit>)> {
        let x = self.check_domain(x)?;
        Ok(self.step_unchecked(x))
    }

    #[inline]
    pub fn step_unchecked(&self, x: f64) -> (f64, Option<Digit>) {
        let ax = x.abs();
        if ax < ZERO_GUARD {
            return (0.0, None);
        }
        let a = self.digit_value(ax);
        let next = (1.0 / ax - a as f64 * self.lambda).clamp(-self.sigma, self.sigma);
        (next, Some(Digit::new(Sign::of(x), a)))
    }

    #[inline]
    pub fn map(&self, x: f64) -> f64 {
        self.step_unchecked(x).0
    }

    pub fn digit(&self, x: f64) -> Option<Digit> {
        self.step_unchecked(x).1
    }

    /// `floor(1/(lambda |x|) + 1/2)` for `|x| > 0`.
    #[inline]
    pub(crate) fn digit_value(&self, ax: f64) -> u64 {
        let a = (1.0 / (self.lambda * ax) + 0.5).floor();
        (a as u64).max(self.a_min)
    }

    pub fn expand(&self, x: f64, n: usize) -> Result<Vec<Digit>> {
        let mut x = self.check_domain(x)?;
        let mut digits = Vec::with_capacity(n);
        for _ in 0..n {
            match self.step_unchecked(x) {
                (next, Some(d)) => {
                    digits.push(d);
                    x = next;
                }
                (_, None) => break,
            }
        }
        Ok(digits)
    }

    /// Finite continued fraction, evaluated inner to outer. Empty input is 0.
    pub fn evaluate_cf(&self, digits: &[Digit]) -> f64 {
        digits.iter().rev().fold(0.0, |tail, d| {
            d.sign.as_f64() / (d.a as f64 * self.lambda + tail)
        })
    }

    pub fn is_admissible(&self, d: Digit) -> bool {
        d.a >= self.a_min
    }

    fn require_admissible(&self, d: Digit) -> Result<()> {
        if self.is_admissible(d) {
            Ok(())
        } else {
            Err(Error::EmptyCylinder {
                q: self.q,
                sign: d.sign.into(),
                a: d.a,
            })
        }
    }

    /// Positive-side cylinder bounds `(2/((2a+1)lambda), min(sigma, 2/((2a-1)lambda))]`.
    #[inline]
    fn positive_cylinder(&self, a: u64) -> (f64, f64) {
        let lo = 2.0 / ((2 * a + 1) as f64 * self.lambda);
        let hi = (2.0 / ((2 * a - 1) as f64 * self.lambda)).min(self.sigma);
        (lo, hi)
    }

    /// Closure of the cylinder of `d`. As a set the cylinder is half-open,
    /// closed on the side away from 0; see [`RosenParams::cylinder_contains`].
    pub fn cylinder(&self, d: Digit) -> Result<Interval> {
        self.require_admissible(d)?;
        let (lo, hi) = self.positive_cylinder(d.a);
        Ok(match d.sign {
            Sign::Plus => Interval::new(lo, hi),
            Sign::Minus => Interval::new(-hi, -lo),
        })
    }

    pub fn cylinder_contains(&self, d: Digit, x: f64) -> bool {
        if !self.is_admissible(d) || Sign::of(x) != d.sign || x == 0.0 {
            return false;
        }
        let (lo, hi) = self.positive_cylinder(d.a);
        let ax = x.abs();
        lo < ax && ax <= hi
    }

    /// Whether the cylinder of `d` is cut short by the endpoint of `I_q`.
    pub fn is_clipped(&self, d: Digit) -> bool {
        2.0 / ((2 * d.a - 1) as f64 * self.lambda) > self.sigma
    }

    /// `T_q(sigma_q)`, the free endpoint of the clipped branch image.
    pub fn clipped_image_lo(&self) -> f64 {
        1.0 / self.sigma - self.a_min as f64 * self.lambda
    }

    pub fn branch_image(&self, d: Digit) -> Result<Interval> {
        self.require_admissible(d)?;
        Ok(if self.is_clipped(d) {
            Interval::new(1.0 / self.sigma - d.a as f64 * self.lambda, self.sigma)
        } else {
            self.interval()
        })
    }

    /// `h(y) = sign/(y + a lambda)`, the inverse of the branch of `d`.
    pub fn inverse_branch(&self, d: Digit, y: f64) -> Result<f64> {
        let image = self.branch_image(d)?;
        if !(image.lo - DOMAIN_SLACK..=image.hi + DOMAIN_SLACK).contains(&y) {
            return Err(Error::OutOfDomain {
                x: y,
                sigma: self.sigma,
            });
        }
        Ok(d.sign.as_f64() / (y + d.a as f64 * self.lambda))
    }

    pub fn branch(&self, d: Digit) -> Result<Branch> {
        Ok(Branch {
            digit: d,
            cylinder: self.cylinder(d)?,
            image: self.branch_image(d)?,
        })
    }

    /// All branches with `a <= a_max`, positive and negative.
    pub fn branches(&self, a_max: u64) -> Vec<Branch> {
        (self.a_min..=a_max)
            .flat_map(|a| [Digit::plus(a), Digit::minus(a)])
            .map(|d| self.branch(d).expect("admissible by construction"))
            .collect()
    }

    /// Lebesgue measure of the cylinders with `a > a_max`.
    pub fn omitted_length(&self, a_max: u64) -> f64 {
        4.0 / ((2 * a_max + 1) as f64 * self.lambda)
    }

    /// Closed-form bounds `gamma^(2n)` on `1/|(T^n)'|` and
    /// `2 gamma (1 - gamma^(2n)) / (1 - gamma^2)` on its derivative.
    pub fn expansion_bounds(&self, n: u32) -> (f64, f64) {
        let g = self.gamma();
        let g2n = g.powi(2 * n as i32);
        (g2n, 2.0 * g * (1.0 - g2n) / (1.0 - g * g))
    }

    /// Decomposition of `[c, d]` over cylinders.
    pub(crate) fn cover(&self, c: f64, d: f64) -> Cover {
        let mut cover = Cover::default();
        if d > 0.0 && d > c {
            self.positive_cover(c.max(0.0), d, Sign::Plus, &mut cover);
        }
        if c < 0.0 && d > c {
            self.positive_cover((-d).max(0.0), -c, Sign::Minus, &mut cover);
        }
        cover
    }

    fn positive_cover(&self, lo: f64, hi: f64, sign: Sign, cover: &mut Cover) {
        let mirror = |iv: Interval| match sign {
            Sign::Plus => iv,
            Sign::Minus => Interval::new(-iv.hi, -iv.lo),
        };
        if hi <= ZERO_GUARD {
            let first = self.digit_value(ZERO_GUARD);
            cover.runs.push(FullRun {
                sign,
                first,
                last: None,
            });
            return;
        }
        let a_outer = self.digit_value(hi);
        let reaches_zero = lo <= ZERO_GUARD;
        let a_inner = if reaches_zero {
            a_outer
        } else {
            self.digit_value(lo)
        };
        let mut push_piece = |a: u64| {
            let (cl, ch) = self.positive_cylinder(a);
            let olo = cl.max(lo);
            let ohi = ch.min(hi);
            if ohi - olo <= 1e-15 {
                return;
            }
            let full_top = ohi >= ch;
            let top = if full_top {
                if self.is_clipped(Digit::plus(a)) {
                    self.clipped_image_lo()
                } else {
                    -self.sigma
                }
            } else {
                1.0 / ohi - a as f64 * self.lambda
            };
            let bottom = if olo <= cl {
                self.sigma
            } else {
                1.0 / olo - a as f64 * self.lambda
            };
            let image = Interval::new(
                top.clamp(-self.sigma, self.sigma),
                bottom
                    .clamp(-self.sigma, self.sigma)
                    .max(top.clamp(-self.sigma, self.sigma)),
            );
            cover.pieces.push(CoverPiece {
                digit: Digit::new(sign, a),
                overlap: mirror(Interval::new(olo, ohi)),
                image,
            });
        };
        push_piece(a_outer);
        if a_inner > a_outer {
            push_piece(a_inner);
        }
        if reaches_zero {
            cover.runs.push(FullRun {
                sign,
                first: a_outer + 1,
                last: None,
            });
        } else if a_inner > a_outer + 1 {
            cover.runs.push(FullRun {
                sign,
                first: a_outer + 1,
                last: Some(a_inner - 1),
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(q: u32) -> RosenParams {
        RosenParams::new(q).unwrap()
    }

    #[test]
    fn make_params_values() {
        let p3 = params(3);
        assert_eq!(p3.lambda(), 1.0);
        assert!((p3.sigma() - 0.5).abs() < 1e-15);
        assert!((params(4).lambda() - 2f64.sqrt()).abs() < 1e-15);
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((params(5).lambda() - phi).abs() < 1e-15);
        assert!(matches!(
            RosenParams::new(2),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn lambda_satisfies_minimal_polynomials() {
        let l = |q| params(q).lambda();
        assert!((l(3) - 1.0).abs() < 1e-15);
        assert!((l(4) * l(4) - 2.0).abs() < 1e-14);
        assert!((l(5) * l(5) - l(5) - 1.0).abs() < 1e-14);
        assert!((l(6) * l(6) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn params_invariants_hold_across_family() {
        let mut prev = 0.0;
        for q in 3..60 {
            let p = params(q);
            assert!(p.lambda() >= 1.0 && p.lambda() < 2.0);
            assert!(p.gamma() < 1.0);
            assert!(p.lambda() > prev);
            prev = p.lambda();
            assert_eq!(p.a_min(), if q == 3 { 2 } else { 1 });
        }
    }

    #[test]
    fn step_examples() {
        let p = params(3);
        assert_eq!(p.step(0.0).unwrap(), (0.0, None));
        let (x, d) = p.step(0.45).unwrap();
        assert!((x - (1.0 / 0.45 - 2.0)).abs() < 1e-15);
        assert_eq!(d, Some(Digit::plus(2)));
        let (x, d) = p.step(-0.45).unwrap();
        assert!((x - (1.0 / 0.45 - 2.0)).abs() < 1e-15);
        assert_eq!(d, Some(Digit::minus(2)));
        assert!(matches!(p.step(0.6), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn expand_examples() {
        let p = params(3);
        assert!(p.expand(0.0, 5).unwrap().is_empty());
        assert_eq!(p.expand(0.45, 1).unwrap(), vec![Digit::plus(2)]);
        let p5 = params(5);
        assert_eq!(
            p5.expand(1.0 / 2f64.sqrt(), 1).unwrap(),
            vec![Digit::plus(1)]
        );
        assert!((p5.map(1.0 / 2f64.sqrt()) - (2f64.sqrt() - p5.lambda())).abs() < 1e-15);
    }

    #[test]
    fn evaluate_cf_examples() {
        let p = params(3);
        assert_eq!(p.evaluate_cf(&[]), 0.0);
        assert!((p.evaluate_cf(&[Digit::plus(2)]) - 0.5).abs() < 1e-15);
        let digits = p.expand(0.45, 10).unwrap();
        assert!((p.evaluate_cf(&digits) - 0.45).abs() <= 0.5f64.powi(20));
        let p5 = params(5);
        let phi = p5.lambda();
        let v = p5.evaluate_cf(&[Digit::plus(1), Digit::minus(1)]);
        assert!((v - 1.0 / (phi - 1.0 / phi)).abs() < 1e-15);
    }

    #[test]
    fn cylinder_examples() {
        let p = params(3);
        let c = p.cylinder(Digit::plus(2)).unwrap();
        assert!((c.lo - 0.4).abs() < 1e-15 && (c.hi - 0.5).abs() < 1e-15);
        let c = p.cylinder(Digit::minus(2)).unwrap();
        assert!((c.lo + 0.5).abs() < 1e-15 && (c.hi + 0.4).abs() < 1e-15);
        assert!(p.cylinder_contains(Digit::minus(2), -0.5));
        assert!(!p.cylinder_contains(Digit::minus(2), -0.4));
        assert!(p.cylinder_contains(Digit::plus(3), 0.4));
        assert!(matches!(
            p.cylinder(Digit::plus(1)),
            Err(Error::EmptyCylinder { .. })
        ));

        let p5 = params(5);
        let c = p5.cylinder(Digit::plus(1)).unwrap();
        assert!((c.lo - 1.0 / (3.0 * p5.sigma())).abs() < 1e-15);
        assert!((c.hi - p5.sigma()).abs() < 1e-15);
    }

    #[test]
    fn inverse_branch_examples() {
        let p = params(3);
        assert!((p.inverse_branch(Digit::plus(2), 0.0).unwrap() - 0.5).abs() < 1e-15);
        let y = 1.0 / 0.45 - 2.0;
        assert!((p.inverse_branch(Digit::plus(2), y).unwrap() - 0.45).abs() < 1e-15);
        // branch (+,2) at q=3 only covers [0, 1/2]
        assert!(p.inverse_branch(Digit::plus(2), -0.1).is_err());
        let p5 = params(5);
        let x = p5.inverse_branch(Digit::plus(1), 0.0).unwrap();
        assert!((x - 1.0 / p5.lambda()).abs() < 1e-15);
    }

    #[test]
    fn branch_images_are_full_or_share_endpoint() {
        for q in [3, 4, 5, 7, 12] {
            let p = params(q);
            for b in p.branches(50) {
                let full = b.image == p.interval();
                let shares = b.image.hi == p.sigma() || b.image.lo == -p.sigma();
                assert!(full || shares, "q={q} {:?}", b);
                assert_eq!(full, !p.is_clipped(b.digit));
            }
        }
    }

    #[test]
    fn expansion_bound_examples() {
        let (a, b) = params(3).expansion_bounds(2);
        assert!((a - 0.0625).abs() < 1e-15);
        assert!((b - 1.25).abs() < 1e-15);
        let p5 = params(5);
        let (a, b) = p5.expansion_bounds(1);
        let g = p5.gamma();
        assert!((a - g * g).abs() < 1e-15 && (a - 0.654_508_497).abs() < 1e-9);
        assert!((b - 2.0 * g).abs() < 1e-15 && (b - 1.618_033_988).abs() < 1e-9);
        let mut prev = f64::INFINITY;
        for n in 1..200 {
            let (a, _) = p5.expansion_bounds(n);
            assert!(a < prev);
            prev = a;
        }
    }

    #[test]
    fn cylinders_partition_the_interval() {
        for q in [3, 4, 5, 7, 12] {
            let p = params(q);
            let a_max = DEFAULT_A_MAX;
            let mut cyls: Vec<Interval> = p.branches(a_max).iter().map(|b| b.cylinder).collect();
            cyls.sort_by(|a, b| a.lo.total_cmp(&b.lo));
            for w in cyls.windows(2) {
                assert!(w[0].hi <= w[1].lo + 1e-15, "overlap at q={q}");
            }
            let covered: f64 = cyls.iter().map(Interval::length).sum();
            let deficit = p.lambda() - covered;
            assert!((deficit - p.omitted_length(a_max)).abs() < 1e-12);
            assert!(deficit <= 4.0 / ((2 * a_max - 1) as f64 * p.lambda()));
            assert!(deficit < 1e-3);
        }
    }

    #[test]
    fn cover_of_interval_spanning_three_cylinders() {
        let p = params(5);
        let cover = p.cover(0.2, 0.6);
        assert_eq!(cover.pieces.len(), 2);
        assert_eq!(cover.runs.len(), 1);
        assert_eq!(cover.image(&p).measure(), p.lambda());
        let straddle = p.cover(-0.1, 0.1);
        assert_eq!(straddle.runs.len(), 2);
        assert!(straddle.runs.iter().all(|r| r.last.is_none()));
    }
}
