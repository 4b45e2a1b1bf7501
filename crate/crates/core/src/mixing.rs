//! Forward images of intervals under `T_q`, the bad-interval classification,
//! and the expansion of every subinterval to all of `I_q`.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalSet};
use crate::rosen_map::{Digit, RosenParams, ZERO_GUARD};

/// Coverage counts as full at this distance below `lambda_q`.
pub const FULL_TOLERANCE: f64 = 1e-9;

/// `T(S)`, computed component by component over the cylinders each one meets.
pub fn image_of_interval(p: &RosenParams, s: &IntervalSet) -> IntervalSet {
    let mut parts = Vec::new();
    for c in s.components() {
        if c.lo <= ZERO_GUARD && c.hi >= -ZERO_GUARD {
            return IntervalSet::from(p.interval());
        }
        parts.extend_from_slice(p.cover(c.lo, c.hi).image(p).components());
    }
    IntervalSet::new(parts)
}

pub fn is_full(p: &RosenParams, s: &IntervalSet) -> bool {
    s.measure() >= p.lambda() - FULL_TOLERANCE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BadType {
    /// Inside one positive cylinder: image `[T(d), T(c)]`.
    A,
    /// Inside one negative cylinder.
    B,
    /// Across two adjacent positive cylinders: image `[-sigma, T(c)] ∪ [T(d), sigma]`.
    C,
    /// Across two adjacent negative cylinders.
    D,
    /// The image is already all of `I_q`.
    None,
    /// The image contains 0, so the next image is all of `I_q`.
    FullNext,
}

/// Type of `[c, d]` with `0` not inside `(c, d)`.
pub fn classify_bad_type(p: &RosenParams, c: f64, d: f64) -> Result<BadType> {
    if !(c < d) {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{c}, {d}]"
        )));
    }
    if c < 0.0 && d > 0.0 {
        return Err(Error::ContainsZero { c, d });
    }
    if d <= 0.0 {
        return Ok(match classify_bad_type(p, -d, -c)? {
            BadType::A => BadType::B,
            BadType::C => BadType::D,
            other => other,
        });
    }
    let cover = p.cover(c, d);
    if !cover.runs.is_empty() {
        return Ok(BadType::FullNext);
    }
    let image = cover.image(p);
    if is_full(p, &image) {
        return Ok(BadType::None);
    }
    if image.contains(0.0) {
        return Ok(BadType::FullNext);
    }
    Ok(match cover.pieces.len() {
        1 => BadType::A,
        _ => BadType::C,
    })
}

/// One entry of a mixing trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceStep {
    pub step: usize,
    pub components: IntervalSet,
    pub measure: f64,
    /// Classification of the folded set when it is a single interval.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bad_type: Option<BadType>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixingRun {
    pub q: u32,
    /// First `N` with `T^N [c, d]` of full measure.
    pub n: usize,
    pub trace: Vec<TraceStep>,
}

/// Iterates `S -> T(|S|)` from `[c, d]` until the set has full measure.
/// Folding does not change the image since `T` is even, so step `i` of the
/// trace is exactly `T^i [c, d]`.
pub fn iterate_until_full(p: &RosenParams, c: f64, d: f64, max_iter: usize) -> Result<MixingRun> {
    if !(c < d) {
        return Err(Error::InvalidParameter(format!(
            "empty interval [{c}, {d}]"
        )));
    }
    let dom = p.interval();
    if c < dom.lo - 1e-12 || d > dom.hi + 1e-12 {
        return Err(Error::OutOfDomain {
            x: if c < dom.lo { c } else { d },
            sigma: p.sigma(),
        });
    }
    let mut s = IntervalSet::single(c.max(dom.lo), d.min(dom.hi));
    let mut trace = Vec::new();
    for step in 0..=max_iter {
        let folded = s.fold();
        let bad_type = match folded.components() {
            [one] => classify_bad_type(p, one.lo, one.hi).ok(),
            _ => None,
        };
        let full = is_full(p, &s);
        trace.push(TraceStep {
            step,
            measure: s.measure(),
            components: s,
            bad_type: if full { None } else { bad_type },
        });
        if full {
            return Ok(MixingRun {
                q: p.q(),
                n: step,
                trace,
            });
        }
        if step == max_iter {
            break;
        }
        s = image_of_interval(p, &folded);
    }
    let last_measure = trace.last().map_or(0.0, |t| t.measure);
    Err(Error::NotMixed {
        max_iter,
        last_measure,
        trace,
    })
}

/// The `eps` of the type-(c) estimate: largest `2^-j` with `1/sqrt(2) - eps`
/// in the cylinder of `(+1, 1)` and `T(1/sqrt(2) - eps) < 0`. There is none
/// for `q = 3` (no digit 1) and `q = 4` (`T(1/sqrt(2)) = 0`).
pub fn mixing_epsilon(p: &RosenParams) -> Option<f64> {
    let d1 = Digit::plus(1);
    if !p.is_admissible(d1) {
        return None;
    }
    // below 2^-40 the sign of T is decided by rounding in 1/x
    (1..=40).map(|j| 0.5f64.powi(j)).find(|&eps| {
        let x = FRAC_1_SQRT_2 - eps;
        p.cylinder_contains(d1, x) && p.map(x) < 0.0
    })
}

/// Lower bound on the growth of a bad interval of the given type.
pub fn growth_bound(p: &RosenParams, bad: BadType, interval: Interval) -> Option<f64> {
    match bad {
        BadType::A | BadType::B => Some(1.0 / (p.sigma() * p.sigma())),
        BadType::C | BadType::D => {
            let reach = match mixing_epsilon(p) {
                Some(eps) => FRAC_1_SQRT_2 - eps,
                None => interval.lo.abs().max(interval.hi.abs()),
            };
            Some(0.5 / (reach * reach))
        }
        BadType::None | BadType::FullNext => None,
    }
}

/// Growth along one bad step: longest component of the next set over the
/// measure of the current folded interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthStep {
    pub step: usize,
    pub bad_type: BadType,
    pub ratio: f64,
    pub bound: f64,
    /// `m(S_{i+1}) >= m(|S_i|)`.
    pub monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GrowthReport {
    pub steps: Vec<GrowthStep>,
    pub min_ratio: f64,
    /// Every ratio exceeds 1.
    pub holds: bool,
    /// Every ratio meets its type bound (up to `1e-9`).
    pub bounds_hold: bool,
}

pub fn growth_factor_check(p: &RosenParams, trace: &[TraceStep]) -> GrowthReport {
    let mut steps = Vec::new();
    for w in trace.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let Some(bad) = cur.bad_type else { continue };
        let folded = cur.components.fold();
        let Some(&iv) = folded.components().first() else {
            continue;
        };
        let Some(bound) = growth_bound(p, bad, iv) else {
            continue;
        };
        let longest = next
            .components
            .components()
            .iter()
            .map(Interval::length)
            .fold(0.0, f64::max);
        let m = folded.measure();
        steps.push(GrowthStep {
            step: cur.step,
            bad_type: bad,
            ratio: longest / m,
            bound,
            monotone: next.measure >= m - 1e-12,
        });
    }
    let min_ratio = steps.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    GrowthReport {
        holds: steps.iter().all(|s| s.ratio > 1.0),
        bounds_hold: steps.iter().all(|s| s.ratio >= s.bound - 1e-9),
        min_ratio,
        steps,
    }
}

/// Smallest `N` with `m(T^N I ∩ T^N J) > 0`, or `None` within `max_iter`.
pub fn condition_star(p: &RosenParams, i: Interval, j: Interval, max_iter: usize) -> Option<usize> {
    let mut a = IntervalSet::from(i);
    let mut b = IntervalSet::from(j);
    for n in 0..=max_iter {
        if a.intersection_measure(&b) > 1e-12 {
            return Some(n);
        }
        a = image_of_interval(p, &a.fold());
        b = image_of_interval(p, &b.fold());
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn params(q: u32) -> RosenParams {
        RosenParams::new(q).unwrap()
    }

    #[test]
    fn image_examples() {
        let p = params(5);
        let full = image_of_interval(&p, &IntervalSet::single(-0.1, 0.2));
        assert_eq!(full, IntervalSet::from(p.interval()));

        let img = image_of_interval(&p, &IntervalSet::single(0.42, 0.6));
        assert_eq!(img.components().len(), 1);
        let iv = img.components()[0];
        assert!((iv.lo - p.map(0.6)).abs() < 1e-14 && (iv.hi - p.map(0.42)).abs() < 1e-14);
        assert!(iv.length() >= 0.18 / (p.sigma() * p.sigma()));

        // straddles the boundary 2/(3 lambda) between the a=1 and a=2 cylinders
        let b = 2.0 / (3.0 * p.lambda());
        let img = image_of_interval(&p, &IntervalSet::single(b - 0.01, b + 0.01));
        assert_eq!(img.components().len(), 2);
        assert_eq!(img.components()[0].lo, -p.sigma());
        assert_eq!(img.components()[1].hi, p.sigma());
    }

    #[test]
    fn classification_examples() {
        let p = params(5);
        assert_eq!(classify_bad_type(&p, 0.42, 0.6).unwrap(), BadType::A);
        assert_eq!(classify_bad_type(&p, -0.6, -0.42).unwrap(), BadType::B);
        assert_eq!(classify_bad_type(&p, 0.1, 0.6).unwrap(), BadType::FullNext);
        let b = 2.0 / (5.0 * p.lambda());
        assert_eq!(
            classify_bad_type(&p, b - 0.001, b + 0.001).unwrap(),
            BadType::C
        );
        assert_eq!(
            classify_bad_type(&p, -b - 0.001, -b + 0.001).unwrap(),
            BadType::D
        );
        assert!(matches!(
            classify_bad_type(&p, -0.1, 0.1),
            Err(Error::ContainsZero { .. })
        ));
    }

    #[test]
    fn iteration_examples() {
        let p = params(5);
        assert_eq!(
            iterate_until_full(&p, -p.sigma(), p.sigma(), 10).unwrap().n,
            0
        );
        assert_eq!(iterate_until_full(&p, -0.01, 0.02, 10).unwrap().n, 1);
        assert!(iterate_until_full(&p, 0.3, 0.3, 10).is_err());
        match iterate_until_full(&p, 0.42, 0.4201, 1) {
            Err(Error::NotMixed { trace, .. }) => assert_eq!(trace.len(), 2),
            other => panic!("expected NotMixed, got {other:?}"),
        }
    }

    #[test]
    fn q3_type_a_steps_grow_fourfold() {
        let p = params(3);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut seen_a = 0;
        for _ in 0..200 {
            let c = rng.random_range(-0.5..0.4999);
            let len = rng.random_range(1e-4..1e-2);
            let run = iterate_until_full(&p, c, (c + len).min(0.5), 200).unwrap();
            let g = growth_factor_check(&p, &run.trace);
            assert!(g.holds && g.bounds_hold, "{g:?}");
            assert!(g.steps.iter().all(|s| s.monotone));
            seen_a += g
                .steps
                .iter()
                .filter(|s| matches!(s.bad_type, BadType::A | BadType::B))
                .count();
        }
        assert!(seen_a > 0);
    }

    #[test]
    fn images_contain_pointwise_images() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for q in [3, 4, 5, 7, 12] {
            let p = params(q);
            for _ in 0..50 {
                let c = rng.random_range(-p.sigma()..p.sigma());
                let d = (c + rng.random_range(1e-4..0.3)).min(p.sigma());
                let img = image_of_interval(&p, &IntervalSet::single(c, d));
                assert!(img.measure() <= p.lambda() + 1e-12);
                for _ in 0..20 {
                    let x = rng.random_range(c..=d);
                    let y = p.map(x);
                    let inside = img
                        .components()
                        .iter()
                        .any(|iv| iv.lo - 1e-12 <= y && y <= iv.hi + 1e-12);
                    assert!(inside || x.abs() < ZERO_GUARD, "q={q} x={x} y={y} {img:?}");
                }
            }
        }
    }

    #[test]
    fn epsilon_exists_from_q5() {
        assert_eq!(mixing_epsilon(&params(3)), None);
        assert_eq!(mixing_epsilon(&params(4)), None);
        for q in 5..=20 {
            let p = params(q);
            let eps = mixing_epsilon(&p).unwrap();
            assert!(eps > 0.0);
            assert!(p.cylinder_contains(Digit::plus(1), FRAC_1_SQRT_2 - eps));
            assert!(p.map(FRAC_1_SQRT_2 - eps) < 0.0);
            // the next larger power of two fails one of the conditions
            let x = FRAC_1_SQRT_2 - 2.0 * eps;
            assert!(!(p.cylinder_contains(Digit::plus(1), x) && p.map(x) < 0.0));
        }
    }

    #[test]
    fn condition_star_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for q in [3, 5, 7] {
            let p = params(q);
            for _ in 0..50 {
                let mk = |rng: &mut ChaCha8Rng| {
                    let c = rng.random_range(-p.sigma()..p.sigma() - 1e-3);
                    Interval::new(c, c + 1e-3)
                };
                let (i, j) = (mk(&mut rng), mk(&mut rng));
                assert!(condition_star(&p, i, j, 200).is_some());
            }
        }
    }
}
