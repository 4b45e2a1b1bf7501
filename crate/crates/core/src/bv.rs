//! Bounded variation: the Lasota-Yorke constants of the Rosen transfer
//! operator and Monte Carlo checks of the inequality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::interval::{Interval, MERGE_TOLERANCE};
use crate::piecewise::PiecewiseFn;
use crate::rosen_map::RosenParams;
use crate::transfer::{TransferOperator, UlamOperator};

/// Variation of a staircase with the given per-bin values.
pub fn staircase_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// The distinct sets `T^n I_h` over all depth-`n` cylinders `I_h`.
///
/// Built by the recursion `S_n = { T(J ∩ I_d) : J in S_{n-1} }`. Every
/// member is `I_q` or an interval sharing an endpoint with it.
pub fn cylinder_images(p: &RosenParams, n: u32) -> Vec<Interval> {
    let mut level = vec![p.interval()];
    for _ in 0..n {
        let mut next: Vec<Interval> = Vec::new();
        for j in &level {
            let cover = p.cover(j.lo, j.hi);
            let mut images: Vec<Interval> = cover.pieces.iter().map(|pc| pc.image).collect();
            if !cover.runs.is_empty() {
                images.push(p.interval());
            }
            for im in images {
                if im.length() <= MERGE_TOLERANCE {
                    continue;
                }
                let seen = next.iter().any(|s| {
                    (s.lo - im.lo).abs() < MERGE_TOLERANCE && (s.hi - im.hi).abs() < MERGE_TOLERANCE
                });
                if !seen {
                    next.push(im);
                }
            }
        }
        next.sort_by(|a, b| a.lo.total_cmp(&b.lo).then(a.hi.total_cmp(&b.hi)));
        level = next;
    }
    level
}

/// `eps_n = min_h m(T^n I_h)`; `eps_0 = m(I_q)`.
pub fn epsilon_n(p: &RosenParams, n: u32) -> f64 {
    cylinder_images(p, n)
        .iter()
        .map(Interval::length)
        .fold(f64::INFINITY, f64::min)
}

/// Constants of `var H^k f <= rho var f + M0 ||f||_1` and of the iterated
/// bounds derived from it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LyConstants {
    pub q: u32,
    pub gamma: f64,
    pub k: u32,
    pub rho: f64,
    pub eps_k: f64,
    pub m0: f64,
    pub m: f64,
    pub c: f64,
    pub d: f64,
}

pub fn ly_constants(p: &RosenParams) -> LyConstants {
    let g = p.gamma();
    let k = (1u32..)
        .find(|&k| 2.0 * g.powi(2 * k as i32) < 1.0)
        .expect("gamma < 1");
    let rho = 2.0 * g.powi(2 * k as i32);
    let eps_k = epsilon_n(p, k);
    let (_, deriv) = p.expansion_bounds(k);
    let m0 = deriv + 1.0 / eps_k;
    let m = m0 + 1.0 - rho;
    let max_inv_eps = (0..k).map(|j| 1.0 / epsilon_n(p, j)).fold(0.0, f64::max);
    LyConstants {
        q: p.q(),
        gamma: g,
        k,
        rho,
        eps_k,
        m0,
        m,
        c: m / (1.0 - rho),
        d: 2.0 + 2.0 * g / (1.0 - g * g) + max_inv_eps,
    }
}

/// How `H^k f` is realized numerically.
#[derive(Clone, Copy, Debug)]
pub enum Realization<'a> {
    /// Bin projection followed by `k` Ulam matrix applications.
    Ulam(&'a UlamOperator),
    /// Exact `H` evaluated at `nodes + 1` uniform points, with piecewise-linear
    /// resampling between applications.
    Grid { nodes: usize },
}

/// One evaluation of the Lasota-Yorke inequality.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LyTrial {
    pub q: u32,
    pub k: u32,
    pub var_f: f64,
    pub l1_f: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub budget: f64,
    pub margin: f64,
    pub holds: bool,
}

/// Relative floating-point slack added to every right-hand side.
const FLOAT_SLACK: f64 = 1e-12;

/// `lhs = var(H^k f)` for the chosen realization against
/// `rhs = rho var f + M0 ||f||_1 + budget`.
pub fn ly_check(
    p: &RosenParams,
    consts: &LyConstants,
    f: &PiecewiseFn,
    realization: Realization,
) -> LyTrial {
    let k = consts.k;
    let var_f = f.total_variation();
    let l1_f = f.l1_norm();
    let (lhs, resampling) = match realization {
        Realization::Ulam(op) => {
            let mut v = op.project(f);
            for _ in 0..k {
                v = op.apply(&v);
            }
            (staircase_variation(&v), 0.0)
        }
        Realization::Grid { nodes } => {
            let h = TransferOperator::exact(*p);
            let w = p.lambda() / nodes as f64;
            let mut g = f.clone();
            let mut resampling = 0.0;
            for step in 0..k {
                g = h.apply_grid(&g, nodes);
                if step + 1 < k {
                    // interpolation moves at most w * var in L^1, which later
                    // steps can only amplify through the L^1 term
                    resampling += consts.m0 * w * g.total_variation();
                }
            }
            (g.total_variation(), resampling)
        }
    };
    let core = consts.rho * var_f + consts.m0 * l1_f;
    let budget = resampling + FLOAT_SLACK * (1.0 + core);
    let rhs = core + budget;
    LyTrial {
        q: p.q(),
        k,
        var_f,
        l1_f,
        lhs,
        rhs,
        budget,
        margin: rhs - lhs,
        holds: lhs <= rhs,
    }
}

/// Seeded random staircase on `I_q` with `1..=max_pieces` pieces.
pub fn random_test_function(
    p: &RosenParams,
    seed: u64,
    trial: u64,
    max_pieces: usize,
) -> PiecewiseFn {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    let pieces = rng.random_range(1..=max_pieces.max(1));
    PiecewiseFn::random_staircase(p.interval(), pieces, &mut rng)
}

/// `ly_check` over `trials` random staircases, in parallel, ordered by trial.
pub fn ly_monte_carlo(
    p: &RosenParams,
    realization: Realization,
    trials: u64,
    max_pieces: usize,
    seed: u64,
) -> (LyConstants, Vec<LyTrial>) {
    let consts = ly_constants(p);
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            ly_check(
                p,
                &consts,
                &random_test_function(p, seed, t, max_pieces),
                realization,
            )
        })
        .collect();
    (consts, results)
}

/// One row of the iterated-bound check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IteratedBound {
    pub n: u32,
    pub lhs: f64,
    pub rhs: f64,
}

/// `||H_N^{nk} f||_BV <= rho^n ||f||_BV + C ||f||_1` for `n = 1..=n_max` on the
/// Ulam realization, with the BV norm of a bin staircase as proxy.
pub fn iterated_bounds(
    op: &UlamOperator,
    consts: &LyConstants,
    f: &PiecewiseFn,
    n_max: u32,
) -> Vec<IteratedBound> {
    let w = op.bin_width();
    let bv = |v: &[f64]| staircase_variation(v) + v.iter().map(|x| x.abs()).sum::<f64>() * w;
    let norm_f = f.total_variation() + f.l1_norm();
    let mut v = op.project(f);
    let mut out = Vec::new();
    for n in 1..=n_max {
        for _ in 0..consts.k {
            v = op.apply(&v);
        }
        let rhs = consts.rho.powi(n as i32) * norm_f + consts.c * f.l1_norm();
        out.push(IteratedBound {
            n,
            lhs: bv(&v),
            rhs: rhs * (1.0 + FLOAT_SLACK),
        });
    }
    out
}

/// Worst ratio `||H_N^r f||_BV / ||f||_BV` over `r = 0..=k`, to compare
/// against `D`.
pub fn power_bound_ratio(op: &UlamOperator, consts: &LyConstants, f: &PiecewiseFn) -> f64 {
    let w = op.bin_width();
    let bv = |v: &[f64]| staircase_variation(v) + v.iter().map(|x| x.abs()).sum::<f64>() * w;
    let norm_f = f.total_variation() + f.l1_norm();
    let mut v = op.project(f);
    let mut worst: f64 = 0.0;
    for _ in 0..=consts.k {
        worst = worst.max(bv(&v) / norm_f);
        v = op.apply(&v);
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rosen_map::Digit;

    fn params(q: u32) -> RosenParams {
        RosenParams::new(q).unwrap()
    }

    /// Depth-2 images by brute force over digit pairs:
    /// `T^2 I_(d1,d2) = T_(d2)(I_(d2) ∩ T I_(d1))`.
    fn brute_min_depth2(p: &RosenParams, a_cap: u64) -> f64 {
        let digits: Vec<Digit> = (p.a_min()..=a_cap)
            .flat_map(|a| [Digit::plus(a), Digit::minus(a)])
            .collect();
        let lam = p.lambda();
        let branch = |d: Digit, x: f64| 1.0 / x.abs() - d.a as f64 * lam;
        let mut best = f64::INFINITY;
        for &d1 in &digits {
            let im1 = p.branch_image(d1).unwrap();
            for &d2 in &digits {
                let cyl = p.cylinder(d2).unwrap();
                let Some(ov) = cyl.intersect(&im1) else {
                    continue;
                };
                let (u, v) = (branch(d2, ov.lo), branch(d2, ov.hi));
                let len = (u - v).abs().min(p.lambda());
                best = best.min(len);
            }
        }
        best
    }

    #[test]
    fn epsilon_values() {
        let p3 = params(3);
        assert_eq!(epsilon_n(&p3, 0), 1.0);
        assert!((epsilon_n(&p3, 1) - 0.5).abs() < 1e-15);
        let imgs = cylinder_images(&p3, 3);
        assert_eq!(imgs.len(), 2);

        let p5 = params(5);
        let s1 = cylinder_images(&p5, 1);
        assert_eq!(s1.len(), 2);
        let e2 = epsilon_n(&p5, 2);
        assert!((e2 - brute_min_depth2(&p5, 40)).abs() < 1e-10);
        for q in [4, 7, 12] {
            let p = params(q);
            assert!(
                (epsilon_n(&p, 2) - brute_min_depth2(&p, 40)).abs() < 1e-10,
                "q={q}"
            );
        }
    }

    #[test]
    fn epsilon_is_nonincreasing_and_positive() {
        for q in [3, 4, 5, 6, 7, 10, 12] {
            let p = params(q);
            let mut prev = f64::INFINITY;
            for n in 0..8 {
                let e = epsilon_n(&p, n);
                assert!(e > 0.0 && e <= prev + 1e-15, "q={q} n={n}");
                prev = e;
            }
        }
    }

    #[test]
    fn images_share_an_endpoint_from_the_boundary_orbit() {
        for q in [3, 5, 7, 9] {
            let p = params(q);
            let s = p.sigma();
            let mut orbit = vec![s, -s];
            let mut x = s;
            for _ in 0..6 {
                x = p.map(x);
                orbit.push(x);
            }
            for n in 1..=5 {
                for im in cylinder_images(&p, n) {
                    let full = (im.lo + s).abs() < 1e-12 && (im.hi - s).abs() < 1e-12;
                    let free = if (im.hi - s).abs() < 1e-12 {
                        im.lo
                    } else {
                        im.hi
                    };
                    assert!(full || (im.lo + s).abs() < 1e-12 || (im.hi - s).abs() < 1e-12);
                    assert!(
                        full || orbit.iter().any(|o| (o - free).abs() < 1e-9),
                        "q={q} {im:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn constants_examples() {
        let c3 = ly_constants(&params(3));
        assert_eq!((c3.k, c3.rho), (1, 0.5));
        let c5 = ly_constants(&params(5));
        assert_eq!(c5.k, 2);
        assert!((c5.rho - 2.0 * params(5).gamma().powi(4)).abs() < 1e-15);
        assert!((c5.rho - 0.857).abs() < 1e-3);
        for q in 3..=50 {
            let c = ly_constants(&params(q));
            assert!(c.rho > 0.0 && c.rho < 1.0 && c.eps_k > 0.0);
            assert!((c.m - (c.m0 + 1.0 - c.rho)).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_and_invariant_inputs_hold() {
        use crate::transfer::invariant_density;
        for q in [3, 5] {
            let p = params(q);
            let consts = ly_constants(&p);
            let op = UlamOperator::new(p, 512).unwrap();
            let one = PiecewiseFn::constant(p.interval(), 1.0);
            let t = ly_check(&p, &consts, &one, Realization::Ulam(&op));
            assert!(t.holds && t.var_f == 0.0);
            let f1 = invariant_density(&op).unwrap();
            let f1 = op.to_piecewise(&f1.values);
            let t = ly_check(&p, &consts, &f1, Realization::Ulam(&op));
            assert!(t.holds);
            assert!((t.lhs - f1.total_variation()).abs() < 1e-6);
            let t = ly_check(&p, &consts, &one, Realization::Grid { nodes: 4096 });
            assert!(t.holds);
        }
    }

    #[test]
    fn grid_realization_holds_on_random_staircases() {
        for q in [3, 5] {
            let p = params(q);
            let (_, trials) = ly_monte_carlo(&p, Realization::Grid { nodes: 2048 }, 20, 20, 1);
            for t in trials {
                assert!(t.holds, "{t:?}");
            }
        }
    }

    #[test]
    fn iterated_bounds_hold() {
        let p = params(5);
        let op = UlamOperator::new(p, 1024).unwrap();
        let consts = ly_constants(&p);
        for t in 0..20 {
            let f = random_test_function(&p, 3, t, 20);
            for row in iterated_bounds(&op, &consts, &f, 5) {
                assert!(row.lhs <= row.rhs, "{row:?}");
            }
            assert!(power_bound_ratio(&op, &consts, &f) <= consts.d);
        }
    }

    #[test]
    fn cover_images_are_even() {
        let p = params(5);
        assert_eq!(p.cover(0.2, 0.3).image(&p), p.cover(-0.3, -0.2).image(&p));
    }
}
