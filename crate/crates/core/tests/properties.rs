use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rosen::mixing::image_of_interval;
use rosen::{Digit, IntervalSet, PiecewiseFn, RosenParams, Sign};

const QS: [u32; 5] = [3, 4, 5, 7, 12];

fn q_strategy() -> impl Strategy<Value = RosenParams> {
    prop::sample::select(QS.to_vec()).prop_map(|q| RosenParams::new(q).unwrap())
}

#[test]
fn step_stays_in_interval() {
    for q in QS {
        let p = RosenParams::new(q).unwrap();
        let s = p.sigma();
        let ulp = s * f64::EPSILON;
        let mut rng = ChaCha8Rng::seed_from_u64(u64::from(q));
        for _ in 0..1_000_000 {
            let x = rng.random_range(-s..=s);
            let (y, _) = p.step(x).unwrap();
            assert!(y.abs() <= s + ulp, "q={q} x={x} -> {y}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn inverse_branch_round_trips(p in q_strategy(), a_off in 0u64..200, plus in any::<bool>(), t in 0.0f64..1.0) {
        let d = Digit::new(if plus { Sign::Plus } else { Sign::Minus }, p.a_min() + a_off);
        let img = p.branch_image(d).unwrap();
        // stay off the image endpoints, where the cylinder is open
        let y = img.lo + (0.001 + 0.998 * t) * img.length();
        let x = p.inverse_branch(d, y).unwrap();
        let (back, got) = p.step(x).unwrap();
        prop_assert_eq!(got, Some(d));
        prop_assert!((back - y).abs() < 1e-12);
    }

    #[test]
    fn expansion_reconstructs(p in q_strategy(), t in -1.0f64..1.0, n in 1usize..=25) {
        let x = t * p.sigma();
        let digits = p.expand(x, n).unwrap();
        let bound = p.lambda() * (p.gamma() * p.gamma()).powi(digits.len() as i32);
        prop_assert!((x - p.evaluate_cf(&digits)).abs() <= bound);
        prop_assert!(digits.iter().all(|&d| p.is_admissible(d)));
        if let Some(&first) = digits.first() {
            prop_assert!(p.cylinder_contains(first, x));
        }
    }

    #[test]
    fn images_stay_in_interval(p in q_strategy(), c in -1.0f64..1.0, len in 1e-6f64..0.5) {
        let c = c * p.sigma();
        let d = (c + len).min(p.sigma());
        prop_assume!(c < d);
        let img = image_of_interval(&p, &IntervalSet::single(c, d));
        for iv in img.components() {
            prop_assert!(iv.lo >= -p.sigma() - 1e-12 && iv.hi <= p.sigma() + 1e-12);
        }
    }

    #[test]
    fn variation_is_subadditive(seed in any::<u64>(), pieces in 1usize..20) {
        let p = RosenParams::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = PiecewiseFn::random_staircase(p.interval(), pieces, &mut rng);
        let g = PiecewiseFn::random_staircase(p.interval(), pieces, &mut rng);
        let lhs = f.add(&g).unwrap().total_variation();
        prop_assert!(lhs <= f.total_variation() + g.total_variation() + 1e-12);
    }
}
