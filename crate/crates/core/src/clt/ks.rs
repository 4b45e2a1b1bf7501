//! One-sample Kolmogorov-Smirnov test.

use statrs::function::erf::erfc;

/// Terms kept in each Kolmogorov series.
const SERIES_TERMS: usize = 100;

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `sup |F_n - F|` for the empirical distribution of `samples`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// `P(K > t)` for the limiting Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.0 {
        // P(K <= t) = sqrt(2 pi)/t sum exp(-(2k-1)^2 pi^2 / (8 t^2))
        let c = -std::f64::consts::PI.powi(2) / (8.0 * t * t);
        let s: f64 = (1..=SERIES_TERMS)
            .map(|k| {
                let m = (2 * k - 1) as f64;
                (c * m * m).exp()
            })
            .sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / t * s).clamp(0.0, 1.0)
    } else {
        // P(K > t) = 2 sum (-1)^(k-1) exp(-2 k^2 t^2)
        let s: f64 = (1..=SERIES_TERMS)
            .map(|k| {
                let k = k as f64;
                let sign = if k as u64 % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * k * k * t * t).exp()
            })
            .sum();
        (2.0 * s).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic KS test of `samples` against `cdf`.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let d = ks_statistic(samples, cdf);
    let t = (samples.len() as f64).sqrt() * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_survival(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn kolmogorov_distribution_values() {
        // classical critical values of the limiting distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2239) - 0.10).abs() < 1e-4);
        // both series agree where they overlap
        let c = -std::f64::consts::PI.powi(2) / 8.0;
        let lower: f64 = (1..=100)
            .map(|k| (c * ((2 * k - 1) as f64).powi(2)).exp())
            .sum();
        assert!(
            ((1.0 - (2.0 * std::f64::consts::PI).sqrt() * lower) - kolmogorov_survival(1.0)).abs()
                < 1e-12
        );
        assert!((kolmogorov_survival(0.3) - 0.999_990_694_198_665_5).abs() < 1e-12);
    }

    #[test]
    fn normal_cdf_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-11);
    }

    #[test]
    fn p_values_are_uniform_under_the_null() {
        let seeds = 200u64;
        let p: Vec<f64> = (0..seeds)
            .map(|seed| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let x: Vec<f64> = (0..100_000)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                ks_test(&x, normal_cdf).p_value
            })
            .collect();
        let uniformity = ks_test(&p, |u| u.clamp(0.0, 1.0));
        assert!(uniformity.p_value > 0.001, "{uniformity:?}");
    }

    #[test]
    fn shifted_samples_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<f64> = (0..10_000)
            .map(|_| StandardNormal.sample(&mut rng))
            .map(|z: f64| z + 0.1)
            .collect();
        assert!(ks_test(&x, normal_cdf).p_value < 1e-6);
    }
}
