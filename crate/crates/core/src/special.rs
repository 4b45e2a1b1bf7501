//! Digamma and Hurwitz-zeta sums.
//!
//! Every countable branch family of the Rosen map produces sums of the form
//! `sum_{a >= A} (x + a*lambda)^-s`. These are evaluated in closed form via
//! the Hurwitz zeta function `H_s(z) = sum_{k >= 0} (z + k)^-s`, which makes
//! the branch tails exact instead of truncated.

/// Bernoulli numbers B_2, B_4, ..., B_16.
const BERNOULLI_EVEN: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

const ASYMPTOTIC_FROM: f64 = 16.0;

/// Digamma function for `z > 0`.
pub fn digamma(z: f64) -> f64 {
    debug_assert!(z > 0.0, "digamma needs z > 0, got {z}");
    let mut z = z;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let inv2 = 1.0 / (z * z);
    // -sum B_2k / (2k z^2k), Horner in 1/z^2
    let mut series = 0.0;
    for (k, b) in BERNOULLI_EVEN.iter().enumerate().rev() {
        let two_k = 2.0 * (k as f64 + 1.0);
        series = series * inv2 + b / two_k;
    }
    acc + z.ln() - 0.5 / z - series * inv2
}

/// Hurwitz zeta `H_s(z) = sum_{k>=0} (z+k)^-s` for integer `s >= 2` and `z > 0`.
///
/// `H_2` is the trigamma function; in general `H_{n+1} = (-1)^{n+1} psi^(n) / n!`.
pub fn hurwitz(s: u32, z: f64) -> f64 {
    debug_assert!(s >= 2, "hurwitz needs s >= 2");
    debug_assert!(z > 0.0, "hurwitz needs z > 0, got {z}");
    let sf = s as f64;
    let mut z = z;
    let mut acc = 0.0;
    while z < ASYMPTOTIC_FROM {
        acc += z.powi(-(s as i32));
        z += 1.0;
    }
    let zs = z.powi(-(s as i32));
    let mut total = z * zs / (sf - 1.0) + 0.5 * zs;
    // Euler-Maclaurin: B_2j/(2j)! * (s)_(2j-1) * z^(-s-2j+1)
    let mut rising = sf; // (s)_1
    let mut fact = 2.0; // (2j)!
    let mut zpow = zs / z; // z^(-s-1)
    for (j, b) in BERNOULLI_EVEN.iter().enumerate() {
        let term = b / fact * rising * zpow;
        total += term;
        if term.abs() < 1e-18 * total.abs() {
            break;
        }
        let m = 2.0 * (j as f64 + 1.0);
        rising *= (sf + m - 1.0) * (sf + m);
        fact *= (m + 1.0) * (m + 2.0);
        zpow /= z * z;
    }
    acc + total
}

/// `sum_{a >= start} [1/(a + alpha) - 1/(a + beta)]` for `alpha <= beta`,
/// accurate even when `beta - alpha` is tiny compared to `start`.
pub fn shifted_difference_tail(start: f64, alpha: f64, beta: f64) -> f64 {
    debug_assert!(alpha <= beta);
    let half = 0.5 * (beta - alpha);
    let mid = start + 0.5 * (alpha + beta);
    if half == 0.0 {
        return 0.0;
    }
    if half < 1e-2 * mid {
        // 2h * sum_k 1/((mid+k)^2 - h^2), expanded in (h/(mid+k))^2
        let h2 = half * half;
        let mut series = 0.0;
        let mut hp = 1.0;
        for s in [2, 4, 6, 8] {
            series += hp * hurwitz(s, mid);
            hp *= h2;
        }
        2.0 * half * series
    } else {
        digamma(start + beta) - digamma(start + alpha)
    }
}

/// `sum_{a = first}^{last} (x + a*lambda)^-s`, with `last = None` meaning infinity.
pub fn branch_power_sum(s: u32, x: f64, lambda: f64, first: u64, last: Option<u64>) -> f64 {
    if let Some(last) = last {
        if last < first {
            return 0.0;
        }
        if last - first < 8 {
            return (first..=last)
                .map(|a| (x + a as f64 * lambda).powi(-(s as i32)))
                .sum();
        }
    }
    let shift = x / lambda;
    let head = hurwitz(s, first as f64 + shift);
    let tail = last.map_or(0.0, |l| hurwitz(s, (l + 1) as f64 + shift));
    (head - tail) * lambda.powi(-(s as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_hurwitz(s: u32, z: f64) -> f64 {
        // direct sum plus integral tail with the half-term correction
        let n = 200_000u64;
        let head: f64 = (0..n).rev().map(|k| (z + k as f64).powi(-(s as i32))).sum();
        let zn = z + n as f64;
        head + zn.powi(1 - s as i32) / (s as f64 - 1.0) + 0.5 * zn.powi(-(s as i32))
    }

    #[test]
    fn digamma_known_values() {
        let euler_gamma = 0.577_215_664_901_532_9;
        assert!((digamma(1.0) + euler_gamma).abs() < 1e-14);
        assert!((digamma(0.5) + euler_gamma + 2.0 * 2f64.ln()).abs() < 1e-14);
        // recurrence
        for z in [0.3, 1.7, 12.5, 400.0] {
            assert!((digamma(z + 1.0) - digamma(z) - 1.0 / z).abs() < 1e-13);
        }
    }

    #[test]
    fn hurwitz_matches_brute_force() {
        for s in [2, 3, 4, 6, 8] {
            for z in [0.5, 1.0, 2.25, 17.0, 1e4] {
                let exact = brute_hurwitz(s, z);
                let got = hurwitz(s, z);
                assert!(
                    (got - exact).abs() <= 1e-12 * exact.abs(),
                    "s={s} z={z}: {got} vs {exact}"
                );
            }
        }
        let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((hurwitz(2, 1.0) - zeta2).abs() < 1e-15);
    }

    #[test]
    fn shifted_difference_tail_agrees_across_branches() {
        // far apart: digamma route; brute force oracle
        let (start, alpha, beta) = (3.0, -0.5, 0.0);
        let brute: f64 = (0..2_000_000)
            .map(|k| {
                let a = start + k as f64;
                1.0 / (a + alpha) - 1.0 / (a + beta)
            })
            .sum::<f64>()
            + 0.5 / (start + 2e6); // tail ~ (beta-alpha)/a
        assert!((shifted_difference_tail(start, alpha, beta) - brute).abs() < 1e-12);

        // tiny separation: series route vs exact algebraic sum
        let (start, alpha, beta) = (10_001.0, 0.1, 0.1 + 1e-6);
        let brute: f64 = (0..4_000_000)
            .map(|k| {
                let a = start + k as f64;
                (beta - alpha) / ((a + alpha) * (a + beta))
            })
            .sum::<f64>();
        let rest = (beta - alpha) / (start + 4e6);
        let got = shifted_difference_tail(start, alpha, beta);
        assert!(
            ((got - brute - rest) / got).abs() < 1e-6,
            "{got} vs {}",
            brute + rest
        );
    }

    #[test]
    fn branch_power_sum_ranges() {
        let lambda = 1.618_033_988_749_895;
        let x = -0.3;
        let direct: f64 = (3..=40u64).map(|a| (x + a as f64 * lambda).powi(-2)).sum();
        let grouped = branch_power_sum(2, x, lambda, 3, Some(40));
        assert!((direct - grouped).abs() < 1e-15);
        let split =
            branch_power_sum(3, x, lambda, 1, Some(20)) + branch_power_sum(3, x, lambda, 21, None);
        assert!((split - branch_power_sum(3, x, lambda, 1, None)).abs() < 1e-15);
    }
}
