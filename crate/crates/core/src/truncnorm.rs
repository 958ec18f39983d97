//! One-sided truncated normal draws.

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

/// Draw from `N(mean, sd²)` restricted to `(-inf, upper]`.
pub(crate) fn sample_below<R: Rng + ?Sized>(rng: &mut R, mean: f64, sd: f64, upper: f64) -> f64 {
    if upper == f64::INFINITY {
        let z: f64 = StandardNormal.sample(rng);
        return mean + sd * z;
    }
    let alpha = (upper - mean) / sd;
    let y = standard_above(rng, -alpha);
    // Guard against rounding pushing the draw past the bound.
    (mean - sd * y).min(upper)
}

/// Standard normal restricted to `[lower, inf)`.
fn standard_above<R: Rng + ?Sized>(rng: &mut R, lower: f64) -> f64 {
    if lower <= 0.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z >= lower {
                return z;
            }
        }
    }
    // Exponential proposal with the optimal rate (Robert, 1995).
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = lower + exp.sample(rng);
        let accept = (-0.5 * (z - rate) * (z - rate)).exp();
        if rng.random::<f64>() <= accept {
            return z;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::function::erf::erfc;

    fn phi(x: f64) -> f64 {
        (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
    }

    fn big_phi(x: f64) -> f64 {
        0.5 * erfc(-x / std::f64::consts::SQRT_2)
    }

    fn check(mean: f64, sd: f64, upper: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = sample_below(&mut rng, mean, sd, upper);
            assert!(x <= upper);
            sum += x;
        }
        let alpha = (upper - mean) / sd;
        let expected = mean - sd * phi(alpha) / big_phi(alpha);
        // Truncated-normal sd is at most `sd`; allow five standard errors.
        let tol = 5.0 * sd / (n as f64).sqrt();
        assert!(
            (sum / n as f64 - expected).abs() < tol,
            "mean {} vs {} (alpha {alpha})",
            sum / n as f64,
            expected
        );
    }

    #[test]
    fn matches_truncated_mean_in_body_and_tail() {
        check(0.0, 1.0, 0.5);
        check(2.0, 0.5, 1.0);
        check(10.0, 1.0, 2.0);
        check(-1.0, 3.0, 20.0);
    }

    #[test]
    fn extreme_tail_stays_below_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x = sample_below(&mut rng, 20_000.0, 10.0, 5.0);
            assert!(x <= 5.0 && x > 4.9);
        }
    }
}
