//! Gamma and Beta variates.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::BetaParams;

/// Draws from Gamma(shape, 1) with the Marsaglia-Tsang squeeze/rejection
/// method. Requires `shape >= 1`.
pub fn gamma_sample<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    debug_assert!(shape >= 1.0, "shape must be >= 1, got {shape}");
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// One draw from Beta(alpha, beta) as X / (X + Y) with X ~ Gamma(alpha) and
/// Y ~ Gamma(beta).
pub fn beta_sample<R: Rng + ?Sized>(params: BetaParams, rng: &mut R) -> f64 {
    let x = gamma_sample(params.alpha(), rng);
    let y = gamma_sample(params.beta(), rng);
    x / (x + y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn moments(params: BetaParams, n: usize, seed: u64) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let draws: Vec<f64> = (0..n).map(|_| beta_sample(params, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (mean, var)
    }

    fn beta(a: f64, b: f64) -> BetaParams {
        BetaParams::new(a, b).unwrap()
    }

    #[test]
    fn uniform_beta_mean() {
        let (mean, _) = moments(beta(1.0, 1.0), 100_000, 1);
        assert!((mean - 0.5).abs() < 0.01, "{mean}");
    }

    #[test]
    fn skewed_beta_mean() {
        let (mean, _) = moments(beta(5.0, 1.0), 100_000, 2);
        assert!((mean - 5.0 / 6.0).abs() < 0.01, "{mean}");
    }

    #[test]
    fn concentrated_beta_variance() {
        // a*b / ((a+b)^2 (a+b+1)) with a = b = 1000
        let expected = 1.0 / (4.0 * 2001.0);
        let (_, var) = moments(beta(1000.0, 1000.0), 100_000, 3);
        assert!((var - expected).abs() < 0.2 * expected, "{var} vs {expected}");
    }

    #[test]
    fn draws_stay_inside_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for params in [beta(1.0, 1.0), beta(1.0, 500.0), beta(800.0, 1.0)] {
            for _ in 0..10_000 {
                let x = beta_sample(params, &mut rng);
                assert!(x > 0.0 && x < 1.0, "{x}");
            }
        }
    }

    #[test]
    fn gamma_mean_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let shape = 3.5;
        let n = 200_000;
        let draws: Vec<f64> = (0..n).map(|_| gamma_sample(shape, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - shape).abs() < 0.03 * shape);
        assert!((var - shape).abs() < 0.03 * shape);
    }

    #[test]
    fn same_seed_same_draws() {
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            assert_eq!(
                beta_sample(beta(2.5, 7.0), &mut a),
                beta_sample(beta(2.5, 7.0), &mut b)
            );
        }
    }
}
