//! Standard normal CDF and quantile, computed deterministically.

use std::f64::consts::{PI, SQRT_2};

const SERIES_CUTOFF: f64 = 2.5;
const FRACTION_TERMS: u32 = 300;

/// Complementary error function.
///
/// Power series for erf below 2.5, continued fraction above. Absolute
/// error is below 1e-13 everywhere.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        1.0 - erf_series(x)
    } else {
        erfc_fraction(x)
    }
}

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum (-1)^n x^(2n+1) / (n! (2n+1))
    let x2 = x * x;
    let mut power = x;
    let mut sum = x;
    let mut n = 0.0;
    loop {
        n += 1.0;
        power *= -x2 / n;
        let term = power / (2.0 * n + 1.0);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

fn erfc_fraction(x: f64) -> f64 {
    // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + (2/2)/(x + (3/2)/(x + ...))))
    let mut f = x;
    for n in (1..=FRACTION_TERMS).rev() {
        f = x + 0.5 * f64::from(n) / f;
    }
    (-x * x).exp() / PI.sqrt() / f
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail, 1 - cdf(x), without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of [`normal_cdf`] for p in (0, 1).
///
/// Acklam's rational approximation followed by one Halley step against
/// [`normal_cdf`], giving close to double precision.
pub fn normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383_577_518_672_69e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    let x = if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    };

    let e = normal_cdf(x) - p;
    let u = e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson integration of the standard normal density over
    /// [-12, x].
    fn cdf_by_quadrature(x: f64) -> f64 {
        let lo = -12.0;
        let steps = 200_000;
        let h = (x - lo) / steps as f64;
        let pdf = |t: f64| (-t * t / 2.0).exp() / (2.0 * PI).sqrt();
        let mut sum = pdf(lo) + pdf(x);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * pdf(lo + i as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn cdf_matches_quadrature() {
        for &x in &[-6.0, -3.2, -2.5, -1.0, -0.3, 0.0, 0.5, 1.2, 1.96, 2.129, 2.5, 3.5, 5.0] {
            let got = normal_cdf(x);
            let want = cdf_by_quadrature(x);
            assert!((got - want).abs() < 1e-10, "x={x}: {got} vs {want}");
        }
    }

    #[test]
    fn erfc_is_continuous_at_cutoff() {
        let below = 1.0 - erf_series(SERIES_CUTOFF);
        let above = erfc_fraction(SERIES_CUTOFF);
        assert!((below - above).abs() < 1e-13, "{below} vs {above}");
        assert_eq!(erfc(0.0), 1.0);
        assert!((erfc(-1.0) + erfc(1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_inverts_quadrature_cdf() {
        for &p in &[1e-6, 0.001, 0.01, 0.02425, 0.1, 0.5, 0.8, 0.975, 0.999, 1.0 - 1e-6] {
            let x = normal_quantile(p);
            // bisection on the quadrature CDF as the reference
            let (mut lo, mut hi) = (-8.0, 8.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if cdf_by_quadrature(mid) < p {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert!((x - 0.5 * (lo + hi)).abs() < 1e-6, "p={p}: {x} vs {lo}");
        }
    }

    #[test]
    fn familiar_quantile() {
        assert!((normal_quantile(0.975) - 1.959_963_985).abs() < 1e-8);
        assert_eq!(normal_quantile(0.0), f64::NEG_INFINITY);
    }
}
