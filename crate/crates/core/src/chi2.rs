//! Chi-squared CDF and quantile, used for the finite-statistics capacity cutoff.

use std::f64::consts::PI;

/// Natural log of the gamma function (Lanczos, g = 7).
pub fn ln_gamma(z: f64) -> f64 {
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if z < 0.5 {
        return PI.ln() - (PI * z).sin().ln() - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEFFS[0];
    for (i, c) in COEFFS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// Regularized lower incomplete gamma P(s, x), series for x < s + 1 and a
/// continued fraction otherwise.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    debug_assert!(s > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    const MAX_ITER: usize = 2000;
    const EPS: f64 = 1e-15;
    let ln_gamma_s = ln_gamma(s);
    if x < s + 1.0 {
        let mut sum = 1.0 / s;
        let mut term = sum;
        let mut ap = s;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < EPS * sum.abs() {
                break;
            }
        }
        (sum * (s * x.ln() - x - ln_gamma_s).exp()).clamp(0.0, 1.0)
    } else {
        const FPMIN: f64 = f64::MIN_POSITIVE / EPS;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / FPMIN;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < FPMIN {
                d = FPMIN;
            }
            c = b + an / c;
            if c.abs() < FPMIN {
                c = FPMIN;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        (1.0 - h * (s * x.ln() - x - ln_gamma_s).exp()).clamp(0.0, 1.0)
    }
}

/// CDF of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi2_cdf(dof: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        regularized_lower_gamma(0.5 * dof, 0.5 * x)
    }
}

fn chi2_ln_pdf(dof: f64, x: f64) -> f64 {
    let k2 = 0.5 * dof;
    (k2 - 1.0) * x.ln() - 0.5 * x - k2 * 2f64.ln() - ln_gamma(k2)
}

/// Quantile of the standard normal distribution (Acklam's rational
/// approximation, refined by one Halley step on the complementary error
/// function).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
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

    let x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    // One Halley refinement using the normal CDF expressed through erfc.
    let e = 0.5 * erfc(-x / std::f64::consts::SQRT_2) - p;
    let u = e * (2.0 * PI).sqrt() * (x * x / 2.0).exp();
    x - u / (1.0 + x * u / 2.0)
}

fn erfc(x: f64) -> f64 {
    // Numerical Recipes style Chebyshev fit, |relative error| < 1.2e-7,
    // adequate here because a Newton loop polishes the quantile afterwards.
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let ans = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587
                                        + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        ans
    } else {
        2.0 - ans
    }
}

/// Quantile of the chi-squared distribution: the x with CDF(x) = p.
///
/// Wilson-Hilferty initialization followed by safeguarded Newton iterations on
/// the CDF.
pub fn chi2_quantile(dof: f64, p: f64) -> f64 {
    assert!(dof > 0.0, "degrees of freedom must be positive");
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0,1)");

    let z = normal_quantile(p);
    let f = 2.0 / (9.0 * dof);
    let mut x = dof * (1.0 - f + z * f.sqrt()).powi(3);
    if !(x.is_finite() && x > 0.0) {
        x = dof;
    }

    // Bracket, then Newton with bisection fallback.
    let (mut lo, mut hi) = (0.0_f64, x.max(dof));
    while chi2_cdf(dof, hi) < p {
        hi *= 2.0;
        if hi > 1e300 {
            break;
        }
    }
    x = x.clamp(lo + f64::MIN_POSITIVE, hi);
    for _ in 0..100 {
        let cdf = chi2_cdf(dof, x);
        if cdf > p {
            hi = x;
        } else {
            lo = x;
        }
        let step = (cdf - p) * (-chi2_ln_pdf(dof, x)).exp();
        let mut next = x - step;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-13 * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn median_of_one_dof() {
        // Median of chi^2 with one degree of freedom.
        assert_relative_eq!(chi2_quantile(1.0, 0.5), 0.454936423119572, epsilon = 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &dof in &[1.0, 3.0, 10.0, 100.0, 160.0] {
            for &p in &[1e-6, 1e-3, 0.1, 0.5, 0.9, 1.0 - 1e-3, 1.0 - 1e-6] {
                let x = chi2_quantile(dof, p);
                assert_relative_eq!(chi2_cdf(dof, x), p, epsilon = 1e-9, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn quantile_monotone_in_probability() {
        assert!(chi2_quantile(100.0, 1.0 - 1e-6) > chi2_quantile(100.0, 1.0 - 1e-3));
    }

    #[test]
    fn matches_external_quantile_routine() {
        use statrs::distribution::{ChiSquared, ContinuousCDF};
        for &dof in &[1.0, 5.0, 50.0, 100.0, 160.0] {
            let dist = ChiSquared::new(dof).unwrap();
            for &p in &[0.25, 0.5, 0.975, 1.0 - 1e-3, 1.0 - 1e-6] {
                let mine = chi2_quantile(dof, p);
                let theirs = dist.inverse_cdf(p);
                assert_relative_eq!(mine, theirs, max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn deep_lower_tail_single_dof() {
        // For one degree of freedom and tiny p, the quantile approaches
        // (pi/2) p^2; the external routine loses accuracy down here.
        let p = 1e-6;
        let x = chi2_quantile(1.0, p);
        assert_relative_eq!(x, PI / 2.0 * p * p, max_relative = 1e-3);
    }

    #[test]
    fn tail_quantile_near_reference_value() {
        // (1 - 1e-6) quantile with 100 degrees of freedom is close to 182.
        let r = chi2_quantile(100.0, 1.0 - 1e-6);
        assert!((r - 182.0).abs() < 1.0, "r = {r}");
    }

    #[test]
    fn normal_quantile_symmetry() {
        // Initializer accuracy only; the chi-squared Newton loop does not
        // depend on it beyond the starting point.
        assert_relative_eq!(normal_quantile(0.75), 0.6744897501960817, epsilon = 5e-7);
        assert_relative_eq!(normal_quantile(0.25), -normal_quantile(0.75), epsilon = 5e-7);
    }
}
