//! Special functions: log-gamma, regularized incomplete gamma, normal CDF and
//! quantile, chi-squared upper tail (with a log-space variant).

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln Γ(x)` for `x > 0` by the Lanczos approximation (g = 7, 9 terms).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

pub(crate) fn ln_gamma_unchecked(x: f64) -> f64 {
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    if x < 0.5 {
        // reflection keeps the series in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + series.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

/// Log of the regularized upper incomplete gamma function `ln Q(a, x)`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise. The result
/// stays finite far beyond the point where `Q` itself underflows.
pub fn ln_gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::domain(format!("incomplete gamma requires a > 0, got {a}")));
    }
    if !(x >= 0.0) {
        return Err(Error::domain(format!("incomplete gamma requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    let ln_prefactor = a * x.ln() - x - ln_gamma_unchecked(a);
    if x < a + 1.0 {
        let p = (ln_prefactor + lower_series(a, x).ln()).exp();
        Ok((-p).ln_1p())
    } else {
        Ok(ln_prefactor + upper_continued_fraction(a, x).ln())
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    ln_gamma_q(a, x).map(f64::exp)
}

// sum_{n>=0} x^n / (a (a+1) ... (a+n))
fn lower_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum
}

// modified Lentz evaluation of the continued fraction for Q(a, x) e^x x^-a Γ(a)
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    h
}

/// `P(χ²_d > u)`.
pub fn chisq_upper_tail(d: usize, u: f64) -> Result<f64> {
    chisq_upper_tail_ln(d, u).map(f64::exp)
}

/// `ln P(χ²_d > u)`; finite even when the probability underflows.
pub fn chisq_upper_tail_ln(d: usize, u: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::domain("chi-squared degrees of freedom must be >= 1"));
    }
    if !(u >= 0.0) {
        return Err(Error::domain(format!("chi-squared argument must be >= 0, got {u}")));
    }
    ln_gamma_q(d as f64 / 2.0, u / 2.0)
}

/// Standard normal distribution function `Φ(x)`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// `ln Φ(x)`, accurate deep into the lower tail.
pub fn ln_normal_cdf(x: f64) -> f64 {
    if x > -20.0 {
        return normal_cdf(x).ln();
    }
    // Φ(x) = ½ Q(½, x²/2) for x < 0
    0.5f64.ln() + ln_gamma_q(0.5, 0.5 * x * x).unwrap_or(f64::NEG_INFINITY)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

// Acklam's rational approximation, refined below by Halley steps.
const ACKLAM_A: [f64; 6] = [
    -3.969_683_028_665_376e1,
    2.209_460_984_245_205e2,
    -2.759_285_104_469_687e2,
    1.383_577_518_672_69e2,
    -3.066_479_806_614_716e1,
    2.506_628_277_459_239,
];
const ACKLAM_B: [f64; 5] = [
    -5.447_609_879_822_406e1,
    1.615_858_368_580_409e2,
    -1.556_989_798_598_866e2,
    6.680_131_188_771_972e1,
    -1.328_068_155_288_572e1,
];
const ACKLAM_C: [f64; 6] = [
    -7.784_894_002_430_293e-3,
    -3.223_964_580_411_365e-1,
    -2.400_758_277_161_838,
    -2.549_732_539_343_734,
    4.374_664_141_464_968,
    2.938_163_982_698_783,
];
const ACKLAM_D: [f64; 4] = [
    7.784_695_709_041_462e-3,
    3.224_671_290_700_398e-1,
    2.445_134_137_142_996,
    3.754_408_661_907_416,
];

/// Inverse of [`normal_cdf`] on `(0, 1)`.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal_quantile requires 0 < p < 1, got {p}")));
    }
    if p > 0.5 {
        // 1 - p is exact here
        return Ok(-lower_quantile(1.0 - p));
    }
    Ok(lower_quantile(p))
}

fn lower_quantile(p: f64) -> f64 {
    const P_LOW: f64 = 0.02425;
    let mut x = if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((ACKLAM_C[0] * q + ACKLAM_C[1]) * q + ACKLAM_C[2]) * q + ACKLAM_C[3]) * q
            + ACKLAM_C[4])
            * q
            + ACKLAM_C[5])
            / ((((ACKLAM_D[0] * q + ACKLAM_D[1]) * q + ACKLAM_D[2]) * q + ACKLAM_D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((ACKLAM_A[0] * r + ACKLAM_A[1]) * r + ACKLAM_A[2]) * r + ACKLAM_A[3]) * r
            + ACKLAM_A[4])
            * r
            + ACKLAM_A[5])
            * q
            / (((((ACKLAM_B[0] * r + ACKLAM_B[1]) * r + ACKLAM_B[2]) * r + ACKLAM_B[3]) * r
                + ACKLAM_B[4])
                * r
                + 1.0)
    };
    for _ in 0..3 {
        let e = normal_cdf(x) - p;
        let u = e / normal_pdf(x);
        if !u.is_finite() {
            break;
        }
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ln_factorial(n: u32) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn log_gamma_known_values() {
        assert_eq!(log_gamma(1.0).unwrap(), 0.0);
        assert!((log_gamma(0.5).unwrap() - 0.572_364_942_924_700_1).abs() < 1e-14);
        assert!((log_gamma(5.0).unwrap() - 24f64.ln()).abs() < 1e-13);
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-1.5).is_err());
    }

    #[test]
    fn log_gamma_matches_factorials_and_half_integers() {
        for n in 1..=100u32 {
            let exact = ln_factorial(n - 1);
            let got = log_gamma(n as f64).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n}");
        }
        // Γ(n + ½) = (2n)! √π / (4^n n!)
        for n in 0..=99u32 {
            let exact = ln_factorial(2 * n) + 0.5 * PI.ln() - n as f64 * 4f64.ln() - ln_factorial(n);
            let got = log_gamma(n as f64 + 0.5).unwrap();
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0), "n={n}");
        }
    }

    #[test]
    fn normal_quantile_table_values() {
        assert!((normal_quantile(0.975).unwrap() - 1.959_963_984_540_054).abs() < 1e-12);
        assert!((normal_quantile(0.995).unwrap() - 2.575_829_303_548_901).abs() < 1e-12);
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!(normal_quantile(0.0).is_err());
        assert!(normal_quantile(1.0).is_err());
        assert!(normal_quantile(f64::NAN).is_err());
    }

    #[test]
    fn quantile_inverts_cdf() {
        // Below x = 5 the rounding of Φ(x) near 1 is still well inside 1e-9.
        let mut x = -8.0;
        while x <= 5.0 {
            let back = normal_quantile(normal_cdf(x)).unwrap();
            assert!((back - x).abs() < 1e-9, "x={x} back={back}");
            x += 0.01;
        }
        // On the upper side use the exact complementary probability.
        let mut x = 5.0;
        while x <= 8.0 {
            let back = -normal_quantile(normal_cdf(-x)).unwrap();
            assert!((back - x).abs() < 1e-9, "x={x}");
            x += 0.01;
        }
    }

    #[test]
    fn chisq_small_cases() {
        assert!((chisq_upper_tail(2, 2.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!((chisq_upper_tail(1, 3.8415).unwrap() - 0.05).abs() < 1e-5);
        for d in 1..10 {
            assert_eq!(chisq_upper_tail(d, 0.0).unwrap(), 1.0);
        }
        assert!(chisq_upper_tail(0, 1.0).is_err());
        assert!(chisq_upper_tail(3, -1.0).is_err());
    }

    #[test]
    fn chisq_two_dof_is_exponential() {
        let mut u = 0.0;
        while u <= 50.0 {
            let got = chisq_upper_tail(2, u).unwrap();
            let exact = (-u / 2.0).exp();
            assert!((got - exact).abs() <= 1e-12 * exact, "u={u}");
            u += 0.05;
        }
    }

    #[test]
    fn chisq_one_dof_matches_normal_tail() {
        let mut s: f64 = 0.0;
        while s <= 8.0 {
            let got = chisq_upper_tail(1, s * s).unwrap();
            let exact = 2.0 * normal_cdf(-s);
            assert!((got - exact).abs() <= 1e-10 * exact.max(1e-300), "s={s}");
            s += 0.02;
        }
    }

    #[test]
    fn chisq_log_tail_stays_finite() {
        // d=2: ln Q = -u/2 exactly
        let ln = chisq_upper_tail_ln(2, 4000.0).unwrap();
        assert!((ln + 2000.0).abs() < 1e-9);
        assert_eq!(chisq_upper_tail(2, 4000.0).unwrap(), 0.0);
        assert!(chisq_upper_tail_ln(5, 3000.0).unwrap().is_finite());
    }

    #[test]
    fn chisq_monotone_in_u() {
        for d in [1, 2, 3, 4, 7, 16] {
            let mut prev = 1.0;
            for i in 0..400 {
                let q = chisq_upper_tail(d, i as f64 * 0.25).unwrap();
                assert!(q <= prev + 1e-15, "d={d} i={i}");
                prev = q;
            }
        }
    }

    #[test]
    fn ln_normal_cdf_continuity_and_tail() {
        let a = ln_normal_cdf(-19.999_999);
        let b = ln_normal_cdf(-20.000_001);
        assert!((a - b).abs() < 1e-4);
        // Mills ratio leading term at x = -40
        let x: f64 = -40.0;
        let approx = -0.5 * x * x - LN_SQRT_2PI - (-x).ln();
        assert!((ln_normal_cdf(x) - approx).abs() < 1e-3);
    }
}
