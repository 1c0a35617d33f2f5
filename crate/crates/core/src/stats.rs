//! Simple linear regression with a two-sided slope t-test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest p-value reported; keeps underflowed tails representable.
pub const P_FLOOR: f64 = 1e-300;

const BETA_TOL: f64 = 1e-12;
const BETA_MAX_TERMS: usize = 10_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
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

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (k, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + k as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for `I_x(a, b)` by the modified Lentz method.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_MAX_TERMS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() <= BETA_TOL {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: u64) -> f64 {
    assert!(df >= 1, "degrees of freedom must be at least 1");
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let df = df as f64;
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub t: f64,
    pub p_value: f64,
    pub r_squared: f64,
    pub n: usize,
}

impl RegressionResult {
    /// Fields as `(name, value)` rounded to four decimals; p-values that
    /// would round to zero keep four significant digits instead.
    pub fn rounded(&self) -> Vec<(&'static str, String)> {
        vec![
            ("slope", round4(self.slope)),
            ("intercept", round4(self.intercept)),
            ("slope_se", round4(self.slope_se)),
            ("t", round4(self.t)),
            ("p_value", round_p(self.p_value)),
            ("r_squared", round4(self.r_squared)),
            ("n", self.n.to_string()),
        ]
    }
}

pub fn round4(v: f64) -> String {
    let s = format!("{v:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

pub fn round_p(p: f64) -> String {
    if p != 0.0 && p.abs() < 5e-5 {
        format!("{p:.4e}")
    } else {
        round4(p)
    }
}

/// Ordinary least squares `y = intercept + slope·x` with a slope t-test on
/// `n − 2` degrees of freedom.
pub fn ols_regression(points: &[(f64, f64)]) -> Result<RegressionResult> {
    let n = points.len();
    if n < 3 {
        return Err(Error::validation(format!("regression needs at least 3 points, got {n}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::validation("regression points must be finite"));
    }
    let nf = n as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::Numeric("regression x values have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let sse: f64 = points
        .iter()
        .map(|&(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let df = n - 2;
    let slope_se = (sse / df as f64 / sxx).sqrt();
    let t = if slope_se > 0.0 {
        slope / slope_se
    } else if slope == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(slope)
    };
    let p_value = student_t_two_sided_p(t, df as u64).max(P_FLOOR);
    let r_squared = if syy > 0.0 {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(RegressionResult {
        slope,
        intercept,
        slope_se,
        t,
        p_value,
        r_squared,
        n,
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Reference values from a 40-digit evaluation of I_{df/(df+t²)}(df/2, 1/2).
    const T_ORACLE: [(f64, u64, f64); 6] = [
        (2.5, 10, 0.031_446_844_236_608_813_97),
        (1.0, 1, 0.5),
        (40.0, 5, 1.841_196_217_177_295_3e-7),
        (0.3, 100, 0.764_799_880_300_296_4),
        (200.0, 30, 1.909_627_117_231_061_7e-48),
        (1e4, 50, 3.346_019_870_566_248_6e-159),
    ];

    #[test]
    fn ln_gamma_reference_points() {
        assert!((ln_gamma(0.5) - 0.572_364_942_924_700_087).abs() < 1e-14);
        assert!((ln_gamma(10.3) - 13.482_036_786_138_358_59).abs() < 1e-12);
        assert!((ln_gamma(1e-3) - 6.907_178_885_383_853_66).abs() < 1e-12);
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
    }

    #[test]
    fn incomplete_beta_reference_points() {
        // I_0.4(2,3) = 0.5248 in closed form
        assert!((regularized_incomplete_beta(2.0, 3.0, 0.4) - 0.5248).abs() < 1e-13);
        // arcsine law: I_x(½,½) = (2/π) asin √x
        let want = 2.0 / std::f64::consts::PI * 0.1f64.sqrt().asin();
        assert!((regularized_incomplete_beta(0.5, 0.5, 0.1) - want).abs() < 1e-13);
        assert!((regularized_incomplete_beta(10.0, 4.0, 0.9) - 0.965_839_279_077).abs() < 1e-11);
        assert_eq!(regularized_incomplete_beta(3.0, 2.0, 0.0), 0.0);
        assert_eq!(regularized_incomplete_beta(3.0, 2.0, 1.0), 1.0);
    }

    #[test]
    fn t_tail_against_high_precision_values() {
        for (t, df, want) in T_ORACLE {
            let got = student_t_two_sided_p(t, df);
            assert!(rel(got, want) < 1e-9, "t={t} df={df}: {got} vs {want}");
        }
        assert_eq!(student_t_two_sided_p(0.0, 7), 1.0);
        assert_eq!(student_t_two_sided_p(f64::INFINITY, 7), 0.0);
    }

    #[test]
    fn cauchy_tail_is_closed_form() {
        for t in [0.1f64, 0.5, 2.0, 10.0] {
            let want = 1.0 - 2.0 / std::f64::consts::PI * t.atan();
            assert!((student_t_two_sided_p(t, 1) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn textbook_regression() {
        let r = ols_regression(&[(1.0, 2.0), (2.0, 1.0), (3.0, 4.0), (4.0, 3.0)]).unwrap();
        assert!((r.slope - 0.6).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert!((r.slope_se - 0.32f64.sqrt()).abs() < 1e-12);
        assert!((r.t - 0.6 / 0.32f64.sqrt()).abs() < 1e-12);
        // t² = 9/8 on 2 df gives exactly 0.4
        assert!(rel(r.p_value, 0.4) < 1e-10);
        assert!((r.r_squared - 0.36).abs() < 1e-12);
        assert_eq!(r.n, 4);
    }

    #[test]
    fn exact_fit_floors_p() {
        let pts: Vec<(f64, f64)> = (1..=5).map(|x| (x as f64, 2.0 * x as f64 + 1.0)).collect();
        let r = ols_regression(&pts).unwrap();
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert!((r.intercept - 1.0).abs() < 1e-12);
        assert_eq!(r.p_value, P_FLOOR);
        assert!(r.p_value > 0.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(ols_regression(&[(1.0, 1.0), (2.0, 2.0)]), Err(Error::Validation(_))));
        assert!(matches!(
            ols_regression(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]),
            Err(Error::Numeric(_))
        ));
        let flat = ols_regression(&[(1.0, 3.0), (2.0, 3.0), (3.0, 3.0)]).unwrap();
        assert_eq!((flat.slope, flat.t, flat.p_value), (0.0, 0.0, 1.0));
    }

    #[test]
    fn rounding() {
        assert_eq!(round4(-18.003_72), "-18.0037");
        assert_eq!(round4(0.36), "0.3600");
        assert_eq!(round4(-0.000_01), "0.0000");
        assert_eq!(round_p(1.125e-16), "1.1250e-16");
        assert_eq!(round_p(7.3411e-6), "7.3411e-6");
        assert_eq!(round_p(0.4), "0.4000");
    }

    proptest! {
        #[test]
        fn symmetric_in_t(t in -50.0f64..50.0, df in 1u64..200) {
            prop_assert_eq!(student_t_two_sided_p(t, df), student_t_two_sided_p(-t, df));
        }

        #[test]
        fn decreasing_in_abs_t(df in 1u64..300) {
            let mut prev = 1.0;
            for k in 0..400 {
                let p = student_t_two_sided_p(k as f64 * 0.05, df);
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(p <= prev + 1e-15);
                prev = p;
            }
        }

        #[test]
        fn affine_equivariance(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..40),
            a in 0.1f64..10.0,
            b in -50.0f64..50.0,
        ) {
            let Ok(base) = ols_regression(&pts) else { return Ok(()); };
            prop_assume!(base.slope_se > 1e-6);
            let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x, a * y + b)).collect();
            let r = ols_regression(&moved).unwrap();
            let scale = 1.0 + base.slope.abs() * a;
            prop_assert!((r.slope - a * base.slope).abs() <= 1e-10 * scale);
            prop_assert!((r.intercept - (a * base.intercept + b)).abs() <= 1e-10 * (1.0 + r.intercept.abs()));
            prop_assert!((r.t - base.t).abs() <= 1e-10 * (1.0 + base.t.abs()));
            prop_assert!((r.p_value - base.p_value).abs() <= 1e-10);
        }

        #[test]
        fn residuals_orthogonal_to_x(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..50),
        ) {
            let Ok(r) = ols_regression(&pts) else { return Ok(()); };
            let dot: f64 = pts.iter().map(|&(x, y)| (y - r.intercept - r.slope * x) * x).sum();
            let sum: f64 = pts.iter().map(|&(x, y)| y - r.intercept - r.slope * x).sum();
            prop_assert!(dot.abs() <= 1e-9);
            prop_assert!(sum.abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&r.r_squared));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
