//! χ² tail probabilities through the regularized incomplete gamma function,
//! and the one-sample Kolmogorov–Smirnov distance.

use crate::error::{Error, Result};

const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

// Lanczos approximation, g = 7, n = 9.
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

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Returns `(P(a, x), Q(a, x))`, the regularized lower and upper incomplete
/// gamma functions. Series below `x < a + 1`, continued fraction above.
pub fn regularized_gamma(a: f64, x: f64) -> Result<(f64, f64)> {
    if !(a.is_finite() && a > 0.0) || x.is_nan() || x < 0.0 {
        return Err(Error::Argument(format!(
            "incomplete gamma needs a > 0 and x >= 0, got a={a}, x={x}"
        )));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x.is_infinite() {
        return Ok((1.0, 0.0));
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * f64::EPSILON {
                let p = (log_prefactor + sum.ln()).exp().min(1.0);
                return Ok((p, 1.0 - p));
            }
        }
    } else {
        // modified Lentz
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
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
            if (delta - 1.0).abs() < f64::EPSILON {
                let q = (log_prefactor + h.ln()).exp().min(1.0);
                return Ok((1.0 - q, q));
            }
        }
    }
    Err(Error::Numerical(format!(
        "incomplete gamma did not converge for a={a}, x={x}"
    )))
}

/// `P(X > x)` for `X ~ χ²_k`.
pub fn chi2_sf(x: f64, k: f64) -> Result<f64> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::Argument(format!(
            "degrees of freedom must be positive, got {k}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Argument(format!(
            "chi-square argument must be >= 0, got {x}"
        )));
    }
    Ok(regularized_gamma(0.5 * k, 0.5 * x)?.1)
}

/// `P(X <= x)` for `X ~ χ²_k`.
pub fn chi2_cdf(x: f64, k: f64) -> Result<f64> {
    if k.is_nan() || k <= 0.0 {
        return Err(Error::Argument(format!(
            "degrees of freedom must be positive, got {k}"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(Error::Argument(format!(
            "chi-square argument must be >= 0, got {x}"
        )));
    }
    Ok(regularized_gamma(0.5 * k, 0.5 * x)?.0)
}

/// Kolmogorov–Smirnov distance `sup_x |F_n(x) - F(x)|` between the empirical
/// distribution of `samples` and a continuous CDF.
pub fn ks_distance<F>(samples: &[f64], cdf: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if samples.is_empty() {
        return Err(Error::Argument("KS distance needs samples".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut worst: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x)?;
        worst = worst.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(worst)
}
