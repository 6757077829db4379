//! Scalar special functions needed by the limit constants: log-gamma
//! (Lanczos), the normal error function, the Kolmogorov tail, and Bessel
//! functions of the first kind together with their smallest positive zero.

use crate::{ErwError, Result};
use std::f64::consts::PI;

// Lanczos coefficients, g = 7, n = 9.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma function for `x > 0` (moderate arguments).
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Error function, |error| below 1e-15 over the real line.
///
/// Series for small arguments, continued fraction for the tail.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 3.0 {
        // erf(x) = 2/sqrt(pi) * sum (-1)^k x^(2k+1) / (k! (2k+1))
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        for k in 1..200 {
            term *= -x2 / k as f64;
            let add = term / (2.0 * k as f64 + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() + 1e-300 {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        1.0 - erfc_cf(x)
    }
}

// Complementary error function for x >= 3 via the continued fraction
// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
// evaluated backward at fixed depth.
fn erfc_cf(x: f64) -> f64 {
    let mut t = x;
    for i in (1..=80).rev() {
        t = x + 0.5 * i as f64 / t;
    }
    (-x * x).exp() / (PI.sqrt() * t)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Standard normal quantile via bisection plus Newton polish.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) || p == 0.0 || p == 1.0 {
        return Err(ErwError::Parameter(format!("quantile level {p} outside (0,1)")));
    }
    let mut lo = -10.0;
    let mut hi = 10.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut x: f64 = 0.5 * (lo + hi);
    for _ in 0..4 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if pdf > 0.0 {
            x -= (normal_cdf(x) - p) / pdf;
        }
    }
    Ok(x)
}

/// Kolmogorov tail `Q(lambda) = P(sup |bridge| > lambda)`, the asymptotic
/// p-value of the two-sided KS statistic.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-transformed series converges fast for small lambda
        let t = (-PI * PI / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * PI).sqrt() / lambda
            * (t + t.powi(9) + t.powi(25) + t.powi(49) + t.powi(81));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        for k in 1..100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Exact small-ball probability of one-dimensional Brownian motion,
/// `P(sup_{0<=t<=1} |B(t)| < eps)`.
///
/// Small levels use the reflection series
/// `(4/pi) sum_k (-1)^k/(2k+1) exp(-(2k+1)^2 pi^2/(8 eps^2))`; large
/// levels use its theta-dual `sum_k (-1)^k [Phi((2k+1)eps) - Phi((2k-1)eps)]`,
/// which converges immediately there.
pub fn bm_sup_probability(eps: f64) -> f64 {
    if eps <= 0.0 {
        return 0.0;
    }
    if eps < 1.5 {
        let mut sum = 0.0;
        for k in 0..64 {
            let m = (2 * k + 1) as f64;
            let term = (-(m * m) * PI * PI / (8.0 * eps * eps)).exp() / m;
            sum += if k % 2 == 0 { term } else { -term };
            if term < 1e-18 {
                break;
            }
        }
        (4.0 / PI * sum).clamp(0.0, 1.0)
    } else {
        let mut sum = 2.0 * normal_cdf(eps) - 1.0;
        for k in 1..64 {
            let m = 2.0 * k as f64;
            let term = normal_cdf((m + 1.0) * eps) - normal_cdf((m - 1.0) * eps);
            sum += if k % 2 == 0 { 2.0 * term } else { -2.0 * term };
            if term < 1e-18 {
                break;
            }
        }
        sum.clamp(0.0, 1.0)
    }
}

/// Bessel function of the first kind by ascending series,
/// `J_nu(x) = sum_k (-1)^k / (k! Gamma(nu+k+1)) (x/2)^(2k+nu)`.
///
/// Intended for `nu >= -1/2` and `0 < x <= 40`, which covers every smallest
/// zero for `nu` up to 20.
pub fn bessel_j(nu: f64, x: f64) -> f64 {
    debug_assert!(x > 0.0);
    // half-integer closed forms where exact
    if nu == -0.5 {
        return (2.0 / (PI * x)).sqrt() * x.cos();
    }
    if nu == 0.5 {
        return (2.0 / (PI * x)).sqrt() * x.sin();
    }
    let half = 0.5 * x;
    let mut term = (nu * half.ln() - ln_gamma(nu + 1.0)).exp();
    let mut sum = term;
    let x2 = half * half;
    for k in 1..200 {
        let k = k as f64;
        term *= -x2 / (k * (nu + k));
        sum += term;
        if term.abs() < 1e-17 * (sum.abs() + 1e-30) && k > 8.0 {
            break;
        }
    }
    sum
}

/// Smallest positive zero of `J_nu`, `nu >= -1/2`, to about 1e-12.
///
/// Bracket scan from zero up to a bound that grows with `nu` (the first
/// zero sits near `nu + 1.86 nu^(1/3)` for large `nu`), then bisection.
pub fn bessel_smallest_zero(nu: f64) -> Result<f64> {
    if nu < -0.5 {
        return Err(ErwError::Parameter(format!("index {nu} below -1/2")));
    }
    if nu == -0.5 {
        return Ok(PI / 2.0);
    }
    if nu == 0.5 {
        return Ok(PI);
    }
    let upper = (nu.max(0.0) + 2.5 * (nu.max(0.0) + 1.0).cbrt() + 6.0).min(40.0);
    let steps = 4000;
    let h = upper / steps as f64;
    let mut prev_x = 0.25 * h;
    let mut prev = bessel_j(nu, prev_x);
    for i in 1..=steps {
        let x = i as f64 * h;
        let v = bessel_j(nu, x);
        if prev != 0.0 && v == 0.0 {
            return Ok(x);
        }
        if prev.signum() != v.signum() {
            // bisection
            let (mut lo, mut hi) = (prev_x, x);
            let mut flo = prev;
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                let fm = bessel_j(nu, mid);
                if fm == 0.0 || hi - lo < 1e-13 {
                    return Ok(mid);
                }
                if fm.signum() == flo.signum() {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            return Ok(0.5 * (lo + hi));
        }
        prev_x = x;
        prev = v;
    }
    Err(ErwError::Numerical(format!("no sign change of J_{nu} found in (0, {upper}]")))
}
