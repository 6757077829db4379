//! Closed-form limit constants: covariance blocks for the walk, its step-sum
//! and its center of mass, iterated-logarithm constants, small-ball (Chung)
//! constants with Bessel zeros, deterministic growth products, second
//! moments of the superdiffusive limit, and urn mean/variance formulas.

use crate::model::MemorySchedule;
use crate::special::{bessel_smallest_zero, gamma};
use crate::walkers::RpwConfig;
use crate::{ErwError, Result};
use serde::{Deserialize, Serialize};

/// A `2d x 2d` covariance of the form `base (x) I_d / d` with a symmetric
/// 2x2 `base`. The critical matrices are stored in the same convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCovariance {
    pub base: [[f64; 2]; 2],
    pub d: usize,
}

impl BlockCovariance {
    pub fn new(b11: f64, b12: f64, b22: f64, d: usize) -> Self {
        BlockCovariance { base: [[b11, b12], [b12, b22]], d }
    }

    /// Entry of the full matrix; indices in `0..2d`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let (bi, ci) = (i / self.d, i % self.d);
        let (bj, cj) = (j / self.d, j % self.d);
        if ci == cj {
            self.base[bi][bj] / self.d as f64
        } else {
            0.0
        }
    }

    /// Dense row-major `2d x 2d` matrix.
    pub fn full(&self) -> Vec<f64> {
        let m = 2 * self.d;
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                out[i * m + j] = self.entry(i, j);
            }
        }
        out
    }

    /// Both eigenvalues of the base at least `-1e-12`.
    pub fn is_psd(&self) -> bool {
        let [[a, b], [_, c]] = self.base;
        let tr = a + c;
        let det = a * c - b * b;
        let disc = (tr * tr / 4.0 - det).max(0.0).sqrt();
        let lo = tr / 2.0 - disc;
        lo >= -1e-12
    }

    /// Quadratic form `u' M u` for a `2d`-vector `u`.
    pub fn quad_form(&self, u: &[f64]) -> f64 {
        let m = 2 * self.d;
        assert_eq!(u.len(), m);
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += u[i] * self.entry(i, j) * u[j];
            }
        }
        acc
    }
}

fn reject_critical(rho: f64) -> Result<f64> {
    if (rho - 0.5).abs() < 1e-12 {
        return Err(ErwError::Parameter(
            "rho = 1/2 has its own critical-branch constants".into(),
        ));
    }
    Ok((1.0 - 2.0 * rho).abs())
}

/// Joint covariance of `(S_n, T_n)/sqrt(n)`; diffusive and superdiffusive
/// branches (`gap = |1 - 2 rho|`). In the superdiffusive case the matrix
/// applies to the walk centered at `n^rho xi`.
pub fn cov_ts(rho: f64, mu_z: f64, sigma_z: f64, d: usize) -> Result<BlockCovariance> {
    let gap = reject_critical(rho)?;
    let s2 = sigma_z * sigma_z;
    let m2 = mu_z * mu_z;
    Ok(BlockCovariance::new(1.0 / gap, mu_z / gap, s2 + m2 / gap, d))
}

/// Critical-regime covariance of `(S_n, T_n)/sqrt(n log n)`.
pub fn cov_ts_critical(mu_z: f64, d: usize) -> BlockCovariance {
    BlockCovariance::new(1.0, mu_z, mu_z * mu_z, d)
}

/// Joint covariance of `(T_n, C_n)/sqrt(n)`; diffusive (`rho < 1/2`, factor
/// `2 - rho`) and superdiffusive (`rho > 1/2`, factor `1 + rho`) branches.
pub fn cov_tc(rho: f64, mu_z: f64, sigma_z: f64, d: usize) -> Result<BlockCovariance> {
    let gap = reject_critical(rho)?;
    let shift = if rho < 0.5 { 2.0 - rho } else { 1.0 + rho };
    let s2 = sigma_z * sigma_z;
    let m2 = mu_z * mu_z;
    Ok(BlockCovariance::new(
        s2 + m2 / gap,
        s2 / 2.0 + m2 / (gap * shift),
        s2 / 3.0 + 2.0 * m2 / (3.0 * gap * shift),
        d,
    ))
}

/// Critical covariance of `(T_n, C_n)/sqrt(n log n)`.
pub fn cov_tc_critical(mu_z: f64, d: usize) -> BlockCovariance {
    let m2 = mu_z * mu_z;
    BlockCovariance::new(m2, m2 * 2.0 / 3.0, m2 * 4.0 / 9.0, d)
}

/// Almost-sure limsup constants together with their normalization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LilConstants {
    /// limsup of `||T_n||` (centered in the superdiffusive case).
    pub lil_t: f64,
    /// limsup of `||C_n||` (centered likewise).
    pub lil_c: f64,
}

/// Constants under `sqrt(2 n log log n)` for `rho != 1/2`.
pub fn lil_constants(rho: f64, mu_z: f64, sigma_z: f64, d: usize) -> Result<LilConstants> {
    let gap = reject_critical(rho)?;
    let shift = if rho < 0.5 { 2.0 - rho } else { 1.0 + rho };
    let s2 = sigma_z * sigma_z;
    let m2 = mu_z * mu_z;
    let df = d as f64;
    Ok(LilConstants {
        lil_t: (s2 / df + m2 / (df * gap)).sqrt(),
        lil_c: (s2 / (3.0 * df) + 2.0 * m2 / (3.0 * df * gap * shift)).sqrt(),
    })
}

/// Critical constants under `sqrt(2 n (log n)(log log log n))`.
pub fn lil_constants_critical(mu_z: f64, d: usize) -> LilConstants {
    let df = (d as f64).sqrt();
    LilConstants { lil_t: mu_z.abs() / df, lil_c: 2.0 * mu_z.abs() / (3.0 * df) }
}

/// How the small-ball constant of the integrated process is supplied.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum KappaInput {
    /// Use the proven bracket for the given dimension.
    Bracket,
    /// A numeric estimate, e.g. from a small-ball fit.
    Estimate(f64),
}

/// Proven bracket for `kappa_d`: `[3/8, (2 pi)^{2/3} 3/8]` at `d = 1`,
/// widened by `[1, d^{4/3}]` for higher dimensions.
pub fn kappa_bracket(d: usize) -> (f64, f64) {
    let lo = 3.0 / 8.0;
    let hi = (2.0 * std::f64::consts::PI).powf(2.0 / 3.0) * 3.0 / 8.0;
    if d == 1 {
        (lo, hi)
    } else {
        (lo, hi * (d as f64).powf(4.0 / 3.0))
    }
}

/// Chung-type liminf constants. The walk constant depends only on the
/// dimension and `E[Z^2]` (the function takes no memory parameter at all);
/// the center-of-mass constant is interval-valued unless a `kappa`
/// estimate is supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChungConstants {
    pub nu: f64,
    pub j_nu: f64,
    pub kappa_lo: f64,
    pub kappa_hi: f64,
    pub ez2: f64,
    /// liminf of `(log log n / n)^{1/2} max_{m<=n} ||T_m||`.
    pub chung_t: f64,
    /// liminf of `(log log n)^{3/2} n^{-1/2} max_{m<=n} ||C_m||`, bracket.
    pub chung_c_lo: f64,
    pub chung_c_hi: f64,
}

pub fn chung_constants(d: usize, ez2: f64, kappa: KappaInput) -> Result<ChungConstants> {
    if d == 0 {
        return Err(ErwError::Parameter("dimension must be at least 1".into()));
    }
    if ez2 <= 0.0 {
        return Err(ErwError::Parameter("E[Z^2] must be positive".into()));
    }
    let nu = (d as f64 - 2.0) / 2.0;
    let j_nu = bessel_smallest_zero(nu)?;
    let (kappa_lo, kappa_hi) = match kappa {
        KappaInput::Bracket => kappa_bracket(d),
        KappaInput::Estimate(k) => {
            if k <= 0.0 {
                return Err(ErwError::Parameter("kappa estimate must be positive".into()));
            }
            (k, k)
        }
    };
    let chung_t = j_nu * (ez2 / (2.0 * d as f64)).sqrt();
    let scale = (ez2 / d as f64).sqrt();
    Ok(ChungConstants {
        nu,
        j_nu,
        kappa_lo,
        kappa_hi,
        ez2,
        chung_t,
        chung_c_lo: (3.0 * kappa_lo).powf(1.5) * scale,
        chung_c_hi: (3.0 * kappa_hi).powf(1.5) * scale,
    })
}

/// Deterministic growth product `prod_{i=m}^{n} (1 + rho_{i+1}/i)`, with
/// the empty product (`n = m - 1`) equal to one.
///
/// Long products run in log space so that memory parameters near one do
/// not overflow; short ones multiply directly. Use
/// [`gamma_product_direct`] / [`gamma_product_log`] to pin one evaluation
/// path.
pub fn gamma_product(m: u64, n: u64, schedule: &MemorySchedule, d: usize) -> Result<f64> {
    check_gamma_range(m, n)?;
    if n + 1 == m {
        return Ok(1.0);
    }
    if n - m < 10_000 {
        gamma_product_direct(m, n, schedule, d)
    } else {
        gamma_product_log(m, n, schedule, d)
    }
}

fn check_gamma_range(m: u64, n: u64) -> Result<()> {
    if m == 0 || n + 1 < m {
        return Err(ErwError::Parameter(format!("need 1 <= m <= n+1, got m={m}, n={n}")));
    }
    Ok(())
}

pub fn gamma_product_direct(m: u64, n: u64, schedule: &MemorySchedule, d: usize) -> Result<f64> {
    check_gamma_range(m, n)?;
    let mut prod = 1.0f64;
    for i in m..=n {
        prod *= 1.0 + schedule.rho_at(i + 1, d) / i as f64;
    }
    Ok(prod)
}

pub fn gamma_product_log(m: u64, n: u64, schedule: &MemorySchedule, d: usize) -> Result<f64> {
    check_gamma_range(m, n)?;
    let mut acc = 0.0f64;
    for i in m..=n {
        let factor = 1.0 + schedule.rho_at(i + 1, d) / i as f64;
        if factor <= 0.0 {
            // a vanishing factor kills the product; fall back to direct
            return gamma_product_direct(m, n, schedule, d);
        }
        acc += factor.ln();
    }
    Ok(acc.exp())
}

/// Limit of `gamma_{2,n-1} / n^rho` for a constant schedule:
/// `1 / Gamma(2 + rho)`.
pub fn gamma_product_limit_constant(rho: f64) -> f64 {
    1.0 / gamma(2.0 + rho)
}

/// Per-coordinate second moment of the superdiffusive limit `xi` for a
/// constant schedule: `1 / (d (2 rho - 1) Gamma(2 rho))`. The limit has
/// mean zero.
pub fn xi_second_moment(rho: f64, d: usize) -> Result<f64> {
    if rho <= 0.5 {
        return Err(ErwError::Parameter(format!(
            "xi exists only in the superdiffusive regime, got rho = {rho}"
        )));
    }
    Ok(1.0 / (d as f64 * (2.0 * rho - 1.0) * gamma(2.0 * rho)))
}

/// Per-coordinate second moment of `xi` for a general schedule, by
/// iterating the exact second-moment recursion to `n_trunc` and adding the
/// analytic tail of the increment sum. Returns `(value, truncation bound)`.
/// No closed form or convergence rate is available in general; the bound
/// only covers the truncated increments.
pub fn xi_second_moment_schedule(
    schedule: &MemorySchedule,
    d: usize,
    n_trunc: u64,
) -> Result<(f64, f64)> {
    let rho = schedule.rho_limit(d);
    if rho <= 0.5 {
        return Err(ErwError::Parameter("schedule limit is not superdiffusive".into()));
    }
    let df = d as f64;
    let mut v = 1.0 / df; // E S_{1,k}^2 after the uniform first step
    for i in 1..n_trunc {
        v = v * (1.0 + 2.0 * schedule.rho_at(i + 1, d) / i as f64) + 1.0 / df;
    }
    let value = v / (n_trunc as f64).powf(2.0 * rho);
    let tail = (n_trunc as f64).powf(1.0 - 2.0 * rho) / (df * (2.0 * rho - 1.0));
    Ok((value, tail))
}

/// Rate diagnostic attached to superdiffusive estimates:
/// `n^{1/2-rho} + |sum_{i>=n} (rho_i - rho)/i|`, with the tail summed
/// numerically over a generous window.
pub fn xi_rate_diagnostic(schedule: &MemorySchedule, d: usize, n: u64) -> f64 {
    let rho = schedule.rho_limit(d);
    let mut tail = 0.0;
    let cap = n.saturating_mul(200).max(1_000_000);
    for i in n..cap {
        tail += (schedule.rho_at(i, d) - rho) / i as f64;
    }
    (n as f64).powf(0.5 - rho) + tail.abs()
}

/// Exact mean ball count `E[W_n]` from the closed-form product.
pub fn rpw_mean(n: u64, cfg: &RpwConfig) -> Result<f64> {
    Ok(*rpw_mean_series(n, cfg)?.last().expect("n >= 1"))
}

/// `E[W_k]` for `k = 1..=n`, computed with the same operation sequence as
/// [`rpw_mean`] so that entries agree bitwise.
pub fn rpw_mean_series(n: u64, cfg: &RpwConfig) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(ErwError::Parameter("mean is defined for n >= 1".into()));
    }
    let (qa, qb) = (cfg.q_a(), cfg.q_b());
    if qa + qb <= 0.0 {
        return Err(ErwError::Parameter("need q_A + q_B > 0".into()));
    }
    let rho = cfg.rho();
    let alpha0 = cfg.alpha0() as f64;
    let v = cfg.limit_fraction();
    let ew1 = if cfg.alpha0() == 0 {
        cfg.p0 * cfg.p_a + (1.0 - cfg.p0) * qb
    } else {
        cfg.w0 as f64 + rho * cfg.w0 as f64 / alpha0 + qb
    };
    let dev1 = ew1 - (alpha0 + 1.0) * v;
    let mut out = Vec::with_capacity(n as usize);
    out.push(ew1);
    let mut prod = 1.0f64;
    for k in 1..n {
        prod *= 1.0 + rho / (alpha0 + k as f64);
        out.push((alpha0 + (k + 1) as f64) * v + prod * dev1);
    }
    Ok(out)
}

/// CLT variance of `(W_n - n v)/sqrt(n)` by regime of `p_A + p_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RpwCltVariance {
    /// `p_A + p_B < 3/2`, normalization `sqrt(n)`.
    Diffusive(f64),
    /// `p_A + p_B = 3/2`, normalization `sqrt(n log n)`.
    Critical(f64),
    /// `p_A + p_B > 3/2`: no Gaussian CLT, `(W_n - n v)/n^rho` converges.
    Superdiffusive,
}

pub fn rpw_clt_variance(p_a: f64, p_b: f64) -> Result<RpwCltVariance> {
    let (qa, qb) = (1.0 - p_a, 1.0 - p_b);
    if qa * qb == 0.0 {
        return Err(ErwError::Parameter("CLT requires q_A * q_B != 0".into()));
    }
    let s = p_a + p_b;
    let q = qa + qb;
    if (s - 1.5).abs() < 1e-12 {
        Ok(RpwCltVariance::Critical(qa * qb / (q * q)))
    } else if s < 1.5 {
        Ok(RpwCltVariance::Diffusive(qa * qb / (q * q * (2.0 * q - 1.0))))
    } else {
        Ok(RpwCltVariance::Superdiffusive)
    }
}
