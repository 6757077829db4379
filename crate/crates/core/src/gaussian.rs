//! Exact samplers for the limit Gaussian processes and numerical
//! integration of their paths.
//!
//! No Euler discretization anywhere: every process is sampled through an
//! exact Gaussian recursion or a time-changed Brownian motion, so grid
//! values carry the exact finite-dimensional law. Discretization enters
//! only through path integrals and suprema taken over the grid.

use crate::rng::{stream_rng, Channel};
use crate::{ErwError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Which limit process a grid carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessTag {
    /// `G_t = t^rho int_0^t s^{-rho} dB(s)`, `rho < 1/2`.
    Diffusive { rho: f64 },
    /// `G^_t = t^rho int_1^t s^{-rho} dB(s)` at `rho = 1/2`; equals
    /// `sqrt(t) B(log t)` in law, defined for `t >= 1`.
    CriticalHat,
    /// `G_t = -t^rho int_t^inf s^{-rho} dB(s)`, `rho > 1/2`; equals
    /// `t^{1-rho} B(t^{2 rho - 1}) / sqrt(2 rho - 1)` in law.
    Superdiffusive { rho: f64 },
    /// `sigma1 G^(1)(rho1) + sigma2 G^(2)(rho2)` with independent factors.
    Mixture { rho1: f64, rho2: f64, sigma1: f64, sigma2: f64 },
    BrownianMotion,
    Integrated(Box<ProcessTag>),
}

/// Time grid plus sampled values of a limit process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianGrid {
    pub tag: ProcessTag,
    pub d: usize,
    pub times: Vec<f64>,
    /// Time-major values, `d` per grid point.
    pub values: Vec<f64>,
    /// For integrated grids: the largest time step of the source grid
    /// (the trapezoid error is of its square).
    pub integration_max_dt: Option<f64>,
}

impl GaussianGrid {
    pub fn value_at(&self, k: usize) -> &[f64] {
        &self.values[k * self.d..(k + 1) * self.d]
    }
}

fn check_times(times: &[f64], min_first: f64) -> Result<()> {
    if times.is_empty() {
        return Err(ErwError::Parameter("empty time grid".into()));
    }
    if times[0] < min_first || (min_first == 0.0 && times[0] <= 0.0) {
        return Err(ErwError::Parameter(format!(
            "first grid time {} below {min_first}",
            times[0]
        )));
    }
    if !times.windows(2).all(|w| w[0] < w[1]) {
        return Err(ErwError::Parameter("grid times must be strictly increasing".into()));
    }
    Ok(())
}

/// One-step transition of the diffusive process from `t0` to `t1 > t0`:
/// `G_{t1} = a G_{t0} + sd * N(0, I_d)`. With `t0 = 0` this is the exact
/// marginal at `t1` (the integral from zero converges for `rho < 1/2`).
pub fn diffusive_transition(rho: f64, t0: f64, t1: f64) -> (f64, f64) {
    debug_assert!(rho < 0.5);
    let a = if t0 == 0.0 { 0.0 } else { (t1 / t0).powf(rho) };
    let var = t1.powf(2.0 * rho) * (t1.powf(1.0 - 2.0 * rho) - t0.powf(1.0 - 2.0 * rho))
        / (1.0 - 2.0 * rho);
    (a, var.max(0.0).sqrt())
}

/// Exact sample of the diffusive process on the grid.
pub fn sample_g_diffusive(
    rho: f64,
    times: &[f64],
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GaussianGrid> {
    if rho >= 0.5 {
        return Err(ErwError::Parameter(format!("diffusive sampler needs rho < 1/2, got {rho}")));
    }
    check_times(times, 0.0)?;
    let mut values = Vec::with_capacity(times.len() * d);
    let mut prev = vec![0.0f64; d];
    let mut t_prev = 0.0f64;
    for &t in times {
        let (a, sd) = diffusive_transition(rho, t_prev, t);
        for v in prev.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = a * *v + sd * z;
        }
        values.extend_from_slice(&prev);
        t_prev = t;
    }
    Ok(GaussianGrid {
        tag: ProcessTag::Diffusive { rho },
        d,
        times: times.to_vec(),
        values,
        integration_max_dt: None,
    })
}

/// Standard Brownian motion on the grid (the `rho = 0` case, kept separate
/// for clarity and used as the reference process in small-ball work).
pub fn sample_bm(times: &[f64], d: usize, rng: &mut ChaCha8Rng) -> Result<GaussianGrid> {
    check_times(times, 0.0)?;
    let mut values = Vec::with_capacity(times.len() * d);
    let mut prev = vec![0.0f64; d];
    let mut t_prev = 0.0f64;
    for &t in times {
        let sd = (t - t_prev).sqrt();
        for v in prev.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
        values.extend_from_slice(&prev);
        t_prev = t;
    }
    Ok(GaussianGrid {
        tag: ProcessTag::BrownianMotion,
        d,
        times: times.to_vec(),
        values,
        integration_max_dt: None,
    })
}

/// Exact sample of the critical process `sqrt(t) B(log t)` for `t >= 1`.
///
/// The process identity extends to `t > 0` with a two-sided Brownian
/// motion in log time; this sampler restricts to `t >= 1`, where the
/// value at `t = 1` is exactly zero.
pub fn sample_g_hat(times: &[f64], d: usize, rng: &mut ChaCha8Rng) -> Result<GaussianGrid> {
    check_times(times, 1.0)?;
    let mut values = Vec::with_capacity(times.len() * d);
    let mut b = vec![0.0f64; d]; // B(log t)
    let mut log_prev = 0.0f64;
    for &t in times {
        let lt = t.ln();
        let sd = (lt - log_prev).sqrt();
        let rt = t.sqrt();
        for v in b.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
        values.extend(b.iter().map(|&v| rt * v));
        log_prev = lt;
    }
    Ok(GaussianGrid {
        tag: ProcessTag::CriticalHat,
        d,
        times: times.to_vec(),
        values,
        integration_max_dt: None,
    })
}

/// Exact sample of the superdiffusive fluctuation process via its
/// time-change identity `t^{1-rho} B(t^{2 rho - 1}) / sqrt(2 rho - 1)`.
pub fn sample_g_super(
    rho: f64,
    times: &[f64],
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GaussianGrid> {
    if rho <= 0.5 {
        return Err(ErwError::Parameter(format!(
            "superdiffusive sampler needs rho > 1/2, got {rho}"
        )));
    }
    check_times(times, 0.0)?;
    let scale = 1.0 / (2.0 * rho - 1.0).sqrt();
    let mut values = Vec::with_capacity(times.len() * d);
    let mut b = vec![0.0f64; d]; // B(t^{2 rho - 1})
    let mut u_prev = 0.0f64;
    for &t in times {
        let u = t.powf(2.0 * rho - 1.0);
        let sd = (u - u_prev).sqrt();
        let amp = scale * t.powf(1.0 - rho);
        for v in b.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += sd * z;
        }
        values.extend(b.iter().map(|&v| amp * v));
        u_prev = u;
    }
    Ok(GaussianGrid {
        tag: ProcessTag::Superdiffusive { rho },
        d,
        times: times.to_vec(),
        values,
        integration_max_dt: None,
    })
}

/// Sum of two independent diffusive processes,
/// `I(t) = sigma1 G^(1)_t(rho1) + sigma2 G^(2)_t(rho2)`.
pub fn sample_mixture(
    rho1: f64,
    rho2: f64,
    sigma1: f64,
    sigma2: f64,
    times: &[f64],
    d: usize,
    rng: &mut ChaCha8Rng,
) -> Result<GaussianGrid> {
    if rho1 >= 0.5 || rho2 >= 0.5 {
        return Err(ErwError::Parameter("mixture needs both exponents below 1/2".into()));
    }
    let g1 = sample_g_diffusive(rho1, times, d, rng)?;
    let g2 = sample_g_diffusive(rho2, times, d, rng)?;
    let values: Vec<f64> = g1
        .values
        .iter()
        .zip(g2.values.iter())
        .map(|(&a, &b)| sigma1 * a + sigma2 * b)
        .collect();
    Ok(GaussianGrid {
        tag: ProcessTag::Mixture { rho1, rho2, sigma1, sigma2 },
        d,
        times: times.to_vec(),
        values,
        integration_max_dt: None,
    })
}

/// Cumulative trapezoidal integral of a sampled path. The segment from 0
/// to the first grid point is treated as linear from zero (all processes
/// here start at the origin); the trapezoid error is of order the squared
/// maximum time step, recorded in `integration_max_dt`.
pub fn integrate_path(grid: &GaussianGrid) -> Result<GaussianGrid> {
    if grid.times.len() < 2 {
        return Err(ErwError::Parameter("need at least two grid points to integrate".into()));
    }
    let d = grid.d;
    let mut values = Vec::with_capacity(grid.values.len());
    let mut acc = vec![0.0f64; d];
    let mut t_prev = 0.0f64;
    let mut v_prev = vec![0.0f64; d];
    let mut max_dt = 0.0f64;
    for (k, &t) in grid.times.iter().enumerate() {
        let dt = t - t_prev;
        max_dt = max_dt.max(dt);
        let v = grid.value_at(k);
        for j in 0..d {
            acc[j] += 0.5 * (v_prev[j] + v[j]) * dt;
        }
        values.extend_from_slice(&acc);
        v_prev.copy_from_slice(v);
        t_prev = t;
    }
    Ok(GaussianGrid {
        tag: ProcessTag::Integrated(Box::new(grid.tag.clone())),
        d,
        times: grid.times.clone(),
        values,
        integration_max_dt: Some(max_dt),
    })
}

/// Closed-form covariances of the samplers, used as oracles in tests and
/// verification experiments. `s <= t` is required.
pub mod covariance {
    /// Diffusive: `(s t)^rho s^{1-2 rho} / (1 - 2 rho)`.
    pub fn diffusive(rho: f64, s: f64, t: f64) -> f64 {
        (s * t).powf(rho) * s.powf(1.0 - 2.0 * rho) / (1.0 - 2.0 * rho)
    }
    /// Critical: `sqrt(s t) * log(min(s,t))`.
    pub fn critical_hat(s: f64, t: f64) -> f64 {
        (s * t).sqrt() * s.min(t).ln()
    }
    /// Superdiffusive: `s^rho t^{1-rho} / (2 rho - 1)`.
    pub fn superdiffusive(rho: f64, s: f64, t: f64) -> f64 {
        s.powf(rho) * t.powf(1.0 - rho) / (2.0 * rho - 1.0)
    }
    /// Mixture of two diffusive factors.
    pub fn mixture(rho1: f64, rho2: f64, sigma1: f64, sigma2: f64, s: f64, t: f64) -> f64 {
        sigma1 * sigma1 * diffusive(rho1, s, t) + sigma2 * sigma2 * diffusive(rho2, s, t)
    }
}

/// Per-replicate stream on the Gaussian channel.
pub fn batch_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    stream_rng(seed, replicate, Channel::Gaussian)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    fn cov(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        a.iter().zip(b).map(|(&x, &y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
    }

    #[test]
    fn diffusive_transition_examples() {
        // rho = 0 is plain Brownian motion
        let (a, sd) = diffusive_transition(0.0, 1.0, 4.0);
        assert_relative_eq!(a, 1.0, epsilon = 1e-14);
        assert_relative_eq!(sd * sd, 3.0, epsilon = 1e-12);
        // rho = 1/4 from t=1 to t=4: copy coefficient sqrt(2), increment var 4
        let (a, sd) = diffusive_transition(0.25, 1.0, 4.0);
        assert_relative_eq!(a, 2.0f64.sqrt(), epsilon = 1e-14);
        assert_relative_eq!(sd * sd, 4.0, epsilon = 1e-12);
        // marginal at t=4: 2 * Var G_1 + 4 = 8 = 4 / (1 - 2 rho)
        let (_, sd0) = diffusive_transition(0.25, 0.0, 1.0);
        let var4 = a * a * sd0 * sd0 + sd * sd;
        assert_relative_eq!(var4, 8.0, epsilon = 1e-12);
        assert_relative_eq!(var4, covariance::diffusive(0.25, 4.0, 4.0), epsilon = 1e-12);
    }

    #[test]
    fn diffusive_marginals_and_covariance() {
        let rho = 0.25;
        let times = [1.0, 4.0];
        let n = 200_000u64;
        let mut g1 = Vec::with_capacity(n as usize);
        let mut g4 = Vec::with_capacity(n as usize);
        for rep in 0..n {
            let mut rng = batch_rng(100, rep);
            let g = sample_g_diffusive(rho, &times, 1, &mut rng).unwrap();
            g1.push(g.values[0]);
            g4.push(g.values[1]);
        }
        let (m1, v1) = moments(&g1);
        let (_, v4) = moments(&g4);
        // 4 standard errors of a variance estimate: var * sqrt(2/n) * 4
        let band = |v: f64| 4.0 * v * (2.0 / n as f64).sqrt();
        assert!(m1.abs() < 4.0 * (v1 / n as f64).sqrt());
        assert_relative_eq!(v1, 2.0, epsilon = band(2.0));
        assert_relative_eq!(v4, 8.0, epsilon = band(8.0));
        let c = cov(&g1, &g4);
        let expect = covariance::diffusive(rho, 1.0, 4.0);
        let se_c = ((v1 * v4 + expect * expect) / n as f64).sqrt();
        assert!((c - expect).abs() < 4.0 * se_c, "cov {c} vs {expect}");
        assert!(sample_g_diffusive(0.5, &times, 1, &mut batch_rng(0, 0)).is_err());
    }

    #[test]
    fn critical_hat_marginals() {
        let e = std::f64::consts::E;
        let times = [1.0, e, e * e];
        let n = 200_000u64;
        let mut at_e = Vec::new();
        let mut at_e2 = Vec::new();
        for rep in 0..n {
            let mut rng = batch_rng(200, rep);
            let g = sample_g_hat(&times, 1, &mut rng).unwrap();
            assert_eq!(g.values[0], 0.0, "value at t=1 is exactly zero");
            at_e.push(g.values[1]);
            at_e2.push(g.values[2]);
        }
        let (_, ve) = moments(&at_e);
        let band = |v: f64| 4.0 * v * (2.0 / n as f64).sqrt();
        assert_relative_eq!(ve, e, epsilon = band(e));
        // Cov(G^_e, G^_e2) = sqrt(e * e^2) * 1 = e^{3/2}
        let c = cov(&at_e, &at_e2);
        let expect = covariance::critical_hat(e, e * e);
        assert_relative_eq!(expect, e.powf(1.5), epsilon = 1e-12);
        let (_, ve2) = moments(&at_e2);
        let se_c = ((ve * ve2 + expect * expect) / n as f64).sqrt();
        assert!((c - expect).abs() < 4.0 * se_c);
        // grids below t=1 are rejected
        assert!(sample_g_hat(&[0.5, 2.0], 1, &mut batch_rng(0, 0)).is_err());
    }

    #[test]
    fn superdiffusive_marginals_and_covariance() {
        let rho = 0.75;
        let times = [1.0, 4.0];
        let n = 200_000u64;
        let mut g1 = Vec::new();
        let mut g4 = Vec::new();
        for rep in 0..n {
            let mut rng = batch_rng(300, rep);
            let g = sample_g_super(rho, &times, 1, &mut rng).unwrap();
            g1.push(g.values[0]);
            g4.push(g.values[1]);
        }
        let (_, v1) = moments(&g1);
        let band = |v: f64| 4.0 * v * (2.0 / n as f64).sqrt();
        // Var G_1 = 1/(2 rho - 1) = 2
        assert_relative_eq!(v1, 2.0, epsilon = band(2.0));
        let c = cov(&g1, &g4);
        let expect = covariance::superdiffusive(rho, 1.0, 4.0);
        assert_relative_eq!(expect, 2.0 * 4.0f64.powf(0.25), epsilon = 1e-12);
        let (_, v4) = moments(&g4);
        let se_c = ((v1 * v4 + expect * expect) / n as f64).sqrt();
        assert!((c - expect).abs() < 4.0 * se_c, "cov {c} vs {expect}");
        // rho -> 1: Var G_1 -> 1 by the formula
        assert_relative_eq!(covariance::superdiffusive(1.0, 1.0, 1.0), 1.0, epsilon = 1e-12);
        assert!(sample_g_super(0.5, &times, 1, &mut batch_rng(0, 0)).is_err());
    }

    #[test]
    fn mixture_reduces_and_adds_variances() {
        let times = [0.5, 1.0];
        let n = 150_000u64;
        // sigma1 = 0 reduces exactly to the second factor alone
        let mut a = batch_rng(400, 7);
        let mut b = batch_rng(400, 7);
        let mix = sample_mixture(0.1, 0.2, 0.0, 3.0, &times, 2, &mut a).unwrap();
        let _skip = sample_g_diffusive(0.1, &times, 2, &mut b).unwrap();
        let g2 = sample_g_diffusive(0.2, &times, 2, &mut b).unwrap();
        for (x, y) in mix.values.iter().zip(g2.values.iter()) {
            assert_relative_eq!(*x, 3.0 * y, epsilon = 1e-12);
        }
        // Var I(1) = sigma1^2/(1-2rho1) + sigma2^2/(1-2rho2)
        let (r1, r2, s1, s2) = (0.0, 0.2, 0.6, 0.8);
        let mut vals = Vec::new();
        for rep in 0..n {
            let mut rng = batch_rng(500, rep);
            let g = sample_mixture(r1, r2, s1, s2, &[1.0], 1, &mut rng).unwrap();
            vals.push(g.values[0]);
        }
        let (_, v) = moments(&vals);
        let expect = s1 * s1 + s2 * s2 / (1.0 - 2.0 * r2);
        assert_relative_eq!(v, expect, epsilon = 4.0 * expect * (2.0 / n as f64).sqrt());
        // rho1 = rho2 = 0 is a scaled Brownian motion
        assert_relative_eq!(
            covariance::mixture(0.0, 0.0, s1, s2, 0.5, 1.0),
            (s1 * s1 + s2 * s2) * 0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn markov_consistency_of_the_diffusive_recursion() {
        // sampling {1,2,4} jointly vs {1,4} marginally: same (1,4) covariance
        let rho = 0.3;
        let n = 150_000u64;
        let (mut j1, mut j4, mut m1, mut m4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for rep in 0..n {
            let mut rng = batch_rng(600, rep);
            let g = sample_g_diffusive(rho, &[1.0, 2.0, 4.0], 1, &mut rng).unwrap();
            j1.push(g.values[0]);
            j4.push(g.values[2]);
            let mut rng = batch_rng(601, rep);
            let g = sample_g_diffusive(rho, &[1.0, 4.0], 1, &mut rng).unwrap();
            m1.push(g.values[0]);
            m4.push(g.values[1]);
        }
        let cj = cov(&j1, &j4);
        let cm = cov(&m1, &m4);
        let expect = covariance::diffusive(rho, 1.0, 4.0);
        let (_, v1) = moments(&j1);
        let (_, v4) = moments(&j4);
        let se = ((v1 * v4 + expect * expect) / n as f64).sqrt();
        assert!((cj - expect).abs() < 4.0 * se, "joint {cj} vs {expect}");
        assert!((cm - expect).abs() < 4.0 * se, "marginal {cm} vs {expect}");
    }

    #[test]
    fn trapezoid_is_exact_for_linear_paths() {
        let grid = GaussianGrid {
            tag: ProcessTag::BrownianMotion,
            d: 1,
            times: vec![0.5, 1.0],
            values: vec![0.5, 1.0], // v(t) = t
            integration_max_dt: None,
        };
        let int = integrate_path(&grid).unwrap();
        assert_relative_eq!(int.values[1], 0.5, epsilon = 1e-15);
        assert_eq!(int.integration_max_dt, Some(0.5));
        assert!(matches!(int.tag, ProcessTag::Integrated(_)));
        let single = GaussianGrid { times: vec![1.0], values: vec![1.0], ..grid };
        assert!(integrate_path(&single).is_err());
    }

    #[test]
    fn integrated_brownian_moments() {
        // Var(int_0^1 B) = 1/3 and Cov(B(1), int_0^1 B) = 1/2
        let m = 512usize;
        let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
        let n = 100_000u64;
        let mut ints = Vec::new();
        let mut ends = Vec::new();
        for rep in 0..n {
            let mut rng = batch_rng(700, rep);
            let b = sample_bm(&times, 1, &mut rng).unwrap();
            let i = integrate_path(&b).unwrap();
            ints.push(*i.values.last().unwrap());
            ends.push(*b.values.last().unwrap());
        }
        let (_, vi) = moments(&ints);
        assert_relative_eq!(vi, 1.0 / 3.0, max_relative = 0.015);
        let c = cov(&ends, &ints);
        assert_relative_eq!(c, 0.5, max_relative = 0.015);
    }

    #[test]
    fn refining_the_grid_barely_moves_the_integral_variance() {
        // couple fine and coarse estimates through the same paths
        let m = 1000usize;
        let times: Vec<f64> = (1..=2 * m).map(|i| i as f64 / (2 * m) as f64).collect();
        let n = 10_000u64;
        let mut sum_f = 0.0;
        let mut sum_c = 0.0;
        let mut sumsq_f = 0.0;
        let mut sumsq_c = 0.0;
        for rep in 0..n {
            let mut rng = batch_rng(800, rep);
            let g = sample_g_diffusive(0.2, &times, 1, &mut rng).unwrap();
            let fine = integrate_path(&g).unwrap();
            let vf = *fine.values.last().unwrap();
            // coarse integral over every second point of the same path
            let mut acc = 0.0;
            let mut tp = 0.0;
            let mut vp = 0.0;
            for k in (1..=2 * m).step_by(2) {
                let t = times[k - 1];
                let v = g.values[k - 1];
                acc += 0.5 * (vp + v) * (t - tp);
                tp = t;
                vp = v;
            }
            sum_f += vf;
            sum_c += acc;
            sumsq_f += vf * vf;
            sumsq_c += acc * acc;
        }
        let var_f = sumsq_f / n as f64 - (sum_f / n as f64).powi(2);
        let var_c = sumsq_c / n as f64 - (sum_c / n as f64).powi(2);
        assert!(
            (var_f / var_c - 1.0).abs() < 0.005,
            "refinement moved the variance: {var_c} -> {var_f}"
        );
    }
}
