//! Estimators and verification procedures: streaming moments, normality
//! tests, estimation of the superdiffusive limit, iterated-logarithm
//! tracking, small-ball probability estimation, and logarithmic path
//! averages.

use crate::batch;
use crate::gaussian::diffusive_transition;
use crate::model::{MemorySchedule, Regime};
use crate::rng::{stream_rng, Channel};
use crate::special::kolmogorov_tail;
use crate::theory::{gamma_product, gamma_product_limit_constant, BlockCovariance};
use crate::walkers::WalkPath;
use crate::{ErwError, Result};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Streaming mean and centered second-moment matrix for `dim`-vectors.
/// Numerically stable and mergeable; merging two accumulators gives the
/// same moments as accumulating the concatenated samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAccumulator {
    dim: usize,
    count: u64,
    mean: Vec<f64>,
    /// Row-major `dim x dim` sum of centered outer products.
    m2: Vec<f64>,
}

impl MomentAccumulator {
    pub fn new(dim: usize) -> Self {
        MomentAccumulator { dim, count: 0, mean: vec![0.0; dim], m2: vec![0.0; dim * dim] }
    }

    pub fn count(&self) -> u64 {
        self.count
    }
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn accumulate(&mut self, x: &[f64]) {
        assert_eq!(x.len(), self.dim);
        self.count += 1;
        let inv = 1.0 / self.count as f64;
        let delta: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * inv;
        }
        for i in 0..self.dim {
            let d2i = x[i] - self.mean[i];
            for j in 0..self.dim {
                self.m2[i * self.dim + j] += delta[j] * d2i;
            }
        }
    }

    pub fn merge(mut a: MomentAccumulator, b: &MomentAccumulator) -> MomentAccumulator {
        assert_eq!(a.dim, b.dim);
        if b.count == 0 {
            return a;
        }
        if a.count == 0 {
            return b.clone();
        }
        let n = (a.count + b.count) as f64;
        let (na, nb) = (a.count as f64, b.count as f64);
        let delta: Vec<f64> = b.mean.iter().zip(&a.mean).map(|(x, y)| x - y).collect();
        for i in 0..a.dim {
            for j in 0..a.dim {
                a.m2[i * a.dim + j] += b.m2[i * a.dim + j] + delta[i] * delta[j] * na * nb / n;
            }
        }
        for (m, d) in a.mean.iter_mut().zip(&delta) {
            *m += d * nb / n;
        }
        a.count += b.count;
        a
    }

    /// Sample mean and covariance (divisor `count - 1`).
    pub fn finalize(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.count < 2 {
            return Err(ErwError::Parameter("need at least two samples".into()));
        }
        let denom = (self.count - 1) as f64;
        Ok((self.mean.clone(), self.m2.iter().map(|v| v / denom).collect()))
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Covariance entry `(i, j)`.
    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.m2[i * self.dim + j] / (self.count - 1) as f64
    }

    /// Variance of coordinate `i`.
    pub fn var(&self, i: usize) -> f64 {
        self.cov(i, i)
    }
}

/// Two-sided Kolmogorov-Smirnov distance of a sample from the centered
/// normal with the given variance, with the asymptotic tail p-value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: u64,
}

pub fn ks_normal(samples: &[f64], variance: f64) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(ErwError::Parameter("empty sample".into()));
    }
    if !(variance > 0.0) {
        return Err(ErwError::Parameter("variance must be positive".into()));
    }
    let mut xs = samples.to_vec();
    xs.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN samples"));
    let n = xs.len() as f64;
    let sd = variance.sqrt();
    let mut d = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let cdf = crate::special::normal_cdf(x / sd);
        d = d.max((cdf - i as f64 / n).abs());
        d = d.max(((i + 1) as f64 / n - cdf).abs());
    }
    let lambda = n.sqrt() * d;
    Ok(KsResult { statistic: d, p_value: kolmogorov_tail(lambda), n: xs.len() as u64 })
}

/// Which series to normalize when estimating the superdiffusive limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiSeries {
    /// `S_n / norm -> xi`.
    StepSum,
    /// `T_n / norm -> mu_Z xi`.
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiNormalization {
    /// Divide by `n^rho`.
    PowerLaw,
    /// Divide by the growth product `gamma_{2,n-1}` rescaled by its limit
    /// constant `C0 = lim gamma_{2,n-1}/n^rho`, so both normalizations
    /// estimate the same limit. This is the martingale route and converges
    /// without the schedule-tail term in the rate.
    GammaProduct,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiEstimate {
    pub normalization: XiNormalization,
    pub series: XiSeries,
    pub horizon: u64,
    pub d: usize,
    /// Per-path estimates, path-major `d` per entry.
    pub samples: Vec<f64>,
    pub mean: Vec<f64>,
    /// Per-coordinate second moments.
    pub second_moment: Vec<f64>,
    /// `C0 = lim gamma_{2,n-1} / n^rho` used for the rescaling.
    pub c0: f64,
    /// Rate diagnostic `n^{1/2-rho} + |tail|` at the horizon.
    pub rate: f64,
}

/// Estimate the superdiffusive limit from a batch of paths. The paths
/// must carry the horizon as their last checkpoint.
pub fn estimate_xi(
    paths: &[WalkPath],
    schedule: &MemorySchedule,
    d: usize,
    series: XiSeries,
    normalization: XiNormalization,
) -> Result<XiEstimate> {
    let regime = crate::model::regime_classify(schedule, d)?;
    if regime.regime != Regime::Superdiffusive {
        return Err(ErwError::Parameter(
            "limit estimation applies to the superdiffusive regime only".into(),
        ));
    }
    let rho = regime.rho;
    if paths.is_empty() {
        return Err(ErwError::Parameter("empty path batch".into()));
    }
    let horizon = *paths[0].checkpoints.last().unwrap();
    let c0 = if schedule.is_constant() {
        gamma_product_limit_constant(rho)
    } else {
        // numeric limit of the growth product
        let big = 4_000_000u64.max(horizon);
        gamma_product(2, big - 1, schedule, d)? / (big as f64).powf(rho)
    };
    let norm = match normalization {
        XiNormalization::PowerLaw => (horizon as f64).powf(rho),
        XiNormalization::GammaProduct => gamma_product(2, horizon - 1, schedule, d)? / c0,
    };
    let mut samples = Vec::with_capacity(paths.len() * d);
    let mut mean = vec![0.0f64; d];
    let mut second = vec![0.0f64; d];
    for p in paths {
        if p.d != d || p.checkpoints.last() != Some(&horizon) {
            return Err(ErwError::Parameter("paths disagree on dimension or horizon".into()));
        }
        let k = p.checkpoints.len() - 1;
        for j in 0..d {
            let raw = match series {
                XiSeries::StepSum => p.s_at(k)[j] as f64,
                XiSeries::Position => p.t_at(k)[j],
            };
            let v = raw / norm;
            samples.push(v);
            mean[j] += v;
            second[j] += v * v;
        }
    }
    let np = paths.len() as f64;
    for j in 0..d {
        mean[j] /= np;
        second[j] /= np;
    }
    Ok(XiEstimate {
        normalization,
        series,
        horizon,
        d,
        samples,
        mean,
        second_moment: second,
        c0,
        rate: crate::theory::xi_rate_diagnostic(schedule, d, horizon),
    })
}

/// Variants of the logarithmic path average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AsCltVariant {
    /// `(1/log n) sum_{k=1}^n f(x_k / sqrt(k)) / k`.
    Diffusive,
    /// `(1/log log n) sum_{k=2}^n f(x_k / sqrt(k log k)) / (k log k)`.
    Critical,
}

impl AsCltVariant {
    /// Harmonic-type weight of index `k`.
    pub fn weight(&self, k: u64) -> f64 {
        match self {
            AsCltVariant::Diffusive => 1.0 / k as f64,
            AsCltVariant::Critical => {
                if k < 2 {
                    0.0
                } else {
                    1.0 / (k as f64 * (k as f64).ln())
                }
            }
        }
    }

    /// Scale dividing the path value at index `k`.
    pub fn scale(&self, k: u64) -> f64 {
        match self {
            AsCltVariant::Diffusive => (k as f64).sqrt(),
            AsCltVariant::Critical => (k as f64 * (k as f64).ln()).max(0.0).sqrt(),
        }
    }

    /// Normalizer of the weighted sum up to `n`.
    pub fn normalizer(&self, n: u64) -> f64 {
        match self {
            AsCltVariant::Diffusive => (n as f64).ln(),
            AsCltVariant::Critical => (n as f64).ln().ln(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsCltResult {
    pub average: f64,
    /// Weight-averaged relative gap `|k - nearest checkpoint| / k`; zero
    /// for densely recorded paths, reported as the induced bias scale
    /// otherwise.
    pub checkpoint_gap_bias: f64,
    pub n: u64,
}

/// Logarithmic average of `f((T_k, C_k) / scale(k))` along one path.
///
/// The harmonic weights are exact for every `k` up to the last checkpoint;
/// `f` is evaluated at the nearest recorded checkpoint. `f` must be
/// bounded (a.e. continuity is the caller's contract); non-finite values
/// are rejected.
pub fn as_clt_log_average(
    path: &WalkPath,
    f: impl Fn(&[f64]) -> f64,
    variant: AsCltVariant,
) -> Result<AsCltResult> {
    if path.checkpoints.is_empty() || path.t.is_empty() || path.c.is_empty() {
        return Err(ErwError::Parameter("path carries no (T, C) checkpoints".into()));
    }
    let n = *path.checkpoints.last().unwrap();
    let d = path.d;
    let mut arg = vec![0.0f64; 2 * d];
    let mut sum = 0.0f64;
    let mut gap_acc = 0.0f64;
    let mut w_acc = 0.0f64;
    let mut ck = 0usize;
    for k in 1..=n {
        // nearest recorded checkpoint
        while ck + 1 < path.checkpoints.len()
            && path.checkpoints[ck + 1].abs_diff(k) <= path.checkpoints[ck].abs_diff(k)
        {
            ck += 1;
        }
        let w = variant.weight(k);
        if w == 0.0 {
            continue;
        }
        let scale = variant.scale(k);
        let t = path.t_at(ck);
        let c = path.c_at(ck);
        for j in 0..d {
            arg[j] = t[j] / scale;
            arg[d + j] = c[j] / scale;
        }
        let v = f(&arg);
        if !v.is_finite() {
            return Err(ErwError::Parameter("test function returned a non-finite value".into()));
        }
        sum += w * v;
        gap_acc += w * path.checkpoints[ck].abs_diff(k) as f64 / k as f64;
        w_acc += w;
    }
    Ok(AsCltResult {
        average: sum / variant.normalizer(n),
        checkpoint_gap_bias: if w_acc > 0.0 { gap_acc / w_acc } else { 0.0 },
        n,
    })
}

/// Monte Carlo expectation of `f` under a centered Gaussian with the given
/// block covariance; the comparison value for the logarithmic averages.
/// Returns `(mean, standard error)`.
pub fn gaussian_expectation_mc(
    cov: &BlockCovariance,
    f: impl Fn(&[f64]) -> f64,
    n: u64,
    seed: u64,
) -> (f64, f64) {
    // Cholesky of the 2x2 base scaled by 1/d; coordinates are independent.
    let d = cov.d;
    let scale = 1.0 / d as f64;
    let a = (cov.base[0][0] * scale).max(0.0).sqrt();
    let (b, c) = if a > 0.0 {
        let b = cov.base[0][1] * scale / a;
        (b, (cov.base[1][1] * scale - b * b).max(0.0).sqrt())
    } else {
        (0.0, (cov.base[1][1] * scale).max(0.0).sqrt())
    };
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    let mut arg = vec![0.0f64; 2 * d];
    let mut rng = stream_rng(seed, 0, Channel::Gaussian);
    for _ in 0..n {
        for k in 0..d {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            arg[k] = a * z1;
            arg[d + k] = b * z1 + c * z2;
        }
        let v = f(&arg);
        sum += v;
        sumsq += v * v;
    }
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// Normalization for iterated-logarithm tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LilNormalization {
    /// `sqrt(2 n log log n)`.
    Standard,
    /// `sqrt(2 n (log n)(log log log n))`, the critical-regime rate.
    Critical,
}

impl LilNormalization {
    pub fn value(&self, n: u64) -> f64 {
        let nf = n as f64;
        match self {
            LilNormalization::Standard => (2.0 * nf * nf.ln().ln()).sqrt(),
            LilNormalization::Critical => (2.0 * nf * nf.ln() * nf.ln().ln().ln()).sqrt(),
        }
    }

    /// Smallest time at which the normalization is real and positive.
    pub fn min_time(&self) -> u64 {
        16
    }
}

/// Diagnostic summary of `max_n ||value_n|| / normalization(n)` over a
/// batch. A limsup cannot be certified at a finite horizon; the flags mark
/// batches far outside the calibrated band around the constant.
///
/// The banded statistic is the batch median of the per-path maxima: the
/// raw batch maximum grows like `sqrt(2 log(#paths))` by extreme-value
/// scaling and is reported without a band.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LilTrack {
    pub per_path_max: Vec<f64>,
    pub batch_max: f64,
    pub batch_median: f64,
    pub constant: f64,
    /// `batch_median / constant`.
    pub ratio: f64,
    /// Ratio above 1.5.
    pub flag_high: bool,
    /// Ratio below 0.3.
    pub flag_low: bool,
}

/// Track the normalized running maximum over the checkpoints past
/// `n = 100` of every path. `select` extracts the tracked vector given
/// `(path index, path, checkpoint index)`.
pub fn lil_track(
    paths: &[WalkPath],
    select: impl Fn(usize, &WalkPath, usize) -> Vec<f64>,
    normalization: LilNormalization,
    constant: f64,
) -> Result<LilTrack> {
    let usable = paths
        .first()
        .map(|p| p.checkpoints.iter().filter(|&&n| n > 100).count())
        .unwrap_or(0);
    if usable < 10 {
        return Err(ErwError::Parameter(
            "need at least 10 checkpoints past n = 100 for the diagnostic".into(),
        ));
    }
    let mut per_path = Vec::with_capacity(paths.len());
    for (i, p) in paths.iter().enumerate() {
        let mut best = 0.0f64;
        for (k, &n) in p.checkpoints.iter().enumerate() {
            if n <= 100 || n < normalization.min_time() {
                continue;
            }
            let v = select(i, p, k);
            let norm2: f64 = v.iter().map(|x| x * x).sum();
            best = best.max(norm2.sqrt() / normalization.value(n));
        }
        per_path.push(best);
    }
    let batch_max = per_path.iter().cloned().fold(0.0, f64::max);
    let mut sorted = per_path.clone();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let batch_median = sorted[sorted.len() / 2];
    let ratio = batch_median / constant;
    Ok(LilTrack {
        per_path_max: per_path,
        batch_max,
        batch_median,
        constant,
        ratio,
        flag_high: ratio > 1.5,
        flag_low: ratio < 0.3,
    })
}

/// Process whose small-ball probability is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmallBallProcess {
    BrownianMotion,
    /// `sigma1 G(rho1) + sigma2 G(rho2)` with independent diffusive factors.
    Mixture { rho1: f64, rho2: f64, sigma1: f64, sigma2: f64 },
}

/// Functional of the path over the grid on (0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupFunctional {
    /// `sup_t ||X(t)||`.
    SupNorm,
    /// `sup_t t^{-alpha} || int_0^t X ||` (trapezoid); `alpha = 0` is the
    /// plain integrated path.
    SupWeightedIntegral { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallBallSpec {
    pub process: SmallBallProcess,
    pub functional: SupFunctional,
    pub d: usize,
    /// Grid points on (0, 1]; suprema over a grid understate the true
    /// supremum, so keep this at 2^12 or finer for constant-fitting work.
    pub grid: usize,
}

/// One epsilon of a small-ball experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallBallPoint {
    pub epsilon: f64,
    pub trials: u64,
    pub hits: u64,
    /// `log(hits/trials)`; `None` when no trial stayed inside.
    pub log_p: Option<f64>,
    /// Binomial standard error of `log_p`; finite only when `hits >= 1`.
    pub se_log_p: Option<f64>,
    /// 97.5% upper confidence bound for `log_p`, the reported value when
    /// there were no hits.
    pub log_p_upper_bound: f64,
}

struct GridCoeffs {
    /// Transition pairs per factor and grid point.
    a1: Vec<f64>,
    s1: Vec<f64>,
    a2: Vec<f64>,
    s2: Vec<f64>,
    times: Vec<f64>,
    /// `t^{-alpha}` per grid point for the weighted functional.
    weights: Vec<f64>,
}

fn build_coeffs(spec: &SmallBallSpec) -> GridCoeffs {
    let m = spec.grid;
    let times: Vec<f64> = (1..=m).map(|i| i as f64 / m as f64).collect();
    let (rho1, rho2) = match spec.process {
        SmallBallProcess::BrownianMotion => (0.0, 0.0),
        SmallBallProcess::Mixture { rho1, rho2, .. } => (rho1, rho2),
    };
    let mut a1 = Vec::with_capacity(m);
    let mut s1 = Vec::with_capacity(m);
    let mut a2 = Vec::with_capacity(m);
    let mut s2 = Vec::with_capacity(m);
    let mut t_prev = 0.0;
    for &t in &times {
        let (a, s) = diffusive_transition(rho1, t_prev, t);
        a1.push(a);
        s1.push(s);
        let (a, s) = diffusive_transition(rho2, t_prev, t);
        a2.push(a);
        s2.push(s);
        t_prev = t;
    }
    let weights = match spec.functional {
        SupFunctional::SupWeightedIntegral { alpha } if alpha != 0.0 => {
            times.iter().map(|t| t.powf(-alpha)).collect()
        }
        _ => vec![1.0; m],
    };
    GridCoeffs { a1, s1, a2, s2, times, weights }
}

/// One path; returns true when the functional stays below `epsilon` on the
/// whole grid (exits at the first crossing: the running supremum can only
/// grow).
#[allow(clippy::too_many_arguments)]
fn trial_stays_inside(
    spec: &SmallBallSpec,
    co: &GridCoeffs,
    epsilon: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
    g1: &mut [f64],
    g2: &mut [f64],
    acc: &mut [f64],
    v_prev: &mut [f64],
) -> bool {
    let d = spec.d;
    let eps2 = epsilon * epsilon;
    let (two_factor, sig1, sig2) = match spec.process {
        SmallBallProcess::BrownianMotion => (false, 1.0, 0.0),
        SmallBallProcess::Mixture { sigma1, sigma2, .. } => (true, sigma1, sigma2),
    };
    let integral = matches!(spec.functional, SupFunctional::SupWeightedIntegral { .. });
    if d == 1 {
        // scalar fast path: these loops dominate the constant-fitting work
        return match (two_factor, integral) {
            (false, false) => trial_1d_single_sup(co, eps2, rng),
            (true, false) => trial_1d_mixture_sup(co, eps2, sig1, sig2, rng),
            (false, true) => trial_1d_single_integral(co, eps2, rng),
            (true, true) => trial_1d_mixture_integral(co, eps2, sig1, sig2, rng),
        };
    }
    g1.fill(0.0);
    g2.fill(0.0);
    acc.fill(0.0);
    v_prev.fill(0.0);
    let m = co.times.len();
    let mut t_prev = 0.0f64;
    for i in 0..m {
        let mut norm2 = 0.0f64;
        if integral {
            let dt = co.times[i] - t_prev;
            for k in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                g1[k] = co.a1[i] * g1[k] + co.s1[i] * z;
                let mut v = sig1 * g1[k];
                if two_factor {
                    let z: f64 = rng.sample(StandardNormal);
                    g2[k] = co.a2[i] * g2[k] + co.s2[i] * z;
                    v += sig2 * g2[k];
                }
                acc[k] += 0.5 * (v_prev[k] + v) * dt;
                v_prev[k] = v;
                let w = acc[k] * co.weights[i];
                norm2 += w * w;
            }
            t_prev = co.times[i];
        } else {
            for k in 0..d {
                let z: f64 = rng.sample(StandardNormal);
                g1[k] = co.a1[i] * g1[k] + co.s1[i] * z;
                let mut v = sig1 * g1[k];
                if two_factor {
                    let z: f64 = rng.sample(StandardNormal);
                    g2[k] = co.a2[i] * g2[k] + co.s2[i] * z;
                    v += sig2 * g2[k];
                }
                norm2 += v * v;
            }
        }
        if norm2 >= eps2 {
            return false;
        }
    }
    true
}

fn trial_1d_single_sup(co: &GridCoeffs, eps2: f64, rng: &mut rand_chacha::ChaCha8Rng) -> bool {
    let mut g = 0.0f64;
    for i in 0..co.times.len() {
        let z: f64 = rng.sample(StandardNormal);
        g = co.a1[i] * g + co.s1[i] * z;
        if g * g >= eps2 {
            return false;
        }
    }
    true
}

fn trial_1d_mixture_sup(
    co: &GridCoeffs,
    eps2: f64,
    sig1: f64,
    sig2: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> bool {
    let (mut g1, mut g2) = (0.0f64, 0.0f64);
    for i in 0..co.times.len() {
        let z1: f64 = rng.sample(StandardNormal);
        g1 = co.a1[i] * g1 + co.s1[i] * z1;
        let z2: f64 = rng.sample(StandardNormal);
        g2 = co.a2[i] * g2 + co.s2[i] * z2;
        let v = sig1 * g1 + sig2 * g2;
        if v * v >= eps2 {
            return false;
        }
    }
    true
}

fn trial_1d_single_integral(co: &GridCoeffs, eps2: f64, rng: &mut rand_chacha::ChaCha8Rng) -> bool {
    let (mut g, mut acc, mut v_prev, mut t_prev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..co.times.len() {
        let z: f64 = rng.sample(StandardNormal);
        g = co.a1[i] * g + co.s1[i] * z;
        acc += 0.5 * (v_prev + g) * (co.times[i] - t_prev);
        v_prev = g;
        t_prev = co.times[i];
        let w = acc * co.weights[i];
        if w * w >= eps2 {
            return false;
        }
    }
    true
}

fn trial_1d_mixture_integral(
    co: &GridCoeffs,
    eps2: f64,
    sig1: f64,
    sig2: f64,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> bool {
    let (mut g1, mut g2, mut acc, mut v_prev, mut t_prev) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..co.times.len() {
        let z1: f64 = rng.sample(StandardNormal);
        g1 = co.a1[i] * g1 + co.s1[i] * z1;
        let z2: f64 = rng.sample(StandardNormal);
        g2 = co.a2[i] * g2 + co.s2[i] * z2;
        let v = sig1 * g1 + sig2 * g2;
        acc += 0.5 * (v_prev + v) * (co.times[i] - t_prev);
        v_prev = v;
        t_prev = co.times[i];
        let w = acc * co.weights[i];
        if w * w >= eps2 {
            return false;
        }
    }
    true
}

fn point_from_hits(epsilon: f64, trials: u64, hits: u64) -> SmallBallPoint {
    let p = hits as f64 / trials as f64;
    let (log_p, se) = if hits > 0 {
        (Some(p.ln()), Some(((1.0 - p) / (trials as f64 * p)).sqrt()))
    } else {
        (None, None)
    };
    // binomial upper bound when nothing landed inside
    let ub = if hits > 0 {
        p.ln() + 2.0 * se.unwrap()
    } else {
        ((0.025f64).ln().abs() / trials as f64).ln()
    };
    SmallBallPoint { epsilon, trials, hits, log_p, se_log_p: se, log_p_upper_bound: ub }
}

/// Estimate `log P(sup functional < epsilon)` by Monte Carlo over `trials`
/// independent paths on the grid.
pub fn small_ball_log_prob(
    spec: &SmallBallSpec,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> SmallBallPoint {
    let co = build_coeffs(spec);
    let d = spec.d;
    let hits = batch::reduce_chunks(
        trials,
        4096,
        |range| {
            let mut g1 = vec![0.0f64; d];
            let mut g2 = vec![0.0f64; d];
            let mut acc = vec![0.0f64; d];
            let mut v_prev = vec![0.0f64; d];
            let mut hits = 0u64;
            for trial in range {
                let mut rng = stream_rng(seed, trial, Channel::Gaussian);
                if trial_stays_inside(
                    spec, &co, epsilon, &mut rng, &mut g1, &mut g2, &mut acc, &mut v_prev,
                ) {
                    hits += 1;
                }
            }
            hits
        },
        |a, b| a + b,
    )
    .unwrap_or(0);
    point_from_hits(epsilon, trials, hits)
}

/// Same estimate on the full grid and on its every-second-point subgrid,
/// coupled through identical paths. The fine supremum dominates the coarse
/// one pathwise, so the fine hit count can never exceed the coarse count.
pub fn small_ball_log_prob_nested(
    spec: &SmallBallSpec,
    epsilon: f64,
    trials: u64,
    seed: u64,
) -> (SmallBallPoint, SmallBallPoint) {
    let co = build_coeffs(spec);
    let d = spec.d;
    let eps2 = epsilon * epsilon;
    let (two_factor, sig1, sig2) = match spec.process {
        SmallBallProcess::BrownianMotion => (false, 1.0, 0.0),
        SmallBallProcess::Mixture { sigma1, sigma2, .. } => (true, sigma1, sigma2),
    };
    let integral = matches!(spec.functional, SupFunctional::SupWeightedIntegral { .. });
    let m = co.times.len();
    let (hits_fine, hits_coarse) = batch::reduce_chunks(
        trials,
        2048,
        |range| {
            let mut fine = 0u64;
            let mut coarse = 0u64;
            let mut g1 = vec![0.0f64; d];
            let mut g2 = vec![0.0f64; d];
            let mut acc = vec![0.0f64; d];
            let mut acc_c = vec![0.0f64; d];
            let mut v_prev = vec![0.0f64; d];
            let mut v_prev_c = vec![0.0f64; d];
            for trial in range {
                let mut rng = stream_rng(seed, trial, Channel::Gaussian);
                g1.fill(0.0);
                g2.fill(0.0);
                acc.fill(0.0);
                acc_c.fill(0.0);
                v_prev.fill(0.0);
                v_prev_c.fill(0.0);
                let mut ok_fine = true;
                let mut ok_coarse = true;
                let mut t_prev = 0.0f64;
                let mut t_prev_c = 0.0f64;
                for i in 0..m {
                    let on_coarse = (i + 1) % 2 == 0;
                    let mut norm2 = 0.0f64;
                    let mut norm2_c = 0.0f64;
                    let dt = co.times[i] - t_prev;
                    for k in 0..d {
                        let z: f64 = rng.sample(StandardNormal);
                        g1[k] = co.a1[i] * g1[k] + co.s1[i] * z;
                        let mut v = sig1 * g1[k];
                        if two_factor {
                            let z: f64 = rng.sample(StandardNormal);
                            g2[k] = co.a2[i] * g2[k] + co.s2[i] * z;
                            v += sig2 * g2[k];
                        }
                        if integral {
                            acc[k] += 0.5 * (v_prev[k] + v) * dt;
                            v_prev[k] = v;
                            let w = acc[k] * co.weights[i];
                            norm2 += w * w;
                            if on_coarse {
                                acc_c[k] += 0.5 * (v_prev_c[k] + v) * (co.times[i] - t_prev_c);
                                v_prev_c[k] = v;
                                let w = acc_c[k] * co.weights[i];
                                norm2_c += w * w;
                            }
                        } else {
                            norm2 += v * v;
                            if on_coarse {
                                norm2_c += v * v;
                            }
                        }
                    }
                    t_prev = co.times[i];
                    if on_coarse {
                        t_prev_c = co.times[i];
                    }
                    if norm2 >= eps2 {
                        ok_fine = false;
                    }
                    if on_coarse && norm2_c >= eps2 {
                        ok_coarse = false;
                    }
                    if !ok_fine && !ok_coarse {
                        break;
                    }
                }
                fine += ok_fine as u64;
                coarse += ok_coarse as u64;
            }
            (fine, coarse)
        },
        |a, b| (a.0 + b.0, a.1 + b.1),
    )
    .unwrap_or((0, 0));
    (point_from_hits(epsilon, trials, hits_fine), point_from_hits(epsilon, trials, hits_coarse))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmallBallFit {
    pub constant: f64,
    pub intercept: f64,
    /// Weighted mean squared residual of the fit.
    pub residual: f64,
    pub exponent: f64,
}

/// Weighted least squares of `log P = -c * eps^{-exponent} + b` over the
/// usable points (at least three, spanning a factor of two in epsilon).
/// Without `with_intercept` the line is forced through the origin.
pub fn fit_small_ball_constant(
    points: &[SmallBallPoint],
    exponent: f64,
    with_intercept: bool,
) -> Result<SmallBallFit> {
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .filter_map(|p| {
            p.log_p.map(|lp| {
                let w = match p.se_log_p {
                    Some(se) if se > 0.0 => 1.0 / (se * se),
                    _ => 1.0,
                };
                (p.epsilon.powf(-exponent), lp, w)
            })
        })
        .collect();
    if usable.len() < 3 {
        return Err(ErwError::Parameter("need at least three epsilons with hits".into()));
    }
    let (eps_min, eps_max) = points
        .iter()
        .filter(|p| p.log_p.is_some())
        .fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.epsilon), hi.max(p.epsilon)));
    if eps_max < 2.0 * eps_min {
        return Err(ErwError::Parameter("epsilons must span at least a factor of two".into()));
    }
    let sw: f64 = usable.iter().map(|u| u.2).sum();
    let sx: f64 = usable.iter().map(|u| u.2 * u.0).sum();
    let sy: f64 = usable.iter().map(|u| u.2 * u.1).sum();
    let sxx: f64 = usable.iter().map(|u| u.2 * u.0 * u.0).sum();
    let sxy: f64 = usable.iter().map(|u| u.2 * u.0 * u.1).sum();
    let (slope, intercept) = if with_intercept {
        let det = sw * sxx - sx * sx;
        if det.abs() < 1e-12 * sw * sxx {
            return Err(ErwError::Parameter("degenerate design".into()));
        }
        let slope = (sw * sxy - sx * sy) / det;
        let b = (sy - slope * sx) / sw;
        (slope, b)
    } else {
        if sxx == 0.0 {
            return Err(ErwError::Parameter("degenerate design".into()));
        }
        (sxy / sxx, 0.0)
    };
    let residual = usable
        .iter()
        .map(|&(x, y, w)| {
            let r = y - (slope * x + intercept);
            w * r * r
        })
        .sum::<f64>()
        / sw;
    Ok(SmallBallFit { constant: -slope, intercept, residual, exponent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_quantile;
    use approx::assert_relative_eq;

    #[test]
    fn accumulator_hand_examples() {
        let mut acc = MomentAccumulator::new(1);
        acc.accumulate(&[0.0]);
        acc.accumulate(&[2.0]);
        let (mean, cov) = acc.finalize().unwrap();
        assert_relative_eq!(mean[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(cov[0], 2.0, epsilon = 1e-15);

        let mut a = MomentAccumulator::new(1);
        a.accumulate(&[0.0]);
        let mut b = MomentAccumulator::new(1);
        b.accumulate(&[2.0]);
        let merged = MomentAccumulator::merge(a, &b);
        assert_eq!(merged.count(), 2);
        let (mean, cov) = merged.finalize().unwrap();
        assert_relative_eq!(mean[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(cov[0], 2.0, epsilon = 1e-15);

        let mut single = MomentAccumulator::new(1);
        single.accumulate(&[1.0]);
        assert!(single.finalize().is_err());
    }

    #[test]
    fn accumulator_merge_matches_concatenation() {
        let mut rng = stream_rng(5, 0, Channel::Aux);
        let xs: Vec<[f64; 2]> = (0..3000)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                [a * 3.0 + 1.0, b - a]
            })
            .collect();
        let mut whole = MomentAccumulator::new(2);
        for x in &xs {
            whole.accumulate(x);
        }
        // three uneven splits, merged in order and out of order
        let cuts = [0usize, 17, 1203, 3000];
        let mut parts: Vec<MomentAccumulator> = Vec::new();
        for w in cuts.windows(2) {
            let mut acc = MomentAccumulator::new(2);
            for x in &xs[w[0]..w[1]] {
                acc.accumulate(x);
            }
            parts.push(acc);
        }
        let m1 = MomentAccumulator::merge(
            MomentAccumulator::merge(parts[0].clone(), &parts[1]),
            &parts[2],
        );
        let m2 = MomentAccumulator::merge(
            MomentAccumulator::merge(parts[2].clone(), &parts[0]),
            &parts[1],
        );
        let (mw, cw) = whole.finalize().unwrap();
        for m in [m1, m2] {
            let (mm, cm) = m.finalize().unwrap();
            for j in 0..2 {
                assert_relative_eq!(mm[j], mw[j], epsilon = 1e-10);
            }
            for j in 0..4 {
                assert_relative_eq!(cm[j], cw[j], max_relative = 1e-10, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn accumulator_long_run_variance() {
        let mut acc = MomentAccumulator::new(1);
        let mut rng = stream_rng(6, 0, Channel::Aux);
        let n = 1_000_000u64;
        for _ in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            acc.accumulate(&[z]);
        }
        // 4 SE of a variance estimate at one million samples
        assert_relative_eq!(acc.var(0), 1.0, epsilon = 4.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn ks_frozen_three_point_sample() {
        let r = ks_normal(&[-1.0, 0.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(r.statistic, 0.174_678_079_401_876_26, epsilon = 1e-12);
        assert!(ks_normal(&[], 1.0).is_err());
        assert!(ks_normal(&[1.0], 0.0).is_err());
    }

    #[test]
    fn ks_stratified_quantiles_hit_the_floor() {
        let n = 40;
        let xs: Vec<f64> =
            (1..=n).map(|i| normal_quantile((i as f64 - 0.5) / n as f64).unwrap()).collect();
        let r = ks_normal(&xs, 1.0).unwrap();
        assert_relative_eq!(r.statistic, 1.0 / (2.0 * n as f64), epsilon = 1e-9);
    }

    #[test]
    fn ks_affine_invariance() {
        let xs = [0.3, -1.2, 2.4, 0.0, -0.7, 1.1];
        let base = ks_normal(&xs, 2.0).unwrap();
        for a in [0.5, 3.0, 10.0] {
            let scaled: Vec<f64> = xs.iter().map(|v| v * a).collect();
            let r = ks_normal(&scaled, 2.0 * a * a).unwrap();
            assert_relative_eq!(r.statistic, base.statistic, epsilon = 1e-12);
            assert_relative_eq!(r.p_value, base.p_value, epsilon = 1e-12);
        }
    }

    #[test]
    fn xi_estimates_on_the_copy_walk() {
        // p = 1: S_n = n sigma_1, so the estimate is +-1 under either
        // normalization
        use crate::model::WalkConfig;
        use crate::walkers::simulate_walk_replicate;
        let cfg = WalkConfig::simple(1, 1.0, 200, 3, 40);
        let paths: Vec<WalkPath> =
            (0..40).map(|r| simulate_walk_replicate(&cfg, r).unwrap()).collect();
        let pow =
            estimate_xi(&paths, &cfg.schedule, 1, XiSeries::StepSum, XiNormalization::PowerLaw)
                .unwrap();
        let gam =
            estimate_xi(&paths, &cfg.schedule, 1, XiSeries::StepSum, XiNormalization::GammaProduct)
                .unwrap();
        for (&a, &b) in pow.samples.iter().zip(gam.samples.iter()) {
            assert_relative_eq!(a.abs(), 1.0, epsilon = 1e-10);
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
        for v in &pow.second_moment {
            assert_relative_eq!(*v, 1.0, epsilon = 1e-10);
        }
        // rejected outside the superdiffusive regime
        let diff = MemorySchedule::constant(0.6);
        assert!(
            estimate_xi(&paths, &diff, 1, XiSeries::StepSum, XiNormalization::PowerLaw).is_err()
        );
    }

    #[test]
    fn growth_product_limit_constant_is_the_normalization_ratio() {
        // gamma_{2,n-1} / n^rho approaches C0 = 1/Gamma(2+rho)
        let sched = MemorySchedule::constant(0.9); // rho = 0.8
        let rho = 0.8;
        let c0 = gamma_product_limit_constant(rho);
        for n in [1_000u64, 10_000] {
            let g = gamma_product(2, n - 1, &sched, 1).unwrap();
            assert_relative_eq!(g / (n as f64).powf(rho), c0, max_relative = 1e-3);
        }
    }

    #[test]
    fn log_average_of_the_constant_function() {
        // f == 1, n = 2: (1/log 2)(1 + 1/2)
        let path = WalkPath {
            d: 1,
            checkpoints: vec![1, 2],
            s: vec![1, 2],
            t: vec![1.0, 2.0],
            c: vec![1.0, 1.5],
            w: None,
            na: None,
        };
        let r = as_clt_log_average(&path, |_| 1.0, AsCltVariant::Diffusive).unwrap();
        assert_relative_eq!(r.average, 1.5 / 2.0f64.ln(), epsilon = 1e-12);
        assert_eq!(r.checkpoint_gap_bias, 0.0);
    }

    #[test]
    fn log_average_critical_weights() {
        // f == 1: the average equals the directly computed weighted sum
        let n = 100u64;
        let mut t = Vec::new();
        let mut c = Vec::new();
        let mut s = Vec::new();
        for k in 1..=n {
            s.push(k as i64);
            t.push(k as f64);
            c.push(k as f64 / 2.0);
        }
        let path =
            WalkPath { d: 1, checkpoints: (1..=n).collect(), s, t, c, w: None, na: None };
        let r = as_clt_log_average(&path, |_| 1.0, AsCltVariant::Critical).unwrap();
        let mut direct = 0.0;
        for k in 2..=n {
            direct += 1.0 / (k as f64 * (k as f64).ln());
        }
        direct /= (n as f64).ln().ln();
        assert_relative_eq!(r.average, direct, epsilon = 1e-12);
    }

    #[test]
    fn log_average_sparse_checkpoints_report_bias() {
        let dense = WalkPath {
            d: 1,
            checkpoints: (1..=64).collect(),
            s: (1..=64).map(|k| k as i64).collect(),
            t: (1..=64).map(|k| k as f64).collect(),
            c: (1..=64).map(|k| k as f64).collect(),
            w: None,
            na: None,
        };
        let sparse = WalkPath {
            d: 1,
            checkpoints: vec![1, 8, 64],
            s: vec![1, 8, 64],
            t: vec![1.0, 8.0, 64.0],
            c: vec![1.0, 8.0, 64.0],
            w: None,
            na: None,
        };
        let f = |x: &[f64]| x[0].clamp(-2.0, 2.0);
        let rd = as_clt_log_average(&dense, f, AsCltVariant::Diffusive).unwrap();
        let rs = as_clt_log_average(&sparse, f, AsCltVariant::Diffusive).unwrap();
        assert_eq!(rd.checkpoint_gap_bias, 0.0);
        assert!(rs.checkpoint_gap_bias > 0.1, "gap bias {}", rs.checkpoint_gap_bias);
        // rejects non-finite test functions
        assert!(as_clt_log_average(&dense, |_| f64::NAN, AsCltVariant::Diffusive).is_err());
    }

    #[test]
    fn gaussian_expectation_matches_characteristic_function() {
        let cov = crate::theory::cov_tc(0.2, 1.0, 0.0, 1).unwrap();
        let u = [0.5, 0.25];
        let quad = cov.quad_form(&u);
        let f = move |x: &[f64]| (u[0] * x[0] + u[1] * x[1]).cos();
        let (mean, se) = gaussian_expectation_mc(&cov, f, 400_000, 9);
        assert!((mean - (-quad / 2.0).exp()).abs() < 4.0 * se);
    }

    #[test]
    fn lil_track_bands_on_the_simple_walk() {
        use crate::model::WalkConfig;
        use crate::walkers::simulate_walk_replicate;
        let horizon = 10_000u64;
        let cfg = WalkConfig::simple(1, 0.5, horizon, 11, 50)
            .with_checkpoints(WalkConfig::geometric_checkpoints(horizon, 40));
        let paths: Vec<WalkPath> =
            (0..50).map(|r| simulate_walk_replicate(&cfg, r).unwrap()).collect();
        let track =
            lil_track(&paths, |_, p, k| p.t_at(k).to_vec(), LilNormalization::Standard, 1.0)
                .unwrap();
        assert_eq!(track.per_path_max.len(), 50);
        // short horizon, so the band is wide; the tight band lives in the
        // full-scale diagnostic
        assert!(track.ratio > 0.4 && track.ratio < 1.4, "ratio {}", track.ratio);
        assert_eq!(track.flag_high, track.ratio > 1.5);
        assert!(!track.flag_low);

        // too few checkpoints for the diagnostic
        let short = WalkConfig::simple(1, 0.5, 200, 1, 1).with_checkpoints(vec![150, 200]);
        let p = simulate_walk_replicate(&short, 0).unwrap();
        assert!(lil_track(&[p], |_, p, k| p.t_at(k).to_vec(), LilNormalization::Standard, 1.0)
            .is_err());
    }

    #[test]
    fn small_ball_brownian_level_one() {
        // P(sup |B| < 1) = 0.370777... from the reflection series
        let spec = SmallBallSpec {
            process: SmallBallProcess::BrownianMotion,
            functional: SupFunctional::SupNorm,
            d: 1,
            grid: 1 << 12,
        };
        let point = small_ball_log_prob(&spec, 1.0, 100_000, 21);
        let p = (point.hits as f64) / (point.trials as f64);
        let se = (p * (1.0 - p) / point.trials as f64).sqrt();
        // the grid supremum understates the true one, so allow a small
        // positive bias on top of two standard errors
        assert!((p - 0.370_777).abs() < 2.0 * se + 0.01, "p = {p}, series value 0.370777");
    }

    #[test]
    fn small_ball_mixture_reduction_to_brownian() {
        // rho1 = rho2 = 0 with sigma1^2 + sigma2^2 = 1 is Brownian motion
        let s = 0.5f64.sqrt();
        let bm = SmallBallSpec {
            process: SmallBallProcess::BrownianMotion,
            functional: SupFunctional::SupNorm,
            d: 1,
            grid: 1 << 12,
        };
        let mix = SmallBallSpec {
            process: SmallBallProcess::Mixture { rho1: 0.0, rho2: 0.0, sigma1: s, sigma2: s },
            ..bm
        };
        let a = small_ball_log_prob(&bm, 0.8, 60_000, 31);
        let b = small_ball_log_prob(&mix, 0.8, 60_000, 32);
        let pa = a.hits as f64 / a.trials as f64;
        let pb = b.hits as f64 / b.trials as f64;
        let se = (pa * (1.0 - pa) / a.trials as f64 + pb * (1.0 - pb) / b.trials as f64).sqrt();
        assert!((pa - pb).abs() < 3.0 * se, "pa={pa} pb={pb}");
    }

    #[test]
    fn small_ball_zero_hits_yields_upper_bound() {
        let spec = SmallBallSpec {
            process: SmallBallProcess::BrownianMotion,
            functional: SupFunctional::SupNorm,
            d: 1,
            grid: 256,
        };
        let point = small_ball_log_prob(&spec, 1e-4, 200, 41);
        assert_eq!(point.hits, 0);
        assert!(point.log_p.is_none());
        assert!(point.se_log_p.is_none());
        assert!(point.log_p_upper_bound.is_finite() && point.log_p_upper_bound < 0.0);
    }

    #[test]
    fn small_ball_epsilon_large_gives_log_zero() {
        let spec = SmallBallSpec {
            process: SmallBallProcess::BrownianMotion,
            functional: SupFunctional::SupNorm,
            d: 1,
            grid: 512,
        };
        let point = small_ball_log_prob(&spec, 100.0, 2_000, 51);
        assert_eq!(point.hits, point.trials);
        assert_eq!(point.log_p, Some(0.0));
    }

    #[test]
    fn small_ball_grid_refinement_is_monotone() {
        for (spec, eps) in [
            (
                SmallBallSpec {
                    process: SmallBallProcess::BrownianMotion,
                    functional: SupFunctional::SupNorm,
                    d: 1,
                    grid: 1 << 10,
                },
                0.7,
            ),
            (
                SmallBallSpec {
                    process: SmallBallProcess::BrownianMotion,
                    functional: SupFunctional::SupWeightedIntegral { alpha: 0.0 },
                    d: 1,
                    grid: 1 << 10,
                },
                0.12,
            ),
        ] {
            let (fine, coarse) = small_ball_log_prob_nested(&spec, eps, 20_000, 61);
            assert!(
                fine.hits <= coarse.hits,
                "finer grids can only lower the measured supremum-based probability"
            );
            assert!(coarse.hits > 0, "calibration: want a measurable probability");
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // merging any split of a sample equals accumulating the whole
            #[test]
            fn merge_equals_concatenation(
                xs in proptest::collection::vec(-1e3f64..1e3, 4..200),
                cut in 1usize..100,
            ) {
                let cut = cut.min(xs.len() - 1);
                let mut whole = MomentAccumulator::new(1);
                let mut left = MomentAccumulator::new(1);
                let mut right = MomentAccumulator::new(1);
                for (i, &x) in xs.iter().enumerate() {
                    whole.accumulate(&[x]);
                    if i < cut {
                        left.accumulate(&[x]);
                    } else {
                        right.accumulate(&[x]);
                    }
                }
                let merged = MomentAccumulator::merge(left, &right);
                let (mw, cw) = whole.finalize().unwrap();
                let (mm, cm) = merged.finalize().unwrap();
                prop_assert!((mw[0] - mm[0]).abs() <= 1e-10 * mw[0].abs().max(1.0));
                prop_assert!((cw[0] - cm[0]).abs() <= 1e-10 * cw[0].abs().max(1.0));
            }

            // the KS distance is invariant under a joint affine rescaling
            #[test]
            fn ks_scale_invariance(
                xs in proptest::collection::vec(-5.0f64..5.0, 3..50),
                scale in 0.1f64..10.0,
            ) {
                let base = ks_normal(&xs, 1.5).unwrap();
                let scaled: Vec<f64> = xs.iter().map(|v| v * scale).collect();
                let r = ks_normal(&scaled, 1.5 * scale * scale).unwrap();
                prop_assert!((r.statistic - base.statistic).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_recovers_a_planted_constant() {
        let c = 1.7;
        let points: Vec<SmallBallPoint> = [0.2, 0.3, 0.5, 0.8]
            .iter()
            .map(|&eps: &f64| SmallBallPoint {
                epsilon: eps,
                trials: 0,
                hits: 1,
                log_p: Some(-c * eps.powf(-2.0)),
                se_log_p: None,
                log_p_upper_bound: 0.0,
            })
            .collect();
        let fit = fit_small_ball_constant(&points, 2.0, false).unwrap();
        assert_relative_eq!(fit.constant, c, epsilon = 1e-12);
        assert!(fit.residual < 1e-24);
        let fit = fit_small_ball_constant(&points, 2.0, true).unwrap();
        assert_relative_eq!(fit.constant, c, epsilon = 1e-9);
        assert!(fit.intercept.abs() < 1e-9);

        // doubling the log-probabilities doubles the constant
        let doubled: Vec<SmallBallPoint> = points
            .iter()
            .map(|p| SmallBallPoint { log_p: p.log_p.map(|v| 2.0 * v), ..p.clone() })
            .collect();
        let fit2 = fit_small_ball_constant(&doubled, 2.0, false).unwrap();
        assert_relative_eq!(fit2.constant, 2.0 * c, epsilon = 1e-12);

        // narrow epsilon ranges are rejected
        let narrow: Vec<SmallBallPoint> = [0.4, 0.45, 0.5]
            .iter()
            .map(|&eps: &f64| SmallBallPoint {
                epsilon: eps,
                trials: 0,
                hits: 1,
                log_p: Some(-eps.powf(-2.0)),
                se_log_p: None,
                log_p_upper_bound: 0.0,
            })
            .collect();
        assert!(fit_small_ball_constant(&narrow, 2.0, false).is_err());
    }
}
