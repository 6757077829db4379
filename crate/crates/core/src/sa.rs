//! The recursive stochastic-approximation view:
//! `theta_{n+1} = theta_n - gamma_{n+1} h(theta_n)
//!              + gamma_{n+1} (dM_{n+1} + r_{n+1})`.
//!
//! The walk and the urn are instances of this recursion with
//! `gamma_n = 1/n` and regression `h(x) = (1 - rho) x` (the walk adds a
//! second block for the step-sum coordinate). Adapters advance an exact
//! replica of the underlying process with the same draw sequence as the
//! direct simulators, so trajectories agree with them bitwise, and they
//! report the recursion pieces `(h, dM, r)` so the identity above can be
//! verified at every step.

use crate::model::{MemorySchedule, StepSizeModel, WalkConfig};
use crate::theory::rpw_mean_series;
use crate::walkers::{RpwConfig, UrnState, WalkState};
use crate::{ErwError, Result};
use serde::{Deserialize, Serialize};

/// A `2 x 2` block acting on row vectors, expanded over `d` coordinates as
/// `base (x) I_d`. Used for the constant regression gradient `Dh`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KronBlock {
    pub base: [[f64; 2]; 2],
    pub d: usize,
}

impl KronBlock {
    /// Dense row-major `2d x 2d` matrix.
    pub fn full(&self) -> Vec<f64> {
        let m = 2 * self.d;
        let mut out = vec![0.0; m * m];
        for bi in 0..2 {
            for bj in 0..2 {
                for k in 0..self.d {
                    out[(bi * self.d + k) * m + (bj * self.d + k)] = self.base[bi][bj];
                }
            }
        }
        out
    }
}

/// Increments produced by a noise source for the step `n -> n+1`.
pub struct SaIncrement {
    /// Martingale difference `dM_{n+1}`.
    pub noise: Vec<f64>,
    /// Residual `r_{n+1}`.
    pub residual: Vec<f64>,
    /// Exact next state when the source tracks the underlying process;
    /// `None` for black-box sources, in which case the recursion itself
    /// produces the next state.
    pub exact_next: Option<Vec<f64>>,
}

/// Stateful noise source driving one trajectory.
pub trait NoiseSource: Send {
    fn advance(&mut self, time: u64, theta: &[f64]) -> SaIncrement;
}

/// Black-box source from a closure `(time, theta) -> (noise, residual)`.
pub struct ClosureSource<F>(pub F);

impl<F> NoiseSource for ClosureSource<F>
where
    F: FnMut(u64, &[f64]) -> (Vec<f64>, Vec<f64>) + Send,
{
    fn advance(&mut self, time: u64, theta: &[f64]) -> SaIncrement {
        let (noise, residual) = (self.0)(time, theta);
        SaIncrement { noise, residual, exact_next: None }
    }
}

/// Specification of one recursion instance.
///
/// `initial` is the state at `start_time`; the step from time `t` to
/// `t + 1` consumes `step_size(t + 1)`. Step sizes must be positive and
/// nonincreasing over the run (their divergence is a contract the caller
/// can only check numerically).
pub struct SaSpec {
    pub dim: usize,
    pub initial: Vec<f64>,
    pub start_time: u64,
    pub regression: Box<dyn Fn(&[f64]) -> Vec<f64> + Send>,
    /// Constant gradient of the regression function, when known.
    pub gradient: Option<KronBlock>,
    pub step_size: Box<dyn Fn(u64) -> f64 + Send>,
    pub source: Box<dyn NoiseSource>,
}

/// Per-step record kept when full logging is requested.
#[derive(Debug, Clone)]
pub struct SaStepRecord {
    /// Time of the produced state (`t + 1` for the step from `t`).
    pub time: u64,
    pub gamma: f64,
    pub theta_prev: Vec<f64>,
    pub theta_next: Vec<f64>,
    pub h: Vec<f64>,
    pub noise: Vec<f64>,
    pub residual: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SaTrajectory {
    pub dim: usize,
    /// Recorded times (subset of `start_time..=horizon`).
    pub times: Vec<u64>,
    /// Recorded states, time-major.
    pub theta: Vec<f64>,
    /// Cumulative martingale `sum dM_k` at the recorded times.
    pub martingale: Vec<f64>,
    /// Cumulative residual magnitude `sum ||r_k||` at the recorded times.
    pub residual_abs: Vec<f64>,
    pub steps: Option<Vec<SaStepRecord>>,
}

impl SaTrajectory {
    pub fn theta_at(&self, k: usize) -> &[f64] {
        &self.theta[k * self.dim..(k + 1) * self.dim]
    }

    /// Largest violation of the recursion over the logged steps:
    /// `max_n || theta_{n+1} - theta_n + gamma h - gamma (dM + r) ||_inf`.
    pub fn reconstruction_error(&self) -> Option<f64> {
        let steps = self.steps.as_ref()?;
        let mut worst = 0.0f64;
        for s in steps {
            for j in 0..self.dim {
                let predicted =
                    s.theta_prev[j] + s.gamma * ((s.noise[j] + s.residual[j]) - s.h[j]);
                worst = worst.max((s.theta_next[j] - predicted).abs());
            }
        }
        Some(worst)
    }
}

/// Iterate the recursion from `spec.start_time` to `horizon`, recording at
/// `checkpoints` (ascending). Aborts with a diagnostic if the state stops
/// being finite.
pub fn run_sa(
    mut spec: SaSpec,
    horizon: u64,
    checkpoints: &[u64],
    record_steps: bool,
) -> Result<SaTrajectory> {
    if spec.initial.len() != spec.dim {
        return Err(ErwError::Config("initial state has wrong dimension".into()));
    }
    if spec.start_time == 0 || horizon < spec.start_time {
        return Err(ErwError::Config("need start_time >= 1 and horizon >= start_time".into()));
    }
    let mut theta = spec.initial.clone();
    let mut cum_noise = vec![0.0f64; spec.dim];
    let mut cum_res_abs = 0.0f64;
    let mut out = SaTrajectory {
        dim: spec.dim,
        times: Vec::new(),
        theta: Vec::new(),
        martingale: Vec::new(),
        residual_abs: Vec::new(),
        steps: record_steps.then(Vec::new),
    };
    let mut ck_pos = 0usize;
    macro_rules! record {
        ($time:expr) => {
            while ck_pos < checkpoints.len() && checkpoints[ck_pos] < $time {
                ck_pos += 1;
            }
            if ck_pos < checkpoints.len() && checkpoints[ck_pos] == $time {
                out.times.push($time);
                out.theta.extend_from_slice(&theta);
                out.martingale.extend_from_slice(&cum_noise);
                out.residual_abs.push(cum_res_abs);
                ck_pos += 1;
            }
        };
    }
    record!(spec.start_time);

    let mut prev_gamma = f64::INFINITY;
    for t in spec.start_time..horizon {
        let gamma = (spec.step_size)(t + 1);
        if !(gamma > 0.0) || gamma > prev_gamma {
            return Err(ErwError::Config(format!(
                "step sizes must be positive and nonincreasing (gamma({}) = {gamma})",
                t + 1
            )));
        }
        prev_gamma = gamma;
        let h = (spec.regression)(&theta);
        let inc = spec.source.advance(t, &theta);
        debug_assert_eq!(h.len(), spec.dim);
        debug_assert_eq!(inc.noise.len(), spec.dim);
        debug_assert_eq!(inc.residual.len(), spec.dim);
        let next: Vec<f64> = match &inc.exact_next {
            Some(v) => v.clone(),
            None => (0..spec.dim)
                .map(|j| theta[j] + gamma * ((inc.noise[j] + inc.residual[j]) - h[j]))
                .collect(),
        };
        if !next.iter().all(|v| v.is_finite()) {
            return Err(ErwError::Diverged { step: t + 1, last: theta });
        }
        for j in 0..spec.dim {
            cum_noise[j] += inc.noise[j];
        }
        cum_res_abs += inc.residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        if let Some(log) = out.steps.as_mut() {
            log.push(SaStepRecord {
                time: t + 1,
                gamma,
                theta_prev: theta.clone(),
                theta_next: next.clone(),
                h,
                noise: inc.noise,
                residual: inc.residual,
            });
        }
        theta = next;
        record!(t + 1);
    }
    Ok(out)
}

/// Walk as a recursion instance: state `(S_n/n, T_n/n)` in `R^{2d}`.
pub struct ErwSaSource {
    schedule: MemorySchedule,
    steps: StepSizeModel,
    rho_limit: f64,
    mu_z: f64,
    d: usize,
    state: WalkState,
}

impl ErwSaSource {
    fn theta_of_state(&self) -> Vec<f64> {
        let n = self.state.n() as f64;
        let mut v = Vec::with_capacity(2 * self.d);
        v.extend(self.state.s().iter().map(|&s| s as f64 / n));
        v.extend(self.state.t().iter().map(|&t| t / n));
        v
    }
}

impl NoiseSource for ErwSaSource {
    fn advance(&mut self, time: u64, _theta: &[f64]) -> SaIncrement {
        let n = time;
        debug_assert_eq!(n, self.state.n());
        let nf = n as f64;
        let x: Vec<f64> = self.state.s().iter().map(|&s| s as f64 / nf).collect();
        let rho_next = self.schedule.rho_at(n + 1, self.d);
        let out = self.state.step(self.schedule.p_at(n + 1), &self.steps);

        let mut noise = vec![0.0; 2 * self.d];
        let mut residual = vec![0.0; 2 * self.d];
        for k in 0..self.d {
            let sigma_k = if k == out.coord { out.sign as f64 } else { 0.0 };
            // dM1 = sigma - rho_{n+1} S_n/n
            noise[k] = sigma_k - rho_next * x[k];
            // dM2 + mu dM1 = sigma Z - mu rho_{n+1} S_n/n
            noise[self.d + k] = sigma_k * out.z - self.mu_z * rho_next * x[k];
            // schedule part of the drift not covered by the limiting h
            residual[k] = (rho_next - self.rho_limit) * x[k];
            // the T-block of h uses mu x rather than the exact conditional
            // mean mu rho_{n+1} x; the residual carries the difference
            residual[self.d + k] = -self.mu_z * (1.0 - rho_next) * x[k];
        }
        SaIncrement { noise, residual, exact_next: Some(self.theta_of_state()) }
    }
}

/// Build the recursion instance for a walk configuration.
///
/// The trajectory starts at time 1 with `theta_1 = (S_1, T_1)`; running it
/// with the same seed as the direct simulator reproduces `(S_n/n, T_n/n)`
/// exactly.
pub fn erw_sa_spec_replicate(config: &WalkConfig, replicate: u64) -> Result<SaSpec> {
    config.validate()?;
    let d = config.d;
    let rho = config.schedule.rho_limit(d);
    let mu = config.steps.mean();
    let mut state = WalkState::new(d, config.start, config.seed, replicate);
    state.step(config.schedule.p_at(1), &config.steps);
    let source = ErwSaSource {
        schedule: config.schedule.clone(),
        steps: config.steps.clone(),
        rho_limit: rho,
        mu_z: mu,
        d,
        state,
    };
    let initial = source.theta_of_state();
    Ok(SaSpec {
        dim: 2 * d,
        initial,
        start_time: 1,
        regression: Box::new(move |theta: &[f64]| {
            let mut h = vec![0.0; 2 * d];
            for k in 0..d {
                h[k] = (1.0 - rho) * theta[k];
                h[d + k] = theta[d + k] - mu * theta[k];
            }
            h
        }),
        gradient: Some(KronBlock { base: [[1.0 - rho, -mu], [0.0, 1.0]], d }),
        step_size: Box::new(|t| 1.0 / t as f64),
        source: Box::new(source),
    })
}

pub fn erw_sa_spec(config: &WalkConfig) -> Result<SaSpec> {
    erw_sa_spec_replicate(config, 0)
}

/// Urn as a recursion instance: state `(W_n - E W_n)/n` in `R`.
pub struct RpwSaSource {
    cfg: RpwConfig,
    urn: UrnState,
    /// `E W_k`, `k = 1..=horizon`, from the closed-form mean.
    mean: Vec<f64>,
    rho: f64,
}

impl NoiseSource for RpwSaSource {
    fn advance(&mut self, time: u64, _theta: &[f64]) -> SaIncrement {
        let n = time;
        debug_assert_eq!(n, self.urn.n);
        let alpha0 = self.cfg.alpha0() as f64;
        let w_prev = self.urn.w as f64;
        let theta_n = (w_prev - self.mean[n as usize - 1]) / n as f64;
        let cond_mean = self.rho * w_prev / (alpha0 + n as f64) + self.cfg.q_b();
        self.urn.step(&self.cfg);
        let dw = self.urn.w as f64 - w_prev;
        let noise = dw - cond_mean;
        let residual = -self.rho * alpha0 * theta_n / (alpha0 + n as f64);
        let exact = (self.urn.w as f64 - self.mean[n as usize]) / (n + 1) as f64;
        SaIncrement {
            noise: vec![noise],
            residual: vec![residual],
            exact_next: Some(vec![exact]),
        }
    }
}

/// Build the recursion instance for an urn configuration. The centered
/// state uses the exact mean, and for `W_0 = B_0 = 0` the residual
/// vanishes identically from time 2 on.
pub fn rpw_sa_spec_replicate(cfg: &RpwConfig, replicate: u64) -> Result<SaSpec> {
    cfg.validate()?;
    if !cfg.theory_ok() {
        return Err(ErwError::Parameter("recursion form requires q_A q_B != 0".into()));
    }
    let rho = cfg.rho();
    let mean = rpw_mean_series(cfg.horizon.max(2), cfg)?;
    let mut urn = UrnState::new(cfg, replicate);
    urn.step(cfg);
    let initial = vec![urn.w as f64 - mean[0]];
    let source = RpwSaSource { cfg: cfg.clone(), urn, mean, rho };
    Ok(SaSpec {
        dim: 1,
        initial,
        start_time: 1,
        regression: Box::new(move |theta: &[f64]| vec![(1.0 - rho) * theta[0]]),
        gradient: Some(KronBlock { base: [[1.0 - rho, 0.0], [0.0, 0.0]], d: 1 }),
        step_size: Box::new(|t| 1.0 / t as f64),
        source: Box::new(source),
    })
}

pub fn rpw_sa_spec(cfg: &RpwConfig) -> Result<SaSpec> {
    rpw_sa_spec_replicate(cfg, 0)
}
