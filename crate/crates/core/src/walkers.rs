//! Exact forward simulators: the multi-dimensional reinforced walk with
//! random step sizes and running center of mass, and the randomized
//! play-the-winner urn.
//!
//! Directions are encoded as `0..2d`: index `k < d` is `+e_k`, index
//! `k >= d` is `-e_{k-d}`. One step consumes draws from the direction
//! channel in a fixed order:
//!
//! 1. past-step selection (one uniform, mapped through the direction
//!    counts; first step: one uniform over the `2d` directions),
//! 2. keep-or-switch (one uniform),
//! 3. switch target (one uniform over the `2d - 1` other directions,
//!    consumed only when switching).
//!
//! Step sizes come from their own channel, so changing the step-size law
//! never perturbs the direction path for a fixed seed. The stochastic-
//! approximation adapters replay exactly this sequence, which is what makes
//! walker-vs-recursion comparisons meaningful at the bit level.

use crate::model::{StartRule, StepSizeModel, WalkConfig};
use crate::rng::{stream_rng, Channel};
use crate::{ErwError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Outcome of one step: the moved coordinate, its sign, and the step size.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub dir: usize,
    pub coord: usize,
    pub sign: i64,
    pub z: f64,
}

#[inline]
pub(crate) fn dir_coord_sign(dir: usize, d: usize) -> (usize, i64) {
    if dir < d {
        (dir, 1)
    } else {
        (dir - d, -1)
    }
}

#[inline]
pub(crate) fn draw_first_direction(rng: &mut ChaCha8Rng, d: usize, start: StartRule) -> usize {
    let u: f64 = rng.random();
    match start {
        StartRule::Uniform => ((u * (2 * d) as f64) as usize).min(2 * d - 1),
        StartRule::Biased { p_up } => {
            debug_assert_eq!(d, 1);
            if u < p_up {
                0
            } else {
                1
            }
        }
    }
}

/// Select the next direction given the per-direction counts of the past
/// `n >= 1` steps. `counts` must sum to `n`.
#[inline]
pub(crate) fn draw_next_direction(
    rng: &mut ChaCha8Rng,
    counts: &[u64],
    n: u64,
    p_next: f64,
) -> usize {
    let u: f64 = rng.random();
    let k = (u * n as f64) as u64;
    let mut cum = 0u64;
    let mut picked = counts.len() - 1;
    for (j, &c) in counts.iter().enumerate() {
        cum += c;
        if k < cum {
            picked = j;
            break;
        }
    }
    let keep: f64 = rng.random();
    if keep < p_next {
        picked
    } else {
        let two_d = counts.len();
        let u3: f64 = rng.random();
        let m = ((u3 * (two_d - 1) as f64) as usize).min(two_d - 2);
        if m < picked {
            m
        } else {
            m + 1
        }
    }
}

#[inline]
pub(crate) fn draw_step_size(rng: &mut ChaCha8Rng, law: &StepSizeModel) -> f64 {
    match law {
        StepSizeModel::Constant { c } => *c,
        StepSizeModel::TwoPoint { a, b, q } => {
            let u: f64 = rng.random();
            if u < *q {
                *a
            } else {
                *b
            }
        }
        StepSizeModel::Gaussian { mean, var } => {
            let z: f64 = StandardNormal.sample(rng);
            mean + var.sqrt() * z
        }
        StepSizeModel::Uniform { a, b } => {
            let u: f64 = rng.random();
            a + (b - a) * u
        }
    }
}

/// Mutable state of one walk replicate.
///
/// The per-direction counts are the sufficient statistic for the uniform
/// choice over past steps: picking a past time uniformly and copying its
/// direction has the same law as picking direction `j` with probability
/// `counts[j]/n`. This keeps memory at O(d); the history-backed
/// [`reference::HistoryWalker`] validates the bookkeeping.
#[derive(Clone)]
pub struct WalkState {
    d: usize,
    n: u64,
    counts: Vec<u64>,
    s: Vec<i64>,
    t: Vec<f64>,
    t_running_sum: Vec<f64>,
    start: StartRule,
    dir_rng: ChaCha8Rng,
    step_rng: ChaCha8Rng,
}

impl WalkState {
    pub fn new(d: usize, start: StartRule, seed: u64, replicate: u64) -> Self {
        WalkState {
            d,
            n: 0,
            counts: vec![0; 2 * d],
            s: vec![0; d],
            t: vec![0.0; d],
            t_running_sum: vec![0.0; d],
            start,
            dir_rng: stream_rng(seed, replicate, Channel::Direction),
            step_rng: stream_rng(seed, replicate, Channel::StepSize),
        }
    }

    pub fn n(&self) -> u64 {
        self.n
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }
    pub fn s(&self) -> &[i64] {
        &self.s
    }
    pub fn t(&self) -> &[f64] {
        &self.t
    }
    /// Running sum of the positions, `sum_{k<=n} T_k`.
    pub fn t_running_sum(&self) -> &[f64] {
        &self.t_running_sum
    }

    /// Center of mass `C_n = (1/n) sum_{k<=n} T_k`.
    pub fn center_of_mass(&self) -> Vec<f64> {
        let n = self.n.max(1) as f64;
        self.t_running_sum.iter().map(|v| v / n).collect()
    }

    /// Copy of this state with fresh draw streams; the frozen history stays,
    /// future draws come from `(seed, replicate)`. For conditional tests.
    pub fn clone_with_streams(&self, seed: u64, replicate: u64) -> WalkState {
        let mut c = self.clone();
        c.dir_rng = stream_rng(seed, replicate, Channel::Direction);
        c.step_rng = stream_rng(seed, replicate, Channel::StepSize);
        c
    }

    /// Advance one step with memory parameter `p_next` and the given
    /// step-size law. Exactly one coordinate of the emitted step is `+-1`.
    #[inline]
    pub fn step(&mut self, p_next: f64, law: &StepSizeModel) -> StepOutcome {
        let dir = if self.n == 0 {
            draw_first_direction(&mut self.dir_rng, self.d, self.start)
        } else {
            draw_next_direction(&mut self.dir_rng, &self.counts, self.n, p_next)
        };
        let z = draw_step_size(&mut self.step_rng, law);
        let (coord, sign) = dir_coord_sign(dir, self.d);
        self.counts[dir] += 1;
        self.s[coord] += sign;
        self.t[coord] += sign as f64 * z;
        for k in 0..self.d {
            self.t_running_sum[k] += self.t[k];
        }
        self.n += 1;
        debug_assert_eq!(self.counts.iter().sum::<u64>(), self.n);
        if self.n & 0xfff == 0 {
            // sampled invariant check in release builds
            assert_eq!(self.counts.iter().sum::<u64>(), self.n);
            let l1: i64 = self.s.iter().map(|v| v.abs()).sum();
            assert!(l1 <= self.n as i64);
        }
        StepOutcome { dir, coord, sign, z }
    }
}

/// Checkpointed trajectory of one or more series.
///
/// Layout is checkpoint-major: entry `k * d + j` is coordinate `j` at
/// checkpoint `k`. Urn paths fill `w`/`na` and leave the walk series empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    pub d: usize,
    pub checkpoints: Vec<u64>,
    pub s: Vec<i64>,
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    pub w: Option<Vec<u64>>,
    pub na: Option<Vec<u64>>,
}

impl WalkPath {
    pub fn s_at(&self, k: usize) -> &[i64] {
        &self.s[k * self.d..(k + 1) * self.d]
    }
    pub fn t_at(&self, k: usize) -> &[f64] {
        &self.t[k * self.d..(k + 1) * self.d]
    }
    pub fn c_at(&self, k: usize) -> &[f64] {
        &self.c[k * self.d..(k + 1) * self.d]
    }
}

/// Simulate one walk path, recording at the configured checkpoints.
/// Deterministic given `(config, replicate)`.
pub fn simulate_walk_replicate(config: &WalkConfig, replicate: u64) -> Result<WalkPath> {
    config.validate()?;
    let d = config.d;
    let mut state = WalkState::new(d, config.start, config.seed, replicate);
    let mut path = WalkPath {
        d,
        checkpoints: config.checkpoints.clone(),
        s: Vec::with_capacity(config.checkpoints.len() * d),
        t: Vec::with_capacity(config.checkpoints.len() * d),
        c: Vec::with_capacity(config.checkpoints.len() * d),
        w: None,
        na: None,
    };
    let mut next_ck = 0usize;
    for n in 0..config.horizon {
        state.step(config.schedule.p_at(n + 1), &config.steps);
        if next_ck < config.checkpoints.len() && n + 1 == config.checkpoints[next_ck] {
            path.s.extend_from_slice(&state.s);
            path.t.extend_from_slice(&state.t);
            let m = (n + 1) as f64;
            path.c.extend(state.t_running_sum.iter().map(|v| v / m));
            next_ck += 1;
        }
    }
    Ok(path)
}

/// Replicate 0 of the configured experiment.
pub fn simulate_walk(config: &WalkConfig) -> Result<WalkPath> {
    simulate_walk_replicate(config, 0)
}

/// Randomized play-the-winner urn parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RpwConfig {
    /// Success probability on treatment A (white draw).
    pub p_a: f64,
    /// Success probability on treatment B (black draw).
    pub p_b: f64,
    pub w0: u64,
    pub b0: u64,
    /// Probability that an empty urn yields a white draw.
    pub p0: f64,
    pub horizon: u64,
    pub seed: u64,
}

impl RpwConfig {
    pub fn q_a(&self) -> f64 {
        1.0 - self.p_a
    }
    pub fn q_b(&self) -> f64 {
        1.0 - self.p_b
    }
    /// Drift coefficient `rho = p_A - q_B = p_A + p_B - 1`.
    pub fn rho(&self) -> f64 {
        self.p_a - self.q_b()
    }
    /// Initial ball count `alpha_0 = W_0 + B_0`.
    pub fn alpha0(&self) -> u64 {
        self.w0 + self.b0
    }
    /// Limiting white fraction `v = q_B / (q_A + q_B)`.
    pub fn limit_fraction(&self) -> f64 {
        self.q_b() / (self.q_a() + self.q_b())
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p_a", self.p_a), ("p_b", self.p_b), ("p0", self.p0)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ErwError::Config(format!("{name} = {v} outside [0,1]")));
            }
        }
        if self.horizon == 0 {
            return Err(ErwError::Config("horizon must be positive".into()));
        }
        Ok(())
    }

    /// Theory statements about the urn require `q_A q_B != 0`; simulation
    /// itself tolerates degenerate response probabilities.
    pub fn theory_ok(&self) -> bool {
        self.q_a() * self.q_b() != 0.0
    }
}

/// Mutable urn state. Two uniforms are consumed per draw: ball selection,
/// then the patient response.
pub struct UrnState {
    pub w: u64,
    pub b: u64,
    pub n: u64,
    pub n_a: u64,
    rng: ChaCha8Rng,
}

impl UrnState {
    pub fn new(cfg: &RpwConfig, replicate: u64) -> Self {
        UrnState {
            w: cfg.w0,
            b: cfg.b0,
            n: 0,
            n_a: 0,
            rng: stream_rng(cfg.seed, replicate, Channel::Direction),
        }
    }

    /// One patient: draw a ball (empty-urn rule only when the urn is
    /// empty), observe the response, add the generated ball. Returns 1 if
    /// a white ball was added.
    pub fn step(&mut self, cfg: &RpwConfig) -> u64 {
        let total = self.w + self.b;
        let u: f64 = self.rng.random();
        let white_drawn = if total == 0 {
            u < cfg.p0
        } else {
            u * (total as f64) < self.w as f64
        };
        let r: f64 = self.rng.random();
        let white_added = if white_drawn {
            self.n_a += 1;
            r < cfg.p_a // success on A adds white
        } else {
            r >= cfg.p_b // failure on B adds white
        };
        if white_added {
            self.w += 1;
        } else {
            self.b += 1;
        }
        self.n += 1;
        white_added as u64
    }
}

/// Simulate the urn, recording `W_n` and `N_{nA}` at the checkpoints.
pub fn simulate_rpw_replicate(
    cfg: &RpwConfig,
    checkpoints: &[u64],
    replicate: u64,
) -> Result<WalkPath> {
    cfg.validate()?;
    if checkpoints.is_empty()
        || !checkpoints.windows(2).all(|w| w[0] < w[1])
        || checkpoints[0] == 0
        || *checkpoints.last().unwrap() > cfg.horizon
    {
        return Err(ErwError::Config("invalid checkpoint grid".into()));
    }
    let mut urn = UrnState::new(cfg, replicate);
    let mut w_vals = Vec::with_capacity(checkpoints.len());
    let mut na_vals = Vec::with_capacity(checkpoints.len());
    let mut next_ck = 0usize;
    for n in 0..cfg.horizon {
        urn.step(cfg);
        if next_ck < checkpoints.len() && n + 1 == checkpoints[next_ck] {
            w_vals.push(urn.w);
            na_vals.push(urn.n_a);
            next_ck += 1;
        }
    }
    Ok(WalkPath {
        d: 1,
        checkpoints: checkpoints.to_vec(),
        s: Vec::new(),
        t: Vec::new(),
        c: Vec::new(),
        w: Some(w_vals),
        na: Some(na_vals),
    })
}

pub fn simulate_rpw(cfg: &RpwConfig, checkpoints: &[u64]) -> Result<WalkPath> {
    simulate_rpw_replicate(cfg, checkpoints, 0)
}

/// Map an urn path to the signed walk `S~_n = 2 W_n - n`.
///
/// The distributional identity with the one-dimensional walk holds only
/// for `W_0 = B_0 = 0` and `p0 = 1`; other inputs are rejected.
pub fn rpw_as_biased_erw(path: &WalkPath, cfg: &RpwConfig) -> Result<WalkPath> {
    if cfg.w0 != 0 || cfg.b0 != 0 || cfg.p0 != 1.0 {
        return Err(ErwError::Parameter(
            "walk mapping requires W0 = B0 = 0 and p0 = 1".into(),
        ));
    }
    let w = path
        .w
        .as_ref()
        .ok_or_else(|| ErwError::Parameter("path carries no urn counts".into()))?;
    let s: Vec<i64> = path
        .checkpoints
        .iter()
        .zip(w.iter())
        .map(|(&n, &wn)| 2 * wn as i64 - n as i64)
        .collect();
    let t: Vec<f64> = s.iter().map(|&v| v as f64).collect();
    Ok(WalkPath {
        d: 1,
        checkpoints: path.checkpoints.clone(),
        s,
        t,
        c: Vec::new(),
        w: Some(w.clone()),
        na: path.na.clone(),
    })
}

/// History-backed reference walker.
///
/// Stores every past direction and re-derives the direction counts from
/// the raw history at each step, consuming the same draw sequence as
/// [`WalkState`]. Quadratic in the horizon; used to validate the
/// counts-based bookkeeping.
pub mod reference {
    use super::*;

    pub struct HistoryWalker {
        d: usize,
        start: StartRule,
        pub dirs: Vec<u16>,
        pub s: Vec<i64>,
        dir_rng: ChaCha8Rng,
        step_rng: ChaCha8Rng,
    }

    impl HistoryWalker {
        pub fn new(d: usize, start: StartRule, seed: u64, replicate: u64) -> Self {
            HistoryWalker {
                d,
                start,
                dirs: Vec::new(),
                s: vec![0; d],
                dir_rng: stream_rng(seed, replicate, Channel::Direction),
                step_rng: stream_rng(seed, replicate, Channel::StepSize),
            }
        }

        pub fn step(&mut self, p_next: f64, law: &StepSizeModel) -> StepOutcome {
            let two_d = 2 * self.d;
            let n = self.dirs.len() as u64;
            let dir = if n == 0 {
                let u: f64 = self.dir_rng.random();
                match self.start {
                    StartRule::Uniform => ((u * two_d as f64) as usize).min(two_d - 1),
                    StartRule::Biased { p_up } => {
                        if u < p_up {
                            0
                        } else {
                            1
                        }
                    }
                }
            } else {
                // tally the raw history afresh
                let mut counts = vec![0u64; two_d];
                for &h in &self.dirs {
                    counts[h as usize] += 1;
                }
                let u: f64 = self.dir_rng.random();
                let k = (u * n as f64) as u64;
                let mut cum = 0u64;
                let mut picked = two_d - 1;
                for (j, &c) in counts.iter().enumerate() {
                    cum += c;
                    if k < cum {
                        picked = j;
                        break;
                    }
                }
                let keep: f64 = self.dir_rng.random();
                if keep < p_next {
                    picked
                } else {
                    let u3: f64 = self.dir_rng.random();
                    let m = ((u3 * (two_d - 1) as f64) as usize).min(two_d - 2);
                    if m < picked {
                        m
                    } else {
                        m + 1
                    }
                }
            };
            let z = draw_step_size(&mut self.step_rng, law);
            let (coord, sign) = dir_coord_sign(dir, self.d);
            self.dirs.push(dir as u16);
            self.s[coord] += sign;
            StepOutcome { dir, coord, sign, z }
        }
    }
}
