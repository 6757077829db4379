//! Domain types and regime arithmetic shared by every other module.

use crate::{ErwError, Result};
use serde::{Deserialize, Serialize};

/// Per-step memory parameters `p_i` together with their limit `p`.
///
/// The walk copies a uniformly chosen past step with probability `p_i` at
/// step `i` and deviates to one of the `2d-1` remaining directions
/// otherwise. Tabulated schedules fall back to the limit beyond their table.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemorySchedule {
    Constant { p: f64 },
    Tabulated { values: Vec<f64>, limit: f64 },
    /// `p_i = clamp(p + a / i^eps0, 0, 1)`, a power-law approach to `p`.
    PowerLaw { p: f64, a: f64, eps0: f64 },
}

impl MemorySchedule {
    pub fn constant(p: f64) -> Self {
        MemorySchedule::Constant { p }
    }

    /// Memory parameter used at step `i` (1-based).
    pub fn p_at(&self, i: u64) -> f64 {
        match self {
            MemorySchedule::Constant { p } => *p,
            MemorySchedule::Tabulated { values, limit } => {
                if i >= 1 && (i as usize) <= values.len() {
                    values[i as usize - 1]
                } else {
                    *limit
                }
            }
            MemorySchedule::PowerLaw { p, a, eps0 } => {
                (p + a / (i as f64).powf(*eps0)).clamp(0.0, 1.0)
            }
        }
    }

    /// Limiting memory parameter.
    pub fn limit(&self) -> f64 {
        match self {
            MemorySchedule::Constant { p } => *p,
            MemorySchedule::Tabulated { limit, .. } => *limit,
            MemorySchedule::PowerLaw { p, .. } => *p,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, MemorySchedule::Constant { .. })
    }

    /// Correlation coefficient at step `i`.
    pub fn rho_at(&self, i: u64, d: usize) -> f64 {
        // rho_from_p cannot fail for d >= 1 and p in [0,1]
        rho_from_p(self.p_at(i), d).expect("valid schedule")
    }

    /// Limiting correlation coefficient.
    pub fn rho_limit(&self, d: usize) -> f64 {
        rho_from_p(self.limit(), d).expect("valid schedule")
    }

    pub fn validate(&self) -> Result<()> {
        let check = |p: f64| -> Result<()> {
            if !(0.0..=1.0).contains(&p) {
                return Err(ErwError::Config(format!("memory parameter {p} outside [0,1]")));
            }
            Ok(())
        };
        match self {
            MemorySchedule::Constant { p } => check(*p),
            MemorySchedule::Tabulated { values, limit } => {
                values.iter().try_for_each(|&v| check(v))?;
                check(*limit)
            }
            MemorySchedule::PowerLaw { p, eps0, .. } => {
                check(*p)?;
                if *eps0 <= 0.0 {
                    return Err(ErwError::Config("decay exponent must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Empirical decay of `|avg p_i - p|` over the horizon, reported at
    /// geometrically spaced times. The theory assumes this vanishes; the
    /// toolkit accepts any schedule and only reports the decay.
    pub fn average_deviation(&self, horizon: u64) -> Vec<(u64, f64)> {
        let p = self.limit();
        let mut out = Vec::new();
        let mut sum = 0.0;
        let mut next = 1u64;
        for i in 1..=horizon {
            sum += self.p_at(i);
            if i == next || i == horizon {
                out.push((i, (sum / i as f64 - p).abs()));
                next = (next * 2).max(i + 1);
            }
        }
        out
    }
}

/// Law of the i.i.d. step sizes `Z_i`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSizeModel {
    Constant { c: f64 },
    /// `P(Z=a)=q`, `P(Z=b)=1-q`.
    TwoPoint { a: f64, b: f64, q: f64 },
    Gaussian { mean: f64, var: f64 },
    Uniform { a: f64, b: f64 },
}

impl StepSizeModel {
    pub fn unit() -> Self {
        StepSizeModel::Constant { c: 1.0 }
    }

    pub fn mean(&self) -> f64 {
        match self {
            StepSizeModel::Constant { c } => *c,
            StepSizeModel::TwoPoint { a, b, q } => q * a + (1.0 - q) * b,
            StepSizeModel::Gaussian { mean, .. } => *mean,
            StepSizeModel::Uniform { a, b } => 0.5 * (a + b),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            StepSizeModel::Constant { .. } => 0.0,
            StepSizeModel::TwoPoint { a, b, q } => q * (1.0 - q) * (a - b) * (a - b),
            StepSizeModel::Gaussian { var, .. } => *var,
            StepSizeModel::Uniform { a, b } => (b - a) * (b - a) / 12.0,
        }
    }

    /// `E[Z^2]`.
    pub fn second_moment(&self) -> f64 {
        let m = self.mean();
        self.variance() + m * m
    }

    /// All supported laws have moments of every order.
    pub fn has_2_plus_eps_moment(&self) -> bool {
        true
    }

    /// True when no randomness is consumed per step.
    pub fn is_constant(&self) -> bool {
        matches!(self, StepSizeModel::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StepSizeModel::TwoPoint { q, .. } if !(0.0..=1.0).contains(q) => {
                Err(ErwError::Config(format!("two-point weight {q} outside [0,1]")))
            }
            StepSizeModel::Gaussian { var, .. } if *var < 0.0 => {
                Err(ErwError::Config("negative gaussian variance".into()))
            }
            StepSizeModel::Uniform { a, b } if a > b => {
                Err(ErwError::Config("uniform bounds out of order".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Law of the very first step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartRule {
    /// Uniform over the 2d signed unit vectors (multi-dimensional convention).
    #[default]
    Uniform,
    /// `+1` with probability `p_up`, `-1` otherwise; d = 1 only. This is the
    /// start the play-the-winner mapping induces.
    Biased { p_up: f64 },
}

/// Full description of one walk experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkConfig {
    pub d: usize,
    pub schedule: MemorySchedule,
    pub steps: StepSizeModel,
    pub horizon: u64,
    /// Recording times; strictly increasing, last one at most `horizon`.
    pub checkpoints: Vec<u64>,
    pub seed: u64,
    pub replicates: u64,
    #[serde(default)]
    pub start: StartRule,
}

impl WalkConfig {
    /// Constant-memory walk with unit steps recorded only at the horizon.
    pub fn simple(d: usize, p: f64, horizon: u64, seed: u64, replicates: u64) -> Self {
        WalkConfig {
            d,
            schedule: MemorySchedule::constant(p),
            steps: StepSizeModel::unit(),
            horizon,
            checkpoints: vec![horizon],
            seed,
            replicates,
            start: StartRule::Uniform,
        }
    }

    pub fn with_steps(mut self, steps: StepSizeModel) -> Self {
        self.steps = steps;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    /// Geometric recording grid `{floor(horizon^{k/levels})}`, deduplicated,
    /// always ending at the horizon.
    pub fn geometric_checkpoints(horizon: u64, levels: u32) -> Vec<u64> {
        let mut pts = Vec::with_capacity(levels as usize + 1);
        for k in 1..=levels {
            let t = (horizon as f64).powf(k as f64 / levels as f64).floor() as u64;
            pts.push(t.clamp(1, horizon));
        }
        pts.dedup();
        if pts.last() != Some(&horizon) {
            pts.push(horizon);
        }
        pts
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(ErwError::Config("dimension must be at least 1".into()));
        }
        if self.horizon == 0 {
            return Err(ErwError::Config("horizon must be positive".into()));
        }
        self.schedule.validate()?;
        self.steps.validate()?;
        if self.checkpoints.is_empty() {
            return Err(ErwError::Config("checkpoints must be nonempty".into()));
        }
        if !self.checkpoints.windows(2).all(|w| w[0] < w[1]) {
            return Err(ErwError::Config("checkpoints must be strictly increasing".into()));
        }
        let last = *self.checkpoints.last().unwrap();
        if last > self.horizon || self.checkpoints[0] == 0 {
            return Err(ErwError::Config(
                "checkpoints must lie in [1, horizon]".into(),
            ));
        }
        if let StartRule::Biased { p_up } = self.start {
            if self.d != 1 {
                return Err(ErwError::Config("biased start requires d = 1".into()));
            }
            if !(0.0..=1.0).contains(&p_up) {
                return Err(ErwError::Config(format!("start probability {p_up} outside [0,1]")));
            }
        }
        Ok(())
    }

    /// Parse a JSON config document. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: WalkConfig = serde_json::from_str(text)
            .map_err(|e| ErwError::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Asymptotic regime of the walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Diffusive,
    Critical,
    Superdiffusive,
}

/// Normalization under which the walk has a nondegenerate limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    SqrtN,
    SqrtNLogN,
    PowerRho { rho: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegimeReport {
    pub rho: f64,
    pub regime: Regime,
    pub critical_p: f64,
    pub normalization: Normalization,
}

/// Correlation coefficient `rho = (2dp - 1)/(2d - 1)`.
///
/// When `p` equals the floating-point critical value for `d` the result is
/// exactly 1/2; the critical case is a deliberate opt-in and must not be
/// lost to rounding.
pub fn rho_from_p(p: f64, d: usize) -> Result<f64> {
    if d == 0 {
        return Err(ErwError::Parameter("dimension must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(ErwError::Parameter(format!("memory parameter {p} outside [0,1]")));
    }
    if p == critical_p(d)? {
        return Ok(0.5);
    }
    let d = d as f64;
    Ok((2.0 * d * p - 1.0) / (2.0 * d - 1.0))
}

/// Critical memory parameter `p_d = (2d + 1)/(4d)`.
pub fn critical_p(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(ErwError::Parameter("dimension must be at least 1".into()));
    }
    let d = d as f64;
    Ok((2.0 * d + 1.0) / (4.0 * d))
}

/// Classify a schedule by its limiting memory parameter.
pub fn regime_classify(schedule: &MemorySchedule, d: usize) -> Result<RegimeReport> {
    schedule.validate()?;
    let p = schedule.limit();
    let rho = rho_from_p(p, d)?;
    let critical = critical_p(d)?;
    // Exact equality when p came through critical_p; tolerance otherwise.
    let regime = if rho == 0.5 || (rho - 0.5).abs() < 1e-12 {
        Regime::Critical
    } else if rho < 0.5 {
        Regime::Diffusive
    } else {
        Regime::Superdiffusive
    };
    let normalization = match regime {
        Regime::Diffusive => Normalization::SqrtN,
        Regime::Critical => Normalization::SqrtNLogN,
        Regime::Superdiffusive => Normalization::PowerRho { rho },
    };
    Ok(RegimeReport { rho, regime, critical_p: critical, normalization })
}
