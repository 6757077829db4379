//! Urn verification: the law of large numbers and the CLT variance of the
//! white-ball count, and the distributional mapping onto the signed walk.

use super::{accumulate_urns, collect_walk_samples, Outputs};
use crate::batch;
use crate::model::{StartRule, StepSizeModel, WalkConfig};
use crate::report::{Check, Report};
use crate::theory::{rpw_clt_variance, RpwCltVariance};
use crate::walkers::{rpw_as_biased_erw, simulate_rpw_replicate, RpwConfig};
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RpwParams {
    pub p_a: f64,
    pub p_b: f64,
    pub w0: u64,
    pub b0: u64,
    pub p0: f64,
    pub horizon: u64,
    pub replicates: u64,
    pub seed: u64,
    pub mean_tolerance: f64,
    pub var_tolerance: f64,
}

impl RpwParams {
    pub fn reference(seed: u64) -> Self {
        RpwParams {
            p_a: 0.7,
            p_b: 0.5,
            w0: 1,
            b0: 1,
            p0: 0.5,
            horizon: 100_000,
            replicates: 10_000,
            seed,
            mean_tolerance: 0.02,
            var_tolerance: 0.05,
        }
    }

    fn config(&self) -> RpwConfig {
        RpwConfig {
            p_a: self.p_a,
            p_b: self.p_b,
            w0: self.w0,
            b0: self.b0,
            p0: self.p0,
            horizon: self.horizon,
            seed: self.seed,
        }
    }
}

/// `W_n/n` against the limiting fraction and `(W_n - n v)/sqrt(n)` against
/// the CLT variance.
pub fn verify_lln_clt(params: &RpwParams) -> Result<Outputs> {
    let cfg = params.config();
    let v = cfg.limit_fraction();
    let var_target = match rpw_clt_variance(params.p_a, params.p_b)? {
        RpwCltVariance::Diffusive(x) => x,
        other => {
            return Err(crate::ErwError::Parameter(format!(
                "reference check expects the sub-critical branch, got {other:?}"
            )))
        }
    };
    let n = params.horizon as f64;
    let cks = [params.horizon];
    let acc = accumulate_urns(&cfg, &cks, params.replicates, 2, |path| {
        let w = path.w.as_ref().expect("urn path")[0] as f64;
        vec![w / n, (w - n * v) / n.sqrt()]
    })?;
    let mean_w = acc.mean()[0];
    let var_w = acc.var(1);
    let var_se = var_w * (2.0 / params.replicates as f64).sqrt();
    let checks = vec![
        Check::relative(
            "mean_white_fraction",
            "W_n/n -> q_B/(q_A+q_B)",
            mean_w,
            v,
            params.mean_tolerance,
        ),
        Check::relative(
            "variance_centered_count",
            "Var((W_n - n v)/sqrt(n)) -> q_A q_B/((q_A+q_B)^2 (2(q_A+q_B)-1))",
            var_w,
            var_target,
            params.var_tolerance,
        )
        .with_note(format!("MC standard error {var_se:.3e}")),
    ];
    let report = Report::new("rpw_lln_clt", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: Vec::new() })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MappingParams {
    pub p: f64,
    pub horizon: u64,
    pub replicates: u64,
    pub seed: u64,
    /// Comparison band in joint standard errors.
    pub se_band: f64,
}

impl MappingParams {
    pub fn reference(seed: u64) -> Self {
        MappingParams { p: 0.6, horizon: 1_000, replicates: 100_000, seed, se_band: 3.0 }
    }
}

/// Urn mapped through `S~_n = 2 W_n - n` against the one-dimensional walk
/// with the matching first-step law: means and variances must agree.
pub fn verify_mapping(params: &MappingParams) -> Result<Outputs> {
    let urn_cfg = RpwConfig {
        p_a: params.p,
        p_b: params.p,
        w0: 0,
        b0: 0,
        p0: 1.0,
        horizon: params.horizon,
        seed: params.seed,
    };
    let cks = [params.horizon];
    let s_tilde: Vec<f64> = batch::reduce_chunks(
        params.replicates,
        batch::DEFAULT_CHUNK,
        |range| {
            let mut out = Vec::with_capacity((range.end - range.start) as usize);
            for rep in range {
                let path = simulate_rpw_replicate(&urn_cfg, &cks, rep).expect("valid config");
                let mapped = rpw_as_biased_erw(&path, &urn_cfg).expect("empty start");
                out.push(mapped.s[0] as f64);
            }
            out
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .expect("replicates > 0");

    // the mapping induces a +1-with-probability-p first step
    let mut walk_cfg =
        WalkConfig::simple(1, params.p, params.horizon, params.seed + 1, params.replicates)
            .with_steps(StepSizeModel::unit());
    walk_cfg.start = StartRule::Biased { p_up: params.p };
    let s_walk = collect_walk_samples(&walk_cfg, |path| {
        path.s_at(path.checkpoints.len() - 1)[0] as f64
    })?;

    let stats = |xs: &[f64]| {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (mean, var, n)
    };
    let (m_u, v_u, n_u) = stats(&s_tilde);
    let (m_w, v_w, n_w) = stats(&s_walk);
    let se_mean = (v_u / n_u + v_w / n_w).sqrt();
    let se_var = (2.0 * v_u * v_u / n_u + 2.0 * v_w * v_w / n_w).sqrt();

    let checks = vec![
        Check::absolute(
            "mean_difference",
            "E S~_n = E S_n under the mapping",
            m_u - m_w,
            0.0,
            params.se_band * se_mean,
        )
        .with_note(format!("urn {m_u:.4}, walk {m_w:.4}, joint se {se_mean:.4}")),
        Check::absolute(
            "variance_difference",
            "Var S~_n = Var S_n under the mapping",
            v_u - v_w,
            0.0,
            params.se_band * se_var,
        )
        .with_note(format!("urn {v_u:.3}, walk {v_w:.3}, joint se {se_var:.3}")),
    ];
    let report = Report::new("rpw_mapping", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: Vec::new() })
}
