//! Joint second-moment verification: the `(S, T)` covariance block and the
//! `(T, C)` center-of-mass block against their limit matrices.

use super::{accumulate_walks, Outputs};
use crate::model::{regime_classify, StepSizeModel, WalkConfig};
use crate::report::{Check, Report};
use crate::theory;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointCovParams {
    pub d: usize,
    pub p: f64,
    pub steps: StepSizeModel,
    pub horizon: u64,
    pub replicates: u64,
    pub seed: u64,
    pub entry_tolerance: f64,
}

impl JointCovParams {
    pub fn reference(seed: u64) -> Self {
        JointCovParams {
            d: 2,
            p: 0.5,
            steps: StepSizeModel::TwoPoint { a: 0.0, b: 2.0, q: 0.5 },
            horizon: 10_000,
            replicates: 100_000,
            seed,
            entry_tolerance: 0.05,
        }
    }
}

/// Empirical `2d x 2d` covariance of `(S, T)/sqrt(n)` vs the limit block.
pub fn verify_joint_covariance(params: &JointCovParams) -> Result<Outputs> {
    let regime = regime_classify(&crate::model::MemorySchedule::constant(params.p), params.d)?;
    let theory_cov = theory::cov_ts(
        regime.rho,
        params.steps.mean(),
        params.steps.variance().sqrt(),
        params.d,
    )?;
    let d = params.d;
    let dim = 2 * d;
    let scale = (params.horizon as f64).sqrt();
    let cfg = WalkConfig::simple(d, params.p, params.horizon, params.seed, params.replicates)
        .with_steps(params.steps.clone());
    let acc = accumulate_walks(&cfg, dim, |path| {
        let k = path.checkpoints.len() - 1;
        let mut v = Vec::with_capacity(dim);
        v.extend(path.s_at(k).iter().map(|&s| s as f64 / scale));
        v.extend(path.t_at(k).iter().map(|&t| t / scale));
        v
    })?;

    let max_entry = (0..dim)
        .flat_map(|i| (0..dim).map(move |j| (i, j)))
        .map(|(i, j)| theory_cov.entry(i, j).abs())
        .fold(0.0, f64::max);
    let mut checks = Vec::new();
    let mut table = String::from("i,j,empirical,theory\n");
    for i in 0..dim {
        for j in i..dim {
            let emp = acc.cov(i, j);
            let th = theory_cov.entry(i, j);
            table.push_str(&format!("{i},{j},{emp},{th}\n"));
            let name = format!("cov_{i}{j}");
            let check = if th.abs() > 1e-9 {
                Check::relative(&name, "limit covariance block entry", emp, th, params.entry_tolerance)
            } else {
                // zero entries compare absolutely against the block scale
                Check::absolute(
                    &name,
                    "limit covariance block entry (zero)",
                    emp,
                    0.0,
                    params.entry_tolerance * max_entry,
                )
            };
            checks.push(check);
        }
    }
    checks.push(Check::flag("theory_block_psd", "eigenvalues >= -1e-12", theory_cov.is_psd()));

    let report = Report::new("joint_covariance", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: vec![("joint_covariance.csv".into(), table)] })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CenterOfMassParams {
    pub d: usize,
    pub p: f64,
    pub steps: StepSizeModel,
    pub horizon: u64,
    pub replicates: u64,
    pub seed: u64,
    pub c_var_tolerance: f64,
    pub tc_cov_tolerance: f64,
}

impl CenterOfMassParams {
    pub fn reference(seed: u64) -> Self {
        CenterOfMassParams {
            d: 1,
            p: 0.6,
            steps: StepSizeModel::unit(),
            horizon: 10_000,
            replicates: 100_000,
            seed,
            c_var_tolerance: 0.05,
            tc_cov_tolerance: 0.07,
        }
    }
}

/// Variance of `C_n/sqrt(n)` and covariance of `(T_n, C_n)/sqrt(n)` per
/// coordinate against the center-of-mass limit block.
pub fn verify_center_of_mass(params: &CenterOfMassParams) -> Result<Outputs> {
    let regime = regime_classify(&crate::model::MemorySchedule::constant(params.p), params.d)?;
    let theory_cov = theory::cov_tc(
        regime.rho,
        params.steps.mean(),
        params.steps.variance().sqrt(),
        params.d,
    )?;
    let d = params.d;
    let scale = (params.horizon as f64).sqrt();
    let cfg = WalkConfig::simple(d, params.p, params.horizon, params.seed, params.replicates)
        .with_steps(params.steps.clone());
    let acc = accumulate_walks(&cfg, 2 * d, |path| {
        let k = path.checkpoints.len() - 1;
        let mut v = Vec::with_capacity(2 * d);
        v.extend(path.t_at(k).iter().map(|&t| t / scale));
        v.extend(path.c_at(k).iter().map(|&c| c / scale));
        v
    })?;

    // pool the d coordinates (identical marginals)
    let t_var = (0..d).map(|j| acc.var(j)).sum::<f64>() / d as f64;
    let c_var = (0..d).map(|j| acc.var(d + j)).sum::<f64>() / d as f64;
    let tc_cov = (0..d).map(|j| acc.cov(j, d + j)).sum::<f64>() / d as f64;

    let checks = vec![
        Check::relative(
            "variance_center_of_mass",
            "sigma_Z^2/3 + 2 mu_Z^2/(3(1-2rho)(2-rho)), per coordinate over d",
            c_var,
            theory_cov.entry(d, d),
            params.c_var_tolerance,
        ),
        Check::relative(
            "covariance_position_center",
            "sigma_Z^2/2 + mu_Z^2/((1-2rho)(2-rho)), per coordinate over d",
            tc_cov,
            theory_cov.entry(0, d),
            params.tc_cov_tolerance,
        ),
        Check::relative(
            "variance_position",
            "sigma_Z^2 + mu_Z^2/(1-2rho), per coordinate over d",
            t_var,
            theory_cov.entry(0, 0),
            params.c_var_tolerance,
        ),
    ];
    let report =
        Report::new("center_of_mass", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scale_center_of_mass_run() {
        let params = CenterOfMassParams {
            d: 1,
            p: 0.6,
            steps: StepSizeModel::unit(),
            horizon: 2_000,
            replicates: 6_000,
            seed: 3,
            c_var_tolerance: 0.12,
            tc_cov_tolerance: 0.15,
        };
        let out = verify_center_of_mass(&params).unwrap();
        assert!(out.report.pass, "{}", out.report.summary_lines());
    }
}
