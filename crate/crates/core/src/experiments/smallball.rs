//! Small-ball constants: the Brownian supremum against the exact
//! reflection series, the mixed limit process against the Bessel-zero
//! constant, and the integrated-Brownian constant against its proven
//! bracket.

use super::Outputs;
use crate::report::{Check, Report};
use crate::special::bm_sup_probability;
use crate::stats::{
    fit_small_ball_constant, small_ball_log_prob, small_ball_log_prob_nested, SmallBallPoint,
    SmallBallProcess, SmallBallSpec, SupFunctional,
};
use crate::theory::kappa_bracket;
use crate::Result;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

fn points_table(points: &[SmallBallPoint]) -> String {
    let mut t = String::from("epsilon,trials,hits,log_p,se_log_p\n");
    for p in points {
        t.push_str(&format!(
            "{},{},{},{},{}\n",
            p.epsilon,
            p.trials,
            p.hits,
            p.log_p.map(|v| v.to_string()).unwrap_or_default(),
            p.se_log_p.map(|v| v.to_string()).unwrap_or_default(),
        ));
    }
    t
}

/// Fit the Brownian small-ball constant from the exact reflection series;
/// the pure-oracle end of the pipeline.
pub fn verify_bm_oracle_fit() -> Result<Outputs> {
    let eps = [0.3, 0.4, 0.5, 0.6];
    let points: Vec<SmallBallPoint> = eps
        .iter()
        .map(|&e| SmallBallPoint {
            epsilon: e,
            trials: 0,
            hits: 1,
            log_p: Some(bm_sup_probability(e).ln()),
            se_log_p: None,
            log_p_upper_bound: 0.0,
        })
        .collect();
    let fit = fit_small_ball_constant(&points, 2.0, true)?;
    let target = PI * PI / 8.0;
    let checks = vec![
        Check::relative(
            "bm_constant_from_series",
            "-eps^2 log P(sup|B| < eps) -> pi^2/8",
            fit.constant,
            target,
            0.02,
        )
        .with_note(format!("intercept {:.4}, residual {:.3e}", fit.intercept, fit.residual)),
    ];
    let report = Report::new(
        "smallball_bm_oracle",
        serde_json::json!({ "epsilons": eps, "exponent": 2.0 }),
        checks,
    );
    Ok(Outputs { report, tables: vec![("bm_oracle_points.csv".into(), points_table(&points))] })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixtureFitParams {
    pub rho2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub grid: usize,
    pub epsilons: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
    pub tolerance: f64,
}

impl MixtureFitParams {
    pub fn reference(seed: u64) -> Self {
        MixtureFitParams {
            rho2: 0.2,
            sigma1: 0.5f64.sqrt(),
            sigma2: 0.5f64.sqrt(),
            grid: 1 << 13,
            epsilons: vec![0.35, 0.5, 0.7],
            trials: 10_000_000,
            seed,
            tolerance: 0.20,
        }
    }
}

/// Monte Carlo fit of the mixed-process constant: the limit is the
/// Brownian constant scaled by `sigma1^2 + sigma2^2`, independent of the
/// memory exponent.
pub fn verify_mixture_fit(params: &MixtureFitParams) -> Result<Outputs> {
    let spec = SmallBallSpec {
        process: SmallBallProcess::Mixture {
            rho1: 0.0,
            rho2: params.rho2,
            sigma1: params.sigma1,
            sigma2: params.sigma2,
        },
        functional: SupFunctional::SupNorm,
        d: 1,
        grid: params.grid,
    };
    let points: Vec<SmallBallPoint> = params
        .epsilons
        .iter()
        .enumerate()
        .map(|(i, &e)| small_ball_log_prob(&spec, e, params.trials, params.seed + i as u64))
        .collect();
    let fit = fit_small_ball_constant(&points, 2.0, true)?;
    let s2 = params.sigma1 * params.sigma1 + params.sigma2 * params.sigma2;
    let target = PI * PI / 8.0 * s2;

    // grid-bias scale from a nested coarse/fine run at the largest epsilon,
    // where the hit probability is large enough to resolve the gap
    let eps_big = *params.epsilons.last().expect("nonempty epsilons");
    let (fine, coarse) =
        small_ball_log_prob_nested(&spec, eps_big, params.trials / 20, params.seed + 90);
    let grid_gap = match (coarse.log_p, fine.log_p) {
        (Some(c), Some(f)) => c - f,
        _ => f64::NAN,
    };

    let checks = vec![
        Check::relative(
            "mixture_constant",
            "-eps^2 log P(sup|I| < eps) -> (j_{-1/2}^2/2)(s1^2+s2^2) = pi^2/8 here",
            fit.constant,
            target,
            params.tolerance,
        )
        .with_note(format!(
            "intercept-corrected fit; residual {:.3e}; halving the grid moves log P by \
             {grid_gap:.3} at eps = {eps_big}, so the finite-grid supremum biases the \
             constant low by a few percent; finite-eps prefactors are absorbed by the \
             intercept {:.3}",
            fit.residual, fit.intercept
        )),
        Check::flag(
            "grid_refinement_monotone",
            "finer grid cannot raise the measured probability",
            fine.hits <= coarse.hits,
        ),
    ];
    let report =
        Report::new("smallball_mixture", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: vec![("mixture_points.csv".into(), points_table(&points))] })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KappaParams {
    pub grid: usize,
    pub epsilons: Vec<f64>,
    pub trials: u64,
    pub seed: u64,
}

impl KappaParams {
    pub fn reference(seed: u64) -> Self {
        KappaParams {
            grid: 1 << 12,
            epsilons: vec![0.02, 0.03, 0.05, 0.08],
            trials: 2_000_000,
            seed,
        }
    }
}

/// Fit of the integrated-Brownian small-ball constant with the 2/3
/// exponent; the estimate must land inside the proven bracket.
pub fn verify_kappa_bracket(params: &KappaParams) -> Result<Outputs> {
    let spec = SmallBallSpec {
        process: SmallBallProcess::BrownianMotion,
        functional: SupFunctional::SupWeightedIntegral { alpha: 0.0 },
        d: 1,
        grid: params.grid,
    };
    let points: Vec<SmallBallPoint> = params
        .epsilons
        .iter()
        .enumerate()
        .map(|(i, &e)| small_ball_log_prob(&spec, e, params.trials, params.seed + i as u64))
        .collect();
    let fit = fit_small_ball_constant(&points, 2.0 / 3.0, true)?;
    let (lo, hi) = kappa_bracket(1);
    let checks = vec![
        Check::interval(
            "kappa_estimate",
            "-eps^(2/3) log P(sup|int B| < eps) -> kappa, proven within [3/8, (2pi)^(2/3) 3/8]",
            fit.constant,
            lo,
            hi,
        )
        .with_note(format!("intercept {:.3}, residual {:.3e}", fit.intercept, fit.residual)),
    ];
    let report =
        Report::new("smallball_kappa", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: vec![("kappa_points.csv".into(), points_table(&points))] })
}
