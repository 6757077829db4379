//! Marginal variances and cross-covariances of the exact limit-process
//! samplers against their closed forms.

use super::Outputs;
use crate::batch;
use crate::gaussian::{
    batch_rng, covariance, sample_g_diffusive, sample_g_hat, sample_g_super, sample_mixture,
};
use crate::report::{Check, Report};
use crate::stats::MomentAccumulator;
use crate::Result;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianParams {
    pub draws: u64,
    pub seed: u64,
    pub rho_diffusive: f64,
    pub rho_superdiffusive: f64,
}

impl GaussianParams {
    pub fn reference(seed: u64) -> Self {
        GaussianParams { draws: 1_000_000, seed, rho_diffusive: 0.25, rho_superdiffusive: 0.75 }
    }
}

fn accumulate_process(
    draws: u64,
    seed: u64,
    times: &'static [f64],
    sampler: impl Fn(&mut rand_chacha::ChaCha8Rng, &[f64]) -> Vec<f64> + Sync,
) -> MomentAccumulator {
    batch::reduce_chunks(
        draws,
        8192,
        |range| {
            let mut acc = MomentAccumulator::new(times.len());
            for rep in range {
                let mut rng = batch_rng(seed, rep);
                acc.accumulate(&sampler(&mut rng, times));
            }
            acc
        },
        |a, b| MomentAccumulator::merge(a, &b),
    )
    .expect("draws > 0")
}

fn var_checks(
    checks: &mut Vec<Check>,
    acc: &MomentAccumulator,
    name: &str,
    formula: &str,
    times: &[f64],
    target: impl Fn(f64) -> f64,
) {
    let n = acc.count() as f64;
    for (k, &t) in times.iter().enumerate() {
        let th = target(t);
        let emp = acc.var(k);
        // 4 SE of a Gaussian variance estimate
        let tol = 4.0 * th * (2.0 / n).sqrt();
        checks.push(
            Check::absolute(&format!("{name}_var_t{k}"), formula, emp, th, tol)
                .with_note(format!("t = {t}")),
        );
    }
}

fn cov_check(
    checks: &mut Vec<Check>,
    acc: &MomentAccumulator,
    name: &str,
    formula: &str,
    i: usize,
    j: usize,
    th: f64,
) {
    let n = acc.count() as f64;
    let vi = acc.var(i);
    let vj = acc.var(j);
    let emp = acc.cov(i, j);
    let tol = 4.0 * ((vi * vj + th * th) / n).sqrt();
    checks.push(Check::absolute(&format!("{name}_cov_{i}{j}"), formula, emp, th, tol));
}

pub fn verify(params: &GaussianParams) -> Result<Outputs> {
    const TIMES: [f64; 3] = [1.0, 2.0, 4.0];
    const TIMES_HAT: [f64; 3] = [1.5, std::f64::consts::E, 7.389_056_098_930_65];
    let mut checks = Vec::new();

    let rho = params.rho_diffusive;
    let acc = accumulate_process(params.draws, params.seed, &TIMES, |rng, times| {
        sample_g_diffusive(rho, times, 1, rng).expect("valid grid").values
    });
    var_checks(&mut checks, &acc, "diffusive", "t/(1-2rho)", &TIMES, |t| t / (1.0 - 2.0 * rho));
    cov_check(
        &mut checks,
        &acc,
        "diffusive",
        "(st)^rho s^(1-2rho)/(1-2rho)",
        0,
        2,
        covariance::diffusive(rho, TIMES[0], TIMES[2]),
    );

    let rho_s = params.rho_superdiffusive;
    let acc = accumulate_process(params.draws, params.seed + 1, &TIMES, |rng, times| {
        sample_g_super(rho_s, times, 1, rng).expect("valid grid").values
    });
    var_checks(&mut checks, &acc, "superdiffusive", "t/(2rho-1)", &TIMES, |t| {
        t / (2.0 * rho_s - 1.0)
    });
    cov_check(
        &mut checks,
        &acc,
        "superdiffusive",
        "s^rho t^(1-rho)/(2rho-1)",
        0,
        2,
        covariance::superdiffusive(rho_s, TIMES[0], TIMES[2]),
    );

    let acc = accumulate_process(params.draws, params.seed + 2, &TIMES_HAT, |rng, times| {
        sample_g_hat(times, 1, rng).expect("valid grid").values
    });
    var_checks(&mut checks, &acc, "critical_hat", "t log t", &TIMES_HAT, |t| t * t.ln());
    cov_check(
        &mut checks,
        &acc,
        "critical_hat",
        "sqrt(st) log min(s,t)",
        1,
        2,
        covariance::critical_hat(TIMES_HAT[1], TIMES_HAT[2]),
    );

    // mixture marginal at t = 1
    let (r1, r2, s1, s2) = (0.0, 0.2, 0.5f64.sqrt(), 0.5f64.sqrt());
    let acc = accumulate_process(params.draws, params.seed + 3, &TIMES, |rng, times| {
        sample_mixture(r1, r2, s1, s2, times, 1, rng).expect("valid grid").values
    });
    var_checks(&mut checks, &acc, "mixture", "s1^2 t + s2^2 t/(1-2rho2)", &TIMES, |t| {
        s1 * s1 * t + s2 * s2 * t / (1.0 - 2.0 * r2)
    });

    let report =
        Report::new("gaussian_samplers", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scale_sampler_verification() {
        let params = GaussianParams {
            draws: 30_000,
            seed: 11,
            rho_diffusive: 0.25,
            rho_superdiffusive: 0.75,
        };
        let out = verify(&params).unwrap();
        assert!(out.report.pass, "{}", out.report.summary_lines());
    }
}
