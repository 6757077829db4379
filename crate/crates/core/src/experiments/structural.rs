//! Exact structural checks: recursion adapters against the direct
//! simulators, the history-backed walker against the counts-based one, the
//! growth product against the log-gamma identity, accumulator merge
//! invariance, and worker-count invariance of reports.

use super::Outputs;
use crate::batch::with_workers;
use crate::model::{MemorySchedule, StartRule, StepSizeModel, WalkConfig};
use crate::report::{Check, Report};
use crate::rng::{stream_rng, Channel};
use crate::sa::{erw_sa_spec_replicate, rpw_sa_spec_replicate, run_sa};
use crate::special::ln_gamma;
use crate::stats::MomentAccumulator;
use crate::theory::{gamma_product, rpw_mean_series};
use crate::walkers::{
    reference::HistoryWalker, simulate_rpw_replicate, simulate_walk_replicate, RpwConfig,
    WalkState,
};
use crate::Result;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StructuralParams {
    pub horizon: u64,
    pub seed: u64,
}

impl StructuralParams {
    pub fn reference(seed: u64) -> Self {
        StructuralParams { horizon: 1_000, seed }
    }
}

/// Largest deviation between the walk recursion adapter and the direct
/// simulator over every time up to the horizon. Exactly zero when the two
/// code paths consume the draw protocol identically.
pub fn erw_adapter_deviation(cfg: &WalkConfig, replicate: u64) -> Result<f64> {
    let mut dense = cfg.clone();
    dense.checkpoints = (1..=cfg.horizon).collect();
    let walk = simulate_walk_replicate(&dense, replicate)?;
    let spec = erw_sa_spec_replicate(&dense, replicate)?;
    let traj = run_sa(spec, dense.horizon, &dense.checkpoints, false)?;
    let d = cfg.d;
    let mut worst = 0.0f64;
    for (k, &n) in dense.checkpoints.iter().enumerate() {
        let th = traj.theta_at(k);
        for j in 0..d {
            worst = worst.max((th[j] - walk.s_at(k)[j] as f64 / n as f64).abs());
            worst = worst.max((th[d + j] - walk.t_at(k)[j] / n as f64).abs());
        }
    }
    Ok(worst)
}

/// Same comparison for the urn recursion adapter against the centered urn.
pub fn rpw_adapter_deviation(cfg: &RpwConfig, replicate: u64) -> Result<f64> {
    let cks: Vec<u64> = (1..=cfg.horizon).collect();
    let path = simulate_rpw_replicate(cfg, &cks, replicate)?;
    let mean = rpw_mean_series(cfg.horizon, cfg)?;
    let spec = rpw_sa_spec_replicate(cfg, replicate)?;
    let traj = run_sa(spec, cfg.horizon, &cks, false)?;
    let w = path.w.as_ref().expect("urn path");
    let mut worst = 0.0f64;
    for (k, &n) in cks.iter().enumerate() {
        let direct = (w[k] as f64 - mean[n as usize - 1]) / n as f64;
        worst = worst.max((traj.theta_at(k)[0] - direct).abs());
    }
    Ok(worst)
}

/// Largest step index at which the history-backed walker disagrees with
/// the counts-based one (`None` when they agree everywhere).
pub fn history_walker_mismatch(
    d: usize,
    p: f64,
    horizon: u64,
    seed: u64,
) -> Option<u64> {
    let sched = MemorySchedule::constant(p);
    let law = StepSizeModel::TwoPoint { a: 1.0, b: 3.0, q: 0.5 };
    let mut fast = WalkState::new(d, StartRule::Uniform, seed, 0);
    let mut slow = HistoryWalker::new(d, StartRule::Uniform, seed, 0);
    for i in 0..horizon {
        let a = fast.step(sched.p_at(i + 1), &law);
        let b = slow.step(sched.p_at(i + 1), &law);
        if a.dir != b.dir || a.z.to_bits() != b.z.to_bits() {
            return Some(i + 1);
        }
    }
    (fast.s() != &slow.s[..]).then_some(horizon)
}

pub fn verify(params: &StructuralParams) -> Result<Outputs> {
    let mut checks = Vec::new();

    // recursion adapters, bit-exact
    let erw_cases = [
        WalkConfig::simple(1, 0.6, params.horizon, params.seed, 1),
        WalkConfig::simple(2, 0.85, params.horizon, params.seed + 1, 1)
            .with_steps(StepSizeModel::TwoPoint { a: 0.0, b: 2.0, q: 0.5 }),
    ];
    for (i, cfg) in erw_cases.iter().enumerate() {
        let dev = erw_adapter_deviation(cfg, 0)?;
        checks.push(
            Check::absolute(
                &format!("erw_adapter_max_deviation_{i}"),
                "recursion state equals S_n/n, T_n/n exactly",
                dev,
                0.0,
                0.0,
            )
            .with_note(format!("d = {}, horizon {}", cfg.d, cfg.horizon)),
        );
    }
    for (i, (w0, b0)) in [(0u64, 0u64), (1, 1)].into_iter().enumerate() {
        let cfg = RpwConfig {
            p_a: 0.9,
            p_b: 0.7,
            w0,
            b0,
            p0: 1.0,
            horizon: params.horizon,
            seed: params.seed + 2,
        };
        let dev = rpw_adapter_deviation(&cfg, 0)?;
        checks.push(Check::absolute(
            &format!("rpw_adapter_max_deviation_{i}"),
            "recursion state equals (W_n - E W_n)/n exactly",
            dev,
            0.0,
            0.0,
        ));
    }

    // counts-based walker against the full-history reference
    for (i, (d, p)) in [(1usize, 0.6), (2, 0.8), (3, 0.3)].into_iter().enumerate() {
        let mismatch = history_walker_mismatch(d, p, params.horizon, params.seed + 3);
        checks.push(Check::flag(
            &format!("history_walker_equivalence_{i}"),
            "direction counts are a sufficient statistic for the past-step choice",
            mismatch.is_none(),
        ));
    }

    // growth product against the log-gamma identity
    let mut worst_rel = 0.0f64;
    for p in [0.3, 0.6, 0.9] {
        let sched = MemorySchedule::constant(p);
        let rho = sched.rho_limit(1);
        let n = params.horizon;
        let got = gamma_product(2, n, &sched, 1)?;
        let oracle = (ln_gamma(n as f64 + 1.0 + rho) + ln_gamma(2.0)
            - ln_gamma(n as f64 + 1.0)
            - ln_gamma(2.0 + rho))
            .exp();
        worst_rel = worst_rel.max((got / oracle - 1.0).abs());
    }
    checks.push(Check::absolute(
        "gamma_product_identity",
        "prod (1 + rho/i) = Gamma(n+1+rho) Gamma(2) / (Gamma(n+1) Gamma(2+rho))",
        worst_rel,
        0.0,
        1e-10,
    ));

    // merge invariance of the streaming moments
    let mut rng = stream_rng(params.seed + 4, 0, Channel::Aux);
    let xs: Vec<[f64; 2]> = (0..5_000)
        .map(|_| {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            [2.0 * a, a + 0.5 * b]
        })
        .collect();
    let mut whole = MomentAccumulator::new(2);
    for x in &xs {
        whole.accumulate(x);
    }
    let mut parts = Vec::new();
    for w in [0usize, 123, 2400, 5000].windows(2) {
        let mut acc = MomentAccumulator::new(2);
        for x in &xs[w[0]..w[1]] {
            acc.accumulate(x);
        }
        parts.push(acc);
    }
    let merged = parts
        .into_iter()
        .reduce(|a, b| MomentAccumulator::merge(a, &b))
        .expect("three parts");
    let (mw, cw) = whole.finalize()?;
    let (mm, cm) = merged.finalize()?;
    let mut worst = 0.0f64;
    for (a, b) in mw.iter().zip(&mm) {
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    for (a, b) in cw.iter().zip(&cm) {
        worst = worst.max((a - b).abs() / b.abs().max(1.0));
    }
    checks.push(Check::absolute(
        "accumulator_merge_invariance",
        "merged moments equal whole-sample moments",
        worst,
        0.0,
        1e-10,
    ));

    // worker-count invariance of a full report
    let small = super::rpw::RpwParams {
        horizon: 2_000,
        replicates: 2_000,
        var_tolerance: 0.2,
        ..super::rpw::RpwParams::reference(params.seed + 5)
    };
    let r1 = with_workers(1, || super::rpw::verify_lln_clt(&small))?;
    let r2 = with_workers(2, || super::rpw::verify_lln_clt(&small))?;
    checks.push(Check::flag(
        "worker_count_invariance",
        "reports are byte-identical across worker counts (timestamp excluded)",
        r1.report.to_json_stable() == r2.report.to_json_stable(),
    ));

    let report = Report::new("structural", serde_json::to_value(params).expect("params"), checks);
    Ok(Outputs { report, tables: Vec::new() })
}
