//! Verification experiments: each one runs a Monte Carlo (or exact)
//! comparison against the limit constants and returns a [`Report`].
//! Both the command-line driver and the acceptance suite call these.

pub mod asclt;
pub mod clt;
pub mod gaussians;
pub mod lil;
pub mod moments;
pub mod rpw;
pub mod smallball;
pub mod structural;
pub mod xi;

use crate::batch;
use crate::model::WalkConfig;
use crate::stats::MomentAccumulator;
use crate::walkers::{simulate_rpw_replicate, simulate_walk_replicate, RpwConfig, WalkPath};
use crate::Result;

/// Experiment outputs: the report plus named CSV tables.
pub struct Outputs {
    pub report: crate::report::Report,
    /// `(file name, CSV contents)` pairs.
    pub tables: Vec<(String, String)>,
}

/// Accumulate one extracted vector per walk replicate, deterministically
/// reduced over fixed chunks.
pub(crate) fn accumulate_walks(
    cfg: &WalkConfig,
    dim: usize,
    extract: impl Fn(&WalkPath) -> Vec<f64> + Sync,
) -> Result<MomentAccumulator> {
    cfg.validate()?;
    Ok(batch::reduce_chunks(
        cfg.replicates,
        batch::DEFAULT_CHUNK,
        |range| {
            let mut acc = MomentAccumulator::new(dim);
            for rep in range {
                let path = simulate_walk_replicate(cfg, rep).expect("validated config");
                acc.accumulate(&extract(&path));
            }
            acc
        },
        |a, b| MomentAccumulator::merge(a, &b),
    )
    .expect("at least one replicate"))
}

/// Collect one scalar per walk replicate, in replicate order.
pub(crate) fn collect_walk_samples(
    cfg: &WalkConfig,
    extract: impl Fn(&WalkPath) -> f64 + Sync,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    Ok(batch::reduce_chunks(
        cfg.replicates,
        batch::DEFAULT_CHUNK,
        |range| {
            let mut out = Vec::with_capacity((range.end - range.start) as usize);
            for rep in range {
                let path = simulate_walk_replicate(cfg, rep).expect("validated config");
                out.push(extract(&path));
            }
            out
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .expect("at least one replicate"))
}

/// Collect full walk paths, in replicate order.
pub(crate) fn collect_walk_paths(cfg: &WalkConfig) -> Result<Vec<WalkPath>> {
    cfg.validate()?;
    Ok(batch::reduce_chunks(
        cfg.replicates,
        batch::DEFAULT_CHUNK,
        |range| {
            range
                .map(|rep| simulate_walk_replicate(cfg, rep).expect("validated config"))
                .collect::<Vec<_>>()
        },
        |mut a, b| {
            a.extend(b);
            a
        },
    )
    .expect("at least one replicate"))
}

/// Accumulate one extracted vector per urn replicate.
pub(crate) fn accumulate_urns(
    cfg: &RpwConfig,
    checkpoints: &[u64],
    replicates: u64,
    dim: usize,
    extract: impl Fn(&WalkPath) -> Vec<f64> + Sync,
) -> Result<MomentAccumulator> {
    cfg.validate()?;
    Ok(batch::reduce_chunks(
        replicates,
        batch::DEFAULT_CHUNK,
        |range| {
            let mut acc = MomentAccumulator::new(dim);
            for rep in range {
                let path =
                    simulate_rpw_replicate(cfg, checkpoints, rep).expect("validated config");
                acc.accumulate(&extract(&path));
            }
            acc
        },
        |a, b| MomentAccumulator::merge(a, &b),
    )
    .expect("at least one replicate"))
}
