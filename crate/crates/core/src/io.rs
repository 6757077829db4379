//! Path and grid emission: CSV for plotting, and a compact binary batch
//! format for large replicate sets.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! magic   4 bytes  "ERWB"
//! version u16      1
//! flags   u16      bit0 walk series (S/T/C), bit1 urn counts W, bit2 N_A
//! d       u32
//! n_checkpoints u64
//! n_replicates  u64
//! checkpoints   u64 * n_checkpoints
//! per replicate, checkpoint-major:
//!   S i64 * d, T f64 * d, C f64 * d   (if bit0)
//!   W u64                             (if bit1)
//!   NA u64                            (if bit2)
//! ```

use crate::walkers::WalkPath;
use crate::{ErwError, Result};
use std::io::{Read, Write};

pub const MAGIC: &[u8; 4] = b"ERWB";
pub const VERSION: u16 = 1;

const FLAG_WALK: u16 = 1;
const FLAG_W: u16 = 2;
const FLAG_NA: u16 = 4;

/// CSV with columns `replicate,checkpoint,S_1..S_d,T_1..T_d,C_1..C_d[,W][,NA]`.
/// Urn-only paths drop the walk columns.
pub fn write_walk_csv(out: &mut impl Write, paths: &[WalkPath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return Err(ErwError::Parameter("empty batch".into()));
    };
    let d = first.d;
    let has_walk = !first.s.is_empty();
    let has_w = first.w.is_some();
    let has_na = first.na.is_some();
    let mut header = String::from("replicate,checkpoint");
    if has_walk {
        for j in 1..=d {
            header.push_str(&format!(",S_{j}"));
        }
        for j in 1..=d {
            header.push_str(&format!(",T_{j}"));
        }
        for j in 1..=d {
            header.push_str(&format!(",C_{j}"));
        }
    }
    if has_w {
        header.push_str(",W");
    }
    if has_na {
        header.push_str(",NA");
    }
    writeln!(out, "{header}")?;
    for (rep, p) in paths.iter().enumerate() {
        check_same_shape(first, p)?;
        for (k, &n) in p.checkpoints.iter().enumerate() {
            let mut line = format!("{rep},{n}");
            if has_walk {
                for v in p.s_at(k) {
                    line.push_str(&format!(",{v}"));
                }
                for v in p.t_at(k) {
                    line.push_str(&format!(",{v}"));
                }
                for v in p.c_at(k) {
                    line.push_str(&format!(",{v}"));
                }
            }
            if let Some(w) = &p.w {
                line.push_str(&format!(",{}", w[k]));
            }
            if let Some(na) = &p.na {
                line.push_str(&format!(",{}", na[k]));
            }
            writeln!(out, "{line}")?;
        }
    }
    Ok(())
}

/// CSV with columns `time,theta_1..theta_dim` for a recursion trajectory.
pub fn write_sa_csv(out: &mut impl Write, traj: &crate::sa::SaTrajectory) -> Result<()> {
    let mut header = String::from("time");
    for j in 1..=traj.dim {
        header.push_str(&format!(",theta_{j}"));
    }
    writeln!(out, "{header}")?;
    for (k, &t) in traj.times.iter().enumerate() {
        let mut line = format!("{t}");
        for v in traj.theta_at(k) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// CSV with columns `time,v_1..v_d` for one sampled grid.
pub fn write_grid_csv(out: &mut impl Write, grid: &crate::gaussian::GaussianGrid) -> Result<()> {
    let mut header = String::from("time");
    for j in 1..=grid.d {
        header.push_str(&format!(",v_{j}"));
    }
    writeln!(out, "{header}")?;
    for (k, &t) in grid.times.iter().enumerate() {
        let mut line = format!("{t}");
        for v in grid.value_at(k) {
            line.push_str(&format!(",{v}"));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn check_same_shape(a: &WalkPath, b: &WalkPath) -> Result<()> {
    if a.d != b.d
        || a.checkpoints != b.checkpoints
        || a.s.is_empty() != b.s.is_empty()
        || a.w.is_some() != b.w.is_some()
        || a.na.is_some() != b.na.is_some()
    {
        return Err(ErwError::Parameter("paths in a batch must share shape".into()));
    }
    Ok(())
}

/// Serialize a batch of identically shaped paths.
pub fn write_walk_batch(out: &mut impl Write, paths: &[WalkPath]) -> Result<()> {
    let Some(first) = paths.first() else {
        return Err(ErwError::Parameter("empty batch".into()));
    };
    let has_walk = !first.s.is_empty();
    let mut flags = 0u16;
    if has_walk {
        flags |= FLAG_WALK;
    }
    if first.w.is_some() {
        flags |= FLAG_W;
    }
    if first.na.is_some() {
        flags |= FLAG_NA;
    }
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    out.write_all(&(first.d as u32).to_le_bytes())?;
    out.write_all(&(first.checkpoints.len() as u64).to_le_bytes())?;
    out.write_all(&(paths.len() as u64).to_le_bytes())?;
    for &c in &first.checkpoints {
        out.write_all(&c.to_le_bytes())?;
    }
    for p in paths {
        check_same_shape(first, p)?;
        for k in 0..p.checkpoints.len() {
            if has_walk {
                for v in p.s_at(k) {
                    out.write_all(&v.to_le_bytes())?;
                }
                for v in p.t_at(k) {
                    out.write_all(&v.to_le_bytes())?;
                }
                for v in p.c_at(k) {
                    out.write_all(&v.to_le_bytes())?;
                }
            }
            if let Some(w) = &p.w {
                out.write_all(&w[k].to_le_bytes())?;
            }
            if let Some(na) = &p.na {
                out.write_all(&na[k].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn read_exact<const N: usize>(input: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    input.read_exact(&mut buf)?;
    Ok(buf)
}

/// Read back a batch written by [`write_walk_batch`].
pub fn read_walk_batch(input: &mut impl Read) -> Result<Vec<WalkPath>> {
    let magic = read_exact::<4>(input)?;
    if &magic != MAGIC {
        return Err(ErwError::Parameter("bad magic".into()));
    }
    let version = u16::from_le_bytes(read_exact::<2>(input)?);
    if version != VERSION {
        return Err(ErwError::Parameter(format!("unsupported version {version}")));
    }
    let flags = u16::from_le_bytes(read_exact::<2>(input)?);
    let d = u32::from_le_bytes(read_exact::<4>(input)?) as usize;
    let n_ck = u64::from_le_bytes(read_exact::<8>(input)?) as usize;
    let n_rep = u64::from_le_bytes(read_exact::<8>(input)?) as usize;
    let mut checkpoints = Vec::with_capacity(n_ck);
    for _ in 0..n_ck {
        checkpoints.push(u64::from_le_bytes(read_exact::<8>(input)?));
    }
    let has_walk = flags & FLAG_WALK != 0;
    let has_w = flags & FLAG_W != 0;
    let has_na = flags & FLAG_NA != 0;
    let mut paths = Vec::with_capacity(n_rep);
    for _ in 0..n_rep {
        let mut p = WalkPath {
            d,
            checkpoints: checkpoints.clone(),
            s: Vec::new(),
            t: Vec::new(),
            c: Vec::new(),
            w: has_w.then(Vec::new),
            na: has_na.then(Vec::new),
        };
        for _ in 0..n_ck {
            if has_walk {
                for _ in 0..d {
                    p.s.push(i64::from_le_bytes(read_exact::<8>(input)?));
                }
                for _ in 0..d {
                    p.t.push(f64::from_le_bytes(read_exact::<8>(input)?));
                }
                for _ in 0..d {
                    p.c.push(f64::from_le_bytes(read_exact::<8>(input)?));
                }
            }
            if let Some(w) = p.w.as_mut() {
                w.push(u64::from_le_bytes(read_exact::<8>(input)?));
            }
            if let Some(na) = p.na.as_mut() {
                na.push(u64::from_le_bytes(read_exact::<8>(input)?));
            }
        }
        paths.push(p);
    }
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::WalkConfig;
    use crate::walkers::{simulate_rpw_replicate, simulate_walk_replicate, RpwConfig};

    #[test]
    fn walk_csv_shape() {
        let cfg = WalkConfig::simple(2, 0.6, 50, 1, 2).with_checkpoints(vec![10, 50]);
        let paths: Vec<_> = (0..2).map(|r| simulate_walk_replicate(&cfg, r).unwrap()).collect();
        let mut buf = Vec::new();
        write_walk_csv(&mut buf, &paths).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "replicate,checkpoint,S_1,S_2,T_1,T_2,C_1,C_2");
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(text.lines().nth(1).unwrap().starts_with("0,10,"));
    }

    #[test]
    fn urn_csv_shape() {
        let cfg = RpwConfig {
            p_a: 0.7,
            p_b: 0.5,
            w0: 1,
            b0: 1,
            p0: 0.5,
            horizon: 20,
            seed: 3,
        };
        let paths = vec![simulate_rpw_replicate(&cfg, &[10, 20], 0).unwrap()];
        let mut buf = Vec::new();
        write_walk_csv(&mut buf, &paths).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "replicate,checkpoint,W,NA");
    }

    #[test]
    fn binary_roundtrip_walk_and_urn() {
        let cfg = WalkConfig::simple(3, 0.8, 40, 9, 3)
            .with_steps(crate::model::StepSizeModel::Gaussian { mean: 0.5, var: 2.0 })
            .with_checkpoints(vec![1, 7, 40]);
        let paths: Vec<_> = (0..3).map(|r| simulate_walk_replicate(&cfg, r).unwrap()).collect();
        let mut buf = Vec::new();
        write_walk_batch(&mut buf, &paths).unwrap();
        assert_eq!(&buf[0..4], MAGIC);
        let back = read_walk_batch(&mut buf.as_slice()).unwrap();
        assert_eq!(paths, back);

        let ucfg = RpwConfig {
            p_a: 0.9,
            p_b: 0.4,
            w0: 0,
            b0: 0,
            p0: 1.0,
            horizon: 25,
            seed: 17,
        };
        let upaths: Vec<_> =
            (0..4).map(|r| simulate_rpw_replicate(&ucfg, &[5, 25], r).unwrap()).collect();
        let mut buf = Vec::new();
        write_walk_batch(&mut buf, &upaths).unwrap();
        let back = read_walk_batch(&mut buf.as_slice()).unwrap();
        assert_eq!(upaths, back);

        // corrupted magic is rejected
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_walk_batch(&mut bad.as_slice()).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_path(d: usize, n_ck: usize, urn: bool) -> impl Strategy<Value = WalkPath> {
            let cks: Vec<u64> = (1..=n_ck as u64).map(|k| 3 * k).collect();
            let walk_len = if urn { 0 } else { n_ck * d };
            (
                proptest::collection::vec(-50i64..50, walk_len),
                proptest::collection::vec(-1e6f64..1e6, walk_len),
                proptest::collection::vec(-1e6f64..1e6, walk_len),
                proptest::collection::vec(0u64..1000, if urn { n_ck } else { 0 }),
            )
                .prop_map(move |(s, t, c, w)| WalkPath {
                    d,
                    checkpoints: cks.clone(),
                    s,
                    t,
                    c,
                    w: urn.then(|| w.clone()),
                    na: urn.then(|| w),
                })
        }

        fn arb_batch() -> impl Strategy<Value = Vec<WalkPath>> {
            (1usize..4, 1usize..6, any::<bool>(), 1usize..4).prop_flat_map(
                |(d, n_ck, urn, reps)| proptest::collection::vec(arb_path(d, n_ck, urn), reps),
            )
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(32))]

            #[test]
            fn binary_roundtrip(paths in arb_batch()) {
                let mut buf = Vec::new();
                write_walk_batch(&mut buf, &paths).unwrap();
                let back = read_walk_batch(&mut buf.as_slice()).unwrap();
                prop_assert_eq!(paths, back);
            }
        }
    }

    #[test]
    fn grid_csv_shape() {
        let mut rng = crate::gaussian::batch_rng(1, 0);
        let g = crate::gaussian::sample_bm(&[0.5, 1.0], 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&mut buf, &g).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,v_1,v_2");
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn sa_csv_shape() {
        let cfg = WalkConfig::simple(1, 0.6, 20, 3, 1);
        let spec = crate::sa::erw_sa_spec(&cfg).unwrap();
        let traj = crate::sa::run_sa(spec, 20, &[10, 20], false).unwrap();
        let mut buf = Vec::new();
        write_sa_csv(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,theta_1,theta_2");
        assert_eq!(text.lines().count(), 3);
    }
}
