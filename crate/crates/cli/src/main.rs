//! Command-line driver: simulate walk and urn batches, print limit
//! constants, and run the verification suites.
//!
//! Exit codes: 0 when every check passed, 1 on failed checks or runtime
//! errors, 2 on configuration errors.

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use erw_core::experiments::{self, Outputs};
use erw_core::model::{MemorySchedule, StepSizeModel, WalkConfig};
use erw_core::walkers::RpwConfig;
use erw_core::{batch, io, theory, ErwError};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "erw", version, about = "Reinforced-walk and play-the-winner simulation toolkit")]
struct Cli {
    /// Output directory for reports and tables.
    #[arg(long, default_value = "erw-out", global = true)]
    out: PathBuf,
    /// Master seed for all randomness.
    #[arg(long, default_value_t = 20_240, global = true)]
    seed: u64,
    /// Worker threads (0 = library default).
    #[arg(long, default_value_t = 0, global = true)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate walk replicates from a JSON config file.
    Simulate(SimulateArgs),
    /// Simulate play-the-winner urn replicates, or verify the urn limits.
    Rpw(RpwArgs),
    /// Print limit constants for a parameter set as JSON.
    Theory(TheoryArgs),
    /// Verify central-limit behavior: position variance and KS tests,
    /// joint covariance, center of mass, or the Gaussian samplers.
    VerifyClt(VerifyCltArgs),
    /// Iterated-logarithm diagnostic over a path batch.
    VerifyLil(VerifyLilArgs),
    /// Small-ball constants: Brownian oracle fit, mixed-process fit, and
    /// the integrated-Brownian bracket.
    VerifyChungSmallball(SmallballArgs),
    /// Almost-sure CLT: logarithmic averages along a single path.
    VerifyAsclt(AscltArgs),
    /// Estimate the superdiffusive limit and its moments.
    EstimateXi(XiArgs),
    /// Exact structural checks: recursion adapters, history-walker
    /// equivalence, growth-product identity, merge and worker invariance.
    SaCheck(SaCheckArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file ({d, schedule, steps, horizon, checkpoints, seed, replicates}).
    #[arg(long)]
    config: PathBuf,
    /// Override config keys, e.g. -O horizon=5000 -O schedule.p=0.7
    #[arg(short = 'O', long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Also write the compact binary batch.
    #[arg(long)]
    binary: bool,
}

#[derive(Args)]
struct RpwArgs {
    #[arg(long, default_value_t = 0.7)]
    pa: f64,
    #[arg(long, default_value_t = 0.5)]
    pb: f64,
    #[arg(long, default_value_t = 1)]
    w0: u64,
    #[arg(long, default_value_t = 1)]
    b0: u64,
    #[arg(long, default_value_t = 0.5)]
    p0: f64,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 100)]
    replicates: u64,
    /// Run the law-of-large-numbers and CLT verification instead of
    /// emitting paths.
    #[arg(long)]
    verify: bool,
    /// Verify the signed-walk mapping (forces the empty-urn start).
    #[arg(long)]
    verify_mapping: bool,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0.6)]
    p: f64,
    /// Step-size law: constant:c | two_point:a,b,q | gaussian:m,v | uniform:a,b
    #[arg(long, default_value = "constant:1")]
    z: String,
    /// Also print urn constants for these response probabilities.
    #[arg(long)]
    pa: Option<f64>,
    #[arg(long)]
    pb: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum CltMode {
    Position,
    Joint,
    Center,
    Samplers,
}

#[derive(Args)]
struct VerifyCltArgs {
    #[arg(long, value_enum, default_value_t = CltMode::Position)]
    mode: CltMode,
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0.6)]
    p: f64,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    replicates: Option<u64>,
    /// Seed repetitions for the KS part (position mode only).
    #[arg(long, default_value_t = 20)]
    ks_reps: u64,
}

#[derive(Args)]
struct VerifyLilArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
    #[arg(long, default_value_t = 1_000)]
    paths: u64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SmallballPart {
    Bm,
    Mixture,
    Kappa,
    All,
}

#[derive(Args)]
struct SmallballArgs {
    #[arg(long, value_enum, default_value_t = SmallballPart::All)]
    part: SmallballPart,
    /// Trials per epsilon for the Monte Carlo parts.
    #[arg(long)]
    trials: Option<u64>,
}

#[derive(Args)]
struct AscltArgs {
    #[arg(long, default_value_t = 0.6)]
    p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    horizon: u64,
}

#[derive(Args)]
struct XiArgs {
    #[arg(long, default_value_t = 1)]
    d: usize,
    #[arg(long, default_value_t = 0.9)]
    p: f64,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
}

#[derive(Args)]
struct SaCheckArgs {
    #[arg(long, default_value_t = 1_000)]
    n: u64,
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<ErwError>() {
                Some(ErwError::Config(_)) => 2,
                _ => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating output directory {}", cli.out.display()))?;
    let out = cli.out.clone();
    let seed = cli.seed;
    batch::with_workers(cli.workers, move || dispatch(&out, seed, cli.command))
}

fn dispatch(out: &Path, seed: u64, command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Simulate(args) => simulate(out, &args),
        Command::Rpw(args) => rpw(out, seed, &args),
        Command::Theory(args) => theory_cmd(out, &args),
        Command::VerifyClt(args) => {
            let outputs = match args.mode {
                CltMode::Position => {
                    let mut params = if args.p == 0.75 && args.d == 1 {
                        experiments::clt::CltParams::critical(seed)
                    } else {
                        experiments::clt::CltParams::diffusive(seed)
                    };
                    params.d = args.d;
                    params.p = args.p;
                    params.ks_repetitions = args.ks_reps;
                    if let Some(h) = args.horizon {
                        params.horizon = h;
                    }
                    if let Some(r) = args.replicates {
                        params.replicates = r;
                    }
                    experiments::clt::verify(&params)?
                }
                CltMode::Joint => {
                    let mut params = experiments::moments::JointCovParams::reference(seed);
                    params.d = args.d.max(1);
                    params.p = args.p;
                    if let Some(h) = args.horizon {
                        params.horizon = h;
                    }
                    if let Some(r) = args.replicates {
                        params.replicates = r;
                    }
                    experiments::moments::verify_joint_covariance(&params)?
                }
                CltMode::Center => {
                    let mut params = experiments::moments::CenterOfMassParams::reference(seed);
                    params.d = args.d;
                    params.p = args.p;
                    if let Some(h) = args.horizon {
                        params.horizon = h;
                    }
                    if let Some(r) = args.replicates {
                        params.replicates = r;
                    }
                    experiments::moments::verify_center_of_mass(&params)?
                }
                CltMode::Samplers => {
                    let mut params = experiments::gaussians::GaussianParams::reference(seed);
                    if let Some(r) = args.replicates {
                        params.draws = r;
                    }
                    experiments::gaussians::verify(&params)?
                }
            };
            finish(out, outputs)
        }
        Command::VerifyLil(args) => {
            let mut params = experiments::lil::LilParams::reference(seed);
            params.d = args.d;
            params.p = args.p;
            params.horizon = args.horizon;
            params.paths = args.paths;
            if params.p != 0.5 || params.d != 1 {
                params.ratio_band = None; // band calibrated on the simple walk only
            }
            finish(out, experiments::lil::verify(&params)?)
        }
        Command::VerifyChungSmallball(args) => {
            let mut all = Vec::new();
            if matches!(args.part, SmallballPart::Bm | SmallballPart::All) {
                all.push(experiments::smallball::verify_bm_oracle_fit()?);
            }
            if matches!(args.part, SmallballPart::Mixture | SmallballPart::All) {
                let mut params = experiments::smallball::MixtureFitParams::reference(seed);
                if let Some(t) = args.trials {
                    params.trials = t;
                }
                all.push(experiments::smallball::verify_mixture_fit(&params)?);
            }
            if matches!(args.part, SmallballPart::Kappa | SmallballPart::All) {
                let mut params = experiments::smallball::KappaParams::reference(seed);
                if let Some(t) = args.trials {
                    params.trials = t;
                }
                all.push(experiments::smallball::verify_kappa_bracket(&params)?);
            }
            finish_many(out, all)
        }
        Command::VerifyAsclt(args) => {
            let mut params = experiments::asclt::AsCltParams::reference(seed);
            params.p = args.p;
            params.horizon = args.horizon;
            finish(out, experiments::asclt::verify(&params)?)
        }
        Command::EstimateXi(args) => {
            let mut params = experiments::xi::XiParams::reference(seed);
            params.d = args.d;
            params.p = args.p;
            params.horizon = args.horizon;
            params.paths = args.paths;
            finish(out, experiments::xi::verify(&params)?)
        }
        Command::SaCheck(args) => {
            let params = experiments::structural::StructuralParams { horizon: args.n, seed };
            finish(out, experiments::structural::verify(&params)?)
        }
    }
}

fn simulate(out: &Path, args: &SimulateArgs) -> anyhow::Result<i32> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| ErwError::Config(format!("reading {}: {e}", args.config.display())))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| ErwError::Config(format!("config parse: {e}")))?;
    for ov in &args.overrides {
        apply_override(&mut doc, ov)?;
    }
    let cfg = WalkConfig::from_json(&doc.to_string())?;
    let paths: Vec<_> = (0..cfg.replicates)
        .map(|r| erw_core::walkers::simulate_walk_replicate(&cfg, r))
        .collect::<erw_core::Result<_>>()?;
    let mut csv = Vec::new();
    io::write_walk_csv(&mut csv, &paths)?;
    fs::write(out.join("paths.csv"), csv)?;
    if args.binary {
        let mut bin = Vec::new();
        io::write_walk_batch(&mut bin, &paths)?;
        fs::write(out.join("paths.bin"), bin)?;
    }
    println!("wrote {} paths to {}", paths.len(), out.display());
    Ok(0)
}

fn rpw(out: &Path, seed: u64, args: &RpwArgs) -> anyhow::Result<i32> {
    if args.verify {
        let mut params = experiments::rpw::RpwParams::reference(seed);
        params.p_a = args.pa;
        params.p_b = args.pb;
        params.w0 = args.w0;
        params.b0 = args.b0;
        params.p0 = args.p0;
        params.horizon = args.horizon;
        params.replicates = args.replicates.max(1_000);
        return finish(out, experiments::rpw::verify_lln_clt(&params)?);
    }
    if args.verify_mapping {
        let mut params = experiments::rpw::MappingParams::reference(seed);
        params.p = args.pa;
        params.horizon = args.horizon.min(100_000);
        return finish(out, experiments::rpw::verify_mapping(&params)?);
    }
    let cfg = RpwConfig {
        p_a: args.pa,
        p_b: args.pb,
        w0: args.w0,
        b0: args.b0,
        p0: args.p0,
        horizon: args.horizon,
        seed,
    };
    let cks = WalkConfig::geometric_checkpoints(args.horizon, 40);
    let paths: Vec<_> = (0..args.replicates)
        .map(|r| erw_core::walkers::simulate_rpw_replicate(&cfg, &cks, r))
        .collect::<erw_core::Result<_>>()?;
    let mut csv = Vec::new();
    io::write_walk_csv(&mut csv, &paths)?;
    fs::write(out.join("urn_paths.csv"), csv)?;
    println!("wrote {} urn paths to {}", paths.len(), out.display());
    Ok(0)
}

fn parse_step_law(text: &str) -> anyhow::Result<StepSizeModel> {
    let bad = || ErwError::Config(format!("cannot parse step law '{text}'"));
    let (kind, rest) = text.split_once(':').ok_or_else(bad)?;
    let nums: Vec<f64> =
        rest.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|_| bad())?;
    let law = match (kind, nums.as_slice()) {
        ("constant", [c]) => StepSizeModel::Constant { c: *c },
        ("two_point", [a, b, q]) => StepSizeModel::TwoPoint { a: *a, b: *b, q: *q },
        ("gaussian", [m, v]) => StepSizeModel::Gaussian { mean: *m, var: *v },
        ("uniform", [a, b]) => StepSizeModel::Uniform { a: *a, b: *b },
        _ => return Err(bad().into()),
    };
    law.validate()?;
    Ok(law)
}

fn theory_cmd(out: &Path, args: &TheoryArgs) -> anyhow::Result<i32> {
    let z = parse_step_law(&args.z)?;
    let schedule = MemorySchedule::constant(args.p);
    let regime = erw_core::model::regime_classify(&schedule, args.d)?;
    let mu = z.mean();
    let sigma = z.variance().sqrt();
    let inputs = serde_json::json!({"d": args.d, "p": args.p, "z": z});
    let mut entries = Vec::new();
    let mut push = |name: &str, value: serde_json::Value, formula: &str| {
        entries.push(serde_json::json!({
            "name": name, "inputs": inputs.clone(), "value": value, "formula": formula,
        }));
    };
    push("rho", regime.rho.into(), "(2dp-1)/(2d-1)");
    push("critical_p", regime.critical_p.into(), "(2d+1)/(4d)");
    push("regime", serde_json::to_value(regime.regime)?, "rho versus 1/2");
    push("normalization", serde_json::to_value(&regime.normalization)?, "by regime");
    match regime.regime {
        erw_core::model::Regime::Critical => {
            let ts = theory::cov_ts_critical(mu, args.d);
            let tc = theory::cov_tc_critical(mu, args.d);
            push("cov_position_stepsum", serde_json::to_value(&ts)?, "((1,mu),(mu,mu^2)) (x) I_d/d");
            push(
                "cov_stepsum_center",
                serde_json::to_value(&tc)?,
                "mu^2 ((1,2/3),(2/3,4/9)) (x) I_d/d",
            );
            let l = theory::lil_constants_critical(mu, args.d);
            push("lil_position", l.lil_t.into(), "|mu|/sqrt(d) under sqrt(2n log n logloglog n)");
            push("lil_center", l.lil_c.into(), "2|mu|/(3 sqrt(d))");
        }
        _ => {
            let ts = theory::cov_ts(regime.rho, mu, sigma, args.d)?;
            let tc = theory::cov_tc(regime.rho, mu, sigma, args.d)?;
            push(
                "cov_position_stepsum",
                serde_json::to_value(&ts)?,
                "((1,mu),(mu,sigma^2+mu^2/gap))/gap... base (x) I_d/d with gap = |1-2rho|",
            );
            push("cov_stepsum_center", serde_json::to_value(&tc)?, "center-of-mass block");
            let l = theory::lil_constants(regime.rho, mu, sigma, args.d)?;
            push("lil_position", l.lil_t.into(), "sqrt(sigma^2/d + mu^2/(d|1-2rho|))");
            push("lil_center", l.lil_c.into(), "sqrt(sigma^2/(3d) + 2mu^2/(3d|1-2rho| shift))");
            if regime.rho > 0.5 {
                push(
                    "xi_second_moment",
                    theory::xi_second_moment(regime.rho, args.d)?.into(),
                    "1/(d(2rho-1)Gamma(2rho))",
                );
                push(
                    "growth_product_limit",
                    theory::gamma_product_limit_constant(regime.rho).into(),
                    "lim gamma_{2,n-1}/n^rho = 1/Gamma(2+rho)",
                );
            }
        }
    }
    let chung = theory::chung_constants(args.d, z.second_moment(), theory::KappaInput::Bracket)?;
    push("bessel_smallest_zero", chung.j_nu.into(), "first positive zero of J_{(d-2)/2}");
    push("chung_position", chung.chung_t.into(), "j_nu sqrt(E Z^2/(2d))");
    push(
        "chung_center_bracket",
        serde_json::json!([chung.chung_c_lo, chung.chung_c_hi]),
        "(3 kappa_d)^(3/2) sqrt(E Z^2/d), kappa_d in its proven bracket",
    );
    if let (Some(pa), Some(pb)) = (args.pa, args.pb) {
        let urn_inputs = serde_json::json!({"p_a": pa, "p_b": pb});
        let v = (1.0 - pb) / ((1.0 - pa) + (1.0 - pb));
        entries.push(serde_json::json!({
            "name": "urn_limit_fraction", "inputs": urn_inputs.clone(), "value": v,
            "formula": "q_B/(q_A+q_B)",
        }));
        entries.push(serde_json::json!({
            "name": "urn_clt_variance", "inputs": urn_inputs,
            "value": serde_json::to_value(theory::rpw_clt_variance(pa, pb)?)?,
            "formula": "q_A q_B/((q_A+q_B)^2(2(q_A+q_B)-1)) below the critical sum",
        }));
    }
    let text = serde_json::to_string_pretty(&entries)?;
    println!("{text}");
    fs::write(out.join("theory.json"), text)?;
    Ok(0)
}

fn apply_override(doc: &mut serde_json::Value, spec: &str) -> anyhow::Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| ErwError::Config(format!("override '{spec}' is not KEY=VALUE")))?;
    let value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| ErwError::Config(format!("override path '{path}' is not an object")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert(serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

fn finish(out: &Path, outputs: Outputs) -> anyhow::Result<i32> {
    finish_many(out, vec![outputs])
}

fn finish_many(out: &Path, all: Vec<Outputs>) -> anyhow::Result<i32> {
    let tables_dir = out.join("tables");
    fs::create_dir_all(&tables_dir)?;
    let mut pass = true;
    let mut reports = Vec::new();
    for o in &all {
        print!("{}", o.report.summary_lines());
        pass &= o.report.pass;
        for (name, content) in &o.tables {
            fs::write(tables_dir.join(name), content)?;
        }
        reports.push(serde_json::to_value(&o.report)?);
    }
    let doc = if reports.len() == 1 {
        reports.pop().expect("one report")
    } else {
        serde_json::Value::Array(reports)
    };
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&doc)?)?;
    println!("report written to {}", out.join("report.json").display());
    Ok(if pass { 0 } else { 1 })
}
