use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_bigint::BigInt;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use iet3::cf::ContinuedFraction;
use iet3::circle::{self, psi_partition, return_partition, return_interval};
use iet3::dioph::{check_assumptions, CheckConfig};
use iet3::field::FieldElement as Fe;
use iet3::iet::IetSystem;
use iet3::mobius::{correlation_sum, cutoff_for_tau, mobius_sieve, tk_stats};
use iet3::renorm::{geodesic_profile, vertical_approach, window_stats, window_spread};
use iet3::rng::{task_rng, unit_points};
use iet3::witness::{run_pipeline, PipelineConfig};
use iet3::{appb, suite};

#[derive(Parser, Serialize)]
#[command(name = "iet3", version, about = "Exact experiments on 3-interval exchanges induced from circle rotations")]
struct Cli {
    /// rotation number as periodic continued fraction digits "pre:period", e.g. ":1" or "1,1:20,20,8"
    #[arg(long, global = true, conflicts_with = "alpha")]
    alpha_cf: Option<String>,
    /// rotation number as an exact string "(a+b*sqrt(d))/c"
    #[arg(long, global = true)]
    alpha: Option<String>,
    /// right end of the inducing interval [0, z)
    #[arg(long, global = true, default_value = "7/10")]
    z: String,
    /// continued fraction digits to expand
    #[arg(long, global = true, default_value_t = 80)]
    depth: usize,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// output directory
    #[arg(long, global = true, env = "IET3_OUT", default_value = "iet3-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Serialize)]
enum Command {
    /// digits, convergents and norms
    Cf {
        #[arg(long, default_value_t = 20)]
        k_max: usize,
    },
    /// gap audits, hit counts and return partitions
    Orbit(OrbitArgs),
    /// level sets of the visit count over [0, z)
    Psi {
        #[arg(long)]
        length: u64,
    },
    /// length conversions and the induced-map identity
    Iet {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000")]
        times: Vec<u64>,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
    /// sieve, correlation sums and the variance inequality
    Mobius(MobiusArgs),
    /// lattice-flow profiles, window statistics and vertical approach
    Renorm(RenormArgs),
    /// the assumption report
    Assumptions(AssumptionArgs),
    /// the witness pipeline for each length
    Witness(WitnessArgs),
    /// patterned pair, witness sets and empirical disjointness
    Appb(AppbArgs),
    /// run the twelve acceptance checks
    VerifyAll,
}

#[derive(Args, Serialize)]
struct OrbitArgs {
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    #[arg(long, default_value_t = 10)]
    points: usize,
    #[arg(long, default_value_t = 12)]
    return_k_max: usize,
}

#[derive(Args, Serialize)]
struct MobiusArgs {
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    /// starting point of the orbit
    #[arg(long, default_value = "1/7")]
    x0: String,
    /// frequency of the mean-zero cosine observable
    #[arg(long, default_value_t = 1.0)]
    freq: f64,
    /// prime cutoff for the variance check; overrides --tau
    #[arg(long)]
    cutoff: Option<u64>,
    #[arg(long, default_value_t = 0.25)]
    tau: f64,
    #[arg(long, default_value_t = 100_000)]
    tk_n: u64,
}

#[derive(Args, Serialize)]
struct RenormArgs {
    #[arg(long, default_value_t = 12.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    #[arg(long, default_value_t = 2)]
    k_min: usize,
    #[arg(long, default_value_t = 25)]
    k_max: usize,
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.95")]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    approach_k: usize,
    #[arg(long, default_value_t = 10_000)]
    horizon: u64,
}

#[derive(Args, Serialize)]
struct AssumptionArgs {
    #[arg(long, default_value = "1/2400")]
    eta: String,
    #[arg(long, default_value_t = 2)]
    ell: usize,
    #[arg(long, default_value = "1/5")]
    c: String,
    #[arg(long, default_value_t = 1)]
    k_min: usize,
    #[arg(long, default_value_t = 15)]
    k_max: usize,
    #[arg(long, default_value_t = 5)]
    witnesses: usize,
    #[arg(long, default_value = "1/1000")]
    threshold: String,
}

#[derive(Args, Serialize)]
struct WitnessArgs {
    #[arg(long, value_delimiter = ',', default_value = "55,233,987")]
    lengths: Vec<u64>,
    #[arg(long, default_value_t = 5)]
    n: u64,
    #[arg(long, default_value_t = 3)]
    m: u64,
    #[arg(long, default_value_t = 2)]
    m_prime: u64,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 10_000)]
    hitting_n: u64,
    #[arg(long, default_value_t = 20)]
    hitting_starts: usize,
    #[arg(long, default_value_t = 16)]
    c_hat: u64,
}

#[derive(Args, Serialize)]
struct AppbArgs {
    #[arg(long, default_value_t = 2)]
    m: u64,
    #[arg(long, default_value_t = 1)]
    n: u64,
    /// orbit length for the empirical disjointness average
    #[arg(long, default_value_t = 100_000)]
    orbit_n: usize,
}

/// Bad input (exit 2) versus a check that ran and failed (exit 1).
enum Failure {
    Config(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("iet3: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    fs::create_dir_all(&cli.out)?;
    write_json(&cli.out, "config.json", &serde_json::to_value(cli)?)?;
    match &cli.command {
        Command::Cf { k_max } => cmd_cf(cli, *k_max),
        Command::Orbit(a) => cmd_orbit(cli, a),
        Command::Psi { length } => cmd_psi(cli, *length),
        Command::Iet { times, points } => cmd_iet(cli, times, *points),
        Command::Mobius(a) => cmd_mobius(cli, a),
        Command::Renorm(a) => cmd_renorm(cli, a),
        Command::Assumptions(a) => cmd_assumptions(cli, a),
        Command::Witness(a) => cmd_witness(cli, a),
        Command::Appb(a) => cmd_appb(cli, a),
        Command::VerifyAll => cmd_verify(cli),
    }
}

fn parse_digits(s: &str) -> Result<Vec<u64>, Failure> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|_| Failure::Config(format!("bad digit {t:?}"))))
        .collect()
}

fn rotation(cli: &Cli) -> Result<ContinuedFraction, Failure> {
    match (&cli.alpha_cf, &cli.alpha) {
        (Some(cf_digits), _) => {
            let (pre, period) =
                cf_digits.split_once(':').ok_or_else(|| Failure::Config(format!("expected \"pre:period\", got {cf_digits:?}")))?;
            Ok(ContinuedFraction::periodic(&parse_digits(pre)?, &parse_digits(period)?, cli.depth)?)
        }
        (None, Some(a)) => Ok(ContinuedFraction::new(a.parse()?, cli.depth)?),
        (None, None) => Ok(ContinuedFraction::golden(cli.depth)),
    }
}

fn system(cli: &Cli) -> Result<IetSystem, Failure> {
    let z: Fe = cli.z.parse()?;
    Ok(IetSystem::new(rotation(cli)?, z)?)
}

fn write_json(dir: &Path, name: &str, v: &Value) -> Result<(), Failure> {
    fs::write(dir.join(name), serde_json::to_string_pretty(v)? + "\n")?;
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    fs::write(dir.join(name), s)?;
    Ok(())
}

fn exact(x: &Fe) -> Value {
    json!({"exact": x.exact_string(), "decimal": x.decimal17()})
}

fn report(name: &str, ok: bool) -> Outcome {
    println!("{name}: {}", if ok { "pass" } else { "FAIL" });
    Ok(ok)
}

fn cmd_cf(cli: &Cli, k_max: usize) -> Outcome {
    let cf = rotation(cli)?;
    let k_max = k_max.min(cf.max_index().saturating_sub(1));
    let mut rows = Vec::new();
    let mut ok = true;
    for k in 0..=k_max {
        let beta = cf.beta(k);
        let (lo, hi) = cf.sandwich(k);
        ok &= lo && hi;
        rows.push(vec![
            k.to_string(),
            cf.a(k).to_string(),
            cf.p(k).to_string(),
            cf.q(k).to_string(),
            beta.exact_string(),
            beta.decimal17(),
            (lo && hi).to_string(),
        ]);
    }
    write_csv(&cli.out, "cf.csv", "k,a_k,p_k,q_k,norm_exact,norm_decimal,sandwich", rows)?;
    write_json(
        &cli.out,
        "cf.json",
        &json!({
            "alpha": exact(cf.alpha()),
            "digits": &cf.digits()[..k_max.min(cf.digits().len())],
            "terminated": cf.terminated(),
        }),
    )?;
    report("sandwich", ok)
}

fn cmd_orbit(cli: &Cli, a: &OrbitArgs) -> Outcome {
    let sys = system(cli)?;
    let cf = sys.cf();
    let k_max = a.k_max.min(cf.max_index());
    let mut gap_rows = Vec::new();
    let mut ok = true;
    for k in 1..=k_max {
        let (mn, mx) = circle::gap_audit(&Fe::zero(), k, cf)?;
        let b = cf.beta(k - 1);
        let good = mx <= b.mul_int(&BigInt::from(2)) && mn >= b;
        ok &= good;
        gap_rows.push(vec![k.to_string(), cf.q(k).to_string(), mn.exact_string(), mx.exact_string(), good.to_string()]);
    }
    write_csv(&cli.out, "gaps.csv", "k,points,min_gap,max_gap,within_bounds", gap_rows)?;

    let xs = unit_points(&mut task_rng(cli.seed, "orbit", 0), a.points, 9973);
    let z = sys.z();
    let mut hit_rows = Vec::new();
    for (i, x) in xs.iter().enumerate() {
        for k in 1..=k_max {
            let hits = circle::hit_count(x, sys.j(), cf.q_u64(k), cf);
            let dev = Fe::integer(hits) - z.mul_int(cf.q(k));
            ok &= dev.abs() <= Fe::integer(2);
            hit_rows.push(vec![i.to_string(), x.exact_string(), k.to_string(), hits.to_string(), dev.decimal17()]);
        }
    }
    write_csv(&cli.out, "hits.csv", "point,x,k,hits,deviation", hit_rows)?;

    let mut ret = Vec::new();
    for k in 1..=a.return_k_max.min(cf.max_index() - 2) {
        let p = return_partition(&return_interval(k, cf), cf)?;
        let (short, long) = (cf.q_u64(k + 1), cf.q_u64(k + 1) + cf.q_u64(k));
        ok &= p.times().iter().all(|t| *t == short || *t == long) && p.kac_sum() == Fe::one();
        let pieces: BTreeMap<String, String> =
            p.pieces.iter().map(|(t, u)| (t.to_string(), u.measure().exact_string())).collect();
        ret.push(json!({"k": k, "times": p.times(), "measures": pieces, "long_end": format!("{:?}", circle::long_piece_end(&p))}));
    }
    write_json(&cli.out, "returns.json", &Value::Array(ret))?;
    report("orbit", ok)
}

fn cmd_psi(cli: &Cli, length: u64) -> Outcome {
    let sys = system(cli)?;
    let psi = psi_partition(length, sys.j(), sys.cf())?;
    let rows = psi.csv_rows().into_iter().map(|r| r.to_vec());
    write_csv(&cli.out, "psi.csv", "level,left_exact,right_exact,left_decimal,right_decimal,measure_decimal", rows)?;
    let levels: BTreeMap<String, Value> = psi.level_measures().iter().map(|(k, v)| (k.to_string(), exact(v))).collect();
    write_json(&cli.out, "psi.json", &json!({"length": length, "cells": psi.cell_count(), "levels": levels}))?;
    Ok(true)
}

fn cmd_iet(cli: &Cli, times: &[u64], points: usize) -> Outcome {
    let sys = system(cli)?;
    let xs = unit_points(&mut task_rng(cli.seed, "iet", 0), points, 9973);
    let mut rows = Vec::new();
    let mut ok = true;
    for &m in times {
        for x in &xs {
            let r = sys.induced_identity_check(x, m);
            ok &= r != Some(false);
            rows.push(vec![
                x.exact_string(),
                m.to_string(),
                r.map_or("not applicable".to_string(), |b| b.to_string()),
            ]);
        }
    }
    write_csv(&cli.out, "identity.csv", "x,M,holds", rows)?;
    write_json(&cli.out, "iet.json", &sys.to_json())?;
    report("identity", ok)
}

fn cmd_mobius(cli: &Cli, a: &MobiusArgs) -> Outcome {
    let sys = system(cli)?;
    let x0: Fe = a.x0.parse()?;
    let f = appb::mean_zero_cosine(sys.z().to_f64(), a.freq);
    let samples: Vec<f64> = sys.fast_orbit(&x0, a.n).into_iter().map(f).collect();
    let table = mobius_sieve(a.n.max(a.tk_n as usize))?;
    let corr = correlation_sum(&samples, &table)?;
    write_csv(
        &cli.out,
        "correlation.csv",
        "n,partial_sum,normalized",
        corr.checkpoints.iter().map(|c| vec![c.n.to_string(), format!("{:e}", c.partial_sum), format!("{:e}", c.normalized)]),
    )?;
    let cutoff = a.cutoff.unwrap_or_else(|| cutoff_for_tau(a.tau));
    let tk = tk_stats(a.tk_n, cutoff)?;
    write_json(
        &cli.out,
        "mobius.json",
        &json!({"correlation": corr, "mertens": table.mertens(a.n), "turan_kubilius": tk.to_json()}),
    )?;
    report("variance inequality", tk.holds())
}

fn cmd_renorm(cli: &Cli, a: &RenormArgs) -> Outcome {
    let cf = rotation(cli)?;
    let z: Fe = cli.z.parse()?;
    let profile = geodesic_profile(&cf, &z, a.t_max, a.step)?;
    write_csv(
        &cli.out,
        "profile.csv",
        "t,systole,marked_separation,f_of_t",
        profile.iter().map(|r| vec![r.t.to_string(), r.systole.to_string(), r.marked_separation.to_string(), r.f_of_t.to_string()]),
    )?;
    let rows = window_stats(&cf, &z, a.k_min..=a.k_max, &a.deltas, a.step)?;
    let spreads: Vec<f64> = (0..a.deltas.len()).map(|i| window_spread(&rows, i)).collect();
    let approach = vertical_approach(&cf, &z, a.approach_k, a.horizon)?;
    write_json(
        &cli.out,
        "renorm.json",
        &json!({"windows": rows, "deltas": a.deltas, "spreads": spreads, "approach": approach, "approach_margin": approach.margin(&cf)}),
    )?;
    Ok(true)
}

fn cmd_assumptions(cli: &Cli, a: &AssumptionArgs) -> Outcome {
    let sys = system(cli)?;
    let config = CheckConfig {
        eta: a.eta.parse()?,
        ell: a.ell,
        c: a.c.parse()?,
        k_min: a.k_min,
        k_max: a.k_max,
        witness_count: a.witnesses,
        a6_threshold: a.threshold.parse()?,
        ..CheckConfig::default()
    };
    let rep = check_assumptions(&sys, &config)?;
    write_json(&cli.out, "assumptions.json", &rep.to_json(sys.cf()))?;
    for (name, v) in &rep.verdicts {
        println!("{name}: {v:?}");
    }
    report("assumptions", rep.all_hold())
}

fn cmd_witness(cli: &Cli, a: &WitnessArgs) -> Outcome {
    let sys = system(cli)?;
    let config = PipelineConfig {
        n: a.n,
        m: a.m,
        m_prime: a.m_prime,
        samples: a.samples,
        hitting_n: a.hitting_n,
        hitting_starts: a.hitting_starts,
        c_hat: a.c_hat,
        seed: cli.seed,
    };
    let reports: Vec<_> = a.lengths.par_iter().map(|&l| run_pipeline(l, &config, &sys)).collect();
    let mut out = Vec::new();
    let mut ok = true;
    for (l, r) in a.lengths.iter().zip(reports) {
        let r = r?;
        ok &= r.passed();
        println!("L = {l}: {}", if r.passed() { "pass" } else { "FAIL" });
        out.push(r.to_json());
    }
    write_json(&cli.out, "witness.json", &Value::Array(out))?;
    Ok(ok)
}

fn cmd_appb(cli: &Cli, a: &AppbArgs) -> Outcome {
    let pair = appb::construct_pair(a.m)?;
    let phi = appb::phi_levels(&pair)?;
    let sets = appb::witness_sets(&pair, a.n, cli.seed)?;
    let sys = pair.system()?;
    let z = sys.z().to_f64();
    let f = appb::mean_zero_cosine(z, 1.0);
    let (x0, y0) = (appb::start_point(&sys, cli.seed, 0), appb::start_point(&sys, cli.seed, 1));
    let dis = appb::empirical_disjointness(&sys, a.n, a.m, &f, &f, &x0, &y0, a.orbit_n);
    fs::write(cli.out.join("appb_sets.csv"), sets.to_csv())?;
    write_csv(
        &cli.out,
        "appb_disjointness.csv",
        "n,deviation",
        dis.checkpoints.iter().map(|c| vec![c.n.to_string(), format!("{:e}", c.deviation)]),
    )?;
    write_json(
        &cli.out,
        "appb.json",
        &json!({
            "pair": pair.to_json(),
            "dominant_value": phi.dominant,
            "exceptional_measure": exact(&phi.minority_measure),
            "exceptional_bound": exact(&phi.chain_bound),
            "c": exact(&sets.c),
            "q_beta": exact(&sets.q_beta),
            "margin": exact(&sets.margin),
            "measure_f": exact(&sets.f.measure()),
            "measure_g": exact(&sets.g.measure()),
            "displacement_samples": sets.displacement_samples,
            "x0": x0.exact_string(),
            "y0": y0.exact_string(),
            "disjointness": dis,
        }),
    )?;
    report("witness sets", phi.holds() && sets.holds())
}

fn cmd_verify(cli: &Cli) -> Outcome {
    let outcomes = suite::run_all(cli.seed);
    for o in &outcomes {
        println!("{}", o.line());
    }
    // timings stay on stdout so the file is reproducible
    let rows: Vec<Value> =
        outcomes.iter().map(|o| json!({"id": o.id, "name": o.name, "passed": o.passed, "detail": o.detail})).collect();
    write_json(&cli.out, "verify.json", &Value::Array(rows))?;
    Ok(outcomes.iter().all(|o| o.passed))
}
