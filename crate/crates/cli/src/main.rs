//! `invsq`: command-line driver for the radial inverse-square NLS laboratory.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use invsq_core::classify::{self, compare_flavors, run_experiment, SweepConfig};
use invsq_core::evolution::{evolve_observed, EvolveConfig, Outcome};
use invsq_core::ground_state::{solve_ground_state, threshold_ground_state, Flavor, GroundStateResult};
use invsq_core::spectral::spectral_battery;
use invsq_core::{io, PotentialParam, RadialField, RadialGrid};

const FORMAT_VERSION: u32 = 1;

/// Exit status for runs that finished but flagged a warning.
const EXIT_WARN: u8 = 2;

#[derive(Parser)]
#[command(name = "invsq", version, about = "Radial NLS with an inverse-square potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a ground state, its constant and the thresholds.
    GroundState(GroundStateArgs),
    /// Evolve a datum and record conservation and virial diagnostics.
    Evolve(EvolveArgs),
    /// Apply the scattering/blowup rule to a datum, optionally running it.
    Classify(ClassifyArgs),
    /// Sweep (a, lambda) cells for data lambda Q_a from a JSON config.
    Sweep(SweepArgs),
    /// Run the heat-semigroup property battery.
    SpectralCheck(SpectralArgs),
}

#[derive(Args, Serialize, Clone)]
struct GridArgs {
    /// Outer radius of the grid.
    #[arg(long = "rmax", default_value_t = 30.0)]
    r_max: f64,
    /// Number of nodes.
    #[arg(long, default_value_t = 6000)]
    n: usize,
}

impl GridArgs {
    fn build(&self) -> Result<RadialGrid> {
        Ok(RadialGrid::new(self.r_max, self.n)?)
    }
}

#[derive(Args, Serialize)]
struct GroundStateArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// Solve the radial problem (required for a > 0).
    #[arg(long)]
    radial: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Output directory for `profile.csv` and `thresholds.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvolveArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    /// A CSV file with header `r,re_u,im_u`, or `builtin:lambdaQ:<lambda>`.
    #[arg(long)]
    data: String,
    #[arg(long, allow_hyphen_values = true)]
    dt: f64,
    #[arg(long, allow_hyphen_values = true)]
    tfinal: f64,
    /// Output directory for `trajectory.csv`, `final.csv` and `outcome.json`.
    #[arg(long)]
    out: PathBuf,
    /// Grid for builtin data (files carry their own grid).
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long)]
    blowup_factor: Option<f64>,
    /// Scattering window as `t1,t2`.
    #[arg(long, value_parser = parse_window)]
    scatter_window: Option<(f64, f64)>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args, Serialize)]
struct ClassifyArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long)]
    data: String,
    #[arg(long)]
    radial: bool,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Evolve the datum and report the observed outcome.
    #[arg(long)]
    run: bool,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 10.0)]
    tfinal: f64,
    #[arg(long, value_parser = parse_window)]
    scatter_window: Option<(f64, f64)>,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SweepArgs {
    /// JSON sweep configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory for `sweep.csv` and `sweep.json`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args, Serialize)]
struct SpectralArgs {
    #[arg(long, allow_hyphen_values = true)]
    a: f64,
    #[arg(long = "rmax", default_value_t = 30.0)]
    r_max: f64,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// Also write the results as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `t1,t2`")?;
    let t1 = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let t2 = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((t1, t2))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GroundState(a) => ground_state_cmd(a),
        Command::Evolve(a) => evolve_cmd(a),
        Command::Classify(a) => classify_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::SpectralCheck(a) => spectral_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create directory {}", path.display()))
}

fn profile_flavor(a: f64, radial: bool) -> Flavor {
    if radial || a > 0.0 {
        Flavor::Radial
    } else {
        Flavor::General
    }
}

fn thresholds_record(gs: &GroundStateResult) -> serde_json::Value {
    let th = gs.thresholds();
    json!({
        "a": gs.a,
        "flavor": gs.flavor.as_str(),
        "C": th.c_constant,
        "E_threshold": th.energy_threshold,
        "K_threshold": th.k_threshold,
        "rho1": gs.pohozaev_rho1,
        "rho2": gs.pohozaev_rho2,
        "mass": gs.f.mass,
        "peak": gs.profile.peak(),
        "converged": gs.converged,
    })
}

fn ground_state_cmd(args: GroundStateArgs) -> Result<u8> {
    let p = PotentialParam::new(args.a)?;
    let flavor = if args.radial { Flavor::Radial } else { Flavor::General };
    let gs = solve_ground_state(&p, args.grid.build()?, args.tol, flavor)?;
    out_dir(&args.out)?;
    let mut w = create(&args.out.join("profile.csv"))?;
    io::write_profile(&mut w, &gs.profile)?;
    w.flush()?;
    let mut rec = thresholds_record(&gs);
    rec["format_version"] = json!(FORMAT_VERSION);
    rec["config"] = serde_json::to_value(&args)?;
    write_json(&args.out.join("thresholds.json"), &rec)?;
    if gs.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: Pohozaev residuals rho1 = {:.3e}, rho2 = {:.3e} above tolerance",
            gs.pohozaev_rho1, gs.pohozaev_rho2
        );
        Ok(EXIT_WARN)
    }
}

/// A datum plus, for builtin data, the ground state it was scaled from.
struct Datum {
    u0: RadialField,
    base: Option<(GroundStateResult, f64)>,
}

fn load_datum(source: &str, p: &PotentialParam, grid: &GridArgs, radial: bool, tol: f64) -> Result<Datum> {
    if let Some(rest) = source.strip_prefix("builtin:") {
        let lambda = rest
            .strip_prefix("lambdaQ:")
            .with_context(|| format!("unknown builtin `{source}`; expected builtin:lambdaQ:<lambda>"))?
            .parse::<f64>()
            .with_context(|| format!("bad lambda in `{source}`"))?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            bail!("lambda must be positive in `{source}`");
        }
        let gs = solve_ground_state(p, grid.build()?, tol, profile_flavor(p.a(), radial))?;
        return Ok(Datum {
            u0: gs.profile.scaled(lambda),
            base: Some((gs, lambda)),
        });
    }
    let file = File::open(source).with_context(|| format!("cannot open data file {source}"))?;
    let u0 = io::read_field(BufReader::new(file)).with_context(|| format!("reading {source}"))?;
    Ok(Datum { u0, base: None })
}

fn evolve_cmd(args: EvolveArgs) -> Result<u8> {
    let p = PotentialParam::new(args.a)?;
    let mut cfg = EvolveConfig::new(args.dt, args.tfinal);
    cfg.monitor_stride = args.stride;
    if let Some(f) = args.blowup_factor {
        cfg.blowup_factor = f;
    }
    cfg.scatter_window = args.scatter_window;
    cfg.validate()?;
    let datum = load_datum(&args.data, &p, &args.grid, false, args.tol)?;
    let g = *datum.u0.grid();

    // Distance of |u(t)| from the profile the datum was scaled from.
    let reference: Option<(Vec<f64>, f64)> = datum.base.as_ref().map(|(gs, lambda)| {
        let m: Vec<f64> = gs.profile.moduli().iter().map(|q| q * lambda).collect();
        let nrm = g.integrate(&m.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        (m, nrm)
    });
    let mut deviation: f64 = 0.0;
    let traj = evolve_observed(&datum.u0, &p, &cfg, |_, u| {
        if let Some((m, nrm)) = &reference {
            let d: Vec<f64> = u.moduli().iter().zip(m).map(|(x, y)| (x - y).powi(2)).collect();
            deviation = deviation.max(g.integrate(&d).sqrt() / nrm);
        }
    })?;

    out_dir(&args.out)?;
    let mut w = create(&args.out.join("trajectory.csv"))?;
    io::write_trajectory(&mut w, &traj.samples)?;
    w.flush()?;
    let mut w = create(&args.out.join("final.csv"))?;
    io::write_field(&mut w, &traj.final_state)?;
    w.flush()?;

    let outcome = match traj.outcome {
        Outcome::RanToHorizon => "ran_to_horizon",
        Outcome::BlowupDetected { .. } => "blowup_detected",
        Outcome::ScatteringDetected { .. } => "scattering_detected",
    };
    let mut rec = json!({
        "format_version": FORMAT_VERSION,
        "config": serde_json::to_value(&args)?,
        "evolve": cfg,
        "outcome": outcome,
        "outcome_detail": traj.outcome,
        "refinements": traj.refinements,
        "final_dt": traj.final_dt,
        "samples": traj.samples.len(),
        "mass_drift": traj.max_drift(|s| s.f.mass),
        "energy_drift": traj.max_drift(|s| s.f.energy_a),
        "scatter": traj.scatter,
    });
    if let Some((gs, lambda)) = &datum.base {
        rec["datum"] = json!({ "lambda": lambda, "ground_state": thresholds_record(gs) });
        if (*lambda - 1.0).abs() < 1e-12 {
            let k0 = traj.initial().f.kinetic_a;
            rec["stationarity"] = json!({
                "max_modulus_deviation": deviation,
                "max_abs_d2V_over_8K": traj.samples.iter().map(|s| s.d2v.abs()).fold(0.0, f64::max) / (8.0 * k0),
            });
        }
    }
    write_json(&args.out.join("outcome.json"), &rec)?;
    Ok(0)
}

fn classify_cmd(args: ClassifyArgs) -> Result<u8> {
    let p = PotentialParam::new(args.a)?;
    let datum = load_datum(&args.data, &p, &args.grid, args.radial, args.tol)?;
    let g = *datum.u0.grid();
    let flavor = profile_flavor(args.a, args.radial);
    let gs = threshold_ground_state(args.a, flavor, g, args.tol)?;
    let th = gs.thresholds();

    let mut rec = json!({
        "format_version": FORMAT_VERSION,
        "config": serde_json::to_value(&args)?,
    });
    if args.a > 0.0 {
        // Radial data at a > 0: report the C_0 rule next to the radial one.
        let general = threshold_ground_state(args.a, Flavor::General, g, args.tol)?.thresholds();
        let cmp = compare_flavors(&datum.u0, &p, &general, &th);
        if cmp.discretization_artifact {
            log::warn!("general and radial rules disagree on this datum: discretization artifact");
        }
        rec["flavors"] = serde_json::to_value(&cmp)?;
    }
    let c = if args.run {
        let mut cfg = EvolveConfig::new(args.dt, args.tfinal);
        cfg.scatter_window = args.scatter_window;
        cfg.validate()?;
        run_experiment(&datum.u0, &p, &th, &cfg)?
    } else {
        classify::classify(&datum.u0, &p, &th)
    };
    rec["classification"] = serde_json::to_value(&c)?;
    rec["predicted"] = json!(c.predicted.as_str());
    match &args.out {
        Some(path) => write_json(path, &rec)?,
        None => println!("{}", serde_json::to_string_pretty(&rec)?),
    }
    Ok(0)
}

fn sweep_cmd(args: SweepArgs) -> Result<u8> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read config {}", args.config.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let cfg: SweepConfig = serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("invalid sweep config at `{}`: {}", e.path(), e.inner()))?;
    let rows = classify::sweep_with_jobs(&cfg, args.jobs)?;
    out_dir(&args.out)?;
    let mut w = create(&args.out.join("sweep.csv"))?;
    io::write_sweep(&mut w, &rows)?;
    w.flush()?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    write_json(
        &args.out.join("sweep.json"),
        &json!({
            "format_version": FORMAT_VERSION,
            "config": cfg,
            "rows": rows,
            "failed_cells": failed,
        }),
    )?;
    Ok(if failed > 0 { EXIT_WARN } else { 0 })
}

fn spectral_cmd(args: SpectralArgs) -> Result<u8> {
    let p = PotentialParam::new(args.a)?;
    let checks = spectral_battery(&p, RadialGrid::new(args.r_max, args.n)?)?;
    for c in &checks {
        println!(
            "{} {:<28} {:>14.6e}  {}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.bound
        );
    }
    if let Some(path) = &args.out {
        write_json(
            path,
            &json!({ "format_version": FORMAT_VERSION, "config": serde_json::to_value(&args)?, "checks": checks }),
        )?;
    }
    Ok(if checks.iter().all(|c| c.pass) { 0 } else { EXIT_WARN })
}
