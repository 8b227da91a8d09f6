mod output;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use llblow_core::flow::{self, BlowupConfig, BlowupRun, RunStatus};
use llblow_core::modulation::{self, FitReport, ModulationState, ModulationSystem};
use llblow_core::profiles::{self, ProfileSet};
use llblow_core::verify::{self, VerifyOptions};
use llblow_core::{ops, Coefficients, Exec, RadialGrid};

use output::{ensure_dir, write_dat, write_field, write_json, write_table};

/// Equivariant Landau-Lifshitz blowup numerics.
#[derive(Parser)]
#[command(name = "llblow", version)]
struct Cli {
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the approximate profiles at one value of b.
    Profiles(ProfilesArgs),
    /// Integrate the leading-order modulation system.
    Modulation(ModulationArgs),
    /// Evolve the radial flow from configured initial data.
    Simulate(SimulateArgs),
    /// Run numerical checks; exits 1 if any fails.
    Verify(VerifyArgs),
    /// Fit lambda(t) = C (T - t) / |log(T - t)|^p to a CSV trajectory.
    Fit(FitArgs),
}

#[derive(Args)]
struct ProfilesArgs {
    #[arg(long, default_value_t = 1e-3)]
    b: f64,
    /// Defaults to b / (4 |log b|).
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    rho1: f64,
    #[arg(long, default_value_t = 1.0)]
    rho2: f64,
    /// Cutoff radius of the orthogonality direction.
    #[arg(long, default_value_t = 3.0)]
    m: f64,
    /// Grid nodes on [1e-3, 2.02 B1].
    #[arg(long, default_value_t = 4096)]
    n: usize,
    #[arg(long, default_value_t = 1.02)]
    ratio: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ModulationArgs {
    #[arg(long, default_value_t = 0.01)]
    b0: f64,
    /// Defaults to 1 / b0.
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long, default_value_t = 1e6)]
    s_end: f64,
    #[arg(long, default_value_t = 1.0)]
    rho1: f64,
    #[arg(long, default_value_t = 1.0)]
    rho2: f64,
    #[arg(long, default_value_t = 0.0)]
    a0: f64,
    /// Choose a0 by shooting on kappa instead of using --a0.
    #[arg(long)]
    shoot: bool,
    #[arg(long, default_value_t = 60)]
    shoot_iterations: usize,
    /// Scale of the b^2 forcing in the a equation.
    #[arg(long, default_value_t = 0.0)]
    forcing: f64,
    #[arg(long, default_value_t = 400)]
    n_out: usize,
    /// Fit the blowup rate to the resulting lambda(t).
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Checks to run, in order.
    names: Vec<String>,
    #[arg(long, conflicts_with = "names")]
    all: bool,
    #[arg(long, default_value_t = 20240601)]
    seed: u64,
    #[arg(long)]
    coercivity_trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns t and lambda, optionally b.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Malformed input that is not a core error: bad JSON, bad env vars.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code_for(err: &anyhow::Error) -> u8 {
    use llblow_core::Error as E;
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Config(_) | E::Domain(_) | E::InvalidCoefficients(_) | E::Grid(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| {
        let exec = if cli.sequential { Exec::Sequential } else { Exec::available() };
        match cli.cmd {
            Command::Profiles(a) => cmd_profiles(a).map(|()| true),
            Command::Modulation(a) => cmd_modulation(a).map(|()| true),
            Command::Simulate(a) => cmd_simulate(a, exec),
            Command::Verify(a) => cmd_verify(a, exec),
            Command::Fit(a) => cmd_fit(a).map(|()| true),
        }
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("LLBLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_error(format!("LLBLOW_THREADS must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building thread pool")?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn cmd_profiles(args: ProfilesArgs) -> Result<()> {
    let coeffs = Coefficients::derive(args.rho1, args.rho2)?;
    let (b0, b1) = ops::scales(args.b)?;
    let a = args.a.unwrap_or(args.b / (4.0 * args.b.ln().abs()));
    if !a.is_finite() {
        return Err(config_error("a must be finite"));
    }
    let grid = Arc::new(RadialGrid::graded(1e-3, 2.02 * b1, args.n, args.ratio)?);
    let set = ProfileSet::build(&coeffs, args.b, &grid)?;
    let pm = profiles::phi_m(args.m, &grid)?;
    ensure_dir(&args.out)?;

    write_field(&args.out.join("t1.csv"), "T1", &grid, &set.t1)?;
    write_field(&args.out.join("sigma_b.csv"), "sigma_b", &grid, &set.sigma.values)?;
    write_field(&args.out.join("phi_m.csv"), "Phi_M", &grid, &pm.phi)?;
    write_field(&args.out.join("s02.csv"), "S02", &grid, &set.s02)?;
    for (&(i, j), p) in &set.phi {
        write_field(&args.out.join(format!("phi_{i}{j}_alpha.csv")), &format!("Phi{i}{j}_alpha"), &grid, &p.x)?;
        write_field(&args.out.join(format!("phi_{i}{j}_beta.csv")), &format!("Phi{i}{j}_beta"), &grid, &p.y)?;
    }
    let w = set.w0_localized(a, args.b);
    for (k, name) in ["alpha", "beta", "gamma"].iter().enumerate() {
        write_field(&args.out.join(format!("w0_{name}.csv")), &format!("w0_{name}"), &grid, w.component(k))?;
    }

    let ratios = set.flux_ratios(a, args.b, &pm);
    let predicted = profiles::predicted_flux(&coeffs, a, args.b);
    let rel: Vec<f64> = (0..2).map(|k| (ratios[k] - predicted[k]).abs() / predicted[k].abs()).collect();
    let spot = set.error_spotcheck(a, args.b);
    let summary = json!({
        "b": args.b,
        "a": a,
        "rho1": args.rho1,
        "rho2": args.rho2,
        "B0": b0,
        "B1": b1,
        "grid": { "nodes": grid.len(), "y_min": grid.y_min(), "y_max": grid.y_max(), "hash": format!("{:016x}", grid.hash()) },
        "c_b": set.sigma.c_b,
        "d_b": set.sigma.d_b,
        "phi_m": { "m": pm.m, "c_m": pm.c_m, "norm": pm.norm },
        "flux_ratios": ratios,
        "predicted_flux": predicted,
        "flux_relative_error": rel,
        "error_spotcheck": spot,
        "error_spotcheck_scaled": spot * args.b.ln().powi(2) / args.b.powi(4),
    });
    write_json(&args.out.join("profiles.json"), &summary)?;
    println!(
        "profiles b={} a={a:.6e}: c_b={:.6e} d_b={:.6e} flux ratio error=({:.3e}, {:.3e})",
        args.b, set.sigma.c_b, set.sigma.d_b, rel[0], rel[1]
    );
    Ok(())
}

fn cmd_modulation(args: ModulationArgs) -> Result<()> {
    // the leading system does not involve the coefficients; validate them anyway
    Coefficients::derive(args.rho1, args.rho2)?;
    if !(args.b0 > 0.0 && args.b0 < 1.0) {
        return Err(config_error(format!("b0 must lie in (0, 1), got {}", args.b0)));
    }
    if !args.forcing.is_finite() {
        return Err(config_error("forcing must be finite"));
    }
    let s0 = args.s0.unwrap_or(1.0 / args.b0);
    if !(s0 > 0.0 && args.s_end > s0) {
        return Err(config_error(format!("need 0 < s0 < s_end, got s0={s0} s_end={}", args.s_end)));
    }
    let sys = ModulationSystem { forcing: args.forcing, ..Default::default() };
    let shoot = if args.shoot {
        Some(modulation::kappa_shoot(&sys, args.b0, s0, args.s_end, args.shoot_iterations)?)
    } else {
        None
    };
    let a0 = shoot.as_ref().map_or(args.a0, |r| r.a0);
    let rows = sys.integrate(ModulationState::new(s0, a0, args.b0), args.s_end, args.n_out)?;
    let (a_sup, a_int) = modulation::refined_a_bound(&rows);
    ensure_dir(&args.out)?;
    write_table(
        &args.out.join("trajectory.csv"),
        &["s", "t", "a", "b", "lambda", "theta", "kappa"],
        rows.iter().map(|r| vec![r.s, r.t, r.a, r.b, r.lambda, r.theta, r.kappa()]),
    )?;
    write_dat(&args.out.join("lambda.dat"), &["t", "lambda"], rows.iter().map(|r| vec![r.t, r.lambda]))?;
    let fit = if args.fit {
        let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
        let l: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        let b: Vec<f64> = rows.iter().map(|r| r.b).collect();
        let f = modulation::fit_rate(&t, &l, Some(&b))?;
        write_overlay(&args.out.join("rate_overlay.dat"), &t, &l, &f)?;
        Some(f)
    } else {
        None
    };
    let summary = json!({
        "b0": args.b0,
        "s0": s0,
        "s_end": args.s_end,
        "rho1": args.rho1,
        "rho2": args.rho2,
        "forcing": args.forcing,
        "a0": a0,
        "shoot": shoot,
        "refined_a_sup": a_sup,
        "a_integral": a_int,
        "final": rows.last(),
        "fit": fit,
    });
    write_json(&args.out.join("modulation.json"), &summary)?;
    let last = rows.last().unwrap();
    println!("modulation a0={a0:.6e}: lambda(s_end)={:.6e} b(s_end)={:.6e} kappa={:.4}", last.lambda, last.b, last.kappa());
    if let Some(f) = &fit {
        println!("fit T={:.10e} C={:.6e} p={:.6} rms={:.3e}", f.t_blowup, f.c, f.p, f.rms);
    }
    Ok(())
}

fn write_overlay(path: &Path, t: &[f64], lambda: &[f64], fit: &FitReport) -> Result<()> {
    let model = |ti: f64| {
        let d = fit.t_blowup - ti;
        fit.c * d / d.ln().abs().powf(fit.p)
    };
    write_dat(path, &["t", "lambda", "fit"], t.iter().zip(lambda).map(|(&ti, &li)| vec![ti, li, model(ti)]))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    schema_version: u32,
    runs: Vec<SimulateRun>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct SimulateRun {
    name: String,
    #[serde(default)]
    config: BlowupConfig,
}

fn load_simulate(path: &Path) -> Result<SimulateFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    let file: SimulateFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        config_error(format!("{}: at {at}: {}", path.display(), e.inner()))
    })?;
    if file.schema_version != 1 {
        return Err(config_error(format!("unsupported schema_version {}", file.schema_version)));
    }
    if file.runs.is_empty() {
        return Err(config_error("runs is empty"));
    }
    let mut seen = BTreeSet::new();
    for (i, r) in file.runs.iter().enumerate() {
        let ok = !r.name.is_empty() && r.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !ok {
            return Err(config_error(format!("runs[{i}].name must be non-empty [A-Za-z0-9_-], got {:?}", r.name)));
        }
        if !seen.insert(r.name.clone()) {
            return Err(config_error(format!("runs[{i}].name {:?} is duplicated", r.name)));
        }
        r.config.validate().map_err(|e| config_error(format!("runs[{i}].config: {e}")))?;
    }
    Ok(file)
}

fn cmd_simulate(args: SimulateArgs, exec: Exec) -> Result<bool> {
    let file = load_simulate(&args.config)?;
    ensure_dir(&args.out)?;
    let results = exec.map(&file.runs, |r| flow::run_blowup(&r.config));
    let mut all_ok = true;
    let mut summary = Vec::new();
    for (r, res) in file.runs.iter().zip(results) {
        let run = res.with_context(|| format!("run {}", r.name))?;
        let dir = args.out.join(&r.name);
        ensure_dir(&dir)?;
        write_run(&dir, r, &run)?;
        let p = run.fit.as_ref().map(|f| f.p);
        let last = run.rows.last().unwrap();
        println!(
            "{} {}: status={:?} steps={} lambda={:.6e} b={:.6e} p={}",
            if run.status == RunStatus::Partial { "FAIL" } else { "DONE" },
            r.name,
            run.status,
            run.steps,
            last.lambda,
            last.b,
            p.map_or("n/a".to_string(), |p| format!("{p:.4}"))
        );
        all_ok &= run.status != RunStatus::Partial;
        summary.push(json!({
            "name": r.name,
            "status": run.status,
            "steps": run.steps,
            "final": last,
            "fit": run.fit,
        }));
    }
    write_json(&args.out.join("summary.json"), &summary)?;
    Ok(all_ok)
}

fn write_run(dir: &Path, r: &SimulateRun, run: &BlowupRun) -> Result<()> {
    write_table(
        &dir.join("trajectory.csv"),
        &["t", "s", "lambda", "theta", "a", "b", "E", "E1", "E2", "E4"],
        run.rows.iter().map(|x| vec![x.t, x.s, x.lambda, x.theta, x.a, x.b, x.energy, x.e1, x.e2, x.e4]),
    )?;
    let t: Vec<f64> = run.rows.iter().map(|x| x.t).collect();
    let l: Vec<f64> = run.rows.iter().map(|x| x.lambda).collect();
    write_dat(&dir.join("lambda.dat"), &["t", "lambda"], t.iter().zip(&l).map(|(&a, &b)| vec![a, b]))?;
    write_dat(&dir.join("b.dat"), &["s", "b"], run.rows.iter().map(|x| vec![x.s, x.b]))?;
    if let Some(f) = &run.fit {
        write_overlay(&dir.join("rate_overlay.dat"), &t, &l, f)?;
    }
    let report = json!({
        "name": r.name,
        "config": r.config,
        "status": run.status,
        "message": run.message,
        "steps": run.steps,
        "regrids": run.regrids,
        "samples": run.rows.len(),
        "final": run.rows.last(),
        "fit": run.fit,
        "fit_error": run.fit_error,
    });
    write_json(&dir.join("report.json"), &report)
}

fn cmd_verify(args: VerifyArgs, exec: Exec) -> Result<bool> {
    let mut opts = VerifyOptions { seed: args.seed, exec, ..Default::default() };
    if let Some(n) = args.coercivity_trials {
        if n == 0 {
            return Err(config_error("coercivity-trials must be positive"));
        }
        opts.coercivity_trials = n;
    }
    let names: Vec<&str> =
        if args.all { verify::CHECK_NAMES.to_vec() } else { args.names.iter().map(String::as_str).collect() };
    let reports = verify::run_checks(&names, &opts)?;
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(out) = &args.out {
        if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
            ensure_dir(parent)?;
        }
        write_json(out, &reports)?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn cmd_fit(args: FitArgs) -> Result<()> {
    let cols = output::read_columns(&args.input, &["t", "lambda", "b"])?;
    let (Some(t), Some(l)) = (&cols[0], &cols[1]) else {
        bail!(config_error(format!("{} needs columns t and lambda", args.input.display())));
    };
    let fit = modulation::fit_rate(t, l, cols[2].as_deref())?;
    ensure_dir(&args.out)?;
    write_json(&args.out.join("fit.json"), &fit)?;
    write_overlay(&args.out.join("rate_overlay.dat"), t, l, &fit)?;
    println!("fit T={:.10e} C={:.6e} p={:.6} rms={:.3e} samples={}", fit.t_blowup, fit.c, fit.p, fit.rms, fit.samples);
    Ok(())
}
