//! Batch front-end: `abplab <command> [--config FILE] [--key VALUE ...]`.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on errors (reported on stderr as `{"error": kind, "message": ...}`).

pub mod config;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::error::ErrorKind;
use clap::{Arg, ArgMatches};
use serde::Serialize;
use serde_json::json;

pub use config::{parse_config_text, parse_domain, parse_field, Command, FieldSpec, Kind, RunConfig, KEYS};

use crate::error::{Error, Result};
use crate::estimates::{
    abp_envelope, verify_abp, verify_c_alpha_norm, verify_classical_abp, verify_holder_global, verify_holder_interior,
    write_reports_csv, AbpVariant, EstimateReport, Side,
};
use crate::experiments::{classical_abp_failure, p_sweep, sharper_estimate_demo};
use crate::grid::{build_grid, Grid2D, ScalarField};
use crate::params::PExponent;
use crate::solver::{solve_dirichlet, SolveResult};

pub const THREADS_ENV: &str = "ABPLAB_THREADS";
const LOCK_FILE: &str = ".abplab.lock";

/// Tolerances of the `counterexample` checks.
const QUADRATURE_REL_TOL: f64 = 1e-4;
const LEVEL_INTEGRAL_REL_TOL: f64 = 0.05;

fn about(c: Command) -> &'static str {
    match c {
        Command::Solve => "solve the Dirichlet problem and write the field",
        Command::Abp => "solve, build the concave envelope and check the ABP-type estimates",
        Command::Holder => "solve and check the interior, global and C^alpha Hölder bounds",
        Command::Sweep => "solve for every p in `ps` and measure the distance to p = inf",
        Command::Counterexample => "classical ABP failure table and the level-set sharpness demo",
        Command::Selftest => "run the closed-form example suite",
    }
}

fn command_line() -> clap::Command {
    let subs = Command::ALL.into_iter().map(|c| {
        let mut s = clap::Command::new(c.name()).about(about(c)).arg(
            Arg::new("config")
                .long("config")
                .value_name("FILE")
                .help("flat key = value config file"),
        );
        for &(key, default, help) in KEYS {
            let mut a = Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .help(format!("{help} [default: {default}]"));
            if key.contains('_') {
                a = a.alias(key.replace('_', "-"));
            }
            s = s.arg(a);
        }
        s
    });
    clap::Command::new("abplab")
        .about("Monotone solver and estimate verifier for the normalized p-Laplacian")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .subcommands(subs)
}

fn error_json(kind: &str, message: &str) -> String {
    json!({ "error": kind, "message": message }).to_string()
}

/// Runs the command line `argv` (including the program name) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command_line().try_get_matches_from(argv) {
        Ok(m) => m,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            let msg = e.render().to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", error_json("usage", first));
            return 2;
        }
    };
    match execute(&matches) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if outcome.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            2
        }
    }
}

struct Outcome {
    pass: bool,
    summary: serde_json::Value,
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn execute(matches: &ArgMatches) -> Result<Outcome> {
    configure_threads()?;
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let command: Command = name.parse()?;
    let file = match sub.get_one::<String>("config") {
        Some(path) => config::read_config_file(Path::new(path))?,
        None => BTreeMap::new(),
    };
    let flags: BTreeMap<String, String> = KEYS
        .iter()
        .filter_map(|&(k, _, _)| sub.get_one::<String>(k).map(|v| (k.to_string(), v.clone())))
        .collect();
    let cfg = RunConfig::resolve(command, &file, &flags)?;
    fs::create_dir_all(&cfg.out)?;
    let _lock = OutputLock::acquire(&cfg.out)?;
    fs::write(cfg.out.join("config.toml"), cfg.echo())?;
    let (pass, details) = match command {
        Command::Solve => cmd_solve(&cfg)?,
        Command::Abp => cmd_abp(&cfg)?,
        Command::Holder => cmd_holder(&cfg)?,
        Command::Sweep => cmd_sweep(&cfg)?,
        Command::Counterexample => cmd_counterexample(&cfg)?,
        Command::Selftest => cmd_selftest(&cfg)?,
    };
    let summary = json!({
        "command": command.name(),
        "pass": pass,
        "out": cfg.out.display().to_string(),
        "details": details,
    });
    Ok(Outcome { pass, summary })
}

/// Exclusive claim on an output directory for the lifetime of a run.
struct OutputLock(PathBuf);

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is in use (remove {} if no run is active)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_reports(dir: &Path, reports: &[EstimateReport]) -> Result<()> {
    write_json(dir, "reports.json", &reports)?;
    let mut w = create(dir, "reports.csv")?;
    write_reports_csv(&mut w, reports)?;
    w.flush()?;
    Ok(())
}

struct Solved {
    pe: PExponent,
    f: ScalarField,
    res: SolveResult,
}

fn grid_of(cfg: &RunConfig) -> Result<Arc<Grid2D>> {
    Ok(Arc::new(build_grid(cfg.domain, cfg.h)?))
}

/// Solves, writes `field.csv` and `solve.json`, and fails if the iteration did not converge.
fn solve(cfg: &RunConfig) -> Result<Solved> {
    let grid = grid_of(cfg)?;
    let pe = PExponent::new(2, cfg.p)?;
    let f = cfg.f.sample(&grid, &pe)?;
    let g = cfg.g.sample(&grid, &pe)?;
    let res = solve_dirichlet(&pe, &f, &g, &cfg.solve)?;
    let mut w = create(&cfg.out, "field.csv")?;
    res.write_csv(&mut w)?;
    w.flush()?;
    write_json(&cfg.out, "solve.json", &res.summary())?;
    if !res.converged {
        return Err(Error::NotConverged(format!(
            "residual {:e} after {} iterations (tol {:e})",
            res.final_residual, res.iterations, cfg.solve.tol
        )));
    }
    Ok(Solved { pe, f, res })
}

fn report_details(reports: &[EstimateReport]) -> serde_json::Value {
    reports
        .iter()
        .map(|r| json!({ "variant": r.variant, "pass": r.pass, "slack": r.slack }))
        .collect()
}

fn cmd_solve(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let s = solve(cfg)?;
    Ok((true, serde_json::to_value(s.res.summary())?))
}

fn cmd_abp(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let s = solve(cfg)?;
    let u = &s.res.u;
    let variant = AbpVariant::normalized_for(&s.pe);
    let mut reports = Vec::new();
    for side in [Side::Sub, Side::Super] {
        let env = abp_envelope(u, side, &cfg.envelope)?;
        if side == Side::Sub {
            let mut w = create(&cfg.out, "envelope.csv")?;
            env.write_csv(&u.positive_part(), &mut w)?;
            w.flush()?;
        }
        reports.push(verify_abp(variant, side, u, &s.f, &env, &s.pe, &cfg.level)?);
        if !s.pe.is_infinite() {
            reports.push(verify_classical_abp(side, u, &s.f, &env, &s.pe)?);
        }
    }
    write_reports(&cfg.out, &reports)?;
    Ok((reports.iter().all(|r| r.pass), report_details(&reports)))
}

fn cmd_holder(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let s = solve(cfg)?;
    let u = &s.res.u;
    let x = u.grid().nearest_inside(cfg.x);
    let reports = vec![
        verify_holder_interior(u, &s.f, x, &s.pe)?,
        verify_holder_global(u, &s.f, &s.pe)?,
        verify_c_alpha_norm(u, &s.f, &s.pe)?,
    ];
    write_reports(&cfg.out, &reports)?;
    Ok((reports.iter().all(|r| r.pass), report_details(&reports)))
}

fn cmd_sweep(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let grid = grid_of(cfg)?;
    // Descriptors that depend on p (the cusp) are evaluated at `p`.
    let pe = PExponent::new(2, cfg.p)?;
    let f = cfg.f.sample(&grid, &pe)?;
    let g = cfg.g.sample(&grid, &pe)?;
    let table = p_sweep(&cfg.ps, &f, &g, &cfg.solve)?;
    let mut w = create(&cfg.out, "sweep.csv")?;
    table.write_csv(&mut w)?;
    w.flush()?;
    write_json(&cfg.out, "sweep.json", &table)?;
    if !table.all_converged() {
        let bad: Vec<String> = table
            .rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| r.p.to_string())
            .collect();
        return Err(Error::NotConverged(format!("sweep rows p = {}", bad.join(", "))));
    }
    let pass = table.rows.iter().all(|r| r.c_alpha.pass);
    let details: serde_json::Value = table
        .rows
        .iter()
        .map(|r| json!({ "p": r.p, "distance": r.distance, "c_alpha_pass": r.c_alpha.pass }))
        .collect();
    Ok((pass, details))
}

fn cmd_counterexample(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let failure = classical_abp_failure(&cfg.eps, 2, cfg.m)?;
    let sharp = sharper_estimate_demo(&cfg.eps, cfg.m)?;
    let mut w = create(&cfg.out, "failure.csv")?;
    failure.write_csv(&mut w)?;
    w.flush()?;
    write_json(&cfg.out, "failure.json", &failure)?;
    let mut w = create(&cfg.out, "sharpness.csv")?;
    sharp.write_csv(&mut w)?;
    w.flush()?;
    write_json(&cfg.out, "sharpness.json", &sharp)?;
    let quadrature_ok = failure.rows.iter().all(|r| r.rel_err <= QUADRATURE_REL_TOL);
    let level_ok = sharp
        .rows
        .iter()
        .all(|r| (r.level_integral - r.level_integral_exact).abs() <= LEVEL_INTEGRAL_REL_TOL * r.level_integral_exact);
    let estimate_ok = sharp.rows.iter().all(|r| r.abp.pass);
    let details = json!({
        "slope": failure.slope,
        "expected_slope": failure.expected_slope,
        "quadrature_matches_closed_form": quadrature_ok,
        "level_integral_matches_one_half": level_ok,
        "level_set_estimate_holds": estimate_ok,
    });
    Ok((quadrature_ok && level_ok && estimate_ok, details))
}

fn cmd_selftest(cfg: &RunConfig) -> Result<(bool, serde_json::Value)> {
    let report = crate::selftest::run();
    write_json(&cfg.out, "selftest.json", &report)?;
    let failed: Vec<&str> = report
        .checks
        .iter()
        .filter(|c| !c.pass)
        .map(|c| c.name.as_str())
        .collect();
    let details = json!({ "checks": report.checks.len(), "failed": failed });
    Ok((report.all_pass(), details))
}
