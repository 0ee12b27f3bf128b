//! Command-line front end: `critwell <command> --config <path> ...`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{load_config, Format, Lambdas, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{convergence_study, lambda_sweep_with, nonexistence_scan};
use crate::profiles::Profile;
use crate::report::{write_report, Payload, ProfileInfo, RunReport, SolveOutput};
use crate::solver::{assemble, dump_matrices, solve, Backend};
use crate::theory::{check_conditions, Geometry, TheoryReport};
use crate::validation::run_invariant_suite;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

pub const THREADS_ENV: &str = "CRITWELL_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "critwell",
    version,
    about = "Bound states of a locally deformed Dirichlet strip"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Theory constants and condition verdicts.
    Check(CommonArgs),
    /// Lowest eigenvalue at one λ.
    Solve(CommonArgs),
    /// Gap against λ with the power-law fit.
    Sweep(CommonArgs),
    /// Refinement study in h, L or N.
    Converge(CommonArgs),
    /// Lowest eigenvalue against box length on a nonexistence instance.
    ScanNonexistence(CommonArgs),
    /// Cross-module invariant suite.
    Validate(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Check(_) => "check",
            Command::Solve(_) => "solve",
            Command::Sweep(_) => "sweep",
            Command::Converge(_) => "converge",
            Command::ScanNonexistence(_) => "scan-nonexistence",
            Command::Validate(_) => "validate",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Check(a)
            | Command::Solve(a)
            | Command::Sweep(a)
            | Command::Converge(a)
            | Command::ScanNonexistence(a)
            | Command::Validate(a) => a,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Run configuration (INI sections).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Prefix for MatrixMarket dumps of the assembled pencil (`solve` only).
    #[arg(long)]
    pub dump_matrices: Option<PathBuf>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse()
}

/// Failure with the exit code it maps to.
struct Failure {
    code: i32,
    error: Error,
}

fn config_err(error: Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error,
    }
}

fn numerical_err(error: Error) -> Failure {
    Failure {
        code: EXIT_NUMERICAL,
        error,
    }
}

struct Outcome {
    report: RunReport,
    code: i32,
}

struct Setup {
    cfg: RunConfig,
    geometry: Geometry,
    profile: Profile,
}

fn single_lambda(cfg: &RunConfig, command: &str) -> Result<f64, Failure> {
    match cfg.lambdas {
        Lambdas::Single(l) => Ok(l),
        _ => Err(config_err(Error::Config {
            line: 0,
            reason: format!("`{command}` needs a single `geometry.lambda`"),
        })),
    }
}

fn setup(cfg: RunConfig, lambda: f64) -> Result<Setup, Failure> {
    let geometry = Geometry::new(cfg.a, cfg.b, lambda).map_err(config_err)?;
    let profile = cfg.build_profile().map_err(config_err)?;
    profile.check_nondegenerate(lambda).map_err(config_err)?;
    cfg.solver.validate(&geometry).map_err(config_err)?;
    Ok(Setup { cfg, geometry, profile })
}

fn base_report(command: &str, s: &Setup) -> RunReport {
    RunReport {
        command: command.to_string(),
        status: "ok".into(),
        exit_code: EXIT_OK,
        geometry: Some(s.geometry),
        profile: Some(ProfileInfo {
            kind: s.profile.kind(),
            amplitude: s.profile.amplitude(),
            b: s.profile.b(),
        }),
        solver: Some(s.cfg.solver),
        theory: TheoryReport::compute(&s.geometry, &s.profile).ok(),
        payload: None,
        error: None,
    }
}

fn execute(command: &Command, cfg: Option<RunConfig>) -> Result<Outcome, Failure> {
    let name = command.name();
    if let Command::Validate(_) = command {
        let checks = run_invariant_suite(0);
        for c in &checks {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let code = if checks.iter().all(|c| c.passed) {
            EXIT_OK
        } else {
            EXIT_INVARIANT
        };
        return Ok(Outcome {
            report: RunReport {
                command: name.into(),
                status: if code == EXIT_OK { "ok" } else { "invariant-failure" }.into(),
                exit_code: code,
                geometry: None,
                profile: None,
                solver: None,
                theory: None,
                payload: Some(Payload::Validate(checks)),
                error: None,
            },
            code,
        });
    }
    let cfg = cfg.ok_or_else(|| {
        config_err(Error::Config {
            line: 0,
            reason: format!("`{name}` requires --config"),
        })
    })?;
    match command {
        Command::Check(_) => {
            let lambda = match &cfg.lambdas {
                Lambdas::Single(l) => *l,
                Lambdas::List(ls) => ls[0],
                Lambdas::Unset => 0.0,
            };
            let s = setup(cfg, lambda)?;
            let mut report = base_report(name, &s);
            report.theory = Some(TheoryReport::compute(&s.geometry, &s.profile).map_err(config_err)?);
            report.payload = Some(Payload::Check);
            Ok(Outcome { report, code: EXIT_OK })
        }
        Command::Solve(args) => {
            let lambda = single_lambda(&cfg, name)?;
            let s = setup(cfg, lambda)?;
            let dump = args
                .dump_matrices
                .clone()
                .or_else(|| s.cfg.output.dump_matrices.clone());
            if let Some(prefix) = dump {
                if s.cfg.solver.backend != Backend::ModeGalerkin {
                    return Err(config_err(Error::Config {
                        line: 0,
                        reason: "matrix dumps need the mode-galerkin backend".into(),
                    }));
                }
                let sys = assemble(&s.geometry, &s.profile, &s.cfg.solver).map_err(numerical_err)?;
                dump_matrices(&sys, &prefix).map_err(numerical_err)?;
            }
            let result = solve(&s.geometry, &s.profile, &s.cfg.solver).map_err(numerical_err)?;
            let mut report = base_report(name, &s);
            let l4 = lambda.powi(4);
            let theory = report.theory.as_ref();
            report.payload = Some(Payload::Solve(SolveOutput {
                bracket_lo: theory.and_then(|t| t.c1).map(|c| -c * l4),
                bracket_hi: theory.and_then(|t| t.c2).map(|c| -c * l4),
                result,
            }));
            Ok(Outcome { report, code: EXIT_OK })
        }
        Command::Sweep(_) => {
            let lambdas = cfg.sweep_lambdas();
            let s = setup(cfg, 0.0)?;
            for &l in &lambdas {
                s.profile.check_nondegenerate(l).map_err(config_err)?;
            }
            let sweep = lambda_sweep_with(&s.geometry, &s.profile, &lambdas, &s.cfg.solver, s.cfg.sweep)
                .map_err(numerical_err)?;
            let mut report = base_report(name, &s);
            report.payload = Some(Payload::Sweep(sweep));
            Ok(Outcome { report, code: EXIT_OK })
        }
        Command::Converge(_) => {
            let lambda = single_lambda(&cfg, name)?;
            let s = setup(cfg, lambda)?;
            let spec = s.cfg.converge;
            let table = convergence_study(&s.geometry, &s.profile, &s.cfg.solver, spec.knob, spec.levels)
                .map_err(numerical_err)?;
            let mut report = base_report(name, &s);
            report.payload = Some(Payload::Converge(table));
            Ok(Outcome { report, code: EXIT_OK })
        }
        Command::ScanNonexistence(_) => {
            let lambda = single_lambda(&cfg, name)?;
            let s = setup(cfg, lambda)?;
            let conditions = check_conditions(&s.geometry, &s.profile).map_err(config_err)?;
            if !conditions.nonexistence_applies() {
                return Err(config_err(Error::Config {
                    line: 0,
                    reason: "the nonexistence hypothesis does not hold for this geometry".into(),
                }));
            }
            let scan = nonexistence_scan(&s.geometry, &s.profile, &s.cfg.solver, &s.cfg.scan).map_err(numerical_err)?;
            let code = if scan.verdict == "OK" { EXIT_OK } else { EXIT_INVARIANT };
            let mut report = base_report(name, &s);
            if code != EXIT_OK {
                report.status = "violation".into();
                report.exit_code = code;
            }
            report.payload = Some(Payload::Scan(scan));
            Ok(Outcome { report, code })
        }
        Command::Validate(_) => unreachable!("handled above"),
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    // a pool built earlier in the same process keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn resolve_format(cli: Option<Format>, cfg: Option<Format>, out: Option<&Path>) -> Format {
    cli.or(cfg)
        .or_else(|| {
            out.and_then(|p| p.extension())
                .filter(|e| e.eq_ignore_ascii_case("csv"))
                .map(|_| Format::Csv)
        })
        .unwrap_or(Format::Json)
}

/// Parse arguments, run the command, write the report and return the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return EXIT_CONFIG;
    }
    let args = cli.command.args().clone();
    let name = cli.command.name();

    let cfg = match args.config.as_deref().map(load_config).transpose() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            write_failure(name, &args, None, EXIT_CONFIG, &e);
            return EXIT_CONFIG;
        }
    };
    let out = args
        .out
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.output.path.clone()));
    let format = resolve_format(args.format, cfg.as_ref().and_then(|c| c.output.format), out.as_deref());

    match execute(&cli.command, cfg) {
        Ok(outcome) => {
            if matches!(cli.command, Command::Validate(_)) && out.is_none() {
                return outcome.code;
            }
            match write_report(&outcome.report, format, out.as_deref()) {
                Ok(()) => outcome.code,
                Err(e @ Error::Config { .. }) => {
                    eprintln!("error: {e}");
                    EXIT_CONFIG
                }
                Err(e) => {
                    eprintln!("error: cannot write report: {e}");
                    EXIT_NUMERICAL
                }
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.error);
            write_failure(name, &args, out.as_deref(), f.code, &f.error);
            f.code
        }
    }
}

/// Failures go to the JSON report when a report path is known.
fn write_failure(command: &str, args: &CommonArgs, out: Option<&Path>, code: i32, e: &Error) {
    let Some(path) = out.or(args.out.as_deref()) else {
        return;
    };
    let report = RunReport {
        command: command.to_string(),
        status: "error".into(),
        exit_code: code,
        geometry: None,
        profile: None,
        solver: None,
        theory: None,
        payload: None,
        error: Some(e.to_string()),
    };
    if let Err(w) = write_report(&report, Format::Json, Some(path)) {
        eprintln!("error: cannot write report: {w}");
    }
}
