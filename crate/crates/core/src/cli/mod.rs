//! `shoot` command line: `solve`, `verify` and `list`.

pub mod output;

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::examples::{self, ExampleSpec};
use crate::jacobian::JacobianMode;
use crate::newton::{solve_bvp, SolveOptions};
use crate::ode::IntegratorConfig;
use crate::verify::{cross_check, VERIFY_THRESHOLD};

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(i32)]
pub enum ExitCode {
    Ok = 0,
    NotConverged = 1,
    InvalidInput = 2,
    IntegrationFailure = 3,
    SingularJacobian = 4,
    Io = 5,
}

impl ExitCode {
    pub fn code(self) -> i32 {
        self as i32
    }
}

impl From<&Error> for ExitCode {
    fn from(e: &Error) -> Self {
        match e {
            Error::SingularMatrix { .. } => ExitCode::SingularJacobian,
            Error::NotConverged(_) => ExitCode::NotConverged,
            e if e.is_integration_failure() => ExitCode::IntegrationFailure,
            _ => ExitCode::InvalidInput,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "shoot",
    version,
    about = "Shooting-method solver for two-point boundary value problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a built-in problem and print its boundary value table.
    Solve(SolveArgs),
    /// Compare forward, adjoint and finite-difference Jacobians.
    Verify(VerifyArgs),
    /// List built-in problems.
    List(ListArgs),
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Problem name (see `list`).
    #[arg(long)]
    pub problem: String,
    /// Unknown initial values, comma separated. Defaults to zeros.
    #[arg(long, allow_hyphen_values = true)]
    pub guess: Option<String>,
    /// Jacobian strategy: forward, adjoint or fd.
    #[arg(long, default_value = "forward")]
    pub jacobian: String,
    /// Integrator relative tolerance.
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    /// Integrator absolute tolerance.
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
    /// Maximum number of Newton iterations.
    #[arg(long, default_value_t = 25)]
    pub max_iter: usize,
    /// Parameter override `name=value`; may be repeated.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Trajectory CSV output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Newton iteration trace CSV output.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// SVG plot of the converged trajectory.
    #[arg(long)]
    pub svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Solve first and verify at the converged unknowns.
    #[arg(long)]
    pub at_solution: bool,
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[arg(long)]
    pub json: bool,
}

struct Failure {
    code: ExitCode,
    message: String,
}

impl Failure {
    fn new(code: ExitCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(ExitCode::InvalidInput, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::new(ExitCode::from(&e), e.to_string())
    }
}

type CmdResult = Result<ExitCode, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return e.exit_code();
        }
    };
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a, out, err),
        Command::Verify(a) => cmd_verify(a, out),
        Command::List(a) => cmd_list(a, out),
    };
    match result {
        Ok(code) => code.code(),
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code.code()
        }
    }
}

fn parse_guess(text: &str) -> Result<Vec<f64>, Failure> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Failure::invalid(format!("invalid guess component '{s}'")))
        })
        .collect()
}

fn parse_overrides(items: &[String]) -> Result<Vec<(String, f64)>, Failure> {
    items
        .iter()
        .map(|item| {
            let (name, value) = item
                .split_once('=')
                .ok_or_else(|| Failure::invalid(format!("override '{item}' is not NAME=VALUE")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| Failure::invalid(format!("override '{item}' has a non-numeric value")))?;
            Ok((name.trim().to_string(), value))
        })
        .collect()
}

struct Prepared {
    spec: ExampleSpec,
    guess: Vec<f64>,
    opts: SolveOptions,
}

fn prepare(args: &ProblemArgs) -> Result<Prepared, Failure> {
    let overrides = parse_overrides(&args.set)?;
    let spec = examples::build(&args.problem, &overrides)?;
    let unknowns = spec.problem.unknowns();
    let guess = match &args.guess {
        Some(text) => parse_guess(text)?,
        None => vec![0.0; unknowns],
    };
    if guess.len() != unknowns {
        return Err(Failure::invalid(format!(
            "problem {} has {unknowns} unknown initial value(s), guess has {}",
            spec.name,
            guess.len()
        )));
    }
    let mode: JacobianMode = args.jacobian.parse()?;
    let opts = SolveOptions {
        jacobian_mode: mode,
        max_iter: args.max_iter,
        integrator: IntegratorConfig::with_tolerances(args.rtol, args.atol),
        ..SolveOptions::default()
    };
    opts.validate()?;
    Ok(Prepared { spec, guess, opts })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), Failure> {
    let io_err = |e: io::Error| Failure::new(ExitCode::Io, format!("{}: {e}", path.display()));
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    f(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_solve(args: &SolveArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let Prepared { spec, guess, opts } = prepare(&args.problem)?;
    let report = solve_bvp(&spec.problem, &guess, &opts).map_err(|f| {
        let mut failure = Failure::from(f.error.clone());
        failure.message = f.to_string();
        failure
    })?;

    let status = if report.converged { "converged" } else { "not converged" };
    let io = |e: io::Error| Failure::new(ExitCode::Io, e.to_string());
    writeln!(out, "problem {}: {}", spec.name, spec.title).map_err(io)?;
    writeln!(
        out,
        "jacobian: {}, guess: {}, {} after {} Newton step(s)",
        report.strategy,
        fmt_vec(&guess),
        status,
        report.newton_steps()
    )
    .map_err(io)?;
    write!(out, "{}", output::boundary_table(&spec.labels, &report)).map_err(io)?;

    if let Some(path) = &args.out {
        write_file(path, |w| output::write_trajectory_csv(w, &report.final_trajectory))?;
    }
    if let Some(path) = &args.trace {
        write_file(path, |w| output::write_trace_csv(w, &report))?;
    }
    if let Some(path) = &args.svg {
        let svg = output::render_svg(&report.final_trajectory, &spec.labels, spec.title);
        write_file(path, |w| w.write_all(svg.as_bytes()))?;
    }

    if report.converged {
        Ok(ExitCode::Ok)
    } else {
        let _ = writeln!(
            err,
            "Newton iteration stopped ({:?}) with residual {:e}",
            report.stop_reason,
            report.final_residual_norm()
        );
        Ok(ExitCode::NotConverged)
    }
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let Prepared { spec, guess, opts } = prepare(&args.problem)?;
    let io = |e: io::Error| Failure::new(ExitCode::Io, e.to_string());
    let c = if args.at_solution {
        let report = solve_bvp(&spec.problem, &guess, &opts).map_err(|f| Failure::from(f.error))?;
        if !report.converged {
            return Err(Failure::new(
                ExitCode::NotConverged,
                format!("solve from {} did not converge", fmt_vec(&guess)),
            ));
        }
        report.c_final
    } else {
        guess
    };
    let cc = cross_check(&spec.problem, &c, &opts.integrator)?;
    writeln!(out, "problem {} at c = {}", spec.name, fmt_vec(&c)).map_err(io)?;
    writeln!(out, "|J_fwd - J_adj|max  = {:.3e}", cc.forward_vs_adjoint).map_err(io)?;
    writeln!(out, "|J_fwd - J_fd|max   = {:.3e}", cc.forward_vs_fd).map_err(io)?;
    writeln!(out, "theorem1 deviation  = {:.3e}", cc.theorem1).map_err(io)?;
    writeln!(out, "bilinear max drift  = {:.3e}", cc.bilinear_drift).map_err(io)?;
    let pass = cc.passes(VERIFY_THRESHOLD);
    writeln!(
        out,
        "{} (threshold {VERIFY_THRESHOLD:e})",
        if pass { "PASS" } else { "FAIL" }
    )
    .map_err(io)?;
    Ok(if pass { ExitCode::Ok } else { ExitCode::NotConverged })
}

fn cmd_list(args: &ListArgs, out: &mut dyn Write) -> CmdResult {
    let io = |e: io::Error| Failure::new(ExitCode::Io, e.to_string());
    let summaries: Vec<_> = examples::registry().iter().map(ExampleSpec::summary).collect();
    if args.json {
        let text = serde_json::to_string_pretty(&summaries).map_err(|e| Failure::new(ExitCode::Io, e.to_string()))?;
        writeln!(out, "{text}").map_err(io)?;
        return Ok(ExitCode::Ok);
    }
    for s in &summaries {
        let guesses: Vec<String> = s.default_guesses.iter().map(|g| fmt_vec(g)).collect();
        let params: Vec<String> = s.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
        writeln!(
            out,
            "{}  n={}  interval=[{}, {}]  unknowns={}  guesses={}{}",
            s.name,
            s.n,
            s.interval[0],
            s.interval[1],
            s.unknowns,
            guesses.join(" "),
            if params.is_empty() {
                String::new()
            } else {
                format!("  params: {}", params.join(" "))
            }
        )
        .map_err(io)?;
    }
    Ok(ExitCode::Ok)
}
