//! Batch experiment runner behind the `roughpd` binary.
//!
//! Every command resolves an [`ExperimentConfig`] (the `--config` file with
//! flags layered on top), runs, and writes CSV tables and JSON reports.
//! CSV files start with `#` comments naming the command and the SHA-256 of
//! the resolved config plus input files; JSON reports carry the same hash.
//! Without `--out-dir` the primary table or report goes to stdout and
//! secondary files are skipped.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod config;
pub mod error;

pub use config::{DriverSpec, ExperimentConfig, OracleOverrides};
pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "roughpd",
    version,
    about = "Rough path experiments: p-variation, integrals, path-dependent RDEs"
)]
pub struct Cli {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output files. Without it the main output goes to stdout.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact, greedy and brute-force p-variation of a path file.
    Pvar(PvarArgs),
    /// Rough integral of a functional against a driver.
    Integrate(IntegrateArgs),
    /// Solve a path-dependent RDE by windowed Picard iteration.
    Solve(SolveArgs),
    /// Refinement study: exp-ode, chen-defect or remainder-scaling.
    Convergence(ConvergenceArgs),
    /// Cross-check against the brute-force oracles.
    Check(CheckArgs),
    /// Empirical regularity report of a functional.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct PvarArgs {
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Exponents, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Sub-interval `t,s`.
    #[arg(long, value_delimiter = ',')]
    pub interval: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    /// Path file; its smooth lift is the integrator.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Driver spec, used when no --path is given.
    #[arg(long)]
    pub driver: Option<String>,
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub interval: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Path file, `brownian:seed:n[:T[:d]]` or `linear:n`.
    #[arg(long)]
    pub driver: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// Drift functional (default `zero`).
    #[arg(long)]
    pub b: Option<String>,
    /// Initial value, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    /// exp-ode, chen-defect or remainder-scaling.
    #[arg(long)]
    pub study: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub p: Option<f64>,
    /// Functional of the remainder-scaling study.
    #[arg(long)]
    pub functional: Option<String>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Path file: DP p-variation against enumeration.
    #[arg(long)]
    pub path: Option<PathBuf>,
    /// Functional: analytic derivatives against finite differences.
    #[arg(long)]
    pub functional: Option<String>,
    /// Driver, with --sigma and --xi: solver against the fine Euler scheme.
    #[arg(long)]
    pub driver: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub b: Option<String>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xi: Option<Vec<f64>>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub fd_step: Option<f64>,
    #[arg(long)]
    pub enumeration_cap: Option<usize>,
    #[arg(long)]
    pub refinement_factor: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub functional: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub probes: Option<usize>,
}

fn interval(v: &Option<Vec<f64>>) -> CliResult<Option<[f64; 2]>> {
    match v.as_deref() {
        None => Ok(None),
        Some(&[t, s]) => Ok(Some([t, s])),
        Some(_) => Err(CliError::Usage("--interval takes two times t,s".into())),
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Pvar(_) => "pvar",
            Command::Integrate(_) => "integrate",
            Command::Solve(_) => "solve",
            Command::Convergence(_) => "convergence",
            Command::Check(_) => "check",
            Command::Report(_) => "report",
        }
    }

    /// The settings given as flags.
    pub fn flags(&self) -> CliResult<ExperimentConfig> {
        let mut c = ExperimentConfig::default();
        match self {
            Command::Pvar(a) => {
                c.path = a.path.clone();
                c.exponents = (!a.p.is_empty()).then(|| a.p.clone());
                c.interval = interval(&a.interval)?;
            }
            Command::Integrate(a) => {
                c.path = a.path.clone();
                c.driver = a.driver.clone();
                c.functional = a.functional.clone();
                c.p = a.p;
                c.interval = interval(&a.interval)?;
            }
            Command::Solve(a) => {
                c.driver = a.driver.clone();
                c.sigma = a.sigma.clone();
                c.b = a.b.clone();
                c.xi = a.xi.clone();
                c.p = a.p;
                c.tol = a.tol;
                c.max_iter = a.max_iter;
            }
            Command::Convergence(a) => {
                c.study = a.study.clone();
                c.seed = a.seed;
                c.p = a.p;
                c.functional = a.functional.clone();
            }
            Command::Check(a) => {
                c.path = a.path.clone();
                c.functional = a.functional.clone();
                c.driver = a.driver.clone();
                c.sigma = a.sigma.clone();
                c.b = a.b.clone();
                c.xi = a.xi.clone();
                c.p = a.p;
                c.seed = a.seed;
                c.probes = a.probes;
                if a.fd_step.is_some()
                    || a.enumeration_cap.is_some()
                    || a.refinement_factor.is_some()
                {
                    c.oracle = Some(OracleOverrides {
                        refinement_factor: a.refinement_factor,
                        enumeration_cap: a.enumeration_cap,
                        fd_step: a.fd_step,
                    });
                }
            }
            Command::Report(a) => {
                c.functional = a.functional.clone();
                c.p = a.p;
                c.seed = a.seed;
                c.probes = a.probes;
            }
        }
        Ok(c)
    }
}

/// Destination of command output.
pub struct Sink<'a> {
    out_dir: Option<PathBuf>,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

impl<'a> Sink<'a> {
    pub fn new(
        out_dir: Option<PathBuf>,
        stdout: &'a mut dyn Write,
        stderr: &'a mut dyn Write,
    ) -> Self {
        Sink {
            out_dir,
            stdout,
            stderr,
        }
    }

    /// Written to `out_dir/name`, or to stdout.
    pub fn primary(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        if !self.write_file(name, bytes)? {
            self.stdout.write_all(bytes)?;
        }
        Ok(())
    }

    /// Written to `out_dir/name` only.
    pub fn secondary(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        self.write_file(name, bytes)?;
        Ok(())
    }

    pub fn note(&mut self, msg: &str) -> CliResult<()> {
        writeln!(self.stderr, "{msg}")?;
        Ok(())
    }

    fn write_file(&mut self, name: &str, bytes: &[u8]) -> CliResult<bool> {
        let Some(dir) = &self.out_dir else {
            return Ok(false);
        };
        fs::create_dir_all(dir)?;
        let file = dir.join(name);
        fs::write(&file, bytes)?;
        writeln!(self.stderr, "wrote {}", file.display())?;
        Ok(true)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(text.as_bytes())
            } else {
                stdout.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "roughpd {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let base = match &cli.config {
        Some(file) => ExperimentConfig::load(file)?,
        None => ExperimentConfig::default(),
    };
    let mut flags = cli.command.flags()?;
    flags.out_dir = cli.out_dir.clone();
    let config = base.overlay(&flags);
    let mut sink = Sink::new(config.out_dir.clone(), stdout, stderr);
    let name = cli.command.name();
    match &cli.command {
        Command::Pvar(_) => commands::pvar(&config, &mut sink),
        Command::Integrate(_) => commands::integrate(&config, &mut sink),
        Command::Solve(_) => commands::solve(&config, &mut sink),
        Command::Convergence(_) => commands::convergence(&config, &mut sink),
        Command::Check(_) => commands::check(&config, &mut sink),
        Command::Report(_) => commands::report(&config, &mut sink),
    }
    .map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{m} (see roughpd {name} --help)")),
        other => other,
    })
}
