use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use zslq::matcore::Matrix;
use zslq_cli::{cmd_check_stability, cmd_report, cmd_solve, cmd_verify, CliError, Overrides, ProblemFile, Report};

#[derive(Parser)]
#[command(name = "zslq", version, about = "Stochastic LQ zero-sum games: stability, Riccati solutions, saddle points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Output {
    Json,
    Text,
}

#[derive(Args)]
struct Common {
    /// Problem file (JSON).
    problem: PathBuf,
    /// Monte-Carlo seed (overrides `sim.seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of sample paths (overrides `sim.paths`).
    #[arg(long)]
    paths: Option<usize>,
    /// Euler step (overrides `sim.dt`).
    #[arg(long)]
    dt: Option<f64>,
    /// Simulation horizon (overrides `sim.horizon`).
    #[arg(long)]
    horizon: Option<f64>,
    /// Riccati residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Stabilizer-search restarts.
    #[arg(long)]
    stab_budget: Option<usize>,
    /// Recorded time points per path.
    #[arg(long)]
    record_points: Option<usize>,
    /// Size of the gain deviations tried by `verify`.
    #[arg(long)]
    perturbation: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    output: Output,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            paths: self.paths,
            dt: self.dt,
            horizon: self.horizon,
            tol: self.tol,
            stab_budget: self.stab_budget,
            record_points: self.record_points,
            perturbation: self.perturbation,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// L2-stability of [A, C], and a stabilizer verdict or synthesis.
    CheckStability {
        #[command(flatten)]
        common: Common,
        /// Gain to test, as JSON rows, e.g. `[[-1]]`.
        #[arg(long, allow_hyphen_values = true)]
        theta: Option<String>,
    },
    /// Riccati solutions, classification and the saddle point.
    Solve {
        #[command(flatten)]
        common: Common,
    },
    /// Monte-Carlo check of the saddle point in a prior `solve` report.
    Verify {
        #[command(flatten)]
        common: Common,
        /// JSON report written by `solve --output json`.
        #[arg(long)]
        report: PathBuf,
    },
    /// `solve` followed by `verify`.
    Report {
        #[command(flatten)]
        common: Common,
    },
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<ProblemFile, CliError> {
    let src = read(path)?;
    ProblemFile::parse(&src).map_err(|e| CliError::Usage(format!("{}:{e}", path.display())))
}

fn parse_theta(s: &str) -> Result<Matrix<f64>, CliError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(s).map_err(|e| CliError::Usage(format!("--theta: {e}")))?;
    let w = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || w == 0 || rows.iter().any(|r| r.len() != w) {
        return Err(CliError::Usage("--theta must be a non-empty rectangular array of rows".into()));
    }
    Ok(Matrix::from_rows(&rows))
}

fn run(cli: Cli) -> Result<(Report, Output), CliError> {
    Ok(match cli.command {
        Command::CheckStability { common, theta } => {
            let p = load(&common.problem)?;
            let th = theta.as_deref().map(parse_theta).transpose()?;
            (cmd_check_stability(&p, th.as_ref(), &common.overrides())?, common.output)
        }
        Command::Solve { common } => {
            let p = load(&common.problem)?;
            (cmd_solve(&p, &common.overrides())?, common.output)
        }
        Command::Verify { common, report } => {
            let p = load(&common.problem)?;
            let prior = Report::from_json(&read(&report)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", report.display())))?;
            (cmd_verify(&p, &prior, &common.overrides())?, common.output)
        }
        Command::Report { common } => {
            let p = load(&common.problem)?;
            (cmd_report(&p, &common.overrides())?, common.output)
        }
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok((report, output)) => {
            match output {
                Output::Json => println!("{}", report.to_json()),
                Output::Text => print!("{}", report.to_text()),
            }
            ExitCode::from(report.status.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.status() as u8)
        }
    }
}
