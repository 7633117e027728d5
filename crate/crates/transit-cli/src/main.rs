//! `transit`: sampling, transforms, spectra, constants, densities and the
//! validation suite from the command line.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! usage or config error, 3 when a computation fails.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use transit_cli::commands;
use transit_cli::config::{Command, DensityView, ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(name = "transit", version, about = "Universal transit-time laws: experiments and validation")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Draw the limit law, or finite-eps transit times with --family.
    Sample(Common),
    /// KS distance of rescaled finite-eps transits to the limit law across eps.
    Converge(Common),
    /// Moment generating function by ODE shooting.
    Laplace(Common),
    /// Ground-state eigenvalue, tail rate and residue.
    Spectrum(Common),
    /// Density by transform inversion, histogram comparison or scale function.
    Density(Common),
    /// Asymptotic constants with closed-form/quadrature agreement.
    Constants(Common),
    /// The full validation suite.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment manifest (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Degree of the normal form.
    #[arg(long)]
    d: Option<u32>,
    /// Tilt; comma-separated list where the command takes several.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    mu: Vec<f64>,
    /// Noise level(s) of the finite-eps experiments.
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    /// Sample count.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Transform argument(s).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lambda: Vec<f64>,
    /// Primary numerical tolerance of the command.
    #[arg(long)]
    tol: Option<f64>,
    /// Finite-eps potential family (cubic, sine, sine_tilted, quartic, cos2, cos2_tilted).
    #[arg(long)]
    family: Option<String>,
    /// Density output.
    #[arg(long, value_enum)]
    view: Option<DensityView>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, common) = match cli.command {
        Cmd::Sample(c) => (Command::Sample, c),
        Cmd::Converge(c) => (Command::Converge, c),
        Cmd::Laplace(c) => (Command::Laplace, c),
        Cmd::Spectrum(c) => (Command::Spectrum, c),
        Cmd::Density(c) => (Command::Density, c),
        Cmd::Constants(c) => (Command::Constants, c),
        Cmd::Validate(c) => (Command::Validate, c),
    };
    let overrides = Overrides {
        d: common.d,
        mu: common.mu,
        eps: common.eps,
        n: common.n,
        seed: common.seed,
        out: common.out,
        lambda: common.lambda,
        tol: common.tol,
        family: common.family,
        view: common.view,
    };
    let resolved = common
        .config
        .as_deref()
        .map_or_else(|| Ok(ExperimentConfig::default()), ExperimentConfig::load)
        .and_then(|mut c| c.apply(cmd, &overrides).map(|_| c))
        .and_then(|c| c.validate(cmd).map(|_| c));
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match commands::run(cmd, &cfg) {
        Ok(outcome) => {
            for line in &outcome.notes {
                eprintln!("{line}");
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                eprintln!("checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
