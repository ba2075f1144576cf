//! `momentbound` command-line interface.

mod commands;
mod reproduce;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use momentbound::qoi::Direction;
use momentbound::Error;

#[derive(Parser)]
#[command(
    name = "momentbound",
    version,
    about = "Robust bounds of quantities of interest over moment classes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Bound the QoI of a problem file and write the result as JSON.
    Bound {
        problem: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lower envelope of the output CDF on a grid, as CSV rows `h,inf_cdf`.
    Envelope {
        problem: PathBuf,
        /// `lo:hi:n`
        #[arg(long)]
        grid: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound a first-order or total Sobol index; `index` is one-based.
    Sobol {
        problem: PathBuf,
        #[arg(long)]
        index: usize,
        #[arg(long, value_enum, default_value_t = Which::First)]
        which: Which,
        #[arg(long, value_enum, default_value_t = Dir::Sup)]
        direction: Dir,
        #[arg(long, value_enum, default_value_t = Strategy::Direct)]
        strategy: Strategy,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rerun the flood study and compare with the published values.
    ReproduceCaseStudy {
        #[arg(long, value_enum)]
        section: Option<Section>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Coarser quadrature and fewer generations.
        #[arg(long)]
        quick: bool,
    },
    /// Search random feasible measures for values beyond the computed bound.
    Validate {
        problem: PathBuf,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    First,
    Total,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dir {
    Sup,
    Inf,
}

impl From<Dir> for Direction {
    fn from(d: Dir) -> Self {
        match d {
            Dir::Sup => Direction::Sup,
            Dir::Inf => Direction::Inf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Direct,
    Sweep,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Section {
    Quantile,
    Envelope,
    Sobol,
    Bayes,
}

/// Errors of a CLI run with their exit codes.
#[derive(Debug)]
enum Failure {
    Lib(Error),
    Io(PathBuf, std::io::Error),
    Usage(String),
    /// A check found violations; the report has been printed.
    Violations(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self::Lib(e)
    }
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Lib(Error::InfeasibleClass(_)) => 2,
            Self::Lib(Error::Model(_)) => 3,
            Self::Lib(Error::Parse { .. } | Error::Problem(_) | Error::Config(_) | Error::Expr(_))
            | Self::Lib(Error::DirectionMismatch(_))
            | Self::Usage(_) => 64,
            Self::Io(..) => 66,
            Self::Violations(_) | Self::Lib(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            Self::Lib(Error::Parse { line, column, message }) => {
                format!("malformed problem file at line {line}, column {column}: {message}")
            }
            Self::Lib(e) => e.to_string(),
            Self::Io(p, e) => format!("{}: {e}", p.display()),
            Self::Usage(m) => m.clone(),
            Self::Violations(n) => format!("{n} violations"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Bound { problem, seed, out } => commands::bound(&problem, seed, out.as_deref()),
        Command::Envelope {
            problem,
            grid,
            seed,
            out,
        } => commands::envelope(&problem, &grid, seed, out.as_deref()),
        Command::Sobol {
            problem,
            index,
            which,
            direction,
            strategy,
            seed,
            out,
        } => commands::sobol(
            &problem,
            index,
            matches!(which, Which::Total),
            direction.into(),
            match strategy {
                Strategy::Direct => momentbound::optim::SobolStrategy::Direct,
                Strategy::Sweep => momentbound::optim::SobolStrategy::Sweep,
            },
            seed,
            out.as_deref(),
        ),
        Command::ReproduceCaseStudy { section, seed, quick } => reproduce::run(section, seed, quick),
        Command::Validate { problem, trials, seed } => commands::validate(&problem, trials, seed),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
