mod analyze;
mod config;
mod curves;
mod error;
mod output;
mod turing;
mod wind;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Maslov box index, conjugate points and Turing diagnostics.
#[derive(Parser, Debug)]
#[command(name = "maslov", version)]
struct Cli {
    /// Suppress the summary line on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    Eigencurve,
    Detx,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Full box computation for a problem config; JSON report to stdout or --out.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for CSV tables.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Height of the box instead of the automatic bound.
        #[arg(long)]
        lambda_max: Option<f64>,
        /// RK4 steps per unit length.
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        tol_cross: Option<f64>,
    },
    /// Closed-form Turing diagnostics, optionally swept over d and L.
    Turing {
        /// Supplies A, d and L (and sweeps); flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        a11: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a12: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a21: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        a22: Option<f64>,
        #[arg(long)]
        d: Option<f64>,
        /// START:STOP:STEP
        #[arg(long)]
        d_sweep: Option<String>,
        #[arg(long)]
        length: Option<f64>,
        /// START:STOP:STEP
        #[arg(long)]
        length_sweep: Option<String>,
        /// Lowest lambda for listed leave points.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        lambda_min: f64,
        /// Also trace the box numerically for each row.
        #[arg(long = "box")]
        box_check: bool,
        #[arg(long)]
        lambda_max: Option<f64>,
        #[arg(long)]
        nx: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// CSV file with one row per (d, L).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Winding number of a sampled path in RP1 (CSV with t,x,y columns).
    Wind {
        path: PathBuf,
        #[arg(long)]
        tol_cross: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the lifted path (t,x,y,theta).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Eigencurve or det X samples as CSV.
    Curves {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long)]
        x_min: Option<f64>,
        #[arg(long)]
        x_max: Option<f64>,
        #[arg(long, default_value_t = 400)]
        samples: usize,
        /// Highest Fourier mode for eigencurves.
        #[arg(long, default_value_t = 10)]
        n_max: usize,
        /// Comma list or START:STOP:STEP (detx only).
        #[arg(long, allow_hyphen_values = true)]
        lambdas: Option<String>,
        /// Output file; stdout when absent.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Analyze { config, out, csv, lambda_max, nx, tol_cross } => {
            analyze::run(&analyze::AnalyzeArgs { config, out, csv, lambda_max, nx, tol_cross, quiet })
        }
        Command::Turing {
            config,
            a11,
            a12,
            a21,
            a22,
            d,
            d_sweep,
            length,
            length_sweep,
            lambda_min,
            box_check,
            lambda_max,
            nx,
            out,
            csv,
        } => turing::run(&turing::TuringArgs {
            config,
            a: [a11, a12, a21, a22],
            d,
            d_sweep,
            length,
            length_sweep,
            lambda_min,
            box_check,
            lambda_max,
            nx,
            out,
            csv,
            quiet,
        }),
        Command::Wind { path, tol_cross, out, csv } => wind::run(&wind::WindArgs { path, tol_cross, out, csv, quiet }),
        Command::Curves { config, kind, x_min, x_max, samples, n_max, lambdas, csv } => {
            let kind = match kind {
                Kind::Eigencurve => curves::CurveKind::Eigencurve,
                Kind::Detx => curves::CurveKind::DetX,
            };
            curves::run(&curves::CurvesArgs { config, kind, x_min, x_max, samples, n_max, lambdas, csv, quiet })
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let err = CliError::Config(e.to_string().trim_end().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
