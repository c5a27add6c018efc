use std::fs::File;
use std::path::PathBuf;

use maslov_core::rp1::{lift_path, read_path_csv, signed_crossings, wind, write_path_csv, Crossing, LiftOptions};
use serde::Serialize;

use crate::error::CliError;
use crate::output::write_json;

pub struct WindArgs {
    pub path: PathBuf,
    pub tol_cross: Option<f64>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindReport {
    pub wind: i64,
    pub crossings: Vec<Crossing>,
    pub samples: usize,
}

pub fn build(args: &WindArgs) -> Result<(WindReport, maslov_core::rp1::RP1Path), CliError> {
    let file =
        File::open(&args.path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", args.path.display())))?;
    let path = read_path_csv(file)?;
    let mut opts = LiftOptions::default();
    if let Some(eps) = args.tol_cross {
        if !(eps > 0.0) {
            return Err(CliError::Config(format!("--tol-cross must be positive, got {eps}")));
        }
        opts.eps_cross = eps;
    }
    let lifted = lift_path(&path, None, &opts)?;
    let report = WindReport { wind: wind(&lifted)?, crossings: signed_crossings(&lifted)?, samples: lifted.len() };
    Ok((report, lifted))
}

pub fn run(args: &WindArgs) -> Result<(), CliError> {
    let (report, lifted) = build(args)?;
    if let Some(p) = &args.csv {
        let f = File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        write_path_csv(&lifted, f)?;
    }
    write_json(&report, args.out.as_deref())?;
    if !args.quiet {
        eprintln!("Wind = {} ({} crossing(s))", report.wind, report.crossings.len());
    }
    Ok(())
}
