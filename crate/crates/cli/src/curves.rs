use std::path::PathBuf;

use maslov_core::closedform::{detx_samples, eigencurve_samples, CurveRow};
use maslov_core::flow::{linspace, turing_matrix};
use nalgebra::DMatrix;

use crate::config::{Config, PotentialSpec, RangeSpec};
use crate::error::CliError;
use crate::output::{num, write_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Eigencurve,
    DetX,
}

pub struct CurvesArgs {
    pub config: PathBuf,
    pub kind: CurveKind,
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub samples: usize,
    pub n_max: usize,
    pub lambdas: Option<String>,
    pub csv: Option<PathBuf>,
    pub quiet: bool,
}

/// Comma list or START:STOP:STEP.
fn parse_lambdas(s: &str) -> Result<Vec<f64>, CliError> {
    if s.contains(':') {
        return RangeSpec::parse(s)?.expand();
    }
    s.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad lambda '{p}'")))).collect()
}

pub fn build(args: &CurvesArgs) -> Result<Vec<CurveRow>, CliError> {
    let cfg = Config::load(&args.config)?;
    let v = match &cfg.potential {
        PotentialSpec::Sampled { .. } => {
            return Err(CliError::Config("curves need a constant potential".into()));
        }
        PotentialSpec::TuringExample => {
            let a = turing_matrix();
            DMatrix::from_fn(2, 2, |i, j| a[(i, j)])
        }
        PotentialSpec::Constant { .. } => match cfg.potential.to_potential()? {
            maslov_core::flow::Potential::Constant(m) => m,
            _ => unreachable!(),
        },
    };
    if v.nrows() != cfg.diffusion.len() {
        return Err(CliError::Config("diffusion length does not match the potential".into()));
    }
    if args.samples < 2 {
        return Err(CliError::Config("--samples must be at least 2".into()));
    }
    let x_max = args.x_max.unwrap_or(cfg.length);
    let x_min = args.x_min.unwrap_or(x_max / args.samples as f64);
    if !(x_min > 0.0 && x_max > x_min) {
        return Err(CliError::Config(format!("need 0 < x_min < x_max, got {x_min}, {x_max}")));
    }
    let xs = linspace(x_min, x_max, args.samples);
    Ok(match args.kind {
        CurveKind::Eigencurve => eigencurve_samples(&v, &cfg.diffusion, &xs, args.n_max),
        CurveKind::DetX => {
            let a = cfg.potential.matrix2().ok_or_else(|| CliError::Config("detX needs a 2x2 potential".into()))?;
            let lambdas = match &args.lambdas {
                Some(s) => parse_lambdas(s)?,
                None => vec![0.0],
            };
            detx_samples(&a, [cfg.diffusion[0], cfg.diffusion[1]], &xs, &lambdas)
        }
    })
}

pub fn run(args: &CurvesArgs) -> Result<(), CliError> {
    let rows = build(args)?;
    let table: Vec<Vec<String>> =
        rows.iter().map(|r| vec![r.kind.clone(), num(r.x), num(r.lambda), num(r.value)]).collect();
    write_csv(args.csv.as_deref(), &["kind", "x", "lambda", "value"], &table)?;
    if !args.quiet {
        eprintln!("{} curve sample(s)", rows.len());
    }
    Ok(())
}
