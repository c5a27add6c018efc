use std::path::PathBuf;

use maslov_core::analysis::{box_index_with, BoxOptions};
use maslov_core::closedform::{check_acondition, d_star, turing_assess, TuringDiagnostics};
use maslov_core::flow::{turing_matrix, Boundary, Grid, Potential, Problem};
use nalgebra::{DMatrix, Matrix2};
use serde::Serialize;

use crate::config::{Config, RangeSpec};
use crate::error::CliError;
use crate::output::{num, opt, write_csv, write_json};

pub struct TuringArgs {
    pub config: Option<PathBuf>,
    pub a: [Option<f64>; 4],
    pub d: Option<f64>,
    pub d_sweep: Option<String>,
    pub length: Option<f64>,
    pub length_sweep: Option<String>,
    pub lambda_min: f64,
    pub box_check: bool,
    pub lambda_max: Option<f64>,
    pub nx: Option<usize>,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub quiet: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Row {
    pub d: f64,
    pub length: Option<f64>,
    pub diagnostics: TuringDiagnostics,
    /// Sum of local indices of the closed-form leave points with `lambda >= 0`.
    pub m_closed_form: Option<i64>,
    /// Boundary index of the numerically traced box (`--box`).
    pub m_box: Option<i64>,
    pub m_box_error: Option<String>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RegimeChange {
    pub length: Option<f64>,
    pub d_from: f64,
    pub d_to: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TuringReport {
    pub a: [[f64; 2]; 2],
    pub d_star: Option<f64>,
    pub rows: Vec<Row>,
    pub regime_changes: Vec<RegimeChange>,
}

struct Inputs {
    a: Matrix2<f64>,
    ds: Vec<f64>,
    lengths: Vec<Option<f64>>,
    grid: Grid,
}

fn inputs(args: &TuringArgs) -> Result<Inputs, CliError> {
    let cfg = args.config.as_ref().map(|p| Config::load(p)).transpose()?;
    let base = match &cfg {
        Some(c) => {
            c.potential.matrix2().ok_or_else(|| CliError::Config("turing needs a constant 2x2 potential".into()))?
        }
        None => turing_matrix(),
    };
    let mut a = base;
    for (k, v) in args.a.iter().enumerate() {
        if let Some(v) = v {
            a[(k / 2, k % 2)] = *v;
        }
    }
    let mut ds = match (&args.d, &args.d_sweep) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --d or --d-sweep".into())),
        (Some(d), None) => Some(vec![*d]),
        (None, Some(s)) => Some(RangeSpec::parse(s)?.expand()?),
        (None, None) => None,
    };
    let mut lengths = match (&args.length, &args.length_sweep) {
        (Some(_), Some(_)) => return Err(CliError::Config("give either --length or --length-sweep".into())),
        (Some(l), None) => Some(vec![*l]),
        (None, Some(s)) => Some(RangeSpec::parse(s)?.expand()?),
        (None, None) => None,
    };
    let mut grid = Grid::default();
    if let Some(c) = &cfg {
        if c.diffusion.len() != 2 || c.diffusion[0] != 1.0 {
            return Err(CliError::Config("turing needs diffusion [1, d]".into()));
        }
        if ds.is_none() {
            ds = Some(match &c.sweep.d {
                Some(v) => v.expand()?,
                None => vec![c.diffusion[1]],
            });
        }
        if lengths.is_none() {
            lengths = Some(match &c.sweep.length {
                Some(v) => v.expand()?,
                None => vec![c.length],
            });
        }
        grid = c.grid();
    }
    if let Some(nx) = args.nx {
        grid.nx_per_unit = nx;
    }
    let ds = ds.ok_or_else(|| CliError::Config("missing --d or --d-sweep".into()))?;
    if ds.iter().any(|d| !(*d > 0.0)) {
        return Err(CliError::Config("d must be positive".into()));
    }
    let lengths = match lengths {
        Some(v) if v.iter().any(|l| !(*l > 0.0)) => return Err(CliError::Config("length must be positive".into())),
        Some(v) => v.into_iter().map(Some).collect(),
        None => vec![None],
    };
    Ok(Inputs { a, ds, lengths, grid })
}

fn box_m(a: &Matrix2<f64>, d: f64, length: f64, grid: Grid, lambda_max: Option<f64>) -> Result<i64, CliError> {
    let v = DMatrix::from_row_slice(2, 2, &[a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]]);
    let p = Problem::new(length, vec![1.0, d], Potential::Constant(v), Boundary::Dirichlet)?.with_grid(grid);
    Ok(box_index_with(&p, &BoxOptions { scan_interior: false, lambda_max })?.m_index)
}

pub fn build(args: &TuringArgs) -> Result<TuringReport, CliError> {
    let inp = inputs(args)?;
    let a = inp.a;
    check_acondition(&a)?;
    let mut rows = Vec::new();
    for &length in &inp.lengths {
        for &d in &inp.ds {
            let diagnostics = turing_assess(&a, d, length, args.lambda_min)?;
            let m_closed_form = length.map(|_| {
                diagnostics.leave_points.iter().filter(|p| p.lambda >= 0.0).map(|p| i64::from(p.local_index)).sum()
            });
            let (m_box, m_box_error) = match (args.box_check, length) {
                (true, Some(l)) => match box_m(&a, d, l, inp.grid, args.lambda_max) {
                    Ok(m) => (Some(m), None),
                    Err(e) => (None, Some(e.to_string())),
                },
                _ => (None, None),
            };
            rows.push(Row { d, length, diagnostics, m_closed_form, m_box, m_box_error });
        }
    }
    let regime_changes = rows
        .windows(2)
        .filter(|w| w[0].length == w[1].length && w[0].diagnostics.regime != w[1].diagnostics.regime)
        .map(|w| RegimeChange { length: w[0].length, d_from: w[0].d, d_to: w[1].d })
        .collect();
    Ok(TuringReport { a: [[a[(0, 0)], a[(0, 1)]], [a[(1, 0)], a[(1, 1)]]], d_star: d_star(&a)?, rows, regime_changes })
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

pub fn run(args: &TuringArgs) -> Result<(), CliError> {
    let report = build(args)?;
    if let Some(path) = &args.csv {
        let rows: Vec<Vec<String>> = report
            .rows
            .iter()
            .map(|r| {
                let g = &r.diagnostics;
                vec![
                    num(r.d),
                    opt(r.length),
                    label(&g.regime),
                    opt(g.d_star),
                    opt(g.lambda_c),
                    opt(g.x_max),
                    opt(g.x_int),
                    r.m_closed_form.map(|m| m.to_string()).unwrap_or_default(),
                    r.m_box.map(|m| m.to_string()).unwrap_or_default(),
                ]
            })
            .collect();
        write_csv(
            Some(path),
            &["d", "length", "regime", "d_star", "lambda_c", "x_max", "x_int", "m_closed_form", "m_box"],
            &rows,
        )?;
    }
    write_json(&report, args.out.as_deref())?;
    if !args.quiet {
        let ds = report.d_star.map_or("none".to_string(), |v| format!("{v:.12}"));
        eprintln!("d* = {ds}; {} row(s), {} regime change(s)", report.rows.len(), report.regime_changes.len());
    }
    Ok(())
}
