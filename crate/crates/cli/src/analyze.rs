use std::path::{Path, PathBuf};

use maslov_core::analysis::{box_analysis, BoxOptions, BoxReport, LeavePoint, MorseReport, SideResult};
use maslov_core::closedform::{check_acondition, genericity_check, turing_assess, Genericity, TuringDiagnostics};
use maslov_core::flow::{linspace, ConjugatePoint, Grid, Problem, Tolerances, XTrace};
use maslov_core::rp1::{lift_path, LiftOptions, RP1Path, RP1Point};
use serde::Serialize;

use crate::config::Config;
use crate::error::CliError;
use crate::output::{num, write_csv, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SideIndices {
    pub bottom: i64,
    pub right: i64,
    pub top: i64,
    pub left: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProblemEcho {
    pub config: Config,
    pub grid: Grid,
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub problem: ProblemEcho,
    pub lambda_infinity: f64,
    pub delta: f64,
    pub conjugate_points: Vec<ConjugatePoint>,
    pub eigenvalues: Vec<f64>,
    pub sides: SideIndices,
    pub m_index: i64,
    pub m_bottom_right: i64,
    pub morse: MorseReport,
    pub interior_scanned: bool,
    pub leave_points: Vec<LeavePoint>,
    pub leave_index_sum: i64,
    pub m_zero_verified: Option<bool>,
    pub turing: Option<TuringDiagnostics>,
    pub genericity: Option<Genericity>,
    pub warnings: Vec<String>,
}

pub struct AnalyzeArgs {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub lambda_max: Option<f64>,
    pub nx: Option<usize>,
    pub tol_cross: Option<f64>,
    pub quiet: bool,
}

/// Closed-form diagnostics when the problem is a Turing setup `V = A`, `D = diag(1, d)`.
fn turing_section(cfg: &Config) -> Result<Option<TuringDiagnostics>, CliError> {
    let Some(a) = cfg.potential.matrix2() else { return Ok(None) };
    if cfg.diffusion.len() != 2 || cfg.diffusion[0] != 1.0 || check_acondition(&a).is_err() {
        return Ok(None);
    }
    Ok(Some(turing_assess(&a, cfg.diffusion[1], Some(cfg.length), 0.0)?))
}

fn genericity_section(cfg: &Config) -> Option<Genericity> {
    let v = cfg.potential.matrix2()?;
    (cfg.diffusion == [1.0, 1.0]).then(|| genericity_check(&v, cfg.length))
}

pub fn build_report(cfg: &Config, problem: &Problem) -> Result<(Report, [SideResult; 4]), CliError> {
    let opts = BoxOptions { scan_interior: cfg.scan_interior, lambda_max: cfg.lambda_max };
    let (b, sides): (BoxReport, _) = box_analysis(problem, &opts)?;
    let report = Report {
        problem: ProblemEcho { config: cfg.clone(), grid: problem.grid, tolerances: problem.tol },
        lambda_infinity: b.lambda_infinity,
        delta: b.delta,
        conjugate_points: b.conjugate_points,
        eigenvalues: b.eigenvalues,
        sides: SideIndices { bottom: b.ind_bottom, right: b.ind_right, top: b.ind_top, left: b.ind_left },
        m_index: b.m_index,
        m_bottom_right: b.m_bottom_right,
        morse: b.morse,
        interior_scanned: b.interior_scanned,
        leave_points: b.leave_points,
        leave_index_sum: b.leave_index_sum,
        m_zero_verified: b.m_zero_verified,
        turing: turing_section(cfg)?,
        genericity: genericity_section(cfg),
        warnings: b.warnings,
    };
    Ok((report, sides))
}

/// Lifted `[psi1 : psi2]` along `x` in `[x0, L]` at fixed lambda.
pub fn psi_path(problem: &Problem, lambda: f64, x0: f64, samples: usize) -> Result<RP1Path, CliError> {
    let trace = XTrace::new(problem, lambda, x0, problem.length)?;
    let xs = linspace(x0, problem.length, samples);
    let pts =
        xs.iter().map(|&x| trace.psi_at(x).and_then(|p| RP1Point::new(p.0, p.1))).collect::<Result<Vec<_>, _>>()?;
    let refiner = |x: f64| trace.psi_at(x).and_then(|p| RP1Point::new(p.0, p.1));
    let opts = LiftOptions { eps_cross: problem.tol.eps_cross, continuous: true, ..LiftOptions::default() };
    Ok(lift_path(&RP1Path::new(xs, pts)?, Some(&refiner), &opts)?)
}

fn theta_rows(path: &RP1Path) -> impl Iterator<Item = (f64, f64, f64, f64)> + '_ {
    let theta = path.theta.as_deref().unwrap_or(&[]);
    (0..path.len())
        .map(move |k| (path.params[k], path.points[k].x, path.points[k].y, theta.get(k).copied().unwrap_or(f64::NAN)))
}

fn write_tables(
    dir: &Path,
    cfg: &Config,
    problem: &Problem,
    report: &Report,
    sides: &[SideResult; 4],
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut rows = Vec::new();
    let mut crossings = Vec::new();
    for s in sides {
        for (k, (t, p1, p2, th)) in theta_rows(&s.path).enumerate() {
            rows.push(vec![
                s.side.name().to_string(),
                num(t),
                num(s.xs[k]),
                num(s.lambdas[k]),
                num(p1),
                num(p2),
                num(th),
            ]);
        }
        for c in &s.crossings {
            crossings.push(vec![s.side.name().to_string(), num(c.x), num(c.lambda), c.sign.to_string()]);
        }
    }
    write_csv(Some(&dir.join("sides.csv")), &["side", "t", "x", "lambda", "psi1", "psi2", "theta"], &rows)?;
    write_csv(Some(&dir.join("crossings.csv")), &["side", "x", "lambda", "sign"], &crossings)?;
    let leave: Vec<Vec<String>> = report
        .leave_points
        .iter()
        .map(|p| {
            let kind = serde_json::to_value(p.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            vec![
                num(p.x),
                num(p.lambda),
                p.i_minus.to_string(),
                p.i_plus.to_string(),
                p.local_index.to_string(),
                p.loop_index.to_string(),
                kind,
                num(p.residual),
            ]
        })
        .collect();
    write_csv(
        Some(&dir.join("leave_points.csv")),
        &["x", "lambda", "i_minus", "i_plus", "local_index", "loop_index", "kind", "residual"],
        &leave,
    )?;
    let conj: Vec<Vec<String>> =
        report.conjugate_points.iter().map(|c| vec![num(c.x), c.direction.to_string()]).collect();
    write_csv(Some(&dir.join("conjugate_points.csv")), &["x", "direction"], &conj)?;
    let eig: Vec<Vec<String>> = report.eigenvalues.iter().map(|&l| vec![num(l)]).collect();
    write_csv(Some(&dir.join("eigenvalues.csv")), &["lambda"], &eig)?;

    if let Some(lams) = &cfg.sweep.lambdas {
        let samples = cfg.sweep.x_samples.unwrap_or(401);
        for (k, lam) in lams.expand()?.into_iter().enumerate() {
            let path = psi_path(problem, lam, report.delta, samples)?;
            let rows: Vec<Vec<String>> =
                theta_rows(&path).map(|(x, p1, p2, th)| vec![num(lam), num(x), num(p1), num(p2), num(th)]).collect();
            write_csv(
                Some(&dir.join(format!("psi_lambda_{k:03}.csv"))),
                &["lambda", "x", "psi1", "psi2", "theta"],
                &rows,
            )?;
        }
    }
    Ok(())
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let mut cfg = Config::load(&args.config)?;
    cfg.override_with(args.lambda_max, args.nx, args.tol_cross);
    cfg.validate()?;
    let problem = cfg.problem()?;
    let (report, sides) = build_report(&cfg, &problem)?;
    let out = args.out.clone().or_else(|| cfg.output.report.clone());
    let csv = args.csv.clone().or_else(|| cfg.output.csv_dir.clone());
    if let Some(dir) = &csv {
        write_tables(dir, &cfg, &problem, &report, &sides)?;
    }
    write_json(&report, out.as_deref())?;
    if !args.quiet {
        let s = report.sides;
        eprintln!(
            "m = {} (sides {}, {}, {}, {}); {} conjugate point(s), {} eigenvalue(s), {} leave point(s), {} warning(s)",
            report.m_index,
            s.bottom,
            s.right,
            s.top,
            s.left,
            report.conjugate_points.len(),
            report.eigenvalues.len(),
            report.leave_points.len(),
            report.warnings.len()
        );
    }
    Ok(())
}
