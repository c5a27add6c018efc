//! Maslov box `[delta, L] x [0, lambda_inf]`: side indices, eigenvalue and
//! conjugate-point counts, Morse-type inequalities, interior leave points
//! and the large-diffusion bound.
//!
//! Sides are traversed counterclockwise: bottom (`x` up), right (`lambda` up),
//! top (`x` down), left (`lambda` down). Each side index is the winding of
//! `[psi1 : psi2]` along it.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{
    conjugate_points_from, delta_start, lambda_infinity, linspace, psi_trace, spectral_norm, ConjugatePoint, Problem,
    Propagator, XTrace,
};
use crate::rp1::{lift_path, refine_crossing, signed_crossings, wind, LiftOptions, RP1Path, RP1Point, Refiner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }

    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];
}

/// `delta` and `lambda_inf` of a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoxSetup {
    pub delta: f64,
    pub lambda_infinity: f64,
}

pub fn box_setup(problem: &Problem) -> Result<BoxSetup> {
    box_setup_with(problem, None)
}

/// Box setup with an optional override of the top edge height.
pub fn box_setup_with(problem: &Problem, lambda_max: Option<f64>) -> Result<BoxSetup> {
    let lambda_infinity = match lambda_max {
        Some(l) if !(l > 0.0) || !l.is_finite() => {
            return Err(Error::Config(format!("lambda_max must be positive, got {l}")));
        }
        Some(l) => l,
        None => lambda_infinity(problem),
    };
    let delta = delta_start(problem, &linspace(0.0, lambda_infinity, problem.grid.nlambda))?;
    Ok(BoxSetup { delta, lambda_infinity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SideCrossing {
    pub x: f64,
    pub lambda: f64,
    pub sign: i32,
}

/// Lifted side path with its index and refined crossings.
#[derive(Debug, Clone)]
pub struct SideResult {
    pub side: Side,
    pub index: i64,
    pub path: RP1Path,
    pub xs: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub crossings: Vec<SideCrossing>,
}

/// Number of lambda samples on the vertical sides.
pub fn lambda_samples(problem: &Problem, lambda_inf: f64) -> usize {
    let l = problem.length;
    let need = (4.0 * lambda_inf * l * l / (PI * PI * problem.d_min())).ceil() as usize;
    problem.grid.nlambda.max(need).max(2)
}

fn left_error(side: Side, x: f64, lambda: f64) -> Error {
    Error::LeftMaSpace { side: side.name().into(), x, lambda }
}

fn point(side: Side, x: f64, lambda: f64, p: (f64, f64)) -> Result<RP1Point> {
    RP1Point::new(p.0, p.1).map_err(|_| left_error(side, x, lambda))
}

/// Psi at `(x, lambda)` by a full propagation.
fn psi_point(problem: &Problem, x: f64, lambda: f64) -> Result<(f64, f64)> {
    Ok(psi_trace(problem, lambda, &[x])?[0])
}

/// Lifts a sampled side, checks for double roots, and counts the index.
fn finish_side(
    problem: &Problem,
    side: Side,
    params: Vec<f64>,
    psi: Vec<(f64, f64)>,
    coords: &(dyn Fn(f64) -> (f64, f64) + Sync),
    refiner: Refiner,
) -> Result<SideResult> {
    let scale = psi.iter().fold(0.0f64, |m, p| m.max(p.0.hypot(p.1)));
    let tol = problem.tol.double_root * scale;
    let mut points = Vec::with_capacity(psi.len());
    for (&t, &p) in params.iter().zip(&psi) {
        let (x, l) = coords(t);
        if p.0.hypot(p.1) <= tol {
            return Err(left_error(side, x, l));
        }
        points.push(point(side, x, l, p)?);
    }
    let raw = RP1Path::new(params, points)?;
    let opts = LiftOptions { eps_cross: problem.tol.eps_cross, continuous: true, ..LiftOptions::default() };
    let lifted = lift_path(&raw, Some(refiner), &opts)?;
    let span = (lifted.params[lifted.len() - 1] - lifted.params[0]).abs();
    let mut crossings = Vec::new();
    for c in signed_crossings(&lifted)? {
        let t = refine_crossing(&lifted, &c, refiner, problem.tol.root * span.max(1.0))?;
        let (x, l) = coords(t);
        let p = refiner(t).map_err(|_| left_error(side, x, l))?;
        if c.sign == 0 || p.norm() <= tol {
            return Err(left_error(side, x, l));
        }
        crossings.push(SideCrossing { x, lambda: l, sign: c.sign });
    }
    let index = wind(&lifted)?;
    let (xs, lambdas) = lifted.params.iter().map(|&t| coords(t)).unzip();
    Ok(SideResult { side, index, path: lifted, xs, lambdas, crossings })
}

fn horizontal_side(problem: &Problem, side: Side, lambda: f64, x0: f64, x1: f64) -> Result<SideResult> {
    let trace = XTrace::new(problem, lambda, x0, x1)?;
    side_from_trace(problem, side, lambda, &trace)
}

fn side_from_trace(problem: &Problem, side: Side, lambda: f64, trace: &XTrace) -> Result<SideResult> {
    let xs = trace.xs();
    let reversed = side == Side::Top;
    let (params, psi): (Vec<f64>, Vec<(f64, f64)>) = if reversed {
        xs.iter().rev().map(|&x| -x).zip(trace.psi.iter().rev().copied()).unzip()
    } else {
        (xs, trace.psi.clone())
    };
    let coords = move |t: f64| (if reversed { -t } else { t }, lambda);
    let refiner = |t: f64| -> Result<RP1Point> {
        let x = if reversed { -t } else { t };
        point(side, x, lambda, trace.psi_at(x)?)
    };
    finish_side(problem, side, params, psi, &coords, &refiner)
}

fn vertical_side(problem: &Problem, side: Side, x: f64, l0: f64, l1: f64, count: usize) -> Result<SideResult> {
    let reversed = side == Side::Left;
    let lams = linspace(l0, l1, count);
    let psi: Vec<(f64, f64)> = lams.par_iter().map(|&l| psi_point(problem, x, l)).collect::<Result<_>>()?;
    let params: Vec<f64> = lams.iter().map(|&l| if reversed { -l } else { l }).collect();
    let coords = move |t: f64| (x, if reversed { -t } else { t });
    let refiner = |t: f64| -> Result<RP1Point> {
        let l = if reversed { -t } else { t };
        point(side, x, l, psi_point(problem, x, l)?)
    };
    finish_side(problem, side, params, psi, &coords, &refiner)
}

pub fn side_path(problem: &Problem, setup: &BoxSetup, side: Side) -> Result<SideResult> {
    let (d, li, l) = (setup.delta, setup.lambda_infinity, problem.length);
    let count = lambda_samples(problem, li);
    match side {
        Side::Bottom => horizontal_side(problem, side, 0.0, d, l),
        Side::Top => horizontal_side(problem, side, li, d, l),
        Side::Right => vertical_side(problem, side, l, 0.0, li, count),
        Side::Left => vertical_side(problem, side, d, li, 0.0, count),
    }
}

pub fn side_index(problem: &Problem, side: Side) -> Result<i64> {
    let setup = box_setup(problem)?;
    Ok(side_path(problem, &setup, side)?.index)
}

fn merge_values(mut v: Vec<f64>, radius: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().is_none_or(|&last| x - last > radius) {
            out.push(x);
        }
    }
    out
}

/// Distinct eigenvalues in `[0, lambda_inf]` from the crossings of a right side.
pub fn eigenvalues_from_side(problem: &Problem, right: &SideResult, lambda_inf: f64) -> Vec<f64> {
    let vals = right.crossings.iter().map(|c| c.lambda).filter(|&l| l >= 0.0).collect();
    merge_values(vals, problem.tol.merge * lambda_inf.max(1.0))
}

pub fn eigenvalue_crossings(problem: &Problem) -> Result<Vec<f64>> {
    let setup = box_setup(problem)?;
    let right = side_path(problem, &setup, Side::Right)?;
    Ok(eigenvalues_from_side(problem, &right, setup.lambda_infinity))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MorseReport {
    pub nonnegative_eigenvalues: usize,
    pub positive_eigenvalues: usize,
    /// Conjugate points in `(0, L]`.
    pub conjugate_closed: usize,
    /// Conjugate points in `(0, L)`.
    pub conjugate_open: usize,
    pub m_index: i64,
    /// `#nonneg >= #conj(0, L] - m`.
    pub morse_holds: bool,
    /// `#pos >= #conj(0, L) - m`.
    pub cpbound_holds: bool,
    pub equality: bool,
}

pub fn morse_verdicts(
    problem: &Problem,
    eigenvalues: &[f64],
    conjugate: &[ConjugatePoint],
    m_index: i64,
    lambda_inf: f64,
) -> MorseReport {
    let zero = problem.tol.merge * lambda_inf.max(1.0);
    let end = problem.length * (1.0 - problem.tol.merge);
    let nonneg = eigenvalues.len();
    let pos = eigenvalues.iter().filter(|&&l| l > zero).count();
    let closed = conjugate.len();
    let open = conjugate.iter().filter(|c| c.x < end).count();
    MorseReport {
        nonnegative_eigenvalues: nonneg,
        positive_eigenvalues: pos,
        conjugate_closed: closed,
        conjugate_open: open,
        m_index,
        morse_holds: nonneg as i64 >= closed as i64 - m_index,
        cpbound_holds: pos as i64 >= open as i64 - m_index,
        equality: nonneg as i64 == closed as i64 - m_index,
    }
}

pub fn morse_report(problem: &Problem) -> Result<MorseReport> {
    Ok(box_index_with(problem, &BoxOptions { scan_interior: false, ..BoxOptions::default() })?.morse)
}

/// Index of a small counterclockwise loop around a leave point.
pub fn local_index(i_minus: i64, i_plus: i64) -> i64 {
    2 * (i_minus - i_plus)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Region {
    pub x0: f64,
    pub x1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeaveKind {
    /// Branches on one side only (maximum or minimum of a zero curve).
    Extremum,
    /// Branches pass through.
    Crossing,
    /// Branch counts and loop winding disagree.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeavePoint {
    pub x: f64,
    pub lambda: f64,
    pub i_minus: i64,
    pub i_plus: i64,
    pub local_index: i64,
    /// Winding of `[psi1 : psi2]` around a small rectangle.
    pub loop_index: i64,
    pub kind: LeaveKind,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaveScan {
    pub points: Vec<LeavePoint>,
    pub candidates: usize,
    pub warnings: Vec<String>,
}

struct GEval {
    g: (f64, f64),
    jac: [[f64; 2]; 2],
}

fn eval_g(problem: &Problem, x: f64, lambda: f64, h_lambda: f64) -> Result<GEval> {
    let prop = Propagator::new(problem, lambda);
    let mut st = prop.initial()?;
    prop.advance(&mut st, x)?;
    let s = prop.sample(&st);
    let (dx1, dx2) = (s.dpsi1(), prop.dpsi2(&s));
    let up = psi_point(problem, x, lambda + h_lambda)?;
    let dn = psi_point(problem, x, lambda - h_lambda)?;
    let dl1 = (up.0 - dn.0) / (2.0 * h_lambda);
    let dl2 = (up.1 - dn.1) / (2.0 * h_lambda);
    Ok(GEval { g: (s.psi1, s.psi2), jac: [[dx1, dl1], [dx2, dl2]] })
}

const POLISH_TOL: f64 = 1e-10;

/// Levenberg-Marquardt on `G = (psi1, psi2)` in cell-scaled coordinates.
fn polish(problem: &Problem, x0: f64, l0: f64, sx: f64, sl: f64) -> Result<Option<(f64, f64, f64)>> {
    let (mut x, mut l) = (x0, l0);
    let hl = 1e-6 * sl.max(1e-9);
    let res = |g: (f64, f64)| g.0.hypot(g.1);
    let mut mu = 1e-6;
    let xmax = problem.length;
    // Keep iterating past the tolerance: at crossings the Jacobian is singular
    // and a small residual alone does not pin the position.
    for _ in 0..200 {
        let e = eval_g(problem, x, l, hl)?;
        let r = res(e.g);
        if r == 0.0 {
            break;
        }
        let j = [[e.jac[0][0] * sx, e.jac[0][1] * sl], [e.jac[1][0] * sx, e.jac[1][1] * sl]];
        let jtj = [
            [j[0][0] * j[0][0] + j[1][0] * j[1][0], j[0][0] * j[0][1] + j[1][0] * j[1][1]],
            [j[0][0] * j[0][1] + j[1][0] * j[1][1], j[0][1] * j[0][1] + j[1][1] * j[1][1]],
        ];
        let jtg = [j[0][0] * e.g.0 + j[1][0] * e.g.1, j[0][1] * e.g.0 + j[1][1] * e.g.1];
        let mut accepted = false;
        for _ in 0..40 {
            let a = [[jtj[0][0] * (1.0 + mu), jtj[0][1]], [jtj[1][0], jtj[1][1] * (1.0 + mu)]];
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            if det.abs() < 1e-300 {
                mu *= 10.0;
                continue;
            }
            let du = -(a[1][1] * jtg[0] - a[0][1] * jtg[1]) / det;
            let dv = -(a[0][0] * jtg[1] - a[1][0] * jtg[0]) / det;
            let (xn, ln) = (x + du * sx, l + dv * sl);
            if !(xn > 0.0 && xn <= xmax) {
                mu *= 10.0;
                continue;
            }
            let gn = psi_point(problem, xn, ln)?;
            if res(gn) < r {
                x = xn;
                l = ln;
                mu = (mu * 0.3).max(1e-12);
                accepted = du.hypot(dv) > 1e-13;
                break;
            }
            mu *= 10.0;
        }
        if !accepted {
            break;
        }
        if (x - x0).abs() > 4.0 * sx || (l - l0).abs() > 4.0 * sl {
            return Ok(None);
        }
    }
    let r = res(psi_point(problem, x, l)?);
    Ok(if r <= POLISH_TOL { Some((x, l, r)) } else { None })
}

fn sign_changes(v: &[f64]) -> usize {
    v.windows(2).filter(|w| (w[0] < 0.0) != (w[1] < 0.0) || (w[0] == 0.0) != (w[1] == 0.0)).count()
}

/// Zeros of `psi1` along `x` at fixed lambda, as sample intervals.
fn zero_positions(problem: &Problem, lambda: f64, xs: &[f64]) -> Result<Vec<f64>> {
    let tr = psi_trace(problem, lambda, xs)?;
    Ok(xs
        .windows(2)
        .zip(tr.windows(2))
        .filter(|(_, p)| (p[0].0 < 0.0) != (p[1].0 < 0.0))
        .map(|(x, p)| x[0] + (x[1] - x[0]) * p[0].0 / (p[0].0 - p[1].0))
        .collect())
}

const EDGE_SAMPLES: usize = 201;

/// Branch counts and loop winding on a thin rectangle around `(x, lambda)`.
fn classify(problem: &Problem, x: f64, lambda: f64, cell_x: f64, cell_l: f64) -> Result<(i64, i64, i64, usize, usize)> {
    let hx = (2.0 * cell_x).min(0.5 * x).min(0.5 * (problem.length - x));
    if !(hx > 0.0) {
        return Err(Error::Numerical("leave point on the box edge".into()));
    }
    let (xa, xb) = (x - hx, x + hx);
    let mut hl = cell_l;
    let side_clear = |hl: f64| -> Result<bool> {
        let lams = linspace(lambda - hl, lambda + hl, 33);
        for xe in [xa, xb] {
            let v: Vec<f64> =
                lams.par_iter().map(|&l| psi_point(problem, xe, l).map(|p| p.0)).collect::<Result<_>>()?;
            if sign_changes(&v) > 0 {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let mut clear = false;
    for _ in 0..30 {
        if side_clear(hl)? {
            clear = true;
            break;
        }
        hl *= 0.25;
    }
    if !clear {
        return Err(Error::Numerical("could not separate zero branches from the rectangle sides".into()));
    }
    let xs = linspace(xa, xb, EDGE_SAMPLES);
    let bottom = zero_positions(problem, lambda - hl, &xs)?;
    let top = zero_positions(problem, lambda + hl, &xs)?;
    let i_minus = bottom.iter().filter(|&&z| z < x).count() as i64;
    let i_plus = top.iter().filter(|&&z| z > x).count() as i64;

    let mut loop_index = 0;
    for (side, start) in [(Side::Bottom, lambda - hl), (Side::Top, lambda + hl)] {
        loop_index += horizontal_side(problem, side, start, xa, xb)?.index;
    }
    for (side, xe) in [(Side::Right, xb), (Side::Left, xa)] {
        let (l0, l1) = if side == Side::Right { (lambda - hl, lambda + hl) } else { (lambda + hl, lambda - hl) };
        loop_index += vertical_side(problem, side, xe, l0, l1, 65)?.index;
    }
    Ok((i_minus, i_plus, loop_index, bottom.len(), top.len()))
}

fn corner_degree(c: [(f64, f64); 4]) -> i64 {
    let mut total = 0.0;
    for k in 0..4 {
        let (a, b) = (c[k], c[(k + 1) % 4]);
        let mut d = b.1.atan2(b.0) - a.1.atan2(a.0);
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        total += d;
    }
    (total / (2.0 * PI)).round() as i64
}

/// Grid scan of `G = (psi1, psi2)` for common zeros, polished and classified.
pub fn leave_points_detect(problem: &Problem, region: &Region) -> Result<LeaveScan> {
    let nx = problem.grid.scan_nx.max(2);
    let nl = problem.grid.scan_nlambda.max(2);
    let xs = linspace(region.x0, region.x1, nx + 1);
    let ls = linspace(region.lambda0, region.lambda1, nl + 1);
    let cell_x = (region.x1 - region.x0) / nx as f64;
    let cell_l = (region.lambda1 - region.lambda0) / nl as f64;
    let rows: Vec<Vec<(f64, f64)>> = ls.par_iter().map(|&l| psi_trace(problem, l, &xs)).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for j in 0..nl {
        for i in 0..nx {
            let c = [rows[j][i], rows[j][i + 1], rows[j + 1][i + 1], rows[j + 1][i]];
            let deg = if c.iter().any(|p| p.0 == 0.0 && p.1 == 0.0) { 1 } else { corner_degree(c) };
            let s1 = c.iter().any(|p| p.0 < 0.0) && c.iter().any(|p| p.0 >= 0.0);
            let s2 = c.iter().any(|p| p.1 < 0.0) && c.iter().any(|p| p.1 >= 0.0);
            if deg != 0 || (s1 && s2) {
                cells.push((i, j));
            }
        }
    }
    let candidates = cells.len();
    let depth = problem.grid.refine_depth;
    let polished: Vec<Option<(f64, f64, f64)>> = cells
        .par_iter()
        .map(|&(i, j)| -> Result<Option<(f64, f64, f64)>> {
            for level in 0..=depth {
                let k = 1usize << level;
                for a in 0..k {
                    for b in 0..k {
                        let x0 = xs[i] + cell_x * (a as f64 + 0.5) / k as f64;
                        let l0 = ls[j] + cell_l * (b as f64 + 0.5) / k as f64;
                        if let Some(p) = polish(problem, x0, l0, cell_x, cell_l)? {
                            return Ok(Some(p));
                        }
                    }
                }
            }
            Ok(None)
        })
        .collect::<Result<_>>()?;

    let mut found: Vec<(f64, f64, f64)> = Vec::new();
    let mut warnings = Vec::new();
    for p in polished.into_iter().flatten() {
        let inside = p.0 >= region.x0 - 0.5 * cell_x
            && p.0 <= region.x1 + 0.5 * cell_x
            && p.1 >= region.lambda0 - 0.5 * cell_l
            && p.1 <= region.lambda1 + 0.5 * cell_l;
        if !inside {
            continue;
        }
        let near = found.iter().find(|q| ((q.0 - p.0) / cell_x).hypot((q.1 - p.1) / cell_l) < 1.0);
        match near {
            Some(q) => {
                if ((q.0 - p.0) / cell_x).hypot((q.1 - p.1) / cell_l) > 1e-4 {
                    warnings.push(format!("unresolved leave-point cluster near x = {:.6}, lambda = {:.6}", p.0, p.1));
                }
            }
            None => found.push(p),
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let mut points = Vec::with_capacity(found.len());
    for (x, l, residual) in found {
        match classify(problem, x, l, cell_x, cell_l) {
            Ok((im, ip, loop_index, nb, nt)) => {
                let li = local_index(im, ip);
                let kind = if li != loop_index {
                    warnings.push(format!(
                        "unresolved leave point at x = {x:.6}, lambda = {l:.6}: branch counts give {li}, loop gives {loop_index}"
                    ));
                    LeaveKind::Unresolved
                } else if nb == 0 || nt == 0 {
                    LeaveKind::Extremum
                } else {
                    LeaveKind::Crossing
                };
                points.push(LeavePoint {
                    x,
                    lambda: l,
                    i_minus: im,
                    i_plus: ip,
                    local_index: li,
                    loop_index,
                    kind,
                    residual,
                });
            }
            Err(e) => {
                warnings.push(format!("unresolved leave point at x = {x:.6}, lambda = {l:.6}: {e}"));
                points.push(LeavePoint {
                    x,
                    lambda: l,
                    i_minus: 0,
                    i_plus: 0,
                    local_index: 0,
                    loop_index: 0,
                    kind: LeaveKind::Unresolved,
                    residual,
                });
            }
        }
    }
    Ok(LeaveScan { points, candidates, warnings })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxReport {
    pub delta: f64,
    pub lambda_infinity: f64,
    pub ind_bottom: i64,
    pub ind_right: i64,
    pub ind_top: i64,
    pub ind_left: i64,
    pub m_index: i64,
    /// `ind_bottom + ind_right`.
    pub m_bottom_right: i64,
    pub conjugate_points: Vec<ConjugatePoint>,
    pub eigenvalues: Vec<f64>,
    pub morse: MorseReport,
    pub interior_scanned: bool,
    pub leave_points: Vec<LeavePoint>,
    pub leave_index_sum: i64,
    /// Set when the scan found no leave points: whether `m = 0` as predicted.
    pub m_zero_verified: Option<bool>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOptions {
    pub scan_interior: bool,
    /// Replaces the automatic `lambda_infinity`.
    pub lambda_max: Option<f64>,
}

impl Default for BoxOptions {
    fn default() -> Self {
        BoxOptions { scan_interior: true, lambda_max: None }
    }
}

/// Side results of a box, computed concurrently.
pub fn box_sides(problem: &Problem, setup: &BoxSetup) -> Result<[SideResult; 4]> {
    let ((b, t), (r, l)) = rayon::join(
        || rayon::join(|| side_path(problem, setup, Side::Bottom), || side_path(problem, setup, Side::Top)),
        || rayon::join(|| side_path(problem, setup, Side::Right), || side_path(problem, setup, Side::Left)),
    );
    Ok([b?, r?, t?, l?])
}

pub fn box_index(problem: &Problem) -> Result<BoxReport> {
    box_index_with(problem, &BoxOptions::default())
}

pub fn box_index_with(problem: &Problem, opts: &BoxOptions) -> Result<BoxReport> {
    box_analysis(problem, opts).map(|(r, _)| r)
}

/// Box report together with the four lifted sides.
pub fn box_analysis(problem: &Problem, opts: &BoxOptions) -> Result<(BoxReport, [SideResult; 4])> {
    let setup = box_setup_with(problem, opts.lambda_max)?;
    let [bottom, right, top, left] = box_sides(problem, &setup)?;
    let mut warnings = Vec::new();
    let bound = lambda_infinity(problem);
    if setup.lambda_infinity < bound {
        warnings.push(format!("lambda_max {} is below the eigenvalue bound {bound}", setup.lambda_infinity));
    }
    if top.index != 0 {
        warnings.push(format!("top side index {} is nonzero", top.index));
    }
    if left.index != 0 {
        warnings.push(format!("left side index {} is nonzero", left.index));
    }
    let m_index = bottom.index + right.index + top.index + left.index;
    let conjugate_points = conjugate_points_from(problem, setup.delta)?;
    let eigenvalues = eigenvalues_from_side(problem, &right, setup.lambda_infinity);
    let morse = morse_verdicts(problem, &eigenvalues, &conjugate_points, m_index, setup.lambda_infinity);
    let (leave_points, m_zero_verified, leave_index_sum) = if opts.scan_interior {
        let region = Region { x0: setup.delta, x1: problem.length, lambda0: 0.0, lambda1: setup.lambda_infinity };
        let scan = leave_points_detect(problem, &region)?;
        warnings.extend(scan.warnings);
        let sum: i64 = scan.points.iter().map(|p| p.local_index).sum();
        if sum != m_index {
            warnings.push(format!("leave-point local indices sum to {sum}, boundary index is {m_index}"));
        }
        let verified = if scan.points.is_empty() { Some(m_index == 0) } else { None };
        (scan.points, verified, sum)
    } else {
        (Vec::new(), None, 0)
    };
    let report = BoxReport {
        delta: setup.delta,
        lambda_infinity: setup.lambda_infinity,
        ind_bottom: bottom.index,
        ind_right: right.index,
        ind_top: top.index,
        ind_left: left.index,
        m_index,
        m_bottom_right: bottom.index + right.index,
        conjugate_points,
        eigenvalues,
        morse,
        interior_scanned: opts.scan_interior,
        leave_points,
        leave_index_sum,
        m_zero_verified,
        warnings,
    };
    Ok((report, [bottom, right, top, left]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SufficientDelta {
    /// Lower bound on the diffusion coefficients (their minimum).
    pub d_star: f64,
    pub lambda_infinity: f64,
    pub max_b_norm: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c: f64,
    pub delta: f64,
}

/// Threshold on `d_j d_k` (`j != k`) keeping `psi1^2 + psi2^2 > 0` on the box,
/// with `B = lambda I - V(x)` maximized over `[0, L] x [0, lambda_inf]`.
pub fn sufficient_delta(problem: &Problem) -> SufficientDelta {
    sufficient_delta_with(problem, problem.d_min())
}

/// Same bound for a prescribed lower bound `d_star` on the diffusion coefficients.
pub fn sufficient_delta_with(problem: &Problem, d_star: f64) -> SufficientDelta {
    let n = problem.n();
    let li = lambda_infinity(problem);
    let xs = problem.potential.check_points(problem.length);
    let mut max_b = 0.0f64;
    let mut max_diag = vec![0.0f64; n];
    for &x in &xs {
        let v = problem.potential.at(x);
        for lam in [0.0, li] {
            let mut b = -v.clone();
            for j in 0..n {
                b[(j, j)] += lam;
                max_diag[j] = max_diag[j].max(b[(j, j)].abs());
            }
            max_b = max_b.max(spectral_norm(&b));
        }
    }
    let nf = n as f64;
    let c1 = nf * (max_b + 1.0 / d_star);
    let c2 = 1.0 + max_diag.iter().map(|b| b / d_star).sum::<f64>();
    let c3 = 0.5 * (nf * (nf - 1.0) / d_star).powi(2);
    let c = 2.0 * c1 + c2 + c3;
    let delta = 2.0 * (c * problem.length).exp_m1() / c;
    SufficientDelta { d_star, lambda_infinity: li, max_b_norm: max_b, c1, c2, c3, c, delta }
}

/// Whether every product `d_j d_k`, `j != k`, is at least `delta`.
pub fn pairwise_ok(diffusion: &[f64], delta: f64) -> bool {
    (0..diffusion.len()).all(|j| (j + 1..diffusion.len()).all(|k| diffusion[j] * diffusion[k] >= delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{Boundary, Potential};
    use nalgebra::DMatrix;

    fn diag91() -> Problem {
        Problem::new(
            2.0,
            vec![1.0, 1.0],
            Potential::Constant(DMatrix::from_row_slice(2, 2, &[9.0, 0.0, 0.0, 1.0])),
            Boundary::Dirichlet,
        )
        .unwrap()
    }

    #[test]
    fn local_index_formula() {
        assert_eq!(local_index(1, 1), 0);
        assert_eq!(local_index(1, 0), 2);
        assert_eq!(local_index(0, 2), -4);
    }

    #[test]
    fn diag_box() {
        let p = diag91();
        let r = box_index_with(&p, &BoxOptions { scan_interior: false, ..BoxOptions::default() }).unwrap();
        assert_eq!((r.ind_bottom, r.ind_right, r.ind_top, r.ind_left), (1, -1, 0, 0));
        assert_eq!(r.m_index, 0);
        assert_eq!(r.conjugate_points.len(), 1);
        assert!((r.conjugate_points[0].x - PI / 3.0).abs() < 1e-8);
        assert_eq!(r.eigenvalues.len(), 1);
        assert!((r.eigenvalues[0] - (9.0 - PI * PI / 4.0)).abs() < 1e-8);
        assert!(r.morse.morse_holds && r.morse.equality && r.morse.cpbound_holds);
    }

    #[test]
    fn negative_definite_is_trivial() {
        let p = Problem::new(3.0, vec![1.0, 2.0], Potential::Constant(-DMatrix::identity(2, 2)), Boundary::Dirichlet)
            .unwrap();
        let r = box_index(&p).unwrap();
        assert_eq!((r.ind_bottom, r.ind_right, r.ind_top, r.ind_left, r.m_index), (0, 0, 0, 0, 0));
        assert!(r.eigenvalues.is_empty() && r.conjugate_points.is_empty() && r.leave_points.is_empty());
        assert_eq!(r.m_zero_verified, Some(true));
    }

    #[test]
    fn scalar_spectrum() {
        let p = Problem::new(
            1.0,
            vec![1.0],
            Potential::Constant(DMatrix::from_element(1, 1, 2.0 * PI * PI)),
            Boundary::Dirichlet,
        )
        .unwrap();
        let e = eigenvalue_crossings(&p).unwrap();
        assert_eq!(e.len(), 1);
        assert!((e[0] - PI * PI).abs() < 1e-8);
    }

    #[test]
    fn sufficient_delta_constants() {
        let p =
            Problem::new(1.0, vec![1.0, 1.0], Potential::Constant(DMatrix::zeros(2, 2)), Boundary::Neumann).unwrap();
        let s = sufficient_delta(&p);
        assert_eq!(s.lambda_infinity, 1.0);
        assert_eq!((s.c1, s.c2, s.c3), (4.0, 3.0, 2.0));
        assert!((s.delta - 2.0 * (13f64.exp() - 1.0) / 13.0).abs() < 1e-9 * s.delta);
        let one = Problem::new(1.0, vec![2.0], Potential::Constant(DMatrix::zeros(1, 1)), Boundary::Neumann).unwrap();
        assert_eq!(sufficient_delta(&one).c3, 0.0);
        assert!(pairwise_ok(&[2.0], 1e9));
        assert!(pairwise_ok(&[3.0, 4.0], 12.0) && !pairwise_ok(&[3.0, 4.0, 1.0], 12.0));
    }
}
