//! The projective line, the double cover `tau`, angle lifts and winding numbers.
//!
//! A point `[x:y]` is sent to `tau = ((x - iy)/|x - iy|)^2`, so its angle is
//! `-2 atan2(y, x)`. The train marker `[0:1]` sits at angle `pi`. Winding uses
//! the floor formula `floor((theta(b) - pi)/2pi) - floor((theta(a) - pi)/2pi)`,
//! with samples on the marker snapped to exactly `pi + 2pi k`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::io::{Read, Write};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative tolerance for "sample is at [0:1]".
pub const EPS_CROSS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RP1Point {
    pub x: f64,
    pub y: f64,
}

impl RP1Point {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        if (x == 0.0 && y == 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidPoint);
        }
        Ok(RP1Point { x, y })
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// True when `|x| <= eps * |(x, y)|`.
    pub fn on_train(&self, eps: f64) -> bool {
        self.x.abs() <= eps * self.norm()
    }

    /// Projective equality via the cross product.
    pub fn same_as(&self, other: &RP1Point, tol: f64) -> bool {
        (self.x * other.y - self.y * other.x).abs() <= tol * self.norm() * other.norm()
    }

    /// Angle of `tau(p)` in `(-2pi, 2pi]`.
    pub fn angle(&self) -> f64 {
        -2.0 * self.y.atan2(self.x)
    }
}

pub fn tau(p: RP1Point) -> Result<Complex64> {
    let r = p.norm();
    if r == 0.0 || !r.is_finite() {
        return Err(Error::InvalidPoint);
    }
    let z = Complex64::new(p.x / r, -p.y / r);
    Ok(z * z)
}

/// `theta'(t0) = 2 x'(t0) / y(t0)` at a crossing of `[0:1]`.
pub fn crossing_derivative(xprime: f64, y: f64) -> Result<f64> {
    if y == 0.0 {
        return Err(Error::InvalidPoint);
    }
    Ok(2.0 * xprime / y)
}

fn wrap(d: f64) -> f64 {
    let mut r = d.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RP1Path {
    pub params: Vec<f64>,
    pub points: Vec<RP1Point>,
    /// Lifted angles, present after [`lift_path`].
    pub theta: Option<Vec<f64>>,
    /// Samples snapped onto `[0:1]`.
    pub on_train: Vec<bool>,
    /// Set by the lift when the continuous lift never reaches `pi + 2pi k`.
    pub crossing_free: bool,
}

impl RP1Path {
    pub fn new(params: Vec<f64>, points: Vec<RP1Point>) -> Result<Self> {
        if params.len() != points.len() {
            return Err(Error::Config(format!("{} parameters for {} points", params.len(), points.len())));
        }
        if params.is_empty() {
            return Err(Error::Config("empty path".into()));
        }
        if params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("path parameters must be strictly increasing".into()));
        }
        let n = points.len();
        Ok(RP1Path { params, points, theta: None, on_train: vec![false; n], crossing_free: false })
    }

    pub fn from_xy(params: &[f64], x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::Config("x and y lengths differ".into()));
        }
        let pts = x.iter().zip(y).map(|(a, b)| RP1Point::new(*a, *b)).collect::<Result<Vec<_>>>()?;
        Self::new(params.to_vec(), pts)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Joins `self` then `other`; `other` must start where `self` ends.
    pub fn concat(&self, other: &RP1Path) -> Result<RP1Path> {
        let (t_end, p_end) = (*self.params.last().unwrap(), *self.points.last().unwrap());
        if other.params[0] != t_end || !p_end.same_as(&other.points[0], 1e-12) {
            return Err(Error::Config("paths are not concatenable".into()));
        }
        let mut params = self.params.clone();
        let mut points = self.points.clone();
        params.extend_from_slice(&other.params[1..]);
        points.extend_from_slice(&other.points[1..]);
        RP1Path::new(params, points)
    }

    fn lifted(&self) -> Result<&[f64]> {
        self.theta.as_deref().ok_or_else(|| Error::Numerical("path has not been lifted".into()))
    }

    /// Sheet index `floor((theta - pi)/2pi)`, exact on snapped samples.
    pub fn sheet(&self, k: usize) -> Result<i64> {
        let th = self.lifted()?[k];
        let s = (th - PI) / TAU;
        Ok(if self.on_train[k] { s.round() as i64 } else { s.floor() as i64 })
    }
}

/// Generator used to request extra samples during lifting.
pub type Refiner<'a> = &'a (dyn Fn(f64) -> Result<RP1Point> + Sync);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftOptions {
    pub eps_cross: f64,
    pub max_depth: usize,
    /// Samples and refiner values are a continuous curve in `R^2`, not just
    /// projective points. Intervals whose chord exceeds the smaller endpoint
    /// norm are then bisected, since the curve may pass close to the origin.
    pub continuous: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { eps_cross: EPS_CROSS, max_depth: 40, continuous: false }
    }
}

fn raw_angle(p: &RP1Point, eps: f64) -> f64 {
    if p.on_train(eps) {
        PI
    } else {
        p.angle()
    }
}

fn refine_between(
    t0: f64,
    p0: RP1Point,
    t1: f64,
    p1: RP1Point,
    depth: usize,
    refiner: Refiner,
    opts: &LiftOptions,
    out: &mut Vec<(f64, RP1Point)>,
) -> Result<()> {
    let d = wrap(raw_angle(&p1, opts.eps_cross) - raw_angle(&p0, opts.eps_cross));
    let near_origin = opts.continuous && (p1.x - p0.x).hypot(p1.y - p0.y) > p0.norm().min(p1.norm());
    if (d.abs() < FRAC_PI_4 && !near_origin) || depth >= opts.max_depth {
        return Ok(());
    }
    let tm = 0.5 * (t0 + t1);
    if !(tm > t0 && tm < t1) {
        return Ok(());
    }
    let pm = refiner(tm)?;
    refine_between(t0, p0, tm, pm, depth + 1, refiner, opts, out)?;
    out.push((tm, pm));
    refine_between(tm, pm, t1, p1, depth + 1, refiner, opts, out)
}

/// Continuous lift of `tau` along the path.
///
/// With a refiner, intervals whose angle jump is at least `pi/4` are bisected
/// (to depth `max_depth`); see [`LiftOptions::continuous`] for the other trigger. A remaining jump of at least `pi/2` is an error.
pub fn lift_path(path: &RP1Path, refiner: Option<Refiner>, opts: &LiftOptions) -> Result<RP1Path> {
    let (params, points) = match refiner {
        Some(r) => {
            let mut merged = Vec::with_capacity(path.len());
            for k in 0..path.len() {
                if k > 0 {
                    let (t0, p0) = (path.params[k - 1], path.points[k - 1]);
                    refine_between(t0, p0, path.params[k], path.points[k], 0, r, opts, &mut merged)?;
                }
                merged.push((path.params[k], path.points[k]));
            }
            merged.into_iter().unzip()
        }
        None => (path.params.clone(), path.points.clone()),
    };
    let n = points.len();
    let on_train: Vec<bool> = points.iter().map(|p| p.on_train(opts.eps_cross)).collect();
    let raw: Vec<f64> = points.iter().map(|p| raw_angle(p, opts.eps_cross)).collect();
    let mut theta = vec![0.0; n];
    theta[0] = raw[0];
    for k in 1..n {
        let d = wrap(raw[k] - raw[k - 1]);
        if d.abs() >= FRAC_PI_2 {
            return Err(Error::Undersampled { t0: params[k - 1], t1: params[k] });
        }
        theta[k] = theta[k - 1] + d;
        if on_train[k] {
            theta[k] = PI + TAU * ((theta[k] - PI) / TAU).round();
        }
    }
    let sheet_f = |th: f64, snapped: bool| {
        let s = (th - PI) / TAU;
        if snapped {
            s.round()
        } else {
            s.floor()
        }
    };
    // Anchor: the first sample on [0:1], else the first level passed between samples.
    let mut shift: Option<f64> = None;
    for k in 0..n {
        if on_train[k] {
            shift = Some(((theta[k] - PI) / TAU).round());
            break;
        }
        if k > 0 {
            let (a, b) = (theta[k - 1], theta[k]);
            let (sa, sb) = (sheet_f(a, false), sheet_f(b, false));
            if sa != sb {
                shift = Some(sa.max(sb));
                break;
            }
        }
    }
    let crossing_free = shift.is_none();
    if let Some(m) = shift {
        for k in 0..n {
            if on_train[k] {
                theta[k] = PI + TAU * (((theta[k] - PI) / TAU).round() - m);
            } else {
                theta[k] -= TAU * m;
            }
        }
    }
    Ok(RP1Path { params, points, theta: Some(theta), on_train, crossing_free })
}

/// Winding number of a lifted path (lifts with defaults if needed).
pub fn wind(path: &RP1Path) -> Result<i64> {
    if path.theta.is_none() {
        return wind(&lift_path(path, None, &LiftOptions::default())?);
    }
    let last = path.len() - 1;
    Ok(path.sheet(last)? - path.sheet(0)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Crossing {
    pub t: f64,
    /// +1 or -1; 0 for a tangential touch.
    pub sign: i32,
    pub transverse: bool,
    /// True when the crossing coincides with a sample.
    pub at_sample: bool,
    /// Sample index (or left end of the bracketing interval).
    pub index: usize,
}

/// Signed passages through `[0:1]` of a lifted path.
pub fn signed_crossings(path: &RP1Path) -> Result<Vec<Crossing>> {
    let theta = path.lifted()?;
    let n = theta.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        if path.on_train[k] {
            let start = k;
            while k + 1 < n && path.on_train[k + 1] && theta[k + 1] == theta[start] {
                k += 1;
            }
            let level = theta[start];
            let before = if start > 0 { Some(theta[start - 1] - level) } else { None };
            let after = if k + 1 < n { Some(theta[k + 1] - level) } else { None };
            let sign = match (before, after) {
                (Some(b), Some(a)) if b < 0.0 && a > 0.0 => 1,
                (Some(b), Some(a)) if b > 0.0 && a < 0.0 => -1,
                (None, Some(a)) if a != 0.0 => a.signum() as i32,
                (Some(b), None) if b != 0.0 => -(b.signum() as i32),
                _ => 0,
            };
            out.push(Crossing { t: path.params[start], sign, transverse: sign != 0, at_sample: true, index: start });
        } else if k + 1 < n && !path.on_train[k + 1] {
            let (a, b) = (theta[k], theta[k + 1]);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let mut j = ((lo - PI) / TAU).floor() + 1.0;
            loop {
                let level = PI + TAU * j;
                if level >= hi {
                    break;
                }
                if level > lo {
                    let f = (level - a) / (b - a);
                    let t = path.params[k] + f * (path.params[k + 1] - path.params[k]);
                    out.push(Crossing {
                        t,
                        sign: if b > a { 1 } else { -1 },
                        transverse: true,
                        at_sample: false,
                        index: k,
                    });
                }
                j += 1.0;
            }
        }
        k += 1;
    }
    Ok(out)
}

/// Bisects interval crossings using the generator until the bracket is below `tol`.
pub fn refine_crossing(path: &RP1Path, c: &Crossing, refiner: Refiner, tol: f64) -> Result<f64> {
    if c.at_sample {
        return Ok(c.t);
    }
    let theta = path.lifted()?;
    let (mut t0, mut t1) = (path.params[c.index], path.params[c.index + 1]);
    let th0 = theta[c.index];
    let p0 = path.points[c.index];
    let level = {
        let lo = th0.min(theta[c.index + 1]);
        PI + TAU * (((lo - PI) / TAU).floor() + 1.0)
    };
    let below0 = th0 < level;
    for _ in 0..200 {
        if t1 - t0 <= tol {
            break;
        }
        let tm = 0.5 * (t0 + t1);
        let pm = refiner(tm)?;
        if pm.x == 0.0 {
            return Ok(tm);
        }
        let thm = th0 + wrap(pm.angle() - p0.angle());
        if (thm < level) == below0 {
            t0 = tm;
        } else {
            t1 = tm;
        }
    }
    Ok(0.5 * (t0 + t1))
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("csv: {e}"))
}

/// Writes `t,x,y,theta` with 17 significant digits.
pub fn write_path_csv<W: Write>(path: &RP1Path, w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w);
    wr.write_record(["t", "x", "y", "theta"]).map_err(csv_err)?;
    for k in 0..path.len() {
        let th = path.theta.as_ref().map(|t| format!("{:.16e}", t[k])).unwrap_or_default();
        wr.write_record([
            format!("{:.16e}", path.params[k]),
            format!("{:.16e}", path.points[k].x),
            format!("{:.16e}", path.points[k].y),
            th,
        ])
        .map_err(csv_err)?;
    }
    wr.flush().map_err(csv_err)
}

/// Reads a path from CSV with at least the columns `t`, `x`, `y`.
pub fn read_path_csv<R: Read>(r: R) -> Result<RP1Path> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Config(format!("missing column '{name}'")))
    };
    let (ct, cx, cy) = (col("t")?, col("x")?, col("y")?);
    let (mut t, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let get = |c: usize| -> Result<f64> {
            rec.get(c)
                .ok_or_else(|| Error::Config("short record".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("bad number: {e}")))
        };
        t.push(get(ct)?);
        x.push(get(cx)?);
        y.push(get(cy)?);
    }
    RP1Path::from_xy(&t, &x, &y)
}
