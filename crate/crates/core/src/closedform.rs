//! Constant-coefficient closed forms.
//!
//! For constant `V` and `D` the flow is explicit: with `B = D^{-1}(lambda I - V)`
//! and eigenvalues `beta_i` of `B`, the Dirichlet frame gives
//! `det X = prod_i sinhc(beta_i, x)` and `psi1/psi2 = det X / (det X)'`.
//! The two-species Turing setting uses `V = A`, `D = diag(1, d)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaClass {
    DistinctNegative,
    EqualNegative,
    ComplexConjugate,
    PositiveReal,
    Mixed,
}

/// Eigenvalues of a 2x2 `B`; real pairs are ordered `beta1 <= beta2`,
/// complex pairs have `Im beta1 < 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaPair {
    #[serde(serialize_with = "ser_complex")]
    pub beta1: Complex64,
    #[serde(serialize_with = "ser_complex")]
    pub beta2: Complex64,
    pub class: BetaClass,
}

fn ser_complex<S: serde::Serializer>(z: &Complex64, s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeTuple;
    let mut t = s.serialize_tuple(2)?;
    t.serialize_element(&z.re)?;
    t.serialize_element(&z.im)?;
    t.end()
}

impl BetaPair {
    pub fn from_trace_det(tr: f64, det: f64) -> BetaPair {
        let disc = tr * tr - 4.0 * det;
        let scale = tr * tr + 4.0 * det.abs();
        if disc.abs() <= 1e-14 * scale {
            let b = 0.5 * tr;
            let class = if b < 0.0 {
                BetaClass::EqualNegative
            } else if b > 0.0 {
                BetaClass::PositiveReal
            } else {
                BetaClass::Mixed
            };
            return BetaPair { beta1: b.into(), beta2: b.into(), class };
        }
        if disc < 0.0 {
            let im = 0.5 * (-disc).sqrt();
            return BetaPair {
                beta1: Complex64::new(0.5 * tr, -im),
                beta2: Complex64::new(0.5 * tr, im),
                class: BetaClass::ComplexConjugate,
            };
        }
        // Stable quadratic roots.
        let q = if tr == 0.0 { 0.0 } else { 0.5 * (tr + tr.signum() * disc.sqrt()) };
        let (r1, r2) = if q == 0.0 {
            let s = 0.5 * disc.sqrt();
            (0.5 * tr - s, 0.5 * tr + s)
        } else {
            let a = q;
            let b = det / q;
            (a.min(b), a.max(b))
        };
        let class = if r2 < 0.0 {
            BetaClass::DistinctNegative
        } else if r1 > 0.0 {
            BetaClass::PositiveReal
        } else {
            BetaClass::Mixed
        };
        BetaPair { beta1: r1.into(), beta2: r2.into(), class }
    }

    pub fn is_distinct_negative(&self) -> bool {
        self.class == BetaClass::DistinctNegative
    }

    /// `beta1 / beta2` (real pairs).
    pub fn ratio(&self) -> f64 {
        self.beta1.re / self.beta2.re
    }
}

/// `tr A < 0 < det A`.
pub fn check_acondition(a: &Matrix2<f64>) -> Result<()> {
    let det = a.determinant();
    let tr = a.trace();
    if !(det > 0.0) || !(tr < 0.0) {
        return Err(Error::NotTuring(format!("need det A > 0 and tr A < 0, got det {det}, tr {tr}")));
    }
    Ok(())
}

/// Trace and determinant of `B = diag(1, d)^{-1} (lambda I - A)`.
pub fn turing_trace_det(a: &Matrix2<f64>, d: f64, lambda: f64) -> (f64, f64) {
    let tr = (lambda * (1.0 + d) - (a[(1, 1)] + d * a[(0, 0)])) / d;
    let det = (lambda * lambda - lambda * a.trace() + a.determinant()) / d;
    (tr, det)
}

/// Beta pair of the Turing system, without the sign check on `A`.
pub fn turing_betas(a: &Matrix2<f64>, d: f64, lambda: f64) -> BetaPair {
    let (tr, det) = turing_trace_det(a, d, lambda);
    BetaPair::from_trace_det(tr, det)
}

pub fn beta_curves(a: &Matrix2<f64>, d: f64, lambda: f64) -> Result<BetaPair> {
    check_acondition(a)?;
    if !(d > 0.0) {
        return Err(Error::Config(format!("d must be positive, got {d}")));
    }
    Ok(turing_betas(a, d, lambda))
}

/// Beta pair of `D^{-1}(lambda I - V)` for general 2x2 `V` and `D = diag(d1, d2)`.
pub fn betas_general(v: &Matrix2<f64>, d: [f64; 2], lambda: f64) -> BetaPair {
    let b =
        Matrix2::new((lambda - v[(0, 0)]) / d[0], -v[(0, 1)] / d[0], -v[(1, 0)] / d[1], (lambda - v[(1, 1)]) / d[1]);
    BetaPair::from_trace_det(b.trace(), b.determinant())
}

const SERIES_SWITCH: f64 = 1e-4;

/// `sinh(sqrt(beta) x) / sqrt(beta)`, entire in beta.
pub fn sinhc(beta: Complex64, x: f64) -> Complex64 {
    let z = beta * x * x;
    if z.norm() < SERIES_SWITCH {
        let mut term = Complex64::new(x, 0.0);
        let mut sum = term;
        for k in 1..6 {
            term *= z / ((2 * k) as f64 * (2 * k + 1) as f64);
            sum += term;
        }
        return sum;
    }
    if beta.im == 0.0 {
        return sinhc_real(beta.re, x).into();
    }
    let s = beta.sqrt();
    (s * x).sinh() / s
}

/// `cosh(sqrt(beta) x)`, entire in beta.
pub fn cosh_sqrt(beta: Complex64, x: f64) -> Complex64 {
    let z = beta * x * x;
    if z.norm() < SERIES_SWITCH {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for k in 1..6 {
            term *= z / ((2 * k - 1) as f64 * (2 * k) as f64);
            sum += term;
        }
        return sum;
    }
    if beta.im == 0.0 {
        return cosh_sqrt_real(beta.re, x).into();
    }
    (beta.sqrt() * x).cosh()
}

pub fn sinhc_real(beta: f64, x: f64) -> f64 {
    if (beta * x * x).abs() < SERIES_SWITCH {
        return sinhc(beta.into(), x).re;
    }
    if beta < 0.0 {
        let s = (-beta).sqrt();
        (s * x).sin() / s
    } else {
        let s = beta.sqrt();
        (s * x).sinh() / s
    }
}

pub fn cosh_sqrt_real(beta: f64, x: f64) -> f64 {
    if (beta * x * x).abs() < SERIES_SWITCH {
        return cosh_sqrt(beta.into(), x).re;
    }
    if beta < 0.0 {
        ((-beta).sqrt() * x).cos()
    } else {
        (beta.sqrt() * x).cosh()
    }
}

/// `(det X, mixed)` with `det X = s1 s2`, `mixed = s1 c2 + s2 c1`.
pub fn psi_closed(beta1: Complex64, beta2: Complex64, x: f64) -> (f64, f64) {
    let (s1, s2) = (sinhc(beta1, x), sinhc(beta2, x));
    let (c1, c2) = (cosh_sqrt(beta1, x), cosh_sqrt(beta2, x));
    ((s1 * s2).re, (s1 * c2 + s2 * c1).re)
}

/// Same as [`psi_closed`] keeping imaginary parts (for conjugate-symmetry checks).
pub fn psi_closed_complex(beta1: Complex64, beta2: Complex64, x: f64) -> (Complex64, Complex64) {
    let (s1, s2) = (sinhc(beta1, x), sinhc(beta2, x));
    let (c1, c2) = (cosh_sqrt(beta1, x), cosh_sqrt(beta2, x));
    (s1 * s2, s1 * c2 + s2 * c1)
}

/// `psi1/psi2` for a Dirichlet start with constant 2x2 `V` and diagonal `D`.
pub fn closed_ratio(v: &Matrix2<f64>, d: [f64; 2], lambda: f64, x: f64) -> f64 {
    let b = betas_general(v, d, lambda);
    let (p1, p2) = psi_closed(b.beta1, b.beta2, x);
    p1 / p2
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Genericity {
    pub generic: bool,
    /// Which condition failed, with its integer witness `(m, n)`.
    pub reason: Option<String>,
    pub witness: Option<(i64, i64)>,
    pub note: Option<String>,
}

/// Integers `(m, n)` with `m^2 - n^2 = k`, if any.
pub fn difference_of_squares(k: i64) -> Option<(i64, i64)> {
    if k == 0 {
        return Some((1, 1));
    }
    let a = k.unsigned_abs() as i64;
    let mut p = 1;
    while p * p <= a {
        if a % p == 0 {
            let q = a / p;
            if (p + q) % 2 == 0 {
                let (m, n) = ((p + q) / 2, (q - p) / 2);
                return Some(if k > 0 { (m, n) } else { (n, m) });
            }
        }
        p += 1;
    }
    None
}

/// Tests the two non-genericity conditions for a constant 2x2 potential on `(0, L)`.
pub fn genericity_check(v: &Matrix2<f64>, length: f64) -> Genericity {
    let tr = v.trace();
    let det = v.determinant();
    let disc = tr * tr - 4.0 * det;
    if disc < -1e-14 * tr * tr {
        return Genericity {
            generic: true,
            reason: None,
            witness: None,
            note: Some("complex eigenvalues: ratio condition vacuous, difference is not real".into()),
        };
    }
    let r = 0.5 * disc.max(0.0).sqrt();
    let (nu1, nu2) = (0.5 * tr + r, 0.5 * tr - r);
    if nu1 > 0.0 && nu2 > 0.0 {
        let m_max = (nu1.sqrt() * length / PI).floor() as i64;
        let n_max = (nu2.sqrt() * length / PI).floor() as i64;
        let ratio = nu1 / nu2;
        for m in 1..=m_max {
            for n in 1..=n_max {
                let q = (m as f64 / n as f64).powi(2);
                if (ratio - q).abs() <= 1e-10 * ratio {
                    return Genericity {
                        generic: false,
                        reason: Some(format!("eigenvalue ratio {ratio} equals ({m}/{n})^2")),
                        witness: Some((m, n)),
                        note: None,
                    };
                }
            }
        }
    }
    let k = (nu1 - nu2) * (length / PI).powi(2);
    let kr = k.round();
    if (k - kr).abs() <= 1e-9 * kr.abs().max(1.0) {
        if let Some((m, n)) = difference_of_squares(kr as i64) {
            return Genericity {
                generic: false,
                reason: Some(format!("eigenvalue difference equals ({m}^2 - {n}^2)(pi/L)^2")),
                witness: Some((m, n)),
                note: None,
            };
        }
    }
    Genericity { generic: true, reason: None, witness: None, note: None }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Below,
    Critical,
    Above,
}

/// Sign of `a22 + d a11 - 2 sqrt(d det A)`, with a relative tolerance.
pub fn regime(a: &Matrix2<f64>, d: f64) -> Regime {
    let root = 2.0 * (d * a.determinant()).sqrt();
    let g = a[(1, 1)] + d * a[(0, 0)] - root;
    let scale = a[(1, 1)].abs() + d * a[(0, 0)].abs() + root;
    if g.abs() <= 1e-12 * scale {
        Regime::Critical
    } else if g > 0.0 {
        Regime::Above
    } else {
        Regime::Below
    }
}

/// Critical diffusion ratio: the positive root `s = sqrt(d)` of
/// `a11 s^2 - 2 sqrt(det A) s + a22 = 0`, cross-checked by bisection.
pub fn d_star(a: &Matrix2<f64>) -> Result<Option<f64>> {
    check_acondition(a)?;
    let (a11, a22) = (a[(0, 0)], a[(1, 1)]);
    let sd = a.determinant().sqrt();
    let s = if a11 == 0.0 {
        if a22 > 0.0 {
            Some(a22 / (2.0 * sd))
        } else {
            None
        }
    } else {
        let disc = sd * sd - a11 * a22;
        if disc < 0.0 {
            None
        } else {
            [(sd + disc.sqrt()) / a11, (sd - disc.sqrt()) / a11].into_iter().filter(|s| *s > 0.0).reduce(f64::max)
        }
    };
    let Some(s) = s else { return Ok(None) };
    let d = s * s;
    let g = |d: f64| a22 + d * a11 - 2.0 * (d * a.determinant()).sqrt();
    let (mut lo, mut hi) = (0.5 * d, 2.0 * d);
    if g(lo).signum() == g(hi).signum() {
        return Err(Error::Numerical("d* bisection bracket failed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid).signum() == g(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (0.5 * (lo + hi) - d).abs() > 1e-9 * d {
        return Err(Error::Numerical("d* algebraic and bisection roots disagree".into()));
    }
    Ok(Some(d))
}

/// Smaller positive root of the discriminant quadratic
/// `(d-1)^2 l^2 + 2(d-1)(a22 - d a11) l + (a22 + d a11)^2 - 4 d det A`.
pub fn lambda_c(a: &Matrix2<f64>, d: f64) -> Result<f64> {
    if regime(a, d) != Regime::Above {
        return Err(Error::NotApplicable(format!("d = {d} is not above the Turing threshold")));
    }
    let (a11, a22) = (a[(0, 0)], a[(1, 1)]);
    let c2 = (d - 1.0).powi(2);
    let c1 = 2.0 * (d - 1.0) * (a22 - d * a11);
    let c0 = (a22 + d * a11).powi(2) - 4.0 * d * a.determinant();
    if c2 == 0.0 {
        return Err(Error::NotApplicable("d = 1 has no critical lambda".into()));
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Err(Error::NotApplicable("discriminant of B has no real zero".into()));
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let roots = [q / c2, c0 / q];
    roots
        .into_iter()
        .filter(|r| *r > 0.0 && r.is_finite())
        .reduce(f64::min)
        .ok_or_else(|| Error::NotApplicable("no positive critical lambda".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuringLeavePoint {
    pub x: f64,
    pub lambda: f64,
    pub m: u32,
    pub n: u32,
    pub local_index: i32,
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Lowest lambda in `[lambda_min, lambda_c)` where the betas stay distinct negative.
fn valid_floor(a: &Matrix2<f64>, d: f64, lambda_min: f64, lc: f64) -> Option<f64> {
    if lambda_min >= lc {
        return None;
    }
    if turing_betas(a, d, lambda_min).is_distinct_negative() {
        return Some(lambda_min);
    }
    let good = |l: f64| if turing_betas(a, d, l).is_distinct_negative() { 1.0 } else { -1.0 };
    let probe = lc - 1e-9 * lc.abs().max(1e-3);
    if good(probe) < 0.0 {
        return None;
    }
    let b = bisect(lambda_min, probe, good);
    let step = 1e-12 * b.abs().max(1.0);
    Some(if good(b) > 0.0 { b } else { b + step })
}

/// Points with `W(x*, lambda*)` in both hyperplanes: `x* = m pi / sqrt(-beta1) = n pi / sqrt(-beta2)`.
pub fn turing_leave_points(a: &Matrix2<f64>, d: f64, length: f64, lambda_min: f64) -> Result<Vec<TuringLeavePoint>> {
    let lc = lambda_c(a, d)?;
    let mut out = Vec::new();
    if lambda_min > lc {
        return Ok(out);
    }
    let (tr_c, _) = turing_trace_det(a, d, lc);
    let beta_c = 0.5 * tr_c;
    if beta_c >= 0.0 {
        return Ok(out);
    }
    let n_max = (length * (-beta_c).sqrt() / PI).floor() as u32;
    for n in 1..=n_max {
        out.push(TuringLeavePoint { x: n as f64 * PI / (-beta_c).sqrt(), lambda: lc, m: n, n, local_index: 2 });
    }
    if let Some(lo) = valid_floor(a, d, lambda_min, lc) {
        let b_lo = turing_betas(a, d, lo);
        let r_max = b_lo.ratio();
        let m_max = (length * (-b_lo.beta1.re).sqrt() / PI).floor() as u32;
        for n in 1..=n_max {
            for m in n + 1..=m_max {
                let q2 = (m as f64 / n as f64).powi(2);
                if q2 > r_max {
                    break;
                }
                let lam = bisect(lo, lc, |l| turing_betas(a, d, l).ratio() - q2);
                let b = turing_betas(a, d, lam);
                let x = m as f64 * PI / (-b.beta1.re).sqrt();
                if x <= length {
                    out.push(TuringLeavePoint { x, lambda: lam, m, n, local_index: 0 });
                }
            }
        }
    }
    out.sort_by(|p, q| p.x.total_cmp(&q.x).then(q.lambda.total_cmp(&p.lambda)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct L0Window {
    /// `pi / sqrt(-beta(lambda_c))`: first `m = n = 1` leave point.
    pub x_max: f64,
    /// First `(m, n) = (2, 1)` intersection, when the ratio reaches 4.
    pub x_int: Option<f64>,
    pub lambda_int: Option<f64>,
}

pub fn l0_window(a: &Matrix2<f64>, d: f64) -> Result<L0Window> {
    let lc = lambda_c(a, d)?;
    let (tr_c, _) = turing_trace_det(a, d, lc);
    let x_max = PI / (-0.5 * tr_c).sqrt();
    let ratio = |l: f64| turing_betas(a, d, l).ratio();
    let mut step = 1e-3 * lc.abs().max(1e-3);
    let mut hi = lc;
    let mut bracket = None;
    for _ in 0..200 {
        let lo = lc - step;
        if !turing_betas(a, d, lo).is_distinct_negative() {
            if let Some(floor) = valid_floor(a, d, lo, lc) {
                if ratio(floor) >= 4.0 {
                    bracket = Some((floor, hi));
                }
            }
            break;
        }
        if ratio(lo) >= 4.0 {
            bracket = Some((lo, hi));
            break;
        }
        hi = lo;
        step *= 2.0;
        if step > 1e12 {
            break;
        }
    }
    let (x_int, lambda_int) = match bracket {
        Some((lo, hi)) => {
            let lam = bisect(lo, hi, |l| ratio(l) - 4.0);
            let b = turing_betas(a, d, lam);
            (Some(2.0 * PI / (-b.beta1.re).sqrt()), Some(lam))
        }
        None => (None, None),
    };
    Ok(L0Window { x_max, x_int, lambda_int })
}

/// Values of `d` at which `beta1(0)/beta2(0) = q^2`.
///
/// Roots of `q^2 a11^2 d^2 + (2 q^2 a11 a22 - (1+q^2)^2 det A) d + q^2 a22^2 = 0`
/// with `a22 + d a11 > 0` (negative betas).
pub fn d_of_q2(a: &Matrix2<f64>, q: f64) -> Vec<f64> {
    let (a11, a22, det) = (a[(0, 0)], a[(1, 1)], a.determinant());
    let q2 = q * q;
    let x = (1.0 + q2).powi(2) * det - 2.0 * q2 * a11 * a22;
    let disc = x * x - 4.0 * q2 * q2 * a11 * a11 * a22 * a22;
    if disc < 0.0 || a11 == 0.0 {
        return Vec::new();
    }
    let mut out: Vec<f64> = [(x + disc.sqrt()), (x - disc.sqrt())]
        .into_iter()
        .map(|num| num / (2.0 * q2 * a11 * a11))
        .filter(|&d| d > 0.0 && a22 + d * a11 > 0.0)
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Whether `beta1(0)/beta2(0)` is `(m/n)^2` with `n <= limit`; returns `(m, n)` in lowest terms.
pub fn delta_star_contains(a: &Matrix2<f64>, d: f64, limit: u64) -> Result<Option<(u64, u64)>> {
    if regime(a, d) != Regime::Above {
        return Err(Error::NotApplicable(format!("d = {d} is not above the Turing threshold")));
    }
    let b = turing_betas(a, d, 0.0);
    if !b.is_distinct_negative() {
        return Ok(None);
    }
    let r = b.ratio();
    let root = r.sqrt();
    for n in 1..=limit {
        let m = (n as f64 * root).round();
        if m < 1.0 {
            continue;
        }
        let q2 = (m / n as f64).powi(2);
        if (q2 - r).abs() <= 1e-12 * r {
            let m = m as u64;
            let g = gcd(m, n);
            return Ok(Some((m / g, n / g)));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuringDiagnostics {
    pub regime: Regime,
    pub d: f64,
    pub d_star: Option<f64>,
    pub lambda_c: Option<f64>,
    pub x_max: Option<f64>,
    pub x_int: Option<f64>,
    pub l0_window: Option<(f64, f64)>,
    pub leave_points: Vec<TuringLeavePoint>,
}

/// Regime and threshold data; leave points are filled when `length` is given.
pub fn turing_assess(a: &Matrix2<f64>, d: f64, length: Option<f64>, lambda_min: f64) -> Result<TuringDiagnostics> {
    check_acondition(a)?;
    if !(d > 0.0) {
        return Err(Error::Config(format!("d must be positive, got {d}")));
    }
    let reg = regime(a, d);
    let mut diag = TuringDiagnostics {
        regime: reg,
        d,
        d_star: d_star(a)?,
        lambda_c: None,
        x_max: None,
        x_int: None,
        l0_window: None,
        leave_points: Vec::new(),
    };
    if reg == Regime::Above {
        if let Ok(lc) = lambda_c(a, d) {
            diag.lambda_c = Some(lc);
            let w = l0_window(a, d)?;
            diag.x_max = Some(w.x_max);
            diag.x_int = w.x_int;
            diag.l0_window = w.x_int.map(|xi| (w.x_max, xi));
            if let Some(l) = length {
                diag.leave_points = turing_leave_points(a, d, l, lambda_min)?;
            }
        }
    }
    Ok(diag)
}

fn real_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let scale = m.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    if m.nrows() == 2 {
        let b = BetaPair::from_trace_det(m.trace(), m.determinant());
        return if b.class == BetaClass::ComplexConjugate { Vec::new() } else { vec![b.beta1.re, b.beta2.re] };
    }
    m.clone().complex_eigenvalues().iter().filter(|z| z.im.abs() <= 1e-10 * scale).map(|z| z.re).collect()
}

fn merge_sorted(mut v: Vec<f64>, radius: f64) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::with_capacity(v.len());
    for x in v {
        if out.last().is_none_or(|&l| (x - l).abs() > radius * x.abs().max(1.0)) {
            out.push(x);
        }
    }
    out
}

/// Dirichlet eigenvalues in `[0, lambda_max]`: real eigenvalues of `V - (k pi/L)^2 D`, `k >= 1`.
pub fn cc_spectrum(v: &DMatrix<f64>, d: &[f64], length: f64, lambda_max: f64) -> Vec<f64> {
    let n = v.nrows();
    let sym = (v + v.transpose()) * 0.5;
    let top = sym.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut found = Vec::new();
    for k in 1.. {
        let mu = (k as f64 * PI / length).powi(2);
        if top - mu * dmin < 0.0 {
            break;
        }
        let mut m = v.clone();
        for i in 0..n {
            m[(i, i)] -= mu * d[i];
        }
        found.extend(real_eigenvalues(&m).into_iter().filter(|&l| (0.0..=lambda_max).contains(&l)));
    }
    merge_sorted(found, 1e-8)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub kind: String,
    pub x: f64,
    pub lambda: f64,
    pub value: f64,
}

/// Zero curves of `psi1`: `lambda` with `V - (k pi/x)^2 D` singular-shifted, i.e.
/// real eigenvalues of `V - (k pi / x)^2 D` for `k = 1..=n_max`.
pub fn eigencurve_samples(v: &DMatrix<f64>, d: &[f64], xs: &[f64], n_max: usize) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for k in 1..=n_max {
        for &x in xs.iter().filter(|x| **x > 0.0) {
            let mu = (k as f64 * PI / x).powi(2);
            let mut m = v.clone();
            for i in 0..v.nrows() {
                m[(i, i)] -= mu * d[i];
            }
            let mut ev = real_eigenvalues(&m);
            ev.sort_by(|a, b| b.total_cmp(a));
            for (i, lam) in ev.into_iter().enumerate() {
                rows.push(CurveRow { kind: format!("eigencurve_k{k}_b{}", i + 1), x, lambda: lam, value: k as f64 });
            }
        }
    }
    rows
}

/// `det X(x, lambda)` traces for a 2x2 constant problem.
pub fn detx_samples(v: &Matrix2<f64>, d: [f64; 2], xs: &[f64], lambdas: &[f64]) -> Vec<CurveRow> {
    let mut rows = Vec::new();
    for &lam in lambdas {
        let b = betas_general(v, d, lam);
        for &x in xs {
            let (det, _) = psi_closed(b.beta1, b.beta2, x);
            rows.push(CurveRow { kind: "detX".into(), x, lambda: lam, value: det });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::turing_matrix;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn betas_of_example() {
        let a = turing_matrix();
        let b = beta_curves(&a, 15.5, 0.0).unwrap();
        assert_eq!(b.class, BetaClass::DistinctNegative);
        let s33 = 33f64.sqrt();
        assert!(rel(b.beta1.re, (-23.0 - s33) / 62.0) < 1e-14);
        assert!(rel(b.beta2.re, (-23.0 + s33) / 62.0) < 1e-14);
        assert!(rel(b.ratio(), (281.0 + 23.0 * s33) / 248.0) < 1e-13);
        let hi = beta_curves(&a, 15.5, 1.0).unwrap();
        assert!(!matches!(hi.class, BetaClass::DistinctNegative | BetaClass::EqualNegative));
        assert!(beta_curves(&Matrix2::new(1.0, 0.0, 0.0, 1.0), 2.0, 0.0).is_err());
    }

    #[test]
    fn sinhc_values() {
        assert_eq!(sinhc_real(0.0, 3.0), 3.0);
        assert!(sinhc_real(-PI * PI, 1.0).abs() < 1e-15);
        assert!((sinhc_real(1.0, 1.0) - 1.0f64.sinh()).abs() < 1e-15);
        // Series branch against the closed branch near the switch.
        for &b in &[9e-5f64, -9e-5, 1.1e-4, -1.1e-4] {
            let s = b.abs().sqrt();
            let exact = if b > 0.0 { s.sinh() / s } else { s.sin() / s };
            assert!((sinhc_real(b, 1.0) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn psi_closed_cases() {
        let z = Complex64::new(0.0, 0.0);
        let (a, b) = psi_closed(z, z, 2.0);
        assert_eq!((a, b), (4.0, 4.0));
        let (a, b) = psi_closed((-PI * PI).into(), (-4.0 * PI * PI).into(), 1.0);
        assert!(a.abs() < 1e-15 && b.abs() < 1e-15);
        let (a, b) = psi_closed_complex(Complex64::new(-1.0, 2.0), Complex64::new(-1.0, -2.0), 1.7);
        assert!(a.im.abs() < 1e-12 && b.im.abs() < 1e-12);
    }

    #[test]
    fn genericity_cases() {
        let g = genericity_check(&Matrix2::new(9.0, 0.0, 0.0, 1.0), 2.0);
        assert!(g.generic);
        let p2 = PI * PI;
        let g = genericity_check(&Matrix2::new(4.0 * p2, 0.0, 0.0, p2), 2.0);
        assert!(!g.generic);
        assert_eq!(g.witness, Some((2, 1)));
        let g = genericity_check(&Matrix2::new(3.0, 0.0, 0.0, 3.0), 1.3);
        assert!(!g.generic);
        let g = genericity_check(&Matrix2::new(0.0, -1.0, 1.0, 0.0), 1.0);
        assert!(g.generic && g.note.is_some());
        // k = 11 = 6^2 - 5^2.
        let g = genericity_check(&Matrix2::new(-1.0 + 11.0, 0.0, 0.0, -1.0), PI);
        assert_eq!(g.witness, Some((6, 5)));
        let g = genericity_check(&Matrix2::new(-1.0 + 6.0, 0.0, 0.0, -1.0), PI);
        assert!(g.generic);
    }

    #[test]
    fn difference_of_squares_matches_brute_force() {
        for k in -60i64..=60 {
            let brute = (0..62i64).any(|m| (0..62i64).any(|n| m * m - n * n == k));
            let got = difference_of_squares(k);
            assert_eq!(got.is_some(), brute, "k = {k}");
            if let Some((m, n)) = got {
                assert_eq!(m * m - n * n, k);
            }
        }
    }

    #[test]
    fn thresholds() {
        let a = turing_matrix();
        let ds = d_star(&a).unwrap().unwrap();
        assert!((ds - (8.0 + 4.0 * 3f64.sqrt())).abs() < 1e-12);
        assert_eq!(regime(&a, 5.0), Regime::Below);
        assert_eq!(regime(&a, 15.5), Regime::Above);
        assert_eq!(regime(&a, ds), Regime::Critical);
        let lc = lambda_c(&a, 15.5).unwrap();
        let want = (565.5 - (565.5f64.powi(2) - 4.0 * 210.25 * 8.25).sqrt()) / (2.0 * 210.25);
        assert!(rel(lc, want) < 1e-12);
        assert!((lc - 0.014669).abs() < 1e-6);
        assert!(lambda_c(&a, ds * (1.0 + 1e-9)).unwrap() < 1e-6);
        assert!(matches!(lambda_c(&a, 5.0), Err(Error::NotApplicable(_))));
        assert_eq!(d_star(&Matrix2::new(-1.0, 1.0, -1.0, -1.0)).unwrap(), None);
    }

    #[test]
    fn leave_points_and_window() {
        let a = turing_matrix();
        let pts = turing_leave_points(&a, 15.5, 10.0, 0.0).unwrap();
        assert_eq!(pts.len(), 1);
        assert!((pts[0].x - 5.2131).abs() < 1e-3);
        assert_eq!((pts[0].m, pts[0].n, pts[0].local_index), (1, 1, 2));
        let more = turing_leave_points(&a, 15.5, 10.0, -0.2).unwrap();
        assert_eq!(more.len(), 2);
        let p21 = more.iter().find(|p| p.m == 2).unwrap();
        assert!((p21.x - 7.676635).abs() < 1e-5 && (p21.lambda + 0.0896696).abs() < 1e-6);
        assert_eq!(p21.local_index, 0);
        assert!(turing_leave_points(&a, 15.5, 5.0, 0.0).unwrap().is_empty());
        let w = l0_window(&a, 15.5).unwrap();
        assert!((w.x_max - 5.2131).abs() < 1e-3);
        assert!((w.x_int.unwrap() - 7.676635).abs() < 1e-5);
        assert!(l0_window(&a, 5.0).is_err());
    }

    #[test]
    fn delta_star_membership() {
        let a = turing_matrix();
        assert_eq!(delta_star_contains(&a, 15.5, 1000).unwrap(), None);
        assert_eq!(delta_star_contains(&a, 15.5, 0).unwrap(), None);
        let ds = d_of_q2(&a, 2.0);
        assert_eq!(ds.len(), 1);
        assert!((ds[0] - 19.68729304408844).abs() < 1e-10);
        assert_eq!(delta_star_contains(&a, ds[0], 10).unwrap(), Some((2, 1)));
    }

    #[test]
    fn spectra() {
        let v = DMatrix::from_row_slice(2, 2, &[9.0, 0.0, 0.0, 1.0]);
        let s = cc_spectrum(&v, &[1.0, 1.0], 2.0, 100.0);
        assert_eq!(s.len(), 1);
        assert!((s[0] - (9.0 - PI * PI / 4.0)).abs() < 1e-12);
        let sc = cc_spectrum(&DMatrix::from_element(1, 1, 2.0 * PI * PI), &[1.0], 1.0, 100.0);
        assert_eq!(sc.len(), 1);
        assert!((sc[0] - PI * PI).abs() < 1e-12);
        let t = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 3.0, -4.0]);
        let st = cc_spectrum(&t, &[1.0, 15.5], 10.0, 6.5);
        assert_eq!(st.len(), 1);
        assert!((st[0] - 0.01303).abs() < 1e-4);
    }

    #[test]
    fn curves() {
        let v = DMatrix::from_row_slice(2, 2, &[9.0, 0.0, 0.0, 1.0]);
        let rows = eigencurve_samples(&v, &[1.0, 1.0], &[PI / 3.0], 1);
        assert!(rows.iter().any(|r| r.lambda.abs() < 1e-12));
        assert!(eigencurve_samples(&v, &[1.0, 1.0], &[1.0], 0).is_empty());
        let d = detx_samples(&Matrix2::new(9.0, 0.0, 0.0, 1.0), [1.0, 1.0], &[PI / 3.0], &[0.0]);
        assert!(d[0].value.abs() < 1e-15);
    }
}
