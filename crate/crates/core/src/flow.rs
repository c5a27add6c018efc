//! Propagation of the boundary subspace `W(x, lambda)` through
//! `F' = A(x, lambda) F`, `A = [[0, D^{-1}], [lambda I - V(x), 0]]`.
//!
//! Frames are integrated with fixed-step RK4 and re-orthonormalized by
//! modified Gram-Schmidt (positive diagonal), so orientation is continuous
//! and `psi_i = w_i(F)` can be read directly off the orthonormal frame.

use nalgebra::{DMatrix, Matrix2};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exterior::{det_in_place, standard_forms, Frame, KForm, StandardForms, Subsets};

/// Reaction matrix of the worked Turing example.
pub fn turing_matrix() -> Matrix2<f64> {
    Matrix2::new(1.0, -2.0, 3.0, -4.0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Constant(DMatrix<f64>),
    /// Piecewise-linear interpolation between nodes; constant outside.
    Sampled {
        xs: Vec<f64>,
        values: Vec<DMatrix<f64>>,
    },
    TuringExample,
}

impl Potential {
    pub fn dim(&self) -> usize {
        match self {
            Potential::Constant(m) => m.nrows(),
            Potential::Sampled { values, .. } => values.first().map_or(0, |m| m.nrows()),
            Potential::TuringExample => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        let square = |m: &DMatrix<f64>| m.nrows() == n && m.ncols() == n && m.iter().all(|v| v.is_finite());
        match self {
            Potential::Constant(m) if !square(m) || n == 0 => {
                Err(Error::Config("potential must be a finite square matrix".into()))
            }
            Potential::Sampled { xs, values } => {
                if xs.is_empty() || xs.len() != values.len() {
                    return Err(Error::Config("sampled potential needs matching, nonempty x and values".into()));
                }
                if xs.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("sampled potential nodes must be strictly increasing".into()));
                }
                if n == 0 || !values.iter().all(square) {
                    return Err(Error::Config(
                        "sampled potential values must be finite square matrices of one size".into(),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Row-major `V(x)` into `out` (length n*n).
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let n = self.dim();
        match self {
            Potential::Constant(m) => {
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = m[(i, j)];
                    }
                }
            }
            Potential::TuringExample => out[..4].copy_from_slice(&[1.0, -2.0, 3.0, -4.0]),
            Potential::Sampled { xs, values } => {
                let last = xs.len() - 1;
                let (k, w) = if x <= xs[0] {
                    (0, 0.0)
                } else if x >= xs[last] {
                    (last.saturating_sub(1), if last == 0 { 0.0 } else { 1.0 })
                } else {
                    let k = xs.partition_point(|&t| t <= x) - 1;
                    (k, (x - xs[k]) / (xs[k + 1] - xs[k]))
                };
                let a = &values[k];
                let b = &values[(k + 1).min(last)];
                for i in 0..n {
                    for j in 0..n {
                        out[i * n + j] = (1.0 - w) * a[(i, j)] + w * b[(i, j)];
                    }
                }
            }
        }
    }

    pub fn at(&self, x: f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut buf = vec![0.0; n * n];
        self.eval_into(x, &mut buf);
        DMatrix::from_row_slice(n, n, &buf)
    }

    /// Sample locations at which norms of `V` should be checked on `[0, L]`.
    pub(crate) fn check_points(&self, length: f64) -> Vec<f64> {
        match self {
            Potential::Sampled { xs, .. } => {
                let mut pts: Vec<f64> = xs.iter().copied().filter(|&x| (0.0..=length).contains(&x)).collect();
                pts.push(0.0);
                pts.push(length);
                pts
            }
            _ => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    Dirichlet,
    Neumann,
    /// `D u' = Theta u`.
    Robin(DMatrix<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    /// RK4 steps per unit length.
    pub nx_per_unit: usize,
    /// Lambda samples on vertical sides and for the delta search.
    pub nlambda: usize,
    /// Re-orthonormalize every this many steps.
    pub qr_every: usize,
    /// Refinement levels for the leave-point scan.
    pub refine_depth: usize,
    pub scan_nx: usize,
    pub scan_nlambda: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { nx_per_unit: 2000, nlambda: 200, qr_every: 10, refine_depth: 2, scan_nx: 400, scan_nlambda: 400 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    /// Relative test for a sample sitting on `[0:1]`.
    pub eps_cross: f64,
    /// Root bracket width, relative to the side length.
    pub root: f64,
    /// Merge radius for distinct roots, relative to the side length.
    pub merge: f64,
    /// `|psi2| <= double_root * max|psi2|` at a zero of `psi1` means a double root.
    pub double_root: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { eps_cross: 1e-9, root: 1e-10, merge: 1e-8, double_root: 1e-8 }
    }
}

/// `-(D u')' - V u` type eigenvalue problem on `[0, L]` with Dirichlet data at `x = L`.
#[derive(Debug, Clone)]
pub struct Problem {
    pub length: f64,
    pub diffusion: Vec<f64>,
    pub potential: Potential,
    pub bc0: Boundary,
    pub grid: Grid,
    pub tol: Tolerances,
    forms: StandardForms,
    terms: [Vec<(Vec<usize>, f64)>; 3],
    v_bound: f64,
}

fn nonzero_terms(w: &KForm) -> Vec<(Vec<usize>, f64)> {
    Subsets::new(w.dim(), w.degree()).zip(w.coeffs()).filter(|(_, c)| **c != 0.0).map(|(s, c)| (s, *c)).collect()
}

impl Problem {
    pub fn new(length: f64, diffusion: Vec<f64>, potential: Potential, bc0: Boundary) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Config(format!("length must be positive, got {length}")));
        }
        potential.validate()?;
        let n = potential.dim();
        if diffusion.len() != n {
            return Err(Error::Config(format!("{} diffusion coefficients for a {n}x{n} potential", diffusion.len())));
        }
        if let Boundary::Robin(t) = &bc0 {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::Config(format!("Robin matrix must be {n}x{n}")));
            }
        }
        let forms = standard_forms(n, &diffusion)?;
        let terms = [nonzero_terms(&forms.omega1), nonzero_terms(&forms.omega2), nonzero_terms(&forms.omega3)];
        let mut p = Problem {
            length,
            diffusion,
            potential,
            bc0,
            grid: Grid::default(),
            tol: Tolerances::default(),
            forms,
            terms,
            v_bound: 0.0,
        };
        p.v_bound = p.compute_bound();
        Ok(p)
    }

    pub fn with_grid(mut self, grid: Grid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_length(mut self, length: f64) -> Result<Self> {
        if !(length > 0.0) {
            return Err(Error::Config(format!("length must be positive, got {length}")));
        }
        self.length = length;
        self.v_bound = self.compute_bound();
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.diffusion.len()
    }

    pub fn forms(&self) -> &StandardForms {
        &self.forms
    }

    pub fn d_min(&self) -> f64 {
        self.diffusion.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `max_x ||V(x)||_2` on `[0, L]`.
    pub fn potential_bound(&self) -> f64 {
        self.v_bound
    }

    fn compute_bound(&self) -> f64 {
        self.potential
            .check_points(self.length)
            .into_iter()
            .map(|x| spectral_norm(&self.potential.at(x)))
            .fold(0.0, f64::max)
    }

    /// RK4 step count for `[0, span]` at spectral parameter `lambda`.
    fn steps_for(&self, span: f64, lambda: f64) -> usize {
        let nominal = (span * self.grid.nx_per_unit as f64).ceil();
        let rate = ((self.potential_bound() + lambda.abs()) / self.d_min()).sqrt().max(1.0 / self.d_min().sqrt());
        let stable = (span * rate / 0.05).ceil();
        nominal.max(stable).max(1.0) as usize
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().copied().fold(0.0, f64::max)
}

/// Block matrix `A(x, lambda)`.
pub fn assemble_a(problem: &Problem, x: f64, lambda: f64) -> DMatrix<f64> {
    let n = problem.n();
    let v = problem.potential.at(x);
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0 / problem.diffusion[i];
        for j in 0..n {
            a[(n + i, j)] = if i == j { lambda } else { 0.0 } - v[(i, j)];
        }
    }
    a
}

/// Frame spanning the boundary subspace at `x = 0`.
pub fn boundary_frame(bc: &Boundary, n: usize) -> Result<Frame> {
    let mut f = DMatrix::zeros(2 * n, n);
    match bc {
        Boundary::Dirichlet => {
            for j in 0..n {
                f[(n + j, j)] = 1.0;
            }
        }
        Boundary::Neumann => {
            for j in 0..n {
                f[(j, j)] = 1.0;
            }
        }
        Boundary::Robin(t) => {
            if t.nrows() != n || t.ncols() != n {
                return Err(Error::Config(format!("Robin matrix must be {n}x{n}, got {}x{}", t.nrows(), t.ncols())));
            }
            for q in 0..n {
                f[(q, q)] = 1.0;
                for r in 0..n {
                    f[(n + r, q)] = t[(r, q)];
                }
            }
        }
    }
    Ok(f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub x: f64,
    pub frame: Frame,
    pub psi1: f64,
    pub psi2: f64,
    pub psi3: f64,
    /// `sum_j <A f_j, f_j>` on the orthonormal frame.
    pub gamma: f64,
}

impl FlowSample {
    /// `d psi1/dx = psi2 - gamma psi1`.
    pub fn dpsi1(&self) -> f64 {
        self.psi2 - self.gamma * self.psi1
    }
}

/// Integration state: current abscissa and row-major 2n x n frame.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub x: f64,
    f: Vec<f64>,
    since_qr: usize,
}

/// Fixed-lambda integrator.
pub struct Propagator<'a> {
    problem: &'a Problem,
    lambda: f64,
    n: usize,
    h: f64,
}

impl<'a> Propagator<'a> {
    pub fn new(problem: &'a Problem, lambda: f64) -> Self {
        let steps = problem.steps_for(problem.length, lambda);
        Propagator { problem, lambda, n: problem.n(), h: problem.length / steps as f64 }
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn initial(&self) -> Result<FlowState> {
        let f0 = boundary_frame(&self.problem.bc0, self.n)?;
        let mut f = vec![0.0; 2 * self.n * self.n];
        for r in 0..2 * self.n {
            for c in 0..self.n {
                f[r * self.n + c] = f0[(r, c)];
            }
        }
        let mut st = FlowState { x: 0.0, f, since_qr: 0 };
        orthonormalize(&mut st.f, 2 * self.n, self.n)?;
        Ok(st)
    }

    fn deriv(&self, x: f64, f: &[f64], out: &mut [f64], v: &mut [f64]) {
        let n = self.n;
        self.problem.potential.eval_into(x, v);
        for i in 0..n {
            let inv_d = 1.0 / self.problem.diffusion[i];
            for c in 0..n {
                out[i * n + c] = f[(n + i) * n + c] * inv_d;
            }
        }
        for i in 0..n {
            for c in 0..n {
                let mut s = self.lambda * f[i * n + c];
                for j in 0..n {
                    s -= v[i * n + j] * f[j * n + c];
                }
                out[(n + i) * n + c] = s;
            }
        }
    }

    /// Integrates to `x_to >= state.x` with equal substeps no longer than the nominal step.
    pub fn advance(&self, st: &mut FlowState, x_to: f64) -> Result<()> {
        let span = x_to - st.x;
        if span < 0.0 {
            return Err(Error::Numerical(format!("cannot integrate backwards from {} to {x_to}", st.x)));
        }
        if span == 0.0 {
            return Ok(());
        }
        let m = (span / self.h * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / m as f64;
        if !(h > 0.0) || st.x + h == st.x {
            return Err(Error::Numerical("step underflow".into()));
        }
        let len = st.f.len();
        let (mut k1, mut k2, mut k3, mut k4, mut tmp) =
            (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
        let mut v = vec![0.0; self.n * self.n];
        let x0 = st.x;
        for s in 0..m {
            let x = x0 + s as f64 * h;
            self.deriv(x, &st.f, &mut k1, &mut v);
            for i in 0..len {
                tmp[i] = st.f[i] + 0.5 * h * k1[i];
            }
            self.deriv(x + 0.5 * h, &tmp, &mut k2, &mut v);
            for i in 0..len {
                tmp[i] = st.f[i] + 0.5 * h * k2[i];
            }
            self.deriv(x + 0.5 * h, &tmp, &mut k3, &mut v);
            for i in 0..len {
                tmp[i] = st.f[i] + h * k3[i];
            }
            self.deriv(x + h, &tmp, &mut k4, &mut v);
            for i in 0..len {
                st.f[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            st.since_qr += 1;
            if st.since_qr >= self.problem.grid.qr_every.max(1) {
                orthonormalize(&mut st.f, 2 * self.n, self.n)?;
                st.since_qr = 0;
            }
        }
        st.x = x_to;
        orthonormalize(&mut st.f, 2 * self.n, self.n)?;
        st.since_qr = 0;
        Ok(())
    }

    fn form_value(&self, which: usize, f: &[f64]) -> f64 {
        let n = self.n;
        let mut buf = vec![0.0; n * n];
        self.problem.terms[which]
            .iter()
            .map(|(rows, c)| {
                for (r, &row) in rows.iter().enumerate() {
                    buf[r * n..(r + 1) * n].copy_from_slice(&f[row * n..(row + 1) * n]);
                }
                c * det_in_place(&mut buf, n)
            })
            .sum()
    }

    /// `(psi1, psi2)` of an orthonormalized state.
    pub fn psi12(&self, st: &FlowState) -> (f64, f64) {
        (self.form_value(0, &st.f), self.form_value(1, &st.f))
    }

    pub fn sample(&self, st: &FlowState) -> FlowSample {
        let n = self.n;
        let mut af = vec![0.0; st.f.len()];
        let mut v = vec![0.0; n * n];
        self.deriv(st.x, &st.f, &mut af, &mut v);
        let gamma = af.iter().zip(&st.f).map(|(a, b)| a * b).sum();
        FlowSample {
            x: st.x,
            frame: DMatrix::from_row_slice(2 * n, n, &st.f),
            psi1: self.form_value(0, &st.f),
            psi2: self.form_value(1, &st.f),
            psi3: self.form_value(2, &st.f),
            gamma,
        }
    }

    /// `d psi2/dx = (sum_j b_jj/d_j) psi1 + psi3 - gamma psi2` at a sample.
    pub fn dpsi2(&self, s: &FlowSample) -> f64 {
        let v = self.problem.potential.at(s.x);
        let trace: f64 = (0..self.n).map(|j| (self.lambda - v[(j, j)]) / self.problem.diffusion[j]).sum();
        trace * s.psi1 + s.psi3 - s.gamma * s.psi2
    }
}

/// Modified Gram-Schmidt on the columns of a row-major `rows x cols` buffer.
fn orthonormalize(f: &mut [f64], rows: usize, cols: usize) -> Result<()> {
    for c in 0..cols {
        let orig: f64 = (0..rows).map(|r| f[r * cols + c].powi(2)).sum::<f64>().sqrt();
        for p in 0..c {
            let dot: f64 = (0..rows).map(|r| f[r * cols + p] * f[r * cols + c]).sum();
            for r in 0..rows {
                f[r * cols + c] -= dot * f[r * cols + p];
            }
        }
        let norm: f64 = (0..rows).map(|r| f[r * cols + c].powi(2)).sum::<f64>().sqrt();
        if !(norm > 1e-12 * orig) || !norm.is_finite() {
            return Err(Error::Numerical(format!("frame lost rank in column {c}")));
        }
        for r in 0..rows {
            f[r * cols + c] /= norm;
        }
    }
    Ok(())
}

fn check_targets(problem: &Problem, xs: &[f64]) -> Result<()> {
    if xs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("targets must be nondecreasing".into()));
    }
    if xs.iter().any(|&x| x < 0.0 || x > problem.length * (1.0 + 1e-12)) {
        return Err(Error::Config("targets must lie in [0, L]".into()));
    }
    Ok(())
}

/// Samples of the flow at the requested abscissae.
pub fn propagate(problem: &Problem, lambda: f64, targets: &[f64]) -> Result<Vec<FlowSample>> {
    check_targets(problem, targets)?;
    let prop = Propagator::new(problem, lambda);
    let mut st = prop.initial()?;
    let mut out = Vec::with_capacity(targets.len());
    for &x in targets {
        prop.advance(&mut st, x)?;
        out.push(prop.sample(&st));
    }
    Ok(out)
}

/// `(psi1, psi2)` only, at the requested abscissae.
pub fn psi_trace(problem: &Problem, lambda: f64, targets: &[f64]) -> Result<Vec<(f64, f64)>> {
    check_targets(problem, targets)?;
    let prop = Propagator::new(problem, lambda);
    let mut st = prop.initial()?;
    let mut out = Vec::with_capacity(targets.len());
    for &x in targets {
        prop.advance(&mut st, x)?;
        out.push(prop.psi12(&st));
    }
    Ok(out)
}

/// A value above every real eigenvalue: `K + 1` (Dirichlet start) or
/// `K + C^2/d_min + 1` with `C = ||Theta||_2` (Robin; Neumann is `Theta = 0`).
pub fn lambda_infinity(problem: &Problem) -> f64 {
    let k = problem.potential_bound();
    let c = match &problem.bc0 {
        Boundary::Dirichlet | Boundary::Neumann => 0.0,
        Boundary::Robin(t) => spectral_norm(t),
    };
    k + c * c / problem.d_min() + 1.0
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![a];
    }
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// Left edge `delta` of the Maslov box.
///
/// Dirichlet start: first grid `x` with `psi1 / |(psi1, psi2)| > eps_cross`
/// (and `psi1 > 0` up to it) for every lambda. Otherwise: largest grid
/// `x <= L/10` with `psi1 >= psi1(0)/2` on `[0, x]` for every lambda.
pub fn delta_start(problem: &Problem, lambda_grid: &[f64]) -> Result<f64> {
    let limit = problem.length / 10.0;
    let h = (1.0 / problem.grid.nx_per_unit as f64).max(limit / 2000.0);
    let count = (limit / h).floor() as usize;
    if count == 0 {
        return Err(Error::Degenerate("no grid point below L/10".into()));
    }
    let xs: Vec<f64> = (1..=count).map(|j| j as f64 * h).collect();
    let dirichlet = matches!(problem.bc0, Boundary::Dirichlet);
    let eps = problem.tol.eps_cross;
    let per_lambda: Vec<usize> = lambda_grid
        .par_iter()
        .map(|&lam| -> Result<usize> {
            let mut targets = vec![0.0];
            targets.extend_from_slice(&xs);
            let tr = psi_trace(problem, lam, &targets)?;
            let start = tr[0].0;
            if dirichlet {
                // First passing index, provided psi1 stays positive before it.
                for (j, &(p1, p2)) in tr[1..].iter().enumerate() {
                    if p1 < 0.0 {
                        return Ok(0);
                    }
                    if p1 / p1.hypot(p2) > eps {
                        return Ok(j + 1);
                    }
                }
                Ok(0)
            } else if !(start > 0.0) {
                Ok(0)
            } else {
                // Number of leading grid points with psi1 >= psi1(0)/2.
                Ok(tr[1..].iter().position(|&(p1, _)| p1 < 0.5 * start).unwrap_or(count))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    if per_lambda.contains(&0) {
        return Err(Error::Degenerate("no delta below L/10 keeps psi1 away from zero".into()));
    }
    let idx = if dirichlet { *per_lambda.iter().max().unwrap() } else { *per_lambda.iter().min().unwrap() };
    Ok(xs[idx - 1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugatePoint {
    pub x: f64,
    /// Sign of `psi1' / psi2` at the crossing.
    pub direction: i32,
}

/// Sampled trace along `x` at fixed lambda, with states for restarting.
pub struct XTrace<'a> {
    pub prop: Propagator<'a>,
    pub states: Vec<FlowState>,
    pub psi: Vec<(f64, f64)>,
}

impl<'a> XTrace<'a> {
    /// Samples every RK4 step on `[x0, x1]`.
    pub fn new(problem: &'a Problem, lambda: f64, x0: f64, x1: f64) -> Result<Self> {
        let prop = Propagator::new(problem, lambda);
        let mut st = prop.initial()?;
        prop.advance(&mut st, x0)?;
        let m = ((x1 - x0) / prop.step()).ceil().max(1.0) as usize;
        let mut states = Vec::with_capacity(m + 1);
        let mut psi = Vec::with_capacity(m + 1);
        psi.push(prop.psi12(&st));
        states.push(st.clone());
        for k in 1..=m {
            let x = if k == m { x1 } else { x0 + (x1 - x0) * k as f64 / m as f64 };
            prop.advance(&mut st, x)?;
            psi.push(prop.psi12(&st));
            states.push(st.clone());
        }
        Ok(XTrace { prop, states, psi })
    }

    pub fn xs(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.x).collect()
    }

    /// Restarts from the nearest stored state at or left of `x`.
    pub fn state_at(&self, x: f64) -> Result<FlowState> {
        let k = self.states.partition_point(|s| s.x <= x).saturating_sub(1);
        let mut st = self.states[k].clone();
        let target = x.max(st.x);
        self.prop.advance(&mut st, target)?;
        Ok(st)
    }

    pub fn psi_at(&self, x: f64) -> Result<(f64, f64)> {
        Ok(self.prop.psi12(&self.state_at(x)?))
    }

    /// Sign-change zeros of `psi1` refined by bisection to `tol`, with the value of `psi2` there.
    pub fn psi1_zeros(&self, tol: f64) -> Result<Vec<(f64, f64, i32)>> {
        let mut out = Vec::new();
        for k in 1..self.psi.len() {
            let (a, b) = (self.psi[k - 1].0, self.psi[k].0);
            if a == 0.0 && k > 1 {
                continue;
            }
            if !((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0) || (a == 0.0 && k == 1 && b != 0.0)) {
                continue;
            }
            if b == 0.0 && k + 1 < self.psi.len() && self.psi[k + 1].0.signum() == a.signum() {
                continue;
            }
            let (mut lo, mut hi) = (self.states[k - 1].x, self.states[k].x);
            let sa = a.signum();
            let mut root = if b == 0.0 { Some(hi) } else { None };
            if a == 0.0 {
                root = Some(lo);
            }
            while root.is_none() && hi - lo > tol {
                let mid = 0.5 * (lo + hi);
                let (pm, _) = self.psi_at(mid)?;
                if pm == 0.0 {
                    root = Some(mid);
                } else if pm.signum() == sa {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = root.unwrap_or(0.5 * (lo + hi));
            let (_, p2) = self.psi_at(x)?;
            let slope = b - a;
            let dir = if p2 == 0.0 { 0 } else { (slope / p2).signum() as i32 };
            out.push((x, p2, dir));
        }
        Ok(out)
    }

    pub fn max_abs_psi2(&self) -> f64 {
        self.psi.iter().fold(0.0, |m, p| m.max(p.1.abs()))
    }
}

/// Conjugate points in `(delta, L]` at lambda = 0.
pub fn conjugate_points(problem: &Problem) -> Result<Vec<ConjugatePoint>> {
    let lam_inf = lambda_infinity(problem);
    let delta = delta_start(problem, &linspace(0.0, lam_inf, problem.grid.nlambda))?;
    conjugate_points_from(problem, delta)
}

pub fn conjugate_points_from(problem: &Problem, delta: f64) -> Result<Vec<ConjugatePoint>> {
    let trace = XTrace::new(problem, 0.0, delta, problem.length)?;
    let scale = trace.max_abs_psi2();
    let zeros = trace.psi1_zeros(problem.tol.root * problem.length)?;
    let mut out: Vec<ConjugatePoint> = Vec::new();
    for (x, p2, dir) in zeros {
        if x <= delta {
            continue;
        }
        if p2.abs() <= problem.tol.double_root * scale {
            return Err(Error::LeftMaSpace { side: "bottom".into(), x, lambda: 0.0 });
        }
        if let Some(last) = out.last() {
            if (x - last.x).abs() <= problem.tol.merge * problem.length {
                continue;
            }
        }
        out.push(ConjugatePoint { x, direction: dir });
    }
    Ok(out)
}

/// Max residuals of the two psi identities, by five-point central differences with spacing `h`.
pub fn psi_residual(problem: &Problem, lambda: f64, h: f64) -> Result<(f64, f64)> {
    let count = (problem.length / h).floor() as usize;
    if count < 4 {
        return Err(Error::Config("spacing too large for the interval".into()));
    }
    let xs: Vec<f64> = (0..=count).map(|k| k as f64 * h).collect();
    let prop = Propagator::new(problem, lambda);
    let mut st = prop.initial()?;
    let mut samples = Vec::with_capacity(xs.len());
    for &x in &xs {
        prop.advance(&mut st, x)?;
        samples.push(prop.sample(&st));
    }
    let (mut r1, mut r2) = (0.0f64, 0.0f64);
    let five = |f: &dyn Fn(&FlowSample) -> f64, k: usize| {
        (-f(&samples[k + 2]) + 8.0 * f(&samples[k + 1]) - 8.0 * f(&samples[k - 1]) + f(&samples[k - 2])) / (12.0 * h)
    };
    for k in 2..count - 1 {
        let s = &samples[k];
        let d1 = five(&|q| q.psi1, k);
        let d2 = five(&|q| q.psi2, k);
        r1 = r1.max((d1 - s.dpsi1()).abs());
        r2 = r2.max((d2 - prop.dpsi2(s)).abs());
    }
    Ok((r1, r2))
}
