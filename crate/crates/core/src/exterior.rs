//! Exterior algebra over R^{2n}.
//!
//! Multivectors and forms share one coefficient layout: one real per
//! k-subset of `{1..dim}`, ordered lexicographically. Indices exposed in
//! the public API are 1-based to match the usual `e_i` notation; storage
//! is 0-based.

use std::f64::consts::PI;
use std::marker::PhantomData;

use nalgebra::{DMatrix, DVector, Matrix4};

use crate::error::{Error, Result};

/// Relative singular-value threshold for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// A 2n x n matrix whose columns span an oriented n-plane.
pub type Frame = DMatrix<f64>;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut r: usize = 1;
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

/// Lexicographic k-subsets of `0..dim`.
#[derive(Debug, Clone)]
pub struct Subsets {
    dim: usize,
    cur: Vec<usize>,
    done: bool,
}

impl Subsets {
    pub fn new(dim: usize, k: usize) -> Self {
        Subsets { dim, cur: (0..k).collect(), done: k > dim }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        let k = self.cur.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.cur[i] < self.dim - k + i {
                self.cur[i] += 1;
                for j in i + 1..k {
                    self.cur[j] = self.cur[j - 1] + 1;
                }
                break;
            }
        }
        Some(out)
    }
}

/// Lexicographic rank of a strictly increasing 0-based subset.
pub fn subset_rank(subset: &[usize], dim: usize) -> usize {
    let k = subset.len();
    let mut rank = 0;
    let mut prev: isize = -1;
    for (pos, &c) in subset.iter().enumerate() {
        for v in (prev + 1) as usize..c {
            rank += binomial(dim - 1 - v, k - 1 - pos);
        }
        prev = c as isize;
    }
    rank
}

/// Inverse of [`subset_rank`].
pub fn subset_unrank(mut rank: usize, dim: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut v = 0;
    for pos in 0..k {
        loop {
            let block = binomial(dim - 1 - v, k - 1 - pos);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        out.push(v);
        v += 1;
    }
    out
}

/// A strictly increasing multi-index `I = {i_1 < ... < i_k}` with 1-based entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    indices: Vec<usize>,
    rank: usize,
}

impl MultiIndex {
    pub fn new(indices: &[usize], dim: usize) -> Result<Self> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidDegree(format!("multi-index {indices:?} is not strictly increasing")));
        }
        if indices.iter().any(|&i| i == 0 || i > dim) {
            return Err(Error::InvalidDegree(format!("multi-index {indices:?} out of range 1..={dim}")));
        }
        let zero: Vec<usize> = indices.iter().map(|i| i - 1).collect();
        Ok(MultiIndex { indices: indices.to_vec(), rank: subset_rank(&zero, dim) })
    }

    pub fn from_rank(rank: usize, dim: usize, k: usize) -> Self {
        let indices = subset_unrank(rank, dim, k).into_iter().map(|i| i + 1).collect();
        MultiIndex { indices, rank }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn rank(&self) -> usize {
        self.rank
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Primal;
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dual;

/// Homogeneous element of the exterior algebra, either a k-vector
/// (`Primal`) or a k-form in the dual basis `e*_I` (`Dual`).
#[derive(Debug, Clone, PartialEq)]
pub struct Multi<K> {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
    _kind: PhantomData<K>,
}

pub type KVector = Multi<Primal>;
pub type KForm = Multi<Dual>;

impl<K> Multi<K> {
    pub fn zero(dim: usize, degree: usize) -> Result<Self> {
        if degree > dim {
            return Err(Error::InvalidDegree(format!("degree {degree} exceeds dimension {dim}")));
        }
        Ok(Multi { dim, degree, coeffs: vec![0.0; binomial(dim, degree)], _kind: PhantomData })
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        let mut m = Self::zero(dim, degree)?;
        if coeffs.len() != m.coeffs.len() {
            return Err(Error::InvalidDegree(format!(
                "expected {} coefficients, got {}",
                m.coeffs.len(),
                coeffs.len()
            )));
        }
        m.coeffs = coeffs;
        Ok(m)
    }

    pub fn scalar(dim: usize, c: f64) -> Self {
        Multi { dim, degree: 0, coeffs: vec![c], _kind: PhantomData }
    }

    /// `e_{i_1} ^ ... ^ e_{i_k}` (or the dual basis element); 1-based indices.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let mi = MultiIndex::new(indices, dim)?;
        let mut m = Self::zero(dim, indices.len())?;
        m.coeffs[mi.rank()] = 1.0;
        Ok(m)
    }

    /// Degree-one element with the given components.
    pub fn from_slice(v: &[f64]) -> Self {
        Multi { dim: v.len(), degree: 1, coeffs: v.to_vec(), _kind: PhantomData }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient at a 1-based multi-index.
    pub fn coeff(&self, indices: &[usize]) -> Result<f64> {
        if indices.len() != self.degree {
            return Err(Error::InvalidDegree(format!("index of length {} for degree {}", indices.len(), self.degree)));
        }
        Ok(self.coeffs[MultiIndex::new(indices, self.dim)?.rank()])
    }

    pub fn set_coeff(&mut self, indices: &[usize], value: f64) -> Result<()> {
        if indices.len() != self.degree {
            return Err(Error::InvalidDegree(format!("index of length {} for degree {}", indices.len(), self.degree)));
        }
        let r = MultiIndex::new(indices, self.dim)?.rank();
        self.coeffs[r] = value;
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        Multi { coeffs: self.coeffs.iter().map(|c| c * s).collect(), ..self.clone_shape() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Multi { coeffs, ..self.clone_shape() })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    /// Nonzero entries as (1-based multi-index, coefficient).
    pub fn terms(&self) -> Vec<(Vec<usize>, f64)> {
        Subsets::new(self.dim, self.degree)
            .zip(&self.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(s, c)| (s.into_iter().map(|i| i + 1).collect(), *c))
            .collect()
    }

    pub fn wedge(&self, other: &Self) -> Result<Self> {
        wedge(self, other)
    }

    fn clone_shape(&self) -> Self {
        Multi { dim: self.dim, degree: self.degree, coeffs: Vec::new(), _kind: PhantomData }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.degree != other.degree {
            return Err(Error::InvalidDegree(format!(
                "shape mismatch: (dim {}, degree {}) vs (dim {}, degree {})",
                self.dim, self.degree, other.dim, other.degree
            )));
        }
        Ok(())
    }
}

/// Exterior product with shuffle signs.
pub fn wedge<K>(a: &Multi<K>, b: &Multi<K>) -> Result<Multi<K>> {
    if a.dim != b.dim {
        return Err(Error::InvalidDegree(format!("dimension mismatch {} vs {}", a.dim, b.dim)));
    }
    let deg = a.degree + b.degree;
    if deg > a.dim {
        return Err(Error::InvalidDegree(format!("wedge degree {deg} exceeds dimension {}", a.dim)));
    }
    let mut out = Multi::<K>::zero(a.dim, deg)?;
    let bs: Vec<(Vec<usize>, f64)> =
        Subsets::new(b.dim, b.degree).zip(&b.coeffs).filter(|(_, c)| **c != 0.0).map(|(s, c)| (s, *c)).collect();
    let mut merged = Vec::with_capacity(deg);
    for (i_set, &ca) in Subsets::new(a.dim, a.degree).zip(&a.coeffs) {
        if ca == 0.0 {
            continue;
        }
        for (j_set, cb) in &bs {
            if i_set.iter().any(|i| j_set.contains(i)) {
                continue;
            }
            let inversions: usize = i_set.iter().map(|&i| j_set.iter().filter(|&&j| j < i).count()).sum();
            let sign = if inversions.is_multiple_of(2) { 1.0 } else { -1.0 };
            merged.clear();
            merged.extend_from_slice(&i_set);
            merged.extend_from_slice(j_set);
            merged.sort_unstable();
            out.coeffs[subset_rank(&merged, a.dim)] += sign * ca * cb;
        }
    }
    Ok(out)
}

/// Interior product `(i_v w)(w_1, ..., w_{k-1}) = w(v, w_1, ..., w_{k-1})`.
pub fn contract(v: &[f64], omega: &KForm) -> Result<KForm> {
    if omega.degree == 0 {
        return Err(Error::InvalidDegree("cannot contract a 0-form".into()));
    }
    if v.len() != omega.dim {
        return Err(Error::InvalidDegree(format!("vector length {} vs dimension {}", v.len(), omega.dim)));
    }
    let mut out = KForm::zero(omega.dim, omega.degree - 1)?;
    let mut rest = Vec::with_capacity(omega.degree);
    for (set, &c) in Subsets::new(omega.dim, omega.degree).zip(&omega.coeffs) {
        if c == 0.0 {
            continue;
        }
        for (p, &i) in set.iter().enumerate() {
            if v[i] == 0.0 {
                continue;
            }
            rest.clear();
            rest.extend(set.iter().enumerate().filter(|(q, _)| *q != p).map(|(_, &j)| j));
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            out.coeffs[subset_rank(&rest, omega.dim)] += sign * v[i] * c;
        }
    }
    Ok(out)
}

/// Determinant of a row-major n x n matrix, destroying the buffer.
pub(crate) fn det_in_place(m: &mut [f64], n: usize) -> f64 {
    match n {
        0 => 1.0,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        3 => {
            m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) + m[2] * (m[3] * m[7] - m[4] * m[6])
        }
        _ => {
            let mut det = 1.0;
            for col in 0..n {
                let mut piv = col;
                for r in col + 1..n {
                    if m[r * n + col].abs() > m[piv * n + col].abs() {
                        piv = r;
                    }
                }
                if m[piv * n + col] == 0.0 {
                    return 0.0;
                }
                if piv != col {
                    for c in 0..n {
                        m.swap(piv * n + c, col * n + c);
                    }
                    det = -det;
                }
                let p = m[col * n + col];
                det *= p;
                for r in col + 1..n {
                    let f = m[r * n + col] / p;
                    if f != 0.0 {
                        for c in col..n {
                            m[r * n + c] -= f * m[col * n + c];
                        }
                    }
                }
            }
            det
        }
    }
}

/// Minor of `f` on the given 0-based rows (all columns).
pub fn minor(f: &DMatrix<f64>, rows: &[usize]) -> f64 {
    let n = f.ncols();
    let mut buf = [0.0f64; 64];
    let mut heap;
    let m: &mut [f64] = if n * n <= 64 {
        &mut buf[..n * n]
    } else {
        heap = vec![0.0; n * n];
        &mut heap
    };
    for (r, &row) in rows.iter().enumerate() {
        for c in 0..n {
            m[r * n + c] = f[(row, c)];
        }
    }
    det_in_place(m, n)
}

/// Plücker coordinates: the maximal minors of the frame.
pub fn plucker(f: &Frame) -> KVector {
    let dim = f.nrows();
    let k = f.ncols();
    let coeffs = Subsets::new(dim, k).map(|rows| minor(f, &rows)).collect();
    KVector { dim, degree: k, coeffs, _kind: PhantomData }
}

/// Dual pairing of a k-form with a k-vector.
pub fn pairing(omega: &KForm, xi: &KVector) -> Result<f64> {
    if omega.dim != xi.dim || omega.degree != xi.degree {
        return Err(Error::InvalidDegree("pairing of mismatched degrees".into()));
    }
    Ok(omega.coeffs.iter().zip(&xi.coeffs).map(|(a, b)| a * b).sum())
}

/// `w(f_1, ..., f_n) = sum_I w_I minor_I(F)`.
pub fn evaluate(omega: &KForm, f: &Frame) -> Result<f64> {
    if omega.dim != f.nrows() || omega.degree != f.ncols() {
        return Err(Error::InvalidDegree(format!(
            "{}-form on R^{} evaluated on a {}x{} frame",
            omega.degree,
            omega.dim,
            f.nrows(),
            f.ncols()
        )));
    }
    Ok(Subsets::new(omega.dim, omega.degree)
        .zip(&omega.coeffs)
        .filter(|(_, c)| **c != 0.0)
        .map(|(rows, c)| c * minor(f, &rows))
        .sum())
}

pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.clone().svd(false, false).singular_values.iter().copied().collect()
}

/// Rank with the relative threshold [`RANK_TOL`].
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let s = singular_values(m);
    let smax = s.iter().fold(0.0f64, |a, &b| a.max(b));
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > RANK_TOL * smax).count()
}

/// `w(F) / sqrt(det(F^T F))`, the Gram-normalized evaluation.
pub fn psi(omega: &KForm, f: &Frame) -> Result<f64> {
    let value = evaluate(omega, f)?;
    if numerical_rank(f) < f.ncols() {
        return Err(Error::DegenerateFrame);
    }
    let gram = f.transpose() * f;
    let n = gram.nrows();
    let mut buf: Vec<f64> = (0..n * n).map(|i| gram[(i / n, i % n)]).collect();
    let g = det_in_place(&mut buf, n);
    if g <= 0.0 {
        return Err(Error::DegenerateFrame);
    }
    Ok(value / g.sqrt())
}

fn contraction_matrix(omega: &KForm) -> Result<DMatrix<f64>> {
    let dim = omega.dim;
    let rows = binomial(dim, omega.degree - 1);
    let mut m = DMatrix::zeros(rows.max(dim), dim);
    let mut e = vec![0.0; dim];
    for i in 0..dim {
        e[i] = 1.0;
        let c = contract(&e, omega)?;
        for (r, v) in c.coeffs.iter().enumerate() {
            m[(r, i)] = *v;
        }
        e[i] = 0.0;
    }
    Ok(m)
}

/// Orthonormal basis of `ker w = { v : i_v w = 0 }`.
pub fn kernel(omega: &KForm) -> Result<Vec<DVector<f64>>> {
    if omega.degree == 0 {
        return Err(Error::InvalidDegree("kernel of a 0-form".into()));
    }
    let m = contraction_matrix(omega)?;
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::Numerical("SVD did not return V".into()))?;
    let smax = svd.singular_values.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut basis = Vec::new();
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if smax == 0.0 || s <= RANK_TOL * smax {
            basis.push(vt.row(i).transpose());
        }
    }
    Ok(basis)
}

/// The forms w1, w2, w3 attached to the diffusion matrix `diag(d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardForms {
    pub omega1: KForm,
    pub omega2: KForm,
    pub omega3: KForm,
}

pub fn standard_forms(n: usize, d: &[f64]) -> Result<StandardForms> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if d.len() != n {
        return Err(Error::Config(format!("expected {n} diffusion coefficients, got {}", d.len())));
    }
    if let Some(bad) = d.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
        return Err(Error::Config(format!("diffusion coefficients must be positive, got {bad}")));
    }
    let dim = 2 * n;
    // Wedge 1-forms in slot order so the signs come out of the product.
    let product = |replaced: &[usize]| -> Result<KForm> {
        let mut acc = KForm::scalar(dim, 1.0);
        for p in 0..n {
            let idx = if replaced.contains(&p) { p + n + 1 } else { p + 1 };
            acc = wedge(&acc, &KForm::basis(dim, &[idx])?)?;
        }
        Ok(acc)
    };
    let omega1 = product(&[])?;
    let mut omega2 = KForm::zero(dim, n)?;
    for j in 0..n {
        omega2 = omega2.add(&product(&[j])?.scaled(1.0 / d[j]))?;
    }
    let mut omega3 = KForm::zero(dim, n)?;
    for j in 0..n {
        for k in j + 1..n {
            omega3 = omega3.add(&product(&[j, k])?.scaled(2.0 / (d[j] * d[k])))?;
        }
    }
    Ok(StandardForms { omega1, omega2, omega3 })
}

fn independent(a: &KForm, b: &KForm) -> bool {
    let mut m = DMatrix::zeros(a.coeffs.len().max(2), 2);
    for (i, (x, y)) in a.coeffs.iter().zip(&b.coeffs).enumerate() {
        m[(i, 0)] = *x;
        m[(i, 1)] = *y;
    }
    numerical_rank(&m) == 2
}

/// A vector `v` such that `i_v w` and `i_v h` are linearly independent.
///
/// Picks the pair of multi-indices `(I, J)` with the largest 2x2 minor
/// `a_I b_J - a_J b_I`; uses `e_i` for a shared index, otherwise
/// `e_i + e_j` with `i in I`, `j in J`. Other candidates are tried only
/// if that choice fails the rank test.
pub fn independent_contraction_vector(omega: &KForm, eta: &KForm) -> Result<DVector<f64>> {
    if omega.dim != eta.dim || omega.degree != eta.degree {
        return Err(Error::InvalidDegree("forms of different shape".into()));
    }
    if omega.degree < 2 {
        return Err(Error::InvalidDegree("contraction vector needs degree >= 2".into()));
    }
    if !independent(omega, eta) {
        return Err(Error::NoSuchVector);
    }
    let dim = omega.dim;
    let k = omega.degree;
    let mut best = (0usize, 0usize, 0.0f64);
    let len = omega.coeffs.len();
    for i in 0..len {
        for j in i + 1..len {
            let m = (omega.coeffs[i] * eta.coeffs[j] - omega.coeffs[j] * eta.coeffs[i]).abs();
            if m > best.2 {
                best = (i, j, m);
            }
        }
    }
    let iset = subset_unrank(best.0, dim, k);
    let jset = subset_unrank(best.1, dim, k);
    let unit = |i: usize| {
        let mut v = DVector::zeros(dim);
        v[i] = 1.0;
        v
    };
    let mut candidates = Vec::new();
    if let Some(&shared) = iset.iter().find(|i| jset.contains(i)) {
        candidates.push(unit(shared));
    } else {
        candidates.push(unit(iset[0]) + unit(jset[0]));
    }
    candidates.extend((0..dim).map(unit));
    for i in 0..dim {
        for j in i + 1..dim {
            candidates.push(unit(i) + unit(j));
        }
    }
    for v in candidates {
        let a = contract(v.as_slice(), omega)?;
        let b = contract(v.as_slice(), eta)?;
        if independent(&a, &b) {
            return Ok(v);
        }
    }
    Err(Error::NoSuchVector)
}

/// A loop of n-planes whose image under `[w1 : w2]` winds once.
#[derive(Debug, Clone)]
pub struct IndexOneLoop {
    /// `v_1, ..., v_{n-1}` from iterated contraction.
    pub vs: Vec<DVector<f64>>,
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub params: Vec<f64>,
    pub frames: Vec<Frame>,
}

impl IndexOneLoop {
    /// Frame with columns `v_1, ..., v_{n-1}, cos(pi t) u1 - sin(pi t) u2`.
    pub fn frame_at(&self, t: f64) -> Frame {
        let dim = self.u1.len();
        let n = self.vs.len() + 1;
        let mut f = DMatrix::zeros(dim, n);
        for (c, v) in self.vs.iter().enumerate() {
            f.set_column(c, v);
        }
        let (s, c) = (PI * t).sin_cos();
        f.set_column(n - 1, &(&self.u1 * c - &self.u2 * s));
        f
    }
}

pub fn index_one_loop(omega1: &KForm, omega2: &KForm, samples: usize) -> Result<IndexOneLoop> {
    if omega1.dim != omega2.dim || omega1.degree != omega2.degree {
        return Err(Error::InvalidDegree("forms of different shape".into()));
    }
    if omega1.degree == 0 {
        return Err(Error::InvalidDegree("loop needs degree >= 1".into()));
    }
    let mut a = omega1.clone();
    let mut b = omega2.clone();
    let mut vs = Vec::new();
    while a.degree > 1 {
        let v = independent_contraction_vector(&a, &b)?;
        a = contract(v.as_slice(), &a)?;
        b = contract(v.as_slice(), &b)?;
        vs.push(v);
    }
    if !independent(&a, &b) {
        return Err(Error::NoSuchVector);
    }
    let dim = a.dim;
    let mut m = DMatrix::zeros(2, dim);
    for i in 0..dim {
        m[(0, i)] = a.coeffs[i];
        m[(1, i)] = b.coeffs[i];
    }
    let gram = &m * m.transpose();
    let inv = gram.try_inverse().ok_or(Error::NoSuchVector)?;
    let right = m.transpose() * inv;
    let u1: DVector<f64> = right.column(0).into_owned();
    let u2: DVector<f64> = right.column(1).into_owned();
    let samples = samples.max(2);
    let mut lp = IndexOneLoop { vs, u1, u2, params: Vec::new(), frames: Vec::new() };
    lp.params = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    lp.frames = lp.params.iter().map(|&t| lp.frame_at(t)).collect();
    Ok(lp)
}

/// Skew matrix of a 2-form: `e_i* ^ e_j*` maps to `W_ij = 1`, `W_ji = -1`.
pub fn two_form_matrix(omega: &KForm) -> Result<DMatrix<f64>> {
    if omega.degree != 2 {
        return Err(Error::InvalidDegree(format!("expected a 2-form, got degree {}", omega.degree)));
    }
    let mut m = DMatrix::zeros(omega.dim, omega.dim);
    for (set, &c) in Subsets::new(omega.dim, 2).zip(&omega.coeffs) {
        m[(set[0], set[1])] = c;
        m[(set[1], set[0])] = -c;
    }
    Ok(m)
}

fn check_skew(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Config("matrix is not square".into()));
    }
    let scale = m.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let asym = (m + m.transpose()).iter().fold(0.0f64, |a, b| a.max(b.abs()));
    if asym > 1e-12 * scale {
        return Err(Error::Config("matrix is not skew-symmetric".into()));
    }
    Ok(())
}

pub fn two_form_from_matrix(m: &DMatrix<f64>) -> Result<KForm> {
    check_skew(m)?;
    let dim = m.nrows();
    let coeffs = Subsets::new(dim, 2).map(|s| m[(s[0], s[1])]).collect();
    KForm::from_coeffs(dim, 2, coeffs)
}

/// `Pf(A) = A12 A34 - A13 A24 + A14 A23`.
pub fn pfaffian(a: &Matrix4<f64>) -> f64 {
    a[(0, 1)] * a[(2, 3)] - a[(0, 2)] * a[(1, 3)] + a[(0, 3)] * a[(1, 2)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PencilType {
    IdenticallyZero,
    TwoRealRoots,
    DoubleRoot,
    NoRealRoots,
}

/// `q(x, y) = a x^2 + b x y + c y^2` with its root type.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PencilClass {
    pub kind: PencilType,
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

/// Classifies the pencil `x W1 + y W2` by the real roots of its Pfaffian.
pub fn pfaffian_classify(w1: &Matrix4<f64>, w2: &Matrix4<f64>) -> Result<PencilClass> {
    let d1 = DMatrix::from_iterator(4, 4, w1.iter().copied());
    let d2 = DMatrix::from_iterator(4, 4, w2.iter().copied());
    check_skew(&d1)?;
    check_skew(&d2)?;
    let f1 = two_form_from_matrix(&d1)?;
    let f2 = two_form_from_matrix(&d2)?;
    if !independent(&f1, &f2) {
        return Err(Error::Degenerate("dependent pencil".into()));
    }
    let a = pfaffian(w1);
    let c = pfaffian(w2);
    let b = pfaffian(&(w1 + w2)) - a - c;
    let norm_scale = w1.iter().fold(0.0f64, |m, v| m.max(v.abs())) * w2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = a.abs().max(b.abs()).max(c.abs());
    let kind = if scale <= 1e-12 * norm_scale.max(f64::MIN_POSITIVE) {
        PencilType::IdenticallyZero
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc.abs() <= 1e-10 * scale * scale {
            PencilType::DoubleRoot
        } else if disc > 0.0 {
            PencilType::TwoRealRoots
        } else {
            PencilType::NoRealRoots
        }
    };
    Ok(PencilClass { kind, a, b, c })
}
