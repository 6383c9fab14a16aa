//! Symmetric sparse matrices, SPD solves and smallest-eigenpair routines.
//!
//! Everything below `dense_limit` unknowns goes through nalgebra's dense
//! Cholesky and symmetric eigensolver; above it, Jacobi-preconditioned
//! conjugate gradients and shift-invert Lanczos take over.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Problems with more unknowns than this use the iterative path.
pub const DENSE_LIMIT: usize = 4096;

const CG_TOL: f64 = 1e-12;
const EIGEN_TOL: f64 = 1e-12;
const MAX_ITER: usize = 10_000;

/// Symmetric matrix in compressed-row form; both triangles are stored.
#[derive(Debug, Clone)]
pub struct SymMatrix {
    n: usize,
    diag: Vec<f64>,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Accumulates diagonal and off-diagonal contributions before compression.
#[derive(Debug, Clone)]
pub struct SymBuilder {
    n: usize,
    diag: Vec<f64>,
    off: Vec<(usize, usize, f64)>,
}

impl SymBuilder {
    pub fn new(n: usize) -> Self {
        SymBuilder { n, diag: vec![0.0; n], off: Vec::new() }
    }

    pub fn add_diag(&mut self, i: usize, v: f64) {
        self.diag[i] += v;
    }

    /// Adds `v` at (i, j) and at (j, i).
    pub fn add_sym(&mut self, i: usize, j: usize, v: f64) {
        debug_assert_ne!(i, j);
        self.off.push((i, j, v));
        self.off.push((j, i, v));
    }

    pub fn build(mut self) -> SymMatrix {
        self.off.sort_by_key(|e| (e.0, e.1));
        let mut offsets = vec![0usize; self.n + 1];
        let mut cols = Vec::with_capacity(self.off.len());
        let mut vals: Vec<f64> = Vec::with_capacity(self.off.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &self.off {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(j);
                vals.push(v);
                offsets[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.n {
            offsets[i + 1] += offsets[i];
        }
        SymMatrix { n: self.n, diag: self.diag, offsets, cols, vals }
    }
}

impl SymMatrix {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn mul_into(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = self.diag[i] * x[i];
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_into(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            m[(i, i)] = self.diag[i];
            for (j, v) in self.row(i) {
                m[(i, j)] += v;
            }
        }
        m
    }

    /// Largest absolute row sum, an upper bound on the spectral radius.
    pub fn gershgorin(&self) -> f64 {
        (0..self.n)
            .map(|i| self.diag[i].abs() + self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn scale(&self) -> f64 {
        self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs())).max(f64::MIN_POSITIVE)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn project_out(v: &mut [f64], u: &[f64]) {
    let c = dot(v, u);
    v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
}

/// Preconditioned conjugate gradients with the Jacobi preconditioner.
///
/// Works for singular positive semidefinite systems as long as `b` lies in
/// the range of the matrix.
pub fn cg(m: &SymMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let n = m.dim();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let pinv: Vec<f64> = m.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&pinv).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for _ in 0..max_iter {
        m.mul_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::SingularSystem("conjugate gradients met a non-positive curvature".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= tol * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * pinv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::ConvergenceFailure(format!("conjugate gradients: no convergence in {max_iter} iterations")))
}

/// Factorized symmetric positive definite operator.
pub enum SpdSolver {
    Dense(Cholesky<f64, Dyn>),
    Iterative(SymMatrix),
}

impl SpdSolver {
    pub fn new(m: &SymMatrix) -> Result<Self> {
        Self::with_limit(m, DENSE_LIMIT)
    }

    pub fn with_limit(m: &SymMatrix, dense_limit: usize) -> Result<Self> {
        if m.dim() <= dense_limit {
            Cholesky::new(m.to_dense())
                .map(SpdSolver::Dense)
                .ok_or_else(|| Error::SingularSystem("matrix is not positive definite".into()))
        } else {
            Ok(SpdSolver::Iterative(m.clone()))
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Dense(ch) => {
                let x = ch.solve(&DVector::from_column_slice(b));
                Ok(x.as_slice().to_vec())
            }
            SpdSolver::Iterative(m) => {
                let n = m.dim();
                cg(m, b, CG_TOL, MAX_ITER.max(10 * n))
            }
        }
    }
}

/// Eigenpair with its residual ‖Mv − θv‖ relative to the largest diagonal entry.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

fn finish(m: &SymMatrix, mut v: Vec<f64>) -> EigenPair {
    normalize(&mut v);
    let mv = m.mul(&v);
    let value = dot(&v, &mv);
    let r: Vec<f64> = mv.iter().zip(&v).map(|(a, b)| a - value * b).collect();
    EigenPair { value, residual: norm(&r) / m.scale(), vector: v }
}

/// Smallest eigenpair of a symmetric matrix, optionally on the orthogonal
/// complement of the unit vector `deflate`.
pub fn smallest_eigenpair(m: &SymMatrix, deflate: Option<&[f64]>) -> Result<EigenPair> {
    smallest_eigenpair_with_limit(m, deflate, DENSE_LIMIT)
}

pub fn smallest_eigenpair_with_limit(
    m: &SymMatrix,
    deflate: Option<&[f64]>,
    dense_limit: usize,
) -> Result<EigenPair> {
    if m.dim() <= dense_limit {
        dense_smallest(m, deflate)
    } else {
        shift_invert_lanczos(m, deflate)
    }
}

fn dense_smallest(m: &SymMatrix, deflate: Option<&[f64]>) -> Result<EigenPair> {
    let n = m.dim();
    let mut a = m.to_dense();
    if let Some(u) = deflate {
        let c = 2.0 * m.gershgorin() + 1.0;
        for i in 0..n {
            for j in 0..n {
                a[(i, j)] += c * u[i] * u[j];
            }
        }
    }
    let eig = SymmetricEigen::new(a.clone());
    let k = (0..n)
        .min_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]))
        .ok_or_else(|| Error::EmptySet("eigenproblem of size 0".into()))?;
    let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    // A few steps of inverse iteration sharpen the eigenvector direction
    // when the eigenvalue is tiny compared with the matrix norm.
    if let Some(ch) = Cholesky::new(a) {
        for _ in 0..3 {
            let x = ch.solve(&DVector::from_column_slice(&v));
            v = x.as_slice().to_vec();
            if let Some(u) = deflate {
                project_out(&mut v, u);
            }
            normalize(&mut v);
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::ConvergenceFailure("inverse iteration overflow".into()));
            }
        }
    }
    let pair = finish(m, v);
    if !(pair.residual <= 1e-8) {
        return Err(Error::ConvergenceFailure(format!("dense eigen residual {:e}", pair.residual)));
    }
    Ok(pair)
}

fn shift_invert_lanczos(m: &SymMatrix, deflate: Option<&[f64]>) -> Result<EigenPair> {
    let n = m.dim();
    let solver: Box<dyn Fn(&[f64]) -> Result<Vec<f64>>> = match deflate {
        Some(_) => Box::new(|b: &[f64]| cg(m, b, CG_TOL, MAX_ITER.max(10 * n))),
        None => {
            let s = SpdSolver::Iterative(m.clone());
            Box::new(move |b: &[f64]| s.solve(b))
        }
    };
    let kmax = n.min(40);
    let mut start = vec![1.0 / (n as f64).sqrt(); n];
    if let Some(u) = deflate {
        project_out(&mut start, u);
        if norm(&start) < 1e-8 {
            start = (0..n).map(|i| ((i + 1) as f64).sin()).collect();
            project_out(&mut start, u);
        }
    }
    normalize(&mut start);
    let mut iterations = 0usize;
    while iterations < MAX_ITER {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut ritz = start.clone();
        for j in 0..kmax {
            iterations += 1;
            let mut w = solver(&basis[j])?;
            if let Some(u) = deflate {
                project_out(&mut w, u);
            }
            let alpha = dot(&w, &basis[j]);
            alphas.push(alpha);
            for _ in 0..2 {
                for v in &basis {
                    let c = dot(&w, v);
                    w.iter_mut().zip(v).for_each(|(a, b)| *a -= c * b);
                }
            }
            let beta = norm(&w);
            let k = alphas.len();
            let mut t = DMatrix::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alphas[i];
                if i + 1 < k {
                    t[(i, i + 1)] = betas[i];
                    t[(i + 1, i)] = betas[i];
                }
            }
            let te = SymmetricEigen::new(t);
            let top = (0..k)
                .max_by(|&a, &b| te.eigenvalues[a].total_cmp(&te.eigenvalues[b]))
                .unwrap();
            let theta = te.eigenvalues[top];
            let s = te.eigenvectors.column(top);
            ritz = vec![0.0; n];
            for (i, v) in basis.iter().enumerate() {
                ritz.iter_mut().zip(v).for_each(|(r, x)| *r += s[i] * x);
            }
            let est = beta * s[k - 1].abs();
            if est <= EIGEN_TOL * theta.abs() || beta <= 1e-300 || k == n {
                let pair = finish(m, ritz.clone());
                if pair.residual <= 1e-8 {
                    return Ok(pair);
                }
                break;
            }
            betas.push(beta);
            basis.push(w.iter().map(|x| x / beta).collect());
        }
        start = ritz;
        normalize(&mut start);
    }
    Err(Error::ConvergenceFailure("shift-invert Lanczos did not converge".into()))
}

/// Full eigendecomposition of a dense symmetric matrix, eigenvalues ascending.
pub fn full_eigen(m: &SymMatrix) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m.to_dense());
    let n = m.dim();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}
