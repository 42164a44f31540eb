//! Sparse symmetric systems: CSR storage, (cyclic) tridiagonal elimination for
//! 1D meshes and Jacobi-preconditioned conjugate gradients otherwise.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from `(row, col, value)` triplets, summing duplicates.
    pub fn from_triplets(n: usize, mut t: Vec<(usize, usize, f64)>) -> Self {
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(t.len());
        let mut vals: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let mut s = 0.0;
            for (j, v) in self.row(i) {
                s += v * x[j];
            }
            y[i] = s;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).find(|&(j, _)| j == i).map_or(0.0, |(_, v)| v)).collect()
    }

    /// Replaces row and column `k` by the identity (Dirichlet-style pinning).
    pub fn pin(&mut self, k: usize) {
        self.pin_all(&[k]);
    }

    pub fn pin_all(&mut self, nodes: &[usize]) {
        if nodes.is_empty() {
            return;
        }
        let mut mask = vec![false; self.n];
        for &k in nodes {
            mask[k] = true;
        }
        for i in 0..self.n {
            for idx in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[idx];
                if mask[i] || mask[j] {
                    self.vals[idx] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    /// Scales the whole matrix and adds `d[i]` on the diagonal.
    pub fn scaled_plus_diagonal(&self, s: f64, d: &[f64]) -> CsrMatrix {
        let mut m = self.clone();
        for i in 0..self.n {
            for idx in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.vals[idx] *= s;
                if m.cols[idx] == i {
                    m.vals[idx] += d[i];
                }
            }
        }
        m
    }

    /// Splits a matrix with ring connectivity (`j ∈ {i−1, i, i+1} mod n`)
    /// into lower/diagonal/upper bands; `None` if another entry exists.
    fn bands(&self) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let (mut lo, mut di, mut up) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        for i in 0..n {
            for (j, v) in self.row(i) {
                if j == i {
                    di[i] += v;
                } else if j == (i + 1) % n {
                    up[i] += v;
                } else if j == (i + n - 1) % n {
                    lo[i] += v;
                } else if v != 0.0 {
                    return None;
                }
            }
        }
        Some((lo, di, up))
    }
}

/// Thomas elimination; `lo[0]` and `up[n−1]` are ignored.
pub fn solve_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = di.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut beta = di[0];
    if beta == 0.0 {
        return Err(Error::Linear("zero pivot at row 0".to_string()));
    }
    c[0] = up[0] / beta;
    d[0] = rhs[0] / beta;
    for i in 1..n {
        beta = di[i] - lo[i] * c[i - 1];
        if beta == 0.0 || !beta.is_finite() {
            return Err(Error::Linear(format!("zero pivot at row {i}")));
        }
        c[i] = if i + 1 < n { up[i] / beta } else { 0.0 };
        d[i] = (rhs[i] - lo[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Cyclic tridiagonal system with corner entries `lo[0]` (row 0, col n−1) and
/// `up[n−1]` (row n−1, col 0), via Sherman–Morrison.
pub fn solve_cyclic_tridiagonal(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = di.len();
    let alpha = up[n - 1];
    let beta = lo[0];
    if alpha == 0.0 && beta == 0.0 {
        return solve_tridiagonal(lo, di, up, rhs);
    }
    let gamma = -di[0];
    let mut bb = di.to_vec();
    bb[0] -= gamma;
    bb[n - 1] -= alpha * beta / gamma;
    let x = solve_tridiagonal(lo, &bb, up, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = solve_tridiagonal(lo, &bb, up, &u)?;
    let fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for CgOptions {
    fn default() -> Self {
        CgOptions { rel_tol: 1e-13, max_iter: 20_000 }
    }
}

const STAGNATION_TOL: f64 = 1e-9;

/// Jacobi-preconditioned conjugate gradients for an SPD matrix.
pub fn pcg(a: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<Vec<f64>> {
    let n = a.n();
    let diag = a.diagonal();
    if diag.iter().any(|d| *d <= 0.0) {
        return Err(Error::Linear("non-positive diagonal in SPD solve".into()));
    }
    let bnorm = math::sqrt(dot(b, b));
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    for _ in 0..opts.max_iter {
        a.mul_vec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::Linear("matrix is not positive definite".into()));
        }
        let step = rz / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        if math::sqrt(dot(&r, &r)) <= opts.rel_tol * bnorm {
            return Ok(x);
        }
        if !x[0].is_finite() {
            break;
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // accept a stagnated but accurate iterate; round-off can stall the last digits
    let rel = math::sqrt(dot(&r, &r)) / bnorm;
    if rel <= STAGNATION_TOL {
        return Ok(x);
    }
    Err(Error::Linear(format!(
        "conjugate gradients did not converge in {} iterations (relative residual {rel:e})",
        opts.max_iter
    )))
}

/// Solves an SPD system, using banded elimination when the sparsity is a ring.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], opts: CgOptions) -> Result<Vec<f64>> {
    if a.n() >= 3 {
        if let Some((lo, di, up)) = a.bands() {
            return solve_cyclic_tridiagonal(&lo, &di, &up, b);
        }
    }
    pcg(a, b, opts)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
