//! Sparse matrices and preconditioned Krylov solvers.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Assemble from triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in entries {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            cols.push(c);
            vals.push(v);
            row_ptr[r + 1] += 1;
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let (c, v) = self.row(r);
            y[r] = c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum();
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map(|k| vals[k]).unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            let (c, v) = self.row(r);
            for (&j, &a) in c.iter().zip(v) {
                m[(r, j)] = a;
            }
        }
        m
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let mut diag = vec![usize::MAX; n];
        for r in 0..n {
            for k in lu.row_ptr[r]..lu.row_ptr[r + 1] {
                if lu.cols[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::LinearSolve {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
        }
        // Position of each column in the current row, for the update step.
        let mut pos = vec![usize::MAX; n];
        for r in 0..n {
            let (start, end) = (lu.row_ptr[r], lu.row_ptr[r + 1]);
            for k in start..end {
                pos[lu.cols[k]] = k;
            }
            for k in start..end {
                let j = lu.cols[k];
                if j >= r {
                    break;
                }
                let pivot = lu.vals[diag[j]];
                let factor = lu.vals[k] / pivot;
                lu.vals[k] = factor;
                for m in (diag[j] + 1)..lu.row_ptr[j + 1] {
                    let p = pos[lu.cols[m]];
                    if p != usize::MAX {
                        lu.vals[p] -= factor * lu.vals[m];
                    }
                }
            }
            for k in start..end {
                pos[lu.cols[k]] = usize::MAX;
            }
            if lu.vals[diag[r]] == 0.0 || !lu.vals[diag[r]].is_finite() {
                return Err(Error::LinearSolve {
                    iterations: 0,
                    residual: f64::NAN,
                });
            }
        }
        Ok(Self { lu, diag })
    }

    pub fn apply(&self, b: &[f64], x: &mut [f64]) {
        let n = self.lu.n;
        for r in 0..n {
            let mut s = b[r];
            for k in self.lu.row_ptr[r]..self.diag[r] {
                s -= self.lu.vals[k] * x[self.lu.cols[k]];
            }
            x[r] = s;
        }
        for r in (0..n).rev() {
            let mut s = x[r];
            for k in (self.diag[r] + 1)..self.lu.row_ptr[r + 1] {
                s -= self.lu.vals[k] * x[self.lu.cols[k]];
            }
            x[r] = s / self.lu.vals[self.diag[r]];
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Preconditioned conjugate gradients for symmetric positive definite `a`.
/// `x` holds the initial guess. Stops at relative residual `tol`.
pub fn pcg(a: &Csr, pre: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res,
            });
        }
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let res = norm(&r) / bnorm;
    if res <= tol {
        Ok(SolveStats {
            iterations: max_iter,
            residual: res,
        })
    } else {
        Err(Error::LinearSolve {
            iterations: max_iter,
            residual: res,
        })
    }
}

/// Right-preconditioned BiCGSTAB for general nonsingular `a`.
pub fn bicgstab(a: &Csr, pre: &Ilu0, b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<SolveStats> {
    let n = a.n;
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let residual = |x: &[f64], r: &mut Vec<f64>, tmp: &mut Vec<f64>| {
        a.mul_vec(x, tmp);
        for i in 0..n {
            r[i] = b[i] - tmp[i];
        }
    };
    residual(x, &mut r, &mut tmp);
    let mut best = norm(&r) / bnorm;
    let mut it_total = 0;
    // Restart on breakdown with a fresh shadow residual.
    for _restart in 0..20 {
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut v = vec![0.0; n];
        let mut p = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut t = vec![0.0; n];
        loop {
            let res = norm(&r) / bnorm;
            best = best.min(res);
            if res <= tol {
                return Ok(SolveStats {
                    iterations: it_total,
                    residual: res,
                });
            }
            if it_total >= max_iter {
                return Err(Error::LinearSolve {
                    iterations: it_total,
                    residual: best,
                });
            }
            it_total += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new.abs() < 1e-300 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            pre.apply(&p, &mut y);
            a.mul_vec(&y, &mut v);
            let denom = dot(&r_hat, &v);
            if denom.abs() < 1e-300 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * v[i];
            }
            if norm(&s) / bnorm <= tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                residual(x, &mut r, &mut tmp);
                continue;
            }
            pre.apply(&s, &mut z);
            a.mul_vec(&z, &mut t);
            let tt = dot(&t, &t);
            if tt < 1e-300 {
                break;
            }
            omega = dot(&t, &s) / tt;
            for i in 0..n {
                x[i] += alpha * y[i] + omega * z[i];
                r[i] = s[i] - omega * t[i];
            }
            if omega.abs() < 1e-300 {
                break;
            }
        }
        residual(x, &mut r, &mut tmp);
    }
    Err(Error::LinearSolve {
        iterations: it_total,
        residual: best,
    })
}
