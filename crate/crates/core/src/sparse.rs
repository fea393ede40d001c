//! Compressed sparse row matrices with an ILU(0)-preconditioned BiCGSTAB
//! solver, sized for the Jacobians of grid operators.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum LinearError {
    #[error("matrix row {0} has no diagonal entry")]
    MissingDiagonal(usize),
    #[error("zero pivot in incomplete factorization at row {0}")]
    ZeroPivot(usize),
    #[error("BiCGSTAB breakdown after {iterations} iterations ({reason})")]
    Breakdown { iterations: usize, reason: &'static str },
    #[error("BiCGSTAB reached {iterations} iterations with relative residual {residual:.3e}")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix has {expected} rows, vector has {actual}")]
    Dimension { expected: usize, actual: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from per-row `(column, value)` lists; entries sharing a
    /// column are summed and columns are sorted.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < n, "column {c} out of range for {n} rows");
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { n, row_ptr, cols, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[range.clone()], &self.values[range])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map_or(0.0, |k| vals[k])
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, v)| v * x[c]).sum();
        });
    }
}

/// Incomplete LU factorization with the sparsity pattern of the matrix.
#[derive(Debug, Clone)]
pub struct Ilu0 {
    factors: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &CsrMatrix) -> Result<Self, LinearError> {
        let mut lu = a.clone();
        let n = lu.n;
        let mut diag = Vec::with_capacity(n);
        for i in 0..n {
            let (cols, _) = lu.row(i);
            let k = cols.binary_search(&i).map_err(|_| LinearError::MissingDiagonal(i))?;
            diag.push(lu.row_ptr[i] + k);
        }
        let mut position = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in start..end {
                position[lu.cols[p]] = p;
            }
            for p in start..diag[i] {
                let k = lu.cols[p];
                let pivot = lu.values[diag[k]];
                if pivot == 0.0 {
                    return Err(LinearError::ZeroPivot(k));
                }
                let factor = lu.values[p] / pivot;
                lu.values[p] = factor;
                for q in (diag[k] + 1)..lu.row_ptr[k + 1] {
                    let target = position[lu.cols[q]];
                    if target != usize::MAX {
                        lu.values[target] -= factor * lu.values[q];
                    }
                }
            }
            if lu.values[diag[i]] == 0.0 {
                return Err(LinearError::ZeroPivot(i));
            }
            for p in start..end {
                position[lu.cols[p]] = usize::MAX;
            }
        }
        Ok(Self { factors: lu, diag })
    }

    /// `z = (LU)^{-1} r`.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.factors;
        for i in 0..lu.n {
            let mut s = r[i];
            for p in lu.row_ptr[i]..self.diag[i] {
                s -= lu.values[p] * z[lu.cols[p]];
            }
            z[i] = s;
        }
        for i in (0..lu.n).rev() {
            let mut s = z[i];
            for p in (self.diag[i] + 1)..lu.row_ptr[i + 1] {
                s -= lu.values[p] * z[lu.cols[p]];
            }
            z[i] = s / lu.values[self.diag[i]];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearReport {
    pub iterations: usize,
    /// `|b - Ax| / |b|`, recomputed from the returned solution.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `Ax = b` by right-preconditioned BiCGSTAB from `x = 0`.
pub fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, LinearReport), LinearError> {
    let n = a.dim();
    if b.len() != n {
        return Err(LinearError::Dimension { expected: n, actual: b.len() });
    }
    let mut x = vec![0.0; n];
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok((x, LinearReport { iterations: 0, relative_residual: 0.0 }));
    }
    let precond = Ilu0::new(a)?;
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p_hat = vec![0.0; n];
    let mut s_hat = vec![0.0; n];
    let mut t = vec![0.0; n];
    let target = rel_tol * b_norm;
    let mut iterations = 0;
    let finish = |x: Vec<f64>, iterations: usize| {
        let mut ax = vec![0.0; n];
        a.mul_vec(&x, &mut ax);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let relative_residual = norm(&res) / b_norm;
        (x, LinearReport { iterations, relative_residual })
    };
    while iterations < max_iter {
        iterations += 1;
        let mut rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 {
            // The shadow residual became orthogonal to the residual (as
            // happens once identity rows are satisfied exactly); restart.
            r_hat.copy_from_slice(&r);
            rho_new = dot(&r_hat, &r);
            (rho, alpha, omega) = (1.0, 1.0, 1.0);
            p.iter_mut().chain(v.iter_mut()).for_each(|c| *c = 0.0);
        }
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(LinearError::Breakdown { iterations, reason: "rho vanished" });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.apply(&p, &mut p_hat);
        a.mul_vec(&p_hat, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            return Err(LinearError::Breakdown { iterations, reason: "r_hat orthogonal to Ap" });
        }
        alpha = rho_new / denom;
        let mut s = r;
        for i in 0..n {
            s[i] -= alpha * v[i];
        }
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            return Ok(finish(x, iterations));
        }
        precond.apply(&s, &mut s_hat);
        a.mul_vec(&s_hat, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            return Err(LinearError::Breakdown { iterations, reason: "t vanished" });
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            s[i] -= omega * t[i];
        }
        r = s;
        if norm(&r) <= target {
            return Ok(finish(x, iterations));
        }
        if omega == 0.0 {
            return Err(LinearError::Breakdown { iterations, reason: "omega vanished" });
        }
        rho = rho_new;
    }
    let (_, report) = finish(x, iterations);
    Err(LinearError::NoConvergence { iterations, residual: report.relative_residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        CsrMatrix::from_rows(
            (0..n)
                .map(|i| {
                    let mut row = vec![(i, 2.0)];
                    if i > 0 {
                        row.push((i - 1, -1.0));
                    }
                    if i + 1 < n {
                        row.push((i + 1, -1.0));
                    }
                    row
                })
                .collect(),
        )
    }

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = CsrMatrix::from_rows(vec![vec![(1, 1.0), (0, 2.0), (1, 3.0)], vec![(1, 5.0)]]);
        assert_eq!(a.row(0), (&[0usize, 1][..], &[2.0, 4.0][..]));
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(1, 0), 0.0);
    }

    #[test]
    fn ilu_is_exact_for_tridiagonal() {
        let a = laplacian_1d(10);
        let ilu = Ilu0::new(&a).unwrap();
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let mut b = vec![0.0; 10];
        a.mul_vec(&x, &mut b);
        let mut z = vec![0.0; 10];
        ilu.apply(&b, &mut z);
        for (zi, xi) in z.iter().zip(&x) {
            assert!((zi - xi).abs() < 1e-12);
        }
    }

    #[test]
    fn bicgstab_solves_nonsymmetric_system() {
        let n = 200;
        let rows = (0..n)
            .map(|i| {
                let mut row = vec![(i, 4.0)];
                if i > 0 {
                    row.push((i - 1, -1.5));
                }
                if i + 1 < n {
                    row.push((i + 1, -0.5));
                }
                if i + 7 < n {
                    row.push((i + 7, 0.3));
                }
                row
            })
            .collect();
        let a = CsrMatrix::from_rows(rows);
        let b: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.1).cos()).collect();
        let (x, report) = bicgstab(&a, &b, 1e-12, 500).unwrap();
        assert!(report.relative_residual <= 1e-12);
        let mut ax = vec![0.0; n];
        a.mul_vec(&x, &mut ax);
        assert!(ax.iter().zip(&b).all(|(p, q)| (p - q).abs() < 1e-10));
    }

    #[test]
    fn zero_rhs_and_errors() {
        let a = laplacian_1d(5);
        let (x, report) = bicgstab(&a, &[0.0; 5], 1e-12, 10).unwrap();
        assert_eq!(x, vec![0.0; 5]);
        assert_eq!(report.iterations, 0);
        assert!(matches!(bicgstab(&a, &[1.0; 4], 1e-12, 10), Err(LinearError::Dimension { .. })));
        let singular = CsrMatrix::from_rows(vec![vec![(1, 1.0)], vec![(1, 1.0)]]);
        assert_eq!(Ilu0::new(&singular).unwrap_err(), LinearError::MissingDiagonal(0));
    }
}
