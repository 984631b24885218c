//! Small dense linear algebra: symmetric eigenproblems (cyclic Jacobi),
//! the symmetric-definite generalized problem, and least squares via
//! Householder QR. Matrices here are at most a few hundred rows, so the
//! O(n^3) methods are the right tool.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::math;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum()).collect()
    }

    /// Largest `|A - A^T|` entry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues (ascending) and matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Diagonalizes a real symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigen(a: &Matrix) -> Result<SymmetricEigen> {
    if !a.is_square() {
        return Err(Error::Mismatch(format!("eigenproblem on {}x{} matrix", a.rows, a.cols)));
    }
    let n = a.rows;
    let mut m = a.clone();
    // Work on the symmetric part; callers pass symmetric input.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);
    let scale = m.max_abs().max(f64::MIN_POSITIVE);
    let mut converged = n <= 1;
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        if math::sqrt(off) <= 1e-15 * scale {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + math::sqrt(1.0 + tau * tau));
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / math::sqrt(1.0 + t * t);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::Mismatch("Jacobi sweeps did not converge".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(SymmetricEigen { values, vectors })
}

/// Lowest eigenpair of `H c = E S c` for symmetric `H` and positive
/// semi-definite `S`. Directions with overlap eigenvalue below
/// `drop_tol * max` are projected out (canonical orthogonalization), so
/// nearly linearly dependent basis functions do not destabilize the result.
pub fn lowest_generalized(h: &Matrix, s: &Matrix, drop_tol: f64) -> Result<(f64, Vec<f64>)> {
    let n = h.rows;
    if !h.is_square() || !s.is_square() || s.rows != n {
        return Err(Error::Mismatch("generalized eigenproblem dimensions".into()));
    }
    let se = symmetric_eigen(s)?;
    let smax = se.values.last().copied().unwrap_or(0.0);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(Error::NotNormalizable { norm: smax });
    }
    let kept: Vec<usize> = (0..n).filter(|&k| se.values[k] > drop_tol * smax).collect();
    let x = Matrix::from_fn(n, kept.len(), |i, k| se.vectors[(i, kept[k])] / math::sqrt(se.values[kept[k]]));
    let hp = x.transpose().matmul(h).matmul(&x);
    let he = symmetric_eigen(&hp)?;
    let y = he.vectors.column(0);
    let c = x.matvec(&y);
    Ok((he.values[0], c))
}

/// Least-squares solution with fit diagnostics.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub coefficients: Vec<f64>,
    /// Root-mean-square residual over the samples.
    pub rms: f64,
    /// 2-norm condition number of the (column-scaled) design matrix.
    pub condition: f64,
}

/// Solves `min |A x - b|` by Householder QR. Columns are scaled to unit norm
/// first so the reported condition number reflects genuine collinearity
/// rather than units.
pub fn least_squares(a: &Matrix, b: &[f64]) -> Result<LeastSquares> {
    let (m, n) = (a.rows, a.cols);
    if b.len() != m {
        return Err(Error::Mismatch(format!("{} rows but {} right-hand sides", m, b.len())));
    }
    if m < n || n == 0 {
        return Err(Error::RankDeficient(format!("{m} samples for {n} unknowns")));
    }
    let mut scale = vec![0.0; n];
    for (j, sc) in scale.iter_mut().enumerate() {
        let norm = math::sqrt((0..m).map(|i| a[(i, j)] * a[(i, j)]).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::RankDeficient(format!("column {j} is identically zero")));
        }
        *sc = norm;
    }
    let mut r = Matrix::from_fn(m, n, |i, j| a[(i, j)] / scale[j]);
    let mut rhs = b.to_vec();
    for k in 0..n {
        let norm = math::sqrt((k..m).map(|i| r[(i, k)] * r[(i, k)]).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::RankDeficient(format!("column {k} is dependent")));
        }
        let alpha = if r[(k, k)] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for j in k..n {
                let dot: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum();
                let f = 2.0 * dot / vnorm2;
                for i in k..m {
                    r[(i, j)] -= f * v[i - k];
                }
            }
            let dot: f64 = (k..m).map(|i| v[i - k] * rhs[i]).sum();
            let f = 2.0 * dot / vnorm2;
            for i in k..m {
                rhs[i] -= f * v[i - k];
            }
        }
    }
    // Singular values of R from the eigenvalues of R^T R (n is small).
    let rt = Matrix::from_fn(n, n, |i, j| if i <= j { r[(i, j)] } else { 0.0 });
    let gram = rt.transpose().matmul(&rt);
    let ev = symmetric_eigen(&gram)?;
    let smin = math::sqrt(ev.values[0].max(0.0));
    let smax = math::sqrt(ev.values[n - 1].max(0.0));
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::RankDeficient(format!("condition number {condition:e}")));
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = rhs[k];
        for j in (k + 1)..n {
            acc -= r[(k, j)] * x[j];
        }
        x[k] = acc / r[(k, k)];
    }
    for (xj, sc) in x.iter_mut().zip(&scale) {
        *xj /= sc;
    }
    let resid: f64 = (0..m)
        .map(|i| {
            let fit: f64 = (0..n).map(|j| a[(i, j)] * x[j]).sum();
            (fit - b[i]) * (fit - b[i])
        })
        .sum();
    Ok(LeastSquares { coefficients: x, rms: math::sqrt(resid / m as f64), condition })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_reconstructs_matrix() {
        let a = Matrix::from_fn(6, 6, |i, j| 1.0 / (1.0 + i as f64 + j as f64) + if i == j { i as f64 } else { 0.0 });
        let e = symmetric_eigen(&a).unwrap();
        for w in e.values.windows(2) {
            assert!(w[0] <= w[1]);
        }
        let d = Matrix::from_fn(6, 6, |i, j| if i == j { e.values[i] } else { 0.0 });
        let back = e.vectors.matmul(&d).matmul(&e.vectors.transpose());
        for i in 0..6 {
            for j in 0..6 {
                assert!((back[(i, j)] - a[(i, j)]).abs() < 1e-13);
            }
        }
        let orth = e.vectors.transpose().matmul(&e.vectors);
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((orth[(i, j)] - target).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn generalized_problem_matches_transformed_standard_problem() {
        let s = Matrix::from_fn(3, 3, |i, j| if i == j { 2.0 } else { 0.5 });
        let h = Matrix::from_fn(3, 3, |i, j| -1.0 / (1.0 + (i + j) as f64));
        let (e, c) = lowest_generalized(&h, &s, 1e-12).unwrap();
        let hc = h.matvec(&c);
        let sc = s.matvec(&c);
        for k in 0..3 {
            assert!((hc[k] - e * sc[k]).abs() < 1e-12);
        }
        let norm: f64 = c.iter().zip(&sc).map(|(a, b)| a * b).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generalized_problem_survives_dependent_basis() {
        // Third function duplicates the first.
        let s = Matrix::from_fn(3, 3, |i, j| {
            let (i, j) = (i % 2, j % 2);
            if i == j {
                1.0
            } else {
                0.3
            }
        });
        let h = Matrix::from_fn(3, 3, |i, j| {
            let (i, j) = (i % 2, j % 2);
            if i == j {
                -1.0
            } else {
                -0.4
            }
        });
        let (e, _) = lowest_generalized(&h, &s, 1e-10).unwrap();
        // 2x2 reference: eigenvalues of [[-1,-0.4],[-0.4,-1]] w.r.t. [[1,.3],[.3,1]]
        assert!((e - (-1.4 / 1.3)).abs() < 1e-12);
    }

    #[test]
    fn least_squares_recovers_exact_polynomial() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let a = Matrix::from_fn(20, 3, |i, j| math::powi(xs[i], j as i32));
        let b: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x + 0.25 * x * x).collect();
        let fit = least_squares(&a, &b).unwrap();
        assert!((fit.coefficients[0] - 1.5).abs() < 1e-13);
        assert!((fit.coefficients[1] + 2.0).abs() < 1e-13);
        assert!((fit.coefficients[2] - 0.25).abs() < 1e-13);
        assert!(fit.rms < 1e-14);
    }

    #[test]
    fn least_squares_rejects_rank_deficiency() {
        let a = Matrix::from_fn(5, 2, |i, _| i as f64 + 1.0);
        assert!(matches!(least_squares(&a, &[1.0; 5]), Err(Error::RankDeficient(_))));
        let a = Matrix::from_fn(1, 2, |_, j| j as f64 + 1.0);
        assert!(matches!(least_squares(&a, &[1.0]), Err(Error::RankDeficient(_))));
    }
}
