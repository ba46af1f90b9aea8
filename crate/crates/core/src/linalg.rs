//! Small symmetric matrices (d ≤ 3) and Loewner-order helpers.
//!
//! Hot loops evaluate a Hessian at every quadrature node, so [`SymMat`] is a
//! fixed-capacity stack value. Larger problems (the dictionary Gram matrices
//! of the U-ratio estimator) go through `nalgebra`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    dim: usize,
    a: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim), "dimension {dim} out of range");
        Self { dim, a: [[0.0; MAX_DIM]; MAX_DIM] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_diag(&vec![1.0; dim])
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m.a[i][i] = v;
        }
        m
    }

    pub fn scalar(v: f64) -> Self {
        Self::from_diag(&[v])
    }

    /// Builds from row-major rows, rejecting non-square or asymmetric input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidArgument(format!("matrix dimension {dim} not in 1..=3")));
        }
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::InvalidArgument("matrix entry is not finite".into()));
                }
                m.a[i][j] = v;
            }
        }
        for i in 0..dim {
            for j in 0..i {
                let (x, y) = (m.a[i][j], m.a[j][i]);
                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                    return Err(Error::InvalidArgument(format!("matrix is not symmetric at ({i}, {j}): {x} vs {y}")));
                }
                let s = 0.5 * (x + y);
                m.a[i][j] = s;
                m.a[j][i] = s;
            }
        }
        Ok(m)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.a[i][i]).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.a[i][i]).sum()
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        debug_assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] -= other.a[i][j];
            }
        }
        m
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        debug_assert_eq!(self.dim, other.dim);
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.a[i][j] += other.a[i][j];
            }
        }
        m
    }

    pub fn scale(&self, s: f64) -> SymMat {
        let mut m = *self;
        for row in m.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += self.a[i][j] * self.a[i][j];
            }
        }
        s.sqrt()
    }

    pub fn mul_vec(&self, x: &[f64]) -> [f64; MAX_DIM] {
        let mut y = [0.0; MAX_DIM];
        for i in 0..self.dim {
            for j in 0..self.dim {
                y[i] += self.a[i][j] * x[j];
            }
        }
        y
    }

    /// xᵀ A y
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        (0..self.dim).map(|i| x[i] * ay[i]).sum()
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    /// Lower Cholesky factor, or `None` when the matrix is not positive definite.
    pub fn cholesky(&self) -> Option<Cholesky> {
        let n = self.dim;
        let mut l = [[0.0; MAX_DIM]; MAX_DIM];
        for j in 0..n {
            let mut d = self.a[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if !(d > 0.0) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j][j] = djj;
            for i in (j + 1)..n {
                let mut s = self.a[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / djj;
            }
        }
        Some(Cholesky { dim: n, l })
    }

    /// Eigenvalues in ascending order (cyclic Jacobi).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let mut a = self.a;
        for _sweep in 0..64 {
            let mut off = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    off += a[p][q] * a[p][q];
                }
            }
            if off <= f64::MIN_POSITIVE {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    if a[p][q] == 0.0 {
                        continue;
                    }
                    let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k][p];
                        let akq = a[k][q];
                        a[k][p] = c * akp - s * akq;
                        a[k][q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p][k];
                        let aqk = a[q][k];
                        a[p][k] = c * apk - s * aqk;
                        a[q][k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
        ev.sort_by(|x, y| x.total_cmp(y));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn inverse(&self) -> Result<SymMat> {
        let chol = self.cholesky().ok_or(Error::NotSpd { min_eigenvalue: self.min_eigenvalue() })?;
        let mut inv = SymMat::zeros(self.dim);
        for j in 0..self.dim {
            let mut e = [0.0; MAX_DIM];
            e[j] = 1.0;
            let col = chol.solve(&e[..self.dim]);
            for i in 0..self.dim {
                inv.a[i][j] = col[i];
            }
        }
        // symmetrize rounding
        for i in 0..self.dim {
            for j in 0..i {
                let s = 0.5 * (inv.a[i][j] + inv.a[j][i]);
                inv.a[i][j] = s;
                inv.a[j][i] = s;
            }
        }
        Ok(inv)
    }

    pub fn log_det_spd(&self) -> Result<f64> {
        let chol = self.cholesky().ok_or(Error::NotSpd { min_eigenvalue: self.min_eigenvalue() })?;
        Ok(2.0 * (0..self.dim).map(|i| chol.l[i][i].ln()).sum::<f64>())
    }
}

/// Checks that a matrix is symmetric positive definite by factorization.
pub fn require_spd(m: &SymMat) -> Result<Cholesky> {
    m.cholesky().ok_or(Error::NotSpd { min_eigenvalue: m.min_eigenvalue() })
}

/// λ_min(a − b): non-negative iff a ⪰ b in the Loewner order.
pub fn loewner_margin(a: &SymMat, b: &SymMat) -> f64 {
    a.sub(b).min_eigenvalue()
}

#[derive(Clone, Copy, Debug)]
pub struct Cholesky {
    dim: usize,
    l: [[f64; MAX_DIM]; MAX_DIM],
}

impl Cholesky {
    /// Solves A x = b.
    pub fn solve(&self, b: &[f64]) -> [f64; MAX_DIM] {
        let n = self.dim;
        let mut y = [0.0; MAX_DIM];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s -= self.l[i][k] * y[k];
            }
            y[i] = s / self.l[i][i];
        }
        let mut x = [0.0; MAX_DIM];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s -= self.l[k][i] * x[k];
            }
            x[i] = s / self.l[i][i];
        }
        x
    }

    /// bᵀ A⁻¹ b
    pub fn inv_quad_form(&self, b: &[f64]) -> f64 {
        let x = self.solve(b);
        (0..self.dim).map(|i| b[i] * x[i]).sum()
    }
}

/// Largest eigenpair of the symmetric-definite pencil (a, b): a c = λ b c.
///
/// `b` is regularized by `tau · I` before factorization. The returned vector is
/// scaled so that cᵀ b c = 1.
pub fn max_generalized_eigen(a: &DMatrix<f64>, b: &DMatrix<f64>, tau: f64) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    if a.ncols() != n || b.nrows() != n || b.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: b.nrows() });
    }
    let breg = b + DMatrix::identity(n, n) * tau;
    let chol = breg
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidArgument("Gram matrix is numerically singular after regularization".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::InvalidArgument("singular Cholesky factor".into()))?;
    let mut c = &linv * a * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    let (imax, &lmax) = eig.eigenvalues.iter().enumerate().max_by(|x, y| x.1.total_cmp(y.1)).expect("non-empty");
    let y = eig.eigenvectors.column(imax).into_owned();
    let coeffs = linv.transpose() * y;
    Ok((lmax, coeffs))
}
