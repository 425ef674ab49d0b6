use crate::error::{Error, Result};

use super::Matrix;

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Matrix,
}

impl Cholesky {
    pub fn new(a: &Matrix) -> Result<Self> {
        let n = a.rows();
        if a.cols() != n {
            return Err(Error::dim("cholesky", a.shape(), a.shape()));
        }
        let scale = a.max_abs().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (a.get(i, j) - a.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParam(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut diag = a.get(j, j);
            for k in 0..j {
                diag -= l.get(j, k) * l.get(j, k);
            }
            if !(diag > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
            }
            let ljj = diag.sqrt();
            l.set(j, j, ljj);
            for i in j + 1..n {
                let mut v = a.get(i, j);
                for k in 0..j {
                    v -= l.get(i, k) * l.get(j, k);
                }
                l.set(i, j, v / ljj);
            }
        }
        Ok(Self { lower: l })
    }

    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        (0..self.lower.rows())
            .map(|i| self.lower.get(i, i).ln())
            .sum::<f64>()
            * 2.0
    }

    /// Solves `A x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lower.rows();
        let l = &self.lower;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= l.get(i, k) * y[k];
            }
            y[i] = v / l.get(i, i);
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for k in i + 1..n {
                v -= l.get(k, i) * y[k];
            }
            y[i] = v / l.get(i, i);
        }
        y
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Matrix) -> Result<Matrix> {
        if b.rows() != self.lower.rows() {
            return Err(Error::dim("cholesky solve", self.lower.shape(), b.shape()));
        }
        let mut out = Matrix::zeros(b.rows(), b.cols());
        for c in 0..b.cols() {
            let x = self.solve_vec(&b.column(c));
            for (r, v) in x.into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.lower.rows();
        let mut inv = self
            .solve(&Matrix::identity(n))
            .expect("identity has matching rows");
        // Symmetrize away round-off.
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (inv.get(i, j) + inv.get(j, i));
                inv.set(i, j, v);
                inv.set(j, i, v);
            }
        }
        inv
    }
}

/// `aᵀ M b` for vectors `a`, `b`.
pub fn bilinear(a: &[f64], m: &Matrix, b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.rows() {
        let row = m.row(i);
        let mut inner = 0.0;
        for (mij, bj) in row.iter().zip(b) {
            inner += mij * bj;
        }
        acc += a[i] * inner;
    }
    acc
}
