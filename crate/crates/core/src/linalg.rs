//! Small dense helpers: Cholesky factorization for the SPD systems that
//! appear in the closed-form block updates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor `L` with `M = L L^T`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    lower: Array2<f64>,
}

impl Cholesky {
    pub fn factor(m: ArrayView2<f64>) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch("Cholesky needs a square matrix".into()));
        }
        let mut l = Array2::<f64>::zeros((n, n));
        for j in 0..n {
            let mut diag = m[[j, j]];
            for p in 0..j {
                diag -= l[[j, p]] * l[[j, p]];
            }
            if !(diag > 0.0) || !diag.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: diag });
            }
            let d = diag.sqrt();
            l[[j, j]] = d;
            for i in (j + 1)..n {
                let mut v = m[[i, j]];
                for p in 0..j {
                    v -= l[[i, p]] * l[[j, p]];
                }
                l[[i, j]] = v / d;
            }
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn solve(&self, rhs: ArrayView1<f64>) -> Array1<f64> {
        let n = self.dim();
        let l = &self.lower;
        let mut y = rhs.to_owned();
        for i in 0..n {
            let mut v = y[i];
            for p in 0..i {
                v -= l[[i, p]] * y[p];
            }
            y[i] = v / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = y[i];
            for p in (i + 1)..n {
                v -= l[[p, i]] * y[p];
            }
            y[i] = v / l[[i, i]];
        }
        y
    }

    /// Solves `M X = R` column by column.
    pub fn solve_columns(&self, rhs: ArrayView2<f64>) -> Array2<f64> {
        let mut out = Array2::zeros(rhs.raw_dim());
        for (j, col) in rhs.columns().into_iter().enumerate() {
            out.column_mut(j).assign(&self.solve(col));
        }
        out
    }
}

pub fn norm2(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn norm1(v: ArrayView1<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

/// Frobenius inner product.
pub fn frob_dot(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn solves_small_spd_system() {
        let m = array![[4.0, 2.0, 0.4], [2.0, 5.0, 1.0], [0.4, 1.0, 3.0]];
        let r = array![1.0, -2.0, 0.5];
        let x = Cholesky::factor(m.view()).unwrap().solve(r.view());
        let resid = &m.dot(&x) - &r;
        assert!(norm2(resid.view()) < 1e-14);
    }

    #[test]
    fn rejects_indefinite() {
        let m = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(matches!(
            Cholesky::factor(m.view()),
            Err(Error::NotPositiveDefinite { pivot: 1, .. })
        ));
    }
}
