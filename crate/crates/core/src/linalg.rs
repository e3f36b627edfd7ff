//! Small dense linear algebra on row-major slices.
//!
//! Every matrix handled by the engine is at most a few rows wide (chart
//! dimensions), so these routines favour clarity over blocking.

use crate::Scalar;

/// Row-major square or rectangular matrix.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        Self::from_fn(self.rows, rhs.cols, |i, j| {
            (0..self.cols).map(|k| self[(i, k)] * rhs[(k, j)]).sum()
        })
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * s).collect(),
        }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| a - b)
                .collect(),
        }
    }

    /// Frobenius inner product.
    pub fn frobenius_dot(&self, rhs: &Self) -> T {
        self.data.iter().zip(&rhs.data).map(|(&a, &b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> T {
        self.frobenius_dot(self).sqrt()
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Lower Cholesky factor `L` with `self = L Lᵀ`, or `None` when the
    /// matrix is not symmetric positive definite.
    pub fn cholesky(&self) -> Option<Self> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut l = Self::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Some(l)
    }

    /// Inverse of a lower-triangular matrix.
    pub fn lower_triangular_inverse(&self) -> Self {
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for j in 0..n {
            inv[(j, j)] = T::one() / self[(j, j)];
            for i in (j + 1)..n {
                let mut s = T::zero();
                for k in j..i {
                    s += self[(i, k)] * inv[(k, j)];
                }
                inv[(i, j)] = -s / self[(i, i)];
            }
        }
        inv
    }

    /// Inverse of an SPD matrix through its Cholesky factor; the result is
    /// symmetrized so that `inv[(i,j)] == inv[(j,i)]` bit for bit.
    pub fn spd_inverse(&self) -> Option<Self> {
        let l = self.cholesky()?;
        let linv = l.lower_triangular_inverse();
        let n = self.rows;
        let mut inv = Self::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v: T = (j..n).map(|k| linv[(k, i)] * linv[(k, j)]).sum();
                inv[(i, j)] = v;
                inv[(j, i)] = v;
            }
        }
        Some(inv)
    }

    /// Solves `self · x = b` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Option<Vec<T>> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.to_vec();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())?;
            if a[(pivot, col)] == T::zero() {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    a.data.swap(pivot * n + j, col * n + j);
                }
                x.swap(pivot, col);
            }
            for i in (col + 1)..n {
                let factor = a[(i, col)] / a[(col, col)];
                for j in col..n {
                    let v = a[(col, j)];
                    a[(i, j)] -= factor * v;
                }
                let v = x[col];
                x[i] -= factor * v;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= a[(i, j)] * x[j];
            }
            x[i] = s / a[(i, i)];
        }
        Some(x)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Thin singular value decomposition `A V = U Σ` computed by one-sided
/// (Hestenes) Jacobi rotations on the columns of `A`.
///
/// Returns the singular values (one per column of `A`, unsorted) and the
/// orthogonal matrix `V` whose columns are the right singular vectors.
/// Small singular values are resolved to relative machine precision, which
/// the rank decisions in the conformality analysis rely on.
pub fn right_singular_system<T: Scalar>(a: &Matrix<T>) -> (Vec<T>, Matrix<T>) {
    let m = a.cols;
    let mut w = a.clone();
    let mut v = Matrix::<T>::identity(m);
    let eps = T::epsilon();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut alpha = T::zero();
                let mut beta = T::zero();
                let mut gamma = T::zero();
                for i in 0..w.rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    alpha += wp * wp;
                    beta += wq * wq;
                    gamma += wp * wq;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::two() * gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..w.rows {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..m {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..m)
        .map(|j| (0..w.rows).map(|i| w[(i, j)] * w[(i, j)]).sum::<T>().sqrt())
        .collect();
    (sigma, v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_inverse_roundtrip() {
        let a: Matrix<f64> = Matrix {
            rows: 3,
            cols: 3,
            data: vec![4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0],
        };
        let inv = a.spd_inverse().unwrap();
        let id = a.matmul(&inv);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - e).abs() < 1e-14);
            }
        }
        assert_eq!(inv[(0, 2)], inv[(2, 0)]);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a: Matrix<f64> = Matrix {
            rows: 2,
            cols: 2,
            data: vec![1.0, 2.0, 2.0, 1.0],
        };
        assert!(a.cholesky().is_none());
    }

    #[test]
    fn solve_with_pivoting() {
        let a: Matrix<f64> = Matrix {
            rows: 2,
            cols: 2,
            data: vec![0.0, 1.0, 2.0, 0.0],
        };
        let x = a.solve(&[3.0, 4.0]).unwrap();
        assert_eq!(x, vec![2.0, 3.0]);
    }

    #[test]
    fn svd_finds_kernel_of_projection() {
        // (x, y, z) -> (x, y + z): kernel spanned by (0, 1, -1)/sqrt2.
        let a: Matrix<f64> = Matrix {
            rows: 2,
            cols: 3,
            data: vec![1.0, 0.0, 0.0, 0.0, 1.0, 1.0],
        };
        let (sigma, v) = right_singular_system(&a);
        let kernel: Vec<usize> = (0..3).filter(|&j| sigma[j] < 1e-12).collect();
        assert_eq!(kernel.len(), 1);
        let k = v.column(kernel[0]);
        assert!(k[0].abs() < 1e-15);
        assert!((k[1] + k[2]).abs() < 1e-15);
        let vtv = v.transpose().matmul(&v);
        for i in 0..3 {
            for j in 0..3 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((vtv[(i, j)] - e).abs() < 1e-14);
            }
        }
    }
}
