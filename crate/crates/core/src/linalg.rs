//! Small dense linear-algebra kit: vector kernels, a row-major matrix and a
//! cyclic Jacobi eigensolver for symmetric matrices.

use crate::error::{check_dim, invalid, Result};
use crate::scalar::Scalar;

/// Inner product with eight independent accumulators. The summation order is
/// fixed, so results are reproducible bit-for-bit across call sites.
#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    let mut acc = [T::zero(); 8];
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for (x, y) in ra.iter().zip(rb) {
        s += *x * *y;
    }
    s
}

#[inline]
pub fn norm2<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn norm_inf<T: Scalar>(a: &[T]) -> T {
    a.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * *xi;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

/// Normalizes in place and returns the original norm.
pub fn normalize<T: Scalar>(a: &mut [T]) -> T {
    let n = norm2(a);
    if n > T::zero() {
        a.iter_mut().for_each(|x| *x /= n);
    }
    n
}

pub fn basis_vector<T: Scalar>(d: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); d];
    e[i] = T::one();
    e
}

/// Checks that `cols` are pairwise orthonormal within `tol`.
pub fn check_orthonormal<T: Scalar>(cols: &[Vec<T>], tol: T) -> Result<()> {
    for (i, a) in cols.iter().enumerate() {
        let n = dot(a, a);
        if (n - T::one()).abs() > tol {
            return Err(invalid(format!("column {i} has squared norm {n}")));
        }
        for (j, b) in cols.iter().enumerate().skip(i + 1) {
            let c = dot(a, b);
            if c.abs() > tol {
                return Err(invalid(format!("columns {i} and {j} have inner product {c:e}")));
            }
        }
    }
    Ok(())
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
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
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
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

    /// Sum of `w_i * v_i v_iᵀ` over the given vectors.
    pub fn sum_outer(d: usize, terms: impl IntoIterator<Item = (T, impl AsRef<[T]>)>) -> Self {
        let mut m = Self::zeros(d, d);
        for (w, v) in terms {
            let v = v.as_ref();
            for (row, &vi) in m.data.chunks_exact_mut(d).zip(v) {
                let wi = w * vi;
                for (x, &vj) in row.iter_mut().zip(v) {
                    *x += wi * vj;
                }
            }
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dim(self.cols, other.rows)?;
        let ot = other.transpose();
        Ok(Self::from_fn(self.rows, other.cols, |i, j| dot(self.row(i), ot.row(j))))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.data.len(), other.data.len())?;
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a - *b).collect(),
        })
    }

    pub fn frobenius_norm(&self) -> T {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> T {
        norm_inf(&self.data)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (i + 1..self.cols).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }
}

/// Full eigendecomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    /// Eigenvalues in the order Jacobi left them on the diagonal.
    pub values: Vec<T>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: Matrix<T>,
    pub sweeps: usize,
}

const MAX_JACOBI_SWEEPS: usize = 100;

fn symmetry_tolerance<T: Scalar>(m: &Matrix<T>) -> T {
    T::lit(1e-10) * T::one().max(m.max_abs())
}

/// Cyclic Jacobi diagonalization. Sweeps until the off-diagonal Frobenius
/// norm drops below `1e-12 · ‖M‖_F` (or a few ulps for `f32`).
pub fn jacobi_eigen<T: Scalar>(m: &Matrix<T>) -> Result<SymmetricEigen<T>> {
    if m.rows != m.cols {
        return Err(invalid(format!("matrix is {}x{}, not square", m.rows, m.cols)));
    }
    if !m.is_symmetric(symmetry_tolerance(m)) {
        return Err(invalid("matrix is not symmetric"));
    }
    let n = m.rows;
    let mut a = m.clone();
    // Symmetrize exactly so rotations act on a truly symmetric matrix.
    for i in 0..n {
        for j in i + 1..n {
            let avg = (a.get(i, j) + a.get(j, i)) * T::lit(0.5);
            a.set(i, j, avg);
            a.set(j, i, avg);
        }
    }
    let mut v = Matrix::identity(n);
    let threshold = T::lit(1e-12).max(T::epsilon() * T::lit(4.0)) * a.frobenius_norm();

    let off_norm = |a: &Matrix<T>| {
        let mut s = T::zero();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a.get(i, j) * a.get(i, j);
                }
            }
        }
        s.sqrt()
    };

    let mut sweeps = 0;
    while sweeps < MAX_JACOBI_SWEEPS && off_norm(&a) > threshold {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a.get(p, q);
                if apq == T::zero() {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (T::lit(2.0) * apq);
                let t = {
                    let mag = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a.get(r, p);
                    let arq = a.get(r, q);
                    let nrp = c * arp - s * arq;
                    let nrq = s * arp + c * arq;
                    a.set(r, p, nrp);
                    a.set(p, r, nrp);
                    a.set(r, q, nrq);
                    a.set(q, r, nrq);
                }
                a.set(p, p, app - t * apq);
                a.set(q, q, aqq + t * apq);
                a.set(p, q, T::zero());
                a.set(q, p, T::zero());
                for r in 0..n {
                    let vrp = v.get(r, p);
                    let vrq = v.get(r, q);
                    v.set(r, p, c * vrp - s * vrq);
                    v.set(r, q, s * vrp + c * vrq);
                }
            }
        }
    }
    Ok(SymmetricEigen {
        values: (0..n).map(|i| a.get(i, i)).collect(),
        vectors: v,
        sweeps,
    })
}

/// Top-`k` eigenpairs of a symmetric matrix ranked by absolute eigenvalue.
/// Ties keep the lower diagonal index first.
pub fn symmetric_topk_eigs<T: Scalar>(m: &Matrix<T>, k: usize) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    if k > m.rows {
        return Err(invalid(format!("requested {k} eigenpairs from a {}x{} matrix", m.rows, m.cols)));
    }
    let eig = jacobi_eigen(m)?;
    let mut order: Vec<usize> = (0..eig.values.len()).collect();
    order.sort_by(|&i, &j| {
        eig.values[j]
            .abs()
            .partial_cmp(&eig.values[i].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order[..k].iter().map(|&i| eig.values[i]).collect();
    let vectors = order[..k].iter().map(|&i| eig.vectors.column(i)).collect();
    Ok((values, vectors))
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn symmetric_spectral_norm<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    let eig = jacobi_eigen(m)?;
    Ok(eig.values.iter().fold(T::zero(), |acc, x| acc.max(x.abs())))
}
