//! Small dense linear algebra: row-major matrices, LU with partial pivoting
//! and Cholesky for the regularized normal equations.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
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

    /// Builds a matrix from equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::DimensionMismatch("ragged matrix rows".into()));
        }
        Ok(Self {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_f64_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<T>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| T::lit(v)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, s: T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * s).collect(),
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self[(i, l)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(l, j)];
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Copies rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self::from_fn(r1 - r0, c1 - c0, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Maximum absolute column sum.
    pub fn norm_1(&self) -> T {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self[(i, j)].abs()).sum::<T>())
            .fold(T::zero(), T::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == T::zero())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Clone, Debug)]
pub struct Lu<T> {
    lu: Matrix<T>,
    perm: Vec<usize>,
    sign: T,
    singular: bool,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch("LU of a non-square matrix".into()));
        }
        let n = a.rows;
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = T::one();
        let mut singular = false;
        for col in 0..n {
            let (pivot_row, pivot_abs) =
                (col..n)
                    .map(|r| (r, lu[(r, col)].abs()))
                    .fold(
                        (col, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if pivot_abs == T::zero() {
                singular = true;
                continue;
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.data.swap(col * n + j, pivot_row * n + j);
                }
                perm.swap(col, pivot_row);
                sign = -sign;
            }
            let p = lu[(col, col)];
            for r in col + 1..n {
                let f = lu[(r, col)] / p;
                lu[(r, col)] = f;
                if f != T::zero() {
                    for j in col + 1..n {
                        lu[(r, j)] = lu[(r, j)] - f * lu[(col, j)];
                    }
                }
            }
        }
        Ok(Self {
            lu,
            perm,
            sign,
            singular,
        })
    }

    pub fn determinant(&self) -> T {
        if self.singular {
            return T::zero();
        }
        (0..self.lu.rows).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    pub fn is_singular(&self) -> bool {
        self.singular
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if self.singular {
            return Err(Error::SingularMatrix);
        }
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch("right-hand side length".into()));
        }
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s = s - self.lu[(i, j)] * x[j];
            }
            x[i] = s / self.lu[(i, i)];
        }
        Ok(x)
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &Matrix<T>) -> Result<Matrix<T>> {
        let mut out = Matrix::zeros(b.rows, b.cols);
        for j in 0..b.cols {
            let col: Vec<T> = (0..b.rows).map(|i| b[(i, j)]).collect();
            let x = self.solve(&col)?;
            for i in 0..b.rows {
                out[(i, j)] = x[i];
            }
        }
        Ok(out)
    }

    pub fn inverse(&self) -> Result<Matrix<T>> {
        self.solve_matrix(&Matrix::identity(self.lu.rows))
    }
}

/// Reciprocal 1-norm condition number, zero for a singular matrix.
pub fn reciprocal_condition<T: Scalar>(a: &Matrix<T>) -> Result<T> {
    let lu = Lu::new(a)?;
    if lu.is_singular() {
        return Ok(T::zero());
    }
    let inv = lu.inverse()?;
    let denom = a.norm_1() * inv.norm_1();
    Ok(if denom > T::zero() && denom.is_finite() {
        T::one() / denom
    } else {
        T::zero()
    })
}

/// Cholesky factor `A = L Lᵀ` of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    l: Matrix<T>,
}

impl<T: Scalar> Cholesky<T> {
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::DimensionMismatch(
                "Cholesky of a non-square matrix".into(),
            ));
        }
        let mut l = Matrix::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for p in 0..j {
                d = d - l[(j, p)] * l[(j, p)];
            }
            if !(d > T::zero()) {
                return Err(Error::SingularMatrix);
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = a[(i, j)];
                for p in 0..j {
                    s = s - l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { l })
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.rows;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for p in 0..i {
                s = s - self.l[(i, p)] * y[p];
            }
            y[i] = s / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s = s - self.l[(p, i)] * y[p];
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Squared ratio of the extreme diagonal entries of the factor, a cheap
    /// lower estimate of the 2-norm condition number.
    pub fn condition_estimate(&self) -> T {
        let n = self.l.rows;
        let (mut lo, mut hi) = (T::infinity(), T::zero());
        for i in 0..n {
            let d = self.l[(i, i)];
            lo = lo.min(d);
            hi = hi.max(d);
        }
        if n == 0 {
            T::one()
        } else {
            (hi / lo) * (hi / lo)
        }
    }
}

/// Basis of the null space of `a` (vectors `x` with `a x = 0`), computed by
/// Gaussian elimination with a relative pivot threshold.
pub fn null_space<T: Scalar>(a: &Matrix<T>, rel_tol: T) -> Vec<Vec<T>> {
    let (rows, cols) = (a.rows, a.cols);
    let mut m = a.clone();
    let scale = a.max_abs().max(T::min_positive_value());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (pr, pa) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((r, -T::one()), |b, x| if x.1 > b.1 { x } else { b });
        if pa <= rel_tol * scale {
            continue;
        }
        for j in 0..cols {
            m.data.swap(r * cols + j, pr * cols + j);
        }
        let p = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] = m[(r, j)] / p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != T::zero() {
                    for j in 0..cols {
                        m[(i, j)] = m[(i, j)] - f * m[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![T::zero(); cols];
            v[f] = T::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[(row, f)];
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_of_2x2() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert!((Lu::new(&a).unwrap().determinant() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn lu_solve_residual() {
        let a =
            Matrix::<f64>::from_f64_rows(&[&[0.0, 2.0, 1.0], &[1.0, -1.0, 0.5], &[3.0, 0.0, 2.0]])
                .unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = Lu::new(&a).unwrap().solve(&b).unwrap();
        let r = a.mul_vec(&x);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_matrix_is_flagged() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0], &[2.0, 4.0]]).unwrap();
        let lu = Lu::new(&a).unwrap();
        assert_eq!(lu.determinant(), 0.0);
        assert!(lu.solve(&[1.0, 1.0]).is_err());
        assert_eq!(reciprocal_condition(&a).unwrap(), 0.0);
    }

    #[test]
    fn cholesky_solves_spd() {
        let a = Matrix::<f64>::from_f64_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0]);
        let r = a.mul_vec(&x);
        assert!((r[0] - 1.0).abs() < 1e-14 && (r[1] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_of_rank_one() {
        let a = Matrix::<f64>::from_f64_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let ns = null_space(&a, 1e-12);
        assert_eq!(ns.len(), 2);
        for v in ns {
            assert!(a.mul_vec(&v)[0].abs() < 1e-14);
        }
    }
}
