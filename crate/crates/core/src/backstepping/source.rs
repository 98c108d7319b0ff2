use std::io::Write;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// `S(x) = K(x, 0) Σ(0) Q` sampled on a uniform grid of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceMatrix<T> {
    k: usize,
    m: usize,
    values: Vec<Matrix<T>>,
}

impl<T: Scalar> SourceMatrix<T> {
    pub fn new(k: usize, m: usize, values: Vec<Matrix<T>>) -> Result<Self> {
        let n = k + m;
        if values.len() < 2 || values.iter().any(|s| s.rows() != n || s.cols() != n) {
            return Err(Error::DimensionMismatch(format!(
                "source matrix needs at least two {n}x{n} samples"
            )));
        }
        Ok(Self { k, m, values })
    }

    pub fn zero(k: usize, m: usize) -> Self {
        let n = k + m;
        Self {
            k,
            m,
            values: vec![Matrix::zeros(n, n); 2],
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn n(&self) -> usize {
        self.k + self.m
    }
    pub fn cells(&self) -> usize {
        self.values.len() - 1
    }
    pub fn samples(&self) -> &[Matrix<T>] {
        &self.values
    }

    pub fn x(&self, p: usize) -> T {
        T::of_usize(p) / T::of_usize(self.cells())
    }

    /// Piecewise-linear interpolation in `x`.
    pub fn eval(&self, x: T) -> Matrix<T> {
        let cells = self.cells();
        let s = x.max(T::zero()).min(T::one()) * T::of_usize(cells);
        let p = s.floor().to_usize().unwrap_or(0).min(cells - 1);
        let theta = s - T::of_usize(p);
        let (a, b) = (&self.values[p], &self.values[p + 1]);
        Matrix::from_fn(self.n(), self.n(), |i, j| {
            a[(i, j)] + theta * (b[(i, j)] - a[(i, j)])
        })
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(Matrix::is_zero)
    }

    /// True when the first `k` columns vanish at every sample.
    pub fn leading_columns_zero(&self) -> bool {
        self.values
            .iter()
            .all(|s| (0..self.n()).all(|i| (0..self.k).all(|j| s[(i, j)] == T::zero())))
    }

    /// `max |(S_{++})_{pq}(x)|` over `q ≤ p` and the samples with `x > 0`.
    ///
    /// The sample at `x = 0` comes from the kernel corner `(0, 0)`, where the
    /// diagonal condition takes precedence over the `y = 0` data.
    pub fn lower_triangle_max(&self) -> T {
        let k = self.k;
        let mut worst = T::zero();
        for s in &self.values[1..] {
            for p in 0..self.m {
                for q in 0..=p {
                    worst = worst.max(s[(k + p, k + q)].abs());
                }
            }
        }
        worst
    }

    /// CSV rows `x,i,j,S_ij` with one-based component indices.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,i,j,S")?;
        for (p, s) in self.values.iter().enumerate() {
            for i in 0..self.n() {
                for j in 0..self.n() {
                    writeln!(
                        out,
                        "{:.10e},{},{},{:.10e}",
                        self.x(p).as_f64(),
                        i + 1,
                        j + 1,
                        s[(i, j)].as_f64()
                    )?;
                }
            }
        }
        Ok(())
    }
}
