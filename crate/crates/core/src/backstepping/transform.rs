//! Volterra transform `u(x) = w(x) − ∫_0^x K(x, y) w(y) dy` and its inverse
//! on a state grid, with trapezoid weights.

use crate::backstepping::{Kernel, SourceMatrix};
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::scalar::Scalar;
use crate::system::{StateField, SystemSpec};

/// Kernel values at the nodes `(x_p, y_q)`, `q ≤ p`, of a state grid.
#[derive(Clone, Debug)]
pub struct KernelTable<T> {
    n: usize,
    cells: usize,
    /// `n × n` blocks, row-major, indexed by the triangular node number.
    values: Vec<T>,
}

impl<T: Scalar> KernelTable<T> {
    pub fn new(kernel: &Kernel<T>, cells: usize) -> Self {
        let n = kernel.n();
        let mut values = Vec::with_capacity((cells + 1) * (cells + 2) / 2 * n * n);
        for p in 0..=cells {
            let x = T::of_usize(p) / T::of_usize(cells);
            for q in 0..=p {
                let y = T::of_usize(q) / T::of_usize(cells);
                for i in 0..n {
                    for j in 0..n {
                        values.push(kernel.eval(i, j, x, y));
                    }
                }
            }
        }
        Self { n, cells, values }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    #[inline]
    fn block(&self, p: usize, q: usize) -> &[T] {
        let nn = self.n * self.n;
        let start = (p * (p + 1) / 2 + q) * nn;
        &self.values[start..start + nn]
    }

    fn check(&self, state: &StateField<T>) -> Result<()> {
        if state.n() != self.n || state.cells() != self.cells {
            return Err(Error::GridMismatch(format!(
                "state is {}x{} nodes, kernel table is {}x{}",
                state.n(),
                state.nodes(),
                self.n,
                self.cells + 1
            )));
        }
        Ok(())
    }

    /// `Σ_{q < p} ω_q K(x_p, y_q) w(y_q)` with the trapezoid weights of
    /// `[0, x_p]`, excluding the `q = p` term.
    fn history(&self, w: &StateField<T>, p: usize, out: &mut [T]) {
        let n = self.n;
        let h = T::one() / T::of_usize(self.cells);
        out.iter_mut().for_each(|v| *v = T::zero());
        for q in 0..p {
            let weight = if q == 0 { h * T::lit(0.5) } else { h };
            let blk = self.block(p, q);
            for i in 0..n {
                let mut s = T::zero();
                for j in 0..n {
                    s = s + blk[i * n + j] * w.get(j, q);
                }
                out[i] = out[i] + weight * s;
            }
        }
    }
}

pub fn transform<T: Scalar>(w: &StateField<T>, table: &KernelTable<T>) -> Result<StateField<T>> {
    table.check(w)?;
    let n = table.n;
    let half_h = T::lit(0.5) / T::of_usize(table.cells);
    let mut u = w.clone();
    let mut acc = vec![T::zero(); n];
    for p in 1..=table.cells {
        table.history(w, p, &mut acc);
        let diag = table.block(p, p);
        for i in 0..n {
            let mut s = acc[i];
            for j in 0..n {
                s = s + half_h * diag[i * n + j] * w.get(j, p);
            }
            u.set(i, p, w.get(i, p) - s);
        }
    }
    Ok(u)
}

/// Solves the discrete Volterra system by forward substitution in `x`.
pub fn inverse_transform<T: Scalar>(
    u: &StateField<T>,
    table: &KernelTable<T>,
) -> Result<StateField<T>> {
    table.check(u)?;
    let n = table.n;
    let half_h = T::lit(0.5) / T::of_usize(table.cells);
    let mut w = u.clone();
    let mut acc = vec![T::zero(); n];
    for p in 1..=table.cells {
        table.history(&w, p, &mut acc);
        let diag = table.block(p, p);
        let a = Matrix::from_fn(
            n,
            n,
            |i, j| if i == j { T::one() } else { T::zero() } - half_h * diag[i * n + j],
        );
        let rhs: Vec<T> = (0..n).map(|i| u.get(i, p) + acc[i]).collect();
        let sol = Lu::new(&a)?.solve(&rhs)?;
        for (i, v) in sol.into_iter().enumerate() {
            w.set(i, p, v);
        }
    }
    Ok(w)
}

/// `L²` norm over interior space-time nodes of
/// `∂_t u − Σ ∂_x u − S(x) u(t, 0)`, with forward differences in time between
/// consecutive snapshots and central differences in space.
pub fn target_residual<T: Scalar>(
    snapshots: &[StateField<T>],
    source: &SourceMatrix<T>,
    spec: &SystemSpec<T>,
) -> Result<T> {
    let Some(first) = snapshots.first() else {
        return Ok(T::zero());
    };
    let (n, cells) = (first.n(), first.cells());
    if n != spec.n() || source.n() != n {
        return Err(Error::DimensionMismatch(
            "snapshot, source and spec sizes differ".into(),
        ));
    }
    let h = first.h();
    let xs: Vec<T> = (0..=cells).map(|p| first.x(p)).collect();
    let sigma: Vec<Vec<T>> = (0..n)
        .map(|i| xs.iter().map(|&x| spec.signed_speed(i, x, &[])).collect())
        .collect();
    let s_nodes: Vec<Matrix<T>> = xs.iter().map(|&x| source.eval(x)).collect();
    let mut total = T::zero();
    for pair in snapshots.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        a.check_same_grid(b)?;
        let dt = b.t() - a.t();
        if !(dt > T::zero()) {
            return Err(Error::GridMismatch(
                "snapshots must have increasing times".into(),
            ));
        }
        let u0 = a.node(0);
        for p in 1..cells {
            let sv = s_nodes[p].mul_vec(&u0);
            for i in 0..n {
                let r = (b.get(i, p) - a.get(i, p)) / dt
                    - sigma[i][p] * (a.get(i, p + 1) - a.get(i, p - 1)) / (h + h)
                    - sv[i];
                total = total + r * r * h * dt;
            }
        }
    }
    Ok(total.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backstepping::{solve_kernel, KernelOptions};
    use crate::system::{validate_system, CouplingField, ReflectionMatrix, SpeedProfile};

    fn kernel() -> Kernel<f64> {
        let spec = validate_system(
            SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap(),
            CouplingField::constant(Matrix::from_f64_rows(&[&[0.0, 0.6], &[-0.4, 0.0]]).unwrap())
                .unwrap(),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[0.5]]).unwrap()),
        )
        .unwrap();
        solve_kernel(
            &spec,
            &KernelOptions {
                cells: 32,
                ..KernelOptions::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn zero_kernel_is_identity() {
        let table = KernelTable::new(&Kernel::zero(1, 1, 16), 40);
        let w = StateField::from_fn(2, 40, |i, x: f64| (3.0 * x + i as f64).sin());
        assert_eq!(transform(&w, &table).unwrap(), w);
        assert_eq!(inverse_transform(&w, &table).unwrap(), w);
    }

    #[test]
    fn round_trip() {
        let table = KernelTable::new(&kernel(), 100);
        let w = StateField::from_fn(2, 100, |i, x: f64| (7.0 * x + i as f64).cos() + x * x);
        let u = transform(&w, &table).unwrap();
        assert!((0..=100).any(|q| (u.get(0, q) - w.get(0, q)).abs() > 1e-3));
        let back = inverse_transform(&u, &table).unwrap();
        let err = (0..2)
            .flat_map(|i| (0..=100).map(move |q| (i, q)))
            .map(|(i, q)| (back.get(i, q) - w.get(i, q)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-12 * w.max_abs(), "{err}");
        assert_eq!(
            transform(&StateField::zeros(2, 100), &table)
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn grid_mismatch() {
        let table = KernelTable::new(&kernel(), 50);
        assert!(matches!(
            transform(&StateField::zeros(2, 60), &table),
            Err(Error::GridMismatch(_))
        ));
    }
}
