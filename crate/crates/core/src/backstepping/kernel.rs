//! Kernel equations on the triangle `0 ≤ y ≤ x ≤ 1`:
//!
//! `∂_y K Σ(y) + Σ(x) ∂_x K + K Σ'(y) − K C(y) = 0`,
//! `C(x) − K(x,x) Σ(x) + Σ(x) K(x,x) = 0`.
//!
//! Entry `(i, j)` is transported along `dx/ds = σ_i(x)`, `dy/ds = σ_j(y)`,
//! where `L = K_ij σ_j(y)` obeys `dL/ds = σ_j(y) Σ_l K_il(x, y) C_lj(y)`.
//! Data comes from the diagonal when the characteristic crosses it. Otherwise
//! the characteristic joins `{y = 0}` to `{x = 1}`: entries `(k+p, k+q)` with
//! `q ≤ p` take `y = 0` data making `(S_{++})_{pq}` vanish, all others take
//! zero data at `x = 1`. The coupled integral equations are solved by
//! successive approximation.

use std::io::Write;

use rayon::prelude::*;

use crate::backstepping::SourceMatrix;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{interp_uniform, SystemSpec};

#[derive(Clone, Copy, Debug)]
pub struct KernelOptions<T> {
    /// Triangle resolution `N_K`.
    pub cells: usize,
    pub max_iters: usize,
    /// Sup-norm change below which the iteration stops.
    pub tolerance: T,
}

impl<T: Scalar> Default for KernelOptions<T> {
    fn default() -> Self {
        Self {
            cells: 64,
            max_iters: 200,
            tolerance: T::lit(1e-10),
        }
    }
}

/// Consecutive growing updates tolerated before reporting divergence.
const DIVERGENCE_WINDOW: usize = 5;

#[inline]
fn tri(p: usize, q: usize) -> usize {
    p * (p + 1) / 2 + q
}

/// Samples of an `n × n` kernel on `{(x_p, y_q) : q ≤ p}`.
#[derive(Clone, Debug)]
pub struct Kernel<T> {
    k: usize,
    m: usize,
    cells: usize,
    values: Vec<Vec<T>>,
    iterations: usize,
    changes: Vec<T>,
    residual: T,
}

impl<T: Scalar> Kernel<T> {
    pub fn zero(k: usize, m: usize, cells: usize) -> Self {
        let n = k + m;
        let len = tri(cells, cells) + 1;
        Self {
            k,
            m,
            cells,
            values: vec![vec![T::zero(); len]; n * n],
            iterations: 0,
            changes: vec![],
            residual: T::zero(),
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
        self.cells
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    /// Sup-norm change of every sweep.
    pub fn changes(&self) -> &[T] {
        &self.changes
    }
    /// `L^∞` norm of the finite-difference PDE residual, excluding a
    /// one-cell band along the diagonal.
    pub fn residual(&self) -> T {
        self.residual
    }

    pub fn coord(&self, p: usize) -> T {
        T::of_usize(p) / T::of_usize(self.cells)
    }

    /// `K_ij(x_p, y_q)` for `q ≤ p`.
    pub fn get(&self, i: usize, j: usize, p: usize, q: usize) -> T {
        self.values[i * self.n() + j][tri(p, q)]
    }

    pub fn max_abs(&self) -> T {
        self.values
            .iter()
            .flatten()
            .fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    /// Bilinear interpolation, barycentric in the diagonal cells.
    pub fn eval(&self, i: usize, j: usize, x: T, y: T) -> T {
        interp_tri(&self.values[i * self.n() + j], self.cells, x, y)
    }

    pub fn eval_matrix(&self, x: T, y: T) -> Matrix<T> {
        Matrix::from_fn(self.n(), self.n(), |i, j| self.eval(i, j, x, y))
    }

    /// CSV rows `x,y,i,j,K_ij` (one-based components).
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "x,y,i,j,K")?;
        let n = self.n();
        for p in 0..=self.cells {
            for q in 0..=p {
                for i in 0..n {
                    for j in 0..n {
                        writeln!(
                            out,
                            "{:.10e},{:.10e},{},{},{:.10e}",
                            self.coord(p).as_f64(),
                            self.coord(q).as_f64(),
                            i + 1,
                            j + 1,
                            self.get(i, j, p, q).as_f64()
                        )?;
                    }
                }
            }
        }
        Ok(())
    }
}

fn interp_tri<T: Scalar>(v: &[T], cells: usize, x: T, y: T) -> T {
    let nf = T::of_usize(cells);
    let xs = x.max(T::zero()).min(T::one()) * nf;
    let ys = y.max(T::zero()).min(T::one()) * nf;
    let ys = ys.min(xs);
    let a = xs.floor().to_usize().unwrap_or(0).min(cells - 1);
    let b = ys.floor().to_usize().unwrap_or(0).min(a);
    let u = xs - T::of_usize(a);
    let w = ys - T::of_usize(b);
    if b < a {
        let v00 = v[tri(a, b)];
        let v10 = v[tri(a + 1, b)];
        let v01 = v[tri(a, b + 1)];
        let v11 = v[tri(a + 1, b + 1)];
        let one = T::one();
        (one - u) * (one - w) * v00 + u * (one - w) * v10 + (one - u) * w * v01 + u * w * v11
    } else {
        // lower triangle of a diagonal cell: (a, a), (a+1, a), (a+1, a+1)
        let w = w.min(u);
        v[tri(a, a)] * (T::one() - u) + v[tri(a + 1, a)] * (u - w) + v[tri(a + 1, a + 1)] * w
    }
}

/// Coordinate along one characteristic family: `φ(x) = ∫_0^x dξ / σ(ξ)`.
enum Coord<T> {
    Linear {
        sigma: T,
    },
    Table {
        phi: Vec<T>,
        sigma: Vec<T>,
        increasing: bool,
    },
}

impl<T: Scalar> Coord<T> {
    fn new(spec: &SystemSpec<T>, i: usize, table_cells: usize) -> Self {
        let f = &spec.profile().functions()[i];
        if f.is_constant() {
            return Coord::Linear {
                sigma: spec.signed_speed(i, T::zero(), &[]),
            };
        }
        let h = T::one() / T::of_usize(table_cells);
        let sigma: Vec<T> = (0..=table_cells)
            .map(|q| spec.signed_speed(i, T::of_usize(q) * h, &[]))
            .collect();
        let mut phi = Vec::with_capacity(table_cells + 1);
        phi.push(T::zero());
        for q in 1..=table_cells {
            let mid = spec.signed_speed(i, (T::of_usize(q) - T::lit(0.5)) * h, &[]);
            let inc = h / T::lit(6.0)
                * (T::one() / sigma[q - 1] + T::lit(4.0) / mid + T::one() / sigma[q]);
            phi.push(phi[q - 1] + inc);
        }
        let increasing = sigma[0] > T::zero();
        Coord::Table {
            phi,
            sigma,
            increasing,
        }
    }

    fn phi(&self, x: T) -> T {
        match self {
            Coord::Linear { sigma } => x / *sigma,
            Coord::Table { phi, .. } => interp_uniform(phi, x),
        }
    }

    fn phi_end(&self) -> T {
        self.phi(T::one())
    }

    fn inverse(&self, v: T) -> T {
        match self {
            Coord::Linear { sigma } => (v * *sigma).max(T::zero()).min(T::one()),
            Coord::Table {
                phi, increasing, ..
            } => {
                let cells = phi.len() - 1;
                let idx = if *increasing {
                    phi.partition_point(|&p| p <= v)
                } else {
                    phi.partition_point(|&p| p >= v)
                };
                if idx == 0 {
                    return T::zero();
                }
                if idx > cells {
                    return T::one();
                }
                let (a, b) = (phi[idx - 1], phi[idx]);
                let theta = if b != a { (v - a) / (b - a) } else { T::zero() };
                (T::of_usize(idx - 1) + theta) / T::of_usize(cells)
            }
        }
    }

    fn sigma(&self, x: T) -> T {
        match self {
            Coord::Linear { sigma } => *sigma,
            Coord::Table { sigma, .. } => interp_uniform(sigma, x),
        }
    }

    /// Parameter range keeping the coordinate inside `[0, 1]`, relative to `φ(x0)`.
    fn s_range(&self, x0: T) -> (T, T) {
        let (p0, p1) = (T::zero(), self.phi_end());
        let base = self.phi(x0);
        (p0.min(p1) - base, p0.max(p1) - base)
    }
}

enum CouplingLookup<T> {
    Constant(Matrix<T>),
    Cells(Vec<Matrix<T>>),
}

impl<T: Scalar> CouplingLookup<T> {
    fn new(spec: &SystemSpec<T>, cells: usize) -> Self {
        let c = spec.coupling();
        let c0 = c.eval(T::zero());
        let probe = (0..=64).map(|p| T::of_usize(p) / T::lit(64.0));
        if c.is_identically_zero() || probe.into_iter().all(|x| c.eval(x) == c0) {
            return CouplingLookup::Constant(c0);
        }
        let h = T::one() / T::of_usize(cells);
        CouplingLookup::Cells(
            (0..cells)
                .map(|q| c.eval((T::of_usize(q) + T::lit(0.5)) * h))
                .collect(),
        )
    }

    #[inline]
    fn at(&self, y: T) -> &Matrix<T> {
        match self {
            CouplingLookup::Constant(c) => c,
            CouplingLookup::Cells(cells) => {
                let nc = cells.len();
                let idx = (y.max(T::zero()) * T::of_usize(nc))
                    .floor()
                    .to_usize()
                    .unwrap_or(0)
                    .min(nc - 1);
                &cells[idx]
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Data<T> {
    /// Node on the diagonal: fixed value.
    Fixed(T),
    /// Fixed `L` at the path start (diagonal crossing or zero at `x = 1`).
    Start(T),
    /// `y = 0` data fitted to the source matrix, at `x = z`.
    Edge(T),
}

#[derive(Clone, Copy, Debug)]
struct Plan<T> {
    data: Data<T>,
    /// Path parameter of the data point; the node sits at `s = 0`.
    s_data: T,
    segments: usize,
}

struct Problem<'a, T> {
    spec: &'a SystemSpec<T>,
    coords: Vec<Coord<T>>,
    coupling: CouplingLookup<T>,
    coupled: bool,
    cells: usize,
    /// `σ_l(0) B_lq` for the `y = 0` data.
    edge_weights: Matrix<T>,
}

impl<T: Scalar> Problem<'_, T> {
    fn n(&self) -> usize {
        self.spec.n()
    }

    fn targeted(&self, i: usize, j: usize) -> bool {
        let k = self.spec.k();
        i >= k && j >= k && j <= i
    }

    fn position(&self, i: usize, j: usize, x0: T, y0: T, s: T) -> (T, T) {
        let (ci, cj) = (&self.coords[i], &self.coords[j]);
        (ci.inverse(ci.phi(x0) + s), cj.inverse(cj.phi(y0) + s))
    }

    fn diagonal_value(&self, i: usize, j: usize, z: T) -> T {
        let c = self.spec.coupling().eval(z)[(i, j)];
        c / (self.spec.signed_speed(j, z, &[]) - self.spec.signed_speed(i, z, &[]))
    }

    fn plan(&self, i: usize, j: usize, p: usize, q: usize) -> Plan<T> {
        let x0 = T::of_usize(p) / T::of_usize(self.cells);
        let y0 = T::of_usize(q) / T::of_usize(self.cells);
        if p == q && i != j {
            return Plan {
                data: Data::Fixed(self.diagonal_value(i, j, x0)),
                s_data: T::zero(),
                segments: 0,
            };
        }
        let (ax, bx) = self.coords[i].s_range(x0);
        let (ay, by) = self.coords[j].s_range(y0);
        let (lo, hi) = (ax.max(ay), bx.min(by));
        let gap = |s: T| {
            let (x, y) = self.position(i, j, x0, y0, s);
            x - y
        };
        let crossing = if i == j {
            None
        } else if gap(lo) < T::zero() {
            Some(bisect(&gap, lo, T::zero()))
        } else if gap(hi) < T::zero() {
            Some(bisect(&gap, T::zero(), hi))
        } else {
            None
        };
        let (s_data, data) = match crossing {
            Some(s) => {
                let (x, y) = self.position(i, j, x0, y0, s);
                let z = (x + y) * T::lit(0.5);
                (
                    s,
                    Data::Start(self.diagonal_value(i, j, z) * self.spec.signed_speed(j, z, &[])),
                )
            }
            None => {
                let (_, y_lo) = self.position(i, j, x0, y0, lo);
                let (_, y_hi) = self.position(i, j, x0, y0, hi);
                let (s_edge, s_right) = if y_lo <= y_hi { (lo, hi) } else { (hi, lo) };
                if self.targeted(i, j) {
                    let (z, _) = self.position(i, j, x0, y0, s_edge);
                    (s_edge, Data::Edge(z))
                } else {
                    (s_right, Data::Start(T::zero()))
                }
            }
        };
        let (xd, yd) = self.position(i, j, x0, y0, s_data);
        let span = (xd - x0).abs().max((yd - y0).abs()) * T::of_usize(self.cells);
        let segments = span.ceil().to_usize().unwrap_or(1).max(1);
        Plan {
            data,
            s_data,
            segments,
        }
    }

    fn node(&self, i: usize, j: usize, x0: T, y0: T, plan: &Plan<T>, old: &[Vec<T>]) -> T {
        let n = self.n();
        let cells = self.cells;
        let start = match plan.data {
            Data::Fixed(v) => return v,
            Data::Start(l) => l,
            Data::Edge(z) => {
                let q = j - self.spec.k();
                let mut l = T::zero();
                for r in 0..self.spec.k() {
                    l = l - interp_tri(&old[i * n + r], cells, z, T::zero())
                        * self.edge_weights[(r, q)];
                }
                l
            }
        };
        let mut integral = T::zero();
        if self.coupled && plan.s_data != T::zero() {
            let ds = -plan.s_data / T::of_usize(plan.segments);
            for r in 0..=plan.segments {
                let s = plan.s_data + ds * T::of_usize(r);
                let (x, y) = self.position(i, j, x0, y0, s);
                let c = self.coupling.at(y);
                let mut f = T::zero();
                for l in 0..n {
                    let clj = c[(l, j)];
                    if clj != T::zero() {
                        f = f + interp_tri(&old[i * n + l], cells, x, y) * clj;
                    }
                }
                f = f * self.coords[j].sigma(y);
                let w = if r == 0 || r == plan.segments {
                    T::lit(0.5)
                } else {
                    T::one()
                };
                integral = integral + w * f;
            }
            integral = integral * ds;
        }
        (start + integral) / self.coords[j].sigma(y0)
    }
}

fn bisect<T: Scalar>(g: &impl Fn(T) -> T, mut a: T, mut b: T) -> T {
    // g(a) and g(b) have opposite signs
    let ga_neg = g(a) < T::zero();
    for _ in 0..200 {
        let mid = (a + b) * T::lit(0.5);
        if mid == a || mid == b {
            break;
        }
        if (g(mid) < T::zero()) == ga_neg {
            a = mid;
        } else {
            b = mid;
        }
    }
    (a + b) * T::lit(0.5)
}

/// Solves the kernel equations for a state-independent spec whose coupling
/// has a zero diagonal.
pub fn solve_kernel<T: Scalar>(spec: &SystemSpec<T>, opts: &KernelOptions<T>) -> Result<Kernel<T>> {
    if spec.is_state_dependent() {
        return Err(Error::NotApplicable(
            "kernels need state-independent speeds".into(),
        ));
    }
    let cells = opts.cells;
    if cells < 2 {
        return Err(Error::GridMismatch(
            "kernel grid needs at least 2 cells".into(),
        ));
    }
    let (k, m, n) = (spec.k(), spec.m(), spec.n());
    let sup = spec.summary().coupling_sup;
    let tol = T::lit(1e-13) * (T::one() + sup);
    for p in 0..=256 {
        let c = spec.coupling().eval(T::of_usize(p) / T::lit(256.0));
        if let Some(i) = (0..n).find(|&i| c[(i, i)].abs() > tol) {
            return Err(Error::DiagonalCouplingPresent(i + 1));
        }
    }
    let table_cells = (16 * cells).max(4096);
    let b = spec.b();
    let problem = Problem {
        spec,
        coords: (0..n).map(|i| Coord::new(spec, i, table_cells)).collect(),
        coupling: CouplingLookup::new(spec, 8 * cells),
        coupled: !spec.coupling().is_identically_zero(),
        cells,
        edge_weights: Matrix::from_fn(k, m, |r, q| {
            spec.signed_speed(r, T::zero(), &[]) * b[(r, q)]
        }),
    };

    let rows: Vec<(usize, usize)> = (0..n * n)
        .flat_map(|e| (0..=cells).map(move |p| (e, p)))
        .collect();
    let plans: Vec<Vec<Plan<T>>> = rows
        .par_iter()
        .map(|&(e, p)| (0..=p).map(|q| problem.plan(e / n, e % n, p, q)).collect())
        .collect();

    let len = tri(cells, cells) + 1;
    let mut current = vec![vec![T::zero(); len]; n * n];
    let mut changes = Vec::new();
    let mut growing = 0;
    for iter in 1..=opts.max_iters {
        let new_rows: Vec<Vec<T>> = rows
            .par_iter()
            .zip(plans.par_iter())
            .map(|(&(e, p), row_plans)| {
                let (i, j) = (e / n, e % n);
                let x0 = T::of_usize(p) / T::of_usize(cells);
                row_plans
                    .iter()
                    .enumerate()
                    .map(|(q, plan)| {
                        problem.node(
                            i,
                            j,
                            x0,
                            T::of_usize(q) / T::of_usize(cells),
                            plan,
                            &current,
                        )
                    })
                    .collect()
            })
            .collect();
        let mut next = vec![vec![T::zero(); len]; n * n];
        for ((e, p), row) in rows.iter().zip(new_rows) {
            next[*e][tri(*p, 0)..=tri(*p, *p)].copy_from_slice(&row);
        }
        let change = next
            .iter()
            .flatten()
            .zip(current.iter().flatten())
            .fold(T::zero(), |a, (&u, &v)| a.max((u - v).abs()));
        if !change.is_finite() {
            return Err(Error::FixedPointDivergence(iter));
        }
        current = next;
        if changes.last().is_some_and(|&last| change > last) {
            growing += 1;
        } else {
            growing = 0;
        }
        changes.push(change);
        if change < opts.tolerance {
            let mut kernel = Kernel {
                k,
                m,
                cells,
                values: current,
                iterations: iter,
                changes,
                residual: T::zero(),
            };
            kernel.residual = pde_residual(spec, &kernel);
            return Ok(kernel);
        }
        if growing >= DIVERGENCE_WINDOW {
            return Err(Error::FixedPointDivergence(iter));
        }
    }
    Err(Error::MaxItersExceeded(opts.max_iters))
}

/// `L^∞` residual of the kernel PDE from first-order forward differences on
/// nodes with `q ≤ p - 2`.
pub fn pde_residual<T: Scalar>(spec: &SystemSpec<T>, kernel: &Kernel<T>) -> T {
    let n = kernel.n();
    let cells = kernel.cells();
    let h = T::one() / T::of_usize(cells);
    let xs: Vec<T> = (0..=cells).map(|p| kernel.coord(p)).collect();
    let sigma: Vec<Vec<T>> = (0..n)
        .map(|i| xs.iter().map(|&x| spec.signed_speed(i, x, &[])).collect())
        .collect();
    let coupling: Vec<Matrix<T>> = xs.iter().map(|&y| spec.coupling().eval(y)).collect();
    let mut worst = T::zero();
    for i in 0..n {
        for j in 0..n {
            for p in 2..cells {
                for q in 0..=p - 2 {
                    let kv = kernel.get(i, j, p, q);
                    let dx = (kernel.get(i, j, p + 1, q) - kv) / h;
                    let dy = (kernel.get(i, j, p, q + 1) * sigma[j][q + 1] - kv * sigma[j][q]) / h;
                    let mut src = T::zero();
                    for l in 0..n {
                        src = src + kernel.get(i, l, p, q) * coupling[q][(l, j)];
                    }
                    worst = worst.max((sigma[i][p] * dx + dy - src).abs());
                }
            }
        }
    }
    worst
}

/// `S(x) = K(x, 0) Σ(0) Q` with `Q = [[0, B], [0, I]]`, at the kernel nodes.
pub fn source_matrix<T: Scalar>(
    kernel: &Kernel<T>,
    spec: &SystemSpec<T>,
) -> Result<SourceMatrix<T>> {
    let (k, m, n) = (spec.k(), spec.m(), spec.n());
    if kernel.k() != k || kernel.m() != m {
        return Err(Error::DimensionMismatch(
            "kernel does not match (k, m)".into(),
        ));
    }
    let b = spec.b();
    let sigma0: Vec<T> = (0..n)
        .map(|i| spec.signed_speed(i, T::zero(), &[]))
        .collect();
    let values = (0..=kernel.cells())
        .map(|p| {
            let mut s = Matrix::zeros(n, n);
            for i in 0..n {
                for q in 0..m {
                    let mut v = kernel.get(i, k + q, p, 0) * sigma0[k + q];
                    for r in 0..k {
                        v = v + kernel.get(i, r, p, 0) * sigma0[r] * b[(r, q)];
                    }
                    s[(i, k + q)] = v;
                }
            }
            s
        })
        .collect();
    SourceMatrix::new(k, m, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{validate_system, CouplingField, ReflectionMatrix, SpeedProfile};

    fn spec2(c12: f64, c21: f64, b: f64) -> SystemSpec<f64> {
        validate_system(
            SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap(),
            CouplingField::constant(Matrix::from_f64_rows(&[&[0.0, c12], &[c21, 0.0]]).unwrap())
                .unwrap(),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[b]]).unwrap()),
        )
        .unwrap()
    }

    fn opts(cells: usize) -> KernelOptions<f64> {
        KernelOptions {
            cells,
            ..KernelOptions::default()
        }
    }

    #[test]
    fn interpolation_reproduces_linear_functions() {
        let cells = 8;
        let mut v = vec![0.0; tri(cells, cells) + 1];
        for p in 0..=cells {
            for q in 0..=p {
                v[tri(p, q)] = 1.0 + 2.0 * p as f64 / 8.0 - 3.0 * q as f64 / 8.0;
            }
        }
        for &(x, y) in &[
            (0.3, 0.1),
            (0.55, 0.55),
            (0.51, 0.5),
            (1.0, 0.0),
            (0.99, 0.98),
        ] {
            let exact = 1.0 + 2.0 * x - 3.0 * y;
            assert!(
                (interp_tri(&v, cells, x, y) - exact).abs() < 1e-12,
                "{x} {y}"
            );
        }
    }

    #[test]
    fn zero_coupling_gives_zero_kernel_in_one_sweep() {
        let k = solve_kernel(&spec2(0.0, 0.0, 0.5), &opts(32)).unwrap();
        assert_eq!(k.iterations(), 1);
        assert_eq!(k.max_abs(), 0.0);
        let s = source_matrix(&k, &spec2(0.0, 0.0, 0.5)).unwrap();
        assert!(s.is_zero());
    }

    #[test]
    fn diagonal_identity_and_structure() {
        let spec = spec2(0.6, -0.4, 0.5);
        let k = solve_kernel(&spec, &opts(32)).unwrap();
        for p in 0..=32 {
            assert!((k.get(0, 1, p, p) * 2.0 - 0.6).abs() < 1e-15);
            assert!((k.get(1, 0, p, p) * -2.0 - -0.4).abs() < 1e-15);
        }
        let s = source_matrix(&k, &spec).unwrap();
        assert!(s.leading_columns_zero());
        assert!(s.lower_triangle_max() <= 10.0 * k.residual());
    }

    #[test]
    fn residual_halves_under_refinement() {
        let spec = spec2(0.6, -0.4, 0.5);
        let r64 = solve_kernel(&spec, &opts(64)).unwrap().residual();
        let r128 = solve_kernel(&spec, &opts(128)).unwrap().residual();
        let ratio = r64 / r128;
        assert!((1.4..=2.6).contains(&ratio), "{r64} {r128} {ratio}");
    }

    #[test]
    fn contraction_for_small_coupling() {
        let k = solve_kernel(&spec2(0.8, 0.9, 0.7), &opts(32)).unwrap();
        let ch = k.changes();
        assert!(ch.windows(2).skip(1).all(|w| w[1] <= w[0]), "{ch:?}");
    }

    #[test]
    fn diagonal_coupling_rejected() {
        let spec = validate_system(
            SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap(),
            CouplingField::constant(Matrix::from_f64_rows(&[&[0.3, 0.0], &[0.0, 0.0]]).unwrap())
                .unwrap(),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap();
        assert!(matches!(
            solve_kernel(&spec, &opts(16)),
            Err(Error::DiagonalCouplingPresent(1))
        ));
    }

    #[test]
    fn variable_speeds_and_three_components() {
        let p = SpeedProfile::from_exprs(1, 2, &["2 + x", "1", "1.5 + 0.5*x"]).unwrap();
        let c = Matrix::from_f64_rows(&[&[0.0, 0.3, -0.2], &[0.4, 0.0, 0.25], &[-0.1, 0.2, 0.0]])
            .unwrap();
        let spec = validate_system(
            p,
            CouplingField::constant(c.clone()).unwrap(),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[1.0, 2.0]]).unwrap()),
        )
        .unwrap();
        let k = solve_kernel(&spec, &opts(32)).unwrap();
        assert!(k.is_finite());
        for p in 1..=32 {
            let x = p as f64 / 32.0;
            let s: Vec<f64> = (0..3).map(|i| spec.signed_speed(i, x, &[])).collect();
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        assert!((k.get(i, j, p, p) * (s[j] - s[i]) - c[(i, j)]).abs() < 1e-14);
                    }
                }
            }
        }
        let s = source_matrix(&k, &spec).unwrap();
        assert!(s.leading_columns_zero());
        assert!(s.lower_triangle_max() < 1e-8, "{}", s.lower_triangle_max());
    }
}
