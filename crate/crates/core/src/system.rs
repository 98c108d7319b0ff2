//! System description: characteristic speeds, coupling, boundary reflection,
//! grids and discretized fields, plus validation of the speed ordering.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Default number of validation points (`4 N + 1` for the default solver
/// resolution `N = 256`).
pub const DEFAULT_VALIDATION_POINTS: usize = 4 * 256 + 1;

type PointFn<T> = Arc<dyn Fn(T, &[T]) -> T + Send + Sync>;
type MatrixFn<T> = Arc<dyn Fn(T) -> Matrix<T> + Send + Sync>;
type VectorMap<T> = Arc<dyn Fn(&[T]) -> Vec<T> + Send + Sync>;

/// Scalar function of position (and optionally of the state vector).
#[derive(Clone)]
pub enum ScalarFn<T> {
    Constant(T),
    Expr(Expr),
    /// Samples on a uniform grid of `[0, 1]`, interpolated piecewise linearly.
    Sampled(Vec<T>),
    Custom {
        f: PointFn<T>,
        state_dependent: bool,
    },
}

impl<T: Scalar> ScalarFn<T> {
    pub fn constant(v: f64) -> Self {
        ScalarFn::Constant(T::lit(v))
    }

    pub fn expr(src: &str) -> Result<Self> {
        let e = Expr::parse(src)?;
        Ok(match e.as_constant() {
            Some(c) => ScalarFn::Constant(T::lit(c)),
            None => ScalarFn::Expr(e),
        })
    }

    pub fn custom(f: impl Fn(T, &[T]) -> T + Send + Sync + 'static) -> Self {
        ScalarFn::Custom {
            f: Arc::new(f),
            state_dependent: false,
        }
    }

    pub fn custom_state(f: impl Fn(T, &[T]) -> T + Send + Sync + 'static) -> Self {
        ScalarFn::Custom {
            f: Arc::new(f),
            state_dependent: true,
        }
    }

    #[inline]
    pub fn eval(&self, x: T, w: &[T]) -> T {
        match self {
            ScalarFn::Constant(c) => *c,
            ScalarFn::Expr(e) => e.eval(x, w),
            ScalarFn::Sampled(s) => interp_uniform(s, x),
            ScalarFn::Custom { f, .. } => f(x, w),
        }
    }

    pub fn is_state_dependent(&self) -> bool {
        match self {
            ScalarFn::Expr(e) => e.state_arity() > 0,
            ScalarFn::Custom {
                state_dependent, ..
            } => *state_dependent,
            _ => false,
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalarFn::Constant(_))
    }

    fn state_arity(&self) -> usize {
        match self {
            ScalarFn::Expr(e) => e.state_arity(),
            _ => 0,
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ScalarFn<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarFn::Constant(c) => write!(f, "Constant({c:?})"),
            ScalarFn::Expr(e) => write!(f, "Expr({e})"),
            ScalarFn::Sampled(s) => write!(f, "Sampled({} samples)", s.len()),
            ScalarFn::Custom {
                state_dependent, ..
            } => write!(f, "Custom(state_dependent: {state_dependent})"),
        }
    }
}

/// Piecewise-linear interpolation of samples on a uniform grid of `[0, 1]`.
pub fn interp_uniform<T: Scalar>(samples: &[T], x: T) -> T {
    let n = samples.len();
    if n == 1 {
        return samples[0];
    }
    let cells = n - 1;
    let s = x.max(T::zero()).min(T::one()) * T::of_usize(cells);
    let i = s.floor().to_usize().unwrap_or(0).min(cells - 1);
    let frac = s - T::of_usize(i);
    if frac == T::zero() {
        return samples[i];
    }
    samples[i] + (samples[i + 1] - samples[i]) * frac
}

/// Characteristic speeds `λ_1, …, λ_{k+m}` (all positive). The first `k`
/// components travel toward `x = 1`, the last `m` toward `x = 0`.
#[derive(Clone, Debug)]
pub struct SpeedProfile<T> {
    k: usize,
    m: usize,
    lambda: Vec<ScalarFn<T>>,
}

impl<T: Scalar> SpeedProfile<T> {
    pub fn new(k: usize, m: usize, lambda: Vec<ScalarFn<T>>) -> Result<Self> {
        if k == 0 || m == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need k, m >= 1 (got k = {k}, m = {m})"
            )));
        }
        if lambda.len() != k + m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} speed functions, got {}",
                k + m,
                lambda.len()
            )));
        }
        if let Some(bad) = lambda
            .iter()
            .map(ScalarFn::state_arity)
            .find(|&a| a > k + m)
        {
            return Err(Error::DimensionMismatch(format!(
                "speed expression references w{bad} but the system has {} components",
                k + m
            )));
        }
        Ok(Self { k, m, lambda })
    }

    pub fn constant(k: usize, m: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            k,
            m,
            values.iter().map(|&v| ScalarFn::constant(v)).collect(),
        )
    }

    pub fn from_exprs(k: usize, m: usize, exprs: &[&str]) -> Result<Self> {
        Self::new(
            k,
            m,
            exprs
                .iter()
                .map(|e| ScalarFn::expr(e))
                .collect::<Result<_>>()?,
        )
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
    pub fn functions(&self) -> &[ScalarFn<T>] {
        &self.lambda
    }

    pub fn is_state_dependent(&self) -> bool {
        self.lambda.iter().any(ScalarFn::is_state_dependent)
    }

    pub fn is_constant(&self) -> bool {
        self.lambda.iter().all(ScalarFn::is_constant)
    }

    /// Positive speed `λ_i(x, w)` (zero-based component).
    #[inline]
    pub fn speed(&self, i: usize, x: T, w: &[T]) -> T {
        self.lambda[i].eval(x, w)
    }

    /// Signed speed, the `i`-th diagonal entry of `Σ(x, w)`.
    #[inline]
    pub fn signed_speed(&self, i: usize, x: T, w: &[T]) -> T {
        let s = self.speed(i, x, w);
        if i < self.k {
            -s
        } else {
            s
        }
    }
}

#[derive(Clone)]
pub enum CouplingRepr<T> {
    Constant(Matrix<T>),
    /// Row-major `n × n` closed-form entries.
    Entries(Vec<ScalarFn<T>>),
    /// One matrix per cell of a uniform grid, piecewise constant.
    Sampled(Vec<Matrix<T>>),
    Custom(MatrixFn<T>),
}

/// Coupling `γ C(x)`.
#[derive(Clone)]
pub struct CouplingField<T> {
    n: usize,
    repr: CouplingRepr<T>,
    gamma: T,
}

impl<T: Scalar> CouplingField<T> {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            repr: CouplingRepr::Constant(Matrix::zeros(n, n)),
            gamma: T::one(),
        }
    }

    pub fn constant(c: Matrix<T>) -> Result<Self> {
        if c.rows() != c.cols() {
            return Err(Error::DimensionMismatch(
                "coupling matrix must be square".into(),
            ));
        }
        Ok(Self {
            n: c.rows(),
            repr: CouplingRepr::Constant(c),
            gamma: T::one(),
        })
    }

    pub fn entries(n: usize, entries: Vec<ScalarFn<T>>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} coupling entries",
                n * n
            )));
        }
        if entries.iter().any(ScalarFn::is_state_dependent) {
            return Err(Error::DimensionMismatch(
                "coupling entries may depend on x only".into(),
            ));
        }
        if entries.iter().all(ScalarFn::is_constant) {
            let m = Matrix::from_fn(n, n, |i, j| entries[i * n + j].eval(T::zero(), &[]));
            return Self::constant(m);
        }
        Ok(Self {
            n,
            repr: CouplingRepr::Entries(entries),
            gamma: T::one(),
        })
    }

    pub fn sampled(cells: Vec<Matrix<T>>) -> Result<Self> {
        let n = cells
            .first()
            .map(Matrix::rows)
            .ok_or_else(|| Error::DimensionMismatch("no samples".into()))?;
        if cells.iter().any(|c| c.rows() != n || c.cols() != n) {
            return Err(Error::DimensionMismatch(
                "coupling samples must be n x n".into(),
            ));
        }
        Ok(Self {
            n,
            repr: CouplingRepr::Sampled(cells),
            gamma: T::one(),
        })
    }

    pub fn custom(n: usize, f: impl Fn(T) -> Matrix<T> + Send + Sync + 'static) -> Self {
        Self {
            n,
            repr: CouplingRepr::Custom(Arc::new(f)),
            gamma: T::one(),
        }
    }

    pub fn with_gamma(mut self, gamma: T) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// True when the coupling is provably identically zero.
    pub fn is_identically_zero(&self) -> bool {
        self.gamma == T::zero()
            || match &self.repr {
                CouplingRepr::Constant(c) => c.is_zero(),
                CouplingRepr::Sampled(cells) => cells.iter().all(Matrix::is_zero),
                CouplingRepr::Entries(e) => e
                    .iter()
                    .all(|f| matches!(f, ScalarFn::Constant(c) if *c == T::zero())),
                CouplingRepr::Custom(_) => false,
            }
    }

    pub fn eval(&self, x: T) -> Matrix<T> {
        let n = self.n;
        let base = match &self.repr {
            CouplingRepr::Constant(c) => c.clone(),
            CouplingRepr::Entries(e) => Matrix::from_fn(n, n, |i, j| e[i * n + j].eval(x, &[])),
            CouplingRepr::Sampled(cells) => {
                let nc = cells.len();
                let idx = (x.max(T::zero()) * T::of_usize(nc))
                    .floor()
                    .to_usize()
                    .unwrap_or(0)
                    .min(nc - 1);
                cells[idx].clone()
            }
            CouplingRepr::Custom(f) => f(x),
        };
        if self.gamma == T::one() {
            base
        } else {
            base.scale(self.gamma)
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for CouplingField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.repr {
            CouplingRepr::Constant(_) => "constant",
            CouplingRepr::Entries(_) => "closed-form",
            CouplingRepr::Sampled(_) => "sampled",
            CouplingRepr::Custom(_) => "custom",
        };
        write!(
            f,
            "CouplingField({kind}, n = {}, gamma = {:?})",
            self.n, self.gamma
        )
    }
}

/// Boundary relation `w_-(t, 0) = B w_+(t, 0)`, optionally nonlinear with
/// linearization `B`.
#[derive(Clone)]
pub struct ReflectionMatrix<T> {
    b: Matrix<T>,
    nonlinear: Option<VectorMap<T>>,
}

impl<T: Scalar> ReflectionMatrix<T> {
    pub fn new(b: Matrix<T>) -> Self {
        Self { b, nonlinear: None }
    }

    /// Nonlinear boundary map with its Jacobian at zero; consistency is
    /// checked by [`validate_system`].
    pub fn nonlinear(
        jacobian_at_zero: Matrix<T>,
        map: impl Fn(&[T]) -> Vec<T> + Send + Sync + 'static,
    ) -> Self {
        Self {
            b: jacobian_at_zero,
            nonlinear: Some(Arc::new(map)),
        }
    }

    pub fn matrix(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn is_nonlinear(&self) -> bool {
        self.nonlinear.is_some()
    }

    pub fn apply(&self, w_plus: &[T]) -> Vec<T> {
        match &self.nonlinear {
            Some(f) => f(w_plus),
            None => self.b.mul_vec(w_plus),
        }
    }
}

impl<T: fmt::Debug> fmt::Debug for ReflectionMatrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ReflectionMatrix({:?}, nonlinear: {})",
            self.b,
            self.nonlinear.is_some()
        )
    }
}

/// Quantities recorded when validating a system.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSummary<T> {
    pub k: usize,
    pub m: usize,
    pub points: usize,
    pub lambda_min: T,
    pub lambda_max: T,
    /// Largest difference quotient of each speed on the validation grid.
    pub lipschitz: Vec<T>,
    pub coupling_sup: T,
}

/// A validated, immutable system description.
#[derive(Clone, Debug)]
pub struct SystemSpec<T> {
    profile: SpeedProfile<T>,
    coupling: CouplingField<T>,
    reflection: ReflectionMatrix<T>,
    summary: ValidationSummary<T>,
}

/// Validates with [`DEFAULT_VALIDATION_POINTS`].
pub fn validate_system<T: Scalar>(
    profile: SpeedProfile<T>,
    coupling: CouplingField<T>,
    reflection: ReflectionMatrix<T>,
) -> Result<SystemSpec<T>> {
    validate_system_with_points(profile, coupling, reflection, DEFAULT_VALIDATION_POINTS)
}

pub fn validate_system_with_points<T: Scalar>(
    profile: SpeedProfile<T>,
    coupling: CouplingField<T>,
    reflection: ReflectionMatrix<T>,
    points: usize,
) -> Result<SystemSpec<T>> {
    let (k, m) = (profile.k, profile.m);
    let n = k + m;
    if coupling.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "coupling is {0}x{0}, system has {n} components",
            coupling.n()
        )));
    }
    let b = reflection.matrix();
    if b.rows() != k || b.cols() != m {
        return Err(Error::DimensionMismatch(format!(
            "B is {}x{}, expected {k}x{m}",
            b.rows(),
            b.cols()
        )));
    }
    if !b.is_finite() {
        return Err(Error::NonFiniteEntry("B".into()));
    }
    let points = points.max(2);
    let zero_state = vec![T::zero(); n];
    let xs: Vec<T> = (0..points)
        .map(|p| T::of_usize(p) / T::of_usize(points - 1))
        .collect();

    let mut lambda_min = T::infinity();
    let mut lambda_max = T::zero();
    let mut lipschitz = vec![T::zero(); n];
    let mut prev = vec![T::zero(); n];
    let mut coupling_sup = T::zero();
    for (p, &x) in xs.iter().enumerate() {
        let cur: Vec<T> = (0..n).map(|i| profile.speed(i, x, &zero_state)).collect();
        for (i, &v) in cur.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry(format!(
                    "lambda_{} at x = {}",
                    i + 1,
                    x.as_f64()
                )));
            }
            if v <= T::zero() {
                return Err(Error::OrderingViolated(format!(
                    "lambda_{} = {} <= 0 at x = {}",
                    i + 1,
                    v.as_f64(),
                    x.as_f64()
                )));
            }
        }
        for i in 1..k {
            if cur[i - 1] <= cur[i] {
                return Err(Error::OrderingViolated(format!(
                    "lambda_{} <= lambda_{} at x = {}",
                    i,
                    i + 1,
                    x.as_f64()
                )));
            }
        }
        for i in k + 1..n {
            if cur[i - 1] >= cur[i] {
                return Err(Error::OrderingViolated(format!(
                    "lambda_{} >= lambda_{} at x = {}",
                    i,
                    i + 1,
                    x.as_f64()
                )));
            }
        }
        for (i, &v) in cur.iter().enumerate() {
            lambda_min = lambda_min.min(v);
            lambda_max = lambda_max.max(v);
            if p > 0 {
                let q = ((v - prev[i]) / (x - xs[p - 1])).abs();
                lipschitz[i] = lipschitz[i].max(q);
            }
        }
        prev = cur;

        let c = coupling.eval(x);
        if !c.is_finite() {
            return Err(Error::NonFiniteEntry(format!("C at x = {}", x.as_f64())));
        }
        coupling_sup = coupling_sup.max(c.max_abs());
    }

    if let Some(map) = &reflection.nonlinear {
        check_nonlinear_boundary(map.as_ref(), b)?;
    }

    let summary = ValidationSummary {
        k,
        m,
        points,
        lambda_min,
        lambda_max,
        lipschitz,
        coupling_sup,
    };
    Ok(SystemSpec {
        profile,
        coupling,
        reflection,
        summary,
    })
}

fn check_nonlinear_boundary<T: Scalar>(
    map: &(dyn Fn(&[T]) -> Vec<T> + Send + Sync),
    b: &Matrix<T>,
) -> Result<()> {
    let (k, m) = (b.rows(), b.cols());
    let zero = vec![T::zero(); m];
    let at_zero = map(&zero);
    if at_zero.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "nonlinear boundary map returns {} values, expected {k}",
            at_zero.len()
        )));
    }
    let tol = T::epsilon().sqrt() * T::lit(10.0);
    if at_zero.iter().any(|v| v.abs() > tol) {
        return Err(Error::DimensionMismatch(
            "nonlinear boundary map must vanish at 0".into(),
        ));
    }
    let eps = T::epsilon().cbrt();
    let scale = b.max_abs().max(T::one());
    for j in 0..m {
        let mut plus = zero.clone();
        let mut minus = zero.clone();
        plus[j] = eps;
        minus[j] = -eps;
        let (fp, fm) = (map(&plus), map(&minus));
        for i in 0..k {
            let d = (fp[i] - fm[i]) / (eps + eps);
            if (d - b[(i, j)]).abs() > tol * T::lit(100.0) * scale {
                return Err(Error::DimensionMismatch(format!(
                    "Jacobian of the boundary map at 0 differs from B at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

impl<T: Scalar> SystemSpec<T> {
    pub fn k(&self) -> usize {
        self.profile.k
    }
    pub fn m(&self) -> usize {
        self.profile.m
    }
    pub fn n(&self) -> usize {
        self.profile.k + self.profile.m
    }
    pub fn profile(&self) -> &SpeedProfile<T> {
        &self.profile
    }
    pub fn coupling(&self) -> &CouplingField<T> {
        &self.coupling
    }
    pub fn reflection(&self) -> &ReflectionMatrix<T> {
        &self.reflection
    }
    pub fn b(&self) -> &Matrix<T> {
        self.reflection.matrix()
    }
    pub fn summary(&self) -> &ValidationSummary<T> {
        &self.summary
    }
    pub fn lambda_min(&self) -> T {
        self.summary.lambda_min
    }
    pub fn lambda_max(&self) -> T {
        self.summary.lambda_max
    }
    pub fn is_state_dependent(&self) -> bool {
        self.profile.is_state_dependent()
    }

    /// Re-runs validation on the stored inputs.
    pub fn revalidate(&self) -> Result<Self> {
        validate_system_with_points(
            self.profile.clone(),
            self.coupling.clone(),
            self.reflection.clone(),
            self.summary.points,
        )
    }

    /// Same speeds and boundary, different coupling.
    pub fn with_coupling(&self, coupling: CouplingField<T>) -> Result<Self> {
        validate_system_with_points(
            self.profile.clone(),
            coupling,
            self.reflection.clone(),
            self.summary.points,
        )
    }

    /// Same speeds and coupling, different reflection.
    pub fn with_reflection(&self, reflection: ReflectionMatrix<T>) -> Result<Self> {
        validate_system_with_points(
            self.profile.clone(),
            self.coupling.clone(),
            reflection,
            self.summary.points,
        )
    }

    #[inline]
    pub fn speed(&self, i: usize, x: T, w: &[T]) -> T {
        self.profile.speed(i, x, w)
    }

    #[inline]
    pub fn signed_speed(&self, i: usize, x: T, w: &[T]) -> T {
        self.profile.signed_speed(i, x, w)
    }
}

/// Signed speeds `(−λ_1, …, −λ_k, λ_{k+1}, …, λ_{k+m})` at `x` (and state `y`
/// for state-dependent profiles).
pub fn eval_speeds<T: Scalar>(spec: &SystemSpec<T>, x: T, y: Option<&[T]>) -> Result<Vec<T>> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(Error::OutOfDomain(x.as_f64()));
    }
    let n = spec.n();
    let state: &[T] = match (spec.is_state_dependent(), y) {
        (true, Some(y)) if y.len() == n => y,
        (true, _) => {
            return Err(Error::DimensionMismatch(format!(
                "state-dependent speeds need a state vector of length {n}"
            )))
        }
        (false, Some(_)) => {
            return Err(Error::DimensionMismatch(
                "speeds do not depend on the state".into(),
            ))
        }
        (false, None) => &[],
    };
    Ok((0..n).map(|i| spec.signed_speed(i, x, state)).collect())
}

/// Uniform space-time discretization of `[0, 1] × [0, T]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec<T> {
    cells: usize,
    cfl: T,
    horizon: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(cells: usize, cfl: T, horizon: T) -> Result<Self> {
        if cells < 8 {
            return Err(Error::GridMismatch(format!(
                "need at least 8 cells, got {cells}"
            )));
        }
        if !(cfl > T::zero() && cfl <= T::one()) {
            return Err(Error::GridMismatch(format!(
                "Courant number {} outside (0, 1]",
                cfl.as_f64()
            )));
        }
        if !(horizon >= T::zero()) || !horizon.is_finite() {
            return Err(Error::GridMismatch(format!(
                "invalid horizon {}",
                horizon.as_f64()
            )));
        }
        Ok(Self {
            cells,
            cfl,
            horizon,
        })
    }

    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }
    pub fn cfl(&self) -> T {
        self.cfl
    }
    pub fn horizon(&self) -> T {
        self.horizon
    }
    pub fn with_horizon(&self, horizon: T) -> Self {
        Self { horizon, ..*self }
    }
    pub fn h(&self) -> T {
        T::one() / T::of_usize(self.cells)
    }
    pub fn x(&self, q: usize) -> T {
        T::of_usize(q) / T::of_usize(self.cells)
    }
    /// `Δt = cfl · h / λ_max`.
    pub fn dt(&self, lambda_max: T) -> T {
        self.cfl * self.h() / lambda_max
    }
}

/// Discretized state `w(t, ·)` on the nodes `x_q = q h`, component-major.
#[derive(Clone, Debug, PartialEq)]
pub struct StateField<T> {
    n: usize,
    cells: usize,
    t: T,
    data: Vec<T>,
}

impl<T: Scalar> StateField<T> {
    pub fn zeros(n: usize, cells: usize) -> Self {
        Self {
            n,
            cells,
            t: T::zero(),
            data: vec![T::zero(); n * (cells + 1)],
        }
    }

    /// Samples `f(component, x)` at the grid nodes.
    pub fn from_fn(n: usize, cells: usize, mut f: impl FnMut(usize, T) -> T) -> Self {
        let mut s = Self::zeros(n, cells);
        for i in 0..n {
            for q in 0..=cells {
                let x = T::of_usize(q) / T::of_usize(cells);
                s.data[i * (cells + 1) + q] = f(i, x);
            }
        }
        s
    }

    pub fn from_components(components: Vec<Vec<T>>) -> Result<Self> {
        let n = components.len();
        let nodes = components.first().map_or(0, Vec::len);
        if n == 0 || nodes < 2 || components.iter().any(|c| c.len() != nodes) {
            return Err(Error::DimensionMismatch(
                "state components must be non-empty and equally long".into(),
            ));
        }
        let data: Vec<T> = components.into_iter().flatten().collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteEntry("state field".into()));
        }
        Ok(Self {
            n,
            cells: nodes - 1,
            t: T::zero(),
            data,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn cells(&self) -> usize {
        self.cells
    }
    pub fn nodes(&self) -> usize {
        self.cells + 1
    }
    pub fn t(&self) -> T {
        self.t
    }
    pub fn set_t(&mut self, t: T) {
        self.t = t;
    }
    pub fn with_t(mut self, t: T) -> Self {
        self.t = t;
        self
    }
    pub fn h(&self) -> T {
        T::one() / T::of_usize(self.cells)
    }
    pub fn x(&self, q: usize) -> T {
        T::of_usize(q) / T::of_usize(self.cells)
    }
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn component(&self, i: usize) -> &[T] {
        let w = self.cells + 1;
        &self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn component_mut(&mut self, i: usize) -> &mut [T] {
        let w = self.cells + 1;
        &mut self.data[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn get(&self, i: usize, q: usize) -> T {
        self.data[i * (self.cells + 1) + q]
    }

    #[inline]
    pub fn set(&mut self, i: usize, q: usize, v: T) {
        self.data[i * (self.cells + 1) + q] = v;
    }

    /// All components at node `q`.
    pub fn node(&self, q: usize) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, q)).collect()
    }

    /// Linear interpolation of component `i` at `x` (clamped to `[0, 1]`).
    pub fn interp(&self, i: usize, x: T) -> T {
        interp_uniform(self.component(i), x)
    }

    /// All components interpolated at `x`.
    pub fn interp_all(&self, x: T, out: &mut [T]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.interp(i, x);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    /// Trapezoidal L² norm of component `i`.
    pub fn l2_component(&self, i: usize) -> T {
        trapezoid_sq(self.component(i), self.h()).sqrt()
    }

    /// Trapezoidal L² norm of the whole field.
    pub fn l2(&self) -> T {
        (0..self.n)
            .map(|i| trapezoid_sq(self.component(i), self.h()))
            .sum::<T>()
            .sqrt()
    }

    pub fn linf_component(&self, i: usize) -> T {
        self.component(i)
            .iter()
            .fold(T::zero(), |a, &b| a.max(b.abs()))
    }

    pub fn scaled(&self, s: T) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v = *v * s);
        out
    }

    /// `self + s · other` on the same grid.
    pub fn axpy(&self, s: T, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        let mut out = self.clone();
        for (a, &b) in out.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
        Ok(out)
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.cells != other.cells {
            return Err(Error::GridMismatch(format!(
                "fields have shapes {}x{} and {}x{}",
                self.n,
                self.nodes(),
                other.n,
                other.nodes()
            )));
        }
        Ok(())
    }
}

fn trapezoid_sq<T: Scalar>(v: &[T], h: T) -> T {
    let n = v.len();
    if n < 2 {
        return T::zero();
    }
    let inner: T = v[1..n - 1].iter().map(|&a| a * a).sum();
    (inner + (v[0] * v[0] + v[n - 1] * v[n - 1]) * T::lit(0.5)) * h
}

/// Boundary controls `W_{k+1}, …, W_{k+m}` sampled in time, piecewise linear
/// between samples and constant outside the sampled range.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlSignal<T> {
    times: Vec<T>,
    values: Vec<Vec<T>>,
}

impl<T: Scalar> ControlSignal<T> {
    pub fn new(times: Vec<T>, values: Vec<Vec<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::DimensionMismatch(
                "control times and values must match and be non-empty".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DimensionMismatch(
                "control sample times must be strictly increasing".into(),
            ));
        }
        let m = values[0].len();
        if values.iter().any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch(
                "control samples have differing channel counts".into(),
            ));
        }
        Ok(Self { times, values })
    }

    /// Zero control on `[0, horizon]`.
    pub fn zero(m: usize, horizon: T) -> Self {
        let end = if horizon > T::zero() {
            horizon
        } else {
            T::one()
        };
        Self {
            times: vec![T::zero(), end],
            values: vec![vec![T::zero(); m]; 2],
        }
    }

    pub fn channels(&self) -> usize {
        self.values[0].len()
    }
    pub fn times(&self) -> &[T] {
        &self.times
    }
    pub fn values(&self) -> &[Vec<T>] {
        &self.values
    }

    pub fn covers(&self, horizon: T) -> bool {
        self.times[0] <= T::zero() && *self.times.last().unwrap() >= horizon
    }

    pub fn eval(&self, t: T) -> Vec<T> {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0].clone();
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1].clone();
        }
        let idx = self.times.partition_point(|&s| s <= t) - 1;
        let (t0, t1) = (self.times[idx], self.times[idx + 1]);
        let f = (t - t0) / (t1 - t0);
        self.values[idx]
            .iter()
            .zip(&self.values[idx + 1])
            .map(|(&a, &b)| a + (b - a) * f)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant_spec(
        k: usize,
        m: usize,
        lambda: &[f64],
        b: Matrix<f64>,
    ) -> Result<SystemSpec<f64>> {
        validate_system(
            SpeedProfile::constant(k, m, lambda)?,
            CouplingField::zero(k + m),
            ReflectionMatrix::new(b),
        )
    }

    #[test]
    fn validates_constant_2x2() {
        let b = Matrix::from_f64_rows(&[&[0.5]]).unwrap();
        let spec = constant_spec(1, 1, &[1.0, 1.0], b).unwrap();
        assert_eq!(spec.lambda_min(), 1.0);
        assert_eq!(spec.summary().lipschitz, vec![0.0, 0.0]);
    }

    #[test]
    fn sign_change_is_rejected() {
        let p = SpeedProfile::<f64>::from_exprs(1, 1, &["1", "1 - 2*x"]).unwrap();
        let b = ReflectionMatrix::new(Matrix::zeros(1, 1));
        let err = validate_system(p, CouplingField::zero(2), b).unwrap_err();
        assert!(matches!(err, Error::OrderingViolated(_)), "{err}");
    }

    #[test]
    fn three_component_coupling_norm() {
        let c = Matrix::from_fn(3, 3, |_, _| 1.0);
        let spec = validate_system(
            SpeedProfile::constant(2, 1, &[2.0, 1.0, 3.0]).unwrap(),
            CouplingField::constant(c).unwrap(),
            ReflectionMatrix::new(Matrix::zeros(2, 1)),
        )
        .unwrap();
        assert_eq!(spec.summary().coupling_sup, 1.0);
    }

    #[test]
    fn ordering_within_groups() {
        // lambda_1 must exceed lambda_2 when k = 2
        let err = constant_spec(2, 1, &[1.0, 2.0, 3.0], Matrix::zeros(2, 1)).unwrap_err();
        assert!(matches!(err, Error::OrderingViolated(_)));
        let err = constant_spec(1, 2, &[1.0, 3.0, 2.0], Matrix::zeros(1, 2)).unwrap_err();
        assert!(matches!(err, Error::OrderingViolated(_)));
    }

    #[test]
    fn dimension_mismatches() {
        assert!(matches!(
            constant_spec(1, 1, &[1.0, 1.0], Matrix::zeros(1, 2)),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(SpeedProfile::<f64>::constant(0, 2, &[1.0, 2.0]).is_err());
        let err = validate_system(
            SpeedProfile::<f64>::constant(1, 1, &[1.0, 1.0]).unwrap(),
            CouplingField::zero(3),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)));
    }

    #[test]
    fn non_finite_coupling() {
        let c = CouplingField::custom(2, |_x: f64| Matrix::from_fn(2, 2, |_, _| f64::NAN));
        let err = validate_system(
            SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap(),
            c,
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonFiniteEntry(_)));
    }

    #[test]
    fn eval_speeds_examples() {
        let spec = constant_spec(1, 1, &[1.0, 2.0], Matrix::zeros(1, 1)).unwrap();
        assert_eq!(eval_speeds(&spec, 0.3, None).unwrap(), vec![-1.0, 2.0]);
        assert!(matches!(
            eval_speeds(&spec, 1.5, None),
            Err(Error::OutOfDomain(_))
        ));

        let p = SpeedProfile::<f64>::from_exprs(1, 1, &["3", "1 + x"]).unwrap();
        let spec = validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap();
        assert_eq!(eval_speeds(&spec, 1.0, None).unwrap()[1], 2.0);

        let p = SpeedProfile::new(
            1,
            1,
            vec![
                ScalarFn::constant(3.0),
                ScalarFn::Sampled(vec![1.0, 2.0, 4.0]),
            ],
        )
        .unwrap();
        let spec = validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap();
        assert_eq!(eval_speeds(&spec, 0.25, None).unwrap()[1], 1.5);
        assert_eq!(eval_speeds(&spec, 0.5, None).unwrap()[1], 2.0);
    }

    #[test]
    fn state_dependent_speeds_need_state() {
        let p = SpeedProfile::<f64>::from_exprs(1, 1, &["2", "1 + 0.1*w2^2"]).unwrap();
        let spec = validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap();
        assert!(spec.is_state_dependent());
        assert!(eval_speeds(&spec, 0.5, None).is_err());
        let s = eval_speeds(&spec, 0.5, Some(&[0.0, 1.0])).unwrap();
        assert!((s[1] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn nonlinear_boundary_jacobian_checked() {
        let b = Matrix::from_f64_rows(&[&[0.5]]).unwrap();
        let ok = ReflectionMatrix::nonlinear(b.clone(), |w: &[f64]| vec![0.5 * w[0] + w[0] * w[0]]);
        let p = SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap();
        assert!(validate_system(p.clone(), CouplingField::zero(2), ok).is_ok());
        let bad = ReflectionMatrix::nonlinear(b, |w: &[f64]| vec![0.7 * w[0]]);
        assert!(validate_system(p, CouplingField::zero(2), bad).is_err());
    }

    #[test]
    fn grid_invariants() {
        assert!(GridSpec::<f64>::new(4, 0.5, 1.0).is_err());
        assert!(GridSpec::<f64>::new(16, 1.5, 1.0).is_err());
        let g = GridSpec::<f64>::new(100, 0.5, 1.0).unwrap();
        assert!((g.dt(2.0) - 0.0025).abs() < 1e-15);
    }

    #[test]
    fn control_signal_interpolates() {
        let c = ControlSignal::new(vec![0.0, 1.0], vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(c.eval(0.25), vec![0.5]);
        assert_eq!(c.eval(3.0), vec![2.0]);
        assert!(c.covers(1.0));
        assert!(ControlSignal::new(vec![0.0, 0.0], vec![vec![0.0], vec![2.0]]).is_err());
    }

    #[test]
    fn state_field_norms() {
        let s = StateField::<f64>::from_fn(2, 100, |i, _| if i == 0 { 1.0 } else { 2.0 });
        assert!((s.l2_component(0) - 1.0).abs() < 1e-14);
        assert!((s.l2() - 5f64.sqrt()).abs() < 1e-14);
        assert_eq!(s.max_abs(), 2.0);
    }
}
