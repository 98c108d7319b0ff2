//! Explicit first-order upwind solver for `∂_t w = Σ(x, w) ∂_x w + C(x) w`
//! with `w_-(t, 0) = B w_+(t, 0)` and controlled `w_+(t, 1)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::system::{ControlSignal, GridSpec, StateField, SystemSpec};

/// Information passed to a boundary control at each step.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryContext<T> {
    /// Time of the state being completed.
    pub t: T,
    pub dt: T,
    pub step: usize,
}

/// Source of the boundary values `w_{k+1}(t, 1), …, w_{k+m}(t, 1)`.
///
/// Called once per step with the updated state whose `x = 1` entries for the
/// controlled components are still those of the previous step. Must be
/// callable repeatedly from `t = 0` (the solver restarts a run when it halves
/// the time step).
pub trait BoundaryControl<T: Scalar> {
    fn boundary_values(
        &mut self,
        ctx: &BoundaryContext<T>,
        state: &StateField<T>,
    ) -> Result<Vec<T>, String>;
}

impl<T, F> BoundaryControl<T> for F
where
    T: Scalar,
    F: FnMut(&BoundaryContext<T>, &StateField<T>) -> Result<Vec<T>, String>,
{
    fn boundary_values(
        &mut self,
        ctx: &BoundaryContext<T>,
        state: &StateField<T>,
    ) -> Result<Vec<T>, String> {
        self(ctx, state)
    }
}

/// Homogeneous boundary input.
#[derive(Clone, Copy, Debug)]
pub struct ZeroControl {
    pub m: usize,
}

impl<T: Scalar> BoundaryControl<T> for ZeroControl {
    fn boundary_values(
        &mut self,
        _: &BoundaryContext<T>,
        _: &StateField<T>,
    ) -> Result<Vec<T>, String> {
        Ok(vec![T::zero(); self.m])
    }
}

impl<T: Scalar> BoundaryControl<T> for ControlSignal<T> {
    fn boundary_values(
        &mut self,
        ctx: &BoundaryContext<T>,
        _: &StateField<T>,
    ) -> Result<Vec<T>, String> {
        Ok(self.eval(ctx.t))
    }
}

#[derive(Clone, Debug)]
pub struct SimOptions {
    /// Keep every `snapshot_stride`-th state; 0 keeps only the first and last.
    pub snapshot_stride: usize,
    /// Time-step halvings allowed for state-dependent speeds.
    pub max_halvings: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            snapshot_stride: 0,
            max_halvings: 8,
        }
    }
}

impl SimOptions {
    pub fn every_step() -> Self {
        Self {
            snapshot_stride: 1,
            ..Self::default()
        }
    }
}

/// Per-component norms at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct NormSample<T> {
    pub t: T,
    pub l2: Vec<T>,
    pub linf: Vec<T>,
}

impl<T: Scalar> NormSample<T> {
    fn of(state: &StateField<T>) -> Self {
        Self {
            t: state.t(),
            l2: (0..state.n()).map(|i| state.l2_component(i)).collect(),
            linf: (0..state.n()).map(|i| state.linf_component(i)).collect(),
        }
    }

    pub fn linf_total(&self) -> T {
        self.linf.iter().fold(T::zero(), |a, &b| a.max(b))
    }

    pub fn l2_total(&self) -> T {
        self.l2.iter().map(|&v| v * v).sum::<T>().sqrt()
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory<T> {
    pub grid: GridSpec<T>,
    pub dt: T,
    pub steps: usize,
    /// Stored states, time ordered; the first is the initial datum.
    pub snapshots: Vec<StateField<T>>,
    /// `w(t_n, 0)` at every step (including `t_0`).
    pub trace_left: Vec<Vec<T>>,
    /// `w(t_n, 1)` at every step.
    pub trace_right: Vec<Vec<T>>,
    pub norms: Vec<NormSample<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn initial(&self) -> &StateField<T> {
        &self.snapshots[0]
    }

    pub fn final_state(&self) -> &StateField<T> {
        self.snapshots.last().expect("trajectory has snapshots")
    }

    pub fn time(&self, step: usize) -> T {
        T::of_usize(step) * self.dt
    }
}

enum RunError {
    Restart,
    Fatal(Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Fatal(e)
    }
}

/// Integrates the system forward on `[0, grid.horizon()]`.
pub fn solve_forward<T, C>(
    spec: &SystemSpec<T>,
    w0: &StateField<T>,
    control: &mut C,
    grid: &GridSpec<T>,
    opts: &SimOptions,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    C: BoundaryControl<T> + ?Sized,
{
    let n = spec.n();
    if w0.n() != n || w0.cells() != grid.cells() {
        return Err(Error::GridMismatch(format!(
            "initial state is {}x{}, grid expects {}x{}",
            w0.n(),
            w0.nodes(),
            n,
            grid.nodes()
        )));
    }
    if !w0.is_finite() {
        return Err(Error::NonFiniteEntry("initial state".into()));
    }
    let state_dep = spec.is_state_dependent();
    let lambda_max = if state_dep {
        (0..=grid.cells())
            .map(|q| {
                let w = w0.node(q);
                (0..n)
                    .map(|i| spec.speed(i, grid.x(q), &w))
                    .fold(T::zero(), T::max)
            })
            .fold(spec.lambda_max(), T::max)
    } else {
        spec.lambda_max()
    };
    let mut dt_target = grid.dt(lambda_max);
    let mut halvings = 0;
    loop {
        match run(spec, w0, control, grid, dt_target, opts) {
            Ok(tr) => return Ok(tr),
            Err(RunError::Restart) if halvings < opts.max_halvings => {
                halvings += 1;
                dt_target = dt_target * T::lit(0.5);
            }
            Err(RunError::Restart) => return Err(Error::CflViolation(halvings)),
            Err(RunError::Fatal(e)) => return Err(e),
        }
    }
}

fn run<T, C>(
    spec: &SystemSpec<T>,
    w0: &StateField<T>,
    control: &mut C,
    grid: &GridSpec<T>,
    dt_target: T,
    opts: &SimOptions,
) -> Result<Trajectory<T>, RunError>
where
    T: Scalar,
    C: BoundaryControl<T> + ?Sized,
{
    let (k, m, n) = (spec.k(), spec.m(), spec.n());
    let cells = grid.cells();
    let horizon = grid.horizon();
    let steps = if horizon > T::zero() {
        (horizon / dt_target).ceil().to_usize().unwrap_or(1).max(1)
    } else {
        0
    };
    let dt = if steps > 0 {
        horizon / T::of_usize(steps)
    } else {
        dt_target
    };
    let h = grid.h();
    let ratio = dt / h;
    let state_dep = spec.is_state_dependent();
    let xs: Vec<T> = (0..=cells).map(|q| grid.x(q)).collect();

    // Courant numbers; refreshed every step for state-dependent speeds.
    let mut nu: Vec<Vec<T>> = (0..n)
        .map(|i| xs.iter().map(|&x| spec.speed(i, x, &[]) * ratio).collect())
        .collect();
    let coupling = if spec.coupling().is_identically_zero() {
        None
    } else {
        Some(
            xs.iter()
                .map(|&x| spec.coupling().eval(x))
                .collect::<Vec<_>>(),
        )
    };
    let reflection = spec.reflection();

    let mut old = w0.clone().with_t(T::zero());
    let mut new = old.clone();
    let mut snapshots = vec![old.clone()];
    let mut trace_left = vec![old.node(0)];
    let mut trace_right = vec![old.node(cells)];
    let mut norms = vec![NormSample::of(&old)];
    let mut node = vec![T::zero(); n];

    for step in 1..=steps {
        let t = T::of_usize(step) * dt;
        if state_dep {
            let mut worst = T::zero();
            for (q, &x) in xs.iter().enumerate() {
                for (i, v) in node.iter_mut().enumerate() {
                    *v = old.get(i, q);
                }
                for (i, nu_i) in nu.iter_mut().enumerate() {
                    let c = spec.speed(i, x, &node) * ratio;
                    nu_i[q] = c;
                    worst = worst.max(c);
                }
            }
            if worst > T::one() {
                return Err(RunError::Restart);
            }
        }

        new.as_mut_slice().copy_from_slice(old.as_slice());
        for i in 0..n {
            let o = old.component(i);
            let c = &nu[i];
            let w = new.component_mut(i);
            if i < k {
                for q in 1..=cells {
                    w[q] = o[q] - c[q] * (o[q] - o[q - 1]);
                }
            } else {
                for q in 0..cells {
                    w[q] = o[q] + c[q] * (o[q + 1] - o[q]);
                }
            }
        }
        if let Some(cq) = &coupling {
            for (q, cm) in cq.iter().enumerate() {
                for i in 0..n {
                    let mut s = T::zero();
                    for l in 0..n {
                        s = s + cm[(i, l)] * old.get(l, q);
                    }
                    if s != T::zero() {
                        let v = new.get(i, q) + dt * s;
                        new.set(i, q, v);
                    }
                }
            }
        }

        // x = 0: incoming w_- from the outgoing trace w_+
        let w_plus: Vec<T> = (k..n).map(|i| new.get(i, 0)).collect();
        for (i, v) in reflection.apply(&w_plus).into_iter().enumerate() {
            new.set(i, 0, v);
        }
        new.set_t(t);

        // x = 1: incoming w_+ from the control
        let ctx = BoundaryContext { t, dt, step };
        let values = control.boundary_values(&ctx, &new).map_err(|reason| {
            Error::BoundaryClosureFailure {
                t: t.as_f64(),
                reason,
            }
        })?;
        if values.len() != m || values.iter().any(|v| !v.is_finite()) {
            return Err(RunError::Fatal(Error::BoundaryClosureFailure {
                t: t.as_f64(),
                reason: format!(
                    "expected {m} finite values, got {:?}",
                    values.iter().map(|v| v.as_f64()).collect::<Vec<_>>()
                ),
            }));
        }
        for (j, v) in values.into_iter().enumerate() {
            new.set(k + j, cells, v);
        }

        let sample = NormSample::of(&new);
        if sample.linf.iter().any(|v| !v.is_finite()) {
            return Err(RunError::Fatal(Error::NonFiniteState(t.as_f64())));
        }
        norms.push(sample);
        trace_left.push(new.node(0));
        trace_right.push(new.node(cells));
        std::mem::swap(&mut old, &mut new);
        if (opts.snapshot_stride > 0 && step % opts.snapshot_stride == 0) || step == steps {
            snapshots.push(old.clone());
        }
    }

    Ok(Trajectory {
        grid: *grid,
        dt,
        steps,
        snapshots,
        trace_left,
        trace_right,
        norms,
    })
}
