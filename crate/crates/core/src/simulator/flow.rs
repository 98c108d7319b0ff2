//! Characteristic flows `d/dt x_j = ±λ_j(x_j, w(t, x_j))`.
//!
//! Components `0..k` move rightward (`+λ_j`), components `k..n` leftward.

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::forward::Trajectory;
use crate::system::{StateField, SystemSpec};

/// Read access to the state `w(t, x)` for state-dependent speeds.
pub trait StateAccess<T> {
    fn state_at(&self, t: T, x: T, out: &mut [T]);
}

/// A single frozen state, used for every time.
impl<T: Scalar> StateAccess<T> for StateField<T> {
    fn state_at(&self, _t: T, x: T, out: &mut [T]) {
        self.interp_all(x, out);
    }
}

/// Linear interpolation in time between stored snapshots (constant outside).
impl<T: Scalar> StateAccess<T> for Trajectory<T> {
    fn state_at(&self, t: T, x: T, out: &mut [T]) {
        let snaps = &self.snapshots;
        let idx = snaps.partition_point(|s| s.t() <= t);
        if idx == 0 {
            snaps[0].interp_all(x, out);
            return;
        }
        if idx == snaps.len() {
            snaps[idx - 1].interp_all(x, out);
            return;
        }
        let (a, b) = (&snaps[idx - 1], &snaps[idx]);
        let theta = (t - a.t()) / (b.t() - a.t());
        let mut tmp = vec![T::zero(); out.len()];
        a.interp_all(x, out);
        b.interp_all(x, &mut tmp);
        for (o, v) in out.iter_mut().zip(tmp) {
            *o = *o + theta * (v - *o);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowExit<T> {
    pub time: T,
    pub side: Side,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPoint<T> {
    pub position: T,
    /// Set when the flow reached the boundary before the query time; the
    /// position is then clipped to that boundary.
    pub exit: Option<FlowExit<T>>,
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions<T> {
    /// Maximum RK4 step.
    pub step: T,
    pub clip: bool,
}

impl<T: Scalar> Default for FlowOptions<T> {
    fn default() -> Self {
        Self {
            step: T::lit(1e-3),
            clip: true,
        }
    }
}

/// Integrates the flow of component `j` (zero-based) from `(s, ξ)` to time `t`
/// (`t < s` integrates backward) with classical RK4.
pub fn characteristic_flow<T: Scalar>(
    spec: &SystemSpec<T>,
    j: usize,
    s: T,
    xi: T,
    t: T,
    state: Option<&dyn StateAccess<T>>,
    opts: &FlowOptions<T>,
) -> Result<FlowPoint<T>> {
    if j >= spec.n() {
        return Err(Error::IndexOutOfRange {
            index: j + 1,
            max: spec.n(),
        });
    }
    if !(xi >= T::zero() && xi <= T::one()) {
        return Err(Error::OutOfDomain(xi.as_f64()));
    }
    if spec.is_state_dependent() && state.is_none() {
        return Err(Error::NotApplicable(
            "state-dependent speeds need a state accessor".into(),
        ));
    }
    if !(opts.step > T::zero()) {
        return Err(Error::NotApplicable("flow step must be positive".into()));
    }
    let sign = if j < spec.k() { T::one() } else { -T::one() };
    let mut buf = vec![T::zero(); spec.n()];
    let mut velocity = |tau: T, x: T| -> T {
        let xc = x.max(T::zero()).min(T::one());
        match (spec.is_state_dependent(), state) {
            (true, Some(acc)) => {
                acc.state_at(tau, xc, &mut buf);
                sign * spec.speed(j, xc, &buf)
            }
            _ => sign * spec.speed(j, xc, &[]),
        }
    };

    let span = t - s;
    if span == T::zero() {
        return Ok(FlowPoint {
            position: xi,
            exit: None,
        });
    }
    let steps = (span.abs() / opts.step)
        .ceil()
        .to_usize()
        .unwrap_or(1)
        .max(1);
    let dt = span / T::of_usize(steps);
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let mut x = xi;
    let mut tau = s;
    for _ in 0..steps {
        let k1 = velocity(tau, x);
        let k2 = velocity(tau + half * dt, x + half * dt * k1);
        let k3 = velocity(tau + half * dt, x + half * dt * k2);
        let k4 = velocity(tau + dt, x + dt * k3);
        let next = x + dt * sixth * (k1 + T::lit(2.0) * (k2 + k3) + k4);
        if next < T::zero() || next > T::one() {
            let (bound, side) = if next < T::zero() {
                (T::zero(), Side::Left)
            } else {
                (T::one(), Side::Right)
            };
            let frac = if next != x {
                (bound - x) / (next - x)
            } else {
                T::zero()
            };
            let exit = FlowExit {
                time: tau + frac * dt,
                side,
            };
            if !opts.clip {
                return Err(Error::FlowLeftDomain(exit.time.as_f64()));
            }
            return Ok(FlowPoint {
                position: bound,
                exit: Some(exit),
            });
        }
        x = next;
        tau = tau + dt;
    }
    Ok(FlowPoint {
        position: x,
        exit: None,
    })
}
