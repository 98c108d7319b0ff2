//! Initial data whose state at time `T < T_opt` contains a linear functional
//! that no boundary control can influence (zero coupling only).

use crate::error::{Error, Result};
use crate::linalg::{null_space, Matrix};
use crate::scalar::Scalar;
use crate::simulator::{characteristic_flow, FlowOptions, StateAccess};
use crate::system::{StateField, SystemSpec};
use crate::times::{optimal_time_with_argmax, travel_times, OptimalTerm};

/// `Σ_r weights[r] · w_{components[r]}(T, positions[r])`.
#[derive(Clone, Debug, PartialEq)]
pub struct Probe<T> {
    pub components: Vec<usize>,
    pub positions: Vec<T>,
    pub weights: Vec<T>,
    pub expected: T,
}

impl<T: Scalar> Probe<T> {
    pub fn eval(&self, state: &StateField<T>) -> T {
        self.components
            .iter()
            .zip(&self.positions)
            .zip(&self.weights)
            .map(|((&c, &x), &a)| a * state.interp(c, x))
            .sum()
    }
}

#[derive(Clone, Debug)]
pub struct Witness<T> {
    pub initial: StateField<T>,
    pub probe: Probe<T>,
    pub term: OptimalTerm,
    /// Time at which the probed signal passes through `x = 0`.
    pub crossing: T,
}

/// Compactly supported `C³` bump with peak 1 at `center`.
fn bump<T: Scalar>(x: T, center: T, radius: T) -> T {
    let s = (x - center) / radius;
    if s.abs() < T::one() {
        let v = T::one() - s * s;
        v * v * v * v
    } else {
        T::zero()
    }
}

pub fn optimality_witness<T: Scalar>(
    spec: &SystemSpec<T>,
    horizon: T,
    cells: usize,
) -> Result<Witness<T>> {
    let (k, m, n) = (spec.k(), spec.m(), spec.n());
    if !spec.coupling().is_identically_zero() {
        return Err(Error::NotApplicable(
            "the witness needs zero coupling".into(),
        ));
    }
    if spec.is_state_dependent() || spec.reflection().is_nonlinear() {
        return Err(Error::NotApplicable(
            "the witness needs a linear system".into(),
        ));
    }
    let tau = travel_times(spec, T::lit(1e-12))?;
    let (t_opt, term) = optimal_time_with_argmax(&tau, k, m)?;
    if !(horizon < t_opt) || !(horizon > T::zero()) {
        return Err(Error::NotApplicable(format!(
            "needs 0 < T < T_opt = {:.6}, got T = {:.6}",
            t_opt.as_f64(),
            horizon.as_f64()
        )));
    }
    for i in 1..=k.min(m) {
        if !crate::bmatrix::trailing_minor_invertible(spec.b(), i)?.invertible {
            return Err(Error::NotApplicable(format!(
                "trailing minor of order {i} is singular"
            )));
        }
    }
    let flow = FlowOptions {
        step: T::lit(1e-4),
        clip: true,
    };
    let none: Option<&dyn StateAccess<T>> = None;
    let h = T::one() / T::of_usize(cells);

    match term {
        OptimalTerm::Single { pos } => {
            // leftward component with data still inside at T; probe at the
            // midpoint of its remaining travel
            let x_probe = characteristic_flow(
                spec,
                pos,
                T::zero(),
                T::zero(),
                -(tau[pos] - horizon) * T::lit(0.5),
                none,
                &flow,
            )?
            .position;
            let x_start =
                characteristic_flow(spec, pos, horizon, x_probe, T::zero(), none, &flow)?.position;
            let radius = bump_radius(x_start, h);
            let initial = StateField::from_fn(n, cells, |i, x| {
                if i == pos {
                    bump(x, x_start, radius)
                } else {
                    T::zero()
                }
            });
            let probe = Probe {
                components: vec![pos],
                positions: vec![x_probe],
                weights: vec![T::one()],
                expected: T::one(),
            };
            Ok(Witness {
                initial,
                probe,
                term,
                crossing: horizon,
            })
        }
        OptimalTerm::Pair { neg, pos } => {
            let lo = (horizon - tau[neg]).max(T::zero());
            let hi = horizon.min(tau[pos]);
            let t = (lo + hi) * T::lit(0.5);
            let rows: Vec<usize> = (0..k).filter(|&i| tau[i] > horizon - t).collect();
            let unreached: Vec<usize> = (k..n).filter(|&l| tau[l] > t).collect();
            let reached: Vec<usize> = (k..n).filter(|&l| tau[l] <= t).collect();
            let b = spec.b();
            let weights = if reached.is_empty() {
                let mut a = vec![T::zero(); rows.len()];
                a[rows.iter().position(|&r| r == neg).unwrap_or(0)] = T::one();
                a
            } else {
                let sub = Matrix::from_fn(reached.len(), rows.len(), |c, r| {
                    b[(rows[r], reached[c] - k)]
                });
                null_space(&sub, T::lit(1e-12))
                    .into_iter()
                    .next()
                    .ok_or_else(|| {
                        Error::NotApplicable(
                            "reachable columns leave no invisible combination".into(),
                        )
                    })?
            };
            let amplitudes: Vec<T> = unreached
                .iter()
                .map(|&l| {
                    rows.iter()
                        .zip(&weights)
                        .map(|(&r, &a)| a * b[(r, l - k)])
                        .sum()
                })
                .collect();
            let seen: T = amplitudes.iter().map(|&c| c * c).sum();
            if !(seen > T::epsilon()) {
                return Err(Error::NotApplicable(
                    "invisible combination does not see the uncontrolled data".into(),
                ));
            }
            // unit expected probe value
            let amplitudes: Vec<T> = amplitudes.iter().map(|&c| c / seen).collect();
            // starting points of the uncontrolled leftward data reaching x = 0 at t
            let starts: Vec<T> = unreached
                .iter()
                .map(|&l| {
                    Ok(
                        characteristic_flow(spec, l, t, T::zero(), T::zero(), none, &flow)?
                            .position,
                    )
                })
                .collect::<Result<_>>()?;
            let positions: Vec<T> = rows
                .iter()
                .map(|&r| {
                    Ok(characteristic_flow(spec, r, t, T::zero(), horizon, none, &flow)?.position)
                })
                .collect::<Result<_>>()?;
            let radius = starts
                .iter()
                .map(|&s| bump_radius(s, h))
                .fold(T::infinity(), T::min);
            let mut initial = StateField::zeros(n, cells);
            for ((&l, &s), &c) in unreached.iter().zip(&starts).zip(&amplitudes) {
                for q in 0..=cells {
                    let x = initial.x(q);
                    initial.set(l, q, c * bump(x, s, radius));
                }
            }
            let probe = Probe {
                components: rows,
                positions,
                weights,
                expected: T::one(),
            };
            Ok(Witness {
                initial,
                probe,
                term,
                crossing: t,
            })
        }
    }
}

/// Largest radius up to 0.1 that keeps the bump inside `(0, 1)`, at least a
/// few cells wide.
fn bump_radius<T: Scalar>(center: T, h: T) -> T {
    let room = center.min(T::one() - center) * T::lit(0.9);
    T::lit(0.1).min(room).max(h * T::lit(4.0))
}
