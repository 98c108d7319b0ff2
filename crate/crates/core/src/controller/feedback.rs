//! Finite-time stabilizing boundary feedback built from the elimination maps,
//! the characteristic flows and the auxiliary ramps.

use crate::bmatrix::{boundary_elimination, in_class_b, EliminationMaps};
use crate::controller::ramps::AuxiliaryDynamics;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::{
    characteristic_flow, solve_forward, BoundaryContext, BoundaryControl, FlowOptions, SimOptions,
    StateAccess, Trajectory,
};
use crate::system::{GridSpec, StateField, SystemSpec};
use crate::times::{optimal_time, travel_times};

/// How far the initial datum is from the discrete compatibility conditions at
/// the corner `(t, x) = (0, 0)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompatibilityReport<T> {
    /// `max_i |w_i(0) − (B w_+(0))_i|` over `i < k`.
    pub order0: T,
    /// Mismatch of the time derivatives of both sides, computed from the
    /// equation with one-sided differences.
    pub order1: T,
    pub tolerance0: T,
    pub tolerance1: T,
}

impl<T: Scalar> CompatibilityReport<T> {
    pub fn ok(&self) -> bool {
        self.order0 <= self.tolerance0 && self.order1 <= self.tolerance1
    }
}

pub fn check_compatibility<T: Scalar>(
    spec: &SystemSpec<T>,
    w0: &StateField<T>,
) -> Result<CompatibilityReport<T>> {
    let (k, n) = (spec.k(), spec.n());
    if w0.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} components, system has {n}",
            w0.n()
        )));
    }
    let h = w0.h();
    let cells = w0.cells();
    let mut d1 = T::zero();
    let mut d2 = T::zero();
    for i in 0..n {
        let c = w0.component(i);
        for q in 0..cells {
            d1 = d1.max(((c[q + 1] - c[q]) / h).abs());
        }
        for q in 1..cells {
            d2 = d2.max(((c[q + 1] - c[q] - c[q] + c[q - 1]) / (h * h)).abs());
        }
    }
    let b = spec.b();
    let at0 = w0.node(0);
    let plus: Vec<T> = at0[k..].to_vec();
    let reflected = spec.reflection().apply(&plus);
    let order0 = (0..k)
        .map(|i| (at0[i] - reflected[i]).abs())
        .fold(T::zero(), T::max);

    // ∂_t w(0, 0) = Σ(0, w) ∂_x w + C(0) w, with forward differences in x
    let c0 = spec.coupling().eval(T::zero());
    let cw = c0.mul_vec(&at0);
    let dt: Vec<T> = (0..n)
        .map(|i| spec.signed_speed(i, T::zero(), &at0) * (w0.get(i, 1) - w0.get(i, 0)) / h + cw[i])
        .collect();
    let bdt = b.mul_vec(&dt[k..]);
    let order1 = (0..k)
        .map(|i| (dt[i] - bdt[i]).abs())
        .fold(T::zero(), T::max);

    let ten = T::lit(10.0);
    let lmax = (0..n)
        .map(|i| spec.speed(i, T::zero(), &at0))
        .fold(T::zero(), T::max);
    Ok(CompatibilityReport {
        order0,
        order1,
        tolerance0: ten * h * d1,
        tolerance1: ten * h * d2 * lmax * (T::one() + b.norm_1()),
    })
}

#[derive(Clone, Debug)]
pub struct FeedbackOptions<T> {
    /// Ramp window; defaults to `T − T_opt`.
    pub delta: Option<T>,
    /// Fail with `CompatibilityViolated` instead of only reporting it.
    pub strict: bool,
    pub flow: FlowOptions<T>,
    pub quad_tolerance: T,
}

impl<T: Scalar> Default for FeedbackOptions<T> {
    fn default() -> Self {
        Self {
            delta: None,
            strict: false,
            flow: FlowOptions::default(),
            quad_tolerance: T::lit(1e-12),
        }
    }
}

/// One state access made while evaluating the feedback, in order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeedbackAccess<T> {
    Read { component: usize, x: T },
    Write { component: usize },
}

#[derive(Clone, Debug)]
pub struct FeedbackLaw<T> {
    spec: SystemSpec<T>,
    maps: EliminationMaps<T>,
    ramps: AuxiliaryDynamics<T>,
    /// `t_{k+j}` for the controlled components (index `j < m`), at the zero
    /// state for state-dependent speeds.
    delays: Vec<T>,
    /// Constant-in-time argument positions for each level (state-independent
    /// speeds only).
    positions: Option<Vec<Vec<T>>>,
    horizon: T,
    t_opt: T,
    compatibility: CompatibilityReport<T>,
    flow: FlowOptions<T>,
}

pub fn synthesize_feedback<T: Scalar>(
    spec: &SystemSpec<T>,
    horizon: T,
    w0: &StateField<T>,
    opts: &FeedbackOptions<T>,
) -> Result<FeedbackLaw<T>> {
    let (k, m) = (spec.k(), spec.m());
    if !in_class_b(spec.b()) {
        let maps = boundary_elimination(spec.b());
        return Err(maps.err().unwrap_or(Error::NotInClassB(0)));
    }
    let maps = boundary_elimination(spec.b())?;
    let tau = travel_times(spec, opts.quad_tolerance)?;
    let t_opt = optimal_time(&tau, k, m)?;
    if !(horizon > t_opt) {
        return Err(Error::TimeTooShort {
            t: horizon.as_f64(),
            t_opt: t_opt.as_f64(),
        });
    }
    let compatibility = check_compatibility(spec, w0)?;
    if opts.strict && !compatibility.ok() {
        return Err(Error::CompatibilityViolated(format!(
            "order 0 mismatch {:.3e} (tolerance {:.3e}), order 1 mismatch {:.3e} (tolerance {:.3e})",
            compatibility.order0.as_f64(),
            compatibility.tolerance0.as_f64(),
            compatibility.order1.as_f64(),
            compatibility.tolerance1.as_f64()
        )));
    }
    let delta = opts.delta.unwrap_or(horizon - t_opt);

    // ζ_j(0) and ζ_j'(0) from the trace at x = 1 and the equation there
    let cells = w0.cells();
    let h = w0.h();
    let at1 = w0.node(cells);
    let cw = spec.coupling().eval(T::one()).mul_vec(&at1);
    let values: Vec<T> = (k..k + m).map(|c| at1[c]).collect();
    let slopes: Vec<T> = (k..k + m)
        .map(|c| {
            spec.speed(c, T::one(), &at1) * (w0.get(c, cells) - w0.get(c, cells - 1)) / h + cw[c]
        })
        .collect();
    let ramps = AuxiliaryDynamics::new(delta, &values, &slopes)?;

    let delays = tau[k..].to_vec();
    let positions = if spec.is_state_dependent() {
        None
    } else {
        let mut all = Vec::new();
        for level in 1..=maps.feedback_levels() {
            let c = k + m - level;
            let mut row = Vec::new();
            for l in k..c {
                let p = characteristic_flow(
                    spec,
                    l,
                    delays[c - k],
                    T::zero(),
                    T::zero(),
                    None,
                    &opts.flow,
                )?;
                row.push(p.position);
            }
            all.push(row);
        }
        Some(all)
    };
    Ok(FeedbackLaw {
        spec: spec.clone(),
        maps,
        ramps,
        delays,
        positions,
        horizon,
        t_opt,
        compatibility,
        flow: opts.flow,
    })
}

impl<T: Scalar> FeedbackLaw<T> {
    pub fn maps(&self) -> &EliminationMaps<T> {
        &self.maps
    }
    pub fn ramps(&self) -> &AuxiliaryDynamics<T> {
        &self.ramps
    }
    pub fn delays(&self) -> &[T] {
        &self.delays
    }
    pub fn horizon(&self) -> T {
        self.horizon
    }
    pub fn t_opt(&self) -> T {
        self.t_opt
    }
    pub fn compatibility(&self) -> &CompatibilityReport<T> {
        &self.compatibility
    }

    /// Argument positions of `level` for state-independent speeds.
    pub fn positions(&self, level: usize) -> Option<&[T]> {
        self.positions.as_ref().map(|p| p[level - 1].as_slice())
    }

    /// Boundary values `w_{k+1}(t, 1), …, w_{k+m}(t, 1)`.
    pub fn evaluate(&self, t: T, state: &StateField<T>) -> Result<Vec<T>> {
        self.evaluate_logged(t, state, None)
    }

    /// As [`evaluate`](Self::evaluate), appending every state read and
    /// boundary write to `log` in execution order.
    pub fn evaluate_logged(
        &self,
        t: T,
        state: &StateField<T>,
        mut log: Option<&mut Vec<FeedbackAccess<T>>>,
    ) -> Result<Vec<T>> {
        let (k, m) = (self.spec.k(), self.spec.m());
        let levels = self.maps.feedback_levels();
        let mut out = vec![T::zero(); m];
        for level in 1..=levels {
            let c = k + m - level;
            let zeta = self.ramps.zeta(c - k, t);
            let eta = self.ramps.eta(c - k, t);
            let mut value = zeta;
            if eta != T::one() {
                let xs = self.argument_positions(level, c, state)?;
                let mut args = Vec::with_capacity(xs.len());
                for (l, &x) in (k..c).zip(&xs) {
                    if let Some(log) = log.as_deref_mut() {
                        log.push(FeedbackAccess::Read { component: l, x });
                    }
                    args.push(state.interp(l, x));
                }
                value = value + (T::one() - eta) * self.maps.apply(level, &args);
            }
            if let Some(log) = log.as_deref_mut() {
                log.push(FeedbackAccess::Write { component: c });
            }
            out[c - k] = value;
        }
        for c in (k..k + m - levels).rev() {
            if let Some(log) = log.as_deref_mut() {
                log.push(FeedbackAccess::Write { component: c });
            }
            out[c - k] = self.ramps.zeta(c - k, t);
        }
        Ok(out)
    }

    fn argument_positions(&self, level: usize, c: usize, state: &StateField<T>) -> Result<Vec<T>> {
        if let Some(p) = &self.positions {
            return Ok(p[level - 1].clone());
        }
        let k = self.spec.k();
        let frozen: &dyn StateAccess<T> = state;
        // delay: travel time of component c from x = 1 to x = 0 in the frozen state
        let horizon = self.delays[c - k] * T::lit(4.0) + T::one();
        let run = characteristic_flow(
            &self.spec,
            c,
            T::zero(),
            T::one(),
            horizon,
            Some(frozen),
            &self.flow,
        )?;
        let delay = run.exit.map(|e| e.time).ok_or_else(|| {
            Error::NotApplicable(format!("component {} does not reach x = 0", c + 1))
        })?;
        (k..c)
            .map(|l| {
                Ok(characteristic_flow(
                    &self.spec,
                    l,
                    delay,
                    T::zero(),
                    T::zero(),
                    Some(frozen),
                    &self.flow,
                )?
                .position)
            })
            .collect()
    }
}

struct Closure<'a, T> {
    law: &'a FeedbackLaw<T>,
}

impl<T: Scalar> BoundaryControl<T> for Closure<'_, T> {
    fn boundary_values(
        &mut self,
        ctx: &BoundaryContext<T>,
        state: &StateField<T>,
    ) -> Result<Vec<T>, String> {
        self.law.evaluate(ctx.t, state).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StabilizationReport<T> {
    pub initial_linf: T,
    pub terminal_linf: T,
    /// `terminal_linf / initial_linf` (zero for a zero datum).
    pub relative_terminal: T,
    /// `(threshold, first time the relative ∞-norm is below it)`.
    pub first_below: Vec<(T, Option<T>)>,
}

pub const REPORT_THRESHOLDS: [f64; 2] = [1e-2, 1e-3];

pub fn stabilization_report<T: Scalar>(traj: &Trajectory<T>) -> StabilizationReport<T> {
    let initial_linf = traj.norms[0].linf_total();
    let terminal_linf = traj
        .norms
        .last()
        .map(|s| s.linf_total())
        .unwrap_or(initial_linf);
    let rel = |v: T| {
        if initial_linf > T::zero() {
            v / initial_linf
        } else {
            T::zero()
        }
    };
    let first_below = REPORT_THRESHOLDS
        .iter()
        .map(|&th| {
            let th = T::lit(th);
            (
                th,
                traj.norms
                    .iter()
                    .find(|s| rel(s.linf_total()) < th)
                    .map(|s| s.t),
            )
        })
        .collect();
    StabilizationReport {
        initial_linf,
        terminal_linf,
        relative_terminal: rel(terminal_linf),
        first_below,
    }
}

/// Runs the closed loop on `[0, grid.horizon()]`.
pub fn run_closed_loop<T: Scalar>(
    spec: &SystemSpec<T>,
    law: &FeedbackLaw<T>,
    w0: &StateField<T>,
    grid: &GridSpec<T>,
    opts: &SimOptions,
) -> Result<(Trajectory<T>, StabilizationReport<T>)> {
    let mut closure = Closure { law };
    let traj = solve_forward(spec, w0, &mut closure, grid, opts)?;
    let report = stabilization_report(&traj);
    Ok((traj, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::system::{validate_system, CouplingField, ReflectionMatrix, SpeedProfile};

    fn spec(k: usize, m: usize, lambda: &[f64], b: &[&[f64]]) -> SystemSpec<f64> {
        validate_system(
            SpeedProfile::constant(k, m, lambda).unwrap(),
            CouplingField::zero(k + m),
            ReflectionMatrix::new(Matrix::from_f64_rows(b).unwrap()),
        )
        .unwrap()
    }

    fn smooth(n: usize, cells: usize) -> StateField<f64> {
        StateField::from_fn(n, cells, |i, x: f64| {
            0.1 * ((i as f64 + 1.0) * std::f64::consts::PI * x).sin() + 0.05 * x
        })
    }

    #[test]
    fn one_by_one_is_pure_ramp() {
        let s = spec(1, 1, &[1.0, 1.0], &[&[0.5]]);
        let w0 = smooth(2, 100);
        let law = synthesize_feedback(&s, 2.2, &w0, &FeedbackOptions::default()).unwrap();
        assert_eq!(law.maps().feedback_levels(), 0);
        assert!((law.ramps().delta - 0.2).abs() < 1e-12);
        assert_eq!(law.evaluate(0.0, &w0).unwrap()[0], w0.get(1, 100));
        assert_eq!(law.evaluate(0.11, &w0).unwrap()[0], 0.0);
    }

    #[test]
    fn two_channel_delay_and_position() {
        let s = spec(1, 2, &[1.0, 1.0, 2.0], &[&[1.0, 2.0]]);
        let w0 = smooth(3, 100);
        let law = synthesize_feedback(&s, 1.7, &w0, &FeedbackOptions::default()).unwrap();
        assert!((law.delays()[1] - 0.5).abs() < 1e-12);
        let x = law.positions(1).unwrap();
        assert_eq!(x.len(), 1);
        assert!((x[0] - 0.5).abs() < 1e-10);
        // after the ramps: w_3(t, 1) = −0.5 · w_2(t, 0.5), w_2(t, 1) = 0
        let v = law.evaluate(1.0, &w0).unwrap();
        assert!((v[1] + 0.5 * w0.interp(1, 0.5)).abs() < 1e-12);
        assert_eq!(v[0], 0.0);
    }

    #[test]
    fn rejects_short_time_and_bad_b() {
        let s = spec(1, 1, &[1.0, 1.0], &[&[0.5]]);
        let w0 = smooth(2, 50);
        assert!(matches!(
            synthesize_feedback(&s, 2.0, &w0, &FeedbackOptions::default()),
            Err(Error::TimeTooShort { .. })
        ));
        let s = spec(1, 2, &[1.0, 1.0, 2.0], &[&[1.0, 0.0]]);
        assert!(matches!(
            synthesize_feedback(&s, 3.0, &smooth(3, 50), &FeedbackOptions::default()),
            Err(Error::NotInClassB(1))
        ));
    }

    #[test]
    fn evaluation_order_is_outermost_first() {
        let s = spec(
            2,
            3,
            &[2.0, 1.0, 1.0, 1.5, 3.0],
            &[&[1.0, 0.5, 2.0], &[0.3, 1.0, 1.0]],
        );
        let w0 = smooth(5, 60);
        let law = synthesize_feedback(&s, 10.0, &w0, &FeedbackOptions::default()).unwrap();
        let mut log = Vec::new();
        law.evaluate_logged(5.0, &w0, Some(&mut log)).unwrap();
        let writes: Vec<usize> = log
            .iter()
            .filter_map(|a| {
                if let FeedbackAccess::Write { component } = a {
                    Some(*component)
                } else {
                    None
                }
            })
            .collect();
        assert_eq!(writes, vec![4, 3, 2]);
        for (pos, a) in log.iter().enumerate() {
            if let FeedbackAccess::Read { component, x } = *a {
                let written_later = log[pos..]
                    .iter()
                    .any(|b| *b == FeedbackAccess::Write { component });
                assert!(
                    !(written_later && x >= 1.0),
                    "read of w{} at x = 1 before it is assigned",
                    component + 1
                );
            }
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let s = spec(1, 2, &[1.0, 1.0, 2.0], &[&[1.0, 2.0]]);
        let w0 = StateField::zeros(3, 100);
        let law = synthesize_feedback(&s, 1.7, &w0, &FeedbackOptions::default()).unwrap();
        let grid = GridSpec::new(100, 0.9, 1.7).unwrap();
        let (traj, rep) = run_closed_loop(&s, &law, &w0, &grid, &SimOptions::default()).unwrap();
        assert_eq!(traj.final_state().max_abs(), 0.0);
        assert_eq!(rep.terminal_linf, 0.0);
    }

    #[test]
    fn compatibility_detects_corner_mismatch() {
        let s = spec(1, 1, &[1.0, 1.0], &[&[0.5]]);
        let ok = StateField::from_fn(2, 200, |i, x: f64| {
            if i == 0 {
                0.5 * (x + 1.0).cos()
            } else {
                (1.0 - x).cos()
            }
        });
        let rep = check_compatibility(&s, &ok).unwrap();
        assert!(rep.order0 < 1e-15);
        assert!(rep.ok(), "{rep:?}");
        let bad = StateField::from_fn(2, 200, |i, x: f64| if i == 0 { 1.0 + x } else { x.cos() });
        let rep = check_compatibility(&s, &bad).unwrap();
        assert!(!rep.ok());
        let strict = FeedbackOptions {
            strict: true,
            ..FeedbackOptions::default()
        };
        assert!(matches!(
            synthesize_feedback(&s, 2.2, &bad, &strict),
            Err(Error::CompatibilityViolated(_))
        ));
    }
}
