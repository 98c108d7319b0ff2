//! Open-loop null (or exact) controls by regularized least squares over a
//! finite-dimensional control space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::scalar::Scalar;
use crate::simulator::{solve_forward, SimOptions, ZeroControl};
use crate::system::{ControlSignal, GridSpec, StateField, SystemSpec};

#[derive(Clone, Debug)]
pub struct NullControlOptions<T> {
    /// Time segments per control channel; each channel is a continuous
    /// piecewise linear function with `segments + 1` free node values.
    pub segments: usize,
    /// Tikhonov parameter, relative to the mean diagonal of the normal matrix.
    pub reg: T,
    /// Terminal target; `None` steers to zero.
    pub target: Option<StateField<T>>,
    /// Condition estimates above this are flagged.
    pub condition_cap: T,
}

impl<T: Scalar> Default for NullControlOptions<T> {
    fn default() -> Self {
        Self {
            segments: 64,
            reg: T::lit(1e-8),
            target: None,
            condition_cap: T::lit(1e12),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NullControlResult<T> {
    pub control: ControlSignal<T>,
    /// `‖w(T) − w_T‖ / ‖w0‖` in `L²`, from a re-simulation with `control`.
    pub residual: T,
    pub condition_estimate: T,
    /// Set when `condition_estimate` exceeds the cap; the control is still
    /// returned.
    pub ill_conditioned: bool,
    pub terminal: StateField<T>,
}

impl<T: Scalar> NullControlResult<T> {
    /// The `IllConditionedSystem` diagnostic, if it applies.
    pub fn warning(&self) -> Option<Error> {
        self.ill_conditioned
            .then(|| Error::IllConditionedSystem(self.condition_estimate.as_f64()))
    }
}

/// `L²(0, 1)` inner product of two fields on the same grid, trapezoid weights.
fn inner<T: Scalar>(a: &[T], b: &[T], n: usize, nodes: usize, h: T) -> T {
    let mut s = T::zero();
    for i in 0..n {
        for q in 0..nodes {
            let w = if q == 0 || q + 1 == nodes {
                h * T::lit(0.5)
            } else {
                h
            };
            s = s + w * a[i * nodes + q] * b[i * nodes + q];
        }
    }
    s
}

fn hat_signal<T: Scalar>(
    m: usize,
    segments: usize,
    horizon: T,
    channel: usize,
    node: usize,
) -> Result<ControlSignal<T>> {
    let times: Vec<T> = (0..=segments)
        .map(|r| horizon * T::of_usize(r) / T::of_usize(segments))
        .collect();
    let values = (0..=segments)
        .map(|r| {
            let mut v = vec![T::zero(); m];
            if r == node {
                v[channel] = T::one();
            }
            v
        })
        .collect();
    ControlSignal::new(times, values)
}

pub fn null_control_openloop<T: Scalar>(
    spec: &SystemSpec<T>,
    w0: &StateField<T>,
    horizon: T,
    grid: &GridSpec<T>,
    opts: &NullControlOptions<T>,
) -> Result<NullControlResult<T>> {
    if spec.is_state_dependent() || spec.reflection().is_nonlinear() {
        return Err(Error::NotApplicable(
            "least-squares null control needs a linear system".into(),
        ));
    }
    if !(horizon > T::zero()) {
        return Err(Error::NotApplicable(
            "control horizon must be positive".into(),
        ));
    }
    if opts.segments == 0 {
        return Err(Error::NotApplicable(
            "at least one control segment is needed".into(),
        ));
    }
    let (n, m) = (spec.n(), spec.m());
    let grid = grid.with_horizon(horizon);
    let nodes = grid.nodes();
    let h = grid.h();
    let target = match &opts.target {
        Some(t) => {
            t.check_same_grid(w0)?;
            t.as_slice().to_vec()
        }
        None => vec![T::zero(); n * nodes],
    };
    let sim = SimOptions::default();
    let free = solve_forward(spec, w0, &mut ZeroControl { m }, &grid, &sim)?;
    let rhs: Vec<T> = target
        .iter()
        .zip(free.final_state().as_slice())
        .map(|(&a, &b)| a - b)
        .collect();
    let data_norm = inner(w0.as_slice(), w0.as_slice(), n, nodes, h).sqrt();
    let rhs_norm = inner(&rhs, &rhs, n, nodes, h).sqrt();
    let scale = if data_norm > T::zero() {
        data_norm
    } else {
        T::one()
    };

    let basis_count = m * (opts.segments + 1);
    let zero_state = StateField::zeros(n, grid.cells());
    if rhs_norm == T::zero() {
        let control = ControlSignal::zero(m, horizon);
        return Ok(NullControlResult {
            control,
            residual: T::zero(),
            condition_estimate: T::one(),
            ill_conditioned: false,
            terminal: free.final_state().clone(),
        });
    }

    let columns: Vec<Vec<T>> = (0..basis_count)
        .into_par_iter()
        .map(|b| {
            let mut signal = hat_signal(m, opts.segments, horizon, b % m, b / m)?;
            let tr = solve_forward(spec, &zero_state, &mut signal, &grid, &sim)?;
            Ok(tr.final_state().as_slice().to_vec())
        })
        .collect::<Result<_>>()?;

    let mut normal = Matrix::zeros(basis_count, basis_count);
    for a in 0..basis_count {
        for b in a..basis_count {
            let v = inner(&columns[a], &columns[b], n, nodes, h);
            normal[(a, b)] = v;
            normal[(b, a)] = v;
        }
    }
    let rhs_vec: Vec<T> = columns
        .iter()
        .map(|c| inner(c, &rhs, n, nodes, h))
        .collect();
    let mean_diag = (0..basis_count).map(|a| normal[(a, a)]).sum::<T>() / T::of_usize(basis_count);
    let shift = opts.reg
        * if mean_diag > T::zero() {
            mean_diag
        } else {
            T::one()
        };
    for a in 0..basis_count {
        normal[(a, a)] = normal[(a, a)] + shift;
    }
    let chol = Cholesky::new(&normal)?;
    let coef = chol.solve(&rhs_vec);
    let condition_estimate = chol.condition_estimate();

    let times: Vec<T> = (0..=opts.segments)
        .map(|r| horizon * T::of_usize(r) / T::of_usize(opts.segments))
        .collect();
    let values: Vec<Vec<T>> = (0..=opts.segments)
        .map(|r| (0..m).map(|c| coef[r * m + c]).collect())
        .collect();
    let mut control = ControlSignal::new(times, values)?;
    let check = solve_forward(spec, w0, &mut control, &grid, &sim)?;
    let terminal = check.final_state().clone();
    let miss: Vec<T> = terminal
        .as_slice()
        .iter()
        .zip(&target)
        .map(|(&a, &b)| a - b)
        .collect();
    let residual = inner(&miss, &miss, n, nodes, h).sqrt() / scale;
    Ok(NullControlResult {
        control,
        residual,
        condition_estimate,
        ill_conditioned: !(condition_estimate <= opts.condition_cap),
        terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{validate_system, CouplingField, ReflectionMatrix, SpeedProfile};

    fn spec(c: f64) -> SystemSpec<f64> {
        validate_system(
            SpeedProfile::constant(1, 1, &[1.0, 1.0]).unwrap(),
            CouplingField::constant(Matrix::from_f64_rows(&[&[0.0, c], &[c, 0.0]]).unwrap())
                .unwrap(),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[0.5]]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn zero_data_zero_control() {
        let grid = GridSpec::new(100, 0.9, 2.2).unwrap();
        let r = null_control_openloop(
            &spec(0.1),
            &StateField::zeros(2, 100),
            2.2,
            &grid,
            &NullControlOptions::default(),
        )
        .unwrap();
        assert_eq!(r.residual, 0.0);
        assert!(r.control.values().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn hat_basis_is_partition_of_unity() {
        let total: f64 = (0..=4)
            .map(|r| hat_signal::<f64>(1, 4, 2.0, 0, r).unwrap().eval(0.7)[0])
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn controls_above_optimal_time() {
        let grid = GridSpec::new(100, 0.9, 2.2).unwrap();
        let w0 = StateField::from_fn(2, 100, |i, x: f64| {
            (std::f64::consts::PI * x).sin() * (1.0 + i as f64)
        });
        let opts = NullControlOptions {
            segments: 24,
            ..NullControlOptions::default()
        };
        let r = null_control_openloop(&spec(0.1), &w0, 2.2, &grid, &opts).unwrap();
        assert!(r.residual < 1e-2, "{}", r.residual);
    }

    #[test]
    fn rejects_quasilinear() {
        let s = validate_system(
            SpeedProfile::from_exprs(1, 1, &["1", "1 + w2^2"]).unwrap(),
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[0.5]]).unwrap()),
        )
        .unwrap();
        let grid = GridSpec::new(50, 0.9, 2.2).unwrap();
        assert!(null_control_openloop(
            &s,
            &StateField::zeros(2, 50),
            2.2,
            &grid,
            &NullControlOptions::default()
        )
        .is_err());
    }
}
