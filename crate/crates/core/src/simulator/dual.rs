//! Backward solver for the adjoint system `∂_t v = ∂_x(Σ v)` on `[-T, 0]`
//! with `v_-(t, 1) = 0` and the nonlocal relation at `x = 0`
//! `Σ_+(0) v_+(t, 0) = -Bᵀ Σ_-(0) v_-(t, 0) + ∫_0^1 S_{-+}ᵀ v_- + S_{++}ᵀ v_+ dx`.
//!
//! The scheme marches in `s = -t` with conservative upwind fluxes `λ_i v_i`.

use crate::backstepping::SourceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::system::{GridSpec, StateField, SystemSpec};

#[derive(Clone, Debug)]
pub struct DualTrajectory<T> {
    pub grid: GridSpec<T>,
    /// Step in `s = -t`.
    pub ds: T,
    pub steps: usize,
    /// `v(0)` first, `v(-T)` last (plus intermediate states on request).
    pub snapshots: Vec<StateField<T>>,
    /// `t_n = -n ds`.
    pub times: Vec<T>,
    /// `v_+(t_n, 1)`.
    pub observation: Vec<Vec<T>>,
}

impl<T: Scalar> DualTrajectory<T> {
    pub fn terminal(&self) -> &StateField<T> {
        self.snapshots
            .last()
            .expect("dual trajectory has snapshots")
    }

    /// `∫_{-T}^0 |v_+(t, 1)|² dt` by the trapezoid rule.
    pub fn observed_energy(&self) -> T {
        let e: Vec<T> = self
            .observation
            .iter()
            .map(|v| v.iter().map(|&a| a * a).sum())
            .collect();
        trapezoid(&e, self.ds)
    }

    /// `∫_0^1 |v(-T, x)|² dx`.
    pub fn terminal_energy(&self) -> T {
        let l2 = self.terminal().l2();
        l2 * l2
    }
}

fn trapezoid<T: Scalar>(values: &[T], h: T) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => {
            h * (values[1..n - 1].iter().copied().sum::<T>()
                + (values[0] + values[n - 1]) * T::lit(0.5))
        }
    }
}

/// Integrates from `v(0) = v0` down to `t = -grid.horizon()`.
pub fn solve_dual<T: Scalar>(
    spec: &SystemSpec<T>,
    source: &SourceMatrix<T>,
    v0: &StateField<T>,
    grid: &GridSpec<T>,
    snapshot_stride: usize,
) -> Result<DualTrajectory<T>> {
    let (k, m, n) = (spec.k(), spec.m(), spec.n());
    if spec.is_state_dependent() {
        return Err(Error::NotApplicable(
            "the dual solver needs state-independent speeds".into(),
        ));
    }
    if source.k() != k || source.m() != m {
        return Err(Error::DimensionMismatch(
            "source matrix does not match (k, m)".into(),
        ));
    }
    if v0.n() != n || v0.cells() != grid.cells() {
        return Err(Error::GridMismatch(format!(
            "dual datum is {}x{}, grid expects {}x{}",
            v0.n(),
            v0.nodes(),
            n,
            grid.nodes()
        )));
    }
    if !v0.is_finite() {
        return Err(Error::NonFiniteEntry("dual datum".into()));
    }
    let cells = grid.cells();
    let h = grid.h();
    let xs: Vec<T> = (0..=cells).map(|q| grid.x(q)).collect();
    let lambda: Vec<Vec<T>> = (0..n)
        .map(|i| xs.iter().map(|&x| spec.speed(i, x, &[])).collect())
        .collect();
    let floor = spec.lambda_min() * T::lit(1e-6);
    for p in 0..m {
        if lambda[k + p][0] < floor {
            return Err(Error::SingularBoundarySpeed(k + p + 1));
        }
    }
    let horizon = grid.horizon();
    let ds_target = grid.dt(spec.lambda_max());
    let steps = if horizon > T::zero() {
        (horizon / ds_target).ceil().to_usize().unwrap_or(1).max(1)
    } else {
        0
    };
    let ds = if steps > 0 {
        horizon / T::of_usize(steps)
    } else {
        ds_target
    };
    let r = ds / h;

    // S at the state nodes, with trapezoid weights folded in
    let weighted: Option<Vec<_>> = if source.is_zero() {
        None
    } else {
        Some(
            xs.iter()
                .enumerate()
                .map(|(q, &x)| {
                    let w = if q == 0 || q == cells {
                        h * T::lit(0.5)
                    } else {
                        h
                    };
                    source.eval(x).scale(w)
                })
                .collect(),
        )
    };
    let b = spec.b();

    let mut old = v0.clone().with_t(T::zero());
    let mut new = old.clone();
    let mut snapshots = vec![old.clone()];
    let mut times = vec![T::zero()];
    let mut observation = vec![(0..m).map(|p| old.get(k + p, cells)).collect::<Vec<_>>()];

    for step in 1..=steps {
        let t = -T::of_usize(step) * ds;
        new.as_mut_slice().copy_from_slice(old.as_slice());
        for i in 0..n {
            let o = old.component(i);
            let l = &lambda[i];
            let v = new.component_mut(i);
            if i < k {
                for q in 0..cells {
                    v[q] = o[q] + r * (l[q + 1] * o[q + 1] - l[q] * o[q]);
                }
                v[cells] = T::zero();
            } else {
                for q in 1..=cells {
                    v[q] = o[q] - r * (l[q] * o[q] - l[q - 1] * o[q - 1]);
                }
            }
        }
        for p in 0..m {
            let mut rhs = T::zero();
            for i in 0..k {
                rhs = rhs + b[(i, p)] * lambda[i][0] * new.get(i, 0);
            }
            if let Some(ws) = &weighted {
                for (q, sq) in ws.iter().enumerate() {
                    for i in 0..n {
                        // node 0 of v_+ is still the previous value here
                        rhs = rhs + sq[(i, k + p)] * new.get(i, q);
                    }
                }
            }
            new.set(k + p, 0, rhs / lambda[k + p][0]);
        }
        new.set_t(t);
        if !new.is_finite() {
            return Err(Error::NonFiniteState(t.as_f64()));
        }
        times.push(t);
        observation.push((0..m).map(|p| new.get(k + p, cells)).collect());
        std::mem::swap(&mut old, &mut new);
        if (snapshot_stride > 0 && step % snapshot_stride == 0) || step == steps {
            snapshots.push(old.clone());
        }
    }
    Ok(DualTrajectory {
        grid: *grid,
        ds,
        steps,
        snapshots,
        times,
        observation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::system::{validate_system, CouplingField, ReflectionMatrix, SpeedProfile};

    fn spec(speeds: &[&str], b: f64) -> SystemSpec<f64> {
        let p = SpeedProfile::from_exprs(1, 1, speeds).unwrap();
        validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[b]]).unwrap()),
        )
        .unwrap()
    }

    fn bump(x: f64, c: f64, w: f64) -> f64 {
        let s = (x - c) / w;
        if s.abs() < 1.0 {
            (1.0 - s * s).powi(4)
        } else {
            0.0
        }
    }

    #[test]
    fn zero_datum_stays_zero() {
        let s = spec(&["1", "1"], 0.5);
        let grid = GridSpec::new(64, 0.9, 1.0).unwrap();
        let d = solve_dual(
            &s,
            &SourceMatrix::zero(1, 1),
            &StateField::zeros(2, 64),
            &grid,
            1,
        )
        .unwrap();
        assert!(d.snapshots.iter().all(|v| v.max_abs() == 0.0));
        assert_eq!(d.observed_energy(), 0.0);
    }

    #[test]
    fn flux_balance_per_step() {
        let s = spec(&["1", "1 + x"], 0.0);
        let grid = GridSpec::new(400, 0.9, 0.2).unwrap();
        let v0 = StateField::from_fn(2, 400, |i, x| if i == 1 { bump(x, 0.8, 0.3) } else { 0.0 });
        let d = solve_dual(&s, &SourceMatrix::zero(1, 1), &v0, &grid, 1).unwrap();
        let h = grid.h();
        let mass = |v: &StateField<f64>| {
            let c = v.component(1);
            h * (c[1..400].iter().sum::<f64>() + 0.5 * (c[0] + c[400]))
        };
        for w in d.snapshots.windows(2) {
            let dm = mass(&w[1]) - mass(&w[0]);
            // outflow through x = 1 at speed λ(1) = 2
            let flux = -d.ds * 2.0 * w[0].get(1, 400);
            assert!((dm - flux).abs() < 10.0 * h * d.ds, "{dm} vs {flux}");
        }
    }

    #[test]
    fn reflection_feeds_observation() {
        // v_-(0) = bump near x = 0.5 travels to 0 in 0.5, reflects with
        // factor b into v_+, reaches x = 1 after another 1.0
        let b = 0.8;
        let s = spec(&["1", "1"], b);
        let cells = 2000;
        let grid = GridSpec::new(cells, 0.9, 2.0).unwrap();
        let v0 = StateField::from_fn(
            2,
            cells,
            |i, x| if i == 0 { bump(x, 0.5, 0.25) } else { 0.0 },
        );
        let d = solve_dual(&s, &SourceMatrix::zero(1, 1), &v0, &grid, 0).unwrap();
        let err = d
            .times
            .iter()
            .zip(&d.observation)
            .map(|(&t, obs)| {
                let sigma = -t;
                let exact = b * bump(sigma - 1.0, 0.5, 0.25);
                (obs[0] - exact).abs()
            })
            .fold(0.0, f64::max);
        assert!(err < 0.02 * b, "max error {err}");
    }

    #[test]
    fn rejects_quasilinear_specs() {
        let p = SpeedProfile::<f64>::from_exprs(1, 1, &["2", "1 + w2^2"]).unwrap();
        let s = validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap();
        let grid = GridSpec::new(16, 0.9, 1.0).unwrap();
        assert!(solve_dual(
            &s,
            &SourceMatrix::zero(1, 1),
            &StateField::zeros(2, 16),
            &grid,
            0
        )
        .is_err());
    }
}
