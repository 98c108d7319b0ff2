//! Exponential rescaling `w̃_i = exp(g_i(x)) w_i`, `g_i = ∫_0^x C_ii / Σ_ii`,
//! which removes the diagonal of the coupling.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::system::{interp_uniform, CouplingField, StateField, SystemSpec};

const TABLE_CELLS: usize = 4096;

#[derive(Clone, Debug)]
enum Exponent<T> {
    Zero,
    Linear(T),
    /// Samples of `g_i` on a uniform grid of `[0, 1]`.
    Table(Vec<T>),
}

impl<T: Scalar> Exponent<T> {
    fn eval(&self, x: T) -> T {
        match self {
            Exponent::Zero => T::zero(),
            Exponent::Linear(slope) => *slope * x,
            Exponent::Table(samples) => interp_uniform(samples, x),
        }
    }
}

/// Record of the rescaling, used to move states between the two variables.
#[derive(Clone, Debug)]
pub struct DiagonalGauge<T> {
    exponents: Vec<Exponent<T>>,
}

impl<T: Scalar> DiagonalGauge<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            exponents: vec![Exponent::Zero; n],
        }
    }

    pub fn is_identity(&self) -> bool {
        self.exponents.iter().all(|e| matches!(e, Exponent::Zero))
    }

    /// `g_i(x)`.
    pub fn exponent(&self, i: usize, x: T) -> T {
        self.exponents[i].eval(x)
    }

    /// `exp(g_i(x))`.
    pub fn multiplier(&self, i: usize, x: T) -> T {
        self.exponent(i, x).exp()
    }

    /// Original to gauged variables.
    pub fn apply(&self, w: &StateField<T>) -> StateField<T> {
        self.rescale(w, T::one())
    }

    /// Gauged to original variables.
    pub fn invert(&self, w: &StateField<T>) -> StateField<T> {
        self.rescale(w, -T::one())
    }

    fn rescale(&self, w: &StateField<T>, sign: T) -> StateField<T> {
        let mut out = w.clone();
        for (i, e) in self.exponents.iter().enumerate() {
            if matches!(e, Exponent::Zero) {
                continue;
            }
            for q in 0..w.nodes() {
                let v = w.get(i, q) * (sign * e.eval(w.x(q))).exp();
                out.set(i, q, v);
            }
        }
        out
    }
}

/// Returns an equivalent spec whose coupling has a zero diagonal.
pub fn preprocess_diagonal<T: Scalar>(
    spec: &SystemSpec<T>,
) -> Result<(SystemSpec<T>, DiagonalGauge<T>)> {
    let n = spec.n();
    let coupling = spec.coupling();
    let probe: Vec<T> = (0..=64).map(|p| T::of_usize(p) / T::lit(64.0)).collect();
    let has_diag = |i: usize| probe.iter().any(|&x| coupling.eval(x)[(i, i)] != T::zero());
    if !(0..n).any(has_diag) {
        return Ok((spec.clone(), DiagonalGauge::identity(n)));
    }
    let constant_speeds = spec.profile().is_constant();
    let constant_c = probe
        .iter()
        .all(|&x| coupling.eval(x) == coupling.eval(T::zero()));
    let exponents: Vec<Exponent<T>> = (0..n)
        .map(|i| {
            if !has_diag(i) {
                return Exponent::Zero;
            }
            if constant_speeds && constant_c {
                return Exponent::Linear(
                    coupling.eval(T::zero())[(i, i)] / spec.signed_speed(i, T::zero(), &[]),
                );
            }
            let h = T::one() / T::of_usize(TABLE_CELLS);
            let f = |x: T| coupling.eval(x)[(i, i)] / spec.signed_speed(i, x, &[]);
            let mut g = Vec::with_capacity(TABLE_CELLS + 1);
            g.push(T::zero());
            let mut prev = f(T::zero());
            for q in 1..=TABLE_CELLS {
                let x = T::of_usize(q) * h;
                // Simpson on each cell
                let mid = f(x - h * T::lit(0.5));
                let cur = f(x);
                let last = *g.last().expect("non-empty");
                g.push(last + h / T::lit(6.0) * (prev + T::lit(4.0) * mid + cur));
                prev = cur;
            }
            Exponent::Table(g)
        })
        .collect();
    let gauge = DiagonalGauge { exponents };
    let original = coupling.clone();
    let g = Arc::new(gauge.clone());
    let new_coupling = CouplingField::custom(n, move |x: T| {
        let c = original.eval(x);
        let e: Vec<T> = (0..n).map(|i| g.exponent(i, x)).collect();
        Matrix::from_fn(n, n, |i, l| {
            if i == l {
                T::zero()
            } else {
                c[(i, l)] * (e[i] - e[l]).exp()
            }
        })
    });
    Ok((spec.with_coupling(new_coupling)?, gauge))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{validate_system, ReflectionMatrix, ScalarFn, SpeedProfile};

    fn spec(c: Matrix<f64>, speeds: &[&str]) -> SystemSpec<f64> {
        validate_system(
            SpeedProfile::from_exprs(1, 1, speeds).unwrap(),
            CouplingField::constant(c).unwrap(),
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[0.5]]).unwrap()),
        )
        .unwrap()
    }

    #[test]
    fn diagonal_free_is_identity() {
        let s = spec(
            Matrix::from_f64_rows(&[&[0.0, 1.0], &[2.0, 0.0]]).unwrap(),
            &["1", "2"],
        );
        let (t, g) = preprocess_diagonal(&s).unwrap();
        assert!(g.is_identity());
        assert_eq!(t.coupling().eval(0.3), s.coupling().eval(0.3));
    }

    #[test]
    fn constant_case_closed_form() {
        let c = 0.7;
        let s = spec(
            Matrix::from_f64_rows(&[&[c, 0.0], &[0.0, 0.0]]).unwrap(),
            &["2", "1"],
        );
        let (t, g) = preprocess_diagonal(&s).unwrap();
        for x in [0.0, 0.25, 1.0] {
            assert!((g.multiplier(0, x) - (-c * x / 2.0f64).exp()).abs() < 1e-15);
            assert_eq!(g.multiplier(1, x), 1.0);
            assert!(t.coupling().eval(x).is_zero());
        }
    }

    #[test]
    fn variable_case_removes_diagonal_and_round_trips() {
        let p = SpeedProfile::from_exprs(1, 1, &["2 + x", "1 + 0.5*x"]).unwrap();
        let c = CouplingField::entries(
            2,
            ["sin(3*x)", "1", "x", "0.3 - x"]
                .iter()
                .map(|e| ScalarFn::expr(e).unwrap())
                .collect(),
        )
        .unwrap();
        let s = validate_system(
            p,
            c,
            ReflectionMatrix::new(Matrix::from_f64_rows(&[&[0.5]]).unwrap()),
        )
        .unwrap();
        let (t, g) = preprocess_diagonal(&s).unwrap();
        // g_1(x) = -∫ sin(3ξ)/(2+ξ) dξ, checked by quadrature
        let x = 0.8;
        let exact =
            -crate::times::adaptive_simpson(|z: f64| (3.0 * z).sin() / (2.0 + z), 0.0, x, 1e-13)
                .unwrap();
        // table interpolation error is O(h²) with h = 1/4096
        assert!((g.exponent(0, x) - exact).abs() < 1e-7);
        let ct = t.coupling().eval(0.4);
        assert_eq!(ct[(0, 0)], 0.0);
        assert_eq!(ct[(1, 1)], 0.0);
        let expected = 1.0 * (g.exponent(0, 0.4) - g.exponent(1, 0.4)).exp();
        assert!((ct[(0, 1)] - expected).abs() < 1e-14);
        let w = StateField::from_fn(2, 50, |i, x: f64| (i as f64 + 1.0) * (5.0 * x).cos());
        let back = g.invert(&g.apply(&w));
        for q in 0..=50 {
            for i in 0..2 {
                assert!((back.get(i, q) - w.get(i, q)).abs() < 1e-12);
            }
        }
    }
}
