//! Auxiliary variables `ζ_j`, `η_j`: C¹ cubic ramps that vanish identically
//! after `δ/2`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Cubic Hermite interpolant on `[0, end]` from `(value, slope)` at `0` to
/// `(0, 0)` at `end`; exactly zero for `t ≥ end`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ramp<T> {
    pub value: T,
    pub slope: T,
    pub end: T,
}

impl<T: Scalar> Ramp<T> {
    pub fn new(value: T, slope: T, end: T) -> Self {
        Self { value, slope, end }
    }

    pub fn eval(&self, t: T) -> T {
        if t >= self.end {
            return T::zero();
        }
        if t <= T::zero() {
            return self.value;
        }
        let s = t / self.end;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = T::lit(2.0) * s3 - T::lit(3.0) * s2 + T::one();
        let h10 = s3 - T::lit(2.0) * s2 + s;
        self.value * h00 + self.end * self.slope * h10
    }

    pub fn derivative(&self, t: T) -> T {
        if t >= self.end {
            return T::zero();
        }
        let s = t.max(T::zero()) / self.end;
        let s2 = s * s;
        let d00 = T::lit(6.0) * s2 - T::lit(6.0) * s;
        let d10 = T::lit(3.0) * s2 - T::lit(4.0) * s + T::one();
        self.value * d00 / self.end + self.slope * d10
    }
}

/// `ζ_j` and `η_j` for the controlled components `k+1, …, k+m`.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxiliaryDynamics<T> {
    pub delta: T,
    /// Indexed by controlled component `0..m`.
    pub zeta: Vec<Ramp<T>>,
    pub eta: Vec<Ramp<T>>,
}

impl<T: Scalar> AuxiliaryDynamics<T> {
    /// `values[j]`, `slopes[j]` are `ζ_j(0)` and `ζ_j'(0)`.
    pub fn new(delta: T, values: &[T], slopes: &[T]) -> Result<Self> {
        if !(delta > T::zero()) {
            return Err(Error::NotApplicable(format!(
                "ramp window δ = {} must be positive",
                delta.as_f64()
            )));
        }
        if values.len() != slopes.len() {
            return Err(Error::DimensionMismatch(
                "ramp values and slopes differ in length".into(),
            ));
        }
        let end = delta * T::lit(0.5);
        Ok(Self {
            delta,
            zeta: values
                .iter()
                .zip(slopes)
                .map(|(&v, &s)| Ramp::new(v, s, end))
                .collect(),
            eta: vec![Ramp::new(T::one(), T::zero(), end); values.len()],
        })
    }

    pub fn zeta(&self, j: usize, t: T) -> T {
        self.zeta[j].eval(t)
    }

    pub fn eta(&self, j: usize, t: T) -> T {
        self.eta[j].eval(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_end_conditions() {
        let r = Ramp::new(2.0f64, -3.0, 0.1);
        assert_eq!(r.eval(0.0), 2.0);
        assert!((r.derivative(0.0) + 3.0).abs() < 1e-12);
        assert!(r.eval(0.1 - 1e-9).abs() < 1e-12);
        assert!(r.derivative(0.1 - 1e-9).abs() < 1e-5);
        assert_eq!(r.eval(0.1), 0.0);
        assert_eq!(r.eval(5.0), 0.0);
        assert_eq!(r.derivative(0.2), 0.0);
    }

    #[test]
    fn derivative_matches_difference_quotient() {
        let r = Ramp::new(0.7f64, 1.3, 0.4);
        for &t in &[0.05, 0.1, 0.2, 0.35] {
            let fd = (r.eval(t + 1e-6) - r.eval(t - 1e-6)) / 2e-6;
            assert!((fd - r.derivative(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn eta_starts_at_one() {
        let a = AuxiliaryDynamics::new(0.2, &[0.5], &[1.0]).unwrap();
        assert_eq!(a.eta(0, 0.0), 1.0);
        assert_eq!(a.eta[0].derivative(0.0), 0.0);
        assert_eq!(a.zeta(0, 0.1), 0.0);
        assert_eq!(a.eta(0, 0.1), 0.0);
        assert!(AuxiliaryDynamics::new(0.0, &[0.5], &[1.0]).is_err());
    }
}
