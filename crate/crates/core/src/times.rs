//! Travel times and controllability-time landmarks.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::system::{ScalarFn, SystemSpec};

/// Default absolute tolerance for the travel-time quadrature.
pub const DEFAULT_QUAD_TOLERANCE: f64 = 1e-10;
const MAX_DEPTH: usize = 50;

/// Order in which the adaptive Simpson rule visits the two halves of an
/// interval. Only affects the summation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubdivisionOrder {
    LeftFirst,
    RightFirst,
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<T: Scalar>(f: impl Fn(T) -> T, a: T, b: T, tol: T) -> Result<T> {
    adaptive_simpson_ordered(f, a, b, tol, SubdivisionOrder::LeftFirst)
}

pub fn adaptive_simpson_ordered<T: Scalar>(
    f: impl Fn(T) -> T,
    a: T,
    b: T,
    tol: T,
    order: SubdivisionOrder,
) -> Result<T> {
    struct Panel<T> {
        a: T,
        b: T,
        fa: T,
        fm: T,
        fb: T,
        whole: T,
        tol: T,
        depth: usize,
    }
    let half = T::lit(0.5);
    let six = T::lit(6.0);
    let fifteen = T::lit(15.0);
    let (fa, fb) = (f(a), f(b));
    let m = (a + b) * half;
    let fm = f(m);
    let whole = (b - a) / six * (fa + T::lit(4.0) * fm + fb);
    let mut stack = vec![Panel {
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        tol,
        depth: 0,
    }];
    let mut total = T::zero();
    while let Some(p) = stack.pop() {
        let m = (p.a + p.b) * half;
        let (lm, rm) = ((p.a + m) * half, (m + p.b) * half);
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - p.a) / six * (p.fa + T::lit(4.0) * flm + p.fm);
        let right = (p.b - m) / six * (p.fm + T::lit(4.0) * frm + p.fb);
        let delta = left + right - p.whole;
        if !delta.is_finite() {
            return Err(Error::NonFiniteEntry("quadrature integrand".into()));
        }
        if delta.abs() <= fifteen * p.tol {
            total = total + left + right + delta / fifteen;
            continue;
        }
        if p.depth >= MAX_DEPTH {
            return Err(Error::QuadratureNonConvergent(MAX_DEPTH));
        }
        let l = Panel {
            a: p.a,
            b: m,
            fa: p.fa,
            fm: flm,
            fb: p.fm,
            whole: left,
            tol: p.tol * half,
            depth: p.depth + 1,
        };
        let r = Panel {
            a: m,
            b: p.b,
            fa: p.fm,
            fm: frm,
            fb: p.fb,
            whole: right,
            tol: p.tol * half,
            depth: p.depth + 1,
        };
        // the stack pops the last pushed panel first
        match order {
            SubdivisionOrder::LeftFirst => {
                stack.push(r);
                stack.push(l);
            }
            SubdivisionOrder::RightFirst => {
                stack.push(l);
                stack.push(r);
            }
        }
    }
    Ok(total)
}

/// Travel time with an error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TravelTime<T> {
    pub value: T,
    pub error_bound: T,
}

/// `τ_i = ∫_0^1 dξ / λ_i(ξ)` for every component. State-dependent speeds are
/// evaluated at the zero state.
pub fn travel_times<T: Scalar>(spec: &SystemSpec<T>, quad_tolerance: T) -> Result<Vec<T>> {
    Ok(travel_times_with_bounds(spec, quad_tolerance)?
        .into_iter()
        .map(|t| t.value)
        .collect())
}

pub fn travel_times_with_bounds<T: Scalar>(
    spec: &SystemSpec<T>,
    quad_tolerance: T,
) -> Result<Vec<TravelTime<T>>> {
    if !(quad_tolerance > T::zero()) {
        return Err(Error::NotApplicable(
            "quadrature tolerance must be positive".into(),
        ));
    }
    let zero = vec![T::zero(); spec.n()];
    spec.profile()
        .functions()
        .iter()
        .map(|lambda| match lambda {
            ScalarFn::Constant(c) => Ok(TravelTime {
                value: T::one() / *c,
                error_bound: T::zero(),
            }),
            ScalarFn::Sampled(samples) => Ok(trapezoid_reciprocal(samples)),
            other => {
                let value = adaptive_simpson(
                    |x| T::one() / other.eval(x, &zero),
                    T::zero(),
                    T::one(),
                    quad_tolerance,
                )?;
                Ok(TravelTime {
                    value,
                    error_bound: quad_tolerance,
                })
            }
        })
        .collect()
}

/// Trapezoid rule for `1/λ` on the sample grid; the bound is
/// `h² / 12 · max |f''|` with `f''` estimated by second differences.
fn trapezoid_reciprocal<T: Scalar>(samples: &[T]) -> TravelTime<T> {
    let recip: Vec<T> = samples.iter().map(|&v| T::one() / v).collect();
    let cells = recip.len().saturating_sub(1);
    if cells == 0 {
        return TravelTime {
            value: recip[0],
            error_bound: T::zero(),
        };
    }
    let h = T::one() / T::of_usize(cells);
    let inner: T = recip[1..cells].iter().copied().sum();
    let value = h * (inner + (recip[0] + recip[cells]) * T::lit(0.5));
    let curvature = recip
        .windows(3)
        .map(|w| ((w[0] - w[1] - w[1] + w[2]) / (h * h)).abs())
        .fold(T::zero(), T::max);
    TravelTime {
        value,
        error_bound: h * h / T::lit(12.0) * curvature,
    }
}

/// Which term attains the maximum defining `T_opt` (zero-based indices).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OptimalTerm {
    /// `τ_neg + τ_pos`.
    Pair { neg: usize, pos: usize },
    /// The lone `τ_{k+1}` term (only when `m ≥ k`).
    Single { pos: usize },
}

/// Candidate terms of the `T_opt` maximum.
pub fn optimal_time_terms(k: usize, m: usize) -> Vec<OptimalTerm> {
    if m >= k {
        let mut terms: Vec<OptimalTerm> = (0..k)
            .map(|i| OptimalTerm::Pair { neg: i, pos: m + i })
            .collect();
        terms.push(OptimalTerm::Single { pos: k });
        terms
    } else {
        (0..m)
            .map(|i| OptimalTerm::Pair {
                neg: k - m + i,
                pos: k + i,
            })
            .collect()
    }
}

impl OptimalTerm {
    pub fn value<T: Scalar>(&self, tau: &[T]) -> T {
        match *self {
            OptimalTerm::Pair { neg, pos } => tau[neg] + tau[pos],
            OptimalTerm::Single { pos } => tau[pos],
        }
    }
}

fn check_len<T>(tau: &[T], k: usize, m: usize) -> Result<()> {
    if k == 0 || m == 0 || tau.len() != k + m {
        return Err(Error::DimensionMismatch(format!(
            "expected {} travel times for k = {k}, m = {m}, got {}",
            k + m,
            tau.len()
        )));
    }
    Ok(())
}

/// `T_opt` together with the first term attaining it.
pub fn optimal_time_with_argmax<T: Scalar>(
    tau: &[T],
    k: usize,
    m: usize,
) -> Result<(T, OptimalTerm)> {
    check_len(tau, k, m)?;
    let mut best: Option<(T, OptimalTerm)> = None;
    for term in optimal_time_terms(k, m) {
        let v = term.value(tau);
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, term));
        }
    }
    Ok(best.expect("at least one term"))
}

pub fn optimal_time<T: Scalar>(tau: &[T], k: usize, m: usize) -> Result<T> {
    Ok(optimal_time_with_argmax(tau, k, m)?.0)
}

/// `(T_1, T_2) = (τ_k + Σ_l τ_{k+l}, τ_k + τ_{k+1})`.
pub fn legacy_times<T: Scalar>(tau: &[T], k: usize, m: usize) -> Result<(T, T)> {
    check_len(tau, k, m)?;
    let t1 = tau[k - 1] + tau[k..].iter().copied().sum::<T>();
    let t2 = tau[k - 1] + tau[k];
    Ok((t1, t2))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeReport<T> {
    pub k: usize,
    pub m: usize,
    pub tau: Vec<T>,
    pub t1: T,
    pub t2: T,
    pub topt: T,
    pub argmax: OptimalTerm,
}

pub fn time_report<T: Scalar>(spec: &SystemSpec<T>, quad_tolerance: T) -> Result<TimeReport<T>> {
    let tau = travel_times(spec, quad_tolerance)?;
    let (k, m) = (spec.k(), spec.m());
    let (topt, argmax) = optimal_time_with_argmax(&tau, k, m)?;
    let (t1, t2) = legacy_times(&tau, k, m)?;
    Ok(TimeReport {
        k,
        m,
        tau,
        t1,
        t2,
        topt,
        argmax,
    })
}

impl<T: Scalar> TimeReport<T> {
    /// Flat `key = value` listing.
    pub fn to_kv_text(&self) -> String {
        let mut s = format!("k = {}\nm = {}\n", self.k, self.m);
        for (i, t) in self.tau.iter().enumerate() {
            s.push_str(&format!("tau_{} = {:.6}\n", i + 1, t.as_f64()));
        }
        s.push_str(&format!(
            "T1 = {:.6}\nT2 = {:.6}\nT_opt = {:.6}\n",
            self.t1.as_f64(),
            self.t2.as_f64(),
            self.topt.as_f64()
        ));
        let arg = match self.argmax {
            OptimalTerm::Pair { neg, pos } => format!("tau_{} + tau_{}", neg + 1, pos + 1),
            OptimalTerm::Single { pos } => format!("tau_{}", pos + 1),
        };
        s.push_str(&format!("T_opt_term = {arg}\n"));
        s
    }
}
