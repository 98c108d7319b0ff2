//! Admissibility classes of the reflection matrix and the elimination maps
//! used by the finite-time feedback.
//!
//! For a `k × m` matrix `B`, the trailing minor of order `i` is the `i × i`
//! block formed by the last `i` rows and the last `i` columns. `B` is in
//! class ℬ when the trailing minors of order `1..=min(k, m-1)` are
//! invertible, and in ℬ_e when those of order `1..=k` are.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{reciprocal_condition, Lu, Matrix};
use crate::scalar::Scalar;

/// Relative threshold on `|det|` (scaled by `max|B_ij|^i`) below which a
/// trailing minor is treated as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MinorCheck<T> {
    pub order: usize,
    pub invertible: bool,
    pub determinant: T,
    /// Reciprocal 1-norm condition number of the minor.
    pub rcond: T,
}

pub fn trailing_minor<T: Scalar>(b: &Matrix<T>, i: usize) -> Matrix<T> {
    b.block(b.rows() - i, b.rows(), b.cols() - i, b.cols())
}

pub fn trailing_minor_invertible<T: Scalar>(b: &Matrix<T>, i: usize) -> Result<MinorCheck<T>> {
    let max = b.rows().min(b.cols());
    if i == 0 || i > max {
        return Err(Error::IndexOutOfRange { index: i, max });
    }
    let minor = trailing_minor(b, i);
    let det = Lu::new(&minor)?.determinant();
    let scale = b.max_abs().powi(i as i32);
    let invertible = det.abs() > T::lit(SINGULAR_TOLERANCE) * scale && scale > T::zero();
    let rcond = if invertible {
        reciprocal_condition(&minor)?
    } else {
        T::zero()
    };
    Ok(MinorCheck {
        order: i,
        invertible,
        determinant: det,
        rcond,
    })
}

fn minors_invertible_up_to<T: Scalar>(b: &Matrix<T>, upto: usize) -> bool {
    (1..=upto).all(|i| trailing_minor_invertible(b, i).is_ok_and(|c| c.invertible))
}

/// Membership in ℬ (vacuously true when `m = 1`).
pub fn in_class_b<T: Scalar>(b: &Matrix<T>) -> bool {
    let (k, m) = (b.rows(), b.cols());
    minors_invertible_up_to(b, k.min(m.saturating_sub(1)))
}

/// Membership in ℬ_e; false when `m < k`.
pub fn in_class_be<T: Scalar>(b: &Matrix<T>) -> bool {
    let (k, m) = (b.rows(), b.cols());
    m >= k && minors_invertible_up_to(b, k)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassReport<T> {
    pub k: usize,
    pub m: usize,
    pub in_b: bool,
    pub in_be: bool,
    pub minors: Vec<MinorCheck<T>>,
    pub diagnostic: Option<String>,
}

pub fn class_report<T: Scalar>(b: &Matrix<T>) -> ClassReport<T> {
    let (k, m) = (b.rows(), b.cols());
    let minors: Vec<MinorCheck<T>> = (1..=k.min(m))
        .map(|i| trailing_minor_invertible(b, i).expect("order within range"))
        .collect();
    let in_b = in_class_b(b);
    let in_be = in_class_be(b);
    let diagnostic = if m < k {
        Some(format!(
            "m = {m} < k = {k}: trailing minors of order > {m} do not exist, so B is not in B_e"
        ))
    } else {
        minors
            .iter()
            .find(|c| !c.invertible)
            .map(|c| format!("trailing minor of order {} is singular", c.order))
    };
    ClassReport {
        k,
        m,
        in_b,
        in_be,
        minors,
        diagnostic,
    }
}

/// One level of the elimination: with `w_{k+1-j}(0) = … = w_k(0) = 0`, the
/// last `j` boundary rows give
/// `w_{k+m+1-j}(0) = Σ_l coefficients[l] · w_{k+1+l}(0)` for `l < m - j`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EliminationLevel<T> {
    pub level: usize,
    /// Zero-based component index of the eliminated unknown (`k + m - level`).
    pub target: usize,
    pub coefficients: Vec<T>,
    /// Full solution of the level's system: row `r` expresses component
    /// `k + m - level + r` in terms of the free components.
    pub block: Vec<Vec<T>>,
}

pub type UserMap<T> = Arc<dyn Fn(&[T]) -> T + Send + Sync>;

#[derive(Clone)]
pub struct EliminationMaps<T> {
    k: usize,
    m: usize,
    levels: Vec<EliminationLevel<T>>,
    user: Option<Vec<UserMap<T>>>,
}

impl<T: Scalar> EliminationMaps<T> {
    pub fn k(&self) -> usize {
        self.k
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn levels(&self) -> &[EliminationLevel<T>] {
        &self.levels
    }

    /// Number of levels used by the feedback, `min(k, m - 1)`.
    pub fn feedback_levels(&self) -> usize {
        self.k.min(self.m - 1)
    }

    pub fn has_user_maps(&self) -> bool {
        self.user.is_some()
    }

    /// Evaluates the map of `level` (1-based) on the `m - level` free values.
    pub fn apply(&self, level: usize, args: &[T]) -> T {
        if let Some(user) = &self.user {
            return user[level - 1](args);
        }
        let lvl = &self.levels[level - 1];
        debug_assert_eq!(args.len(), lvl.coefficients.len());
        lvl.coefficients
            .iter()
            .zip(args)
            .map(|(&c, &a)| c * a)
            .sum()
    }

    /// Replaces the linear maps by user-supplied ones (for a nonlinear
    /// boundary relation). Each map must vanish at zero and have the linear
    /// map as its Jacobian there.
    pub fn with_user_maps(mut self, maps: Vec<UserMap<T>>) -> Result<Self> {
        if maps.len() != self.levels.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} user maps, got {}",
                self.levels.len(),
                maps.len()
            )));
        }
        let tol = T::epsilon().sqrt() * T::lit(1000.0);
        let eps = T::epsilon().cbrt();
        for (lvl, map) in self.levels.iter().zip(&maps) {
            let d = lvl.coefficients.len();
            let zero = vec![T::zero(); d];
            if map(&zero).abs() > tol {
                return Err(Error::DimensionMismatch(format!(
                    "user map of level {} does not vanish at 0",
                    lvl.level
                )));
            }
            for l in 0..d {
                let mut p = zero.clone();
                let mut q = zero.clone();
                p[l] = eps;
                q[l] = -eps;
                let g = (map(&p) - map(&q)) / (eps + eps);
                if (g - lvl.coefficients[l]).abs() > tol * (T::one() + lvl.coefficients[l].abs()) {
                    return Err(Error::DimensionMismatch(format!(
                        "Jacobian of user map of level {} differs from the linear elimination",
                        lvl.level
                    )));
                }
            }
        }
        self.user = Some(maps);
        Ok(self)
    }
}

impl<T: fmt::Debug> fmt::Debug for EliminationMaps<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EliminationMaps")
            .field("k", &self.k)
            .field("m", &self.m)
            .field("levels", &self.levels)
            .field("user", &self.user.as_ref().map(Vec::len))
            .finish()
    }
}

/// Derives the elimination maps for levels `1..=min(k, m-1)`, plus level
/// `min(k, m)` when that trailing minor is invertible.
pub fn boundary_elimination<T: Scalar>(b: &Matrix<T>) -> Result<EliminationMaps<T>> {
    let (k, m) = (b.rows(), b.cols());
    let required = k.min(m.saturating_sub(1));
    for i in 1..=required {
        if !trailing_minor_invertible(b, i)?.invertible {
            return Err(Error::NotInClassB(i));
        }
    }
    let mut top = required;
    if k.min(m) > required && trailing_minor_invertible(b, k.min(m))?.invertible {
        top = k.min(m);
    }
    let mut levels = Vec::with_capacity(top);
    for j in 1..=top {
        let rows = (k - j, k);
        let tail = b.block(rows.0, rows.1, m - j, m);
        let head = b.block(rows.0, rows.1, 0, m - j);
        let lu = Lu::new(&tail)?;
        // tail · w_last = −head · w_free
        let x = lu.solve_matrix(&head.scale(-T::one()))?;
        let block: Vec<Vec<T>> = (0..j).map(|r| x.row(r).to_vec()).collect();
        levels.push(EliminationLevel {
            level: j,
            target: k + m - j,
            coefficients: block[0].clone(),
            block,
        });
    }
    Ok(EliminationMaps {
        k,
        m,
        levels,
        user: None,
    })
}
