//! Monte Carlo estimate of the observability constant of the dual system.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::backstepping::SourceMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::simulator::solve_dual;
use crate::system::{GridSpec, StateField, SystemSpec};

/// Highest sine/cosine mode in the band-limited samples.
const MODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleKind {
    BandLimited,
    /// Single bump in one component.
    Localized,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRatio<T> {
    pub index: usize,
    pub kind: SampleKind,
    pub observed: T,
    pub terminal: T,
    /// `observed / terminal`; `+∞` when the terminal energy vanishes.
    pub ratio: T,
}

#[derive(Clone, Debug)]
pub struct ObservabilityEstimate<T> {
    /// Minimum ratio over all samples.
    pub constant: T,
    pub argmin: usize,
    pub samples: Vec<SampleRatio<T>>,
}

/// Sample `index` of the stream for `seed`: even indices band-limited, odd
/// indices localized. Normalized to unit `L²` norm.
pub fn observability_sample<T: Scalar>(
    n: usize,
    cells: usize,
    seed: u64,
    index: usize,
) -> (SampleKind, StateField<T>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let pi = T::PI();
    let (kind, mut v) = if index % 2 == 0 {
        let coeffs: Vec<Vec<(T, T)>> = (0..n)
            .map(|_| {
                (0..=MODES)
                    .map(|f| {
                        let damp = 1.0 / (1.0 + f as f64);
                        (
                            T::lit(rng.gen_range(-1.0..1.0) * damp),
                            T::lit(rng.gen_range(-1.0..1.0) * damp),
                        )
                    })
                    .collect()
            })
            .collect();
        let v = StateField::from_fn(n, cells, |i, x: T| {
            coeffs[i]
                .iter()
                .enumerate()
                .map(|(f, &(a, b))| {
                    let arg = T::of_usize(f) * pi * x;
                    a * arg.cos() + b * arg.sin()
                })
                .sum()
        });
        (SampleKind::BandLimited, v)
    } else {
        let comp = rng.gen_range(0..n);
        let radius = rng.gen_range(0.03..0.1);
        let center = rng.gen_range(radius..1.0 - radius);
        let v = StateField::from_fn(n, cells, |i, x: T| {
            let s = (x.as_f64() - center) / radius;
            if i == comp && s.abs() < 1.0 {
                T::lit((1.0 - s * s).powi(4))
            } else {
                T::zero()
            }
        });
        (SampleKind::Localized, v)
    };
    let norm = v.l2();
    if norm > T::zero() {
        v = v.scaled(T::one() / norm);
    }
    (kind, v)
}

pub fn verify_observability<T: Scalar>(
    spec: &SystemSpec<T>,
    source: &SourceMatrix<T>,
    horizon: T,
    samples: usize,
    grid: &GridSpec<T>,
    seed: u64,
) -> Result<ObservabilityEstimate<T>> {
    if samples == 0 {
        return Err(Error::NotApplicable("at least one sample is needed".into()));
    }
    let grid = grid.with_horizon(horizon);
    let ratios: Vec<SampleRatio<T>> = (0..samples)
        .into_par_iter()
        .map(|index| {
            let (kind, v0) = observability_sample(spec.n(), grid.cells(), seed, index);
            let tr = solve_dual(spec, source, &v0, &grid, 0)?;
            let observed = tr.observed_energy();
            let terminal = tr.terminal_energy();
            let ratio = if terminal > T::min_positive_value() {
                observed / terminal
            } else {
                T::infinity()
            };
            Ok(SampleRatio {
                index,
                kind,
                observed,
                terminal,
                ratio,
            })
        })
        .collect::<Result<_>>()?;
    let (argmin, constant) =
        ratios
            .iter()
            .map(|r| (r.index, r.ratio))
            .fold(
                (0, T::infinity()),
                |best, cur| if cur.1 < best.1 { cur } else { best },
            );
    Ok(ObservabilityEstimate {
        constant,
        argmin,
        samples: ratios,
    })
}
