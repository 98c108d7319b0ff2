//! Parameter sweeps of the least-squares null control over the coupling scale
//! and one boundary entry.

use std::io::Write;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::controller::{null_control_openloop, NullControlOptions};
use crate::error::{Error, Result};
use crate::times::{optimal_time, travel_times};

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub b: f64,
    pub horizon: f64,
    pub residual: f64,
    pub condition: f64,
    /// Error message for failed points; the numeric fields are then NaN.
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub gamma: Vec<f64>,
    pub b: Vec<f64>,
    /// Zero-based `(row, column)` of the swept boundary entry.
    pub entry: (usize, usize),
    /// Fixed horizon; `T_opt + margin` per point otherwise.
    pub horizon: Option<f64>,
    pub margin: f64,
    pub cells: usize,
    pub options: NullControlOptions<f64>,
}

impl SweepPlan {
    pub fn from_config(
        cfg: &ExperimentConfig,
        cells: Option<usize>,
        horizon: Option<f64>,
        reg: Option<f64>,
    ) -> Result<Self> {
        let sec = cfg
            .sweep
            .clone()
            .ok_or_else(|| Error::Config("sweep: section missing".into()))?;
        let base = cfg.b_matrix()?;
        let entry = match sec.b_entry {
            Some([r, c]) => {
                if r == 0 || c == 0 || r > base.rows() || c > base.cols() {
                    return Err(Error::Config(format!(
                        "sweep.b_entry: ({r}, {c}) outside the {}x{} boundary matrix",
                        base.rows(),
                        base.cols()
                    )));
                }
                (r - 1, c - 1)
            }
            None => (base.rows() - 1, base.cols() - 1),
        };
        if sec.gamma.is_empty() {
            return Err(Error::Config("sweep.gamma: empty list".into()));
        }
        let b = match sec.b {
            Some(v) if v.is_empty() => return Err(Error::Config("sweep.b: empty list".into())),
            Some(v) => v,
            None => vec![base[entry]],
        };
        Ok(Self {
            gamma: sec.gamma,
            b,
            entry,
            horizon: horizon.or(sec.horizon),
            margin: 0.2,
            cells: cells.unwrap_or(cfg.grid.cells),
            options: NullControlOptions {
                segments: cfg.nullctrl.segments,
                reg: reg.unwrap_or(cfg.nullctrl.reg),
                ..NullControlOptions::default()
            },
        })
    }

    /// Points in row-major order: `gamma` outer, `b` inner.
    pub fn points(&self) -> Vec<(f64, f64)> {
        self.gamma
            .iter()
            .flat_map(|&g| self.b.iter().map(move |&b| (g, b)))
            .collect()
    }
}

fn run_point(
    cfg: &ExperimentConfig,
    plan: &SweepPlan,
    gamma: f64,
    value: f64,
) -> Result<(f64, f64, f64)> {
    let mut b = cfg.b_matrix()?;
    b[plan.entry] = value;
    let spec = cfg.system_with(Some(gamma), Some(b))?;
    let horizon = match plan.horizon {
        Some(t) => t,
        None => optimal_time(&travel_times(&spec, 1e-12)?, spec.k(), spec.m())? + plan.margin,
    };
    let grid = cfg.grid(Some(plan.cells), horizon)?;
    let w0 = cfg.initial_state(plan.cells)?;
    let r = null_control_openloop(&spec, &w0, horizon, &grid, &plan.options)?;
    Ok((horizon, r.residual, r.condition_estimate))
}

/// Runs every point; failures become NaN rows.
pub fn run_sweep(cfg: &ExperimentConfig, plan: &SweepPlan) -> Vec<SweepRow> {
    plan.points()
        .into_par_iter()
        .map(|(gamma, b)| match run_point(cfg, plan, gamma, b) {
            Ok((horizon, residual, condition)) => SweepRow {
                gamma,
                b,
                horizon,
                residual,
                condition,
                error: None,
            },
            Err(e) => SweepRow {
                gamma,
                b,
                horizon: f64::NAN,
                residual: f64::NAN,
                condition: f64::NAN,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    writeln!(out, "gamma,b,horizon,residual,condition,error")?;
    for r in rows {
        let err = r.error.as_deref().unwrap_or("").replace(['"', ','], " ");
        writeln!(
            out,
            "{:e},{:e},{:e},{:e},{:e},{}",
            r.gamma, r.b, r.horizon, r.residual, r.condition, err
        )?;
    }
    Ok(())
}
