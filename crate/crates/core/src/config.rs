//! TOML experiment configuration.
//!
//! ```toml
//! seed = 7
//!
//! [speeds]
//! k = 1
//! m = 1
//! lambda = ["1 + x", "2"]        # expressions in x (and w1..wn)
//!
//! [coupling]                     # optional, zero when absent
//! entries = [["0", "0.1"], ["0.1", "0"]]
//! gamma = 1.0
//!
//! [boundary]
//! b = [[0.5]]
//!
//! [grid]
//! cells = 400
//! cfl = 0.9
//! horizon = 2.2
//! ```
//!
//! Command sections (`[initial]`, `[simulate]`, `[dual]`, `[kernel]`,
//! `[feedback]`, `[nullctrl]`, `[witness]`, `[observability]`, `[sweep]`,
//! `[output]`) are optional. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::linalg::Matrix;
use crate::system::{
    validate_system, ControlSignal, CouplingField, GridSpec, ReflectionMatrix, ScalarFn,
    SpeedProfile, StateField, SystemSpec,
};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub speeds: SpeedsSection,
    #[serde(default)]
    pub coupling: CouplingSection,
    pub boundary: BoundarySection,
    #[serde(default)]
    pub grid: GridSection,
    pub initial: Option<InitialSection>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub dual: DualSection,
    #[serde(default)]
    pub kernel: KernelSection,
    #[serde(default)]
    pub feedback: FeedbackSection,
    #[serde(default)]
    pub nullctrl: NullctrlSection,
    #[serde(default)]
    pub witness: WitnessSection,
    #[serde(default)]
    pub observability: ObservabilitySection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeedsSection {
    pub k: usize,
    pub m: usize,
    pub lambda: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    /// Row-major `n × n` expressions in `x`.
    pub entries: Option<Vec<Vec<String>>>,
    pub gamma: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    /// `k × m` reflection matrix.
    pub b: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    pub horizon: Option<f64>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            cells: default_cells(),
            cfl: default_cfl(),
            horizon: None,
        }
    }
}

fn default_cells() -> usize {
    400
}
fn default_cfl() -> f64 {
    0.9
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    /// One expression in `x` per component.
    pub w: Vec<String>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// One expression in `t` per control channel; zero when absent.
    pub control: Option<Vec<String>>,
    /// Write every n-th state as a binary snapshot (0: first and last only).
    #[serde(default)]
    pub snapshot_stride: usize,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualSection {
    /// Terminal datum `v(0, ·)`; a seeded random sample when absent.
    pub initial: Option<Vec<String>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSection {
    #[serde(default = "default_kernel_cells")]
    pub cells: usize,
    #[serde(default = "default_kernel_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_kernel_iters")]
    pub max_iters: usize,
}

impl Default for KernelSection {
    fn default() -> Self {
        Self {
            cells: default_kernel_cells(),
            tolerance: default_kernel_tolerance(),
            max_iters: default_kernel_iters(),
        }
    }
}

fn default_kernel_cells() -> usize {
    64
}
fn default_kernel_tolerance() -> f64 {
    1e-10
}
fn default_kernel_iters() -> usize {
    200
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub horizon: Option<f64>,
    pub delta: Option<f64>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NullctrlSection {
    pub horizon: Option<f64>,
    #[serde(default = "default_segments")]
    pub segments: usize,
    #[serde(default = "default_reg")]
    pub reg: f64,
    /// Terminal target, one expression in `x` per component.
    pub target: Option<Vec<String>>,
}

impl Default for NullctrlSection {
    fn default() -> Self {
        Self {
            horizon: None,
            segments: default_segments(),
            reg: default_reg(),
            target: None,
        }
    }
}

fn default_segments() -> usize {
    64
}
fn default_reg() -> f64 {
    1e-8
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessSection {
    pub horizon: Option<f64>,
    /// Random controls used to check the probe.
    #[serde(default = "default_witness_controls")]
    pub controls: usize,
}

impl Default for WitnessSection {
    fn default() -> Self {
        Self {
            horizon: None,
            controls: default_witness_controls(),
        }
    }
}

fn default_witness_controls() -> usize {
    20
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilitySection {
    pub horizon: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        Self {
            horizon: None,
            samples: default_samples(),
        }
    }
}

fn default_samples() -> usize {
    64
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Coupling scales.
    #[serde(default = "default_gamma")]
    pub gamma: Vec<f64>,
    /// Values for the boundary entry `b_entry`; the configured value when
    /// absent.
    pub b: Option<Vec<f64>>,
    /// 1-based `(row, column)` of the swept entry; the last entry by default.
    pub b_entry: Option<[usize; 2]>,
    pub horizon: Option<f64>,
}

fn default_gamma() -> Vec<f64> {
    vec![1.0]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: default_out() }
    }
}

fn default_out() -> String {
    "out".into()
}

fn config_err(key: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{key}: {e}"))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(&path.display().to_string(), e))?;
        Self::parse(&text)
    }

    pub fn n(&self) -> usize {
        self.speeds.k + self.speeds.m
    }

    pub fn coupling_field(&self, gamma: Option<f64>) -> Result<CouplingField<f64>> {
        let n = self.n();
        let field = match &self.coupling.entries {
            None => CouplingField::zero(n),
            Some(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(config_err(
                        "coupling.entries",
                        format!("expected a {n}x{n} array of expressions"),
                    ));
                }
                let entries = rows
                    .iter()
                    .flatten()
                    .map(|e| ScalarFn::expr(e).map_err(|err| config_err("coupling.entries", err)))
                    .collect::<Result<Vec<_>>>()?;
                CouplingField::entries(n, entries).map_err(|e| config_err("coupling.entries", e))?
            }
        };
        Ok(match gamma.or(self.coupling.gamma) {
            Some(g) => field.with_gamma(g),
            None => field,
        })
    }

    pub fn b_matrix(&self) -> Result<Matrix<f64>> {
        let (k, m) = (self.speeds.k, self.speeds.m);
        let rows = &self.boundary.b;
        if rows.len() != k || rows.iter().any(|r| r.len() != m) {
            return Err(config_err(
                "boundary.b",
                format!("expected a {k}x{m} matrix"),
            ));
        }
        Matrix::from_rows(rows).map_err(|e| config_err("boundary.b", e))
    }

    /// The validated system, optionally with a coupling scale and boundary
    /// matrix overriding the configured ones.
    pub fn system_with(
        &self,
        gamma: Option<f64>,
        b: Option<Matrix<f64>>,
    ) -> Result<SystemSpec<f64>> {
        let (k, m) = (self.speeds.k, self.speeds.m);
        if k == 0 || m == 0 {
            return Err(config_err("speeds", "k and m must be positive"));
        }
        if self.speeds.lambda.len() != k + m {
            return Err(config_err(
                "speeds.lambda",
                format!(
                    "expected {} expressions, got {}",
                    k + m,
                    self.speeds.lambda.len()
                ),
            ));
        }
        let exprs: Vec<&str> = self.speeds.lambda.iter().map(String::as_str).collect();
        let profile =
            SpeedProfile::from_exprs(k, m, &exprs).map_err(|e| config_err("speeds.lambda", e))?;
        let b = match b {
            Some(b) => b,
            None => self.b_matrix()?,
        };
        let coupling = self.coupling_field(gamma)?;
        validate_system(profile, coupling, ReflectionMatrix::new(b))
    }

    pub fn system(&self) -> Result<SystemSpec<f64>> {
        self.system_with(None, None)
    }

    pub fn grid(&self, cells: Option<usize>, horizon: f64) -> Result<GridSpec<f64>> {
        GridSpec::new(cells.unwrap_or(self.grid.cells), self.grid.cfl, horizon)
            .map_err(|e| config_err("grid", e))
    }

    /// Initial state from `[initial]`, or `0.1 sin((i+1) π x)` per component.
    pub fn initial_state(&self, cells: usize) -> Result<StateField<f64>> {
        match &self.initial {
            Some(sec) => field_from_exprs(&sec.w, self.n(), cells, "initial.w"),
            None => Ok(StateField::from_fn(self.n(), cells, |i, x: f64| {
                0.1 * ((i + 1) as f64 * std::f64::consts::PI * x).sin()
            })),
        }
    }

    /// Control signal from `[simulate] control`, sampled on `steps + 1`
    /// uniform times of `[0, horizon]`.
    pub fn control_signal(&self, horizon: f64, steps: usize) -> Result<ControlSignal<f64>> {
        let m = self.speeds.m;
        let Some(exprs) = &self.simulate.control else {
            return Ok(ControlSignal::zero(m, horizon));
        };
        if exprs.len() != m {
            return Err(config_err(
                "simulate.control",
                format!("expected {m} expressions"),
            ));
        }
        let parsed = exprs
            .iter()
            .map(|e| Expr::parse_in(e, "t").map_err(|err| config_err("simulate.control", err)))
            .collect::<Result<Vec<_>>>()?;
        let steps = steps.max(1);
        let times: Vec<f64> = (0..=steps)
            .map(|r| horizon * r as f64 / steps as f64)
            .collect();
        let values = times
            .iter()
            .map(|&t| parsed.iter().map(|e| e.eval(t, &[])).collect())
            .collect();
        ControlSignal::new(times, values)
    }
}

pub fn field_from_exprs(
    exprs: &[String],
    n: usize,
    cells: usize,
    key: &str,
) -> Result<StateField<f64>> {
    if exprs.len() != n {
        return Err(config_err(
            key,
            format!("expected {n} expressions, got {}", exprs.len()),
        ));
    }
    let parsed = exprs
        .iter()
        .map(|e| Expr::parse(e).map_err(|err| config_err(key, err)))
        .collect::<Result<Vec<_>>>()?;
    if parsed.iter().any(|e| e.state_arity() > 0) {
        return Err(config_err(key, "initial data may depend on x only"));
    }
    let field = StateField::from_fn(n, cells, |i, x: f64| parsed[i].eval(x, &[]));
    if !field.is_finite() {
        return Err(config_err(key, "expressions evaluate to non-finite values"));
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
        [speeds]
        k = 1
        m = 1
        lambda = ["1 + x", "2"]
        [boundary]
        b = [[0.5]]
    "#;

    #[test]
    fn minimal_config() {
        let c = ExperimentConfig::parse(BASE).unwrap();
        let s = c.system().unwrap();
        assert_eq!(s.n(), 2);
        assert_eq!(c.grid.cells, 400);
        assert!(s.coupling().is_identically_zero());
        let w = c.initial_state(10).unwrap();
        assert!((w.get(0, 5) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_named() {
        let text = format!("{BASE}\n[grid]\ncels = 10\n");
        let err = ExperimentConfig::parse(&text).unwrap_err().to_string();
        assert!(err.contains("cels"), "{err}");
    }

    #[test]
    fn bad_expression_names_key() {
        let text = BASE.replace("\"2\"", "\"2 +\"");
        let err = ExperimentConfig::parse(&text)
            .unwrap()
            .system()
            .unwrap_err()
            .to_string();
        assert!(err.contains("speeds.lambda"), "{err}");
    }

    #[test]
    fn control_expressions_use_t() {
        let text = format!("{BASE}\n[simulate]\ncontrol = [\"sin(t)\"]\n");
        let c = ExperimentConfig::parse(&text).unwrap();
        let sig = c.control_signal(1.0, 100).unwrap();
        assert!((sig.eval(0.5)[0] - 0.5f64.sin()).abs() < 1e-4);
        let bad = format!("{BASE}\n[simulate]\ncontrol = [\"sin(x)\"]\n");
        assert!(ExperimentConfig::parse(&bad)
            .unwrap()
            .control_signal(1.0, 10)
            .is_err());
    }

    #[test]
    fn coupling_shape_checked() {
        let text = format!("{BASE}\n[coupling]\nentries = [[\"0\", \"1\"]]\n");
        let err = ExperimentConfig::parse(&text)
            .unwrap()
            .system()
            .unwrap_err()
            .to_string();
        assert!(err.contains("coupling.entries"), "{err}");
    }
}
