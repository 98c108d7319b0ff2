//! `hypctrl` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid input, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::backstepping::{
    pde_residual, preprocess_diagonal, solve_kernel, source_matrix, Kernel, KernelOptions,
    SourceMatrix,
};
use crate::bmatrix::{boundary_elimination, class_report};
use crate::config::{field_from_exprs, ExperimentConfig};
use crate::controller::{
    null_control_openloop, observability_sample, optimality_witness, run_closed_loop,
    synthesize_feedback, verify_observability, FeedbackOptions, NullControlOptions, SampleKind,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::simulator::io::{write_norms_csv, write_snapshot_binary, write_snapshot_csv};
use crate::simulator::{solve_dual, solve_forward, SimOptions};
use crate::sweep::{run_sweep, write_sweep_csv, SweepPlan};
use crate::system::{ControlSignal, CouplingField, SystemSpec};
use crate::times::{time_report, TimeReport};

const QUAD_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(
    name = "hypctrl",
    version,
    about = "Boundary control of 1-D hyperbolic systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Time horizon.
    #[arg(long = "T", global = true)]
    horizon: Option<f64>,
    /// Grid cells (kernel cells for `kernel`).
    #[arg(long = "N", global = true)]
    cells: Option<usize>,
    /// Monte Carlo samples (`observability`).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Tikhonov parameter (`nullctrl`, `sweep`).
    #[arg(long, global = true)]
    reg: Option<f64>,
    /// Ramp window (`feedback`).
    #[arg(long, global = true)]
    delta: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "HYPCTRL_JOBS")]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the result as JSON instead of the summary line.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Travel times and the optimal control time.
    Times,
    /// Class membership of the boundary matrix and its elimination maps.
    CheckB,
    /// Forward simulation with the configured boundary controls.
    Simulate,
    /// Backward simulation of the dual system.
    Dual,
    /// Backstepping kernel and source matrix.
    Kernel,
    /// Finite-time feedback, run in closed loop.
    Feedback,
    /// Open-loop null control by least squares.
    Nullctrl,
    /// Initial datum not controllable below the optimal time.
    Witness,
    /// Monte Carlo estimate of the observability constant.
    Observability,
    /// Null-control residuals over a parameter grid.
    Sweep,
}

/// Parses `args` (program name first), runs the command and returns the exit
/// code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let Some(path) = cli.common.config.clone() else {
        eprintln!("error: --config <FILE> is required\n\nFor more information, try '--help'.");
        return 1;
    };
    if let Some(jobs) = cli.common.jobs {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global();
    }
    match execute(cli.command, &cli.common, &path) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                3
            }
        }
    }
}

struct Ctx<'a> {
    cfg: ExperimentConfig,
    common: &'a Common,
    out: PathBuf,
    seed: u64,
}

impl Ctx<'_> {
    fn cells(&self) -> usize {
        self.common.cells.unwrap_or(self.cfg.grid.cells)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        Ok(BufWriter::new(File::create(path)?))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut f = self.create(name)?;
        serde_json::to_writer_pretty(&mut f, value).map_err(|e| Error::Io(e.into()))?;
        writeln!(f)?;
        f.flush()?;
        Ok(())
    }

    fn finish(&self, summary: String, value: &serde_json::Value) {
        if self.common.json {
            println!(
                "{}",
                serde_json::to_string_pretty(value).expect("JSON values serialize")
            );
        } else {
            println!("{summary}");
        }
    }
}

fn execute(command: Command, common: &Common, path: &Path) -> Result<()> {
    let cfg = ExperimentConfig::load(path)?;
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let seed = common.seed.or(cfg.seed).unwrap_or(0);
    let ctx = Ctx {
        cfg,
        common,
        out,
        seed,
    };
    match command {
        Command::Times => cmd_times(&ctx),
        Command::CheckB => cmd_check_b(&ctx),
        Command::Simulate => cmd_simulate(&ctx),
        Command::Dual => cmd_dual(&ctx),
        Command::Kernel => cmd_kernel(&ctx),
        Command::Feedback => cmd_feedback(&ctx),
        Command::Nullctrl => cmd_nullctrl(&ctx),
        Command::Witness => cmd_witness(&ctx),
        Command::Observability => cmd_observability(&ctx),
        Command::Sweep => cmd_sweep(&ctx),
    }
}

/// Six decimals with trailing zeros removed.
fn short(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0');
    s.strip_suffix('.').unwrap_or(s).to_string()
}

fn sci(v: f64) -> String {
    format!("{v:.10e}")
}

fn matrix_rows(m: &Matrix<f64>) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|r| m.row(r).to_vec()).collect()
}

fn report(spec: &SystemSpec<f64>) -> Result<TimeReport<f64>> {
    time_report(spec, QUAD_TOL)
}

/// Horizon from the flag, then the section, then `T_opt · factor + shift`.
fn horizon(
    ctx: &Ctx,
    section: Option<f64>,
    spec: &SystemSpec<f64>,
    factor: f64,
    shift: f64,
) -> Result<f64> {
    match ctx.common.horizon.or(section) {
        Some(t) if !(t > 0.0 && t.is_finite()) => Err(Error::Config(format!(
            "T: horizon must be positive, got {t}"
        ))),
        Some(t) => Ok(t),
        None => Ok(report(spec)?.topt * factor + shift),
    }
}

fn cmd_times(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let rep = report(&spec)?;
    let text = rep.to_kv_text();
    let value = serde_json::to_value(&rep).map_err(|e| Error::Io(e.into()))?;
    ctx.create("times.txt")?.write_all(text.as_bytes())?;
    ctx.write_json("times.json", &value)?;
    let tau: Vec<String> = rep.tau.iter().map(|&t| short(t)).collect();
    if !ctx.common.json {
        print!("{text}");
    }
    ctx.finish(
        format!("τ = ({}), T_opt = {}", tau.join(", "), short(rep.topt)),
        &value,
    );
    Ok(())
}

fn yes(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn cmd_check_b(ctx: &Ctx) -> Result<()> {
    let b = ctx.cfg.b_matrix()?;
    ctx.cfg.system()?;
    let rep = class_report(&b);
    let levels = if rep.in_b {
        Some(boundary_elimination(&b)?.levels().to_vec())
    } else {
        None
    };
    let value = json!({
        "b": matrix_rows(&b),
        "report": rep,
        "elimination": levels,
    });
    ctx.write_json("check_b.json", &value)?;
    if !ctx.common.json {
        for c in &rep.minors {
            println!(
                "minor {}: det = {}, rcond = {}, invertible = {}",
                c.order,
                sci(c.determinant),
                sci(c.rcond),
                yes(c.invertible)
            );
        }
        for l in levels.iter().flatten() {
            println!("level {}:", l.level);
            for (r, row) in l.block.iter().enumerate() {
                let terms: Vec<String> = row
                    .iter()
                    .enumerate()
                    .map(|(c, &v)| format!("{v:+.6}·w{}(0)", b.rows() + c + 1))
                    .collect();
                let rhs = if terms.is_empty() {
                    "0".to_string()
                } else {
                    terms.join(" ")
                };
                println!("  w{}(0) = {rhs}", l.target + r + 1);
            }
        }
        if let Some(d) = &rep.diagnostic {
            println!("note: {d}");
        }
    }
    ctx.finish(
        format!("in ℬ: {}; in ℬ_e: {}", yes(rep.in_b), yes(rep.in_be)),
        &value,
    );
    Ok(())
}

fn cmd_simulate(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let t = match ctx.common.horizon.or(ctx.cfg.grid.horizon) {
        Some(t) => t,
        None => report(&spec)?.topt + 0.2,
    };
    let cells = ctx.cells();
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let w0 = ctx.cfg.initial_state(cells)?;
    let mut control = ctx.cfg.control_signal(t, 4 * cells)?;
    let opts = SimOptions {
        snapshot_stride: ctx.cfg.simulate.snapshot_stride,
        ..SimOptions::default()
    };
    let traj = solve_forward(&spec, &w0, &mut control, &grid, &opts)?;
    write_norms_csv(&traj, ctx.create("norms.csv")?)?;
    write_snapshot_csv(traj.final_state(), ctx.create("final.csv")?)?;
    for (i, s) in traj.snapshots.iter().enumerate() {
        write_snapshot_binary(s, ctx.create(&format!("snapshots/{i:05}.bin"))?)?;
    }
    let (l0, l1) = (w0.l2(), traj.final_state().l2());
    let value =
        json!({ "T": t, "steps": traj.steps, "dt": traj.dt, "l2_initial": l0, "l2_final": l1 });
    ctx.write_json("simulate.json", &value)?;
    ctx.finish(
        format!(
            "simulate: T = {}, {} steps, L2 {} -> {}",
            short(t),
            traj.steps,
            sci(l0),
            sci(l1)
        ),
        &value,
    );
    Ok(())
}

/// Diagonal-gauged system, its kernel (when the coupling is non-zero) and the
/// source matrix of the target system.
fn backstepping(
    ctx: &Ctx,
    spec: &SystemSpec<f64>,
    cells: usize,
) -> Result<(SystemSpec<f64>, Option<Kernel<f64>>, SourceMatrix<f64>)> {
    let (gauged, _) = preprocess_diagonal(spec)?;
    if gauged.coupling().is_identically_zero() {
        return Ok((gauged, None, SourceMatrix::zero(spec.k(), spec.m())));
    }
    let k = &ctx.cfg.kernel;
    let opts = KernelOptions {
        cells,
        tolerance: k.tolerance,
        max_iters: k.max_iters,
    };
    let kernel = solve_kernel(&gauged, &opts)?;
    let source = source_matrix(&kernel, &gauged)?;
    Ok((gauged, Some(kernel), source))
}

fn cmd_dual(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let t = horizon(ctx, None, &spec, 1.0, 0.2)?;
    let (target, _, source) = backstepping(ctx, &spec, ctx.cfg.kernel.cells)?;
    let cells = ctx.cells();
    let v0 = match &ctx.cfg.dual.initial {
        Some(exprs) => field_from_exprs(exprs, spec.n(), cells, "dual.initial")?,
        None => observability_sample(spec.n(), cells, ctx.seed, 0).1,
    };
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let tr = solve_dual(&target, &source, &v0, &grid, 0)?;
    let mut f = ctx.create("dual_observation.csv")?;
    let head: Vec<String> = (spec.k() + 1..=spec.n()).map(|i| format!("v{i}")).collect();
    writeln!(f, "t,{}", head.join(","))?;
    for (time, obs) in tr.times.iter().zip(&tr.observation) {
        let row: Vec<String> = obs.iter().map(|&v| sci(v)).collect();
        writeln!(f, "{},{}", sci(*time), row.join(","))?;
    }
    f.flush()?;
    write_snapshot_csv(tr.terminal(), ctx.create("dual_terminal.csv")?)?;
    let (obs, term) = (tr.observed_energy(), tr.terminal_energy());
    let value =
        json!({ "T": t, "steps": tr.steps, "observed_energy": obs, "terminal_energy": term });
    ctx.write_json("dual.json", &value)?;
    ctx.finish(
        format!(
            "dual: T = {}, observed {}, terminal {}",
            short(t),
            sci(obs),
            sci(term)
        ),
        &value,
    );
    Ok(())
}

fn cmd_kernel(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let cells = ctx.common.cells.unwrap_or(ctx.cfg.kernel.cells);
    let (gauged, kernel, source) = backstepping(ctx, &spec, cells)?;
    let kernel = kernel.unwrap_or_else(|| Kernel::zero(spec.k(), spec.m(), cells));
    kernel.write_csv(ctx.create("kernel.csv")?)?;
    source.write_csv(ctx.create("source.csv")?)?;
    let residual = pde_residual(&gauged, &kernel);
    let value = json!({
        "cells": cells,
        "iterations": kernel.iterations(),
        "fixed_point_change": kernel.residual(),
        "pde_residual": residual,
        "max_abs": kernel.max_abs(),
        "source_lower_max": source.lower_triangle_max(),
    });
    ctx.write_json("kernel.json", &value)?;
    ctx.finish(
        format!(
            "kernel: N = {cells}, {} iterations, max |K| = {}, PDE residual {}",
            kernel.iterations(),
            sci(kernel.max_abs()),
            sci(residual)
        ),
        &value,
    );
    Ok(())
}

fn cmd_feedback(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let t = horizon(ctx, ctx.cfg.feedback.horizon, &spec, 1.0, 0.2)?;
    let cells = ctx.cells();
    let w0 = ctx.cfg.initial_state(cells)?;
    let opts = FeedbackOptions {
        delta: ctx.common.delta.or(ctx.cfg.feedback.delta),
        strict: ctx.cfg.feedback.strict,
        ..FeedbackOptions::default()
    };
    let law = synthesize_feedback(&spec, t, &w0, &opts)?;
    let compat = law.compatibility();
    if !compat.ok() {
        let mut parts = Vec::new();
        if compat.order0 > compat.tolerance0 {
            parts.push(format!(
                "order 0 mismatch {} > {}",
                sci(compat.order0),
                sci(compat.tolerance0)
            ));
        }
        if compat.order1 > compat.tolerance1 {
            parts.push(format!(
                "order 1 mismatch {} > {}",
                sci(compat.order1),
                sci(compat.tolerance1)
            ));
        }
        eprintln!(
            "warning: initial data violates the compatibility conditions ({})",
            parts.join(", ")
        );
    }
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let (traj, rep) = run_closed_loop(&spec, &law, &w0, &grid, &SimOptions::default())?;
    write_norms_csv(&traj, ctx.create("feedback_norms.csv")?)?;
    write_snapshot_csv(traj.final_state(), ctx.create("feedback_final.csv")?)?;
    let below: Vec<_> = rep
        .first_below
        .iter()
        .map(|&(th, at)| json!({ "threshold": th, "time": at }))
        .collect();
    let value = json!({
        "T": t,
        "T_opt": law.t_opt(),
        "delta": law.ramps().delta,
        "delays": law.delays(),
        "compatibility": {
            "order0": compat.order0, "order1": compat.order1,
            "tolerance0": compat.tolerance0, "tolerance1": compat.tolerance1, "ok": compat.ok(),
        },
        "initial_linf": rep.initial_linf,
        "terminal_linf": rep.terminal_linf,
        "relative_terminal": rep.relative_terminal,
        "first_below": below,
    });
    ctx.write_json("feedback.json", &value)?;
    ctx.finish(
        format!(
            "feedback: T = {}, T_opt = {}, |w(T)|/|w0| = {}",
            short(t),
            short(law.t_opt()),
            sci(rep.relative_terminal)
        ),
        &value,
    );
    Ok(())
}

fn write_control_csv(ctx: &Ctx, name: &str, k: usize, c: &ControlSignal<f64>) -> Result<()> {
    let mut f = ctx.create(name)?;
    let head: Vec<String> = (1..=c.channels()).map(|j| format!("W{}", k + j)).collect();
    writeln!(f, "t,{}", head.join(","))?;
    for (t, v) in c.times().iter().zip(c.values()) {
        let row: Vec<String> = v.iter().map(|&x| sci(x)).collect();
        writeln!(f, "{},{}", sci(*t), row.join(","))?;
    }
    f.flush()?;
    Ok(())
}

fn cmd_nullctrl(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let sec = &ctx.cfg.nullctrl;
    let t = horizon(ctx, sec.horizon, &spec, 1.0, 0.2)?;
    let cells = ctx.cells();
    let w0 = ctx.cfg.initial_state(cells)?;
    let target = match &sec.target {
        Some(exprs) => Some(field_from_exprs(exprs, spec.n(), cells, "nullctrl.target")?),
        None => None,
    };
    let opts = NullControlOptions {
        segments: sec.segments,
        reg: ctx.common.reg.unwrap_or(sec.reg),
        target,
        ..NullControlOptions::default()
    };
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let r = null_control_openloop(&spec, &w0, t, &grid, &opts)?;
    if let Some(w) = r.warning() {
        eprintln!("warning: {w}");
    }
    write_control_csv(ctx, "control.csv", spec.k(), &r.control)?;
    write_snapshot_csv(&r.terminal, ctx.create("nullctrl_terminal.csv")?)?;
    let value = json!({
        "T": t,
        "segments": opts.segments,
        "reg": opts.reg,
        "residual": r.residual,
        "condition_estimate": r.condition_estimate,
        "ill_conditioned": r.ill_conditioned,
    });
    ctx.write_json("nullctrl.json", &value)?;
    ctx.finish(
        format!(
            "nullctrl: T = {}, residual {}, condition {}",
            short(t),
            sci(r.residual),
            sci(r.condition_estimate)
        ),
        &value,
    );
    Ok(())
}

fn cmd_witness(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let t = horizon(ctx, ctx.cfg.witness.horizon, &spec, 0.5, 0.0)?;
    let cells = ctx.cells();
    // built on the uncoupled system, probed on the configured one
    let uncoupled = spec.with_coupling(CouplingField::zero(spec.n()))?;
    let w = optimality_witness(&uncoupled, t, cells)?;
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let probe = |control: &mut ControlSignal<f64>| -> Result<f64> {
        let tr = solve_forward(&spec, &w.initial, control, &grid, &SimOptions::default())?;
        Ok(w.probe.eval(tr.final_state()))
    };
    let free = probe(&mut ControlSignal::zero(spec.m(), t))?;
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let nodes = 17;
    let mut f = ctx.create("witness_probe.csv")?;
    writeln!(f, "run,probe")?;
    writeln!(f, "0,{}", sci(free))?;
    let mut deviation: f64 = 0.0;
    for run in 1..=ctx.cfg.witness.controls {
        let times: Vec<f64> = (0..nodes)
            .map(|r| t * r as f64 / (nodes - 1) as f64)
            .collect();
        let values = (0..nodes)
            .map(|_| (0..spec.m()).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let v = probe(&mut ControlSignal::new(times, values)?)?;
        writeln!(f, "{run},{}", sci(v))?;
        deviation = deviation.max((v - free).abs());
    }
    f.flush()?;
    write_snapshot_csv(&w.initial, ctx.create("witness_initial.csv")?)?;
    let value = json!({
        "T": t,
        "term": w.term,
        "crossing": w.crossing,
        "probe": {
            "components": w.probe.components.iter().map(|c| c + 1).collect::<Vec<_>>(),
            "positions": w.probe.positions,
            "weights": w.probe.weights,
            "expected": w.probe.expected,
        },
        "coupling_ignored": !spec.coupling().is_identically_zero(),
        "free": free,
        "max_deviation": deviation,
    });
    ctx.write_json("witness.json", &value)?;
    ctx.finish(
        format!(
            "witness: T = {}, probe {} without control, max deviation {} over {} controls",
            short(t),
            sci(free),
            sci(deviation),
            ctx.cfg.witness.controls
        ),
        &value,
    );
    Ok(())
}

fn cmd_observability(ctx: &Ctx) -> Result<()> {
    let spec = ctx.cfg.system()?;
    let sec = &ctx.cfg.observability;
    let t = horizon(ctx, sec.horizon, &spec, 1.0, 0.5)?;
    let samples = ctx.common.samples.unwrap_or(sec.samples);
    let (target, _, source) = backstepping(ctx, &spec, ctx.cfg.kernel.cells)?;
    let cells = ctx.cells();
    let grid = ctx.cfg.grid(Some(cells), t)?;
    let est = verify_observability(&target, &source, t, samples, &grid, ctx.seed)?;
    let mut f = ctx.create("observability.csv")?;
    writeln!(f, "index,kind,observed,terminal,ratio")?;
    for s in &est.samples {
        let kind = match s.kind {
            SampleKind::BandLimited => "band",
            SampleKind::Localized => "bump",
        };
        writeln!(
            f,
            "{},{kind},{},{},{}",
            s.index,
            sci(s.observed),
            sci(s.terminal),
            sci(s.ratio)
        )?;
    }
    f.flush()?;
    let value =
        json!({ "T": t, "samples": samples, "constant": est.constant, "argmin": est.argmin });
    ctx.write_json("observability.json", &value)?;
    ctx.finish(
        format!(
            "observability: T = {}, {samples} samples, estimate {}",
            short(t),
            sci(est.constant)
        ),
        &value,
    );
    Ok(())
}

fn cmd_sweep(ctx: &Ctx) -> Result<()> {
    let plan = SweepPlan::from_config(
        &ctx.cfg,
        ctx.common.cells,
        ctx.common.horizon,
        ctx.common.reg,
    )?;
    let rows = run_sweep(&ctx.cfg, &plan);
    write_sweep_csv(&rows, ctx.create("sweep.csv")?)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    let worst = rows
        .iter()
        .filter(|r| r.error.is_none())
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    let value = json!({ "points": rows.len(), "failed": failed, "max_residual": worst });
    ctx.write_json("sweep.json", &value)?;
    ctx.finish(
        format!(
            "sweep: {} points, {failed} failed, max residual {}",
            rows.len(),
            sci(worst)
        ),
        &value,
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_format() {
        assert_eq!(short(0.5), "0.5");
        assert_eq!(short(std::f64::consts::LN_2), "0.693147");
        assert_eq!(short(2.0), "2");
    }

    #[test]
    fn help_and_usage_codes() {
        assert_eq!(run(["hypctrl", "--help"]), 0);
        assert_eq!(run(["hypctrl", "frobnicate"]), 1);
        assert_eq!(run(["hypctrl", "times"]), 1);
    }
}
