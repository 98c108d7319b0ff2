//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use hypctrl::backstepping::SourceMatrix;
use hypctrl::backstepping::{
    inverse_transform, pde_residual, solve_kernel, source_matrix, transform, Kernel, KernelOptions,
    KernelTable,
};
use hypctrl::bmatrix::in_class_b;
use hypctrl::controller::{
    null_control_openloop, optimality_witness, run_closed_loop, synthesize_feedback,
    verify_observability, FeedbackOptions, NullControlOptions,
};
use hypctrl::linalg::Matrix;
use hypctrl::simulator::{solve_forward, SimOptions, ZeroControl};
use hypctrl::system::{
    validate_system, ControlSignal, CouplingField, GridSpec, ReflectionMatrix, SpeedProfile,
    StateField, SystemSpec,
};
use hypctrl::times::{legacy_times, optimal_time, travel_times};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn spec(
    k: usize,
    m: usize,
    lambda: &[f64],
    c: Option<Matrix<f64>>,
    b: &[&[f64]],
) -> SystemSpec<f64> {
    let coupling = match c {
        Some(c) => CouplingField::constant(c).unwrap(),
        None => CouplingField::zero(k + m),
    };
    validate_system(
        SpeedProfile::constant(k, m, lambda).unwrap(),
        coupling,
        ReflectionMatrix::new(Matrix::from_f64_rows(b).unwrap()),
    )
    .unwrap()
}

/// `(1 − s²)⁴` on `|s| < 1`, `s = (x − c) / r`.
fn bump(x: f64, c: f64, r: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() < 1.0 {
        (1.0 - s * s).powi(4)
    } else {
        0.0
    }
}

fn criterion_1() -> Outcome {
    let exprs = |a: &str, b: &str| {
        let p = SpeedProfile::from_exprs(1, 1, &[a, b]).unwrap();
        validate_system(
            p,
            CouplingField::zero(2),
            ReflectionMatrix::new(Matrix::zeros(1, 1)),
        )
        .unwrap()
    };
    let t1 = travel_times(&exprs("1 + x", "1"), 1e-13).map_err(|e| e.to_string())?[0];
    let t2 = travel_times(&exprs("2", "1 / (1 + x)"), 1e-13).map_err(|e| e.to_string())?[1];
    let (e1, e2) = ((t1 - std::f64::consts::LN_2).abs(), (t2 - 1.5).abs());
    check(
        e1 <= 1e-10 && e2 <= 1e-10,
        format!("|tau - ln 2| = {e1:.1e}, |tau - 1.5| = {e2:.1e}"),
    )
}

/// Direct evaluation of the maximum over the candidate sums.
fn brute_force_topt(tau: &[f64], k: usize, m: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    if m >= k {
        for i in 1..=k {
            best = best.max(tau[i - 1] + tau[m + i - 1]);
        }
        best = best.max(tau[k]);
    } else {
        for i in 1..=m {
            best = best.max(tau[k - m + i - 1] + tau[k + i - 1]);
        }
    }
    best
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst_order = f64::NEG_INFINITY;
    for case in 0..20 {
        let k = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        // τ consistent with the speed ordering
        let mut neg: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..3.0)).collect();
        neg.sort_by(f64::total_cmp);
        let mut pos: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..3.0)).collect();
        pos.sort_by(|a, b| b.total_cmp(a));
        let tau: Vec<f64> = neg.into_iter().chain(pos).collect();
        let got = optimal_time(&tau, k, m).map_err(|e| e.to_string())?;
        let want = brute_force_topt(&tau, k, m);
        if got != want {
            return Err(format!(
                "case {case}: T_opt = {got} but direct max = {want}"
            ));
        }
        let (t1, _) = legacy_times(&tau, k, m).map_err(|e| e.to_string())?;
        worst_order = worst_order.max(got - t1);
    }
    check(
        worst_order <= 0.0,
        format!("20 cases exact; max(T_opt - T1) = {worst_order:.3}"),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut members = 0;
    let mut flipped = 0;
    let total = 1000;
    for trial in 0..total {
        let (k, m) = if trial % 2 == 0 { (3, 4) } else { (4, 3) };
        let mut b = Matrix::from_fn(k, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        if in_class_b(&b) {
            members += 1;
        }
        b[(k - 1, m - 1)] = 0.0;
        if !in_class_b(&b) {
            flipped += 1;
        }
    }
    check(
        members == total && flipped == total,
        format!("in class B {members}/{total}; zero trailing entry flips {flipped}/{total}"),
    )
}

fn criterion_4() -> Outcome {
    let s = spec(1, 1, &[1.0, 0.7], None, &[&[0.0]]);
    let t = 0.5;
    let f = |x: f64| bump(x, 0.3, 0.2);
    let g = |x: f64| bump(x, 0.6, 0.25);
    // exact: w1 shifts right at speed 1 (zero inflow), w2 left at 0.7 (zero control)
    let exact = |i: usize, x: f64| if i == 0 { f(x - t) } else { g(x + 0.7 * t) };
    let mut errors = Vec::new();
    let mut max_err = 0.0;
    for cells in [500, 1000, 2000] {
        let grid = GridSpec::new(cells, 0.9, t).unwrap();
        let w0 = StateField::from_fn(2, cells, |i, x: f64| if i == 0 { f(x) } else { g(x) });
        let tr = solve_forward(
            &s,
            &w0,
            &mut ZeroControl { m: 1 },
            &grid,
            &SimOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        let w = tr.final_state();
        let h = 1.0 / cells as f64;
        let mut l1 = 0.0;
        max_err = 0.0f64;
        for i in 0..2 {
            for q in 0..=cells {
                let e = (w.get(i, q) - exact(i, w.x(q))).abs();
                l1 += e * h;
                max_err = max_err.max(e);
            }
        }
        errors.push(l1);
    }
    let orders: Vec<f64> = errors.windows(2).map(|e| (e[0] / e[1]).log2()).collect();
    check(
        orders.iter().all(|&p| (0.8..=1.2).contains(&p)) && max_err < 0.02,
        format!(
            "L1 errors {}, orders {}, max error at N=2000 {max_err:.2e}",
            errors
                .iter()
                .map(|e| format!("{e:.3e}"))
                .collect::<Vec<_>>()
                .join(" "),
            orders
                .iter()
                .map(|p| format!("{p:.3}"))
                .collect::<Vec<_>>()
                .join(" ")
        ),
    )
}

fn kernel_case() -> SystemSpec<f64> {
    spec(
        1,
        1,
        &[1.0, 2.0],
        Some(Matrix::from_f64_rows(&[&[0.0, 0.6], &[-0.4, 0.0]]).unwrap()),
        &[&[0.5]],
    )
}

fn criterion_5() -> Outcome {
    let zero = spec(1, 1, &[1.0, 2.0], None, &[&[0.5]]);
    let k0 = solve_kernel(&zero, &KernelOptions::default()).map_err(|e| e.to_string())?;
    if k0.max_abs() != 0.0 {
        return Err(format!("C = 0 gives max |K| = {:e}", k0.max_abs()));
    }
    let s = kernel_case();
    let coarse = solve_kernel(
        &s,
        &KernelOptions {
            cells: 64,
            ..KernelOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let fine = solve_kernel(
        &s,
        &KernelOptions {
            cells: 128,
            ..KernelOptions::default()
        },
    )
    .map_err(|e| e.to_string())?;
    // K_12(x, x) (λ_2 + λ_1) = C_12
    let mut diag_err: f64 = 0.0;
    for p in 0..=128 {
        diag_err = diag_err.max((fine.get(0, 1, p, p) * (2.0 + 1.0) - 0.6).abs());
    }
    let (r64, r128) = (pde_residual(&s, &coarse), pde_residual(&s, &fine));
    let ratio = r64 / r128;
    let src = source_matrix(&fine, &s).map_err(|e| e.to_string())?;
    let lower = src.lower_triangle_max();
    check(
        diag_err <= 1e-14 && (1.4..=2.6).contains(&ratio) && lower <= 10.0 * r128,
        format!(
            "K = 0 exact; diagonal identity error {diag_err:.1e}; residual {r64:.3e} -> {r128:.3e} (ratio {ratio:.3}); S++ lower {lower:.1e} vs bound {:.1e}",
            10.0 * r128
        ),
    )
}

fn criterion_6() -> Outcome {
    let kernel: Kernel<f64> =
        solve_kernel(&kernel_case(), &KernelOptions::default()).map_err(|e| e.to_string())?;
    let cells = 200;
    let table = KernelTable::new(&kernel, cells);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let w = StateField::from_components(
            (0..2)
                .map(|_| (0..=cells).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect(),
        )
        .unwrap();
        let back = inverse_transform(&transform(&w, &table).map_err(|e| e.to_string())?, &table)
            .map_err(|e| e.to_string())?;
        let err = back.axpy(-1.0, &w).unwrap().max_abs() / w.max_abs();
        worst = worst.max(err);
    }
    check(
        worst <= 1e-10,
        format!("max relative round-trip error {worst:.2e} over 10 states"),
    )
}

fn feedback_run(s: &SystemSpec<f64>, horizon: f64, cells: usize) -> Result<f64, String> {
    let n = s.n();
    let w0 = StateField::from_fn(n, cells, |i, x: f64| {
        0.1 * ((i as f64 + 1.0) * std::f64::consts::PI * x).sin() + 0.05 * (1.0 - x) * x
    });
    let law = synthesize_feedback(s, horizon, &w0, &FeedbackOptions::default())
        .map_err(|e| e.to_string())?;
    let grid = GridSpec::new(cells, 0.9, horizon).unwrap();
    let (_, report) =
        run_closed_loop(s, &law, &w0, &grid, &SimOptions::default()).map_err(|e| e.to_string())?;
    Ok(report.relative_terminal)
}

fn criterion_7() -> Outcome {
    let a = feedback_run(&spec(1, 1, &[1.0, 1.0], None, &[&[0.5]]), 2.2, 2000)?;
    let b = feedback_run(
        &spec(1, 2, &[1.0, 1.0, 2.0], None, &[&[1.0, 2.0]]),
        1.7,
        2000,
    )?;
    check(
        a <= 1e-2 && b <= 2e-2,
        format!("relative terminal norm {a:.2e} (k=m=1, T=2.2), {b:.2e} (k=1, m=2, T=1.7)"),
    )
}

fn criterion_8() -> Outcome {
    let c = Matrix::from_f64_rows(&[&[0.0, 0.1], &[0.1, 0.0]]).unwrap();
    let s = spec(1, 1, &[1.0, 1.0], Some(c), &[&[0.5]]);
    let cells = 400;
    let w0 = StateField::from_fn(2, cells, |i, x: f64| {
        if i == 0 {
            (std::f64::consts::PI * x).sin()
        } else {
            bump(x, 0.5, 0.3)
        }
    });
    let grid = GridSpec::new(cells, 0.9, 2.2).unwrap();
    let opts = NullControlOptions {
        segments: 64,
        ..NullControlOptions::default()
    };
    let above = null_control_openloop(&s, &w0, 2.2, &grid, &opts)
        .map_err(|e| e.to_string())?
        .residual;
    let mut below = f64::INFINITY;
    for reg in [1e-4, 1e-6, 1e-8] {
        let r = null_control_openloop(
            &s,
            &w0,
            1.0,
            &grid,
            &NullControlOptions {
                reg,
                ..opts.clone()
            },
        )
        .map_err(|e| e.to_string())?;
        below = below.min(r.residual);
    }

    // witness from the uncoupled system, probed on the coupled one
    let horizon = 1.0;
    let uncoupled = s.with_coupling(CouplingField::zero(2)).unwrap();
    let witness = optimality_witness(&uncoupled, horizon, cells).map_err(|e| e.to_string())?;
    let wgrid = GridSpec::new(cells, 0.9, horizon).unwrap();
    let probe = |ctrl: &mut ControlSignal<f64>| -> Result<f64, String> {
        let tr = solve_forward(&s, &witness.initial, ctrl, &wgrid, &SimOptions::default())
            .map_err(|e| e.to_string())?;
        Ok(witness.probe.eval(tr.final_state()))
    };
    let free = probe(&mut ControlSignal::zero(1, horizon))?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut spread: f64 = 0.0;
    for _ in 0..100 {
        let times: Vec<f64> = (0..=16).map(|r| horizon * r as f64 / 16.0).collect();
        let values = (0..=16).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let v = probe(&mut ControlSignal::new(times, values).unwrap())?;
        spread = spread.max((v - free).abs() / free.abs());
    }
    check(
        above <= 1e-2 && below >= 0.2 && spread < 0.1,
        format!("residual {above:.2e} at T=2.2; min residual {below:.3} at T=1.0; witness probe deviation {spread:.2e} (free value {free:.3})"),
    )
}

fn criterion_9() -> Outcome {
    let s = spec(1, 1, &[1.0, 1.0], None, &[&[0.0]]);
    let cells = 400;
    let src = SourceMatrix::zero(1, 1);
    let grid = GridSpec::new(cells, 0.9, 1.0).unwrap();
    let long = verify_observability(&s, &src, 2.5, 64, &grid, 9).map_err(|e| e.to_string())?;
    let short = verify_observability(&s, &src, 0.3, 64, &grid, 9).map_err(|e| e.to_string())?;
    check(
        long.constant > 0.1 && short.constant < 1e-3,
        format!(
            "estimate {:.3e} at T=2.5, {:.3e} at T=0.3",
            long.constant, short.constant
        ),
    )
}

fn run_cli(bin: &Path, dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(bin)
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} exited with {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

/// Every regular file under `dir`, sorted, with contents.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push((
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                ));
            }
        }
    }
    files.sort();
    files
}

const CONFIG: &str = r#"
seed = 10

[speeds]
k = 1
m = 1
lambda = ["1", "1"]

[coupling]
entries = [["0", "0.1"], ["0.1", "0"]]

[boundary]
b = [[0.5]]

[grid]
cells = 100
cfl = 0.9
horizon = 2.2

[initial]
w = ["0.1*sin(pi*x)", "0.1*sin(2*pi*x)"]

[kernel]
cells = 32

[nullctrl]
segments = 16

[observability]
samples = 8

[sweep]
gamma = [0, 0.05, 0.1]
b = [0.25, 0.5]
"#;

fn criterion_10() -> Outcome {
    let bin = PathBuf::from(env!("CARGO_BIN_EXE_hypctrl"));
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let commands: &[&[&str]] = &[
        &["times"],
        &["check-b"],
        &["simulate", "--out", "sim"],
        &["dual", "--out", "dual"],
        &["kernel", "--out", "kernel"],
        &["feedback", "--out", "feedback"],
        &["nullctrl", "--out", "nullctrl"],
        &["witness", "--T", "1.0", "--out", "witness"],
        &["observability", "--T", "2.5", "--out", "obs"],
        &["sweep", "--out", "sweep"],
    ];
    let mut runs = Vec::new();
    for rep in 0..2 {
        let dir = root.path().join(format!("run{rep}"));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("sys.toml"), CONFIG).unwrap();
        let mut stdout = Vec::new();
        for cmd in commands {
            let mut args = vec![cmd[0], "--config", "sys.toml", "--seed", "42"];
            args.extend_from_slice(&cmd[1..]);
            stdout.push(run_cli(&bin, &dir, &args)?);
        }
        runs.push((stdout, snapshot(&dir)));
    }
    let same_stdout = runs[0].0 == runs[1].0;
    let same_files = runs[0].1 == runs[1].1;
    let files = runs[0].1.len();
    check(
        same_stdout && same_files && files > commands.len(),
        format!("{} commands, {files} output files, stdout identical: {same_stdout}, files identical: {same_files}", commands.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("travel times", criterion_1),
        ("optimal time formula", criterion_2),
        ("boundary matrix classes", criterion_3),
        ("simulator convergence", criterion_4),
        ("kernel correctness", criterion_5),
        ("Volterra round trip", criterion_6),
        ("finite-time feedback", criterion_7),
        ("null control above and below T_opt", criterion_8),
        ("observability dichotomy", criterion_9),
        ("CLI determinism", criterion_10),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (idx, (name, f)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2} ({name})", idx + 1);
        if !filter.is_empty() && !filter.iter().any(|p| label.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {label}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {label}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
