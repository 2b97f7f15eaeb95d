//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::fs;
use std::process::Command;
use std::time::{Duration, Instant};

use crystal_relax::config::{parse_config, InitSpec, RunConfig};
use crystal_relax::drivers::{run_refinement, thread_cap, Status};
use crystal_relax::grid::{divergence, gradient, integrate, FaceVectorField, GridSpec, ScalarField};
use crystal_relax::initial::make_initial_data;
use crystal_relax::model::ModelParams;
use crystal_relax::oracles::{run_suite, SampleConfig};
use crystal_relax::scheme::{advance, fixed_point_step, lyapunov_ledger, mass_law_check, Trajectory};
use crystal_relax::solvers::{apply_p_laplacian_forward, picard_p_laplacian_from, SolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ORACLE_BUDGET: Duration = Duration::from_secs(60);
const LEDGER_BUDGET: Duration = Duration::from_secs(300);
const REFINE_BUDGET: Duration = Duration::from_secs(300);
const LEDGER_REL: f64 = 1e-7;
const MASS_REL: f64 = 1e-8;
const CONSTANT_REL: f64 = 1e-10;
const DENSE_REL: f64 = 1e-8;
const MANUFACTURED_REL: f64 = 1e-7;
const PICARD_CAP: usize = 200;
const SBP_REL: f64 = 1e-13;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// The bump runs shared by criteria 2 and 3: 32x32 cells on a 4x4 square.
fn bump_config() -> RunConfig {
    RunConfig {
        init: InitSpec::Gaussian {
            x0: 2.0,
            y0: 2.0,
            sigma: 0.6,
            amp: 1.0,
        },
        ..RunConfig::default()
    }
}

fn bump_runs() -> (Vec<(String, Trajectory)>, Duration) {
    let cfg = bump_config();
    let u0 = make_initial_data(&cfg.init, cfg.grid().unwrap()).unwrap();
    let start = Instant::now();
    let mut runs = Vec::new();
    for p in [1.5, 3.0] {
        for beta in [0.0, 1.0] {
            for q in [0.0, 2.0] {
                let params = ModelParams::coupled(p, beta, q, 0.5 / 50.0).unwrap();
                let label = format!("p={p} beta={beta} q={q}");
                match advance(&u0, 0.5, 50, &params, &SolverConfig::default()) {
                    Ok(t) => runs.push((label, t)),
                    Err((_, e)) => panic!("{label}: {e}"),
                }
            }
        }
    }
    (runs, start.elapsed())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let reports = run_suite(&SampleConfig::default(), thread_cap().unwrap()).unwrap();
    let elapsed = start.elapsed();
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).map(|r| r.oracle).collect();
    outcome(
        failed.is_empty() && elapsed <= ORACLE_BUDGET,
        format!(
            "{} oracles x {} samples, failing {:?}, {:.1}s",
            reports.len(),
            SampleConfig::default().count,
            failed,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2(runs: &[(String, Trajectory)], elapsed: Duration) -> Outcome {
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for (label, t) in runs {
        let ledger = lyapunov_ledger(t);
        let rel = ledger.max_slack() / ledger.initial;
        worst = worst.max(rel);
        if !ledger.violations(LEDGER_REL * ledger.initial).is_empty() {
            bad.push(label.clone());
        }
    }
    outcome(
        bad.is_empty() && runs.len() == 8 && elapsed <= LEDGER_BUDGET,
        format!(
            "{} runs, max slack / L(u0) = {worst:.2e}, violating {bad:?}, {:.1}s",
            runs.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_3(runs: &[(String, Trajectory)]) -> Outcome {
    let worst = runs
        .iter()
        .map(|(_, t)| mass_law_check(t).max_relative())
        .fold(0.0, f64::max);
    outcome(
        worst <= MASS_REL && runs.len() == 8,
        format!("max |mass defect| / |int u0| = {worst:.2e}"),
    )
}

fn criterion_4() -> Outcome {
    let grid = GridSpec::with_extent(8, 6, 2.0, 1.5).unwrap();
    let mut worst: f64 = 0.0;
    for c in [-2.0, 0.0, 5.0] {
        for dt in [0.1, 0.01] {
            let params = ModelParams::coupled(3.0, 1.0, 2.0, dt).unwrap();
            let s = fixed_point_step(&ScalarField::constant(grid, c), &params, &SolverConfig::default()).unwrap();
            let u_exp = c / (1.0 + dt * dt * dt);
            let v_exp = dt * u_exp;
            let rel = |x: f64, e: f64| if e == 0.0 { x.abs() } else { ((x - e) / e).abs() };
            for (u, v) in s.u.values().iter().zip(s.v.values()) {
                worst = worst.max(rel(*u, u_exp)).max(rel(*v, v_exp));
            }
        }
    }
    outcome(worst <= CONSTANT_REL, format!("max relative error {worst:.2e}"))
}

/// Five-point Neumann Laplacian, assembled densely.
fn dense_laplacian(g: &GridSpec) -> Vec<Vec<f64>> {
    let n = g.nx * g.ny;
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let row = j * g.nx + i;
            let mut link = |ii: usize, jj: usize, h: f64| {
                let col = jj * g.nx + ii;
                l[row][col] += 1.0 / (h * h);
                l[row][row] -= 1.0 / (h * h);
            };
            if i > 0 {
                link(i - 1, j, g.hx);
            }
            if i + 1 < g.nx {
                link(i + 1, j, g.hx);
            }
            if j > 0 {
                link(i, j - 1, g.hy);
            }
            if j + 1 < g.ny {
                link(i, j + 1, g.hy);
            }
        }
    }
    l
}

/// Gaussian elimination with partial pivoting.
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for (nx, ny) in [(2, 2), (3, 2), (4, 4), (5, 3), (6, 6)] {
        let g = GridSpec::new(nx, ny, 0.3, 0.2).unwrap();
        let dt = 0.05;
        let params = ModelParams::coupled(2.0, 0.0, 0.0, dt).unwrap();
        let eps = params.eps;
        let w: Vec<f64> = (0..g.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();

        // Unknowns [u; v]:
        //   u / dt + K v = w / dt,   K = -(1 + eps) L + eps
        //   -A u + v = 0,            A = -L + eps
        let n = g.n_cells();
        let l = dense_laplacian(&g);
        let mut m = vec![vec![0.0; 2 * n]; 2 * n];
        let mut rhs = vec![0.0; 2 * n];
        for r in 0..n {
            m[r][r] = 1.0 / dt;
            m[n + r][n + r] = 1.0;
            for c in 0..n {
                let id = if r == c { 1.0 } else { 0.0 };
                m[r][n + c] = -(1.0 + eps) * l[r][c] + eps * id;
                m[n + r][c] = l[r][c] - eps * id;
            }
            rhs[r] = w[r] / dt;
        }
        let x = dense_solve(m, rhs);

        let s = fixed_point_step(&ScalarField::from_values(g, w).unwrap(), &params, &SolverConfig::default()).unwrap();
        worst = worst.max(rel_l2(s.u.values(), &x[..n])).max(rel_l2(s.v.values(), &x[n..]));
        cases += 1;
    }
    outcome(worst <= DENSE_REL, format!("{cases} grids up to 6x6, max relative L2 error {worst:.2e}"))
}

fn criterion_6() -> Outcome {
    let g = GridSpec::with_extent(16, 16, 1.0, 1.0).unwrap();
    let pi = std::f64::consts::PI;
    let exact = ScalarField::from_fn(g, |i, j| {
        let (x, y) = g.center(i, j);
        0.5 + (pi * x).cos() * (2.0 * pi * y).cos() + 0.3 * (pi * y).cos()
    });
    let mut worst: f64 = 0.0;
    let mut most_iters = 0;
    for p in [1.5, 3.0] {
        for beta in [0.0, 1.0] {
            let params = ModelParams::coupled(p, beta, 0.0, 0.01).unwrap();
            let psi = apply_p_laplacian_forward(&exact, &params);
            let out = picard_p_laplacian_from(&psi, &ScalarField::zeros(g), &params, &SolverConfig::default()).unwrap();
            worst = worst.max(out.u.sub(&exact).l2_norm() / exact.l2_norm());
            most_iters = most_iters.max(out.iterations);
        }
    }
    outcome(
        worst <= MANUFACTURED_REL && most_iters <= PICARD_CAP,
        format!("max relative error {worst:.2e}, at most {most_iters} outer iterations"),
    )
}

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig {
        p: 3.0,
        beta: 1.0,
        q: 1.0,
        j: 10,
        output_dir: dir.path().to_path_buf(),
        ..bump_config()
    };
    let start = Instant::now();
    let report = run_refinement(&cfg, 3, thread_cap().unwrap()).unwrap();
    let elapsed = start.elapsed();
    let norms: Vec<String> = report.rows.iter().map(|r| format!("{:.4e}", r.norm)).collect();
    let table = fs::read_to_string(dir.path().join("cauchy.csv")).unwrap_or_default();
    outcome(
        report.status == Status::Ok
            && report.rows.len() == 2
            && report.rows[1].norm < report.rows[0].norm
            && table.lines().count() == 3
            && elapsed <= REFINE_BUDGET,
        format!("j 10/20/40 distances {norms:?}, {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for (nx, ny) in [(3, 5), (8, 8), (17, 9)] {
        let g = GridSpec::new(nx, ny, rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)).unwrap();
        for _ in 0..100 {
            let phi = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
            let xs: Vec<f64> = (0..g.n_xfaces()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ys: Vec<f64> = (0..g.n_yfaces()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let f = FaceVectorField::from_fn(g, |i, j| xs[g.xface(i, j)], |i, j| ys[g.yface(i, j)]);
            let lhs = integrate(&phi.mul(&divergence(&f)));
            let rhs = -gradient(&phi).inner(&f);
            let scale = integrate(&phi.mul(&divergence(&f)).map(f64::abs)).max(f64::MIN_POSITIVE);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    outcome(worst <= SBP_REL, format!("300 trials, max relative defect {worst:.2e}"))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.cfg");
    let text = format!(
        "nx = 16\nny = 16\nhx = 0.25\nhy = 0.25\nT = 0.1\nj = 5\ninit = random-smooth\ninit.seed = 9\noutput_dir = {}\n",
        dir.path().join("out").display()
    );
    parse_config(&text).unwrap();
    fs::write(&cfg_path, text).unwrap();
    let run = || {
        let status = Command::new(env!("CARGO_BIN_EXE_crystal-relax"))
            .args(["run", "--config"])
            .arg(&cfg_path)
            .output()
            .unwrap();
        let diag = fs::read(dir.path().join("out/diag.csv")).unwrap_or_default();
        (status.status.code(), diag)
    };
    let (code_a, first) = run();
    let (code_b, second) = run();
    outcome(
        code_a == Some(0) && code_b == Some(0) && !first.is_empty() && first == second,
        format!("exit codes {code_a:?}/{code_b:?}, diag.csv {} bytes, identical: {}", first.len(), first == second),
    )
}

fn main() {
    let (runs, elapsed) = bump_runs();
    let results = [
        ("1 oracle suite", criterion_1()),
        ("2 energy ledger", criterion_2(&runs, elapsed)),
        ("3 mass law", criterion_3(&runs)),
        ("4 constant state", criterion_4()),
        ("5 dense block oracle", criterion_5()),
        ("6 manufactured solution", criterion_6()),
        ("7 refinement Cauchy", criterion_7()),
        ("8 summation by parts", criterion_8()),
        ("9 determinism", criterion_9()),
    ];
    let mut all = true;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        all &= o.pass;
    }
    if !all {
        std::process::exit(1);
    }
}
