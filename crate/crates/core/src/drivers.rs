//! Experiment drivers behind the command-line tool: a single run, a
//! refinement study, and the inequality suite.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::grid::integrate;
use crate::initial::make_initial_data;
use crate::oracles::{run_suite, OracleReport, SampleConfig};
use crate::output::{cauchy_csv, diag_csv, emit_raster, write_snapshots, CauchyRow};
use crate::scheme::{advance, lyapunov_ledger, mass_law_check, refinement_cauchy, Trajectory};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CRYSTAL_RELAX_THREADS";

/// Outcome class of a driver, mapped to the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    NonConvergence,
    InvariantViolation,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NonConvergence => 2,
            Status::InvariantViolation => 3,
        }
    }
}

/// Exit code for errors that are not a solver or invariant failure.
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Clone)]
pub struct RunReport {
    pub status: Status,
    /// Human-readable notes, one per problem found.
    pub messages: Vec<String>,
    /// Step count actually used, after any retries.
    pub j: usize,
    pub steps_completed: usize,
}

/// Worker cap from [`THREADS_ENV`], if set.
pub fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::param(THREADS_ENV, format!("expected a positive integer, got `{v}`"))),
        },
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::param(THREADS_ENV, e.to_string()))?
            .install(f)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: PathBuf, text: String) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Ledger and mass-law violations of a finished trajectory. The mass law is
/// measured against `int |u_0|` so that zero-mean data keeps a useful scale.
pub fn invariant_violations(traj: &Trajectory, ledger_tol: f64, mass_tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let ledger = lyapunov_ledger(traj);
    let ledger_limit = ledger_tol * ledger.initial.abs();
    for k in ledger.violations(ledger_limit) {
        out.push(format!(
            "energy ledger violated at step {k}: slack {:.3e} > {ledger_limit:.3e}",
            ledger.slacks[k - 1]
        ));
    }
    let mass = mass_law_check(traj);
    let scale = integrate(&traj.u0().map(f64::abs));
    let mass_limit = mass_tol * scale;
    for (i, &v) in mass.violations.iter().enumerate() {
        if v > mass_limit {
            out.push(format!(
                "mass law violated at step {}: defect {v:.3e} > {mass_limit:.3e}",
                i + 1
            ));
        }
    }
    out
}

/// Runs one trajectory and writes `resolved.cfg`, `diag.csv`, snapshots and
/// a raster of the final height into the output directory.
///
/// When a step fails to converge and `retry_halve_dt > 0`, the whole run is
/// repeated with twice as many steps, up to that many times.
/// `resolved.cfg` records the step count that was finally used.
pub fn run_single(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    let grid = cfg.grid()?;
    let u0 = make_initial_data(&cfg.init, grid)?;

    let mut used = cfg.clone();
    let mut messages = Vec::new();
    let mut attempt = 0;
    let outcome = loop {
        match advance(&u0, used.t_end, used.j, &used.params()?, &used.solver) {
            Ok(traj) => break Ok(traj),
            Err((_, e)) if e.is_non_convergence() && attempt < cfg.retry_halve_dt => {
                messages.push(format!("j = {}: {e}; retrying with half the step", used.j));
                attempt += 1;
                used.j *= 2;
            }
            Err(failure) => break Err(failure),
        }
    };
    write(dir.join("resolved.cfg"), used.to_text())?;

    let (traj, error) = match outcome {
        Ok(traj) => (traj, None),
        Err((partial, e)) => (partial, Some(e)),
    };
    if traj.states.is_empty() {
        return Err(error.unwrap_or_else(|| Error::param("j", "no states produced")));
    }
    write(dir.join("diag.csv"), diag_csv(&traj))?;
    write_snapshots(&traj, used.snapshot_interval(), dir)?;
    if let Some(last) = traj.states.last() {
        emit_raster(&last.u, &dir.join("u_final.pgm"))?;
    }

    let steps_completed = traj.j();
    let status = match error {
        Some(e) if e.is_non_convergence() => {
            messages.push(e.to_string());
            Status::NonConvergence
        }
        Some(e) => return Err(e),
        None => {
            let found = invariant_violations(&traj, cfg.ledger_tol, cfg.mass_tol);
            let status = if found.is_empty() {
                Status::Ok
            } else {
                Status::InvariantViolation
            };
            messages.extend(found);
            status
        }
    };
    Ok(RunReport {
        status,
        messages,
        j: used.j,
        steps_completed,
    })
}

#[derive(Debug, Clone)]
pub struct RefinementReport {
    pub status: Status,
    pub messages: Vec<String>,
    pub rows: Vec<CauchyRow>,
}

/// Runs `levels` trajectories with `j, 2j, 4j, ...` steps from the same data,
/// writes `cauchy.csv` with the gradient distance between consecutive
/// levels, and checks that the distances strictly decrease.
pub fn run_refinement(cfg: &RunConfig, levels: usize, threads: Option<usize>) -> Result<RefinementReport> {
    cfg.validate()?;
    if levels < 2 {
        return Err(Error::param("levels", "need at least two levels"));
    }
    let dir = &cfg.output_dir;
    create_dir(dir)?;
    write(dir.join("resolved.cfg"), cfg.to_text())?;
    let u0 = make_initial_data(&cfg.init, cfg.grid()?)?;

    let js: Vec<usize> = (0..levels).map(|l| cfg.j << l).collect();
    let runs = with_threads(threads, || {
        js.par_iter()
            .map(|&j| {
                let params = cfg.params()?.with_dt(cfg.t_end / j as f64)?;
                advance(&u0, cfg.t_end, j, &params, &cfg.solver).map_err(|(_, e)| e)
            })
            .collect::<Vec<Result<Trajectory>>>()
    })?;

    let mut trajs = Vec::new();
    let mut messages = Vec::new();
    for (j, run) in js.iter().zip(runs) {
        match run {
            Ok(t) => {
                write(dir.join(format!("diag_j{j:04}.csv")), diag_csv(&t))?;
                trajs.push(t);
            }
            Err(e) if e.is_non_convergence() => messages.push(format!("j = {j}: {e}")),
            Err(e) => return Err(e),
        }
    }
    if trajs.len() < levels {
        return Ok(RefinementReport {
            status: Status::NonConvergence,
            messages,
            rows: Vec::new(),
        });
    }

    let rows = trajs
        .windows(2)
        .map(|w| {
            Ok(CauchyRow {
                j_coarse: w[0].j(),
                j_fine: w[1].j(),
                p: cfg.p,
                norm: refinement_cauchy(&w[0], &w[1], cfg.p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write(dir.join("cauchy.csv"), cauchy_csv(&rows))?;
    for w in rows.windows(2) {
        if !(w[1].norm < w[0].norm) {
            messages.push(format!(
                "refinement distance did not decrease: {:.6e} (j = {}) -> {:.6e} (j = {})",
                w[0].norm, w[0].j_fine, w[1].norm, w[1].j_fine
            ));
        }
    }
    let status = if messages.is_empty() {
        Status::Ok
    } else {
        Status::InvariantViolation
    };
    Ok(RefinementReport {
        status,
        messages,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub status: Status,
    pub reports: Vec<OracleReport>,
}

pub fn run_verify(samples: &SampleConfig, threads: Option<usize>) -> Result<VerifyReport> {
    let reports = run_suite(samples, threads)?;
    let status = if reports.iter().all(OracleReport::passed) {
        Status::Ok
    } else {
        Status::InvariantViolation
    };
    Ok(VerifyReport { status, reports })
}
