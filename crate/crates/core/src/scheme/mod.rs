//! Rothe time stepping, time interpolants, and the per-step invariants.

mod checks;
mod step;

pub use checks::{
    lyapunov, lyapunov_ledger, mass_law_check, refinement_cauchy, LedgerReport, MassReport,
};
pub use step::{map_b, solve_step, step_residual, StepSolution};

use crate::error::{Error, Result};
use crate::grid::{integrate, ScalarField};
use crate::model::{dissipation_integral, mobility_dissipation, MobilityField, ModelParams};
use crate::solvers::{apply_p_laplacian_forward, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// `Phi_eps(u_k) + (eps/2) int u_k^2`.
    pub lyapunov: f64,
    /// `dt int M(grad u_k) grad v_k . grad v_k`.
    pub diss_mob: f64,
    /// `dt eps int |grad v_k|^2`.
    pub diss_grad: f64,
    /// `dt eps int v_k^2`.
    pub diss_mass: f64,
    /// `int u_k`.
    pub mass: f64,
    /// `dt int |grad v_k|^2 / (1 + q |grad u_k|)`, the lower bound of `diss_mob`.
    pub diss_lower: f64,
    pub fp_iters: usize,
    pub fp_residual: f64,
    pub cg_iters: usize,
}

impl StepDiagnostics {
    pub fn dissipation(&self) -> f64 {
        self.diss_mob + self.diss_grad + self.diss_mass
    }

    fn evaluate(u: &ScalarField, v: &ScalarField, params: &ModelParams, dissipate: bool) -> Self {
        let (diss_mob, diss_grad, diss_mass, diss_lower) = if dissipate {
            let mobility = MobilityField::from_height(u, params.q);
            let gv = crate::grid::gradient(v);
            (
                params.dt * mobility_dissipation(v, &mobility),
                params.dt * params.eps * gv.inner(&gv),
                params.dt * params.eps * integrate(&v.mul(v)),
                params.dt * dissipation_integral(v, u, params),
            )
        } else {
            (0.0, 0.0, 0.0, 0.0)
        };
        Self {
            lyapunov: lyapunov(u, params),
            diss_mob,
            diss_grad,
            diss_mass,
            mass: integrate(u),
            diss_lower,
            fp_iters: 0,
            fp_residual: 0.0,
            cg_iters: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepState {
    pub k: usize,
    pub t: f64,
    pub u: ScalarField,
    pub v: ScalarField,
    pub diagnostics: StepDiagnostics,
}

impl StepState {
    /// State at `t = 0`; `v_0` is the chemical potential of the initial data.
    pub fn initial(u0: &ScalarField, params: &ModelParams) -> Self {
        let v = apply_p_laplacian_forward(u0, params);
        let diagnostics = StepDiagnostics::evaluate(u0, &v, params, false);
        Self {
            k: 0,
            t: 0.0,
            u: u0.clone(),
            v,
            diagnostics,
        }
    }
}

/// Solves one step from `u_prev` and packages it as state `k = 1`.
pub fn fixed_point_step(
    u_prev: &ScalarField,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<StepState> {
    let sol = solve_step(u_prev, params, config)?;
    Ok(package(1, params.dt, sol, params))
}

fn package(k: usize, t: f64, sol: StepSolution, params: &ModelParams) -> StepState {
    let mut diagnostics = StepDiagnostics::evaluate(&sol.u, &sol.v, params, true);
    diagnostics.fp_iters = sol.iterations;
    diagnostics.fp_residual = sol.residual;
    diagnostics.cg_iters = sol.cg_iterations;
    StepState {
        k,
        t,
        u: sol.u,
        v: sol.v,
        diagnostics,
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: ModelParams,
    pub t_end: f64,
    /// `states[k]` is the state at `t_k = k dt`, `k = 0..=j`.
    pub states: Vec<StepState>,
}

impl Trajectory {
    /// Number of steps.
    pub fn j(&self) -> usize {
        self.states.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.params.dt
    }

    pub fn u0(&self) -> &ScalarField {
        &self.states[0].u
    }

    /// True once all `j` steps have been taken.
    pub fn is_complete(&self, j: usize) -> bool {
        self.j() == j
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.t_end * (1.0 + 1e-12)) {
            return Err(Error::TimeOutOfRange { t, t_end: self.t_end });
        }
        Ok(())
    }

    /// Index `k` with `t` in `(t_{k-1}, t_k]`, and `0` at `t = 0`.
    fn interval(&self, t: f64) -> usize {
        if t <= 0.0 {
            return 0;
        }
        let k = (t / self.dt()).ceil() as usize;
        // Rounding can put an exact grid time one interval late.
        let k = if k >= 1 && ((k - 1) as f64 * self.dt()) >= t { k - 1 } else { k };
        k.clamp(1, self.j())
    }
}

/// Marches `j` steps of size `t_end / j` from `u0`. On a failed step the
/// error carries the step index; the partial trajectory is returned alongside.
pub fn advance(
    u0: &ScalarField,
    t_end: f64,
    j: usize,
    params: &ModelParams,
    config: &SolverConfig,
) -> std::result::Result<Trajectory, (Trajectory, Error)> {
    let start = |e: Error| {
        (
            Trajectory {
                params: *params,
                t_end,
                states: Vec::new(),
            },
            e,
        )
    };
    if j == 0 {
        return Err(start(Error::param("j", "need at least one step")));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(start(Error::param("T", "final time must be positive")));
    }
    if !u0.is_finite() {
        return Err(start(Error::param("u0", "initial data must be finite")));
    }
    let params = match params.with_dt(t_end / j as f64) {
        Ok(p) => p,
        Err(e) => return Err(start(e)),
    };
    if let Err(e) = config.validate() {
        return Err(start(e));
    }

    let mut traj = Trajectory {
        params,
        t_end,
        states: Vec::with_capacity(j + 1),
    };
    traj.states.push(StepState::initial(u0, &params));
    for k in 1..=j {
        let prev = &traj.states[k - 1].u;
        match solve_step(prev, &params, config) {
            Ok(sol) => {
                let t = if k == j { t_end } else { k as f64 * params.dt };
                traj.states.push(package(k, t, sol, &params));
            }
            Err(e) => {
                return Err((
                    traj,
                    Error::Step {
                        k,
                        source: Box::new(e),
                    },
                ))
            }
        }
    }
    Ok(traj)
}

/// Piecewise-linear interpolant: on `(t_{k-1}, t_k]`,
/// `s u_k + (1 - s) u_{k-1}` with `s = (t - t_{k-1}) / dt`.
pub fn eval_tilde_u(traj: &Trajectory, t: f64) -> Result<ScalarField> {
    traj.check_time(t)?;
    let k = traj.interval(t);
    if k == 0 {
        return Ok(traj.states[0].u.clone());
    }
    let (prev, cur) = (&traj.states[k - 1], &traj.states[k]);
    if t == prev.t {
        return Ok(prev.u.clone());
    }
    let s = (t - prev.t) / traj.dt();
    if t == cur.t || s >= 1.0 {
        return Ok(cur.u.clone());
    }
    Ok(cur.u.axpby(s, &prev.u, 1.0 - s))
}

/// Piecewise-constant interpolant: `u_k` on `(t_{k-1}, t_k]`, `u_0` at `t = 0`.
pub fn eval_bar_u(traj: &Trajectory, t: f64) -> Result<ScalarField> {
    traj.check_time(t)?;
    Ok(traj.states[traj.interval(t)].u.clone())
}

/// Piecewise-constant interpolant of the chemical potential: `v_k` on `(t_{k-1}, t_k]`.
pub fn eval_bar_v(traj: &Trajectory, t: f64) -> Result<ScalarField> {
    traj.check_time(t)?;
    Ok(traj.states[traj.interval(t)].v.clone())
}
