use super::Trajectory;
use crate::error::{Error, Result};
use crate::grid::{gradient, integrate, lp_sum_faces, ScalarField};
use crate::model::{energy_phi, ModelParams};

/// `L(u) = Phi_eps(u) + (eps/2) int u^2`.
pub fn lyapunov(u: &ScalarField, params: &ModelParams) -> f64 {
    energy_phi(u, params) + 0.5 * params.eps * integrate(&u.mul(u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerReport {
    /// `L(u_k) + dissipation_k - L(u_{k-1})` for `k = 1..=j`; should be `<= 0`.
    pub slacks: Vec<f64>,
    /// `L(u_0)`, the natural scale of the slacks.
    pub initial: f64,
}

impl LedgerReport {
    pub fn max_slack(&self) -> f64 {
        self.slacks.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Step indices whose slack exceeds `tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.slacks
            .iter()
            .enumerate()
            .filter(|(_, &s)| s > tol)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Per-step discrete energy inequality
/// `L(u_k) + dt int M grad v . grad v + dt eps int |grad v|^2 + dt eps int v^2 <= L(u_{k-1})`.
pub fn lyapunov_ledger(traj: &Trajectory) -> LedgerReport {
    let slacks = traj
        .states
        .windows(2)
        .map(|w| {
            let (prev, cur) = (&w[0].diagnostics, &w[1].diagnostics);
            cur.lyapunov + cur.dissipation() - prev.lyapunov
        })
        .collect();
    LedgerReport {
        slacks,
        initial: traj.states.first().map_or(0.0, |s| s.diagnostics.lyapunov),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MassReport {
    /// `|int u_k (1 + dt eps^2) - int u_{k-1}|` for `k = 1..=j`.
    pub violations: Vec<f64>,
    /// `|int u_0|`.
    pub initial_mass: f64,
}

impl MassReport {
    pub fn max_violation(&self) -> f64 {
        self.violations.iter().copied().fold(0.0, f64::max)
    }

    /// Largest violation relative to `|int u_0|` (absolute when that is zero).
    pub fn max_relative(&self) -> f64 {
        let m = self.max_violation();
        if self.initial_mass > 0.0 {
            m / self.initial_mass
        } else {
            m
        }
    }
}

/// Checks the discrete mass law `int u_k (1 + dt eps^2) = int u_{k-1}`
/// (with `eps = dt` this is the `1 + dt^3` decay).
pub fn mass_law_check(traj: &Trajectory) -> MassReport {
    let factor = traj.params.mass_factor();
    let violations = traj
        .states
        .windows(2)
        .map(|w| (w[1].diagnostics.mass * factor - w[0].diagnostics.mass).abs())
        .collect();
    MassReport {
        violations,
        initial_mass: traj.states.first().map_or(0.0, |s| s.diagnostics.mass.abs()),
    }
}

/// `|| grad ubar_a - grad ubar_b ||_{L^p(Omega x (0,T))}` for two runs from the
/// same data, where `b` uses an integer multiple of `a`'s step count. Both
/// interpolants are constant on every fine subinterval, so the time integral
/// is exact.
pub fn refinement_cauchy(a: &Trajectory, b: &Trajectory, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::param("p", "L^p norm needs p > 1"));
    }
    let (ja, jb) = (a.j(), b.j());
    if ja == 0 || jb == 0 {
        return Err(Error::param("j", "trajectories must contain at least one step"));
    }
    let (coarse, fine) = if ja <= jb { (a, b) } else { (b, a) };
    let (jc, jf) = (coarse.j(), fine.j());
    if jf % jc != 0 {
        return Err(Error::param(
            "j",
            format!("fine step count {jf} is not a multiple of {jc}"),
        ));
    }
    if coarse.u0().grid() != fine.u0().grid() {
        return Err(Error::ShapeMismatch("trajectories use different grids".into()));
    }
    if coarse.u0() != fine.u0() {
        return Err(Error::param("u0", "trajectories start from different data"));
    }
    if (coarse.t_end - fine.t_end).abs() > 1e-12 * coarse.t_end {
        return Err(Error::param("T", "trajectories cover different time intervals"));
    }
    let ratio = jf / jc;
    let dt_fine = fine.t_end / jf as f64;
    let mut total = 0.0;
    for kf in 1..=jf {
        let kc = (kf - 1) / ratio + 1;
        let diff = fine.states[kf].u.sub(&coarse.states[kc].u);
        total += dt_fine * lp_sum_faces(&gradient(&diff), p);
    }
    Ok(total.powf(1.0 / p))
}
