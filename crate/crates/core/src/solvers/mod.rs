//! Elliptic solvers: preconditioned conjugate gradients over matrix-free
//! operators, the mobility equation, and the lagged-coefficient p-Laplacian.

mod cg;
mod mobility;
mod operator;
mod picard;
mod spectral;

pub use cg::{cg_solve, pcg, CgOutcome, Identity, Jacobi, LinearOperator, Preconditioner};
pub use mobility::{mobility_operator, solve_mobility_system, solve_mobility_system_with};
pub use operator::{check_spd, CornerOperator};
pub use picard::{
    apply_p_laplacian_forward, p_laplacian_functional, p_laplacian_operator, picard_p_laplacian,
    picard_p_laplacian_from, PicardOutcome,
};
pub use spectral::{CosineBasis, SpectralPreconditioner};

use crate::error::{Error, Result};

/// Lower bound for the Picard damping factor.
pub const DAMPING_FLOOR: f64 = 1.0 / 16.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Relative residual tolerance of the linear solves.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Relative update tolerance of the p-Laplacian iteration.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Initial damping factor in `(0, 1]`.
    pub picard_damping: f64,
    /// Tolerance on the time-step fixed point.
    pub fp_tol: f64,
    pub fp_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            cg_tol: 1e-10,
            cg_max_iter: 5000,
            picard_tol: 1e-9,
            picard_max_iter: 200,
            picard_damping: 1.0,
            fp_tol: 1e-10,
            fp_max_iter: 400,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.cg_tol) {
            return Err(Error::param("cg_tol", "tolerance must be positive"));
        }
        if !positive(self.picard_tol) {
            return Err(Error::param("picard_tol", "tolerance must be positive"));
        }
        if !positive(self.fp_tol) {
            return Err(Error::param("fp_tol", "tolerance must be positive"));
        }
        if self.cg_max_iter == 0 {
            return Err(Error::param("cg_max_iter", "must be at least 1"));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::param("picard_max_iter", "must be at least 1"));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::param("fp_max_iter", "must be at least 1"));
        }
        if !(self.picard_damping > 0.0 && self.picard_damping <= 1.0) {
            return Err(Error::param("picard_damping", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

pub(crate) fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
