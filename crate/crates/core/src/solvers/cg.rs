use super::{dot, norm2, SolverConfig};
use crate::error::{Error, Result};
use crate::grid::ScalarField;

use super::CornerOperator;

/// Matrix-free symmetric positive definite operator on flat cell arrays.
pub trait LinearOperator {
    fn len(&self) -> usize;
    fn apply(&self, x: &[f64], out: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct Jacobi {
    inv_diag: Vec<f64>,
}

impl Jacobi {
    pub fn new(diag: &[f64]) -> Self {
        Self {
            inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
        }
    }
}

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((z, r), d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *z = r * d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// Final `||b - Ax|| / ||b||`.
    pub residual: f64,
}

/// Preconditioned conjugate gradients on `op x = b`, starting from the
/// contents of `x`. Stops once `||b - Ax|| <= tol ||b||`.
pub fn pcg(
    op: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = op.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(x.len(), n);

    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.fill(0.0);
        return Ok(CgOutcome {
            iterations: 0,
            residual: 0.0,
        });
    }
    let target = tol * bnorm;

    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rnorm = norm2(&r);
    if rnorm <= target {
        return Ok(CgOutcome {
            iterations: 0,
            residual: rnorm / bnorm,
        });
    }

    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut last_restart = f64::INFINITY;

    for it in 1..=max_iter {
        op.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::Breakdown {
                iteration: it,
                curvature,
            });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        if rnorm <= target {
            // Guard against drift of the recursive residual.
            op.apply(x, &mut ap);
            for i in 0..n {
                r[i] = b[i] - ap[i];
            }
            let true_res = norm2(&r);
            if true_res <= 2.0 * target {
                return Ok(CgOutcome {
                    iterations: it,
                    residual: true_res / bnorm,
                });
            }
            // Restarting twice without progress means the target is below
            // what round-off allows.
            if true_res >= 0.5 * last_restart {
                return Err(Error::NonConvergence {
                    solver: "conjugate gradient",
                    iterations: it,
                    residual: true_res / bnorm,
                });
            }
            last_restart = true_res;
            rnorm = true_res;
            precond.apply(&r, &mut z);
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
            continue;
        }
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        solver: "conjugate gradient",
        iterations: max_iter,
        residual: rnorm / bnorm,
    })
}

/// Jacobi-preconditioned CG from a zero initial guess.
pub fn cg_solve(op: &CornerOperator, b: &ScalarField, config: &SolverConfig) -> Result<ScalarField> {
    let jacobi = Jacobi::new(&op.diagonal());
    let mut x = vec![0.0; op.len()];
    pcg(op, &jacobi, b.values(), &mut x, config.cg_tol, config.cg_max_iter)?;
    ScalarField::from_values(*b.grid(), x)
}
