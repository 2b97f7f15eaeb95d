use super::{norm2, pcg, CornerOperator, SolverConfig, SpectralPreconditioner, DAMPING_FLOOR};
use crate::error::{Error, Result};
use crate::grid::{integrate, ScalarField};
use crate::model::{energy_phi, flux_coefficients, flux_tangents, ModelParams};

/// Linear operator `-div(a grad .) + eps` with `a = F_eps(|grad u|^2)` frozen at `u`.
pub fn p_laplacian_operator(u: &ScalarField, params: &ModelParams) -> CornerOperator {
    CornerOperator::scalar(*u.grid(), &flux_coefficients(u, params), params.eps)
}

/// Linearization of the p-Laplacian operator at `u`.
pub fn p_laplacian_tangent(u: &ScalarField, params: &ModelParams) -> CornerOperator {
    CornerOperator::new(*u.grid(), flux_tangents(u, params), params.eps)
}

/// `-div(F_eps(|grad u|^2) grad u) + eps u`.
pub fn apply_p_laplacian_forward(u: &ScalarField, params: &ModelParams) -> ScalarField {
    p_laplacian_operator(u, params).apply_field(u)
}

/// Convex functional minimized by the p-Laplacian solve:
/// `Phi_eps(u) + (eps/2) int u^2 - int psi u`.
pub fn p_laplacian_functional(u: &ScalarField, psi: &ScalarField, params: &ModelParams) -> f64 {
    energy_phi(u, params) + 0.5 * params.eps * integrate(&u.mul(u)) - integrate(&psi.mul(u))
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub u: ScalarField,
    pub iterations: usize,
    pub cg_iterations: usize,
    /// `||A(u) - psi|| / ||psi||`.
    pub residual: f64,
    /// Functional value after each accepted iterate.
    pub energy_history: Vec<f64>,
}

/// Solves `-div(F_eps(|grad u|^2) grad u) + eps u = psi` from a zero guess.
pub fn picard_p_laplacian(
    psi: &ScalarField,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<ScalarField> {
    picard_p_laplacian_from(psi, &ScalarField::zeros(*psi.grid()), params, config).map(|o| o.u)
}

/// Damped Newton iteration on the convex functional
/// [`p_laplacian_functional`]. Each step solves the linearized problem (the
/// frozen flux coefficient plus its gradient correction, still SPD) for the
/// current residual, and the step length is halved whenever the functional
/// would increase.
///
/// The tangent operator is positive definite, so the step is a descent
/// direction and backtracking always succeeds.
pub fn picard_p_laplacian_from(
    psi: &ScalarField,
    initial: &ScalarField,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<PicardOutcome> {
    let grid = *psi.grid();
    if initial.grid() != &grid {
        return Err(Error::ShapeMismatch("initial guess grid differs from psi".into()));
    }
    let psi_norm = norm2(psi.values());
    if psi_norm == 0.0 {
        return Ok(PicardOutcome {
            u: ScalarField::zeros(grid),
            iterations: 0,
            cg_iterations: 0,
            residual: 0.0,
            energy_history: Vec::new(),
        });
    }

    let mut u = initial.clone();
    let mut energy = p_laplacian_functional(&u, psi, params);
    let mut energy_history = vec![energy];
    let mut theta = config.picard_damping;
    let mut streak = 0;
    let mut cg_total = 0;
    let mut last_update = f64::INFINITY;
    let mut residual = f64::INFINITY;

    for it in 1..=config.picard_max_iter {
        let forward = apply_p_laplacian_forward(&u, params);
        let rhs = psi.sub(&forward);
        let op = p_laplacian_tangent(&u, params);
        let pre = SpectralPreconditioner::helmholtz(&grid, op.mean_coefficient(), params.eps);
        let inner_tol = if last_update < 100.0 * config.picard_tol {
            config.cg_tol.min(0.1 * config.picard_tol)
        } else {
            config.cg_tol
        };
        // The step is relative to `u`, so the inner tolerance is taken
        // against `psi` rather than the shrinking residual.
        let rnorm = norm2(rhs.values());
        let mut step = vec![0.0; grid.n_cells()];
        if rnorm > 0.0 {
            let tol = (inner_tol * psi_norm / rnorm).min(0.5);
            let cg = pcg(&op, &pre, rhs.values(), &mut step, tol, config.cg_max_iter)?;
            cg_total += cg.iterations;
        }
        let target = u.axpby(1.0, &ScalarField::from_values(grid, step)?, 1.0);

        let (candidate, cand_energy) = loop {
            let cand = u.axpby(1.0 - theta, &target, theta);
            let e = p_laplacian_functional(&cand, psi, params);
            let slack = 1e-13 * (energy.abs() + e.abs() + 1.0);
            if e <= energy + slack || theta <= DAMPING_FLOOR {
                break (cand, e);
            }
            theta = (0.5 * theta).max(DAMPING_FLOOR);
            streak = 0;
        };

        let denom = norm2(candidate.values()).max(f64::MIN_POSITIVE);
        last_update = norm2(candidate.sub(&u).values()) / denom;
        debug_assert!(
            cand_energy <= energy + 1e-10 * (energy.abs() + 1.0) || theta <= DAMPING_FLOOR,
            "p-Laplacian functional increased: {energy} -> {cand_energy}"
        );
        u = candidate;
        energy = cand_energy;
        energy_history.push(energy);

        streak += 1;
        if streak >= 2 {
            theta = 1.0;
        }

        residual = norm2(apply_p_laplacian_forward(&u, params).sub(psi).values()) / psi_norm;
        if last_update <= config.picard_tol && residual <= 10.0 * config.cg_tol {
            return Ok(PicardOutcome {
                u,
                iterations: it,
                cg_iterations: cg_total,
                residual,
                energy_history,
            });
        }
    }
    Err(Error::NonConvergence {
        solver: "p-Laplacian iteration",
        iterations: config.picard_max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::solvers::cg_solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> GridSpec {
        GridSpec::with_extent(12, 10, 1.0, 1.0).unwrap()
    }

    #[test]
    fn forward_of_constant() {
        let p = ModelParams::fixed(3.0, 1.0, 0.0, 0.1, 0.1).unwrap();
        let out = apply_p_laplacian_forward(&ScalarField::constant(grid(), 4.0), &p);
        assert!(out.values().iter().all(|&v| (v - 0.4).abs() < 1e-14));
    }

    #[test]
    fn forward_is_linear_for_p2() {
        let g = grid();
        let p = ModelParams::fixed(2.0, 0.0, 0.0, 0.3, 0.1).unwrap();
        let a = ScalarField::from_fn(g, |i, j| (i as f64).sin() + j as f64);
        let b = ScalarField::from_fn(g, |i, j| (i * j) as f64 * 0.01);
        let lhs = apply_p_laplacian_forward(&a.axpby(2.0, &b, -3.0), &p);
        let rhs = apply_p_laplacian_forward(&a, &p).axpby(2.0, &apply_p_laplacian_forward(&b, &p), -3.0);
        assert!(lhs.sub(&rhs).max_abs() < 1e-10);
    }

    #[test]
    fn constant_psi_converges_immediately() {
        let p = ModelParams::fixed(3.0, 1.0, 0.0, 0.2, 0.1).unwrap();
        let out = picard_p_laplacian_from(
            &ScalarField::constant(grid(), 1.0),
            &ScalarField::zeros(grid()),
            &p,
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(out.u.values().iter().all(|&v| (v - 5.0).abs() < 1e-10));
        assert!(out.iterations <= 2, "took {} iterations", out.iterations);
    }

    #[test]
    fn zero_psi_is_zero() {
        let p = ModelParams::fixed(1.5, 1.0, 0.0, 0.2, 0.1).unwrap();
        let u = picard_p_laplacian(&ScalarField::zeros(grid()), &p, &SolverConfig::default()).unwrap();
        assert_eq!(u.max_abs(), 0.0);
    }

    #[test]
    fn linear_case_matches_single_solve() {
        let g = grid();
        let p = ModelParams::fixed(2.0, 0.0, 0.0, 0.05, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let psi = ScalarField::from_fn(g, |_, _| rng.gen_range(-1.0..1.0));
        let cfg = SolverConfig::default();
        let u = picard_p_laplacian(&psi, &p, &cfg).unwrap();
        let w = cg_solve(&CornerOperator::constant(g, 1.0, 0.05), &psi, &cfg).unwrap();
        assert!(u.sub(&w).l2_norm() <= 1e-8 * w.l2_norm());
    }

    #[test]
    fn energy_descends_and_initial_guess_does_not_matter() {
        let g = grid();
        let p = ModelParams::fixed(1.5, 1.0, 0.0, 0.05, 0.1).unwrap();
        let psi = ScalarField::from_fn(g, |i, j| {
            let (x, y) = g.center(i, j);
            (3.0 * x).cos() * (2.0 * y).sin()
        });
        let cfg = SolverConfig::default();
        let a = picard_p_laplacian_from(&psi, &ScalarField::zeros(g), &p, &cfg).unwrap();
        for w in a.energy_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
        let start = ScalarField::from_fn(g, |i, _| i as f64);
        let b = picard_p_laplacian_from(&psi, &start, &p, &cfg).unwrap();
        let diff = a.u.sub(&b.u).l2_norm() / a.u.l2_norm();
        assert!(diff <= 10.0 * cfg.picard_tol, "difference {diff}");
    }

    #[test]
    fn iteration_cap_is_reported() {
        let g = grid();
        let p = ModelParams::fixed(3.0, 1.0, 0.0, 0.01, 0.1).unwrap();
        let psi = ScalarField::from_fn(g, |i, j| ((i + 2 * j) % 5) as f64);
        let cfg = SolverConfig {
            picard_max_iter: 1,
            ..Default::default()
        };
        let err = picard_p_laplacian(&psi, &p, &cfg).unwrap_err();
        assert!(err.is_non_convergence());
    }
}
