use super::{check_spd, pcg, CornerOperator, SolverConfig, SpectralPreconditioner};
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::model::{MobilityField, ModelParams};

/// `v -> -div([M + eps I] grad v) + eps v`.
pub fn mobility_operator(mobility: &MobilityField, params: &ModelParams) -> CornerOperator {
    CornerOperator::new(
        *mobility.grid(),
        mobility
            .tensors()
            .iter()
            .map(|t| t.shifted(params.eps))
            .collect(),
        params.eps,
    )
}

/// Solves `-div([M + eps I] grad v) + eps v = rhs` with Neumann conditions.
pub fn solve_mobility_system(
    mobility: &MobilityField,
    rhs: &ScalarField,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<ScalarField> {
    solve_mobility_system_with(mobility, rhs, None, params, config).map(|(v, _)| v)
}

/// As [`solve_mobility_system`], optionally warm-started; also returns the CG
/// iteration count.
pub fn solve_mobility_system_with(
    mobility: &MobilityField,
    rhs: &ScalarField,
    guess: Option<&ScalarField>,
    params: &ModelParams,
    config: &SolverConfig,
) -> Result<(ScalarField, usize)> {
    if mobility.grid() != rhs.grid() {
        return Err(Error::ShapeMismatch(
            "mobility and right-hand side live on different grids".into(),
        ));
    }
    let op = mobility_operator(mobility, params);
    debug_assert!(
        check_spd(&op, 2, 0x5eed).is_some_and(|d| d < 1e-10),
        "mobility operator is not SPD"
    );
    let pre = SpectralPreconditioner::helmholtz(op.grid(), op.mean_coefficient(), params.eps);
    let mut x = match guess {
        Some(g) => g.values().to_vec(),
        None => vec![0.0; rhs.values().len()],
    };
    let out = pcg(&op, &pre, rhs.values(), &mut x, config.cg_tol, config.cg_max_iter)?;
    Ok((ScalarField::from_values(*rhs.grid(), x)?, out.iterations))
}
