//! Initial height profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::InitSpec;
use crate::error::Result;
use crate::grid::{GridSpec, ScalarField};
use crate::output::read_field_csv;

pub fn make_initial_data(spec: &InitSpec, grid: GridSpec) -> Result<ScalarField> {
    let field = match *spec {
        InitSpec::Constant { c } => ScalarField::constant(grid, c),
        InitSpec::Gaussian { x0, y0, sigma, amp } => ScalarField::from_fn(grid, |i, j| {
            let (x, y) = grid.center(i, j);
            let r2 = (x - x0).powi(2) + (y - y0).powi(2);
            amp * (-r2 / (2.0 * sigma * sigma)).exp()
        }),
        InitSpec::Cone { x0, y0, slope } => ScalarField::from_fn(grid, |i, j| {
            let (x, y) = grid.center(i, j);
            -slope * (x - x0).hypot(y - y0)
        }),
        InitSpec::RandomSmooth { seed, cutoff } => random_smooth(grid, seed, cutoff),
        InitSpec::File { ref path } => return read_field_csv(path, Some(grid)),
    };
    Ok(field)
}

/// Sum of Neumann cosine modes `cos(pi kx x / lx) cos(pi ky y / ly)` with
/// `1 <= kx + ky`, `kx, ky <= cutoff`, and uniform random amplitudes damped
/// by `1 / (1 + kx^2 + ky^2)`.
fn random_smooth(grid: GridSpec, seed: u64, cutoff: usize) -> ScalarField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut modes = Vec::new();
    for ky in 0..=cutoff {
        for kx in 0..=cutoff {
            if kx + ky == 0 {
                continue;
            }
            let a: f64 = rng.gen_range(-1.0..1.0);
            modes.push((kx as f64, ky as f64, a / (1.0 + (kx * kx + ky * ky) as f64)));
        }
    }
    let (lx, ly) = grid.extent();
    let pi = std::f64::consts::PI;
    ScalarField::from_fn(grid, |i, j| {
        let (x, y) = grid.center(i, j);
        modes
            .iter()
            .map(|&(kx, ky, a)| a * (pi * kx * x / lx).cos() * (pi * ky * y / ly).cos())
            .sum()
    })
}
