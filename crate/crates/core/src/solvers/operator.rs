use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, LinearOperator};
use crate::grid::{divergence_into, gradient_into, Corner, GridSpec, ScalarField, CORNER_WEIGHT};
use crate::model::Sym2;

/// `x -> -div(T grad x) + c x` with a symmetric tensor `T` sampled at cell
/// corners, under homogeneous Neumann conditions.
///
/// The bilinear form is `sum_corners (area/4) T grad x . grad y + c sum x y area`,
/// so the operator is symmetric, and positive definite whenever every `T` is
/// positive semidefinite and `c > 0`.
#[derive(Debug, Clone)]
pub struct CornerOperator {
    grid: GridSpec,
    tensors: Vec<Sym2>,
    zero_order: f64,
    isotropic: bool,
}

impl CornerOperator {
    pub fn new(grid: GridSpec, tensors: Vec<Sym2>, zero_order: f64) -> Self {
        assert_eq!(tensors.len(), 4 * grid.n_cells());
        let isotropic = tensors.iter().all(|t| t.xy == 0.0 && t.xx == t.yy);
        Self {
            grid,
            tensors,
            zero_order,
            isotropic,
        }
    }

    /// Scalar per-corner coefficients.
    pub fn scalar(grid: GridSpec, coeffs: &[f64], zero_order: f64) -> Self {
        Self::new(
            grid,
            coeffs.iter().map(|&a| Sym2::scalar(a)).collect(),
            zero_order,
        )
    }

    /// `-a Laplacian + c` with a constant coefficient.
    pub fn constant(grid: GridSpec, a: f64, zero_order: f64) -> Self {
        Self::new(grid, vec![Sym2::scalar(a); 4 * grid.n_cells()], zero_order)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn zero_order(&self) -> f64 {
        self.zero_order
    }

    pub fn tensors(&self) -> &[Sym2] {
        &self.tensors
    }

    /// Mean of the tensor traces divided by two; the best constant-coefficient
    /// stand-in for preconditioning.
    pub fn mean_coefficient(&self) -> f64 {
        self.tensors.iter().map(|t| 0.5 * (t.xx + t.yy)).sum::<f64>() / self.tensors.len() as f64
    }

    pub fn apply_field(&self, x: &ScalarField) -> ScalarField {
        let mut out = ScalarField::zeros(self.grid);
        self.apply(x.values(), out.values_mut());
        out
    }

    /// Face fluxes `T grad x` averaged from the corner samples.
    pub(crate) fn flux_into(&self, x: &[f64], fx: &mut [f64], fy: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut gx = vec![0.0; g.n_xfaces()];
        let mut gy = vec![0.0; g.n_yfaces()];
        gradient_into(g, x, &mut gx, &mut gy);
        fx.fill(0.0);
        fy.fill(0.0);
        for j in 0..ny {
            for i in 0..nx {
                let cell = j * nx + i;
                for c in Corner::ALL {
                    let xf = j * (nx + 1) + i + c.east();
                    let yf = (j + c.north()) * nx + i;
                    let t = &self.tensors[4 * cell + c.0 as usize];
                    let (a, b) = (gx[xf], gy[yf]);
                    if self.isotropic {
                        fx[xf] += CORNER_WEIGHT * t.xx * a;
                        fy[yf] += CORNER_WEIGHT * t.xx * b;
                    } else {
                        fx[xf] += CORNER_WEIGHT * (t.xx * a + t.xy * b);
                        fy[yf] += CORNER_WEIGHT * (t.xy * a + t.yy * b);
                    }
                }
            }
        }
        for j in 0..ny {
            fx[j * (nx + 1)] = 0.0;
            fx[j * (nx + 1) + nx] = 0.0;
        }
        fy[..nx].fill(0.0);
        fy[ny * nx..].fill(0.0);
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let mut diag = vec![self.zero_order; g.n_cells()];
        // (cell, d/dx coefficient, d/dy coefficient) of each cell touching a corner sample.
        let mut touched: Vec<(usize, f64, f64)> = Vec::with_capacity(4);
        for j in 0..ny {
            for i in 0..nx {
                let cell = j * nx + i;
                for c in Corner::ALL {
                    touched.clear();
                    let a = i + c.east();
                    if a > 0 && a < nx {
                        touched.push((j * nx + a - 1, -1.0 / g.hx, 0.0));
                        touched.push((j * nx + a, 1.0 / g.hx, 0.0));
                    }
                    let b = j + c.north();
                    if b > 0 && b < ny {
                        for (k, s) in [((b - 1) * nx + i, -1.0 / g.hy), (b * nx + i, 1.0 / g.hy)] {
                            match touched.iter_mut().find(|e| e.0 == k) {
                                Some(e) => e.2 = s,
                                None => touched.push((k, 0.0, s)),
                            }
                        }
                    }
                    let t = &self.tensors[4 * cell + c.0 as usize];
                    for &(k, cx, cy) in &touched {
                        diag[k] += CORNER_WEIGHT * t.quad_form([cx, cy]);
                    }
                }
            }
        }
        diag
    }
}

impl LinearOperator for CornerOperator {
    fn len(&self) -> usize {
        self.grid.n_cells()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let mut fx = vec![0.0; g.n_xfaces()];
        let mut fy = vec![0.0; g.n_yfaces()];
        self.flux_into(x, &mut fx, &mut fy);
        divergence_into(g, &fx, &fy, out);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = -*o + self.zero_order * xi;
        }
    }
}

/// Spot-checks symmetry and positivity on random vectors; returns the worst
/// relative symmetry defect, or `None` if a non-positive curvature was seen.
pub fn check_spd(op: &dyn LinearOperator, trials: usize, seed: u64) -> Option<f64> {
    let n = op.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    let (mut ax, mut ay) = (vec![0.0; n], vec![0.0; n]);
    for _ in 0..trials {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        op.apply(&x, &mut ax);
        op.apply(&y, &mut ay);
        let (xay, yax) = (dot(&x, &ay), dot(&y, &ax));
        let scale = dot(&x, &ax).abs().max(dot(&y, &ay).abs());
        if !(dot(&x, &ax) > 0.0) {
            return None;
        }
        worst = worst.max((xay - yax).abs() / scale);
    }
    Some(worst)
}
