use std::f64::consts::PI;

use super::Preconditioner;
use crate::grid::GridSpec;

/// Orthonormal cosine basis (DCT-II) diagonalizing the five-point Neumann
/// Laplacian on a uniform grid. Applied as dense separable transforms, which
/// is cheap at the grid sizes this crate targets.
#[derive(Debug, Clone)]
pub struct CosineBasis {
    nx: usize,
    ny: usize,
    qx: Vec<f64>,
    qy: Vec<f64>,
    /// Eigenvalues of `-Laplacian` per mode, mode-major like cell storage.
    laplace_eigs: Vec<f64>,
}

fn dct_matrix(n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for k in 0..n {
        let s = if k == 0 {
            (1.0 / n as f64).sqrt()
        } else {
            (2.0 / n as f64).sqrt()
        };
        for i in 0..n {
            q[k * n + i] = s * (PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
        }
    }
    q
}

impl CosineBasis {
    pub fn new(grid: &GridSpec) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let lx: Vec<f64> = (0..nx)
            .map(|k| (2.0 * (PI * k as f64 / (2.0 * nx as f64)).sin() / grid.hx).powi(2))
            .collect();
        let ly: Vec<f64> = (0..ny)
            .map(|k| (2.0 * (PI * k as f64 / (2.0 * ny as f64)).sin() / grid.hy).powi(2))
            .collect();
        let mut laplace_eigs = Vec::with_capacity(nx * ny);
        for ky in 0..ny {
            for kx in 0..nx {
                laplace_eigs.push(lx[kx] + ly[ky]);
            }
        }
        Self {
            nx,
            ny,
            qx: dct_matrix(nx),
            qy: dct_matrix(ny),
            laplace_eigs,
        }
    }

    pub fn laplace_eigenvalues(&self) -> &[f64] {
        &self.laplace_eigs
    }

    /// Cell values to mode coefficients.
    pub fn forward(&self, f: &[f64], out: &mut [f64]) {
        self.transform(f, out, false);
    }

    /// Mode coefficients to cell values.
    pub fn inverse(&self, c: &[f64], out: &mut [f64]) {
        self.transform(c, out, true);
    }

    fn transform(&self, f: &[f64], out: &mut [f64], transpose: bool) {
        let (nx, ny) = (self.nx, self.ny);
        let qx = |k: usize, i: usize| {
            if transpose {
                self.qx[i * nx + k]
            } else {
                self.qx[k * nx + i]
            }
        };
        let qy = |k: usize, j: usize| {
            if transpose {
                self.qy[j * ny + k]
            } else {
                self.qy[k * ny + j]
            }
        };
        let mut tmp = vec![0.0; nx * ny];
        for j in 0..ny {
            let row = &f[j * nx..(j + 1) * nx];
            for k in 0..nx {
                let mut s = 0.0;
                for (i, v) in row.iter().enumerate() {
                    s += qx(k, i) * v;
                }
                tmp[j * nx + k] = s;
            }
        }
        out.fill(0.0);
        for k in 0..ny {
            for j in 0..ny {
                let w = qy(k, j);
                let src = &tmp[j * nx..(j + 1) * nx];
                let dst = &mut out[k * nx..(k + 1) * nx];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
}

/// Inverse of a constant-coefficient operator that is a function of the
/// Neumann Laplacian, applied in the cosine basis.
#[derive(Debug, Clone)]
pub struct SpectralPreconditioner {
    basis: CosineBasis,
    inv_eigs: Vec<f64>,
}

impl SpectralPreconditioner {
    /// `symbol` maps a Laplacian eigenvalue `lambda >= 0` to the eigenvalue of
    /// the approximating operator, which must be positive.
    pub fn new(grid: &GridSpec, symbol: impl Fn(f64) -> f64) -> Self {
        Self::from_basis(CosineBasis::new(grid), symbol)
    }

    pub fn from_basis(basis: CosineBasis, symbol: impl Fn(f64) -> f64) -> Self {
        let inv_eigs = basis
            .laplace_eigs
            .iter()
            .map(|&l| {
                let s = symbol(l);
                debug_assert!(s > 0.0, "non-positive preconditioner symbol {s}");
                1.0 / s
            })
            .collect();
        Self { basis, inv_eigs }
    }

    /// `-a Laplacian + c`.
    pub fn helmholtz(grid: &GridSpec, a: f64, c: f64) -> Self {
        Self::new(grid, |l| a * l + c)
    }
}

impl Preconditioner for SpectralPreconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let mut modes = vec![0.0; r.len()];
        self.basis.forward(r, &mut modes);
        for (m, s) in modes.iter_mut().zip(&self.inv_eigs) {
            *m *= s;
        }
        self.basis.inverse(&modes, z);
    }
}
