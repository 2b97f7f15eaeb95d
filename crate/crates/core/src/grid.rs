//! Uniform rectangular grid with cell-centered scalars and face-centered vectors.
//!
//! Scalars live at cell centers, indexed `j * nx + i`. Vector quantities live on
//! faces: x-components on the `(nx + 1) * ny` vertical faces (face `i` is the
//! west face of cell `i`), y-components on the `nx * (ny + 1)` horizontal faces
//! (face `j` is the south face of cell row `j`). Homogeneous Neumann conditions
//! are imposed by keeping every boundary-face component at exactly zero, which
//! makes [`gradient`] and [`divergence`] exact adjoints.
//!
//! Nonlinear coefficients are sampled at cell *corners*: each cell carries four
//! gradient samples, one per corner, pairing the x-face and y-face that meet
//! there. See [`Corner`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 cells per direction, got {nx}x{ny}"
            )));
        }
        if !(hx > 0.0 && hx.is_finite() && hy > 0.0 && hy.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cell widths must be positive, got hx={hx}, hy={hy}"
            )));
        }
        Ok(Self { nx, ny, hx, hy })
    }

    /// Grid of `nx * ny` cells covering `[0, lx] x [0, ly]`.
    pub fn with_extent(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::new(nx, ny, lx / nx as f64, ly / ny as f64)
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn n_xfaces(&self) -> usize {
        (self.nx + 1) * self.ny
    }

    #[inline]
    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.hx * self.hy
    }

    pub fn area(&self) -> f64 {
        self.cell_area() * self.n_cells() as f64
    }

    pub fn extent(&self) -> (f64, f64) {
        (self.nx as f64 * self.hx, self.ny as f64 * self.hy)
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nx && j < self.ny);
        j * self.nx + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center coordinates.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    /// Quadrature weight of an x-face: a full cell inside, half a cell on the wall.
    pub fn xface_weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.nx {
            0.5 * self.cell_area()
        } else {
            self.cell_area()
        }
    }

    pub fn yface_weight(&self, j: usize) -> f64 {
        if j == 0 || j == self.ny {
            0.5 * self.cell_area()
        } else {
            self.cell_area()
        }
    }
}

/// One of the four corners of a cell. The gradient sample at a corner takes its
/// x-component from the adjacent vertical face and its y-component from the
/// adjacent horizontal face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Corner(pub u8);

impl Corner {
    pub const ALL: [Corner; 4] = [Corner(0), Corner(1), Corner(2), Corner(3)];

    #[inline]
    pub fn east(self) -> usize {
        (self.0 & 1) as usize
    }

    #[inline]
    pub fn north(self) -> usize {
        ((self.0 >> 1) & 1) as usize
    }
}

/// Fraction of the cell area attached to each corner sample.
pub const CORNER_WEIGHT: f64 = 0.25;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_cells()],
        }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} cell values, got {}",
                grid.n_cells(),
                values.len()
            )));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    /// Builds a field from a function of the cell indices.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                values.push(f(i, j));
            }
        }
        Self { grid, values }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &ScalarField, b: f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn sub(&self, other: &ScalarField) -> Self {
        self.axpby(1.0, other, -1.0)
    }

    pub fn mul(&self, other: &ScalarField) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x * y)
                .collect(),
        }
    }

    /// Discrete L2 norm, `sqrt(integrate(f^2))`.
    pub fn l2_norm(&self) -> f64 {
        integrate(&self.mul(self)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceVectorField {
    grid: GridSpec,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl FaceVectorField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.n_xfaces()],
            y: vec![0.0; grid.n_yfaces()],
        }
    }

    /// Validates lengths, finiteness, and the zero boundary-face condition.
    pub fn from_components(grid: GridSpec, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.n_xfaces() || y.len() != grid.n_yfaces() {
            return Err(Error::ShapeMismatch(format!(
                "expected {}+{} face values, got {}+{}",
                grid.n_xfaces(),
                grid.n_yfaces(),
                x.len(),
                y.len()
            )));
        }
        if let Some(index) = x.iter().chain(&y).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let field = Self { grid, x, y };
        if !field.boundary_is_zero() {
            return Err(Error::ShapeMismatch(
                "boundary face components must be zero".into(),
            ));
        }
        Ok(field)
    }

    /// Builds a field from per-face functions; boundary faces are forced to zero.
    pub fn from_fn(
        grid: GridSpec,
        mut fx: impl FnMut(usize, usize) -> f64,
        mut fy: impl FnMut(usize, usize) -> f64,
    ) -> Self {
        let mut field = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 1..grid.nx {
                field.x[grid.xface(i, j)] = fx(i, j);
            }
        }
        for j in 1..grid.ny {
            for i in 0..grid.nx {
                field.y[grid.yface(i, j)] = fy(i, j);
            }
        }
        field
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    fn boundary_is_zero(&self) -> bool {
        let g = &self.grid;
        (0..g.ny).all(|j| self.x[g.xface(0, j)] == 0.0 && self.x[g.xface(g.nx, j)] == 0.0)
            && (0..g.nx).all(|i| self.y[g.yface(i, 0)] == 0.0 && self.y[g.yface(i, g.ny)] == 0.0)
    }

    /// Face-weighted inner product `sum_faces F . G * faceWeight`.
    pub fn inner(&self, other: &FaceVectorField) -> f64 {
        let g = &self.grid;
        let mut sx = 0.0;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let k = g.xface(i, j);
                sx += self.x[k] * other.x[k] * g.xface_weight(i);
            }
        }
        let mut sy = 0.0;
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let k = g.yface(i, j);
                sy += self.y[k] * other.y[k] * g.yface_weight(j);
            }
        }
        sx + sy
    }

    /// Gradient sample `(x-face value, y-face value)` at a cell corner.
    #[inline]
    pub fn corner(&self, i: usize, j: usize, c: Corner) -> [f64; 2] {
        let g = &self.grid;
        [
            self.x[g.xface(i + c.east(), j)],
            self.y[g.yface(i, j + c.north())],
        ]
    }
}

pub fn gradient(f: &ScalarField) -> FaceVectorField {
    let g = *f.grid();
    let v = f.values();
    let mut out = FaceVectorField::zeros(g);
    gradient_into(&g, v, &mut out.x, &mut out.y);
    out
}

/// Slice form of [`gradient`] used by the matrix-free operators.
pub(crate) fn gradient_into(g: &GridSpec, f: &[f64], gx: &mut [f64], gy: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let (rhx, rhy) = (1.0 / g.hx, 1.0 / g.hy);
    for j in 0..ny {
        let row = j * nx;
        let frow = j * (nx + 1);
        gx[frow] = 0.0;
        for i in 1..nx {
            gx[frow + i] = (f[row + i] - f[row + i - 1]) * rhx;
        }
        gx[frow + nx] = 0.0;
    }
    gy[..nx].fill(0.0);
    for j in 1..ny {
        for i in 0..nx {
            gy[j * nx + i] = (f[j * nx + i] - f[(j - 1) * nx + i]) * rhy;
        }
    }
    gy[ny * nx..].fill(0.0);
}

pub fn divergence(field: &FaceVectorField) -> ScalarField {
    let g = *field.grid();
    let mut out = ScalarField::zeros(g);
    divergence_into(&g, &field.x, &field.y, out.values_mut());
    out
}

pub(crate) fn divergence_into(g: &GridSpec, fx: &[f64], fy: &[f64], out: &mut [f64]) {
    let (nx, ny) = (g.nx, g.ny);
    let (rhx, rhy) = (1.0 / g.hx, 1.0 / g.hy);
    for j in 0..ny {
        for i in 0..nx {
            let xf = j * (nx + 1) + i;
            let yf = j * nx + i;
            out[j * nx + i] = (fx[xf + 1] - fx[xf]) * rhx + (fy[yf + nx] - fy[yf]) * rhy;
        }
    }
}

/// Midpoint quadrature `sum values * hx * hy`.
pub fn integrate(f: &ScalarField) -> f64 {
    f.values().iter().sum::<f64>() * f.grid().cell_area()
}

/// Discrete `L^p` norm over faces, `(sum |F_component|^p * faceWeight)^(1/p)`.
pub fn lp_norm_faces(field: &FaceVectorField, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(Error::param("p", format!("L^p norm needs p > 1, got {p}")));
    }
    Ok(lp_sum_faces(field, p).powf(1.0 / p))
}

/// `sum |F_component|^p * faceWeight` without the final root.
pub(crate) fn lp_sum_faces(field: &FaceVectorField, p: f64) -> f64 {
    let g = field.grid();
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let v = field.x[g.xface(i, j)];
            if v != 0.0 {
                s += v.abs().powf(p) * g.xface_weight(i);
            }
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let v = field.y[g.yface(i, j)];
            if v != 0.0 {
                s += v.abs().powf(p) * g.yface_weight(j);
            }
        }
    }
    s
}

/// Evaluates `f` on the gradient sample at every cell corner and integrates
/// with weight `cellArea / 4` per corner.
pub fn corner_quadrature(grad: &FaceVectorField, mut f: impl FnMut([f64; 2]) -> f64) -> f64 {
    let g = grad.grid();
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            for c in Corner::ALL {
                s += f(grad.corner(i, j, c));
            }
        }
    }
    s * CORNER_WEIGHT * g.cell_area()
}
