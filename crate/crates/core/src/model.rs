//! Model coefficients: the gradient-dependent mobility tensor, the regularized
//! flux coefficient, and the surface energies.

use crate::error::{Error, Result};
use crate::grid::{corner_quadrature, gradient, Corner, FaceVectorField, GridSpec, ScalarField};

/// How the regularization parameter relates to the time step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsMode {
    /// `eps == dt`, changing together.
    Coupled,
    /// `eps` held fixed while `dt` varies.
    Fixed,
}

impl EpsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EpsMode::Coupled => "coupled",
            EpsMode::Fixed => "fixed",
        }
    }
}

impl std::str::FromStr for EpsMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "coupled" => Ok(EpsMode::Coupled),
            "fixed" => Ok(EpsMode::Fixed),
            other => Err(format!("unknown eps mode `{other}` (expected coupled|fixed)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Flux exponent, `p > 1`.
    pub p: f64,
    /// Weight of the one-Laplacian term.
    pub beta: f64,
    /// Mobility degeneracy strength.
    pub q: f64,
    /// Regularization inside the flux and of the zero-order terms.
    pub eps: f64,
    /// Time step.
    pub dt: f64,
    pub eps_mode: EpsMode,
}

impl ModelParams {
    /// Parameters with `eps = dt`.
    pub fn coupled(p: f64, beta: f64, q: f64, dt: f64) -> Result<Self> {
        let params = Self {
            p,
            beta,
            q,
            eps: dt,
            dt,
            eps_mode: EpsMode::Coupled,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn fixed(p: f64, beta: f64, q: f64, eps: f64, dt: f64) -> Result<Self> {
        let params = Self {
            p,
            beta,
            q,
            eps,
            dt,
            eps_mode: EpsMode::Fixed,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(Error::param("p", "p must exceed 1"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", "beta must be non-negative"));
        }
        if !(self.q >= 0.0) || !self.q.is_finite() {
            return Err(Error::param("q", "q must be non-negative"));
        }
        if !(self.eps > 0.0) || !self.eps.is_finite() {
            return Err(Error::param("eps", "eps must be positive"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("dt", "dt must be positive"));
        }
        if self.eps_mode == EpsMode::Coupled && self.eps != self.dt {
            return Err(Error::param("eps", "coupled mode requires eps == dt"));
        }
        Ok(())
    }

    /// Same parameters at a new time step; `eps` follows in coupled mode.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut next = *self;
        next.dt = dt;
        if self.eps_mode == EpsMode::Coupled {
            next.eps = dt;
        }
        next.validate()?;
        Ok(next)
    }

    /// Per-step decay factor of the total mass, `1 + dt * eps^2`.
    pub fn mass_factor(&self) -> f64 {
        1.0 + self.dt * self.eps * self.eps
    }
}

/// Symmetric 2x2 tensor `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub fn scalar(a: f64) -> Self {
        Self {
            xx: a,
            xy: 0.0,
            yy: a,
        }
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    #[inline]
    pub fn quad_form(&self, v: [f64; 2]) -> f64 {
        self.xx * v[0] * v[0] + 2.0 * self.xy * v[0] * v[1] + self.yy * v[1] * v[1]
    }

    /// `self + s * I`.
    pub fn shifted(&self, s: f64) -> Self {
        Self {
            xx: self.xx + s,
            xy: self.xy,
            yy: self.yy + s,
        }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        [mean - r, mean + r]
    }
}

/// Mobility tensor `S Lambda S^T` for the local height gradient `(gx, gy)`.
///
/// Along the gradient the eigenvalue is `1 / (1 + q |g|)`; across it, 1. On a
/// facet (`g == 0` exactly) the tensor is the identity.
pub fn mobility_at(gx: f64, gy: f64, q: f64) -> Sym2 {
    let g2 = gx * gx + gy * gy;
    if g2 == 0.0 {
        return Sym2::IDENTITY;
    }
    let gnorm = g2.sqrt();
    let defect = 1.0 / (1.0 + q * gnorm) - 1.0;
    Sym2 {
        xx: 1.0 + gx * gx / g2 * defect,
        xy: gx * gy / g2 * defect,
        yy: 1.0 + gy * gy / g2 * defect,
    }
}

pub fn mobility_quadratic_form(m: &Sym2, xi: [f64; 2]) -> f64 {
    m.quad_form(xi)
}

/// `F_eps(s) = (s + eps)^((p-2)/2) + beta (s + eps)^(-1/2)`.
#[inline]
pub fn flux_coeff(s: f64, params: &ModelParams) -> f64 {
    let r = s + params.eps;
    let power = if params.p == 2.0 {
        1.0
    } else {
        r.powf(0.5 * (params.p - 2.0))
    };
    if params.beta == 0.0 {
        power
    } else {
        power + params.beta / r.sqrt()
    }
}

/// `F_eps'(s)`.
#[inline]
pub fn flux_coeff_derivative(s: f64, params: &ModelParams) -> f64 {
    let r = s + params.eps;
    let power = if params.p == 2.0 {
        0.0
    } else {
        0.5 * (params.p - 2.0) * r.powf(0.5 * (params.p - 4.0))
    };
    power - 0.5 * params.beta * r.powf(-1.5)
}

/// Jacobian of `g -> F_eps(|g|^2) g`: `F I + 2 F' g g^T`. Positive definite,
/// with eigenvalue `F` across `g` and `F + 2 F' |g|^2` along it.
pub fn flux_tangent(g: [f64; 2], params: &ModelParams) -> Sym2 {
    let s = g[0] * g[0] + g[1] * g[1];
    let f = flux_coeff(s, params);
    let d = 2.0 * flux_coeff_derivative(s, params);
    Sym2 {
        xx: f + d * g[0] * g[0],
        xy: d * g[0] * g[1],
        yy: f + d * g[1] * g[1],
    }
}

/// Energy density whose derivative in `g` is `F_eps(|g|^2) g`:
/// `(1/p)(s + eps)^(p/2) + beta (s + eps)^(1/2)` with `s = |g|^2`.
#[inline]
pub fn regularized_density(s: f64, params: &ModelParams) -> f64 {
    let r = s + params.eps;
    r.powf(0.5 * params.p) / params.p + params.beta * r.sqrt()
}

/// Per-corner mobility tensors built from a height field.
#[derive(Debug, Clone, PartialEq)]
pub struct MobilityField {
    grid: GridSpec,
    tensors: Vec<Sym2>,
}

impl MobilityField {
    pub fn from_height(u: &ScalarField, q: f64) -> Self {
        Self::from_gradient(&gradient(u), q)
    }

    pub fn from_gradient(grad: &FaceVectorField, q: f64) -> Self {
        let tensors = corner_map(grad, |[gx, gy]| mobility_at(gx, gy, q));
        Self {
            grid: *grad.grid(),
            tensors,
        }
    }

    /// Mobility that is the identity everywhere (`q = 0` or flat surface).
    pub fn identity(grid: GridSpec) -> Self {
        Self {
            grid,
            tensors: vec![Sym2::IDENTITY; 4 * grid.n_cells()],
        }
    }

    pub fn from_tensors(grid: GridSpec, tensors: Vec<Sym2>) -> Result<Self> {
        if tensors.len() != 4 * grid.n_cells() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} corner tensors, got {}",
                4 * grid.n_cells(),
                tensors.len()
            )));
        }
        Ok(Self { grid, tensors })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Tensors ordered cell-major, four corners per cell.
    pub fn tensors(&self) -> &[Sym2] {
        &self.tensors
    }
}

/// Per-corner flux coefficients `F_eps(|grad u|^2)`.
pub fn flux_coefficients(u: &ScalarField, params: &ModelParams) -> Vec<f64> {
    corner_map(&gradient(u), |[gx, gy]| flux_coeff(gx * gx + gy * gy, params))
}

/// Per-corner [`flux_tangent`] of `u`.
pub fn flux_tangents(u: &ScalarField, params: &ModelParams) -> Vec<Sym2> {
    corner_map(&gradient(u), |g| flux_tangent(g, params))
}

/// Applies `f` to every corner gradient sample, cell-major.
pub(crate) fn corner_map<T>(grad: &FaceVectorField, mut f: impl FnMut([f64; 2]) -> T) -> Vec<T> {
    let g = grad.grid();
    let mut out = Vec::with_capacity(4 * g.n_cells());
    for j in 0..g.ny {
        for i in 0..g.nx {
            for c in Corner::ALL {
                out.push(f(grad.corner(i, j, c)));
            }
        }
    }
    out
}

/// Regularized surface energy
/// `Phi_eps(u) = (1/p) int (|grad u|^2 + eps)^(p/2) + beta int (|grad u|^2 + eps)^(1/2)`.
pub fn energy_phi(u: &ScalarField, params: &ModelParams) -> f64 {
    corner_quadrature(&gradient(u), |[gx, gy]| {
        regularized_density(gx * gx + gy * gy, params)
    })
}

/// Unregularized surface energy `G(u) = (1/p) int |grad u|^p + beta int |grad u|`.
pub fn energy_g(u: &ScalarField, params: &ModelParams) -> f64 {
    corner_quadrature(&gradient(u), |[gx, gy]| {
        let g = gx.hypot(gy);
        if g == 0.0 {
            0.0
        } else {
            g.powf(params.p) / params.p + params.beta * g
        }
    })
}

/// `int |grad v|^2 / (1 + q |grad u|)`.
pub fn dissipation_integral(v: &ScalarField, u: &ScalarField, params: &ModelParams) -> f64 {
    let gv = gradient(v);
    let gu = gradient(u);
    let g = *v.grid();
    let mut s = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            for c in Corner::ALL {
                let [vx, vy] = gv.corner(i, j, c);
                let [ux, uy] = gu.corner(i, j, c);
                s += (vx * vx + vy * vy) / (1.0 + params.q * ux.hypot(uy));
            }
        }
    }
    s * crate::grid::CORNER_WEIGHT * g.cell_area()
}

/// `int M grad v . grad v` with the corner mobility tensors.
pub fn mobility_dissipation(v: &ScalarField, mobility: &MobilityField) -> f64 {
    let gv = gradient(v);
    let g = *v.grid();
    let mut s = 0.0;
    let mut k = 0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            for c in Corner::ALL {
                s += mobility.tensors[k].quad_form(gv.corner(i, j, c));
                k += 1;
            }
        }
    }
    s * crate::grid::CORNER_WEIGHT * g.cell_area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{integrate, lp_norm_faces};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::coupled(0.5, 1.0, 1.0, 0.1).is_err());
        assert!(ModelParams::coupled(1.0, 1.0, 1.0, 0.1).is_err());
        assert!(ModelParams::coupled(2.0, -1.0, 1.0, 0.1).is_err());
        assert!(ModelParams::coupled(2.0, 0.0, -0.1, 0.1).is_err());
        assert!(ModelParams::coupled(2.0, 0.0, 0.0, 0.0).is_err());
        assert!(ModelParams::fixed(2.0, 0.0, 0.0, 0.0, 0.1).is_err());
        let p = ModelParams::coupled(3.0, 1.0, 1.0, 0.1).unwrap();
        let p2 = p.with_dt(0.05).unwrap();
        assert_eq!(p2.eps, 0.05);
        let f = ModelParams::fixed(3.0, 1.0, 1.0, 0.2, 0.1).unwrap();
        assert_eq!(f.with_dt(0.05).unwrap().eps, 0.2);
    }

    #[test]
    fn facet_mobility_is_identity() {
        assert_eq!(mobility_at(0.0, 0.0, 7.0), Sym2::IDENTITY);
        assert_eq!(mobility_at(0.3, -2.0, 0.0), Sym2::IDENTITY);
    }

    #[test]
    fn mobility_hand_values() {
        let m = mobility_at(1.0, 0.0, 1.0);
        assert_eq!(m, Sym2 { xx: 0.5, xy: 0.0, yy: 1.0 });

        let m = mobility_at(1.0, 1.0, 1.0);
        let lo = 1.0 / (1.0 + 2f64.sqrt());
        let [l0, l1] = m.eigenvalues();
        assert!(close(l0, lo, 1e-15) && close(l1, 1.0, 1e-15));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let along = m.apply([s, s]);
        assert!(close(along[0], lo * s, 1e-15) && close(along[1], lo * s, 1e-15));
        let across = m.apply([s, -s]);
        assert!(close(across[0], s, 1e-15) && close(across[1], -s, 1e-15));
    }

    #[test]
    fn quadratic_form_values() {
        assert_eq!(mobility_quadratic_form(&Sym2::IDENTITY, [3.0, 4.0]), 25.0);
        let m = mobility_at(1.0, 0.0, 1.0);
        assert_eq!(mobility_quadratic_form(&m, [1.0, 0.0]), 0.5);
    }

    #[test]
    fn mobility_continuous_at_facet() {
        let q = 3.0;
        for e in 1..=12 {
            let g = 10f64.powi(-e);
            let m = mobility_at(0.6 * g, -0.8 * g, q);
            let dev = (m.xx - 1.0).abs().max(m.xy.abs()).max((m.yy - 1.0).abs());
            assert!(dev <= 1.01 * q * g, "deviation {dev} at |g| = {g}");
        }
    }

    #[test]
    fn flux_coeff_values() {
        let p2 = ModelParams::fixed(2.0, 0.0, 0.0, 0.3, 0.1).unwrap();
        for s in [0.0, 0.5, 10.0, 1e6] {
            assert_eq!(flux_coeff(s, &p2), 1.0);
        }
        let p = ModelParams::fixed(2.0, 1.0, 0.0, 0.25, 0.1).unwrap();
        assert!(close(flux_coeff(0.0, &p), 3.0, 1e-15));
        let p = ModelParams::fixed(4.0, 0.0, 0.0, 1.0, 0.1).unwrap();
        assert!(close(flux_coeff(0.0, &p), 1.0, 1e-15));
    }

    fn unit_grid(n: usize) -> GridSpec {
        GridSpec::with_extent(n, n, 1.0, 1.0).unwrap()
    }

    #[test]
    fn energy_phi_of_constants() {
        let g = unit_grid(8);
        let u = ScalarField::constant(g, 4.0);
        let p = ModelParams::fixed(2.0, 0.0, 0.0, 1.0, 0.1).unwrap();
        assert!(close(energy_phi(&u, &p), 0.5, 1e-14));
        let p = ModelParams::fixed(2.0, 1.0, 0.0, 0.04, 0.1).unwrap();
        assert!(close(energy_phi(&u, &p), 0.22, 1e-14));
        assert_eq!(energy_g(&u, &p), 0.0);
    }

    #[test]
    fn energy_g_of_ramp() {
        // Slope-1 ramp: the wall half of each boundary column sees zero normal
        // gradient, so the discrete value is 3/2 * (1 - 1/n) and tends to 3/2.
        let p = ModelParams::fixed(2.0, 1.0, 0.0, 0.1, 0.1).unwrap();
        for n in [4usize, 16, 64] {
            let g = unit_grid(n);
            let u = ScalarField::from_fn(g, |i, _| g.center(i, 0).0);
            let expect = 1.5 * (1.0 - 1.0 / n as f64);
            assert!(close(energy_g(&u, &p), expect, 1e-13), "n = {n}");
        }
    }

    #[test]
    fn dissipation_with_unit_mobility_is_gradient_norm() {
        let g = unit_grid(5);
        let v = ScalarField::from_fn(g, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let u = ScalarField::from_fn(g, |i, j| (i * j) as f64);
        let p0 = ModelParams::fixed(2.0, 0.0, 0.0, 0.1, 0.1).unwrap();
        let l2 = lp_norm_faces(&gradient(&v), 2.0).unwrap().powi(2);
        assert!(close(dissipation_integral(&v, &u, &p0), l2, 1e-13));
        let pq = ModelParams::fixed(2.0, 0.0, 5.0, 0.1, 0.1).unwrap();
        assert!(dissipation_integral(&v, &u, &pq) <= l2);
        assert_eq!(
            dissipation_integral(&ScalarField::constant(g, 1.0), &u, &pq),
            0.0
        );
        let _ = integrate(&v);
    }

    proptest! {
        #[test]
        fn mobility_spectral_sandwich(
            gx in -1e3f64..1e3, gy in -1e3f64..1e3, q in 0f64..50.0,
            x0 in -10f64..10.0, x1 in -10f64..10.0,
        ) {
            let m = mobility_at(gx, gy, q);
            let lo = 1.0 / (1.0 + q * gx.hypot(gy));
            let [l0, l1] = m.eigenvalues();
            prop_assert!(close(l0, lo, 1e-12));
            prop_assert!(close(l1, 1.0, 1e-12));
            let xi2 = x0 * x0 + x1 * x1;
            let v = mobility_quadratic_form(&m, [x0, x1]);
            prop_assert!(v >= xi2 * lo * (1.0 - 1e-12) - 1e-300);
            prop_assert!(v <= xi2 * (1.0 + 1e-12));
        }

        #[test]
        fn flux_map_is_monotone(
            a in prop::array::uniform2(-50f64..50.0),
            b in prop::array::uniform2(-50f64..50.0),
            p in 1.1f64..4.0, beta in 0f64..5.0, eps in 1e-4f64..1.0,
        ) {
            let params = ModelParams::fixed(p, beta, 0.0, eps, 0.1).unwrap();
            let fa = flux_coeff(a[0] * a[0] + a[1] * a[1], &params);
            let fb = flux_coeff(b[0] * b[0] + b[1] * b[1], &params);
            let lhs = (fa * a[0] - fb * b[0]) * (a[0] - b[0]) + (fa * a[1] - fb * b[1]) * (a[1] - b[1]);
            let scale = (fa * a[0].hypot(a[1]) + fb * b[0].hypot(b[1])) * (a[0].hypot(a[1]) + b[0].hypot(b[1]));
            prop_assert!(lhs >= -1e-12 * scale);
        }

        #[test]
        fn tangent_matches_difference_quotient(
            g in prop::array::uniform2(-5f64..5.0),
            p in 1.2f64..4.0, beta in 0f64..3.0, eps in 1e-2f64..1.0,
        ) {
            let params = ModelParams::fixed(p, beta, 0.0, eps, 0.1).unwrap();
            let flux = |g: [f64; 2]| {
                let f = flux_coeff(g[0] * g[0] + g[1] * g[1], &params);
                [f * g[0], f * g[1]]
            };
            let t = flux_tangent(g, &params);
            let h = 1e-6;
            for (k, col) in [[t.xx, t.xy], [t.xy, t.yy]].iter().enumerate() {
                let mut gp = g;
                let mut gm = g;
                gp[k] += h;
                gm[k] -= h;
                let (fp, fm) = (flux(gp), flux(gm));
                for r in 0..2 {
                    let fd = (fp[r] - fm[r]) / (2.0 * h);
                    prop_assert!((fd - col[r]).abs() <= 1e-5 * (1.0 + col[r].abs()), "{fd} vs {}", col[r]);
                }
            }
            let [l0, _] = t.eigenvalues();
            prop_assert!(l0 > 0.0);
        }

        #[test]
        fn phi_bounds(seed in 0u64..1000, p in 1.2f64..4.0, beta in 0f64..3.0) {
            let g = GridSpec::new(5, 4, 0.3, 0.2).unwrap();
            let u = ScalarField::from_fn(g, |i, j| (((i * 31 + j * 17) as u64 ^ seed) % 13) as f64 * 0.1);
            let eps = 0.05;
            let params = ModelParams::fixed(p, beta, 0.0, eps, 0.1).unwrap();
            let floor = g.area() * (eps.powf(p / 2.0) / p + beta * eps.sqrt());
            let phi = energy_phi(&u, &params);
            prop_assert!(phi >= floor * (1.0 - 1e-12));
            prop_assert!(close(energy_phi(&ScalarField::zeros(g), &params), floor, 1e-13));
            if p >= 2.0 {
                prop_assert!(energy_g(&u, &params) <= phi + 1e-12);
            }
        }
    }
}
