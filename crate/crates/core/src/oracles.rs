//! Randomized checks of the scalar and vector inequalities the energy
//! estimates rest on.
//!
//! Every check compares a left and right side with a tolerance scaled to the
//! magnitudes involved. Samples are drawn from a counter-based generator, one
//! stream per sample, so results do not depend on how the work is split
//! across threads.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{flux_coeff, mobility_at, EpsMode, ModelParams};

const REL_TOL: f64 = 1e-12;
/// Failures kept verbatim per oracle; the rest are only counted.
const MAX_REPORTED: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleConfig {
    pub count: u64,
    pub seed: u64,
    /// Magnitudes are log-uniform in `[min_mag, max_mag]`.
    pub min_mag: f64,
    pub max_mag: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            count: 1_000_000,
            seed: 0x5eed_c0de,
            min_mag: 1e-8,
            max_mag: 1e8,
        }
    }
}

impl SampleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::param("samples", "need at least one sample"));
        }
        if !(self.min_mag > 0.0 && self.max_mag.is_finite() && self.min_mag <= self.max_mag) {
            return Err(Error::param(
                "magnitude range",
                format!("need 0 < min <= max, got [{}, {}]", self.min_mag, self.max_mag),
            ));
        }
        Ok(())
    }
}

/// Both sides of one inequality `lhs >= rhs`, with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub lhs: f64,
    pub rhs: f64,
    pub tol: f64,
}

impl Comparison {
    fn new(lhs: f64, rhs: f64, scale: f64) -> Self {
        Self {
            lhs,
            rhs,
            tol: REL_TOL * scale,
        }
    }

    pub fn holds(&self) -> bool {
        // NaN is always a failure.
        !self.lhs.is_nan() && !self.rhs.is_nan() && self.lhs >= self.rhs - self.tol
    }
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// `|x|^(p-2) x`, taken as 0 at `x = 0`.
fn p_power(x: [f64; 2], p: f64) -> [f64; 2] {
    let r = norm(x);
    if r == 0.0 {
        return [0.0, 0.0];
    }
    let f = r.powf(p - 2.0);
    [f * x[0], f * x[1]]
}

/// `|x|^(p-2) x . (x - y) >= (|x|^p - |y|^p) / p`.
pub fn compare_power_convexity(x: [f64; 2], y: [f64; 2], p: f64) -> Comparison {
    let (nx, ny) = (norm(x), norm(y));
    let lhs = dot(p_power(x, p), sub(x, y));
    let rhs = (nx.powf(p) - ny.powf(p)) / p;
    let scale = nx.powf(p) + ny.powf(p) + nx.powf(p - 1.0) * norm(sub(x, y));
    Comparison::new(lhs, rhs, scale)
}

pub fn oracle_power_convexity(x: [f64; 2], y: [f64; 2], p: f64) -> bool {
    compare_power_convexity(x, y, p).holds()
}

/// `eps a^p + eps^(-q/p) b^q >= a b` for conjugate `p`, `q`.
pub fn compare_young(a: f64, b: f64, eps: f64, p: f64, q: f64) -> Comparison {
    let rhs = a * b;
    let lhs = eps * a.powf(p) + eps.powf(-q / p) * b.powf(q);
    Comparison::new(lhs, rhs, lhs.abs() + rhs.abs())
}

pub fn oracle_young(a: f64, b: f64, eps: f64, p: f64, q: f64) -> bool {
    compare_young(a, b, eps, p, q).holds()
}

/// An increasing power law `f(r) = sign * (r + shift)^alpha` on `r >= 0`,
/// with `sign` chosen so that `f` increases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLaw {
    pub alpha: f64,
    pub shift: f64,
}

impl PowerLaw {
    fn sign(&self) -> f64 {
        if self.alpha < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.sign() * (r + self.shift).powf(self.alpha)
    }

    /// An antiderivative; `alpha = -1` is not in the catalog.
    pub fn antiderivative(&self, r: f64) -> f64 {
        self.sign() * (r + self.shift).powf(self.alpha + 1.0) / (self.alpha + 1.0)
    }
}

/// Exponents of the flux coefficient for `p` in {1.5, 2.5, 3, 4} and of the
/// one-Laplacian term.
pub const POWER_LAW_EXPONENTS: [f64; 6] = [-0.25, -0.5, 0.25, 0.5, 1.0, 0.0];

/// `f(s)(s - t) >= F(s) - F(t)` for increasing `f` with antiderivative `F`.
pub fn compare_increasing_antideriv(f: &PowerLaw, s: f64, t: f64) -> Comparison {
    let (fs, big_s, big_t) = (f.value(s), f.antiderivative(s), f.antiderivative(t));
    let lhs = fs * (s - t);
    let rhs = big_s - big_t;
    Comparison::new(lhs, rhs, lhs.abs() + big_s.abs() + big_t.abs())
}

pub fn oracle_increasing_antideriv(f: &PowerLaw, s: f64, t: f64) -> bool {
    compare_increasing_antideriv(f, s, t).holds()
}

/// Left side and scale shared by the two monotonicity estimates.
fn p_monotone(x: [f64; 2], y: [f64; 2], p: f64) -> (f64, f64) {
    let d = sub(x, y);
    let lhs = dot(sub(p_power(x, p), p_power(y, p)), d);
    let scale = (norm(x).powf(p - 1.0) + norm(y).powf(p - 1.0)) * norm(d);
    (lhs, scale)
}

/// `(|x|^(p-2) x - |y|^(p-2) y) . (x - y) >= 2^(1-p) |x - y|^p`, `p > 2`.
pub fn compare_oden_high_p(x: [f64; 2], y: [f64; 2], p: f64) -> Comparison {
    let (lhs, scale) = p_monotone(x, y, p);
    let rhs = 2f64.powf(1.0 - p) * norm(sub(x, y)).powf(p);
    Comparison::new(lhs, rhs, scale + rhs)
}

pub fn oracle_oden_high_p(x: [f64; 2], y: [f64; 2], p: f64) -> bool {
    compare_oden_high_p(x, y, p).holds()
}

/// `(1 + |x|^2 + |y|^2)^((2-p)/2) (|x|^(p-2) x - |y|^(p-2) y) . (x - y)
/// >= (p - 1) |x - y|^2`, `1 < p <= 2`.
pub fn compare_oden_low_p(x: [f64; 2], y: [f64; 2], p: f64) -> Comparison {
    let (m, scale) = p_monotone(x, y, p);
    let w = (1.0 + dot(x, x) + dot(y, y)).powf(0.5 * (2.0 - p));
    let d = sub(x, y);
    let rhs = (p - 1.0) * dot(d, d);
    Comparison::new(w * m, rhs, w * scale + rhs)
}

pub fn oracle_oden_low_p(x: [f64; 2], y: [f64; 2], p: f64) -> bool {
    compare_oden_low_p(x, y, p).holds()
}

/// `(F_eps(|xi|^2) xi - F_eps(|eta|^2) eta) . (xi - eta) >= 0`.
pub fn compare_flux_monotone(xi: [f64; 2], eta: [f64; 2], params: &ModelParams) -> Comparison {
    let fx = flux_coeff(dot(xi, xi), params);
    let fe = flux_coeff(dot(eta, eta), params);
    let d = sub(xi, eta);
    let lhs = dot([fx * xi[0] - fe * eta[0], fx * xi[1] - fe * eta[1]], d);
    let scale = (fx * norm(xi) + fe * norm(eta)) * norm(d);
    Comparison::new(lhs, 0.0, scale)
}

pub fn oracle_flux_monotone(xi: [f64; 2], eta: [f64; 2], params: &ModelParams) -> bool {
    compare_flux_monotone(xi, eta, params).holds()
}

/// `|xi|^2 / (1 + q|g|) <= xi^T M(g) xi <= |xi|^2`, as two comparisons.
pub fn compare_mobility_bounds(gx: f64, gy: f64, q: f64, xi: [f64; 2]) -> [Comparison; 2] {
    let m = mobility_at(gx, gy, q);
    let form = m.quad_form(xi);
    let x2 = dot(xi, xi);
    let lower = x2 / (1.0 + q * gx.hypot(gy));
    [
        Comparison::new(form, lower, x2),
        Comparison::new(x2, form, x2),
    ]
}

pub fn oracle_mobility_bounds(gx: f64, gy: f64, q: f64, xi: [f64; 2]) -> bool {
    compare_mobility_bounds(gx, gy, q, xi).iter().all(Comparison::holds)
}

/// One failing sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    pub oracle: &'static str,
    pub sample: u64,
    /// `name=value` pairs describing the inputs.
    pub inputs: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl Counterexample {
    pub const CSV_HEADER: &'static str = "oracle,sample,inputs,lhs,rhs";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.17e},{:.17e}",
            self.oracle, self.sample, self.inputs, self.lhs, self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub oracle: &'static str,
    pub samples: u64,
    pub failures: u64,
    /// The first few failures, in sample order.
    pub counterexamples: Vec<Counterexample>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

/// The inequality families run by the suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Oracle {
    PowerConvexity,
    Young,
    IncreasingAntideriv,
    OdenHighP,
    OdenLowP,
    FluxMonotone,
    MobilityBounds,
}

impl Oracle {
    pub const ALL: [Oracle; 7] = [
        Oracle::PowerConvexity,
        Oracle::Young,
        Oracle::IncreasingAntideriv,
        Oracle::OdenHighP,
        Oracle::OdenLowP,
        Oracle::FluxMonotone,
        Oracle::MobilityBounds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Oracle::PowerConvexity => "power_convexity",
            Oracle::Young => "young",
            Oracle::IncreasingAntideriv => "increasing_antideriv",
            Oracle::OdenHighP => "oden_high_p",
            Oracle::OdenLowP => "oden_low_p",
            Oracle::FluxMonotone => "flux_monotone",
            Oracle::MobilityBounds => "mobility_bounds",
        }
    }

    fn salt(self) -> u64 {
        Oracle::ALL.iter().position(|&o| o == self).unwrap() as u64 + 1
    }
}

struct Sampler {
    rng: ChaCha8Rng,
    ln_min: f64,
    ln_max: f64,
}

impl Sampler {
    fn magnitude(&mut self) -> f64 {
        self.rng.gen_range(self.ln_min..=self.ln_max).exp()
    }

    fn positive(&mut self) -> f64 {
        self.magnitude()
    }

    fn vector(&mut self) -> [f64; 2] {
        let r = self.magnitude();
        let theta = self.rng.gen_range(0.0..std::f64::consts::TAU);
        [r * theta.cos(), r * theta.sin()]
    }

    /// A second vector that is sometimes degenerate relative to `x`.
    fn partner(&mut self, x: [f64; 2]) -> [f64; 2] {
        match self.rng.gen_range(0..16u32) {
            0 => x,
            1 => [0.0, 0.0],
            2 => [-x[0], -x[1]],
            3 => {
                let t = 1.0 + 1e-6 * self.rng.gen_range(-1.0..1.0);
                [t * x[0], t * x[1]]
            }
            _ => self.vector(),
        }
    }

    fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        items[self.rng.gen_range(0..items.len())]
    }
}

fn fmt_vec(out: &mut String, name: &str, v: [f64; 2]) {
    let _ = write!(out, "{name}=({:.17e} {:.17e}) ", v[0], v[1]);
}

fn fmt_num(out: &mut String, name: &str, v: f64) {
    let _ = write!(out, "{name}={v:.17e} ");
}

/// Draws one sample of `oracle` and evaluates it.
fn evaluate(oracle: Oracle, s: &mut Sampler) -> (Comparison, String) {
    let mut inputs = String::new();
    let cmp = match oracle {
        Oracle::PowerConvexity => {
            let p = s.pick(&[1.5, 2.0, 3.0, 4.0]);
            let x = s.vector();
            let y = s.partner(x);
            fmt_vec(&mut inputs, "x", x);
            fmt_vec(&mut inputs, "y", y);
            fmt_num(&mut inputs, "p", p);
            compare_power_convexity(x, y, p)
        }
        Oracle::Young => {
            let p = s.pick(&[1.5, 2.0, 3.0, 4.0]);
            let q = p / (p - 1.0);
            let (a, eps) = (s.positive(), s.positive());
            // One in four samples sits on the family a^p = b^q eps^(-q).
            let b = if s.rng.gen_range(0..4u32) == 0 {
                (a.powf(p) * eps.powf(q)).powf(1.0 / q)
            } else {
                s.positive()
            };
            for (n, v) in [("a", a), ("b", b), ("eps", eps), ("p", p), ("q", q)] {
                fmt_num(&mut inputs, n, v);
            }
            compare_young(a, b, eps, p, q)
        }
        Oracle::IncreasingAntideriv => {
            let alpha = s.pick(&POWER_LAW_EXPONENTS);
            let f = PowerLaw {
                alpha,
                shift: s.positive(),
            };
            let sv = s.positive();
            let t = if s.rng.gen_range(0..16u32) == 0 { sv } else { s.positive() };
            for (n, v) in [("alpha", alpha), ("shift", f.shift), ("s", sv), ("t", t)] {
                fmt_num(&mut inputs, n, v);
            }
            compare_increasing_antideriv(&f, sv, t)
        }
        Oracle::OdenHighP | Oracle::OdenLowP => {
            let high = oracle == Oracle::OdenHighP;
            let p = if high {
                s.pick(&[2.5, 3.0, 4.0])
            } else {
                s.pick(&[1.2, 1.5, 1.9, 2.0])
            };
            let x = s.vector();
            let y = s.partner(x);
            fmt_vec(&mut inputs, "x", x);
            fmt_vec(&mut inputs, "y", y);
            fmt_num(&mut inputs, "p", p);
            if high {
                compare_oden_high_p(x, y, p)
            } else {
                compare_oden_low_p(x, y, p)
            }
        }
        Oracle::FluxMonotone => {
            let params = ModelParams {
                p: s.pick(&[1.2, 2.0, 3.0]),
                beta: s.pick(&[0.0, 1.0, 5.0]),
                q: 0.0,
                eps: s.positive(),
                dt: 1.0,
                eps_mode: EpsMode::Fixed,
            };
            let xi = s.vector();
            let eta = s.partner(xi);
            fmt_vec(&mut inputs, "xi", xi);
            fmt_vec(&mut inputs, "eta", eta);
            for (n, v) in [("p", params.p), ("beta", params.beta), ("eps", params.eps)] {
                fmt_num(&mut inputs, n, v);
            }
            compare_flux_monotone(xi, eta, &params)
        }
        Oracle::MobilityBounds => {
            let g = if s.rng.gen_range(0..16u32) == 0 {
                [0.0, 0.0]
            } else {
                s.vector()
            };
            let q = if s.rng.gen_range(0..8u32) == 0 { 0.0 } else { s.positive() };
            let xi = match s.rng.gen_range(0..8u32) {
                0 => g,
                _ => s.vector(),
            };
            fmt_vec(&mut inputs, "g", g);
            fmt_num(&mut inputs, "q", q);
            fmt_vec(&mut inputs, "xi", xi);
            let [lo, hi] = compare_mobility_bounds(g[0], g[1], q, xi);
            if lo.holds() {
                hi
            } else {
                lo
            }
        }
    };
    inputs.pop();
    (cmp, inputs)
}

/// Runs `config.count` samples of one oracle.
pub fn run_oracle(oracle: Oracle, config: &SampleConfig) -> Result<OracleReport> {
    config.validate()?;
    let base = ChaCha8Rng::seed_from_u64(config.seed ^ oracle.salt().wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let (ln_min, ln_max) = (config.min_mag.ln(), config.max_mag.ln());

    const CHUNK: u64 = 4096;
    let chunks = config.count.div_ceil(CHUNK);
    let per_chunk: Vec<(u64, Vec<Counterexample>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut failures = 0;
            let mut kept = Vec::new();
            for index in c * CHUNK..((c + 1) * CHUNK).min(config.count) {
                let mut rng = base.clone();
                rng.set_stream(index);
                let mut sampler = Sampler { rng, ln_min, ln_max };
                let (cmp, inputs) = evaluate(oracle, &mut sampler);
                if !cmp.holds() {
                    failures += 1;
                    if kept.len() < MAX_REPORTED {
                        kept.push(Counterexample {
                            oracle: oracle.name(),
                            sample: index,
                            inputs,
                            lhs: cmp.lhs,
                            rhs: cmp.rhs,
                        });
                    }
                }
            }
            (failures, kept)
        })
        .collect();

    let mut report = OracleReport {
        oracle: oracle.name(),
        samples: config.count,
        failures: 0,
        counterexamples: Vec::new(),
    };
    for (failures, kept) in per_chunk {
        report.failures += failures;
        let room = MAX_REPORTED - report.counterexamples.len();
        report.counterexamples.extend(kept.into_iter().take(room));
    }
    Ok(report)
}

/// Runs every oracle, optionally on a pool of at most `threads` workers.
pub fn run_suite(config: &SampleConfig, threads: Option<usize>) -> Result<Vec<OracleReport>> {
    config.validate()?;
    let run = || Oracle::ALL.iter().map(|&o| run_oracle(o, config)).collect();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::param("threads", e.to_string()))?
            .install(run),
        None => run(),
    }
}
