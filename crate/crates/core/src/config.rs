//! Run configuration in a plain `key = value` format.
//!
//! ```text
//! # 32x32 cells on a 4x4 square
//! nx = 32
//! ny = 32
//! hx = 0.125
//! hy = 0.125
//! p = 3
//! init = gaussian
//! init.sigma = 0.6
//! ```
//!
//! Every key is optional; [`RunConfig::default`] documents the fallbacks.
//! Unknown or repeated keys are errors, as are `init.*` keys that the chosen
//! preset does not use.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::model::{EpsMode, ModelParams};
use crate::solvers::SolverConfig;

/// How the initial height is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    Constant { c: f64 },
    /// `amp * exp(-r^2 / (2 sigma^2))` around `(x0, y0)`.
    Gaussian { x0: f64, y0: f64, sigma: f64, amp: f64 },
    /// `-slope * r` around `(x0, y0)`: constant gradient with a singular tip.
    Cone { x0: f64, y0: f64, slope: f64 },
    /// Random cosine modes up to wavenumber `cutoff` in each direction.
    RandomSmooth { seed: u64, cutoff: usize },
    /// Values read from a CSV snapshot.
    File { path: PathBuf },
}

impl InitSpec {
    pub fn name(&self) -> &'static str {
        match self {
            InitSpec::Constant { .. } => "constant",
            InitSpec::Gaussian { .. } => "gaussian",
            InitSpec::Cone { .. } => "cone",
            InitSpec::RandomSmooth { .. } => "random-smooth",
            InitSpec::File { .. } => "file",
        }
    }

    /// Default parameters of a preset on a domain of size `lx` by `ly`.
    fn preset(name: &str, lx: f64, ly: f64) -> Option<Self> {
        let (x0, y0) = (0.5 * lx, 0.5 * ly);
        Some(match name {
            "constant" => InitSpec::Constant { c: 1.0 },
            "gaussian" => InitSpec::Gaussian {
                x0,
                y0,
                sigma: 0.15 * lx.min(ly),
                amp: 1.0,
            },
            "cone" => InitSpec::Cone { x0, y0, slope: 1.0 },
            "random-smooth" => InitSpec::RandomSmooth { seed: 1, cutoff: 4 },
            "file" => InitSpec::File {
                path: PathBuf::new(),
            },
            _ => return None,
        })
    }

    fn keys(&self) -> &'static [&'static str] {
        match self {
            InitSpec::Constant { .. } => &["init.c"],
            InitSpec::Gaussian { .. } => &["init.x0", "init.y0", "init.sigma", "init.amp"],
            InitSpec::Cone { .. } => &["init.x0", "init.y0", "init.slope"],
            InitSpec::RandomSmooth { .. } => &["init.seed", "init.cutoff"],
            InitSpec::File { .. } => &["init.path"],
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub p: f64,
    pub beta: f64,
    pub q: f64,
    pub eps_mode: EpsMode,
    /// Only used in fixed mode; coupled mode sets `eps = dt`.
    pub eps: f64,
    pub t_end: f64,
    pub j: usize,
    pub solver: SolverConfig,
    pub init: InitSpec,
    pub output_dir: PathBuf,
    /// Snapshot every this many steps; `None` means `ceil(j / 10)`.
    pub snapshot_every: Option<usize>,
    /// How many times a run that fails to converge is retried with half the step.
    pub retry_halve_dt: u32,
    /// Largest ledger slack allowed, relative to the initial Lyapunov value.
    pub ledger_tol: f64,
    /// Largest mass-law defect allowed, relative to the initial mass.
    pub mass_tol: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nx: 32,
            ny: 32,
            hx: 0.125,
            hy: 0.125,
            p: 3.0,
            beta: 1.0,
            q: 1.0,
            eps_mode: EpsMode::Coupled,
            eps: 0.01,
            t_end: 0.5,
            j: 50,
            solver: SolverConfig::default(),
            init: InitSpec::Gaussian {
                x0: 2.0,
                y0: 2.0,
                sigma: 0.6,
                amp: 1.0,
            },
            output_dir: PathBuf::from("out"),
            snapshot_every: None,
            retry_halve_dt: 0,
            ledger_tol: 1e-7,
            mass_tol: 1e-8,
        }
    }
}

const KEYS: &[&str] = &[
    "nx",
    "ny",
    "hx",
    "hy",
    "p",
    "beta",
    "q",
    "eps_mode",
    "eps",
    "T",
    "j",
    "cg_tol",
    "cg_max_iter",
    "picard_tol",
    "picard_max_iter",
    "picard_damping",
    "fp_tol",
    "fp_max_iter",
    "init",
    "init.c",
    "init.x0",
    "init.y0",
    "init.sigma",
    "init.amp",
    "init.slope",
    "init.seed",
    "init.cutoff",
    "init.path",
    "output_dir",
    "snapshot_every",
    "retry_halve_dt",
    "ledger_tol",
    "mass_tol",
];

struct Entries {
    map: BTreeMap<&'static str, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &'static str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &'static str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(key) {
            None => Ok(default),
            Some((line, raw)) => raw.parse().map_err(|e| Error::ConfigSyntax {
                line,
                msg: format!("`{key}`: cannot parse `{raw}`: {e}"),
            }),
        }
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::ConfigSyntax {
            line,
            msg: format!("expected `key = value`, got `{content}`"),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let key = *KEYS.iter().find(|k| **k == key).ok_or_else(|| Error::ConfigSyntax {
            line,
            msg: format!("unknown key `{key}`"),
        })?;
        if value.is_empty() {
            return Err(Error::ConfigSyntax {
                line,
                msg: format!("`{key}` has no value"),
            });
        }
        if let Some((first, _)) = map.insert(key, (line, value.to_string())) {
            return Err(Error::ConfigSyntax {
                line,
                msg: format!("`{key}` already set on line {first}"),
            });
        }
    }
    let mut e = Entries { map };
    let d = RunConfig::default();

    let nx = e.parse("nx", d.nx)?;
    let ny = e.parse("ny", d.ny)?;
    let hx = e.parse("hx", d.hx)?;
    let hy = e.parse("hy", d.hy)?;
    let grid = GridSpec::new(nx, ny, hx, hy)?;
    let (lx, ly) = grid.extent();

    let eps_mode: EpsMode = e.parse("eps_mode", d.eps_mode.as_str().to_string())?
        .parse()
        .map_err(|msg| Error::InvalidParam {
            field: "eps_mode",
            msg,
        })?;
    let eps = match (eps_mode, e.take("eps")) {
        (EpsMode::Coupled, Some((line, _))) => {
            return Err(Error::ConfigSyntax {
                line,
                msg: "`eps` follows the time step in coupled mode; set eps_mode = fixed".into(),
            })
        }
        (EpsMode::Coupled, None) => d.eps,
        (EpsMode::Fixed, None) => {
            return Err(Error::param("eps", "fixed mode needs an explicit eps"));
        }
        (EpsMode::Fixed, Some((line, raw))) => raw.parse().map_err(|err| Error::ConfigSyntax {
            line,
            msg: format!("`eps`: cannot parse `{raw}`: {err}"),
        })?,
    };

    let ds = d.solver;
    let solver = SolverConfig {
        cg_tol: e.parse("cg_tol", ds.cg_tol)?,
        cg_max_iter: e.parse("cg_max_iter", ds.cg_max_iter)?,
        picard_tol: e.parse("picard_tol", ds.picard_tol)?,
        picard_max_iter: e.parse("picard_max_iter", ds.picard_max_iter)?,
        picard_damping: e.parse("picard_damping", ds.picard_damping)?,
        fp_tol: e.parse("fp_tol", ds.fp_tol)?,
        fp_max_iter: e.parse("fp_max_iter", ds.fp_max_iter)?,
    };

    let init = parse_init(&mut e, lx, ly)?;

    let snapshot_every = match e.take("snapshot_every") {
        None => None,
        Some((_, v)) if v == "auto" => None,
        Some((line, raw)) => Some(raw.parse().map_err(|err| Error::ConfigSyntax {
            line,
            msg: format!("`snapshot_every`: expected `auto` or a count, got `{raw}`: {err}"),
        })?),
    };

    let cfg = RunConfig {
        nx,
        ny,
        hx,
        hy,
        p: e.parse("p", d.p)?,
        beta: e.parse("beta", d.beta)?,
        q: e.parse("q", d.q)?,
        eps_mode,
        eps,
        t_end: e.parse("T", d.t_end)?,
        j: e.parse("j", d.j)?,
        solver,
        init,
        output_dir: e.parse("output_dir", d.output_dir.display().to_string())?.into(),
        snapshot_every,
        retry_halve_dt: e.parse("retry_halve_dt", d.retry_halve_dt)?,
        ledger_tol: e.parse("ledger_tol", d.ledger_tol)?,
        mass_tol: e.parse("mass_tol", d.mass_tol)?,
    };
    if let Some((key, (line, _))) = e.map.into_iter().next() {
        return Err(Error::ConfigSyntax {
            line,
            msg: format!("`{key}` does not apply to init = {}", cfg.init.name()),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_init(e: &mut Entries, lx: f64, ly: f64) -> Result<InitSpec> {
    let (line, name) = e.take("init").unwrap_or((0, "gaussian".into()));
    let mut spec = InitSpec::preset(&name, lx, ly).ok_or_else(|| Error::ConfigSyntax {
        line,
        msg: format!("unknown init preset `{name}`"),
    })?;
    match &mut spec {
        InitSpec::Constant { c } => *c = e.parse("init.c", *c)?,
        InitSpec::Gaussian { x0, y0, sigma, amp } => {
            *x0 = e.parse("init.x0", *x0)?;
            *y0 = e.parse("init.y0", *y0)?;
            *sigma = e.parse("init.sigma", *sigma)?;
            *amp = e.parse("init.amp", *amp)?;
        }
        InitSpec::Cone { x0, y0, slope } => {
            *x0 = e.parse("init.x0", *x0)?;
            *y0 = e.parse("init.y0", *y0)?;
            *slope = e.parse("init.slope", *slope)?;
        }
        InitSpec::RandomSmooth { seed, cutoff } => {
            *seed = e.parse("init.seed", *seed)?;
            *cutoff = e.parse("init.cutoff", *cutoff)?;
        }
        InitSpec::File { path } => {
            let (_, raw) = e
                .take("init.path")
                .ok_or_else(|| Error::param("init.path", "init = file needs a path"))?;
            *path = raw.into();
        }
    }
    Ok(spec)
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.nx, self.ny, self.hx, self.hy)
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.j as f64
    }

    /// Model parameters at the configured step size.
    pub fn params(&self) -> Result<ModelParams> {
        match self.eps_mode {
            EpsMode::Coupled => ModelParams::coupled(self.p, self.beta, self.q, self.dt()),
            EpsMode::Fixed => ModelParams::fixed(self.p, self.beta, self.q, self.eps, self.dt()),
        }
    }

    pub fn snapshot_interval(&self) -> usize {
        self.snapshot_every.unwrap_or_else(|| self.j.div_ceil(10)).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid()?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("T", "final time must be positive"));
        }
        if self.j == 0 {
            return Err(Error::param("j", "need at least one step"));
        }
        self.params()?;
        self.solver.validate()?;
        if self.snapshot_every == Some(0) {
            return Err(Error::param("snapshot_every", "must be at least 1"));
        }
        if !(self.ledger_tol >= 0.0) {
            return Err(Error::param("ledger_tol", "must be non-negative"));
        }
        if !(self.mass_tol >= 0.0) {
            return Err(Error::param("mass_tol", "must be non-negative"));
        }
        match &self.init {
            InitSpec::Gaussian { sigma, .. } if !(*sigma > 0.0) => {
                Err(Error::param("init.sigma", "must be positive"))
            }
            InitSpec::RandomSmooth { cutoff: 0, .. } => {
                Err(Error::param("init.cutoff", "must be at least 1"))
            }
            _ => Ok(()),
        }
    }

    /// Every key with its resolved value, in a form [`parse_config`] accepts.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        put("nx", &self.nx);
        put("ny", &self.ny);
        put("hx", &self.hx);
        put("hy", &self.hy);
        put("p", &self.p);
        put("beta", &self.beta);
        put("q", &self.q);
        put("eps_mode", &self.eps_mode.as_str());
        if self.eps_mode == EpsMode::Fixed {
            put("eps", &self.eps);
        }
        put("T", &self.t_end);
        put("j", &self.j);
        let s = &self.solver;
        put("cg_tol", &s.cg_tol);
        put("cg_max_iter", &s.cg_max_iter);
        put("picard_tol", &s.picard_tol);
        put("picard_max_iter", &s.picard_max_iter);
        put("picard_damping", &s.picard_damping);
        put("fp_tol", &s.fp_tol);
        put("fp_max_iter", &s.fp_max_iter);
        put("init", &self.init.name());
        let keys = self.init.keys();
        match &self.init {
            InitSpec::Constant { c } => put(keys[0], c),
            InitSpec::Gaussian { x0, y0, sigma, amp } => {
                for (k, v) in keys.iter().zip([x0, y0, sigma, amp]) {
                    put(k, v);
                }
            }
            InitSpec::Cone { x0, y0, slope } => {
                for (k, v) in keys.iter().zip([x0, y0, slope]) {
                    put(k, v);
                }
            }
            InitSpec::RandomSmooth { seed, cutoff } => {
                put(keys[0], seed);
                put(keys[1], cutoff);
            }
            InitSpec::File { path } => put(keys[0], &path.display()),
        }
        put("output_dir", &self.output_dir.display());
        match self.snapshot_every {
            Some(n) => put("snapshot_every", &n),
            None => put("snapshot_every", &"auto"),
        }
        put("retry_halve_dt", &self.retry_halve_dt);
        put("ledger_tol", &self.ledger_tol);
        put("mass_tol", &self.mass_tol);
        out
    }
}
