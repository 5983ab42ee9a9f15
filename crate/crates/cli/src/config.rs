//! Experiment configuration read from INI-style files.
//!
//! ```ini
//! [surface]
//! flow = ellipsoid        ; sphere | ellipsoid | translation
//! amplitude = 0.25
//! frequency = 1
//!
//! [problem]
//! kind = harmonic-map     ; linear | harmonic-map | custom-manufactured
//!
//! [time]
//! order = 2
//! tau0 = 0.2
//! halvings = 4
//! horizon = 1
//!
//! [mesh]
//! levels = 3, 4
//! ```
//!
//! Every key is optional; unknown sections and keys are rejected so that
//! typos do not silently fall back to defaults.

use std::path::{Path, PathBuf};

use evolvs_core::bdf::MAX_ORDER;
use evolvs_core::fem::Forcing;
use evolvs_core::mesh::MAX_SUBDIVISIONS;
use evolvs_core::{
    AmbientField, BdfScheme, FlowMap, MaxRegProbe, NonlinearSource, Nonlinearity, Preconditioner, Problem, SolverConfig,
};
use ini::{Ini, Properties};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Heat equation with the manufactured residual as forcing.
    Linear,
    /// `f = |grad u|^2 u` plus the manufactured residual.
    HarmonicMap,
    /// Exact solution and nonlinearity chosen by the `exact` and `nonlinearity` keys.
    CustomManufactured,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    pub nonlinearity: Nonlinearity,
    pub exact: AmbientField,
    /// When false the right-hand side is the nonlinearity alone.
    pub manufactured_forcing: bool,
}

impl ProblemConfig {
    pub fn problem(&self) -> Problem {
        let forcing = if self.manufactured_forcing { Forcing::Manufactured(self.exact) } else { Forcing::None };
        Problem {
            source: NonlinearSource { nonlinearity: self.nonlinearity, forcing },
            exact: Some(self.exact),
            initial: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub order: usize,
    pub tau0: f64,
    pub halvings: usize,
    pub horizon: f64,
}

impl TimeConfig {
    /// `tau0, tau0 / 2, ..., tau0 / 2^halvings`.
    pub fn taus(&self) -> Vec<f64> {
        (0..=self.halvings).map(|i| self.tau0 / f64::from(1u32 << i)).collect()
    }

    pub fn scheme(&self) -> BdfScheme {
        BdfScheme::new(self.order).expect("order validated while parsing")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub vtk: bool,
    /// Write every `vtk_every`-th step.
    pub vtk_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackCheckConfig {
    pub times: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub flow: FlowMap,
    pub problem: ProblemConfig,
    pub time: TimeConfig,
    pub mesh_levels: Vec<u32>,
    pub solver: SolverConfig,
    pub output: OutputConfig,
    /// Exponents of the discrete `L^p(L^q)` norms in convergence reports.
    pub norm_p: f64,
    pub norm_q: f64,
    pub maxreg: MaxRegProbe,
    pub pullback: PullbackCheckConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let time = TimeConfig { order: 2, tau0: 0.2, halvings: 4, horizon: 1.0 };
        Self {
            flow: FlowMap::standard_ellipsoid(),
            problem: ProblemConfig {
                kind: ProblemKind::HarmonicMap,
                nonlinearity: Nonlinearity::HarmonicMap,
                exact: AmbientField::standard(),
                manufactured_forcing: true,
            },
            maxreg: MaxRegProbe { taus: time.taus(), horizon: time.horizon, ..MaxRegProbe::default() },
            time,
            mesh_levels: vec![3, 4],
            solver: SolverConfig::default(),
            output: OutputConfig { dir: PathBuf::from("out"), vtk: false, vtk_every: 1 },
            norm_p: 5.0,
            norm_q: 5.0,
            pullback: PullbackCheckConfig { times: 10, samples: 100 },
            seed: 0,
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("surface", &["flow", "amplitude", "frequency", "velocity", "radius"]),
    ("problem", &["kind", "exact", "rate", "coeffs", "value", "nonlinearity", "forcing"]),
    ("time", &["order", "tau0", "halvings", "horizon"]),
    ("mesh", &["levels"]),
    ("solver", &["rel_tol", "abs_floor", "max_iter", "preconditioner"]),
    ("output", &["dir", "vtk", "vtk_every"]),
    ("norms", &["p", "q"]),
    ("maxreg", &["p", "q", "amplitude", "seed"]),
    ("pullback", &["times", "samples"]),
    ("run", &["seed"]),
];

struct Section<'a> {
    name: &'static str,
    props: Option<&'a Properties>,
}

impl Section<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.props.and_then(|p| p.get(key)).map(str::trim)
    }

    fn bad(&self, key: &str, value: &str, msg: impl Into<String>) -> CliError {
        CliError::Config { key: format!("{}.{key}", self.name), value: value.to_string(), msg: msg.into() }
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| self.bad(key, v, e.to_string())),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.parse(key, default)?;
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(self.bad(key, &v.to_string(), "must be a positive number"))
        }
    }

    fn exponent(&self, key: &str, default: f64) -> Result<f64, CliError> {
        let v = self.parse(key, default)?;
        if v >= 1.0 {
            Ok(v)
        } else {
            Err(self.bad(key, &v.to_string(), "norm exponents must be >= 1"))
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| s.trim().parse().map_err(|e: T::Err| self.bad(key, v, e.to_string())))
            .collect::<Result<_, _>>()
            .map(Some)
    }

    fn choice<'k>(&self, key: &str, default: &'k str, allowed: &[&'k str]) -> Result<&'k str, CliError> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => allowed
                .iter()
                .find(|a| a.eq_ignore_ascii_case(v))
                .copied()
                .ok_or_else(|| self.bad(key, v, format!("expected one of {}", allowed.join(", ")))),
        }
    }

    fn vector3(&self, key: &str, default: [f64; 3]) -> Result<[f64; 3], CliError> {
        match self.list::<f64>(key)? {
            None => Ok(default),
            Some(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
            Some(_) => Err(self.bad(key, self.raw(key).unwrap_or(""), "expected three comma-separated numbers")),
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CliError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::Syntax { line: e.line, msg: e.msg.into_owned() })?;
        for (name, props) in ini.iter() {
            let Some(name) = name else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(CliError::UnknownKey(format!("{key} (keys must follow a [section] header)")));
                }
                continue;
            };
            let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == name) else {
                return Err(CliError::UnknownSection(name.to_string()));
            };
            if let Some((key, _)) = props.iter().find(|(k, _)| !keys.contains(k)) {
                return Err(CliError::UnknownKey(format!("{name}.{key}")));
            }
        }
        let section = |name: &'static str| Section { name, props: ini.section(Some(name)) };
        let d = Self::default();

        let s = section("surface");
        let radius = s.positive("radius", 1.0)?;
        let flow = match s.choice("flow", "ellipsoid", &["sphere", "ellipsoid", "translation"])? {
            "sphere" => FlowMap::stationary_sphere(),
            "translation" => FlowMap::translation(s.vector3("velocity", [0.1, 0.0, 0.0])?),
            _ => {
                let amplitude: f64 = s.parse("amplitude", 0.25)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(s.bad("amplitude", &amplitude.to_string(), "must lie in (-1, 1)"));
                }
                FlowMap::oscillating_ellipsoid(amplitude, s.parse("frequency", 1.0)?)
            }
        }
        .with_radius(radius);

        let s = section("problem");
        let kind = match s.choice("kind", "harmonic-map", &["linear", "harmonic-map", "custom-manufactured"])? {
            "linear" => ProblemKind::Linear,
            "custom-manufactured" => ProblemKind::CustomManufactured,
            _ => ProblemKind::HarmonicMap,
        };
        let default_nl = if kind == ProblemKind::HarmonicMap { "harmonic-map" } else { "zero" };
        let nonlinearity = match s.choice("nonlinearity", default_nl, &["zero", "harmonic-map"])? {
            "zero" => Nonlinearity::Zero,
            _ => Nonlinearity::HarmonicMap,
        };
        if kind != ProblemKind::CustomManufactured && s.raw("nonlinearity").is_some_and(|v| v != default_nl) {
            return Err(s.bad(
                "nonlinearity",
                s.raw("nonlinearity").unwrap_or(""),
                "only custom-manufactured problems choose the nonlinearity",
            ));
        }
        let rate: f64 = s.parse("rate", 1.0)?;
        let exact = match s.choice("exact", "product-decay", &["product-decay", "linear-decay", "constant", "zero"])? {
            "linear-decay" => AmbientField::LinearDecay { coeffs: s.vector3("coeffs", [1.0, 0.0, 0.0])?, rate },
            "constant" => AmbientField::Constant(s.parse("value", 1.0)?),
            "zero" => AmbientField::Zero,
            _ => AmbientField::ProductDecay { rate },
        };
        let manufactured_forcing = s.choice("forcing", "manufactured", &["manufactured", "none"])? == "manufactured";
        let problem = ProblemConfig { kind, nonlinearity, exact, manufactured_forcing };

        let s = section("time");
        let order: usize = s.parse("order", d.time.order)?;
        if !(1..=MAX_ORDER).contains(&order) {
            return Err(s.bad(
                "order",
                &order.to_string(),
                format!("supported BDF orders are 1..={MAX_ORDER}; the method is unstable for k > 6"),
            ));
        }
        let tau0 = s.positive("tau0", d.time.tau0)?;
        let horizon = s.positive("horizon", d.time.horizon)?;
        if tau0 > horizon {
            return Err(s.bad("tau0", &tau0.to_string(), format!("must not exceed horizon = {horizon}")));
        }
        let halvings: usize = s.parse("halvings", d.time.halvings)?;
        if halvings > 20 {
            return Err(s.bad("halvings", &halvings.to_string(), "at most 20 halvings"));
        }
        let time = TimeConfig { order, tau0, halvings, horizon };

        let s = section("mesh");
        let mesh_levels = s.list::<u32>("levels")?.unwrap_or(d.mesh_levels);
        if mesh_levels.is_empty() || mesh_levels.iter().any(|&l| l > MAX_SUBDIVISIONS) {
            return Err(s.bad(
                "levels",
                s.raw("levels").unwrap_or(""),
                format!("expected levels in 0..={MAX_SUBDIVISIONS}"),
            ));
        }

        let s = section("solver");
        let max_iter: Option<usize> = match s.raw("max_iter") {
            None => None,
            Some(_) => Some(s.parse("max_iter", 0)?),
        };
        let solver = SolverConfig {
            rel_tol: s.positive("rel_tol", d.solver.rel_tol)?,
            abs_floor: s.parse("abs_floor", d.solver.abs_floor)?,
            max_iter,
            preconditioner: match s.choice("preconditioner", "diagonal", &["diagonal", "none"])? {
                "none" => Preconditioner::None,
                _ => Preconditioner::Diagonal,
            },
        };
        solver.validate().map_err(|e| s.bad("max_iter", &format!("{max_iter:?}"), e.to_string()))?;

        let s = section("output");
        let output = OutputConfig {
            dir: s.raw("dir").map(PathBuf::from).unwrap_or(d.output.dir),
            vtk: s.parse("vtk", false)?,
            vtk_every: s.parse("vtk_every", 1usize)?.max(1),
        };

        let s = section("norms");
        let (norm_p, norm_q) = (s.exponent("p", d.norm_p)?, s.exponent("q", d.norm_q)?);

        let seed = section("run").parse("seed", 0u64)?;
        let s = section("maxreg");
        let maxreg = MaxRegProbe {
            p: s.exponent("p", 2.0)?,
            q: s.exponent("q", 2.0)?,
            taus: time.taus(),
            horizon,
            seed: s.parse("seed", seed)?,
            amplitude: s.parse("amplitude", 1.0)?,
        };

        let s = section("pullback");
        let pullback = PullbackCheckConfig { times: s.parse("times", 10)?, samples: s.parse("samples", 100)? };

        Ok(Self { flow, problem, time, mesh_levels, solver, output, norm_p, norm_q, maxreg, pullback, seed })
    }

    /// Overrides the seed of every random component.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.maxreg.seed = seed;
        self
    }
}
