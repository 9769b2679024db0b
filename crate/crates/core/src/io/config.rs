//! `key = value` run configuration.
//!
//! One pair per line; `#` starts a comment. A `preset` line selects the
//! defaults of one of the named problems, every other key overrides them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::dg::{DgSpace, SpaceOptions};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, Mesh, Rect};
use crate::model::{InitialCondition, Mobility, MobilityKind, Model, Potential, PresetName, ProblemPreset};
use crate::solver::NewtonSettings;

/// Time step, either absolute or proportional to the mesh label
/// `h = width / (2 nx)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeStep {
    Fixed(f64),
    MeshScaled(f64),
}

impl TimeStep {
    pub fn resolve(&self, h_label: f64) -> f64 {
        match *self {
            TimeStep::Fixed(dt) => dt,
            TimeStep::MeshScaled(c) => c * h_label,
        }
    }
}

impl std::fmt::Display for TimeStep {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TimeStep::Fixed(dt) => write!(f, "{dt:?}"),
            TimeStep::MeshScaled(c) => write!(f, "{c:?}h"),
        }
    }
}

impl FromStr for TimeStep {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (num, scaled) = match s.strip_suffix('h') {
            Some(rest) => (rest, true),
            None => (s, false),
        };
        let v: f64 = num
            .trim()
            .parse()
            .map_err(|_| format!("expected a number or `<factor>h`, got `{s}`"))?;
        Ok(if scaled { TimeStep::MeshScaled(v) } else { TimeStep::Fixed(v) })
    }
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Option<PresetName>,
    pub domain: Rect,
    pub bc_kind: BoundaryKind,
    pub nx: usize,
    pub ny: usize,
    pub degree: usize,
    pub sigma: Option<f64>,
    pub nonlinear_degree: Option<usize>,
    pub epsilon: f64,
    pub mobility: Mobility,
    pub potential: Potential,
    pub initial: InitialCondition,
    pub dt: TimeStep,
    pub t_final: f64,
    pub newton: NewtonSettings,
    /// Diagnostics are recorded every `output_stride` steps and at the end.
    pub output_stride: usize,
    /// Times at which field snapshots are written, besides the final state.
    pub snapshot_times: Vec<f64>,
    pub output_dir: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "preset",
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "bc",
    "nx",
    "ny",
    "q",
    "sigma",
    "nonlinear_degree",
    "epsilon",
    "mobility",
    "mobility_beta",
    "potential",
    "theta",
    "theta_c",
    "stiffness",
    "initial",
    "mean",
    "amplitude",
    "seed",
    "dt",
    "t_final",
    "newton_tol",
    "newton_max_iter",
    "tau_points",
    "output_stride",
    "snapshot_times",
    "output_dir",
];

/// Keys that would invalidate the exact solution of a manufactured problem.
const FIXED_FOR_EXACT: &[&str] = &[
    "x_min",
    "x_max",
    "y_min",
    "y_max",
    "bc",
    "potential",
    "theta",
    "theta_c",
    "stiffness",
    "initial",
    "mean",
    "amplitude",
    "seed",
];

impl RunConfig {
    /// Defaults of a named problem. Mesh size and final time of the
    /// random-initial-state problems are desk-scale choices.
    pub fn from_preset(name: PresetName) -> Self {
        let p = ProblemPreset::get(name);
        let (n, q, dt, t_final, tau_points) = match name {
            PresetName::Ex1 => (8, 1, TimeStep::MeshScaled(0.5), 1.0, 2),
            PresetName::Ex2 => (8, 1, TimeStep::Fixed(ex2_dt(1)), 1.0, 2),
            PresetName::Ex3Spinodal | PresetName::Ex3Nucleation => (32, 1, TimeStep::Fixed(1e-5), 2e-3, 2),
            PresetName::Ex4 => (32, 3, TimeStep::Fixed(1e-7), 0.2, 5),
        };
        RunConfig {
            preset: Some(name),
            domain: p.domain,
            bc_kind: p.bc_kind,
            nx: n,
            ny: n,
            degree: q,
            sigma: None,
            nonlinear_degree: None,
            epsilon: p.model.epsilon,
            mobility: p.model.mobility,
            potential: p.model.potential,
            initial: p.initial,
            dt,
            t_final,
            newton: NewtonSettings {
                tau_points,
                ..NewtonSettings::default()
            },
            output_stride: 1,
            snapshot_times: Vec::new(),
            output_dir: None,
        }
    }

    /// Defaults when no preset is named; `dt` and `t_final` must be given.
    fn custom() -> Self {
        RunConfig {
            preset: None,
            domain: Rect {
                x_min: 0.0,
                x_max: 1.0,
                y_min: 0.0,
                y_max: 1.0,
            },
            bc_kind: BoundaryKind::Neumann,
            nx: 16,
            ny: 16,
            degree: 1,
            sigma: None,
            nonlinear_degree: None,
            epsilon: 0.05,
            mobility: Mobility::constant(1.0),
            potential: Potential::DoubleWell,
            initial: InitialCondition::Random {
                mean: 0.0,
                amplitude: 0.05,
                seed: 1,
            },
            dt: TimeStep::Fixed(f64::NAN),
            t_final: f64::NAN,
            newton: NewtonSettings::default(),
            output_stride: 1,
            snapshot_times: Vec::new(),
            output_dir: None,
        }
    }

    /// `width / (2 nx)`, the mesh size label of the convergence tables.
    pub fn h_label(&self) -> f64 {
        self.domain.width() / (2.0 * self.nx as f64)
    }

    pub fn time_step(&self) -> f64 {
        self.dt.resolve(self.h_label())
    }

    pub fn model(&self) -> Model {
        Model {
            epsilon: self.epsilon,
            potential: self.potential,
            mobility: self.mobility,
            exact: match self.initial {
                InitialCondition::Exact(e) => Some(e),
                InitialCondition::Random { .. } => None,
            },
        }
    }

    pub fn space(&self) -> Result<DgSpace> {
        let mesh = Mesh::rect(self.domain, self.nx, self.ny, self.bc_kind)?;
        DgSpace::new(
            mesh,
            self.degree,
            SpaceOptions {
                sigma: self.sigma,
                nonlinear_degree: self.nonlinear_degree,
            },
        )
    }

    /// The same problem on a mesh refined `2^level` times in each direction.
    pub fn refined(&self, level: u32) -> Self {
        let f = 1usize << level;
        RunConfig {
            nx: self.nx * f,
            ny: self.ny * f,
            ..self.clone()
        }
    }

    /// Checks value constraints; errors report line 0.
    pub fn validate(&self) -> Result<()> {
        check_constraints(self, &|_| None)
    }

    /// Writes every field explicitly; parsing the result gives back `self`.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(p) = self.preset {
            kv("preset", p.name().into());
        }
        kv("x_min", format!("{:?}", self.domain.x_min));
        kv("x_max", format!("{:?}", self.domain.x_max));
        kv("y_min", format!("{:?}", self.domain.y_min));
        kv("y_max", format!("{:?}", self.domain.y_max));
        kv("bc", self.bc_kind.name().into());
        kv("nx", self.nx.to_string());
        kv("ny", self.ny.to_string());
        kv("q", self.degree.to_string());
        if let Some(sig) = self.sigma {
            kv("sigma", format!("{sig:?}"));
        }
        if let Some(d) = self.nonlinear_degree {
            kv("nonlinear_degree", d.to_string());
        }
        kv("epsilon", format!("{:?}", self.epsilon));
        kv("mobility", self.mobility.kind.name().into());
        kv("mobility_beta", format!("{:?}", self.mobility.beta));
        kv("potential", self.potential.name().into());
        match self.potential {
            Potential::DoubleWell => {}
            Potential::Logarithmic { theta, theta_c } => {
                kv("theta", format!("{theta:?}"));
                kv("theta_c", format!("{theta_c:?}"));
            }
            Potential::Quadratic { stiffness } => kv("stiffness", format!("{stiffness:?}")),
        }
        match self.initial {
            InitialCondition::Exact(_) => kv("initial", "exact".into()),
            InitialCondition::Random { mean, amplitude, seed } => {
                kv("initial", "random".into());
                kv("mean", format!("{mean:?}"));
                kv("amplitude", format!("{amplitude:?}"));
                kv("seed", seed.to_string());
            }
        }
        kv("dt", self.dt.to_string());
        kv("t_final", format!("{:?}", self.t_final));
        kv("newton_tol", format!("{:?}", self.newton.tol));
        kv("newton_max_iter", self.newton.max_iter.to_string());
        kv("tau_points", self.newton.tau_points.to_string());
        kv("output_stride", self.output_stride.to_string());
        if !self.snapshot_times.is_empty() {
            let list: Vec<String> = self.snapshot_times.iter().map(|t| format!("{t:?}")).collect();
            kv("snapshot_times", list.join(","));
        }
        if let Some(d) = &self.output_dir {
            kv("output_dir", d.display().to_string());
        }
        s
    }
}

fn ex2_dt(q: usize) -> f64 {
    if q == 1 {
        0.0032 * PI
    } else {
        0.00032 * PI
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn value<T: FromStr>(key: &str, raw: &str, line: usize) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.parse::<T>()
        .map_err(|e| config_err(line, format!("invalid value `{raw}` for `{key}`: {e}")))
}

/// Parses, applies preset defaults and overrides, and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut entries: Vec<(usize, &str, &str)> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `key = value`, got `{content}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(config_err(line, format!("unknown key `{k}`")));
        }
        if v.is_empty() {
            return Err(config_err(line, format!("missing value for `{k}`")));
        }
        if let Some(first) = seen.insert(k, line) {
            return Err(config_err(line, format!("duplicate key `{k}` (first set on line {first})")));
        }
        entries.push((line, k, v));
    }
    let line_of = |k: &str| seen.get(k).copied();

    let mut cfg = match entries.iter().find(|e| e.1 == "preset") {
        Some(&(line, k, v)) => RunConfig::from_preset(value(k, v, line)?),
        None => RunConfig::custom(),
    };
    let preset_cfg = cfg.clone();

    let mut potential_kind = cfg.potential.name();
    let (mut theta, mut theta_c, mut stiffness) = match cfg.potential {
        Potential::Logarithmic { theta, theta_c } => (Some(theta), Some(theta_c), None),
        Potential::Quadratic { stiffness } => (None, None, Some(stiffness)),
        Potential::DoubleWell => (None, None, None),
    };
    let mut initial_kind = match cfg.initial {
        InitialCondition::Exact(_) => "exact",
        InitialCondition::Random { .. } => "random",
    };
    let (mut mean, mut amplitude, mut seed) = match cfg.initial {
        InitialCondition::Random { mean, amplitude, seed } => (mean, amplitude, seed),
        InitialCondition::Exact(_) => (0.0, 0.0, 1),
    };
    let mut dt_given = false;

    for &(line, k, v) in &entries {
        match k {
            "preset" => {}
            "x_min" => cfg.domain.x_min = value(k, v, line)?,
            "x_max" => cfg.domain.x_max = value(k, v, line)?,
            "y_min" => cfg.domain.y_min = value(k, v, line)?,
            "y_max" => cfg.domain.y_max = value(k, v, line)?,
            "bc" => cfg.bc_kind = value(k, v, line)?,
            "nx" => cfg.nx = value(k, v, line)?,
            "ny" => cfg.ny = value(k, v, line)?,
            "q" => cfg.degree = value(k, v, line)?,
            "sigma" => cfg.sigma = Some(value(k, v, line)?),
            "nonlinear_degree" => cfg.nonlinear_degree = Some(value(k, v, line)?),
            "epsilon" => cfg.epsilon = value(k, v, line)?,
            "mobility" => cfg.mobility.kind = value::<MobilityKind>(k, v, line)?,
            "mobility_beta" => cfg.mobility.beta = value(k, v, line)?,
            "potential" => {
                potential_kind = match v {
                    "double_well" => "double_well",
                    "logarithmic" => "logarithmic",
                    "quadratic" => "quadratic",
                    _ => {
                        return Err(config_err(
                            line,
                            format!("invalid value `{v}` for `potential` (expected double_well|logarithmic|quadratic)"),
                        ))
                    }
                }
            }
            "theta" => theta = Some(value(k, v, line)?),
            "theta_c" => theta_c = Some(value(k, v, line)?),
            "stiffness" => stiffness = Some(value(k, v, line)?),
            "initial" => {
                initial_kind = match v {
                    "exact" => "exact",
                    "random" => "random",
                    _ => return Err(config_err(line, format!("invalid value `{v}` for `initial` (expected exact|random)"))),
                }
            }
            "mean" => mean = value(k, v, line)?,
            "amplitude" => amplitude = value(k, v, line)?,
            "seed" => seed = value(k, v, line)?,
            "dt" => {
                cfg.dt = value(k, v, line)?;
                dt_given = true;
            }
            "t_final" => cfg.t_final = value(k, v, line)?,
            "newton_tol" => cfg.newton.tol = value(k, v, line)?,
            "newton_max_iter" => cfg.newton.max_iter = value(k, v, line)?,
            "tau_points" => cfg.newton.tau_points = value(k, v, line)?,
            "output_stride" => cfg.output_stride = value(k, v, line)?,
            "snapshot_times" => {
                cfg.snapshot_times = v
                    .split(',')
                    .map(|t| value::<f64>(k, t.trim(), line))
                    .collect::<Result<_>>()?
            }
            "output_dir" => cfg.output_dir = Some(PathBuf::from(v)),
            _ => unreachable!("key list checked above"),
        }
    }

    // potential
    let missing = |k: &str| config_err(line_of("potential").unwrap_or(0), format!("potential needs `{k}`"));
    cfg.potential = match potential_kind {
        "double_well" => Potential::DoubleWell,
        "logarithmic" => {
            let (t, tc) = (theta.ok_or_else(|| missing("theta"))?, theta_c.ok_or_else(|| missing("theta_c"))?);
            Potential::logarithmic(t, tc)
                .map_err(|e| config_err(line_of("theta").or(line_of("theta_c")).unwrap_or(0), e.to_string()))?
        }
        _ => {
            let k = stiffness.ok_or_else(|| missing("stiffness"))?;
            if !k.is_finite() {
                return Err(config_err(line_of("stiffness").unwrap_or(0), "stiffness must be finite"));
            }
            Potential::Quadratic { stiffness: k }
        }
    };

    // initial condition
    cfg.initial = match (initial_kind, preset_cfg.initial) {
        ("exact", InitialCondition::Exact(e)) => InitialCondition::Exact(e),
        ("exact", _) => {
            return Err(config_err(
                line_of("initial").unwrap_or(0),
                "`initial = exact` needs a preset with an exact solution",
            ))
        }
        _ => InitialCondition::Random { mean, amplitude, seed },
    };

    // preset conflicts
    if matches!(preset_cfg.initial, InitialCondition::Exact(_)) {
        for &k in FIXED_FOR_EXACT {
            if let Some(line) = line_of(k) {
                let same = match k {
                    "x_min" | "x_max" | "y_min" | "y_max" => cfg.domain == preset_cfg.domain,
                    "bc" => cfg.bc_kind == preset_cfg.bc_kind,
                    "potential" | "theta" | "theta_c" | "stiffness" => cfg.potential == preset_cfg.potential,
                    "initial" => cfg.initial == preset_cfg.initial,
                    _ => false,
                };
                if !same {
                    let name = preset_cfg.preset.map(|p| p.name()).unwrap_or("");
                    return Err(config_err(
                        line,
                        format!("`{k}` conflicts with preset `{name}`, whose exact solution fixes it"),
                    ));
                }
            }
        }
    }

    if !dt_given {
        match cfg.preset {
            Some(PresetName::Ex2) => cfg.dt = TimeStep::Fixed(ex2_dt(cfg.degree)),
            None => return Err(Error::InvalidArgument("config: missing required key `dt`".into())),
            _ => {}
        }
    }
    if cfg.preset.is_none() && line_of("t_final").is_none() {
        return Err(Error::InvalidArgument("config: missing required key `t_final`".into()));
    }

    check_constraints(&cfg, &line_of)?;
    Ok(cfg)
}

fn check_constraints(cfg: &RunConfig, line_of: &dyn Fn(&str) -> Option<usize>) -> Result<()> {
    let fail = |keys: &[&str], msg: String| {
        let line = keys.iter().find_map(|k| line_of(k)).unwrap_or(0);
        Err(config_err(line, msg))
    };
    if let Err(e) = Rect::new(cfg.domain.x_min, cfg.domain.x_max, cfg.domain.y_min, cfg.domain.y_max) {
        return fail(&["x_min", "x_max", "y_min", "y_max"], e.to_string());
    }
    if cfg.nx == 0 || cfg.ny == 0 {
        return fail(&["nx", "ny"], format!("nx and ny must be positive (got {} and {})", cfg.nx, cfg.ny));
    }
    if !(1..=3).contains(&cfg.degree) {
        return fail(&["q"], format!("q must be 1, 2 or 3, got {}", cfg.degree));
    }
    if let Some(s) = cfg.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return fail(&["sigma"], format!("sigma must be positive, got {s}"));
        }
    }
    if !(cfg.epsilon > 0.0 && cfg.epsilon.is_finite()) {
        return fail(&["epsilon"], format!("epsilon must be positive, got {}", cfg.epsilon));
    }
    if let Err(e) = Mobility::new(cfg.mobility.kind, cfg.mobility.beta) {
        return fail(&["mobility_beta", "mobility"], e.to_string());
    }
    if let InitialCondition::Random { mean, amplitude, .. } = cfg.initial {
        if !(mean.is_finite() && amplitude >= 0.0 && amplitude.is_finite()) {
            return fail(
                &["mean", "amplitude"],
                format!("initial state needs finite mean and amplitude >= 0 (got {mean}, {amplitude})"),
            );
        }
    }
    let dt = cfg.time_step();
    if !(dt > 0.0 && dt.is_finite()) {
        return fail(&["dt"], format!("dt must be positive, got {}", cfg.dt));
    }
    if !(cfg.t_final >= 0.0 && cfg.t_final.is_finite()) {
        return fail(&["t_final"], format!("t_final must be non-negative, got {}", cfg.t_final));
    }
    if let Err(e) = cfg.newton.validate() {
        return fail(&["newton_tol", "newton_max_iter", "tau_points"], e.to_string());
    }
    if cfg.output_stride == 0 {
        return fail(&["output_stride"], "output_stride must be at least 1".into());
    }
    if let Some(t) = cfg.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= cfg.t_final)) {
        return fail(&["snapshot_times"], format!("snapshot time {t} outside [0, t_final]"));
    }
    if cfg.bc_kind == BoundaryKind::Periodic && (cfg.nx < 2 || cfg.ny < 2) {
        return fail(&["nx", "ny", "bc"], "periodic meshes need at least 2 cells per direction".into());
    }
    Ok(())
}
