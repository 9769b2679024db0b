//! Potentials, mobilities, exact solutions and the problem presets.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dg::DgSpace;
use crate::error::{Error, Result};
use crate::mesh::{BoundaryKind, Rect};

/// Arguments of the logarithmic potential are clamped into `[δ, 1 - δ]`.
pub const LOG_CLAMP: f64 = 1e-9;

/// `F(u)`, `f = F'` and `f' = F''` at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialValues {
    pub value: f64,
    pub first: f64,
    pub second: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Potential {
    /// `F = (1 - u²)² / 4`
    DoubleWell,
    /// `F = θ/2 [u ln u + (1 - u) ln(1 - u)] + θ_c/2 · u (1 - u)`
    Logarithmic { theta: f64, theta_c: f64 },
    /// `F = k u² / 2`; linear `f`, used to check the midpoint-rule limit.
    Quadratic { stiffness: f64 },
}

impl Potential {
    pub fn logarithmic(theta: f64, theta_c: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= theta_c && theta_c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "logarithmic potential needs 0 < theta <= theta_c (theta = {theta}, theta_c = {theta_c})"
            )));
        }
        Ok(Potential::Logarithmic { theta, theta_c })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::DoubleWell => "double_well",
            Potential::Logarithmic { .. } => "logarithmic",
            Potential::Quadratic { .. } => "quadratic",
        }
    }

    /// Evaluates the potential; the flag reports whether `u` was clamped.
    pub fn eval(&self, u: f64) -> (PotentialValues, bool) {
        match *self {
            Potential::DoubleWell => {
                let s = 1.0 - u * u;
                (
                    PotentialValues {
                        value: 0.25 * s * s,
                        first: u * u * u - u,
                        second: 3.0 * u * u - 1.0,
                    },
                    false,
                )
            }
            Potential::Logarithmic { theta, theta_c } => {
                let c = u.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                let v = 1.0 - c;
                (
                    PotentialValues {
                        value: 0.5 * theta * (c * c.ln() + v * v.ln()) + 0.5 * theta_c * c * v,
                        first: 0.5 * theta * (c.ln() - v.ln()) + 0.5 * theta_c * (1.0 - 2.0 * c),
                        second: 0.5 * theta * (1.0 / c + 1.0 / v) - theta_c,
                    },
                    c != u,
                )
            }
            Potential::Quadratic { stiffness } => (
                PotentialValues {
                    value: 0.5 * stiffness * u * u,
                    first: stiffness * u,
                    second: stiffness,
                },
                false,
            ),
        }
    }

    /// `f''(u) = F'''(u)`.
    pub fn third(&self, u: f64) -> f64 {
        match *self {
            Potential::DoubleWell => 6.0 * u,
            Potential::Logarithmic { theta, .. } => {
                let c = u.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                0.5 * theta * (1.0 / ((1.0 - c) * (1.0 - c)) - 1.0 / (c * c))
            }
            Potential::Quadratic { .. } => 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MobilityKind {
    Constant,
    UOneMinusU,
    OneMinusUSq,
}

impl MobilityKind {
    pub fn name(self) -> &'static str {
        match self {
            MobilityKind::Constant => "constant",
            MobilityKind::UOneMinusU => "u_one_minus_u",
            MobilityKind::OneMinusUSq => "one_minus_u_sq",
        }
    }
}

impl std::str::FromStr for MobilityKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "constant" => Ok(MobilityKind::Constant),
            "u_one_minus_u" => Ok(MobilityKind::UOneMinusU),
            "one_minus_u_sq" => Ok(MobilityKind::OneMinusUSq),
            other => Err(format!(
                "unknown mobility `{other}` (expected constant|u_one_minus_u|one_minus_u_sq)"
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mobility {
    pub kind: MobilityKind,
    pub beta: f64,
}

impl Mobility {
    pub fn new(kind: MobilityKind, beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("mobility scale must be positive, got {beta}")));
        }
        Ok(Mobility { kind, beta })
    }

    pub fn constant(beta: f64) -> Self {
        Mobility {
            kind: MobilityKind::Constant,
            beta,
        }
    }

    pub fn is_constant(&self) -> bool {
        self.kind == MobilityKind::Constant
    }

    /// Unclamped formula.
    pub fn raw(&self, u: f64) -> f64 {
        self.beta
            * match self.kind {
                MobilityKind::Constant => 1.0,
                MobilityKind::UOneMinusU => u * (1.0 - u),
                MobilityKind::OneMinusUSq => 1.0 - u * u,
            }
    }

    pub fn raw_derivative(&self, u: f64) -> f64 {
        self.beta
            * match self.kind {
                MobilityKind::Constant => 0.0,
                MobilityKind::UOneMinusU => 1.0 - 2.0 * u,
                MobilityKind::OneMinusUSq => -2.0 * u,
            }
    }

    /// Mobility clamped at zero.
    pub fn eval(&self, u: f64) -> f64 {
        self.raw(u).max(0.0)
    }
}

/// Closed-form solutions of the form `a(t) X(x) Y(y)` with `Δu = -λ u`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactSolution {
    /// `e^{cos t} cos(πx) cos(πy)`
    CosineProduct,
    /// `e^{-2t} sin x sin y`
    DecayingSine,
}

impl ExactSolution {
    fn amplitude(&self, t: f64) -> (f64, f64) {
        match self {
            ExactSolution::CosineProduct => {
                let a = t.cos().exp();
                (a, -t.sin() * a)
            }
            ExactSolution::DecayingSine => {
                let a = (-2.0 * t).exp();
                (a, -2.0 * a)
            }
        }
    }

    /// `(X Y, ∂x(X Y), ∂y(X Y))`
    fn shape(&self, x: f64, y: f64) -> (f64, f64, f64) {
        match self {
            ExactSolution::CosineProduct => {
                let (cx, cy) = ((PI * x).cos(), (PI * y).cos());
                let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
                (cx * cy, -PI * sx * cy, -PI * cx * sy)
            }
            ExactSolution::DecayingSine => (x.sin() * y.sin(), x.cos() * y.sin(), x.sin() * y.cos()),
        }
    }

    pub fn laplacian_eigenvalue(&self) -> f64 {
        match self {
            ExactSolution::CosineProduct => 2.0 * PI * PI,
            ExactSolution::DecayingSine => 2.0,
        }
    }

    pub fn value(&self, x: f64, y: f64, t: f64) -> f64 {
        self.amplitude(t).0 * self.shape(x, y).0
    }

    pub fn time_derivative(&self, x: f64, y: f64, t: f64) -> f64 {
        self.amplitude(t).1 * self.shape(x, y).0
    }

    pub fn gradient(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let a = self.amplitude(t).0;
        let (_, dx, dy) = self.shape(x, y);
        [a * dx, a * dy]
    }
}

/// Physical parameters of one Cahn–Hilliard problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Model {
    pub epsilon: f64,
    pub potential: Potential,
    pub mobility: Mobility,
    pub exact: Option<ExactSolution>,
}

impl Model {
    /// Source `g = u_t - ∇·(μ(u) ∇w)`, `w = -ε² Δu + f(u)`, of the exact
    /// solution.
    ///
    /// With `Δu = -λu`: `∇w = (ε²λ + f'(u)) ∇u` and
    /// `Δw = -ε²λ² u + f''(u) |∇u|² - λ u f'(u)`.
    pub fn manufactured_source(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        let exact = self
            .exact
            .ok_or_else(|| Error::NoExactSolution("model without exact solution".into()))?;
        Ok(self.source_of(exact, x, y, t))
    }

    fn source_of(&self, exact: ExactSolution, x: f64, y: f64, t: f64) -> f64 {
        let lambda = exact.laplacian_eigenvalue();
        let e2 = self.epsilon * self.epsilon;
        let u = exact.value(x, y, t);
        let ut = exact.time_derivative(x, y, t);
        let g = exact.gradient(x, y, t);
        let grad2 = g[0] * g[0] + g[1] * g[1];
        let (pv, _) = self.potential.eval(u);
        let grad_w_factor = e2 * lambda + pv.second;
        let lap_w = -e2 * lambda * lambda * u + self.potential.third(u) * grad2 - lambda * u * pv.second;
        let div_flux = self.mobility.raw_derivative(u) * grad_w_factor * grad2 + self.mobility.raw(u) * lap_w;
        ut - div_flux
    }

    pub fn source_fn(&self) -> Option<impl Fn(f64, f64, f64) -> f64 + '_> {
        self.exact.map(|e| move |x, y, t| self.source_of(e, x, y, t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitialCondition {
    Exact(ExactSolution),
    /// Mean state plus a seeded uniform perturbation in `[-amplitude, amplitude]`.
    Random { mean: f64, amplitude: f64, seed: u64 },
}

impl InitialCondition {
    pub fn coefficients(&self, space: &DgSpace) -> Vec<f64> {
        match *self {
            InitialCondition::Exact(e) => space.project_l2(|x, y| e.value(x, y, 0.0)),
            InitialCondition::Random { mean, amplitude, seed } => random_field(space, mean, amplitude, seed),
        }
    }
}

/// `mean + r` where `r` is, on each triangle, the linear interpolant of three
/// independent uniform samples at its vertices. The perturbation never
/// exceeds `amplitude` pointwise.
pub fn random_field(space: &DgSpace, mean: f64, amplitude: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = space.n_local();
    let tab = space.accurate_tabulation();
    let mut out = vec![0.0; space.n_dofs()];
    for k in 0..space.n_elements() {
        let r: [f64; 3] = std::array::from_fn(|_| {
            if amplitude > 0.0 {
                rng.random_range(-amplitude..=amplitude)
            } else {
                0.0
            }
        });
        let c = &mut out[k * n..(k + 1) * n];
        for (g, (p, w)) in tab.rule.iter().enumerate() {
            let v = mean + r[0] * (1.0 - p[0] - p[1]) + r[1] * p[0] + r[2] * p[1];
            let phi = &tab.values[g * n..(g + 1) * n];
            for i in 0..n {
                c[i] += w * v * phi[i];
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PresetName {
    Ex1,
    Ex2,
    Ex3Spinodal,
    Ex3Nucleation,
    Ex4,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [
        PresetName::Ex1,
        PresetName::Ex2,
        PresetName::Ex3Spinodal,
        PresetName::Ex3Nucleation,
        PresetName::Ex4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PresetName::Ex1 => "ex1",
            PresetName::Ex2 => "ex2",
            PresetName::Ex3Spinodal => "ex3_spinodal",
            PresetName::Ex3Nucleation => "ex3_nucleation",
            PresetName::Ex4 => "ex4",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PresetName::Ex1 => "constant mobility, double well, Neumann; exact solution e^cos(t) cos(pi x) cos(pi y)",
            PresetName::Ex2 => "mobility 1-u^2, double well, periodic; exact solution e^(-2t) sin x sin y",
            PresetName::Ex3Spinodal => "constant mobility, double well, Neumann; random state around 0",
            PresetName::Ex3Nucleation => "constant mobility, double well, Neumann; random state around 0.4",
            PresetName::Ex4 => "mobility u(1-u), logarithmic potential, Neumann; random state around 0.63",
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        PresetName::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProblemPreset {
    pub name: PresetName,
    pub model: Model,
    pub domain: Rect,
    pub bc_kind: BoundaryKind,
    pub initial: InitialCondition,
}

impl ProblemPreset {
    pub fn get(name: PresetName) -> Self {
        let rect = |a: f64, b: f64| Rect {
            x_min: a,
            x_max: b,
            y_min: a,
            y_max: b,
        };
        let double_well = |epsilon, mobility, exact| Model {
            epsilon,
            potential: Potential::DoubleWell,
            mobility,
            exact,
        };
        match name {
            PresetName::Ex1 => ProblemPreset {
                name,
                model: double_well(0.1, Mobility::constant(1.0), Some(ExactSolution::CosineProduct)),
                domain: rect(-1.0, 1.0),
                bc_kind: BoundaryKind::Neumann,
                initial: InitialCondition::Exact(ExactSolution::CosineProduct),
            },
            PresetName::Ex2 => ProblemPreset {
                name,
                model: double_well(
                    1.0,
                    Mobility {
                        kind: MobilityKind::OneMinusUSq,
                        beta: 1.0,
                    },
                    Some(ExactSolution::DecayingSine),
                ),
                domain: rect(0.0, 2.0 * PI),
                bc_kind: BoundaryKind::Periodic,
                initial: InitialCondition::Exact(ExactSolution::DecayingSine),
            },
            PresetName::Ex3Spinodal | PresetName::Ex3Nucleation => ProblemPreset {
                name,
                model: double_well(1e-5, Mobility::constant(1.0), None),
                domain: rect(0.0, 1.0),
                bc_kind: BoundaryKind::Neumann,
                initial: InitialCondition::Random {
                    mean: if name == PresetName::Ex3Spinodal { 0.0 } else { 0.4 },
                    amplitude: 0.005,
                    seed: 1,
                },
            },
            PresetName::Ex4 => ProblemPreset {
                name,
                model: Model {
                    epsilon: 1.0,
                    potential: Potential::Logarithmic {
                        theta: 6000.0,
                        theta_c: 18000.0,
                    },
                    mobility: Mobility {
                        kind: MobilityKind::UOneMinusU,
                        beta: 1.0,
                    },
                    exact: None,
                },
                domain: rect(-0.5, 0.5),
                bc_kind: BoundaryKind::Neumann,
                initial: InitialCondition::Random {
                    mean: 0.63,
                    amplitude: 0.05,
                    seed: 1,
                },
            },
        }
    }

    /// Source term of the preset, when it has an exact solution.
    pub fn manufactured_source(&self, x: f64, y: f64, t: f64) -> Result<f64> {
        if self.model.exact.is_none() {
            return Err(Error::NoExactSolution(self.name.name().into()));
        }
        self.model.manufactured_source(x, y, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::SpaceOptions;
    use crate::mesh::Mesh;

    #[test]
    fn double_well_values() {
        let (v, c) = Potential::DoubleWell.eval(0.0);
        assert_eq!((v.value, v.first, v.second, c), (0.25, 0.0, -1.0, false));
        let (v, _) = Potential::DoubleWell.eval(1.0);
        assert_eq!((v.value, v.first, v.second), (0.0, 0.0, 2.0));
    }

    #[test]
    fn ex4_potential_symmetric_point() {
        let p = ProblemPreset::get(PresetName::Ex4).model.potential;
        let (v, clamped) = p.eval(0.5);
        assert_eq!(v.first, 0.0);
        assert!(!clamped);
        // F(u) = 3000(u ln u + (1-u) ln(1-u)) + 9000 u(1-u)
        let u: f64 = 0.3;
        let printed = 3000.0 * (u * u.ln() + (1.0 - u) * (1.0 - u).ln()) + 9000.0 * u * (1.0 - u);
        assert!((p.eval(u).0.value - printed).abs() < 1e-10);
    }

    #[test]
    fn logarithmic_clamps() {
        let p = Potential::logarithmic(1.0, 2.0).unwrap();
        assert!(p.eval(-0.1).1);
        assert!(p.eval(1.0).1);
        assert!(p.eval(-0.1).0.value.is_finite());
        assert!(!p.eval(0.4).1);
        assert!(Potential::logarithmic(3.0, 2.0).is_err());
        assert!(Potential::logarithmic(0.0, 2.0).is_err());
    }

    #[test]
    fn derivatives_consistent() {
        let pots = [
            Potential::DoubleWell,
            Potential::logarithmic(6000.0, 18000.0).unwrap(),
            Potential::Quadratic { stiffness: 2.5 },
        ];
        let h = 1e-6;
        for p in pots {
            let range: Vec<f64> = if matches!(p, Potential::Logarithmic { .. }) {
                (1..20).map(|i| i as f64 / 20.0).collect()
            } else {
                (-20..=20).map(|i| i as f64 / 10.0).collect()
            };
            for u in range {
                let (v, _) = p.eval(u);
                let fd1 = (p.eval(u + h).0.value - p.eval(u - h).0.value) / (2.0 * h);
                let fd2 = (p.eval(u + h).0.first - p.eval(u - h).0.first) / (2.0 * h);
                let fd3 = (p.eval(u + h).0.second - p.eval(u - h).0.second) / (2.0 * h);
                let scale = 1.0 + v.first.abs().max(v.second.abs());
                assert!((fd1 - v.first).abs() < 1e-6 * scale, "{} F' at {u}", p.name());
                assert!((fd2 - v.second).abs() < 1e-6 * scale, "{} f' at {u}", p.name());
                assert!((fd3 - p.third(u)).abs() < 1e-5 * (1.0 + p.third(u).abs()), "{} f'' at {u}", p.name());
            }
        }
    }

    #[test]
    fn mobility_values() {
        let m = Mobility::new(MobilityKind::OneMinusUSq, 1.0).unwrap();
        assert_eq!(m.eval(0.0), 1.0);
        assert_eq!(m.eval(1.2), 0.0);
        let m = Mobility::new(MobilityKind::UOneMinusU, 1.0).unwrap();
        assert_eq!(m.eval(0.5), 0.25);
        assert_eq!(m.eval(-0.5), 0.0);
        assert!(Mobility::new(MobilityKind::Constant, 0.0).is_err());
        for kind in [MobilityKind::Constant, MobilityKind::UOneMinusU, MobilityKind::OneMinusUSq] {
            let m = Mobility::new(kind, 2.0).unwrap();
            for i in -30..=30 {
                assert!(m.eval(i as f64 / 10.0) >= 0.0);
            }
        }
    }

    #[test]
    fn source_requires_exact_solution() {
        let p = ProblemPreset::get(PresetName::Ex3Spinodal);
        assert!(matches!(p.manufactured_source(0.1, 0.2, 0.0), Err(Error::NoExactSolution(_))));
        assert!(p.model.source_fn().is_none());
    }

    #[test]
    fn ex1_time_derivative_vanishes_at_t0() {
        let e = ExactSolution::CosineProduct;
        assert_eq!(e.time_derivative(0.3, -0.7, 0.0), 0.0);
        assert!(e.time_derivative(0.3, -0.7, PI).abs() < 1e-15);
    }

    // 6th-order central differences
    fn d1(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (-f(x - 3.0 * h) + 9.0 * f(x - 2.0 * h) - 45.0 * f(x - h) + 45.0 * f(x + h) - 9.0 * f(x + 2.0 * h)
            + f(x + 3.0 * h))
            / (60.0 * h)
    }

    fn d2(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (2.0 * f(x - 3.0 * h) - 27.0 * f(x - 2.0 * h) + 270.0 * f(x - h) - 490.0 * f(x) + 270.0 * f(x + h)
            - 27.0 * f(x + 2.0 * h)
            + 2.0 * f(x + 3.0 * h))
            / (180.0 * h * h)
    }

    /// `u_t - ∇·(μ(u)∇w) - g` with every derivative taken by finite differences.
    fn fd_residual(model: &Model, exact: ExactSolution, x: f64, y: f64, t: f64) -> (f64, f64) {
        let e2 = model.epsilon * model.epsilon;
        let u = move |x: f64, y: f64, t: f64| exact.value(x, y, t);
        let h_in = 2e-2;
        let w = move |x: f64, y: f64| {
            let lap = d2(&|s| u(s, y, t), x, h_in) + d2(&|s| u(x, s, t), y, h_in);
            -e2 * lap + model.potential.eval(u(x, y, t)).0.first
        };
        let mu = move |x: f64, y: f64| model.mobility.raw(u(x, y, t));
        let h = 5e-3;
        let div = d1(&|s| mu(s, y), x, h) * d1(&|s| w(s, y), x, h)
            + mu(x, y) * d2(&|s| w(s, y), x, h)
            + d1(&|s| mu(x, s), y, h) * d1(&|s| w(x, s), y, h)
            + mu(x, y) * d2(&|s| w(x, s), y, h);
        let ut = d1(&|s| u(x, y, s), t, 1e-3);
        let g = model.manufactured_source(x, y, t).unwrap();
        (ut - div - g, g)
    }

    #[test]
    fn manufactured_sources_solve_the_pde() {
        for name in [PresetName::Ex1, PresetName::Ex2] {
            let preset = ProblemPreset::get(name);
            let exact = preset.model.exact.unwrap();
            for &(x, y, t) in &[(0.13, -0.41, 0.3), (0.77, 0.52, 0.9), (-0.2, 0.05, 0.61), (1.9, 4.1, 0.45)] {
                let (r, g) = fd_residual(&preset.model, exact, x, y, t);
                assert!(r.abs() < 1e-6, "{}: residual {r:e} (g = {g})", name.name());
            }
        }
    }

    #[test]
    fn random_field_reproducible_and_bounded() {
        let mesh = Mesh::rect(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 4, 4, BoundaryKind::Neumann).unwrap();
        let space = DgSpace::new(mesh, 2, SpaceOptions::default()).unwrap();
        let a = random_field(&space, 0.4, 0.005, 7);
        let b = random_field(&space, 0.4, 0.005, 7);
        let c = random_field(&space, 0.4, 0.005, 8);
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert_ne!(a, c);
        for k in 0..space.n_elements() {
            for p in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.3, 0.3]] {
                let (v, _) = space.eval_field(&a, k, p).unwrap();
                assert!((v - 0.4).abs() <= 0.005 + 1e-12);
            }
        }
    }

    #[test]
    fn preset_names_round_trip() {
        for p in PresetName::ALL {
            assert_eq!(p.name().parse::<PresetName>().unwrap(), p);
            let preset = ProblemPreset::get(p);
            assert_eq!(preset.model.exact.is_some(), matches!(preset.initial, InitialCondition::Exact(_)));
        }
        assert!("ex5".parse::<PresetName>().is_err());
    }
}
