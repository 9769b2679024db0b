//! Average-vector-field time stepping with Newton's method.
//!
//! Unknowns per step are the coefficients `ξ` of `u_h` and `ζ` of `w_h`.
//! With the mobility matrix `A_μ` frozen at the previous state, one step
//! solves `R(ξ, ζ) = 0` for
//!
//! ```text
//! R₁ = M(ξ − ξₙ) + Δt/2 · A_μ(ζ + ζₙ) − Δt · ℓ
//! R₂ = ½ A_ε(ξ + ξₙ) − ½ M(ζ + ζₙ) + ∫₀¹ b(τξ + (1−τ)ξₙ) dτ
//! ```
//!
//! where `ℓ` is the source load averaged over the step. The τ integral uses
//! Gauss–Legendre points.

use crate::assembly::{
    assemble_avf_nonlinear, assemble_load_avg, assemble_mass, assemble_nonlinear, assemble_stiffness, tau_rule,
    AvfNonlinear, CoefficientField,
};
use crate::dg::{DgSpace, LineRule};
use crate::diagnostics::{discrete_energy, total_mass, DiagnosticsSeries};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::sparse::{DirectSolver, SparseMatrix};

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    pub xi: Vec<f64>,
    pub zeta: Vec<f64>,
    pub t: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Absolute tolerance on `‖R‖_∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Gauss points for the τ integral.
    pub tau_points: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-10,
            max_iter: 50,
            tau_points: 2,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("newton tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("newton iteration cap must be at least 1".into()));
        }
        if !(2..=5).contains(&self.tau_points) {
            return Err(Error::InvalidArgument(format!("tau points must be in 2..=5, got {}", self.tau_points)));
        }
        Ok(())
    }
}

/// Outcome of one accepted step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub iterations: usize,
    /// `‖R‖_∞` before each Newton update, and after the last one.
    pub residual_norms: Vec<f64>,
    pub clamp_events: usize,
}

/// Matrices entering the residual of one step.
#[derive(Clone, Copy, Debug)]
pub struct StepOperators<'a> {
    pub mass: &'a SparseMatrix,
    pub a_mu: &'a SparseMatrix,
    pub a_eps: &'a SparseMatrix,
    /// Step-averaged source load, if any.
    pub load: Option<&'a [f64]>,
}

#[derive(Clone, Debug)]
pub struct Residual {
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub nonlinear: AvfNonlinear,
}

impl Residual {
    pub fn norm_inf(&self) -> f64 {
        self.r1.iter().chain(&self.r2).fold(0.0, |m: f64, v| if v.is_nan() { f64::NAN } else { m.max(v.abs()) })
    }

    pub fn stacked(&self) -> Vec<f64> {
        self.r1.iter().chain(&self.r2).copied().collect()
    }
}

#[allow(clippy::too_many_arguments)]
pub fn avf_residual(
    space: &DgSpace,
    model: &Model,
    tau: &LineRule,
    ops: &StepOperators,
    previous: &StateVector,
    xi: &[f64],
    zeta: &[f64],
    dt: f64,
) -> Result<Residual> {
    space.check_len(xi)?;
    space.check_len(zeta)?;
    space.check_len(&previous.xi)?;
    space.check_len(&previous.zeta)?;
    let nd = space.n_dofs();
    let nonlinear = assemble_avf_nonlinear(space, &model.potential, &previous.xi, xi, tau)?;

    let dxi: Vec<f64> = xi.iter().zip(&previous.xi).map(|(a, b)| a - b).collect();
    let zeta_sum: Vec<f64> = zeta.iter().zip(&previous.zeta).map(|(a, b)| a + b).collect();
    let xi_sum: Vec<f64> = xi.iter().zip(&previous.xi).map(|(a, b)| a + b).collect();

    let mut r1 = ops.mass.matvec(&dxi);
    ops.a_mu.matvec_add(0.5 * dt, &zeta_sum, &mut r1);
    if let Some(load) = ops.load {
        if load.len() != nd {
            return Err(Error::DimensionMismatch {
                expected: nd,
                got: load.len(),
            });
        }
        for (r, l) in r1.iter_mut().zip(load) {
            *r -= dt * l;
        }
    }

    let mut r2 = nonlinear.b_avg.clone();
    ops.a_eps.matvec_add(0.5, &xi_sum, &mut r2);
    ops.mass.matvec_add(-0.5, &zeta_sum, &mut r2);
    Ok(Residual { r1, r2, nonlinear })
}

/// `[[M, Δt/2 A_μ], [½ A_ε + J_b, −½ M]]`
pub fn avf_jacobian(ops: &StepOperators, nonlinear_jacobian: &SparseMatrix, dt: f64) -> SparseMatrix {
    let lower = ops.a_eps.add(0.5, nonlinear_jacobian, 1.0);
    SparseMatrix::block2x2([[(ops.mass, 1.0), (ops.a_mu, 0.5 * dt)], [(&lower, 1.0), (ops.mass, -0.5)]])
}

/// Time stepper for one model on one space.
#[derive(Debug)]
pub struct Stepper {
    space: DgSpace,
    model: Model,
    settings: NewtonSettings,
    tau: LineRule,
    mass: SparseMatrix,
    unit_stiffness: SparseMatrix,
    a_eps: SparseMatrix,
    solver: DirectSolver,
}

impl Stepper {
    pub fn new(space: DgSpace, model: Model, settings: NewtonSettings) -> Result<Self> {
        settings.validate()?;
        if !(model.epsilon > 0.0 && model.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", model.epsilon)));
        }
        let tau = tau_rule(settings.tau_points)?;
        let mass = assemble_mass(&space);
        let unit_stiffness = assemble_stiffness(&space, &CoefficientField::Constant(1.0))?;
        let e2 = model.epsilon * model.epsilon;
        let a_eps = unit_stiffness.add(e2, &unit_stiffness, 0.0);
        Ok(Stepper {
            space,
            model,
            settings,
            tau,
            mass,
            unit_stiffness,
            a_eps,
            solver: DirectSolver::new(),
        })
    }

    pub fn space(&self) -> &DgSpace {
        &self.space
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn settings(&self) -> &NewtonSettings {
        &self.settings
    }

    pub fn tau(&self) -> &LineRule {
        &self.tau
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn a_eps(&self) -> &SparseMatrix {
        &self.a_eps
    }

    /// `A_μ` with the mobility evaluated at `xi`.
    pub fn mobility_matrix(&self, xi: &[f64]) -> Result<SparseMatrix> {
        let mob = self.model.mobility;
        if mob.is_constant() {
            return Ok(self.unit_stiffness.add(mob.beta, &self.unit_stiffness, 0.0));
        }
        assemble_stiffness(&self.space, &CoefficientField::Lagged { state: xi, mobility: &mob })
    }

    /// State at `t0` from the coefficients of `u_h`, with `ζ` chosen so that
    /// `M ζ = A_ε ξ + b(ξ)`.
    pub fn initialize(&self, xi: Vec<f64>, t0: f64) -> Result<StateVector> {
        self.space.check_len(&xi)?;
        let (mut rhs, _) = assemble_nonlinear(&self.space, &self.model.potential, &xi)?;
        self.a_eps.matvec_add(1.0, &xi, &mut rhs);
        let zeta = rhs
            .iter()
            .enumerate()
            .map(|(i, r)| r / self.mass.get(i, i))
            .collect();
        Ok(StateVector { xi, zeta, t: t0 })
    }

    fn load(&self, t0: f64, dt: f64) -> Option<Vec<f64>> {
        let src = self.model.source_fn()?;
        Some(assemble_load_avg(&self.space, src, t0, dt, &self.tau))
    }

    /// Residual of a candidate for the step `previous → previous.t + dt`.
    pub fn residual(&self, previous: &StateVector, xi: &[f64], zeta: &[f64], dt: f64) -> Result<Residual> {
        let a_mu = self.mobility_matrix(&previous.xi)?;
        let load = self.load(previous.t, dt);
        let ops = StepOperators {
            mass: &self.mass,
            a_mu: &a_mu,
            a_eps: &self.a_eps,
            load: load.as_deref(),
        };
        avf_residual(&self.space, &self.model, &self.tau, &ops, previous, xi, zeta, dt)
    }

    /// Jacobian of [`Stepper::residual`] with respect to `(ξ, ζ)`.
    pub fn jacobian(&self, previous: &StateVector, xi: &[f64], dt: f64) -> Result<SparseMatrix> {
        let a_mu = self.mobility_matrix(&previous.xi)?;
        let ops = StepOperators {
            mass: &self.mass,
            a_mu: &a_mu,
            a_eps: &self.a_eps,
            load: None,
        };
        let nl = assemble_avf_nonlinear(&self.space, &self.model.potential, &previous.xi, xi, &self.tau)?;
        Ok(avf_jacobian(&ops, &nl.jacobian, dt))
    }

    /// Advances one step of length `dt`, starting Newton from `previous`.
    pub fn step(&mut self, previous: &StateVector, dt: f64) -> Result<(StateVector, StepReport)> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
        }
        let a_mu = self.mobility_matrix(&previous.xi)?;
        let load = self.load(previous.t, dt);
        let ops = StepOperators {
            mass: &self.mass,
            a_mu: &a_mu,
            a_eps: &self.a_eps,
            load: load.as_deref(),
        };
        let nd = self.space.n_dofs();
        let mut xi = previous.xi.clone();
        let mut zeta = previous.zeta.clone();
        let mut report = StepReport::default();
        let t_new = previous.t + dt;
        let fail = |iteration: usize, residual: f64, reason: String| Error::StepFailure {
            time: t_new,
            iteration,
            residual,
            reason,
        };
        for k in 0..=self.settings.max_iter {
            let res = avf_residual(&self.space, &self.model, &self.tau, &ops, previous, &xi, &zeta, dt)
                .map_err(|e| fail(k, f64::NAN, e.to_string()))?;
            report.clamp_events += res.nonlinear.clamp_events;
            let norm = res.norm_inf();
            report.residual_norms.push(norm);
            if !norm.is_finite() {
                return Err(fail(k, norm, "non-finite residual".into()));
            }
            if norm < self.settings.tol {
                report.iterations = k;
                return Ok((StateVector { xi, zeta, t: t_new }, report));
            }
            if k == self.settings.max_iter {
                return Err(fail(k, norm, format!("no convergence in {} iterations", self.settings.max_iter)));
            }
            let jac = avf_jacobian(&ops, &res.nonlinear.jacobian, dt);
            let rhs: Vec<f64> = res.r1.iter().chain(&res.r2).map(|v| -v).collect();
            let s = self.solver.solve(&jac, &rhs).map_err(|e| fail(k, norm, e.to_string()))?;
            for i in 0..nd {
                xi[i] += s[i];
                zeta[i] += s[nd + i];
            }
        }
        unreachable!("loop returns on convergence or at the iteration cap")
    }

    /// Energy and mass of a state.
    pub fn observe(&self, state: &StateVector) -> Result<(f64, f64)> {
        Ok((
            discrete_energy(&self.space, self.model.epsilon, &self.model.potential, &state.xi)?,
            total_mass(&self.space, &state.xi)?,
        ))
    }
}

/// Step lengths covering `[0, t_final]` with uniform `dt`, the last one
/// shortened when `t_final / dt` is not an integer.
pub fn time_grid(t_final: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!("final time must be non-negative, got {t_final}")));
    }
    let ratio = t_final / dt;
    let mut n = ratio.round();
    if (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        n = ratio.floor();
    }
    let n = n as usize;
    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
    let last = *times.last().unwrap();
    if t_final - last > 1e-9 * dt {
        times.push(t_final);
    } else {
        *times.last_mut().unwrap() = t_final;
    }
    Ok(times)
}

/// Result of [`run`]. A failed step leaves the series up to the last
/// accepted state and the error in `failure`.
#[derive(Debug)]
pub struct RunOutcome {
    pub state: StateVector,
    pub series: DiagnosticsSeries,
    pub steps: usize,
    pub failure: Option<Error>,
}

impl RunOutcome {
    pub fn into_result(self) -> Result<(StateVector, DiagnosticsSeries)> {
        match self.failure {
            Some(e) => Err(e),
            None => Ok((self.state, self.series)),
        }
    }
}

/// Integrates from `initial` to `t_final`, recording diagnostics every
/// `stride` steps and at the end. `observer` sees every accepted state,
/// including the initial one.
pub fn run<O>(stepper: &mut Stepper, initial: StateVector, t_final: f64, dt: f64, stride: usize, mut observer: O) -> Result<RunOutcome>
where
    O: FnMut(&StateVector, usize) -> Result<()>,
{
    let times = time_grid(t_final - initial.t, dt)?;
    let stride = stride.max(1);
    let t0 = initial.t;
    let mut series = DiagnosticsSeries::default();
    let (e, m) = stepper.observe(&initial)?;
    let (_, clamps) = assemble_nonlinear(stepper.space(), &stepper.model().potential, &initial.xi)?;
    series.push(t0, e, m, 0, clamps);
    observer(&initial, 0)?;
    let mut state = initial;
    let n_steps = times.len() - 1;
    for n in 1..=n_steps {
        let h = times[n] - times[n - 1];
        match stepper.step(&state, h) {
            Ok((mut next, report)) => {
                next.t = t0 + times[n];
                state = next;
                if n % stride == 0 || n == n_steps {
                    let (e, m) = stepper.observe(&state)?;
                    series.push(state.t, e, m, report.iterations, report.clamp_events);
                }
                if let Err(err) = observer(&state, n) {
                    return Ok(RunOutcome {
                        state,
                        series,
                        steps: n,
                        failure: Some(err),
                    });
                }
            }
            Err(err) => {
                return Ok(RunOutcome {
                    state,
                    series,
                    steps: n - 1,
                    failure: Some(err),
                })
            }
        }
    }
    Ok(RunOutcome {
        state,
        series,
        steps: n_steps,
        failure: None,
    })
}

/// One AVF step of the scalar gradient flow `y' = −U'(y)`.
pub fn avf_scalar_step<F, DF>(grad: F, hess: DF, y0: f64, dt: f64, tau_points: usize) -> Result<f64>
where
    F: Fn(f64) -> f64,
    DF: Fn(f64) -> f64,
{
    let tau = tau_rule(tau_points)?;
    let mut y = y0;
    for _ in 0..100 {
        let mut g = 0.0;
        let mut dg = 0.0;
        for (p, w) in tau.iter() {
            let z = p[0] * y + (1.0 - p[0]) * y0;
            g += w * grad(z);
            dg += w * p[0] * hess(z);
        }
        let r = y - y0 + dt * g;
        if r.abs() < 1e-14 * (1.0 + y.abs()) {
            return Ok(y);
        }
        y -= r / (1.0 + dt * dg);
    }
    Err(Error::StepFailure {
        time: dt,
        iteration: 100,
        residual: f64::NAN,
        reason: "scalar step did not converge".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::SpaceOptions;
    use crate::mesh::{BoundaryKind, Mesh, Rect};
    use crate::model::{random_field, Mobility, MobilityKind, Potential};

    fn stepper(model: Model, nx: usize, q: usize) -> Stepper {
        let mesh = Mesh::rect(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), nx, nx, BoundaryKind::Neumann).unwrap();
        let space = DgSpace::new(mesh, q, SpaceOptions::default()).unwrap();
        Stepper::new(space, model, NewtonSettings::default()).unwrap()
    }

    fn model(potential: Potential, mobility: Mobility) -> Model {
        Model {
            epsilon: 0.1,
            potential,
            mobility,
            exact: None,
        }
    }

    #[test]
    fn scalar_quadratic_is_midpoint() {
        let y1 = avf_scalar_step(|y| y, |_| 1.0, 1.0, 1.0, 2).unwrap();
        assert!((y1 - 1.0 / 3.0).abs() < 1e-14);
        // quartic U: AVF preserves the exact energy difference identity
        let y0 = 0.7;
        let y1 = avf_scalar_step(|y| y * y * y - y, |y| 3.0 * y * y - 1.0, y0, 0.3, 2).unwrap();
        let u = |y: f64| 0.25 * (1.0 - y * y).powi(2);
        assert!(u(y1) - u(y0) <= -(y1 - y0).powi(2) / 0.3 + 1e-14);
    }

    #[test]
    fn initial_second_equation_vanishes() {
        let mut st = stepper(model(Potential::DoubleWell, Mobility::constant(1.0)), 3, 2);
        let xi = random_field(st.space(), 0.1, 0.3, 4);
        let s0 = st.initialize(xi.clone(), 0.0).unwrap();
        let r = st.residual(&s0, &s0.xi, &s0.zeta, 0.0).unwrap();
        assert!(r.norm_inf() < 1e-13);
        for c in [0.0, 1.0] {
            let s = st.initialize(st.space().constant_coeffs(c), 0.0).unwrap();
            assert!(s.zeta.iter().all(|z| z.abs() < 1e-13));
        }
        // zero state is a fixed point
        let z = st.initialize(vec![0.0; st.space().n_dofs()], 0.0).unwrap();
        let (next, rep) = st.step(&z, 0.01).unwrap();
        assert_eq!(rep.iterations, 0);
        assert!(next.xi.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn linear_problem_converges_in_one_iteration() {
        let mut st = stepper(model(Potential::Quadratic { stiffness: 0.0 }, Mobility::constant(1.0)), 3, 1);
        let s0 = st.initialize(random_field(st.space(), 0.0, 0.5, 9), 0.0).unwrap();
        let (_, rep) = st.step(&s0, 1e-3).unwrap();
        assert_eq!(rep.iterations, 1);
    }

    #[test]
    fn newton_converges_quadratically() {
        let mob = Mobility::new(MobilityKind::OneMinusUSq, 1.0).unwrap();
        let mut st = stepper(model(Potential::DoubleWell, mob), 3, 2);
        let s0 = st.initialize(random_field(st.space(), 0.0, 0.6, 2), 0.0).unwrap();
        let (_, rep) = st.step(&s0, 2e-2).unwrap();
        let r = &rep.residual_norms;
        assert!(rep.iterations >= 2, "{r:?}");
        for k in 1..r.len() - 1 {
            // quadratic until roundoff
            if r[k] > 1e-9 {
                assert!(r[k + 1] <= 10.0 * r[k] * r[k] / r[k - 1].min(1.0).max(r[k]), "{r:?}");
            }
        }
    }

    #[test]
    fn taylor_consistency() {
        let mob = Mobility::new(MobilityKind::UOneMinusU, 1.0).unwrap();
        let st = stepper(model(Potential::DoubleWell, mob), 2, 2);
        let s0 = st.initialize(random_field(st.space(), 0.4, 0.2, 8), 0.0).unwrap();
        let nd = st.space().n_dofs();
        let xi = random_field(st.space(), 0.3, 0.3, 9);
        let zeta = random_field(st.space(), 0.0, 1.0, 10);
        let dt = 0.05;
        let jac = st.jacobian(&s0, &xi, dt).unwrap();
        let r0 = st.residual(&s0, &xi, &zeta, dt).unwrap().stacked();
        let dir: Vec<f64> = random_field(st.space(), 0.0, 1.0, 11)
            .into_iter()
            .chain(random_field(st.space(), 0.0, 1.0, 12))
            .collect();
        let mut prev = f64::INFINITY;
        for h in [1e-2, 5e-3, 2.5e-3] {
            let xp: Vec<f64> = (0..nd).map(|i| xi[i] + h * dir[i]).collect();
            let zp: Vec<f64> = (0..nd).map(|i| zeta[i] + h * dir[nd + i]).collect();
            let r1 = st.residual(&s0, &xp, &zp, dt).unwrap().stacked();
            let jd = jac.matvec(&dir);
            let err = (0..2 * nd).map(|i| (r1[i] - r0[i] - h * jd[i]).abs()).fold(0.0, f64::max);
            if prev.is_finite() {
                let ratio = prev / err;
                assert!(ratio > 3.5 && ratio < 4.5, "remainder ratio {ratio}");
            }
            prev = err;
        }
    }

    #[test]
    fn time_grid_shortens_last_step() {
        let g = time_grid(1.0, 0.25).unwrap();
        assert_eq!(g, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = time_grid(0.1, 0.0032 * std::f64::consts::PI).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(*g.last().unwrap(), 0.1);
        assert!(g[10] - g[9] < g[1]);
        assert_eq!(time_grid(0.0, 0.1).unwrap(), vec![0.0]);
        assert!(time_grid(1.0, 0.0).is_err());
    }

    #[test]
    fn run_records_energy_and_mass() {
        let mut st = stepper(model(Potential::DoubleWell, Mobility::constant(1.0)), 4, 1);
        let s0 = st.initialize(random_field(st.space(), 0.1, 0.5, 1), 0.0).unwrap();
        let out = run(&mut st, s0.clone(), 0.0, 0.01, 1, |_, _| Ok(())).unwrap();
        assert_eq!(out.series.len(), 1);
        let (_, series) = run(&mut st, s0, 0.05, 0.01, 1, |_, _| Ok(())).unwrap().into_result().unwrap();
        assert_eq!(series.len(), 6);
        assert!(series.max_energy_increase() <= 1e-12);
        assert!(series.max_mass_drift() <= 1e-12);
    }

    #[test]
    fn settings_validation() {
        assert!(NewtonSettings::default().validate().is_ok());
        let bad = NewtonSettings {
            tau_points: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = NewtonSettings {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
