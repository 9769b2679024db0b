//! Discrete energy, mass, error norms and observed convergence orders.

use crate::assembly::penalty_form_parts;
use crate::dg::DgSpace;
use crate::error::{Error, Result};
use crate::model::Potential;

/// The four contributions to the discrete energy.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EnergyParts {
    /// `ε²/2 Σ_K ‖∇u‖²_K`
    pub gradient: f64,
    /// `∫ F(u)` under the nonlinear volume rule
    pub potential: f64,
    /// `-Σ_E ∫_E {ε² ∂_n u}[u]`
    pub consistency: f64,
    /// `Σ_E σε²/(2 h_E) ∫_E [u]²`
    pub penalty: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.gradient + self.potential + self.consistency + self.penalty
    }
}

pub fn energy_parts(space: &DgSpace, epsilon: f64, potential: &Potential, xi: &[f64]) -> Result<EnergyParts> {
    space.check_len(xi)?;
    let e2 = epsilon * epsilon;
    let (vol, cons, pen) = penalty_form_parts(space, xi);
    let tab = space.nonlinear_tabulation();
    let mut u = vec![0.0; tab.n_points()];
    let mut f_int = 0.0;
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        space.values_at(tab, space.element_coeffs(xi, k), &mut u);
        for (g, &ug) in u.iter().enumerate() {
            f_int += tab.rule.weights[g] * det * potential.eval(ug).0.value;
        }
    }
    if !f_int.is_finite() {
        return Err(Error::NonFiniteCoefficient {
            location: "potential energy".into(),
        });
    }
    Ok(EnergyParts {
        gradient: 0.5 * e2 * vol,
        potential: f_int,
        consistency: -e2 * cons,
        penalty: 0.5 * space.sigma() * e2 * pen,
    })
}

pub fn discrete_energy(space: &DgSpace, epsilon: f64, potential: &Potential, xi: &[f64]) -> Result<f64> {
    energy_parts(space, epsilon, potential, xi).map(|p| p.total())
}

/// `∫_Ω u_h` by quadrature.
pub fn total_mass(space: &DgSpace, xi: &[f64]) -> Result<f64> {
    space.check_len(xi)?;
    let tab = space.linear_tabulation();
    let mut u = vec![0.0; tab.n_points()];
    let mut m = 0.0;
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        space.values_at(tab, space.element_coeffs(xi, k), &mut u);
        m += det * tab.rule.weights.iter().zip(&u).map(|(w, v)| w * v).sum::<f64>();
    }
    Ok(m)
}

/// `‖u_h − u‖_{L²(Ω)}` under the high-order volume rule.
pub fn l2_error<F: Fn(f64, f64) -> f64>(space: &DgSpace, xi: &[f64], exact: F) -> Result<f64> {
    space.check_len(xi)?;
    let tab = space.accurate_tabulation();
    let mut u = vec![0.0; tab.n_points()];
    let mut s = 0.0;
    for k in 0..space.n_elements() {
        let map = space.mesh().map(k);
        space.values_at(tab, space.element_coeffs(xi, k), &mut u);
        for (g, (p, w)) in tab.rule.iter().enumerate() {
            let x = map.to_physical(p[0], p[1]);
            let d = u[g] - exact(x[0], x[1]);
            s += w * map.det.abs() * d * d;
        }
    }
    Ok(s.sqrt())
}

/// `log₂(e_{k-1} / e_k)` for successive errors under halving.
pub fn convergence_orders(errors: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::InvalidArgument(format!("errors must be positive and finite, got {bad}")));
    }
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// Time series recorded during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass: Vec<f64>,
    pub newton_iters: Vec<usize>,
    pub clamp_events: Vec<usize>,
}

impl DiagnosticsSeries {
    pub fn push(&mut self, t: f64, energy: f64, mass: f64, newton_iters: usize, clamp_events: usize) {
        self.times.push(t);
        self.energy.push(energy);
        self.mass.push(mass);
        self.newton_iters.push(newton_iters);
        self.clamp_events.push(clamp_events);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest energy increase between consecutive records, relative to
    /// `max(1, |E_0|)`. Zero or negative means non-increasing.
    pub fn max_energy_increase(&self) -> f64 {
        let Some(e0) = self.energy.first() else { return 0.0 };
        let scale = e0.abs().max(1.0);
        self.energy
            .windows(2)
            .map(|w| (w[1] - w[0]) / scale)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `max_n |m_n − m_0|`.
    pub fn max_mass_drift(&self) -> f64 {
        let Some(m0) = self.mass.first() else { return 0.0 };
        self.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_mass;
    use crate::dg::SpaceOptions;
    use crate::mesh::{BoundaryKind, Mesh, Rect};

    fn space(bc: BoundaryKind, q: usize) -> DgSpace {
        let r = match bc {
            BoundaryKind::Neumann => Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(),
            BoundaryKind::Periodic => Rect::new(0.0, 2.0 * std::f64::consts::PI, 0.0, 2.0 * std::f64::consts::PI).unwrap(),
        };
        DgSpace::new(Mesh::rect(r, 4, 4, bc).unwrap(), q, SpaceOptions::default()).unwrap()
    }

    #[test]
    fn energy_of_constants() {
        let s = space(BoundaryKind::Neumann, 2);
        let e0 = discrete_energy(&s, 0.1, &Potential::DoubleWell, &s.constant_coeffs(0.0)).unwrap();
        assert!((e0 - 1.0).abs() < 1e-13);
        let e1 = discrete_energy(&s, 0.1, &Potential::DoubleWell, &s.constant_coeffs(1.0)).unwrap();
        assert!(e1.abs() < 1e-13);
    }

    #[test]
    fn continuous_field_energy() {
        let s = space(BoundaryKind::Neumann, 2);
        let eps = 0.3;
        // u = x² - y/2: ∇u = (2x, -1/2), F polynomial of degree 8
        let xi = s.project_l2(|x, y| x * x - 0.5 * y);
        let p = energy_parts(&s, eps, &Potential::DoubleWell, &xi).unwrap();
        assert!(p.consistency.abs() < 1e-10 && p.penalty.abs() < 1e-10);
        // ∫(4x² + 1/4) over [-1,1]² = 16/3 + 1
        let grad = 0.5 * eps * eps * (16.0 / 3.0 + 1.0);
        assert!((p.gradient - grad).abs() < 1e-10);
        // independent tensor Gauss rule for ∫F
        let (gx, gw) = crate::dg::quadrature::gauss_legendre(8);
        let mut f = 0.0;
        for (x, wx) in gx.iter().zip(&gw) {
            for (y, wy) in gx.iter().zip(&gw) {
                let u = x * x - 0.5 * y;
                f += wx * wy * 0.25 * (1.0 - u * u).powi(2);
            }
        }
        assert!((p.potential - f).abs() < 1e-10);
    }

    #[test]
    fn penalty_non_negative_and_consistency_flips() {
        let s = space(BoundaryKind::Periodic, 1);
        let xi = crate::model::random_field(&s, 0.0, 0.5, 3);
        let neg: Vec<f64> = xi.iter().map(|v| -v).collect();
        let p = energy_parts(&s, 1.0, &Potential::DoubleWell, &xi).unwrap();
        let q = energy_parts(&s, 1.0, &Potential::DoubleWell, &neg).unwrap();
        assert!(p.penalty > 0.0);
        assert_eq!(p.penalty, q.penalty);
        assert!((p.consistency - q.consistency).abs() < 1e-14 * (1.0 + p.consistency.abs()));
    }

    #[test]
    fn mass_two_ways() {
        let s = space(BoundaryKind::Periodic, 2);
        let xi = s.project_l2(|x, y| x.sin() * y.sin());
        assert!(total_mass(&s, &xi).unwrap().abs() < 1e-10);
        let c = s.constant_coeffs(0.7);
        assert!((total_mass(&s, &c).unwrap() - 0.7 * 4.0 * std::f64::consts::PI.powi(2)).abs() < 1e-12);
        let r = crate::model::random_field(&s, 0.2, 0.3, 5);
        let m = assemble_mass(&s);
        let alg: f64 = m.matvec(&r).iter().zip(s.constant_coeffs(1.0)).map(|(a, b)| a * b).sum();
        let quad = total_mass(&s, &r).unwrap();
        assert!((alg - quad).abs() < 1e-12 * alg.abs().max(1.0));
    }

    #[test]
    fn l2_error_basics() {
        let s = space(BoundaryKind::Neumann, 1);
        let zero = vec![0.0; s.n_dofs()];
        assert_eq!(l2_error(&s, &zero, |_, _| 0.0).unwrap(), 0.0);
        assert!((l2_error(&s, &zero, |_, _| 1.0).unwrap() - 2.0).abs() < 1e-13);
    }

    #[test]
    fn orders() {
        let o = convergence_orders(&[4.810e-1, 1.079e-1]).unwrap();
        assert!((o[0] - 2.16).abs() < 0.005);
        let o = convergence_orders(&[1.566e-1, 5.478e-2]).unwrap();
        assert!((o[0] - 1.52).abs() < 0.005);
        assert_eq!(convergence_orders(&[0.8, 0.1]).unwrap(), vec![3.0]);
        assert!(convergence_orders(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn series_monitors() {
        let mut s = DiagnosticsSeries::default();
        s.push(0.0, 2.0, 1.0, 0, 0);
        s.push(0.1, 1.5, 1.0 + 1e-14, 3, 0);
        s.push(0.2, 1.5, 1.0, 2, 0);
        assert!(s.max_energy_increase() <= 0.0);
        assert!(s.max_mass_drift() <= 2e-14);
        assert_eq!(s.len(), 3);
    }
}
