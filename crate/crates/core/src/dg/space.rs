use crate::dg::basis::{local_dimension, Basis};
use crate::dg::quadrature::{line_rule, triangle_rule, LineRule, TriangleRule};
use crate::dg::trace::EdgeTrace;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Basis values and reference gradients tabulated at the points of a rule.
#[derive(Clone, Debug)]
pub struct Tabulation {
    pub rule: TriangleRule,
    /// `values[g * n_local + i] = φ_i(p_g)`
    pub values: Vec<f64>,
    /// Reference-coordinate gradients, same layout as `values`.
    pub grads: Vec<[f64; 2]>,
}

impl Tabulation {
    fn new(basis: &Basis, rule: TriangleRule) -> Self {
        let n = basis.len();
        let mut values = vec![0.0; rule.len() * n];
        let mut grads = vec![[0.0; 2]; rule.len() * n];
        for (g, p) in rule.points.iter().enumerate() {
            basis.eval_with_grad(p[0], p[1], &mut values[g * n..(g + 1) * n], &mut grads[g * n..(g + 1) * n]);
        }
        Tabulation { rule, values, grads }
    }

    pub fn n_points(&self) -> usize {
        self.rule.len()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SpaceOptions {
    /// Penalty parameter; defaults to `3q(q+1)`.
    pub sigma: Option<f64>,
    /// Volume degree for nonlinear integrands; defaults to `4q`.
    pub nonlinear_degree: Option<usize>,
}

/// Broken polynomial space `V_h` of degree `q` over a mesh.
///
/// Degrees of freedom are numbered element by element:
/// `dof(k, i) = k · n_local + i`.
#[derive(Clone, Debug)]
pub struct DgSpace {
    mesh: Mesh,
    basis: Basis,
    sigma: f64,
    linear: Tabulation,
    nonlinear: Tabulation,
    accurate: Tabulation,
    edge_linear: Vec<Option<EdgeTrace>>,
    edge_nonlinear: Vec<Option<EdgeTrace>>,
    nonlinear_degree: usize,
}

impl DgSpace {
    pub fn new(mesh: Mesh, degree: usize, options: SpaceOptions) -> Result<Self> {
        let basis = Basis::new(degree)?;
        let q = degree;
        let sigma = options.sigma.unwrap_or((3 * q * (q + 1)) as f64);
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("penalty parameter must be positive, got {sigma}")));
        }
        let nonlinear_degree = options.nonlinear_degree.unwrap_or(4 * q).max(2 * q);
        let linear = Tabulation::new(&basis, triangle_rule(2 * q + 2)?);
        let nonlinear = Tabulation::new(&basis, triangle_rule(nonlinear_degree)?);
        let accurate = Tabulation::new(&basis, triangle_rule((2 * q + 6).max(nonlinear_degree))?);
        let edge_linear_rule = line_rule(2 * q + 1)?;
        let edge_nonlinear_rule = line_rule(nonlinear_degree)?;
        let mut space = DgSpace {
            mesh,
            basis,
            sigma,
            linear,
            nonlinear,
            accurate,
            edge_linear: Vec::new(),
            edge_nonlinear: Vec::new(),
            nonlinear_degree,
        };
        space.edge_linear = space.tabulate_edges(&edge_linear_rule);
        space.edge_nonlinear = space.tabulate_edges(&edge_nonlinear_rule);
        Ok(space)
    }

    fn tabulate_edges(&self, rule: &LineRule) -> Vec<Option<EdgeTrace>> {
        self.mesh
            .edges()
            .iter()
            .map(|e| e.is_coupling().then(|| EdgeTrace::new(self, e, rule)))
            .collect()
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn n_local(&self) -> usize {
        local_dimension(self.degree())
    }

    pub fn n_elements(&self) -> usize {
        self.mesh.n_triangles()
    }

    pub fn n_dofs(&self) -> usize {
        self.n_local() * self.n_elements()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn nonlinear_degree(&self) -> usize {
        self.nonlinear_degree
    }

    /// Rule exact for products of two basis functions and their gradients.
    pub fn linear_tabulation(&self) -> &Tabulation {
        &self.linear
    }

    /// Rule used for potentials, mobilities and the discrete energy.
    pub fn nonlinear_tabulation(&self) -> &Tabulation {
        &self.nonlinear
    }

    /// High-order rule for projections and error norms.
    pub fn accurate_tabulation(&self) -> &Tabulation {
        &self.accurate
    }

    /// Traces of coupling edges under the `2q + 1` edge rule (`None` on
    /// boundary edges).
    pub fn edge_traces_linear(&self) -> &[Option<EdgeTrace>] {
        &self.edge_linear
    }

    /// Traces of coupling edges under the nonlinear edge rule.
    pub fn edge_traces_nonlinear(&self) -> &[Option<EdgeTrace>] {
        &self.edge_nonlinear
    }

    pub fn element_coeffs<'a>(&self, coeffs: &'a [f64], k: usize) -> &'a [f64] {
        let n = self.n_local();
        &coeffs[k * n..(k + 1) * n]
    }

    pub fn check_len(&self, coeffs: &[f64]) -> Result<()> {
        if coeffs.len() != self.n_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_dofs(),
                got: coeffs.len(),
            });
        }
        Ok(())
    }

    /// Value and physical gradient of the field on triangle `k` at a
    /// reference point.
    pub fn eval_field(&self, coeffs: &[f64], k: usize, reference: Point) -> Result<(f64, [f64; 2])> {
        self.check_len(coeffs)?;
        if k >= self.n_elements() {
            return Err(Error::OutOfRange {
                what: "triangle",
                index: k,
                count: self.n_elements(),
            });
        }
        let n = self.n_local();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        self.basis.eval_with_grad(reference[0], reference[1], &mut v, &mut g);
        let c = self.element_coeffs(coeffs, k);
        let mut value = 0.0;
        let mut grad_ref = [0.0; 2];
        for i in 0..n {
            value += c[i] * v[i];
            grad_ref[0] += c[i] * g[i][0];
            grad_ref[1] += c[i] * g[i][1];
        }
        Ok((value, self.mesh.map(k).push_gradient(grad_ref)))
    }

    /// Orthogonal `L²` projection of a pointwise function.
    ///
    /// The element mass blocks are `|det J| · I`, so each coefficient is the
    /// reference-weighted moment `Σ_g w_g f(x_g) φ_i(p_g)`.
    pub fn project_l2<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        let n = self.n_local();
        let tab = &self.accurate;
        let mut out = vec![0.0; self.n_dofs()];
        for k in 0..self.n_elements() {
            let map = self.mesh.map(k);
            let c = &mut out[k * n..(k + 1) * n];
            for (g, (p, w)) in tab.rule.iter().enumerate() {
                let x = map.to_physical(p[0], p[1]);
                let fx = f(x[0], x[1]);
                let phi = &tab.values[g * n..(g + 1) * n];
                for i in 0..n {
                    c[i] += w * fx * phi[i];
                }
            }
        }
        out
    }

    /// Coefficients of the constant field `c`.
    pub fn constant_coeffs(&self, c: f64) -> Vec<f64> {
        let n = self.n_local();
        let mut out = vec![0.0; self.n_dofs()];
        for k in 0..self.n_elements() {
            out[k * n] = c / std::f64::consts::SQRT_2;
        }
        out
    }

    /// Field values at every point of `tab` on element `k`.
    pub fn values_at(&self, tab: &Tabulation, coeffs_k: &[f64], out: &mut [f64]) {
        let n = self.n_local();
        for (g, o) in out.iter_mut().enumerate().take(tab.n_points()) {
            let phi = &tab.values[g * n..(g + 1) * n];
            *o = phi.iter().zip(coeffs_k).map(|(a, b)| a * b).sum();
        }
    }
}
