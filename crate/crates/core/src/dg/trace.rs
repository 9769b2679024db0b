//! Edge traces, jumps and averages.
//!
//! Side 0 is the edge's first triangle (`K`) and side 1 the neighbour
//! (`K^e`). With `n` the outward normal of `K`, the scalar jump is
//! `[v]·n = v_K - v_{K^e}` and the normal average is
//! `{∇v}·n = (∂_n v_K + ∂_n v_{K^e}) / 2`. Assembly and the energy functional
//! both go through these helpers so their signs agree.

use crate::dg::quadrature::LineRule;
use crate::dg::space::DgSpace;
use crate::mesh::Edge;

#[inline]
pub fn jump(plus: f64, minus: f64) -> f64 {
    plus - minus
}

#[inline]
pub fn average(plus: f64, minus: f64) -> f64 {
    0.5 * (plus + minus)
}

/// Sign of a side's contribution to the jump.
#[inline]
pub fn jump_sign(side: usize) -> f64 {
    if side == 0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Clone, Debug)]
pub struct SideTrace {
    pub triangle: usize,
    /// `values[g * n_local + i] = φ_i` at edge point `g`.
    pub values: Vec<f64>,
    /// `∇φ_i · n` with `n` the first side's outward normal.
    pub normal_derivs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EdgeTrace {
    pub n_local: usize,
    pub length: f64,
    pub normal: [f64; 2],
    /// Physical quadrature weights (reference weights times edge length).
    pub weights: Vec<f64>,
    pub sides: [SideTrace; 2],
}

impl EdgeTrace {
    pub(crate) fn new(space: &DgSpace, edge: &Edge, rule: &LineRule) -> Self {
        let n = space.n_local();
        let second = edge.second.expect("traces are only built on coupling edges");
        let side = |es: crate::mesh::EdgeSide| {
            let map = space.mesh().map(es.triangle);
            let mut values = vec![0.0; rule.len() * n];
            let mut normal_derivs = vec![0.0; rule.len() * n];
            let mut grads = vec![[0.0; 2]; n];
            for (g, p) in rule.points.iter().enumerate() {
                let r = map.to_reference(es.point(p[0]));
                space
                    .basis()
                    .eval_with_grad(r[0], r[1], &mut values[g * n..(g + 1) * n], &mut grads);
                for i in 0..n {
                    let gp = map.push_gradient(grads[i]);
                    normal_derivs[g * n + i] = gp[0] * edge.normal[0] + gp[1] * edge.normal[1];
                }
            }
            SideTrace {
                triangle: es.triangle,
                values,
                normal_derivs,
            }
        };
        EdgeTrace {
            n_local: n,
            length: edge.length,
            normal: edge.normal,
            weights: rule.weights.iter().map(|w| w * edge.length).collect(),
            sides: [side(edge.first), side(second)],
        }
    }

    pub fn n_points(&self) -> usize {
        self.weights.len()
    }

    /// Trace value and normal derivative of a field on `side` at point `g`.
    pub fn field(&self, side: usize, coeffs_k: &[f64], g: usize) -> (f64, f64) {
        let n = self.n_local;
        let s = &self.sides[side];
        let v = &s.values[g * n..(g + 1) * n];
        let d = &s.normal_derivs[g * n..(g + 1) * n];
        let mut value = 0.0;
        let mut dn = 0.0;
        for i in 0..n {
            value += coeffs_k[i] * v[i];
            dn += coeffs_k[i] * d[i];
        }
        (value, dn)
    }

    /// `(value jump, normal-derivative average)` of a field at point `g`.
    pub fn jump_and_average(&self, space: &DgSpace, coeffs: &[f64], g: usize) -> (f64, f64) {
        let (up, dp) = self.field(0, space.element_coeffs(coeffs, self.sides[0].triangle), g);
        let (um, dm) = self.field(1, space.element_coeffs(coeffs, self.sides[1].triangle), g);
        (jump(up, um), average(dp, dm))
    }
}
