//! Mass, interior-penalty stiffness, nonlinear and load terms.
//!
//! All element blocks are dense `n_local × n_local`; they are pushed as
//! triplets element by element, then edge by edge.

use crate::dg::trace::jump_sign;
use crate::dg::{line_rule, DgSpace, EdgeTrace, LineRule, Tabulation};
use crate::error::{Error, Result};
use crate::model::{Mobility, Potential};
use crate::sparse::{SparseMatrix, TripletBuilder};

/// Block-diagonal mass matrix; each block is `|det J_K| · I`.
pub fn assemble_mass(space: &DgSpace) -> SparseMatrix {
    let n = space.n_local();
    let mut t = TripletBuilder::with_capacity(space.n_dofs(), space.n_dofs(), space.n_dofs());
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        for i in 0..n {
            t.push(k * n + i, k * n + i, det);
        }
    }
    t.build()
}

/// Diffusion coefficient of the interior-penalty form.
#[derive(Clone, Copy, Debug)]
pub enum CoefficientField<'a> {
    Constant(f64),
    /// Mobility evaluated pointwise at a frozen state.
    Lagged { state: &'a [f64], mobility: &'a Mobility },
}

impl CoefficientField<'_> {
    fn is_constant(&self) -> bool {
        matches!(self, CoefficientField::Constant(_))
    }
}

/// Interior-penalty matrix `A_κ`:
///
/// `∫ κ ∇w·∇v − Σ_E ∫_E κ_E ({∇w}·n [v] + {∇v}·n [w]) + Σ_E σ/h_E ∫_E κ_E [w][v]`
///
/// over interior and periodic edges only. For a lagged coefficient, `κ_E` is
/// the average of the two trace values of the mobility.
pub fn assemble_stiffness(space: &DgSpace, coefficient: &CoefficientField) -> Result<SparseMatrix> {
    if let CoefficientField::Lagged { state, .. } = coefficient {
        space.check_len(state)?;
    }
    let n = space.n_local();
    let nd = space.n_dofs();
    let coupling = space.edge_traces_linear().iter().flatten().count();
    let mut t = TripletBuilder::with_capacity(nd, nd, (space.n_elements() + 4 * coupling) * n * n);

    let tab: &Tabulation = if coefficient.is_constant() {
        space.linear_tabulation()
    } else {
        space.nonlinear_tabulation()
    };
    let np = tab.n_points();
    let mut kappa = vec![0.0; np];
    let mut grads = vec![[0.0; 2]; n];
    let mut block = vec![0.0; n * n];
    for k in 0..space.n_elements() {
        let map = space.mesh().map(k);
        match coefficient {
            CoefficientField::Constant(c) => kappa.fill(*c),
            CoefficientField::Lagged { state, mobility } => {
                space.values_at(tab, space.element_coeffs(state, k), &mut kappa);
                for v in kappa.iter_mut() {
                    *v = mobility.eval(*v);
                }
            }
        }
        if kappa.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient {
                location: format!("triangle {k}"),
            });
        }
        block.fill(0.0);
        let det = map.det.abs();
        for g in 0..np {
            for i in 0..n {
                grads[i] = map.push_gradient(tab.grads[g * n + i]);
            }
            let wk = tab.rule.weights[g] * det * kappa[g];
            for i in 0..n {
                for j in 0..n {
                    block[i * n + j] += wk * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
                }
            }
        }
        push_block(&mut t, k * n, k * n, n, &block);
    }

    let traces = if coefficient.is_constant() {
        space.edge_traces_linear()
    } else {
        space.edge_traces_nonlinear()
    };
    let sigma = space.sigma();
    for (e, tr) in traces.iter().enumerate() {
        let Some(tr) = tr else { continue };
        let mut blocks = [[vec![0.0; n * n], vec![0.0; n * n]], [vec![0.0; n * n], vec![0.0; n * n]]];
        for g in 0..tr.n_points() {
            let ke = match coefficient {
                CoefficientField::Constant(c) => *c,
                CoefficientField::Lagged { state, mobility } => {
                    let (a, _) = tr.field(0, space.element_coeffs(state, tr.sides[0].triangle), g);
                    let (b, _) = tr.field(1, space.element_coeffs(state, tr.sides[1].triangle), g);
                    0.5 * (mobility.eval(a) + mobility.eval(b))
                }
            };
            if !ke.is_finite() {
                return Err(Error::NonFiniteCoefficient {
                    location: format!("edge {e}"),
                });
            }
            let w = tr.weights[g] * ke;
            let pen = sigma / tr.length;
            for a in 0..2 {
                let va = &tr.sides[a].values[g * n..(g + 1) * n];
                let da = &tr.sides[a].normal_derivs[g * n..(g + 1) * n];
                let sa = jump_sign(a);
                for b in 0..2 {
                    let vb = &tr.sides[b].values[g * n..(g + 1) * n];
                    let db = &tr.sides[b].normal_derivs[g * n..(g + 1) * n];
                    let sb = jump_sign(b);
                    let blk = &mut blocks[a][b];
                    for i in 0..n {
                        for j in 0..n {
                            let jv = sa * va[i];
                            let jw = sb * vb[j];
                            blk[i * n + j] += w * (-0.5 * db[j] * jv - 0.5 * da[i] * jw + pen * jv * jw);
                        }
                    }
                }
            }
        }
        for a in 0..2 {
            for b in 0..2 {
                push_block(&mut t, tr.sides[a].triangle * n, tr.sides[b].triangle * n, n, &blocks[a][b]);
            }
        }
    }
    Ok(t.build())
}

fn push_block(t: &mut TripletBuilder, row0: usize, col0: usize, n: usize, block: &[f64]) {
    for i in 0..n {
        for j in 0..n {
            t.push(row0 + i, col0 + j, block[i * n + j]);
        }
    }
}

/// `b_i = ∫ f(u_h) φ_i` together with the number of clamped evaluations.
pub fn assemble_nonlinear(space: &DgSpace, potential: &Potential, xi: &[f64]) -> Result<(Vec<f64>, usize)> {
    space.check_len(xi)?;
    let n = space.n_local();
    let tab = space.nonlinear_tabulation();
    let mut u = vec![0.0; tab.n_points()];
    let mut b = vec![0.0; space.n_dofs()];
    let mut clamps = 0;
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        space.values_at(tab, space.element_coeffs(xi, k), &mut u);
        let bk = &mut b[k * n..(k + 1) * n];
        for (g, &ug) in u.iter().enumerate() {
            let (pv, clamped) = potential.eval(ug);
            clamps += clamped as usize;
            let wf = tab.rule.weights[g] * det * pv.first;
            for i in 0..n {
                bk[i] += wf * tab.values[g * n + i];
            }
        }
        if bk.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient {
                location: format!("triangle {k}"),
            });
        }
    }
    Ok((b, clamps))
}

/// Gauss–Legendre rule with `points` nodes on `[0, 1]`.
pub fn tau_rule(points: usize) -> Result<LineRule> {
    if !(1..=20).contains(&points) {
        return Err(Error::InvalidArgument(format!("tau rule needs 1..=20 points, got {points}")));
    }
    line_rule(2 * points - 1)
}

/// Time-averaged nonlinear term of one step and its derivative.
#[derive(Clone, Debug)]
pub struct AvfNonlinear {
    /// `Σ_g w_g b(τ_g ξ_new + (1 - τ_g) ξ_old)`
    pub b_avg: Vec<f64>,
    /// `Σ_g w_g τ_g b'(τ_g ξ_new + (1 - τ_g) ξ_old)`, block diagonal.
    pub jacobian: SparseMatrix,
    pub clamp_events: usize,
}

pub fn assemble_avf_nonlinear(
    space: &DgSpace,
    potential: &Potential,
    xi_old: &[f64],
    xi_new: &[f64],
    tau: &LineRule,
) -> Result<AvfNonlinear> {
    space.check_len(xi_old)?;
    space.check_len(xi_new)?;
    let n = space.n_local();
    let nd = space.n_dofs();
    let tab = space.nonlinear_tabulation();
    let np = tab.n_points();
    let mut u0 = vec![0.0; np];
    let mut u1 = vec![0.0; np];
    let mut b_avg = vec![0.0; nd];
    let mut t = TripletBuilder::with_capacity(nd, nd, space.n_elements() * n * n);
    let mut block = vec![0.0; n * n];
    let mut clamps = 0;
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        space.values_at(tab, space.element_coeffs(xi_old, k), &mut u0);
        space.values_at(tab, space.element_coeffs(xi_new, k), &mut u1);
        block.fill(0.0);
        let bk = &mut b_avg[k * n..(k + 1) * n];
        for g in 0..np {
            let phi = &tab.values[g * n..(g + 1) * n];
            let wg = tab.rule.weights[g] * det;
            let mut f_avg = 0.0;
            let mut df_avg = 0.0;
            for (p, wt) in tau.iter() {
                let s = p[0];
                let (pv, clamped) = potential.eval(s * u1[g] + (1.0 - s) * u0[g]);
                clamps += clamped as usize;
                f_avg += wt * pv.first;
                df_avg += wt * s * pv.second;
            }
            for i in 0..n {
                bk[i] += wg * f_avg * phi[i];
                for j in 0..n {
                    block[i * n + j] += wg * df_avg * phi[i] * phi[j];
                }
            }
        }
        if bk.iter().chain(&block).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteCoefficient {
                location: format!("triangle {k}"),
            });
        }
        push_block(&mut t, k * n, k * n, n, &block);
    }
    Ok(AvfNonlinear {
        b_avg,
        jacobian: t.build(),
        clamp_events: clamps,
    })
}

/// `∫ g φ_i` for a pointwise source.
pub fn assemble_load<G: Fn(f64, f64) -> f64>(space: &DgSpace, source: G) -> Vec<f64> {
    // the L² projection already computes exactly these moments, scaled by 1/|det J|
    let mut out = space.project_l2(source);
    let n = space.n_local();
    for k in 0..space.n_elements() {
        let det = space.mesh().map(k).det.abs();
        for v in &mut out[k * n..(k + 1) * n] {
            *v *= det;
        }
    }
    out
}

/// Load averaged over `[t0, t0 + dt]` with the `tau` rule.
pub fn assemble_load_avg<G: Fn(f64, f64, f64) -> f64>(space: &DgSpace, source: G, t0: f64, dt: f64, tau: &LineRule) -> Vec<f64> {
    let mut out = vec![0.0; space.n_dofs()];
    for (p, w) in tau.iter() {
        let t = t0 + p[0] * dt;
        let l = assemble_load(space, |x, y| source(x, y, t));
        for (o, v) in out.iter_mut().zip(l) {
            *o += w * v;
        }
    }
    out
}

/// Quadratic form of `A_κ` for constant `κ`, evaluated term by term from
/// traces of the field. Used by the energy functional.
pub(crate) fn penalty_form_parts(space: &DgSpace, xi: &[f64]) -> (f64, f64, f64) {
    let mut volume = 0.0;
    let tab = space.linear_tabulation();
    let n = space.n_local();
    for k in 0..space.n_elements() {
        let map = space.mesh().map(k);
        let c = space.element_coeffs(xi, k);
        for g in 0..tab.n_points() {
            let mut gr = [0.0; 2];
            for i in 0..n {
                gr[0] += c[i] * tab.grads[g * n + i][0];
                gr[1] += c[i] * tab.grads[g * n + i][1];
            }
            let gp = map.push_gradient(gr);
            volume += tab.rule.weights[g] * map.det.abs() * (gp[0] * gp[0] + gp[1] * gp[1]);
        }
    }
    let mut consistency = 0.0;
    let mut penalty = 0.0;
    for tr in space.edge_traces_linear().iter().flatten() {
        let (c, p) = edge_parts(space, tr, xi);
        consistency += c;
        penalty += p;
    }
    (volume, consistency, penalty)
}

/// `(∫_E {∂_n u}[u], 1/h_E ∫_E [u]²)` on one edge.
fn edge_parts(space: &DgSpace, tr: &EdgeTrace, xi: &[f64]) -> (f64, f64) {
    let mut c = 0.0;
    let mut p = 0.0;
    for g in 0..tr.n_points() {
        let (j, a) = tr.jump_and_average(space, xi, g);
        c += tr.weights[g] * a * j;
        p += tr.weights[g] * j * j;
    }
    (c, p / tr.length)
}
