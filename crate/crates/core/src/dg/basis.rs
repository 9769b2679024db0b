//! Orthonormal modal (Dubiner) basis on the reference triangle.
//!
//! `φ_ij(r, s) = c_ij · Q_i(r, s) · P_j^{(2i+1,0)}(2s - 1)` where
//! `Q_i = (1 - s)^i P_i((2r + s - 1) / (1 - s))` is evaluated through the
//! scaled Legendre recurrence, which stays polynomial at the collapsed
//! vertex `s = 1`. With `c_ij = sqrt(2 (2i + 1)(i + j + 1))` the functions
//! are orthonormal in `L²` of the reference triangle (area 1/2).

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    degree: usize,
    /// `(i, j)` index pair per basis function, ordered by total degree.
    modes: Vec<(usize, usize)>,
    scale: Vec<f64>,
}

pub fn local_dimension(degree: usize) -> usize {
    (degree + 1) * (degree + 2) / 2
}

impl Basis {
    pub fn new(degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::UnsupportedDegree(degree));
        }
        let mut modes = Vec::with_capacity(local_dimension(degree));
        for d in 0..=degree {
            for j in 0..=d {
                modes.push((d - j, j));
            }
        }
        let scale = modes
            .iter()
            .map(|&(i, j)| (2.0 * (2 * i + 1) as f64 * (i + j + 1) as f64).sqrt())
            .collect();
        Ok(Basis {
            degree,
            modes,
            scale,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Values at reference point `(r, s)` written into `values`.
    pub fn eval(&self, r: f64, s: f64, values: &mut [f64]) {
        self.eval_impl(r, s, values, None);
    }

    /// Values and reference gradients at `(r, s)`.
    pub fn eval_with_grad(&self, r: f64, s: f64, values: &mut [f64], grads: &mut [[f64; 2]]) {
        self.eval_impl(r, s, values, Some(grads));
    }

    fn eval_impl(&self, r: f64, s: f64, values: &mut [f64], grads: Option<&mut [[f64; 2]]>) {
        let q = self.degree;
        let x = 2.0 * r + s - 1.0;
        let t = 1.0 - s;
        // Q_i and its (r, s) gradient; d x = (2, 1), d t = (0, -1)
        let mut qv = [0.0; 4];
        let mut qg = [[0.0; 2]; 4];
        qv[0] = 1.0;
        if q >= 1 {
            qv[1] = x;
            qg[1] = [2.0, 1.0];
        }
        for i in 1..q {
            let fi = i as f64;
            let a = (2.0 * fi + 1.0) / (fi + 1.0);
            let b = fi / (fi + 1.0);
            qv[i + 1] = a * x * qv[i] - b * t * t * qv[i - 1];
            for c in 0..2 {
                let dx = if c == 0 { 2.0 } else { 1.0 };
                let dt = if c == 0 { 0.0 } else { -1.0 };
                qg[i + 1][c] = a * (dx * qv[i] + x * qg[i][c])
                    - b * (2.0 * t * dt * qv[i - 1] + t * t * qg[i - 1][c]);
            }
        }

        let y = 2.0 * s - 1.0;
        let want_grad = grads.is_some();
        let mut grads = grads;
        for (n, &(i, j)) in self.modes.iter().enumerate() {
            let alpha = (2 * i + 1) as f64;
            let (p, dp_dy) = jacobi_alpha0(j, alpha, y);
            values[n] = self.scale[n] * qv[i] * p;
            if want_grad {
                let g = grads.as_deref_mut().unwrap();
                g[n] = [
                    self.scale[n] * qg[i][0] * p,
                    self.scale[n] * (qg[i][1] * p + qv[i] * 2.0 * dp_dy),
                ];
            }
        }
    }
}

/// `P_n^{(α,0)}(y)` and its derivative via the three-term recurrence.
fn jacobi_alpha0(n: usize, alpha: f64, y: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut d0 = 0.0;
    let mut p1 = 0.5 * ((alpha + 2.0) * y + alpha);
    let mut d1 = 0.5 * (alpha + 2.0);
    for k in 1..n {
        let k = k as f64;
        let c0 = 2.0 * (k + 1.0) * (k + alpha + 1.0) * (2.0 * k + alpha);
        let c1 = (2.0 * k + alpha + 1.0) * (2.0 * k + alpha + 2.0) * (2.0 * k + alpha);
        let c2 = (2.0 * k + alpha + 1.0) * alpha * alpha;
        let c3 = 2.0 * k * (k + alpha) * (2.0 * k + alpha + 2.0);
        let p2 = ((c1 * y + c2) * p1 - c3 * p0) / c0;
        let d2 = (c1 * p1 + (c1 * y + c2) * d1 - c3 * d0) / c0;
        p0 = p1;
        d0 = d1;
        p1 = p2;
        d1 = d2;
    }
    (p1, d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::quadrature::triangle_rule;

    #[test]
    fn dimensions() {
        assert_eq!(Basis::new(1).unwrap().len(), 3);
        assert_eq!(Basis::new(2).unwrap().len(), 6);
        assert_eq!(Basis::new(3).unwrap().len(), 10);
        assert!(matches!(Basis::new(0), Err(Error::UnsupportedDegree(0))));
        assert!(Basis::new(4).is_err());
    }

    #[test]
    fn gram_is_identity() {
        let rule = triangle_rule(12).unwrap();
        for q in 1..=3 {
            let basis = Basis::new(q).unwrap();
            let n = basis.len();
            let mut gram = vec![0.0; n * n];
            let mut v = vec![0.0; n];
            for (p, w) in rule.iter() {
                basis.eval(p[0], p[1], &mut v);
                for i in 0..n {
                    for j in 0..n {
                        gram[i * n + j] += w * v[i] * v[j];
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((gram[i * n + j] - expect).abs() < 1e-12, "q={q} ({i},{j}) = {}", gram[i * n + j]);
                }
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let basis = Basis::new(3).unwrap();
        let n = basis.len();
        let h = 1e-6;
        for &(r, s) in &[(0.2, 0.3), (0.05, 0.9), (0.6, 0.1), (0.0, 1.0), (1.0, 0.0)] {
            let mut v = vec![0.0; n];
            let mut g = vec![[0.0; 2]; n];
            basis.eval_with_grad(r, s, &mut v, &mut g);
            let mut vp = vec![0.0; n];
            let mut vm = vec![0.0; n];
            for c in 0..2 {
                let (dr, ds) = if c == 0 { (h, 0.0) } else { (0.0, h) };
                basis.eval(r + dr, s + ds, &mut vp);
                basis.eval(r - dr, s - ds, &mut vm);
                for i in 0..n {
                    let fd = (vp[i] - vm[i]) / (2.0 * h);
                    assert!((fd - g[i][c]).abs() < 1e-6 * (1.0 + fd.abs()), "fn {i} dir {c}: {fd} vs {}", g[i][c]);
                }
            }
        }
    }

    #[test]
    fn first_function_is_constant() {
        let basis = Basis::new(2).unwrap();
        let mut v = vec![0.0; 6];
        let mut g = vec![[0.0; 2]; 6];
        for &(r, s) in &[(0.0, 0.0), (0.3, 0.3), (0.0, 1.0)] {
            basis.eval_with_grad(r, s, &mut v, &mut g);
            assert!((v[0] - 2f64.sqrt()).abs() < 1e-15);
            assert_eq!(g[0], [0.0, 0.0]);
            assert!(v.iter().all(|x| x.is_finite()));
        }
    }
}
