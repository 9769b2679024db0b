//! Gauss–Legendre rules on `[0, 1]` and collapsed (Duffy) product rules on the
//! reference triangle `{r, s ≥ 0, r + s ≤ 1}`.

use crate::error::{Error, Result};

/// Highest polynomial degree for which rules are generated.
pub const MAX_DEGREE: usize = 40;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    pub exact_degree: usize,
}

pub type LineRule = QuadratureRule<1>;
pub type TriangleRule = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

/// `n`-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        return Err(Error::QuadratureDegree {
            requested: degree,
            max: MAX_DEGREE,
        });
    }
    Ok(())
}

/// Gauss–Legendre rule on `[0, 1]` exact for polynomials of `degree`.
pub fn line_rule(degree: usize) -> Result<LineRule> {
    check_degree(degree)?;
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(LineRule {
        points: x.iter().map(|&t| [0.5 * (t + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        exact_degree: 2 * n - 1,
    })
}

/// Collapsed product rule on the reference triangle exact for `degree`.
///
/// Uses `(r, s) = (a, (1 - a) b)` with Jacobian `1 - a`, so the `a` direction
/// needs one extra degree of exactness.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let na = degree.div_ceil(2) + 1;
    let nb = degree / 2 + 1;
    let (xa, wa) = gauss_legendre(na);
    let (xb, wb) = gauss_legendre(nb);
    let mut points = Vec::with_capacity(na * nb);
    let mut weights = Vec::with_capacity(na * nb);
    for (ta, wai) in xa.iter().zip(&wa) {
        let a = 0.5 * (ta + 1.0);
        for (tb, wbj) in xb.iter().zip(&wb) {
            let b = 0.5 * (tb + 1.0);
            points.push([a, (1.0 - a) * b]);
            weights.push(0.25 * wai * wbj * (1.0 - a));
        }
    }
    Ok(TriangleRule {
        points,
        weights,
        exact_degree: (2 * na - 2).min(2 * nb - 1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    // ∫_T r^a s^b = a! b! / (a + b + 2)!
    fn monomial_integral(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn gauss_legendre_small() {
        let (x, w) = gauss_legendre(2);
        assert!((x[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-15);
        let (x, w) = gauss_legendre(3);
        assert_eq!(x[1], 0.0);
        assert!((w[1] - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn weights_sum_to_measure() {
        for deg in 0..=MAX_DEGREE {
            let t = triangle_rule(deg).unwrap();
            let l = line_rule(deg).unwrap();
            assert!((t.weights.iter().sum::<f64>() - 0.5).abs() < 1e-14, "deg {deg}");
            assert!((l.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14, "deg {deg}");
            assert!(t.weights.iter().all(|&w| w > 0.0));
            assert!(t.exact_degree >= deg && l.exact_degree >= deg);
        }
    }

    #[test]
    fn triangle_exactness() {
        for deg in 0..=24u32 {
            let rule = triangle_rule(deg as usize).unwrap();
            for a in 0..=deg {
                let b = deg - a;
                let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32)).sum();
                let exact = monomial_integral(a, b);
                assert!((q - exact).abs() < 1e-13 * exact.max(1e-3), "r^{a} s^{b}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn line_exactness() {
        for deg in 0..=30 {
            let rule = line_rule(deg).unwrap();
            for k in 0..=deg {
                let q: f64 = rule.iter().map(|(p, w)| w * p[0].powi(k as i32)).sum();
                assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "deg {deg} s^{k}");
            }
        }
    }

    #[test]
    fn named_values() {
        let one: f64 = triangle_rule(1).unwrap().weights.iter().sum();
        assert!((one - 0.5).abs() < 1e-15);
        let xy: f64 = triangle_rule(2).unwrap().iter().map(|(p, w)| w * p[0] * p[1]).sum();
        assert!((xy - 1.0 / 24.0).abs() < 1e-15);
        let s3: f64 = line_rule(3).unwrap().iter().map(|(p, w)| w * p[0].powi(3)).sum();
        assert!((s3 - 0.25).abs() < 1e-15);
    }

    #[test]
    fn too_high_degree() {
        let err = triangle_rule(MAX_DEGREE + 1).unwrap_err();
        assert!(err.to_string().contains(&MAX_DEGREE.to_string()));
        assert!(line_rule(MAX_DEGREE + 5).is_err());
    }
}
