//! `int prod f_i(x_i) dsigma <= prod (int f_i(x_i)^{1/c_i} dsigma)^{c_i}` on
//! the circle and on `S^2`, for polynomial `f_i >= 0` on `[-1, 1]`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::gauss::gauss_legendre;
use crate::rng;

pub const MAX_DEGREE: usize = 20;
pub const CIRCLE_POINTS: usize = 4096;
pub const LEGENDRE_POINTS: usize = 64;
/// Azimuthal points on `S^2`; the trapezoid rule is exact for trigonometric
/// polynomials of degree below this.
pub const AZIMUTH_POINTS: usize = 128;
const NONNEG_SAMPLES: usize = 4001;

/// Polynomial on `[-1, 1]` by coefficients of `1, u, u^2, ...`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polynomial(pub Vec<f64>);

impl Polynomial {
    pub fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    /// `q(u)^2 + floor` for a random `q` of the given degree.
    pub fn random_nonnegative<R: Rng>(rng: &mut R, half_degree: usize, floor: f64) -> Self {
        let q = rng::normals(rng, half_degree + 1);
        let mut c = vec![0.0; 2 * half_degree + 1];
        for (i, a) in q.iter().enumerate() {
            for (j, b) in q.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        c[0] += floor;
        Polynomial(c)
    }

    fn check(&self, index: usize) -> Result<()> {
        if self.degree() > MAX_DEGREE {
            return Err(Error::InvalidParameter(format!("polynomial {index} has degree above {MAX_DEGREE}")));
        }
        let (nodes, _) = gauss_legendre(LEGENDRE_POINTS);
        let grid = (0..NONNEG_SAMPLES).map(|k| -1.0 + 2.0 * k as f64 / (NONNEG_SAMPLES - 1) as f64);
        for u in grid.chain(nodes) {
            let v = self.eval(u);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::NotPositive { index, value: v });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereReport {
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `log RHS - log LHS`.
    pub gap: f64,
}

fn pow_c(v: f64, c: f64) -> f64 {
    v.max(0.0).powf(1.0 / c)
}

/// Uniform-measure averages of `g(x)` over the unit circle.
fn circle_mean(g: impl Fn(f64, f64) -> f64) -> f64 {
    (0..CIRCLE_POINTS)
        .map(|k| {
            let th = 2.0 * PI * k as f64 / CIRCLE_POINTS as f64;
            g(th.cos(), th.sin())
        })
        .sum::<f64>()
        / CIRCLE_POINTS as f64
}

/// Uniform-measure average over `S^2` in coordinates `x_3 = u`,
/// `(x_1, x_2) = sqrt(1-u^2)(cos th, sin th)`.
fn sphere_mean(g: impl Fn(f64, f64, f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(LEGENDRE_POINTS);
    let mut total = 0.0;
    for (u, w) in nodes.iter().zip(&weights) {
        let r = (1.0 - u * u).sqrt();
        let ring: f64 = (0..AZIMUTH_POINTS)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / AZIMUTH_POINTS as f64;
                g(r * th.cos(), r * th.sin(), *u)
            })
            .sum::<f64>()
            / AZIMUTH_POINTS as f64;
        total += w * ring;
    }
    total / 2.0
}

/// Mean of `g(x_i)` over `S^2`, `(1/2) int_{-1}^{1} g(u) du`.
fn marginal_mean(g: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_legendre(LEGENDRE_POINTS);
    nodes.iter().zip(&weights).map(|(u, w)| w * g(*u)).sum::<f64>() / 2.0
}

/// Evaluates both sides for `n = 2` or `n = 3` with one polynomial per
/// coordinate and exponents `c` (`1/2` gives the square-norm form).
pub fn sphere_quadrature_check(n: usize, family: &[Polynomial], c: &[f64]) -> Result<SphereReport> {
    if !(2..=3).contains(&n) {
        return Err(Error::InvalidParameter(format!("sphere quadrature supports n = 2, 3, got {n}")));
    }
    if family.len() != n {
        return Err(Error::DimensionMismatch { what: "polynomial family", expected: n, found: family.len() });
    }
    if c.len() != n {
        return Err(Error::DimensionMismatch { what: "exponent vector", expected: n, found: c.len() });
    }
    if let Some(index) = c.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::ExponentOutOfRange { index, value: c[index].to_string() });
    }
    for (i, p) in family.iter().enumerate() {
        p.check(i)?;
    }
    let (lhs, marginals): (f64, Vec<f64>) = if n == 2 {
        let lhs = circle_mean(|a, b| family[0].eval(a) * family[1].eval(b));
        let m = (0..2)
            .map(|i| circle_mean(|a, b| pow_c(family[i].eval(if i == 0 { a } else { b }), c[i])))
            .collect();
        (lhs, m)
    } else {
        let lhs = sphere_mean(|a, b, u| family[0].eval(a) * family[1].eval(b) * family[2].eval(u));
        let m = (0..3).map(|i| marginal_mean(|u| pow_c(family[i].eval(u), c[i]))).collect();
        (lhs, m)
    };
    let log_rhs: f64 = marginals.iter().zip(c).map(|(m, ci)| ci * m.ln()).sum();
    let rhs = log_rhs.exp();
    let gap = if lhs <= 0.0 { f64::INFINITY } else { log_rhs - lhs.ln() };
    Ok(SphereReport { n, lhs, rhs, gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constants() {
        let one = Polynomial(vec![1.0]);
        for n in [2, 3] {
            let r = sphere_quadrature_check(n, &vec![one.clone(); n], &vec![0.5; n]).unwrap();
            assert_abs_diff_eq!(r.gap, 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn squares_on_s2() {
        let sq = Polynomial(vec![0.0, 0.0, 1.0]);
        let r = sphere_quadrature_check(3, &[sq.clone(), sq.clone(), sq], &[0.5; 3]).unwrap();
        assert_abs_diff_eq!(r.lhs, 1.0 / 105.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.rhs, 5f64.powf(-1.5), epsilon = 1e-14);
    }

    #[test]
    fn linear_on_circle() {
        let p = Polynomial(vec![1.0, 1.0]);
        let r = sphere_quadrature_check(2, &[p.clone(), p], &[0.5; 2]).unwrap();
        assert_abs_diff_eq!(r.lhs, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(r.rhs, 1.5, epsilon = 1e-13);
    }

    #[test]
    fn rejects_negative_and_bad_shapes() {
        let neg = Polynomial(vec![0.0, 1.0]);
        let one = Polynomial(vec![1.0]);
        assert!(matches!(sphere_quadrature_check(2, &[neg, one.clone()], &[0.5; 2]), Err(Error::NotPositive { .. })));
        assert!(sphere_quadrature_check(4, &vec![one.clone(); 4], &[0.5; 4]).is_err());
        assert!(sphere_quadrature_check(3, &[one.clone(), one], &[0.5; 3]).is_err());
    }

    #[test]
    fn random_nonnegative_is_nonnegative() {
        let mut rng = rng::stream_rng(3, 0);
        let p = Polynomial::random_nonnegative(&mut rng, 5, 0.0);
        assert_eq!(p.degree(), 10);
        assert!(p.check(0).is_ok());
    }
}
