//! Gauss–Jacobi rules by the Golub–Welsch algorithm.

use crate::error::{Error, Result};
use crate::specfun::beta_fn;
use crate::tridiag::ql_first_components;

/// Nodes and weights of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `n`-point rule for `∫_{-1}^{1} (1-x)^a (1+x)^b f(x) dx`, `a, b > -1`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 || !(a > -1.0 && b > -1.0) {
        return Err(Error::InvalidParameter(format!(
            "Gauss-Jacobi needs n >= 1 and a, b > -1 (n={n}, a={a}, b={b})"
        )));
    }
    let ab = a + b;
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    diag[0] = (b - a) / (ab + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        diag[k] = (b * b - a * a) / (s * (s + 2.0));
        let beta = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        off[k - 1] = beta.sqrt();
    }
    let mu0 = 2f64.powf(ab + 1.0) * beta_fn(a + 1.0, b + 1.0)?;
    let (nodes, z) = ql_first_components(&diag, &off)?;
    let weights = z.iter().map(|v| mu0 * v * v).collect();
    Ok(Rule { nodes, weights })
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Rule> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// Rule for `∫_0^1 (1-ξ)^a ξ^b f(ξ) dξ`.
pub fn gauss_jacobi_unit(n: usize, a: f64, b: f64) -> Result<Rule> {
    let r = gauss_jacobi(n, a, b)?;
    let scale = 0.5f64.powf(a + b + 1.0);
    Ok(Rule {
        nodes: r.nodes.iter().map(|x| 0.5 * (x + 1.0)).collect(),
        weights: r.weights.iter().map(|w| w * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::gamma_fn;

    #[test]
    fn legendre_integrates_polynomials() {
        let r = gauss_legendre(10).unwrap();
        assert!((r.integrate(|x| x.powi(18)) - 2.0 / 19.0).abs() < 1e-14);
        assert!((r.integrate(|_| 1.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_moments_are_beta_functions() {
        let (a, b) = (-0.6, 0.3);
        let r = gauss_jacobi_unit(12, a, b).unwrap();
        for k in 0..10 {
            let exact = beta_fn(b + 1.0 + k as f64, a + 1.0).unwrap();
            let got = r.integrate(|x| x.powi(k));
            assert!((got - exact).abs() < 1e-13 * exact, "k={k}");
        }
    }

    #[test]
    fn strongly_singular_weight() {
        // ∫_0^1 ξ^{-0.9} dξ = 10
        let r = gauss_jacobi_unit(5, 0.0, -0.9).unwrap();
        assert!((r.integrate(|_| 1.0) - 10.0).abs() < 1e-12);
        let got = r.integrate(|x| (1.0 - x).powi(3));
        let exact = gamma_fn(0.1).unwrap() * 6.0 / gamma_fn(4.1).unwrap();
        assert!((got - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(gauss_jacobi(0, 0.0, 0.0).is_err());
        assert!(gauss_jacobi(4, -1.0, 0.0).is_err());
    }
}
