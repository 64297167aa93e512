//! Finite-volume discretisation of `A = -(a u')' - b u` on `[0, L]` with
//! homogeneous Dirichlet conditions, its eigenbasis, and the mode-wise
//! multipliers `S(t)`, `S'(t)`, `S''(t)` and `A^γ`.
//!
//! Fields are stored at all nodes `x_0..x_M`, boundary values included.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{MLParams, MittagLeffler};
use crate::tridiag;

pub type Field = Vec<f64>;

#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub length: f64,
    /// Number of intervals; there are `M + 1` nodes and `M - 1` unknowns.
    pub m: usize,
    pub h: f64,
    /// `a` at the cell midpoints `x_{i+1/2}`, `i = 0..M-1`.
    pub a_mid: Vec<f64>,
    /// `b` at the nodes.
    pub b_nodes: Vec<f64>,
    /// Smallest sampled value of `a`.
    pub nu: f64,
}

/// Sample the coefficients and build the symmetric stencil.
pub fn discretize(
    length: f64,
    a_coef: &dyn Fn(f64) -> f64,
    b_coef: &dyn Fn(f64) -> f64,
    m: usize,
) -> Result<EllipticOperator> {
    if m < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 intervals, got {m}")));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::InvalidParameter(format!("interval length must be positive, got {length}")));
    }
    let h = length / m as f64;
    let mut a_mid = Vec::with_capacity(m);
    for i in 0..m {
        let x = (i as f64 + 0.5) * h;
        let a = a_coef(x);
        if !(a > 0.0) {
            return Err(Error::SignViolation { node: i, x, what: "a(x) must be positive" });
        }
        a_mid.push(a);
    }
    let mut b_nodes = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let x = i as f64 * h;
        let b = b_coef(x);
        if !(b <= 0.0) {
            return Err(Error::SignViolation { node: i, x, what: "b(x) must be non-positive" });
        }
        b_nodes.push(b);
    }
    let nu = a_mid.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(EllipticOperator { length, m, h, a_mid, b_nodes, nu })
}

impl EllipticOperator {
    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|i| i as f64 * self.h).collect()
    }

    /// Diagonal and off-diagonal of the `(M-1) x (M-1)` interior matrix.
    pub fn tridiagonal(&self) -> (Vec<f64>, Vec<f64>) {
        let h2 = self.h * self.h;
        let d = (1..self.m)
            .map(|i| (self.a_mid[i - 1] + self.a_mid[i]) / h2 - self.b_nodes[i])
            .collect();
        let e = (1..self.m - 1).map(|i| -self.a_mid[i] / h2).collect();
        (d, e)
    }

    /// `A v` at the interior nodes; boundary entries are zero.
    pub fn apply(&self, v: &[f64]) -> Field {
        let h2 = self.h * self.h;
        let mut out = vec![0.0; self.m + 1];
        for i in 1..self.m {
            let flux = self.a_mid[i] * (v[i + 1] - v[i]) - self.a_mid[i - 1] * (v[i] - v[i - 1]);
            out[i] = -flux / h2 - self.b_nodes[i] * v[i];
        }
        out
    }
}

/// Orthonormal eigenpairs of the discrete operator.
#[derive(Debug, Clone)]
pub struct SpectralBasis {
    pub length: f64,
    pub m: usize,
    pub lambdas: Vec<f64>,
    pub modes: Vec<Field>,
    /// Grid spacing: interior trapezoid weight.
    pub weight: f64,
}

/// Lowest `n` eigenpairs by Sturm bisection and inverse iteration.
pub fn eigendecompose(op: &EllipticOperator, n: usize) -> Result<SpectralBasis> {
    let dim = op.m - 1;
    if n == 0 || n > dim {
        return Err(Error::InvalidParameter(format!(
            "mode count must be in 1..={dim}, got {n}"
        )));
    }
    let (d, e) = op.tridiagonal();
    let h = op.h;
    let mut lambdas = Vec::with_capacity(n);
    let mut modes: Vec<Field> = Vec::with_capacity(n);
    for k in 0..n {
        let lam = tridiag::bisect_eigenvalue(&d, &e, k)?;
        if !(lam > 0.0) {
            return Err(Error::Eigensolver(format!("eigenvalue {k} is not positive: {lam}")));
        }
        let v = tridiag::inverse_iteration(&d, &e, lam, k as u64 + 1)?;
        let mut phi = vec![0.0; op.m + 1];
        phi[1..op.m].copy_from_slice(&v);
        // Gram-Schmidt against earlier modes (matters for close eigenvalues)
        for prev in &modes {
            let c = h * dot(prev, &phi);
            phi.iter_mut().zip(prev).for_each(|(p, q)| *p -= c * q);
        }
        let norm = (h * dot(&phi, &phi)).sqrt();
        phi.iter_mut().for_each(|p| *p /= norm);
        // fix the sign: positive slope at the left end
        if phi[1] < 0.0 {
            phi.iter_mut().for_each(|p| *p = -*p);
        }
        lambdas.push(lam);
        modes.push(phi);
    }
    Ok(SpectralBasis { length: op.length, m: op.m, lambdas, modes, weight: h })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multiplier of mode `n` in `S(t)` (`deriv = 0`), `S'(t)` or `S''(t)`.
pub fn s_multiplier(ml: &SMultipliers, lambda: f64, t: f64, deriv: u8) -> Result<f64> {
    let alpha = ml.alpha1;
    match deriv {
        0 => {
            if t == 0.0 {
                return Ok(1.0);
            }
            if t < 0.0 {
                return Err(Error::Domain(format!("S(t) needs t >= 0, got {t}")));
            }
            ml.e1.eval_real(-lambda * t.powf(alpha))
        }
        1 | 2 => {
            if !(t > 0.0) {
                return Err(Error::Domain(format!("derivative {deriv} of S(t) needs t > 0, got {t}")));
            }
            let z = -lambda * t.powf(alpha);
            if deriv == 1 {
                Ok(-lambda * t.powf(alpha - 1.0) * ml.ea.eval_real(z)?)
            } else {
                Ok(-lambda * t.powf(alpha - 2.0) * ml.eam1.eval_real(z)?)
            }
        }
        _ => Err(Error::InvalidParameter(format!("deriv must be 0, 1 or 2, got {deriv}"))),
    }
}

/// Cached Mittag-Leffler evaluators behind `S(t)` and its derivatives.
#[derive(Debug, Clone)]
pub struct SMultipliers {
    pub alpha1: f64,
    e1: MittagLeffler,
    ea: MittagLeffler,
    eam1: MittagLeffler,
}

impl SMultipliers {
    pub fn new(alpha1: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha1 < 1.0) {
            return Err(Error::InvalidParameter(format!("alpha1 must lie in (0,1), got {alpha1}")));
        }
        Ok(SMultipliers {
            alpha1,
            e1: MittagLeffler::new(MLParams::new(alpha1, 1.0)?),
            ea: MittagLeffler::new(MLParams::new(alpha1, alpha1)?),
            eam1: MittagLeffler::new(MLParams::new(alpha1, alpha1 - 1.0)?),
        })
    }

    /// `E_{α₁,1}(-λ z^{α₁})` for complex `z` in the right half plane.
    pub fn relaxation_complex(&self, lambda: f64, z: Complex64) -> Result<Complex64> {
        self.e1.eval(-lambda * z.powf(self.alpha1))
    }
}

impl SpectralBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.weight;
        (0..=self.m).map(|i| i as f64 * h).collect()
    }

    /// Trapezoid inner product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let m = self.m;
        let interior: f64 = (1..m).map(|i| f[i] * g[i]).sum();
        self.weight * (interior + 0.5 * (f[0] * g[0] + f[m] * g[m]))
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// Mode coefficients `(v, φ_n)`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|phi| self.inner(v, phi)).collect()
    }

    /// `Σ c_n φ_n`.
    pub fn reconstruct(&self, c: &[f64]) -> Field {
        let mut out = vec![0.0; self.m + 1];
        for (cn, phi) in c.iter().zip(&self.modes) {
            if *cn != 0.0 {
                out.iter_mut().zip(phi).for_each(|(o, p)| *o += cn * p);
            }
        }
        out
    }

    /// Sample a function at the nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        self.nodes().into_iter().map(f).collect()
    }

    /// `‖v - P_N v‖`, the truncation diagnostic.
    pub fn tail_norm(&self, v: &[f64]) -> f64 {
        let p = self.reconstruct(&self.project(v));
        let d: Vec<f64> = v.iter().zip(&p).map(|(a, b)| a - b).collect();
        self.norm(&d)
    }

    /// `‖A^γ ψ‖` from mode coefficients.
    pub fn frac_norm_coeffs(&self, gamma: f64, c: &[f64]) -> f64 {
        c.iter()
            .zip(&self.lambdas)
            .map(|(cn, l)| (l.powf(gamma) * cn).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// `A^γ v` truncated at `N` modes, with its norm.
    pub fn frac_power_apply(&self, gamma: f64, v: &[f64]) -> Result<(Field, f64)> {
        if !(-1.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidParameter(format!("gamma must lie in [-1,1], got {gamma}")));
        }
        let c: Vec<f64> = self
            .project(v)
            .iter()
            .zip(&self.lambdas)
            .map(|(cn, l)| l.powf(gamma) * cn)
            .collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok((self.reconstruct(&c), norm))
    }

    /// `S(t)a`, `S'(t)a` or `S''(t)a`.
    pub fn s_apply(&self, alpha1: f64, t: f64, a: &[f64], deriv: u8) -> Result<Field> {
        let ml = SMultipliers::new(alpha1)?;
        let c = self.project(a);
        let mut out = Vec::with_capacity(c.len());
        for (cn, &lam) in c.iter().zip(&self.lambdas) {
            out.push(cn * s_multiplier(&ml, lam, t, deriv)?);
        }
        Ok(self.reconstruct(&out))
    }

    /// Export as CSV: header `n,lambda,<x_0>,...,<x_M>`, one row per mode.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write!(w, "n,lambda")?;
        for x in self.nodes() {
            write!(w, ",{x:.17e}")?;
        }
        writeln!(w)?;
        for (k, (lam, phi)) in self.lambdas.iter().zip(&self.modes).enumerate() {
            write!(w, "{},{lam:.17e}", k + 1)?;
            for v in phi {
                write!(w, ",{v:.17e}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty basis file".into()))??;
        let xs: Vec<f64> = header
            .split(',')
            .skip(2)
            .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad node {s}: {e}"))))
            .collect::<Result<_>>()?;
        if xs.len() < 3 {
            return Err(Error::Config("basis file has too few nodes".into()));
        }
        let m = xs.len() - 1;
        let length = xs[m];
        let mut lambdas = Vec::new();
        let mut modes = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.parse::<f64>().map_err(|e| Error::Config(format!("bad value {s}: {e}"))))
                .collect::<Result<_>>()?;
            if vals.len() != m + 3 {
                return Err(Error::Config(format!("row has {} values, expected {}", vals.len(), m + 3)));
            }
            lambdas.push(vals[1]);
            modes.push(vals[2..].to_vec());
        }
        Ok(SpectralBasis { length, m, lambdas, modes, weight: length / m as f64 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn laplacian(m: usize) -> EllipticOperator {
        discretize(PI, &|_| 1.0, &|_| 0.0, m).unwrap()
    }

    #[test]
    fn sine_is_discrete_eigenfunction() {
        let op = discretize(1.0, &|_| 1.0, &|_| 0.0, 64).unwrap();
        let v: Field = op.nodes().iter().map(|x| (PI * x).sin()).collect();
        let av = op.apply(&v);
        for i in 1..op.m {
            assert!((av[i] - PI * PI * v[i]).abs() < 2e-3 * PI * PI);
        }
    }

    #[test]
    fn potential_shifts_spectrum() {
        let b0 = eigendecompose(&laplacian(128), 5).unwrap();
        let op = discretize(PI, &|_| 1.0, &|_| -1.0, 128).unwrap();
        let b1 = eigendecompose(&op, 5).unwrap();
        for k in 0..5 {
            assert!((b1.lambdas[k] - b0.lambdas[k] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn dirichlet_laplacian_spectrum() {
        let b = eigendecompose(&laplacian(512), 8).unwrap();
        for (k, l) in b.lambdas.iter().enumerate() {
            let n = (k + 1) as f64;
            assert!((l - n * n).abs() < 1e-4 * n.powi(4));
        }
        assert!(b.modes[0][1] > 0.0);
    }

    #[test]
    fn sign_violations_are_reported() {
        let err = discretize(1.0, &|x| if x > 0.5 { -1.0 } else { 1.0 }, &|_| 0.0, 16).unwrap_err();
        assert!(matches!(err, Error::SignViolation { node: 8, .. }));
        let err = discretize(1.0, &|_| 1.0, &|_| 0.5, 16).unwrap_err();
        assert!(matches!(err, Error::SignViolation { node: 0, .. }));
        assert!(discretize(1.0, &|_| 1.0, &|_| 0.0, 4).is_err());
    }

    #[test]
    fn orthonormal_and_residual() {
        let op = discretize(1.0, &|x| 1.0 + 0.5 * x, &|x| -x * x, 1024).unwrap();
        let b = eigendecompose(&op, 64).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let g = b.inner(&b.modes[i], &b.modes[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - want).abs() < 1e-10, "({i},{j}) = {g}");
            }
            let av = op.apply(&b.modes[i]);
            let r: Vec<f64> = av.iter().zip(&b.modes[i]).map(|(x, p)| x - b.lambdas[i] * p).collect();
            assert!(b.norm(&r) <= 1e-8 * b.lambdas[i]);
        }
    }

    #[test]
    fn fractional_powers() {
        let b = eigendecompose(&laplacian(128), 16).unwrap();
        let v = b.reconstruct(&(0..16).map(|k| 1.0 / (k + 1) as f64).collect::<Vec<_>>());
        let (p, _) = b.frac_power_apply(0.0, &v).unwrap();
        assert!(b.norm(&v.iter().zip(&p).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-12);
        let (w, _) = b.frac_power_apply(1.0, &v).unwrap();
        let (back, _) = b.frac_power_apply(-1.0, &w).unwrap();
        assert!(b.norm(&v.iter().zip(&back).map(|(a, c)| a - c).collect::<Vec<_>>()) < 1e-10);
        let (half, norm) = b.frac_power_apply(0.5, &b.modes[0]).unwrap();
        assert!((norm - b.lambdas[0].sqrt()).abs() < 1e-12);
        assert!((half[10] - b.lambdas[0].sqrt() * b.modes[0][10]).abs() < 1e-12);
        assert!(b.frac_power_apply(1.5, &v).is_err());
    }

    #[test]
    fn solution_operator_on_first_mode() {
        let b = eigendecompose(&laplacian(128), 8).unwrap();
        let a = b.modes[0].clone();
        let s0 = b.s_apply(0.7, 0.0, &a, 0).unwrap();
        assert!((s0[20] - a[20]).abs() < 1e-12);
        let ml = MittagLeffler::new(MLParams::new(0.7, 1.0).unwrap());
        let t: f64 = 0.3;
        let want = ml.eval_real(-b.lambdas[0] * t.powf(0.7)).unwrap();
        let s = b.s_apply(0.7, t, &a, 0).unwrap();
        assert!((s[20] - want * a[20]).abs() < 1e-12);
        assert!(b.s_apply(0.7, 0.0, &a, 1).is_err());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let b = eigendecompose(&laplacian(128), 8).unwrap();
        let ml = SMultipliers::new(0.6).unwrap();
        for &lam in &b.lambdas {
            for &t in &[0.1, 0.5, 2.0] {
                let dt = 1e-4;
                let fd = (s_multiplier(&ml, lam, t + dt, 0).unwrap()
                    - s_multiplier(&ml, lam, t - dt, 0).unwrap())
                    / (2.0 * dt);
                let d1 = s_multiplier(&ml, lam, t, 1).unwrap();
                assert!((fd - d1).abs() < 1e-6 * d1.abs().max(1.0), "{lam} {t}");
                let fd2 = (s_multiplier(&ml, lam, t + dt, 1).unwrap()
                    - s_multiplier(&ml, lam, t - dt, 1).unwrap())
                    / (2.0 * dt);
                let d2 = s_multiplier(&ml, lam, t, 2).unwrap();
                assert!((fd2 - d2).abs() < 1e-5 * d2.abs().max(1.0), "{lam} {t}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let b = eigendecompose(&laplacian(16), 3).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let back = SpectralBasis::read_csv(&buf[..]).unwrap();
        assert_eq!(back.lambdas, b.lambdas);
        assert_eq!(back.modes, b.modes);
        assert_eq!(back.m, 16);
    }
}
