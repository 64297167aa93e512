//! Laplace-domain representation for constant `q_j`: the per-mode symbol
//! `h_n(s)`, its numerical inversion, the resolvent series `J(η)` and
//! eigenprojections recovered as contour integrals of `J`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::mild_solver::Model;
use crate::spectral::{Field, SpectralBasis};

/// Default node count of the inversion contour.
pub const TALBOT_NODES: usize = 64;

/// `h_n(s) = s^{-1} P(s) / (P(s) + λ_n)` with `P(s) = s^{α₁} + Σ_j q_j s^{α_j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceSymbol {
    pub alphas: Vec<f64>,
    pub q_consts: Vec<f64>,
    pub lambda: f64,
}

impl LaplaceSymbol {
    pub fn new(alphas: Vec<f64>, q_consts: Vec<f64>, lambda: f64) -> Result<Self> {
        if alphas.is_empty() || q_consts.len() + 1 != alphas.len() {
            return Err(Error::InvalidParameter(format!(
                "{} orders need {} constants q_j, got {}",
                alphas.len(),
                alphas.len().saturating_sub(1),
                q_consts.len()
            )));
        }
        if q_consts.iter().any(|q| !q.is_finite()) {
            return Err(Error::InvalidParameter("q_j must be finite".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("eigenvalue must be positive, got {lambda}")));
        }
        Ok(LaplaceSymbol { alphas, q_consts, lambda })
    }

    /// Some `q_j < 0`: the symbol may have poles off the cut.
    pub fn flagged(&self) -> bool {
        self.q_consts.iter().any(|q| *q < 0.0)
    }

    /// `η = s^{α₁} + Σ q_j s^{α_j}` on the principal branch.
    pub fn eta(&self, s: Complex64) -> Complex64 {
        let mut p = s.powf(self.alphas[0]);
        for (q, a) in self.q_consts.iter().zip(&self.alphas[1..]) {
            p += q * s.powf(*a);
        }
        p
    }
}

/// Evaluate `h_n(s)`.
pub fn symbol_eval(sym: &LaplaceSymbol, s: Complex64) -> Result<Complex64> {
    if s.norm() == 0.0 || (s.im == 0.0 && s.re < 0.0) {
        return Err(Error::PoleProximity(format!("s = {s} lies on the branch cut")));
    }
    let p = sym.eta(s);
    let den = p + sym.lambda;
    if den.norm() < 1e-14 {
        return Err(Error::PoleProximity(format!("symbol denominator vanishes at s = {s}")));
    }
    Ok(p / (den * s))
}

fn talbot(sym: &LaplaceSymbol, t: f64, n: usize) -> Result<f64> {
    // Weideman's optimised cotangent contour, midpoint rule on (0, π)
    let (a0, a1, a2, a3) = (-0.6122, 0.5017, 0.6407, 0.2645);
    let scale = n as f64 / t;
    let mut acc = 0.0;
    for k in 0..n / 2 {
        let th = (k as f64 + 0.5) * 2.0 * PI / n as f64;
        let c = a2 * th;
        let cot = c.cos() / c.sin();
        let z = Complex64::new(scale * (a0 + a1 * th * cot), scale * a3 * th);
        let dz = Complex64::new(scale * a1 * (cot - c / (c.sin() * c.sin())), scale * a3);
        let v = (z * t).exp() * symbol_eval(sym, z)? * dz;
        acc += v.im;
    }
    Ok(2.0 * acc / n as f64)
}

/// `c_n(t)/(a, φ_n)` by inversion along a deformed contour around the cut.
/// The result is accepted when it agrees with a 3/4-size contour; otherwise
/// the node count is doubled once.
pub fn invert_symbol(sym: &LaplaceSymbol, t: f64) -> Result<f64> {
    invert_symbol_with(sym, t, TALBOT_NODES)
}

pub fn invert_symbol_with(sym: &LaplaceSymbol, t: f64, nodes: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Contour { t, detail: "inversion needs t > 0".into() });
    }
    let mut n = nodes.max(8) & !3;
    for _ in 0..2 {
        let f = talbot(sym, t, n)?;
        let g = talbot(sym, t, 3 * n / 4)?;
        if (f - g).abs() <= 1e-9 * f.abs().max(1e-3) && f.is_finite() {
            return Ok(f);
        }
        n *= 2;
    }
    Err(Error::Contour { t, detail: format!("no agreement up to {} contour nodes", n / 2) })
}

fn constant_q(model: &Model) -> Result<Vec<f64>> {
    model
        .problem
        .q
        .iter()
        .map(|q| {
            q.as_const()
                .ok_or_else(|| Error::InvalidParameter("the Laplace closed form needs constant q_j".into()))
        })
        .collect()
}

/// Mode coefficients `c_n(t)` from the closed form.
pub fn laplace_coeffs(model: &Model, t: f64) -> Result<Vec<f64>> {
    let p = &model.problem;
    if p.forcing.is_some() || !p.drift.is_zero() {
        return Err(Error::InvalidParameter("the Laplace closed form needs F = 0 and B = 0".into()));
    }
    let q = constant_q(model)?;
    if t == 0.0 {
        return Ok(model.a_coeffs.clone());
    }
    model
        .basis
        .lambdas
        .iter()
        .zip(&model.a_coeffs)
        .map(|(&lam, &a)| {
            let sym = LaplaceSymbol::new(p.alphas.clone(), q.clone(), lam)?;
            Ok(a * invert_symbol(&sym, t)?)
        })
        .collect()
}

/// `u(t) = Σ_n c_n(t) φ_n`.
pub fn laplace_solution(model: &Model, t: f64) -> Result<Field> {
    Ok(model.basis.reconstruct(&laplace_coeffs(model, t)?))
}

/// Smallest distance of `η(M + iy)` from `(-∞, 0]` over `|y| ≤ y_max`.
pub fn eta_scan(sym: &LaplaceSymbol, abscissa: f64, y_max: f64, samples: usize) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..=samples {
        let y = -y_max + 2.0 * y_max * i as f64 / samples as f64;
        let eta = sym.eta(Complex64::new(abscissa, y));
        let d = if eta.re >= 0.0 { eta.norm() } else { eta.im.abs() };
        best = best.min(d);
    }
    best
}

/// `η` together with the projections `(a, φ_n)`.
#[derive(Debug, Clone)]
pub struct ResolventQuery<'a> {
    pub eta: Complex64,
    pub projections: Vec<f64>,
    pub basis: &'a SpectralBasis,
}

/// `J(η) = Σ_n (a, φ_n)/(η + λ_n) φ_n` at the spatial nodes.
pub fn resolvent_sum(q: &ResolventQuery) -> Result<Vec<Complex64>> {
    let coeffs = resolvent_coeffs(q.eta, &q.projections, &q.basis.lambdas)?;
    let m = q.basis.m;
    let mut out = vec![Complex64::new(0.0, 0.0); m + 1];
    for (c, phi) in coeffs.iter().zip(&q.basis.modes) {
        out.iter_mut().zip(phi).for_each(|(o, p)| *o += c * p);
    }
    Ok(out)
}

fn resolvent_coeffs(eta: Complex64, a: &[f64], lambdas: &[f64]) -> Result<Vec<Complex64>> {
    a.iter()
        .zip(lambdas)
        .map(|(&an, &lam)| {
            let d = eta + lam;
            if d.norm() <= 1e-12 * lam {
                Err(Error::PoleProximity(format!("eta = {eta} is at the pole -{lam}")))
            } else {
                Ok(an / d)
            }
        })
        .collect()
}

/// Default circle radius around `-μ_k`: half the gap to the nearest other
/// eigenvalue, floored at `1e-6 μ_k`.
pub fn default_radius(lambdas: &[f64], k: usize) -> f64 {
    let mu = lambdas[k];
    let gap = lambdas
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, l)| (l - mu).abs())
        .fold(f64::INFINITY, f64::min);
    let r = if gap.is_finite() { 0.5 * gap } else { 0.5 * mu };
    r.max(1e-6 * mu)
}

/// Mode coefficients of the eigenprojection onto `Ker(μ_k - A)`, computed as
/// `(1/2πi)∮ J(η) dη` over the circle `|η + μ_k| = radius`.
pub fn residue_coeffs(projections: &[f64], lambdas: &[f64], k: usize, radius: f64) -> Result<Vec<f64>> {
    if k >= lambdas.len() {
        return Err(Error::InvalidParameter(format!("eigenvalue index {k} out of range")));
    }
    let mu = lambdas[k];
    if !(radius > 0.0) {
        return Err(Error::Enclosure(format!("radius must be positive, got {radius}")));
    }
    for (i, &l) in lambdas.iter().enumerate() {
        let d = (l - mu).abs();
        if i != k && d <= radius * (1.0 + 1e-12) && l != mu {
            return Err(Error::Enclosure(format!(
                "circle of radius {radius} around -{mu} also encloses -{l} (eigenvalue {})",
                i + 1
            )));
        }
    }
    let n = projections.len().min(lambdas.len());
    let eval = |p: usize| -> Result<Vec<f64>> {
        let mut acc = vec![0.0; n];
        for j in 0..p {
            let th = 2.0 * PI * (j as f64 + 0.5) / p as f64;
            let w = Complex64::from_polar(radius, th);
            let c = resolvent_coeffs(w - mu, &projections[..n], &lambdas[..n])?;
            for (a, cn) in acc.iter_mut().zip(&c) {
                *a += (cn * w).re / p as f64;
            }
        }
        Ok(acc)
    };
    let mut p = 32;
    let mut prev = eval(p)?;
    while p < 1 << 14 {
        p *= 2;
        let next = eval(p)?;
        let change = next.iter().zip(&prev).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = projections.iter().map(|v| v.abs()).fold(1e-300, f64::max);
        if change <= 1e-13 * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Quadrature { term: 0, detail: format!("residue around -{mu} did not converge") })
}

/// The eigenprojection as a field.
pub fn residue_extract(q: &ResolventQuery, k: usize, radius: f64) -> Result<Field> {
    let c = residue_coeffs(&q.projections, &q.basis.lambdas, k, radius)?;
    Ok(q.basis.reconstruct(&c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{MLParams, MittagLeffler};
    use crate::spectral::{discretize, eigendecompose};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_term_symbol() {
        let sym = LaplaceSymbol::new(vec![0.6], vec![], 2.0).unwrap();
        let s = c(1.5, 0.7);
        let want = s.powf(-0.4) / (s.powf(0.6) + 2.0);
        assert!((symbol_eval(&sym, s).unwrap() - want).norm() < 1e-15);
        let big = symbol_eval(&sym, c(1e12, 0.0)).unwrap() * 1e12;
        assert!((big.re - 1.0).abs() < 1e-6);
    }

    #[test]
    fn symbol_rejects_cut_and_is_conjugate_symmetric() {
        let sym = LaplaceSymbol::new(vec![0.8, 0.4], vec![1.0], 2.0).unwrap();
        assert!(matches!(symbol_eval(&sym, c(-1.0, 0.0)), Err(Error::PoleProximity(_))));
        let s = c(0.3, 2.2);
        let a = symbol_eval(&sym, s).unwrap();
        let b = symbol_eval(&sym, s.conj()).unwrap();
        assert!((a - b.conj()).norm() <= 1e-15 * a.norm());
        assert!(!sym.flagged());
        assert!(LaplaceSymbol::new(vec![0.8, 0.4], vec![-1.0], 2.0).unwrap().flagged());
    }

    #[test]
    fn inversion_reproduces_mittag_leffler() {
        let ml = MittagLeffler::new(MLParams::new(0.5, 1.0).unwrap());
        let sym = LaplaceSymbol::new(vec![0.5], vec![], 1.0).unwrap();
        let v = invert_symbol(&sym, 1.0).unwrap();
        assert!((v - ml.eval_real(-1.0).unwrap()).abs() < 1e-10);
        let early = invert_symbol(&sym, 1e-10).unwrap();
        assert!((early - 1.0).abs() < 1e-4);
        assert!(invert_symbol(&sym, 0.0).is_err());
    }

    #[test]
    fn single_term_decay_is_monotone() {
        let sym = LaplaceSymbol::new(vec![0.7], vec![], 3.0).unwrap();
        let mut prev = 1.0;
        for i in 1..40 {
            let t = 0.05 * i as f64;
            let v = invert_symbol(&sym, t).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn eta_stays_off_the_cut() {
        let sym = LaplaceSymbol::new(vec![0.8, 0.4], vec![1.0], 1.0).unwrap();
        assert!(eta_scan(&sym, 0.5, 1e4, 20_000) > 0.0);
    }

    fn basis() -> SpectralBasis {
        let op = discretize(PI, &|_| 1.0, &|_| 0.0, 128).unwrap();
        eigendecompose(&op, 8).unwrap()
    }

    #[test]
    fn resolvent_of_single_mode() {
        let b = basis();
        let mut proj = vec![0.0; 8];
        proj[0] = 1.0;
        let eta = c(0.0, 1.0);
        let j = resolvent_sum(&ResolventQuery { eta, projections: proj.clone(), basis: &b }).unwrap();
        let want = 1.0 / (eta + b.lambdas[0]);
        assert!((j[17] - want * b.modes[0][17]).norm() < 1e-14);
        let q = ResolventQuery { eta: c(-b.lambdas[0], 0.0), projections: proj, basis: &b };
        assert!(matches!(resolvent_sum(&q), Err(Error::PoleProximity(_))));
    }

    #[test]
    fn residues_recover_projections() {
        let b = basis();
        let proj: Vec<f64> = (0..8).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
        let mut total = [0.0; 8];
        for k in 0..8 {
            let r = default_radius(&b.lambdas, k);
            let c = residue_coeffs(&proj, &b.lambdas, k, r).unwrap();
            for n in 0..8 {
                let want = if n == k { proj[k] } else { 0.0 };
                assert!((c[n] - want).abs() < 1e-10, "k={k} n={n}");
                total[n] += c[n];
            }
        }
        for n in 0..8 {
            assert!((total[n] - proj[n]).abs() < 1e-10);
        }
        let too_big = (b.lambdas[1] - b.lambdas[0]) * 1.5;
        assert!(matches!(residue_coeffs(&proj, &b.lambdas, 0, too_big), Err(Error::Enclosure(_))));
    }
}
